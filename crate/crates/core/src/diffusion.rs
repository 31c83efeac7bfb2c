//! Gaussian and stretched-exponential propagators, finite-difference residual
//! checks, and quadrature moments.
//!
//! The stretched propagator is
//!
//! ```text
//! W(x, t) = A t^(-beta/2) exp(-lambda (x^(2 alpha) / t^beta)^(1 + nu))
//! ```
//!
//! In the deformed variables `u = |x|^alpha`, `tau = t^beta` it reads
//! `A tau^(-1/2) exp(-lambda (u^2/tau)^(1+nu))`, which for `nu = 0` and
//! `lambda = 1/4` is the heat kernel in `(u, tau)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::sig17;

/// Central-difference step for [`ode_reduction_residual`].
pub const ODE_FD_STEP: f64 = 1e-5;

/// Integrand magnitude below which quadrature tails are dropped.
pub const TAIL_CUTOFF: f64 = 1e-16;

/// Absolute error target handed to the quadrature rule.
pub const QUAD_ABS_TOL: f64 = 1e-12;

/// Relative tolerance for the linearity of the second moment in `tau`.
pub const MSD_LINEARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatorParams {
    pub a: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
}

impl PropagatorParams {
    pub fn new(a: f64, lambda: f64, alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        let p = Self {
            a,
            lambda,
            alpha,
            beta,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    /// `alpha = beta = 1`, `nu = 0`, `lambda = 1/4`: the ordinary heat kernel.
    pub fn gaussian(a: f64) -> Self {
        Self {
            a,
            lambda: 0.25,
            alpha: 1.0,
            beta: 1.0,
            nu: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(self.a > 0.0) || !ok(self.a) {
            return Err(Error::domain(format!("A must be positive, got {}", self.a)));
        }
        if !(self.lambda > 0.0) || !ok(self.lambda) {
            return Err(Error::domain(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.alpha >= 1.0) || !ok(self.alpha) {
            return Err(Error::domain(format!(
                "alpha must be at least 1, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 1.0) || !ok(self.beta) {
            return Err(Error::domain(format!(
                "beta must be at least 1, got {}",
                self.beta
            )));
        }
        if !(self.nu >= 0.0) || !ok(self.nu) {
            return Err(Error::domain(format!(
                "nu must be nonnegative, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    /// Propagator in deformed variables, `u` any real and `tau > 0`.
    pub fn deformed(&self, u: f64, tau: f64) -> f64 {
        self.a * tau.powf(-0.5) * (-self.lambda * (u * u / tau).powf(1.0 + self.nu)).exp()
    }
}

/// `A t^(-1/2) exp(-x^2 / (4t))`.
pub fn gaussian_propagator(x: f64, t: f64, a: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    Ok(a * t.powf(-0.5) * (-x * x / (4.0 * t)).exp())
}

/// Scaling function `w(u) = exp(-u)` of the self-similar reduction.
pub fn scaling_function(u: f64) -> f64 {
    (-u).exp()
}

/// Max `|w'(u) + w(u)|` for `w = exp(-rate u)`, with `w'` by central differences.
///
/// `rate = 1` solves `dw/du = -w`; any other rate leaves a residual of
/// `|1 - rate| w(u)`.
pub fn ode_reduction_residual_for_rate(rate: f64, u_samples: &[f64]) -> f64 {
    let h = ODE_FD_STEP;
    let w = |u: f64| (-rate * u).exp();
    u_samples
        .iter()
        .map(|&u| ((w(u + h) - w(u - h)) / (2.0 * h) + w(u)).abs())
        .fold(0.0, f64::max)
}

pub fn ode_reduction_residual(u_samples: &[f64]) -> f64 {
    ode_reduction_residual_for_rate(1.0, u_samples)
}

/// Stretched-exponential propagator, even in `x_tilde`.
pub fn stretched_propagator(x_tilde: f64, t_tilde: f64, p: &PropagatorParams) -> Result<f64> {
    if !(t_tilde > 0.0) {
        return Err(Error::domain(format!(
            "t_tilde must be positive, got {t_tilde}"
        )));
    }
    let x = x_tilde.abs();
    let ratio = x.powf(2.0 * p.alpha) / t_tilde.powf(p.beta);
    Ok(p.a * t_tilde.powf(-p.beta / 2.0) * (-p.lambda * ratio.powf(1.0 + p.nu)).exp())
}

/// Uniform grid in the deformed variables `(u, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    u: Vec<f64>,
    tau: Vec<f64>,
    du: f64,
    dtau: f64,
}

impl Grid2D {
    /// Points `lo, lo + step, ...` up to `hi` inclusive on each axis.
    pub fn uniform(u_range: (f64, f64), du: f64, tau_range: (f64, f64), dtau: f64) -> Result<Self> {
        if !(du > 0.0 && dtau > 0.0) {
            return Err(Error::domain("grid spacings must be positive"));
        }
        let axis = |(lo, hi): (f64, f64), h: f64| -> Result<Vec<f64>> {
            if !(hi > lo) {
                return Err(Error::domain(format!("empty grid axis [{lo}, {hi}]")));
            }
            let n = ((hi - lo) / h + 1e-9).floor() as usize;
            if n < 2 {
                return Err(Error::domain("each grid axis needs at least 3 points"));
            }
            Ok((0..=n).map(|i| lo + i as f64 * h).collect())
        };
        let u = axis(u_range, du)?;
        let tau = axis(tau_range, dtau)?;
        if !(tau[0] >= 10.0 * dtau) {
            return Err(Error::domain(format!(
                "tau axis must stay at least 10 steps away from 0, starts at {}",
                tau[0]
            )));
        }
        Ok(Self { u, tau, du, dtau })
    }

    pub fn u_points(&self) -> &[f64] {
        &self.u
    }

    pub fn tau_points(&self) -> &[f64] {
        &self.tau
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.du, self.dtau)
    }

    /// The acceptance grid: `u` in `[-3, 3]`, `tau` in `[0.5, 2]`, spacing `1e-3`.
    pub fn standard() -> Self {
        Self::uniform((-3.0, 3.0), 1e-3, (0.5, 2.0), 1e-3).expect("valid constants")
    }
}

/// Max over interior grid points of `|dW/dtau - d2W/du2|`, second-order
/// central differences in both variables.
///
/// Values are produced by [`stretched_propagator`] at `x = |u|^(1/alpha)`,
/// `t = tau^(1/beta)`, so the deformed-variable substitution itself is under
/// test. Only `nu = 0` is accepted: for other `nu` the propagator is not a
/// solution under ordinary derivatives.
pub fn deformed_heat_residual(p: &PropagatorParams, grid: &Grid2D) -> Result<f64> {
    p.validate()?;
    if p.nu != 0.0 {
        return Err(Error::Unsupported(format!(
            "deformed heat residual requires nu = 0 (got {}); for nonzero nu the \
             propagator does not solve the heat equation under ordinary derivatives",
            p.nu
        )));
    }
    let (du, dtau) = grid.spacing();
    let row = |tau: f64| -> Result<Vec<f64>> {
        let t = tau.powf(1.0 / p.beta);
        grid.u
            .iter()
            .map(|&u| stretched_propagator(u.abs().powf(1.0 / p.alpha), t, p))
            .collect()
    };
    let nt = grid.tau.len();
    let nu = grid.u.len();
    (1..nt - 1)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let below = row(grid.tau[j - 1])?;
            let mid = row(grid.tau[j])?;
            let above = row(grid.tau[j + 1])?;
            let mut worst = 0.0f64;
            for i in 1..nu - 1 {
                let dt = (above[i] - below[i]) / (2.0 * dtau);
                let duu = (mid[i + 1] - 2.0 * mid[i] + mid[i - 1]) / (du * du);
                worst = worst.max((dt - duu).abs());
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

fn truncation_radius(p: &PropagatorParams, tau: f64, peak: f64) -> f64 {
    // Solve peak * exp(-lambda (u^2/tau)^(1+nu)) = TAIL_CUTOFF for u.
    let k = (peak / TAIL_CUTOFF).ln().max(1.0);
    tau.sqrt() * (k / p.lambda).powf(1.0 / (2.0 * (1.0 + p.nu)))
}

fn integrate_even(f: impl Fn(f64) -> f64, radius: f64) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(&f, 0.0, radius, QUAD_ABS_TOL);
    let value = 2.0 * out.integral;
    if !value.is_finite() || out.error_estimate > 1e3 * QUAD_ABS_TOL * value.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "quadrature did not converge (estimate {}, error {})",
            value, out.error_estimate
        )));
    }
    Ok(value)
}

fn mass(p: &PropagatorParams, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    let radius = truncation_radius(p, tau, p.a * tau.powf(-0.5));
    integrate_even(|u| p.deformed(u, tau), radius)
}

/// Normalisation `A` making the `tau`-slice integrate to one over `u`.
///
/// The `A` carried by `p` is ignored; for `nu = 0` the result is `sqrt(lambda/pi)`.
pub fn normalize(p: &PropagatorParams, tau: f64) -> Result<f64> {
    p.validate()?;
    mass(&p.with_a(1.0), tau).map(|m| 1.0 / m)
}

/// Factor by which `p.a` must be multiplied to normalise the `tau`-slice.
pub fn normalization_factor(p: &PropagatorParams, tau: f64) -> Result<f64> {
    p.validate()?;
    mass(p, tau).map(|m| 1.0 / m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    /// `(tau, <u^2>(tau))`.
    pub points: Vec<(f64, f64)>,
    /// Mean of `<u^2>/tau` across the points.
    pub coefficient: f64,
    /// Largest relative deviation of `<u^2>/tau` from `coefficient`.
    pub max_rel_dev: f64,
}

/// Second moment `<u^2>(tau) = int u^2 W du / int W du` by quadrature, with
/// the check that `<u^2>/tau` is constant to [`MSD_LINEARITY_TOL`].
pub fn propagator_msd(p: &PropagatorParams, tau_values: &[f64]) -> Result<MomentSeries> {
    p.validate()?;
    if tau_values.is_empty() {
        return Err(Error::domain("no tau values given"));
    }
    let points = tau_values
        .iter()
        .map(|&tau| -> Result<(f64, f64)> {
            let m0 = mass(p, tau)?;
            let radius = truncation_radius(p, tau, p.a * tau.powf(-0.5));
            let m2 = integrate_even(|u| u * u * p.deformed(u, tau), radius)?;
            Ok((tau, m2 / m0))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = points.iter().map(|&(t, m)| m / t).collect();
    let coefficient = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_rel_dev = ratios
        .iter()
        .map(|r| ((r - coefficient) / coefficient).abs())
        .fold(0.0, f64::max);
    if max_rel_dev > MSD_LINEARITY_TOL {
        return Err(Error::Numeric(format!(
            "second moment is not linear in tau (relative deviation {max_rel_dev:e})"
        )));
    }
    Ok(MomentSeries {
        points,
        coefficient,
        max_rel_dev,
    })
}

/// Writes `u,tau,W` rows of the deformed-variable propagator on the grid.
pub fn write_slices_csv<W: Write>(
    p: &PropagatorParams,
    u_points: &[f64],
    tau_points: &[f64],
    out: W,
) -> Result<()> {
    p.validate()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "tau", "W"])?;
    for &tau in tau_points {
        if !(tau > 0.0) {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        for &u in u_points {
            w.write_record([sig17(u), sig17(tau), sig17(p.deformed(u, tau))])?;
        }
    }
    w.flush()?;
    Ok(())
}
