//! Scale-invariant absolute value of relative infinitesimals, the inversion
//! rule, the Cantor-function valuation and the valuation ODE.

use crate::cantor::IfsParams;
use crate::error::{Error, Result};

/// Default number of IFS levels [`cantor_function`] descends before truncating.
pub const DEFAULT_CANTOR_DEPTH: u32 = 48;

/// Deepest descent accepted by [`cantor_function`].
pub const MAX_CANTOR_DEPTH: u32 = 64;

/// Resolution scale `epsilon` in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleContext {
    epsilon: f64,
}

impl ScaleContext {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `log(1/epsilon)`, strictly positive.
    pub fn log_inv(&self) -> f64 {
        -self.epsilon.ln()
    }

    /// Additive slack `log 2 / log(1/epsilon)` by which a finite-scale sum can
    /// fall below the smaller of its summands' valuations.
    pub fn triangle_slack(&self) -> f64 {
        std::f64::consts::LN_2 / self.log_inv()
    }
}

/// A relative infinitesimal at some scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infinitesimal {
    /// A concrete value `0 <= t < epsilon`.
    Numeric(f64),
    /// `epsilon^(1 + delta)` in the `epsilon -> 0` limit, `delta > 0`.
    Exponent(f64),
}

impl Infinitesimal {
    pub fn numeric(ctx: &ScaleContext, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t < ctx.epsilon) {
            return Err(Error::domain(format!(
                "{t} is not a relative infinitesimal at scale {}",
                ctx.epsilon
            )));
        }
        Ok(Infinitesimal::Numeric(t))
    }

    pub fn exponent(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!(
                "exponent delta must be positive, got {delta}"
            )));
        }
        Ok(Infinitesimal::Exponent(delta))
    }

    /// Concrete value of an exponent-form infinitesimal at a finite scale.
    pub fn realize(&self, ctx: &ScaleContext) -> f64 {
        match *self {
            Infinitesimal::Numeric(t) => t,
            Infinitesimal::Exponent(d) => ctx.epsilon.powf(1.0 + d),
        }
    }
}

/// `log(epsilon/|t|) / log(1/epsilon)`, with the hard zero valued at 0.
pub fn valuation(ctx: &ScaleContext, x: Infinitesimal) -> Result<f64> {
    match x {
        Infinitesimal::Exponent(d) => {
            if !(d > 0.0) {
                return Err(Error::domain(format!(
                    "exponent delta must be positive, got {d}"
                )));
            }
            Ok(d)
        }
        Infinitesimal::Numeric(t) => {
            let a = t.abs();
            if !(a < ctx.epsilon) {
                return Err(Error::domain(format!(
                    "|{t}| is not below the scale {}",
                    ctx.epsilon
                )));
            }
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(((ctx.epsilon / a).ln() / ctx.log_inv()).max(0.0))
        }
    }
}

/// Limit valuation of a sum of exponent-form infinitesimals: the dominant
/// (smaller) exponent wins.
pub fn add_exponent_form(a: Infinitesimal, b: Infinitesimal) -> Result<Infinitesimal> {
    match (a, b) {
        (Infinitesimal::Exponent(x), Infinitesimal::Exponent(y)) => {
            Infinitesimal::exponent(x.min(y))
        }
        _ => Err(Error::domain(
            "exponent-form addition needs two exponent-form operands",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleReport {
    pub holds: bool,
    pub v_sum: f64,
    pub v_a: f64,
    pub v_b: f64,
    /// `log 2 / log(1/epsilon)`.
    pub slack_bound: f64,
    /// How far `v(a+b)` sits below the dominant-term value `min(v(a), v(b))`;
    /// zero in the `epsilon -> 0` limit and at most `slack_bound` at finite scale.
    pub slack_used: f64,
}

/// Checks `v(a+b) <= max(v(a), v(b)) + slack` for two numeric infinitesimals
/// and reports how much of the finite-scale slack the pair consumed.
pub fn strong_triangle_check(ctx: &ScaleContext, a: f64, b: f64) -> Result<TriangleReport> {
    let sum = a + b;
    if !(sum.abs() < ctx.epsilon) {
        return Err(Error::domain(format!(
            "sum {sum} is not below the scale {}",
            ctx.epsilon
        )));
    }
    let ia = Infinitesimal::numeric(ctx, a)?;
    let ib = Infinitesimal::numeric(ctx, b)?;
    let v_a = valuation(ctx, ia)?;
    let v_b = valuation(ctx, ib)?;
    let v_sum = valuation(ctx, Infinitesimal::Numeric(sum))?;
    let slack_bound = ctx.triangle_slack();
    // A hard-zero summand leaves the other one unchanged.
    let dominant = match (a == 0.0, b == 0.0) {
        (true, true) => 0.0,
        (true, false) => v_b,
        (false, true) => v_a,
        (false, false) => v_a.min(v_b),
    };
    let slack_used = (dominant - v_sum).max(0.0);
    // Rounding in the logarithms is a few ulps of the valuations themselves.
    let fp = 64.0 * f64::EPSILON * (1.0 + v_a.max(v_b));
    let holds = v_sum <= v_a.max(v_b) + slack_bound + fp && slack_used <= slack_bound + fp;
    Ok(TriangleReport {
        holds,
        v_sum,
        v_a,
        v_b,
        slack_bound,
        slack_used,
    })
}

/// Inversion partner `c * epsilon^2 / t` of a macroscopic `t > epsilon`.
pub fn inversion_partner(t: f64, ctx: &ScaleContext, c: f64) -> Result<f64> {
    if !(t > ctx.epsilon) {
        return Err(Error::domain(format!(
            "t = {t} must exceed the scale {}",
            ctx.epsilon
        )));
    }
    if !(c > 0.0) {
        return Err(Error::domain(format!(
            "proportionality constant must be positive, got {c}"
        )));
    }
    Ok(c * ctx.epsilon * ctx.epsilon / t)
}

/// Cantor function of the IFS set on `[0, eps0]`, normalised to `[0, 1]`.
///
/// Descends the hierarchy one level at a time. A point inside a level-`m`
/// gap gets the locally constant value of that gap; a point that is an
/// endpoint of a retained interval gets its exact dyadic value; anything
/// still inside retained intervals after `depth` levels gets the
/// truncated binary expansion.
pub fn cantor_function(params: &IfsParams, x: f64, depth: u32) -> Result<f64> {
    let eps0 = params.eps0();
    if !(x >= 0.0 && x <= eps0) {
        return Err(Error::domain(format!("x = {x} outside [0, {eps0}]")));
    }
    if depth == 0 || depth > MAX_CANTOR_DEPTH {
        return Err(Error::domain(format!(
            "depth must lie in 1..={MAX_CANTOR_DEPTH}, got {depth}"
        )));
    }
    let beta = params.beta();
    let upper = 1.0 - beta;
    let mut y = x / eps0;
    let mut value = 0.0;
    let mut weight = 1.0;
    for _ in 0..depth {
        if y == 0.0 {
            return Ok(value);
        }
        if y == 1.0 {
            return Ok(value + weight);
        }
        weight *= 0.5;
        if y <= beta {
            y /= beta;
        } else if y >= upper {
            value += weight;
            y = (y - upper) / beta;
        } else {
            return Ok(value + weight);
        }
    }
    Ok(value)
}

/// `i * 3^(-m s)`, the valuation assigned to the `i`-th level-`m` gap.
pub fn gap_valuation(m: u32, i: u64, s: f64) -> Result<f64> {
    if m == 0 || m > 63 {
        return Err(Error::domain(format!(
            "gap level m must lie in 1..=63, got {m}"
        )));
    }
    if i == 0 || i >= 1u64 << m {
        return Err(Error::domain(format!(
            "gap index {i} outside 1..{} for level {m}",
            (1u64 << m) - 1
        )));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!(
            "dimension s must lie in (0,1], got {s}"
        )));
    }
    // 3^(-s) is raised to an integer power so that the middle-third ratio 1/2
    // propagates without fresh rounding at each level.
    let ratio = 3f64.powf(-s);
    Ok(i as f64 * ratio.powi(m as i32))
}

/// Deformed variable `T(t) = t * t^(-v) = t^(1-v)`.
pub fn deformed_variable(t: f64, v: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("t must lie in (0,1), got {t}")));
    }
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(format!(
            "valuation v must be nonnegative, got {v}"
        )));
    }
    Ok(t.powf(1.0 - v))
}

/// Closed-form solution `1 / (k log(x/x0))` of `dv/dxi = -v`, `xi = log log(x/x0)`.
pub fn relative_valuation(k: f64, x0: f64, x: f64) -> f64 {
    1.0 / (k * (x / x0).ln())
}

/// Central-difference step in `xi` used by [`valuation_ode_residual`].
pub const VALUATION_ODE_STEP: f64 = 1e-4;

/// Largest `|dv/dxi + v|` over the samples, with `dv/dxi` from central
/// differences of [`relative_valuation`] evaluated at `x = x0 exp(exp(xi))`.
pub fn valuation_ode_residual(k: f64, x0: f64, x_samples: &[f64]) -> Result<f64> {
    if !(k > 0.0) || !(x0 > 0.0) {
        return Err(Error::domain(format!(
            "k and x0 must be positive, got {k}, {x0}"
        )));
    }
    let h = VALUATION_ODE_STEP;
    let at_xi = |xi: f64| relative_valuation(k, x0, x0 * xi.exp().exp());
    let mut worst = 0.0f64;
    for &x in x_samples {
        let l = (x / x0).ln();
        if !(l > 1.0) {
            return Err(Error::domain(format!(
                "sample x = {x} needs log(x/x0) > 1, got {l}"
            )));
        }
        let xi = l.ln();
        let (plus, minus) = (at_xi(xi + h), at_xi(xi - h));
        if !plus.is_finite() || !minus.is_finite() || plus == 0.0 {
            return Err(Error::domain(format!(
                "sample x = {x} overflows the xi stencil"
            )));
        }
        let deriv = (plus - minus) / (2.0 * h);
        let r = (deriv + relative_valuation(k, x0, x)).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Infinitesimal jump increment `1 + epsilon^(1/s)`.
pub fn jump_increment(epsilon: f64, s: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    if s == 0.0 {
        return Err(Error::Singularity(
            "jump increment has an essential singularity at s = 0".into(),
        ));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("s must lie in (0,1], got {s}")));
    }
    Ok(1.0 + epsilon.powf(1.0 / s))
}
