//! Sublinear scaling identity, MSD scaling laws and power-law fitting.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::stats::fit_line;

/// Equality tolerance when comparing two dimensions.
pub const REGIME_TOL: f64 = 1e-12;

/// Minimum number of usable records for [`fit_power_law`].
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdRecord {
    pub t: f64,
    pub msd: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Time-ordered mean-square-displacement records.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MsdSeries {
    records: Vec<MsdRecord>,
}

impl MsdSeries {
    pub fn new(records: Vec<MsdRecord>) -> Result<Self> {
        for r in &records {
            if !(r.t > 0.0) || !r.t.is_finite() {
                return Err(Error::domain(format!(
                    "MSD time must be positive, got {}",
                    r.t
                )));
            }
            if !(r.msd >= 0.0) || !(r.stderr >= 0.0) {
                return Err(Error::domain(format!(
                    "msd and stderr must be nonnegative at t = {}",
                    r.t
                )));
            }
            if r.n == 0 {
                return Err(Error::domain(format!(
                    "sample count is zero at t = {}",
                    r.t
                )));
            }
        }
        if let Some(w) = records.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::domain(format!(
                "MSD times must be strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(Self { records })
    }

    /// Noiseless series `msd = f(t)` with zero stderr and `n = 1`.
    pub fn analytic(times: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|&t| MsdRecord {
                    t,
                    msd: f(t),
                    stderr: 0.0,
                    n: 1,
                })
                .collect(),
        )
    }

    pub fn records(&self) -> &[MsdRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copy with every msd and stderr multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| MsdRecord {
                    msd: r.msd * c,
                    stderr: r.stderr * c,
                    ..*r
                })
                .collect(),
        }
    }

    /// CSV with header `t,msd,stderr,n`, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "msd", "stderr", "n"])?;
        for r in &self.records {
            w.write_record([sig17(r.t), sig17(r.msd), sig17(r.stderr), r.n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "msd", "stderr", "n"] {
            return Err(Error::domain(format!(
                "MSD CSV header must be t,msd,stderr,n, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr
            .deserialize::<MsdRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::domain(format!("malformed MSD CSV: {e}")))?;
        Self::new(records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subdiffusive,
    Normal,
    Superdiffusive,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Subdiffusive => "subdiffusive",
            Regime::Normal => "normal",
            Regime::Superdiffusive => "superdiffusive",
        })
    }
}

/// `s~ = 1 - log log(1/eps) / log(1/eps)`, the exponent with `eps^s~ = eps log(1/eps)`.
pub fn sublinear_exponent(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let l = -epsilon.ln();
    // Admit the boundary 1/e itself, where ln(1/eps) may round a hair below 1.
    if !(l >= 1.0 - 4.0 * f64::EPSILON) {
        return Err(Error::domain(format!(
            "epsilon must not exceed 1/e, got {epsilon}"
        )));
    }
    Ok((1.0 - l.ln() / l).min(1.0))
}

/// `eps log(1/eps)`.
pub fn sublinear_scale(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    Ok(-epsilon * epsilon.ln())
}

fn check_dimension(name: &str, s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("{name} must lie in (0,1], got {s}")));
    }
    Ok(())
}

/// MSD exponent `beta/alpha = s_space / s_time` for inverse dimensions
/// `alpha = 1/s_space` and `beta = 1/s_time`.
pub fn msd_exponent(s_space: f64, s_time: f64) -> Result<f64> {
    check_dimension("s_space", s_space)?;
    check_dimension("s_time", s_time)?;
    Ok(s_space / s_time)
}

pub fn classify_regime(s_space: f64, s_time: f64) -> Result<Regime> {
    check_dimension("s_space", s_space)?;
    check_dimension("s_time", s_time)?;
    let d = s_space - s_time;
    Ok(if d.abs() <= REGIME_TOL {
        Regime::Normal
    } else if d < 0.0 {
        Regime::Subdiffusive
    } else {
        Regime::Superdiffusive
    })
}

/// Which records enter a power-law fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FitWindow {
    /// `[t_last / 10, t_last]`.
    #[default]
    LastDecade,
    All,
    /// Inclusive time range.
    Range(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Weights `(msd / stderr)^2`, the inverse variance of `log msd`.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the log-log regression.
    pub goodness: f64,
    pub points: usize,
}

/// Least squares of `log msd` on `log t` over the window: `msd ~ prefactor * t^exponent`.
pub fn fit_power_law(
    series: &MsdSeries,
    window: FitWindow,
    weighting: Weighting,
) -> Result<PowerLawFit> {
    let (lo, hi) = match window {
        FitWindow::All => (f64::NEG_INFINITY, f64::INFINITY),
        FitWindow::LastDecade => match series.records.last() {
            Some(r) => (r.t / 10.0, r.t),
            None => return Err(Error::Fit("empty MSD series".into())),
        },
        FitWindow::Range(a, b) => {
            if !(a <= b) {
                return Err(Error::Fit(format!("empty fit window [{a}, {b}]")));
            }
            (a, b)
        }
    };
    let picked: Vec<&MsdRecord> = series
        .records
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .collect();
    if picked.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_POINTS} records in the fit window, got {}",
            picked.len()
        )));
    }
    if let Some(r) = picked.iter().find(|r| !(r.msd > 0.0)) {
        return Err(Error::Fit(format!(
            "nonpositive msd {} at t = {}",
            r.msd, r.t
        )));
    }
    let xs: Vec<f64> = picked.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = picked.iter().map(|r| r.msd.ln()).collect();
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Unweighted => None,
        Weighting::InverseVariance => {
            if let Some(r) = picked.iter().find(|r| !(r.stderr > 0.0)) {
                return Err(Error::Fit(format!(
                    "inverse-variance weighting needs positive stderr (t = {})",
                    r.t
                )));
            }
            Some(picked.iter().map(|r| (r.msd / r.stderr).powi(2)).collect())
        }
    };
    let f = fit_line(&xs, &ys, weights.as_deref())
        .ok_or_else(|| Error::Fit("degenerate time axis in fit window".into()))?;
    Ok(PowerLawFit {
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        goodness: f.r_squared,
        points: picked.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlogComparison {
    /// Max over the grid of `|t^s~(t) - t log(1/t)| / (t log(1/t))`.
    pub identity_max_dev: f64,
    /// Per-point `|t^s - t log(1/t)| / (t log(1/t))` for the fixed exponent.
    pub fixed_s_deviation: Vec<f64>,
    pub fixed_s_max_dev: f64,
}

/// Compares `t^s` and `t^s~(t)` against `t log(1/t)` on a grid in `(0, 1/e]`.
pub fn compare_tlog_vs_power(s: f64, t_grid: &[f64]) -> Result<TlogComparison> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0,1), got {s}")));
    }
    if t_grid.is_empty() {
        return Err(Error::domain("t grid is empty"));
    }
    let mut identity_max_dev = 0.0f64;
    let mut fixed = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::domain(format!("grid point {t} outside (0, 1/e)")));
        }
        let st = sublinear_exponent(t)
            .map_err(|_| Error::domain(format!("grid point {t} outside (0, 1/e)")))?;
        let target = sublinear_scale(t)?;
        identity_max_dev = identity_max_dev.max((t.powf(st) - target).abs() / target);
        fixed.push((t.powf(s) - target).abs() / target);
    }
    let fixed_s_max_dev = fixed.iter().cloned().fold(0.0, f64::max);
    Ok(TlogComparison {
        identity_max_dev,
        fixed_s_deviation: fixed,
        fixed_s_max_dev,
    })
}
