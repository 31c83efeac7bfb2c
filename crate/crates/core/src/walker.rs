//! Monte Carlo ensembles of anomalous walkers.
//!
//! Two microscopic models are provided:
//!
//! * a continuous-time random walk whose unit jumps are separated by Pareto
//!   waiting times with tail index `mu`, giving `<x^2> ~ t^mu`;
//! * a lattice walk over the level-`n` intervals of a Cantor pre-fractal in
//!   which crossing a gap of hierarchy level `k` succeeds with probability
//!   `(w_k / w_1)^theta`.
//!
//! Walker `i` draws from its own ChaCha8 stream `i` of the master seed, so a
//! trajectory never depends on the ensemble size or on how walkers are
//! scheduled across threads. Reductions run in walker order (or in exact
//! integer arithmetic), which makes results bit-identical for any worker
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cantor::{interval_left, IfsParams, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::scaling::{fit_power_law, FitWindow, MsdRecord, MsdSeries, PowerLawFit, Weighting};

/// Geometric sampling density of the observation grid.
pub const POINTS_PER_DECADE: u32 = 32;

/// Upper bound on `n_walkers * grid points`.
pub const MAX_ENSEMBLE_CELLS: u64 = 1 << 27;

/// Largest simulated horizon for either model.
pub const MAX_HORIZON: f64 = 1e8;

const CHUNK: usize = 1024;

/// Random stream of walker `index` under `seed`.
pub fn walker_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF draw `u^(-1/mu)` from `psi(tau) = mu tau^-(1+mu)` on `[1, inf)`.
pub fn sample_waiting_time(mu: f64, u: f64) -> Result<f64> {
    check_mu(mu)?;
    if u == 0.0 {
        return Err(Error::domain("u = 0 gives an infinite waiting time"));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::domain(format!("u must lie in (0,1], got {u}")));
    }
    Ok(u.powf(-1.0 / mu))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain("mu must lie in (0,1]"));
    }
    Ok(())
}

/// `10^(k/32)` for `k = 0, 1, ...` up to `t_max`, with `t_max` appended if it
/// is not itself a grid point.
pub fn geometric_grid(t_max: f64) -> Vec<f64> {
    let per = POINTS_PER_DECADE as f64;
    let last = (t_max.log10() * per + 1e-9).floor() as i64;
    let mut grid: Vec<f64> = (0..=last.max(0))
        .map(|k| 10f64.powf(k as f64 / per))
        .filter(|&t| t <= t_max)
        .collect();
    if grid.last().is_none_or(|&t| t < t_max * (1.0 - 1e-12)) {
        grid.push(t_max);
    }
    grid
}

/// Geometric grid rounded to whole steps, duplicates removed.
pub fn integer_grid(n_steps: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = geometric_grid(n_steps as f64)
        .into_iter()
        .map(|t| t.round() as u64)
        .collect();
    grid.dedup();
    grid
}

fn check_budget(n_walkers: u64, grid_len: usize) -> Result<()> {
    match n_walkers.checked_mul(grid_len as u64) {
        Some(c) if c <= MAX_ENSEMBLE_CELLS => Ok(()),
        _ => Err(Error::Resource(format!(
            "{n_walkers} walkers x {grid_len} grid points exceeds the budget of {MAX_ENSEMBLE_CELLS} cells"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CtrwConfig {
    pub mu: f64,
    pub n_walkers: u64,
    pub t_max: f64,
    pub step_length: f64,
    pub seed: u64,
}

impl CtrwConfig {
    pub fn new(mu: f64, n_walkers: u64, t_max: f64, seed: u64) -> Self {
        Self {
            mu,
            n_walkers,
            t_max,
            step_length: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if self.n_walkers < 2 {
            return Err(Error::domain("n_walkers must be at least 2"));
        }
        if !(self.t_max >= 1.0 && self.t_max <= MAX_HORIZON) {
            return Err(Error::domain(format!(
                "t_max must lie in [1, {MAX_HORIZON:e}], got {}",
                self.t_max
            )));
        }
        if !(self.step_length > 0.0) || !self.step_length.is_finite() {
            return Err(Error::domain("step_length must be positive"));
        }
        Ok(())
    }
}

/// Lattice-walk position readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierMetric {
    /// Interval index scaled by `eps0 / 2^n`: the walker's position in the
    /// natural-measure (Cantor-function) coordinate.
    #[default]
    Intrinsic,
    /// Midpoint of the occupied interval in `[0, eps0]`.
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierWalkConfig {
    pub params: IfsParams,
    pub level: u32,
    pub theta: f64,
    pub n_walkers: u64,
    pub n_steps: u64,
    pub seed: u64,
    pub metric: BarrierMetric,
}

impl BarrierWalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.level == 0 || self.level > MAX_LEVEL {
            return Err(Error::domain(format!(
                "level must lie in 1..={MAX_LEVEL}, got {}",
                self.level
            )));
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(Error::domain("theta must be nonnegative"));
        }
        if self.n_walkers < 2 {
            return Err(Error::domain("n_walkers must be at least 2"));
        }
        if self.n_steps < 10 || self.n_steps as f64 > MAX_HORIZON {
            return Err(Error::domain(format!(
                "n_steps must lie in [10, {MAX_HORIZON:e}], got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    /// Acceptance probability for crossing the gap created at hierarchy level `k`.
    pub fn crossing_probability(&self, k: u32) -> f64 {
        let ratio = self.params.gap_width(k) / self.params.gap_width(1);
        ratio.powf(self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult<C> {
    pub msd: MsdSeries,
    pub fitted_exponent: f64,
    pub fit_goodness: f64,
    pub fit: PowerLawFit,
    pub seed: u64,
    pub config: C,
}

/// Walker positions sampled on a common time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ensemble {
    pub time_grid: Vec<f64>,
    /// `x(0)` per walker.
    pub origins: Vec<f64>,
    /// `positions[w][j]` is walker `w` at `time_grid[j]`.
    pub positions: Vec<Vec<f64>>,
}

/// `msd(t) = mean_w (x_w(t) - x_w(0))^2` with stderr `sd / sqrt(n)`.
/// Sums run in walker order.
pub fn estimate_msd(ensemble: &Ensemble) -> Result<MsdSeries> {
    let n = ensemble.positions.len();
    if n == 0 {
        return Err(Error::domain("empty ensemble"));
    }
    if n < 2 {
        return Err(Error::domain("MSD estimation needs at least 2 walkers"));
    }
    if ensemble.origins.len() != n {
        return Err(Error::domain("one origin per walker is required"));
    }
    let m = ensemble.time_grid.len();
    if let Some(w) = ensemble.positions.iter().position(|p| p.len() != m) {
        return Err(Error::domain(format!(
            "walker {w} does not match the time grid"
        )));
    }
    let nf = n as f64;
    let records = (0..m)
        .map(|j| {
            let sq = |w: usize| {
                let d = ensemble.positions[w][j] - ensemble.origins[w];
                d * d
            };
            let mean = (0..n).map(sq).sum::<f64>() / nf;
            let var = (0..n).map(|w| (sq(w) - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            MsdRecord {
                t: ensemble.time_grid[j],
                msd: mean,
                stderr: (var / nf).sqrt(),
                n: n as u64,
            }
        })
        .collect();
    MsdSeries::new(records)
}

fn attach_fit<C>(msd: MsdSeries, seed: u64, config: C) -> Result<EnsembleResult<C>> {
    let fit = fit_power_law(&msd, FitWindow::LastDecade, Weighting::Unweighted)?;
    Ok(EnsembleResult {
        msd,
        fitted_exponent: fit.exponent,
        fit_goodness: fit.goodness,
        fit,
        seed,
        config,
    })
}

/// Net jump counts of one CTRW walker at each grid time.
fn ctrw_walker(cfg: &CtrwConfig, index: u64, grid: &[f64], out: &mut [i64]) {
    let mut rng = walker_rng(cfg.seed, index);
    let inv_mu = -1.0 / cfg.mu;
    // 1 - U maps [0, 1) onto (0, 1], so the draw is never infinite.
    let wait = |rng: &mut ChaCha8Rng| (1.0 - rng.random::<f64>()).powf(inv_mu);
    let mut k: i64 = 0;
    let mut next_jump = wait(&mut rng);
    for (slot, &t) in out.iter_mut().zip(grid) {
        while next_jump <= t {
            k += if rng.random::<bool>() { 1 } else { -1 };
            next_jump += wait(&mut rng);
        }
        *slot = k;
    }
}

/// Net jump counts of CTRW walker `index` at each point of [`geometric_grid`]`(t_max)`.
///
/// Depends only on `(seed, index)` and the model parameters.
pub fn ctrw_trajectory(config: &CtrwConfig, index: u64) -> Result<Vec<i64>> {
    config.validate()?;
    let grid = geometric_grid(config.t_max);
    let mut path = vec![0i64; grid.len()];
    ctrw_walker(config, index, &grid, &mut path);
    Ok(path)
}

#[derive(Clone)]
struct MomentSums {
    s2: Vec<u128>,
    s4: Vec<u128>,
}

impl MomentSums {
    fn zeros(m: usize) -> Self {
        Self {
            s2: vec![0; m],
            s4: vec![0; m],
        }
    }

    fn merge(mut self, other: &Self) -> Result<Self> {
        for j in 0..self.s2.len() {
            self.s2[j] = self.s2[j].checked_add(other.s2[j]).ok_or_else(overflow)?;
            self.s4[j] = self.s4[j].checked_add(other.s4[j]).ok_or_else(overflow)?;
        }
        Ok(self)
    }
}

fn overflow() -> Error {
    Error::Resource("MSD moment sums overflow 128-bit accumulators".into())
}

/// Fractal-time random walk: `+-step_length` jumps separated by Pareto waits.
///
/// Moments of the integer jump counts are accumulated exactly, so the MSD
/// series is identical for every thread count.
pub fn run_ctrw(config: &CtrwConfig) -> Result<EnsembleResult<CtrwConfig>> {
    config.validate()?;
    let grid = geometric_grid(config.t_max);
    check_budget(config.n_walkers, grid.len())?;
    let m = grid.len();
    let n = config.n_walkers;
    let chunks = n.div_ceil(CHUNK as u64);
    let partials: Vec<Result<MomentSums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = MomentSums::zeros(m);
            let mut path = vec![0i64; m];
            let end = ((c + 1) * CHUNK as u64).min(n);
            for w in c * CHUNK as u64..end {
                ctrw_walker(config, w, &grid, &mut path);
                for (j, &k) in path.iter().enumerate() {
                    let k2 = (k as i128 * k as i128) as u128;
                    let k4 = k2.checked_mul(k2).ok_or_else(overflow)?;
                    sums.s2[j] = sums.s2[j].checked_add(k2).ok_or_else(overflow)?;
                    sums.s4[j] = sums.s4[j].checked_add(k4).ok_or_else(overflow)?;
                }
            }
            Ok(sums)
        })
        .collect();
    let mut total = MomentSums::zeros(m);
    for p in partials {
        total = total.merge(&p?)?;
    }
    let nf = n as f64;
    let l2 = config.step_length * config.step_length;
    let records = (0..m)
        .map(|j| {
            let (s2, s4) = (total.s2[j], total.s4[j]);
            // n * S4 - S2^2 is the exact numerator of the sample variance of k^2.
            let var_num = (n as u128)
                .checked_mul(s4)
                .zip(s2.checked_mul(s2))
                .map(|(a, b)| (a - b) as f64)
                .unwrap_or_else(|| nf * s4 as f64 - (s2 as f64).powi(2));
            let var = var_num.max(0.0) / (nf * (nf - 1.0));
            MsdRecord {
                t: grid[j],
                msd: l2 * s2 as f64 / nf,
                stderr: l2 * (var / nf).sqrt(),
                n,
            }
        })
        .collect();
    attach_fit(MsdSeries::new(records)?, config.seed, *config)
}

/// Hierarchy level of the gap separating intervals `j` and `j + 1` of a
/// level-`level` pre-fractal.
pub fn boundary_level(level: u32, j: u64) -> u32 {
    level - (j + 1).trailing_zeros()
}

fn barrier_walker(
    cfg: &BarrierWalkConfig,
    index: u64,
    grid: &[u64],
    accept: &[f64],
    coord: &dyn Fn(u64) -> f64,
) -> (f64, Vec<f64>) {
    let mut rng = walker_rng(cfg.seed, index);
    let sites = 1u64 << cfg.level;
    let mut j = rng.random_range(0..sites);
    let origin = coord(j);
    let mut out = Vec::with_capacity(grid.len());
    let mut step = 0u64;
    for &t in grid {
        while step < t {
            step += 1;
            let right = rng.random::<bool>();
            let target = if right {
                if j + 1 == sites {
                    continue;
                }
                j + 1
            } else {
                if j == 0 {
                    continue;
                }
                j - 1
            };
            let k = boundary_level(cfg.level, j.min(target));
            let p = accept[k as usize];
            if p >= 1.0 || rng.random::<f64>() < p {
                j = target;
            }
        }
        out.push(coord(j));
    }
    (origin, out)
}

/// Hierarchical-barrier walk on the intervals of a level-`n` pre-fractal.
///
/// Each unit of time the walker proposes a move to a neighbouring interval;
/// crossing a level-`k` gap is accepted with probability `(w_k/w_1)^theta`,
/// otherwise the walker stays. The outermost intervals reflect. Walkers
/// start on a uniformly drawn interval.
pub fn run_barrier_walk(config: &BarrierWalkConfig) -> Result<EnsembleResult<BarrierWalkConfig>> {
    config.validate()?;
    let grid = integer_grid(config.n_steps);
    check_budget(config.n_walkers, grid.len())?;
    let accept: Vec<f64> = (0..=config.level)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                config.crossing_probability(k)
            }
        })
        .collect();
    let params = config.params;
    let level = config.level;
    let cell = params.eps0() / (1u64 << level) as f64;
    let half_width = 0.5 * params.interval_width(level);
    let coord: Box<dyn Fn(u64) -> f64 + Sync> = match config.metric {
        BarrierMetric::Intrinsic => Box::new(move |j| (j as f64 + 0.5) * cell),
        BarrierMetric::Embedding => {
            Box::new(move |j| interval_left(&params, level, j) + half_width)
        }
    };
    let walkers: Vec<(f64, Vec<f64>)> = (0..config.n_walkers)
        .into_par_iter()
        .map(|w| barrier_walker(config, w, &grid, &accept, &*coord))
        .collect();
    let (origins, positions) = walkers.into_iter().unzip();
    let ensemble = Ensemble {
        time_grid: grid.iter().map(|&t| t as f64).collect(),
        origins,
        positions,
    };
    attach_fit(estimate_msd(&ensemble)?, config.seed, *config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waiting_time_examples() {
        assert_eq!(sample_waiting_time(1.0, 0.25).unwrap(), 4.0);
        for mu in [0.3, 0.63, 1.0] {
            assert_eq!(sample_waiting_time(mu, 1.0).unwrap(), 1.0);
        }
        assert!((sample_waiting_time(0.5, 0.01).unwrap() - 1e4).abs() < 1e-9);
        assert!(matches!(
            sample_waiting_time(0.5, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(sample_waiting_time(1.5, 0.5).is_err());
        assert!(sample_waiting_time(0.0, 0.5).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = geometric_grid(1e4);
        assert_eq!(g.len(), 129);
        assert_eq!(g[0], 1.0);
        assert!((g[128] - 1e4).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let g = geometric_grid(50.0);
        assert_eq!(*g.last().unwrap(), 50.0);
        let gi = integer_grid(1000);
        assert_eq!(gi[0], 1);
        assert_eq!(*gi.last().unwrap(), 1000);
        assert!(gi.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn estimate_msd_examples() {
        let ens = Ensemble {
            time_grid: vec![1.0, 2.0],
            origins: vec![0.5, -1.0, 3.0],
            positions: vec![vec![0.5, 0.5], vec![-1.0, -1.0], vec![3.0, 3.0]],
        };
        let s = estimate_msd(&ens).unwrap();
        assert!(s.records().iter().all(|r| r.msd == 0.0 && r.stderr == 0.0));

        let ens = Ensemble {
            time_grid: vec![1.0],
            origins: vec![0.0, 0.0],
            positions: vec![vec![1.0], vec![-1.0]],
        };
        let r = estimate_msd(&ens).unwrap().records()[0];
        assert_eq!((r.msd, r.stderr, r.n), (1.0, 0.0, 2));

        assert!(matches!(
            estimate_msd(&Ensemble::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ballistic_ensemble_through_fit() {
        let grid = geometric_grid(1e3);
        let ens = Ensemble {
            time_grid: grid.clone(),
            origins: vec![0.0; 4],
            positions: (0..4)
                .map(|w| {
                    let sign = if w % 2 == 0 { 1.0 } else { -1.0 };
                    grid.iter().map(|t| sign * t).collect()
                })
                .collect(),
        };
        let s = estimate_msd(&ens).unwrap();
        let f = fit_power_law(&s, FitWindow::LastDecade, Weighting::Unweighted).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_levels() {
        // Level 3: boundaries 0|1 and 2|3 are level-3 gaps, 1|2 level 2, 3|4 level 1.
        let lv: Vec<u32> = (0..7).map(|j| boundary_level(3, j)).collect();
        assert_eq!(lv, vec![3, 2, 3, 1, 3, 2, 3]);
    }

    #[test]
    fn ctrw_validation() {
        let bad = CtrwConfig::new(1.5, 10, 100.0, 0);
        assert_eq!(
            run_ctrw(&bad).unwrap_err(),
            Error::Domain("mu must lie in (0,1]".into())
        );
        assert!(run_ctrw(&CtrwConfig::new(0.5, 1, 100.0, 0)).is_err());
        assert!(run_ctrw(&CtrwConfig::new(0.5, 10, 0.5, 0)).is_err());
        let huge = CtrwConfig::new(0.5, 1 << 26, 1e4, 0);
        assert!(matches!(run_ctrw(&huge), Err(Error::Resource(_))));
    }

    #[test]
    fn walker_stream_independent_of_ensemble_size() {
        let grid = geometric_grid(1e3);
        let a = CtrwConfig::new(0.7, 10, 1e3, 9);
        let b = CtrwConfig::new(0.7, 5000, 1e3, 9);
        let mut pa = vec![0; grid.len()];
        let mut pb = vec![0; grid.len()];
        ctrw_walker(&a, 7, &grid, &mut pa);
        ctrw_walker(&b, 7, &grid, &mut pb);
        assert_eq!(pa, pb);
    }

    #[test]
    fn crossing_probabilities() {
        let cfg = BarrierWalkConfig {
            params: IfsParams::middle_third(),
            level: 4,
            theta: 1.0,
            n_walkers: 2,
            n_steps: 10,
            seed: 0,
            metric: BarrierMetric::Intrinsic,
        };
        assert_eq!(cfg.crossing_probability(1), 1.0);
        assert!((cfg.crossing_probability(3) - 1.0 / 9.0).abs() < 1e-15);
        let free = BarrierWalkConfig { theta: 0.0, ..cfg };
        assert!((1..=4).all(|k| free.crossing_probability(k) == 1.0));
    }
}
