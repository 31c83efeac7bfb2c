//! Two-map IFS Cantor sets and their pre-fractal approximations.
//!
//! The generator pair is `f1(t) = beta * t` and `f2(t) = beta * t + (1 - beta) * eps0`,
//! which maps `[0, eps0]` onto its left and right sub-intervals of width
//! `beta * eps0`, leaving an open gap of width `alpha * eps0` with
//! `alpha = 1 - 2 * beta`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::stats::fit_line;

/// Deepest pre-fractal level that will be materialised (2^24 intervals).
pub const MAX_LEVEL: u32 = 24;

/// Largest `level_a + level_b` accepted by [`minkowski_sum_coverage`].
pub const MAX_SUM_LEVEL: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IfsParams {
    eps0: f64,
    beta: f64,
    alpha: f64,
}

impl IfsParams {
    pub fn new(eps0: f64, beta: f64) -> Result<Self> {
        if !(eps0 > 0.0) || !eps0.is_finite() {
            return Err(Error::domain(format!(
                "eps0 must be positive and finite, got {eps0}"
            )));
        }
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::domain(format!(
                "beta must lie in (0,1/2), got {beta}"
            )));
        }
        Ok(Self {
            eps0,
            beta,
            alpha: 1.0 - 2.0 * beta,
        })
    }

    /// The classical middle-third set on `[0, 1]`.
    pub fn middle_third() -> Self {
        Self::new(1.0, 1.0 / 3.0).expect("valid constants")
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `lambda = beta * eps0`, the slope of both maps when `eps0 = 1`.
    pub fn lambda(&self) -> f64 {
        self.beta * self.eps0
    }

    /// Offset of the second map, `(1 - beta) * eps0`.
    pub fn shift(&self) -> f64 {
        (1.0 - self.beta) * self.eps0
    }

    pub fn f1(&self, t: f64) -> f64 {
        self.beta * t
    }

    pub fn f2(&self, t: f64) -> f64 {
        self.beta * t + self.shift()
    }

    /// Width of every retained interval at `level`.
    pub fn interval_width(&self, level: u32) -> f64 {
        self.eps0 * self.beta.powi(level as i32)
    }

    /// Width of every gap removed at hierarchy level `level >= 1`.
    pub fn gap_width(&self, level: u32) -> f64 {
        debug_assert!(level >= 1);
        self.alpha * self.eps0 * self.beta.powi(level as i32 - 1)
    }

    pub fn similarity_dimension(&self) -> f64 {
        similarity_dimension(self)
    }
}

pub fn make_params(eps0: f64, beta: f64) -> Result<IfsParams> {
    IfsParams::new(eps0, beta)
}

/// Closed interval `[left, right]`.
///
/// `width` is carried separately because pre-fractal intervals know their
/// exact width `eps0 * beta^n`, which `right - left` only reproduces to
/// within the rounding of the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
    pub width: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Self {
        Self {
            left,
            right,
            width: right - left,
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.left <= other.left && other.right <= self.right
    }
}

/// Open gap `(left, right)` removed at hierarchy level `level` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub left: f64,
    pub right: f64,
    pub level: u32,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left < x && x < self.right
    }
}

/// Branch coding of a retained interval: digit `k` selects `f1` (0) or `f2` (1)
/// at hierarchy level `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CantorAddress {
    digits: Vec<u8>,
}

impl CantorAddress {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(d) = digits.iter().find(|&&d| d > 1) {
            return Err(Error::domain(format!(
                "address digits must be 0 or 1, got {d}"
            )));
        }
        Ok(Self { digits })
    }

    /// Address of the `index`-th interval (left to right) at `level`.
    pub fn from_index(level: u32, index: u64) -> Result<Self> {
        if level > 63 || index >= 1u64 << level {
            return Err(Error::domain(format!(
                "index {index} out of range for level {level}"
            )));
        }
        let digits = (0..level)
            .map(|k| ((index >> (level - 1 - k)) & 1) as u8)
            .collect();
        Ok(Self { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Left-to-right position among the intervals of the same level.
    pub fn index(&self) -> u64 {
        self.digits
            .iter()
            .fold(0u64, |acc, &d| (acc << 1) | d as u64)
    }
}

/// Retained intervals and removed gaps after `level` IFS iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefractal {
    params: IfsParams,
    level: u32,
    intervals: Vec<Interval>,
    gaps: Vec<Gap>,
}

impl Prefractal {
    pub fn params(&self) -> &IfsParams {
        &self.params
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Retained intervals, sorted left to right.
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// All gaps, grouped by hierarchy level and left to right within a level.
    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// Gaps removed at hierarchy level `level` (there are `2^(level-1)`).
    pub fn gaps_at(&self, level: u32) -> &[Gap] {
        if level == 0 || level > self.level {
            return &[];
        }
        let start = (1usize << (level - 1)) - 1;
        &self.gaps[start..start + (1usize << (level - 1))]
    }

    /// Closed-form width of every retained interval.
    pub fn interval_width(&self) -> f64 {
        self.params.interval_width(self.level)
    }

    /// Sum of the stored interval widths, with compensated summation.
    pub fn retained_measure(&self) -> f64 {
        neumaier_sum(self.intervals.iter().map(Interval::width))
    }

    pub fn address_to_interval(&self, addr: &CantorAddress) -> Result<Interval> {
        address_to_interval(self, addr)
    }

    /// Writes `level,index,left,right,kind` rows: retained intervals first,
    /// then gaps by hierarchy level.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "index", "left", "right", "kind"])?;
        for (i, iv) in self.intervals.iter().enumerate() {
            w.write_record([
                self.level.to_string(),
                i.to_string(),
                sig17(iv.left),
                sig17(iv.right),
                "interval".to_string(),
            ])?;
        }
        for lvl in 1..=self.level {
            for (j, g) in self.gaps_at(lvl).iter().enumerate() {
                w.write_record([
                    lvl.to_string(),
                    j.to_string(),
                    sig17(g.left),
                    sig17(g.right),
                    "gap".to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the level-`n` pre-fractal.
///
/// Each child endpoint is the parent endpoint it shares plus or minus the
/// closed-form width `eps0 * beta^n`, so left children share the parent's
/// left endpoint and right children its right endpoint bit for bit. Nesting
/// is therefore exact in floating point and the outermost endpoints stay
/// exactly `0` and `eps0`.
pub fn build_prefractal(params: IfsParams, n: u32) -> Result<Prefractal> {
    if n > MAX_LEVEL {
        return Err(Error::Resource(format!(
            "level {n} exceeds the depth cap of {MAX_LEVEL}"
        )));
    }
    let mut intervals = vec![Interval::new(0.0, params.eps0)];
    let mut gaps = Vec::with_capacity((1usize << n).saturating_sub(1));
    for level in 1..=n {
        let w = params.interval_width(level);
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for parent in &intervals {
            let a = Interval {
                left: parent.left,
                right: parent.left + w,
                width: w,
            };
            let b = Interval {
                left: parent.right - w,
                right: parent.right,
                width: w,
            };
            gaps.push(Gap {
                left: a.right,
                right: b.left,
                level,
            });
            next.push(a);
            next.push(b);
        }
        intervals = next;
    }
    Ok(Prefractal {
        params,
        level: n,
        intervals,
        gaps,
    })
}

/// Closed-form left endpoint `(1 - beta) eps0 * sum_k d_k beta^(k-1)` of the
/// `index`-th level-`level` interval, `d_1` being the most significant bit.
pub fn interval_left(params: &IfsParams, level: u32, index: u64) -> f64 {
    let shift = params.shift();
    (1..=level)
        .filter(|k| (index >> (level - k)) & 1 == 1)
        .map(|k| shift * params.beta.powi(k as i32 - 1))
        .sum()
}

/// Lebesgue measure removed after `n` iterations: `eps0 * (1 - (2 beta)^n)`.
pub fn removed_measure(params: &IfsParams, n: u32) -> f64 {
    params.eps0 * (1.0 - (2.0 * params.beta).powi(n as i32))
}

/// `log 2 / log(1/beta)`.
pub fn similarity_dimension(params: &IfsParams) -> f64 {
    std::f64::consts::LN_2 / (1.0 / params.beta).ln()
}

/// Number of grid boxes `[k*scale, (k+1)*scale)` meeting the retained set.
///
/// An interval that only touches a box boundary does not occupy the box on
/// the far side; the boundary test allows a relative slack of `1e-9` in box
/// units so that endpoints landing on grid lines are not double counted.
pub fn box_count(pf: &Prefractal, scale: f64) -> u64 {
    const SNAP: f64 = 1e-9;
    let mut count = 0u64;
    let mut last: Option<i64> = None;
    for iv in &pf.intervals {
        let lo = (iv.left / scale + SNAP).floor() as i64;
        let hi = ((iv.right / scale - SNAP).ceil() as i64 - 1).max(lo);
        let from = match last {
            Some(l) if l >= lo => l + 1,
            _ => lo,
        };
        if hi >= from {
            count += (hi - from + 1) as u64;
            last = Some(hi);
        }
    }
    count
}

/// Least-squares slope of `log N(scale)` against `log(1/scale)`.
///
/// Scales must lie strictly inside `(finest interval width, eps0)`. A level-0
/// pre-fractal is a plain segment at every resolution, so only the upper
/// bound applies to it.
pub fn box_counting_dimension(pf: &Prefractal, box_scales: &[f64]) -> Result<f64> {
    if box_scales.len() < 3 {
        return Err(Error::domain(format!(
            "box counting needs at least 3 scales, got {}",
            box_scales.len()
        )));
    }
    let eps0 = pf.params.eps0;
    let finest = if pf.level == 0 {
        0.0
    } else {
        pf.interval_width()
    };
    for &s in box_scales {
        if !(s > finest && s < eps0) {
            return Err(Error::domain(format!(
                "box scale {s} outside the valid band ({finest}, {eps0})"
            )));
        }
    }
    let xs: Vec<f64> = box_scales.iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = box_scales
        .iter()
        .map(|&s| (box_count(pf, s) as f64).ln())
        .collect();
    fit_line(&xs, &ys, None)
        .map(|f| f.slope)
        .ok_or_else(|| Error::domain("box scales must not all be equal"))
}

/// The retained interval reached by the branch choices in `addr`.
pub fn address_to_interval(pf: &Prefractal, addr: &CantorAddress) -> Result<Interval> {
    if addr.len() != pf.level as usize {
        return Err(Error::domain(format!(
            "address length {} does not match pre-fractal level {}",
            addr.len(),
            pf.level
        )));
    }
    Ok(pf.intervals[addr.index() as usize])
}

/// Fraction of `[0, 2 eps0]` covered by the Minkowski sum of two pre-fractals.
///
/// All `2^(na+nb)` pairwise sums are formed, sorted by left endpoint and swept
/// into a disjoint union. Sums that touch within a few ulps of `2 eps0` are
/// treated as touching.
pub fn minkowski_sum_coverage(a: &Prefractal, b: &Prefractal) -> Result<f64> {
    let (ea, eb) = (a.params.eps0, b.params.eps0);
    if (ea - eb).abs() > 4.0 * f64::EPSILON * ea.max(eb) {
        return Err(Error::domain(format!(
            "pre-fractals must share eps0, got {ea} and {eb}"
        )));
    }
    if a.level + b.level > MAX_SUM_LEVEL {
        return Err(Error::Resource(format!(
            "levels {} + {} exceed the Minkowski-sum cap of {MAX_SUM_LEVEL}",
            a.level, b.level
        )));
    }
    let total = 2.0 * ea;
    let tol = 8.0 * f64::EPSILON * total;
    let mut sums = Vec::with_capacity(a.intervals.len() * b.intervals.len());
    for x in &a.intervals {
        for y in &b.intervals {
            sums.push((x.left + y.left, x.right + y.right));
        }
    }
    sums.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
    let mut covered = 0.0;
    let (mut lo, mut hi) = sums[0];
    for &(l, r) in &sums[1..] {
        if l <= hi + tol {
            hi = hi.max(r);
        } else {
            covered += hi - lo;
            lo = l;
            hi = r;
        }
    }
    covered += hi - lo;
    Ok((covered / total).clamp(0.0, 1.0))
}

/// Dimension `log 3 / log q` that keeps `3^-n * q^(n s) = 1` at every level.
pub fn measure_preserving_dimension(q: f64) -> Result<f64> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::domain(format!("q must exceed 1, got {q}")));
    }
    Ok(3f64.ln() / q.ln())
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
