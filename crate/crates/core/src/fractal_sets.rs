//! Cantor-type set `C(alpha)`, the condensation set `J = {0} ∪ {1/n}` and
//! their product, with exact minimal covering counts.
//!
//! Level-`k` intervals of `C(alpha)` have length `delta_k = 2^(-k/alpha)`;
//! each parent keeps two children anchored at its endpoints.

use crate::error::{Error, Result};

/// Relative slack when deciding whether a point lies at the right end of a cover.
pub const EXACT_REL_TOL: f64 = 1e-12;

/// Smallest covering scale resolved in double precision on `[0, 1]`.
pub const MIN_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorSpec {
    pub alpha: f64,
    pub level: u32,
}

impl CantorSpec {
    pub fn new(alpha: f64, level: u32) -> Result<Self> {
        let spec = Self { alpha, level };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::AlphaOutOfRange(self.alpha))
        }
    }

    /// `delta_k = 2^(-k/alpha)`.
    pub fn delta(&self, k: u32) -> f64 {
        (-(k as f64) / self.alpha).exp2()
    }

    /// Length of the open gap removed from a level-`(k-1)` interval.
    pub fn gap(&self, k: u32) -> f64 {
        self.delta(k - 1) - 2.0 * self.delta(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// The `2^level` closed intervals of `C_level`, sorted left to right.
pub fn cantor_intervals(spec: &CantorSpec) -> Result<Vec<Interval>> {
    spec.validate()?;
    let mut current = vec![Interval { lo: 0.0, hi: 1.0 }];
    for k in 1..=spec.level {
        let d = spec.delta(k);
        current = current
            .iter()
            .flat_map(|p| [Interval { lo: p.lo, hi: p.lo + d }, Interval { lo: p.hi - d, hi: p.hi }])
            .collect();
    }
    Ok(current)
}

/// `sum_j diam(I_k^j)^alpha = 2^k * delta_k^alpha`, identically one.
pub fn hausdorff_sum(spec: &CantorSpec) -> Result<f64> {
    spec.validate()?;
    let d = spec.delta(spec.level);
    Ok((spec.level as f64).exp2() * d.powf(spec.alpha))
}

/// Infimum of `C ∩ (p, ∞)` for the limit set `C`, or `None` past the right end.
///
/// Descends the interval tree: when `p` falls inside a removed gap the answer
/// is the left end of the right child; when `p` is (numerically) a point of
/// `C` itself the answer is `p`.
pub fn cantor_next_after(alpha: f64, p: f64) -> Option<f64> {
    if p < 0.0 {
        return Some(0.0);
    }
    if p >= 1.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut k = 0u32;
    loop {
        if hi - lo <= 4.0 * f64::EPSILON * p.max(f64::MIN_POSITIVE) {
            return Some(p);
        }
        k += 1;
        let d = (-(k as f64) / alpha).exp2();
        let left_hi = lo + d;
        let right_lo = hi - d;
        if p < left_hi {
            hi = left_hi;
        } else if p < right_lo {
            return Some(right_lo);
        } else {
            lo = right_lo;
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::NonpositiveDelta(delta));
    }
    if delta < MIN_DELTA {
        return Err(Error::DeltaBelowResolution(delta));
    }
    Ok(())
}

/// Greedy left-to-right covering with closed intervals of length `delta`;
/// optimal for subsets of the line. `next_after(p)` returns the infimum of
/// the set beyond `p`.
fn greedy_cover(delta: f64, first: f64, next_after: impl Fn(f64) -> Option<f64>) -> u64 {
    let mut count = 0u64;
    let mut start = Some(first);
    while let Some(s) = start {
        count += 1;
        let end = s + delta * (1.0 + EXACT_REL_TOL);
        start = next_after(end);
    }
    count
}

/// Minimal number of closed intervals of length `delta` covering `C(alpha)`.
pub fn cantor_cover_count(spec: &CantorSpec, delta: f64) -> Result<u64> {
    spec.validate()?;
    check_delta(delta)?;
    let length = spec.delta(spec.level);
    if length > delta * (1.0 + EXACT_REL_TOL) {
        return Err(Error::LevelTooShallow { level: spec.level, delta, length });
    }
    Ok(greedy_cover(delta, 0.0, |p| cantor_next_after(spec.alpha, p)))
}

/// `J = {0} ∪ {1/n : n ∈ N}`. Points `1/n` with `n <= cutoff` are exported
/// explicitly; counting is exact regardless of the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTailSpec {
    pub cutoff: u64,
}

impl Default for HarmonicTailSpec {
    fn default() -> Self {
        Self { cutoff: 1000 }
    }
}

impl HarmonicTailSpec {
    /// `{0} ∪ {1/n : n <= cutoff}`, ascending.
    pub fn points(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        pts.extend((1..=self.cutoff).rev().map(|n| 1.0 / n as f64));
        pts
    }
}

/// Smallest point of `J` strictly greater than `p`.
pub fn harmonic_next_after(p: f64) -> Option<f64> {
    if p < 0.0 {
        return Some(0.0);
    }
    if p >= 1.0 {
        return None;
    }
    if p == 0.0 {
        // 1/n accumulates at zero
        return Some(0.0);
    }
    // largest n with 1/n > p
    let mut n = ((1.0 / p).ceil() as u64).saturating_sub(1).max(1);
    while 1.0 / ((n + 1) as f64) > p {
        n += 1;
    }
    while n > 1 && 1.0 / n as f64 <= p {
        n -= 1;
    }
    Some(1.0 / n as f64)
}

/// Minimal number of closed intervals of length `delta` covering `J`.
pub fn harmonic_cover_count(_spec: &HarmonicTailSpec, delta: f64) -> Result<u64> {
    check_delta(delta)?;
    Ok(greedy_cover(delta, 0.0, harmonic_next_after))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductSetSpec {
    pub cantor: CantorSpec,
    pub tail: HarmonicTailSpec,
}

/// `N(C × J, delta) = N(C, delta) * N(J, delta)` for axis-aligned squares.
pub fn product_cover_count(spec: &ProductSetSpec, delta: f64) -> Result<u64> {
    Ok(cantor_cover_count(&spec.cantor, delta)? * harmonic_cover_count(&spec.tail, delta)?)
}

/// Endpoints of the level intervals, a finite subset of `C`.
pub fn cantor_endpoints(spec: &CantorSpec) -> Result<Vec<f64>> {
    Ok(cantor_intervals(spec)?.iter().flat_map(|i| [i.lo, i.hi]).collect())
}

/// Explicit point cloud `endpoints(C_k) × {0, 1/n : n <= cutoff}`.
pub fn product_points(spec: &ProductSetSpec) -> Result<Vec<[f64; 2]>> {
    let xs = cantor_endpoints(&spec.cantor)?;
    let ys = spec.tail.points();
    Ok(xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect())
}

/// Level at which `delta_k <= delta` first holds.
pub fn level_for_delta(alpha: f64, delta: f64) -> u32 {
    let mut k = 0;
    while (-(k as f64) / alpha).exp2() > delta * (1.0 + EXACT_REL_TOL) {
        k += 1;
    }
    k
}
