//! Parabolic metric, space-time cylinders and the Vitali selection.
//!
//! A cylinder `Q(z, r)` is the open ball `B(x, r)` times the half-open time
//! interval `(t - r^2, t]`. The half variant `Q+` additionally requires
//! `x3 > 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x: [f64; 3],
    pub t: f64,
}

impl SpaceTimePoint {
    pub const ORIGIN: Self = Self { x: [0.0; 3], t: 0.0 };

    pub fn new(x: [f64; 3], t: f64) -> Result<Self> {
        if x.iter().all(|c| c.is_finite()) && t.is_finite() {
            Ok(Self { x, t })
        } else {
            Err(Error::NonfiniteCoordinate)
        }
    }

    /// Point on the boundary plane `x3 = 0`.
    pub fn boundary(x1: f64, x2: f64, t: f64) -> Self {
        Self { x: [x1, x2, 0.0], t }
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `|x - y| + sqrt(|t - s|)`.
pub fn parabolic_distance(a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
    norm3(sub3(a.x, b.x)) + (a.t - b.t).abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicCylinder {
    pub center: SpaceTimePoint,
    pub radius: f64,
    pub half: bool,
}

impl ParabolicCylinder {
    pub fn new(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::NonpositiveRadius(radius));
        }
        Ok(Self { center, radius, half: false })
    }

    pub fn new_half(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        Ok(Self { half: true, ..Self::new(center, radius)? })
    }

    pub fn time_depth(&self) -> f64 {
        self.radius * self.radius
    }

    /// Time interval `(t - r^2, t]`.
    pub fn time_interval(&self) -> (f64, f64) {
        (self.center.t - self.time_depth(), self.center.t)
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        cylinder_contains(self, p)
    }

    /// The same cylinder without the `x3 > 0` restriction.
    pub fn full(&self) -> Self {
        Self { half: false, ..*self }
    }
}

pub fn cylinder_contains(c: &ParabolicCylinder, p: &SpaceTimePoint) -> bool {
    let (lo, hi) = c.time_interval();
    norm3(sub3(p.x, c.center.x)) < c.radius && lo < p.t && p.t <= hi && (!c.half || p.x[2] > 0.0)
}

pub fn dilate(c: &ParabolicCylinder, factor: f64) -> Result<ParabolicCylinder> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::NonpositiveFactor(factor));
    }
    Ok(ParabolicCylinder { radius: c.radius * factor, ..*c })
}

/// Analytic disjointness test: balls separated or time intervals disjoint.
///
/// Half cylinders are compared through their full counterparts; for centers on
/// the boundary plane the two notions agree.
pub fn disjoint(a: &ParabolicCylinder, b: &ParabolicCylinder) -> bool {
    let spatial = norm3(sub3(a.center.x, b.center.x)) >= a.radius + b.radius;
    let (alo, ahi) = a.time_interval();
    let (blo, bhi) = b.time_interval();
    let temporal = ahi <= blo || bhi <= alo;
    spatial || temporal
}

/// Greedy disjoint subfamily of equal-radius cylinders.
///
/// Candidates are visited from the latest top time to the earliest (ties by
/// index). A rejected cylinder meets a selected one whose top is no earlier,
/// so its center lies in that cylinder's 5-dilate (indeed its 3-dilate).
/// Returned indices are sorted ascending.
pub fn vitali_disjoint_subfamily(cylinders: &[ParabolicCylinder]) -> Result<Vec<usize>> {
    let first = cylinders.first().ok_or(Error::EmptyInput)?;
    for c in cylinders {
        if c.radius != first.radius {
            return Err(Error::UnequalRadii(first.radius, c.radius));
        }
    }

    let mut order: Vec<usize> = (0..cylinders.len()).collect();
    order.sort_by(|&i, &j| cylinders[j].center.t.total_cmp(&cylinders[i].center.t).then(i.cmp(&j)));

    let mut selected: Vec<usize> = Vec::new();
    for i in order {
        if selected.iter().all(|&j| disjoint(&cylinders[i], &cylinders[j])) {
            selected.push(i);
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfBall {
    pub center: [f64; 3],
    pub radius: f64,
}

impl HalfBall {
    pub fn new(center: [f64; 3], radius: f64) -> Result<Self> {
        if center[2] != 0.0 {
            return Err(Error::NotOnBoundary(center[2]));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::NonpositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn volume(&self) -> f64 {
        2.0 * std::f64::consts::PI / 3.0 * self.radius.powi(3)
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        x[2] > 0.0 && norm3(sub3(x, self.center)) < self.radius
    }
}
