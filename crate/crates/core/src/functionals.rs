//! Quadrature over boundary half-balls and half-cylinders, mixed norms and
//! the scaled functionals `A`, `E`, `F`, `G`, `Y`.
//!
//! The half-ball rule is a product midpoint rule in spherical coordinates:
//! `n` radial cells, `n` cells in `cos(polar angle)` over `[0, 1]` and `4n`
//! azimuthal cells. Its nodes are fixed fractions of the radius, so every
//! functional is evaluated on self-similar node sets across scales. Time is
//! integrated by the midpoint rule on `time_slices` slices per cylinder.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxcount::fmt_f64;
use crate::error::{Error, Result};
use crate::fields::{FieldSample, FieldSource};
use crate::geometry::{ParabolicCylinder, SpaceTimePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Radial cells per half-ball (polar cells match, azimuthal cells are four times as many).
    pub cells_per_radius: usize,
    /// Midpoint slices across the time depth `r^2` of a cylinder.
    pub time_slices: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { cells_per_radius: 12, time_slices: 12 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_radius < 4 {
            return Err(Error::BadQuadrature(format!("cells_per_radius = {} < 4", self.cells_per_radius)));
        }
        if self.time_slices < 1 {
            return Err(Error::BadQuadrature("time_slices must be positive".into()));
        }
        Ok(())
    }

    /// Both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self { cells_per_radius: 2 * self.cells_per_radius, time_slices: 2 * self.time_slices }
    }
}

/// Nodes and weights on the unit half-ball `{|y| < 1, y3 > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfBallRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl HalfBallRule {
    pub fn new(n: usize) -> Self {
        let nphi = 4 * n;
        let h = 1.0 / n as f64;
        let dphi = 2.0 * PI / nphi as f64;
        let mut points = Vec::with_capacity(n * n * nphi);
        let mut weights = Vec::with_capacity(n * n * nphi);
        for i in 0..n {
            let rho = (i as f64 + 0.5) * h;
            let w = rho * rho * h * h * dphi;
            for j in 0..n {
                let mu = (j as f64 + 0.5) * h;
                let s = (1.0 - mu * mu).sqrt();
                for k in 0..nphi {
                    let phi = (k as f64 + 0.5) * dphi;
                    points.push([rho * s * phi.cos(), rho * s * phi.sin(), rho * mu]);
                    weights.push(w);
                }
            }
        }
        Self { points, weights }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature volume of the unit half-ball, `(2 pi / 3)(1 - 1/(4 n^2))`.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `(midpoint, weight)` pairs covering `(t - r^2, t]`.
pub fn time_nodes(t: f64, r: f64, slices: usize) -> Vec<(f64, f64)> {
    let dt = r * r / slices as f64;
    (0..slices).map(|j| (t - r * r + (j as f64 + 0.5) * dt, dt)).collect()
}

fn check_boundary(z: &SpaceTimePoint) -> Result<()> {
    if z.x[2] != 0.0 {
        return Err(Error::NotOnBoundary(z.x[2]));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonpositiveRadius(r));
    }
    Ok(())
}

/// Samples the field on the scaled rule at each slice and reduces every
/// slice with `reduce(samples)`. Slices run in parallel; the result is
/// in slice order.
fn sweep<T: Send>(
    field: &FieldSource,
    x: [f64; 3],
    r: f64,
    slices: &[(f64, f64)],
    rule: &HalfBallRule,
    reduce: impl Fn(&[FieldSample]) -> T + Sync,
) -> Result<Vec<T>> {
    slices
        .par_iter()
        .map(|&(s, _)| {
            let samples = rule
                .points
                .iter()
                .map(|p| field.sample([x[0] + r * p[0], x[1] + r * p[1], x[2] + r * p[2]], s))
                .collect::<Result<Vec<_>>>()?;
            Ok(reduce(&samples))
        })
        .collect()
}

fn weighted_sum(rule: &HalfBallRule, samples: &[FieldSample], f: impl Fn(&FieldSample) -> f64) -> f64 {
    rule.weights.iter().zip(samples).map(|(w, s)| w * f(s)).sum()
}

/// `int_{B+(x,r)} f(v(y,t), y) dy` for a center on the boundary plane.
pub fn integrate_halfball(
    field: &FieldSource,
    center: [f64; 3],
    r: f64,
    t: f64,
    cfg: &QuadratureConfig,
    integrand: impl Fn(&FieldSample, [f64; 3]) -> f64 + Sync,
) -> Result<f64> {
    cfg.validate()?;
    check_radius(r)?;
    if center[2] != 0.0 {
        return Err(Error::NotOnBoundary(center[2]));
    }
    field.check_region(center, r, t, t)?;
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let mut sum = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let y = [center[0] + r * p[0], center[1] + r * p[1], r * p[2]];
        sum += w * integrand(&field.sample(y, t)?, y);
    }
    Ok(sum * r * r * r)
}

/// Integral over the half-ball divided by its quadrature volume. Values are
/// shifted by the first sample before summing, so a constant integrand
/// reproduces itself exactly.
pub fn mean_over_halfball(
    field: &FieldSource,
    center: [f64; 3],
    r: f64,
    t: f64,
    cfg: &QuadratureConfig,
    integrand: impl Fn(&FieldSample, [f64; 3]) -> f64 + Sync,
) -> Result<f64> {
    cfg.validate()?;
    check_radius(r)?;
    if center[2] != 0.0 {
        return Err(Error::NotOnBoundary(center[2]));
    }
    field.check_region(center, r, t, t)?;
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let values = rule
        .points
        .iter()
        .map(|p| {
            let y = [center[0] + r * p[0], center[1] + r * p[1], r * p[2]];
            Ok(integrand(&field.sample(y, t)?, y))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(shifted_mean(&rule, &values))
}

fn shifted_mean(rule: &HalfBallRule, values: &[f64]) -> f64 {
    let f0 = values[0];
    let sum: f64 = rule.weights.iter().zip(values).map(|(w, f)| w * (f - f0)).sum();
    f0 + sum / rule.volume()
}

fn check_region(field: &FieldSource, region: &ParabolicCylinder) -> Result<()> {
    check_boundary(&region.center)?;
    let (lo, hi) = region.time_interval();
    field.check_region(region.center.x, region.radius, lo, hi)
}

/// `(int (int |f|^p dx)^(q/p) dt)^(1/q)` over a half-cylinder with a boundary center.
pub fn mixed_norm(
    field: &FieldSource,
    region: &ParabolicCylinder,
    p: f64,
    q: f64,
    cfg: &QuadratureConfig,
    integrand: impl Fn(&FieldSample) -> f64 + Sync,
) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::BadExponent { p, q });
    }
    cfg.validate()?;
    check_region(field, region)?;
    let (r, x) = (region.radius, region.center.x);
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let slices = time_nodes(region.center.t, r, cfg.time_slices);
    let inner = sweep(field, x, r, &slices, &rule, |s| weighted_sum(&rule, s, |s| integrand(s).abs().powf(p)))?;
    let r3 = r * r * r;
    let outer: f64 = inner.iter().zip(&slices).map(|(i, (_, w))| w * (r3 * i).powf(q / p)).sum();
    Ok(outer.powf(1.0 / q))
}

/// Plain `L^p` norm over a half-cylinder.
pub fn lp_norm(
    field: &FieldSource,
    region: &ParabolicCylinder,
    p: f64,
    cfg: &QuadratureConfig,
    integrand: impl Fn(&FieldSample) -> f64 + Sync,
) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::BadExponent { p, q: p });
    }
    cfg.validate()?;
    check_region(field, region)?;
    let (r, x) = (region.radius, region.center.x);
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let slices = time_nodes(region.center.t, r, cfg.time_slices);
    let inner = sweep(field, x, r, &slices, &rule, |s| weighted_sum(&rule, s, |s| integrand(s).abs().powf(p)))?;
    let total: f64 = inner.iter().zip(&slices).map(|(i, (_, w))| w * r * r * r * i).sum();
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValues {
    pub center: SpaceTimePoint,
    pub radius: f64,
    pub a: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub y: f64,
}

impl FunctionalValues {
    pub const CSV_HEADER: &'static str = "x1,x2,x3,t,r,A,E,F,G,Y";

    pub fn csv_row(&self) -> String {
        let z = &self.center;
        [z.x[0], z.x[1], z.x[2], z.t, self.radius, self.a, self.e, self.f, self.g, self.y]
            .iter()
            .map(|&c| fmt_f64(c))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Writes the header line and one row per value set.
pub fn write_functionals_csv<W: Write>(rows: &[FunctionalValues], mut w: W) -> Result<()> {
    writeln!(w, "{}", FunctionalValues::CSV_HEADER)?;
    for row in rows {
        writeln!(w, "{}", row.csv_row())?;
    }
    Ok(())
}

/// All scaled functionals at `(z, r)` from a single sweep.
pub fn functional_y(field: &FieldSource, z: &SpaceTimePoint, r: f64, cfg: &QuadratureConfig) -> Result<FunctionalValues> {
    cfg.validate()?;
    let region = ParabolicCylinder::new_half(*z, r)?;
    check_region(field, &region)?;
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let slices = time_nodes(z.t, r, cfg.time_slices);
    let per_slice = sweep(field, z.x, r, &slices, &rule, |s| {
        [
            weighted_sum(&rule, s, FieldSample::speed2),
            weighted_sum(&rule, s, FieldSample::grad_v2),
            weighted_sum(&rule, s, |s| s.speed2().powf(1.5)),
            weighted_sum(&rule, s, |s| s.grad_p_norm().powf(9.0 / 8.0)),
        ]
    })?;
    let r3 = r * r * r;
    let (mut sup_v2, mut grad2, mut v3, mut gp) = (0.0f64, 0.0, 0.0, 0.0);
    for (vals, (_, w)) in per_slice.iter().zip(&slices) {
        sup_v2 = sup_v2.max(r3 * vals[0]);
        grad2 += w * r3 * vals[1];
        v3 += w * r3 * vals[2];
        gp += w * (r3 * vals[3]).powf(4.0 / 3.0);
    }
    let a = sup_v2 / r;
    let e = grad2 / r;
    let f = r.powf(-4.0 / 3.0) * v3.powf(2.0 / 3.0);
    let g = gp.powf(2.0 / 3.0) / r;
    Ok(FunctionalValues { center: *z, radius: r, a, e, f, g, y: f + g })
}

/// `r^-1 sup_s int_{B+(x,r)} |v(y,s)|^2 dy`, the sup taken over the time slices.
pub fn functional_a(field: &FieldSource, z: &SpaceTimePoint, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(functional_y(field, z, r, cfg)?.a)
}

/// `r^-1 int_{Q+(z,r)} |grad v|^2`
pub fn functional_e(field: &FieldSource, z: &SpaceTimePoint, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(functional_y(field, z, r, cfg)?.e)
}

/// `r^(-4/3) ||v||_{L^3(Q+(z,r))}^2`
pub fn functional_f(field: &FieldSource, z: &SpaceTimePoint, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(functional_y(field, z, r, cfg)?.f)
}

/// `r^-1 ||grad pi||` in the mixed norm with `p = 9/8`, `q = 3/2`.
pub fn functional_g(field: &FieldSource, z: &SpaceTimePoint, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(functional_y(field, z, r, cfg)?.g)
}

/// Reference mean subtracted from the pressure in the four-term integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanMode {
    /// Spatial mean over the half-ball, recomputed on every time slice.
    #[default]
    SliceWise,
    /// One mean over the whole half-cylinder.
    SpaceTime,
}

/// The four integrals `|v|^(10/3)`, `|grad v|^2`, `|pi - <pi>|^(5/3)`,
/// `|grad pi|^(5/4)` over one half-cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub velocity: f64,
    pub dissipation: f64,
    pub pressure: f64,
    pub pressure_gradient: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.velocity + self.dissipation + self.pressure + self.pressure_gradient
    }
}

fn slice_pressure_mean(rule: &HalfBallRule, samples: &[FieldSample]) -> f64 {
    let p: Vec<f64> = samples.iter().map(|s| s.p).collect();
    shifted_mean(rule, &p)
}

/// Four-term integral over `Q+(z, r)` with `<pi>` taken over `B+(x, r)`.
pub fn energy_terms(
    field: &FieldSource,
    z: &SpaceTimePoint,
    r: f64,
    cfg: &QuadratureConfig,
    mode: MeanMode,
) -> Result<EnergyTerms> {
    let region = ParabolicCylinder::new_half(*z, r)?;
    check_region(field, &region)?;
    energy_terms_slab(field, z.x, r, &time_nodes(z.t, r, cfg.time_slices), cfg, mode)
}

/// `(midpoint, weight)` pairs splitting `(t_lo, t_hi]` into `count` slices.
pub fn midpoint_slices(t_lo: f64, t_hi: f64, count: usize) -> Vec<(f64, f64)> {
    let dt = (t_hi - t_lo) / count as f64;
    (0..count).map(|j| (t_lo + (j as f64 + 0.5) * dt, dt)).collect()
}

/// Four-term integral over `B+(x, r)` times an arbitrary set of time slices.
/// The caller is responsible for the domain check.
pub fn energy_terms_slab(
    field: &FieldSource,
    x: [f64; 3],
    r: f64,
    slices: &[(f64, f64)],
    cfg: &QuadratureConfig,
    mode: MeanMode,
) -> Result<EnergyTerms> {
    cfg.validate()?;
    check_radius(r)?;
    if x[2] != 0.0 {
        return Err(Error::NotOnBoundary(x[2]));
    }
    let rule = HalfBallRule::new(cfg.cells_per_radius);
    let fixed_mean = match mode {
        MeanMode::SliceWise => None,
        MeanMode::SpaceTime => {
            let means = sweep(field, x, r, slices, &rule, |s| slice_pressure_mean(&rule, s))?;
            let total_w: f64 = slices.iter().map(|s| s.1).sum();
            Some(means.iter().zip(slices).map(|(m, (_, w))| w * m).sum::<f64>() / total_w)
        }
    };
    let per_slice = sweep(field, x, r, slices, &rule, |s| {
        let mean = fixed_mean.unwrap_or_else(|| slice_pressure_mean(&rule, s));
        [
            weighted_sum(&rule, s, |s| s.speed2().powf(5.0 / 3.0)),
            weighted_sum(&rule, s, FieldSample::grad_v2),
            weighted_sum(&rule, s, |s| (s.p - mean).abs().powf(5.0 / 3.0)),
            weighted_sum(&rule, s, |s| s.grad_p_norm().powf(5.0 / 4.0)),
        ]
    })?;
    let r3 = r * r * r;
    let mut out = EnergyTerms::default();
    for (vals, (_, w)) in per_slice.iter().zip(slices) {
        let k = w * r3;
        out.velocity += k * vals[0];
        out.dissipation += k * vals[1];
        out.pressure += k * vals[2];
        out.pressure_gradient += k * vals[3];
    }
    Ok(out)
}

/// One evaluation of a scaling-law ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRatio {
    pub r: f64,
    pub theta: f64,
    pub ratio: f64,
}

/// `(r A(r/2) + r E(r/2)) / (r^(-1/2) int_{Q+(r)} four terms)`.
pub fn energy_bound_ratio(
    field: &FieldSource,
    z: &SpaceTimePoint,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<ScalingRatio> {
    let half = functional_y(field, z, r / 2.0, cfg)?;
    let rhs = r.powf(-0.5) * energy_terms(field, z, r, cfg, MeanMode::SliceWise)?.total();
    Ok(ScalingRatio { r, theta: 0.5, ratio: r * (half.a + half.e) / rhs })
}

/// `theta F(theta r) / (A(r)^(1/3) E(r)^(2/3))`.
pub fn interpolation_ratio(
    field: &FieldSource,
    z: &SpaceTimePoint,
    r: f64,
    theta: f64,
    cfg: &QuadratureConfig,
) -> Result<ScalingRatio> {
    let outer = functional_y(field, z, r, cfg)?;
    let inner = functional_y(field, z, theta * r, cfg)?;
    let ratio = theta * inner.f / (outer.a.powf(1.0 / 3.0) * outer.e.powf(2.0 / 3.0));
    Ok(ScalingRatio { r, theta, ratio })
}

/// Smallest constant bounding every ratio, and the growth factor between the
/// largest ratio at the finest and at the coarsest `r`.
pub fn fit_scaling_constant(ratios: &[ScalingRatio]) -> Option<(f64, f64)> {
    let finite: Vec<&ScalingRatio> = ratios.iter().filter(|s| s.ratio.is_finite()).collect();
    let k = finite.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    let r_min = finite.iter().map(|s| s.r).fold(f64::INFINITY, f64::min);
    let r_max = finite.iter().map(|s| s.r).fold(f64::NEG_INFINITY, f64::max);
    let max_at = |r: f64| finite.iter().filter(|s| s.r == r).map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    (!finite.is_empty()).then(|| (k, max_at(r_min) / max_at(r_max)))
}
