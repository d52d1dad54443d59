//! One-sided regularity criteria, the iteration terms of the threshold
//! argument, the local energy residual and the screening/counting pipeline.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxcount::{fmt_f64, least_squares};
use crate::error::{Error, Result};
use crate::fields::FieldSource;
use crate::functionals::{
    energy_terms, functional_y, midpoint_slices, EnergyTerms, FunctionalValues, HalfBallRule, MeanMode,
    QuadratureConfig,
};
use crate::geometry::{parabolic_distance, vitali_disjoint_subfamily, ParabolicCylinder, SpaceTimePoint};

/// Radii admitted by the small-scale criterion are strictly below `2^-12`.
pub const RHO_MAX: f64 = 1.0 / 4096.0;

/// Thresholds and constants. The defaults for `epsilon`, `script_e`, the `K`s
/// and `c` are configuration choices, not derived values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    pub epsilon: f64,
    pub script_e: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Interpolation constant in the pressure term `I`.
    pub c: f64,
    pub alpha_exp: f64,
    pub beta_exp: f64,
    pub mean_mode: MeanMode,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            script_e: 0.01,
            k1: 10.0,
            k2: 10.0,
            k3: 10.0,
            c: 10.0,
            alpha_exp: 7.0 / 6.0,
            beta_exp: 1.0 / 6.0,
            mean_mode: MeanMode::SliceWise,
        }
    }
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("epsilon", self.epsilon),
            ("script_e", self.script_e),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("c", self.c),
            ("alpha_exp", self.alpha_exp),
            ("beta_exp", self.beta_exp),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadConstants(format!("{name} must be positive, got {v}")));
            }
        }
        if self.script_e >= 1.0 {
            return Err(Error::BadConstants(format!("script_e must be < 1, got {}", self.script_e)));
        }
        Ok(())
    }

    /// `theta = rho^beta`
    pub fn theta(&self, rho: f64) -> f64 {
        rho.powf(self.beta_exp)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < RHO_MAX {
        Ok(())
    } else {
        Err(Error::RhoTooLarge(rho))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Regular,
    NotDecided,
}

/// The quantity compared against its threshold at `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub radius: f64,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityVerdict {
    pub point: SpaceTimePoint,
    pub verdict: Verdict,
    pub witness: Witness,
}

impl RegularityVerdict {
    pub fn is_regular(&self) -> bool {
        self.verdict == Verdict::Regular
    }

    fn strict(point: SpaceTimePoint, radius: f64, value: f64, threshold: f64) -> Self {
        let verdict = if value < threshold { Verdict::Regular } else { Verdict::NotDecided };
        Self { point, verdict, witness: Witness { radius, value, threshold } }
    }
}

/// Regular iff `Y(z, R) < epsilon`.
pub fn lemma1_check(
    field: &FieldSource,
    z: &SpaceTimePoint,
    big_r: f64,
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<RegularityVerdict> {
    consts.validate()?;
    let y = functional_y(field, z, big_r, cfg)?.y;
    Ok(RegularityVerdict::strict(*z, big_r, y, consts.epsilon))
}

/// `int_{Q+(z,rho)} |v|^(10/3) + |grad v|^2 + |pi - <pi>|^(5/3) + |grad pi|^(5/4)`.
/// Defined at every radius; only [`prop1_check`] enforces `rho < 2^-12`.
pub fn prop1_lhs(
    field: &FieldSource,
    z: &SpaceTimePoint,
    rho: f64,
    cfg: &QuadratureConfig,
    mode: MeanMode,
) -> Result<f64> {
    Ok(energy_terms(field, z, rho, cfg, mode)?.total())
}

/// Regular iff the four-term integral is below `rho^(3/2) script_e`.
pub fn prop1_check(
    field: &FieldSource,
    z: &SpaceTimePoint,
    rho: f64,
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<RegularityVerdict> {
    check_rho(rho)?;
    consts.validate()?;
    let lhs = prop1_lhs(field, z, rho, cfg, consts.mean_mode)?;
    Ok(RegularityVerdict::strict(*z, rho, lhs, rho.powf(1.5) * consts.script_e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTerms {
    pub rho: f64,
    pub theta: f64,
    /// `rho^alpha`
    pub rho_alpha: f64,
    pub at_rho: FunctionalValues,
    pub at_rho_alpha: FunctionalValues,
    /// Pressure terms of the four-term integral over `Q+(rho^alpha)`.
    pub pressure_integral: f64,
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
    /// Functionals at `theta rho^alpha`.
    pub inner: FunctionalValues,
    pub bound: f64,
    pub holds: bool,
}

/// The three terms bounding `Y(theta rho^alpha)`:
/// `I = C K3 theta rho^-alpha (int |pi - <pi>|^(5/3) + |grad pi|^(5/4))^(2/3)`,
/// `II = K3 theta E(rho^alpha)^(1/2)`,
/// `III = (K2 + K3) theta^-1 A(rho^alpha)^(1/3) E(rho^alpha)^(2/3)`.
pub fn iteration_terms(
    field: &FieldSource,
    z: &SpaceTimePoint,
    rho: f64,
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<IterationTerms> {
    check_rho(rho)?;
    consts.validate()?;
    let theta = consts.theta(rho);
    let rho_alpha = rho.powf(consts.alpha_exp);
    let at_rho = functional_y(field, z, rho, cfg)?;
    let at_rho_alpha = functional_y(field, z, rho_alpha, cfg)?;
    let terms = energy_terms(field, z, rho_alpha, cfg, consts.mean_mode)?;
    let pressure_integral = terms.pressure + terms.pressure_gradient;
    let i = consts.c * consts.k3 * theta * rho_alpha.recip() * pressure_integral.powf(2.0 / 3.0);
    let ii = consts.k3 * theta * at_rho_alpha.e.sqrt();
    let iii = (consts.k2 + consts.k3) / theta * at_rho_alpha.a.cbrt() * at_rho_alpha.e.powf(2.0 / 3.0);
    let inner = functional_y(field, z, theta * rho_alpha, cfg)?;
    let bound = i + ii + iii;
    Ok(IterationTerms {
        rho,
        theta,
        rho_alpha,
        at_rho,
        at_rho_alpha,
        pressure_integral,
        i,
        ii,
        iii,
        inner,
        bound,
        holds: inner.y <= bound,
    })
}

/// Smooth cutoff `eta(|x - x0| / r) tau((t0 - t) / r^2)`, equal to one on the
/// cylinder of radius `inner * r` and vanishing outside `Q(z, r)`. Transitions
/// use the quintic smoothstep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: [f64; 3],
    pub t0: f64,
    pub radius: f64,
    pub inner: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { center: [0.0; 3], t0: 0.0, radius: 0.9, inner: 0.5 }
    }
}

/// Value and derivatives of a [`Cutoff`] at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffValue {
    pub phi: f64,
    pub dt: f64,
    pub grad: [f64; 3],
    pub laplacian: f64,
    /// Frobenius norm of the spatial Hessian.
    pub hessian_norm: f64,
}

/// `1 - S(u)` for the quintic smoothstep `S`, with first and second derivatives in `u`.
fn falloff(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let s1 = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    let s2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    (1.0 - s, -s1, -s2)
}

impl Cutoff {
    /// Derivative budget `|d_t phi| + |grad^2 phi| + |grad phi|^2 <= BOUND r^-2`.
    pub const BOUND: f64 = 100.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::NonpositiveRadius(self.radius));
        }
        if !(self.inner > 0.0 && self.inner < 1.0) {
            return Err(Error::BadConstants(format!("cutoff inner fraction must lie in (0, 1), got {}", self.inner)));
        }
        if self.center[2] != 0.0 {
            return Err(Error::NotOnBoundary(self.center[2]));
        }
        Ok(())
    }

    pub fn eval(&self, x: [f64; 3], t: f64) -> CutoffValue {
        let (r, a) = (self.radius, self.inner);
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let w = (1.0 - a) * r;
        let (eta, e1, e2) = falloff((rho / r - a) / (1.0 - a));
        let (eta1, eta2) = (e1 / w, e2 / (w * w));

        let a2 = a * a;
        let (tau, t1, _) = falloff(((self.t0 - t) / (r * r) - a2) / (1.0 - a2));
        let dtau_dt = -t1 / ((1.0 - a2) * r * r);

        let radial = if rho > 0.0 { eta1 / rho } else { 0.0 };
        let grad = d.map(|c| radial * c * tau);
        CutoffValue {
            phi: eta * tau,
            dt: eta * dtau_dt,
            grad,
            laplacian: (eta2 + 2.0 * radial) * tau,
            hessian_norm: (eta2 * eta2 + 2.0 * radial * radial).sqrt() * tau,
        }
    }

    /// Largest sampled `(|d_t phi| + |grad^2 phi| + |grad phi|^2) r^2`.
    pub fn derivative_budget(&self) -> f64 {
        let n = 200;
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            let x = [self.center[0] + self.radius * i as f64 / n as f64, self.center[1], 0.0];
            for j in 0..=n {
                let t = self.t0 - self.radius * self.radius * j as f64 / n as f64;
                let c = self.eval(x, t);
                let g2: f64 = c.grad.iter().map(|g| g * g).sum();
                worst = worst.max((c.dt.abs() + c.hessian_norm + g2) * self.radius * self.radius);
            }
        }
        worst
    }

    pub fn check(&self) -> Result<()> {
        self.validate()?;
        let value = self.derivative_budget();
        if value > Self::BOUND {
            return Err(Error::BadCutoff { value, bound: Self::BOUND });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResidual {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub residual: f64,
}

/// Refinement of the residual rule over the configured one, in space and time. The rhs
/// carries second derivatives of the cutoff whose positive and negative parts
/// nearly cancel, so the shared default resolution is off by several percent.
pub const RESIDUAL_REFINE: usize = 4;

/// Both sides of the local energy inequality at time `t` for the cutoff
/// `phi`, integrated over `B+(x0, r) x (max(-1, t0 - r^2), t]`.
pub fn energy_residual(field: &FieldSource, cutoff: &Cutoff, t: f64, cfg: &QuadratureConfig) -> Result<EnergyResidual> {
    cutoff.check()?;
    cfg.validate()?;
    if !(t > -1.0 && t < 0.0) {
        return Err(Error::OutOfDomain(format!("t = {t} is not in (-1, 0)")));
    }
    let (x0, r) = (cutoff.center, cutoff.radius);
    let t_lo = (cutoff.t0 - r * r).max(-1.0);
    field.check_region(x0, r, t_lo.min(t), t)?;
    let rule = HalfBallRule::new(RESIDUAL_REFINE * cfg.cells_per_radius);
    let r3 = r * r * r;

    // [|v|^2 phi, |grad v|^2 phi, |v|^2 (phi_t + lap phi), |v|^2 v.grad phi, pi v.grad phi]
    let slice = |s: f64| -> Result<[f64; 5]> {
        let mut acc = [0.0; 5];
        for (p, w) in rule.points().iter().zip(rule.weights()) {
            let y = [x0[0] + r * p[0], x0[1] + r * p[1], r * p[2]];
            let c = cutoff.eval(y, s);
            if c.phi == 0.0 && c.dt == 0.0 && c.laplacian == 0.0 {
                continue;
            }
            let f = field.sample(y, s)?;
            let v2 = f.speed2();
            let v_grad_phi: f64 = (0..3).map(|i| f.v[i] * c.grad[i]).sum();
            acc[0] += w * v2 * c.phi;
            acc[1] += w * f.grad_v2() * c.phi;
            acc[2] += w * v2 * (c.dt + c.laplacian);
            acc[3] += w * v2 * v_grad_phi;
            acc[4] += w * f.p * v_grad_phi;
        }
        Ok(acc.map(|a| a * r3))
    };

    let kinetic = slice(t)?[0];
    let mut integrals = [0.0; 5];
    if t > t_lo {
        let count = (((RESIDUAL_REFINE * cfg.time_slices) as f64 * (t - t_lo) / (r * r)).ceil() as usize).max(1);
        let slices = midpoint_slices(t_lo, t, count);
        let per: Vec<[f64; 5]> = slices.par_iter().map(|&(s, _)| slice(s)).collect::<Result<_>>()?;
        for (vals, (_, w)) in per.iter().zip(&slices) {
            for k in 0..5 {
                integrals[k] += w * vals[k];
            }
        }
    }
    let lhs = kinetic + 2.0 * integrals[1];
    let rhs = integrals[2] + integrals[3] + 2.0 * integrals[4];
    Ok(EnergyResidual { lhs, rhs, residual: rhs - lhs })
}

/// Four-term integral over `Q+(0, radius)` at `t = 0`; `radius = 1` is the whole domain.
pub fn compute_k5(field: &FieldSource, radius: f64, cfg: &QuadratureConfig, mode: MeanMode) -> Result<EnergyTerms> {
    energy_terms(field, &SpaceTimePoint::ORIGIN, radius, cfg, mode)
}

/// Boundary points `(x1, x2, 0, t)` on a tensor grid over
/// `[-a, a]^2 x [t_min, 0]`; points with `|x| >= 1` are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub half_width: f64,
    pub space_points: usize,
    pub time_points: usize,
    pub t_min: f64,
}

impl Default for BoundaryGrid {
    fn default() -> Self {
        Self { half_width: 0.5, space_points: 9, time_points: 5, t_min: -0.25 }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl BoundaryGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::NonpositiveRadius(self.half_width));
        }
        if self.space_points == 0 || self.time_points == 0 {
            return Err(Error::EmptyInput);
        }
        if !(self.t_min >= -1.0 && self.t_min <= 0.0) {
            return Err(Error::OutOfDomain(format!("t_min = {} is not in [-1, 0]", self.t_min)));
        }
        Ok(())
    }

    /// Points ordered by time, then `x2`, then `x1`.
    pub fn points(&self) -> Vec<SpaceTimePoint> {
        let xs = linspace(-self.half_width, self.half_width, self.space_points);
        let mut out = Vec::new();
        for &t in &linspace(self.t_min, 0.0, self.time_points) {
            for &x2 in &xs {
                for &x1 in &xs {
                    if x1 * x1 + x2 * x2 < 1.0 {
                        out.push(SpaceTimePoint::boundary(x1, x2, t));
                    }
                }
            }
        }
        out
    }

    /// The same grid in the coordinates `(x / lambda, t / lambda^2)`.
    fn rescaled_points(&self, lambda: f64) -> Vec<SpaceTimePoint> {
        self.points()
            .into_iter()
            .map(|p| SpaceTimePoint::boundary(p.x[0] / lambda, p.x[1] / lambda, p.t / (lambda * lambda)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverRow {
    pub r: f64,
    /// Size of the Vitali-disjoint subfamily of flagged cylinders.
    pub m: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReport {
    /// Rescaling applied before screening (`1` when none). All coordinates
    /// and radii below refer to the screened field.
    pub lambda: f64,
    pub points: usize,
    pub regular: usize,
    /// Points not decided regular at any radius.
    pub flagged: Vec<SpaceTimePoint>,
    pub rows: Vec<CoverRow>,
    pub k5: f64,
    pub script_e: f64,
    /// Slope and `r^2` of `log M` against `-log r` over radii with `M > 0`.
    pub slope: Option<(f64, f64)>,
}

impl ScreeningReport {
    pub fn all_margins_nonnegative(&self) -> bool {
        self.rows.iter().all(|r| r.margin >= 0.0)
    }

    /// CSV `r,M,K5,margin`.
    pub fn cover_csv(&self) -> String {
        let mut out = String::from("r,M,K5,margin\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", fmt_f64(row.r), row.m, fmt_f64(self.k5), fmt_f64(row.margin));
        }
        out
    }

    /// CSV `x1,x2,t` of flagged points.
    pub fn flagged_csv(&self) -> String {
        let mut out = String::from("x1,x2,t\n");
        for p in &self.flagged {
            let _ = writeln!(out, "{},{},{}", fmt_f64(p.x[0]), fmt_f64(p.x[1]), fmt_f64(p.t));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lambda: {}", fmt_f64(self.lambda));
        let _ = writeln!(out, "points: {}", self.points);
        let _ = writeln!(out, "regular: {}", self.regular);
        let _ = writeln!(out, "flagged: {}", self.flagged.len());
        let _ = writeln!(out, "K5: {}", fmt_f64(self.k5));
        let _ = writeln!(out, "script_E: {}", fmt_f64(self.script_e));
        match self.slope {
            Some((s, r2)) => {
                let _ = writeln!(out, "slope: {}", fmt_f64(s));
                let _ = writeln!(out, "r2: {}", fmt_f64(r2));
            }
            None => {
                let _ = writeln!(out, "slope: n/a");
            }
        }
        let _ = writeln!(out, "margins_nonnegative: {}", self.all_margins_nonnegative());
        out
    }
}

/// First radius (largest first) at which the point is decided regular.
fn first_regular_radius(
    field: &FieldSource,
    z: &SpaceTimePoint,
    radii: &[f64],
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<Option<f64>> {
    for &rho in radii {
        if prop1_check(field, z, rho, consts, cfg)?.is_regular() {
            return Ok(Some(rho));
        }
    }
    Ok(None)
}

fn run_screen(
    field: &FieldSource,
    points: Vec<SpaceTimePoint>,
    radii: &[f64],
    domain_radius: f64,
    lambda: f64,
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<ScreeningReport> {
    consts.validate()?;
    cfg.validate()?;
    if radii.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut radii = radii.to_vec();
    for &r in &radii {
        check_rho(r)?;
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();

    let outcomes: Vec<Option<f64>> = points
        .par_iter()
        .map(|z| first_regular_radius(field, z, &radii, consts, cfg))
        .collect::<Result<_>>()?;
    let regular: Vec<SpaceTimePoint> =
        points.iter().zip(&outcomes).filter(|(_, o)| o.is_some()).map(|(p, _)| *p).collect();
    let flagged: Vec<SpaceTimePoint> =
        points.iter().zip(&outcomes).filter(|(_, o)| o.is_none()).map(|(p, _)| *p).collect();

    let k5 = compute_k5(field, domain_radius, cfg, consts.mean_mode)?.total();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let kept: Vec<ParabolicCylinder> = flagged
            .iter()
            .filter(|f| regular.iter().all(|g| parabolic_distance(f, g) >= r))
            .map(|f| ParabolicCylinder::new(*f, r))
            .collect::<Result<_>>()?;
        let m = if kept.is_empty() { 0 } else { vitali_disjoint_subfamily(&kept)?.len() };
        rows.push(CoverRow { r, m, margin: k5 - m as f64 * consts.script_e * r.powf(1.5) });
    }
    let fit: Vec<(f64, f64)> = rows.iter().filter(|row| row.m > 0).map(|row| (-row.r.ln(), (row.m as f64).ln())).collect();
    let slope = least_squares(&fit).ok().map(|(s, _, r2)| (s, r2));
    Ok(ScreeningReport {
        lambda,
        points: points.len(),
        regular: regular.len(),
        flagged,
        rows,
        k5,
        script_e: consts.script_e,
        slope,
    })
}

/// Screens the boundary grid directly; every radius must lie in `(0, 2^-12)`.
pub fn screen(
    field: &FieldSource,
    grid: &BoundaryGrid,
    radii: &[f64],
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<ScreeningReport> {
    grid.validate()?;
    run_screen(field, grid.points(), radii, 1.0, 1.0, consts, cfg)
}

/// Screens `ns_rescale(field, lambda)` with `lambda = 2^13 max(radii)`, so
/// that domain-unit radii map below `2^-12`. The grid, the radii and the
/// domain are mapped along with the field.
pub fn screen_rescaled(
    field: &FieldSource,
    grid: &BoundaryGrid,
    radii: &[f64],
    consts: &ConstantsConfig,
    cfg: &QuadratureConfig,
) -> Result<ScreeningReport> {
    grid.validate()?;
    let r_max = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(r_max > 0.0 && r_max.is_finite()) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::NonpositiveRadius(r_max));
    }
    let lambda = r_max * 8192.0;
    let scaled = crate::fields::ns_rescale(field, lambda)?;
    let radii: Vec<f64> = radii.iter().map(|r| r / lambda).collect();
    run_screen(&scaled, grid.rescaled_points(lambda), &radii, 1.0 / lambda, lambda, consts, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_analytic, AnalyticField, GridSpec};
    use std::f64::consts::PI;

    const VOL: f64 = 2.0 * PI / 3.0;

    fn gen(name: &str) -> FieldSource {
        FieldSource::generator(name, &[]).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn coarse() -> QuadratureConfig {
        QuadratureConfig { cells_per_radius: 6, time_slices: 6 }
    }

    #[test]
    fn lemma1_examples() {
        let cfg = QuadratureConfig::default();
        let o = SpaceTimePoint::ORIGIN;
        let k = ConstantsConfig::default();
        assert!(lemma1_check(&gen("zero"), &o, 0.5, &k, &cfg).unwrap().is_regular());
        let tiny = ConstantsConfig { epsilon: 1e-6, ..k };
        let v = lemma1_check(&gen("constant"), &o, 0.5, &tiny, &cfg).unwrap();
        assert_eq!(v.verdict, Verdict::NotDecided);
        let loose = ConstantsConfig { epsilon: 10.0, ..k };
        let v = lemma1_check(&gen("shear"), &o, 0.25, &loose, &cfg).unwrap();
        assert!(v.is_regular());
        assert_eq!(v.witness.value, functional_y(&gen("shear"), &o, 0.25, &cfg).unwrap().y);
        assert_eq!(v.witness.radius, 0.25);
    }

    #[test]
    fn prop1_examples() {
        let cfg = QuadratureConfig::default();
        let o = SpaceTimePoint::ORIGIN;
        let k = ConstantsConfig::default();
        assert_eq!(prop1_lhs(&gen("zero"), &o, 0.3, &cfg, MeanMode::SliceWise).unwrap(), 0.0);
        let c = FieldSource::generator("constant", &[("p0".into(), 3.0)]).unwrap();
        let rho: f64 = 0.5;
        assert!(rel(prop1_lhs(&c, &o, rho, &cfg, MeanMode::SliceWise).unwrap(), VOL * rho.powi(5)) < 0.01);

        let b1 = prop1_lhs(&c, &o, rho, &cfg, MeanMode::SliceWise).unwrap();
        let c2 = FieldSource::generator("constant", &[("u1".into(), 2.0), ("p0".into(), 3.0)]).unwrap();
        let b2 = prop1_lhs(&c2, &o, rho, &cfg, MeanMode::SliceWise).unwrap();
        assert!(rel(b2, 2f64.powf(10.0 / 3.0) * b1) < 1e-13);

        assert!(prop1_check(&gen("zero"), &o, 1.0 / 8192.0, &k, &cfg).unwrap().is_regular());
        assert!(matches!(prop1_check(&gen("zero"), &o, RHO_MAX, &k, &cfg), Err(Error::RhoTooLarge(_))));
        assert!(matches!(prop1_check(&gen("zero"), &o, 0.0, &k, &cfg), Err(Error::RhoTooLarge(_))));
    }

    #[test]
    fn prop1_is_strict_at_threshold() {
        let cfg = QuadratureConfig::default();
        let o = SpaceTimePoint::ORIGIN;
        let rho = 1.0 / 8192.0;
        let c = gen("constant");
        let lhs = prop1_lhs(&c, &o, rho, &cfg, MeanMode::SliceWise).unwrap();
        let at = ConstantsConfig { script_e: lhs / rho.powf(1.5), ..Default::default() };
        let v = prop1_check(&c, &o, rho, &at, &cfg).unwrap();
        if v.witness.value == v.witness.threshold {
            assert_eq!(v.verdict, Verdict::NotDecided);
        }
        assert_eq!(RegularityVerdict::strict(o, rho, 1.0, 1.0).verdict, Verdict::NotDecided);
    }

    #[test]
    fn planted_singular_is_never_decided() {
        let cfg = QuadratureConfig::default();
        let f = gen("planted-singular");
        let k = ConstantsConfig { script_e: 1e-3, ..Default::default() };
        let mut normalized = Vec::new();
        for j in 13..=16 {
            let rho = (-(j as f64)).exp2();
            let v = prop1_check(&f, &SpaceTimePoint::ORIGIN, rho, &k, &cfg).unwrap();
            assert_eq!(v.verdict, Verdict::NotDecided);
            normalized.push(v.witness.value / rho.powf(1.5));
        }
        // bounded below, in fact growing like rho^-1/2
        assert!(normalized.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn theta_at_smallest_admissible_scale() {
        let k = ConstantsConfig::default();
        let theta = k.theta(1.0 / 8192.0);
        assert!((theta - 2f64.powf(-13.0 / 6.0)).abs() < 1e-15);
        assert!((theta - 0.2227).abs() < 1e-4 && theta < 0.25);
        assert!(k.theta(RHO_MAX * 0.999) < 0.25);
    }

    #[test]
    fn iteration_terms_zero_and_oracle() {
        let cfg = coarse();
        let o = SpaceTimePoint::ORIGIN;
        let k = ConstantsConfig::default();
        let rho = 1.0 / 8192.0;
        let z = iteration_terms(&gen("zero"), &o, rho, &k, &cfg).unwrap();
        assert_eq!([z.i, z.ii, z.iii, z.inner.y], [0.0; 4]);

        // recompute from raw functional values
        let f = gen("shear");
        let t = iteration_terms(&f, &o, rho, &k, &cfg).unwrap();
        let theta = rho.powf(1.0 / 6.0);
        let ra = rho.powf(7.0 / 6.0);
        let outer = functional_y(&f, &o, ra, &cfg).unwrap();
        let e = energy_terms(&f, &o, ra, &cfg, MeanMode::SliceWise).unwrap();
        let i = 10.0 * 10.0 * theta / ra * (e.pressure + e.pressure_gradient).powf(2.0 / 3.0);
        let ii = 10.0 * theta * outer.e.sqrt();
        let iii = 20.0 / theta * outer.a.powf(1.0 / 3.0) * outer.e.powf(2.0 / 3.0);
        assert!((t.i - i).abs() <= 1e-12 * i.abs().max(1e-300));
        assert!(rel(t.ii, ii) < 1e-12);
        assert!(rel(t.iii, iii) < 1e-12);
        let inner = functional_y(&f, &o, theta * ra, &cfg).unwrap();
        assert_eq!(t.inner.y, inner.y);
        assert!((theta * ra - rho.powf(4.0 / 3.0)).abs() < 1e-18);
        assert!(t.holds);
    }

    #[test]
    fn iteration_bound_holds_across_scales_on_smooth_generators() {
        let cfg = coarse();
        let k = ConstantsConfig::default();
        for name in ["shear", "bump"] {
            for j in 13..=15 {
                let rho = (-(j as f64)).exp2();
                let t = iteration_terms(&gen(name), &SpaceTimePoint::ORIGIN, rho, &k, &cfg).unwrap();
                assert!(t.holds, "{name} rho=2^-{j}: {} > {}", t.inner.y, t.bound);
                assert!(t.theta * t.rho_alpha < rho);
            }
        }
    }

    #[test]
    fn cutoff_shape_and_budget() {
        let c = Cutoff::default();
        c.check().unwrap();
        assert_eq!(c.eval([0.2, 0.0, 0.1], -0.1).phi, 1.0);
        assert_eq!(c.eval([0.95, 0.0, 0.0], -0.1).phi, 0.0);
        assert_eq!(c.eval([0.0, 0.0, 0.1], -0.85).phi, 0.0);
        assert!(c.derivative_budget() <= Cutoff::BOUND);
        let steep = Cutoff { inner: 0.95, ..c };
        assert!(matches!(steep.check(), Err(Error::BadCutoff { .. })));

        // analytic derivatives against central differences
        let (x, t, h) = ([0.3, 0.4, 0.2], -0.4, 1e-5);
        let v = c.eval(x, t);
        let dt = (c.eval(x, t + h).phi - c.eval(x, t - h).phi) / (2.0 * h);
        assert!((dt - v.dt).abs() < 1e-6);
        let mut lap = 0.0;
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (p, m) = (c.eval(xp, t).phi, c.eval(xm, t).phi);
            assert!(((p - m) / (2.0 * h) - v.grad[j]).abs() < 1e-6);
            lap += (p - 2.0 * v.phi + m) / (h * h);
        }
        assert!((lap - v.laplacian).abs() < 1e-3);
    }

    #[test]
    fn energy_residual_zero_and_pressure_only() {
        let cfg = coarse();
        let c = Cutoff::default();
        let z = energy_residual(&gen("zero"), &c, -0.5, &cfg).unwrap();
        assert_eq!((z.lhs, z.rhs, z.residual), (0.0, 0.0, 0.0));
        let p = FieldSource::generator("constant", &[("u1".into(), 0.0), ("g1".into(), 3.0), ("p0".into(), 1.0)]).unwrap();
        let z = energy_residual(&p, &c, -0.5, &cfg).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn energy_residual_matches_refined_quadrature() {
        // Cartesian midpoint cells over the box around B+; the cutoff vanishes
        // smoothly at |y| = r so the jagged ball boundary costs nothing.
        fn oracle(f: &FieldSource, c: &Cutoff, t: f64, n: usize, m: usize) -> f64 {
            let r = c.radius;
            let h = r / n as f64;
            let t_lo = -r * r;
            let dt = (t - t_lo) / m as f64;
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for k in 0..=m {
                let s = if k == m { t } else { t_lo + (k as f64 + 0.5) * dt };
                for i in 0..2 * n {
                    for j in 0..2 * n {
                        for l in 0..n {
                            let y = [-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h, (l as f64 + 0.5) * h];
                            if y.iter().map(|a| a * a).sum::<f64>() >= r * r {
                                continue;
                            }
                            let cv = c.eval(y, s);
                            let fs = f.sample(y, s).unwrap();
                            let v2 = fs.v.iter().map(|a| a * a).sum::<f64>();
                            let g2 = fs.grad_v.iter().flatten().map(|a| a * a).sum::<f64>();
                            let vg: f64 = (0..3).map(|q| fs.v[q] * cv.grad[q]).sum();
                            let w = h * h * h;
                            if k == m {
                                lhs += w * v2 * cv.phi;
                            } else {
                                lhs += 2.0 * w * dt * g2 * cv.phi;
                                rhs += w * dt * (v2 * (cv.dt + cv.laplacian) + v2 * vg + 2.0 * fs.p * vg);
                            }
                        }
                    }
                }
            }
            rhs - lhs
        }
        let b = gen("bump");
        let c = Cutoff::default();
        let got = energy_residual(&b, &c, -0.5, &QuadratureConfig::default()).unwrap();
        let want = oracle(&b, &c, -0.5, 64, 32);
        assert!(rel(got.residual, want) < 0.01, "{got:?} vs {want}");
    }

    #[test]
    fn k5_closed_form_and_additivity() {
        let cfg = QuadratureConfig::default();
        let c = gen("constant");
        assert_eq!(compute_k5(&gen("zero"), 1.0, &cfg, MeanMode::SliceWise).unwrap().total(), 0.0);
        assert!(rel(compute_k5(&c, 1.0, &cfg, MeanMode::SliceWise).unwrap().total(), VOL) < 0.01);

        // splitting (-1, 0] into four slabs of three slices each
        let b = gen("bump");
        let whole = compute_k5(&b, 1.0, &cfg, MeanMode::SliceWise).unwrap().total();
        let parts: f64 = (0..4)
            .map(|k| {
                let lo = -1.0 + 0.25 * k as f64;
                let slices = midpoint_slices(lo, lo + 0.25, 3);
                crate::functionals::energy_terms_slab(&b, [0.0; 3], 1.0, &slices, &cfg, MeanMode::SliceWise)
                    .unwrap()
                    .total()
            })
            .sum();
        assert!(rel(parts, whole) < 1e-10);
    }

    #[test]
    fn screen_zero_and_bump() {
        let cfg = coarse();
        let k = ConstantsConfig::default();
        let grid = BoundaryGrid { space_points: 3, time_points: 2, ..Default::default() };
        let radii = [1.0 / 8192.0, 1.0 / 16384.0];
        let z = screen(&gen("zero"), &grid, &radii, &k, &cfg).unwrap();
        assert!(z.flagged.is_empty());
        assert!(z.rows.iter().all(|r| r.m == 0));
        assert_eq!(z.k5, 0.0);
        let generous = ConstantsConfig { script_e: 0.5, ..k };
        let b = screen(&gen("bump"), &grid, &radii, &generous, &cfg).unwrap();
        assert!(b.flagged.is_empty());
        assert!(matches!(screen(&gen("zero"), &grid, &[0.01], &k, &cfg), Err(Error::RhoTooLarge(_))));
    }

    #[test]
    fn screen_planted_singular() {
        let cfg = coarse();
        let k = ConstantsConfig::default();
        let grid = BoundaryGrid::default();
        let radii: Vec<f64> = (13..=16).map(|j| (-(j as f64)).exp2()).collect();
        let rep = screen(&gen("planted-singular"), &grid, &radii, &k, &cfg).unwrap();
        assert!(!rep.flagged.is_empty());
        assert!(rep.flagged.iter().all(|p| p.x[0].abs() <= 0.125 && p.x[1].abs() <= 0.125 && p.t > -0.07));
        assert!(rep.all_margins_nonnegative());
        let (slope, _) = rep.slope.unwrap();
        assert!(slope <= 1.6);
    }

    #[test]
    fn thresholds_are_monotone() {
        let cfg = coarse();
        let f = gen("planted-singular");
        let pts = BoundaryGrid { half_width: 0.002, space_points: 3, time_points: 3, t_min: -1e-5 }.points();
        let rho = 1.0 / 8192.0;
        let mut prev: Vec<bool> = vec![false; pts.len()];
        for e in [1e-4, 1e-2, 1.0 - 1e-9] {
            let k = ConstantsConfig { script_e: e, ..Default::default() };
            let cur: Vec<bool> = pts.iter().map(|p| prop1_check(&f, p, rho, &k, &cfg).unwrap().is_regular()).collect();
            assert!(prev.iter().zip(&cur).all(|(a, b)| !a || *b));
            prev = cur;
        }
        let mut prev: Vec<bool> = vec![false; pts.len()];
        for eps in [1e-3, 1e-1, 10.0] {
            let k = ConstantsConfig { epsilon: eps, ..Default::default() };
            let cur: Vec<bool> =
                pts.iter().map(|p| lemma1_check(&f, p, 0.001, &k, &cfg).unwrap().is_regular()).collect();
            assert!(prev.iter().zip(&cur).all(|(a, b)| !a || *b));
            prev = cur;
        }
    }

    #[test]
    fn rescaled_screen_maps_radii_and_domain() {
        let cfg = coarse();
        let k = ConstantsConfig::default();
        let grid = BoundaryGrid { space_points: 3, time_points: 2, ..Default::default() };
        let rep = screen_rescaled(&gen("zero"), &grid, &[0.1, 0.05], &k, &cfg).unwrap();
        assert_eq!(rep.lambda, 819.2);
        assert!(rep.rows.iter().all(|r| r.r < RHO_MAX));
        assert!(rep.flagged.is_empty());
    }

    #[test]
    fn gridded_screen_reports_out_of_domain() {
        let g = sample_analytic(&AnalyticField::from_registry("shear", &[]).unwrap(), &GridSpec::unit_half_cylinder(5))
            .unwrap();
        let f = FieldSource::gridded(g).unwrap();
        let grid = BoundaryGrid { half_width: 1.0, space_points: 3, time_points: 1, t_min: 0.0 };
        // only the origin has |x| < 1
        assert_eq!(grid.points().len(), 1);
        let err = screen(&f, &BoundaryGrid { half_width: 0.99999, ..grid }, &[1e-4], &ConstantsConfig::default(), &coarse());
        assert!(matches!(err, Err(Error::OutOfDomain(_))));
    }
}
