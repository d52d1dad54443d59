//! Velocity/pressure fields: gridded samples with 4-linear interpolation,
//! closed-form generators, and the Navier-Stokes rescaling.

pub mod analytic;
pub mod io;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use analytic::{AnalyticField, Generator, GENERATORS};

use crate::boxcount::fmt_f64;
use crate::error::{Error, Result};

/// Point values of `v`, `pi`, `grad v` (`grad_v[i][j] = d v_i / d x_j`) and `grad pi`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub v: [f64; 3],
    pub p: f64,
    pub grad_v: [[f64; 3]; 3],
    pub grad_p: [f64; 3],
}

impl FieldSample {
    pub fn speed2(&self) -> f64 {
        self.v.iter().map(|c| c * c).sum()
    }

    pub fn grad_v2(&self) -> f64 {
        self.grad_v.iter().flatten().map(|c| c * c).sum()
    }

    pub fn grad_p_norm(&self) -> f64 {
        self.grad_p.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Uniform node lattice; `nx` etc. count nodes, node `i` sits at `x0 + i*dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
    pub t0: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dt: f64,
}

/// Slack, in units of one spacing, when testing whether a point is on the grid.
const GRID_TOL: f64 = 1e-9;

impl GridSpec {
    /// `n` nodes per spatial axis covering `[-1,1]^2 x [0,1]` and `n` time
    /// nodes covering `[-1, 0]`.
    pub fn unit_half_cylinder(n: usize) -> Self {
        let h = 1.0 / (n as f64 - 1.0);
        Self {
            nx: n,
            ny: n,
            nz: n,
            nt: n,
            x0: -1.0,
            y0: -1.0,
            z0: 0.0,
            t0: -1.0,
            dx: 2.0 * h,
            dy: 2.0 * h,
            dz: h,
            dt: h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims.contains(&0) {
            return Err(Error::Format(format!("grid has an empty axis: {dims:?}")));
        }
        let spacing = self.spacing();
        if !spacing.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(Error::Format(format!("grid spacings must be positive, got {spacing:?}")));
        }
        if !self.origin().iter().all(|o| o.is_finite()) {
            return Err(Error::NonfiniteCoordinate);
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::Format("grid is too large".into()))?;
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.nx, self.ny, self.nz, self.nt]
    }

    pub fn origin(&self) -> [f64; 4] {
        [self.x0, self.y0, self.z0, self.t0]
    }

    pub fn spacing(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dz, self.dt]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat C-order index with `x` fastest.
    pub fn index(&self, ix: usize, iy: usize, iz: usize, it: usize) -> usize {
        ((it * self.nz + iz) * self.ny + iy) * self.nx + ix
    }

    pub fn node(&self, ix: usize, iy: usize, iz: usize, it: usize) -> ([f64; 3], f64) {
        (
            [self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy, self.z0 + iz as f64 * self.dz],
            self.t0 + it as f64 * self.dt,
        )
    }

    /// Closed coordinate range `[lo, hi]` of each axis.
    pub fn bounds(&self) -> [(f64, f64); 4] {
        let (o, d, n) = (self.origin(), self.spacing(), self.dims());
        std::array::from_fn(|a| (o[a], o[a] + (n[a] - 1) as f64 * d[a]))
    }

    pub fn contains(&self, x: [f64; 3], t: f64) -> bool {
        let c = [x[0], x[1], x[2], t];
        let (b, d) = (self.bounds(), self.spacing());
        (0..4).all(|a| c[a] >= b[a].0 - GRID_TOL * d[a] && c[a] <= b[a].1 + GRID_TOL * d[a])
    }

    /// Lower node index and fractional offset per axis, or `None` off-grid.
    fn locate(&self, x: [f64; 3], t: f64) -> Option<[(usize, f64); 4]> {
        let c = [x[0], x[1], x[2], t];
        let (o, d, n) = (self.origin(), self.spacing(), self.dims());
        let mut out = [(0usize, 0.0f64); 4];
        for a in 0..4 {
            let u = (c[a] - o[a]) / d[a];
            let top = (n[a] - 1) as f64;
            if !(u >= -GRID_TOL && u <= top + GRID_TOL) {
                return None;
            }
            if n[a] == 1 {
                continue;
            }
            let i = (u.floor().max(0.0) as usize).min(n[a] - 2);
            out[a] = (i, (u - i as f64).clamp(0.0, 1.0));
        }
        Some(out)
    }
}

/// Samples on a [`GridSpec`]; arrays are C-ordered `(t, z, y, x)` with
/// components interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    grid: GridSpec,
    velocity: Vec<f64>,
    pressure: Vec<f64>,
    grad_v: Option<Vec<f64>>,
    grad_p: Option<Vec<f64>>,
}

impl GriddedField {
    pub fn new(
        grid: GridSpec,
        velocity: Vec<f64>,
        pressure: Vec<f64>,
        grad_v: Option<Vec<f64>>,
        grad_p: Option<Vec<f64>>,
    ) -> Result<Self> {
        grid.validate()?;
        let n = grid.len();
        let check = |name: &str, len: usize, comps: usize| {
            if len == n * comps {
                Ok(())
            } else {
                Err(Error::Format(format!("{name} has {len} entries, grid needs {}", n * comps)))
            }
        };
        check("velocity", velocity.len(), 3)?;
        check("pressure", pressure.len(), 1)?;
        if let Some(g) = &grad_v {
            check("grad_v", g.len(), 9)?;
        }
        if let Some(g) = &grad_p {
            check("grad_p", g.len(), 3)?;
        }
        Ok(Self { grid, velocity, pressure, grad_v, grad_p })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn pressure(&self) -> &[f64] {
        &self.pressure
    }

    pub fn grad_v(&self) -> Option<&[f64]> {
        self.grad_v.as_deref()
    }

    pub fn grad_p(&self) -> Option<&[f64]> {
        self.grad_p.as_deref()
    }

    pub fn has_gradients(&self) -> bool {
        self.grad_v.is_some() && self.grad_p.is_some()
    }

    /// 4-linear interpolation. Gradient entries are left zero for arrays the
    /// field does not carry.
    pub fn interpolate(&self, x: [f64; 3], t: f64) -> Result<FieldSample> {
        let loc = self
            .grid
            .locate(x, t)
            .ok_or_else(|| Error::OutOfDomain(format!("x = {x:?}, t = {t} is off the grid")))?;
        let dims = self.grid.dims();
        let mut out = FieldSample::default();
        for corner in 0..16usize {
            let mut w = 1.0;
            let mut idx = [0usize; 4];
            for a in 0..4 {
                let (i, f) = loc[a];
                let hi = (corner >> a) & 1 == 1;
                if dims[a] == 1 {
                    if hi {
                        w = 0.0;
                    }
                    idx[a] = 0;
                } else {
                    idx[a] = i + hi as usize;
                    w *= if hi { f } else { 1.0 - f };
                }
            }
            if w == 0.0 {
                continue;
            }
            let k = self.grid.index(idx[0], idx[1], idx[2], idx[3]);
            for c in 0..3 {
                out.v[c] += w * self.velocity[3 * k + c];
            }
            out.p += w * self.pressure[k];
            if let Some(g) = &self.grad_v {
                for c in 0..9 {
                    out.grad_v[c / 3][c % 3] += w * g[9 * k + c];
                }
            }
            if let Some(g) = &self.grad_p {
                for c in 0..3 {
                    out.grad_p[c] += w * g[3 * k + c];
                }
            }
        }
        Ok(out)
    }

    /// Writes one time level as CSV `x,y,z,t,v1,v2,v3,p`.
    pub fn write_slice_csv<W: Write>(&self, it: usize, mut w: W) -> Result<()> {
        let g = &self.grid;
        if it >= g.nt {
            return Err(Error::OutOfDomain(format!("time index {it} exceeds nt = {}", g.nt)));
        }
        writeln!(w, "x,y,z,t,v1,v2,v3,p")?;
        for iz in 0..g.nz {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let (x, t) = g.node(ix, iy, iz, it);
                    let k = g.index(ix, iy, iz, it);
                    let row = [x[0], x[1], x[2], t, self.velocity[3 * k], self.velocity[3 * k + 1], self.velocity[3 * k + 2], self.pressure[k]];
                    let cells: Vec<String> = row.iter().map(|&c| fmt_f64(c)).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
        }
        Ok(())
    }
}

/// Spatial derivative of component `c` (of `comps`) along axis `a` at node `k`:
/// central in the interior, one-sided at faces.
fn axis_derivative(data: &[f64], grid: &GridSpec, comps: usize, c: usize, a: usize, idx: [usize; 4]) -> f64 {
    let n = grid.dims()[a];
    let d = grid.spacing()[a];
    let at = |i: usize| {
        let mut j = idx;
        j[a] = i;
        data[comps * grid.index(j[0], j[1], j[2], j[3]) + c]
    };
    let i = idx[a];
    if i == 0 {
        (at(1) - at(0)) / d
    } else if i == n - 1 {
        (at(n - 1) - at(n - 2)) / d
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * d)
    }
}

/// Fills both gradient arrays from velocity and pressure, replacing any present.
pub fn finite_difference_gradients(field: &GriddedField) -> Result<GriddedField> {
    let g = field.grid;
    for (axis, &nodes) in g.dims()[..3].iter().enumerate() {
        if nodes < 3 {
            return Err(Error::GridTooCoarse { axis, nodes });
        }
    }
    let n = g.len();
    let mut grad_v = vec![0.0; 9 * n];
    let mut grad_p = vec![0.0; 3 * n];
    for it in 0..g.nt {
        for iz in 0..g.nz {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let idx = [ix, iy, iz, it];
                    let k = g.index(ix, iy, iz, it);
                    for a in 0..3 {
                        for c in 0..3 {
                            grad_v[9 * k + 3 * c + a] = axis_derivative(&field.velocity, &g, 3, c, a, idx);
                        }
                        grad_p[3 * k + a] = axis_derivative(&field.pressure, &g, 1, 0, a, idx);
                    }
                }
            }
        }
    }
    GriddedField::new(g, field.velocity.clone(), field.pressure.clone(), Some(grad_v), Some(grad_p))
}

/// Evaluates a generator and its analytic gradients at every node.
pub fn sample_analytic(field: &AnalyticField, grid: &GridSpec) -> Result<GriddedField> {
    grid.validate()?;
    let n = grid.len();
    let mut velocity = Vec::with_capacity(3 * n);
    let mut pressure = Vec::with_capacity(n);
    let mut grad_v = Vec::with_capacity(9 * n);
    let mut grad_p = Vec::with_capacity(3 * n);
    for it in 0..grid.nt {
        for iz in 0..grid.nz {
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let (x, t) = grid.node(ix, iy, iz, it);
                    let s = field.sample(x, t)?;
                    velocity.extend(s.v);
                    pressure.push(s.p);
                    grad_v.extend(s.grad_v.iter().flatten());
                    grad_p.extend(s.grad_p);
                }
            }
        }
    }
    GriddedField::new(*grid, velocity, pressure, Some(grad_v), Some(grad_p))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Gridded(GriddedField),
    Analytic(AnalyticField),
}

/// Immutable, cheaply cloneable field handle. `scale` is the cumulative
/// rescaling factor `lambda`; evaluation at `(y, s)` reads the underlying
/// field at `(lambda y, lambda^2 s)`.
#[derive(Debug, Clone)]
pub struct FieldSource {
    kind: Arc<FieldKind>,
    scale: f64,
}

impl FieldSource {
    pub fn analytic(field: AnalyticField) -> Self {
        Self { kind: Arc::new(FieldKind::Analytic(field)), scale: 1.0 }
    }

    /// Missing gradient arrays are derived by finite differences.
    pub fn gridded(field: GriddedField) -> Result<Self> {
        let field = if field.has_gradients() { field } else { finite_difference_gradients(&field)? };
        Ok(Self { kind: Arc::new(FieldKind::Gridded(field)), scale: 1.0 })
    }

    /// Registry lookup, e.g. `generator("bump", &[])`.
    pub fn generator(name: &str, params: &[(String, f64)]) -> Result<Self> {
        Ok(Self::analytic(AnalyticField::from_registry(name, params)?))
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample(&self, x: [f64; 3], t: f64) -> Result<FieldSample> {
        let l = self.scale;
        let (y, s) = if l == 1.0 { (x, t) } else { (x.map(|c| l * c), l * l * t) };
        let raw = match &*self.kind {
            FieldKind::Analytic(f) => f.sample(y, s)?,
            FieldKind::Gridded(g) => g.interpolate(y, s)?,
        };
        if l == 1.0 {
            return Ok(raw);
        }
        let (l2, l3) = (l * l, l * l * l);
        Ok(FieldSample {
            v: raw.v.map(|c| l * c),
            p: l2 * raw.p,
            grad_v: raw.grad_v.map(|row| row.map(|c| l2 * c)),
            grad_p: raw.grad_p.map(|c| l3 * c),
        })
    }

    /// Checks that the box around `B+(x, r) x [t_lo, t_hi]` lies in the domain.
    pub fn check_region(&self, x: [f64; 3], r: f64, t_lo: f64, t_hi: f64) -> Result<()> {
        let FieldKind::Gridded(g) = &*self.kind else {
            return Ok(());
        };
        let l = self.scale;
        let lo = [x[0] - r, x[1] - r, x[2]].map(|c| l * c);
        let hi = [x[0] + r, x[1] + r, x[2] + r].map(|c| l * c);
        let (s_lo, s_hi) = (l * l * t_lo, l * l * t_hi);
        if g.grid.contains(lo, s_lo) && g.grid.contains(hi, s_hi) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!(
                "B+({x:?}, {r}) x [{t_lo}, {t_hi}] exceeds the grid {:?}",
                g.grid.bounds()
            )))
        }
    }

    /// Short description for config echoes.
    pub fn describe(&self) -> String {
        let base = match &*self.kind {
            FieldKind::Analytic(f) => {
                let params: Vec<String> = f.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("gen:{}[{}]", f.name(), params.join(","))
            }
            FieldKind::Gridded(g) => {
                let [nx, ny, nz, nt] = g.grid.dims();
                format!("grid:{nx}x{ny}x{nz}x{nt}")
            }
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{base}@lambda={}", self.scale)
        }
    }
}

/// `v_l(y,s) = l v(l y, l^2 s)`, `pi_l = l^2 pi(l y, l^2 s)`; composes multiplicatively.
pub fn ns_rescale(field: &FieldSource, lambda: f64) -> Result<FieldSource> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonpositiveLambda(lambda));
    }
    Ok(FieldSource { kind: Arc::clone(&field.kind), scale: field.scale * lambda })
}
