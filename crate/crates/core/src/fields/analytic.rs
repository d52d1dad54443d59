//! Closed-form generators with analytic gradients.
//!
//! Solenoidal no-slip velocities are built as `v = curl(0, psi, 0) =
//! (-d3 psi, 0, d1 psi)` with `psi` carrying an `x3^2` factor, which makes
//! both `v` and `div v` vanish identically where required.

use super::FieldSample;
use crate::error::{Error, Result};

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    v: f64,
    g: [f64; 3],
    h: [[f64; 3]; 3],
}

impl Jet {
    fn coordinate_square(x: [f64; 3], axis: usize) -> Self {
        let mut j = Jet { v: x[axis] * x[axis], g: [0.0; 3], h: [[0.0; 3]; 3] };
        j.g[axis] = 2.0 * x[axis];
        j.h[axis][axis] = 2.0;
        j
    }

    /// `|x|^2 / r^2`
    fn scaled_norm2(x: [f64; 3], r: f64) -> Self {
        let r2 = r * r;
        let mut j = Jet {
            v: (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / r2,
            g: [2.0 * x[0] / r2, 2.0 * x[1] / r2, 2.0 * x[2] / r2],
            h: [[0.0; 3]; 3],
        };
        for i in 0..3 {
            j.h[i][i] = 2.0 / r2;
        }
        j
    }

    /// `f(inner)` given `f`, `f'`, `f''` evaluated at `inner.v`.
    fn compose(inner: &Jet, f: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet { v: f, g: [0.0; 3], h: [[0.0; 3]; 3] };
        for i in 0..3 {
            out.g[i] = f1 * inner.g[i];
            for k in 0..3 {
                out.h[i][k] = f2 * inner.g[i] * inner.g[k] + f1 * inner.h[i][k];
            }
        }
        out
    }

    fn mul(&self, o: &Jet) -> Self {
        let mut out = Jet { v: self.v * o.v, g: [0.0; 3], h: [[0.0; 3]; 3] };
        for i in 0..3 {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for k in 0..3 {
                out.h[i][k] =
                    self.h[i][k] * o.v + self.g[i] * o.g[k] + self.g[k] * o.g[i] + self.v * o.h[i][k];
            }
        }
        out
    }

    fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        for i in 0..3 {
            out.g[i] *= c;
            for k in 0..3 {
                out.h[i][k] *= c;
            }
        }
        out
    }
}

/// Velocity and velocity gradient of `curl(0, psi, 0)`.
fn curl_of_stream(psi: &Jet) -> ([f64; 3], [[f64; 3]; 3]) {
    let v = [-psi.g[2], 0.0, psi.g[0]];
    let gv = [psi.h[2].map(|c| -c), [0.0; 3], psi.h[0]];
    (v, gv)
}

/// `exp(-|y|^2)`
fn gaussian(y: [f64; 3]) -> Jet {
    let s = Jet::scaled_norm2(y, 1.0);
    let e = (-s.v).exp();
    Jet::compose(&s, e, -e, e)
}

/// `exp(1 - 1/(1 - |x|^2/r^2))` inside the ball, zero outside.
fn smooth_bump(x: [f64; 3], r: f64) -> Jet {
    let s = Jet::scaled_norm2(x, r);
    if s.v >= 1.0 {
        return Jet { v: 0.0, g: [0.0; 3], h: [[0.0; 3]; 3] };
    }
    let w = 1.0 / (1.0 - s.v);
    let b = (1.0 - w).exp();
    Jet::compose(&s, b, -b * w * w, b * (w.powi(4) - 2.0 * w.powi(3)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Zero,
    /// `v = u`, `pi = p0 + g . x`
    Constant { u: [f64; 3], p0: f64, g: [f64; 3] },
    /// `v = (rate * x3, 0, 0)`, `pi = 0`
    Shear { rate: f64 },
    /// Compactly supported solenoidal no-slip bump modulated by `1 + t/2`.
    Bump { amplitude: f64, pressure: f64, radius: f64 },
    /// Self-similar profile `v = (-t)^(-1/2) Phi(x / sqrt(-t))`,
    /// `pi = (-t)^(-1) P(x / sqrt(-t))`, blowing up at the origin as `t -> 0-`.
    /// Vanishes for `t >= 0` away from the origin.
    PlantedSingular { amplitude: f64, pressure: f64 },
}

/// Registered generator names.
pub const GENERATORS: &[&str] = &["zero", "constant", "shear", "bump", "planted-singular"];

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    generator: Generator,
}

impl AnalyticField {
    pub fn new(generator: Generator) -> Self {
        Self { generator }
    }

    /// Looks up a registry entry, overriding its default parameters.
    pub fn from_registry(name: &str, params: &[(String, f64)]) -> Result<Self> {
        let mut generator = match name {
            "zero" => Generator::Zero,
            "constant" => Generator::Constant { u: [1.0, 0.0, 0.0], p0: 0.0, g: [0.0; 3] },
            "shear" => Generator::Shear { rate: 1.0 },
            "bump" => Generator::Bump { amplitude: 1.0, pressure: 1.0, radius: 0.8 },
            "planted-singular" => Generator::PlantedSingular { amplitude: 1.0, pressure: 1.0 },
            other => return Err(Error::UnknownGenerator(other.to_string())),
        };
        for (key, value) in params {
            let slot = match (&mut generator, key.as_str()) {
                (Generator::Constant { u, .. }, "u1") => &mut u[0],
                (Generator::Constant { u, .. }, "u2") => &mut u[1],
                (Generator::Constant { u, .. }, "u3") => &mut u[2],
                (Generator::Constant { p0, .. }, "p0") => p0,
                (Generator::Constant { g, .. }, "g1") => &mut g[0],
                (Generator::Constant { g, .. }, "g2") => &mut g[1],
                (Generator::Constant { g, .. }, "g3") => &mut g[2],
                (Generator::Shear { rate }, "rate") => rate,
                (Generator::Bump { amplitude, .. }, "amplitude") => amplitude,
                (Generator::Bump { pressure, .. }, "pressure") => pressure,
                (Generator::Bump { radius, .. }, "radius") => radius,
                (Generator::PlantedSingular { amplitude, .. }, "amplitude") => amplitude,
                (Generator::PlantedSingular { pressure, .. }, "pressure") => pressure,
                _ => return Err(Error::UnknownParameter { generator: name.to_string(), param: key.clone() }),
            };
            *slot = *value;
        }
        if let Generator::Bump { radius, .. } = generator {
            if !(radius > 0.0) {
                return Err(Error::NonpositiveRadius(radius));
            }
        }
        Ok(Self { generator })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn name(&self) -> &'static str {
        match self.generator {
            Generator::Zero => "zero",
            Generator::Constant { .. } => "constant",
            Generator::Shear { .. } => "shear",
            Generator::Bump { .. } => "bump",
            Generator::PlantedSingular { .. } => "planted-singular",
        }
    }

    /// Resolved parameters in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.generator {
            Generator::Zero => vec![],
            Generator::Constant { u, p0, g } => vec![
                ("u1", u[0]),
                ("u2", u[1]),
                ("u3", u[2]),
                ("p0", *p0),
                ("g1", g[0]),
                ("g2", g[1]),
                ("g3", g[2]),
            ],
            Generator::Shear { rate } => vec![("rate", *rate)],
            Generator::Bump { amplitude, pressure, radius } => {
                vec![("amplitude", *amplitude), ("pressure", *pressure), ("radius", *radius)]
            }
            Generator::PlantedSingular { amplitude, pressure } => {
                vec![("amplitude", *amplitude), ("pressure", *pressure)]
            }
        }
    }

    /// Whether `v = 0` on `x3 = 0` holds identically.
    pub fn no_slip(&self) -> bool {
        match &self.generator {
            Generator::Constant { u, .. } => u.iter().all(|&c| c == 0.0),
            _ => true,
        }
    }

    pub fn singular_points(&self) -> Vec<([f64; 3], f64)> {
        match self.generator {
            Generator::PlantedSingular { .. } => vec![([0.0; 3], 0.0)],
            _ => vec![],
        }
    }

    pub fn sample(&self, x: [f64; 3], t: f64) -> Result<FieldSample> {
        let mut out = FieldSample::default();
        match self.generator {
            Generator::Zero => {}
            Generator::Constant { u, p0, g } => {
                out.v = u;
                out.p = p0 + g[0] * x[0] + g[1] * x[1] + g[2] * x[2];
                out.grad_p = g;
            }
            Generator::Shear { rate } => {
                out.v[0] = rate * x[2];
                out.grad_v[0][2] = rate;
            }
            Generator::Bump { amplitude, pressure, radius } => {
                let m = 1.0 + 0.5 * t;
                let b = smooth_bump(x, radius);
                let psi = Jet::coordinate_square(x, 2).mul(&b).scale(amplitude * m);
                (out.v, out.grad_v) = curl_of_stream(&psi);
                out.p = pressure * m * b.v;
                out.grad_p = b.g.map(|c| pressure * m * c);
            }
            Generator::PlantedSingular { amplitude, pressure } => {
                if t >= 0.0 {
                    if x == [0.0; 3] && t == 0.0 {
                        return Err(Error::SingularSample { x, t });
                    }
                    return Ok(out);
                }
                let tau = -t;
                let s = tau.sqrt();
                let y = x.map(|c| c / s);
                let gy = gaussian(y);
                let psi = Jet::coordinate_square(y, 2).mul(&gy).scale(amplitude);
                let (phi, dphi) = curl_of_stream(&psi);
                out.v = phi.map(|c| c / s);
                out.grad_v = dphi.map(|row| row.map(|c| c / tau));
                out.p = pressure * gy.v / tau;
                let k = pressure / (tau * s);
                out.grad_p = gy.g.map(|c| k * c);
            }
        }
        Ok(out)
    }
}
