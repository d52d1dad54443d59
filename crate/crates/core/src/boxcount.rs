//! Occupied-cell box counting under the Euclidean or parabolic metric and
//! log-log slope fitting.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Parabolic,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Parabolic => "parabolic",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "parabolic" => Ok(Metric::Parabolic),
            other => Err(Error::Format(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudKind {
    Line,
    Plane,
    /// `(x1, x2, x3, t)`
    SpaceTime,
}

impl CloudKind {
    pub fn stride(self) -> usize {
        match self {
            CloudKind::Line => 1,
            CloudKind::Plane => 2,
            CloudKind::SpaceTime => 4,
        }
    }
}

/// Finite, nonempty set of points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    kind: CloudKind,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(kind: CloudKind, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !coords.len().is_multiple_of(kind.stride()) {
            return Err(Error::Format(format!(
                "{} coordinates do not form {}-tuples",
                coords.len(),
                kind.stride()
            )));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonfiniteCoordinate);
        }
        Ok(Self { kind, coords })
    }

    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::new(CloudKind::Line, xs.to_vec())
    }

    pub fn plane(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(CloudKind::Plane, points.iter().flatten().copied().collect())
    }

    pub fn space_time(points: &[[f64; 4]]) -> Result<Self> {
        Self::new(CloudKind::SpaceTime, points.iter().flatten().copied().collect())
    }

    pub fn kind(&self) -> CloudKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.kind.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.kind.stride())
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let s = self.kind.stride();
        let coords = self.coords.iter().enumerate().map(|(i, c)| c + shift[i % s]).collect();
        Self { kind: self.kind, coords }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { kind: self.kind, coords: self.coords.iter().map(|c| c * factor).collect() }
    }

    /// Reads `x`, `x,y` or `x1,x2,x3,t` records; `#` lines are comments and a
    /// non-numeric first record is treated as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut width = None;
        let mut coords = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::Format(format!("record {}: {e}", i + 1))),
            };
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Format(format!("record {} has {} fields, expected {w}", i + 1, row.len())))
                }
                _ => {}
            }
            coords.extend(row);
        }
        let kind = match width {
            None => return Err(Error::EmptyCloud),
            Some(1) => CloudKind::Line,
            Some(2) => CloudKind::Plane,
            Some(4) => CloudKind::SpaceTime,
            Some(w) => return Err(Error::Format(format!("unsupported record width {w}"))),
        };
        Self::new(kind, coords)
    }
}

/// Number of occupied half-open lattice cells anchored at the origin.
///
/// Parabolic cells have spatial side `delta` and temporal side `delta^2`.
pub fn grid_box_count(cloud: &PointCloud, delta: f64, metric: Metric) -> Result<u64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonpositiveDelta(delta));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let stride = cloud.kind.stride();
    let mut sides = vec![delta; stride];
    if metric == Metric::Parabolic {
        if cloud.kind != CloudKind::SpaceTime {
            return Err(Error::MetricMismatch { metric: "parabolic", dim: stride });
        }
        sides[3] = delta * delta;
    }
    let mut occupied: HashSet<[i64; 4]> = HashSet::with_capacity(cloud.len());
    for p in cloud.points() {
        let mut key = [0i64; 4];
        for (k, (c, s)) in key.iter_mut().zip(p.iter().zip(&sides)) {
            *k = (c / s).floor() as i64;
        }
        occupied.insert(key);
    }
    Ok(occupied.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverSample {
    pub delta: f64,
    pub count: u64,
}

/// `(delta, N(delta))` samples with strictly decreasing deltas and
/// non-decreasing counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverCurve {
    samples: Vec<CoverSample>,
}

impl CoverCurve {
    pub fn new(samples: Vec<CoverSample>) -> Result<Self> {
        for s in &samples {
            if !(s.delta > 0.0 && s.delta.is_finite()) {
                return Err(Error::NonpositiveDelta(s.delta));
            }
            if s.count == 0 {
                return Err(Error::InvalidCurve("counts must be positive".into()));
            }
        }
        for w in samples.windows(2) {
            if w[1].delta >= w[0].delta {
                return Err(Error::InvalidCurve("deltas must be strictly decreasing".into()));
            }
            if w[1].count < w[0].count {
                return Err(Error::InvalidCurve(format!(
                    "count drops from {} to {} as delta shrinks to {}",
                    w[0].count, w[1].count, w[1].delta
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[CoverSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Window dropping the two largest and two smallest scales.
    pub fn default_window(&self) -> Option<(f64, f64)> {
        let n = self.samples.len();
        (n >= 7).then(|| (self.samples[n - 3].delta, self.samples[2].delta))
    }

    /// CSV body `delta,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,count\n");
        for s in &self.samples {
            out.push_str(&format!("{},{}\n", fmt_f64(s.delta), s.count));
        }
        out
    }
}

/// Geometric scales `delta_max * 2^-j` down to `delta_min`.
pub fn geometric_deltas(delta_max: f64, delta_min: f64) -> Result<Vec<f64>> {
    for d in [delta_max, delta_min] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonpositiveDelta(d));
        }
    }
    let mut out = Vec::new();
    let mut d = delta_max;
    while d >= delta_min * (1.0 - 1e-12) {
        out.push(d);
        d *= 0.5;
    }
    Ok(out)
}

/// Grid counts at each scale; scales are counted in parallel.
pub fn cover_curve(cloud: &PointCloud, deltas: &[f64], metric: Metric) -> Result<CoverCurve> {
    let counts: Result<Vec<u64>> = deltas.par_iter().map(|&d| grid_box_count(cloud, d, metric)).collect();
    let samples = deltas.iter().zip(counts?).map(|(&delta, count)| CoverSample { delta, count }).collect();
    CoverCurve::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl DimensionEstimate {
    /// CSV body `slope,intercept,r2,delta_min,delta_max`.
    pub fn to_csv(&self) -> String {
        format!(
            "slope,intercept,r2,delta_min,delta_max\n{},{},{},{},{}\n",
            fmt_f64(self.slope),
            fmt_f64(self.intercept),
            fmt_f64(self.r_squared),
            fmt_f64(self.window.0),
            fmt_f64(self.window.1)
        )
    }
}

/// Least squares of `log N` against `-log delta` over `delta_min <= delta <= delta_max`.
pub fn fit_dimension(curve: &CoverCurve, window: (f64, f64)) -> Result<DimensionEstimate> {
    let (lo, hi) = window;
    let tol = 1e-12;
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .filter(|s| s.delta >= lo * (1.0 - tol) && s.delta <= hi * (1.0 + tol))
        .map(|s| (-s.delta.ln(), (s.count as f64).ln()))
        .collect();
    let (slope, intercept, r_squared) = least_squares(&pts)?;
    Ok(DimensionEstimate { slope, intercept, r_squared, window, samples: pts.len() })
}

/// Ordinary least squares `y = slope * x + intercept`, returning `r^2` as well.
/// A flat response has `r^2 = 1` by convention.
pub fn least_squares(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pts.len() < 3 {
        return Err(Error::WindowTooSmall { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidCurve("all samples share one scale".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok((slope, intercept, r_squared))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffSumDiagnostic {
    pub alpha: f64,
    pub scale: f64,
    pub sum: f64,
}

/// `sum diam^alpha` over the supplied cover; `scale` is the largest diameter.
pub fn hausdorff_sum_over_cover(diameters: &[f64], alpha: f64) -> Result<HausdorffSumDiagnostic> {
    if !(alpha > 0.0) {
        return Err(Error::NonpositiveAlpha(alpha));
    }
    let mut sum = 0.0;
    let mut scale: f64 = 0.0;
    for &d in diameters {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonpositiveDiameter(d));
        }
        sum += d.powf(alpha);
        scale = scale.max(d);
    }
    Ok(HausdorffSumDiagnostic { alpha, scale, sum })
}

/// Fixed 17-significant-digit formatting used by every CSV export.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
