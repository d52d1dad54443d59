use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use parafractal::boxcount::{cover_curve, fit_dimension, fmt_f64, geometric_deltas, CoverCurve, CoverSample};
use parafractal::criteria::{energy_residual as residual, screen as run_screen, screen_rescaled, Cutoff};
use parafractal::fields::io::{load_field, store_field};
use parafractal::fields::{sample_analytic, AnalyticField};
use parafractal::fractal_sets::{
    cantor_cover_count, cantor_endpoints, cantor_intervals, harmonic_cover_count, level_for_delta, product_cover_count,
    product_points,
};
use parafractal::functionals::{functional_y, write_functionals_csv};
use parafractal::{
    BoundaryGrid, CantorSpec, ConstantsConfig, FieldSource, GridSpec, HarmonicTailSpec, MeanMode, Metric, PointCloud,
    ProductSetSpec, QuadratureConfig, SpaceTimePoint,
};
use serde_json::json;

use crate::output::{loglog_svg, OutDir, RunConfig};
use crate::{
    ConstArgs, EnergyResidualArgs, EstimateDimArgs, EvalArgs, GenCantorArgs, GenFieldArgs, GenProductArgs,
    GeneratorSet, MetricArg, QuadArgs, ScreenArgs,
};

pub enum Outcome {
    Ok,
    /// Some margin came out negative.
    Violation,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s)?;
    match v[..] {
        [a, b] => Ok((a.min(b), a.max(b))),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

pub fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v = parse_floats(s)?;
    v.try_into().map_err(|_| format!("expected X1,X2,T, got `{s}`"))
}

pub fn parse_grid(s: &str) -> Result<BoundaryGrid, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected HALF_WIDTH,SPACE_POINTS,TIME_POINTS,T_MIN, got `{s}`");
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok(BoundaryGrid {
        half_width: parts[0].parse().map_err(|_| bad())?,
        space_points: parts[1].parse().map_err(|_| bad())?,
        time_points: parts[2].parse().map_err(|_| bad())?,
        t_min: parts[3].parse().map_err(|_| bad())?,
    })
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn quad(q: &QuadArgs) -> Result<QuadratureConfig> {
    let cfg = QuadratureConfig { cells_per_radius: q.cells, time_slices: q.time_slices };
    cfg.validate()?;
    Ok(cfg)
}

fn constants(c: &ConstArgs) -> Result<ConstantsConfig> {
    let consts = ConstantsConfig {
        epsilon: c.epsilon,
        script_e: c.script_e,
        k1: c.k1,
        k2: c.k2,
        k3: c.k3,
        c: c.c,
        mean_mode: if c.spacetime_mean { MeanMode::SpaceTime } else { MeanMode::SliceWise },
        ..ConstantsConfig::default()
    };
    consts.validate()?;
    Ok(consts)
}

/// `gen:NAME[:KEY=VALUE,...]`, or a path to a field file.
pub fn load_source(spec: &str) -> Result<FieldSource> {
    match spec.strip_prefix("gen:") {
        Some(rest) => {
            let (name, params) = parse_generator(rest)?;
            Ok(FieldSource::generator(&name, &params)?)
        }
        None => {
            let grid = load_field(spec).with_context(|| format!("reading field file {spec}"))?;
            Ok(FieldSource::gridded(grid)?)
        }
    }
}

fn parse_generator(s: &str) -> Result<(String, Vec<(String, f64)>)> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = Vec::new();
    for kv in rest.split(',').filter(|p| !p.is_empty()) {
        let Some((k, v)) = kv.split_once('=') else { bail!("generator parameter `{kv}` is not KEY=VALUE") };
        let v: f64 = v.trim().parse().with_context(|| format!("generator parameter `{kv}`"))?;
        params.push((k.trim().to_string(), v));
    }
    Ok((name.to_string(), params))
}

pub fn gen_cantor(a: GenCantorArgs) -> Result<Outcome> {
    let spec = CantorSpec::new(a.alpha, a.level)?;
    let intervals = cantor_intervals(&spec)?;
    let config = RunConfig { command: "gen-cantor", params: json!({ "alpha": a.alpha, "level": a.level }) };
    let mut out = OutDir::create(&a.out.out, config)?;

    let mut body = String::from("lo,hi\n");
    for i in &intervals {
        body.push_str(&format!("{},{}\n", fmt_f64(i.lo), fmt_f64(i.hi)));
    }
    out.text("cantor_intervals.csv", &body)?;

    let mut body = String::from("x\n");
    for x in cantor_endpoints(&spec)? {
        body.push_str(&format!("{}\n", fmt_f64(x)));
    }
    out.text("cantor_points.csv", &body)?;
    Ok(Outcome::Ok)
}

pub fn gen_product(a: GenProductArgs) -> Result<Outcome> {
    let spec = ProductSetSpec { cantor: CantorSpec::new(a.alpha, a.level)?, tail: HarmonicTailSpec { cutoff: a.cutoff } };
    let points = product_points(&spec)?;
    let config =
        RunConfig { command: "gen-product", params: json!({ "alpha": a.alpha, "level": a.level, "cutoff": a.cutoff }) };
    let mut out = OutDir::create(&a.out.out, config)?;
    let mut body = String::from("x,y\n");
    for [x, y] in points {
        body.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(y)));
    }
    out.text("product_points.csv", &body)?;
    Ok(Outcome::Ok)
}

/// `delta_k = 2^(-k/alpha)` inside `[delta_min, delta_max]`, largest first.
fn cantor_scales(alpha: f64, delta_min: f64, delta_max: f64) -> Vec<f64> {
    let tol = 1e-12;
    (0..)
        .map(|k: u32| (-(k as f64) / alpha).exp2())
        .take_while(|&d| d >= delta_min * (1.0 - tol))
        .filter(|&d| d <= delta_max * (1.0 + tol))
        .collect()
}

fn exact_curve(deltas: &[f64], count: impl Fn(f64) -> parafractal::Result<u64>) -> Result<CoverCurve> {
    let samples = deltas
        .iter()
        .map(|&delta| Ok(CoverSample { delta, count: count(delta)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverCurve::new(samples)?)
}

pub fn estimate_dim(a: EstimateDimArgs) -> Result<Outcome> {
    let metric = match a.metric {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Parabolic => Metric::Parabolic,
    };
    if !(a.delta_min > 0.0 && a.delta_min <= a.delta_max) {
        bail!("need 0 < delta-min <= delta-max, got {} and {}", a.delta_min, a.delta_max);
    }
    let (source, curve) = match (a.generator, &a.input) {
        (Some(GeneratorSet::Cantor), _) => {
            let spec = CantorSpec::new(a.alpha, level_for_delta(a.alpha, a.delta_min))?;
            let deltas = cantor_scales(a.alpha, a.delta_min, a.delta_max);
            (json!("cantor"), exact_curve(&deltas, |d| cantor_cover_count(&spec, d))?)
        }
        (Some(GeneratorSet::Harmonic), _) => {
            let spec = HarmonicTailSpec::default();
            let deltas = geometric_deltas(a.delta_max, a.delta_min)?;
            (json!("harmonic"), exact_curve(&deltas, |d| harmonic_cover_count(&spec, d))?)
        }
        (Some(GeneratorSet::Product), _) => {
            let spec = ProductSetSpec {
                cantor: CantorSpec::new(a.alpha, level_for_delta(a.alpha, a.delta_min))?,
                tail: HarmonicTailSpec::default(),
            };
            let deltas = geometric_deltas(a.delta_max, a.delta_min)?;
            (json!("product"), exact_curve(&deltas, |d| product_cover_count(&spec, d))?)
        }
        (None, Some(path)) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let cloud = PointCloud::from_csv(BufReader::new(file))?;
            let deltas = geometric_deltas(a.delta_max, a.delta_min)?;
            (json!(path.display().to_string()), cover_curve(&cloud, &deltas, metric)?)
        }
        (None, None) => bail!("one of --input or --generator is required"),
    };
    let full = || {
        let s = curve.samples();
        (s.last().map_or(a.delta_min, |x| x.delta), s.first().map_or(a.delta_max, |x| x.delta))
    };
    // exact counts carry no lattice artifacts to trim, so generators fit the whole range
    let window = match (a.window, a.generator) {
        (Some(w), _) => w,
        (None, Some(_)) => full(),
        (None, None) => curve.default_window().unwrap_or_else(full),
    };
    let estimate = fit_dimension(&curve, window)?;

    let config = RunConfig {
        command: "estimate-dim",
        params: json!({
            "source": source,
            "alpha": a.alpha,
            "metric": metric.to_string(),
            "delta_min": a.delta_min,
            "delta_max": a.delta_max,
            "window": [window.0, window.1],
            "plot": a.plot,
        }),
    };
    let mut out = OutDir::create(&a.out.out, config)?;
    out.text("cover_curve.csv", &curve.to_csv())?;
    out.text("dimension.csv", &estimate.to_csv())?;
    if a.plot {
        let pts: Vec<(f64, f64)> = curve.samples().iter().map(|s| (-s.delta.ln(), (s.count as f64).ln())).collect();
        let svg = loglog_svg(&pts, Some((estimate.slope, estimate.intercept)), "-log delta", "log N");
        out.svg("dimension.svg", &svg)?;
    }
    println!("slope {}", fmt_f64(estimate.slope));
    Ok(Outcome::Ok)
}

pub fn eval(a: EvalArgs) -> Result<Outcome> {
    let field = load_source(&a.field.field)?;
    let cfg = quad(&a.quad)?;
    let mut rows = Vec::with_capacity(a.points.len() * a.radii.len());
    for &[x1, x2, t] in &a.points {
        let z = SpaceTimePoint::boundary(x1, x2, t);
        for &r in &a.radii {
            rows.push(functional_y(&field, &z, r, &cfg)?);
        }
    }
    let config = RunConfig {
        command: "eval",
        params: json!({
            "field": field.describe(),
            "points": a.points,
            "radii": a.radii,
            "quadrature": cfg,
        }),
    };
    let mut out = OutDir::create(&a.out.out, config)?;
    let mut body = Vec::new();
    write_functionals_csv(&rows, &mut body)?;
    out.text("functionals.csv", &String::from_utf8(body)?)?;
    Ok(Outcome::Ok)
}

pub fn screen(a: ScreenArgs) -> Result<Outcome> {
    let field = load_source(&a.field.field)?;
    let cfg = quad(&a.quad)?;
    let consts = constants(&a.consts)?;
    let report = if a.rescale {
        screen_rescaled(&field, &a.grid, &a.radii, &consts, &cfg)?
    } else {
        run_screen(&field, &a.grid, &a.radii, &consts, &cfg)?
    };
    let config = RunConfig {
        command: "screen",
        params: json!({
            "field": field.describe(),
            "grid": a.grid,
            "radii": a.radii,
            "rescale": a.rescale,
            "constants": consts,
            "quadrature": cfg,
        }),
    };
    let mut out = OutDir::create(&a.out.out, config)?;
    out.text("cover.csv", &report.cover_csv())?;
    out.text("flagged.csv", &report.flagged_csv())?;
    out.text("summary.txt", &report.summary())?;
    if a.plot {
        let pts: Vec<(f64, f64)> =
            report.rows.iter().filter(|r| r.m > 0).map(|r| (-r.r.ln(), (r.m as f64).ln())).collect();
        let fit = report.slope.map(|(s, _)| {
            let n = pts.len() as f64;
            let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
            (s, my - s * mx)
        });
        out.svg("cover.svg", &loglog_svg(&pts, fit, "-log r", "log M"))?;
    }
    print!("{}", report.summary());
    Ok(if report.all_margins_nonnegative() { Outcome::Ok } else { Outcome::Violation })
}

pub fn energy_residual(a: EnergyResidualArgs) -> Result<Outcome> {
    let field = load_source(&a.field.field)?;
    let cfg = quad(&a.quad)?;
    let [x1, x2, t0] = a.center;
    let cutoff = Cutoff { center: [x1, x2, 0.0], t0, radius: a.radius, ..Cutoff::default() };
    let res = residual(&field, &cutoff, a.t, &cfg)?;
    let config = RunConfig {
        command: "energy-residual",
        params: json!({ "field": field.describe(), "cutoff": cutoff, "t": a.t, "quadrature": cfg }),
    };
    let mut out = OutDir::create(&a.out.out, config)?;
    let body = format!("lhs,rhs,residual\n{},{},{}\n", fmt_f64(res.lhs), fmt_f64(res.rhs), fmt_f64(res.residual));
    out.text("energy_residual.csv", &body)?;
    Ok(Outcome::Ok)
}

pub fn gen_field(a: GenFieldArgs) -> Result<Outcome> {
    let spec = a.field.strip_prefix("gen:").unwrap_or(&a.field);
    let (name, params) = parse_generator(spec)?;
    let analytic = AnalyticField::from_registry(&name, &params)?;
    let grid = GridSpec::unit_half_cylinder(a.resolution);
    grid.validate()?;
    let field = sample_analytic(&analytic, &grid)?;
    let config = RunConfig {
        command: "gen-field",
        params: json!({ "field": FieldSource::analytic(analytic).describe(), "resolution": a.resolution, "grid": grid }),
    };
    let mut out = OutDir::create(&a.out.out, config)?;
    store_field(&field, out.path("field.pfld"))?;
    if let Some(it) = a.slice {
        if it >= grid.nt {
            bail!("slice index {it} is past the last time node {}", grid.nt - 1);
        }
        let mut body = Vec::new();
        field.write_slice_csv(it, &mut body)?;
        out.text("slice.csv", &String::from_utf8(body)?)?;
    }
    println!("{}", out.path("field.pfld").display());
    Ok(Outcome::Ok)
}
