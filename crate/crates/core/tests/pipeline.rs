use parafractal::boxcount::{cover_curve, fit_dimension, geometric_deltas};
use parafractal::criteria::{screen, RHO_MAX};
use parafractal::fields::io::{load_field, store_field};
use parafractal::fields::{sample_analytic, AnalyticField};
use parafractal::fractal_sets::{cantor_endpoints, product_points};
use parafractal::functionals::functional_y;
use parafractal::{
    BoundaryGrid, CantorSpec, ConstantsConfig, FieldSource, GridSpec, HarmonicTailSpec, Metric, PointCloud,
    ProductSetSpec, QuadratureConfig, SpaceTimePoint,
};

#[test]
fn cantor_endpoints_grid_count_near_alpha() {
    let spec = CantorSpec::new(0.5, 14).unwrap();
    let cloud = PointCloud::line(&cantor_endpoints(&spec).unwrap()).unwrap();
    let deltas = geometric_deltas(0.1, 1e-3).unwrap();
    let curve = cover_curve(&cloud, &deltas, Metric::Euclidean).unwrap();
    let est = fit_dimension(&curve, curve.default_window().unwrap()).unwrap();
    assert!((est.slope - 0.5).abs() < 0.05, "{est:?}");
}

#[test]
fn product_cloud_grid_count_near_one() {
    let spec = ProductSetSpec { cantor: CantorSpec::new(0.5, 12).unwrap(), tail: HarmonicTailSpec { cutoff: 2000 } };
    let cloud = PointCloud::plane(&product_points(&spec).unwrap()).unwrap();
    let deltas = geometric_deltas(0.1, 1e-3).unwrap();
    let curve = cover_curve(&cloud, &deltas, Metric::Euclidean).unwrap();
    let est = fit_dimension(&curve, (1e-3, 0.1)).unwrap();
    assert!((est.slope - 1.0).abs() < 0.15, "{est:?}");
}

#[test]
fn stored_field_reproduces_analytic_functionals() {
    let analytic = AnalyticField::from_registry("shear", &[("rate".into(), 2.0)]).unwrap();
    let grid = sample_analytic(&analytic, &GridSpec::unit_half_cylinder(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shear.pfld");
    store_field(&grid, &path).unwrap();
    let loaded = FieldSource::gridded(load_field(&path).unwrap()).unwrap();
    let exact = FieldSource::analytic(analytic);

    let cfg = QuadratureConfig::default();
    let z = SpaceTimePoint::boundary(0.1, -0.2, -0.3);
    let (g, a) = (functional_y(&loaded, &z, 0.4, &cfg).unwrap(), functional_y(&exact, &z, 0.4, &cfg).unwrap());
    // shear is linear in space, so multilinear interpolation is exact
    for (x, y) in [(g.a, a.a), (g.e, a.e), (g.f, a.f)] {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn screening_a_stored_field_matches_the_generator() {
    let analytic = AnalyticField::from_registry("bump", &[]).unwrap();
    let grid = sample_analytic(&analytic, &GridSpec::unit_half_cylinder(9)).unwrap();
    let stored = FieldSource::gridded(grid).unwrap();
    let consts = ConstantsConfig { script_e: 0.5, ..Default::default() };
    let cfg = QuadratureConfig { cells_per_radius: 6, time_slices: 6 };
    let bg = BoundaryGrid { space_points: 3, time_points: 2, ..Default::default() };
    let radii = [RHO_MAX / 2.0, RHO_MAX / 4.0];
    let rep = screen(&stored, &bg, &radii, &consts, &cfg).unwrap();
    assert!(rep.flagged.is_empty());
    assert_eq!(rep.regular, rep.points);
    assert!(rep.all_margins_nonnegative());
    assert!(rep.k5 > 0.0);
}

#[test]
fn screening_counts_obey_the_margin_for_every_generator() {
    let cfg = QuadratureConfig { cells_per_radius: 6, time_slices: 6 };
    let consts = ConstantsConfig::default();
    let bg = BoundaryGrid { space_points: 5, time_points: 3, ..Default::default() };
    let radii: Vec<f64> = (13..=15).map(|j| (-(j as f64)).exp2()).collect();
    for name in parafractal::fields::GENERATORS {
        let rep = screen(&FieldSource::generator(name, &[]).unwrap(), &bg, &radii, &consts, &cfg).unwrap();
        for row in &rep.rows {
            let used = row.m as f64 * consts.script_e * row.r.powf(1.5);
            assert!(used <= rep.k5 + 0.01 * rep.k5.max(1e-300), "{name}: {row:?} K5 {}", rep.k5);
        }
        assert!(rep.flagged.len() + rep.regular == rep.points);
    }
}
