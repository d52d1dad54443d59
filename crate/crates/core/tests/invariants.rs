use parafractal::boxcount::grid_box_count;
use parafractal::criteria::{prop1_check, RHO_MAX};
use parafractal::fields::io::{read_field, write_field};
use parafractal::fields::ns_rescale;
use parafractal::fractal_sets::{cantor_cover_count, harmonic_cover_count, hausdorff_sum};
use parafractal::geometry::{dilate, disjoint, parabolic_distance, vitali_disjoint_subfamily};
use parafractal::{
    CantorSpec, ConstantsConfig, FieldSource, GridSpec, GriddedField, HarmonicTailSpec, Metric, ParabolicCylinder,
    PointCloud, QuadratureConfig, SpaceTimePoint,
};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = SpaceTimePoint> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64, -1.0..0.0f64).prop_map(|(a, b, c, t)| SpaceTimePoint { x: [a, b, c], t })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parabolic_distance_is_a_metric(a in point(), b in point(), c in point()) {
        let (ab, ba) = (parabolic_distance(&a, &b), parabolic_distance(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert!(parabolic_distance(&a, &c) <= ab + parabolic_distance(&b, &c) + 1e-12);
    }

    #[test]
    fn vitali_selection_is_disjoint_and_covers(
        centers in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..0.0f64), 1..40),
        r in 0.01..0.5f64,
    ) {
        let cyls: Vec<ParabolicCylinder> = centers
            .iter()
            .map(|&(a, b, t)| ParabolicCylinder::new(SpaceTimePoint::boundary(a, b, t), r).unwrap())
            .collect();
        let sel = vitali_disjoint_subfamily(&cyls).unwrap();
        for (k, &i) in sel.iter().enumerate() {
            for &j in &sel[k + 1..] {
                prop_assert!(disjoint(&cyls[i], &cyls[j]));
            }
        }
        for c in &cyls {
            prop_assert!(sel.iter().any(|&i| dilate(&cyls[i], 5.0).unwrap().contains(&c.center)));
        }
    }

    #[test]
    fn cantor_counts_are_monotone(alpha in 0.2..0.9f64, a in 1e-5..1.0f64, b in 1e-5..1.0f64) {
        let spec = CantorSpec::new(alpha, 60).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(cantor_cover_count(&spec, lo).unwrap() >= cantor_cover_count(&spec, hi).unwrap());
    }

    #[test]
    fn hausdorff_sum_is_one(alpha in 0.05..0.95f64, level in 0u32..20) {
        let s = hausdorff_sum(&CantorSpec::new(alpha, level).unwrap()).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_counts_are_monotone(a in 1e-6..1.0f64, b in 1e-6..1.0f64) {
        let spec = HarmonicTailSpec::default();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(harmonic_cover_count(&spec, lo).unwrap() >= harmonic_cover_count(&spec, hi).unwrap());
    }

    #[test]
    fn grid_counts_scale_with_the_cloud(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..200),
        delta in 0.01..0.5f64,
    ) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let cloud = PointCloud::plane(&pts).unwrap();
        let n = grid_box_count(&cloud, delta, Metric::Euclidean).unwrap();
        prop_assert_eq!(n, grid_box_count(&cloud.scaled(2.0), 2.0 * delta, Metric::Euclidean).unwrap());
        prop_assert!(n as usize <= pts.len());
    }

    #[test]
    fn rescaling_composes(a in 0.25..4.0f64, b in 0.25..4.0f64, p in point()) {
        let f = FieldSource::generator("bump", &[]).unwrap();
        let two = ns_rescale(&ns_rescale(&f, a).unwrap(), b).unwrap();
        let one = ns_rescale(&f, a * b).unwrap();
        let (s2, s1) = (two.sample(p.x, p.t).unwrap(), one.sample(p.x, p.t).unwrap());
        for i in 0..3 {
            prop_assert!((s2.v[i] - s1.v[i]).abs() <= 1e-12 * (1.0 + s1.v[i].abs()));
        }
        prop_assert!((s2.p - s1.p).abs() <= 1e-12 * (1.0 + s1.p.abs()));
    }

    #[test]
    fn field_files_round_trip(values in prop::collection::vec(-1e6..1e6f64, 4 * 81)) {
        let grid = GridSpec { nx: 3, ny: 3, nz: 3, nt: 3, ..GridSpec::unit_half_cylinder(3) };
        let (v, p) = values.split_at(3 * 81);
        let field = GriddedField::new(grid, v.to_vec(), p.to_vec(), None, None).unwrap();
        let mut buf = Vec::new();
        write_field(&field, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(back, field);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // enlarging the threshold never turns a regular verdict into an undecided one
    #[test]
    fn regular_verdicts_grow_with_the_threshold(
        x1 in -0.01..0.01f64,
        x2 in -0.01..0.01f64,
        t in -1e-4..0.0f64,
        e1 in 1e-4..0.99f64,
        e2 in 1e-4..0.99f64,
    ) {
        let f = FieldSource::generator("planted-singular", &[]).unwrap();
        let cfg = QuadratureConfig { cells_per_radius: 6, time_slices: 6 };
        let z = SpaceTimePoint::boundary(x1, x2, t);
        let rho = RHO_MAX / 2.0;
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let small = prop1_check(&f, &z, rho, &ConstantsConfig { script_e: lo, ..Default::default() }, &cfg).unwrap();
        let large = prop1_check(&f, &z, rho, &ConstantsConfig { script_e: hi, ..Default::default() }, &cfg).unwrap();
        prop_assert!(!small.is_regular() || large.is_regular());
        prop_assert_eq!(small.witness.value, large.witness.value);
    }
}
