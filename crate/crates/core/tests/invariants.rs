use proptest::prelude::*;

use vrlab::evolution::{translate_distance, Interpolation, Sampler};
use vrlab::fields::{circulation, class_of, same_class, steiner_symmetrize, AxisymGrid, FieldKind, ScalarField};
use vrlab::green::{bound_check, g1, GreenConfig, HalfPlanePoint};
use vrlab::io::{decode_field, encode_field};
use vrlab::operator::{apply_l, FarField, LSolver};
use vrlab::variational::{bathtub_fill, energy_with, isotonic_fit, linear_value, DenseGreen};

fn point() -> impl Strategy<Value = HalfPlanePoint> {
    (0.05f64..5.0, -3.0f64..3.0).prop_map(|(a, b)| HalfPlanePoint::new(a, b).unwrap())
}

fn field(nr: usize, nz: usize, density: f64) -> impl Strategy<Value = ScalarField> {
    let g = AxisymGrid::new(0.5, 1.5, -0.5, 0.5, nr, nz).unwrap();
    prop::collection::vec((0.0f64..1.0, 0.0f64..5.0), g.len()).prop_map(move |cells| {
        let values = cells.into_iter().map(|(u, v)| if u < density { v } else { 0.0 }).collect();
        ScalarField::from_values(g, FieldKind::Vorticity, values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_symmetric_positive_and_homogeneous(x in point(), y in point(), lam in 0.2f64..5.0, dz in -2.0f64..2.0) {
        prop_assume!((x.x1 - y.x1).hypot(x.x2 - y.x2) > 1e-3);
        let cfg = GreenConfig::default();
        let g = g1(x, y, &cfg).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!((g1(y, x, &cfg).unwrap() - g).abs() <= 1e-13 * g);
        let s = |p: HalfPlanePoint| HalfPlanePoint::new(lam * p.x1, lam * p.x2 + dz).unwrap();
        // scaling multiplies G1 by λ; axial translation leaves it unchanged
        let scaled = g1(s(x), s(y), &cfg).unwrap();
        let shifted = g1(HalfPlanePoint::new(x.x1, x.x2 + dz).unwrap(), HalfPlanePoint::new(y.x1, y.x2 + dz).unwrap(), &cfg).unwrap();
        prop_assert!((scaled - lam * g).abs() <= 1e-11 * lam * g);
        prop_assert!((shifted - g).abs() <= 1e-11 * g);
    }

    #[test]
    fn power_law_bound_holds(x in point(), y in point(), k in 0usize..3) {
        prop_assume!((x.x1 - y.x1).hypot(x.x2 - y.x2) > 1e-6);
        prop_assert!(bound_check(x, y, [0.5, 1.0, 1.4][k], &GreenConfig::default()).unwrap());
    }

    #[test]
    fn bathtub_fill_stays_in_class_and_beats_the_input(z in field(6, 5, 0.4), seed in any::<u64>()) {
        prop_assume!(circulation(&z) > 0.0);
        let g = z.grid;
        let phi = ScalarField::from_fn(g, FieldKind::Stream, |r, x| ((seed % 97) as f64 * r + 3.1 * x).sin() - r * r);
        let class = class_of(&z);
        let out = bathtub_fill(&class, &phi).unwrap();
        prop_assert!(out.values.iter().all(|v| *v >= 0.0));
        prop_assert!((circulation(&out) - circulation(&z)).abs() <= 1e-12 * circulation(&z));
        prop_assert!(out.sup_norm() <= z.sup_norm() * (1.0 + 1e-12));
        prop_assert!(linear_value(&out, &phi) >= linear_value(&z, &phi) - 1e-12 * linear_value(&z, &phi).abs().max(1.0));
    }

    #[test]
    fn steiner_symmetrisation_keeps_class_and_raises_energy(z in field(6, 6, 0.5)) {
        prop_assume!(circulation(&z) > 0.0);
        let s = steiner_symmetrize(&z);
        prop_assert!(same_class(&class_of(&s), &class_of(&z), 1e-12));
        prop_assert_eq!(steiner_symmetrize(&s), s.clone());
        let (e0, _) = energy_with(&DenseGreen, &z, 0.0).unwrap();
        let (e1, _) = energy_with(&DenseGreen, &s, 0.0).unwrap();
        prop_assert!(e1 >= e0 * (1.0 - 1e-12));
    }

    #[test]
    fn field_dump_round_trips(z in field(7, 3, 0.7)) {
        let back = decode_field(&encode_field(&z), FieldKind::Vorticity).unwrap();
        prop_assert_eq!(back, z);
    }

    #[test]
    fn isotonic_fit_is_monotone_and_mass_preserving(pts in prop::collection::vec((-5.0f64..5.0, 0.1f64..2.0), 1..40)) {
        let (y, w): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = isotonic_fit(&y, &w);
        prop_assert!(fit.windows(2).all(|p| p[0] <= p[1] + 1e-12));
        let m = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((m(&fit) - m(&y)).abs() <= 1e-10 * m(&y).abs().max(1.0));
    }

    #[test]
    fn spline_sampler_interpolates_cell_values(z in field(8, 8, 0.6), i in 0usize..8, j in 0usize..8) {
        let g = z.grid;
        let s = Sampler::new(&z, Interpolation::BSpline);
        prop_assert!((s.sample(g.r(i), g.z(j)) - z.at(i, j)).abs() <= 1e-10 * z.sup_norm().max(1.0));
        let k = Sampler::new(&z, Interpolation::Keys);
        prop_assert!((k.sample(g.r(i), g.z(j)) - z.at(i, j)).abs() <= 1e-12 * z.sup_norm().max(1.0));
    }

    #[test]
    fn poisson_solve_inverts_the_operator(z in field(12, 10, 0.5)) {
        let psi = LSolver::new(z.grid).solve(&z, FarField::Zero).unwrap();
        let back = apply_l(&psi);
        prop_assert!(back.difference(&z).sup_norm() <= 1e-9 * z.sup_norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn translate_distance_recovers_whole_cell_shifts(k in -6isize..=6) {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.0, 48, 48).unwrap();
        let blob = ScalarField::from_fn(g, FieldKind::Vorticity, |r, x| (0.09 - (r - 1.0).powi(2) - x * x).max(0.0));
        let (d, c) = translate_distance(&blob.shifted_z(k), &blob);
        prop_assert!(d <= 1e-9, "distance {}", d);
        prop_assert!((c.abs() - k.unsigned_abs() as f64 * g.hz()).abs() <= 1e-6, "shift {} for {} cells", c, k);
    }
}
