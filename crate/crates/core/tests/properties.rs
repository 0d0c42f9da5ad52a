use std::sync::Arc;

use covdyn::constitutive::{eval_stress, from_lagrangian, ConstitutiveDensity, IncompatibleSvk, ReferenceMetric};
use covdyn::geometry::{exp_map, jacobi_field, parallel_transport_along_geodesic, GeodesicState, SpaceChart};
use covdyn::grid::BodyGrid;
use covdyn::kinematics::Configuration;
use covdyn::oracle::log_map;
use proptest::prelude::*;

fn curved() -> impl Strategy<Value = (SpaceChart, Vec<f64>)> {
    prop_oneof![
        (0.6..2.5_f64, -3.0..3.0_f64).prop_map(|(a, b)| (SpaceChart::sphere(), vec![a, b])),
        (-2.0..2.0_f64, 0.5..2.0_f64).prop_map(|(a, b)| (SpaceChart::half_plane(), vec![a, b])),
    ]
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.4..0.4_f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_preserves_inner_products((chart, y) in curved(), v in vector(), u in vector(), w in vector()) {
        let start = GeodesicState::new(y.clone(), v);
        let a = parallel_transport_along_geodesic(&chart, &start, &u, 1.0, 64).unwrap();
        let b = parallel_transport_along_geodesic(&chart, &start, &w, 1.0, 64).unwrap();
        let (end, tu) = a.last().unwrap();
        let tw = &b.last().unwrap().1;
        let before = chart.inner(&y, &u, &w);
        let after = chart.inner(&end.position, tu, tw);
        prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn curvature_has_its_symmetries((chart, y) in curved()) {
        let r = chart.curvature(&y).unwrap();
        prop_assert!(r.antisymmetry_defect() < 1e-6);
        prop_assert!(r.bianchi_defect() < 1e-6);
    }

    #[test]
    fn log_inverts_exp((chart, y) in curved(), v in vector()) {
        let q = exp_map(&chart, &GeodesicState::new(y.clone(), v.clone()), 64).unwrap().position;
        let back = log_map(&chart, &y, &q).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn jacobi_field_is_derivative_of_exp((chart, y) in curved(), v in vector(), w in vector()) {
        // J(1) = d/dε exp_y(v + εw) at ε = 0
        let exp = |e: f64| {
            let u: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + e * b).collect();
            exp_map(&chart, &GeodesicState::new(y.clone(), u), 128).unwrap().position
        };
        let h = 1e-4;
        let (p, m) = (exp(h), exp(-h));
        let j = jacobi_field(&chart, &y, &v, &w, 1.0, 128).unwrap();
        for k in 0..2 {
            let fd = (p[k] - m[k]) / (2.0 * h);
            prop_assert!((fd - j.field[k]).abs() < 1e-6, "{fd} vs {}", j.field[k]);
        }
    }

    #[test]
    fn compatible_svk_is_stress_free_at_rigid_motions(angle in -1.0..1.0_f64, shift in -1.0..1.0_f64,
                                                       lambda in 0.0..2.0_f64, mu in 0.1..2.0_f64) {
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(2, 7).unwrap();
        let lag = IncompatibleSvk::new(chart.clone(), ReferenceMetric::euclidean(2)).with_moduli(lambda, mu);
        let cd: Arc<dyn ConstitutiveDensity> = Arc::new(from_lagrangian(Arc::new(lag), &grid));
        let (c, s) = (angle.cos(), angle.sin());
        let phi = Configuration::from_fn(&chart, grid, |x| vec![c * x[0] - s * x[1] + shift, s * x[0] + c * x[1]]).unwrap();
        let stress = eval_stress(cd.as_ref(), &phi.jet()).unwrap();
        for v in stress.psi_values() {
            prop_assert!(v.abs() < 1e-10);
        }
    }
}
