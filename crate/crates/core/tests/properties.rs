use std::sync::Arc;

use proptest::prelude::*;

use szdet::config::parse_config;
use szdet::gronwall::TimeSeries;
use szdet::mesh::build_box_mesh;
use szdet::spectral::{seeded_band_limited, trilinear_b, SpectralField, SpectralGrid};
use szdet::szinterp::ScottZhangOperator;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_fields_are_reproduced(
        n in 1usize..5,
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        c in -5.0f64..5.0,
        lx in 0.5f64..3.0,
    ) {
        let mesh = Arc::new(build_box_mesh(2, &[lx, 1.0], n).unwrap());
        let op = ScottZhangOperator::new(mesh.clone()).unwrap();
        let g = move |x: &[f64]| a + b * x[0] + c * x[1];
        let coef = op.interpolate(&g);
        for (v, cv) in coef.iter().enumerate() {
            prop_assert!((cv - g(mesh.vertex(v))).abs() < 1e-11);
        }
    }

    #[test]
    fn leray_projection_is_idempotent(seed in 0u64..1000, kmax in 2.0f64..8.0) {
        let grid = SpectralGrid::torus(2, 24).unwrap();
        let mut raw = SpectralField::from_fn(&grid, |x| vec![(x[0] + 2.0 * x[1]).sin(), (3.0 * x[0]).cos() * x[1].sin()]);
        raw.axpy(1.0, &seeded_band_limited(&grid, kmax, 1.0, seed)).unwrap();
        let mut p = raw.clone();
        p.project();
        prop_assert!(p.max_divergence() < 1e-10);
        let mut pp = p.clone();
        pp.project();
        prop_assert!(pp.sub(&p).unwrap().l2_sq().sqrt() < 1e-12 * p.l2_sq().sqrt().max(1.0));
    }

    #[test]
    fn trilinear_form_is_antisymmetric(seed in 0u64..1000) {
        let grid = SpectralGrid::torus(2, 24).unwrap();
        let u = seeded_band_limited(&grid, 6.0, 1.0, seed);
        let v = seeded_band_limited(&grid, 6.0, 2.0, seed + 1);
        let w = seeded_band_limited(&grid, 6.0, 0.5, seed + 2);
        let s = trilinear_b(&u, &v, &w).unwrap() + trilinear_b(&u, &w, &v).unwrap();
        prop_assert!(s.abs() < 1e-10);
        prop_assert!(trilinear_b(&u, &u, &u).unwrap().abs() < 1e-10);
    }

    #[test]
    fn window_integrals_are_additive(a in 0.0f64..20.0, l1 in 0.0f64..10.0, l2 in 0.0f64..10.0) {
        let s = TimeSeries::from_fn(0.0, 0.05, 801, |t| (0.3 * t).sin() + 0.1 * t).unwrap();
        let b = a + l1;
        let c = b + l2;
        let whole = s.integral(a, c);
        let parts = s.integral(a, b) + s.integral(b, c);
        prop_assert!((whole - parts).abs() < 1e-10 * (1.0 + whole.abs()));
    }

    #[test]
    fn canonical_config_reparses_to_same_hash(nu in 0.01f64..10.0, m in 8usize..128, stride in 1usize..50) {
        let text = format!("# run\nnu = {nu}\nM = {m}\n\nrecord_stride = {stride}\n");
        let cfg = parse_config("simulate", &text).unwrap();
        let body: String = cfg.canonical().lines().skip(1).map(|l| format!("{l}\n")).collect();
        let again = parse_config("simulate", &body).unwrap();
        prop_assert_eq!(cfg.hash(), again.hash());
        prop_assert_eq!(cfg.f64("nu").unwrap(), nu);
    }
}
