use std::sync::OnceLock;

use finsler::catalog::{self, CatalogEntry};
use finsler::distance::GridMetric;
use finsler::dual::DualNorm;
use finsler::grid::{GridDomain, StencilSpec};
use finsler::harness::{
    check_ratio_delta_over_dc, default_radii, draw_samples, f_of_du, lip_constant_at, probe_points, SampleSpec,
    TestFunction,
};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

const RES: usize = 81;

fn entries() -> &'static Vec<(CatalogEntry, DualNorm)> {
    static E: OnceLock<Vec<(CatalogEntry, DualNorm)>> = OnceLock::new();
    E.get_or_init(|| {
        catalog::all()
            .into_iter()
            .map(|e| {
                let f = DualNorm::new(e.structure.clone());
                (e, f)
            })
            .collect()
    })
}

fn grid() -> &'static GridDomain {
    static G: OnceLock<GridDomain> = OnceLock::new();
    G.get_or_init(|| GridDomain::unit_square(RES, StencilSpec::Scaled).unwrap())
}

fn interior() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.25..=0.75f64, 2)
}

fn covector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2).prop_filter("nonzero", |c| c[0].hypot(c[1]) > 1e-3)
}

/// Fixed seed so every run checks the same cases.
fn seeded(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5EED), failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(seeded(24))]

    #[test]
    fn scaling_u_scales_both_sides_exactly(k in 0..7usize, x in interior(), c in covector(), s in 0.01..100.0f64) {
        let (e, f) = &entries()[k];
        let m = GridMetric::new(f, grid()).unwrap();
        let u = TestFunction::linear(c);
        let su = u.scaled(s).unwrap();
        let radii = default_radii(grid());
        prop_assert_eq!(lip_constant_at(&m, &su, &x, &radii).unwrap().value, s * lip_constant_at(&m, &u, &x, &radii).unwrap().value);
        prop_assert_eq!(f_of_du(&e.structure, &su, &x).unwrap(), s * f_of_du(&e.structure, &u, &x).unwrap());
    }

    #[test]
    fn delta_never_exceeds_the_induced_distance(k in 0..7usize, x in interior(), angle in 0.0..std::f64::consts::TAU) {
        let (_, f) = &entries()[k];
        let m = GridMetric::new(f, grid()).unwrap();
        let h = grid().h();
        let probes = probe_points(&x, &[angle.cos(), angle.sin()], &[16.0 * h, 8.0 * h, 4.0 * h]);
        let tol = m.tolerance_budget(0xB0D6E7).total;
        let report = check_ratio_delta_over_dc(&m, &x, &probes, 128, tol).unwrap();
        prop_assert!(report.bound_holds, "{:?}", report.records);
    }
}

/// For smooth `u` the ratio matches the one of the linearisation at `x`.
#[test]
fn linear_reduction_consistency() {
    let g = GridDomain::unit_square(201, StencilSpec::Scaled).unwrap();
    let mut failures = Vec::new();
    for (e, f) in entries().iter().filter(|(e, _)| e.expected_coincidence) {
        let m = GridMetric::new(f, &g).unwrap();
        let tol = m.tolerance_budget(0xB0D6E7).total;
        let xs = draw_samples(e, &SampleSpec::uniform(30, 77), 16.0 * g.h(), g.h()).unwrap();
        let smooth = TestFunction::sin(0);
        for x in &xs {
            let lin = TestFunction::linear(smooth.gradient(x));
            let radii = default_radii(&g);
            let r_s = lip_constant_at(&m, &smooth, x, &radii).unwrap().value / f_of_du(&e.structure, &smooth, x).unwrap();
            let r_l = lip_constant_at(&m, &lin, x, &radii).unwrap().value / f_of_du(&e.structure, &lin, x).unwrap();
            if (r_s - r_l).abs() > 2.0 * tol {
                failures.push(format!("{} at {x:?}: {r_s:.4} vs {r_l:.4} (tol {tol:.4})", e.id));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
