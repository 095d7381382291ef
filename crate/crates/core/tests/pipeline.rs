use std::sync::Arc;

use chaining_core::apps::cone::{min_conic_singular_value, ConeSpec, ConicMethod};
use chaining_core::apps::recovery::{recover_bpdn, recovery_error_audit, RecoveryInstance};
use chaining_core::functionals::{estimate_gamma, ChainingContext, EstimateMode, FunctionalKind};
use chaining_core::metric::FiniteMetricSpace;
use chaining_core::orlicz::{half_square, make_orlicz, CatalogKind};
use chaining_core::scheme::{build_partition_scheme, ExactGammaFunctional, GrowthParams};
use chaining_core::sim::{audit_moment_bound, canonical_gaussian_family, ModelSpec, ProcessModel};
use chaining_core::subgaussian::ProcessDriver;

#[test]
fn induced_metric_feeds_the_partition_scheme() {
    let models = canonical_gaussian_family(3, 7, 3, 11).unwrap();
    let ctx = Arc::new(ChainingContext::new(&half_square()).unwrap());
    for model in &models {
        let space = Arc::new(model.induced_metric(1.0).unwrap());
        let f = ExactGammaFunctional::new(space.clone(), ctx.clone(), 1.0, FunctionalKind::GammaTilde).unwrap();
        let params = GrowthParams::standard(1.0).unwrap();
        let res = build_partition_scheme(&space, &f, &params, &ctx).unwrap();
        res.partitions.validate(space.n_points()).unwrap();
        assert_eq!(res.failed_checks, 0);
        let exact = estimate_gamma(&space, &ctx, 1.0, FunctionalKind::Gamma, EstimateMode::Exact).unwrap();
        // the scheme's value is a chaining value of admissible partitions, so never below the optimum
        assert!(res.value >= exact.value - 1e-9, "{} < {}", res.value, exact.value);
    }
}

#[test]
fn moment_audit_runs_on_generated_models() {
    let models = canonical_gaussian_family(2, 6, 2, 5).unwrap();
    let rep = audit_moment_bound(&models, &half_square(), &[1.0, 2.0], 4000, 9).unwrap();
    assert_eq!(rep.cells.len(), 4);
    assert!(rep.fitted_constant.is_finite() && rep.fitted_constant > 0.0);
}

#[test]
fn specs_round_trip_through_json() {
    let model = ProcessModel::canonical(vec![vec![0.0, 0.0], vec![1.0, 2.0]], ProcessDriver::rademacher()).unwrap();
    let spec = model.to_spec().unwrap();
    let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    let cone = ConeSpec::L1Descent { x_star: vec![1.0, 0.0] };
    let back: ConeSpec = serde_json::from_str(&serde_json::to_string(&cone).unwrap()).unwrap();
    assert_eq!(back, cone);
}

#[test]
fn tall_gaussian_recovery_is_certified() {
    for seed in 0..3 {
        let inst = RecoveryInstance::generate(12, 30, 2, 0.05, seed).unwrap();
        let x = recover_bpdn(&inst, 1e-9, 50_000).unwrap();
        let est = min_conic_singular_value(&inst.matrix(), &ConeSpec::FullSpace { dim: 12 }, ConicMethod::Exact, 0, 0).unwrap();
        let audit = recovery_error_audit(&inst, &x.x, &est).unwrap();
        assert!(audit.certified && audit.holds, "{audit:?}");
    }
}

#[test]
fn gamma_grows_with_lighter_orlicz_tails() {
    // φ = |x|^3 has a smaller conjugate than x²/2 at large arguments, so its weights grow faster
    let space = FiniteMetricSpace::from_vectors((0..8).map(|i| vec![i as f64]).collect()).unwrap();
    let half = ChainingContext::new(&half_square()).unwrap();
    let cubic = ChainingContext::new(&make_orlicz(CatalogKind::Power, &[1.0, 3.0]).unwrap()).unwrap();
    assert!(cubic.weight(6) / cubic.weight(1) > half.weight(6) / half.weight(1));
    for ctx in [&half, &cubic] {
        let g = estimate_gamma(&space, ctx, 1.0, FunctionalKind::Gamma, EstimateMode::Exact).unwrap();
        let h = estimate_gamma(&space, ctx, 1.0, FunctionalKind::Gamma, EstimateMode::Heuristic).unwrap();
        assert!(h.value >= g.value - 1e-9);
    }
}
