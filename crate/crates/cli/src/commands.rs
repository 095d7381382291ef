//! Command dispatch: each command returns a results payload and its verdicts.

use std::sync::Arc;

use chaining_core::apps::cone::{min_conic_singular_value, ConeSpec, ConicEstimate, ConicMethod, EXACT_ORACLE_CAP};
use chaining_core::apps::jl::{demo_points, isotropy_audit, jl_project_and_audit, JlExperiment};
use chaining_core::apps::recovery::{recover_bpdn, recovery_error_audit, BpdnResult, RecoveryInstance};
use chaining_core::apps::small_ball::{index_gamma, minsingle_lower_bound, small_ball_lower_bound};
use chaining_core::functionals::{
    dudley_bound, estimate_gamma, finite_cardinality_bound, ChainingContext, EstimateMode, Exactness, FunctionalKind,
    EXACT_GAMMA_CAP,
};
use chaining_core::linalg::{from_rows, norm1};
use chaining_core::metric::{diameter, FiniteMetricSpace};
use chaining_core::orlicz::ConditionCertificate;
use chaining_core::rng::{derive_seed, stream_rng, streams};
use chaining_core::scheme::{
    build_partition_scheme, generate_separated_families, growth_condition_audit, ExactGammaFunctional, GrowthParams,
};
use chaining_core::sim::{
    audit_moment_bound, audit_tail_bound, canonical_gaussian_family, chaos_bound_audit, coordinate_tau, decoupling_audit,
    matrix_family, ProcessModel, TailConstants,
};
use chaining_core::subgaussian::{
    default_lambda_grid, increment_tail_audit, max_resolvable_u, tau_phi_estimate, ProcessDriver,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandName, GammaMode, PointSource, RunConfig, TailTarget};
use crate::error::{CliError, CliResult};
use crate::input::{load_inputs, InputKind, Loaded};
use crate::report::{ReportEnvelope, Verdict};

struct Outcome {
    results: Value,
    primary: Option<&'static str>,
    verdicts: Vec<Verdict>,
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))
}

/// Validates the configuration, runs the command and wraps the result.
pub fn run_command(config: &RunConfig) -> CliResult<ReportEnvelope> {
    config.validate()?;
    let command = config.command()?;
    let out = match command {
        CommandName::Orlicz => orlicz(config)?,
        CommandName::Bounds => bounds(config)?,
        CommandName::Scheme => scheme(config)?,
        CommandName::AuditMoment => audit_moment(config)?,
        CommandName::AuditTail => audit_tail(config)?,
        CommandName::Chaos => chaos(config)?,
        CommandName::Jl => jl(config)?,
        CommandName::Recover => recover(config)?,
        CommandName::SmallBall => small_ball(config)?,
    };
    Ok(ReportEnvelope::new(config.clone(), command, out.results, out.primary, out.verdicts))
}

fn load_space(config: &RunConfig) -> CliResult<Option<FiniteMetricSpace>> {
    let loaded = match (&config.points, &config.distances) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either points or distances, not both".into())),
        (Some(p), None) => load_inputs(p, InputKind::Points)?,
        (None, Some(d)) => load_inputs(d, InputKind::Distances)?,
        (None, None) => return Ok(None),
    };
    match loaded {
        Loaded::Space(s) => Ok(Some(s)),
        _ => unreachable!("space loaders return spaces"),
    }
}

fn load_models(config: &RunConfig) -> CliResult<Vec<ProcessModel>> {
    match &config.models {
        Some(path) => match load_inputs(path, InputKind::Models)? {
            Loaded::Models(m) => Ok(m),
            _ => unreachable!("model loader returns models"),
        },
        None => Ok(canonical_gaussian_family(config.family.count, config.family.max_index, config.family.dim, config.seed)?),
    }
}

fn orlicz(config: &RunConfig) -> CliResult<Outcome> {
    let phi = config.phi.build()?;
    let conj = phi.conjugate()?;
    let s = &config.orlicz;
    let step = s.x_max / (s.grid_points - 1) as f64;
    let xs: Vec<f64> = (0..s.grid_points).map(|k| k as f64 * step).collect();
    let table: Vec<Value> = xs
        .iter()
        .map(|&x| json!({"x": x, "phi": phi.eval(x), "conjugate": conj.eval(x)}))
        .collect();
    let mut young = f64::INFINITY;
    for &x in &xs {
        for &y in &xs {
            young = young.min(phi.eval(x) + conj.eval(y) - x * y);
        }
    }
    let invariants = phi.audit_invariants();
    let cert = ConditionCertificate::audit(&phi, &s.delta2_b);
    let results = json!({
        "function": to_value(phi.kind())?,
        "conjugate": to_value(conj.kind())?,
        "table": table,
        "young_min_slack": young,
        "conditions": to_value(&cert)?,
    });
    let verdicts = vec![
        match invariants {
            Ok(()) => Verdict::new("n_function_invariants", true),
            Err(e) => Verdict::with_detail("n_function_invariants", false, e.to_string()),
        },
        Verdict::with_detail("young_inequality", young >= -1e-10, format!("min slack {young:e}")),
    ];
    Ok(Outcome { results, primary: Some("table"), verdicts })
}

fn gamma_mode(mode: GammaMode, n: usize) -> EstimateMode {
    match mode {
        GammaMode::Exact => EstimateMode::Exact,
        GammaMode::Heuristic => EstimateMode::Heuristic,
        GammaMode::Auto if n <= EXACT_GAMMA_CAP => EstimateMode::Exact,
        GammaMode::Auto => EstimateMode::Heuristic,
    }
}

fn bounds(config: &RunConfig) -> CliResult<Outcome> {
    let space = load_space(config)?.expect("validated");
    let phi = config.phi.build()?;
    let ctx = ChainingContext::new(&phi)?;
    let mode = gamma_mode(config.bounds.mode, space.n_points());
    let gamma = estimate_gamma(&space, &ctx, config.p, FunctionalKind::Gamma, mode)?;
    let tilde = estimate_gamma(&space, &ctx, config.p, FunctionalKind::GammaTilde, mode)?;
    let dudley = dudley_bound(&space, &ctx, config.p);
    let finite = finite_cardinality_bound(&space, &ctx)?;
    let exact = gamma.exactness == Exactness::ExactOracle && tilde.exactness == Exactness::ExactOracle;
    let mut verdicts = Vec::new();
    if exact {
        verdicts.push(Verdict::new("gamma_tilde_le_gamma", tilde.value <= gamma.value + 1e-9));
    }
    let dudley_value = match &dudley {
        Ok(d) => {
            if exact {
                verdicts.push(Verdict::with_detail(
                    "dudley_domination",
                    tilde.value <= d.value + 1e-9,
                    format!("γ̃ = {}, Dudley = {}", tilde.value, d.value),
                ));
            }
            to_value(d)?
        }
        Err(e) => json!({"unavailable": e.to_string()}),
    };
    let results = json!({
        "n_points": space.n_points(),
        "diameter": diameter(&space, None)?,
        "gamma": {"value": gamma.value, "exactness": to_value(&gamma.exactness)?},
        "gamma_tilde": {"value": tilde.value, "exactness": to_value(&tilde.exactness)?},
        "dudley": dudley_value,
        "finite_cardinality": finite,
        "p": config.p,
    });
    Ok(Outcome { results, primary: None, verdicts })
}

fn scheme(config: &RunConfig) -> CliResult<Outcome> {
    let phi = config.phi.build()?;
    let ctx = Arc::new(ChainingContext::new(&phi)?);
    let params = GrowthParams::new(config.scheme.r, config.scheme.c_star, config.p)?;
    let mut results = serde_json::Map::new();
    let mut verdicts = Vec::new();
    if let Some(space) = load_space(config)? {
        let space = Arc::new(space);
        let f = ExactGammaFunctional::new(space.clone(), ctx.clone(), config.p, FunctionalKind::GammaTilde)?;
        let res = build_partition_scheme(&space, &f, &params, &ctx)?;
        let valid = res.partitions.validate(space.n_points());
        let levels: Vec<Value> = res
            .partitions
            .levels
            .iter()
            .zip(&res.tags)
            .enumerate()
            .map(|(n, (cells, tags))| Ok(json!({"level": n, "cells": to_value(cells)?, "tags": to_value(tags)?})))
            .collect::<CliResult<_>>()?;
        results.insert("levels".into(), Value::Array(levels));
        for (k, v) in [
            ("value", res.value),
            ("f_total", res.f_total),
            ("diameter", res.diameter),
            ("ratio", res.ratio),
        ] {
            results.insert(k.into(), json!(v));
        }
        results.insert("j0".into(), json!(res.j0));
        results.insert("steps_checked".into(), json!(res.steps_checked));
        results.insert("failed_checks".into(), json!(res.failed_checks));
        verdicts.push(match valid {
            Ok(()) => Verdict::new("admissible_partitions", true),
            Err(e) => Verdict::with_detail("admissible_partitions", false, e.to_string()),
        });
        verdicts.push(Verdict::with_detail(
            "cell_tags_verified",
            res.failed_checks == 0,
            format!("{} of {} steps failed", res.failed_checks, res.steps_checked),
        ));
    }
    if config.scheme.families > 0 {
        let fams = generate_separated_families(&params, config.scheme.families, config.scheme.max_points, derive_seed(config.seed, 1))?;
        let mut rows = Vec::new();
        let mut violations = 0;
        for (k, (space, fam)) in fams.into_iter().enumerate() {
            let space = Arc::new(space);
            let f = ExactGammaFunctional::new(space.clone(), ctx.clone(), config.p, FunctionalKind::GammaTilde)?;
            let rep = growth_condition_audit(&space, &f, &params, &ctx, std::slice::from_ref(&fam))?;
            violations += rep.violations + rep.rejected.len();
            for r in &rep.evaluated {
                rows.push(json!({"family": k, "level": fam.n, "a": fam.a, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin, "passed": r.passed}));
            }
            for (_, why) in &rep.rejected {
                rows.push(json!({"family": k, "level": fam.n, "a": fam.a, "rejected": why, "passed": false}));
            }
        }
        results.insert("growth".into(), Value::Array(rows));
        verdicts.push(Verdict::with_detail("growth_condition", violations == 0, format!("{violations} violations")));
    }
    let primary = if results.contains_key("levels") { "levels" } else { "growth" };
    Ok(Outcome { results: Value::Object(results), primary: Some(primary), verdicts })
}

fn audit_moment(config: &RunConfig) -> CliResult<Outcome> {
    let models = load_models(config)?;
    let phi = config.phi.build()?;
    let rep = audit_moment_bound(&models, &phi, &config.p_grid, config.trials_or(100_000), config.seed)?;
    let verdicts = vec![Verdict::with_detail("moment_bound", rep.passed, format!("fitted constant {}", rep.fitted_constant))];
    Ok(Outcome { results: to_value(&rep)?, primary: Some("cells"), verdicts })
}

fn audit_tail(config: &RunConfig) -> CliResult<Outcome> {
    let phi = config.phi.build()?;
    match config.tail.target {
        TailTarget::Increment => {
            let n = config.trials_or(1_000_000);
            let driver = ProcessDriver::new(config.tail.driver.clone())?;
            let grid = default_lambda_grid();
            let tau = tau_phi_estimate(&driver, &phi, &grid, n, derive_seed(config.seed, 1))?;
            let u_grid = match &config.tail.u_grid {
                Some(g) => g.clone(),
                None => {
                    let top = max_resolvable_u(&phi, n, 50.0)?;
                    (0..=8).map(|k| top * k as f64 / 8.0).collect()
                }
            };
            let rep = increment_tail_audit(&driver, tau.tau, &phi, &u_grid, n, derive_seed(config.seed, 2))?;
            let verdicts = vec![Verdict::with_detail("increment_tail", rep.passed, format!("τ = {}", tau.tau))];
            let results = json!({"tau": to_value(&tau)?, "points": to_value(&rep.points)?, "n_samples": rep.n_samples});
            Ok(Outcome { results, primary: Some("points"), verdicts })
        }
        TailTarget::Sup => {
            let n = config.trials_or(100_000);
            let models = load_models(config)?;
            let model = models
                .get(config.tail.model_index)
                .ok_or_else(|| CliError::Config(format!("tail.model_index {} out of range", config.tail.model_index)))?;
            let constants = match config.tail.constants {
                Some(c) => c,
                None => {
                    let fit = audit_moment_bound(std::slice::from_ref(model), &phi, &[config.p], n, derive_seed(config.seed, 1))?;
                    TailConstants::from_moment_fit(fit.fitted_constant)
                }
            };
            let u_grid = config.tail.u_grid.clone().unwrap_or_else(|| vec![std::f64::consts::SQRT_2, 2.0, 2.5, 3.0]);
            let rep = audit_tail_bound(model, &phi, config.p, &u_grid, constants, n, derive_seed(config.seed, 2))?;
            let verdicts = vec![Verdict::new("sup_tail", rep.passed)];
            Ok(Outcome { results: to_value(&rep)?, primary: Some("points"), verdicts })
        }
    }
}

fn chaos(config: &RunConfig) -> CliResult<Outcome> {
    let n = config.trials_or(100_000);
    let collections: Vec<Vec<DMatrix<f64>>> = match &config.matrices {
        Some(path) => match load_inputs(path, InputKind::Matrices)? {
            Loaded::Matrices(m) => vec![m],
            _ => unreachable!("matrix loader returns matrices"),
        },
        None => {
            let c = &config.chaos;
            matrix_family(c.count, c.max_dim, c.min_size, c.max_size, config.seed)
        }
    };
    let mut rows = Vec::new();
    let mut decoupling_ok = true;
    let mut fitted: f64 = 0.0;
    let mut finite = true;
    for (k, coll) in collections.iter().enumerate() {
        let seed = derive_seed(config.seed, k as u64 + 1);
        let dec = decoupling_audit(coll, config.p, n, seed)?;
        let cb = chaos_bound_audit(coll, config.p, n, seed)?;
        decoupling_ok &= dec.passed;
        match cb.ratio {
            Some(r) if r.is_finite() => fitted = fitted.max(r),
            Some(_) => finite = false,
            None => {}
        }
        rows.push(json!({
            "collection": k,
            "size": coll.len(),
            "decoupling_lhs": dec.lhs,
            "decoupling_rhs": dec.rhs,
            "decoupling_passed": dec.passed,
            "gamma": cb.gamma,
            "v": cb.v,
            "ratio": cb.ratio,
            "u_ratio": cb.u_ratio,
            "degenerate": cb.degenerate,
            "skipped": cb.skipped,
        }));
    }
    let results = json!({"collections": rows, "fitted_l": fitted, "p": config.p, "n_trials": n});
    let verdicts = vec![
        Verdict::new("decoupling", decoupling_ok),
        Verdict::with_detail("chaos_constant_finite", finite && fitted > 0.0, format!("L = {fitted}")),
    ];
    Ok(Outcome { results, primary: Some("collections"), verdicts })
}

fn jl(config: &RunConfig) -> CliResult<Outcome> {
    let s = &config.jl;
    let points = match &config.points {
        Some(p) => crate::input::read_csv_rows(p)?,
        None => match s.source {
            PointSource::Demo => demo_points(),
            PointSource::Gaussian => (0..s.n_points as u64)
                .map(|i| {
                    let mut rng = stream_rng(config.seed, streams::INSTANCE, i);
                    (0..s.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                })
                .collect(),
        },
    };
    let driver = ProcessDriver::new(s.driver.clone())?;
    let exp = JlExperiment { points, m: s.m, driver: driver.clone(), eps: s.eps, trials: config.trials_or(20), seed: config.seed };
    let rep = jl_project_and_audit(&exp)?;
    let iso = isotropy_audit(&driver, rep.dim, s.isotropy_draws, 20, derive_seed(config.seed, 1))?;
    let results = json!({
        "n_points": rep.n_points,
        "dim": rep.dim,
        "m": rep.m,
        "eps": rep.eps,
        "n_pairs": rep.n_pairs,
        "max_deviation": rep.max_deviation,
        "mean_pass_fraction": rep.mean_pass_fraction,
        "all_pairs_pass_rate": rep.all_pairs_pass_rate,
        "histogram": to_value(&rep.histogram)?,
        "trials": to_value(&rep.trials)?,
        "isotropy": to_value(&iso)?,
    });
    let verdicts = vec![
        Verdict::with_detail(
            "all_pairs_pass_rate",
            rep.all_pairs_pass_rate >= s.min_all_pairs_rate,
            format!("{} (target {})", rep.all_pairs_pass_rate, s.min_all_pairs_rate),
        ),
        Verdict::new("row_isotropy", iso.passed),
    ];
    Ok(Outcome { results, primary: Some("histogram"), verdicts })
}

fn conic_estimate(inst: &RecoveryInstance, method: Option<ConicMethod>, budget: usize, seed: u64) -> CliResult<ConicEstimate> {
    let phi = inst.matrix();
    let (m, n) = (inst.m(), inst.n());
    let exact_ok = m >= n && m <= EXACT_ORACLE_CAP && n <= EXACT_ORACLE_CAP;
    let descent = ConeSpec::L1Descent { x_star: inst.x_star.clone() };
    let est = match method {
        None if exact_ok => min_conic_singular_value(&phi, &ConeSpec::FullSpace { dim: n }, ConicMethod::Exact, 0, seed)?,
        None => min_conic_singular_value(&phi, &descent, ConicMethod::ProjectedDescent, budget, seed)?,
        Some(ConicMethod::Exact) => min_conic_singular_value(&phi, &ConeSpec::FullSpace { dim: n }, ConicMethod::Exact, 0, seed)?,
        Some(method) => min_conic_singular_value(&phi, &descent, method, budget, seed)?,
    };
    Ok(est)
}

fn recover(config: &RunConfig) -> CliResult<Outcome> {
    let r = &config.recover;
    let inst = match &config.instance {
        Some(path) => match load_inputs(path, InputKind::Instance)? {
            Loaded::Instance(i) => i,
            _ => unreachable!("instance loader returns an instance"),
        },
        None => RecoveryInstance::generate(r.n, r.m, r.sparsity, r.eta, config.seed)?,
    };
    let (solution, converged): (BpdnResult, bool) = match recover_bpdn(&inst, r.tol, r.max_iters) {
        Ok(s) => (s, true),
        Err(chaining_core::Error::NotConverged { iterations, gap, iterate }) => {
            let phi = inst.matrix();
            let fit = &phi * nalgebra::DVector::from_column_slice(&iterate) - nalgebra::DVector::from_column_slice(&inst.y);
            let residual = fit.norm();
            let l1 = norm1(&iterate);
            let partial = BpdnResult {
                l1,
                residual,
                feasible: residual <= inst.eta * (1.0 + 1e-6) + 1e-9,
                dual: Vec::new(),
                dual_value: l1 - gap,
                gap,
                iterations,
                polished: false,
                x: iterate,
            };
            (partial, false)
        }
        Err(e) => return Err(e.into()),
    };
    let mut verdicts = vec![
        Verdict::new("converged", converged),
        Verdict::with_detail("feasible", solution.feasible, format!("‖Φx − y‖ = {}", solution.residual)),
        Verdict::new("l1_not_above_truth", solution.l1 <= norm1(&inst.x_star) + r.tol * norm1(&inst.x_star).max(1.0)),
    ];
    let (estimate_value, audit_value) = match conic_estimate(&inst, r.cone_method, r.budget, derive_seed(config.seed, 1)) {
        Ok(est) => {
            let audit_value = match recovery_error_audit(&inst, &solution.x, &est) {
                Ok(a) => {
                    if a.certified {
                        verdicts.push(Verdict::with_detail("error_bound", a.holds, format!("{} ≤ {}", a.error, a.bound)));
                    }
                    to_value(&a)?
                }
                Err(e) => json!({"unavailable": e.to_string()}),
            };
            (to_value(&est)?, audit_value)
        }
        Err(e) => (json!({"unavailable": e.to_string()}), Value::Null),
    };
    let rows: Vec<Value> = (0..inst.n()).map(|i| json!({"i": i, "x_eta": solution.x[i], "x_star": inst.x_star[i]})).collect();
    let results = json!({
        "instance": to_value(&inst)?,
        "solution": rows,
        "l1": solution.l1,
        "residual": solution.residual,
        "gap": solution.gap,
        "iterations": solution.iterations,
        "polished": solution.polished,
        "cone_estimate": estimate_value,
        "audit": audit_value,
    });
    Ok(Outcome { results, primary: Some("solution"), verdicts })
}

fn small_ball(config: &RunConfig) -> CliResult<Outcome> {
    let s = &config.small_ball;
    let driver = ProcessDriver::new(s.driver.clone())?;
    let n_mc = config.trials_or(10_000);
    let rep = small_ball_lower_bound(&driver, &s.cone, s.m, s.xi, s.t, n_mc, s.n_dirs, config.seed)?;
    let dim = s.cone.dim();
    let rows: Vec<Vec<f64>> = (0..s.m as u64)
        .map(|i| driver.sample_vector(&mut stream_rng(derive_seed(config.seed, 1), streams::INSTANCE, i), dim))
        .collect();
    let realised = min_conic_singular_value(&from_rows(&rows), &s.cone, ConicMethod::ProjectedDescent, 16, derive_seed(config.seed, 2))?;
    let mut results = json!({"small_ball": to_value(&rep)?, "realised_estimate": realised.value});
    if let Some(k) = &s.minsingle {
        let phi = config.phi.build()?;
        let ctx = ChainingContext::new(&phi)?;
        let delta = std::f64::consts::SQRT_2 * coordinate_tau(&driver, &phi, config.seed)?;
        let gamma = index_gamma(s.m, delta, &ctx, config.p)?;
        let value = minsingle_lower_bound(k, s.m, rep.alpha, gamma, delta, s.t)?;
        results["minsingle"] = json!({"constants": to_value(k)?, "gamma": gamma, "delta": delta, "mu": delta / rep.alpha, "value": value});
    }
    let verdicts = vec![Verdict::with_detail(
        "bound_below_realised",
        rep.bound <= realised.value,
        format!("bound {} vs realised upper estimate {}", rep.bound, realised.value),
    )];
    Ok(Outcome { results, primary: None, verdicts })
}
