//! Acceptance gate: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use hybridevo::bounds::Bounds;
use hybridevo::config::RunConfig;
use hybridevo::engines::{CmaEngine, Engine, EngineInit, EngineParams, EngineRegistry};
use hybridevo::hybrid::{OptimizationPlan, Runner, StagePlan};
use hybridevo::objectives::fluids::{
    npv, wcf, EconParams, FluidSeries, FluidTotals, FluidVolumes,
};
use hybridevo::objectives::{
    evaluate_checked, Objective, ObjectiveRegistry, ProxyMetric, ProxyObjective,
    RastriginObjective, SphereObjective,
};
use hybridevo::parallel::{FileQueue, FileQueueEvaluator, PoolEvaluator};
use hybridevo::reservoir::{BhpLimits, RealizationParams};
use hybridevo::{ControlVector, RngStream, RunHistory};

fn gate(criterion: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} [{detail}]",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn single_stage(engine: &str, generations: usize, population_size: usize, seed: u64) -> OptimizationPlan {
    OptimizationPlan {
        stages: vec![StagePlan {
            engine: engine.into(),
            generations,
            population_size,
        }],
        seed,
        engine_params: EngineParams::default(),
    }
}

fn run_plan(plan: &OptimizationPlan, objective: Arc<dyn Objective>) -> RunHistory {
    let evaluator = PoolEvaluator::for_objective(objective.clone(), 1).unwrap();
    let registry = EngineRegistry::with_builtins();
    let runner = Runner {
        plan,
        objective,
        evaluator: &evaluator,
        registry: &registry,
        checkpoint_path: None,
    };
    let mut history = RunHistory::new();
    runner.run(&mut history).unwrap();
    history
}

/// Best Rastrigin cost (negated best objective) of one single-stage run.
fn rastrigin_best_cost(engine: &str, dim: usize, pop: usize, gens: usize, seed: u64) -> f64 {
    let obj: Arc<dyn Objective> = Arc::new(RastriginObjective::standard(dim).unwrap());
    let history = run_plan(&single_stage(engine, gens, pop, seed), obj);
    -history.best_so_far().unwrap()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn proxy_wcf_objective() -> Arc<dyn Objective> {
    Arc::new(
        ProxyObjective::new(
            "proxy_wcf".into(),
            BhpLimits::default(),
            RealizationParams::default_params(),
            EconParams::default_params(),
            ProxyMetric::Wcf,
        )
        .unwrap(),
    )
}

#[test]
fn criterion_1_rastrigin_low_dimension_convergence() {
    let mut pso: Vec<f64> = (1..=10)
        .map(|s| rastrigin_best_cost("pso", 2, 40, 100, s))
        .collect();
    let mut ga: Vec<f64> = (1..=10)
        .map(|s| rastrigin_best_cost("ga", 2, 40, 100, s))
        .collect();
    let pso_med = median(&mut pso);
    let ga_med = median(&mut ga);
    gate(
        1,
        "rastrigin d=2 convergence",
        pso_med < 1e-4 && ga_med < 5.0,
        &format!("pso median {pso_med:.3e} (< 1e-4), ga median {ga_med:.3e} (< 5)"),
    );
}

#[test]
fn criterion_2_dimensionality_degradation() {
    let costs = |engine: &str, pop: usize, gens: usize| -> f64 {
        let mut v: Vec<f64> = (1..=10)
            .map(|s| rastrigin_best_cost(engine, 50, pop, gens, s))
            .collect();
        median(&mut v)
    };
    let ga_small = costs("ga", 40, 100);
    let pso_small = costs("pso", 40, 100);
    let ga_large = costs("ga", 100, 200);
    let pso_large = costs("pso", 100, 200);
    gate(
        2,
        "rastrigin d=50 degradation and budget scaling",
        ga_small > 10.0 && pso_small > 10.0 && ga_large < ga_small && pso_large < pso_small,
        &format!(
            "ga {ga_small:.1} -> {ga_large:.1}, pso {pso_small:.1} -> {pso_large:.1} (both > 10, both improve)"
        ),
    );
}

#[test]
fn criterion_3_cmaes_sphere_convergence() {
    // Bounds with midpoint 5 and range 20: the fresh-start mean is (5,...,5)
    // and sigma0_fraction 0.05 gives sigma = 1.
    let mut params = EngineParams::default();
    params.cmaes.sigma0_fraction = 0.05;
    let mut hits = 0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 1..=10 {
        let obj: Arc<dyn Objective> = Arc::new(SphereObjective::new(10, -5.0, 15.0).unwrap());
        let plan = OptimizationPlan {
            stages: vec![StagePlan {
                engine: "cmaes".into(),
                generations: 250, // 250 x 40 = 10^4 evaluations
                population_size: 40,
            }],
            seed,
            engine_params: params.clone(),
        };
        let history = run_plan(&plan, obj);
        assert_eq!(history.len(), 10_000);
        let best = history.best_so_far().unwrap();
        if best > -1e-10 {
            hits += 1;
        }
        worst = worst.max(-best);
    }
    gate(
        3,
        "cmaes 10-dim sphere within 1e4 evals",
        hits == 10,
        &format!("{hits}/10 seeds reached > -1e-10; worst final cost {worst:.2e}"),
    );
}

#[test]
fn criterion_4_hybrid_improvement_on_proxy() {
    let threshold = 0.005; // 0.5% relative improvement
    for first_stage in ["ga", "pso"] {
        let mut improved = 0;
        let mut rel_gains = Vec::new();
        let mut control_gains = Vec::new();
        for seed in 1..=10u64 {
            let plan = OptimizationPlan {
                stages: vec![
                    StagePlan {
                        engine: first_stage.into(),
                        generations: 100,
                        population_size: 40,
                    },
                    StagePlan {
                        engine: "cmaes".into(),
                        generations: 50,
                        population_size: 40,
                    },
                ],
                seed,
                engine_params: EngineParams::default(),
            };
            let history = run_plan(&plan, proxy_wcf_objective());
            let at_4000 = history.records()[3999].best_so_far;
            let at_6000 = history.records()[5999].best_so_far;
            let rel = (at_6000 - at_4000) / at_4000.abs();
            rel_gains.push(rel);
            if at_6000 > at_4000 && rel >= threshold {
                improved += 1;
            }

            // Equal-budget control (not gated): standalone engine at 6000
            // evaluations vs the hybrid's 6000-evaluation best.
            let control = run_plan(&single_stage(first_stage, 150, 40, seed), proxy_wcf_objective());
            let control_best = control.best_so_far().unwrap();
            control_gains.push((at_6000 - control_best) / control_best.abs());
        }
        let med_control = median(&mut control_gains);
        println!(
            "criterion 4 note: {first_stage}-cmaes vs standalone {first_stage} at equal 6000-eval budget: median relative gain {med_control:+.3e} (reported, not gated)"
        );
        gate(
            4,
            &format!("hybrid {first_stage}-cmaes improvement on proxy_wcf"),
            improved >= 8,
            &format!(
                "{improved}/10 seeds improved >= 0.5% after handoff (relative gains: {rel_gains:.4?})"
            ),
        );
    }
}

#[test]
fn criterion_5_budget_exactness() {
    let obj = proxy_wcf_objective();
    let hybrid = OptimizationPlan {
        stages: vec![
            StagePlan {
                engine: "ga".into(),
                generations: 100,
                population_size: 40,
            },
            StagePlan {
                engine: "cmaes".into(),
                generations: 50,
                population_size: 40,
            },
        ],
        seed: 3,
        engine_params: EngineParams::default(),
    };
    let h = run_plan(&hybrid, obj.clone());
    let stage1 = h.records().iter().filter(|r| r.stage == "s1_ga").count();
    let stage2 = h.records().iter().filter(|r| r.stage == "s2_cmaes").count();
    let standalone = run_plan(&single_stage("ga", 100, 40, 3), obj);
    gate(
        5,
        "budget exactness",
        h.len() == 6000 && stage1 == 4000 && stage2 == 2000 && standalone.len() == 4000,
        &format!(
            "hybrid {} rows ({stage1} + {stage2}), standalone {} rows",
            h.len(),
            standalone.len()
        ),
    );
}

#[test]
fn criterion_6_objective_oracles() {
    let rel_ok = |got: f64, want: f64| (got - want).abs() <= 1e-9 * want.abs().max(1.0);

    let t = FluidTotals {
        oil_produced: 1000.0,
        water_produced: 200.0,
        water_injected: 300.0,
    };
    let wcf_ok = rel_ok(wcf(&t).unwrap(), 950.0);

    let series = |rows: &[(f64, f64, f64)]| {
        FluidSeries::new(
            rows.iter()
                .map(|&(o, wp, wi)| FluidVolumes {
                    oil_produced: o,
                    water_produced: wp,
                    water_injected: wi,
                })
                .collect(),
        )
        .unwrap()
    };
    let e = EconParams::with_uniform_discount(40.0, 0.0, 0.0, 0.08);
    let npv1 = rel_ok(npv(&series(&[(100.0, 0.0, 0.0)]), &e).unwrap(), 4000.0);
    let npv2 = rel_ok(
        npv(&series(&[(100.0, 0.0, 0.0), (100.0, 0.0, 0.0)]), &e).unwrap(),
        4000.0 + 4000.0 / 1.08,
    );
    let e2 = EconParams::with_uniform_discount(40.0, -4.0, 0.0, 0.08);
    let npv3 = rel_ok(npv(&series(&[(100.0, 100.0, 0.0)]), &e2).unwrap(), 3600.0);

    // Cross-check: WCF is NPV under prices (+1, -0.1, -0.1), zero discount.
    let mut rng = RngStream::new(17).fork("acceptance-oracles");
    let identity = EconParams::with_uniform_discount(1.0, -0.1, -0.1, 0.0);
    let mut cross_ok = true;
    for _ in 0..100 {
        let n = 1 + rng.index(19);
        let rows: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                (
                    rng.uniform_in(0.0, 1e5),
                    rng.uniform_in(0.0, 1e5),
                    rng.uniform_in(0.0, 1e5),
                )
            })
            .collect();
        let s = series(&rows);
        let via_npv = npv(&s, &identity).unwrap();
        let via_wcf = wcf(&s.totals()).unwrap();
        if (via_npv - via_wcf).abs() > 1e-9 * via_wcf.abs().max(1.0) {
            cross_ok = false;
        }
    }
    gate(
        6,
        "wcf/npv oracles",
        wcf_ok && npv1 && npv2 && npv3 && cross_ok,
        &format!("hand values ok={}, 100-series cross-check ok={cross_ok}", wcf_ok && npv1 && npv2 && npv3),
    );
}

#[test]
fn criterion_7_ensemble_robustness_path() {
    let cfg = RunConfig::parse(
        "problem=proxy_wcf\nensemble.enabled=true\nseed=5\nstage.1.engine=ga\nstage.1.generations=100\nstage.1.population=40\n",
    )
    .unwrap();
    let ensemble = cfg.build_objective().unwrap();
    let plan = cfg.build_plan().unwrap();
    let history = run_plan(&plan, ensemble.clone());

    // Spot check: ensemble value = mean of the per-realization objectives.
    let base = cfg.base_realization();
    let realizations = hybridevo::reservoir::generate_realizations(
        cfg.ensemble_seed,
        cfg.ensemble_n_realizations,
        &base,
        cfg.ensemble_spread,
    )
    .unwrap();
    let members: Vec<ProxyObjective> = realizations
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            ProxyObjective::new(
                format!("r{i}"),
                cfg.limits,
                p,
                cfg.econ,
                ProxyMetric::Wcf,
            )
            .unwrap()
        })
        .collect();
    let bounds = ensemble.bounds().clone();
    let mut rng = RngStream::new(23).fork("acceptance-ensemble");
    let mut mean_ok = true;
    for _ in 0..5 {
        let x = ControlVector::new(
            (0..bounds.dim())
                .map(|i| rng.uniform_in(bounds.lower()[i], bounds.upper()[i]))
                .collect(),
        );
        let whole = ensemble.evaluate(&x).unwrap();
        let mean = members.iter().map(|m| m.evaluate(&x).unwrap()).sum::<f64>()
            / members.len() as f64;
        if (whole - mean).abs() > 1e-12 * mean.abs().max(1.0) {
            mean_ok = false;
        }
    }
    gate(
        7,
        "ensemble robustness path",
        history.len() == 4000 && mean_ok,
        &format!("{} history rows over 10 realizations, mean identity ok={mean_ok}", history.len()),
    );
}

#[test]
fn criterion_8_parallel_determinism() {
    let objective = proxy_wcf_objective();
    let plan = OptimizationPlan {
        stages: vec![
            StagePlan {
                engine: "ga".into(),
                generations: 5,
                population_size: 10,
            },
            StagePlan {
                engine: "cmaes".into(),
                generations: 3,
                population_size: 10,
            },
        ],
        seed: 9,
        engine_params: EngineParams::default(),
    };
    let registry = EngineRegistry::with_builtins();

    let mut csvs = Vec::new();
    for workers in [1usize, 4, 8] {
        let evaluator = PoolEvaluator::for_objective(objective.clone(), workers).unwrap();
        let runner = Runner {
            plan: &plan,
            objective: objective.clone(),
            evaluator: &evaluator,
            registry: &registry,
            checkpoint_path: None,
        };
        let mut h = RunHistory::new();
        runner.run(&mut h).unwrap();
        csvs.push(h.to_csv_string());
    }

    // File-queue backend with 4 in-process worker threads.
    let dir = tempfile::tempdir().unwrap();
    let queue = FileQueue::init(dir.path()).unwrap();
    let mut obj_registry = ObjectiveRegistry::new();
    obj_registry.register(objective.clone());
    let shutdown = AtomicBool::new(false);
    let queue_csv = std::thread::scope(|scope| {
        for _ in 0..4 {
            let q = queue.clone();
            let reg = &obj_registry;
            let stop = &shutdown;
            scope.spawn(move || {
                q.run_worker(reg, Duration::from_millis(1), stop).unwrap();
            });
        }
        let evaluator =
            FileQueueEvaluator::new(queue.clone(), Duration::from_millis(1), Duration::from_secs(60));
        let runner = Runner {
            plan: &plan,
            objective: objective.clone(),
            evaluator: &evaluator,
            registry: &registry,
            checkpoint_path: None,
        };
        let mut h = RunHistory::new();
        let outcome = runner.run(&mut h);
        shutdown.store(true, Ordering::Relaxed);
        outcome.unwrap();
        h.to_csv_string()
    });

    let all_equal = csvs.iter().all(|c| *c == csvs[0]) && queue_csv == csvs[0];
    gate(
        8,
        "parallel determinism",
        all_equal,
        &format!(
            "history.csv identical for pool workers 1/4/8 and file queue ({} rows)",
            csvs[0].lines().count() - 1
        ),
    );
}

#[test]
fn criterion_9_property_suites() {
    // Bounds preservation: >= 1e5 asked candidates across all engines.
    let bounds = Bounds::uniform(10, -3.0, 7.0).unwrap();
    let obj = RastriginObjective::new(10, -3.0, 7.0).unwrap();
    let registry = EngineRegistry::with_builtins();
    let params = EngineParams::default();
    let mut asked = 0usize;
    let mut in_bounds = true;
    for engine_name in ["ga", "pso", "cmaes"] {
        let init = EngineInit {
            bounds: &bounds,
            population_size: 50,
            generations: 667,
            rng: RngStream::new(31).fork(engine_name),
            seed_population: None,
            params: &params,
        };
        let mut engine = registry.create(engine_name, init).unwrap();
        for _ in 0..667 {
            let candidates = engine.ask().unwrap();
            let values: Vec<f64> = candidates
                .iter()
                .map(|x| {
                    if !bounds.contains(x) {
                        in_bounds = false;
                    }
                    asked += 1;
                    evaluate_checked(&obj, x).unwrap()
                })
                .collect();
            engine.tell(&values).unwrap();
        }
    }

    // CMA-ES covariance stays symmetric and positive definite through a
    // 200-generation run.
    let sphere = SphereObjective::new(8, -4.0, 4.0).unwrap();
    let cma_bounds = Bounds::uniform(8, -4.0, 4.0).unwrap();
    let mut cma = CmaEngine::new(EngineInit {
        bounds: &cma_bounds,
        population_size: 16,
        generations: 200,
        rng: RngStream::new(37).fork("spd"),
        seed_population: None,
        params: &params,
    })
    .unwrap();
    let mut spd_ok = true;
    for _ in 0..200 {
        let candidates = cma.ask().unwrap();
        let values: Vec<f64> = candidates
            .iter()
            .map(|x| evaluate_checked(&sphere, x).unwrap())
            .collect();
        cma.tell(&values).unwrap();
        let c = cma.covariance();
        for i in 0..c.nrows() {
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * c[(i, i)].abs().max(1.0) {
                    spd_ok = false;
                }
            }
        }
        let eig = c.clone().symmetric_eigenvalues();
        if eig.iter().any(|&l| l <= 0.0) {
            spd_ok = false;
        }
    }

    // Monotone best_so_far across every stage boundary of a 3-stage hybrid.
    let plan = OptimizationPlan {
        stages: vec![
            StagePlan {
                engine: "ga".into(),
                generations: 8,
                population_size: 12,
            },
            StagePlan {
                engine: "pso".into(),
                generations: 8,
                population_size: 12,
            },
            StagePlan {
                engine: "cmaes".into(),
                generations: 8,
                population_size: 12,
            },
        ],
        seed: 13,
        engine_params: EngineParams::default(),
    };
    let obj3: Arc<dyn Objective> = Arc::new(RastriginObjective::standard(6).unwrap());
    let history = run_plan(&plan, obj3);
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for r in history.records() {
        if r.best_so_far < prev {
            monotone = false;
        }
        prev = r.best_so_far;
    }

    gate(
        9,
        "property suites",
        asked >= 100_000 && in_bounds && spd_ok && monotone,
        &format!(
            "{asked} candidates all in bounds={in_bounds}, cma spd over 200 gens={spd_ok}, monotone best across 3 stages={monotone}"
        ),
    );
}
