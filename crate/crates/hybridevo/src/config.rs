//! Run configuration: flat `section.key=value` text with `#` comments.
//!
//! Every malformed input yields a diagnostic naming the offending key;
//! unknown keys are rejected. `dump_defaults` emits a complete config that
//! parses back unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::engines::{CmaConfig, EngineParams, GaConfig, PsoConfig};
use crate::error::{Error, Result};
use crate::hybrid::{OptimizationPlan, StagePlan};
use crate::objectives::fluids::EconParams;
use crate::objectives::{
    EnsembleMean, Objective, ObjectiveRegistry, ProxyMetric, ProxyObjective, RastriginObjective,
};
use crate::reservoir::{self, BhpLimits, RealizationParams, NUM_INJECTORS, NUM_PRODUCERS};

pub const SEED_ENV_VAR: &str = "HYBRIDEVO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Rastrigin,
    ProxyWcf,
    ProxyNpv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Pool,
    FileQueue,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub seed: u64,
    pub workers: usize,
    pub backend: Backend,
    pub queue_dir: PathBuf,
    pub queue_poll_ms: u64,
    pub queue_timeout_ms: u64,

    pub rastrigin_dimension: usize,
    pub rastrigin_lower: f64,
    pub rastrigin_upper: f64,

    pub ensemble_enabled: bool,
    pub ensemble_n_realizations: usize,
    pub ensemble_seed: u64,
    pub ensemble_spread: f64,

    pub econ: EconParams,
    pub limits: BhpLimits,
    pub proxy_pi: f64,
    pub proxy_ii: f64,
    pub proxy_ooip_mobile: f64,
    pub proxy_ct_vp: f64,
    pub proxy_p_init: f64,
    pub proxy_watercut_exponent: f64,

    pub stages: Vec<StagePlan>,
    pub engine_params: EngineParams,

    pub output_dir: PathBuf,
    pub checkpoint_enabled: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = RealizationParams::default_params();
        Self {
            problem: Problem::ProxyWcf,
            seed: 42,
            workers: 1,
            backend: Backend::Pool,
            queue_dir: PathBuf::from("queue"),
            queue_poll_ms: 100,
            queue_timeout_ms: 600_000,
            rastrigin_dimension: 2,
            rastrigin_lower: -5.12,
            rastrigin_upper: 5.12,
            ensemble_enabled: false,
            ensemble_n_realizations: 10,
            ensemble_seed: 7,
            ensemble_spread: 0.2,
            econ: EconParams::default_params(),
            limits: BhpLimits::default(),
            proxy_pi: base.pi[0],
            proxy_ii: base.ii[0],
            proxy_ooip_mobile: base.ooip_mobile,
            proxy_ct_vp: base.ct_vp,
            proxy_p_init: base.p_init,
            proxy_watercut_exponent: base.watercut_exponent,
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
            engine_params: EngineParams::default(),
            output_dir: PathBuf::from("out"),
            checkpoint_enabled: false,
        }
    }
}

struct KeyMap {
    map: BTreeMap<String, String>,
}

impl KeyMap {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self { map })
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.map.remove(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("key '{key}': cannot parse '{v}'"))),
            None => Ok(default),
        }
    }

    fn take_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("key '{key}': cannot parse '{v}'"))),
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut keys = KeyMap::parse(text)?;
        let defaults = Self::default();

        let problem = match keys.take("problem", "proxy_wcf".to_string())?.as_str() {
            "rastrigin" => Problem::Rastrigin,
            "proxy_wcf" => Problem::ProxyWcf,
            "proxy_npv" => Problem::ProxyNpv,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "key 'problem': unknown problem '{other}' (expected rastrigin | proxy_wcf | proxy_npv)"
                )))
            }
        };
        let backend = match keys.take("backend", "pool".to_string())?.as_str() {
            "pool" => Backend::Pool,
            "filequeue" => Backend::FileQueue,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "key 'backend': unknown backend '{other}' (expected pool | filequeue)"
                )))
            }
        };

        // Stages: contiguous stage.N.* blocks starting at 1; defaults to the
        // hybrid preset when no stage keys are present.
        let mut stages = Vec::new();
        for n in 1.. {
            let engine: Option<String> = keys.take_opt(&format!("stage.{n}.engine"))?;
            let generations: Option<usize> = keys.take_opt(&format!("stage.{n}.generations"))?;
            let population: Option<usize> = keys.take_opt(&format!("stage.{n}.population"))?;
            if engine.is_none() && generations.is_none() && population.is_none() {
                break;
            }
            let engine = engine.ok_or_else(|| {
                Error::InvalidConfig(format!("key 'stage.{n}.engine' is required for stage {n}"))
            })?;
            stages.push(StagePlan {
                engine,
                generations: generations.ok_or_else(|| {
                    Error::InvalidConfig(format!("key 'stage.{n}.generations' is required"))
                })?,
                population_size: population.unwrap_or(40),
            });
        }
        if stages.is_empty() {
            stages = defaults.stages.clone();
        }

        let engine_params = EngineParams {
            ga: GaConfig {
                tournament_size: keys.take("ga.tournament_size", 3)?,
                crossover_prob: keys.take("ga.crossover_prob", 0.9)?,
                crossover_alpha: keys.take("ga.crossover_alpha", 0.5)?,
                mutation_prob_per_gene: keys.take_opt("ga.mutation_prob_per_gene")?,
                mutation_sigma: keys.take("ga.mutation_sigma", 0.1)?,
                mutation_sigma_final: Some(keys.take("ga.mutation_sigma_final", 0.01)?),
                elitism_count: keys.take("ga.elitism_count", 1)?,
            },
            pso: PsoConfig {
                inertia: keys.take("pso.inertia", 0.7)?,
                inertia_final: keys.take_opt("pso.inertia_final")?,
                cognitive: keys.take("pso.cognitive", 1.5)?,
                social: keys.take("pso.social", 1.5)?,
                velocity_clamp: keys.take("pso.velocity_clamp", 0.5)?,
            },
            cmaes: CmaConfig {
                lambda: keys.take_opt("cmaes.lambda")?,
                sigma0_fraction: keys.take("cmaes.sigma0_fraction", 0.3)?,
            },
        };
        engine_params.validate()?;

        let cfg = Self {
            problem,
            seed: keys.take("seed", defaults.seed)?,
            workers: keys.take("workers", defaults.workers)?,
            backend,
            queue_dir: PathBuf::from(keys.take("queue.dir", "queue".to_string())?),
            queue_poll_ms: keys.take("queue.poll_ms", defaults.queue_poll_ms)?,
            queue_timeout_ms: keys.take("queue.timeout_ms", defaults.queue_timeout_ms)?,
            rastrigin_dimension: keys.take("rastrigin.dimension", defaults.rastrigin_dimension)?,
            rastrigin_lower: keys.take("rastrigin.lower", defaults.rastrigin_lower)?,
            rastrigin_upper: keys.take("rastrigin.upper", defaults.rastrigin_upper)?,
            ensemble_enabled: keys.take("ensemble.enabled", defaults.ensemble_enabled)?,
            ensemble_n_realizations: keys
                .take("ensemble.n_realizations", defaults.ensemble_n_realizations)?,
            ensemble_seed: keys.take("ensemble.seed", defaults.ensemble_seed)?,
            ensemble_spread: keys.take("ensemble.spread", defaults.ensemble_spread)?,
            econ: EconParams::with_uniform_discount(
                keys.take("econ.oil_price", defaults.econ.oil_price)?,
                keys.take("econ.water_prod_cost", defaults.econ.water_prod_cost)?,
                keys.take("econ.water_inj_cost", defaults.econ.water_inj_cost)?,
                keys.take("econ.discount", defaults.econ.discount_oil)?,
            ),
            limits: BhpLimits {
                min_prod: keys.take("proxy.min_prod_bhp", defaults.limits.min_prod)?,
                max_prod: keys.take("proxy.max_prod_bhp", defaults.limits.max_prod)?,
                min_inj: keys.take("proxy.min_inj_bhp", defaults.limits.min_inj)?,
                max_inj: keys.take("proxy.max_inj_bhp", defaults.limits.max_inj)?,
            },
            proxy_pi: keys.take("proxy.pi", defaults.proxy_pi)?,
            proxy_ii: keys.take("proxy.ii", defaults.proxy_ii)?,
            proxy_ooip_mobile: keys.take("proxy.ooip_mobile", defaults.proxy_ooip_mobile)?,
            proxy_ct_vp: keys.take("proxy.ct_vp", defaults.proxy_ct_vp)?,
            proxy_p_init: keys.take("proxy.p_init", defaults.proxy_p_init)?,
            proxy_watercut_exponent: keys
                .take("proxy.watercut_exponent", defaults.proxy_watercut_exponent)?,
            stages,
            engine_params,
            output_dir: PathBuf::from(keys.take("output.dir", "out".to_string())?),
            checkpoint_enabled: keys.take("output.checkpoint", defaults.checkpoint_enabled)?,
        };
        keys.finish()?;
        cfg.econ.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the seed override env var.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Ok(seed) = std::env::var(SEED_ENV_VAR) {
            cfg.seed = seed.parse().map_err(|_| {
                Error::InvalidConfig(format!("{SEED_ENV_VAR}: cannot parse '{seed}'"))
            })?;
        }
        Ok(cfg)
    }

    /// Complete default configuration; parses back unchanged.
    pub fn dump_defaults() -> String {
        let d = Self::default();
        let mut s = String::new();
        let _ = writeln!(s, "# hybridevo run configuration (defaults)");
        let _ = writeln!(s, "problem=proxy_wcf");
        let _ = writeln!(s, "seed={}", d.seed);
        let _ = writeln!(s, "workers={}", d.workers);
        let _ = writeln!(s, "backend=pool");
        let _ = writeln!(s, "queue.dir={}", d.queue_dir.display());
        let _ = writeln!(s, "queue.poll_ms={}", d.queue_poll_ms);
        let _ = writeln!(s, "queue.timeout_ms={}", d.queue_timeout_ms);
        let _ = writeln!(s);
        let _ = writeln!(s, "# benchmark problem");
        let _ = writeln!(s, "rastrigin.dimension={}", d.rastrigin_dimension);
        let _ = writeln!(s, "rastrigin.lower={}", d.rastrigin_lower);
        let _ = writeln!(s, "rastrigin.upper={}", d.rastrigin_upper);
        let _ = writeln!(s);
        let _ = writeln!(s, "# robust (ensemble) optimization");
        let _ = writeln!(s, "ensemble.enabled={}", d.ensemble_enabled);
        let _ = writeln!(s, "ensemble.n_realizations={}", d.ensemble_n_realizations);
        let _ = writeln!(s, "ensemble.seed={}", d.ensemble_seed);
        let _ = writeln!(s, "ensemble.spread={}", d.ensemble_spread);
        let _ = writeln!(s);
        let _ = writeln!(s, "# economics ($/bbl; costs are negative)");
        let _ = writeln!(s, "econ.oil_price={}", d.econ.oil_price);
        let _ = writeln!(s, "econ.water_prod_cost={}", d.econ.water_prod_cost);
        let _ = writeln!(s, "econ.water_inj_cost={}", d.econ.water_inj_cost);
        let _ = writeln!(s, "econ.discount={}", d.econ.discount_oil);
        let _ = writeln!(s);
        let _ = writeln!(s, "# waterflood proxy model");
        let _ = writeln!(s, "proxy.min_prod_bhp={}", d.limits.min_prod);
        let _ = writeln!(s, "proxy.max_prod_bhp={}", d.limits.max_prod);
        let _ = writeln!(s, "proxy.min_inj_bhp={}", d.limits.min_inj);
        let _ = writeln!(s, "proxy.max_inj_bhp={}", d.limits.max_inj);
        let _ = writeln!(s, "proxy.pi={}", d.proxy_pi);
        let _ = writeln!(s, "proxy.ii={}", d.proxy_ii);
        let _ = writeln!(s, "proxy.ooip_mobile={}", d.proxy_ooip_mobile);
        let _ = writeln!(s, "proxy.ct_vp={}", d.proxy_ct_vp);
        let _ = writeln!(s, "proxy.p_init={}", d.proxy_p_init);
        let _ = writeln!(s, "proxy.watercut_exponent={}", d.proxy_watercut_exponent);
        let _ = writeln!(s);
        let _ = writeln!(s, "# stage plan (hybrid preset: 100 + 50 generations)");
        for (i, st) in d.stages.iter().enumerate() {
            let _ = writeln!(s, "stage.{}.engine={}", i + 1, st.engine);
            let _ = writeln!(s, "stage.{}.generations={}", i + 1, st.generations);
            let _ = writeln!(s, "stage.{}.population={}", i + 1, st.population_size);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "# engine hyperparameters");
        let ga = &d.engine_params.ga;
        let _ = writeln!(s, "ga.tournament_size={}", ga.tournament_size);
        let _ = writeln!(s, "ga.crossover_prob={}", ga.crossover_prob);
        let _ = writeln!(s, "ga.crossover_alpha={}", ga.crossover_alpha);
        let _ = writeln!(s, "ga.mutation_sigma={}", ga.mutation_sigma);
        if let Some(f) = ga.mutation_sigma_final {
            let _ = writeln!(s, "ga.mutation_sigma_final={f}");
        }
        let _ = writeln!(s, "ga.elitism_count={}", ga.elitism_count);
        let pso = &d.engine_params.pso;
        let _ = writeln!(s, "pso.inertia={}", pso.inertia);
        let _ = writeln!(s, "pso.cognitive={}", pso.cognitive);
        let _ = writeln!(s, "pso.social={}", pso.social);
        let _ = writeln!(s, "pso.velocity_clamp={}", pso.velocity_clamp);
        let cma = &d.engine_params.cmaes;
        let _ = writeln!(s, "cmaes.sigma0_fraction={}", cma.sigma0_fraction);
        let _ = writeln!(s);
        let _ = writeln!(s, "# outputs");
        let _ = writeln!(s, "output.dir={}", d.output_dir.display());
        let _ = writeln!(s, "output.checkpoint={}", d.checkpoint_enabled);
        s
    }

    pub fn base_realization(&self) -> RealizationParams {
        RealizationParams {
            pi: vec![self.proxy_pi; NUM_PRODUCERS],
            ii: vec![self.proxy_ii; NUM_INJECTORS],
            ooip_mobile: self.proxy_ooip_mobile,
            ct_vp: self.proxy_ct_vp,
            p_init: self.proxy_p_init,
            watercut_exponent: self.proxy_watercut_exponent,
        }
    }

    /// Canonical objective id; master and workers derive the same id from
    /// the same config.
    pub fn objective_id(&self) -> String {
        let metric = match self.problem {
            Problem::Rastrigin => {
                return format!("rastrigin:d={}", self.rastrigin_dimension);
            }
            Problem::ProxyWcf => "proxy_wcf",
            Problem::ProxyNpv => "proxy_npv",
        };
        if self.ensemble_enabled {
            format!(
                "{metric}:ens={}:seed={}:spread={}",
                self.ensemble_n_realizations, self.ensemble_seed, self.ensemble_spread
            )
        } else {
            metric.to_string()
        }
    }

    pub fn build_objective(&self) -> Result<Arc<dyn Objective>> {
        match self.problem {
            Problem::Rastrigin => Ok(Arc::new(RastriginObjective::new(
                self.rastrigin_dimension,
                self.rastrigin_lower,
                self.rastrigin_upper,
            )?)),
            Problem::ProxyWcf | Problem::ProxyNpv => {
                let metric = if self.problem == Problem::ProxyWcf {
                    ProxyMetric::Wcf
                } else {
                    ProxyMetric::Npv
                };
                let base = self.base_realization();
                if self.ensemble_enabled {
                    let realizations = reservoir::generate_realizations(
                        self.ensemble_seed,
                        self.ensemble_n_realizations,
                        &base,
                        self.ensemble_spread,
                    )?;
                    let members: Vec<Arc<dyn Objective>> = realizations
                        .into_iter()
                        .enumerate()
                        .map(|(i, params)| {
                            Ok(Arc::new(ProxyObjective::new(
                                format!("{}#r{i}", self.objective_id()),
                                self.limits,
                                params,
                                self.econ,
                                metric,
                            )?) as Arc<dyn Objective>)
                        })
                        .collect::<Result<_>>()?;
                    Ok(Arc::new(EnsembleMean::new(self.objective_id(), members)?))
                } else {
                    Ok(Arc::new(ProxyObjective::new(
                        self.objective_id(),
                        self.limits,
                        base,
                        self.econ,
                        metric,
                    )?))
                }
            }
        }
    }

    /// Registry holding this config's objective, for file-queue workers.
    pub fn build_objective_registry(&self) -> Result<ObjectiveRegistry> {
        let mut reg = ObjectiveRegistry::new();
        reg.register(self.build_objective()?);
        Ok(reg)
    }

    pub fn build_plan(&self) -> Result<OptimizationPlan> {
        let plan = OptimizationPlan {
            stages: self.stages.clone(),
            seed: self.seed,
            engine_params: self.engine_params.clone(),
        };
        plan.validate()?;
        Ok(plan)
    }
}
