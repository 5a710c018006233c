//! Covariance matrix adaptation evolution strategy.
//!
//! Weighted recombination of the mu best samples, rank-one plus rank-mu
//! covariance update, and cumulative step-size adaptation, with the standard
//! strategy constants as functions of dimension and population size.
//! Candidates are clipped to bounds for evaluation while the distribution
//! update uses the unclipped samples.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bounds::{clip, Bounds, ControlVector};
use crate::error::{Error, Result};
use crate::population::{Individual, Population};
use crate::rng::RngStream;

use super::{Engine, EngineFactory, EngineInit, EngineSnapshot};

/// Floor on handoff standard deviations, as a fraction of each dimension's
/// range.
const SIGMA_FLOOR_FRACTION: f64 = 1e-3;
/// A handoff population whose widest per-dimension std is below this fraction
/// of the widest range carries no usable shape information.
const COLLAPSE_FRACTION: f64 = 5e-3;
/// Step size for a restart from a collapsed handoff population, as a fraction
/// of the widest range.
const RESTART_SIGMA_FRACTION: f64 = 0.02;
/// Widening applied to the handoff step size; the donor population
/// understates the scale still worth searching.
const HANDOFF_SIGMA_BOOST: f64 = 1.5;
/// Strength of the out-of-bounds ranking penalty relative to the generation's
/// value spread.
const BOUNDARY_PENALTY_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmaConfig {
    /// Samples per generation; defaults to the stage population size.
    pub lambda: Option<usize>,
    /// Initial step size for a fresh start, as a fraction of the widest
    /// dimension's range.
    pub sigma0_fraction: f64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            sigma0_fraction: 0.3,
        }
    }
}

impl CmaConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if l < 2 {
                return Err(Error::InvalidArgument("cmaes.lambda must be >= 2".into()));
            }
        }
        if !self.sigma0_fraction.is_finite() || self.sigma0_fraction <= 0.0 {
            return Err(Error::InvalidArgument(
                "cmaes.sigma0_fraction must be finite and > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Log-decreasing recombination weights over the mu best, normalized to
/// sum to one.
fn recombination_weights(lambda: usize) -> Vec<f64> {
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StrategyParams {
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl StrategyParams {
    fn new(dim: usize, lambda: usize) -> Self {
        let d = dim as f64;
        let weights = recombination_weights(lambda);
        let mu = weights.len();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_1 = 2.0 / ((d + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0).powi(2) + mu_eff))
            .min(1.0 - c_1);
        let chi_n = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
        Self {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmaEngine {
    bounds: Bounds,
    rng: RngStream,
    sp: StrategyParams,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: usize,
    // Eigen cache of cov, refreshed after every tell.
    eig_basis: DMatrix<f64>,
    eig_scale: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    /// Unclipped samples of the pending ask.
    pending: Option<Vec<DVector<f64>>>,
    best: Option<Individual>,
    last_evaluated: Option<Population>,
}

fn decompose(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if !min.is_finite() || min <= 0.0 {
        let max = eig.eigenvalues.max();
        return Err(Error::Eigen(format!(
            "covariance not positive definite: eigenvalues in [{min:.3e}, {max:.3e}]"
        )));
    }
    let scale = eig.eigenvalues.map(f64::sqrt);
    let basis = eig.eigenvectors;
    // C^(-1/2) = B * D^-1 * B^T
    let inv_sqrt =
        &basis * DMatrix::from_diagonal(&scale.map(|s| 1.0 / s)) * basis.transpose();
    Ok((basis, scale, inv_sqrt))
}

impl CmaEngine {
    pub fn new(init: EngineInit) -> Result<Self> {
        init.params.cmaes.validate()?;
        let cfg = &init.params.cmaes;
        let lambda = cfg.lambda.unwrap_or(init.population_size);
        if lambda < 2 {
            return Err(Error::InvalidArgument("cmaes requires lambda >= 2".into()));
        }
        let dim = init.bounds.dim();
        let sp = StrategyParams::new(dim, lambda);

        let (mean, sigma, cov_diag) = match init.seed_population {
            Some(pop) => Self::handoff_distribution(pop, &sp, init.bounds)?,
            None => {
                let mid = DVector::from_iterator(
                    dim,
                    (0..dim).map(|i| (init.bounds.lower()[i] + init.bounds.upper()[i]) / 2.0),
                );
                (mid, cfg.sigma0_fraction * init.bounds.max_range(), None)
            }
        };

        let cov = match cov_diag {
            Some(d) => DMatrix::from_diagonal(&d),
            None => DMatrix::identity(dim, dim),
        };
        let (eig_basis, eig_scale, inv_sqrt) = decompose(&cov)?;
        Ok(Self {
            bounds: init.bounds.clone(),
            rng: init.rng,
            sp,
            mean,
            sigma,
            cov,
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            generation: 0,
            eig_basis,
            eig_scale,
            inv_sqrt,
            pending: None,
            best: None,
            last_evaluated: None,
        })
    }

    /// Initial (mean, sigma, covariance diagonal) from an incoming evaluated
    /// population: the mean starts at the best individual, the covariance
    /// diagonal follows the per-dimension spread of the mu best members, and
    /// the step size is their geometric-mean standard deviation, widened by
    /// a fixed factor. A collapsed population restarts isotropically.
    fn handoff_distribution(
        pop: &Population,
        sp: &StrategyParams,
        bounds: &Bounds,
    ) -> Result<(DVector<f64>, f64, Option<DVector<f64>>)> {
        if pop.size() < sp.mu {
            return Err(Error::InvalidArgument(format!(
                "handoff population of {} is below the mu = {} requirement",
                pop.size(),
                sp.mu
            )));
        }
        let ranked = pop.ranked_indices()?;
        let selected: Vec<&Individual> =
            ranked.iter().take(sp.mu).map(|&i| &pop.members[i]).collect();
        let dim = bounds.dim();
        let mut max_std = 0.0f64;
        let mut stds = Vec::with_capacity(dim);
        for i in 0..dim {
            let vals: Vec<f64> = selected.iter().map(|m| m.x.as_slice()[i]).collect();
            let avg = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / vals.len() as f64;
            let std = var.sqrt().max(SIGMA_FLOOR_FRACTION * bounds.range(i));
            max_std = max_std.max(std);
            stds.push(std);
        }
        let best_x = DVector::from_vec(pop.members[ranked[0]].x.as_slice().to_vec());
        let floor = SIGMA_FLOOR_FRACTION * bounds.max_range();

        // A fully collapsed population (every particle at one point) carries
        // no shape information; restart isotropically around its best point.
        if max_std < COLLAPSE_FRACTION * bounds.max_range() {
            let sigma = (RESTART_SIGMA_FRACTION * bounds.max_range()).max(floor);
            return Ok((best_x, sigma, None));
        }

        // Geometric-mean step size paired with a diagonal covariance seeded
        // from the population: dimensions the previous stage already settled
        // get proportionally less sampling effort.
        let log_mean = stds.iter().map(|s| s.ln()).sum::<f64>() / dim as f64;
        let geo_std = log_mean.exp().max(floor);
        let diag = DVector::from_iterator(dim, stds.iter().map(|s| (s / geo_std).powi(2)));
        let sigma = (HANDOFF_SIGMA_BOOST * geo_std).max(floor);
        Ok((best_x, sigma, Some(diag)))
    }
}

impl Engine for CmaEngine {
    fn name(&self) -> &'static str {
        "cmaes"
    }

    fn ask(&mut self) -> Result<Vec<ControlVector>> {
        if self.pending.is_some() {
            return Err(Error::InvalidArgument("ask called before tell".into()));
        }
        let dim = self.bounds.dim();
        let mut raw = Vec::with_capacity(self.sp.lambda);
        let mut clipped = Vec::with_capacity(self.sp.lambda);
        for _ in 0..self.sp.lambda {
            let z = DVector::from_iterator(dim, (0..dim).map(|_| self.rng.normal()));
            let y = &self.eig_basis * z.component_mul(&self.eig_scale);
            let x = &self.mean + self.sigma * y;
            let cv = ControlVector::new(x.iter().copied().collect());
            clipped.push(clip(&cv, &self.bounds)?);
            raw.push(x);
        }
        self.pending = Some(raw);
        Ok(clipped)
    }

    fn tell(&mut self, values: &[f64]) -> Result<()> {
        let raw = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidArgument("tell without a pending ask".into()))?;
        if values.len() != raw.len() {
            self.pending = Some(raw);
            return Err(Error::DimensionMismatch {
                expected: self.sp.lambda,
                actual: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "cmaes tell".into(),
                value: bad,
            });
        }
        let sp = &self.sp;
        let dim = self.bounds.dim();

        // Boundary penalty: candidates are evaluated at their clipped
        // position, so without it the ranking is flat outside the box and
        // sigma can run away. Selection ranks by value minus a mild penalty
        // on the squared out-of-bounds distance, normalized by the current
        // sampling variance so it stays comparable across scales without
        // overriding real value differences near the boundary.
        let dist2: Vec<f64> = raw
            .iter()
            .map(|x| {
                (0..dim)
                    .map(|i| {
                        let below = (self.bounds.lower()[i] - x[i]).max(0.0);
                        let above = (x[i] - self.bounds.upper()[i]).max(0.0);
                        below * below + above * above
                    })
                    .sum()
            })
            .collect();
        let (vmin, vmax) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let spread = (vmax - vmin).max(1e-8 * vmax.abs().max(1.0));
        let avg_var = self.sigma * self.sigma * self.cov.diagonal().mean();
        let gamma = BOUNDARY_PENALTY_SCALE * spread / (avg_var * dim as f64);
        let ranking: Vec<f64> = values
            .iter()
            .zip(&dist2)
            .map(|(&v, &d2)| v - gamma * d2)
            .collect();

        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| ranking[b].total_cmp(&ranking[a]));

        // Track best and the handoff population on the evaluated (clipped)
        // coordinates.
        let evaluated: Vec<Individual> = raw
            .iter()
            .zip(values)
            .map(|(x, &v)| {
                let cv = ControlVector::new(x.iter().copied().collect());
                Individual::evaluated(clip(&cv, &self.bounds)?, v)
            })
            .collect::<Result<_>>()?;
        for ind in &evaluated {
            let improves = self
                .best
                .as_ref()
                .map_or(true, |b| ind.value() > b.value());
            if improves {
                self.best = Some(ind.clone());
            }
        }
        self.last_evaluated = Some(Population::new(evaluated, self.generation)?);

        let old_mean = self.mean.clone();
        let selected: Vec<DVector<f64>> = order
            .iter()
            .take(sp.mu)
            .map(|&i| (&raw[i] - &old_mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(dim);
        for (y, w) in selected.iter().zip(&sp.weights) {
            y_w += y * *w;
        }
        self.mean = &old_mean + self.sigma * &y_w;
        // Keep the distribution anchored to the box: a mean outside the
        // bounds evaluates every sample at a clipped corner, fitness goes
        // flat, and the run stalls there.
        for i in 0..dim {
            self.mean[i] = self.mean[i].clamp(self.bounds.lower()[i], self.bounds.upper()[i]);
        }

        // Cumulative step-size adaptation.
        self.path_sigma = (1.0 - sp.c_sigma) * &self.path_sigma
            + (sp.c_sigma * (2.0 - sp.c_sigma) * sp.mu_eff).sqrt() * (&self.inv_sqrt * &y_w);
        let gen1 = (self.generation + 1) as f64;
        let expected_norm =
            (1.0 - (1.0 - sp.c_sigma).powf(2.0 * gen1)).sqrt() * sp.chi_n;
        let h_sigma = if self.path_sigma.norm() / expected_norm * sp.chi_n
            < (1.4 + 2.0 / (dim as f64 + 1.0)) * sp.chi_n
        {
            1.0
        } else {
            0.0
        };

        self.path_c = (1.0 - sp.c_c) * &self.path_c
            + h_sigma * (sp.c_c * (2.0 - sp.c_c) * sp.mu_eff).sqrt() * &y_w;

        // Rank-one plus rank-mu covariance update.
        let mut rank_mu = DMatrix::zeros(dim, dim);
        for (y, w) in selected.iter().zip(&sp.weights) {
            rank_mu += *w * y * y.transpose();
        }
        let delta_h = (1.0 - h_sigma) * sp.c_c * (2.0 - sp.c_c);
        self.cov = (1.0 - sp.c_1 - sp.c_mu) * &self.cov
            + sp.c_1 * (&self.path_c * self.path_c.transpose() + delta_h * &self.cov)
            + sp.c_mu * rank_mu;
        // Keep exact symmetry against round-off drift.
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *=
            ((sp.c_sigma / sp.d_sigma) * (self.path_sigma.norm() / sp.chi_n - 1.0)).exp();
        // Steps wider than the box itself only feed the clipping pathology.
        self.sigma = self.sigma.min(self.bounds.max_range());
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::Eigen(format!(
                "step size degenerated to {}",
                self.sigma
            )));
        }

        let (basis, scale, inv_sqrt) = decompose(&self.cov)?;
        self.eig_basis = basis;
        self.eig_scale = scale;
        self.inv_sqrt = inv_sqrt;
        self.generation += 1;
        Ok(())
    }

    fn best(&self) -> Result<Individual> {
        self.best.clone().ok_or(Error::NotEvaluated)
    }

    fn population(&self) -> Result<Population> {
        self.last_evaluated.clone().ok_or(Error::NotEvaluated)
    }

    fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot::Cma(self.clone())
    }
}

impl CmaEngine {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn weights(&self) -> &[f64] {
        &self.sp.weights
    }
}

pub struct CmaFactory;

impl EngineFactory for CmaFactory {
    fn name(&self) -> &'static str {
        "cmaes"
    }
    fn create(&self, init: EngineInit) -> Result<Box<dyn Engine>> {
        Ok(Box::new(CmaEngine::new(init)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::EngineParams;
    use crate::objectives::sphere_cost;

    fn make_engine(seed: u64, lambda: usize, dim: usize, lo: f64, hi: f64) -> CmaEngine {
        let bounds = Bounds::uniform(dim, lo, hi).unwrap();
        let params = EngineParams::default();
        CmaEngine::new(EngineInit {
            bounds: &bounds,
            population_size: lambda,
            generations: 100,
            rng: RngStream::new(seed).fork("cmaes"),
            seed_population: None,
            params: &params,
        })
        .unwrap()
    }

    #[test]
    fn weights_sum_to_one_and_decrease() {
        for lambda in [2, 5, 10, 40] {
            let w = recombination_weights(lambda);
            assert_eq!(w.len(), lambda / 2);
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for pair in w.windows(2) {
                assert!(pair[0] >= pair[1]);
            }
            assert!(*w.last().unwrap() > 0.0);
        }
    }

    #[test]
    fn mu_one_mean_equals_best_sample() {
        // lambda = 2 gives mu = 1 with weight 1: the new mean is the best
        // sample exactly.
        let mut e = make_engine(1, 2, 3, -10.0, 10.0);
        let points = e.ask().unwrap();
        let raw: Vec<Vec<f64>> = e
            .pending
            .as_ref()
            .unwrap()
            .iter()
            .map(|x| x.iter().copied().collect())
            .collect();
        let values = vec![1.0, 5.0];
        e.tell(&values).unwrap();
        for (m, r) in e.mean().iter().zip(&raw[1]) {
            assert!((m - r).abs() < 1e-12);
        }
        drop(points);
    }

    #[test]
    fn tiny_sigma_samples_collapse_to_mean() {
        let mut e = make_engine(2, 8, 4, -10.0, 10.0);
        e.sigma = 1e-300;
        let points = e.ask().unwrap();
        for p in points {
            for (v, m) in p.as_slice().iter().zip(e.mean().iter()) {
                assert!((v - m).abs() < 1e-290);
            }
        }
    }

    #[test]
    fn identity_covariance_sample_cloud() {
        // Empirical covariance of 10^4 draws with C = I should match
        // sigma^2 * I within 5% relative on the diagonal.
        let mut e = make_engine(3, 4, 2, -100.0, 100.0);
        e.sigma = 1.0;
        e.mean = DVector::zeros(2);
        let mut draws: Vec<[f64; 2]> = Vec::new();
        while draws.len() < 10_000 {
            let pts = e.ask().unwrap();
            for p in &pts {
                draws.push([p.as_slice()[0], p.as_slice()[1]]);
            }
            e.pending = None; // sampling only, no update
        }
        let n = draws.len() as f64;
        let mean0 = draws.iter().map(|d| d[0]).sum::<f64>() / n;
        let mean1 = draws.iter().map(|d| d[1]).sum::<f64>() / n;
        let var0 = draws.iter().map(|d| (d[0] - mean0).powi(2)).sum::<f64>() / n;
        let var1 = draws.iter().map(|d| (d[1] - mean1).powi(2)).sum::<f64>() / n;
        let cov01 = draws
            .iter()
            .map(|d| (d[0] - mean0) * (d[1] - mean1))
            .sum::<f64>()
            / n;
        assert!((var0 - 1.0).abs() < 0.05, "var0 = {var0}");
        assert!((var1 - 1.0).abs() < 0.05, "var1 = {var1}");
        assert!(cov01.abs() < 0.05, "cov01 = {cov01}");
    }

    #[test]
    fn deterministic_sampling() {
        let mut a = make_engine(5, 6, 3, -5.0, 5.0);
        let mut b = make_engine(5, 6, 3, -5.0, 5.0);
        assert_eq!(a.ask().unwrap(), b.ask().unwrap());
    }

    #[test]
    fn lambda_mismatch_is_an_error() {
        let mut e = make_engine(1, 6, 2, -5.0, 5.0);
        let _ = e.ask().unwrap();
        assert!(e.tell(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut e = make_engine(7, 12, 5, -5.0, 5.0);
        for _ in 0..60 {
            let points = e.ask().unwrap();
            let values: Vec<f64> = points
                .iter()
                .map(|p| -sphere_cost(p.as_slice()).unwrap())
                .collect();
            e.tell(&values).unwrap();
            let c = e.covariance();
            let asym = (c - c.transpose()).abs().max();
            assert!(asym < 1e-12, "asymmetry {asym}");
            let min_eig = SymmetricEigen::new(c.clone()).eigenvalues.min();
            assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn converges_on_sphere() {
        // Smoke-level: the acceptance suite runs the full 10-dim criterion.
        let bounds = Bounds::uniform(5, -10.0, 10.0).unwrap();
        let params = EngineParams::default();
        let mut e = CmaEngine::new(EngineInit {
            bounds: &bounds,
            population_size: 16,
            generations: 200,
            rng: RngStream::new(1).fork("sphere"),
            seed_population: None,
            params: &params,
        })
        .unwrap();
        e.mean = DVector::from_element(5, 5.0);
        e.sigma = 1.0;
        for _ in 0..200 {
            let points = e.ask().unwrap();
            let values: Vec<f64> = points
                .iter()
                .map(|p| -sphere_cost(p.as_slice()).unwrap())
                .collect();
            e.tell(&values).unwrap();
        }
        assert!(e.best().unwrap().value().unwrap() > -1e-10);
    }

    #[test]
    fn handoff_from_degenerate_population_restarts_isotropically() {
        let bounds = Bounds::uniform(2, 0.0, 10.0).unwrap();
        let point = ControlVector::new(vec![4.0, 6.0]);
        let members: Vec<Individual> = (0..6)
            .map(|_| Individual::evaluated(point.clone(), 1.0).unwrap())
            .collect();
        let pop = Population::new(members, 0).unwrap();
        let params = EngineParams::default();
        let e = CmaEngine::new(EngineInit {
            bounds: &bounds,
            population_size: 6,
            generations: 10,
            rng: RngStream::new(1).fork("h"),
            seed_population: Some(&pop),
            params: &params,
        })
        .unwrap();
        assert_eq!(e.sigma(), RESTART_SIGMA_FRACTION * 10.0);
        assert!((e.mean()[0] - 4.0).abs() < 1e-12);
        assert!((e.mean()[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn handoff_below_mu_requirement_errors() {
        let bounds = Bounds::uniform(2, 0.0, 10.0).unwrap();
        let members: Vec<Individual> = (0..3)
            .map(|i| {
                Individual::evaluated(ControlVector::new(vec![i as f64, 0.0]), i as f64).unwrap()
            })
            .collect();
        let pop = Population::new(members, 0).unwrap();
        let mut params = EngineParams::default();
        params.cmaes.lambda = Some(40); // mu = 20 > 3 members
        let res = CmaEngine::new(EngineInit {
            bounds: &bounds,
            population_size: 3,
            generations: 10,
            rng: RngStream::new(1).fork("h"),
            seed_population: Some(&pop),
            params: &params,
        });
        assert!(res.is_err());
    }
}
