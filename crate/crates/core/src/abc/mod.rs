//! Artificial Bee Colony minimizer over a box.
//!
//! Karaboga's employed / onlooker / scout cycle. All random draws for a
//! phase come from one coordinator stream before the phase's objective
//! evaluations fan out, and results are applied in candidate order, so the
//! search trajectory is identical with or without parallel evaluation.

mod tune;

pub use tune::{objective, tune_fopid, tune_pid, SearchBox, TuneOutcome, PENALTY_COST};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbcConfig {
    /// Number of food sources (one employed and one onlooker bee each).
    pub colony_size: usize,
    /// Employed/onlooker/scout cycles.
    pub max_iterations: usize,
    /// Failed-improvement count that sends a source's bee scouting.
    /// `None` means `colony_size × dimension`.
    pub limit: Option<usize>,
    pub rng_seed: u64,
    /// Optional cap on objective evaluations.
    pub max_evaluations: Option<usize>,
    /// Evaluate each phase's candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for AbcConfig {
    fn default() -> Self {
        Self {
            colony_size: 10,
            max_iterations: 20,
            limit: None,
            rng_seed: 1,
            max_evaluations: None,
            parallel: true,
        }
    }
}

impl AbcConfig {
    pub fn validate(&self, bounds: &[(f64, f64)]) -> Result<()> {
        if self.colony_size < 2 {
            return Err(Error::config("abc.colony_size must be at least 2"));
        }
        if self.limit == Some(0) {
            return Err(Error::config("abc.limit must be at least 1"));
        }
        if bounds.is_empty() {
            return Err(Error::config("search space needs at least one dimension"));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "bounds[{j}] must be finite with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_limit(&self, dimension: usize) -> usize {
        self.limit.unwrap_or(self.colony_size * dimension)
    }
}

/// A food source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub position: Vec<f64>,
    pub cost: f64,
    pub trial_counter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: Candidate,
    /// Row 0 is the initial colony, then one row per completed cycle.
    pub history: Vec<IterationRecord>,
    pub evaluations: usize,
    /// Evaluation index (1-based) at which each new global best was found.
    pub improvements: Vec<(usize, f64)>,
}

/// Onlooker selection weight.
pub fn fitness(cost: f64) -> f64 {
    if cost >= 0.0 {
        1.0 / (1.0 + cost)
    } else {
        1.0 + cost.abs()
    }
}

struct Colony<'a, F> {
    objective: &'a F,
    bounds: &'a [(f64, f64)],
    cfg: &'a AbcConfig,
    rng: ChaCha8Rng,
    sources: Vec<Candidate>,
    best: Option<Candidate>,
    evaluations: usize,
    improvements: Vec<(usize, f64)>,
}

impl<'a, F> Colony<'a, F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn budget_left(&self) -> usize {
        self.cfg
            .max_evaluations
            .map_or(usize::MAX, |m| m.saturating_sub(self.evaluations))
    }

    /// Evaluate in order; entries past the budget come back `None`.
    fn evaluate(&mut self, positions: &[Vec<f64>]) -> Vec<Option<f64>> {
        let n = positions.len().min(self.budget_left());
        let costs: Vec<f64> = if self.cfg.parallel {
            positions[..n]
                .par_iter()
                .map(|p| (self.objective)(p))
                .collect()
        } else {
            positions[..n].iter().map(|p| (self.objective)(p)).collect()
        };
        let mut out = Vec::with_capacity(positions.len());
        for (p, c) in positions.iter().zip(&costs) {
            let c = if c.is_nan() { f64::INFINITY } else { *c };
            self.evaluations += 1;
            if self.best.as_ref().is_none_or(|b| c < b.cost) {
                self.best = Some(Candidate {
                    position: p.clone(),
                    cost: c,
                    trial_counter: 0,
                });
                self.improvements.push((self.evaluations, c));
            }
            out.push(Some(c));
        }
        out.resize(positions.len(), None);
        out
    }

    fn random_position(&mut self) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo + self.rng.gen::<f64>() * (hi - lo))
            .collect()
    }

    /// `v_ij = x_ij + φ(x_ij − x_kj)`, one random dimension, clipped.
    fn neighbour(&mut self, i: usize) -> Vec<f64> {
        let n = self.sources.len();
        let j = self.rng.gen_range(0..self.bounds.len());
        let mut k = self.rng.gen_range(0..n - 1);
        if k >= i {
            k += 1;
        }
        let phi = self.rng.gen_range(-1.0..=1.0);
        let mut v = self.sources[i].position.clone();
        let xij = v[j];
        let (lo, hi) = self.bounds[j];
        v[j] = (xij + phi * (xij - self.sources[k].position[j])).clamp(lo, hi);
        v
    }

    fn greedy(&mut self, i: usize, position: Vec<f64>, cost: f64) {
        let src = &mut self.sources[i];
        if cost < src.cost {
            src.position = position;
            src.cost = cost;
            src.trial_counter = 0;
        } else {
            src.trial_counter += 1;
        }
    }

    fn employed_phase(&mut self) {
        let n = self.sources.len();
        let proposals: Vec<Vec<f64>> = (0..n).map(|i| self.neighbour(i)).collect();
        let costs = self.evaluate(&proposals);
        for (i, (p, c)) in proposals.into_iter().zip(costs).enumerate() {
            if let Some(c) = c {
                self.greedy(i, p, c);
            }
        }
    }

    fn onlooker_phase(&mut self) {
        let n = self.sources.len();
        let weights: Vec<f64> = self.sources.iter().map(|s| fitness(s.cost)).collect();
        let total: f64 = weights.iter().sum();
        let mut picks = Vec::with_capacity(n);
        let mut proposals = Vec::with_capacity(n);
        for _ in 0..n {
            let mut r = self.rng.gen::<f64>() * total;
            let mut i = n - 1;
            for (idx, w) in weights.iter().enumerate() {
                if r < *w {
                    i = idx;
                    break;
                }
                r -= w;
            }
            picks.push(i);
            proposals.push(self.neighbour(i));
        }
        let costs = self.evaluate(&proposals);
        for ((i, p), c) in picks.into_iter().zip(proposals).zip(costs) {
            if let Some(c) = c {
                self.greedy(i, p, c);
            }
        }
    }

    fn scout_phase(&mut self, limit: usize) {
        let exhausted: Vec<usize> = (0..self.sources.len())
            .filter(|&i| self.sources[i].trial_counter > limit)
            .collect();
        if exhausted.is_empty() {
            return;
        }
        let fresh: Vec<Vec<f64>> = exhausted.iter().map(|_| self.random_position()).collect();
        let costs = self.evaluate(&fresh);
        for ((i, p), c) in exhausted.into_iter().zip(fresh).zip(costs) {
            if let Some(c) = c {
                self.sources[i] = Candidate {
                    position: p,
                    cost: c,
                    trial_counter: 0,
                };
            }
        }
    }

    fn record(&self, iteration: usize) -> IterationRecord {
        let n = self.sources.len() as f64;
        IterationRecord {
            iteration,
            best_cost: self.best.as_ref().map_or(f64::INFINITY, |b| b.cost),
            mean_cost: self.sources.iter().map(|s| s.cost).sum::<f64>() / n,
            evaluations: self.evaluations,
        }
    }
}

/// Minimize `objective` over the box `bounds`.
pub fn optimize<F>(objective: &F, bounds: &[(f64, f64)], cfg: &AbcConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate(bounds)?;
    if cfg.max_evaluations.is_some_and(|m| m < cfg.colony_size) {
        return Err(Error::config(
            "abc.max_evaluations must cover at least the initial colony",
        ));
    }
    let mut colony = Colony {
        objective,
        bounds,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        sources: Vec::new(),
        best: None,
        evaluations: 0,
        improvements: Vec::new(),
    };
    let initial: Vec<Vec<f64>> = (0..cfg.colony_size)
        .map(|_| colony.random_position())
        .collect();
    let costs = colony.evaluate(&initial);
    colony.sources = initial
        .into_iter()
        .zip(costs)
        .map(|(position, cost)| Candidate {
            position,
            cost: cost.expect("initial colony fits the budget"),
            trial_counter: 0,
        })
        .collect();

    let limit = cfg.effective_limit(bounds.len());
    let mut history = vec![colony.record(0)];
    for it in 1..=cfg.max_iterations {
        if colony.budget_left() == 0 {
            break;
        }
        colony.employed_phase();
        colony.onlooker_phase();
        colony.scout_phase(limit);
        history.push(colony.record(it));
    }

    Ok(OptimizeResult {
        best: colony.best.expect("at least one evaluation"),
        history,
        evaluations: colony.evaluations,
        improvements: colony.improvements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Mutex;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_5d_converges() {
        let cfg = AbcConfig {
            max_iterations: 200,
            rng_seed: 11,
            ..AbcConfig::default()
        };
        let r = optimize(&sphere, &[(-5.0, 5.0); 5], &cfg).unwrap();
        assert!(r.best.cost < 1e-3, "{}", r.best.cost);
    }

    #[test]
    fn shifted_quadratic_1d() {
        let cfg = AbcConfig {
            max_iterations: 100,
            rng_seed: 3,
            ..AbcConfig::default()
        };
        let f = |x: &[f64]| (x[0] - 2.0).powi(2);
        let r = optimize(&f, &[(0.0, 5.0)], &cfg).unwrap();
        assert!((r.best.position[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn constant_objective_gives_flat_history() {
        let f = |_: &[f64]| 4.2;
        let r = optimize(&f, &[(0.0, 1.0); 3], &AbcConfig::default()).unwrap();
        assert_eq!(r.best.cost, 4.2);
        assert!(r
            .history
            .iter()
            .all(|h| h.best_cost == 4.2 && (h.mean_cost - 4.2).abs() < 1e-12));
        assert_eq!(r.history.len(), 21);
    }

    #[test]
    fn rejects_invalid_config() {
        let b = [(0.0, 1.0)];
        let bad = [
            AbcConfig {
                colony_size: 1,
                ..AbcConfig::default()
            },
            AbcConfig {
                limit: Some(0),
                ..AbcConfig::default()
            },
        ];
        for cfg in &bad {
            assert!(optimize(&sphere, &b, cfg).is_err());
        }
        assert!(optimize(&sphere, &[(1.0, 1.0)], &AbcConfig::default()).is_err());
        assert!(optimize(&sphere, &[(0.0, f64::INFINITY)], &AbcConfig::default()).is_err());
        assert!(optimize(&sphere, &[], &AbcConfig::default()).is_err());
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let cfg = AbcConfig {
            max_iterations: 1000,
            max_evaluations: Some(137),
            ..AbcConfig::default()
        };
        let r = optimize(&sphere, &[(-5.0, 5.0); 4], &cfg).unwrap();
        assert_eq!(r.evaluations, 137);
    }

    #[test]
    fn default_budget_is_about_410() {
        let cfg = AbcConfig {
            parallel: false,
            ..AbcConfig::default()
        };
        let r = optimize(&sphere, &[(-5.0, 5.0); 5], &cfg).unwrap();
        assert!(
            r.evaluations >= 410 && r.evaluations < 440,
            "{}",
            r.evaluations
        );
    }

    #[test]
    fn parallel_and_serial_trajectories_agree() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * x[1].abs() + x[2].sin();
        let b = [(-3.0, 3.0); 3];
        let s = optimize(
            &f,
            &b,
            &AbcConfig {
                parallel: false,
                ..AbcConfig::default()
            },
        )
        .unwrap();
        let p = optimize(
            &f,
            &b,
            &AbcConfig {
                parallel: true,
                ..AbcConfig::default()
            },
        )
        .unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn greedy_selection_never_worsens_a_source() {
        let b = [(-5.0, 5.0); 4];
        let cfg = AbcConfig::default();
        let mut colony = Colony {
            objective: &sphere,
            bounds: &b,
            cfg: &cfg,
            rng: ChaCha8Rng::seed_from_u64(5),
            sources: Vec::new(),
            best: None,
            evaluations: 0,
            improvements: Vec::new(),
        };
        let init: Vec<Vec<f64>> = (0..10).map(|_| colony.random_position()).collect();
        colony.sources = init
            .iter()
            .map(|p| Candidate {
                position: p.clone(),
                cost: sphere(p),
                trial_counter: 0,
            })
            .collect();
        for _ in 0..30 {
            let before: Vec<f64> = colony.sources.iter().map(|s| s.cost).collect();
            colony.employed_phase();
            colony.onlooker_phase();
            for (s, c) in colony.sources.iter().zip(&before) {
                assert!(s.cost <= *c);
                assert_eq!(s.cost, sphere(&s.position));
            }
        }
    }

    #[test]
    fn every_evaluated_position_is_in_bounds() {
        // record every position the objective sees; all must be in bounds
        let seen = Mutex::new(Vec::new());
        let f = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            sphere(x)
        };
        let b = [(-1.0, 2.0), (0.5, 0.75)];
        optimize(
            &f,
            &b,
            &AbcConfig {
                max_iterations: 50,
                ..AbcConfig::default()
            },
        )
        .unwrap();
        for p in seen.into_inner().unwrap() {
            for (v, (lo, hi)) in p.iter().zip(b) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn history_is_monotone_and_seeded(seed in any::<u64>(), shift in -2.0f64..2.0) {
            let f = |x: &[f64]| x.iter().map(|v| (v - shift).powi(2) + (3.0 * v).cos()).sum::<f64>();
            let cfg = AbcConfig { rng_seed: seed, max_iterations: 30, ..AbcConfig::default() };
            let b = [(-4.0, 4.0); 3];
            let a = optimize(&f, &b, &cfg).unwrap();
            for w in a.history.windows(2) {
                prop_assert!(w[1].best_cost <= w[0].best_cost);
            }
            prop_assert_eq!(a.history.last().unwrap().best_cost, a.best.cost);
            let again = optimize(&f, &b, &cfg).unwrap();
            prop_assert_eq!(a, again);
        }
    }
}
