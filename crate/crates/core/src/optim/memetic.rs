use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::ga::{breed, EvaluationLog, GAConfig, Genome};
use super::tables::QualityTables;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemeticConfig {
    /// Loss evaluations allowed, refinement steps included.
    pub budget: usize,
    /// Adam steps given to each refined individual per generation.
    pub refine_steps: usize,
    /// Share of the population (best first) refined per generation.
    pub refine_fraction: f64,
    pub learning_rate: f64,
    /// Standard deviation of the gene noise used to spread presets.
    pub jitter: f64,
}

impl Default for MemeticConfig {
    fn default() -> Self {
        Self {
            budget: 5000,
            refine_steps: 5,
            refine_fraction: 0.25,
            learning_rate: 0.01,
            jitter: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemeticResult {
    pub genes: Vec<f64>,
    pub loss: f64,
}

/// A loss over genes with an optional gradient. Closures returning
/// `(loss, d_genes)` implement it; types with a cheaper loss-only path can
/// override [`DifferentiableObjective::loss`].
pub trait DifferentiableObjective: Sync {
    fn loss_with_grad(&self, genes: &[f64]) -> (f64, Vec<f64>);

    fn loss(&self, genes: &[f64]) -> f64 {
        self.loss_with_grad(genes).0
    }
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync> DifferentiableObjective for F {
    fn loss_with_grad(&self, genes: &[f64]) -> (f64, Vec<f64>) {
        self(genes)
    }
}

fn finite_loss(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    items.iter().map(f).collect()
}

/// Adam from `genes` for `steps` updates. Returns the best point visited,
/// its loss, and every loss in evaluation order.
pub(crate) fn refine<F>(objective: &F, genes: &[f64], steps: usize, frozen: &[bool], lr: f64) -> (Vec<f64>, f64, Vec<f64>)
where
    F: DifferentiableObjective + ?Sized,
{
    let mut state = AdamState::new(genes.len(), lr);
    let mut x = genes.to_vec();
    let mut losses = Vec::with_capacity(steps + 1);
    let mut best = (x.clone(), f64::INFINITY);
    for i in 0..=steps {
        let (loss, grad) = objective.loss_with_grad(&x);
        let loss = finite_loss(loss);
        losses.push(loss);
        if loss < best.1 {
            best = (x.clone(), loss);
        }
        if i < steps {
            if grad.iter().any(|g| !g.is_finite()) {
                break;
            }
            state.step(&mut x, &grad, frozen);
        }
    }
    (best.0, best.1, losses)
}

/// Genetic search where the best individuals of every generation are also
/// polished with a few Adam steps. The population starts from `presets`
/// (copies jittered to fill it). `frozen` marks genes Adam must not move.
/// The log records losses, so its best column is non-increasing.
#[allow(clippy::too_many_arguments)]
pub fn memetic_optimize<F, R>(
    objective: &F,
    presets: &[Vec<f64>],
    frozen: &[bool],
    ga: &GAConfig,
    cfg: &MemeticConfig,
    tables: &QualityTables,
    rng: &mut R,
    log: &mut EvaluationLog,
) -> Result<MemeticResult>
where
    F: DifferentiableObjective + ?Sized,
    R: Rng,
{
    ga.validate()?;
    let n = frozen.len();
    if presets.is_empty() {
        return Err(Error::Config("memetic search needs at least one preset".into()));
    }
    if let Some(p) = presets.iter().find(|p| p.len() != n) {
        return Err(Error::Dimension(format!("preset with {} genes, expected {n}", p.len())));
    }
    if tables.gene_count() != n {
        return Err(Error::Dimension(format!("tables cover {} genes, expected {n}", tables.gene_count())));
    }
    let size = ga.population_size;
    let noise = Normal::new(0.0, cfg.jitter.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut pop: Vec<Genome> = (0..size)
        .map(|i| {
            let base = &presets[i % presets.len()];
            if i < presets.len() {
                Genome::new(base.clone())
            } else {
                Genome::new(base.iter().map(|g| (g + noise.sample(rng)).clamp(0.0, 1.0)).collect())
            }
        })
        .collect();

    let mut best = MemeticResult {
        genes: pop[0].genes.clone(),
        loss: f64::INFINITY,
    };
    let survivors = ga.elite_carryover.min(size - 1).max(1);
    let refined = ((size as f64 * cfg.refine_fraction).round() as usize).min(size);
    let limit = log.count() + cfg.budget;
    let left = |log: &EvaluationLog| log.remaining().min(limit.saturating_sub(log.count()));

    let evaluate = |pop: &mut Vec<Genome>, log: &mut EvaluationLog, best: &mut MemeticResult| {
        let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_none()).collect();
        let pending: Vec<usize> = pending.into_iter().take(left(log)).collect();
        let losses = map_ordered(&pending, |&i| finite_loss(objective.loss(&pop[i].genes)));
        for (i, loss) in pending.into_iter().zip(losses) {
            log.record(loss);
            pop[i].fitness = Some(-loss);
            if loss < best.loss {
                *best = MemeticResult {
                    genes: pop[i].genes.clone(),
                    loss,
                };
            }
        }
        pop.retain(|g| g.fitness.is_some());
        pop.sort_by(|a, b| b.fitness.unwrap().total_cmp(&a.fitness.unwrap()));
    };

    evaluate(&mut pop, log, &mut best);
    for _ in 0..ga.generations {
        if left(log) < size - survivors || pop.len() < size {
            break;
        }
        breed(&mut pop, survivors, size, tables, ga, rng);
        evaluate(&mut pop, log, &mut best);

        let per = cfg.refine_steps + 1;
        let count = refined.min(left(log) / per);
        if cfg.refine_steps == 0 || count == 0 {
            continue;
        }
        let starts: Vec<Vec<f64>> = pop[..count].iter().map(|g| g.genes.clone()).collect();
        let results = map_ordered(&starts, |g| refine(objective, g, cfg.refine_steps, frozen, cfg.learning_rate));
        for (slot, (genes, loss, losses)) in results.into_iter().enumerate() {
            for l in losses {
                log.record(l);
            }
            if -loss > pop[slot].fitness.unwrap() {
                pop[slot] = Genome {
                    genes: genes.clone(),
                    fitness: Some(-loss),
                };
            }
            if loss < best.loss {
                best = MemeticResult { genes, loss };
            }
        }
        pop.sort_by(|a, b| b.fitness.unwrap().total_cmp(&a.fitness.unwrap()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic(target: &'static [f64]) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + Sync {
        move |x: &[f64]| {
            let loss = x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();
            let grad = x.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
            (loss, grad)
        }
    }

    fn ga() -> GAConfig {
        GAConfig {
            mutation_candidates: 20,
            generations: 10_000,
            ..GAConfig::default()
        }
    }

    fn budget(budget: usize) -> MemeticConfig {
        MemeticConfig { budget, ..MemeticConfig::default() }
    }

    #[test]
    fn exact_preset_is_kept() {
        let f = quadratic(&[0.2, 0.4, 0.6]);
        let presets = vec![vec![0.9, 0.9, 0.9], vec![0.2, 0.4, 0.6]];
        let cfg = budget(400);
        let mut log = EvaluationLog::new(false, None);
        let t = QualityTables::neutral(3, 16);
        let r = memetic_optimize(&f, &presets, &[false; 3], &ga(), &cfg, &t, &mut ChaCha8Rng::seed_from_u64(1), &mut log).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.genes, presets[1]);
    }

    #[test]
    fn convex_quadratic_converges_within_budget() {
        let f = quadratic(&[0.15, 0.8, 0.45, 0.3]);
        let cfg = budget(2000);
        let mut log = EvaluationLog::new(false, None);
        let t = QualityTables::neutral(4, 16);
        let r = memetic_optimize(&f, &[vec![0.5; 4]], &[false; 4], &ga(), &cfg, &t, &mut ChaCha8Rng::seed_from_u64(2), &mut log)
            .unwrap();
        assert!(r.loss < 1e-4, "{}", r.loss);
        assert!(log.count() <= 2000);
        assert!(log.records.windows(2).all(|w| w[1].best <= w[0].best));
        assert_eq!(log.best(), Some(r.loss));
    }

    #[test]
    fn discrete_gene_finds_better_branch() {
        // gene 0 is a two-valued switch read as below/above one half
        let f = |x: &[f64]| {
            let switch = if x[0] >= 0.5 { 0.0 } else { 0.3 };
            let loss = switch + (x[1] - 0.4).powi(2);
            (loss, vec![0.0, 2.0 * (x[1] - 0.4)])
        };
        let cfg = budget(5000);
        let ga = GAConfig { mutation_genes: 0.5, ..ga() };
        let mut log = EvaluationLog::new(false, None);
        let t = QualityTables::neutral(2, 16);
        let r = memetic_optimize(&f, &[vec![0.0, 0.9]], &[true, false], &ga, &cfg, &t, &mut ChaCha8Rng::seed_from_u64(3), &mut log)
            .unwrap();
        assert!(r.genes[0] >= 0.5);
    }

    #[test]
    fn reproducible() {
        let f = quadratic(&[0.3, 0.3]);
        let cfg = budget(300);
        let t = QualityTables::neutral(2, 16);
        let run = || {
            let mut log = EvaluationLog::new(false, Some(300));
            let r = memetic_optimize(&f, &[vec![0.9, 0.1]], &[false; 2], &ga(), &cfg, &t, &mut ChaCha8Rng::seed_from_u64(4), &mut log)
                .unwrap();
            (r, log)
        };
        let (a, la) = run();
        let (b, lb) = run();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = quadratic(&[0.3, 0.3]);
        let t = QualityTables::neutral(2, 16);
        let mut log = EvaluationLog::new(false, None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(memetic_optimize(&f, &[], &[false; 2], &ga(), &budget(100), &t, &mut rng, &mut log).is_err());
        assert!(memetic_optimize(&f, &[vec![0.1]], &[false; 2], &ga(), &budget(100), &t, &mut rng, &mut log).is_err());
    }
}
