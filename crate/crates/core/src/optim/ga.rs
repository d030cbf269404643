use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tables::{genome_quality, QualityTables};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub genes: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Genome {
    pub fn new(genes: Vec<f64>) -> Self {
        Self { genes, fitness: None }
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Probability that a child is mutated.
    pub mutation_chance: f64,
    /// Fraction of `gene_scale` genes resampled by one mutation.
    pub mutation_genes: f64,
    /// Mutations tried per call; the best by genome quality wins.
    pub mutation_candidates: usize,
    /// Gene count the mutation fraction applies to; all genes when absent.
    pub gene_scale: Option<usize>,
    /// Probe step used when collecting quality tables.
    pub h: f64,
    pub bins: usize,
    pub tree_depth: usize,
    /// Individuals kept from one generation to the next.
    pub elite_carryover: usize,
    pub rng_seed: u64,
    /// Cap on objective evaluations for one optimization run.
    pub evaluation_budget: Option<usize>,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 32,
            generations: 50,
            mutation_chance: 0.8,
            mutation_genes: 0.2,
            mutation_candidates: 500,
            gene_scale: None,
            h: 0.05,
            bins: 16,
            tree_depth: 3,
            elite_carryover: 16,
            rng_seed: 0,
            evaluation_budget: None,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.population_size < 4 || self.population_size % 2 != 0 {
            problems.push(format!("population_size {} must be even and at least 4", self.population_size));
        }
        if self.elite_carryover == 0 || self.elite_carryover >= self.population_size {
            problems.push(format!(
                "elite_carryover {} must be in [1, population_size)",
                self.elite_carryover
            ));
        }
        for (name, v) in [("mutation_chance", self.mutation_chance), ("mutation_genes", self.mutation_genes)] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} {v} outside [0, 1]"));
            }
        }
        if self.tree_depth == 0 {
            problems.push("tree_depth must be at least 1".into());
        }
        if self.bins < 2 {
            problems.push("bins must be at least 2".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Genes changed by one mutation of an `n`-gene genome.
    pub fn genes_per_mutation(&self, n: usize) -> usize {
        ((self.gene_scale.unwrap_or(n) as f64 * self.mutation_genes).round() as usize).min(n)
    }
}

/// One objective evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub evaluation: usize,
    pub value: f64,
    pub best: f64,
}

/// Counts evaluations against an optional budget and keeps the best-so-far
/// trace. `maximize` decides what "best" means.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationLog {
    pub records: Vec<EvalRecord>,
    pub maximize: bool,
    budget: Option<usize>,
}

impl EvaluationLog {
    pub fn new(maximize: bool, budget: Option<usize>) -> Self {
        Self {
            records: Vec::new(),
            maximize,
            budget,
        }
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget.map_or(usize::MAX, |b| b.saturating_sub(self.count()))
    }

    pub fn best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }

    pub fn record(&mut self, value: f64) {
        let best = match self.best() {
            None => value,
            Some(b) if self.maximize => b.max(value),
            Some(b) => b.min(value),
        };
        self.records.push(EvalRecord {
            evaluation: self.count() + 1,
            value,
            best,
        });
    }
}

pub fn random_population<R: Rng>(genes: usize, size: usize, rng: &mut R) -> Vec<Genome> {
    (0..size)
        .map(|_| Genome::new((0..genes).map(|_| rng.gen()).collect()))
        .collect()
}

/// Picks an index with probability proportional to fitness. Negative
/// fitness is shifted to just above zero first; all-zero weights fall back
/// to a uniform pick.
pub fn select_proportional<R: Rng>(fitness: &[f64], rng: &mut R) -> usize {
    let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let max = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = if min < 0.0 { min - 1e-6 * (max - min).max(1e-12) } else { 0.0 };
    let weights: Vec<f64> = fitness.iter().map(|f| (f - shift).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.gen_range(0..fitness.len());
    }
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).expect("positive total")
}

/// Child taking the genes of `a` before a uniform cut point and `b` after it.
pub fn crossover<R: Rng>(a: &[f64], b: &[f64], rng: &mut R) -> Vec<f64> {
    if a.len() < 2 {
        return a.to_vec();
    }
    let cut = rng.gen_range(1..a.len());
    a[..cut].iter().chain(&b[cut..]).copied().collect()
}

/// Draws `k` distinct genes with probability proportional to `weights`,
/// never picking a zero-weight gene; uniform when all weights are zero.
fn weighted_distinct<R: Rng>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    if weights.iter().all(|&w| w <= 0.0) {
        let mut idx: Vec<usize> = (0..weights.len()).collect();
        idx.shuffle(rng);
        idx.truncate(k);
        return idx;
    }
    let mut w: Vec<f64> = weights.iter().map(|&x| x.max(0.0)).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut x = rng.gen::<f64>() * total;
        let mut pick = w.iter().rposition(|&v| v > 0.0).expect("positive total");
        for (i, &v) in w.iter().enumerate() {
            if v > 0.0 && x < v {
                pick = i;
                break;
            }
            x -= v;
        }
        out.push(pick);
        w[pick] = 0.0;
    }
    out
}

/// Tries `mutation_candidates` random resamplings of a few genes and keeps
/// the one the quality tables rate best (the first on ties).
pub fn mutate<R: Rng>(genome: &Genome, tables: &QualityTables, cfg: &GAConfig, rng: &mut R) -> Genome {
    let n = genome.genes.len();
    let k = cfg.genes_per_mutation(n);
    if k == 0 || cfg.mutation_candidates == 0 {
        return genome.clone();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..cfg.mutation_candidates {
        let mut genes = genome.genes.clone();
        for i in weighted_distinct(&tables.rate_of_change, k, rng) {
            genes[i] = rng.gen();
        }
        let q = genome_quality(&genes, tables);
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, genes));
        }
    }
    Genome::new(best.expect("at least one candidate").1)
}

fn evaluate<F>(pop: &mut [Genome], objective: &F, log: &mut EvaluationLog)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_none()).collect();
    let eval = |&i: &usize| objective(&pop[i].genes);
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        pending.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = pending.iter().map(eval).collect();
    for (i, v) in pending.into_iter().zip(values) {
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        pop[i].fitness = Some(v);
        log.record(v);
    }
}

fn sort_desc(pop: &mut [Genome]) {
    pop.sort_by(|a, b| b.score().total_cmp(&a.score()));
}

/// Replaces everything after the survivors with mutated one-point crossover
/// children of proportionally selected survivors.
pub(crate) fn breed<R: Rng>(pop: &mut Vec<Genome>, survivors: usize, size: usize, tables: &QualityTables, cfg: &GAConfig, rng: &mut R) {
    pop.truncate(survivors);
    let fitness: Vec<f64> = pop.iter().map(Genome::score).collect();
    while pop.len() < size {
        let a = select_proportional(&fitness, rng);
        let b = select_proportional(&fitness, rng);
        let mut child = Genome::new(crossover(&pop[a].genes, &pop[b].genes, rng));
        if cfg.mutation_chance > 0.0 && rng.gen::<f64>() < cfg.mutation_chance {
            child = mutate(&child, tables, cfg, rng);
        }
        pop.push(child);
    }
}

/// Evolves `population` for `cfg.generations` generations (fewer if the
/// evaluation budget runs out) and returns it sorted best first.
pub fn elementary_ga<F, R>(
    objective: &F,
    population: Vec<Genome>,
    cfg: &GAConfig,
    tables: &QualityTables,
    rng: &mut R,
    log: &mut EvaluationLog,
) -> Vec<Genome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng,
{
    let mut pop = population;
    let size = pop.len();
    let survivors = cfg.elite_carryover.min(size.saturating_sub(1)).max(1);
    evaluate(&mut pop, objective, log);
    sort_desc(&mut pop);
    for _ in 0..cfg.generations {
        if log.remaining() < size - survivors {
            break;
        }
        breed(&mut pop, survivors, size, tables, cfg, rng);
        evaluate(&mut pop, objective, log);
        sort_desc(&mut pop);
    }
    pop
}

/// Binary tree of elementary GAs: leaves start from random genomes, every
/// inner node from the better halves of its two children. Returns the four
/// best genomes of the root.
pub fn tree_structured_ga<F, R>(
    objective: &F,
    genes: usize,
    cfg: &GAConfig,
    tables: &QualityTables,
    rng: &mut R,
    log: &mut EvaluationLog,
) -> Vec<Genome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng,
{
    let mut root = tree_node(objective, genes, cfg.tree_depth.max(1), cfg, tables, rng, log);
    root.truncate(4);
    root
}

fn tree_node<F, R>(
    objective: &F,
    genes: usize,
    depth: usize,
    cfg: &GAConfig,
    tables: &QualityTables,
    rng: &mut R,
    log: &mut EvaluationLog,
) -> Vec<Genome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng,
{
    let size = cfg.population_size;
    let init = if depth <= 1 {
        random_population(genes, size, rng)
    } else {
        let left = tree_node(objective, genes, depth - 1, cfg, tables, rng, log);
        let right = tree_node(objective, genes, depth - 1, cfg, tables, rng, log);
        let half = size / 2;
        left.into_iter().take(half).chain(right.into_iter().take(size - half)).collect()
    };
    elementary_ga(objective, init, cfg, tables, rng, log)
}

/// Generations per elementary GA so that a whole tree fits `budget`
/// evaluations.
pub fn generations_for_budget(cfg: &GAConfig, budget: usize) -> usize {
    let depth = cfg.tree_depth.max(1) as u32;
    let leaves = 1usize << (depth - 1);
    let nodes = (1usize << depth) - 1;
    let per_generation = cfg.population_size - cfg.elite_carryover.min(cfg.population_size - 1);
    budget.saturating_sub(leaves * cfg.population_size) / (nodes * per_generation.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> GAConfig {
        GAConfig {
            mutation_candidates: 20,
            ..GAConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GAConfig::default().validate().is_ok());
        let odd = GAConfig { population_size: 7, ..GAConfig::default() };
        assert!(odd.validate().is_err());
        let bad = GAConfig { mutation_genes: 1.5, ..GAConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn proportional_selection_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hits = (0..10_000).filter(|_| select_proportional(&[1.0, 3.0], &mut rng) == 1).count();
        assert!((hits as f64 / 10_000.0 - 0.75).abs() < 0.02, "{hits}");
        // negative fitness still favors the larger value
        let hits = (0..2_000).filter(|_| select_proportional(&[-5.0, -1.0], &mut rng) == 1).count();
        assert!(hits > 1_900);
        let any = select_proportional(&[0.0, 0.0, 0.0], &mut rng);
        assert!(any < 3);
    }

    #[test]
    fn crossover_cuts_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = crossover(&[0.0; 6], &[1.0; 6], &mut rng);
            assert_eq!(c[0], 0.0);
            assert_eq!(c[5], 1.0);
            assert!(c.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn mutate_without_genes_is_identity() {
        let g = Genome::new(vec![0.1, 0.2, 0.3]);
        let c = GAConfig { mutation_genes: 0.1, ..cfg() };
        let t = QualityTables::neutral(3, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mutate(&g, &t, &c, &mut rng).genes, g.genes);
    }

    #[test]
    fn mutate_respects_zero_rates() {
        let mut t = QualityTables::neutral(5, 16);
        t.rate_of_change = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let c = GAConfig { mutation_genes: 0.4, ..cfg() };
        let g = Genome::new(vec![0.5; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = mutate(&g, &t, &c, &mut rng);
            assert_eq!(&m.genes[1..], &[0.5; 4]);
        }
    }

    #[test]
    fn mutate_follows_bin_scores() {
        let mut t = QualityTables::neutral(6, 16);
        for row in &mut t.q_table {
            row[0] = 5.0;
        }
        let c = GAConfig { mutation_genes: 0.34, mutation_candidates: 500, ..cfg() };
        let g = Genome::new(vec![0.5; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut in_bin0, mut changed) = (0, 0);
        for _ in 0..100 {
            let m = mutate(&g, &t, &c, &mut rng);
            for (&a, &b) in m.genes.iter().zip(&g.genes) {
                if a != b {
                    changed += 1;
                    in_bin0 += (t.bin_of(a) == 0) as usize;
                }
            }
        }
        assert!(in_bin0 as f64 >= 0.9 * changed as f64, "{in_bin0}/{changed}");
    }

    #[test]
    fn mutate_is_deterministic() {
        let t = QualityTables::neutral(8, 16);
        let g = Genome::new(vec![0.5; 8]);
        let a = mutate(&g, &t, &cfg(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = mutate(&g, &t, &cfg(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn identical_population_without_mutation_is_stable() {
        let c = GAConfig { mutation_chance: 0.0, generations: 5, population_size: 8, elite_carryover: 4, ..cfg() };
        let pop = vec![Genome::new(vec![0.2, 0.7, 0.4]); 8];
        let t = QualityTables::neutral(3, 16);
        let f = |x: &[f64]| -x.iter().sum::<f64>();
        let mut log = EvaluationLog::new(true, None);
        let out = elementary_ga(&f, pop.clone(), &c, &t, &mut ChaCha8Rng::seed_from_u64(0), &mut log);
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|g| g.genes == pop[0].genes));
    }

    #[test]
    fn converges_to_target() {
        let target = [0.1, 0.9, 0.35, 0.6, 0.5, 0.75, 0.2, 0.45];
        let f = |x: &[f64]| -x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let c = GAConfig { generations: 200, ..cfg() };
        let t = QualityTables::neutral(8, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut log = EvaluationLog::new(true, None);
        let pop = random_population(8, 32, &mut rng);
        let out = elementary_ga(&f, pop, &c, &t, &mut rng, &mut log);
        let err = out[0].genes.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.05, "{:?}", out[0].genes);
        assert!(log.records.windows(2).all(|w| w[1].best >= w[0].best));
    }

    #[test]
    fn depth_one_tree_is_one_ga() {
        let f = |x: &[f64]| x[0] * (1.0 - x[1]) + x[2];
        let c = GAConfig { tree_depth: 1, generations: 10, ..cfg() };
        let t = QualityTables::neutral(3, 16);
        let mut log_a = EvaluationLog::new(true, None);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = tree_structured_ga(&f, 3, &c, &t, &mut rng, &mut log_a);
        let mut log_b = EvaluationLog::new(true, None);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pop = random_population(3, c.population_size, &mut rng);
        let mut b = elementary_ga(&f, pop, &c, &t, &mut rng, &mut log_b);
        b.truncate(4);
        assert_eq!(a, b);
        assert_eq!(log_a, log_b);
    }

    #[test]
    fn tree_root_beats_leaves_and_is_reproducible() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - (x[1] - 0.8).powi(2) + x[2] * 0.1;
        let c = GAConfig { tree_depth: 3, generations: 6, ..cfg() };
        let t = QualityTables::neutral(3, 16);
        let run = || {
            let mut log = EvaluationLog::new(true, None);
            let out = tree_structured_ga(&f, 3, &c, &t, &mut ChaCha8Rng::seed_from_u64(5), &mut log);
            (out, log)
        };
        let (out, log) = run();
        assert_eq!(run().0, out);
        assert_eq!(out.len(), 4);
        let best_seen = log.records.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out[0].fitness, Some(best_seen));
        assert!(log.records.windows(2).all(|w| w[1].best >= w[0].best));
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64]| x[0];
        let c = GAConfig { tree_depth: 2, generations: 1000, ..cfg() };
        let t = QualityTables::neutral(2, 16);
        let mut log = EvaluationLog::new(true, Some(500));
        tree_structured_ga(&f, 2, &c, &t, &mut ChaCha8Rng::seed_from_u64(1), &mut log);
        assert!(log.count() <= 500 + 32, "{}", log.count());
        assert_eq!(generations_for_budget(&GAConfig::default(), 10_000), (10_000 - 4 * 32) / (7 * 16));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn population_shape_is_kept(seed in 0u64..1000, half in 2usize..8, genes in 1usize..6, gens in 0usize..6) {
            let c = GAConfig { population_size: 2 * half, elite_carryover: half, generations: gens, ..cfg() };
            let t = QualityTables::neutral(genes, 16);
            let f = |x: &[f64]| x.iter().map(|v| (v * 7.0).sin()).sum::<f64>();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_population(genes, 2 * half, &mut rng);
            let mut log = EvaluationLog::new(true, None);
            let out = elementary_ga(&f, pop, &c, &t, &mut rng, &mut log);
            proptest::prop_assert_eq!(out.len(), 2 * half);
            proptest::prop_assert!(out.iter().all(|g| g.genes.len() == genes && g.genes.iter().all(|v| (0.0..=1.0).contains(v))));
            proptest::prop_assert!(out.windows(2).all(|w| w[0].fitness >= w[1].fitness));
            proptest::prop_assert_eq!(log.count(), 2 * half + gens * half);
        }
    }
}
