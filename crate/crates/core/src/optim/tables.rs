use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest magnitude of a bin score.
pub const MAX_SCORE: f64 = 10.0;

/// Per-gene statistics over a family of objectives, used to steer mutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityTables {
    /// Mean absolute rate of change of the objective along each gene.
    pub rate_of_change: Vec<f64>,
    /// Probability of a good sample given the bin of each gene, `[gene][bin]`.
    pub p_table: Vec<Vec<f64>>,
    /// Probability of a good sample overall.
    pub p0: f64,
    /// Signed bin scores, `[gene][bin]`.
    pub q_table: Vec<Vec<f64>>,
    pub bins: usize,
    /// Fitness above which a sample counts as good.
    pub epsilon: f64,
    pub sample_count: usize,
    /// Set when every sampled fitness was equal and the tables carry no
    /// information.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub sample_count: usize,
    pub bins: usize,
    /// Probe step for the rate of change.
    pub h: f64,
    /// Fixed good-sample threshold; the 75th percentile when absent.
    pub epsilon: Option<f64>,
    /// Distinct objectives drawn from the family.
    pub objectives: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            bins: 16,
            h: 0.05,
            epsilon: None,
            objectives: 10,
        }
    }
}

impl QualityTables {
    /// Tables that weight all genes equally and score every bin 0.
    pub fn neutral(genes: usize, bins: usize) -> Self {
        Self {
            rate_of_change: vec![1.0; genes],
            p_table: vec![vec![0.0; bins]; genes],
            p0: 0.0,
            q_table: vec![vec![0.0; bins]; genes],
            bins,
            epsilon: 0.0,
            sample_count: 0,
            degenerate: true,
        }
    }

    /// Tables for a longer genome whose first genes are the ones covered
    /// here. Extra genes score 0 in every bin and get the mean rate.
    pub fn extended(&self, genes: usize) -> Self {
        let mut t = self.clone();
        let n = self.gene_count();
        let rate = if n == 0 { 1.0 } else { self.rate_of_change.iter().sum::<f64>() / n as f64 };
        for _ in n..genes {
            t.rate_of_change.push(rate);
            t.p_table.push(vec![self.p0; self.bins]);
            t.q_table.push(vec![0.0; self.bins]);
        }
        t
    }

    pub fn gene_count(&self) -> usize {
        self.rate_of_change.len()
    }

    pub fn bin_of(&self, gene: f64) -> usize {
        ((gene * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        t.check().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn check(&self) -> Result<()> {
        let n = self.gene_count();
        let mut problems = Vec::new();
        if self.bins < 2 {
            problems.push(format!("bin count {} is below 2", self.bins));
        }
        if self.p_table.len() != n || self.q_table.len() != n {
            problems.push("table rows do not match the gene count".into());
        }
        for row in self.p_table.iter().chain(&self.q_table) {
            if row.len() != self.bins {
                problems.push("table columns do not match the bin count".into());
                break;
            }
        }
        if self.p_table.iter().flatten().chain([&self.p0]).any(|p| !(0.0..=1.0).contains(p)) {
            problems.push("probabilities must lie in [0, 1]".into());
        }
        if self.q_table.iter().flatten().any(|q| !q.is_finite()) {
            problems.push("bin scores must be finite".into());
        }
        if self.rate_of_change.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            problems.push("rates of change must be finite and nonnegative".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Signed ratio score of a bin probability against the base rate.
pub fn bin_score(p: f64, p0: f64) -> f64 {
    let diff = p - p0;
    if diff == 0.0 {
        return 0.0;
    }
    let (hi, lo) = (p.max(p0), p.min(p0));
    let ratio = if lo > 0.0 { (hi / lo).min(MAX_SCORE) } else { MAX_SCORE };
    diff.signum() * ratio
}

/// Samples uniform genomes over objectives drawn from `family` and builds the
/// tables. Each objective covers a contiguous block of samples.
pub fn collect_quality_tables<R, F, O>(
    mut family: F,
    genes: usize,
    cfg: &TableConfig,
    rng: &mut R,
) -> Result<QualityTables>
where
    R: Rng,
    F: FnMut(&mut R) -> O,
    O: Fn(&[f64]) -> f64 + Sync,
{
    if cfg.sample_count == 0 {
        return Err(Error::Config("sample_count must be at least 1".into()));
    }
    if cfg.bins < 2 {
        return Err(Error::Config("bins must be at least 2".into()));
    }
    if !(cfg.h > 0.0 && cfg.h < 1.0) {
        return Err(Error::Config(format!("probe step {} outside (0, 1)", cfg.h)));
    }
    if cfg.sample_count < 1000 {
        log::warn!("collecting tables from only {} samples", cfg.sample_count);
    }
    let objectives = cfg.objectives.clamp(1, cfg.sample_count);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(cfg.sample_count);
    let mut fs: Vec<f64> = Vec::with_capacity(cfg.sample_count);
    let mut rate = vec![0.0; genes];
    for block in 0..objectives {
        let objective = family(rng);
        let lo = block * cfg.sample_count / objectives;
        let hi = (block + 1) * cfg.sample_count / objectives;
        let batch: Vec<Vec<f64>> = (lo..hi).map(|_| (0..genes).map(|_| rng.gen::<f64>()).collect()).collect();
        let probe = |x: &Vec<f64>| -> (f64, Vec<f64>) {
            let f = objective(x);
            let mut y = x.clone();
            let deltas = (0..genes)
                .map(|k| {
                    let step = if x[k] + cfg.h <= 1.0 { cfg.h } else { -cfg.h };
                    y[k] = x[k] + step;
                    let d = (objective(&y) - f).abs() / cfg.h;
                    y[k] = x[k];
                    d
                })
                .collect();
            (f, deltas)
        };
        #[cfg(feature = "parallel")]
        let results: Vec<(f64, Vec<f64>)> = {
            use rayon::prelude::*;
            batch.par_iter().map(probe).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<(f64, Vec<f64>)> = batch.iter().map(probe).collect();
        for (x, (f, deltas)) in batch.into_iter().zip(results) {
            for (r, d) in rate.iter_mut().zip(deltas) {
                *r += d;
            }
            xs.push(x);
            fs.push(f);
        }
    }
    let s = cfg.sample_count as f64;
    rate.iter_mut().for_each(|r| *r /= s);

    let epsilon = cfg.epsilon.unwrap_or_else(|| percentile(&fs, 0.75));
    let degenerate = fs.iter().all(|&f| f == fs[0]);
    if degenerate {
        log::warn!("every sampled fitness equals {}; quality tables carry no information", fs[0]);
    }
    let good: Vec<bool> = fs.iter().map(|&f| f > epsilon).collect();
    let p0 = good.iter().filter(|&&g| g).count() as f64 / s;
    let mut p_table = vec![vec![0.0; cfg.bins]; genes];
    let mut q_table = vec![vec![0.0; cfg.bins]; genes];
    for i in 0..genes {
        let mut hits = vec![0usize; cfg.bins];
        let mut totals = vec![0usize; cfg.bins];
        for (x, &g) in xs.iter().zip(&good) {
            let b = ((x[i] * cfg.bins as f64) as usize).min(cfg.bins - 1);
            totals[b] += 1;
            hits[b] += g as usize;
        }
        for b in 0..cfg.bins {
            p_table[i][b] = if totals[b] == 0 { p0 } else { hits[b] as f64 / totals[b] as f64 };
            q_table[i][b] = if degenerate { 0.0 } else { bin_score(p_table[i][b], p0) };
        }
    }
    Ok(QualityTables {
        rate_of_change: rate,
        p_table,
        p0,
        q_table,
        bins: cfg.bins,
        epsilon,
        sample_count: cfg.sample_count,
        degenerate,
    })
}

/// Linear-interpolated quantile `q` of `values`.
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Sum of the bin scores of every gene.
pub fn genome_quality(genes: &[f64], tables: &QualityTables) -> f64 {
    genes
        .iter()
        .zip(&tables.q_table)
        .map(|(&g, row)| row[tables.bin_of(g)])
        .sum()
}
