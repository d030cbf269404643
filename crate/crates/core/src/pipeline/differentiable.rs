use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Method, ReconstructionConfig, ReconstructionResult, StageReport};
use super::genome::{initial_cameras, GenomeLayout};
use super::{elapsed, Stopwatch};
use crate::error::{Error, Result};
use crate::generators::{generate_mesh, lookup, GeneratorInfo, LevelOfDetail};
use crate::loss::{multiview_loss_with, render_views, LossSettings};
use crate::optim::{memetic_optimize, refine, AdamState, GAConfig, DifferentiableObjective, EvaluationLog, MemeticConfig, QualityTables};
use crate::params::ParameterVector;
use crate::render::{mse, Rasterizer, SilhouetteMask};

pub const MAX_VIEWS: usize = 16;

/// Silhouette loss of a genome at one stage's resolution and tier.
struct ViewObjective<'a> {
    info: &'static GeneratorInfo,
    layout: &'a GenomeLayout,
    refs: Vec<SilhouetteMask>,
    resolution: u32,
    lod: LevelOfDetail,
    rasterizer: Rasterizer,
    seed: u64,
}

impl ViewObjective<'_> {
    fn evaluate(&self, genes: &[f64], seed: u64) -> Result<(f64, Vec<f64>)> {
        let (params, cams, _) = self.layout.decode(genes, self.resolution)?;
        let settings = LossSettings {
            rasterizer: self.rasterizer,
            seed,
        };
        let out = multiview_loss_with(&settings, &params, &cams, &self.refs, self.info.id, self.lod)?;
        Ok((out.loss, self.layout.gene_gradient(&out.d_params, &out.d_cameras)))
    }

    fn loss_only(&self, genes: &[f64]) -> Result<f64> {
        let (params, cams, _) = self.layout.decode(genes, self.resolution)?;
        let mesh = generate_mesh(self.info.id, &params, self.lod, 0)?;
        let masks = render_views(&self.rasterizer, &mesh, self.info.mask_excluded_parts, &cams)?;
        let mut total = 0.0;
        for (m, r) in masks.iter().zip(&self.refs) {
            total += mse(m, r)?.0;
        }
        Ok(total / masks.len() as f64)
    }

    fn masks(&self, genes: &[f64]) -> Result<Vec<SilhouetteMask>> {
        let (params, cams, _) = self.layout.decode(genes, self.resolution)?;
        let mesh = generate_mesh(self.info.id, &params, self.lod, 0)?;
        render_views(&self.rasterizer, &mesh, self.info.mask_excluded_parts, &cams)
    }
}

impl DifferentiableObjective for ViewObjective<'_> {
    fn loss_with_grad(&self, genes: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(genes, self.seed)
            .unwrap_or_else(|_| (f64::INFINITY, vec![0.0; genes.len()]))
    }

    fn loss(&self, genes: &[f64]) -> f64 {
        self.loss_only(genes).unwrap_or(f64::INFINITY)
    }
}

pub(crate) fn check_references(refs: &[SilhouetteMask]) -> Result<()> {
    if refs.is_empty() || refs.len() > MAX_VIEWS {
        return Err(Error::Config(format!("{} reference views; 1 to {MAX_VIEWS} are supported", refs.len())));
    }
    for (k, r) in refs.iter().enumerate() {
        if r.width() != r.height() {
            return Err(Error::Dimension(format!("reference {k} is {}x{}; masks must be square", r.width(), r.height())));
        }
        if r.count_above(0.5) == 0 {
            return Err(Error::EmptyReference(format!("reference {k} has no object pixels")));
        }
    }
    Ok(())
}

pub(crate) fn stage_tables(config: &ReconstructionConfig, genes: usize) -> Result<QualityTables> {
    match &config.tables {
        None => Ok(QualityTables::neutral(genes, config.ga.bins)),
        Some(t) if t.gene_count() <= genes => {
            t.check()?;
            Ok(t.extended(genes))
        }
        Some(t) => Err(Error::Dimension(format!(
            "quality tables cover {} genes but the genome has {genes}",
            t.gene_count()
        ))),
    }
}

pub(crate) fn presets_for(info: &GeneratorInfo, config: &ReconstructionConfig) -> Result<Vec<ParameterVector>> {
    let presets: Vec<ParameterVector> = if config.presets.is_empty() {
        info.presets().into_iter().map(|p| p.vector).collect()
    } else {
        config.presets.clone()
    };
    if let Some(p) = presets.iter().find(|p| p.space() != &info.space) {
        return Err(Error::Validation(vec![format!(
            "a preset with {} values does not belong to `{}`",
            p.len(),
            info.id
        )]));
    }
    Ok(presets)
}

/// Fits generator parameters and cameras to silhouette masks, one per view,
/// following the stage schedule in `config`.
pub fn reconstruct_differentiable(
    generator: &str,
    refs: &[SilhouetteMask],
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    let clock = Stopwatch::start();
    let info = lookup(generator)?;
    if !info.differentiable {
        return Err(Error::NotDifferentiable(generator.to_owned()));
    }
    config.validate()?;
    check_references(refs)?;
    if let Some(s) = config.stages.iter().find(|s| s.method == Method::TreeGa) {
        return Err(Error::Config(format!(
            "stage method {:?} needs a stochastic generator, not `{generator}`",
            s.method
        )));
    }
    let presets = presets_for(info, config)?;
    let cameras = match &config.cameras {
        Some(c) if c.len() != refs.len() => {
            return Err(Error::Dimension(format!("{} camera hints for {} reference views", c.len(), refs.len())))
        }
        Some(c) => {
            for cam in c {
                cam.validate()?;
            }
            c.clone()
        }
        None => initial_cameras(generator, &presets, refs, &config.rasterizer)?,
    };
    let mut layout = GenomeLayout::new(info.space.clone(), cameras.clone(), false);
    if config.fixed_fov {
        layout = layout.fix_fov();
    }
    let frozen = layout.frozen();
    let tables = stage_tables(config, layout.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.ga.rng_seed);
    let mut log = EvaluationLog::new(false, None);
    let starts: Vec<Vec<f64>> = presets.iter().map(|p| layout.encode(p, &cameras, 0)).collect();
    let mut best: Option<Vec<f64>> = None;
    let mut stages = Vec::with_capacity(config.stages.len());

    for (index, stage) in config.stages.iter().enumerate() {
        let lod = stage.lod_for(index, info)?;
        let res = stage.resolution;
        let objective = ViewObjective {
            info,
            layout: &layout,
            refs: refs.iter().map(|r| r.resampled(res, res)).collect(),
            resolution: res,
            lod,
            rasterizer: config.rasterizer,
            seed: config.ga.rng_seed,
        };
        let before = log.count();
        let (start, genes, loss) = match stage.method {
            Method::Memetic => {
                let mut pool = Vec::with_capacity(starts.len() + 1);
                pool.extend(best.clone());
                pool.extend(starts.iter().cloned());
                let polish = 2 * config.memetic.refine_steps.max(1);
                let reserve = (discrete_moves(&layout).len() * (polish + 1)).min(stage.iterations / 10);
                let memetic = MemeticConfig {
                    budget: stage.iterations - reserve,
                    ..config.memetic.clone()
                };
                let start = best.as_ref().map(|b| {
                    let l = objective.loss(b);
                    log.record(l);
                    l
                });
                // the evaluation budget ends the search, not a generation count
                let ga = GAConfig {
                    generations: usize::MAX,
                    ..config.ga.clone()
                };
                let r = memetic_optimize(&objective, &pool, &frozen, &ga, &memetic, &tables, &mut rng, &mut log)?;
                let (genes, loss) = discrete_sweep(&objective, &layout, r.genes, r.loss, polish, reserve, config, &frozen, &mut log);
                (start, genes, loss)
            }
            Method::Adam => {
                let x0 = match &best {
                    Some(b) => b.clone(),
                    None => starts[0].clone(),
                };
                let prior = stages.last().map_or(f64::NAN, |s: &StageReport| s.best);
                adam_stage(&objective, x0, prior, stage.iterations, config, &frozen, &mut log)?
            }
            Method::TreeGa => unreachable!("rejected above"),
        };
        log::info!(
            "stage {} ({:?}, {res}px, tier {}): loss {loss:.6} after {} evaluations",
            index + 1,
            stage.method,
            lod.tier,
            log.count() - before
        );
        let masks = objective.masks(&genes)?;
        best = Some(genes);
        stages.push(StageReport {
            method: stage.method,
            resolution: res,
            lod,
            evaluations: log.count() - before,
            start,
            best: loss,
            masks,
            semantic: None,
        });
    }

    let genes = best.expect("at least one stage");
    let (best_params, mut best_cameras, _) = layout.decode(&genes, refs[0].width())?;
    for (c, r) in best_cameras.iter_mut().zip(refs) {
        *c = c.clone().with_resolution(r.width(), r.height());
    }
    let mesh = generate_mesh(generator, &best_params, LevelOfDetail::new(info.max_lod), 0)?;
    Ok(ReconstructionResult {
        generator: generator.to_owned(),
        best_params,
        best_cameras,
        seed: 0,
        stages,
        history: log.records,
        maximize: false,
        mesh,
        wall_time: elapsed(&clock),
    })
}

/// Every (gene, value) pair within two grid steps of the current value of
/// each discrete parameter, as (gene, grid-step offset).
fn discrete_moves(layout: &GenomeLayout) -> Vec<(usize, i64)> {
    let mut moves = Vec::new();
    for (i, spec) in layout.space.iter().enumerate() {
        if spec.is_discrete() {
            moves.extend([-2i64, -1, 1, 2].into_iter().map(|d| (i, d)));
        }
    }
    moves
}

/// Tries the neighbouring values of every discrete parameter of `genes`,
/// each followed by a short Adam polish, and keeps any that lower the loss.
/// The genetic search rarely flips a feature such as a handle once the
/// continuous genes have settled around its absence.
#[allow(clippy::too_many_arguments)]
fn discrete_sweep(
    objective: &ViewObjective<'_>,
    layout: &GenomeLayout,
    mut genes: Vec<f64>,
    mut loss: f64,
    steps: usize,
    budget: usize,
    config: &ReconstructionConfig,
    frozen: &[bool],
    log: &mut EvaluationLog,
) -> (Vec<f64>, f64) {
    let mut spent = 0;
    for (i, offset) in discrete_moves(layout) {
        let spec = &layout.space[i];
        let value = spec.from_gene(genes[i]) + offset as f64 * spec.step;
        if value < spec.min - 1e-9 || value > spec.max + 1e-9 {
            continue;
        }
        if spent + steps + 1 > budget || log.remaining() < steps + 1 {
            break;
        }
        let mut trial = genes.clone();
        trial[i] = spec.to_gene(spec.snap(value));
        let (polished, l, losses) = refine(objective, &trial, steps, frozen, config.memetic.learning_rate);
        spent += losses.len();
        for v in losses {
            log.record(v);
        }
        if l < loss {
            log::debug!("{} -> {} lowers the loss to {l:.6}", spec.name, spec.snap(value));
            genes = polished;
            loss = l;
        }
    }
    (genes, loss)
}

/// Adam from `x` for `steps` updates, keeping the best point evaluated. No
/// evaluation happens when `steps` is 0; `x` comes back with `prior`.
#[allow(clippy::too_many_arguments)]
fn adam_stage(
    objective: &ViewObjective<'_>,
    x: Vec<f64>,
    prior: f64,
    steps: usize,
    config: &ReconstructionConfig,
    frozen: &[bool],
    log: &mut EvaluationLog,
) -> Result<(Option<f64>, Vec<f64>, f64)> {
    if steps == 0 {
        return Ok((None, x, prior));
    }
    let mut state = AdamState::new(x.len(), config.adam_learning_rate);
    let mut x = x;
    let mut best = (x.clone(), f64::INFINITY);
    let mut start = None;
    for step in 0..=steps {
        let seed = objective.seed.wrapping_add(step as u64);
        let (loss, grad) = objective.evaluate(&x, seed)?;
        log.record(loss);
        start.get_or_insert(loss);
        if loss < best.1 {
            best = (x.clone(), loss);
        }
        if step < steps {
            state.step(&mut x, &grad, frozen);
        }
    }
    Ok((start, best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::Camera;

    #[test]
    fn discrete_moves_cover_only_discrete_genes() {
        let cam = Camera::new(0.0, 0.2, 3.0, 0.8, 32).unwrap();
        let dish = GenomeLayout::new(lookup("dish").unwrap().space.clone(), vec![cam.clone()], false);
        let handle = dish.space.index_of("handle").unwrap();
        assert_eq!(discrete_moves(&dish), vec![(handle, -2), (handle, -1), (handle, 1), (handle, 2)]);
        let building = GenomeLayout::new(lookup("building").unwrap().space.clone(), vec![cam], false);
        let moves = discrete_moves(&building);
        assert_eq!(moves.len(), 4 * 3);
        assert!(moves.iter().all(|&(i, _)| building.space[i].is_discrete()));
    }

    #[test]
    fn sweep_turns_on_a_visible_handle() {
        let info = lookup("dish").unwrap();
        let truth = info.presets().into_iter().find(|p| p.name == "mug").unwrap().vector;
        let cam = Camera::new(0.0, 0.3, 3.0, 0.8, 48).unwrap().with_target([0.0, 0.45, 0.0]);
        let mesh = generate_mesh("dish", &truth, LevelOfDetail::new(0), 0).unwrap();
        let refs = render_views(&Rasterizer::default(), &mesh, &[], std::slice::from_ref(&cam)).unwrap();
        let layout = GenomeLayout::new(info.space.clone(), vec![cam.clone()], false);
        let objective = ViewObjective {
            info,
            layout: &layout,
            refs,
            resolution: 48,
            lod: LevelOfDetail::new(0),
            rasterizer: Rasterizer::default(),
            seed: 0,
        };
        let bare = truth.with("handle", 0.0).unwrap();
        let genes = layout.encode(&bare, &[cam], 0);
        let loss = objective.loss(&genes);
        let mut log = EvaluationLog::new(false, None);
        let config = ReconstructionConfig::default();
        let (found, after) = discrete_sweep(&objective, &layout, genes, loss, 4, 100, &config, &layout.frozen(), &mut log);
        let (params, _, _) = layout.decode(&found, 48).unwrap();
        assert_eq!(params.get("handle"), Some(1.0));
        assert!(after < loss);
        assert!(log.count() <= 100);
    }
}
