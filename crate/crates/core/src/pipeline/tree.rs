use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Method, ReconstructionConfig, ReconstructionResult, StageReport};
use super::differentiable::{presets_for, stage_tables};
use super::genome::{initial_cameras, GenomeLayout};
use super::{elapsed, Stopwatch};
use crate::error::{Error, Result};
use crate::generators::{lookup, tree, LevelOfDetail, TreeSkeleton, TriangleMesh};
use crate::io::RgbImage;
use crate::loss::{
    regularized_tree_loss, render_semantic, semantic_from_color, stripe_decompose, tree_similarity, SemanticMask,
    StripeStats, TreeCharacteristics, DEFAULT_STRIPES,
};
use crate::optim::{generations_for_budget, tree_structured_ga, EvaluationLog, GAConfig};
use crate::params::ParameterVector;
use crate::render::{Camera, Rasterizer};

/// Everything needed to score one tree genome against a reference.
pub struct TreeObjective {
    pub layout: GenomeLayout,
    pub reference: StripeStats,
    pub characteristics: TreeCharacteristics,
    pub rasterizer: Rasterizer,
    pub resolution: u32,
}

pub struct TreeModel {
    pub params: ParameterVector,
    pub camera: Camera,
    pub seed: u64,
    pub mesh: TriangleMesh,
    pub skeleton: TreeSkeleton,
}

impl TreeObjective {
    pub fn model(&self, genes: &[f64]) -> Result<TreeModel> {
        let (params, cams, seed) = self.layout.decode(genes, self.resolution)?;
        let (mesh, skeleton) = tree::generate_with_skeleton(&params, seed)?;
        Ok(TreeModel {
            params,
            camera: cams.into_iter().next().expect("one view"),
            seed,
            mesh,
            skeleton,
        })
    }

    pub fn render(&self, model: &TreeModel) -> Result<SemanticMask> {
        render_semantic(&self.rasterizer, &model.mesh, &model.camera)
    }

    /// Stripe similarity times the characteristic agreement, in [0, 1].
    pub fn fitness(&self, genes: &[f64]) -> Result<f64> {
        let model = self.model(genes)?;
        let mask = self.render(&model)?;
        let tsim = tree_similarity(&self.reference, &stripe_decompose(&mask, DEFAULT_STRIPES)?)?;
        let measured = TreeCharacteristics::measure(&model.mesh, &model.skeleton).restricted_to(&self.characteristics);
        regularized_tree_loss(tsim, &measured, &self.characteristics)
    }
}

/// Fits the stochastic tree generator (including its seed) and one camera to
/// a color-coded reference image with the tree-structured genetic search.
pub fn reconstruct_tree(
    reference: &RgbImage,
    characteristics: &TreeCharacteristics,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    reconstruct_tree_mask(&semantic_from_color(reference), characteristics, config)
}

/// Same as [`reconstruct_tree`] for an already classified reference.
pub fn reconstruct_tree_mask(
    reference: &SemanticMask,
    characteristics: &TreeCharacteristics,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    let clock = Stopwatch::start();
    let info = lookup("tree")?;
    config.validate()?;
    if reference.object_count() == 0 {
        return Err(Error::EmptyReference("the reference image shows no tree pixels".into()));
    }
    if let Some(s) = config.stages.iter().find(|s| s.method != Method::TreeGa) {
        return Err(Error::Config(format!("tree reconstruction runs genetic stages only, not {:?}", s.method)));
    }
    let presets = presets_for(info, config)?;
    let silhouette = reference.silhouette();
    let camera = match &config.cameras {
        Some(c) if c.len() != 1 => {
            return Err(Error::Dimension(format!("{} camera hints for one reference view", c.len())))
        }
        Some(c) => {
            c[0].validate()?;
            c[0].clone()
        }
        None => initial_cameras("tree", &presets, std::slice::from_ref(&silhouette), &config.rasterizer)?.remove(0),
    };
    let layout = GenomeLayout::new(info.space.clone(), vec![camera], true);
    let tables = stage_tables(config, layout.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.ga.rng_seed);
    let mut history = EvaluationLog::new(true, None);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut stages = Vec::new();

    for stage in &config.stages {
        let res = stage.resolution;
        let objective = TreeObjective {
            layout: layout.clone(),
            reference: stripe_decompose(&reference.resampled(res, res), DEFAULT_STRIPES)?,
            characteristics: *characteristics,
            rasterizer: config.rasterizer,
            resolution: res,
        };
        let ga = GAConfig {
            generations: generations_for_budget(&config.ga, stage.iterations),
            ..config.ga.clone()
        };
        let mut log = EvaluationLog::new(true, Some(stage.iterations));
        let fitness = |g: &[f64]| objective.fitness(g).unwrap_or(0.0);
        let top = tree_structured_ga(&fitness, layout.len(), &ga, &tables, &mut rng, &mut log);
        for r in &log.records {
            history.record(r.value);
        }
        let winner = &top[0];
        let f = winner.fitness.unwrap_or(0.0);
        log::info!("tree stage at {res}px: fitness {f:.4} after {} evaluations", log.count());
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((winner.genes.clone(), f));
        }
        let (genes, f) = best.clone().expect("set above");
        let semantic = objective.render(&objective.model(&genes)?)?;
        stages.push(StageReport {
            method: Method::TreeGa,
            resolution: res,
            lod: LevelOfDetail::new(0),
            evaluations: log.count(),
            start: None,
            best: f,
            masks: vec![semantic.silhouette()],
            semantic: Some(semantic),
        });
    }

    let (genes, _) = best.expect("at least one stage");
    let (best_params, cams, seed) = layout.decode(&genes, reference.width())?;
    let best_cameras = cams
        .into_iter()
        .map(|c| c.with_resolution(reference.width(), reference.height()))
        .collect();
    let mesh = tree::generate(&best_params, seed)?;
    Ok(ReconstructionResult {
        generator: "tree".into(),
        best_params,
        best_cameras,
        seed,
        stages,
        history: history.records,
        maximize: true,
        mesh,
        wall_time: elapsed(&clock),
    })
}
