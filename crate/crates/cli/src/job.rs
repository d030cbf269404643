use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use procrecon::generators::{load_presets_dir, lookup};
use procrecon::io::{write_obj, RgbImage};
use procrecon::loss::{colorize, semantic_from_color, SemanticMask, TreeCharacteristics};
use procrecon::optim::{EvalRecord, GAConfig, MemeticConfig, QualityTables};
use procrecon::params::{Preset, PresetFile};
use procrecon::pipeline::{
    default_stages, default_tree_stages, reconstruct_differentiable, reconstruct_tree_mask, ReconstructionConfig,
    ReconstructionResult, StageConfig,
};
use procrecon::render::{Camera, Rasterizer, SilhouetteMask};

/// Rows of history.csv are written every this many evaluations.
const HISTORY_STRIDE: usize = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ReferenceKind {
    #[default]
    Mask,
    Rgb,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Reference {
    path: PathBuf,
    #[serde(default, rename = "type")]
    kind: Option<ReferenceKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobConfig {
    generator: String,
    references: Vec<Reference>,
    /// Preset files to start from; built-in presets when absent.
    #[serde(default)]
    presets_dir: Option<PathBuf>,
    #[serde(default)]
    stages: Option<Vec<StageConfig>>,
    #[serde(default)]
    ga: GAConfig,
    #[serde(default)]
    memetic: Option<MemeticConfig>,
    #[serde(default)]
    characteristics: TreeCharacteristics,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default)]
    learning_rate: Option<f64>,
    /// One starting camera per reference.
    #[serde(default)]
    cameras: Option<Vec<Camera>>,
    /// Keep the starting field of view instead of optimizing it.
    #[serde(default)]
    fixed_fov: bool,
    /// Quality tables written by `collect-tables`.
    #[serde(default)]
    tables: Option<PathBuf>,
    #[serde(default)]
    rasterizer: Option<Rasterizer>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

enum References {
    Masks(Vec<SilhouetteMask>),
    Semantic(SemanticMask),
}

pub fn reconstruct(config_path: &Path) -> Result<()> {
    let text = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let job: JobConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let info = lookup(&job.generator)?;
    if job.references.is_empty() {
        bail!("{}: `references` is empty", config_path.display());
    }
    if job.stages.as_ref().is_some_and(|s| s.is_empty()) {
        bail!("{}: `stages` is empty", config_path.display());
    }

    let references = load_references(&job, base, info.differentiable)?;
    let presets = match &job.presets_dir {
        Some(dir) => {
            let dir = base.join(dir);
            let presets = load_presets_dir(&dir, &job.generator)?;
            if presets.is_empty() {
                bail!("{}: no preset files for `{}`", dir.display(), job.generator);
            }
            presets.into_iter().map(|p| p.vector).collect()
        }
        None => Vec::new(),
    };
    let defaults = ReconstructionConfig::default();
    let config = ReconstructionConfig {
        stages: job.stages.clone().unwrap_or_else(|| {
            if info.differentiable {
                default_stages()
            } else {
                default_tree_stages()
            }
        }),
        ga: GAConfig {
            rng_seed: job.seed,
            ..job.ga.clone()
        },
        memetic: job.memetic.clone().unwrap_or(defaults.memetic),
        adam_learning_rate: job.learning_rate.unwrap_or(defaults.adam_learning_rate),
        presets,
        cameras: job.cameras.clone(),
        fixed_fov: job.fixed_fov,
        tables: match &job.tables {
            Some(p) => Some(QualityTables::read(&base.join(p))?),
            None => None,
        },
        rasterizer: job.rasterizer.unwrap_or_default(),
    };

    let result = match &references {
        References::Masks(masks) => reconstruct_differentiable(&job.generator, masks, &config)?,
        References::Semantic(mask) => reconstruct_tree_mask(mask, &job.characteristics, &config)?,
    };
    let out = base.join(&job.out_dir);
    write_outputs(&out, &result)?;
    log::info!(
        "finished in {:.1}s after {} evaluations; outputs in {}",
        result.wall_time,
        result.history.len(),
        out.display()
    );
    Ok(())
}

fn load_references(job: &JobConfig, base: &Path, differentiable: bool) -> Result<References> {
    let default_kind = if differentiable { ReferenceKind::Mask } else { ReferenceKind::Rgb };
    let mut masks = Vec::new();
    let mut semantic = None;
    for r in &job.references {
        let path = base.join(&r.path);
        if !path.is_file() {
            bail!("reference image {} does not exist", path.display());
        }
        let kind = r.kind.unwrap_or(default_kind);
        if differentiable {
            let mask = match kind {
                ReferenceKind::Mask => SilhouetteMask::load_png(&path)?,
                ReferenceKind::Rgb => semantic_from_color(&RgbImage::load_png(&path)?).silhouette(),
            };
            masks.push(mask);
        } else {
            if semantic.is_some() {
                bail!("`{}` reconstructs from a single reference image", job.generator);
            }
            semantic = Some(match kind {
                ReferenceKind::Rgb => semantic_from_color(&RgbImage::load_png(&path)?),
                ReferenceKind::Mask => SemanticMask::load_png(&path)?,
            });
        }
    }
    Ok(match semantic {
        Some(s) => References::Semantic(s),
        None => References::Masks(masks),
    })
}

fn write_outputs(out: &Path, result: &ReconstructionResult) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_obj(&result.mesh, &out.join("result.obj"))?;

    let info = lookup(&result.generator)?;
    let params = Preset {
        name: "result".into(),
        generator_id: result.generator.clone(),
        vector: result.best_params.clone(),
        seed: (!info.differentiable).then_some(result.seed),
    };
    let file: PresetFile = params.to_file();
    file.write(&out.join("params.json"))?;

    let cameras = serde_json::to_string_pretty(&result.best_cameras)?;
    fs::write(out.join("cameras.json"), cameras).context("writing cameras.json")?;

    write_history(&out.join("history.csv"), &result.history, result.maximize)?;

    for (k, stage) in result.stages.iter().enumerate() {
        for (v, mask) in stage.masks.iter().enumerate() {
            mask.save_png(&out.join(format!("stage{k}_view{v}.png")))?;
        }
        if let Some(s) = &stage.semantic {
            colorize(s).save_png(&out.join(format!("stage{k}_semantic.png")))?;
        }
    }
    Ok(())
}

/// Every `HISTORY_STRIDE`-th evaluation plus the last one.
fn write_history(path: &Path, history: &[EvalRecord], maximize: bool) -> Result<()> {
    let mut text = String::new();
    text.push_str(if maximize {
        "evaluation,fitness,best_fitness\n"
    } else {
        "evaluation,loss,best_loss\n"
    });
    for (i, r) in history.iter().enumerate() {
        if (i + 1) % HISTORY_STRIDE == 0 || i + 1 == history.len() {
            text.push_str(&format!("{},{},{}\n", r.evaluation, r.value, r.best));
        }
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}
