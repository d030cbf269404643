use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use procrecon::generators::{builtin_presets, generate_mesh, lookup, LevelOfDetail};
use procrecon::io::{read_obj, write_obj};
use procrecon::params::{Preset, PresetFile};
use procrecon::pipeline::{collect_generator_tables, evaluate_iou, EVALUATION_RESOLUTION, EVALUATION_VIEWS};

mod job;

#[derive(Parser)]
#[command(name = "procrecon", version, about = "Reconstruct procedural models from silhouette images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a reconstruction job described by a JSON config.
    Reconstruct { config: PathBuf },
    /// Write the mesh of a generator for a parameter file.
    Generate {
        generator: String,
        /// Parameter file, or the name of a built-in preset.
        params: String,
        #[arg(long, default_value_t = 0)]
        lod: u32,
        #[arg(short, long, default_value = "out.obj")]
        output: PathBuf,
    },
    /// Print the mean silhouette IoU of two OBJ meshes.
    Evaluate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = EVALUATION_VIEWS)]
        views: usize,
        #[arg(long, default_value_t = EVALUATION_RESOLUTION)]
        resolution: u32,
    },
    /// Collect mutation quality tables for a generator.
    CollectTables { generator: String, config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Reconstruct { config } => job::reconstruct(&config),
        Command::Generate {
            generator,
            params,
            lod,
            output,
        } => generate(&generator, &params, lod, &output),
        Command::Evaluate {
            a,
            b,
            views,
            resolution,
        } => evaluate(&a, &b, views, resolution),
        Command::CollectTables { generator, config } => collect_tables(&generator, &config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 when the reference shows nothing to reconstruct, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let empty = e
        .chain()
        .any(|c| matches!(c.downcast_ref::<procrecon::Error>(), Some(procrecon::Error::EmptyReference(_))));
    if empty {
        2
    } else {
        1
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("PROCRECON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("PROCRECON_THREADS={value:?} is not a thread count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn load_preset(generator: &str, params: &str) -> Result<Preset> {
    let path = Path::new(params);
    if path.exists() {
        let file = PresetFile::read(path)?;
        if file.generator != generator {
            bail!("{}: parameters are for `{}`, not `{generator}`", path.display(), file.generator);
        }
        let info = lookup(generator)?;
        return Preset::from_file(&file, &info.space).with_context(|| path.display().to_string());
    }
    let presets = builtin_presets(generator)?;
    let names: Vec<&str> = presets.iter().map(|p| p.name.as_str()).collect();
    match presets.iter().find(|p| p.name == params) {
        Some(p) => Ok(p.clone()),
        None => bail!("{params}: no such file or built-in preset (known presets: {})", names.join(", ")),
    }
}

fn generate(generator: &str, params: &str, lod: u32, output: &Path) -> Result<()> {
    let preset = load_preset(generator, params)?;
    let mesh = generate_mesh(generator, &preset.vector, LevelOfDetail::new(lod), preset.seed.unwrap_or(0))?;
    write_obj(&mesh, output)?;
    log::info!("wrote {} triangles to {}", mesh.triangle_count(), output.display());
    Ok(())
}

fn evaluate(a: &Path, b: &Path, views: usize, resolution: u32) -> Result<()> {
    let ma = read_obj(a)?;
    let mb = read_obj(b)?;
    let iou = evaluate_iou(&ma, &mb, views, resolution)?;
    println!("{iou:.3}");
    Ok(())
}

#[derive(serde::Deserialize)]
struct TableJob {
    #[serde(flatten)]
    tables: procrecon::optim::TableConfig,
    #[serde(default)]
    seed: u64,
    /// Render size of the sampled objectives.
    #[serde(default = "default_table_resolution")]
    resolution: u32,
    /// Output file; `tables.json` next to the config when absent.
    #[serde(default)]
    out: Option<PathBuf>,
}

fn default_table_resolution() -> u32 {
    64
}

fn collect_tables(generator: &str, config: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let job: TableJob = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let out = base.join(job.out.unwrap_or_else(|| PathBuf::from("tables.json")));
    let tables = collect_generator_tables(generator, &job.tables, job.resolution, job.seed)?;
    if tables.degenerate {
        log::warn!("every sampled fitness was equal; the tables are neutral");
    }
    tables.write(&out)?;
    log::info!("wrote {}x{} tables to {}", tables.gene_count(), tables.bins, out.display());
    Ok(())
}
