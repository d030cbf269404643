use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use procrecon::generators::{generate_mesh, lookup, LevelOfDetail};
use procrecon::render::{render_silhouette, Camera, SilhouetteMask, DEFAULT_FOV_Y};

fn procrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_procrecon"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/presets")
}

/// Silhouette of the tea cup preset seen slightly from above.
fn dish_reference(dir: &Path) -> PathBuf {
    let preset = lookup("dish").unwrap().presets().into_iter().find(|p| p.name == "tea_cup").unwrap();
    let mesh = generate_mesh("dish", &preset.vector, LevelOfDetail::new(1), 0).unwrap();
    let (lo, hi) = mesh.bounds().unwrap();
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let cam = Camera::new(0.4, 0.3, 3.0, DEFAULT_FOV_Y, 64).unwrap().with_target(center);
    let mask = render_silhouette(&mesh.positions, &mesh.indices, &cam).unwrap();
    let path = dir.join("ref.png");
    mask.save_png(&path).unwrap();
    path
}

fn write_dish_job(dir: &Path, out: &str) -> PathBuf {
    dish_reference(dir);
    let config = serde_json::json!({
        "generator": "dish",
        "references": [{"path": "ref.png", "type": "mask"}],
        "presets_dir": presets_dir().join("dish"),
        "stages": [
            {"resolution": 64, "method": "memetic", "iterations": 120},
            {"resolution": 64, "method": "adam", "iterations": 3, "lod": 1}
        ],
        "ga": {"population_size": 8, "elite_carryover": 4, "mutation_candidates": 20},
        "seed": 7,
        "out_dir": out
    });
    let path = dir.join(format!("{out}.json"));
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn reconstruct_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_dish_job(dir.path(), "out");
    let o = procrecon(&["reconstruct", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let obj = fs::read_to_string(out.join("result.obj")).unwrap();
    assert!(obj.lines().any(|l| l == "g body"));
    for f in ["params.json", "cameras.json", "history.csv", "stage0_view0.png", "stage1_view0.png"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("evaluation,loss,best_loss"));
    let best: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(!best.is_empty());
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    let mask = SilhouetteMask::load_png(&out.join("stage1_view0.png")).unwrap();
    assert_eq!(mask.dims(), (64, 64));
}

#[test]
fn reconstruct_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_dish_job(dir.path(), "a");
    let b = write_dish_job(dir.path(), "b");
    assert!(procrecon(&["reconstruct", a.to_str().unwrap()]).status.success());
    assert!(procrecon(&["reconstruct", b.to_str().unwrap()]).status.success());
    let pa = fs::read(dir.path().join("a/params.json")).unwrap();
    let pb = fs::read(dir.path().join("b/params.json")).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn missing_reference_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    fs::write(&config, r#"{"generator": "dish", "references": [{"path": "nowhere.png"}]}"#).unwrap();
    let o = procrecon(&["reconstruct", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.png"), "{}", stderr(&o));
}

#[test]
fn empty_stage_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    dish_reference(dir.path());
    let config = dir.path().join("job.json");
    fs::write(&config, r#"{"generator": "dish", "references": [{"path": "ref.png"}], "stages": []}"#).unwrap();
    assert_eq!(procrecon(&["reconstruct", config.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn empty_reference_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    SilhouetteMask::zeros(64, 64).save_png(&dir.path().join("blank.png")).unwrap();
    let config = dir.path().join("job.json");
    fs::write(&config, r#"{"generator": "dish", "references": [{"path": "blank.png"}]}"#).unwrap();
    let o = procrecon(&["reconstruct", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn generate_mug_has_body_and_handle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mug.obj");
    let o = procrecon(&["generate", "dish", "mug", "--lod", "3", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let obj = fs::read_to_string(&out).unwrap();
    assert!(obj.lines().any(|l| l == "g body"));
    assert!(obj.lines().any(|l| l == "g handle"));
    assert!(obj.lines().filter(|l| l.starts_with("f ")).count() > 100);
}

#[test]
fn generate_reads_parameter_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("house.obj");
    let params = presets_dir().join("building/house.json");
    let o = procrecon(&["generate", "building", params.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().contains("\nf "));
}

#[test]
fn generate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.obj");
    let o = procrecon(&["generate", "dish", "mug", "--lod", "9", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"generator": "dish", "values": {"handle": 0.5}}"#).unwrap();
    let o = procrecon(&["generate", "dish", params.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("handle"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn evaluate_prints_iou() {
    let dir = tempfile::tempdir().unwrap();
    let mug = dir.path().join("mug.obj");
    let bowl = dir.path().join("bowl.obj");
    assert!(procrecon(&["generate", "dish", "mug", "-o", mug.to_str().unwrap()]).status.success());
    assert!(procrecon(&["generate", "dish", "bowl", "-o", bowl.to_str().unwrap()]).status.success());
    let args = ["--views", "8", "--resolution", "64"];

    let o = procrecon(&[&["evaluate", mug.to_str().unwrap(), mug.to_str().unwrap()][..], &args].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1.000");

    let o = procrecon(&[&["evaluate", mug.to_str().unwrap(), bowl.to_str().unwrap()][..], &args].concat());
    let iou: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!(iou > 0.0 && iou < 1.0);

    let missing = dir.path().join("missing.obj");
    let o = procrecon(&["evaluate", mug.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn collect_tables_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tables.json.in");
    fs::write(
        &config,
        r#"{"sample_count": 24, "objectives": 3, "bins": 4, "seed": 5, "resolution": 64, "out": "t.json"}"#,
    )
    .unwrap();
    let o = procrecon(&["collect-tables", "tree", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(dir.path().join("t.json")).unwrap();
    let tables: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let q = tables["q_table"].as_array().unwrap();
    assert_eq!(q.len(), lookup("tree").unwrap().space.len());
    assert!(q.iter().all(|row| row.as_array().unwrap().len() == 4));

    assert!(procrecon(&["collect-tables", "tree", config.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(dir.path().join("t.json")).unwrap(), first);

    fs::write(&config, r#"{"sample_count": 0}"#).unwrap();
    assert_eq!(procrecon(&["collect-tables", "tree", config.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn tree_job_reads_color_references() {
    use procrecon::loss::{colorize, render_semantic};
    use procrecon::render::Rasterizer;

    let dir = tempfile::tempdir().unwrap();
    let oak = lookup("tree").unwrap().presets().remove(0);
    let mesh = procrecon::generators::tree::generate(&oak.vector, 3).unwrap();
    let (lo, hi) = mesh.bounds().unwrap();
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let cam = Camera::new(0.0, 0.26, 2.5 * (hi[1] - lo[1]), DEFAULT_FOV_Y, 64).unwrap().with_target(center);
    let semantic = render_semantic(&Rasterizer::default(), &mesh, &cam).unwrap();
    colorize(&semantic).save_png(&dir.path().join("tree.png")).unwrap();
    let config = dir.path().join("job.json");
    fs::write(
        &config,
        r#"{
            "generator": "tree",
            "references": [{"path": "tree.png"}],
            "stages": [{"resolution": 64, "method": "tree_ga", "iterations": 200}],
            "ga": {"population_size": 8, "elite_carryover": 4, "tree_depth": 1, "mutation_candidates": 10},
            "characteristics": {"height": 4.0},
            "seed": 1
        }"#,
    )
    .unwrap();
    let o = procrecon(&["reconstruct", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("stage0_semantic.png").is_file());
    let params: serde_json::Value = serde_json::from_slice(&fs::read(out.join("params.json")).unwrap()).unwrap();
    assert!(params["seed"].is_u64());
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("evaluation,fitness,best_fitness\n"));
    let best: Vec<f64> = history.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
}
