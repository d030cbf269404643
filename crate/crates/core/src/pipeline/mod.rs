//! End-to-end reconstruction: staged silhouette fitting for differentiable
//! generators, genetic search for trees, and the IoU evaluation protocol.

mod config;
mod differentiable;
mod evaluate;
mod genome;
mod tables;
mod tree;

pub use config::{
    default_stages, default_tree_stages, Method, ReconstructionConfig, ReconstructionResult, StageConfig, StageReport,
};
pub use differentiable::{reconstruct_differentiable, MAX_VIEWS};
pub use evaluate::{evaluate_iou, EVALUATION_DISTANCE, EVALUATION_RESOLUTION, EVALUATION_VIEWS};
pub use genome::{initial_cameras, CameraBounds, GenomeLayout, CAMERA_GENES, INITIAL_ELEVATION, SEED_SPAN};
pub use tables::collect_generator_tables;
pub use tree::{reconstruct_tree, reconstruct_tree_mask, TreeModel, TreeObjective};

/// Wall clock that reads zero where `std::time::Instant` is unavailable
/// (wasm32-unknown-unknown).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }
}

fn elapsed(clock: &Stopwatch) -> f64 {
    #[cfg(not(target_arch = "wasm32"))]
    return clock.start.elapsed().as_secs_f64();
    #[cfg(target_arch = "wasm32")]
    {
        let _ = clock;
        0.0
    }
}
