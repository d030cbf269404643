//! Silhouette rendering: orbit camera, supersampled coverage rasterizer,
//! edge-sampling gradients and mask metrics.

mod backward;
mod camera;
mod mask;
mod metrics;
mod raster;

pub use backward::{render_backward, RenderGradients};
pub use camera::{Camera, CAMERA_PARAMS, DEFAULT_FOV_Y};
pub use mask::SilhouetteMask;
pub use metrics::{mse, silhouette_iou, uniform_viewpoints, DEFAULT_RESOLUTION, MAX_VIEW_ELEVATION};
pub use raster::{render_silhouette, Rasterizer};
