//! Objectives: the multi-view silhouette loss with gradients for
//! differentiable generators, and the stripe-based tree similarity.

mod multiview;
mod semantic;
mod stripes;
mod tree;

pub use multiview::{multiview_loss, multiview_loss_with, render_views, LossSettings, MultiviewLoss};
pub use semantic::{
    classify_color, colorize, hsv, render_semantic, semantic_from_color, semantic_from_color_with, ColorThresholds,
    SemanticClass, SemanticMask,
};
pub use stripes::{stripe_decompose, tree_similarity, Stripe, StripeKind, StripeStats, DEFAULT_STRIPES};
pub use tree::{characteristic_ratio, regularized_tree_loss, TreeCharacteristics};
