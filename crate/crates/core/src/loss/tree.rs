use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{TreeSkeleton, TriangleMesh};

/// Global tree measurements that regularize the stripe similarity. Absent
/// values do not take part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeCharacteristics {
    /// Vertices of the branch graph.
    pub vertex_count: Option<f64>,
    pub height: Option<f64>,
    pub width: Option<f64>,
    /// Branches per unit of trunk length.
    pub branch_density: Option<f64>,
    /// Leaves per unit of terminal branch length.
    pub leaf_density: Option<f64>,
    pub leaf_size: Option<f64>,
}

impl TreeCharacteristics {
    fn fields(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("vertex_count", self.vertex_count),
            ("height", self.height),
            ("width", self.width),
            ("branch_density", self.branch_density),
            ("leaf_density", self.leaf_density),
            ("leaf_size", self.leaf_size),
        ]
    }

    /// Every characteristic of a generated tree.
    pub fn measure(mesh: &TriangleMesh, skeleton: &TreeSkeleton) -> Self {
        let (height, width) = match mesh.bounds() {
            Some((lo, hi)) => (hi[1] - lo[1], (hi[0] - lo[0]).max(hi[2] - lo[2])),
            None => (0.0, 0.0),
        };
        let per = |n: f64, len: f64| if len > 0.0 { n / len } else { 0.0 };
        Self {
            vertex_count: Some(skeleton.node_count as f64),
            height: Some(height),
            width: Some(width),
            branch_density: Some(per(skeleton.branch_count as f64, skeleton.trunk_length)),
            leaf_density: Some(per(skeleton.leaf_count as f64, skeleton.terminal_length)),
            leaf_size: Some(skeleton.leaf_size),
        }
    }

    /// Keeps only the characteristics that are set in `active`.
    pub fn restricted_to(&self, active: &TreeCharacteristics) -> Self {
        let pick = |v: Option<f64>, a: Option<f64>| a.and(v);
        Self {
            vertex_count: pick(self.vertex_count, active.vertex_count),
            height: pick(self.height, active.height),
            width: pick(self.width, active.width),
            branch_density: pick(self.branch_density, active.branch_density),
            leaf_density: pick(self.leaf_density, active.leaf_density),
            leaf_size: pick(self.leaf_size, active.leaf_size),
        }
    }
}

/// `min(c, c_ref) / max(c, c_ref)`, in (0, 1].
pub fn characteristic_ratio(c: f64, reference: f64) -> f64 {
    c.min(reference) / c.max(reference)
}

/// Similarity times the agreement ratio of every characteristic set in the
/// reference. Larger is better.
pub fn regularized_tree_loss(
    tsim: f64,
    generated: &TreeCharacteristics,
    reference: &TreeCharacteristics,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&tsim) {
        return Err(Error::Domain {
            op: "regularized_tree_loss",
            detail: format!("similarity {tsim} outside [0, 1]"),
        });
    }
    let mut product = tsim;
    for ((name, r), (_, g)) in reference.fields().into_iter().zip(generated.fields()) {
        let Some(r) = r else { continue };
        let g = g.ok_or_else(|| Error::InvalidParameter {
            name: name.to_owned(),
            reason: "set in the reference but not measured on the model".into(),
        })?;
        for (who, v) in [("reference", r), ("model", g)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: name.to_owned(),
                    reason: format!("{who} value {v} must be positive"),
                });
            }
        }
        product *= characteristic_ratio(g, r);
    }
    Ok(product)
}
