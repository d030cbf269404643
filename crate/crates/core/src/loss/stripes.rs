use serde::{Deserialize, Serialize};

use super::semantic::{SemanticClass, SemanticMask};
use crate::error::{Error, Result};

pub const DEFAULT_STRIPES: usize = 24;
/// Leaf share above which a column counts as dense crown.
const DENSE_FOLIAGE: f64 = 0.75;
/// Keeps the branch/leaf ratio finite for leafless or bare stripes.
const RATIO_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StripeKind {
    Empty,
    Trunk,
    Crown,
}

/// Column extents are half-open: `a..d` is the object, `b..c` the dense
/// crown.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stripe {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    /// Branch pixels over stripe area.
    pub branch: f64,
    /// Foliage pixels over stripe area.
    pub leaf: f64,
    pub kind: StripeKind,
}

impl Stripe {
    const EMPTY: Stripe = Stripe {
        a: 0,
        b: 0,
        c: 0,
        d: 0,
        branch: 0.0,
        leaf: 0.0,
        kind: StripeKind::Empty,
    };

    fn ratio(&self) -> f64 {
        (self.branch + RATIO_EPS) / (self.leaf + RATIO_EPS)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripeStats {
    pub width: u32,
    pub stripes: Vec<Stripe>,
}

impl StripeStats {
    pub fn stripe_count(&self) -> usize {
        self.stripes.len()
    }
}

pub fn stripe_decompose(mask: &SemanticMask, n_stripes: usize) -> Result<StripeStats> {
    if n_stripes == 0 {
        return Err(Error::Config("stripe count must be at least 1".into()));
    }
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut stripes = Vec::with_capacity(n_stripes);
    let mut object = vec![0usize; w];
    let mut foliage = vec![0usize; w];
    for s in 0..n_stripes {
        let (y0, y1) = (s * h / n_stripes, (s + 1) * h / n_stripes);
        object.iter_mut().for_each(|c| *c = 0);
        foliage.iter_mut().for_each(|c| *c = 0);
        let (mut branch_px, mut leaf_px) = (0usize, 0usize);
        for y in y0..y1 {
            for x in 0..w {
                match mask.get(x as u32, y as u32) {
                    SemanticClass::Background => continue,
                    SemanticClass::Branch => branch_px += 1,
                    SemanticClass::Foliage => {
                        leaf_px += 1;
                        foliage[x] += 1;
                    }
                }
                object[x] += 1;
            }
        }
        let Some(a) = object.iter().position(|&c| c > 0) else {
            stripes.push(Stripe::EMPTY);
            continue;
        };
        let d = object.iter().rposition(|&c| c > 0).expect("nonempty") + 1;

        // longest run of dense columns, the first one on ties
        let (mut best, mut run_start) = ((0, 0), None);
        for x in a..=d {
            let dense = x < d && object[x] > 0 && foliage[x] as f64 > DENSE_FOLIAGE * object[x] as f64;
            match (dense, run_start) {
                (true, None) => run_start = Some(x),
                (false, Some(s)) => {
                    if x - s > best.1 - best.0 {
                        best = (s, x);
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
        let (b, c) = if best.1 > best.0 { best } else { ((a + d) / 2, (a + d) / 2) };
        let area = ((y1 - y0) * w) as f64;
        let (branch, leaf) = (branch_px as f64 / area, leaf_px as f64 / area);
        stripes.push(Stripe {
            a: a as u32,
            b: b as u32,
            c: c as u32,
            d: d as u32,
            branch,
            leaf,
            kind: if leaf > branch { StripeKind::Crown } else { StripeKind::Trunk },
        });
    }
    Ok(StripeStats {
        width: mask.width(),
        stripes,
    })
}

/// Mean per-stripe agreement of crown borders, dense-crown borders and the
/// branch/leaf ratio; stripes empty in both inputs are skipped.
pub fn tree_similarity(reference: &StripeStats, generated: &StripeStats) -> Result<f64> {
    if reference.stripe_count() != generated.stripe_count() || reference.width != generated.width {
        return Err(Error::Dimension(format!(
            "stripe layouts differ: {} stripes over {} px vs {} over {} px",
            reference.stripe_count(),
            reference.width,
            generated.stripe_count(),
            generated.width
        )));
    }
    let width = reference.width.max(1) as f64;
    let (mut sum, mut count) = (0.0, 0usize);
    for (r, g) in reference.stripes.iter().zip(&generated.stripes) {
        if r.kind == StripeKind::Empty && g.kind == StripeKind::Empty {
            continue;
        }
        let diff = |p: u32, q: u32| (p as f64 - q as f64).abs();
        let offset = diff(r.a, g.a) + diff(r.b, g.b) + diff(r.c, g.c) + diff(r.d, g.d);
        let (rr, gr) = (r.ratio(), g.ratio());
        let mut s = (-offset / width).exp() * rr.min(gr) / rr.max(gr);
        if r.kind != g.kind {
            s *= 0.5;
        }
        sum += s;
        count += 1;
    }
    Ok(if count == 0 { 1.0 } else { sum / count as f64 })
}
