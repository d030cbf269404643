use std::f64::consts::PI;

use super::camera::{Camera, DEFAULT_FOV_Y};
use super::mask::SilhouetteMask;
use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: u32 = 256;
pub const MAX_VIEW_ELEVATION: f64 = 80.0 * PI / 180.0;

/// Offset of the Fibonacci lattice that keeps the polar points apart.
const LATTICE_OFFSET: f64 = 1.33;

fn check_dims(a: &SilhouetteMask, b: &SilhouetteMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "mask sizes differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared difference and its gradient with respect to `rendered`.
pub fn mse(rendered: &SilhouetteMask, reference: &SilhouetteMask) -> Result<(f64, Vec<f64>)> {
    check_dims(rendered, reference)?;
    let n = rendered.len() as f64;
    let mut loss = 0.0;
    let grad = rendered
        .coverage()
        .iter()
        .zip(reference.coverage())
        .map(|(i, m)| {
            let d = i - m;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Intersection over union of the binarized masks; 1 when both are empty.
pub fn silhouette_iou(a: &SilhouetteMask, b: &SilhouetteMask, threshold: f64) -> Result<f64> {
    check_dims(a, b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.coverage().iter().zip(b.coverage()) {
        let (x, y) = (*x >= threshold, *y >= threshold);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// `n` cameras spread evenly over the sphere around `target`, elevation
/// limited to +-80 degrees. A single camera sits on the +z axis.
pub fn uniform_viewpoints(n: usize, distance: f64, target: [f64; 3]) -> Result<Vec<Camera>> {
    if n == 0 {
        return Err(Error::Camera("at least one viewpoint is required".into()));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let (azimuth, elevation) = if n == 1 {
                (0.0, 0.0)
            } else {
                let y = 1.0 - 2.0 * (i as f64 + LATTICE_OFFSET) / (n as f64 - 1.0 + 2.0 * LATTICE_OFFSET);
                let el = y.clamp(-1.0, 1.0).asin().clamp(-MAX_VIEW_ELEVATION, MAX_VIEW_ELEVATION);
                ((golden * i as f64).rem_euclid(2.0 * PI), el)
            };
            Camera::new(azimuth, elevation, distance, DEFAULT_FOV_Y, DEFAULT_RESOLUTION).map(|c| c.with_target(target))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half(width: u32, from: u32, to: u32) -> SilhouetteMask {
        SilhouetteMask::from_fn(width, 4, |x, _| if (from..to).contains(&x) { 1.0 } else { 0.0 })
    }

    #[test]
    fn mse_examples() {
        let ones = SilhouetteMask::from_fn(4, 4, |_, _| 1.0);
        let zeros = SilhouetteMask::zeros(4, 4);
        assert_eq!(mse(&ones, &ones).unwrap().0, 0.0);
        assert_eq!(mse(&ones, &zeros).unwrap().0, 1.0);
        assert_eq!(mse(&half(4, 0, 2), &zeros).unwrap().0, 0.5);
        let (_, g) = mse(&ones, &zeros).unwrap();
        assert!(g.iter().all(|&d| d == 2.0 / 16.0));
        assert!(mse(&ones, &SilhouetteMask::zeros(2, 2)).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = half(8, 0, 4);
        assert_eq!(silhouette_iou(&a, &a, 0.5).unwrap(), 1.0);
        assert_eq!(silhouette_iou(&a, &half(8, 4, 8), 0.5).unwrap(), 0.0);
        // half of A overlapped: |A and B| = 2, |A or B| = 6 columns
        let b = half(8, 2, 6);
        assert!((silhouette_iou(&a, &b, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let e = SilhouetteMask::zeros(3, 3);
        assert_eq!(silhouette_iou(&e, &e, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn single_view_on_z_axis() {
        let cams = uniform_viewpoints(1, 3.0, [0.0; 3]).unwrap();
        let e = cams[0].eye();
        assert!(e[0].abs() < 1e-12 && e[1].abs() < 1e-12 && (e[2] - 3.0).abs() < 1e-12);
        assert!(uniform_viewpoints(0, 3.0, [0.0; 3]).is_err());
    }

    #[test]
    fn sixty_four_views_are_spread() {
        let cams = uniform_viewpoints(64, 3.0, [0.0; 3]).unwrap();
        let dirs: Vec<[f64; 3]> = cams
            .iter()
            .map(|c| {
                let e = c.eye();
                [e[0] / 3.0, e[1] / 3.0, e[2] / 3.0]
            })
            .collect();
        let ideal = (4.0 * PI / 64.0).sqrt();
        let mut min = f64::MAX;
        for i in 0..64 {
            for j in i + 1..64 {
                let d: f64 = (0..3).map(|k| dirs[i][k] * dirs[j][k]).sum();
                min = min.min(d.clamp(-1.0, 1.0).acos());
            }
        }
        assert!(min >= 0.9 * ideal, "{min} < 0.9 * {ideal}");
        for c in &cams {
            assert!(c.elevation.abs() <= MAX_VIEW_ELEVATION + 1e-12);
        }
    }

    #[test]
    fn views_look_at_target() {
        let target = [0.3, -1.0, 2.0];
        for c in uniform_viewpoints(10, 4.0, target).unwrap() {
            let e = c.eye();
            let r = c.ray([c.width as f64 / 2.0, c.height as f64 / 2.0]);
            let to: Vec<f64> = (0..3).map(|k| target[k] - e[k]).collect();
            let along: f64 = (0..3).map(|k| to[k] * r[k]).sum();
            let miss: f64 = (0..3).map(|k| (to[k] - along * r[k]).powi(2)).sum::<f64>().sqrt();
            assert!(miss < 1e-6);
        }
    }

    fn mask_strategy() -> impl Strategy<Value = (SilhouetteMask, SilhouetteMask)> {
        (prop::collection::vec(0.0..=1.0f64, 36), prop::collection::vec(0.0..=1.0f64, 36)).prop_map(|(a, b)| {
            (SilhouetteMask::new(6, 6, a).unwrap(), SilhouetteMask::new(6, 6, b).unwrap())
        })
    }

    proptest! {
        #[test]
        fn mse_symmetric_nonnegative((a, b) in mask_strategy()) {
            let (ab, _) = mse(&a, &b).unwrap();
            let (ba, _) = mse(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn iou_bounded_symmetric((a, b) in mask_strategy()) {
            let ab = silhouette_iou(&a, &b, 0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, silhouette_iou(&b, &a, 0.5).unwrap());
            prop_assert_eq!(silhouette_iou(&a, &a, 0.5).unwrap(), 1.0);
        }
    }
}
