use crate::error::Result;
use crate::generators::TriangleMesh;
use crate::render::{silhouette_iou, uniform_viewpoints, Rasterizer};

pub const EVALUATION_VIEWS: usize = 64;
pub const EVALUATION_RESOLUTION: u32 = 256;
/// Camera distance for unit-radius models; the bounding sphere fits the
/// default field of view with a small margin.
pub const EVALUATION_DISTANCE: f64 = 3.0;

/// Mean silhouette IoU over `views` viewpoints spread over the sphere, after
/// centering both meshes and scaling them to unit bounding radius.
pub fn evaluate_iou(a: &TriangleMesh, b: &TriangleMesh, views: usize, resolution: u32) -> Result<f64> {
    let a = a.normalized()?;
    let b = b.normalized()?;
    let cams: Vec<_> = uniform_viewpoints(views, EVALUATION_DISTANCE, [0.0; 3])?
        .into_iter()
        .map(|c| c.with_resolution(resolution, resolution))
        .collect();
    let raster = Rasterizer::default();
    let view = |c: &crate::render::Camera| -> Result<f64> {
        let ma = raster.render(&a.positions, &a.indices, c)?;
        let mb = raster.render(&b.positions, &b.indices, c)?;
        silhouette_iou(&ma, &mb, 0.5)
    };
    #[cfg(feature = "parallel")]
    let scores: Vec<Result<f64>> = {
        use rayon::prelude::*;
        cams.par_iter().map(view).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Vec<Result<f64>> = cams.iter().map(view).collect();
    let mut total = 0.0;
    for s in scores {
        total += s?;
    }
    Ok(total / views as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate_mesh, lookup, LevelOfDetail};

    fn mug() -> TriangleMesh {
        let p = lookup("dish").unwrap().presets().remove(0).vector;
        generate_mesh("dish", &p, LevelOfDetail::new(1), 0).unwrap()
    }

    #[test]
    fn self_and_similarity_invariance() {
        let m = mug();
        assert_eq!(evaluate_iou(&m, &m, 8, 64).unwrap(), 1.0);
        let moved = m.transformed(|p| [2.0 * p[0] + 5.0, 2.0 * p[1] - 1.0, 2.0 * p[2] + 0.5]);
        assert_eq!(evaluate_iou(&m, &moved, 8, 64).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_and_bounded() {
        let p = lookup("dish").unwrap().presets().remove(2).vector;
        let bowl = generate_mesh("dish", &p, LevelOfDetail::new(1), 0).unwrap();
        let ab = evaluate_iou(&mug(), &bowl, 8, 64).unwrap();
        let ba = evaluate_iou(&bowl, &mug(), 8, 64).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0 && ab < 1.0);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(evaluate_iou(&TriangleMesh::default(), &mug(), 4, 32).is_err());
    }
}
