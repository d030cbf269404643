use crate::error::{Error, Result};
use crate::generators::{generate_differentiable, lookup, LevelOfDetail, TriangleMesh};
use crate::params::ParameterVector;
use crate::render::{mse, Camera, Rasterizer, SilhouetteMask};

/// Loss over all views with gradients for the generator parameters and
/// every camera.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiviewLoss {
    pub loss: f64,
    /// Gradient per parameter value; zero at discrete parameters.
    pub d_params: Vec<f64>,
    pub d_cameras: Vec<[f64; 4]>,
    pub per_view: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSettings {
    pub rasterizer: Rasterizer,
    pub seed: u64,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            rasterizer: Rasterizer::default(),
            seed: 0,
        }
    }
}

/// Mean MSE between the generator's silhouettes and the reference masks.
pub fn multiview_loss(
    params: &ParameterVector,
    cams: &[Camera],
    refs: &[SilhouetteMask],
    generator: &str,
    lod: LevelOfDetail,
) -> Result<MultiviewLoss> {
    multiview_loss_with(&LossSettings::default(), params, cams, refs, generator, lod)
}

pub fn multiview_loss_with(
    settings: &LossSettings,
    params: &ParameterVector,
    cams: &[Camera],
    refs: &[SilhouetteMask],
    generator: &str,
    lod: LevelOfDetail,
) -> Result<MultiviewLoss> {
    let info = lookup(generator)?;
    if !info.differentiable {
        return Err(Error::NotDifferentiable(format!(
            "`{generator}` has no Jacobian; reconstruct it with the genetic tree search"
        )));
    }
    check_views(cams, refs)?;
    let (mesh, jac) = generate_differentiable(generator, params, lod)?;
    let indices = mesh.indices_excluding(info.mask_excluded_parts);

    let view = |k: usize| -> Result<(f64, Vec<f64>, [f64; 4])> {
        let cam = &cams[k];
        let rendered = settings.rasterizer.render(&mesh.positions, &indices, cam)?;
        let (loss, d_pixels) = mse(&rendered, &refs[k])?;
        let g = settings.rasterizer.backward(&mesh.positions, &indices, cam, &d_pixels, settings.seed)?;
        Ok((loss, g.d_pos, g.d_camera))
    };
    #[cfg(feature = "parallel")]
    let views: Vec<Result<(f64, Vec<f64>, [f64; 4])>> = {
        use rayon::prelude::*;
        (0..cams.len()).into_par_iter().map(view).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let views: Vec<Result<(f64, Vec<f64>, [f64; 4])>> = (0..cams.len()).map(view).collect();

    let n = cams.len() as f64;
    let mut d_pos = vec![0.0; mesh.positions.len()];
    let mut out = MultiviewLoss {
        loss: 0.0,
        d_params: Vec::new(),
        d_cameras: Vec::with_capacity(cams.len()),
        per_view: Vec::with_capacity(cams.len()),
    };
    for v in views {
        let (loss, dp, dc) = v?;
        out.loss += loss / n;
        out.per_view.push(loss);
        for (a, b) in d_pos.iter_mut().zip(&dp) {
            *a += b / n;
        }
        out.d_cameras.push(dc.map(|x| x / n));
    }
    out.d_params = jac.transpose_mul(&d_pos);
    Ok(out)
}

/// Renders the mask-visible parts of `mesh` from each camera.
pub fn render_views(
    rasterizer: &Rasterizer,
    mesh: &TriangleMesh,
    excluded: &[&str],
    cams: &[Camera],
) -> Result<Vec<SilhouetteMask>> {
    let indices = mesh.indices_excluding(excluded);
    cams.iter().map(|c| rasterizer.render(&mesh.positions, &indices, c)).collect()
}

fn check_views(cams: &[Camera], refs: &[SilhouetteMask]) -> Result<()> {
    if cams.is_empty() || cams.len() != refs.len() {
        return Err(Error::Dimension(format!(
            "{} cameras for {} reference masks",
            cams.len(),
            refs.len()
        )));
    }
    for (k, (c, r)) in cams.iter().zip(refs).enumerate() {
        if (c.width, c.height) != r.dims() {
            return Err(Error::Dimension(format!(
                "view {k}: camera is {}x{} but the reference is {}x{}",
                c.width,
                c.height,
                r.width(),
                r.height()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::dish;

    fn setup(res: u32) -> (ParameterVector, Vec<Camera>) {
        let p = lookup("dish").unwrap().presets().remove(0).vector;
        let cam = Camera::new(0.5, 0.3, 3.5, 0.8, res).unwrap().with_target([0.0, 0.5, 0.0]);
        (p, vec![cam])
    }

    #[test]
    fn zero_at_own_render() {
        let (p, cams) = setup(64);
        let (mesh, _) = dish::generate(&p, LevelOfDetail::new(0)).unwrap();
        let refs = render_views(&Rasterizer::default(), &mesh, &[], &cams).unwrap();
        let out = multiview_loss(&p, &cams, &refs, "dish", LevelOfDetail::new(0)).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.d_params.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_views_match_single() {
        let (p, cams) = setup(48);
        let other = p.with("radius_3", 0.9).unwrap();
        let (mesh, _) = dish::generate(&other, LevelOfDetail::new(0)).unwrap();
        let refs = render_views(&Rasterizer::default(), &mesh, &[], &cams).unwrap();
        let one = multiview_loss(&p, &cams, &refs, "dish", LevelOfDetail::new(0)).unwrap();
        let cams2 = vec![cams[0].clone(), cams[0].clone()];
        let refs2 = vec![refs[0].clone(), refs[0].clone()];
        let settings = LossSettings::default();
        let two = multiview_loss_with(&settings, &p, &cams2, &refs2, "dish", LevelOfDetail::new(0)).unwrap();
        assert!((one.loss - two.loss).abs() < 1e-15);
        assert_eq!(one.d_params, two.d_params);
    }

    #[test]
    fn tree_is_rejected() {
        let p = crate::generators::tree::space().midpoint();
        let (_, cams) = setup(16);
        let refs = vec![SilhouetteMask::zeros(16, 16)];
        assert!(matches!(
            multiview_loss(&p, &cams, &refs, "tree", LevelOfDetail::new(0)),
            Err(Error::NotDifferentiable(_))
        ));
    }

    #[test]
    fn view_count_mismatch() {
        let (p, cams) = setup(16);
        assert!(multiview_loss(&p, &cams, &[], "dish", LevelOfDetail::new(0)).is_err());
        let refs = vec![SilhouetteMask::zeros(8, 8)];
        assert!(multiview_loss(&p, &cams, &refs, "dish", LevelOfDetail::new(0)).is_err());
    }
}
