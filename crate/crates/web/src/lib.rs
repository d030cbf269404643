//! Browser bindings: render a generator preset, compare two presets by
//! silhouette IoU, and fit one preset to another's silhouette step by step.

use wasm_bindgen::prelude::*;

use procrecon::generators::{generate_mesh, lookup, GeneratorInfo, LevelOfDetail, TriangleMesh};
use procrecon::loss::{multiview_loss, render_views};
use procrecon::optim::{adam_step, AdamState};
use procrecon::params::ParameterVector;
use procrecon::pipeline::evaluate_iou;
use procrecon::render::{Camera, SilhouetteMask, DEFAULT_FOV_Y};

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn preset(info: &GeneratorInfo, name: &str) -> Result<ParameterVector, JsError> {
    info.presets()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.vector)
        .ok_or_else(|| js(format!("`{}` has no preset named `{name}`", info.id)))
}

fn mesh(info: &GeneratorInfo, params: &ParameterVector) -> Result<TriangleMesh, JsError> {
    generate_mesh(info.id, params, LevelOfDetail::new(info.base_lod), 0).map_err(js)
}

/// Camera looking at the middle of `mesh` from far enough to see all of it.
fn framing(mesh: &TriangleMesh, azimuth: f64, elevation: f64, size: u32) -> Result<Camera, JsError> {
    let (lo, hi) = mesh.bounds().ok_or_else(|| js("the model is empty"))?;
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let radius = 0.5 * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
    Ok(Camera::new(azimuth, elevation, 2.5 * radius, DEFAULT_FOV_Y, size)
        .map_err(js)?
        .with_target(center))
}

fn silhouette_of(info: &GeneratorInfo, params: &ParameterVector, cam: &Camera) -> Result<SilhouetteMask, JsError> {
    let m = mesh(info, params)?;
    let mut views = render_views(&Default::default(), &m, info.mask_excluded_parts, std::slice::from_ref(cam)).map_err(js)?;
    Ok(views.remove(0))
}

/// Grayscale coverage as RGBA bytes for `ImageData`.
fn grayscale(mask: &SilhouetteMask) -> Vec<u8> {
    mask.coverage()
        .iter()
        .flat_map(|&c| {
            let v = (255.0 * (1.0 - c)).round() as u8;
            [v, v, v, 255]
        })
        .collect()
}

/// Names of the built-in presets of `generator` as a JSON array.
#[wasm_bindgen]
pub fn preset_names(generator: &str) -> Result<String, JsError> {
    let info = lookup(generator).map_err(js)?;
    let names: Vec<String> = info.presets().into_iter().map(|p| p.name).collect();
    serde_json::to_string(&names).map_err(js)
}

/// RGBA pixels of a preset's silhouette, `size` pixels square.
#[wasm_bindgen]
pub fn render_preset(generator: &str, name: &str, azimuth: f64, elevation: f64, size: u32) -> Result<Vec<u8>, JsError> {
    let info = lookup(generator).map_err(js)?;
    let params = preset(info, name)?;
    let cam = framing(&mesh(info, &params)?, azimuth, elevation, size)?;
    Ok(grayscale(&silhouette_of(info, &params, &cam)?))
}

/// Mean silhouette IoU of two presets over `views` directions.
#[wasm_bindgen]
pub fn preset_iou(generator: &str, a: &str, b: &str, views: usize) -> Result<f64, JsError> {
    let info = lookup(generator).map_err(js)?;
    let ma = mesh(info, &preset(info, a)?)?;
    let mb = mesh(info, &preset(info, b)?)?;
    evaluate_iou(&ma, &mb, views, 96).map_err(js)
}

/// Adam descent of one preset's continuous parameters toward the silhouette
/// of another, seen from a fixed camera.
#[wasm_bindgen]
pub struct Fitter {
    info: &'static GeneratorInfo,
    genes: Vec<f64>,
    frozen: Vec<bool>,
    adam: AdamState,
    camera: Camera,
    reference: SilhouetteMask,
    loss: f64,
    steps: usize,
}

#[wasm_bindgen]
impl Fitter {
    #[wasm_bindgen(constructor)]
    pub fn new(generator: &str, target: &str, start: &str, azimuth: f64, elevation: f64, size: u32) -> Result<Fitter, JsError> {
        let info = lookup(generator).map_err(js)?;
        if !info.differentiable {
            return Err(js(format!("`{generator}` cannot be fitted by gradient descent")));
        }
        let truth = preset(info, target)?;
        let camera = framing(&mesh(info, &truth)?, azimuth, elevation, size)?;
        let reference = silhouette_of(info, &truth, &camera)?;
        let start = preset(info, start)?;
        let mut fitter = Fitter {
            info,
            genes: start.to_genes(),
            frozen: info.space.frozen_mask(),
            adam: AdamState::new(info.space.len(), 0.01),
            camera,
            reference,
            loss: f64::NAN,
            steps: 0,
        };
        fitter.loss = fitter.gradient()?.0;
        Ok(fitter)
    }

    fn params(&self) -> Result<ParameterVector, JsError> {
        ParameterVector::from_genes(&self.genes, &self.info.space).map_err(js)
    }

    fn gradient(&self) -> Result<(f64, Vec<f64>), JsError> {
        let lod = LevelOfDetail::new(self.info.base_lod);
        let out = multiview_loss(
            &self.params()?,
            std::slice::from_ref(&self.camera),
            std::slice::from_ref(&self.reference),
            self.info.id,
            lod,
        )
        .map_err(js)?;
        let grad = out.d_params.iter().zip(self.info.space.iter()).map(|(d, s)| d * s.range()).collect();
        Ok((out.loss, grad))
    }

    /// Runs `n` update steps and returns the loss before the last one.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        for _ in 0..n {
            let (loss, grad) = self.gradient()?;
            let (adam, mut genes) = adam_step(&self.adam, &self.genes, &grad, &self.frozen);
            genes.iter_mut().for_each(|g| *g = g.clamp(0.0, 1.0));
            self.adam = adam;
            self.genes = genes;
            self.loss = loss;
            self.steps += 1;
        }
        Ok(self.loss)
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Reference in red, current model in blue, overlap in purple.
    pub fn overlay(&self) -> Result<Vec<u8>, JsError> {
        let current = silhouette_of(self.info, &self.params()?, &self.camera)?;
        Ok(self
            .reference
            .coverage()
            .iter()
            .zip(current.coverage())
            .flat_map(|(&r, &c)| {
                let shade = |x: f64| (255.0 * (1.0 - 0.6 * x)).round() as u8;
                [shade(c), shade(r.max(c)), shade(r), 255]
            })
            .collect())
    }

    /// Current parameter values by name, as JSON.
    pub fn params_json(&self) -> Result<String, JsError> {
        serde_json::to_string_pretty(&self.params()?.named()).map_err(js)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitter_lowers_the_loss() {
        let mut f = Fitter::new("dish", "mug", "tea_cup", 0.5, 0.3, 48).unwrap();
        let start = f.loss();
        f.step(15).unwrap();
        f.step(1).unwrap();
        assert!(f.loss() < start, "{} !< {start}", f.loss());
        assert_eq!(f.steps(), 16);
        assert_eq!(f.overlay().unwrap().len(), 48 * 48 * 4);
    }

    #[test]
    fn presets_render_and_compare() {
        let names: Vec<String> = serde_json::from_str(&preset_names("building").unwrap()).unwrap();
        assert!(names.len() >= 4);
        let px = render_preset("building", &names[0], 0.3, 0.2, 32).unwrap();
        assert_eq!(px.len(), 32 * 32 * 4);
        assert!(px.chunks(4).any(|p| p[0] < 128));
        assert_eq!(preset_iou("dish", "mug", "mug", 4).unwrap(), 1.0);
    }
}
