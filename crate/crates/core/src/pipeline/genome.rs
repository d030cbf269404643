use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::generators::{generate_mesh, lookup, LevelOfDetail, TriangleMesh};
use crate::params::{ParamSpace, ParameterVector};
use crate::render::{Camera, Rasterizer, SilhouetteMask, DEFAULT_FOV_Y};

pub const CAMERA_GENES: usize = 4;
/// Distinct stochastic seeds reachable through the seed gene.
pub const SEED_SPAN: u64 = 1000;

pub const INITIAL_ELEVATION: f64 = 15.0 * PI / 180.0;
const ELEVATION_REACH: f64 = 60.0 * PI / 180.0;
const ELEVATION_LIMIT: f64 = 80.0 * PI / 180.0;
const MIN_FOV: f64 = 15.0 * PI / 180.0;
const MAX_FOV: f64 = 75.0 * PI / 180.0;
/// Initial camera distance in bounding radii of the typical preset.
pub(crate) const DISTANCE_FACTOR: f64 = 2.5;

/// Search box for the four camera parameters of one view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraBounds {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl CameraBounds {
    /// A full turn of azimuth, +-60 degrees of elevation, half to one and a
    /// half times the distance and 15 to 75 degrees of field of view, all
    /// around `cam`.
    pub fn around(cam: &Camera) -> Self {
        let [az, el, dist, fov] = cam.params();
        Self {
            lo: [
                az - PI,
                (el - ELEVATION_REACH).max(-ELEVATION_LIMIT),
                0.5 * dist,
                MIN_FOV.min(fov),
            ],
            hi: [
                az + PI,
                (el + ELEVATION_REACH).min(ELEVATION_LIMIT),
                1.5 * dist,
                MAX_FOV.max(fov),
            ],
        }
    }

    /// Pins the field of view at `fov`.
    pub fn with_fov(mut self, fov: f64) -> Self {
        self.lo[3] = fov;
        self.hi[3] = fov;
        self
    }

    /// Zero-width ranges encode as 0.5.
    pub fn encode(&self, p: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| {
            let span = self.hi[i] - self.lo[i];
            if span > 0.0 {
                ((p[i] - self.lo[i]) / span).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
    }

    pub fn decode(&self, g: &[f64]) -> [f64; 4] {
        std::array::from_fn(|i| self.lo[i] + g[i] * (self.hi[i] - self.lo[i]))
    }

    pub fn span(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }
}

/// Genes of a reconstruction: generator genes, then four per camera, then
/// optionally one for the stochastic seed.
#[derive(Clone, Debug)]
pub struct GenomeLayout {
    pub space: ParamSpace,
    pub cameras: Vec<Camera>,
    pub bounds: Vec<CameraBounds>,
    pub seed_gene: bool,
}

impl GenomeLayout {
    pub fn new(space: ParamSpace, cameras: Vec<Camera>, seed_gene: bool) -> Self {
        let bounds = cameras.iter().map(CameraBounds::around).collect();
        Self {
            space,
            cameras,
            bounds,
            seed_gene,
        }
    }

    /// Keeps every camera's field of view at its starting value.
    pub fn fix_fov(mut self) -> Self {
        for (b, c) in self.bounds.iter_mut().zip(&self.cameras) {
            *b = b.with_fov(c.fov_y);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.space.len() + CAMERA_GENES * self.cameras.len() + self.seed_gene as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn camera_offset(&self) -> usize {
        self.space.len()
    }

    /// Discrete parameters and the seed are invisible to gradients.
    pub fn frozen(&self) -> Vec<bool> {
        let mut f = self.space.frozen_mask();
        f.resize(self.len(), false);
        for (v, b) in self.bounds.iter().enumerate() {
            for i in 0..CAMERA_GENES {
                f[self.camera_offset() + CAMERA_GENES * v + i] = b.span(i) == 0.0;
            }
        }
        if self.seed_gene {
            f[self.len() - 1] = true;
        }
        f
    }

    pub fn encode(&self, params: &ParameterVector, cameras: &[Camera], seed: u64) -> Vec<f64> {
        let mut g = params.to_genes();
        for (b, c) in self.bounds.iter().zip(cameras) {
            g.extend(b.encode(c.params()));
        }
        if self.seed_gene {
            g.push((seed % SEED_SPAN) as f64 / SEED_SPAN as f64);
        }
        g
    }

    /// Parameters, cameras rendered at `resolution`, and the seed.
    pub fn decode(&self, genes: &[f64], resolution: u32) -> Result<(ParameterVector, Vec<Camera>, u64)> {
        if genes.len() != self.len() {
            return Err(Error::Dimension(format!("{} genes, layout has {}", genes.len(), self.len())));
        }
        let k = self.camera_offset();
        let params = ParameterVector::from_genes(&genes[..k], &self.space)?;
        let cams = self
            .cameras
            .iter()
            .zip(&self.bounds)
            .enumerate()
            .map(|(v, (c, b))| {
                let g = &genes[k + CAMERA_GENES * v..k + CAMERA_GENES * (v + 1)];
                c.with_params(b.decode(g)).with_resolution(resolution, resolution)
            })
            .collect();
        let seed = if self.seed_gene {
            ((genes[self.len() - 1] * SEED_SPAN as f64) as u64).min(SEED_SPAN - 1)
        } else {
            0
        };
        Ok((params, cams, seed))
    }

    /// Chain rule from parameter and camera gradients to gene gradients.
    pub fn gene_gradient(&self, d_params: &[f64], d_cameras: &[[f64; 4]]) -> Vec<f64> {
        let mut g: Vec<f64> = self.space.iter().zip(d_params).map(|(s, d)| d * s.range()).collect();
        for (b, d) in self.bounds.iter().zip(d_cameras) {
            g.extend((0..CAMERA_GENES).map(|i| d[i] * b.span(i)));
        }
        g.resize(self.len(), 0.0);
        g
    }
}

/// Mean bounding-box center and mean bounding radius (about that center)
/// of the presets at the generator's base tier, with the meshes.
pub(crate) fn preset_framing(
    generator: &str,
    presets: &[ParameterVector],
) -> Result<([f64; 3], f64, Vec<TriangleMesh>)> {
    let info = lookup(generator)?;
    if presets.is_empty() {
        return Err(Error::Config(format!("no presets for `{generator}`")));
    }
    let lod = LevelOfDetail::new(info.base_lod);
    let meshes = presets
        .iter()
        .map(|p| generate_mesh(generator, p, lod, 0))
        .collect::<Result<Vec<_>>>()?;
    let mut center = [0.0; 3];
    for m in &meshes {
        let (lo, hi) = m.bounds().ok_or_else(|| Error::EmptyMesh(format!("a `{generator}` preset is empty")))?;
        for i in 0..3 {
            center[i] += 0.5 * (lo[i] + hi[i]) / meshes.len() as f64;
        }
    }
    let radius = meshes
        .iter()
        .map(|m| {
            m.positions
                .chunks_exact(3)
                .map(|p| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2)).sqrt())
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / meshes.len() as f64;
    Ok((center, radius, meshes))
}

/// Starting cameras: evenly spaced azimuths at 15 degrees elevation, aimed
/// at the mean center of the presets. The distance is 2.5 preset radii,
/// corrected by how much larger or smaller the reference silhouettes are
/// than the presets seen from there.
pub fn initial_cameras(
    generator: &str,
    presets: &[ParameterVector],
    refs: &[SilhouetteMask],
    rasterizer: &Rasterizer,
) -> Result<Vec<Camera>> {
    let info = lookup(generator)?;
    if presets.is_empty() || refs.is_empty() {
        return Err(Error::Config("camera initialization needs presets and references".into()));
    }
    let (center, radius, meshes) = preset_framing(generator, presets)?;
    const PROBE: u32 = 64;
    let probe = Camera::new(0.0, INITIAL_ELEVATION, DISTANCE_FACTOR * radius, DEFAULT_FOV_Y, PROBE)?.with_target(center);
    let mut preset_area = 0.0;
    for m in &meshes {
        let idx = m.indices_excluding(info.mask_excluded_parts);
        preset_area += rasterizer.render(&m.positions, &idx, &probe)?.area() / (PROBE * PROBE) as f64;
    }
    preset_area /= meshes.len() as f64;
    let ref_area = refs.iter().map(|r| r.area() / r.len() as f64).sum::<f64>() / refs.len() as f64;
    if !(ref_area > 0.0) {
        return Err(Error::EmptyReference("reference masks contain no object pixels".into()));
    }
    let factor = (preset_area / ref_area).sqrt().clamp(0.5, 2.0);
    let distance = DISTANCE_FACTOR * radius * factor;
    refs.iter()
        .enumerate()
        .map(|(k, r)| {
            let az = 2.0 * PI * k as f64 / refs.len() as f64;
            Camera::new(az, INITIAL_ELEVATION, distance, DEFAULT_FOV_Y, r.width())
                .map(|c| c.with_resolution(r.width(), r.height()).with_target(center))
        })
        .collect()
}
