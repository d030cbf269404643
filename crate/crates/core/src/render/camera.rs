use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::Dual;
use crate::error::{Error, Result};

pub const DEFAULT_FOV_Y: f64 = PI / 4.0;

/// Orbit camera looking at `target`. Right handed, Y up; azimuth 0 and
/// elevation 0 put the eye on the +z side of the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub target: [f64; 3],
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

/// Order of the differentiable camera parameters in gradients.
pub const CAMERA_PARAMS: [&str; 4] = ["azimuth", "elevation", "distance", "fov_y"];

/// Distance along the view axis below which points are clipped.
const NEAR: f64 = 1e-4;

impl Camera {
    pub fn new(azimuth: f64, elevation: f64, distance: f64, fov_y: f64, resolution: u32) -> Result<Self> {
        let cam = Self {
            azimuth,
            elevation,
            distance,
            target: [0.0; 3],
            fov_y,
            width: resolution,
            height: resolution,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_target(mut self, target: [f64; 3]) -> Self {
        self.target = target;
        self
    }

    pub fn with_resolution(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::Camera(format!("distance {} must be positive", self.distance)));
        }
        if !(self.fov_y > 0.0 && self.fov_y < PI) {
            return Err(Error::Camera(format!("fov_y {} outside (0, pi)", self.fov_y)));
        }
        if !(self.elevation.abs() < PI / 2.0) {
            return Err(Error::Camera(format!("elevation {} outside (-pi/2, pi/2)", self.elevation)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Camera("resolution must be nonzero".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> [f64; 4] {
        [self.azimuth, self.elevation, self.distance, self.fov_y]
    }

    pub fn with_params(&self, p: [f64; 4]) -> Self {
        Self {
            azimuth: p[0],
            elevation: p[1],
            distance: p[2],
            fov_y: p[3],
            ..self.clone()
        }
    }

    fn direction(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [ce * sa, se, ce * ca]
    }

    pub fn eye(&self) -> [f64; 3] {
        let d = self.direction();
        [
            self.target[0] + self.distance * d[0],
            self.target[1] + self.distance * d[1],
            self.target[2] + self.distance * d[2],
        ]
    }

    /// Projects a world point to continuous pixel coordinates (x right, y
    /// down). `None` when the point is behind the near plane.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        let eye = self.eye();
        let q = [p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]];
        let right = [ca, 0.0, -sa];
        let up = [-sa * se, ce, -ca * se];
        let fwd = [-ce * sa, -se, -ce * ca];
        let xc = q[0] * right[0] + q[2] * right[2];
        let yc = q[0] * up[0] + q[1] * up[1] + q[2] * up[2];
        let zc = q[0] * fwd[0] + q[1] * fwd[1] + q[2] * fwd[2];
        if zc <= NEAR {
            return None;
        }
        let t = (0.5 * self.fov_y).tan();
        let aspect = self.width as f64 / self.height as f64;
        let nx = xc / (zc * t * aspect);
        let ny = yc / (zc * t);
        Some([
            (nx + 1.0) * 0.5 * self.width as f64,
            (1.0 - ny) * 0.5 * self.height as f64,
        ])
    }

    /// Pixel coordinates and their derivatives with respect to
    /// `(px, py, pz, azimuth, elevation, distance, fov_y)`.
    pub fn project_with_gradient(&self, p: [f64; 3]) -> Option<([f64; 2], [[f64; 7]; 2])> {
        let var = |v: f64, i: usize| Dual::variable(v, i, 7);
        let (px, py, pz) = (var(p[0], 0), var(p[1], 1), var(p[2], 2));
        let (az, el, dist, fov) = (
            var(self.azimuth, 3),
            var(self.elevation, 4),
            var(self.distance, 5),
            var(self.fov_y, 6),
        );
        let (sa, ca) = (az.sin(), az.cos());
        let (se, ce) = (el.sin(), el.cos());
        let dir = [&ce * &sa, se.clone(), &ce * &ca];
        let q = [
            &px - &(&dist * &dir[0]).offset(self.target[0]),
            &py - &(&dist * &dir[1]).offset(self.target[1]),
            &pz - &(&dist * &dir[2]).offset(self.target[2]),
        ];
        let xc = &q[0] * &ca - &q[2] * &sa;
        let yc = -(&q[0] * &(&sa * &se)) + &q[1] * &ce - &q[2] * &(&ca * &se);
        let zc = -(&q[0] * &dir[0]) - &q[1] * &dir[1] - &q[2] * &dir[2];
        if zc.value() <= NEAR {
            return None;
        }
        let t = fov.scale(0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let denom = &zc * &t;
        let sx = (&xc / &denom.scale(aspect)).offset(1.0).scale(0.5 * self.width as f64);
        let sy = (-(&yc / &denom)).offset(1.0).scale(0.5 * self.height as f64);
        let grab = |d: &Dual| {
            let mut g = [0.0; 7];
            for (k, slot) in g.iter_mut().enumerate() {
                *slot = d.partial(k);
            }
            g
        };
        Some(([sx.value(), sy.value()], [grab(&sx), grab(&sy)]))
    }

    /// Unit view ray through a pixel position, from the eye.
    pub fn ray(&self, pixel: [f64; 2]) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        let t = (0.5 * self.fov_y).tan();
        let aspect = self.width as f64 / self.height as f64;
        let nx = 2.0 * pixel[0] / self.width as f64 - 1.0;
        let ny = 1.0 - 2.0 * pixel[1] / self.height as f64;
        let (xc, yc) = (nx * t * aspect, ny * t);
        let right = [ca, 0.0, -sa];
        let up = [-sa * se, ce, -ca * se];
        let fwd = [-ce * sa, -se, -ce * ca];
        let d: Vec<f64> = (0..3).map(|k| fwd[k] + xc * right[k] + yc * up[k]).collect();
        let l = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / l, d[1] / l, d[2] / l]
    }
}
