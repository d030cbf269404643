use super::camera::Camera;
use super::mask::SilhouetteMask;
use crate::error::{Error, Result};

/// Rows per work unit of the forward pass.
const BAND: usize = 16;

/// Hard silhouette rasterizer with supersampled coverage.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rasterizer {
    /// Coverage subsamples per pixel along each axis.
    pub samples_per_axis: u32,
    /// Backward-pass samples per pixel of projected edge length.
    pub edge_samples_per_pixel: f64,
}

impl Default for Rasterizer {
    fn default() -> Self {
        Self {
            samples_per_axis: 4,
            edge_samples_per_pixel: 4.0,
        }
    }
}

/// Screen-space triangle with its mesh triangle index and corners in mesh
/// order.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ScreenTri {
    pub index: usize,
    pub corners: [[f64; 2]; 3],
}

impl ScreenTri {
    fn edges(&self) -> [[f64; 3]; 3] {
        // edge functions oriented so the interior is nonnegative
        let [a, mut b, mut c] = self.corners;
        if area2(a, b, c) < 0.0 {
            std::mem::swap(&mut b, &mut c);
        }
        [edge_fn(a, b), edge_fn(b, c), edge_fn(c, a)]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.edges().iter().all(|e| e[0] * p[0] + e[1] * p[1] + e[2] >= 0.0)
    }

    pub fn bbox(&self) -> [f64; 4] {
        let [a, b, c] = self.corners;
        [
            a[0].min(b[0]).min(c[0]),
            a[1].min(b[1]).min(c[1]),
            a[0].max(b[0]).max(c[0]),
            a[1].max(b[1]).max(c[1]),
        ]
    }
}

pub(crate) fn area2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn edge_fn(p: [f64; 2], q: [f64; 2]) -> [f64; 3] {
    let a = p[1] - q[1];
    let b = q[0] - p[0];
    [a, b, -(a * p[0] + b * p[1])]
}

/// Projected geometry shared by the forward and backward passes.
pub(crate) struct Scene {
    pub screen: Vec<Option<[f64; 2]>>,
    /// Front-facing, fully projectable, non-degenerate triangles.
    pub tris: Vec<ScreenTri>,
}

impl Scene {
    pub fn build(positions: &[f64], indices: &[[u32; 3]], cam: &Camera) -> Result<Self> {
        cam.validate()?;
        if positions.len() % 3 != 0 {
            return Err(Error::Dimension(format!("{} position values is not a multiple of 3", positions.len())));
        }
        let vertex_count = positions.len() / 3;
        let screen: Vec<Option<[f64; 2]>> = positions
            .chunks_exact(3)
            .map(|p| cam.project([p[0], p[1], p[2]]))
            .collect();
        let mut tris = Vec::new();
        for (index, tri) in indices.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v as usize >= vertex_count) {
                return Err(Error::Dimension(format!("triangle {index} references vertex {bad} of {vertex_count}")));
            }
            let [Some(a), Some(b), Some(c)] = tri.map(|v| screen[v as usize]) else {
                continue;
            };
            // y grows downwards, so counter-clockwise faces have negative area
            if area2(a, b, c) < -1e-12 {
                tris.push(ScreenTri { index, corners: [a, b, c] });
            }
        }
        Ok(Self { screen, tris })
    }
}

impl Rasterizer {
    pub fn with_samples(samples_per_axis: u32) -> Self {
        Self {
            samples_per_axis: samples_per_axis.max(1),
            ..Self::default()
        }
    }

    pub fn render(&self, positions: &[f64], indices: &[[u32; 3]], cam: &Camera) -> Result<SilhouetteMask> {
        let scene = Scene::build(positions, indices, cam)?;
        Ok(self.rasterize(&scene.tris, cam.width, cam.height))
    }

    pub(crate) fn rasterize(&self, tris: &[ScreenTri], width: u32, height: u32) -> SilhouetteMask {
        let (w, h) = (width as usize, height as usize);
        let bands = h.div_ceil(BAND);
        let mut bins: Vec<Vec<usize>> = vec![Vec::new(); bands];
        for (k, t) in tris.iter().enumerate() {
            let bb = t.bbox();
            if bb[2] < 0.0 || bb[3] < 0.0 || bb[0] >= w as f64 || bb[1] >= h as f64 {
                continue;
            }
            let y0 = (bb[1].max(0.0) as usize).min(h - 1) / BAND;
            let y1 = (bb[3].max(0.0) as usize).min(h - 1) / BAND;
            for bin in &mut bins[y0..=y1] {
                bin.push(k);
            }
        }
        let band = |b: usize| self.rasterize_band(tris, &bins[b], w, b * BAND, ((b + 1) * BAND).min(h));
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..bands).into_par_iter().map(band).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<f64>> = (0..bands).map(band).collect();
        SilhouetteMask::new(width, height, rows.concat()).expect("coverage is a fraction")
    }

    fn rasterize_band(&self, tris: &[ScreenTri], bin: &[usize], w: usize, y_start: usize, y_end: usize) -> Vec<f64> {
        let s = self.samples_per_axis.max(1) as usize;
        let samples = s * s;
        let words = samples.div_ceil(64);
        let mut full = vec![u64::MAX; words];
        if samples % 64 != 0 {
            full[words - 1] = (1u64 << (samples % 64)) - 1;
        }
        let offsets: Vec<f64> = (0..s).map(|i| (i as f64 + 0.5) / s as f64).collect();
        let mut bits = vec![0u64; (y_end - y_start) * w * words];

        for &k in bin {
            let t = &tris[k];
            let edges = t.edges();
            let bb = t.bbox();
            let x0 = bb[0].floor().max(0.0) as usize;
            let x1 = (bb[2].ceil().max(0.0) as usize).min(w);
            let y0 = (bb[1].floor().max(y_start as f64) as usize).min(y_end);
            let y1 = (bb[3].ceil().max(0.0) as usize).clamp(y0, y_end);
            for y in y0..y1 {
                for x in x0..x1 {
                    let (fx, fy) = (x as f64, y as f64);
                    let mut inside_all = true;
                    let mut outside_any = false;
                    for e in &edges {
                        let v00 = e[0] * fx + e[1] * fy + e[2];
                        let lo = v00 + e[0].min(0.0) + e[1].min(0.0);
                        let hi = v00 + e[0].max(0.0) + e[1].max(0.0);
                        if hi < 0.0 {
                            outside_any = true;
                            break;
                        }
                        inside_all &= lo >= 0.0;
                    }
                    if outside_any {
                        continue;
                    }
                    let slot = &mut bits[((y - y_start) * w + x) * words..][..words];
                    if inside_all {
                        slot.copy_from_slice(&full);
                        continue;
                    }
                    let mut bit = 0;
                    for oy in &offsets {
                        for ox in &offsets {
                            let (px, py) = (fx + ox, fy + oy);
                            if edges.iter().all(|e| e[0] * px + e[1] * py + e[2] >= 0.0) {
                                slot[bit / 64] |= 1 << (bit % 64);
                            }
                            bit += 1;
                        }
                    }
                }
            }
        }
        bits.chunks_exact(words)
            .map(|px| px.iter().map(|b| b.count_ones()).sum::<u32>() as f64 / samples as f64)
            .collect()
    }
}

/// Silhouette of a mesh with the default rasterizer.
pub fn render_silhouette(positions: &[f64], indices: &[[u32; 3]], cam: &Camera) -> Result<SilhouetteMask> {
    Rasterizer::default().render(positions, indices, cam)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn front_cam(res: u32) -> Camera {
        Camera::new(0.0, 0.0, 2.0, std::f64::consts::FRAC_PI_2, res).unwrap()
    }

    #[test]
    fn empty_indices_give_empty_mask() {
        let m = render_silhouette(&[0.0; 9], &[], &front_cam(16)).unwrap();
        assert_eq!(m.area(), 0.0);
    }

    #[test]
    fn huge_triangle_fills_frame() {
        let pos = [-100.0, -100.0, 0.0, 100.0, -100.0, 0.0, 0.0, 100.0, 0.0];
        let m = render_silhouette(&pos, &[[0, 1, 2]], &front_cam(32)).unwrap();
        assert!(m.coverage().iter().all(|&c| c == 1.0));
        // seen from behind it is culled
        let back = Camera::new(std::f64::consts::PI, 0.0, 2.0, 1.0, 8).unwrap();
        assert_eq!(render_silhouette(&pos, &[[0, 1, 2]], &back).unwrap().area(), 0.0);
    }

    #[test]
    fn left_half_square() {
        // at distance 2 with a 90 degree fov the plane z=0 spans [-2, 2]
        let pos = [-3.0, -3.0, 0.0, 0.0, -3.0, 0.0, 0.0, 3.0, 0.0, -3.0, 3.0, 0.0];
        let m = render_silhouette(&pos, &[[0, 1, 2], [0, 2, 3]], &front_cam(20)).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(m.get(x, y), if x < 10 { 1.0 } else { 0.0 }, "({x}, {y})");
            }
        }
    }

    #[test]
    fn partial_pixel_matches_subsample_count() {
        // the edge x = 4.4 px covers the 4x4 subsample columns at 0.125 and 0.375
        let cam = front_cam(16);
        let sx = |px: f64| (px / 8.0 - 1.0) * 2.0;
        let pos = [-3.0, -3.0, 0.0, sx(4.4), -3.0, 0.0, sx(4.4), 3.0, 0.0, -3.0, 3.0, 0.0];
        let m = render_silhouette(&pos, &[[0, 1, 2], [0, 2, 3]], &cam).unwrap();
        assert_eq!(m.get(4, 7), 0.5);
        assert_eq!(m.get(3, 7), 1.0);
        assert_eq!(m.get(5, 7), 0.0);
    }

    #[test]
    fn behind_camera_is_empty() {
        let pos = [-1.0, -1.0, 5.0, 1.0, -1.0, 5.0, 0.0, 1.0, 5.0];
        let m = render_silhouette(&pos, &[[0, 1, 2]], &front_cam(16)).unwrap();
        assert_eq!(m.area(), 0.0);
    }

    #[test]
    fn bad_index_is_an_error() {
        assert!(render_silhouette(&[0.0; 9], &[[0, 1, 3]], &front_cam(8)).is_err());
    }
}
