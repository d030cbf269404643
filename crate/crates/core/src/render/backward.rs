use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::Camera;
use super::raster::{area2, Rasterizer, Scene, ScreenTri};
use crate::error::{Error, Result};

/// Offset, in pixels, at which the far side of an edge is probed for
/// coverage.
const PROBE: f64 = 1e-3;
/// Side of the square cells of the coverage lookup grid, in pixels.
const CELL: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderGradients {
    /// Three entries per vertex.
    pub d_pos: Vec<f64>,
    /// Ordered as azimuth, elevation, distance, fov_y.
    pub d_camera: [f64; 4],
}

impl RenderGradients {
    pub fn zeros(vertex_count: usize) -> Self {
        Self {
            d_pos: vec![0.0; 3 * vertex_count],
            d_camera: [0.0; 4],
        }
    }
}

/// Triangles bucketed by the grid cells their bounding boxes touch.
struct CoverageGrid<'a> {
    tris: &'a [ScreenTri],
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> CoverageGrid<'a> {
    fn new(tris: &'a [ScreenTri], width: u32, height: u32) -> Self {
        let cols = (width as f64 / CELL).ceil() as usize;
        let rows = (height as f64 / CELL).ceil() as usize;
        let mut cells = vec![Vec::new(); cols * rows];
        for (k, t) in tris.iter().enumerate() {
            let bb = t.bbox();
            if bb[2] < 0.0 || bb[3] < 0.0 || bb[0] >= width as f64 || bb[1] >= height as f64 {
                continue;
            }
            let c0 = (bb[0].max(0.0) / CELL) as usize;
            let c1 = ((bb[2] / CELL) as usize).min(cols - 1);
            let r0 = (bb[1].max(0.0) / CELL) as usize;
            let r1 = ((bb[3] / CELL) as usize).min(rows - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    cells[r * cols + c].push(k as u32);
                }
            }
        }
        Self { tris, cols, rows, cells }
    }

    fn covered(&self, p: [f64; 2]) -> bool {
        if p[0] < 0.0 || p[1] < 0.0 {
            return false;
        }
        let (c, r) = ((p[0] / CELL) as usize, (p[1] / CELL) as usize);
        if c >= self.cols || r >= self.rows {
            return false;
        }
        self.cells[r * self.cols + c]
            .iter()
            .any(|&k| self.tris[k as usize].contains(p))
    }
}

/// An edge that may bound the silhouette, with the screen position of a
/// vertex on its interior side.
struct Candidate {
    a: u32,
    b: u32,
    inner: [f64; 2],
}

fn candidate_edges(scene: &Scene, indices: &[[u32; 3]]) -> Vec<Candidate> {
    // per edge: front-facing triangle count and the opposite vertices
    let mut edges: BTreeMap<(u32, u32), (u32, [u32; 2])> = BTreeMap::new();
    for t in &scene.tris {
        let tri = indices[t.index];
        for k in 0..3 {
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let entry = edges.entry((a.min(b), a.max(b))).or_insert((0, [c, c]));
            if entry.0 == 1 {
                entry.1[1] = c;
            }
            entry.0 += 1;
        }
    }
    let at = |v: u32| scene.screen[v as usize].expect("front triangles are projected");
    edges
        .into_iter()
        .filter_map(|((a, b), (count, [c0, c1]))| {
            let (pa, pb) = (at(a), at(b));
            match count {
                1 => Some(Candidate { a, b, inner: at(c0) }),
                // two faces folded onto the same side still leave a boundary
                2 if area2(pa, pb, at(c0)).signum() == area2(pa, pb, at(c1)).signum() => {
                    Some(Candidate { a, b, inner: at(c0) })
                }
                _ => None,
            }
        })
        .collect()
}

/// Screen-space gradient for both endpoints of one edge.
fn sample_edge(
    cand: &Candidate,
    scene: &Scene,
    grid: &CoverageGrid,
    d_pixels: &[f64],
    width: u32,
    height: u32,
    density: f64,
    seed: u64,
) -> ([f64; 2], [f64; 2]) {
    let pa = scene.screen[cand.a as usize].expect("projected");
    let pb = scene.screen[cand.b as usize].expect("projected");
    let dir = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = dir[0].hypot(dir[1]);
    if len <= 0.0 {
        return ([0.0; 2], [0.0; 2]);
    }
    let mut normal = [dir[1] / len, -dir[0] / len];
    let to_inner = [cand.inner[0] - pa[0], cand.inner[1] - pa[1]];
    if normal[0] * to_inner[0] + normal[1] * to_inner[1] > 0.0 {
        normal = [-normal[0], -normal[1]];
    }
    let n = ((density * len).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cand.a as u64) << 32) | cand.b as u64);
    let (mut ga, mut gb) = ([0.0; 2], [0.0; 2]);
    for k in 0..n {
        let t = (k as f64 + rng.gen::<f64>()) / n as f64;
        let p = [pa[0] + t * dir[0], pa[1] + t * dir[1]];
        if p[0] < 0.0 || p[1] < 0.0 || p[0] >= width as f64 || p[1] >= height as f64 {
            continue;
        }
        let d = d_pixels[p[1] as usize * width as usize + p[0] as usize];
        if d == 0.0 {
            continue;
        }
        if grid.covered([p[0] + PROBE * normal[0], p[1] + PROBE * normal[1]]) {
            continue;
        }
        let w = d * len / n as f64;
        for axis in 0..2 {
            ga[axis] += w * (1.0 - t) * normal[axis];
            gb[axis] += w * t * normal[axis];
        }
    }
    (ga, gb)
}

impl Rasterizer {
    /// Gradient of `sum(coverage * d_pixels)` with respect to vertex
    /// positions and camera parameters, from samples along silhouette edges.
    pub fn backward(
        &self,
        positions: &[f64],
        indices: &[[u32; 3]],
        cam: &Camera,
        d_pixels: &[f64],
        seed: u64,
    ) -> Result<RenderGradients> {
        let expected = cam.width as usize * cam.height as usize;
        if d_pixels.len() != expected {
            return Err(Error::Dimension(format!(
                "pixel gradient has {} values, camera is {}x{}",
                d_pixels.len(),
                cam.width,
                cam.height
            )));
        }
        let scene = Scene::build(positions, indices, cam)?;
        let vertex_count = positions.len() / 3;
        let mut grads = RenderGradients::zeros(vertex_count);
        if d_pixels.iter().all(|&d| d == 0.0) {
            return Ok(grads);
        }
        let grid = CoverageGrid::new(&scene.tris, cam.width, cam.height);
        let candidates = candidate_edges(&scene, indices);
        let density = self.edge_samples_per_pixel;
        let run = |c: &Candidate| sample_edge(c, &scene, &grid, d_pixels, cam.width, cam.height, density, seed);
        #[cfg(feature = "parallel")]
        let per_edge: Vec<([f64; 2], [f64; 2])> = {
            use rayon::prelude::*;
            candidates.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let per_edge: Vec<([f64; 2], [f64; 2])> = candidates.iter().map(run).collect();

        let mut screen_grad = vec![[0.0f64; 2]; vertex_count];
        for (c, (ga, gb)) in candidates.iter().zip(&per_edge) {
            for (v, g) in [(c.a, ga), (c.b, gb)] {
                screen_grad[v as usize][0] += g[0];
                screen_grad[v as usize][1] += g[1];
            }
        }
        for (v, g) in screen_grad.iter().enumerate() {
            if g[0] == 0.0 && g[1] == 0.0 {
                continue;
            }
            let p = [positions[3 * v], positions[3 * v + 1], positions[3 * v + 2]];
            let Some((_, jac)) = cam.project_with_gradient(p) else {
                continue;
            };
            for k in 0..7 {
                let d = g[0] * jac[0][k] + g[1] * jac[1][k];
                if k < 3 {
                    grads.d_pos[3 * v + k] += d;
                } else {
                    grads.d_camera[k - 3] += d;
                }
            }
        }
        Ok(grads)
    }
}

/// Edge-sampling gradients with the default rasterizer.
pub fn render_backward(
    positions: &[f64],
    indices: &[[u32; 3]],
    cam: &Camera,
    d_pixels: &[f64],
    seed: u64,
) -> Result<RenderGradients> {
    Rasterizer::default().backward(positions, indices, cam, d_pixels, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact area of a convex polygon clipped to each pixel.
    fn exact_coverage(poly: &[[f64; 2]], w: usize, h: usize) -> Vec<f64> {
        fn clip(poly: &[[f64; 2]], inside: impl Fn([f64; 2]) -> f64) -> Vec<[f64; 2]> {
            let mut out = Vec::new();
            for i in 0..poly.len() {
                let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                let (fp, fq) = (inside(p), inside(q));
                if fp >= 0.0 {
                    out.push(p);
                }
                if (fp >= 0.0) != (fq >= 0.0) {
                    let t = fp / (fp - fq);
                    out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            out
        }
        let mut cov = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (x as f64, y as f64);
                let mut p = poly.to_vec();
                p = clip(&p, |v| v[0] - fx);
                p = clip(&p, |v| fx + 1.0 - v[0]);
                p = clip(&p, |v| v[1] - fy);
                p = clip(&p, |v| fy + 1.0 - v[1]);
                let mut a = 0.0;
                for i in 0..p.len() {
                    let (u, v) = (p[i], p[(i + 1) % p.len()]);
                    a += u[0] * v[1] - v[0] * u[1];
                }
                cov[y * w + x] = 0.5 * a.abs();
            }
        }
        cov
    }

    fn cam(res: u32) -> Camera {
        Camera::new(0.2, 0.15, 3.0, 0.9, res).unwrap()
    }

    fn weights(res: usize) -> Vec<f64> {
        (0..res * res)
            .map(|i| {
                let (x, y) = ((i % res) as f64 / res as f64, (i / res) as f64 / res as f64);
                1.0 + (3.0 * x).sin() + 0.5 * (5.0 * y).cos()
            })
            .collect()
    }

    fn exact_objective(pos: &[f64], cam: &Camera, w: &[f64]) -> f64 {
        let poly: Vec<[f64; 2]> = pos.chunks_exact(3).map(|p| cam.project([p[0], p[1], p[2]]).unwrap()).collect();
        let n = cam.width as usize;
        exact_coverage(&poly, n, n).iter().zip(w).map(|(c, w)| c * w).sum()
    }

    #[test]
    fn zero_pixels_zero_gradient() {
        let pos = [-0.5, -0.5, 0.0, 0.5, -0.5, 0.0, 0.0, 0.5, 0.0];
        let g = render_backward(&pos, &[[0, 1, 2]], &cam(32), &vec![0.0; 1024], 1).unwrap();
        assert!(g.d_pos.iter().all(|&x| x == 0.0));
        assert_eq!(g.d_camera, [0.0; 4]);
    }

    #[test]
    fn single_triangle_matches_exact_area() {
        let res = 64;
        let c = cam(res);
        let pos = vec![-0.6, -0.4, 0.1, 0.7, -0.5, 0.0, 0.1, 0.6, -0.1];
        let w = weights(res as usize);
        let g = Rasterizer { edge_samples_per_pixel: 16.0, ..Default::default() }
            .backward(&pos, &[[0, 1, 2]], &c, &w, 3)
            .unwrap();
        let h = 1e-5;
        let mut fd = vec![0.0; 9];
        for k in 0..9 {
            let mut p = pos.clone();
            p[k] += h;
            let up = exact_objective(&p, &c, &w);
            p[k] -= 2.0 * h;
            fd[k] = (up - exact_objective(&p, &c, &w)) / (2.0 * h);
        }
        let dot: f64 = fd.iter().zip(&g.d_pos).map(|(a, b)| a * b).sum();
        let na = fd.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb = g.d_pos.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 0.995, "cos {}", dot / (na * nb));
        assert!((na - nb).abs() / na < 0.03, "{na} vs {nb}");

        for k in 0..4 {
            let mut cp = c.params();
            cp[k] += h;
            let up = exact_objective(&pos, &c.with_params(cp), &w);
            cp[k] -= 2.0 * h;
            let fd = (up - exact_objective(&pos, &c.with_params(cp), &w)) / (2.0 * h);
            assert!((fd - g.d_camera[k]).abs() < 0.03 * fd.abs().max(1.0), "camera {k}: {fd} vs {}", g.d_camera[k]);
        }
    }

    #[test]
    fn interior_vertices_get_nothing() {
        // a fan around a center vertex: only the rim carries gradient
        let mut pos = vec![0.0, 0.0, 0.0];
        let mut idx = Vec::new();
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::TAU / 6.0;
            pos.extend([0.6 * a.cos(), 0.6 * a.sin(), 0.0]);
            idx.push([0, 1 + k, 1 + (k + 1) % 6]);
        }
        let c = Camera::new(0.0, 0.0, 3.0, 0.9, 48).unwrap();
        let g = render_backward(&pos, &idx, &c, &vec![1.0; 48 * 48], 0).unwrap();
        assert_eq!(&g.d_pos[..3], &[0.0; 3]);
        assert!(g.d_pos[3..].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn occluded_edges_are_skipped() {
        // a small triangle entirely inside a big one contributes nothing
        let pos = [
            -2.0, -2.0, 0.0, 2.0, -2.0, 0.0, 0.0, 2.0, 0.0, //
            -0.2, -0.2, 0.5, 0.2, -0.2, 0.5, 0.0, 0.2, 0.5,
        ];
        let c = Camera::new(0.0, 0.0, 3.0, 1.2, 40).unwrap();
        let g = render_backward(&pos, &[[0, 1, 2], [3, 4, 5]], &c, &vec![1.0; 1600], 0).unwrap();
        assert!(g.d_pos[9..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let pos = [-0.5, -0.5, 0.0, 0.5, -0.5, 0.0, 0.0, 0.5, 0.0];
        let c = cam(32);
        let w = weights(32);
        let a = render_backward(&pos, &[[0, 1, 2]], &c, &w, 9).unwrap();
        let b = render_backward(&pos, &[[0, 1, 2]], &c, &w, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(render_backward(&[0.0; 9], &[[0, 1, 2]], &cam(8), &[0.0; 10], 0).is_err());
    }
}
