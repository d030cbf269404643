//! Stochastic rule-based tree generator (no Jacobian).
//!
//! Branches are recursive bent polylines realized as truncated cones; the
//! terminal level carries double-sided leaf quads. The output is a pure
//! function of the parameters and the seed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::{ParamSpace, ParamSpec, ParameterVector};

use super::mesh::{MeshBuilder, TriangleMesh};
use super::{check_space, LevelOfDetail};

const TRUNK_LENGTH: usize = 0;
const TRUNK_RADIUS: usize = 1;
const LEVELS: usize = 2;
const BRANCHES: usize = 3;
const ANGLE_MEAN: usize = 4;
const ANGLE_SPREAD: usize = 5;
const LENGTH_DECAY: usize = 6;
const CURVATURE: usize = 7;
const LEAF_SIZE: usize = 8;
const LEAF_DENSITY: usize = 9;

const SEGMENTS: usize = 3;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

pub fn space() -> ParamSpace {
    ParamSpace::new(vec![
        ParamSpec::continuous("trunk_length", 1.0, 6.0, "trunk length"),
        ParamSpec::continuous("trunk_radius", 0.05, 0.4, "trunk base radius"),
        ParamSpec::discrete("levels", 2.0, 4.0, "branch levels including the trunk"),
        ParamSpec::continuous("branches", 0.0, 8.0, "children per branch, rounded"),
        ParamSpec::continuous("angle_mean", 0.26, 1.31, "mean branching angle (radians)"),
        ParamSpec::continuous("angle_spread", 0.0, 0.52, "branching angle jitter (radians)"),
        ParamSpec::continuous("length_decay", 0.3, 0.9, "child to parent length ratio"),
        ParamSpec::continuous("curvature", -0.6, 0.6, "total bend along a branch (radians)"),
        ParamSpec::continuous("leaf_size", 0.05, 0.5, "leaf quad edge length"),
        ParamSpec::continuous("leaf_density", 0.5, 20.0, "leaves per unit of terminal branch length"),
    ])
    .expect("tree space is well formed")
}

/// Summary of the branch graph, used by the tree regularizers.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TreeSkeleton {
    pub node_count: usize,
    pub branch_count: usize,
    pub leaf_count: usize,
    pub trunk_length: f64,
    pub terminal_length: f64,
    pub leaf_size: f64,
}

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn mul(a: V3, k: f64) -> V3 {
    [a[0] * k, a[1] * k, a[2] * k]
}
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn normalize(a: V3) -> V3 {
    let l = dot(a, a).sqrt();
    mul(a, 1.0 / l)
}

/// Any unit vector perpendicular to `t`.
fn perpendicular(t: V3) -> V3 {
    let r = if t[1].abs() < 0.9 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
    normalize(cross(r, t))
}

/// Rodrigues rotation of `v` about unit `axis`.
fn rotate(v: V3, axis: V3, angle: f64) -> V3 {
    let (s, c) = angle.sin_cos();
    add(
        add(mul(v, c), mul(cross(axis, v), s)),
        mul(axis, dot(axis, v) * (1.0 - c)),
    )
}

struct Branch {
    level: usize,
    base: V3,
    dir: V3,
    length: f64,
    radius: f64,
}

struct Builder<'a> {
    p: &'a [f64],
    levels: usize,
    children: usize,
    seed: u64,
    b: MeshBuilder<V3>,
    skeleton: TreeSkeleton,
}

impl Builder<'_> {
    fn grow(&mut self, rng: &mut ChaCha8Rng, br: Branch, id: u64) {
        let p = self.p;
        let bend_axis = {
            let e1 = perpendicular(br.dir);
            let e2 = cross(br.dir, e1);
            let phi = rng.gen::<f64>() * TAU;
            add(mul(e1, phi.cos()), mul(e2, phi.sin()))
        };
        let bend = p[CURVATURE] * if br.level == 0 { 0.3 } else { 1.0 } / SEGMENTS as f64;
        let step = br.length / SEGMENTS as f64;

        let mut nodes = vec![br.base];
        let mut dirs = vec![br.dir];
        for i in 0..SEGMENTS {
            nodes.push(add(nodes[i], mul(dirs[i], step)));
            dirs.push(normalize(rotate(dirs[i], bend_axis, bend)));
        }
        let radii: Vec<f64> = (0..=SEGMENTS)
            .map(|i| br.radius * (1.0 - 0.6 * i as f64 / SEGMENTS as f64))
            .collect();
        self.tube(&nodes, &dirs, &radii, if br.level == 0 { "trunk" } else { "branch" });
        self.skeleton.node_count += SEGMENTS + 1;
        self.skeleton.branch_count += 1;
        if br.level == 0 {
            self.skeleton.trunk_length = br.length;
        }

        let at = |f: f64| {
            let x = f * SEGMENTS as f64;
            let i = (x.floor() as usize).min(SEGMENTS - 1);
            let t = x - i as f64;
            let pos = add(mul(nodes[i], 1.0 - t), mul(nodes[i + 1], t));
            let r = radii[i] * (1.0 - t) + radii[i + 1] * t;
            (pos, dirs[i], r)
        };

        if br.level + 1 >= self.levels {
            self.leaves(&at, br.length, id);
            return;
        }

        let phase = rng.gen::<f64>() * TAU;
        let n = self.children;
        for c in 0..n {
            let jitter: f64 = rng.gen_range(-0.3..0.3);
            let f = (0.3 + 0.7 * (c as f64 + 0.5 + jitter) / n as f64).clamp(0.2, 1.0);
            let (pos, dir, r) = at(f);
            let phi = phase + c as f64 * GOLDEN_ANGLE + rng.gen_range(-0.3..0.3);
            let e1 = perpendicular(dir);
            let e2 = cross(dir, e1);
            let axis = add(mul(e1, phi.cos()), mul(e2, phi.sin()));
            let angle = p[ANGLE_MEAN] + p[ANGLE_SPREAD] * rng.gen_range(-1.0..1.0);
            let child_dir = normalize(rotate(dir, axis, angle));
            let child = Branch {
                level: br.level + 1,
                base: pos,
                dir: child_dir,
                length: br.length * p[LENGTH_DECAY] * (1.15 - 0.5 * f),
                radius: (r * 0.55).max(0.004),
            };
            self.grow(rng, child, id * 16 + c as u64 + 1);
        }
    }

    fn tube(&mut self, nodes: &[V3], dirs: &[V3], radii: &[f64], label: &str) {
        let sides = if label == "trunk" { 8 } else { 5 };
        let base = self.b.verts.len() as u32;
        let mut e1 = perpendicular(dirs[0]);
        for (i, (&c, &r)) in nodes.iter().zip(radii).enumerate() {
            let t = dirs[i.min(dirs.len() - 1)];
            // parallel transport of the ring frame; (e1, e2, t) is right handed
            e1 = normalize(add(e1, mul(t, -dot(e1, t))));
            let e2 = cross(t, e1);
            for k in 0..sides {
                let phi = TAU * k as f64 / sides as f64;
                let dir = add(mul(e1, phi.cos()), mul(e2, phi.sin()));
                self.b.vertex(add(c, mul(dir, r)), [k as f64 / sides as f64, i as f64 / SEGMENTS as f64]);
            }
        }
        let s = sides as u32;
        for i in 0..(nodes.len() - 1) as u32 {
            for k in 0..s {
                let at = |ii: u32, kk: u32| base + ii * s + kk % s;
                self.b.quad(at(i, k), at(i, k + 1), at(i + 1, k + 1), at(i + 1, k), label);
            }
        }
    }

    fn leaves(&mut self, at: &dyn Fn(f64) -> (V3, V3, f64), length: f64, id: u64) {
        let p = self.p;
        let count = (p[LEAF_DENSITY] * length).floor() as usize;
        // separate stream per branch so leaf draws never perturb the structure
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.wrapping_add(1));
        let size = p[LEAF_SIZE];
        for _ in 0..count {
            let (pos, _, r) = at(rng.gen_range(0.3..1.0));
            let normal = random_unit(&mut rng);
            let e1 = perpendicular(normal);
            let e2 = cross(normal, e1);
            let center = add(pos, mul(random_unit(&mut rng), r + 0.5 * size));
            let h = 0.5 * size;
            let corners = [
                add(center, add(mul(e1, -h), mul(e2, -h))),
                add(center, add(mul(e1, h), mul(e2, -h))),
                add(center, add(mul(e1, h), mul(e2, h))),
                add(center, add(mul(e1, -h), mul(e2, h))),
            ];
            let uv = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
            let front: Vec<u32> = corners.iter().zip(uv).map(|(&c, t)| self.b.vertex(c, t)).collect();
            let back: Vec<u32> = corners.iter().zip(uv).map(|(&c, t)| self.b.vertex(c, t)).collect();
            self.b.quad(front[0], front[1], front[2], front[3], "leaf");
            self.b.quad(back[0], back[3], back[2], back[1], "leaf");
        }
        self.skeleton.leaf_count += count;
        self.skeleton.terminal_length += length;
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> V3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi = rng.gen::<f64>() * TAU;
    let s = (1.0 - z * z).sqrt();
    [s * phi.cos(), z, s * phi.sin()]
}

pub fn generate(params: &ParameterVector, seed: u64) -> Result<TriangleMesh> {
    generate_with_skeleton(params, seed).map(|(m, _)| m)
}

pub fn generate_with_skeleton(params: &ParameterVector, seed: u64) -> Result<(TriangleMesh, TreeSkeleton)> {
    check_space(params, &space(), "tree", LevelOfDetail::new(0), 0)?;
    let p = params.values();
    let mut builder = Builder {
        p,
        levels: p[LEVELS].round() as usize,
        children: p[BRANCHES].round() as usize,
        seed,
        b: MeshBuilder::new(),
        skeleton: TreeSkeleton {
            leaf_size: p[LEAF_SIZE],
            ..TreeSkeleton::default()
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lean: f64 = rng.gen_range(-0.05..0.05) * PI;
    let trunk = Branch {
        level: 0,
        base: [0.0, 0.0, 0.0],
        dir: normalize([lean.sin(), lean.cos(), 0.0]),
        length: p[TRUNK_LENGTH],
        radius: p[TRUNK_RADIUS],
    };
    builder.grow(&mut rng, trunk, 0);
    let skeleton = builder.skeleton;
    Ok((builder.b.finish(), skeleton))
}
