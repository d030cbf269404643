//! Differentiable dish generator: a Catmull-Rom radius profile, thickened
//! into a closed cross-section, revolved around the vertical axis, with an
//! optional swept-circle handle.

use std::f64::consts::TAU;

use crate::autodiff::{assemble_jacobian, seed, Dual, Dual3, Jacobian};
use crate::error::Result;
use crate::params::{ParamSpace, ParamSpec, ParameterVector};

use super::mesh::{MeshBuilder, TriangleMesh};
use super::spline::{catmull_rom, catmull_rom_at};
use super::{check_space, LevelOfDetail};

pub const PROFILE_CONTROLS: usize = 8;
pub const MAX_TIER: u32 = 3;

const RADIUS: usize = 0;
const THICKNESS: usize = PROFILE_CONTROLS;
const HEIGHT: usize = PROFILE_CONTROLS + 1;
const HANDLE: usize = PROFILE_CONTROLS + 2;
const HANDLE_SHAPE: usize = PROFILE_CONTROLS + 3;

/// Smallest radius the profile may take, keeping the lathe non-degenerate.
const MIN_RADIUS: f64 = 0.02;

pub fn space() -> ParamSpace {
    let mut specs: Vec<ParamSpec> = (0..PROFILE_CONTROLS)
        .map(|k| {
            ParamSpec::continuous(
                &format!("radius_{k}"),
                0.05,
                1.5,
                "body radius at an evenly spaced height, bottom to top",
            )
        })
        .collect();
    specs.extend([
        ParamSpec::continuous("thickness", 0.005, 0.1, "wall and floor thickness"),
        ParamSpec::continuous("height", 0.3, 2.0, "overall body height"),
        ParamSpec::discrete("handle", 0.0, 1.0, "1 adds a handle"),
        ParamSpec::continuous("handle_reach_top", 0.05, 0.6, "outward reach of the upper handle control"),
        ParamSpec::continuous("handle_reach_bottom", 0.05, 0.6, "outward reach of the lower handle control"),
        ParamSpec::continuous("handle_span", 0.05, 0.6, "vertical span of the handle as a fraction of height"),
        ParamSpec::continuous("handle_thickness", 0.05, 0.6, "handle tube radius, in tenths of a unit"),
    ]);
    ParamSpace::new(specs).expect("dish space is well formed")
}

/// (profile samples, lathe segments, handle path samples, handle ring sides)
fn resolution(lod: LevelOfDetail) -> (usize, usize, usize, usize) {
    match lod.tier {
        0 => (8, 16, 8, 6),
        1 => (16, 32, 12, 8),
        2 => (32, 64, 16, 12),
        _ => (64, 128, 24, 16),
    }
}

pub fn generate(params: &ParameterVector, lod: LevelOfDetail) -> Result<(TriangleMesh, Jacobian)> {
    check_space(params, &space(), "dish", lod, MAX_TIER)?;
    let (p, layout) = seed(params);
    let (samples, segments, path_samples, sides) = resolution(lod);

    let controls = &p[RADIUS..RADIUS + PROFILE_CONTROLS];
    let thickness = &p[THICKNESS];
    let height = &p[HEIGHT];

    let last = (PROFILE_CONTROLS - 1) as f64;
    let outer: Vec<(Dual, Dual)> = (0..samples)
        .map(|s| {
            let f = s as f64 / (samples - 1) as f64;
            let r = catmull_rom(controls, f * last).max_f(MIN_RADIUS);
            (r, height.scale(f))
        })
        .collect();

    // Closed cross-section, counter-clockwise in the (radius, height) plane:
    // floor center, outer wall upwards, rim, inner wall downwards, inner floor.
    let zero = Dual::constant(0.0);
    let mut section: Vec<(Dual, Dual)> = Vec::with_capacity(2 * samples + 2);
    section.push((zero.clone(), zero.clone()));
    section.extend(outer.iter().cloned());
    for (r, y) in outer.iter().rev() {
        section.push(((r - thickness).max_f(0.0), y.max(thickness)));
    }
    section.push((zero, thickness.clone()));

    let mut b: MeshBuilder<Dual3> = MeshBuilder::new();
    let rows = section.len();
    for j in 0..=segments {
        let theta = TAU * j as f64 / segments as f64;
        let (c, s) = (theta.cos(), -theta.sin());
        for (k, (r, y)) in section.iter().enumerate() {
            let v = Dual3::new(r.scale(c), y.clone(), r.scale(s));
            b.vertex(v, [j as f64 / segments as f64, k as f64 / (rows - 1) as f64]);
        }
    }
    for j in 0..segments as u32 {
        for k in 0..(rows - 1) as u32 {
            let at = |jj: u32, kk: u32| jj * rows as u32 + kk;
            b.quad(at(j, k), at(j + 1, k), at(j + 1, k + 1), at(j, k + 1), "body");
        }
    }

    if params.values()[HANDLE] >= 0.5 {
        add_handle(&mut b, controls, height, &p[HANDLE_SHAPE..HANDLE_SHAPE + 4], path_samples, sides)?;
    }

    let (positions, jac) = assemble_jacobian(&b.verts, &layout)?;
    Ok((b.build(positions), jac))
}

fn bezier(p: &[Dual3; 4], t: f64) -> (Dual3, Dual3) {
    let u = 1.0 - t;
    let w = [u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t];
    let dw = [-3.0 * u * u, 3.0 * u * u - 6.0 * u * t, 6.0 * u * t - 3.0 * t * t, 3.0 * t * t];
    let mut point = Dual3::constant([0.0; 3]);
    let mut tangent = Dual3::constant([0.0; 3]);
    for k in 0..4 {
        point = point.add(&p[k].scale_f(w[k]));
        tangent = tangent.add(&p[k].scale_f(dw[k]));
    }
    (point, tangent)
}

/// Sweeps a circle along a cubic arc in the +x half-plane whose ends are
/// welded to the outer body surface.
fn add_handle(
    b: &mut MeshBuilder<Dual3>,
    controls: &[Dual],
    height: &Dual,
    shape: &[Dual],
    path_samples: usize,
    sides: usize,
) -> Result<()> {
    let [reach_top, reach_bottom, span, tube] = shape else {
        unreachable!("four handle shape parameters")
    };
    let last = (PROFILE_CONTROLS - 1) as f64;
    let top_frac = span.scale(0.5).offset(0.55);
    let bottom_frac = span.scale(-0.5).offset(0.55);
    let r_top = catmull_rom_at(controls, &top_frac.scale(last)).max_f(MIN_RADIUS);
    let r_bottom = catmull_rom_at(controls, &bottom_frac.scale(last)).max_f(MIN_RADIUS);
    let y_top = height * &top_frac;
    let y_bottom = height * &bottom_frac;
    let zero = Dual::constant(0.0);
    let arc = [
        Dual3::new(r_top.clone(), y_top.clone(), zero.clone()),
        Dual3::new(&r_top + reach_top, y_top, zero.clone()),
        Dual3::new(&r_bottom + reach_bottom, y_bottom.clone(), zero.clone()),
        Dual3::new(r_bottom, y_bottom, zero),
    ];
    let radius = tube.scale(0.1);
    let z = Dual3::constant([0.0, 0.0, 1.0]);
    let base = b.verts.len() as u32;
    for i in 0..path_samples {
        let t = i as f64 / (path_samples - 1) as f64;
        let (c, d) = bezier(&arc, t);
        let d = d.normalize()?;
        // in-plane normal of the arc; (normal, z, tangent) is right handed
        let normal = Dual3::new(-d.y(), d.x().clone(), Dual::constant(0.0));
        for k in 0..sides {
            let phi = TAU * k as f64 / sides as f64;
            let dir = normal.scale_f(phi.cos()).add(&z.scale_f(phi.sin()));
            b.vertex(c.add(&dir.scale(&radius)), [t, k as f64 / sides as f64]);
        }
    }
    let sides = sides as u32;
    for i in 0..(path_samples - 1) as u32 {
        for k in 0..sides {
            let at = |ii: u32, kk: u32| base + ii * sides + kk % sides;
            b.quad(at(i, k), at(i, k + 1), at(i + 1, k + 1), at(i + 1, k), "handle");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(radius: f64, thickness: f64, handle: f64) -> ParameterVector {
        let s = space();
        let mut v: Vec<f64> = vec![radius; PROFILE_CONTROLS];
        v.extend([thickness, 1.0, handle, 0.3, 0.3, 0.4, 0.3]);
        ParameterVector::new(s, v).unwrap()
    }

    #[test]
    fn constant_profile_is_a_cylinder() {
        let (mesh, _) = generate(&vector(0.6, 0.05, 0.0), LevelOfDetail::new(1)).unwrap();
        mesh.check().unwrap();
        assert_eq!(mesh.count_label("handle"), 0);
        assert_eq!(mesh.count_label("body"), mesh.triangle_count());
        let mut radii: Vec<f64> = mesh
            .positions
            .chunks_exact(3)
            .map(|p| (p[0] * p[0] + p[2] * p[2]).sqrt())
            .filter(|r| *r > 1e-9)
            .collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(radii.len(), 2, "{radii:?}");
        assert!((radii[0] - 0.55).abs() < 1e-9 && (radii[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn seam_is_watertight() {
        let (mesh, _) = generate(&vector(0.4, 0.02, 0.0), LevelOfDetail::new(2)).unwrap();
        let (_, segments, ..) = resolution(LevelOfDetail::new(2));
        let rows = mesh.vertex_count() / (segments + 1);
        for k in 0..rows {
            let a = mesh.vertex(k);
            let b = mesh.vertex(segments * rows + k);
            for ax in 0..3 {
                assert!((a[ax] - b[ax]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn handle_is_labeled_and_outside() {
        let (mesh, jac) = generate(&vector(0.4, 0.02, 1.0), LevelOfDetail::new(0)).unwrap();
        mesh.check().unwrap();
        assert!(mesh.count_label("handle") > 0);
        let max_x = mesh.positions.chunks_exact(3).map(|p| p[0]).fold(f64::MIN, f64::max);
        assert!(max_x > 0.5);
        assert!(jac.column(HANDLE).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn outward_orientation() {
        // face normals of the outer wall point away from the axis
        let (mesh, _) = generate(&vector(0.5, 0.05, 0.0), LevelOfDetail::new(0)).unwrap();
        let n = &mesh.normals;
        let mid = 2 + 2; // an outer-wall vertex of the first column
        let p = mesh.vertex(mid);
        let dot = n[3 * mid] * p[0] + n[3 * mid + 2] * p[2];
        assert!(dot > 0.0);
    }
}
