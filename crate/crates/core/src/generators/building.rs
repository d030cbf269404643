//! Differentiable building generator: an axis-aligned box of floors with a
//! regular window grid per wall, a front door, and a flat or gabled roof.
//!
//! Tiers: 0 = box and roof, 1 = per-floor wall panels, 2 = window and door
//! openings with recessed panes, 3 = adds sills and lintels.

use crate::autodiff::{assemble_jacobian, seed, Dual, Dual3, Jacobian};
use crate::error::Result;
use crate::params::{ParamSpace, ParamSpec, ParameterVector};

use super::mesh::{MeshBuilder, TriangleMesh};
use super::{check_space, LevelOfDetail};

pub const MAX_TIER: u32 = 3;

const WIDTH: usize = 0;
const DEPTH: usize = 1;
const FLOOR_HEIGHT: usize = 2;
const FLOORS: usize = 3;
const WINDOWS: usize = 4;
const WINDOW_WIDTH: usize = 5;
const WINDOW_HEIGHT: usize = 6;
const ROOF_TYPE: usize = 7;
const ROOF_HEIGHT: usize = 8;
const DOOR_WIDTH: usize = 9;
const DOOR_HEIGHT: usize = 10;

const PANE_INSET: f64 = 0.12;
const WINDOW_CENTER: f64 = 0.55;

pub fn space() -> ParamSpace {
    ParamSpace::new(vec![
        ParamSpec::continuous("width", 4.0, 20.0, "extent along x"),
        ParamSpec::continuous("depth", 4.0, 20.0, "extent along z"),
        ParamSpec::continuous("floor_height", 2.5, 4.5, "height of one floor"),
        ParamSpec::discrete("floors", 1.0, 12.0, "number of floors"),
        ParamSpec::discrete("windows", 0.0, 8.0, "windows per wall per floor"),
        ParamSpec::continuous("window_width", 0.1, 0.9, "window width as a fraction of its bay"),
        ParamSpec::continuous("window_height", 0.1, 0.9, "window height as a fraction of the floor"),
        ParamSpec::discrete("roof_type", 0.0, 1.0, "0 = flat, 1 = gabled"),
        ParamSpec::continuous("roof_height", 0.5, 6.0, "ridge height above the top floor"),
        ParamSpec::continuous("door_width", 0.8, 3.0, "front door width"),
        ParamSpec::continuous("door_height", 1.8, 3.5, "front door height, capped at 90% of a floor"),
    ])
    .expect("building space is well formed")
}

/// A wall seen from outside: `s` runs left to right along `axis`, `y` up.
struct Wall {
    origin: Dual3,
    axis: [f64; 3],
    normal: [f64; 3],
    length: Dual,
}

impl Wall {
    fn point(&self, s: &Dual, y: &Dual, out: f64) -> Dual3 {
        let a = self.axis;
        let n = self.normal;
        Dual3::new(
            &self.origin.0[0] + &s.scale(a[0]),
            &self.origin.0[1] + y,
            &self.origin.0[2] + &s.scale(a[2]),
        )
        .offset([n[0] * out, 0.0, n[2] * out])
    }
}

struct Ctx {
    b: MeshBuilder<Dual3>,
}

impl Ctx {
    /// Quad spanning `[s0, s1] x [y0, y1]` on `wall`, offset `out` along the normal.
    fn panel(&mut self, wall: &Wall, s: (&Dual, &Dual), y: (&Dual, &Dual), out: f64, label: &str) {
        let corners = [(s.0, y.0), (s.1, y.0), (s.1, y.1), (s.0, y.1)];
        let uv = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let ids: Vec<u32> = corners
            .iter()
            .zip(uv)
            .map(|((ss, yy), t)| self.b.vertex(wall.point(ss, yy, out), t))
            .collect();
        self.b.quad(ids[0], ids[1], ids[2], ids[3], label);
    }

    /// Outward-facing quad from explicit corners (counter-clockwise from outside).
    fn face(&mut self, corners: [Dual3; 4], label: &str) {
        let uv = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let ids: Vec<u32> = corners
            .into_iter()
            .zip(uv)
            .map(|(c, t)| self.b.vertex(c, t))
            .collect();
        self.b.quad(ids[0], ids[1], ids[2], ids[3], label);
    }

    fn triangle(&mut self, corners: [Dual3; 3], label: &str) {
        let uv = [[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]];
        let ids: Vec<u32> = corners
            .into_iter()
            .zip(uv)
            .map(|(c, t)| self.b.vertex(c, t))
            .collect();
        self.b.tri(ids[0], ids[1], ids[2], label);
    }

    /// Small box protruding from the wall over `[s0, s1] x [y0, y1]`.
    fn ledge(&mut self, wall: &Wall, s: (&Dual, &Dual), y: (&Dual, &Dual), depth: f64) {
        self.panel(wall, s, y, depth, "frame");
        let p = |ss: &Dual, yy: &Dual, out: f64| wall.point(ss, yy, out);
        // top and bottom faces
        self.face([p(s.0, y.1, depth), p(s.1, y.1, depth), p(s.1, y.1, 0.0), p(s.0, y.1, 0.0)], "frame");
        self.face([p(s.0, y.0, 0.0), p(s.1, y.0, 0.0), p(s.1, y.0, depth), p(s.0, y.0, depth)], "frame");
        // end caps
        self.face([p(s.0, y.0, 0.0), p(s.0, y.0, depth), p(s.0, y.1, depth), p(s.0, y.1, 0.0)], "frame");
        self.face([p(s.1, y.0, depth), p(s.1, y.0, 0.0), p(s.1, y.1, 0.0), p(s.1, y.1, depth)], "frame");
    }
}

pub fn generate(params: &ParameterVector, lod: LevelOfDetail) -> Result<(TriangleMesh, Jacobian)> {
    check_space(params, &space(), "building", lod, MAX_TIER)?;
    let values = params.values();
    let (p, layout) = seed(params);
    let floors = values[FLOORS].round() as usize;
    let windows = values[WINDOWS].round() as usize;
    let gabled = values[ROOF_TYPE] >= 0.5;

    let w = &p[WIDTH];
    let d = &p[DEPTH];
    let fh = &p[FLOOR_HEIGHT];
    let hw = fh.scale(floors as f64);
    let (hx, hz) = (w.scale(0.5), d.scale(0.5));
    let zero = Dual::constant(0.0);

    let corner = |x: &Dual, y: &Dual, z: &Dual| Dual3::new(x.clone(), y.clone(), z.clone());
    let walls = [
        // front (+z), right (+x), back (-z), left (-x)
        Wall { origin: corner(&-&hx, &zero, &hz), axis: [1.0, 0.0, 0.0], normal: [0.0, 0.0, 1.0], length: w.clone() },
        Wall { origin: corner(&hx, &zero, &hz), axis: [0.0, 0.0, -1.0], normal: [1.0, 0.0, 0.0], length: d.clone() },
        Wall { origin: corner(&hx, &zero, &-&hz), axis: [-1.0, 0.0, 0.0], normal: [0.0, 0.0, -1.0], length: w.clone() },
        Wall { origin: corner(&-&hx, &zero, &-&hz), axis: [0.0, 0.0, 1.0], normal: [-1.0, 0.0, 0.0], length: d.clone() },
    ];

    let mut ctx = Ctx { b: MeshBuilder::new() };

    for (wi, wall) in walls.iter().enumerate() {
        match lod.tier {
            0 => ctx.panel(wall, (&zero, &wall.length), (&zero, &hw), 0.0, "wall"),
            1 => {
                for f in 0..floors {
                    let y0 = fh.scale(f as f64);
                    let y1 = fh.scale((f + 1) as f64);
                    ctx.panel(wall, (&zero, &wall.length), (&y0, &y1), 0.0, "wall");
                }
            }
            _ => {
                for f in 0..floors {
                    let y0 = fh.scale(f as f64);
                    let y1 = fh.scale((f + 1) as f64);
                    if wi == 0 && f == 0 {
                        door_floor(&mut ctx, wall, &p, fh, (&y0, &y1), lod);
                    } else {
                        window_floor(&mut ctx, wall, &p, fh, windows, (&y0, &y1), lod);
                    }
                }
            }
        }
    }

    // bottom
    let (nx, nz) = (-&hx, -&hz);
    ctx.face(
        [corner(&nx, &zero, &nz), corner(&hx, &zero, &nz), corner(&hx, &zero, &hz), corner(&nx, &zero, &hz)],
        "wall",
    );

    if gabled {
        let top = &hw + &p[ROOF_HEIGHT];
        ctx.face(
            [corner(&nx, &hw, &hz), corner(&hx, &hw, &hz), corner(&hx, &top, &zero), corner(&nx, &top, &zero)],
            "roof",
        );
        ctx.face(
            [corner(&hx, &hw, &nz), corner(&nx, &hw, &nz), corner(&nx, &top, &zero), corner(&hx, &top, &zero)],
            "roof",
        );
        ctx.triangle([corner(&hx, &hw, &hz), corner(&hx, &hw, &nz), corner(&hx, &top, &zero)], "roof");
        ctx.triangle([corner(&nx, &hw, &nz), corner(&nx, &hw, &hz), corner(&nx, &top, &zero)], "roof");
    } else {
        ctx.face(
            [corner(&nx, &hw, &hz), corner(&hx, &hw, &hz), corner(&hx, &hw, &nz), corner(&nx, &hw, &nz)],
            "roof",
        );
    }

    let b = ctx.b;
    let (positions, jac) = assemble_jacobian(&b.verts, &layout)?;
    Ok((b.build(positions), jac))
}

/// One floor band of a wall with `n` evenly spaced window openings.
fn window_floor(
    ctx: &mut Ctx,
    wall: &Wall,
    p: &[Dual],
    fh: &Dual,
    n: usize,
    (y0, y1): (&Dual, &Dual),
    lod: LevelOfDetail,
) {
    let zero = Dual::constant(0.0);
    if n == 0 {
        ctx.panel(wall, (&zero, &wall.length), (y0, y1), 0.0, "wall");
        return;
    }
    let half_h = (fh * &p[WINDOW_HEIGHT]).scale(0.5);
    let center = y0 + &fh.scale(WINDOW_CENTER);
    let wy0 = &center - &half_h;
    let wy1 = &center + &half_h;
    ctx.panel(wall, (&zero, &wall.length), (y0, &wy0), 0.0, "wall");
    ctx.panel(wall, (&zero, &wall.length), (&wy1, y1), 0.0, "wall");

    let bay = wall.length.scale(1.0 / n as f64);
    let half_w = (&bay * &p[WINDOW_WIDTH]).scale(0.5);
    let mut left = zero.clone();
    for k in 0..n {
        let c = bay.scale(k as f64 + 0.5);
        let s0 = &c - &half_w;
        let s1 = &c + &half_w;
        ctx.panel(wall, (&left, &s0), (&wy0, &wy1), 0.0, "wall");
        ctx.panel(wall, (&s0, &s1), (&wy0, &wy1), -PANE_INSET, "window");
        if lod.tier >= 3 {
            let sill_y = wy0.offset(-0.12);
            ctx.ledge(wall, (&s0.offset(-0.08), &s1.offset(0.08)), (&sill_y, &wy0), 0.15);
            let lintel_y = wy1.offset(0.1);
            ctx.ledge(wall, (&s0.offset(-0.05), &s1.offset(0.05)), (&wy1, &lintel_y), 0.06);
        }
        left = s1;
    }
    ctx.panel(wall, (&left, &wall.length), (&wy0, &wy1), 0.0, "wall");
}

/// Ground floor of the front wall: a centered door opening, no windows.
fn door_floor(ctx: &mut Ctx, wall: &Wall, p: &[Dual], fh: &Dual, (y0, y1): (&Dual, &Dual), lod: LevelOfDetail) {
    let zero = Dual::constant(0.0);
    let half = p[DOOR_WIDTH].scale(0.5);
    let mid = wall.length.scale(0.5);
    let s0 = &mid - &half;
    let s1 = &mid + &half;
    let top = y0 + &p[DOOR_HEIGHT].min(&fh.scale(0.9));
    ctx.panel(wall, (&zero, &s0), (y0, y1), 0.0, "wall");
    ctx.panel(wall, (&s1, &wall.length), (y0, y1), 0.0, "wall");
    ctx.panel(wall, (&s0, &s1), (&top, y1), 0.0, "wall");
    ctx.panel(wall, (&s0, &s1), (y0, &top), -0.08, "door");
    if lod.tier >= 3 {
        ctx.ledge(wall, (&s0.offset(-0.1), &s1.offset(0.1)), (&top, &top.offset(0.15)), 0.1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn building(floors: f64, windows: f64, roof: f64) -> ParameterVector {
        ParameterVector::new(
            space(),
            vec![10.0, 8.0, 3.0, floors, windows, 0.5, 0.5, roof, 2.0, 1.5, 2.2],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_box() {
        let (m, _) = generate(&building(1.0, 0.0, 0.0), LevelOfDetail::new(0)).unwrap();
        m.check().unwrap();
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.count_label("wall") + m.count_label("roof"), 12);
        assert_eq!(m.count_label("roof"), 2);
    }

    #[test]
    fn floors_add_exact_height() {
        let top = |m: &TriangleMesh| m.positions.chunks_exact(3).map(|p| p[1]).fold(f64::MIN, f64::max);
        for tier in 0..=3 {
            let (a, _) = generate(&building(3.0, 2.0, 0.0), LevelOfDetail::new(tier)).unwrap();
            let (b, _) = generate(&building(4.0, 2.0, 0.0), LevelOfDetail::new(tier)).unwrap();
            assert!((top(&b) - top(&a) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_columns_are_zero() {
        let (_, j) = generate(&building(3.0, 4.0, 1.0), LevelOfDetail::new(3)).unwrap();
        for c in [FLOORS, WINDOWS, ROOF_TYPE] {
            assert!(j.column(c).iter().all(|x| x.to_bits() == 0));
        }
        assert!(j.column(ROOF_HEIGHT).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn openings_and_labels_per_tier() {
        let (m, _) = generate(&building(3.0, 4.0, 1.0), LevelOfDetail::new(2)).unwrap();
        m.check().unwrap();
        // 4 walls x 3 floors x 4 windows, minus the door floor of the front wall
        assert_eq!(m.count_label("window"), 2 * (4 * 3 * 4 - 4));
        assert_eq!(m.count_label("door"), 2);
        assert_eq!(m.count_label("frame"), 0);
        let (m3, _) = generate(&building(3.0, 4.0, 1.0), LevelOfDetail::new(3)).unwrap();
        assert!(m3.count_label("frame") > 0);
        let (m1, _) = generate(&building(3.0, 4.0, 1.0), LevelOfDetail::new(1)).unwrap();
        assert_eq!(m1.count_label("window"), 0);
    }
}
