use crate::error::{Error, Result};

/// Indexed triangle mesh with one structural label per triangle.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TriangleMesh {
    /// 3 per vertex.
    pub positions: Vec<f64>,
    /// 3 per vertex, unit length.
    pub normals: Vec<f64>,
    /// 2 per vertex, in [0, 1].
    pub texcoords: Vec<f64>,
    pub indices: Vec<[u32; 3]>,
    /// Distinct part names; `triangle_parts` indexes into this list.
    pub labels: Vec<String>,
    pub triangle_parts: Vec<u16>,
}

impl TriangleMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len() / 3
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty() || self.positions.is_empty()
    }

    pub fn vertex(&self, i: usize) -> [f64; 3] {
        [
            self.positions[3 * i],
            self.positions[3 * i + 1],
            self.positions[3 * i + 2],
        ]
    }

    pub fn label(&self, triangle: usize) -> &str {
        &self.labels[self.triangle_parts[triangle] as usize]
    }

    pub fn count_label(&self, label: &str) -> usize {
        match self.labels.iter().position(|l| l == label) {
            Some(p) => self.triangle_parts.iter().filter(|&&t| t as usize == p).count(),
            None => 0,
        }
    }

    /// Triangles whose label is not in `excluded`.
    pub fn indices_excluding(&self, excluded: &[&str]) -> Vec<[u32; 3]> {
        if excluded.is_empty() {
            return self.indices.clone();
        }
        let skip: Vec<bool> = self
            .labels
            .iter()
            .map(|l| excluded.contains(&l.as_str()))
            .collect();
        self.indices
            .iter()
            .zip(&self.triangle_parts)
            .filter(|(_, &p)| !skip[p as usize])
            .map(|(t, _)| *t)
            .collect()
    }

    /// Triangles whose label is in `included`.
    pub fn indices_with(&self, included: &[&str]) -> Vec<[u32; 3]> {
        let keep: Vec<bool> = self
            .labels
            .iter()
            .map(|l| included.contains(&l.as_str()))
            .collect();
        self.indices
            .iter()
            .zip(&self.triangle_parts)
            .filter(|(_, &p)| keep[p as usize])
            .map(|(t, _)| *t)
            .collect()
    }

    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        if self.positions.is_empty() {
            return None;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in self.positions.chunks_exact(3) {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    /// Copy centered on its bounding-box center and scaled to unit
    /// bounding-sphere radius.
    pub fn normalized(&self) -> Result<TriangleMesh> {
        let (lo, hi) = self
            .bounds()
            .filter(|_| !self.indices.is_empty())
            .ok_or_else(|| Error::EmptyMesh("mesh has no triangles".into()))?;
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let r = self
            .positions
            .chunks_exact(3)
            .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        if !(r > 0.0) {
            return Err(Error::EmptyMesh("mesh has zero extent".into()));
        }
        Ok(self.transformed(|p| [(p[0] - c[0]) / r, (p[1] - c[1]) / r, (p[2] - c[2]) / r]))
    }

    /// Applies an affine-like point map; normals are kept (valid for
    /// translations and uniform scalings).
    pub fn transformed(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> TriangleMesh {
        let mut out = self.clone();
        for p in out.positions.chunks_exact_mut(3) {
            let q = f([p[0], p[1], p[2]]);
            p.copy_from_slice(&q);
        }
        out
    }

    /// Checks the structural invariants: valid indices, unit normals,
    /// texcoords in range, one label per triangle.
    pub fn check(&self) -> Result<()> {
        let n = self.vertex_count();
        let fail = |m: String| Err(Error::Validation(vec![m]));
        if self.positions.len() % 3 != 0 || self.normals.len() != self.positions.len() {
            return fail("normal/position buffer sizes differ".into());
        }
        if self.texcoords.len() != 2 * n {
            return fail("texcoord buffer size differs from vertex count".into());
        }
        if self.triangle_parts.len() != self.indices.len() {
            return fail("every triangle needs exactly one part label".into());
        }
        if let Some(t) = self.indices.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return fail(format!("triangle {t:?} references a missing vertex"));
        }
        if self.triangle_parts.iter().any(|&p| p as usize >= self.labels.len()) {
            return fail("part index out of range".into());
        }
        for (i, nrm) in self.normals.chunks_exact(3).enumerate() {
            let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
            if (len - 1.0).abs() > 1e-4 {
                return fail(format!("normal {i} has length {len}"));
            }
        }
        if let Some(t) = self.texcoords.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return fail(format!("texcoord {t} outside [0, 1]"));
        }
        Ok(())
    }

    /// Appends another mesh, merging label tables.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertex_count() as u32;
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.texcoords.extend_from_slice(&other.texcoords);
        let remap: Vec<u16> = other.labels.iter().map(|l| self.part_id(l)).collect();
        for (t, &p) in other.indices.iter().zip(&other.triangle_parts) {
            self.indices.push(t.map(|i| i + base));
            self.triangle_parts.push(remap[p as usize]);
        }
    }

    pub(crate) fn part_id(&mut self, label: &str) -> u16 {
        match self.labels.iter().position(|l| l == label) {
            Some(p) => p as u16,
            None => {
                self.labels.push(label.to_owned());
                (self.labels.len() - 1) as u16
            }
        }
    }
}

/// Collects vertices (of any position type) and labeled triangles.
#[derive(Clone, Debug)]
pub struct MeshBuilder<V> {
    pub verts: Vec<V>,
    texcoords: Vec<f64>,
    indices: Vec<[u32; 3]>,
    labels: Vec<String>,
    parts: Vec<u16>,
}

impl<V> Default for MeshBuilder<V> {
    fn default() -> Self {
        Self {
            verts: Vec::new(),
            texcoords: Vec::new(),
            indices: Vec::new(),
            labels: Vec::new(),
            parts: Vec::new(),
        }
    }
}

impl<V> MeshBuilder<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, v: V, uv: [f64; 2]) -> u32 {
        self.verts.push(v);
        self.texcoords.push(uv[0].clamp(0.0, 1.0));
        self.texcoords.push(uv[1].clamp(0.0, 1.0));
        (self.verts.len() - 1) as u32
    }

    fn part(&mut self, label: &str) -> u16 {
        match self.labels.iter().position(|l| l == label) {
            Some(p) => p as u16,
            None => {
                self.labels.push(label.to_owned());
                (self.labels.len() - 1) as u16
            }
        }
    }

    /// Counter-clockwise when seen from the front.
    pub fn tri(&mut self, a: u32, b: u32, c: u32, label: &str) {
        let p = self.part(label);
        self.indices.push([a, b, c]);
        self.parts.push(p);
    }

    /// Corners counter-clockwise when seen from the front.
    pub fn quad(&mut self, a: u32, b: u32, c: u32, d: u32, label: &str) {
        self.tri(a, b, c, label);
        self.tri(a, c, d, label);
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len()
    }

    /// Finishes the mesh from flat positions, computing area-weighted
    /// vertex normals.
    pub fn build(self, positions: Vec<f64>) -> TriangleMesh {
        debug_assert_eq!(positions.len(), 3 * self.verts.len());
        let normals = vertex_normals(&positions, &self.indices);
        TriangleMesh {
            positions,
            normals,
            texcoords: self.texcoords,
            indices: self.indices,
            labels: self.labels,
            triangle_parts: self.parts,
        }
    }
}

impl MeshBuilder<[f64; 3]> {
    pub fn finish(self) -> TriangleMesh {
        let positions = self.verts.iter().flatten().copied().collect();
        self.build(positions)
    }
}

pub(crate) fn vertex_normals(positions: &[f64], indices: &[[u32; 3]]) -> Vec<f64> {
    let mut acc = vec![0.0; positions.len()];
    let p = |i: u32| {
        let i = i as usize * 3;
        [positions[i], positions[i + 1], positions[i + 2]]
    };
    for t in indices {
        let (a, b, c) = (p(t[0]), p(t[1]), p(t[2]));
        let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        for &v in t {
            for k in 0..3 {
                acc[3 * v as usize + k] += n[k];
            }
        }
    }
    for n in acc.chunks_exact_mut(3) {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 1e-300 && len.is_finite() {
            n.iter_mut().for_each(|x| *x /= len);
        } else {
            n.copy_from_slice(&[0.0, 1.0, 0.0]);
        }
    }
    acc
}
