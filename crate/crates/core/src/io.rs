//! Wavefront OBJ meshes and RGB PNG images.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::generators::{MeshBuilder, TriangleMesh};

/// Serializes a mesh with one `g` group per part label.
pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for p in mesh.positions.chunks_exact(3) {
        let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
    }
    for t in mesh.texcoords.chunks_exact(2) {
        let _ = writeln!(out, "vt {} {}", t[0], t[1]);
    }
    for n in mesh.normals.chunks_exact(3) {
        let _ = writeln!(out, "vn {} {} {}", n[0], n[1], n[2]);
    }
    let has_uv = mesh.texcoords.len() / 2 == mesh.vertex_count();
    let has_n = mesh.normals.len() / 3 == mesh.vertex_count();
    for (part, label) in mesh.labels.iter().enumerate() {
        let tris: Vec<&[u32; 3]> = mesh
            .indices
            .iter()
            .zip(&mesh.triangle_parts)
            .filter(|(_, &p)| p as usize == part)
            .map(|(t, _)| t)
            .collect();
        if tris.is_empty() {
            continue;
        }
        let _ = writeln!(out, "g {label}");
        for t in tris {
            out.push('f');
            for &v in t {
                let v = v + 1;
                let _ = match (has_uv, has_n) {
                    (true, true) => write!(out, " {v}/{v}/{v}"),
                    (true, false) => write!(out, " {v}/{v}"),
                    (false, true) => write!(out, " {v}//{v}"),
                    (false, false) => write!(out, " {v}"),
                };
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, obj_string(mesh)).map_err(|e| Error::io(path, e))
}

/// Parses vertices, faces (fan-triangulated) and `g`/`o` groups; normals are
/// recomputed and texture coordinates dropped.
pub fn parse_obj(text: &str, origin: &Path) -> Result<TriangleMesh> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<([u32; 3], String)> = Vec::new();
    let mut group = String::from("default");
    for (line_no, line) in text.lines().enumerate() {
        let bad = |msg: &str| Error::format(origin, format!("line {}: {msg}", line_no + 1));
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for slot in &mut p {
                    *slot = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| bad("malformed vertex"))?;
                }
                positions.push(p);
            }
            Some("f") => {
                let mut corners = Vec::new();
                for w in words {
                    let first = w.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| bad("malformed face index"))?;
                    let resolved = if i < 0 { positions.len() as i64 + i } else { i - 1 };
                    if resolved < 0 || resolved >= positions.len() as i64 {
                        return Err(bad("face index out of range"));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(bad("face with fewer than 3 vertices"));
                }
                for k in 1..corners.len() - 1 {
                    faces.push(([corners[0], corners[k], corners[k + 1]], group.clone()));
                }
            }
            Some("g") | Some("o") => {
                group = words.next().unwrap_or("default").to_owned();
            }
            _ => {}
        }
    }
    let mut b: MeshBuilder<[f64; 3]> = MeshBuilder::new();
    for p in positions {
        b.vertex(p, [0.0, 0.0]);
    }
    for (t, label) in faces {
        b.tri(t[0], t[1], t[2], &label);
    }
    Ok(b.finish())
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// 8-bit RGB image, row-major, top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Reads any 8- or 16-bit PNG; gray is replicated, alpha dropped.
    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
        let channels = info.color_type.samples();
        let pixels = buf[..info.buffer_size()]
            .chunks_exact(channels)
            .map(|p| if channels < 3 { [p[0]; 3] } else { [p[0], p[1], p[2]] })
            .collect();
        Self::new(info.width, info.height, pixels)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let data: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        encoder
            .write_header()
            .and_then(|mut w| w.write_image_data(&data))
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{dish, LevelOfDetail};

    #[test]
    fn obj_round_trip_keeps_groups() {
        let p = crate::generators::lookup("dish").unwrap().presets().remove(0).vector;
        let (mesh, _) = dish::generate(&p, LevelOfDetail::new(0)).unwrap();
        let text = obj_string(&mesh);
        assert!(text.contains("\ng body\n"));
        let back = parse_obj(&text, Path::new("mem.obj")).unwrap();
        assert_eq!(back.vertex_count(), mesh.vertex_count());
        assert_eq!(back.triangle_count(), mesh.triangle_count());
        assert_eq!(back.count_label("body"), mesh.count_label("body"));
        assert_eq!(back.count_label("handle"), mesh.count_label("handle"));
        for (a, b) in back.positions.iter().zip(&mesh.positions) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parses_polygons_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n";
        let m = parse_obj(text, Path::new("q.obj")).unwrap();
        assert_eq!(m.indices, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.label(0), "default");
        assert!(parse_obj("v 0 0\n", Path::new("x.obj")).is_err());
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n", Path::new("x.obj")).is_err());
    }

    #[test]
    fn rgb_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let img = RgbImage::from_fn(4, 3, |x, y| [x as u8 * 60, y as u8 * 80, 7]);
        img.save_png(&path).unwrap();
        assert_eq!(RgbImage::load_png(&path).unwrap(), img);
    }
}
