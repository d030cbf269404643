use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::TriangleMesh;
use crate::io::RgbImage;
use crate::render::{Camera, Rasterizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SemanticClass {
    Background = 0,
    Branch = 1,
    Foliage = 2,
}

impl SemanticClass {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Self::Background),
            1 => Some(Self::Branch),
            2 => Some(Self::Foliage),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMask {
    width: u32,
    height: u32,
    classes: Vec<SemanticClass>,
}

const PALETTE: [u8; 9] = [0, 0, 0, 110, 75, 40, 40, 160, 50];

impl SemanticMask {
    pub fn new(width: u32, height: u32, classes: Vec<SemanticClass>) -> Result<Self> {
        if classes.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "{width}x{height} mask needs {} classes, got {}",
                width as usize * height as usize,
                classes.len()
            )));
        }
        Ok(Self { width, height, classes })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> SemanticClass) -> Self {
        let classes = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, classes }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn classes(&self) -> &[SemanticClass] {
        &self.classes
    }

    pub fn get(&self, x: u32, y: u32) -> SemanticClass {
        self.classes[(y * self.width + x) as usize]
    }

    pub fn count(&self, class: SemanticClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Pixels that belong to the object (branch or foliage).
    pub fn object_count(&self) -> usize {
        self.classes.len() - self.count(SemanticClass::Background)
    }

    /// Object coverage as a binary silhouette.
    pub fn silhouette(&self) -> crate::render::SilhouetteMask {
        crate::render::SilhouetteMask::from_fn(self.width, self.height, |x, y| {
            (self.get(x, y) != SemanticClass::Background) as u8 as f64
        })
    }

    /// Nearest-neighbor resize.
    pub fn resampled(&self, width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |x, y| {
            let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as u32;
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as u32;
            self.get(sx.min(self.width - 1), sy.min(self.height - 1))
        })
    }

    /// Indexed PNG, pixel values 0 = background, 1 = branch, 2 = foliage.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(&PALETTE[..]);
        let data: Vec<u8> = self.classes.iter().map(|&c| c as u8).collect();
        encoder
            .write_header()
            .and_then(|mut w| w.write_image_data(&data))
            .map_err(|e| Error::format(path, e.to_string()))
    }

    /// Reads an indexed or 8-bit grayscale PNG whose values are class indices.
    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
        if info.bit_depth != png::BitDepth::Eight
            || !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
        {
            return Err(Error::format(path, "semantic masks must be 8-bit indexed or grayscale"));
        }
        let classes = buf[..info.buffer_size()]
            .iter()
            .map(|&v| SemanticClass::from_index(v).ok_or_else(|| Error::format(path, format!("class index {v}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(info.width, info.height, classes)
    }
}

/// HSV bands used to classify reference photo pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorThresholds {
    pub foliage_hue: (f64, f64),
    pub foliage_min_saturation: f64,
    pub foliage_min_value: f64,
    pub bark_max_hue: f64,
    pub gray_max_saturation: f64,
    pub bark_value: (f64, f64),
}

impl Default for ColorThresholds {
    fn default() -> Self {
        Self {
            foliage_hue: (60.0, 180.0),
            foliage_min_saturation: 0.25,
            foliage_min_value: 0.15,
            bark_max_hue: 60.0,
            gray_max_saturation: 0.25,
            bark_value: (0.1, 0.8),
        }
    }
}

/// Hue in degrees, saturation and value in [0, 1]. Gray has hue 0.
pub fn hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

pub fn classify_color(rgb: [u8; 3], t: &ColorThresholds) -> SemanticClass {
    let (h, s, v) = hsv(rgb);
    if (t.foliage_hue.0..=t.foliage_hue.1).contains(&h) && s > t.foliage_min_saturation && v > t.foliage_min_value {
        return SemanticClass::Foliage;
    }
    let bark_value = v > t.bark_value.0 && v <= t.bark_value.1;
    if bark_value && (h < t.bark_max_hue || s <= t.gray_max_saturation) {
        return SemanticClass::Branch;
    }
    SemanticClass::Background
}

pub fn semantic_from_color(image: &RgbImage) -> SemanticMask {
    semantic_from_color_with(image, &ColorThresholds::default())
}

pub fn semantic_from_color_with(image: &RgbImage, t: &ColorThresholds) -> SemanticMask {
    SemanticMask {
        width: image.width,
        height: image.height,
        classes: image.pixels.iter().map(|&p| classify_color(p, t)).collect(),
    }
}

/// Renders a tree: pixels at least half covered by leaves are foliage, other
/// covered pixels are branches.
pub fn render_semantic(rasterizer: &Rasterizer, mesh: &TriangleMesh, cam: &Camera) -> Result<SemanticMask> {
    let all: Vec<[u32; 3]> = mesh.indices.clone();
    let leaves = mesh.indices_with(&["leaf"]);
    let cover = rasterizer.render(&mesh.positions, &all, cam)?;
    let leaf = rasterizer.render(&mesh.positions, &leaves, cam)?;
    let classes = cover
        .coverage()
        .iter()
        .zip(leaf.coverage())
        .map(|(&c, &l)| {
            if l >= 0.5 {
                SemanticClass::Foliage
            } else if c >= 0.5 {
                SemanticClass::Branch
            } else {
                SemanticClass::Background
            }
        })
        .collect();
    SemanticMask::new(cam.width, cam.height, classes)
}

/// Paints a semantic mask with the palette colors, which classify back to the
/// same classes.
pub fn colorize(mask: &SemanticMask) -> RgbImage {
    RgbImage::from_fn(mask.width, mask.height, |x, y| {
        let k = mask.get(x, y) as usize * 3;
        match mask.get(x, y) {
            SemanticClass::Background => [255, 255, 255],
            _ => [PALETTE[k], PALETTE[k + 1], PALETTE[k + 2]],
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn color_examples() {
        let t = ColorThresholds::default();
        assert_eq!(classify_color([0, 255, 0], &t), SemanticClass::Foliage);
        assert_eq!(classify_color([255, 255, 255], &t), SemanticClass::Background);
        assert_eq!(classify_color([100, 100, 100], &t), SemanticClass::Branch);
        assert_eq!(classify_color([120, 72, 30], &t), SemanticClass::Branch);
        assert_eq!(classify_color([0, 0, 0], &t), SemanticClass::Background);
    }

    #[test]
    fn hsv_reference_values() {
        assert_eq!(hsv([255, 0, 0]), (0.0, 1.0, 1.0));
        assert_eq!(hsv([0, 255, 0]).0, 120.0);
        assert_eq!(hsv([0, 0, 255]).0, 240.0);
        let (h, s, v) = hsv([255, 128, 0]);
        assert!((h - 30.1176).abs() < 1e-3 && s == 1.0 && v == 1.0);
    }

    #[test]
    fn palette_round_trips_through_classifier() {
        let m = SemanticMask::from_fn(3, 1, |x, _| SemanticClass::from_index(x as u8).unwrap());
        assert_eq!(semantic_from_color(&colorize(&m)), m);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let m = SemanticMask::from_fn(7, 5, |x, y| SemanticClass::from_index(((x + y) % 3) as u8).unwrap());
        m.save_png(&path).unwrap();
        assert_eq!(SemanticMask::load_png(&path).unwrap(), m);
    }

    #[test]
    fn tree_render_has_both_classes() {
        let info = crate::generators::lookup("tree").unwrap();
        let preset = info.presets().remove(0);
        let mesh = crate::generators::tree::generate(&preset.vector, preset.seed.unwrap_or(0)).unwrap();
        let (lo, hi) = mesh.bounds().unwrap();
        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
        let cam = Camera::new(0.0, 0.1, 2.2 * (hi[1] - lo[1]), 0.8, 96).unwrap().with_target(mid);
        let m = render_semantic(&Rasterizer::default(), &mesh, &cam).unwrap();
        assert!(m.count(SemanticClass::Foliage) > 0);
        assert!(m.count(SemanticClass::Branch) > 0);
    }

    proptest! {
        #[test]
        fn classification_is_total(r: u8, g: u8, b: u8) {
            let c = classify_color([r, g, b], &ColorThresholds::default());
            prop_assert!(matches!(c, SemanticClass::Background | SemanticClass::Branch | SemanticClass::Foliage));
        }
    }
}
