use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Per-pixel object coverage in [0, 1], row-major, top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteMask {
    width: u32,
    height: u32,
    coverage: Vec<f64>,
}

impl SilhouetteMask {
    pub fn new(width: u32, height: u32, coverage: Vec<f64>) -> Result<Self> {
        if coverage.len() != (width as usize) * (height as usize) {
            return Err(Error::Dimension(format!(
                "{}x{} mask needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                coverage.len()
            )));
        }
        if let Some(i) = coverage.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Dimension(format!("coverage {} at pixel {i} outside [0, 1]", coverage[i])));
        }
        Ok(Self { width, height, coverage })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            coverage: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f64) -> Self {
        let mut coverage = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                coverage.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, coverage }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.coverage[(y * self.width + x) as usize]
    }

    pub fn len(&self) -> usize {
        self.coverage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coverage.is_empty()
    }

    /// Sum of coverage, i.e. the silhouette area in pixels.
    pub fn area(&self) -> f64 {
        self.coverage.iter().sum()
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.coverage.iter().filter(|&&c| c >= threshold).count()
    }

    pub fn binarized(&self, threshold: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            coverage: self.coverage.iter().map(|&c| if c >= threshold { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Box-filtered resampling; each output pixel averages the source area it
    /// covers.
    pub fn resampled(&self, width: u32, height: u32) -> Self {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let wx = box_weights(self.width, width);
        let wy = box_weights(self.height, height);
        let sw = self.width as usize;
        let mut rows = vec![0.0; sw * height as usize];
        for (oy, taps) in wy.iter().enumerate() {
            for &(sy, w) in taps {
                let src = &self.coverage[sy * sw..(sy + 1) * sw];
                for (d, s) in rows[oy * sw..(oy + 1) * sw].iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        let mut coverage = vec![0.0; width as usize * height as usize];
        for oy in 0..height as usize {
            for (ox, taps) in wx.iter().enumerate() {
                let v: f64 = taps.iter().map(|&(sx, w)| w * rows[oy * sw + sx]).sum();
                coverage[oy * width as usize + ox] = v.clamp(0.0, 1.0);
            }
        }
        Self { width, height, coverage }
    }

    /// Reads an 8-bit grayscale PNG (other color types are converted by
    /// luminance, alpha ignored); coverage = value / 255.
    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
        let channels = info.color_type.samples();
        let pixels = &buf[..info.buffer_size()];
        let coverage = pixels
            .chunks_exact(channels)
            .map(|p| {
                let v = match channels {
                    1 | 2 => p[0] as f64,
                    _ => 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64,
                };
                (v / 255.0).clamp(0.0, 1.0)
            })
            .collect();
        Self::new(info.width, info.height, coverage)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let data: Vec<u8> = self.coverage.iter().map(|c| (c * 255.0).round() as u8).collect();
        encoder
            .write_header()
            .and_then(|mut w| w.write_image_data(&data))
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

/// For each destination cell, the source cells it overlaps with normalized
/// weights.
fn box_weights(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src as usize {
                let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((s, overlap / scale));
                }
                s += 1;
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_values() {
        assert!(SilhouetteMask::new(2, 2, vec![0.0; 3]).is_err());
        assert!(SilhouetteMask::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn resample_preserves_area_fraction() {
        let m = SilhouetteMask::from_fn(64, 64, |x, y| if x < 20 && y > 10 { 1.0 } else { 0.0 });
        for (w, h) in [(32, 32), (128, 128), (48, 40)] {
            let r = m.resampled(w, h);
            let frac = r.area() / (w * h) as f64;
            assert!((frac - m.area() / 4096.0).abs() < 1e-9, "{w}x{h}");
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = SilhouetteMask::from_fn(5, 3, |x, y| (x + y) as f64 / 6.0);
        m.save_png(&path).unwrap();
        let back = SilhouetteMask::load_png(&path).unwrap();
        assert_eq!(back.dims(), (5, 3));
        for (a, b) in m.coverage().iter().zip(back.coverage()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
