use std::path::Path;

use image::{ImageBuffer, Rgba, RgbaImage};

use crate::colorspace::RgbColor;
use crate::error::{Error, Result};

/// Row-major RGB raster with an optional per-pixel alpha (ignored when scanning).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<RgbColor>,
    alpha: Option<Vec<u8>>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: RgbColor) -> Self {
        Self { width, height, pixels: vec![fill; width * height], alpha: None }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<RgbColor>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} pixels do not fill a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels, alpha: None })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[RgbColor] {
        &self.pixels
    }

    pub fn row(&self, y: usize) -> &[RgbColor] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn get(&self, x: usize, y: usize) -> RgbColor {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: RgbColor) {
        self.pixels[y * self.width + x] = color;
    }

    /// Marks a pixel fully transparent (alpha 0) while keeping its RGB value.
    pub fn set_transparent(&mut self, x: usize, y: usize) {
        let alpha = self.alpha.get_or_insert_with(|| vec![255; self.pixels.len()]);
        alpha[y * self.width + x] = 0;
    }

    pub fn to_rgba_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 4);
        for (i, p) in self.pixels.iter().enumerate() {
            let a = self.alpha.as_ref().map_or(255, |alpha| alpha[i]);
            out.extend_from_slice(&[p.red, p.green, p.blue, a]);
        }
        out
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| RgbColor::from(p.0)).collect();
        Self::from_pixels(w as usize, h as usize, pixels)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = u32::try_from(self.width).map_err(|_| Error::InvalidParameter("raster too wide".into()))?;
        let h = u32::try_from(self.height).map_err(|_| Error::InvalidParameter("raster too tall".into()))?;
        let img: RgbaImage = ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, self.to_rgba_bytes())
            .ok_or_else(|| Error::InvalidParameter("raster buffer size mismatch".into()))?;
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
        crate::io::write_atomic(path, &bytes)
    }
}
