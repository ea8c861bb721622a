//! Pixel-by-pixel heatmap scanning.
//!
//! Each pixel is georeferenced at its center, classified against the palette
//! and either emitted as a [`NoiseSample`] carrying its band midpoint or
//! dropped. Pixels are classified independently; nothing is smoothed or
//! inferred from neighbours.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorspace::{classify_lab, rgb_to_lab, RgbColor};
use crate::error::{Error, Result};
use crate::georef::{pixel_to_geo, AffineTransform};
use crate::legend::Palette;
use crate::raster::Raster;

pub const SAMPLE_HEADER: [&str; 6] = ["latitude", "longitude", "red", "green", "blue", "noise"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    pub latitude: f64,
    pub longitude: f64,
    pub red: u8,
    pub green: u8,
    pub blue: u8,
    #[serde(rename = "noise")]
    pub noise_db: f64,
}

impl NoiseSample {
    pub fn color(&self) -> RgbColor {
        RgbColor::new(self.red, self.green, self.blue)
    }
}

/// Classification of every distinct color in a raster, computed once.
#[derive(Debug, Clone)]
pub struct ColorLookup {
    map: HashMap<RgbColor, Option<f64>>,
}

impl ColorLookup {
    pub fn build(raster: &Raster, palette: &Palette, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
        }
        let unique: Vec<RgbColor> = {
            let set: HashSet<RgbColor> = raster.pixels().iter().copied().collect();
            let mut v: Vec<_> = set.into_iter().collect();
            v.sort_unstable();
            v
        };
        let labs = palette.band_labs();
        let classes = crate::par::map_indexed(unique.len(), |i| {
            classify_lab(rgb_to_lab(unique[i]), labs, threshold).map(|b| palette.bands()[b].midpoint_db())
        });
        Ok(Self { map: unique.into_iter().zip(classes).collect() })
    }

    pub fn noise_for(&self, color: RgbColor) -> Option<f64> {
        self.map.get(&color).copied().flatten()
    }
}

/// Lazily emits samples in row-major order.
pub struct ScanIter<'a> {
    raster: &'a Raster,
    transform: AffineTransform,
    lookup: ColorLookup,
    x: usize,
    y: usize,
}

impl Iterator for ScanIter<'_> {
    type Item = Result<NoiseSample>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.y < self.raster.height() {
            let (x, y) = (self.x, self.y);
            self.x += 1;
            if self.x == self.raster.width() {
                self.x = 0;
                self.y += 1;
            }
            let color = self.raster.get(x, y);
            let Some(noise_db) = self.lookup.noise_for(color) else {
                continue;
            };
            let (longitude, latitude) = pixel_to_geo(&self.transform, x as f64 + 0.5, y as f64 + 0.5);
            if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
                return Some(Err(Error::DegenerateGeometry(format!(
                    "pixel ({x}, {y}) maps outside valid coordinates ({longitude}, {latitude})"
                ))));
            }
            return Some(Ok(NoiseSample {
                latitude,
                longitude,
                red: color.red,
                green: color.green,
                blue: color.blue,
                noise_db,
            }));
        }
        None
    }
}

pub fn scan_image<'a>(
    raster: &'a Raster,
    transform: &AffineTransform,
    palette: &Palette,
    threshold: f64,
) -> Result<ScanIter<'a>> {
    if raster.width() == 0 || raster.height() == 0 {
        return Err(Error::InvalidParameter("image is empty".into()));
    }
    transform.validate()?;
    let lookup = ColorLookup::build(raster, palette, threshold)?;
    Ok(ScanIter { raster, transform: *transform, lookup, x: 0, y: 0 })
}

/// Convenience: scans and collects.
pub fn scan_to_vec(
    raster: &Raster,
    transform: &AffineTransform,
    palette: &Palette,
    threshold: f64,
) -> Result<Vec<NoiseSample>> {
    scan_image(raster, transform, palette, threshold)?.collect()
}

pub fn write_samples<W: Write>(
    out: W,
    samples: impl IntoIterator<Item = Result<NoiseSample>>,
) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLE_HEADER)?;
    let mut n = 0;
    for s in samples {
        let s = s?;
        w.write_record(&[
            s.latitude.to_string(),
            s.longitude.to_string(),
            s.red.to_string(),
            s.green.to_string(),
            s.blue.to_string(),
            s.noise_db.to_string(),
        ])?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// Streams samples from a delimited file with the sample header.
pub fn read_samples<R: Read>(input: R) -> Result<impl Iterator<Item = Result<NoiseSample>>> {
    let mut reader = csv::Reader::from_reader(input);
    crate::io::expect_header(reader.headers()?, &SAMPLE_HEADER, "sample file")?;
    Ok(reader.into_deserialize::<NoiseSample>().map(|r| r.map_err(Error::from)))
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<impl Iterator<Item = Result<NoiseSample>>> {
    read_samples(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::delta_e_2000;
    use crate::legend::{builtin_palette, PaletteName};

    fn palette() -> &'static Palette {
        builtin_palette(PaletteName::ThessalonikiNeapoli)
    }

    #[test]
    fn uniform_yellow_image() {
        let raster = Raster::new(2, 2, RgbColor::new(255, 255, 0));
        let samples = scan_to_vec(&raster, &AffineTransform::IDENTITY, palette(), 20.0).unwrap();
        assert_eq!(samples.len(), 4);
        assert!(samples.iter().all(|s| s.noise_db == 47.5));
        let coords: Vec<_> = samples.iter().map(|s| (s.longitude, s.latitude)).collect();
        assert_eq!(coords, vec![(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]);
    }

    #[test]
    fn blended_transition_pixel_is_dropped() {
        let low = palette().bands()[5].color; // [65,70)
        let high = palette().bands()[6].color; // [70,75)
        let blend = RgbColor::new(
            ((u16::from(low.red) + u16::from(high.red) + 1) / 2) as u8,
            ((u16::from(low.green) + u16::from(high.green) + 1) / 2) as u8,
            ((u16::from(low.blue) + u16::from(high.blue) + 1) / 2) as u8,
        );
        let lab = rgb_to_lab(blend);
        for band in palette().bands() {
            assert!(delta_e_2000(lab, rgb_to_lab(band.color)) > 20.0);
        }
        let raster = Raster::from_pixels(3, 1, vec![low, blend, low]).unwrap();
        let samples = scan_to_vec(&raster, &AffineTransform::IDENTITY, palette(), 20.0).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].longitude, 0.5);
        assert_eq!(samples[1].longitude, 2.5);
    }

    #[test]
    fn white_image_is_empty() {
        let raster = Raster::new(4, 3, RgbColor::new(255, 255, 255));
        assert!(scan_to_vec(&raster, &AffineTransform::IDENTITY, palette(), 20.0).unwrap().is_empty());
    }

    #[test]
    fn degenerate_transform_rejected() {
        let raster = Raster::new(1, 1, RgbColor::new(255, 255, 0));
        let t = AffineTransform { a: 0.0, e: 0.0, ..AffineTransform::IDENTITY };
        assert!(matches!(scan_image(&raster, &t, palette(), 20.0), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn sample_csv_round_trip() {
        let raster = Raster::new(3, 2, RgbColor::new(254, 196, 71));
        let t = AffineTransform { a: 1e-4, b: 0.0, c: 22.9, d: 0.0, e: -1e-4, f: 40.6 };
        let samples = scan_to_vec(&raster, &t, palette(), 20.0).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, samples.iter().copied().map(Ok)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("latitude,longitude,red,green,blue,noise\n"));
        let back: Vec<_> = read_samples(&buf[..]).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(back, samples);
    }

    #[test]
    fn wrong_sample_header_is_schema_error() {
        let text = "lat,lon,red,green,blue,noise\n";
        assert!(matches!(read_samples(text.as_bytes()), Err(Error::Schema(_))));
    }
}
