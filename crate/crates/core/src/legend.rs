//! Legend palettes: color ↔ decibel-band associations.
//!
//! The two built-in palettes reproduce the published heatmap legends. The
//! open-ended top band ("80+ dB") is closed at 85 dB, the top of the noise
//! range of the reconstructed dataset, so that its midpoint is 82.5 dB.

use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::colorspace::{rgb_to_lab, LabColor, RgbColor};
use crate::error::{Error, Result};

/// Upper bound used to close an open-ended top band.
pub const OPEN_BAND_CAP_DB: f64 = 85.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendBand {
    pub low_db: f64,
    /// Exclusive upper bound.
    pub high_db: f64,
    pub color: RgbColor,
    /// The band was published without an upper bound and closed at [`OPEN_BAND_CAP_DB`].
    #[serde(default)]
    pub open_ended: bool,
}

impl LegendBand {
    pub fn new(low_db: f64, high_db: f64, color: RgbColor) -> Self {
        Self { low_db, high_db, color, open_ended: false }
    }

    pub fn midpoint_db(&self) -> f64 {
        band_midpoint(self)
    }

    pub fn contains(&self, db: f64) -> bool {
        db >= self.low_db && (db < self.high_db || (self.open_ended && db <= self.high_db))
    }
}

pub fn band_midpoint(band: &LegendBand) -> f64 {
    (band.low_db + band.high_db) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaletteName {
    ThessalonikiNeapoli,
    Kalamaria,
}

impl PaletteName {
    pub fn is_builtin(name: &str) -> bool {
        name.parse::<Self>().is_ok()
    }
}

impl FromStr for PaletteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thessaloniki_neapoli" => Ok(Self::ThessalonikiNeapoli),
            "kalamaria" => Ok(Self::Kalamaria),
            other => Err(Error::Config(format!(
                "unknown palette {other:?} (expected thessaloniki_neapoli or kalamaria)"
            ))),
        }
    }
}

/// A validated, ascending list of bands with their LAB colors precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    bands: Vec<LegendBand>,
    labs: Vec<(f64, LabColor)>,
}

impl Palette {
    pub fn new(bands: Vec<LegendBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Config("palette has no bands".into()));
        }
        for band in &bands {
            if !(band.low_db.is_finite() && band.high_db.is_finite() && band.low_db < band.high_db) {
                return Err(Error::Config(format!(
                    "band [{}, {}) is empty or not finite",
                    band.low_db, band.high_db
                )));
            }
        }
        for pair in bands.windows(2) {
            if pair[1].low_db < pair[0].high_db {
                return Err(Error::Config(format!(
                    "bands [{}, {}) and [{}, {}) overlap or are not ascending",
                    pair[0].low_db, pair[0].high_db, pair[1].low_db, pair[1].high_db
                )));
            }
        }
        for (i, a) in bands.iter().enumerate() {
            if bands[i + 1..].iter().any(|b| b.color == a.color) {
                return Err(Error::Config(format!("color {:?} is used by more than one band", a.color)));
            }
        }
        let labs = bands.iter().map(|b| (b.low_db, rgb_to_lab(b.color))).collect();
        Ok(Self { bands, labs })
    }

    pub fn bands(&self) -> &[LegendBand] {
        &self.bands
    }

    pub fn band_labs(&self) -> &[(f64, LabColor)] {
        &self.labs
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// The band whose interval contains `db`, if any.
    pub fn band_for(&self, db: f64) -> Option<&LegendBand> {
        self.bands.iter().find(|b| b.contains(db))
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bands.iter().map(band_midpoint).collect()
    }

    /// Loads a palette from a TOML file with one `[[band]]` table per entry
    /// (`low_db`, `high_db`, `red`, `green`, `blue`).
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            low_db: f64,
            high_db: f64,
            red: u8,
            green: u8,
            blue: u8,
            #[serde(default)]
            open_ended: bool,
        }
        #[derive(Deserialize)]
        struct File {
            band: Vec<Entry>,
        }
        let file: File = toml::from_str(text)?;
        Self::new(
            file.band
                .into_iter()
                .map(|e| LegendBand {
                    low_db: e.low_db,
                    high_db: e.high_db,
                    color: RgbColor::new(e.red, e.green, e.blue),
                    open_ended: e.open_ended,
                })
                .collect(),
        )
    }

    /// Resolves either a built-in palette name or a path to a palette file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path.parse::<PaletteName>() {
            Ok(name) => Ok(builtin_palette(name).clone()),
            Err(_) if Path::new(name_or_path).exists() => Self::from_toml_file(name_or_path),
            Err(err) => Err(err),
        }
    }
}

fn table(low: f64, colors: &[[u8; 3]]) -> Vec<LegendBand> {
    let last = colors.len() - 1;
    colors
        .iter()
        .enumerate()
        .map(|(i, &rgb)| {
            let low_db = low + 5.0 * i as f64;
            LegendBand {
                low_db,
                high_db: if i == last { OPEN_BAND_CAP_DB } else { low_db + 5.0 },
                color: rgb.into(),
                open_ended: i == last,
            }
        })
        .collect()
}

pub fn builtin_palette(name: PaletteName) -> &'static Palette {
    static THESSALONIKI: OnceLock<Palette> = OnceLock::new();
    static KALAMARIA: OnceLock<Palette> = OnceLock::new();
    match name {
        PaletteName::ThessalonikiNeapoli => THESSALONIKI.get_or_init(|| {
            Palette::new(table(
                40.0,
                &[
                    [182, 254, 191],
                    [255, 255, 0],
                    [254, 196, 71],
                    [253, 103, 2],
                    [255, 51, 50],
                    [152, 0, 51],
                    [174, 155, 219],
                    [1, 0, 251],
                    [1, 1, 65],
                ],
            ))
            .expect("built-in palette is valid")
        }),
        PaletteName::Kalamaria => KALAMARIA.get_or_init(|| {
            Palette::new(table(
                35.0,
                &[
                    [80, 167, 50],
                    [14, 113, 49],
                    [255, 243, 59],
                    [172, 121, 78],
                    [255, 94, 55],
                    [192, 23, 18],
                    [138, 18, 19],
                    [144, 14, 102],
                    [40, 115, 183],
                    [10, 65, 121],
                ],
            ))
            .expect("built-in palette is valid")
        }),
    }
}
