//! Radius-averaged noise features for property locations.
//!
//! Tiles are treated as points at their key coordinates. A uniform hash
//! grid (cell edge = the query radius, in degrees of latitude) narrows each
//! query to a few cells; candidates are then filtered by exact great-circle
//! distance, so the result is identical to an all-pairs scan.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::property_prep::PropertyRecord;
use crate::tessellate::Tile;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of arc on the sphere.
const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * PI / 180.0;

/// Great-circle distance between two `(lat, lon)` points given in degrees.
pub fn haversine_m(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lat1, lon1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lat2, lon2) = (p2.0.to_radians(), p2.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseCharacteristic {
    /// Day and night as two separate features.
    I,
    /// One feature: the mean of the day and night values.
    II,
    /// Day only.
    III,
    /// Night only.
    IV,
}

impl NoiseCharacteristic {
    pub const ALL: [Self; 4] = [Self::I, Self::II, Self::III, Self::IV];

    pub fn feature_count(self) -> usize {
        match self {
            Self::I => 2,
            _ => 1,
        }
    }

    pub fn needs_day(self) -> bool {
        matches!(self, Self::I | Self::II | Self::III)
    }

    pub fn needs_night(self) -> bool {
        matches!(self, Self::I | Self::II | Self::IV)
    }

    /// Noise column names this characteristic produces.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::I => &["noise_day", "noise_night"],
            Self::II => &["noise_combined"],
            Self::III => &["noise_day"],
            Self::IV => &["noise_night"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
        }
    }
}

impl FromStr for NoiseCharacteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" => Ok(Self::I),
            "II" | "ii" => Ok(Self::II),
            "III" | "iii" => Ok(Self::III),
            "IV" | "iv" => Ok(Self::IV),
            other => Err(Error::Config(format!("unknown noise characteristic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinConfig {
    pub radius_m: f64,
    pub characteristic: NoiseCharacteristic,
}

impl JoinConfig {
    pub fn new(radius_m: f64, characteristic: NoiseCharacteristic) -> Result<Self> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(Error::Config(format!("join radius must be positive, got {radius_m}")));
        }
        Ok(Self { radius_m, characteristic })
    }
}

/// Immutable hash-grid index over tile key points.
#[derive(Debug, Clone)]
pub struct TileIndex {
    points: Vec<(f64, f64)>,
    noise: Vec<f64>,
    cell_deg: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl TileIndex {
    /// Builds an index whose grid cells are `cell_m` meters (of latitude) wide.
    pub fn build(tiles: &[Tile], cell_m: f64) -> Result<Self> {
        if !(cell_m > 0.0 && cell_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid cell size must be positive, got {cell_m}")));
        }
        let cell_deg = cell_m / METERS_PER_DEGREE;
        let points: Vec<(f64, f64)> = tiles.iter().map(|t| (t.lat_key(), t.lon_key())).collect();
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &(lat, lon)) in points.iter().enumerate() {
            cells.entry(Self::cell_of(lat, lon, cell_deg)).or_default().push(i);
        }
        Ok(Self { points, noise: tiles.iter().map(|t| t.mean_noise_db).collect(), cell_deg, cells })
    }

    fn cell_of(lat: f64, lon: f64, cell_deg: f64) -> (i64, i64) {
        ((lat / cell_deg).floor() as i64, (lon / cell_deg).floor() as i64)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        self.points[i]
    }

    pub fn noise(&self, i: usize) -> f64 {
        self.noise[i]
    }

    /// Indices (ascending) of tiles within `radius_m` of `point`, boundary inclusive.
    pub fn within(&self, point: (f64, f64), radius_m: f64) -> Vec<usize> {
        let (lat, lon) = point;
        // Any point within r differs by at most r/R radians in latitude.
        let dlat = radius_m / METERS_PER_DEGREE * (1.0 + 1e-9);
        // hav(d) >= cos φ1 cos φ2 hav(Δλ) bounds the longitude spread.
        let hav_r = (radius_m / EARTH_RADIUS_M / 2.0).sin().powi(2);
        let far_lat = (lat.abs() + dlat).min(90.0);
        let cos_product = lat.to_radians().cos() * far_lat.to_radians().cos();
        let full_range = cos_product <= 0.0 || hav_r / cos_product >= 1.0;
        let dlon = if full_range {
            180.0
        } else {
            (2.0 * (hav_r / cos_product).sqrt().asin()).to_degrees() * (1.0 + 1e-9) + 1e-12
        };

        let mut out = Vec::new();
        let (lat_lo, lat_hi) = ((lat - dlat) / self.cell_deg, (lat + dlat) / self.cell_deg);
        let cell_span_lon = (2.0 * dlon / self.cell_deg).ceil() as i64 + 2;
        let scan_all_lon = full_range || cell_span_lon as usize >= self.cells.len();
        if scan_all_lon {
            for (i, &p) in self.points.iter().enumerate() {
                if (p.0 - lat).abs() <= dlat && haversine_m(point, p) <= radius_m {
                    out.push(i);
                }
            }
            return out;
        }
        let (lon_lo, lon_hi) = ((lon - dlon) / self.cell_deg, (lon + dlon) / self.cell_deg);
        for cy in lat_lo.floor() as i64..=lat_hi.floor() as i64 {
            for cx in lon_lo.floor() as i64..=lon_hi.floor() as i64 {
                if let Some(members) = self.cells.get(&(cy, cx)) {
                    out.extend(members.iter().copied().filter(|&i| haversine_m(point, self.points[i]) <= radius_m));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Brute-force reference: every tile within the radius, by all-pairs scan.
pub fn within_brute_force(tiles: &[Tile], point: (f64, f64), radius_m: f64) -> Vec<usize> {
    tiles
        .iter()
        .enumerate()
        .filter(|(_, t)| haversine_m(point, (t.lat_key(), t.lon_key())) <= radius_m)
        .map(|(i, _)| i)
        .collect()
}

/// Unweighted mean of tile means within the radius; `None` when no tile qualifies.
pub fn noise_at(point: (f64, f64), tiles: &TileIndex, radius_m: f64) -> Option<f64> {
    let hits = tiles.within(point, radius_m);
    if hits.is_empty() {
        return None;
    }
    let mut sum = crate::tessellate::CompensatedSum::default();
    for &i in &hits {
        sum.add(tiles.noise(i));
    }
    Some(sum.value() / hits.len() as f64)
}

/// Attaches the configured noise columns and drops properties lacking a
/// required value.
pub fn attach_noise(
    properties: &[PropertyRecord],
    day_tiles: Option<&TileIndex>,
    night_tiles: Option<&TileIndex>,
    cfg: &JoinConfig,
) -> Result<Vec<PropertyRecord>> {
    let ch = cfg.characteristic;
    let day = match (ch.needs_day(), day_tiles) {
        (true, None) => return Err(Error::Config(format!("characteristic {} needs day tiles", ch.label()))),
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };
    let night = match (ch.needs_night(), night_tiles) {
        (true, None) => return Err(Error::Config(format!("characteristic {} needs night tiles", ch.label()))),
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };
    let joined = crate::par::map_indexed(properties.len(), |i| {
        let p = &properties[i];
        let point = (p.latitude, p.longitude);
        let d = day.map(|t| noise_at(point, t, cfg.radius_m));
        let n = night.map(|t| noise_at(point, t, cfg.radius_m));
        let mut out = p.clone();
        out.noise_day = None;
        out.noise_night = None;
        out.noise_combined = None;
        match ch {
            NoiseCharacteristic::I => {
                out.noise_day = Some(d.flatten()?);
                out.noise_night = Some(n.flatten()?);
            }
            NoiseCharacteristic::II => {
                let (d, n) = (d.flatten()?, n.flatten()?);
                out.noise_combined = Some((d + n) / 2.0);
            }
            NoiseCharacteristic::III => out.noise_day = Some(d.flatten()?),
            NoiseCharacteristic::IV => out.noise_night = Some(n.flatten()?),
        }
        Some(out)
    });
    Ok(joined.into_iter().flatten().collect())
}
