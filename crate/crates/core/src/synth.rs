//! Synthetic fixtures: smooth noise fields rendered as legend heatmaps, and
//! property listings with a planted noise effect on price.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::colorspace::RgbColor;
use crate::error::{Error, Result};
use crate::georef::{pixel_to_geo, AffineTransform, GroundControlPoint};
use crate::legend::Palette;
use crate::property_prep::{OrdinalOrders, PropertyRecord};
use crate::raster::Raster;
use crate::seed::rng_for;

/// A smooth scalar field on a pixel grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Sum of `waves` random low-frequency plane waves (at most `max_cycles`
/// periods across the image), rescaled to `[low, high]`.
pub fn smooth_field(
    width: usize,
    height: usize,
    low: f64,
    high: f64,
    waves: usize,
    max_cycles: f64,
    seed: u64,
) -> Result<Field> {
    if width == 0 || height == 0 || !(low < high) || waves == 0 {
        return Err(Error::InvalidParameter("field needs a positive size, low < high and at least one wave".into()));
    }
    let mut rng = rng_for(seed, "field", 0);
    let tau = std::f64::consts::TAU;
    let comps: Vec<(f64, f64, f64, f64)> = (0..waves)
        .map(|_| {
            let u = rng.random_range(-max_cycles..=max_cycles) / width as f64;
            let v = rng.random_range(-max_cycles..=max_cycles) / height as f64;
            (rng.random_range(0.5..1.0), u, v, rng.random_range(0.0..tau))
        })
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
            values.push(comps.iter().map(|&(a, u, v, p)| a * (tau * (u * xf + v * yf) + p).cos()).sum::<f64>());
        }
    }
    let (mn, mx) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if mx > mn { mx - mn } else { 1.0 };
    for v in &mut values {
        *v = low + (*v - mn) / span * (high - low);
    }
    Ok(Field { width, height, values })
}

/// A field drawn with legend colors.
#[derive(Debug, Clone)]
pub struct SyntheticHeatmap {
    pub raster: Raster,
    /// True band index per pixel.
    pub band: Vec<usize>,
    /// Pixels whose color was blended with a differing 4-neighbor.
    pub border: Vec<bool>,
    /// The neighbor band mixed into each border pixel.
    pub partner: Vec<Option<usize>>,
}

pub fn blend(a: RgbColor, b: RgbColor) -> RgbColor {
    let mix = |x: u8, y: u8| ((u16::from(x) + u16::from(y) + 1) / 2) as u8;
    RgbColor::new(mix(a.red, b.red), mix(a.green, b.green), mix(a.blue, b.blue))
}

/// Quantizes the field to palette bands. With `blend_borders`, every pixel
/// that has a 4-neighbor in another band becomes the rounded 50/50 mix of
/// its band color and that neighbor's (right, down, left, up: first match).
pub fn render_field(field: &Field, palette: &Palette, blend_borders: bool) -> Result<SyntheticHeatmap> {
    let (w, h) = (field.width, field.height);
    let band: Vec<usize> = field
        .values
        .iter()
        .map(|&db| {
            palette
                .bands()
                .iter()
                .position(|b| b.contains(db))
                .ok_or_else(|| Error::InvalidParameter(format!("{db} dB is outside the palette")))
        })
        .collect::<Result<_>>()?;
    let bands = palette.bands();
    let mut raster = Raster::new(w, h, RgbColor::new(0, 0, 0));
    let mut border = vec![false; w * h];
    let mut partner = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let own = band[i];
            let mut color = bands[own].color;
            if blend_borders {
                let neighbors = [
                    (x + 1 < w).then(|| i + 1),
                    (y + 1 < h).then(|| i + w),
                    (x > 0).then(|| i - 1),
                    (y > 0).then(|| i - w),
                ];
                if let Some(j) = neighbors.into_iter().flatten().find(|&j| band[j] != own) {
                    border[i] = true;
                    partner[i] = Some(band[j]);
                    color = blend(color, bands[band[j]].color);
                }
            }
            raster.set(x, y, color);
        }
    }
    Ok(SyntheticHeatmap { raster, band, border, partner })
}

/// Pixel → lon/lat transform for synthetic maps: north-up, `degrees_per_pixel`
/// per pixel, top-left corner at (`west`, `north`).
pub fn north_up_transform(west: f64, north: f64, degrees_per_pixel: f64) -> AffineTransform {
    AffineTransform { a: degrees_per_pixel, b: 0.0, c: west, d: 0.0, e: -degrees_per_pixel, f: north }
}

/// Control points at the four corners and the center of a `width × height`
/// image, exact under `t`.
pub fn corner_gcps(t: &AffineTransform, width: usize, height: usize) -> Vec<GroundControlPoint> {
    let (w, h) = (width as f64, height as f64);
    [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h), (w / 2.0, h / 2.0)]
        .into_iter()
        .map(|(x, y)| {
            let (lon, lat) = pixel_to_geo(t, x, y);
            GroundControlPoint::new(x, y, lon, lat)
        })
        .collect()
}

/// One rectangular region of a planted-effect data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub latitude: (f64, f64),
    pub longitude: (f64, f64),
    /// Price change per dB of day noise, in euros.
    pub beta_eur_per_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub rows_per_region: usize,
    pub regions: Vec<Region>,
    pub noise_db: (f64, f64),
    /// Standard deviation of the price noise as a fraction of the mean base price.
    pub relative_noise: f64,
    pub seed: u64,
}

impl PlantedConfig {
    /// Two regions, +300 €/dB and −300 €/dB, 1,000 listings each.
    pub fn two_regions(seed: u64) -> Self {
        Self {
            rows_per_region: 1000,
            regions: vec![
                Region { name: "A".into(), latitude: (40.600, 40.620), longitude: (22.940, 22.960), beta_eur_per_db: 300.0 },
                Region { name: "C".into(), latitude: (40.640, 40.660), longitude: (22.970, 22.990), beta_eur_per_db: -300.0 },
            ],
            noise_db: (40.0, 80.0),
            relative_noise: 0.10,
            seed,
        }
    }
}

pub const ENERGY_LABELS: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];
pub const FLOOR_LABELS: [&str; 6] = ["0", "1", "2", "3", "4", "5"];

pub fn planted_orders() -> OrdinalOrders {
    OrdinalOrders {
        energy_efficiency: ENERGY_LABELS.iter().map(|s| s.to_string()).collect(),
        floor_level: FLOOR_LABELS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Base price without noise: 1,200 €/m² + 5,000 € per room + 3,000 € per
/// floor + 20,000 €.
pub fn base_price(size_m2: f64, rooms: u32, floor: usize) -> f64 {
    1200.0 * size_m2 + 5000.0 * f64::from(rooms) + 3000.0 * floor as f64 + 20_000.0
}

/// Mean of [`base_price`] under the generator's size, room and floor draws.
pub const MEAN_BASE_PRICE: f64 = 1200.0 * 95.0 + 5000.0 * 2.5 + 3000.0 * 2.5 + 20_000.0;

/// Listings whose price is `base + β·noise_day + ε`. When `noise_at` is
/// given it supplies day noise from the location (night noise is day minus
/// 8 dB); otherwise day noise is uniform over `noise_db` and night noise is
/// day minus 8 dB plus N(0, 2) jitter.
pub fn planted_properties(
    config: &PlantedConfig,
    noise_at: Option<&dyn Fn(f64, f64) -> Option<f64>>,
) -> Result<Vec<PropertyRecord>> {
    let sd = config.relative_noise * MEAN_BASE_PRICE;
    let eps = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let jitter = Normal::new(0.0, 2.0).expect("valid normal");
    let epoch = NaiveDate::from_ymd_opt(1960, 1, 1).expect("valid date");
    let mut out = Vec::with_capacity(config.rows_per_region * config.regions.len());
    for (ri, region) in config.regions.iter().enumerate() {
        let mut rng = rng_for(config.seed, "planted-region", ri as u64);
        let mut made = 0;
        let mut attempts = 0;
        while made < config.rows_per_region {
            attempts += 1;
            if attempts > 100 * config.rows_per_region.max(1) {
                return Err(Error::InsufficientData(format!("region {} has no noise coverage", region.name)));
            }
            let lat = rng.random_range(region.latitude.0..region.latitude.1);
            let lon = rng.random_range(region.longitude.0..region.longitude.1);
            let size = rng.random_range(40.0..150.0f64);
            let rooms = ((size / 35.0).floor() as u32).clamp(1, 4);
            let floor = rng.random_range(0..FLOOR_LABELS.len());
            let energy = ENERGY_LABELS[rng.random_range(0..ENERGY_LABELS.len())];
            let built = epoch + Days::new(rng.random_range(0..60 * 365));
            let sub_type = rng.random_range(1..=3u32);
            let heating = rng.random_range(1..=4u32);
            let door = rng.random_range(1..=2u32);
            let (day, night) = match noise_at {
                Some(f) => match f(lat, lon) {
                    Some(d) => (d, d - 8.0),
                    None => continue,
                },
                None => {
                    let d = rng.random_range(config.noise_db.0..config.noise_db.1);
                    (d, d - 8.0 + jitter.sample(&mut rng))
                }
            };
            let price =
                (base_price(size, rooms, floor) + region.beta_eur_per_db * day + eps.sample(&mut rng)).max(1000.0);
            out.push(PropertyRecord {
                id: format!("{}{}", region.name, made),
                size_m2: (size * 10.0).round() / 10.0,
                number_of_rooms: rooms,
                latitude: lat,
                longitude: lon,
                energy_efficiency: energy.into(),
                construction_date: Some(built),
                sub_type: Some(sub_type.to_string()),
                floor_level: Some(FLOOR_LABELS[floor].into()),
                basic_heating_type: Some(heating.to_string()),
                door_frame_type: Some(door.to_string()),
                price_eur: Some(price.round()),
                noise_day: noise_at.is_none().then_some(day),
                noise_night: noise_at.is_none().then_some(night),
                noise_combined: noise_at.is_none().then_some((day + night) / 2.0),
            });
            made += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legend::{builtin_palette, PaletteName};

    #[test]
    fn field_is_rescaled_and_reproducible() {
        let f = smooth_field(32, 16, 40.0, 84.9, 4, 1.5, 7).unwrap();
        let mn = f.values.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((mn - 40.0).abs() < 1e-9 && (mx - 84.9).abs() < 1e-9);
        assert_eq!(f, smooth_field(32, 16, 40.0, 84.9, 4, 1.5, 7).unwrap());
    }

    #[test]
    fn border_pixels_are_blended() {
        let palette = builtin_palette(PaletteName::ThessalonikiNeapoli);
        let field = Field { width: 4, height: 1, values: vec![42.0, 42.0, 47.0, 47.0] };
        let hm = render_field(&field, palette, true).unwrap();
        assert_eq!(hm.border, vec![false, true, true, false]);
        assert_eq!(hm.partner[1], Some(1));
        let (c0, c1) = (palette.bands()[0].color, palette.bands()[1].color);
        assert_eq!(hm.raster.get(1, 0), blend(c0, c1));
        assert_eq!(hm.raster.get(0, 0), c0);
    }

    #[test]
    fn planted_prices_follow_the_slope() {
        let cfg = PlantedConfig { rows_per_region: 50, ..PlantedConfig::two_regions(3) };
        let rows = planted_properties(&cfg, None).unwrap();
        assert_eq!(rows.len(), 100);
        for r in &rows {
            r.validate().unwrap();
            let d = r.noise_day.unwrap();
            assert!((40.0..80.0).contains(&d));
        }
        let again = planted_properties(&cfg, None).unwrap();
        assert_eq!(rows, again);
    }
}
