//! Rasterizes a tiling back into a legend-colored heatmap.
//!
//! Each tile owns a square block of pixels. In [`RenderMode::Exact`] the
//! block holds exactly `sample_count` colored pixels whose band midpoints
//! sum to the tile total (at most two bands per tile), so rescanning the
//! image reproduces keys, counts and means bit for bit. [`RenderMode::Filled`]
//! paints the whole block with the band containing the mean, which keeps
//! keys and band membership but not mixed means or counts. Pixels without a
//! sample are transparent and carry a background color that does not
//! classify against the palette.

use std::collections::HashMap;

use crate::colorspace::{delta_e_2000, rgb_to_lab, RgbColor};
use crate::error::{Error, Result};
use crate::georef::AffineTransform;
use crate::legend::Palette;
use crate::raster::Raster;
use crate::tessellate::{scale_for, CompensatedSum, Tile};

/// Largest rendered image accepted, in pixels.
pub const MAX_RENDER_PIXELS: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct RenderedTiles {
    pub raster: Raster,
    /// Maps pixel centers (x + 0.5, y + 0.5) into their tile cell.
    pub transform: AffineTransform,
    pub background: RgbColor,
}

/// Picks a fill color whose ΔE2000 to every band is at least `threshold`.
pub fn background_color(palette: &Palette, threshold: f64) -> Result<RgbColor> {
    const CANDIDATES: [RgbColor; 6] = [
        RgbColor::new(255, 255, 255),
        RgbColor::new(128, 128, 128),
        RgbColor::new(0, 0, 0),
        RgbColor::new(255, 0, 255),
        RgbColor::new(0, 255, 255),
        RgbColor::new(0, 255, 0),
    ];
    CANDIDATES
        .iter()
        .copied()
        .find(|&c| {
            let lab = rgb_to_lab(c);
            palette.band_labs().iter().all(|&(_, b)| delta_e_2000(lab, b) >= threshold)
        })
        .ok_or_else(|| Error::Config("no background color is distinguishable from the palette".into()))
}

/// Pixel layout of one axis: cells are laid out contiguously from `first`.
/// Keys on the negative side truncate toward zero, so their cells span
/// `((k - 1)·s, k·s]`; on the non-negative side `[k·s, (k + 1)·s)`.
fn axis_origin(min: i64, max: i64, axis: &str) -> Result<i64> {
    if min >= 0 {
        Ok(0)
    } else if max <= 0 && min < 0 {
        Ok(-1)
    } else {
        Err(Error::DegenerateGeometry(format!("{axis} tile keys straddle zero; cells are not uniform there")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// `sample_count` pixels per tile reproducing the tile mean; blocks are
    /// at least `min_pixels_per_cell` wide.
    Exact { min_pixels_per_cell: usize },
    /// Solid `pixels_per_cell`² blocks in the band of the tile mean.
    Filled { pixels_per_cell: usize },
}

impl Default for RenderMode {
    fn default() -> Self {
        RenderMode::Exact { min_pixels_per_cell: 1 }
    }
}

fn tile_mean(values: impl IntoIterator<Item = f64>, count: usize) -> f64 {
    let mut sum = CompensatedSum::default();
    for v in values {
        sum.add(v);
    }
    sum.value() / count as f64
}

/// Splits a tile into `(band, pixels)` runs over at most two bands whose
/// midpoints average to the tile mean exactly (as recomputed by
/// tessellation).
fn band_mixture(t: &Tile, palette: &Palette) -> Result<Vec<(usize, usize)>> {
    let n = usize::try_from(t.sample_count)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidRecord(format!("tile {:?} has no samples", t.key())))?;
    let mids = palette.midpoints();
    let total = t.mean_noise_db * n as f64;
    let exact = |runs: &[(usize, usize)]| {
        let values = runs.iter().flat_map(|&(b, k)| std::iter::repeat_n(mids[b], k));
        tile_mean(values, n) == t.mean_noise_db
    };
    for i in 0..mids.len() {
        if exact(&[(i, n)]) {
            return Ok(vec![(i, n)]);
        }
        for j in i + 1..mids.len() {
            let k = ((total - n as f64 * mids[i]) / (mids[j] - mids[i])).round();
            if k >= 1.0 && k < n as f64 {
                let runs = [(i, n - k as usize), (j, k as usize)];
                if exact(&runs) {
                    return Ok(runs.to_vec());
                }
            }
        }
    }
    Err(Error::InvalidRecord(format!(
        "tile {:?}: mean {} dB over {n} samples is not a mix of band midpoints; use filled rendering",
        t.key(),
        t.mean_noise_db
    )))
}

pub fn render_tiles(tiles: &[Tile], palette: &Palette, mode: RenderMode, threshold: f64) -> Result<RenderedTiles> {
    let first = tiles
        .first()
        .ok_or_else(|| Error::InsufficientData("no tiles to render".into()))?;
    let decimals = first.decimals;
    if tiles.iter().any(|t| t.decimals != decimals) {
        return Err(Error::Schema("tiles mix tessellation precisions".into()));
    }
    let (lat_min, lat_max) = tiles.iter().fold((i64::MAX, i64::MIN), |(lo, hi), t| {
        (lo.min(t.lat_index), hi.max(t.lat_index))
    });
    let (lon_min, lon_max) = tiles.iter().fold((i64::MAX, i64::MIN), |(lo, hi), t| {
        (lo.min(t.lon_index), hi.max(t.lon_index))
    });
    let lat_shift = axis_origin(lat_min, lat_max, "latitude")?;
    let lon_shift = axis_origin(lon_min, lon_max, "longitude")?;

    let ppc = match mode {
        RenderMode::Filled { pixels_per_cell } => pixels_per_cell,
        RenderMode::Exact { min_pixels_per_cell } => {
            let max_count = tiles.iter().map(|t| t.sample_count).max().unwrap_or(1);
            let mut side = (max_count as f64).sqrt() as usize;
            while ((side * side) as u64) < max_count {
                side += 1;
            }
            side.max(min_pixels_per_cell)
        }
    };
    if ppc == 0 {
        return Err(Error::InvalidParameter("pixels_per_cell must be at least 1".into()));
    }
    let width = usize::try_from(lon_max - lon_min + 1).unwrap_or(usize::MAX).saturating_mul(ppc);
    let height = usize::try_from(lat_max - lat_min + 1).unwrap_or(usize::MAX).saturating_mul(ppc);
    if width.saturating_mul(height) > MAX_RENDER_PIXELS {
        return Err(Error::InvalidParameter(format!("rendered image would be {width}x{height} pixels")));
    }

    let background = background_color(palette, threshold)?;
    let mut raster = Raster::new(width, height, background);
    let mut painted = vec![false; width * height];
    let mut occupied: HashMap<(usize, usize), ()> = HashMap::new();
    for t in tiles {
        let col = (t.lon_index - lon_min) as usize;
        let row = (lat_max - t.lat_index) as usize;
        if occupied.insert((row, col), ()).is_some() {
            return Err(Error::InvalidRecord(format!("duplicate tile key {:?}", t.key())));
        }
        let colors: Vec<RgbColor> = match mode {
            RenderMode::Filled { .. } => {
                let band = palette.band_for(t.mean_noise_db).ok_or_else(|| {
                    Error::InvalidRecord(format!("tile mean {} dB falls outside every band", t.mean_noise_db))
                })?;
                vec![band.color; ppc * ppc]
            }
            RenderMode::Exact { .. } => band_mixture(t, palette)?
                .into_iter()
                .flat_map(|(b, k)| std::iter::repeat_n(palette.bands()[b].color, k))
                .collect(),
        };
        for (k, color) in colors.into_iter().enumerate() {
            let (x, y) = (col * ppc + k % ppc, row * ppc + k / ppc);
            raster.set(x, y, color);
            painted[y * width + x] = true;
        }
    }
    for y in 0..height {
        for x in 0..width {
            if !painted[y * width + x] {
                raster.set_transparent(x, y);
            }
        }
    }

    let cell = 1.0 / scale_for(decimals);
    let step = cell / ppc as f64;
    let transform = AffineTransform {
        a: step,
        b: 0.0,
        c: (lon_min + lon_shift) as f64 * cell,
        d: 0.0,
        e: -step,
        f: (lat_max + 1 + lat_shift) as f64 * cell,
    };
    Ok(RenderedTiles { raster, transform, background })
}
