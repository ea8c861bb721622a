//! Plain-Rust versions of the browser exports, so they can be tested natively.

use serde::Serialize;

use noisemap::colorspace::{delta_e_2000, rgb_to_lab, RgbColor};
use noisemap::ensemble::{BoostParams, ModelSpec, TreeParams};
use noisemap::georef::AffineTransform;
use noisemap::interpret::partial_dependence;
use noisemap::legend::Palette;
use noisemap::property_prep::encode;
use noisemap::reconstruct::scan_to_vec;
use noisemap::seed::derive_seed;
use noisemap::synth::{
    north_up_transform, planted_orders, planted_properties, render_field, smooth_field, PlantedConfig,
    Region,
};
use noisemap::tessellate::{reduction_ratio, tessellate};
use noisemap::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandDistance {
    pub low_db: f64,
    pub high_db: f64,
    pub color: [u8; 3],
    pub delta_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// Midpoint of the matched band, if any band is within the threshold.
    pub noise_db: Option<f64>,
    pub bands: Vec<BandDistance>,
}

pub fn classify(palette: &str, rgb: [u8; 3], threshold: f64) -> Result<Classification> {
    let palette = Palette::resolve(palette)?;
    let color = RgbColor::from(rgb);
    let band = noisemap::colorspace::classify_color(color, palette.bands(), threshold)?;
    let lab = rgb_to_lab(color);
    let bands = palette
        .bands()
        .iter()
        .map(|b| BandDistance {
            low_db: b.low_db,
            high_db: b.high_db,
            color: [b.color.red, b.color.green, b.color.blue],
            delta_e: delta_e_2000(lab, rgb_to_lab(b.color)),
        })
        .collect();
    Ok(Classification { noise_db: band.map(|b| b.midpoint_db()), bands })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    pub width: usize,
    pub height: usize,
    #[serde(skip)]
    pub rgba: Vec<u8>,
    pub classified: usize,
    pub dropped: usize,
    pub tiles: usize,
    pub reduction: f64,
    /// Pixels classified into a band other than the one drawn.
    pub misclassified: usize,
}

/// Draws a random smooth field with the palette, then scans and tessellates
/// it back.
pub fn heatmap_round_trip(palette: &str, width: usize, height: usize, seed: u64, blend: bool) -> Result<RoundTrip> {
    let palette = Palette::resolve(palette)?;
    let bands = palette.bands();
    let (lo, hi) = (bands[0].low_db, bands[bands.len() - 1].high_db - 0.1);
    let field = smooth_field(width, height, lo, hi, 5, 2.0, derive_seed(seed, "demo-field", 0))?;
    let hm = render_field(&field, &palette, blend)?;
    let t: AffineTransform = north_up_transform(22.9, 40.7, 0.0005);
    let samples = scan_to_vec(&hm.raster, &t, &palette, noisemap::colorspace::DEFAULT_THRESHOLD)?;
    let mids = palette.midpoints();
    let mut misclassified = 0;
    for s in &samples {
        let x = ((s.longitude - t.c) / t.a).floor() as usize;
        let y = ((s.latitude - t.f) / t.e).floor() as usize;
        if s.noise_db != mids[hm.band[y * width + x]] {
            misclassified += 1;
        }
    }
    let classified = samples.len();
    let tiles = tessellate(samples, 4)?;
    Ok(RoundTrip {
        width,
        height,
        rgba: hm.raster.to_rgba_bytes(),
        classified,
        dropped: width * height - classified,
        tiles: tiles.len(),
        reduction: reduction_ratio(classified as u64, tiles.len() as u64)?,
        misclassified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedCurve {
    pub beta_eur_per_db: f64,
    pub grid: Vec<f64>,
    pub mean_prediction: Vec<f64>,
    /// Least-squares slope of the curve, in euros per dB.
    pub fitted_slope: f64,
}

/// Fits a boosted model to listings whose price moves `beta` euros per dB of
/// day noise and returns its partial dependence on that noise.
pub fn planted_dependence(seed: u64, beta: f64, rows: usize) -> Result<PlantedCurve> {
    if rows < 20 {
        return Err(Error::InvalidParameter("at least 20 listings are needed".into()));
    }
    let cfg = PlantedConfig {
        rows_per_region: rows,
        regions: vec![Region {
            name: "R".into(),
            latitude: (40.60, 40.62),
            longitude: (22.94, 22.96),
            beta_eur_per_db: beta,
        }],
        noise_db: (40.0, 80.0),
        relative_noise: 0.05,
        seed,
    };
    let records = planted_properties(&cfg, None)?;
    let (_, x) = encode(&records, &planted_orders())?;
    let x = x.without_columns(|c| c == "noise_night" || c == "noise_combined");
    let spec = ModelSpec::Boosted(BoostParams {
        tree: TreeParams { max_depth: Some(3), min_samples_leaf: 10, ..TreeParams::default() },
        tree_count: 150,
        learning_rate: 0.1,
        row_subsample: 1.0,
    });
    let model = spec.fit(&x, derive_seed(seed, "demo-model", 0))?;
    let curve = partial_dependence(&model, &x, "noise_day", 12)?;
    let n = curve.grid.len() as f64;
    let (mx, my) = (curve.grid.iter().sum::<f64>() / n, curve.mean_prediction.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (gx, gy) in curve.grid.iter().zip(&curve.mean_prediction) {
        sxy += (gx - mx) * (gy - my);
        sxx += (gx - mx) * (gx - mx);
    }
    Ok(PlantedCurve {
        beta_eur_per_db: beta,
        grid: curve.grid,
        mean_prediction: curve.mean_prediction,
        fitted_slope: sxy / sxx,
    })
}
