//! `noisemap synth`: a small, self-consistent input set for trying the
//! pipeline end to end. Day and night heatmaps cover two listing regions
//! whose prices carry opposite planted noise effects.

use std::fs;
use std::path::{Path, PathBuf};

use noisemap::georef::write_gcp_file;
use noisemap::io::write_atomic;
use noisemap::legend::{builtin_palette, PaletteName};
use noisemap::property_prep::write_properties_file;
use noisemap::seed::derive_seed;
use noisemap::synth::{
    corner_gcps, north_up_transform, planted_properties, render_field, smooth_field, Field, PlantedConfig,
};
use noisemap::Result;

pub const WEST: f64 = 22.935;
pub const NORTH: f64 = 40.665;
pub const DEGREES_PER_PIXEL: f64 = 0.0005;
pub const WIDTH: usize = 120;
pub const HEIGHT: usize = 140;

#[derive(Debug, Clone, Copy)]
pub struct FixtureOptions {
    pub seed: u64,
    pub rows_per_region: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self { seed: 7, rows_per_region: 150 }
    }
}

fn experiment_toml(seed: u64) -> String {
    format!(
        r#"seed = {seed}
palette = "thessaloniki_neapoli"
gcps = "gcps.csv"
radii = [100.0]
characteristics = ["I", "II"]
properties = "properties.csv"
areas = "areas.toml"
k_folds = 5
permutation_repeats = 2
grid_size = 8
out = "run"

[images]
day = "day.png"
night = "night.png"

[prep]
rules = [
    {{ kind = "fixed", column = "size", lower = 15.0, upper = 1000.0 }},
    {{ kind = "iqr", column = "price", k = 3.0, upper_only = true }},
]

[prep.orders]
energy_efficiency = ["A", "B", "C", "D", "E", "F", "G"]
floor_level = ["0", "1", "2", "3", "4", "5"]

[[models]]
name = "tree"
preset = "decision_tree"

[models.search]
budget = 3
space = {{ max_depth = {{ min = 2, max = 6 }}, min_samples_leaf = {{ min = 2, max = 10 }} }}

[[models]]
name = "boosted"
spec = {{ kind = "boosted", tree_count = 60, learning_rate = 0.1, row_subsample = 1.0, tree = {{ max_depth = 3, min_samples_leaf = 5 }} }}

[learning_curve]
fractions = [0.25, 0.5, 1.0]
"#
    )
}

const AREAS_TOML: &str = r#"[[area]]
name = "A"
vertices = [[22.939, 40.599], [22.961, 40.599], [22.961, 40.621], [22.939, 40.621]]

[[area]]
name = "C"
vertices = [[22.969, 40.639], [22.991, 40.639], [22.991, 40.661], [22.969, 40.661]]
"#;

/// Writes `day.png`, `night.png`, `gcps.csv`, `properties.csv`,
/// `areas.toml` and `experiment.toml` into `dir`.
pub fn write_fixtures(dir: &Path, opts: FixtureOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let palette = builtin_palette(PaletteName::ThessalonikiNeapoli);
    let day = smooth_field(WIDTH, HEIGHT, 40.0, 84.9, 5, 2.0, derive_seed(opts.seed, "fixture-day", 0))?;
    let night = smooth_field(WIDTH, HEIGHT, 40.0, 69.9, 5, 2.0, derive_seed(opts.seed, "fixture-night", 0))?;
    let transform = north_up_transform(WEST, NORTH, DEGREES_PER_PIXEL);
    let mut written = Vec::new();
    for (name, field) in [("day", &day), ("night", &night)] {
        let path = dir.join(format!("{name}.png"));
        render_field(field, palette, true)?.raster.save_png(&path)?;
        written.push(path);
    }
    let gcps = dir.join("gcps.csv");
    write_gcp_file(&gcps, &corner_gcps(&transform, WIDTH, HEIGHT))?;
    written.push(gcps);

    // prices respond to the legend band a listing falls in
    let band_noise = |field: &Field, lat: f64, lon: f64| {
        let x = ((lon - WEST) / DEGREES_PER_PIXEL).floor();
        let y = ((NORTH - lat) / DEGREES_PER_PIXEL).floor();
        if x < 0.0 || y < 0.0 || x >= WIDTH as f64 || y >= HEIGHT as f64 {
            return None;
        }
        palette.band_for(field.get(x as usize, y as usize)).map(|b| b.midpoint_db())
    };
    let noise_at = |lat: f64, lon: f64| band_noise(&day, lat, lon);
    let cfg = PlantedConfig {
        rows_per_region: opts.rows_per_region,
        relative_noise: 0.05,
        ..PlantedConfig::two_regions(derive_seed(opts.seed, "fixture-properties", 0))
    };
    let mut rows = planted_properties(&cfg, Some(&noise_at))?;
    for (i, r) in rows.iter_mut().enumerate() {
        match i % 23 {
            3 => r.floor_level = None,
            11 => r.construction_date = None,
            17 => r.basic_heating_type = None,
            _ => {}
        }
    }
    if let Some(r) = rows.first_mut() {
        r.size_m2 = 5000.0;
    }
    let props = dir.join("properties.csv");
    write_properties_file(&props, &rows)?;
    written.push(props);

    for (name, text) in [("areas.toml", AREAS_TOML.to_string()), ("experiment.toml", experiment_toml(opts.seed))] {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
