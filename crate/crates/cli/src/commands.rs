//! One function per subcommand. Each reads its inputs, calls into the core
//! library and writes fixed-name outputs under an output directory; the
//! returned string is the human summary printed on success.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use noisemap::ensemble::metrics::Metric;
use noisemap::ensemble::model_io::load_model;
use noisemap::georef::{fit_affine, read_gcp_file, residual_rmse, AffineTransform, CONDITION_WARNING};
use noisemap::interpret::{partial_dependence, permutation_importance, split_and_gain_importance};
use noisemap::io::write_atomic;
use noisemap::legend::Palette;
use noisemap::matrix::FeatureMatrix;
use noisemap::property_prep::{
    filter_outliers, impute, read_properties_file, resolve_rules, write_properties_file, Encoder, FilterReport,
    ImputeReport, NOISE_COLUMNS,
};
use noisemap::raster::Raster;
use noisemap::reconstruct::{read_samples_file, scan_image, write_samples};
use noisemap::render::{render_tiles, RenderMode};
use noisemap::report::{build_table, read_results_file};
use noisemap::seed::derive_seed;
use noisemap::spatial_join::{attach_noise, JoinConfig, NoiseCharacteristic, TileIndex};
use noisemap::tessellate::{read_tiles_file, reduction_ratio, tessellate_results, write_tiles_file};
use noisemap::{Error, Result};

use crate::config::PrepConfig;
use crate::plot::save_line_chart;

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `<out>/<stem>.<ext>`, creating `out`.
fn output(out: &Path, stem: &str, ext: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    Ok(out.join(format!("{stem}.{ext}")))
}

pub fn cmd_georef(gcp_file: &Path, out: &Path) -> Result<String> {
    let gcps = read_gcp_file(gcp_file)?;
    let t = fit_affine(&gcps)?;
    let rmse = residual_rmse(&t, &gcps)?;
    let path = output(out, "transform", "json")?;
    write_json(&path, &t)?;
    let det = t.determinant().abs();
    if det > 0.0 && 1.0 / det > CONDITION_WARNING {
        log::warn!("transform is nearly singular (|det| = {det:e})");
    }
    Ok(format!("fitted affine transform from {} control points, residual RMSE {rmse:.3e}; wrote {}", gcps.len(), path.display()))
}

pub fn load_transform(path: &Path) -> Result<AffineTransform> {
    let t: AffineTransform = read_json(path)?;
    t.validate()?;
    Ok(t)
}

pub fn cmd_reconstruct(image: &Path, transform: &Path, palette: &Palette, threshold: f64, out: &Path, name: &str) -> Result<String> {
    let raster = Raster::load_png(image)?;
    let t = load_transform(transform)?;
    let scan = scan_image(&raster, &t, palette, threshold)?;
    let mut buf = Vec::new();
    let kept = write_samples(&mut buf, scan)?;
    let path = output(out, name, "csv")?;
    write_atomic(&path, &buf)?;
    let total = raster.width() * raster.height();
    Ok(format!("{kept} of {total} pixels classified ({} dropped); wrote {}", total - kept, path.display()))
}

pub fn cmd_tessellate(samples: &Path, decimals: u32, out: &Path, name: &str) -> Result<String> {
    let mut count = 0u64;
    let stream = read_samples_file(samples)?.inspect(|_| count += 1);
    let tiles = tessellate_results(stream, decimals)?;
    let path = output(out, name, "csv")?;
    write_tiles_file(&path, &tiles)?;
    let ratio = reduction_ratio(count, tiles.len() as u64)?;
    Ok(format!("{count} samples → {} tiles (reduction {:.2}%); wrote {}", tiles.len(), ratio * 100.0, path.display()))
}

pub fn cmd_join(
    properties: &Path,
    day: Option<&Path>,
    night: Option<&Path>,
    radius_m: f64,
    characteristic: NoiseCharacteristic,
    out: &Path,
) -> Result<String> {
    let cfg = JoinConfig::new(radius_m, characteristic)?;
    let records = read_properties_file(properties)?;
    let index = |p: Option<&Path>| -> Result<Option<TileIndex>> {
        p.map(|p| TileIndex::build(&read_tiles_file(p)?, radius_m)).transpose()
    };
    let (day, night) = (index(day)?, index(night)?);
    let joined = attach_noise(&records, day.as_ref(), night.as_ref(), &cfg)?;
    let path = output(out, "joined", "csv")?;
    write_properties_file(&path, &joined)?;
    Ok(format!(
        "{} of {} properties have noise within {radius_m} m (characteristic {}); wrote {}",
        joined.len(),
        records.len(),
        characteristic.label(),
        path.display()
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepReport {
    pub input_rows: usize,
    pub filter: FilterReport,
    pub imputed: ImputeReport,
}

/// Outlier filter, imputation and encoding. Writes `prepared.csv`,
/// `features.csv` (encoded matrix), `encoder.json` and `prep_report.json`.
pub fn cmd_prep(properties: &Path, rules: &Path, out: &Path) -> Result<String> {
    let text = fs::read_to_string(rules)?;
    let prep: PrepConfig = toml::from_str(&text)?;
    let records = read_properties_file(properties)?;
    let (prepared, report) = prepare(&records, &prep)?;
    let encoder = Encoder::fit(&prepared, prep.orders.clone(), prep.encoding)?;
    let x = encoder.transform(&prepared)?;
    write_properties_file(output(out, "prepared", "csv")?, &prepared)?;
    write_atomic(output(out, "features", "csv")?, &csv_bytes(|b| x.write_csv(b))?)?;
    write_json(output(out, "encoder", "json")?, &encoder)?;
    write_json(output(out, "prep_report", "json")?, &report)?;
    Ok(format!(
        "{} of {} listings kept, {} features; wrote {}",
        prepared.len(),
        records.len(),
        x.n_cols(),
        out.display()
    ))
}

pub fn prepare(records: &[noisemap::property_prep::PropertyRecord], prep: &PrepConfig) -> Result<(Vec<noisemap::property_prep::PropertyRecord>, PrepReport)> {
    let bounds = resolve_rules(records, &prep.rules)?;
    let (kept, filter) = filter_outliers(records, &bounds);
    let (prepared, imputed) = impute(&kept, &prep.orders)?;
    Ok((prepared, PrepReport { input_rows: records.len(), filter, imputed }))
}

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    pub seed: u64,
    pub repeats: usize,
    pub grid_size: usize,
    /// Features to sweep; empty means the noise columns present in the data.
    pub features: Vec<String>,
}

/// Writes `<stem>_importance.csv` and, per swept feature,
/// `<stem>_pd_<feature>.csv` plus a PNG chart.
pub fn explain_into(model: &noisemap::ensemble::TreeEnsemble, x: &FeatureMatrix, opts: &ExplainOptions, out: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let perm = permutation_importance(model, x, Metric::Mae, opts.repeats, derive_seed(opts.seed, "explain", 0))?;
    let report = split_and_gain_importance(model)?.with_permutation(&perm)?;
    let mut written = vec![output(out, &format!("{stem}_importance"), "csv")?];
    write_atomic(&written[0], &csv_bytes(|b| report.write_csv(b))?)?;
    let features: Vec<String> = if opts.features.is_empty() {
        NOISE_COLUMNS.iter().filter(|c| x.column_index(c).is_some()).map(|c| c.to_string()).collect()
    } else {
        opts.features.clone()
    };
    for f in &features {
        let curve = match partial_dependence(model, x, f, opts.grid_size) {
            Err(Error::DegenerateGrid(msg)) => {
                log::warn!("skipping partial dependence on {f}: {msg}");
                continue;
            }
            other => other?,
        };
        let csv = output(out, &format!("{stem}_pd_{f}"), "csv")?;
        write_atomic(&csv, &csv_bytes(|b| curve.write_csv(b))?)?;
        let points: Vec<(f64, f64)> = curve.grid.iter().copied().zip(curve.mean_prediction.iter().copied()).collect();
        let png = csv.with_extension("png");
        save_line_chart(&png, &points)?;
        written.extend([csv, png]);
    }
    Ok(written)
}

pub fn cmd_explain(model: &Path, data: &Path, opts: &ExplainOptions, out: &Path) -> Result<String> {
    let model = load_model(model)?;
    let x = FeatureMatrix::read_csv(std::io::BufReader::new(fs::File::open(data)?))?;
    let written = explain_into(&model, &x, opts, out, "explain")?;
    Ok(format!("wrote {} files to {}", written.len(), out.display()))
}

pub fn cmd_render(tiles: &Path, palette: &Palette, mode: RenderMode, threshold: f64, out: &Path, name: &str) -> Result<String> {
    let tiles = read_tiles_file(tiles)?;
    let rendered = render_tiles(&tiles, palette, mode, threshold)?;
    let png = output(out, name, "png")?;
    rendered.raster.save_png(&png)?;
    let transform = output(out, &format!("{name}.transform"), "json")?;
    write_json(&transform, &rendered.transform)?;
    Ok(format!(
        "rendered {} tiles into a {}x{} image; wrote {} and {}",
        tiles.len(),
        rendered.raster.width(),
        rendered.raster.height(),
        png.display(),
        transform.display()
    ))
}

/// Prints the comparison table and writes `report.csv` and `report.txt`.
pub fn cmd_report(results: &[PathBuf], out: &Path) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InsufficientData("report needs at least one result file".into()));
    }
    let sets = results.iter().map(read_results_file).collect::<Result<Vec<_>>>()?;
    let table = build_table(sets)?;
    write_atomic(output(out, "report", "csv")?, &csv_bytes(|b| table.write_csv(b))?)?;
    let text = table.to_text();
    write_atomic(output(out, "report", "txt")?, text.as_bytes())?;
    Ok(text.trim_end().to_string())
}
