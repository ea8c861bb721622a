//! The `train` pipeline: georeference, reconstruct and tessellate the
//! heatmaps, prepare listings, join noise for every radius and
//! characteristic, then cross-validate every model with and without the
//! noise columns.
//!
//! Output layout under the run directory:
//!
//! ```text
//! transform.json  tiles_<image>.csv  prepared.csv  prep_report.json
//! data/<variant>.csv            encoded matrix with noise columns
//! cv/<variant>_<model>_{noise,plain}.csv
//! search/<variant>_<model>_{noise,plain}.csv
//! models/<variant>_<model>.json  fitted on all rows, with noise
//! explain/<variant>_<model>_*    importance and dependence curves
//! curves/<variant>_<model>.{csv,png}
//! results.csv  report.csv  report.txt
//! run.log                        the only file with timestamps
//! ```
//!
//! `<variant>` is `<area>_<characteristic>_<radius>`. Fold assignment is
//! shared by all variants of a run so scores are paired.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use noisemap::area::{read_areas_file, Area};
use noisemap::ensemble::cv::{cross_validate, learning_curve, write_curve, write_cv};
use noisemap::ensemble::model_io::save_model;
use noisemap::ensemble::search::{random_search, write_trace};
use noisemap::ensemble::ModelSpec;
use noisemap::georef::{fit_affine, read_gcp_file, residual_rmse};
use noisemap::io::write_atomic;
use noisemap::matrix::FeatureMatrix;
use noisemap::property_prep::{read_properties_file, write_properties_file, Encoder, PropertyRecord, NOISE_COLUMNS};
use noisemap::raster::Raster;
use noisemap::reconstruct::scan_to_vec;
use noisemap::report::{build_table, write_results_file, ResultRow};
use noisemap::seed::derive_seed;
use noisemap::spatial_join::{attach_noise, JoinConfig, TileIndex};
use noisemap::tessellate::{reduction_ratio, tessellate, write_tiles_file, Tile};
use noisemap::{Error, Result};

use crate::commands::{explain_into, prepare, write_json, ExplainOptions};
use crate::config::{ExperimentConfig, ModelConfig};
use crate::plot::save_line_chart;

/// Timestamped progress lines, mirrored to the logger and written to
/// `run.log` at the end.
struct RunLog {
    lines: String,
}

impl RunLog {
    fn note(&mut self, msg: impl AsRef<str>) {
        let msg = msg.as_ref();
        log::info!("{msg}");
        let _ = writeln!(self.lines, "{} {msg}", chrono::Local::now().to_rfc3339());
    }
}

fn csv_file(path: PathBuf, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    write_atomic(path, &buf)
}

fn radius_label(r: f64) -> String {
    format!("{r}").replace('.', "p")
}

pub struct RunOutput {
    pub results: Vec<ResultRow>,
    pub report: String,
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let seed = cfg.seed()?;
    let palette = cfg.palette()?;
    let characteristics = cfg.characteristics()?;
    fs::create_dir_all(out)?;
    let mut log = RunLog { lines: String::new() };
    log.note(format!("run started, seed {seed}, output {}", out.display()));

    let gcps = read_gcp_file(&cfg.gcps)?;
    let transform = fit_affine(&gcps)?;
    write_json(out.join("transform.json"), &transform)?;
    log.note(format!("georeferenced with {} control points, RMSE {:.3e}", gcps.len(), residual_rmse(&transform, &gcps)?));

    let mut tiles: Vec<(&str, Vec<Tile>)> = Vec::new();
    for (name, path) in [("day", &cfg.images.day), ("night", &cfg.images.night), ("aviation", &cfg.images.aviation)] {
        let Some(path) = path else { continue };
        let raster = Raster::load_png(path)?;
        let samples = scan_to_vec(&raster, &transform, &palette, cfg.threshold)?;
        let n = samples.len() as u64;
        let t = tessellate(samples, cfg.decimals)?;
        write_tiles_file(out.join(format!("tiles_{name}.csv")), &t)?;
        log.note(format!(
            "{name}: {n} of {} pixels classified, {} tiles (reduction {:.2}%)",
            raster.width() * raster.height(),
            t.len(),
            reduction_ratio(n, t.len() as u64)? * 100.0
        ));
        tiles.push((name, t));
    }
    let tiles_for = |name: &str| tiles.iter().find(|(n, _)| *n == name).map(|(_, t)| t.as_slice());

    let raw = read_properties_file(&cfg.properties)?;
    let (prepared, prep_report) = prepare(&raw, &cfg.prep)?;
    write_properties_file(out.join("prepared.csv"), &prepared)?;
    write_json(out.join("prep_report.json"), &prep_report)?;
    log.note(format!("prepared {} of {} listings", prepared.len(), raw.len()));

    let areas: Vec<Option<Area>> = match &cfg.areas {
        Some(p) => read_areas_file(p)?.into_iter().map(Some).collect(),
        None => vec![None],
    };

    let cv_seed = derive_seed(seed, "experiment-cv", 0);
    let mut results = Vec::new();
    for &radius in &cfg.radii {
        let day = tiles_for("day").map(|t| TileIndex::build(t, radius)).transpose()?;
        let night = tiles_for("night").map(|t| TileIndex::build(t, radius)).transpose()?;
        for &ch in &characteristics {
            let joined = attach_noise(&prepared, day.as_ref(), night.as_ref(), &JoinConfig::new(radius, ch)?)?;
            log.note(format!("radius {radius} m, characteristic {}: {} listings with noise", ch.label(), joined.len()));
            for area in &areas {
                let (area_name, rows) = match area {
                    Some(a) => (a.name.as_str(), a.filter(&joined)),
                    None => ("all", joined.clone()),
                };
                let variant = format!("{area_name}_{}_{}", ch.label(), radius_label(radius));
                let ctx = Variant { cfg, name: &variant, seed, cv_seed };
                let mut rows_out = ctx.evaluate(&rows, area_name, ch.label(), radius, out, &mut log)?;
                results.append(&mut rows_out);
            }
        }
    }

    write_results_file(out.join("results.csv"), &results)?;
    let table = build_table(vec![results.clone()])?;
    csv_file(out.join("report.csv"), |b| table.write_csv(b))?;
    let report = table.to_text();
    write_atomic(out.join("report.txt"), report.as_bytes())?;
    log.note(format!("wrote {} result rows", results.len()));
    write_atomic(out.join("run.log"), log.lines.as_bytes())?;
    Ok(RunOutput { results, report })
}

struct Variant<'a> {
    cfg: &'a ExperimentConfig,
    name: &'a str,
    seed: u64,
    cv_seed: u64,
}

impl Variant<'_> {
    fn evaluate(
        &self,
        rows: &[PropertyRecord],
        area: &str,
        characteristic: &str,
        radius: f64,
        out: &Path,
        log: &mut RunLog,
    ) -> Result<Vec<ResultRow>> {
        let cfg = self.cfg;
        if rows.len() < cfg.k_folds {
            return Err(Error::InsufficientData(format!(
                "variant {} has {} listings, fewer than {} folds",
                self.name,
                rows.len(),
                cfg.k_folds
            )));
        }
        let encoder = Encoder::fit(rows, cfg.prep.orders.clone(), cfg.prep.encoding)?;
        let with_noise = encoder.transform(rows)?;
        let plain = with_noise.without_columns(|c| NOISE_COLUMNS.contains(&c));
        fs::create_dir_all(out.join("data"))?;
        csv_file(out.join("data").join(format!("{}.csv", self.name)), |b| with_noise.write_csv(b))?;

        let mut results = Vec::new();
        for model in &cfg.models {
            for (noise, x) in [(false, &plain), (true, &with_noise)] {
                let flag = if noise { "noise" } else { "plain" };
                let stem = format!("{}_{}_{flag}", self.name, model.name);
                let spec = self.tuned_spec(model, x, &stem, out)?;
                let cv = cross_validate(x, &spec, cfg.k_folds, self.cv_seed)?;
                fs::create_dir_all(out.join("cv"))?;
                csv_file(out.join("cv").join(format!("{stem}.csv")), |b| write_cv(b, &cv))?;
                log.note(format!("{stem}: MAE {:.2}, MAPE {:.4}", cv.mean_mae, cv.mean_mape));
                results.push(ResultRow {
                    model: model.name.clone(),
                    area: area.to_string(),
                    characteristic: characteristic.to_string(),
                    radius_m: radius,
                    noise,
                    mae: cv.mean_mae,
                    mape: cv.mean_mape,
                });
                if noise {
                    self.final_artifacts(model, &spec, x, out)?;
                }
            }
        }
        Ok(results)
    }

    fn tuned_spec(&self, model: &ModelConfig, x: &FeatureMatrix, stem: &str, out: &Path) -> Result<ModelSpec> {
        let base = model.base_spec()?;
        let Some(search) = &model.search else { return Ok(base) };
        let search_cv = derive_seed(self.seed, "search-cv", 0);
        let outcome = random_search(
            &search.space,
            search.budget,
            |hp| Ok(cross_validate(x, &base.with_hyperparams(hp), self.cfg.k_folds, search_cv)?.mean_mae),
            derive_seed(self.seed, &format!("search/{stem}"), 0),
        )?;
        fs::create_dir_all(out.join("search"))?;
        csv_file(out.join("search").join(format!("{stem}.csv")), |b| write_trace(b, &outcome.trace))?;
        Ok(base.with_hyperparams(&outcome.best))
    }

    fn final_artifacts(&self, model: &ModelConfig, spec: &ModelSpec, x: &FeatureMatrix, out: &Path) -> Result<()> {
        let stem = format!("{}_{}", self.name, model.name);
        let fitted = spec.fit(x, derive_seed(self.seed, "final-model", 0))?;
        fs::create_dir_all(out.join("models"))?;
        save_model(out.join("models").join(format!("{stem}.json")), &fitted)?;
        let opts = ExplainOptions {
            seed: self.seed,
            repeats: self.cfg.permutation_repeats,
            grid_size: self.cfg.grid_size,
            features: Vec::new(),
        };
        explain_into(&fitted, x, &opts, &out.join("explain"), &stem)?;
        if let Some(curve) = &self.cfg.learning_curve {
            let points = learning_curve(x, spec, &curve.fractions, curve.validation_fraction, derive_seed(self.seed, "curve", 0))?;
            fs::create_dir_all(out.join("curves"))?;
            csv_file(out.join("curves").join(format!("{stem}.csv")), |b| write_curve(b, &points))?;
            let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fraction, p.validation_mae)).collect();
            save_line_chart(out.join("curves").join(format!("{stem}.png")), &xy)?;
        }
        Ok(())
    }
}
