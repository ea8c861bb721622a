use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noisemap::legend::Palette;
use noisemap::render::RenderMode;
use noisemap::spatial_join::NoiseCharacteristic;
use noisemap::{Error, Result};
use noisemap_cli::commands::{self, ExplainOptions};
use noisemap_cli::config::ExperimentConfig;
use noisemap_cli::experiment;
use noisemap_cli::fixtures::{write_fixtures, FixtureOptions};

#[derive(Parser)]
#[command(name = "noisemap", version, about = "Noise heatmaps to tiles, property joins and noise-aware price models")]
struct Cli {
    /// Root seed for every random choice (required by train, explain and synth).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Filled,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the pixel → lon/lat affine transform from control points.
    Georef { gcps: PathBuf },
    /// Classify heatmap pixels into noise samples.
    Reconstruct {
        image: PathBuf,
        #[arg(long)]
        transform: PathBuf,
        /// Built-in palette name or palette TOML file.
        #[arg(long)]
        palette: String,
        #[arg(long, default_value_t = noisemap::colorspace::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = "samples")]
        name: String,
    },
    /// Aggregate samples into fixed-precision tiles.
    Tessellate {
        samples: PathBuf,
        #[arg(long, default_value_t = noisemap::tessellate::DEFAULT_DECIMALS)]
        decimals: u32,
        #[arg(long, default_value = "tiles")]
        name: String,
    },
    /// Attach tile noise to property listings.
    Join {
        properties: PathBuf,
        #[arg(long)]
        day: Option<PathBuf>,
        #[arg(long)]
        night: Option<PathBuf>,
        #[arg(long)]
        radius: f64,
        /// I (day and night), II (combined), III (day) or IV (night).
        #[arg(long)]
        characteristic: NoiseCharacteristic,
    },
    /// Filter outliers, impute and encode listings.
    Prep {
        properties: PathBuf,
        /// TOML with `rules`, `orders` and optional `encoding`.
        #[arg(long)]
        rules: PathBuf,
    },
    /// Run a full experiment from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Importance and partial dependence for a saved model.
    Explain {
        model: PathBuf,
        /// Encoded feature matrix (CSV with a trailing target column).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        grid_size: usize,
        /// Features to sweep; defaults to the noise columns.
        #[arg(long = "feature")]
        features: Vec<String>,
    },
    /// Draw tiles back into a legend-colored heatmap.
    Render {
        tiles: PathBuf,
        #[arg(long)]
        palette: String,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        pixels_per_cell: usize,
        #[arg(long, default_value_t = noisemap::colorspace::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = "rendered")]
        name: String,
    },
    /// Merge result files into a comparison table.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Write a synthetic input set and experiment config.
    Synth {
        #[arg(long, default_value_t = FixtureOptions::default().rows_per_region)]
        rows_per_region: usize,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        "config" => 2,
        "io" => 3,
        "data" | "schema" => 4,
        "insufficient-data" => 5,
        "geometry" | "degenerate-grid" => 6,
        _ => 1,
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Config(format!("{what} needs --seed")))
}

fn run(cli: Cli) -> Result<String> {
    let out = cli.out;
    match cli.command {
        Command::Georef { gcps } => commands::cmd_georef(&gcps, &out),
        Command::Reconstruct { image, transform, palette, threshold, name } => {
            commands::cmd_reconstruct(&image, &transform, &Palette::resolve(&palette)?, threshold, &out, &name)
        }
        Command::Tessellate { samples, decimals, name } => commands::cmd_tessellate(&samples, decimals, &out, &name),
        Command::Join { properties, day, night, radius, characteristic } => {
            commands::cmd_join(&properties, day.as_deref(), night.as_deref(), radius, characteristic, &out)
        }
        Command::Prep { properties, rules } => commands::cmd_prep(&properties, &rules, &out),
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config, cli.seed)?;
            let out = if out.as_os_str() == "out" { cfg.out.clone().unwrap_or(out) } else { out };
            let run = experiment::run(&cfg, &out)?;
            Ok(format!("{}\n{} result rows written to {}", run.report.trim_end(), run.results.len(), out.display()))
        }
        Command::Explain { model, data, repeats, grid_size, features } => {
            let opts = ExplainOptions { seed: require_seed(cli.seed, "explain")?, repeats, grid_size, features };
            commands::cmd_explain(&model, &data, &opts, &out)
        }
        Command::Render { tiles, palette, mode, pixels_per_cell, threshold, name } => {
            let mode = match mode {
                Mode::Exact => RenderMode::Exact { min_pixels_per_cell: pixels_per_cell },
                Mode::Filled => RenderMode::Filled { pixels_per_cell },
            };
            commands::cmd_render(&tiles, &Palette::resolve(&palette)?, mode, threshold, &out, &name)
        }
        Command::Report { results } => commands::cmd_report(&results, &out),
        Command::Synth { rows_per_region } => {
            let seed = require_seed(cli.seed, "synth")?;
            let files = write_fixtures(&out, FixtureOptions { seed, rows_per_region })?;
            Ok(format!("wrote {} files to {}", files.len(), out.display()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match noisemap::par::with_workers(workers, || run(cli)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error[{}]: {err}", err.category());
            ExitCode::from(exit_code(&err))
        }
    }
}
