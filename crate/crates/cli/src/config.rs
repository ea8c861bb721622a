//! Experiment configuration (TOML). Relative paths resolve against the
//! directory holding the config file. Everything is checked by
//! [`ExperimentConfig::load`] before any stage runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use noisemap::ensemble::search::SearchSpace;
use noisemap::ensemble::ModelSpec;
use noisemap::legend::Palette;
use noisemap::property_prep::{NominalEncoding, OrdinalOrders, OutlierRule};
use noisemap::spatial_join::{JoinConfig, NoiseCharacteristic};
use noisemap::tessellate::MAX_DECIMALS;
use noisemap::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Images {
    pub day: Option<PathBuf>,
    pub night: Option<PathBuf>,
    /// Reconstructed and tessellated alongside, never joined.
    pub aviation: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepConfig {
    #[serde(default)]
    pub rules: Vec<OutlierRule>,
    pub orders: OrdinalOrders,
    #[serde(default)]
    pub encoding: NominalEncoding,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: usize,
    #[serde(default)]
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    /// One of [`ModelSpec::PRESETS`]; ignored when `spec` is given.
    pub preset: Option<String>,
    pub spec: Option<ModelSpec>,
    pub search: Option<SearchConfig>,
}

impl ModelConfig {
    pub fn base_spec(&self) -> Result<ModelSpec> {
        match (&self.spec, &self.preset) {
            (Some(spec), _) => Ok(*spec),
            (None, Some(p)) => ModelSpec::preset(p),
            (None, None) => Err(Error::Config(format!("model {:?} needs a preset or a spec", self.name))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub fractions: Vec<f64>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

fn default_threshold() -> f64 {
    noisemap::colorspace::DEFAULT_THRESHOLD
}

fn default_decimals() -> u32 {
    noisemap::tessellate::DEFAULT_DECIMALS
}

fn default_folds() -> usize {
    5
}

fn default_repeats() -> usize {
    5
}

fn default_grid() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    /// Built-in palette name or palette file.
    pub palette: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub gcps: PathBuf,
    pub images: Images,
    #[serde(default = "default_decimals")]
    pub decimals: u32,
    pub radii: Vec<f64>,
    pub characteristics: Vec<String>,
    pub properties: PathBuf,
    /// Optional area polygons; without them all listings form one area `all`.
    pub areas: Option<PathBuf>,
    pub prep: PrepConfig,
    pub models: Vec<ModelConfig>,
    #[serde(default = "default_folds")]
    pub k_folds: usize,
    pub learning_curve: Option<CurveConfig>,
    #[serde(default = "default_repeats")]
    pub permutation_repeats: usize,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        for p in [&mut cfg.gcps, &mut cfg.properties] {
            *p = base_dir.join(&*p);
        }
        for p in [&mut cfg.images.day, &mut cfg.images.night, &mut cfg.images.aviation, &mut cfg.areas, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            *p = base_dir.join(&*p);
        }
        if !noisemap::legend::PaletteName::is_builtin(&cfg.palette) {
            cfg.palette = base_dir.join(&cfg.palette).to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    /// Reads and validates a config; `seed` overrides the file's seed.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml_str(&text, base)?;
        if seed.is_some() {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a root seed is required (config `seed` or --seed)".into()))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn palette(&self) -> Result<Palette> {
        Palette::resolve(&self.palette)
    }

    pub fn characteristics(&self) -> Result<Vec<NoiseCharacteristic>> {
        self.characteristics.iter().map(|c| c.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let mut files = vec![("gcps", Some(&self.gcps)), ("properties", Some(&self.properties))];
        files.extend([
            ("images.day", self.images.day.as_ref()),
            ("images.night", self.images.night.as_ref()),
            ("images.aviation", self.images.aviation.as_ref()),
            ("areas", self.areas.as_ref()),
        ]);
        for (what, path) in files {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::Config(format!("{what}: file {} does not exist", p.display())));
                }
            }
        }
        self.palette()?;
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        if self.decimals > MAX_DECIMALS {
            return Err(Error::Config(format!("decimals must be at most {MAX_DECIMALS}")));
        }
        if self.radii.is_empty() || self.characteristics.is_empty() {
            return Err(Error::Config("at least one radius and one characteristic are required".into()));
        }
        let characteristics = self.characteristics()?;
        for &r in &self.radii {
            JoinConfig::new(r, NoiseCharacteristic::I)?;
        }
        for ch in characteristics {
            if ch.needs_day() && self.images.day.is_none() {
                return Err(Error::Config(format!("characteristic {} needs images.day", ch.label())));
            }
            if ch.needs_night() && self.images.night.is_none() {
                return Err(Error::Config(format!("characteristic {} needs images.night", ch.label())));
            }
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        let mut names: Vec<&str> = Vec::new();
        for m in &self.models {
            if names.contains(&m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name {:?}", m.name)));
            }
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("model name {:?} must be [A-Za-z0-9_-]+", m.name)));
            }
            names.push(&m.name);
            m.base_spec()?.validate().map_err(|e| Error::Config(format!("model {}: {e}", m.name)))?;
            if let Some(s) = &m.search {
                if s.budget == 0 {
                    return Err(Error::Config(format!("model {}: search budget must be at least 1", m.name)));
                }
                s.space.validate()?;
            }
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        if self.permutation_repeats == 0 || self.grid_size < 2 {
            return Err(Error::Config("permutation_repeats must be ≥ 1 and grid_size ≥ 2".into()));
        }
        if let Some(c) = &self.learning_curve {
            if c.fractions.is_empty() || c.fractions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("learning_curve.fractions must be non-empty and ascending".into()));
            }
            if c.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) || !(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)
            {
                return Err(Error::Config("learning-curve fractions must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}
