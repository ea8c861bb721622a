use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unseen category {value:?} for feature {feature}")]
    UnseenCategory { feature: String, value: String },

    #[error("reduction ratio is undefined for zero input samples")]
    UndefinedRatio,

    #[error("model has not been fitted")]
    NotFitted,

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Stable, machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Toml(_) => "config",
            Error::InsufficientData(_) => "insufficient-data",
            Error::DegenerateGeometry(_) => "geometry",
            Error::Schema(_) | Error::UnseenCategory { .. } => "schema",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::UndefinedRatio => "undefined-ratio",
            Error::NotFitted => "state",
            Error::DegenerateGrid(_) => "degenerate-grid",
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => "io",
            Error::InvalidRecord(_) | Error::Csv(_) | Error::Json(_) => "data",
            Error::Io(_) | Error::Image(_) => "io",
        }
    }
}
