//! Noise-map reconstruction and noise-aware property price modelling.
//!
//! The pipeline runs in two halves. The first turns legend-coded noise
//! heatmaps into georeferenced data: [`georef`] fits the pixel → lon/lat
//! transform, [`reconstruct`] classifies every pixel against a [`legend`]
//! palette with CIEDE2000 ([`colorspace`]) and [`tessellate`] reduces the
//! samples to fixed-precision tiles. The second half attaches tile noise to
//! property listings ([`spatial_join`]), cleans and encodes them
//! ([`property_prep`]), fits tree ensembles ([`ensemble`]) and explains them
//! ([`interpret`]). [`synth`] generates the synthetic fixtures used in tests
//! and demos.

pub mod area;
pub mod colorspace;
pub mod ensemble;
pub mod error;
pub mod georef;
pub mod interpret;
pub mod io;
pub mod legend;
pub mod matrix;
pub mod par;
pub mod property_prep;
pub mod raster;
pub mod reconstruct;
pub mod render;
pub mod report;
pub mod seed;
pub mod spatial_join;
pub mod synth;
pub mod tessellate;

pub use error::{Error, Result};
