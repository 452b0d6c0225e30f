pub mod baseline;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod io;
pub mod latent;
pub mod metrics;
pub mod plot;
pub mod raster;
pub mod satellite;
pub mod segmentation;
pub mod series;
pub mod suntrack;
pub mod synthetic;
pub mod table;
pub mod timefmt;

pub use error::{Error, Result};
