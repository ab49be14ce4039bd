pub mod embedding;
pub mod evaluation;
pub mod fsutil;
pub mod heuristics;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod pu;
mod scalar;
pub mod synthetic;

pub use scalar::{cast_vec, Scalar};

pub type Centroid64 = pu::Centroid<f64>;
pub type Centroid32 = pu::Centroid<f32>;
pub type PuModel64 = pu::PuModel<f64>;
pub type PuModel32 = pu::PuModel<f32>;
