//! Metric-space magnitude and weighting-vector toolkit.
//!
//! For a finite metric space `X` with similarity matrix
//! `zeta(i, j) = exp(-t d(x_i, x_j))`, the weighting vector solves
//! `zeta w = 1` and the magnitude is the sum of its entries. This crate
//! computes both exactly, glues weightings of subsets and unions together
//! via Schur complements, approximates weightings in linear time through
//! kernel density and rectangle-count estimators, and applies weighting
//! scores to outlier detection and active learning.
//!
//! All numerical code is generic over the scalar type via [`scalar::Real`];
//! `f64` aliases for the main types live at the crate root.
#![allow(clippy::needless_range_loop)] // index loops are the house style in kernels

pub mod active;
pub mod approx;
pub mod error;
pub mod gluing;
pub mod graph;
pub mod linalg;
pub mod outlier;
pub mod scalar;
pub mod space;
pub mod spatial;
pub mod synth;
pub mod weighting;

pub use error::{Error, Result};

/// Convenience aliases for the default double-precision pipeline.
pub type PointCloud64 = space::PointCloud<f64>;
pub type DistanceMatrix64 = space::DistanceMatrix<f64>;
pub type ScaleParameter64 = space::ScaleParameter<f64>;
pub type Standardizer64 = space::Standardizer<f64>;
pub type SimilarityMatrix64 = weighting::SimilarityMatrix<f64>;
pub type WeightingVector64 = weighting::WeightingVector<f64>;
pub type MagnitudeSeries64 = weighting::MagnitudeSeries<f64>;
pub type Mat64 = linalg::Mat<f64>;

/// Single-precision variants.
pub type PointCloud32 = space::PointCloud<f32>;
pub type DistanceMatrix32 = space::DistanceMatrix<f32>;
pub type SimilarityMatrix32 = weighting::SimilarityMatrix<f32>;
pub type WeightingVector32 = weighting::WeightingVector<f32>;
