//! Unsupervised two-texture segmentation with active contours on the manifold of
//! symmetric positive definite matrices.
//!
//! A level-set contour is evolved by gradient ascent to maximize the affine-invariant
//! geodesic distance between the second-moment matrices of `R × R` intensity patches
//! inside and outside the contour. A Chan–Vese baseline and a synthetic texture
//! generator are included.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below fix the scalar.

// `!(x > 0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chan_vese;
pub mod cli;
pub mod config;
mod error;
pub mod evolution;
pub mod features;
pub mod grid;
pub mod io;
pub mod level_set;
mod scalar;
pub mod spd;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Grid, Mask};
pub use scalar::Real;

pub type SpdMatrix64 = spd::SpdMatrix<f64>;
pub type SpdMatrix32 = spd::SpdMatrix<f32>;
pub type TangentMatrix64 = spd::TangentMatrix<f64>;
pub type TangentMatrix32 = spd::TangentMatrix<f32>;
pub type Matrix64 = spd::Matrix<f64>;
pub type Matrix32 = spd::Matrix<f32>;
pub type GrayImage64 = features::GrayImage<f64>;
pub type GrayImage32 = features::GrayImage<f32>;
pub type PatchField64 = features::PatchField<f64>;
pub type PatchField32 = features::PatchField<f32>;
pub type LevelSet64 = level_set::LevelSet<f64>;
pub type LevelSet32 = level_set::LevelSet<f32>;
pub type EvolveParams64 = evolution::EvolveParams<f64>;
pub type EvolveParams32 = evolution::EvolveParams<f32>;
pub type SegmentationResult64 = evolution::SegmentationResult<f64>;
pub type ChanVeseParams64 = chan_vese::ChanVeseParams<f64>;
