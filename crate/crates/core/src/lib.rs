//! Weight-space interpolation and generalization-surface analysis.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] and [`checkpoint`]: named parameter sets and the LSCP file format.
//! - [`interp`]: 1D interpolation, delta directions, the 2D plane, direction
//!   diagnostics and model analogies.
//! - [`grid`] and [`cache`]: coefficient grids and evaluation of interpolated models.
//! - [`aggregate`] and [`stats`]: reference normalization, seed aggregation with
//!   Student-t intervals, variance profiles and surface flatness.
//! - [`toy`]: a small synthetic two-domain transfer lab that produces checkpoints
//!   and an evaluator.
//! - [`report`]: CSV records and SVG figures.
//!
//! Numerical code is generic over [`Scalar`] (`f32` and `f64`). Checkpoints on
//! disk are always `f32`; the `*32` aliases below are what most callers want.

pub mod aggregate;
pub mod cache;
pub mod checkpoint;
pub mod error;
pub mod grid;
pub mod interp;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod toy;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{ParameterSet, SubsetFilter, Tensor};

pub type ParameterSet32 = tensor::ParameterSet<f32>;
pub type ParameterSet64 = tensor::ParameterSet<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Delta32 = interp::Delta<f32>;
pub type Delta64 = interp::Delta<f64>;
