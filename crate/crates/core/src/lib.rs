//! Frame decompositions for linear ill-posed problems.
//!
//! The crate is organised bottom-up: [`hilbert`] holds discretized Hilbert
//! spaces and dense linear algebra, [`frames`] builds frames, dual frames and
//! frame decompositions on top of it, and [`regfilter`] turns a decomposition
//! into filtered reconstructions with a-priori or discrepancy parameter
//! choice. [`radon`] and [`radon_frames`] instantiate the machinery for
//! parallel-beam tomography and [`experiments`] drives the studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod frames;
pub mod hilbert;
pub mod io;
pub mod radon;
pub mod radon_frames;
pub mod regfilter;
pub mod runtime;
pub mod wavelet;

pub use error::{Error, Result};
pub use hilbert::C64;
