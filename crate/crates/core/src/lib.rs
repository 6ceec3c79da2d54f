//! Spectra of random Markov matrices with heavy-tailed weights.
//!
//! A matrix `X` with i.i.d. non-negative entries of tail index `α ∈ (0, 1)`
//! is row-normalized into a Markov matrix `M`. As `n → ∞` the singular values
//! of `M - z` converge to a law `ν_{α,z}` described by random weighted trees.
//! This crate samples the ensemble, computes its spectra, builds the trees,
//! and estimates `ν_{α,z}` both from the trees and from the recursive
//! distributional equations their resolvents satisfy.

pub mod ensemble;
pub mod error;
pub mod heavy_tail;
pub mod linalg;
pub mod measure;
pub mod pwit;
pub mod rde;
pub mod seed;
pub mod spectra;
pub mod unfolding;

pub use error::{Error, Result};
pub use num_complex::Complex64;
