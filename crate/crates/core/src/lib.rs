//! Wyner-Ziv lattice vector quantizers.
//!
//! A quantizer is the triplet `(Λ, κ, s)`: a fine lattice `Λ`, a similarity
//! map `κ` whose image `κ(Λ)` is the coarse sublattice, and a scale `s`.
//! The encoder sends only the coset of the fine quantization of `x` modulo
//! the coarse lattice; the decoder picks the member of that coset nearest to
//! its side information `y`.
//!
//! Modules, bottom-up:
//! - [`lattice`]: generator matrices, nearest-point maps, Voronoi volumes and
//!   Monte Carlo second moments.
//! - [`sublattice`]: similarity maps (Eisenstein ideals of `A2`, integer
//!   scalings of `Zⁿ`), coset tables and minimal norms.
//! - [`codec`]: the encoder/decoder pair, the correlation-driven scale
//!   schedule and the Lloyd-trained matched fine codebook.
//! - [`sources`]: correlated Gaussian pairs and the Brownian sensor field.
//! - [`analysis`]: Monte Carlo rate and distortion, closed-form bounds and
//!   the figure of merit against Wyner's bound.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod codec;
mod error;
pub mod lattice;
mod linalg;
pub mod mc;
pub mod sources;
pub mod sublattice;

pub use error::{Error, Result};
pub use lattice::{Lattice, LatticePoint};
pub use sublattice::{CosetTable, SimilarityMap, Sublattice};
pub use codec::{MatchedCodec, MatchedFineCodebook, SideInfoCodec, WzLvq};
