//! Sampling and verification toolkit for Gaussian free fields (GFFs) on
//! finite electric networks, together with the zoo of exactly-solvable
//! objects that surround them:
//!
//! - [`network`]: weighted graphs with an interior/boundary split, lattice
//!   boxes, wired contractions, and edge subdivisions.
//! - [`laplace`]: network Laplacians, Green's functions, determinants,
//!   spanning-tree weights, and harmonic extensions — in both floating-point
//!   and exact rational arithmetic.
//! - [`field`]: discrete GFF samplers, Gibbs resampling, and the
//!   domain-Markov decomposition.
//! - [`wilson`]: random walks, chronological loop erasure, Wilson's
//!   uniform-spanning-tree algorithm, and walk occupation fields.
//! - [`loopsoup`]: rooted/unrooted/unoriented loops, Poissonian loop soups,
//!   occupation fields on sites and edges, and the squared-GFF couplings.
//! - [`cable`]: the cable-system GFF built from Brownian-bridge
//!   interpolation, excursion extraction, and sign-flip resampling.
//! - [`loewner`]: chordal Loewner flows, SLE driving, trace reconstruction,
//!   and level-line diagnostics at kappa = 4.
//! - [`continuum`]: a spectral GFF on the unit square, circle averages, and
//!   multiplicative-chaos (LQG) measure approximations.
//! - [`stats`]: the shared statistical harness (KS, chi-square, moment
//!   tests) and machine-readable reports.
//! - [`rng`]: deterministic counter-based seed splitting for replicas.
//!
//! Everything with an exactly known law is checked against exact linear
//! algebra or a Monte Carlo oracle; see the `tests/` directory and the
//! `acceptance` integration suite.

pub mod cable;
pub mod continuum;
pub mod error;
pub mod exact;
pub mod field;
pub mod laplace;
pub mod loewner;
pub mod loopsoup;
pub mod network;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod wilson;

pub use error::{Error, Result};
pub use network::{Edge, Network, VertexId, WiredGraph};
pub use stats::TestReport;
