//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by network construction, linear algebra, and samplers.
#[derive(Debug, Error)]
pub enum Error {
    /// A structurally invalid network (bad conductance, disconnected
    /// interior, self-loop, ...).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// An argument outside an operation's documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear-algebra failure (singular or non-positive-definite matrix,
    /// conditioning beyond tolerance).
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// A random walk exceeded its step cap; reported, never silently
    /// truncated.
    #[error("walk exceeded step cap of {cap} steps starting from vertex {start}")]
    StepCapExceeded { start: usize, cap: u64 },

    /// Numerical instability in the Loewner flow.
    #[error("loewner flow instability: {0}")]
    FlowInstability(String),

    /// Malformed serialized input.
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
