//! Qubit-efficient encodings of QUBO problems for variational quantum algorithms.
//!
//! The crate bundles an exact statevector simulator, a density-matrix simulator with
//! thermal, depolarizing and readout noise, the minimal and two-body encodings with
//! their cost functions, derivative-free optimizers, solution sampling and the
//! end-to-end experiment pipelines used by the command-line runner.
//!
//! Basis ordering is fixed crate-wide: qubit 0 is the most significant bit of a basis
//! index. Encoded states place ancilla qubits on the lowest qubit indices, so the basis
//! index of ancilla value `s` on register state `r` is `(s << n_r) | r`.

pub mod encodings;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod noise;
pub mod optimizer;
pub mod qubo;
pub mod rng;
pub mod sampling;
pub mod simulator;

pub use error::{Error, Result};
