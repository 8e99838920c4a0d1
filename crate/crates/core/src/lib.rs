//! Coded batch matrix multiplication over prime fields.
//!
//! The master holds `n` pairs `(A_i, B_i)` and wants every product
//! `A_i · B_i`. It hands each of `m` workers one coded pair, each worker
//! multiplies, and the master decodes from whichever responses arrive first.
//! This crate implements rook codes (polynomial, base-3 and Behrend exponent
//! sets), Lagrange coded computing, cross subspace alignment, plain
//! replication, and a deterministic fault-injection simulator to compare them.

pub mod batchcodes;
pub mod bench;
pub mod exponents;
pub mod field;
pub mod matrix;
pub mod rook;
pub mod scheme;
pub mod sim;
pub mod stream;

pub use exponents::{ExponentPair, SumSupport};
pub use field::{Fe, FieldError, OpCounter, PrimeField, MERSENNE_61};
pub use matrix::FieldMatrix;
