//! Keyed deterministic random streams.
//!
//! Every consumer of randomness asks for its own `(seed, key)` stream, so the
//! values drawn for one worker never depend on how many values another worker
//! consumed or on the order tasks were scheduled in.

use crate::field::{Fe, FieldError, PrimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Key namespaces. The low 32 bits carry an index within the namespace.
pub mod keys {
    pub const INPUT_A: u64 = 1 << 32;
    pub const INPUT_B: u64 = 2 << 32;
    pub const EVAL_POINTS: u64 = 3 << 32;
    pub const WORKER_FAULT: u64 = 4 << 32;
    pub const TRIAL: u64 = 5 << 32;
}

pub fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Draws `count` distinct nonzero field elements that avoid `exclude`.
pub fn distinct_points(
    field: &PrimeField,
    count: usize,
    exclude: &[Fe],
    rng: &mut impl Rng,
) -> Result<Vec<Fe>, FieldError> {
    let excluded: HashSet<Fe> = exclude.iter().copied().filter(|z| !z.is_zero()).collect();
    let available = (field.modulus() - 1).saturating_sub(excluded.len() as u64);
    if (count as u64) > available {
        return Err(FieldError::FieldTooSmall {
            modulus: field.modulus(),
            requested: count,
        });
    }
    let mut seen = excluded;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = Fe(rng.gen_range(1..field.modulus()));
        if seen.insert(x) {
            out.push(x);
        }
    }
    Ok(out)
}
