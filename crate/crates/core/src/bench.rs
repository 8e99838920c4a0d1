//! Gap-power cost of the Behrend encoder against `n·√(log2 n)`.

use crate::exponents::{behrend_exponents, ExponentError};
use crate::field::PrimeField;
use crate::rook::delta_muls;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub n: usize,
    pub delta_muls: u64,
    /// `delta_muls / (n·√(log2 n))`; the raw count when `n = 1`.
    pub ratio: f64,
}

pub fn delta_ratio(n: usize, delta: u64) -> f64 {
    let scale = n as f64 * (n as f64).log2().sqrt();
    if scale > 0.0 {
        delta as f64 / scale
    } else {
        delta as f64
    }
}

pub fn bench_delta(n_list: &[usize]) -> Result<Vec<DeltaRow>, ExponentError> {
    let field = PrimeField::default();
    n_list
        .iter()
        .map(|&n| {
            let pair = behrend_exponents(n)?;
            let delta = delta_muls(&field, &pair);
            Ok(DeltaRow {
                n,
                delta_muls: delta,
                ratio: delta_ratio(n, delta),
            })
        })
        .collect()
}

pub fn write_delta_csv(rows: &[DeltaRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "delta_muls", "ratio"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.delta_muls.to_string(), r.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
