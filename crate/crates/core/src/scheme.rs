//! Types shared by every coding scheme: batch inputs, worker messages, the
//! common encode/decode interface and its error type.

use crate::exponents::ExponentError;
use crate::field::{Fe, FieldError, OpCounter, PrimeField};
use crate::matrix::{FieldMatrix, LuFactors};
use crate::stream::{keys, stream};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error("need {needed} worker products, only {got} available")]
    NotEnoughProducts { needed: usize, got: usize },
    #[error("evaluation matrix stayed singular after substituting the next product")]
    SingularAfterRetry,
    #[error("evaluation point {0} appears twice")]
    DuplicateEvaluationPoint(Fe),
    #[error("evaluation point {0} is a pole of the encoding")]
    PoleEvaluation(Fe),
    #[error("every replica of pair {0} failed")]
    UncoveredPair(usize),
    #[error("exponent pair violates the decodability property")]
    NotDecodable,
    #[error("exponent {max} is not below modulus - 1 = {}", .modulus - 1)]
    ExponentTooLarge { max: u64, modulus: u64 },
    #[error("invalid scheme: {0}")]
    Invalid(String),
}

/// The `n` input pairs `(A_i, B_i)`, with `A_i` of size `rows x inner` and
/// `B_i` of size `inner x cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchInputs {
    a: Vec<FieldMatrix>,
    b: Vec<FieldMatrix>,
}

impl BatchInputs {
    pub fn new(a: Vec<FieldMatrix>, b: Vec<FieldMatrix>) -> Result<Self, CodeError> {
        if a.is_empty() || a.len() != b.len() {
            return Err(CodeError::Invalid(format!(
                "need the same positive number of A and B matrices, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let (da, db) = (a[0].dims(), b[0].dims());
        if da.1 != db.0 {
            return Err(FieldError::DimensionMismatch(format!(
                "A is {}x{} but B is {}x{}",
                da.0, da.1, db.0, db.1
            ))
            .into());
        }
        if a.iter().any(|m| m.dims() != da) || b.iter().any(|m| m.dims() != db) {
            return Err(FieldError::DimensionMismatch("batch matrices differ in shape".into()).into());
        }
        Ok(Self { a, b })
    }

    /// Scalar (1x1) inputs, convenient for worked examples.
    pub fn scalars(field: &PrimeField, a: &[u64], b: &[u64]) -> Result<Self, CodeError> {
        let wrap = |v: &[u64]| v.iter().map(|&x| FieldMatrix::scalar(field.elem(x))).collect();
        Self::new(wrap(a), wrap(b))
    }

    /// Uniformly random inputs; pair `i` draws from its own keyed stream.
    pub fn random(field: &PrimeField, n: usize, dims: (usize, usize, usize), seed: u64) -> Result<Self, CodeError> {
        let (rows, inner, cols) = dims;
        let a = (0..n)
            .map(|i| FieldMatrix::random(field, rows, inner, &mut stream(seed, keys::INPUT_A + i as u64)))
            .collect();
        let b = (0..n)
            .map(|i| FieldMatrix::random(field, inner, cols, &mut stream(seed, keys::INPUT_B + i as u64)))
            .collect();
        Self::new(a, b)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[FieldMatrix] {
        &self.a
    }

    pub fn b(&self) -> &[FieldMatrix] {
        &self.b
    }

    /// `(rows, inner, cols)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a[0].rows(), self.a[0].cols(), self.b[0].cols())
    }

    /// The uncoded answer `A_i · B_i` for every pair.
    pub fn direct_products(&self, field: &PrimeField, ops: &mut OpCounter) -> Result<Vec<FieldMatrix>, CodeError> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a.mul(field, b, ops).map_err(CodeError::from))
            .collect()
    }
}

/// What the master sends to one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerShare {
    pub worker_id: usize,
    pub x: Fe,
    pub a_tilde: FieldMatrix,
    pub b_tilde: FieldMatrix,
}

/// What a worker sends back: `E = Ã(x) · B̃(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerProduct {
    #[serde(rename = "worker")]
    pub worker_id: usize,
    #[serde(with = "decimal")]
    pub x: Fe,
    #[serde(rename = "e")]
    pub product: FieldMatrix,
}

mod decimal {
    use crate::field::Fe;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Fe, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.value().to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fe, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(Fe).map_err(serde::de::Error::custom)
    }
}

/// The worker's whole job: one matrix product.
pub fn worker_multiply(field: &PrimeField, share: &WorkerShare, ops: &mut OpCounter) -> Result<WorkerProduct, CodeError> {
    Ok(WorkerProduct {
        worker_id: share.worker_id,
        x: share.x,
        product: share.a_tilde.mul(field, &share.b_tilde, ops)?,
    })
}

/// Result of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    /// `A_i · B_i` for every pair.
    pub products: Vec<FieldMatrix>,
    /// Indices (into the slice handed to `decode`) of the products used.
    pub used: Vec<usize>,
    /// Whether the singular-matrix substitution path was taken.
    pub retried: bool,
}

/// Common interface of the coded schemes (rook, LCC, CSA).
pub trait BatchCode: Send + Sync {
    fn field(&self) -> &PrimeField;

    /// Batch size `n`.
    fn batch_size(&self) -> usize;

    /// Worst-case number of products needed to decode.
    fn threshold(&self) -> usize;

    /// Fewest products with which a decode can be attempted.
    fn min_responses(&self) -> usize {
        self.threshold()
    }

    /// One evaluation point per worker slot.
    fn eval_points(&self) -> &[Fe];

    /// Encodes the share for an arbitrary evaluation point.
    fn encode_at(&self, inputs: &BatchInputs, worker_id: usize, x: Fe, ops: &mut OpCounter) -> Result<WorkerShare, CodeError>;

    /// Decodes from the first `threshold()` usable products in arrival order.
    fn decode(&self, products: &[WorkerProduct], ops: &mut OpCounter) -> Result<Decoded, CodeError>;

    fn encode_share(&self, inputs: &BatchInputs, worker_id: usize, ops: &mut OpCounter) -> Result<WorkerShare, CodeError> {
        let x = *self
            .eval_points()
            .get(worker_id)
            .ok_or_else(|| CodeError::Invalid(format!("no evaluation point for worker {worker_id}")))?;
        self.encode_at(inputs, worker_id, x, ops)
    }
}

pub(crate) fn check_batch_size(expected: usize, inputs: &BatchInputs) -> Result<(), CodeError> {
    if inputs.n() != expected {
        return Err(CodeError::Invalid(format!(
            "scheme encodes {expected} pairs, inputs hold {}",
            inputs.n()
        )));
    }
    Ok(())
}

pub(crate) fn check_distinct(points: &[Fe]) -> Result<(), CodeError> {
    let mut seen = HashSet::with_capacity(points.len());
    for &x in points {
        if !seen.insert(x) {
            return Err(CodeError::DuplicateEvaluationPoint(x));
        }
    }
    Ok(())
}

/// Checks there are `needed` products of one shape; returns that shape.
fn check_products(products: &[WorkerProduct], needed: usize) -> Result<(usize, usize), CodeError> {
    if products.len() < needed {
        return Err(CodeError::NotEnoughProducts {
            needed,
            got: products.len(),
        });
    }
    let dims = products.first().map_or((0, 0), |p| p.product.dims());
    if let Some(p) = products[..needed].iter().find(|p| p.product.dims() != dims) {
        return Err(FieldError::DimensionMismatch(format!(
            "worker {} returned a {}x{} product, expected {}x{}",
            p.worker_id,
            p.product.rows(),
            p.product.cols(),
            dims.0,
            dims.1
        ))
        .into());
    }
    Ok(dims)
}

/// Solves the interpolation system built from the chosen products: row `r`
/// of the system is `basis(x_r)` and its right-hand side is the product
/// matrix. With `retry`, a singular system is retried once with the next
/// product in line substituted for the newest row.
pub(crate) fn interpolate(
    field: &PrimeField,
    products: &[WorkerProduct],
    needed: usize,
    retry: bool,
    mut basis: impl FnMut(Fe, &mut OpCounter) -> Result<Vec<Fe>, CodeError>,
    ops: &mut OpCounter,
) -> Result<(Vec<FieldMatrix>, Vec<usize>, bool), CodeError> {
    let dims = check_products(products, needed)?;
    let mut used: Vec<usize> = (0..needed).collect();
    let attempt = |used: &[usize], basis: &mut dyn FnMut(Fe, &mut OpCounter) -> Result<Vec<Fe>, CodeError>, ops: &mut OpCounter| {
        let xs: Vec<Fe> = used.iter().map(|&i| products[i].x).collect();
        check_distinct(&xs)?;
        let mut entries = Vec::with_capacity(needed * needed);
        for &x in &xs {
            entries.extend(basis(x, ops)?);
        }
        let v = FieldMatrix::new(needed, needed, entries)?;
        let lu = LuFactors::factor(field, &v, ops)?;
        let mut out = vec![FieldMatrix::zeros(dims.0, dims.1); needed];
        let mut column = vec![Fe::ZERO; needed];
        for e in 0..dims.0 * dims.1 {
            for (slot, &i) in column.iter_mut().zip(used) {
                *slot = products[i].product.entries()[e];
            }
            let sol = lu.solve_vec(field, &column, ops);
            for (o, s) in out.iter_mut().zip(sol) {
                o.set(e / dims.1, e % dims.1, s);
            }
        }
        Ok::<_, CodeError>(out)
    };
    match attempt(&used, &mut basis, ops) {
        Ok(sol) => Ok((sol, used, false)),
        Err(CodeError::Field(FieldError::SingularMatrix)) if retry => {
            if products.len() == needed || needed == 0 {
                return Err(CodeError::SingularAfterRetry);
            }
            used[needed - 1] = needed;
            match attempt(&used, &mut basis, ops) {
                Ok(sol) => Ok((sol, used, true)),
                Err(CodeError::Field(FieldError::SingularMatrix)) => Err(CodeError::SingularAfterRetry),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

/// Interpolation when the unknown coefficients sit on the consecutive
/// exponents `shift, shift + 1, …, shift + needed - 1`. Uses the Lagrange
/// form, `O(needed²)` per entry instead of elimination, and returns only the
/// coefficients listed in `wanted` (indices relative to `shift`). Distinct
/// nonzero points make the system nonsingular, so there is no retry.
pub(crate) fn interpolate_interval(
    field: &PrimeField,
    products: &[WorkerProduct],
    needed: usize,
    shift: u64,
    wanted: &[usize],
    ops: &mut OpCounter,
) -> Result<(Vec<FieldMatrix>, Vec<usize>, bool), CodeError> {
    let dims = check_products(products, needed)?;
    if needed == 0 {
        return Ok((Vec::new(), Vec::new(), false));
    }
    let products = &products[..needed];
    let xs: Vec<Fe> = products.iter().map(|p| p.x).collect();
    check_distinct(&xs)?;

    // d_j = x_j^shift · Π_{i≠j} (x_j − x_i)
    let mut denominators: Vec<Fe> = xs.iter().map(|&x| field.pow(x, shift, ops)).collect();
    for (i, &xi) in xs.iter().enumerate() {
        for (j, (d, &xj)) in denominators.iter_mut().zip(&xs).enumerate() {
            if i != j {
                *d = field.mul(*d, field.sub(xj, xi));
            }
        }
    }
    ops.muls((needed * (needed - 1)) as u64);
    ops.adds((needed * (needed - 1)) as u64);
    let weights = field.batch_inv(&denominators, ops)?;

    // M(x) = Π (x − x_j), low degree first
    let mut master = vec![Fe::ZERO; needed + 1];
    master[0] = Fe::ONE;
    for (j, &x) in xs.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            master[k] = field.sub(master[k - 1], field.mul(x, master[k]));
        }
        master[0] = field.neg(field.mul(x, master[0]));
        ops.muls(j as u64 + 2);
        ops.adds(j as u64 + 1);
    }

    // With w_j = 1/d_j, coefficient t of Σ_j w_j E_j M(x)/(x − x_j) is
    // Σ_{k>t} M_k S_{k−t−1}, where S_r = Σ_j w_j E_j x_j^r.
    let entries = dims.0 * dims.1;
    let mut scaled = vec![Fe::ZERO; entries * needed];
    for (j, (p, &w)) in products.iter().zip(&weights).enumerate() {
        for (e, &v) in p.product.entries().iter().enumerate() {
            scaled[e * needed + j] = field.mul(v, w);
        }
    }
    ops.muls((entries * needed) as u64);
    let mut sums = vec![Fe::ZERO; entries * needed];
    let mut powers = vec![Fe::ONE; needed];
    for r in 0..needed {
        for e in 0..entries {
            sums[e * needed + r] = field.dot(&powers, &scaled[e * needed..(e + 1) * needed], ops);
        }
        if r + 1 < needed {
            for (p, &x) in powers.iter_mut().zip(&xs) {
                *p = field.mul(*p, x);
            }
            ops.muls(needed as u64);
        }
    }

    let mut out = Vec::with_capacity(wanted.len());
    for &t in wanted {
        let mut coeff = FieldMatrix::zeros(dims.0, dims.1);
        for e in 0..entries {
            let v = field.dot(&master[t + 1..], &sums[e * needed..e * needed + needed - t], ops);
            coeff.set(e / dims.1, e % dims.1, v);
        }
        out.push(coeff);
    }
    Ok((out, (0..needed).collect(), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn monomial_products(f: &PrimeField, coeffs: &[FieldMatrix], shift: u64, xs: &[Fe]) -> Vec<WorkerProduct> {
        xs.iter()
            .enumerate()
            .map(|(w, &x)| {
                let mut ops = OpCounter::new();
                let mut acc = FieldMatrix::zeros(coeffs[0].rows(), coeffs[0].cols());
                for (k, c) in coeffs.iter().enumerate() {
                    acc.add_scaled(f, f.pow(x, shift + k as u64, &mut ops), c, &mut ops).unwrap();
                }
                WorkerProduct {
                    worker_id: w,
                    x,
                    product: acc,
                }
            })
            .collect()
    }

    #[test]
    fn interval_interpolation_example() {
        // 6 + 31x + 35x^2 at 1, 2, 3 over GF(101)
        let f = PrimeField::new(101).unwrap();
        let c: Vec<FieldMatrix> = [6, 31, 35].iter().map(|&v| FieldMatrix::scalar(Fe(v))).collect();
        let xs = [Fe(1), Fe(2), Fe(3)];
        let products = monomial_products(&f, &c, 0, &xs);
        let (got, used, retried) = interpolate_interval(&f, &products, 3, 0, &[0, 2], &mut OpCounter::new()).unwrap();
        assert_eq!(got, vec![c[0].clone(), c[2].clone()]);
        assert_eq!(used, vec![0, 1, 2]);
        assert!(!retried);
        let dup = vec![products[0].clone(), products[0].clone()];
        assert_eq!(
            interpolate_interval(&f, &dup, 2, 0, &[0], &mut OpCounter::new()),
            Err(CodeError::DuplicateEvaluationPoint(Fe(1)))
        );
        assert_eq!(
            interpolate_interval(&f, &products, 4, 0, &[0], &mut OpCounter::new()),
            Err(CodeError::NotEnoughProducts { needed: 4, got: 3 })
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interval_matches_elimination(
            len in 1usize..=24,
            shift in 0u64..5,
            dims in (1usize..=2, 1usize..=2),
            seed in any::<u64>(),
        ) {
            let f = PrimeField::default();
            let mut rng = stream(seed, 0);
            let coeffs: Vec<FieldMatrix> = (0..len).map(|_| FieldMatrix::random(&f, dims.0, dims.1, &mut rng)).collect();
            let xs = crate::stream::distinct_points(&f, len, &[], &mut rng).unwrap();
            let products = monomial_products(&f, &coeffs, shift, &xs);
            let all: Vec<usize> = (0..len).collect();
            let (fast, _, _) = interpolate_interval(&f, &products, len, shift, &all, &mut OpCounter::new()).unwrap();
            let (slow, _, _) = interpolate(
                &f,
                &products,
                len,
                false,
                |x, ops| Ok((0..len as u64).map(|k| f.pow(x, shift + k, ops)).collect()),
                &mut OpCounter::new(),
            )
            .unwrap();
            prop_assert_eq!(&fast, &coeffs);
            prop_assert_eq!(slow, coeffs);
        }
    }

    #[test]
    fn inputs_validate_shapes() {
        let f = PrimeField::new(101).unwrap();
        assert!(BatchInputs::new(vec![], vec![]).is_err());
        let a = vec![FieldMatrix::zeros(2, 3)];
        assert!(BatchInputs::new(a.clone(), vec![FieldMatrix::zeros(2, 2)]).is_err());
        assert!(BatchInputs::new(
            vec![FieldMatrix::zeros(2, 3), FieldMatrix::zeros(3, 3)],
            vec![FieldMatrix::zeros(3, 1), FieldMatrix::zeros(3, 1)]
        )
        .is_err());
        let ok = BatchInputs::random(&f, 3, (2, 3, 4), 5).unwrap();
        assert_eq!(ok.dims(), (2, 3, 4));
        assert_eq!(ok, BatchInputs::random(&f, 3, (2, 3, 4), 5).unwrap());
    }

    #[test]
    fn product_json_shape() {
        let p = WorkerProduct {
            worker_id: 3,
            x: Fe(12),
            product: FieldMatrix::scalar(Fe(6)),
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"worker":3,"x":"12","e":{"rows":1,"cols":1,"entries":["6"]}}"#);
        assert_eq!(serde_json::from_str::<WorkerProduct>(&s).unwrap(), p);
    }

    #[test]
    fn worker_multiplies_and_counts() {
        let f = PrimeField::new(101).unwrap();
        let b = FieldMatrix::from_u64(&f, 2, 3, &[1, 2, 3, 4, 5, 6]).unwrap();
        let share = WorkerShare {
            worker_id: 0,
            x: Fe(1),
            a_tilde: FieldMatrix::identity(2),
            b_tilde: b.clone(),
        };
        let mut ops = OpCounter::new();
        let out = worker_multiply(&f, &share, &mut ops).unwrap();
        assert_eq!(out.product, b);
        assert_eq!(ops.mul_count, 12);
        let zero = WorkerShare {
            a_tilde: FieldMatrix::zeros(2, 2),
            ..share
        };
        assert!(worker_multiply(&f, &zero, &mut ops).unwrap().product.is_zero());
    }
}
