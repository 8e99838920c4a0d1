//! Rook codes: `Ã(x) = Σ A_i x^{p_i}`, `B̃(x) = Σ B_j x^{q_j}`.
//!
//! The product `Ã(x)·B̃(x)` has nonzero coefficients only on the sumset
//! `P + Q`, so `L = |P + Q|` evaluations determine it, and the decodability
//! property makes `A_k·B_k` the sole coefficient of `x^{p_k + q_k}`.
//! Encoding is division-free: gap powers `x^{p_k - p_{k-1}}` by repeated
//! squaring, then a nested Horner pass over the sparse exponents. Interval
//! supports are decoded in Lagrange form, sparse ones by elimination on the
//! generalized Vandermonde matrix.

use crate::exponents::{is_decodable, sum_support, ExponentPair, SumSupport};
use crate::field::{Fe, OpCounter, PrimeField};
use crate::matrix::FieldMatrix;
use crate::scheme::{check_batch_size, check_distinct, interpolate, interpolate_interval, BatchCode, BatchInputs, CodeError, Decoded, WorkerProduct, WorkerShare};

/// `x^{e_0}, x^{e_1 - e_0}, …` for strictly increasing exponents `e`.
pub fn gap_powers(field: &PrimeField, exponents: &[u64], x: Fe, ops: &mut OpCounter) -> Vec<Fe> {
    let mut prev = 0;
    exponents
        .iter()
        .map(|&e| {
            let g = field.pow(x, e - prev, ops);
            prev = e;
            g
        })
        .collect()
}

/// Multiplications spent on gap powers for one evaluation point. Equal to
/// what `encode_at` spends before its Horner passes; depends only on the
/// bit patterns of the gaps, not on `x`.
pub fn delta_muls(field: &PrimeField, pair: &ExponentPair) -> u64 {
    let mut ops = OpCounter::new();
    gap_powers(field, pair.p(), Fe::ONE, &mut ops);
    if !pair.is_symmetric() {
        gap_powers(field, pair.q(), Fe::ONE, &mut ops);
    }
    ops.mul_count
}

/// `Σ_k M_k x^{e_k}` as `x^{e_0}(M_0 + x^{e_1-e_0}(M_1 + …))`.
fn horner(
    field: &PrimeField,
    mats: &[FieldMatrix],
    exponents: &[u64],
    gaps: &[Fe],
    ops: &mut OpCounter,
) -> Result<FieldMatrix, CodeError> {
    let gap_is_trivial = |k: usize| exponents[k] == if k == 0 { 0 } else { exponents[k - 1] };
    let last = mats.len() - 1;
    let mut acc = if gap_is_trivial(last) {
        mats[last].clone()
    } else {
        mats[last].scale(field, gaps[last], ops)
    };
    for k in (0..last).rev() {
        acc.add_assign(field, &mats[k], ops)?;
        if !gap_is_trivial(k) {
            acc = acc.scale(field, gaps[k], ops);
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct RookScheme {
    field: PrimeField,
    pair: ExponentPair,
    support: SumSupport,
    eval_points: Vec<Fe>,
}

impl RookScheme {
    /// Binds an exponent pair to a field and a set of worker evaluation
    /// points (pairwise distinct and nonzero).
    pub fn new(field: PrimeField, pair: ExponentPair, eval_points: Vec<Fe>) -> Result<Self, CodeError> {
        if !is_decodable(&pair) {
            return Err(CodeError::NotDecodable);
        }
        let support = sum_support(&pair);
        let max = *support.support.last().expect("nonempty sumset");
        // distinct exponents below p - 1 give distinct monomial functions
        if max >= field.modulus() - 1 {
            return Err(CodeError::ExponentTooLarge {
                max,
                modulus: field.modulus(),
            });
        }
        if let Some(x) = eval_points.iter().find(|x| x.is_zero() || x.value() >= field.modulus()) {
            return Err(CodeError::Invalid(format!("evaluation point {x} must be a nonzero field element")));
        }
        check_distinct(&eval_points)?;
        Ok(Self {
            field,
            pair,
            support,
            eval_points,
        })
    }

    pub fn pair(&self) -> &ExponentPair {
        &self.pair
    }

    pub fn support(&self) -> &SumSupport {
        &self.support
    }

    /// The recovery threshold `L = |P + Q|`.
    pub fn recovery_threshold(&self) -> usize {
        self.support.len()
    }

    pub fn delta_muls(&self) -> u64 {
        delta_muls(&self.field, &self.pair)
    }

    /// Row of the generalized Vandermonde matrix: `x^s` for every `s` in the
    /// sumset, built by multiplying through the support gaps.
    fn support_row(&self, x: Fe, ops: &mut OpCounter) -> Vec<Fe> {
        let mut row = Vec::with_capacity(self.support.len());
        let mut prev_exp = 0;
        for (t, &s) in self.support.support.iter().enumerate() {
            let step = self.field.pow(x, s - prev_exp, ops);
            let v = if t == 0 {
                step
            } else {
                ops.muls(1);
                self.field.mul(row[t - 1], step)
            };
            row.push(v);
            prev_exp = s;
        }
        row
    }
}

impl BatchCode for RookScheme {
    fn field(&self) -> &PrimeField {
        &self.field
    }

    fn batch_size(&self) -> usize {
        self.pair.n()
    }

    fn threshold(&self) -> usize {
        self.recovery_threshold()
    }

    fn eval_points(&self) -> &[Fe] {
        &self.eval_points
    }

    fn encode_at(&self, inputs: &BatchInputs, worker_id: usize, x: Fe, ops: &mut OpCounter) -> Result<WorkerShare, CodeError> {
        check_batch_size(self.pair.n(), inputs)?;
        let gp = gap_powers(&self.field, self.pair.p(), x, ops);
        let gq = if self.pair.is_symmetric() {
            gp.clone()
        } else {
            gap_powers(&self.field, self.pair.q(), x, ops)
        };
        Ok(WorkerShare {
            worker_id,
            x,
            a_tilde: horner(&self.field, inputs.a(), self.pair.p(), &gp, ops)?,
            b_tilde: horner(&self.field, inputs.b(), self.pair.q(), &gq, ops)?,
        })
    }

    fn decode(&self, products: &[WorkerProduct], ops: &mut OpCounter) -> Result<Decoded, CodeError> {
        let support = &self.support.support;
        let (first, last) = (support[0], support[support.len() - 1]);
        if last - first + 1 == support.len() as u64 {
            let (products, used, retried) = interpolate_interval(
                &self.field,
                products,
                support.len(),
                first,
                &self.support.diag_index,
                ops,
            )?;
            return Ok(Decoded {
                products,
                used,
                retried,
            });
        }
        let (coeffs, used, retried) = interpolate(
            &self.field,
            products,
            self.support.len(),
            true,
            |x, ops| Ok(self.support_row(x, ops)),
            ops,
        )?;
        let products = self.support.diag_index.iter().map(|&t| coeffs[t].clone()).collect();
        Ok(Decoded {
            products,
            used,
            retried,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{base3_exponents, poly_code_exponents};
    use crate::scheme::worker_multiply;
    use proptest::prelude::*;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn pts(v: &[u64]) -> Vec<Fe> {
        v.iter().map(|&x| Fe(x)).collect()
    }

    fn run(scheme: &RookScheme, inputs: &BatchInputs) -> Vec<WorkerProduct> {
        let f = *scheme.field();
        (0..scheme.eval_points().len())
            .map(|w| {
                let share = scheme.encode_share(inputs, w, &mut OpCounter::new()).unwrap();
                worker_multiply(&f, &share, &mut OpCounter::new()).unwrap()
            })
            .collect()
    }

    #[test]
    fn gap_power_examples() {
        let mut ops = OpCounter::new();
        assert_eq!(gap_powers(&gf(7), &[0, 2, 3], Fe(2), &mut ops), pts(&[1, 4, 2]));
        assert_eq!(gap_powers(&gf(101), &[0, 1, 2, 3], Fe(5), &mut ops), pts(&[1, 5, 5, 5]));
        assert_eq!(gap_powers(&gf(101), &[5], Fe(2), &mut ops), pts(&[32]));
    }

    #[test]
    fn worked_example_n2() {
        let f = gf(101);
        let pair = base3_exponents(2).unwrap();
        let scheme = RookScheme::new(f, pair, pts(&[1, 2, 3])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let share = scheme.encode_at(&inputs, 1, Fe(2), &mut OpCounter::new()).unwrap();
        assert_eq!(share.a_tilde, FieldMatrix::scalar(Fe(13)));
        assert_eq!(share.b_tilde, FieldMatrix::scalar(Fe(16)));

        let mut ops = OpCounter::new();
        let out = worker_multiply(&f, &share, &mut ops).unwrap();
        assert_eq!(out.product, FieldMatrix::scalar(Fe(6)));
        assert_eq!(ops.mul_count, 1);

        // 6 + 31x + 35x^2 at x = 1, 2, 3
        let products = run(&scheme, &inputs);
        let es: Vec<u64> = products.iter().map(|p| p.product.get(0, 0).value()).collect();
        assert_eq!(es, vec![72, 6, 10]);
        let decoded = scheme.decode(&products, &mut OpCounter::new()).unwrap();
        assert_eq!(decoded.products, vec![FieldMatrix::scalar(Fe(6)), FieldMatrix::scalar(Fe(35))]);
        assert!(!decoded.retried);
        assert_eq!(scheme.threshold(), 3);
    }

    #[test]
    fn single_pair_divides_out_the_monomial() {
        let f = gf(101);
        let pair = ExponentPair::new(vec![3], vec![2]).unwrap();
        let scheme = RookScheme::new(f, pair, pts(&[7])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[4], &[9]).unwrap();
        let products = run(&scheme, &inputs);
        let mut ops = OpCounter::new();
        assert_eq!(products[0].product, FieldMatrix::scalar(f.mul(Fe(36), f.pow(Fe(7), 5, &mut ops))));
        let decoded = scheme.decode(&products, &mut ops).unwrap();
        assert_eq!(decoded.products, vec![FieldMatrix::scalar(Fe(36))]);

        let plain = RookScheme::new(f, poly_code_exponents(1).unwrap(), pts(&[7])).unwrap();
        let share = plain.encode_share(&inputs, 0, &mut ops).unwrap();
        assert_eq!(share.a_tilde, FieldMatrix::scalar(Fe(4)));
    }

    #[test]
    fn zero_point_keeps_constant_term() {
        let f = gf(101);
        let scheme = RookScheme::new(f, base3_exponents(4).unwrap(), pts(&[1])).unwrap();
        let inputs = BatchInputs::random(&f, 4, (2, 2, 2), 3).unwrap();
        let share = scheme.encode_at(&inputs, 0, Fe::ZERO, &mut OpCounter::new()).unwrap();
        assert_eq!(share.a_tilde, inputs.a()[0]);
        assert_eq!(share.b_tilde, inputs.b()[0]);
    }

    #[test]
    fn decode_errors() {
        let f = gf(101);
        let scheme = RookScheme::new(f, base3_exponents(2).unwrap(), pts(&[1, 2, 3, 4])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let products = run(&scheme, &inputs);
        assert_eq!(
            scheme.decode(&products[..2], &mut OpCounter::new()),
            Err(CodeError::NotEnoughProducts { needed: 3, got: 2 })
        );
        let dup = vec![products[0].clone(), products[1].clone(), products[0].clone()];
        assert_eq!(
            scheme.decode(&dup, &mut OpCounter::new()),
            Err(CodeError::DuplicateEvaluationPoint(Fe(1)))
        );
    }

    #[test]
    fn scheme_validation() {
        let f = gf(101);
        let bad = ExponentPair::new(vec![0, 1, 2], vec![0, 1, 2]).unwrap();
        assert!(matches!(RookScheme::new(f, bad, pts(&[1])), Err(CodeError::NotDecodable)));
        assert!(matches!(
            RookScheme::new(f, poly_code_exponents(11).unwrap(), pts(&[1])),
            Err(CodeError::ExponentTooLarge { max: 120, modulus: 101 })
        ));
        assert!(RookScheme::new(f, base3_exponents(2).unwrap(), pts(&[1, 1])).is_err());
        assert!(RookScheme::new(f, base3_exponents(2).unwrap(), pts(&[0, 1])).is_err());
    }

    #[test]
    fn singular_system_retries_with_next_product() {
        // support {0, 1, 3, 4} over GF(7): rows are [1, x, c, cx] with c = x^3,
        // and c = 6 for x in {3, 5, 6}, so those three rows span only a plane
        let f = gf(7);
        let pair = ExponentPair::new(vec![0, 1], vec![0, 3]).unwrap();
        let scheme = RookScheme::new(f, pair, pts(&[1, 3, 5, 6, 2, 4])).unwrap();
        assert_eq!(scheme.support().support, vec![0, 1, 3, 4]);
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 4]).unwrap();
        let direct = inputs.direct_products(&f, &mut OpCounter::new()).unwrap();
        let products = run(&scheme, &inputs);

        let decoded = scheme.decode(&products, &mut OpCounter::new()).unwrap();
        assert!(decoded.retried);
        assert_eq!(decoded.used, vec![0, 1, 2, 4]);
        assert_eq!(decoded.products, direct);

        assert_eq!(
            scheme.decode(&products[..4], &mut OpCounter::new()),
            Err(CodeError::SingularAfterRetry)
        );
    }

    fn any_pair() -> impl Strategy<Value = ExponentPair> {
        (1usize..=9, 0usize..3).prop_map(|(n, which)| match which {
            0 => poly_code_exponents(n).unwrap(),
            1 => base3_exponents(n).unwrap(),
            _ => crate::exponents::behrend_exponents(n).unwrap(),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decode_recovers_every_product(
            pair in any_pair(),
            dims in (1usize..=3, 1usize..=3, 1usize..=3),
            small in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let f = if small { gf(101) } else { PrimeField::default() };
            let l = sum_support(&pair).len();
            let max = *sum_support(&pair).support.last().unwrap();
            prop_assume!(!small || (l < 100 && max < 100));
            let n = pair.n();
            let points = crate::stream::distinct_points(&f, l + 1, &[], &mut crate::stream::stream(seed, 0)).unwrap();
            let scheme = RookScheme::new(f, pair, points).unwrap();
            let inputs = BatchInputs::random(&f, n, dims, seed).unwrap();
            let direct = inputs.direct_products(&f, &mut OpCounter::new()).unwrap();
            let mut products = run(&scheme, &inputs);
            let decoded = scheme.decode(&products, &mut OpCounter::new());
            // GF(101) has room for a singular draw; the large field does not
            if let Ok(d) = decoded {
                prop_assert_eq!(d.products, direct.clone());
            } else {
                prop_assert!(small);
            }
            if !small {
                products.reverse();
                let d = scheme.decode(&products, &mut OpCounter::new()).unwrap();
                prop_assert_eq!(d.products, direct);
            }
        }

        #[test]
        fn encode_cost_within_bound(
            pair in any_pair(),
            dims in (1usize..=4, 1usize..=4, 1usize..=4),
            x in 1u64..(1 << 61) - 1,
            seed in any::<u64>(),
        ) {
            let f = PrimeField::default();
            let n = pair.n();
            let scheme = RookScheme::new(f, pair, vec![Fe(x)]).unwrap();
            let inputs = BatchInputs::random(&f, n, dims, seed).unwrap();
            let mut ops = OpCounter::new();
            scheme.encode_share(&inputs, 0, &mut ops).unwrap();
            let (chi, zeta, upsilon) = dims;
            let bound = scheme.delta_muls() + ((chi + upsilon) * zeta * n) as u64;
            prop_assert!(ops.mul_count <= bound, "{} > {}", ops.mul_count, bound);
            prop_assert_eq!(ops.inv_count, 0);
        }
    }
}
