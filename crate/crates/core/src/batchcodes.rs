//! Baseline schemes sharing the rook interface: Lagrange coded computing,
//! cross subspace alignment, and plain replication. Also the scheme
//! descriptor used by the simulator and the command line.

use crate::exponents::{base3_exponents, behrend_exponents, poly_code_exponents, sum_support, ExponentPair};
use crate::field::{Fe, OpCounter, PrimeField};
use crate::matrix::FieldMatrix;
use crate::rook::RookScheme;
use crate::scheme::{check_batch_size, check_distinct, interpolate, interpolate_interval, BatchCode, BatchInputs, CodeError, Decoded, WorkerProduct, WorkerShare};
use crate::stream::{distinct_points, keys, stream};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

fn check_points(field: &PrimeField, points: &[Fe], what: &str) -> Result<(), CodeError> {
    if let Some(x) = points.iter().find(|x| x.value() >= field.modulus()) {
        return Err(CodeError::Invalid(format!("{what} {x} is not reduced mod {}", field.modulus())));
    }
    check_distinct(points)
}

/// `[1, x, …, x^{len-1}]`.
fn monomials(field: &PrimeField, x: Fe, len: usize, ops: &mut OpCounter) -> Vec<Fe> {
    let mut row = Vec::with_capacity(len);
    let mut acc = Fe::ONE;
    for j in 0..len {
        if j > 0 {
            ops.muls(1);
            acc = field.mul(acc, x);
        }
        row.push(acc);
    }
    row
}

/// `Π_{k≠i} (z_k − z_i)`, returned inverted.
fn inverse_residues(field: &PrimeField, z: &[Fe], ops: &mut OpCounter) -> Result<Vec<Fe>, CodeError> {
    (0..z.len())
        .map(|i| {
            let mut c = Fe::ONE;
            for (k, &zk) in z.iter().enumerate() {
                if k != i {
                    ops.muls(1);
                    c = field.mul(c, field.sub(zk, z[i]));
                }
            }
            Ok(field.inv(c, ops)?)
        })
        .collect()
}

fn combine(field: &PrimeField, mats: &[FieldMatrix], weights: &[Fe], ops: &mut OpCounter) -> Result<FieldMatrix, CodeError> {
    let mut acc = mats[0].scale(field, weights[0], ops);
    for (m, &w) in mats.iter().zip(weights).skip(1) {
        acc.add_scaled(field, w, m, ops)?;
    }
    Ok(acc)
}

/// Lagrange coded computing: `Ã` and `B̃` interpolate the inputs at the
/// anchors `z`, so `Ã·B̃` has degree `2n − 2` and takes value `A_i·B_i` at
/// `z_i`.
#[derive(Debug, Clone)]
pub struct LccScheme {
    field: PrimeField,
    z: Vec<Fe>,
    eval_points: Vec<Fe>,
}

impl LccScheme {
    pub fn new(field: PrimeField, z: Vec<Fe>, eval_points: Vec<Fe>) -> Result<Self, CodeError> {
        if z.is_empty() {
            return Err(CodeError::Invalid("need at least one anchor".into()));
        }
        check_points(&field, &z, "anchor")?;
        check_points(&field, &eval_points, "evaluation point")?;
        if (2 * z.len() - 1) as u64 > field.modulus() {
            return Err(CodeError::Invalid(format!(
                "2n - 1 = {} exceeds the field size {}",
                2 * z.len() - 1,
                field.modulus()
            )));
        }
        Ok(Self {
            field,
            z,
            eval_points,
        })
    }

    pub fn anchors(&self) -> &[Fe] {
        &self.z
    }

    /// `ℓ_i(x) = Π_{j≠i} (x − z_j)/(z_i − z_j)`, computed with one division
    /// per basis element.
    pub fn lagrange_basis(&self, x: Fe, ops: &mut OpCounter) -> Result<Vec<Fe>, CodeError> {
        let f = &self.field;
        let n = self.z.len();
        if n == 1 {
            return Ok(vec![Fe::ONE]);
        }
        (0..n)
            .map(|i| {
                let mut num = Fe::ONE;
                let mut den = Fe::ONE;
                for (j, &zj) in self.z.iter().enumerate() {
                    if j != i {
                        ops.muls(2);
                        num = f.mul(num, f.sub(x, zj));
                        den = f.mul(den, f.sub(self.z[i], zj));
                    }
                }
                ops.muls(1);
                Ok(f.mul(num, f.inv(den, ops)?))
            })
            .collect()
    }
}

impl BatchCode for LccScheme {
    fn field(&self) -> &PrimeField {
        &self.field
    }

    fn batch_size(&self) -> usize {
        self.z.len()
    }

    fn threshold(&self) -> usize {
        2 * self.z.len() - 1
    }

    fn eval_points(&self) -> &[Fe] {
        &self.eval_points
    }

    fn encode_at(&self, inputs: &BatchInputs, worker_id: usize, x: Fe, ops: &mut OpCounter) -> Result<WorkerShare, CodeError> {
        check_batch_size(self.z.len(), inputs)?;
        let basis = self.lagrange_basis(x, ops)?;
        Ok(WorkerShare {
            worker_id,
            x,
            a_tilde: combine(&self.field, inputs.a(), &basis, ops)?,
            b_tilde: combine(&self.field, inputs.b(), &basis, ops)?,
        })
    }

    fn decode(&self, products: &[WorkerProduct], ops: &mut OpCounter) -> Result<Decoded, CodeError> {
        let f = &self.field;
        let needed = self.threshold();
        let all: Vec<usize> = (0..needed).collect();
        let (coeffs, used, retried) = interpolate_interval(f, products, needed, 0, &all, ops)?;
        let products = self
            .z
            .iter()
            .map(|&z| {
                let mut acc = coeffs[needed - 1].clone();
                for c in coeffs[..needed - 1].iter().rev() {
                    acc = acc.scale(f, z, ops);
                    acc.add_assign(f, c, ops)?;
                }
                Ok(acc)
            })
            .collect::<Result<_, CodeError>>()?;
        Ok(Decoded {
            products,
            used,
            retried,
        })
    }
}

/// Cross subspace alignment: `Ã(x) = f(x) Σ A_i/(z_i − x)` and
/// `B̃(x) = Σ B_i/(z_i − x)` with `f(x) = Π (z_i − x)`. The product splits
/// into pole terms `c_i A_i B_i/(z_i − x)` plus a polynomial of degree
/// `n − 2` that decoding discards.
#[derive(Debug, Clone)]
pub struct CsaScheme {
    field: PrimeField,
    z: Vec<Fe>,
    eval_points: Vec<Fe>,
    inv_residues: Vec<Fe>,
}

impl CsaScheme {
    pub fn new(field: PrimeField, z: Vec<Fe>, eval_points: Vec<Fe>) -> Result<Self, CodeError> {
        if z.is_empty() {
            return Err(CodeError::Invalid("need at least one anchor".into()));
        }
        check_points(&field, &z, "anchor")?;
        check_points(&field, &eval_points, "evaluation point")?;
        if let Some(&x) = eval_points.iter().find(|x| z.contains(x)) {
            return Err(CodeError::PoleEvaluation(x));
        }
        let inv_residues = inverse_residues(&field, &z, &mut OpCounter::new())?;
        Ok(Self {
            field,
            z,
            eval_points,
            inv_residues,
        })
    }

    pub fn anchors(&self) -> &[Fe] {
        &self.z
    }

    /// `c_i = Π_{k≠i} (z_k − z_i)`.
    pub fn residues(&self) -> Vec<Fe> {
        let mut ops = OpCounter::new();
        self.inv_residues
            .iter()
            .map(|&c| self.field.inv(c, &mut ops).expect("residues are nonzero"))
            .collect()
    }

    /// `1/(z_i − x)` for every anchor.
    fn pole_weights(&self, x: Fe, ops: &mut OpCounter) -> Result<Vec<Fe>, CodeError> {
        self.z
            .iter()
            .map(|&z| {
                if z == x {
                    return Err(CodeError::PoleEvaluation(x));
                }
                Ok(self.field.inv(self.field.sub(z, x), ops)?)
            })
            .collect()
    }
}

impl BatchCode for CsaScheme {
    fn field(&self) -> &PrimeField {
        &self.field
    }

    fn batch_size(&self) -> usize {
        self.z.len()
    }

    fn threshold(&self) -> usize {
        2 * self.z.len() - 1
    }

    fn eval_points(&self) -> &[Fe] {
        &self.eval_points
    }

    fn encode_at(&self, inputs: &BatchInputs, worker_id: usize, x: Fe, ops: &mut OpCounter) -> Result<WorkerShare, CodeError> {
        check_batch_size(self.z.len(), inputs)?;
        let f = &self.field;
        let w = self.pole_weights(x, ops)?;
        let mut fx = Fe::ONE;
        for &z in &self.z {
            ops.muls(1);
            fx = f.mul(fx, f.sub(z, x));
        }
        ops.muls(w.len() as u64);
        let wa: Vec<Fe> = w.iter().map(|&wi| f.mul(fx, wi)).collect();
        Ok(WorkerShare {
            worker_id,
            x,
            a_tilde: combine(f, inputs.a(), &wa, ops)?,
            b_tilde: combine(f, inputs.b(), &w, ops)?,
        })
    }

    fn decode(&self, products: &[WorkerProduct], ops: &mut OpCounter) -> Result<Decoded, CodeError> {
        let f = &self.field;
        let n = self.z.len();
        let (coeffs, used, retried) = interpolate(
            f,
            products,
            self.threshold(),
            true,
            |x, ops| {
                let mut row = self.pole_weights(x, ops)?;
                row.extend(monomials(f, x, n - 1, ops));
                Ok(row)
            },
            ops,
        )?;
        let products = coeffs[..n]
            .iter()
            .zip(&self.inv_residues)
            .map(|(d, &c)| d.scale(f, c, ops))
            .collect();
        Ok(Decoded {
            products,
            used,
            retried,
        })
    }
}

/// Each pair is computed uncoded by `λ` workers; worker `w` handles pair
/// `w / λ`.
#[derive(Debug, Clone)]
pub struct ReplicationScheme {
    field: PrimeField,
    n: usize,
    lambda: usize,
    eval_points: Vec<Fe>,
}

impl ReplicationScheme {
    pub fn new(field: PrimeField, n: usize, lambda: usize) -> Result<Self, CodeError> {
        if n == 0 || lambda == 0 {
            return Err(CodeError::Invalid("replication needs n >= 1 and lambda >= 1".into()));
        }
        // points only label workers here; nothing is interpolated
        let eval_points = (0..n * lambda).map(|w| field.elem(w as u64 + 1)).collect();
        Ok(Self {
            field,
            n,
            lambda,
            eval_points,
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn workers(&self) -> usize {
        self.n * self.lambda
    }

    pub fn pair_of(&self, worker: usize) -> usize {
        worker / self.lambda
    }

    /// Computes every pair from the surviving workers only.
    pub fn run(&self, inputs: &BatchInputs, alive: &[usize], ops: &mut OpCounter) -> Result<Vec<FieldMatrix>, CodeError> {
        check_batch_size(self.n, inputs)?;
        let mut products: Vec<WorkerProduct> = Vec::with_capacity(alive.len());
        for &w in alive {
            if w >= self.workers() {
                return Err(CodeError::Invalid(format!("worker {w} out of range 0..{}", self.workers())));
            }
            let share = self.encode_share(inputs, w, ops)?;
            products.push(crate::scheme::worker_multiply(&self.field, &share, ops)?);
        }
        Ok(self.decode(&products, ops)?.products)
    }
}

impl BatchCode for ReplicationScheme {
    fn field(&self) -> &PrimeField {
        &self.field
    }

    fn batch_size(&self) -> usize {
        self.n
    }

    /// `m − λ + 1`: the adversary can silence all replicas of one pair.
    fn threshold(&self) -> usize {
        self.workers() - self.lambda + 1
    }

    fn min_responses(&self) -> usize {
        self.n
    }

    fn eval_points(&self) -> &[Fe] {
        &self.eval_points
    }

    fn encode_at(&self, inputs: &BatchInputs, worker_id: usize, x: Fe, _ops: &mut OpCounter) -> Result<WorkerShare, CodeError> {
        check_batch_size(self.n, inputs)?;
        let i = self.pair_of(worker_id);
        if i >= self.n {
            return Err(CodeError::Invalid(format!("worker {worker_id} out of range 0..{}", self.workers())));
        }
        Ok(WorkerShare {
            worker_id,
            x,
            a_tilde: inputs.a()[i].clone(),
            b_tilde: inputs.b()[i].clone(),
        })
    }

    fn decode(&self, products: &[WorkerProduct], _ops: &mut OpCounter) -> Result<Decoded, CodeError> {
        let mut slot: Vec<Option<usize>> = vec![None; self.n];
        for (k, p) in products.iter().enumerate() {
            if let Some(s) = slot.get_mut(self.pair_of(p.worker_id)) {
                s.get_or_insert(k);
            }
        }
        let mut used = Vec::with_capacity(self.n);
        for (i, s) in slot.iter().enumerate() {
            used.push(s.ok_or(CodeError::UncoveredPair(i))?);
        }
        Ok(Decoded {
            products: used.iter().map(|&k| products[k].product.clone()).collect(),
            used,
            retried: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    RookPoly,
    RookBase3,
    RookBehrend,
    Lcc,
    Csa,
    Replication,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::RookPoly,
        SchemeKind::RookBase3,
        SchemeKind::RookBehrend,
        SchemeKind::Lcc,
        SchemeKind::Csa,
        SchemeKind::Replication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::RookPoly => "rook-poly",
            SchemeKind::RookBase3 => "rook-base3",
            SchemeKind::RookBehrend => "rook-behrend",
            SchemeKind::Lcc => "lcc",
            SchemeKind::Csa => "csa",
            SchemeKind::Replication => "replication",
        }
    }

    pub fn is_rook(self) -> bool {
        matches!(self, SchemeKind::RookPoly | SchemeKind::RookBase3 | SchemeKind::RookBehrend)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CodeError::Invalid(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeDescriptor {
    pub scheme: SchemeKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    /// Overrides the generated exponents of a rook scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentPair>,
}

impl SchemeDescriptor {
    pub fn new(scheme: SchemeKind, n: usize) -> Self {
        Self {
            scheme,
            n,
            lambda: None,
            exponents: None,
        }
    }

    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<(), CodeError> {
        if self.n == 0 {
            return Err(CodeError::Invalid("n must be at least 1".into()));
        }
        if self.exponents.is_some() && !self.scheme.is_rook() {
            return Err(CodeError::Invalid(format!("{} takes no exponents", self.scheme)));
        }
        if let Some(pair) = &self.exponents {
            if pair.n() != self.n {
                return Err(CodeError::Invalid(format!("exponents have n = {}, descriptor n = {}", pair.n(), self.n)));
            }
        }
        match (self.scheme, self.lambda) {
            (SchemeKind::Replication, None | Some(0)) => Err(CodeError::Invalid("replication needs lambda >= 1".into())),
            (SchemeKind::Replication, _) | (_, None) => Ok(()),
            (kind, Some(_)) => Err(CodeError::Invalid(format!("{kind} takes no lambda"))),
        }
    }

    /// The exponent pair of a rook scheme, generated unless supplied.
    pub fn exponent_pair(&self) -> Result<ExponentPair, CodeError> {
        self.validate()?;
        if let Some(pair) = &self.exponents {
            return Ok(pair.clone());
        }
        Ok(match self.scheme {
            SchemeKind::RookPoly => poly_code_exponents(self.n)?,
            SchemeKind::RookBase3 => base3_exponents(self.n)?,
            SchemeKind::RookBehrend => behrend_exponents(self.n)?,
            kind => return Err(CodeError::Invalid(format!("{kind} has no exponents"))),
        })
    }

    /// Worker slots the scheme is defined for, if fixed (replication).
    pub fn fixed_workers(&self) -> Option<usize> {
        match self.scheme {
            SchemeKind::Replication => self.lambda.map(|l| l * self.n),
            _ => None,
        }
    }
}

/// Worst-case recovery threshold.
pub fn scheme_threshold(desc: &SchemeDescriptor) -> Result<usize, CodeError> {
    desc.validate()?;
    Ok(match desc.scheme {
        SchemeKind::Lcc | SchemeKind::Csa => 2 * desc.n - 1,
        SchemeKind::Replication => {
            let lambda = desc.lambda.expect("validated");
            (desc.n - 1) * lambda + 1
        }
        _ => sum_support(&desc.exponent_pair()?).len(),
    })
}

/// Instantiates a scheme with `m` worker slots. Evaluation points are drawn
/// from the seed's evaluation-point stream; anchors are `1..=n`.
pub fn build_code(desc: &SchemeDescriptor, field: PrimeField, m: usize, seed: u64) -> Result<Box<dyn BatchCode>, CodeError> {
    desc.validate()?;
    if let Some(slots) = desc.fixed_workers() {
        if slots != m {
            return Err(CodeError::Invalid(format!(
                "replication with n = {} and lambda = {} uses exactly {slots} workers, got {m}",
                desc.n,
                desc.lambda.unwrap_or(0)
            )));
        }
    }
    let mut rng = stream(seed, keys::EVAL_POINTS);
    let anchors = || -> Result<Vec<Fe>, CodeError> {
        if desc.n as u64 >= field.modulus() {
            return Err(CodeError::Invalid(format!("{} anchors do not fit in GF({})", desc.n, field.modulus())));
        }
        Ok((1..=desc.n as u64).map(Fe).collect())
    };
    Ok(match desc.scheme {
        SchemeKind::Lcc => {
            let z = anchors()?;
            let points = distinct_points(&field, m, &z, &mut rng)?;
            Box::new(LccScheme::new(field, z, points)?)
        }
        SchemeKind::Csa => {
            let z = anchors()?;
            let points = distinct_points(&field, m, &z, &mut rng)?;
            Box::new(CsaScheme::new(field, z, points)?)
        }
        SchemeKind::Replication => Box::new(ReplicationScheme::new(field, desc.n, desc.lambda.expect("validated"))?),
        _ => {
            let pair = desc.exponent_pair()?;
            let points = distinct_points(&field, m, &[], &mut rng)?;
            Box::new(RookScheme::new(field, pair, points)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::solve_linear;
    use crate::scheme::worker_multiply;
    use proptest::prelude::*;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn pts(v: &[u64]) -> Vec<Fe> {
        v.iter().map(|&x| Fe(x)).collect()
    }

    fn s(x: u64) -> FieldMatrix {
        FieldMatrix::scalar(Fe(x))
    }

    fn all_products(code: &dyn BatchCode, inputs: &BatchInputs) -> Vec<WorkerProduct> {
        (0..code.eval_points().len())
            .map(|w| {
                let share = code.encode_share(inputs, w, &mut OpCounter::new()).unwrap();
                worker_multiply(code.field(), &share, &mut OpCounter::new()).unwrap()
            })
            .collect()
    }

    #[test]
    fn lcc_worked_example() {
        let f = gf(101);
        let lcc = LccScheme::new(f, pts(&[0, 1]), pts(&[2, 3, 4])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let share = lcc.encode_at(&inputs, 0, Fe(2), &mut OpCounter::new()).unwrap();
        assert_eq!(share.a_tilde, s(7));

        // 6 + 19x + 10x^2 at 2, 3, 4
        let products = all_products(&lcc, &inputs);
        let es: Vec<FieldMatrix> = products.iter().map(|p| p.product.clone()).collect();
        assert_eq!(es, vec![s(84), s(52), s(40)]);
        let decoded = lcc.decode(&products, &mut OpCounter::new()).unwrap();
        assert_eq!(decoded.products, vec![s(6), s(35)]);
    }

    #[test]
    fn lcc_anchor_property_and_singleton() {
        let f = PrimeField::default();
        let inputs = BatchInputs::random(&f, 5, (2, 3, 2), 11).unwrap();
        let lcc = LccScheme::new(f, pts(&[1, 2, 3, 4, 5]), pts(&[9])).unwrap();
        for (i, &z) in lcc.anchors().iter().enumerate() {
            let share = lcc.encode_at(&inputs, 0, z, &mut OpCounter::new()).unwrap();
            assert_eq!(share.a_tilde, inputs.a()[i]);
            assert_eq!(share.b_tilde, inputs.b()[i]);
        }

        let one = BatchInputs::scalars(&f, &[4], &[6]).unwrap();
        let lcc = LccScheme::new(f, pts(&[1]), pts(&[77])).unwrap();
        let mut ops = OpCounter::new();
        let share = lcc.encode_share(&one, 0, &mut ops).unwrap();
        assert_eq!(share.a_tilde, s(4));
        assert_eq!(ops.inv_count, 0);
        let products = all_products(&lcc, &one);
        assert_eq!(products[0].product, s(24));
        assert_eq!(lcc.decode(&products, &mut ops).unwrap().products, vec![s(24)]);
    }

    #[test]
    fn duplicate_points_rejected() {
        let f = gf(101);
        let lcc = LccScheme::new(f, pts(&[0, 1]), pts(&[2, 3, 4])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let p = all_products(&lcc, &inputs);
        let dup = vec![p[0].clone(), p[1].clone(), p[0].clone()];
        assert_eq!(lcc.decode(&dup, &mut OpCounter::new()), Err(CodeError::DuplicateEvaluationPoint(Fe(2))));
        assert!(LccScheme::new(f, pts(&[1, 1]), pts(&[2])).is_err());
        assert!(CsaScheme::new(f, pts(&[1, 2]), pts(&[3, 3])).is_err());
    }

    #[test]
    fn csa_worked_example() {
        let f = gf(101);
        let csa = CsaScheme::new(f, pts(&[1, 2]), pts(&[3, 4, 5])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let mut ops = OpCounter::new();
        let share = csa.encode_at(&inputs, 0, Fe(3), &mut ops).unwrap();
        // f(3) = 2, (1-3)^{-1} = 50, (2-3)^{-1} = 100
        assert_eq!(share.a_tilde, s(2 * (3 * 50 + 5 * 100) % 101));
        assert_eq!(share.b_tilde, s((2 * 50 + 7 * 100) % 101));
        assert_eq!(ops.inv_count, 2);

        assert_eq!(csa.residues(), pts(&[1, 100]));
        let decoded = csa.decode(&all_products(&csa, &inputs), &mut OpCounter::new()).unwrap();
        assert_eq!(decoded.products, vec![s(6), s(35)]);
    }

    #[test]
    fn csa_poles_and_singleton() {
        let f = gf(101);
        assert_eq!(
            CsaScheme::new(f, pts(&[1, 2]), pts(&[5, 1])).unwrap_err(),
            CodeError::PoleEvaluation(Fe(1))
        );
        let csa = CsaScheme::new(f, pts(&[1, 2]), pts(&[5])).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        assert_eq!(
            csa.encode_at(&inputs, 0, Fe(1), &mut OpCounter::new()).unwrap_err(),
            CodeError::PoleEvaluation(Fe(1))
        );

        let csa = CsaScheme::new(f, pts(&[1]), pts(&[9, 40])).unwrap();
        let one = BatchInputs::scalars(&f, &[4], &[6]).unwrap();
        for x in [9, 40] {
            let share = csa.encode_at(&one, 0, Fe(x), &mut OpCounter::new()).unwrap();
            assert_eq!(share.a_tilde, s(4));
        }
        assert_eq!(csa.threshold(), 1);
        assert_eq!(csa.residues(), pts(&[1]));
        let decoded = csa.decode(&all_products(&csa, &one), &mut OpCounter::new()).unwrap();
        assert_eq!(decoded.products, vec![s(24)]);
    }

    /// Fits `Ã(x)B̃(x) − Σ c_i A_iB_i/(z_i − x)` on `n − 1` probes with a
    /// polynomial of degree `n − 2` and checks it on the remaining probes.
    fn partial_fraction_holds(n: usize, seed: u64) -> bool {
        let f = PrimeField::default();
        let z: Vec<Fe> = (1..=n as u64).map(Fe).collect();
        let probes = distinct_points(&f, 3 * n.max(2), &z, &mut stream(seed, 99)).unwrap();
        let csa = CsaScheme::new(f, z.clone(), probes.clone()).unwrap();
        let inputs = BatchInputs::random(&f, n, (1, 1, 1), seed).unwrap();
        let direct = inputs.direct_products(&f, &mut OpCounter::new()).unwrap();
        let c = csa.residues();
        let mut ops = OpCounter::new();
        let residual: Vec<Fe> = probes
            .iter()
            .map(|&x| {
                let share = csa.encode_at(&inputs, 0, x, &mut ops).unwrap();
                let mut r = share.a_tilde.mul(&f, &share.b_tilde, &mut ops).unwrap().get(0, 0);
                for i in 0..n {
                    let pole = f.inv(f.sub(z[i], x), &mut ops).unwrap();
                    r = f.sub(r, f.mul(f.mul(c[i], direct[i].get(0, 0)), pole));
                }
                r
            })
            .collect();
        let deg = n - 1;
        if deg == 0 {
            return residual.iter().all(|r| r.is_zero());
        }
        let rows: Vec<Fe> = probes[..deg].iter().flat_map(|&x| monomials(&f, x, deg, &mut ops)).collect();
        let v = FieldMatrix::new(deg, deg, rows).unwrap();
        let rhs: Vec<FieldMatrix> = residual[..deg].iter().map(|&r| FieldMatrix::scalar(r)).collect();
        let coeffs: Vec<Fe> = solve_linear(&f, &v, &rhs, &mut ops)
            .unwrap()
            .iter()
            .map(|c| c.get(0, 0))
            .collect();
        probes[deg..].iter().zip(&residual[deg..]).all(|(&x, &r)| {
            let row = monomials(&f, x, deg, &mut OpCounter::new());
            f.dot(&row, &coeffs, &mut OpCounter::new()) == r
        })
    }

    #[test]
    fn residues_satisfy_partial_fractions() {
        for n in 1..=8 {
            assert!(partial_fraction_holds(n, n as u64), "n = {n}");
        }
        let f = gf(101);
        let csa = CsaScheme::new(f, pts(&[4, 9]), pts(&[1])).unwrap();
        assert_eq!(csa.residues(), vec![Fe(5), Fe(96)]);
    }

    #[test]
    fn replication_kill_sets() {
        let f = gf(101);
        let rep = ReplicationScheme::new(f, 2, 2).unwrap();
        let inputs = BatchInputs::scalars(&f, &[3, 5], &[2, 7]).unwrap();
        let mut ops = OpCounter::new();
        assert_eq!(rep.run(&inputs, &[2, 3], &mut ops), Err(CodeError::UncoveredPair(0)));
        assert_eq!(rep.run(&inputs, &[1, 3], &mut ops).unwrap(), vec![s(6), s(35)]);
        assert_eq!(rep.run(&inputs, &[0, 1, 2, 3], &mut ops).unwrap(), vec![s(6), s(35)]);
        assert_eq!(rep.threshold(), 3);
        assert_eq!(rep.min_responses(), 2);
        assert!(rep.run(&inputs, &[4], &mut ops).is_err());
    }

    #[test]
    fn thresholds() {
        let t = |d: SchemeDescriptor| scheme_threshold(&d).unwrap();
        assert_eq!(t(SchemeDescriptor::new(SchemeKind::Lcc, 5)), 9);
        assert_eq!(t(SchemeDescriptor::new(SchemeKind::Csa, 1)), 1);
        assert_eq!(t(SchemeDescriptor::new(SchemeKind::Replication, 2).with_lambda(2)), 3);
        assert_eq!(t(SchemeDescriptor::new(SchemeKind::RookPoly, 8)), 64);
        assert_eq!(t(SchemeDescriptor::new(SchemeKind::RookBase3, 8)), 27);
        assert!(scheme_threshold(&SchemeDescriptor::new(SchemeKind::Replication, 2)).is_err());
        assert!(scheme_threshold(&SchemeDescriptor::new(SchemeKind::Lcc, 2).with_lambda(2)).is_err());
        assert!(scheme_threshold(&SchemeDescriptor::new(SchemeKind::Lcc, 0)).is_err());
    }

    #[test]
    fn descriptor_json() {
        let d = SchemeDescriptor::new(SchemeKind::Replication, 3).with_lambda(2);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"scheme":"replication","n":3,"lambda":2}"#);
        assert_eq!(serde_json::from_str::<SchemeDescriptor>(&s).unwrap(), d);
        let r: SchemeDescriptor =
            serde_json::from_str(r#"{"scheme":"rook-base3","n":2,"exponents":{"n":2,"p":[0,1],"q":[0,1]}}"#).unwrap();
        assert_eq!(scheme_threshold(&r).unwrap(), 3);
        assert!(serde_json::from_str::<SchemeDescriptor>(r#"{"scheme":"rook","n":2}"#).is_err());
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }

    #[test]
    fn builder_is_deterministic() {
        let f = PrimeField::default();
        let d = SchemeDescriptor::new(SchemeKind::Csa, 4);
        let a = build_code(&d, f, 9, 3).unwrap();
        let b = build_code(&d, f, 9, 3).unwrap();
        assert_eq!(a.eval_points(), b.eval_points());
        assert!(a.eval_points().iter().all(|x| x.value() > 4));
        let rep = SchemeDescriptor::new(SchemeKind::Replication, 2).with_lambda(3);
        assert!(build_code(&rep, f, 5, 0).is_err());
        assert_eq!(build_code(&rep, f, 6, 0).unwrap().threshold(), 4);
    }

    #[test]
    fn division_accounting() {
        let f = PrimeField::default();
        for n in 2..=6 {
            let inputs = BatchInputs::random(&f, n, (2, 2, 2), n as u64).unwrap();
            for kind in [SchemeKind::Lcc, SchemeKind::Csa] {
                let code = build_code(&SchemeDescriptor::new(kind, n), f, 2 * n - 1, 5).unwrap();
                let mut ops = OpCounter::new();
                code.encode_share(&inputs, 0, &mut ops).unwrap();
                assert!(ops.inv_count >= n as u64 - 1, "{kind} n = {n}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn lcc_and_csa_roundtrip(
            n in 1usize..=16,
            csa in any::<bool>(),
            dims in (1usize..=2, 1usize..=2, 1usize..=2),
            spare in 0usize..4,
            seed in any::<u64>(),
        ) {
            let f = PrimeField::default();
            let kind = if csa { SchemeKind::Csa } else { SchemeKind::Lcc };
            let m = 2 * n - 1 + spare;
            let code = build_code(&SchemeDescriptor::new(kind, n), f, m, seed).unwrap();
            let inputs = BatchInputs::random(&f, n, dims, seed).unwrap();
            let direct = inputs.direct_products(&f, &mut OpCounter::new()).unwrap();
            let mut products = all_products(code.as_ref(), &inputs);
            // drop `spare` products from a seed-dependent offset
            let start = (seed as usize) % (products.len() - spare + 1);
            products.drain(start..start + spare);
            let decoded = code.decode(&products, &mut OpCounter::new()).unwrap();
            prop_assert_eq!(decoded.products, direct);
        }
    }
}
