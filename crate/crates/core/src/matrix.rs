//! Dense matrices over a prime field and an LU-based block solver.

use crate::field::{Fe, FieldError, OpCounter, PrimeField};
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Row-major matrix of field elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Fe>,
}

impl FieldMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Fe>) -> Result<Self, FieldError> {
        if entries.len() != rows * cols {
            return Err(FieldError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Builds a matrix from integers, reducing each into the field.
    pub fn from_u64(
        field: &PrimeField,
        rows: usize,
        cols: usize,
        values: &[u64],
    ) -> Result<Self, FieldError> {
        Self::new(rows, cols, values.iter().map(|&v| field.elem(v)).collect())
    }

    pub fn scalar(x: Fe) -> Self {
        Self {
            rows: 1,
            cols: 1,
            entries: vec![x],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.entries[i * size + i] = Fe::ONE;
        }
        m
    }

    /// Entries uniform in `[0, p)`, fully determined by the generator state.
    pub fn random(field: &PrimeField, rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let entries = (0..rows * cols)
            .map(|_| Fe(rng.gen_range(0..field.modulus())))
            .collect();
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[Fe] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> Fe {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Fe) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Fe] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// Checks that every entry is a canonical residue of `field`.
    pub fn check_canonical(&self, field: &PrimeField) -> Result<(), FieldError> {
        match self.entries.iter().find(|e| e.0 >= field.modulus()) {
            Some(e) => Err(FieldError::DimensionMismatch(format!(
                "entry {e} is not reduced modulo {}",
                field.modulus()
            ))),
            None => Ok(()),
        }
    }

    fn same_dims(&self, other: &Self) -> Result<(), FieldError> {
        if self.dims() != other.dims() {
            return Err(FieldError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, field: &PrimeField, other: &Self, ops: &mut OpCounter) -> Result<Self, FieldError> {
        self.same_dims(other)?;
        ops.adds(self.entries.len() as u64);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| field.add(a, b))
            .collect();
        Ok(Self { entries, ..*self })
    }

    pub fn add_assign(&mut self, field: &PrimeField, other: &Self, ops: &mut OpCounter) -> Result<(), FieldError> {
        self.same_dims(other)?;
        ops.adds(self.entries.len() as u64);
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a = field.add(*a, b);
        }
        Ok(())
    }

    pub fn scale(&self, field: &PrimeField, c: Fe, ops: &mut OpCounter) -> Self {
        ops.muls(self.entries.len() as u64);
        let entries = self.entries.iter().map(|&a| field.mul(a, c)).collect();
        Self { entries, ..*self }
    }

    /// `self += c * other`.
    pub fn add_scaled(
        &mut self,
        field: &PrimeField,
        c: Fe,
        other: &Self,
        ops: &mut OpCounter,
    ) -> Result<(), FieldError> {
        self.same_dims(other)?;
        ops.muls(self.entries.len() as u64);
        ops.adds(self.entries.len() as u64);
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a = field.add(*a, field.mul(b, c));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.entries[c * self.rows + r] = self.entries[r * self.cols + c];
            }
        }
        out
    }

    /// Schoolbook product; counts `rows * inner * cols` multiplications.
    pub fn mul(&self, field: &PrimeField, rhs: &Self, ops: &mut OpCounter) -> Result<Self, FieldError> {
        if self.cols != rhs.rows {
            return Err(FieldError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let rhs_t = rhs.transpose();
        let mut entries = Vec::with_capacity(self.rows * rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                entries.push(field.dot(self.row(r), rhs_t.row(c), ops));
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            entries,
        })
    }
}

impl Serialize for FieldMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.0.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        let entries = repr
            .entries
            .iter()
            .map(|s| s.parse::<u64>().map(Fe).map_err(D::Error::custom))
            .collect::<Result<Vec<_>, _>>()?;
        FieldMatrix::new(repr.rows, repr.cols, entries).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<String>,
}

/// LU factorization `P·V = L·U` with unit-diagonal `L`.
///
/// Built left-looking so that every update is an inner product, which lets
/// the field accumulate lazily in 128 bits.
#[derive(Debug, Clone)]
pub struct LuFactors {
    size: usize,
    lu: Vec<Fe>,
    perm: Vec<usize>,
    inv_diag: Vec<Fe>,
}

impl LuFactors {
    /// Pivots on the first nonzero entry of each column; counts one inversion
    /// per pivot.
    pub fn factor(field: &PrimeField, v: &FieldMatrix, ops: &mut OpCounter) -> Result<Self, FieldError> {
        if v.rows != v.cols {
            return Err(FieldError::DimensionMismatch(format!(
                "system matrix is {}x{}, not square",
                v.rows, v.cols
            )));
        }
        let n = v.rows;
        let mut a = v.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut inv_diag = vec![Fe::ZERO; n];
        let mut col = vec![Fe::ZERO; n];
        for k in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = a[i * n + k];
            }
            for i in 1..k {
                let s = field.dot(&a[i * n..i * n + i], &col[..i], ops);
                col[i] = field.sub(col[i], s);
                ops.adds(1);
            }
            if k > 0 {
                for i in k..n {
                    let s = field.dot(&a[i * n..i * n + k], &col[..k], ops);
                    col[i] = field.sub(col[i], s);
                    ops.adds(1);
                }
            }
            let pivot = (k..n)
                .find(|&i| !col[i].is_zero())
                .ok_or(FieldError::SingularMatrix)?;
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                col.swap(k, pivot);
                perm.swap(k, pivot);
            }
            let inv = field.inv(col[k], ops)?;
            inv_diag[k] = inv;
            for i in 0..=k {
                a[i * n + k] = col[i];
            }
            for i in k + 1..n {
                a[i * n + k] = field.mul(col[i], inv);
            }
            ops.muls((n - k - 1) as u64);
        }
        Ok(Self {
            size: n,
            lu: a,
            perm,
            inv_diag,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Solves `V·x = b` in place for one right-hand side vector.
    pub fn solve_vec(&self, field: &PrimeField, b: &[Fe], ops: &mut OpCounter) -> Vec<Fe> {
        let n = self.size;
        let mut y: Vec<Fe> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let s = field.dot(&self.lu[i * n..i * n + i], &y[..i], ops);
            y[i] = field.sub(y[i], s);
            ops.adds(1);
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let s = field.dot(&self.lu[i * n + i + 1..(i + 1) * n], &y[i + 1..], ops);
                y[i] = field.sub(y[i], s);
                ops.adds(1);
            }
            y[i] = field.mul(y[i], self.inv_diag[i]);
            ops.muls(1);
        }
        y
    }
}

/// Solves `V·C = rhs` where `C` and `rhs` are column vectors of equal-sized
/// matrix blocks.
pub fn solve_linear(
    field: &PrimeField,
    v: &FieldMatrix,
    rhs: &[FieldMatrix],
    ops: &mut OpCounter,
) -> Result<Vec<FieldMatrix>, FieldError> {
    if rhs.len() != v.rows {
        return Err(FieldError::DimensionMismatch(format!(
            "{} right-hand blocks for a {}-row system",
            rhs.len(),
            v.rows
        )));
    }
    let Some(first) = rhs.first() else {
        return LuFactors::factor(field, v, ops).map(|_| Vec::new());
    };
    for b in rhs {
        first.same_dims(b)?;
    }
    let lu = LuFactors::factor(field, v, ops)?;
    let (br, bc) = first.dims();
    let mut out = vec![FieldMatrix::zeros(br, bc); v.rows];
    let mut column = vec![Fe::ZERO; v.rows];
    for e in 0..br * bc {
        for (slot, b) in column.iter_mut().zip(rhs) {
            *slot = b.entries[e];
        }
        let x = lu.solve_vec(field, &column, ops);
        for (o, xi) in out.iter_mut().zip(x) {
            o.entries[e] = xi;
        }
    }
    Ok(out)
}
