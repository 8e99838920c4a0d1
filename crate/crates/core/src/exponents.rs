//! Exponent sets for rook codes: constructions, decodability, sumset support
//! and an exhaustive minimal-threshold search for tiny batch sizes.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExponentError {
    #[error("invalid exponent pair: {0}")]
    Invalid(String),
    #[error("no Behrend parameters within bounds give a shell of {n} points")]
    ParameterSearchExhausted { n: usize },
    #[error("search for n={n}, max exponent {max_exponent} exceeds the configured budget")]
    SearchBudgetExceeded { n: usize, max_exponent: u64 },
    #[error("no decodable pair exists for n={n} with exponents <= {max_exponent}")]
    NoDecodablePair { n: usize, max_exponent: u64 },
}

/// Largest exponent accepted, so that every pairwise sum fits in a u64.
pub const MAX_EXPONENT: u64 = u64::MAX / 2;

/// The exponent sequences `P`, `Q` of a rook code; `p[k]` pairs with `q[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExponentPair {
    p: Vec<u64>,
    q: Vec<u64>,
}

impl ExponentPair {
    pub fn new(p: Vec<u64>, q: Vec<u64>) -> Result<Self, ExponentError> {
        if p.is_empty() {
            return Err(ExponentError::Invalid("batch size must be at least 1".into()));
        }
        if p.len() != q.len() {
            return Err(ExponentError::Invalid(format!(
                "|P| = {} but |Q| = {}",
                p.len(),
                q.len()
            )));
        }
        for (name, seq) in [("P", &p), ("Q", &q)] {
            if seq.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ExponentError::Invalid(format!("{name} is not strictly increasing")));
            }
            if seq.last().is_some_and(|&v| v > MAX_EXPONENT) {
                return Err(ExponentError::Invalid(format!("{name} has an exponent above 2^63")));
            }
        }
        Ok(Self { p, q })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[u64] {
        &self.p
    }

    pub fn q(&self) -> &[u64] {
        &self.q
    }

    pub fn is_symmetric(&self) -> bool {
        self.p == self.q
    }

    pub fn max_exponent(&self) -> u64 {
        self.p[self.n() - 1].max(self.q[self.n() - 1])
    }

    /// Largest entry of `P + Q`.
    pub fn max_sum(&self) -> u64 {
        self.p[self.n() - 1] + self.q[self.n() - 1]
    }

    fn sum_counts(&self) -> SumCounts {
        let max_sum = self.max_sum();
        if max_sum < DENSE_SUM_LIMIT {
            let mut counts = vec![0u8; max_sum as usize + 1];
            for &a in &self.p {
                for &b in &self.q {
                    let slot = &mut counts[(a + b) as usize];
                    *slot = slot.saturating_add(1);
                }
            }
            SumCounts::Dense(counts)
        } else {
            let mut sums = Vec::with_capacity(self.n() * self.n());
            for &a in &self.p {
                sums.extend(self.q.iter().map(|&b| a + b));
            }
            sums.sort_unstable();
            SumCounts::Sorted(sums)
        }
    }
}

/// Above this bound the sumset multiplicities are kept as a sorted list
/// instead of a dense table.
const DENSE_SUM_LIMIT: u64 = 1 << 26;

/// Multiplicity of every value in the multiset `{p_i + q_j}`.
enum SumCounts {
    /// Saturating per-value counts.
    Dense(Vec<u8>),
    Sorted(Vec<u64>),
}

impl SumCounts {
    fn count(&self, s: u64) -> usize {
        match self {
            SumCounts::Dense(c) => c.get(s as usize).map_or(0, |&c| c as usize),
            SumCounts::Sorted(v) => {
                v.partition_point(|&x| x <= s) - v.partition_point(|&x| x < s)
            }
        }
    }

    fn distinct(&self) -> usize {
        match self {
            SumCounts::Dense(c) => c.iter().filter(|&&c| c > 0).count(),
            SumCounts::Sorted(v) => 1 + v.windows(2).filter(|w| w[0] != w[1]).count(),
        }
    }

    fn support(self) -> Vec<u64> {
        match self {
            SumCounts::Dense(c) => c
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, _)| s as u64)
                .collect(),
            SumCounts::Sorted(mut v) => {
                v.dedup();
                v
            }
        }
    }
}

/// Sorted sumset `P + Q` with the position of every diagonal sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumSupport {
    pub support: Vec<u64>,
    pub diag_index: Vec<usize>,
}

impl SumSupport {
    /// `L = |P + Q|`.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

pub fn sum_support(pair: &ExponentPair) -> SumSupport {
    let support = pair.sum_counts().support();
    let diag_index = pair
        .p
        .iter()
        .zip(&pair.q)
        .map(|(a, b)| support.binary_search(&(a + b)).expect("diagonal sum is in the sumset"))
        .collect();
    SumSupport {
        support,
        diag_index,
    }
}

/// True iff every diagonal sum `p_k + q_k` occurs exactly once among the
/// `n^2` cross sums.
pub fn is_decodable(pair: &ExponentPair) -> bool {
    let counts = pair.sum_counts();
    pair.p.iter().zip(&pair.q).all(|(a, b)| counts.count(a + b) == 1)
}

/// True iff no three distinct elements satisfy `a + c = 2b`. `set` must be
/// sorted and duplicate-free.
pub fn is_3ap_free(set: &[u64]) -> bool {
    for (i, &a) in set.iter().enumerate() {
        for &c in &set[i + 1..] {
            if (a + c) % 2 == 0 && set.binary_search(&((a + c) / 2)).is_ok() {
                return false;
            }
        }
    }
    true
}

/// `P = {0, .., n-1}`, `Q = {0, n, .., n(n-1)}`; `L = n^2`.
pub fn poly_code_exponents(n: usize) -> Result<ExponentPair, ExponentError> {
    let n64 = n as u64;
    ExponentPair::new((0..n64).collect(), (0..n64).map(|j| j * n64).collect())
}

/// The `n` smallest integers whose base-3 digits are all 0 or 1, used for
/// both `P` and `Q`. For `n = 2^l` the sumset is all of `{0..3^l - 1}`.
pub fn base3_exponents(n: usize) -> Result<ExponentPair, ExponentError> {
    let set: Vec<u64> = (0..n as u64).map(binary_digits_in_base3).collect();
    ExponentPair::new(set.clone(), set)
}

fn binary_digits_in_base3(mut i: u64) -> u64 {
    let (mut value, mut place) = (0, 1);
    while i > 0 {
        value += (i & 1) * place;
        place *= 3;
        i >>= 1;
    }
    value
}

/// Digit range `{0..d-1}` and vector length `l` of a Behrend construction,
/// plus the chosen squared norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehrendParams {
    pub d: u64,
    pub l: u32,
    pub k: u64,
}

/// Bounds for the Behrend parameter search.
#[derive(Debug, Clone, Copy)]
pub struct BehrendSearch {
    /// `l` ranges over `2..=ceil(c * sqrt(log2 n)) + 2`.
    pub c: f64,
    pub max_digit_range: u64,
    /// Feasible digit ranges tried per vector length, starting from the
    /// smallest `d` whose largest shell holds `n` points.
    pub candidates_per_length: usize,
}

impl Default for BehrendSearch {
    fn default() -> Self {
        Self {
            c: 3.0,
            max_digit_range: 32,
            candidates_per_length: 3,
        }
    }
}

/// Vectors in `{0..d-1}^l` grouped by squared norm, read as base-`(2d-1)`
/// numbers. Digit sums stay below the base, so adding two such numbers never
/// carries and the norm-sphere structure survives in the integers.
struct NormShells {
    d: u64,
    l: u32,
    base: u64,
    /// `reach[j][r]`: number of length-`j` digit vectors with squared norm `r`.
    reach: Vec<Vec<u64>>,
}

impl NormShells {
    fn new(d: u64, l: u32) -> Self {
        let max_norm = (l as u64 * (d - 1) * (d - 1)) as usize;
        let mut reach = vec![vec![0u64; max_norm + 1]; l as usize + 1];
        reach[0][0] = 1;
        for j in 1..=l as usize {
            let (prev, cur) = reach.split_at_mut(j);
            let (prev, cur) = (&prev[j - 1], &mut cur[0]);
            for (r, &ways) in prev.iter().enumerate() {
                if ways == 0 {
                    continue;
                }
                for a in 0..d as usize {
                    if let Some(slot) = cur.get_mut(r + a * a) {
                        *slot = slot.saturating_add(ways);
                    }
                }
            }
        }
        Self {
            d,
            l,
            base: 2 * d - 1,
            reach,
        }
    }

    /// Largest shell, smallest norm on ties.
    fn largest(&self) -> (u64, u64) {
        let top = &self.reach[self.l as usize];
        let mut best = (0u64, 0u64);
        for (k, &count) in top.iter().enumerate() {
            if count > best.1 {
                best = (k as u64, count);
            }
        }
        best
    }

    /// The smallest values of shell `k` in increasing order, stopping after
    /// `limit` values or at the first value above `ceiling`.
    fn smallest(&self, k: u64, limit: usize, ceiling: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(limit);
        let place = self.base.pow(self.l - 1);
        self.descend(self.l as usize, k, 0, place, limit, ceiling, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        digits_left: usize,
        norm_left: u64,
        prefix: u64,
        place: u64,
        limit: usize,
        ceiling: u64,
        out: &mut Vec<u64>,
    ) -> bool {
        if digits_left == 0 {
            if prefix > ceiling {
                return false;
            }
            out.push(prefix);
            return out.len() < limit;
        }
        for a in 0..self.d {
            let sq = a * a;
            if sq > norm_left {
                break;
            }
            if self.reach[digits_left - 1][(norm_left - sq) as usize] == 0 {
                continue;
            }
            let next = prefix + a * place;
            if next > ceiling {
                return false;
            }
            if !self.descend(digits_left - 1, norm_left - sq, next, place / self.base, limit, ceiling, out) {
                return false;
            }
        }
        true
    }
}

/// Behrend set with fixed parameters: the `n` smallest values of the largest
/// norm shell of `{0..d-1}^l` in base `2d-1`.
pub fn behrend_with_params(n: usize, d: u64, l: u32) -> Result<(ExponentPair, BehrendParams), ExponentError> {
    if d < 2 || l < 1 {
        return Err(ExponentError::Invalid(format!("Behrend parameters d={d}, l={l} out of range")));
    }
    if (2 * d - 1).checked_pow(l).is_none_or(|top| top > MAX_EXPONENT) {
        return Err(ExponentError::Invalid(format!("base {}^{l} overflows", 2 * d - 1)));
    }
    let shells = NormShells::new(d, l);
    let (k, count) = shells.largest();
    if count < n as u64 {
        return Err(ExponentError::ParameterSearchExhausted { n });
    }
    let set = shells.smallest(k, n, u64::MAX);
    Ok((ExponentPair::new(set.clone(), set)?, BehrendParams { d, l, k }))
}

/// 3-AP-free exponent set of size `n` with `P = Q`, chosen among Behrend
/// candidates to minimise `|P + P|` (ties: smaller maximum, then smaller `l`,
/// then smaller `d`).
pub fn behrend_exponents(n: usize) -> Result<ExponentPair, ExponentError> {
    behrend_search(n, &BehrendSearch::default()).map(|(pair, _)| pair)
}

pub fn behrend_search(n: usize, bounds: &BehrendSearch) -> Result<(ExponentPair, BehrendParams), ExponentError> {
    if n == 0 {
        return Err(ExponentError::Invalid("batch size must be at least 1".into()));
    }
    let log = (n.max(2) as f64).log2();
    let max_l = (bounds.c * log.sqrt()).ceil() as u32 + 2;
    let mut best: Option<((usize, u64, u32, u64), Vec<u64>, BehrendParams)> = None;
    for l in 2..=max_l {
        let mut tried = 0;
        for d in 2..=bounds.max_digit_range {
            if tried == bounds.candidates_per_length {
                break;
            }
            let Some(top) = (2 * d - 1).checked_pow(l) else { break };
            if top > MAX_EXPONENT {
                break;
            }
            let shells = NormShells::new(d, l);
            let (k, count) = shells.largest();
            if count < n as u64 {
                continue;
            }
            tried += 1;
            let set = shells.smallest(k, n, u64::MAX);
            let key = (sumset_size(&set), set[n - 1], l, d);
            if best.as_ref().is_none_or(|(b, _, _)| key < *b) {
                best = Some((key, set, BehrendParams { d, l, k }));
            }
        }
    }
    let (_, set, params) = best.ok_or(ExponentError::ParameterSearchExhausted { n })?;
    Ok((ExponentPair::new(set.clone(), set)?, params))
}

/// `|A + A|` for a sorted set.
fn sumset_size(set: &[u64]) -> usize {
    let top = 2 * set[set.len() - 1];
    if top >= 1 << 30 {
        let pair = ExponentPair {
            p: set.to_vec(),
            q: set.to_vec(),
        };
        return pair.sum_counts().distinct();
    }
    let mut bits = vec![0u64; top as usize / 64 + 1];
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i..] {
            let s = (a + b) as usize;
            bits[s / 64] |= 1 << (s % 64);
        }
    }
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

/// Guard rails for [`min_recovery_bruteforce`].
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    pub max_n: usize,
    pub max_exponent: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_n: 4,
            max_exponent: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinSearch {
    pub l_min: usize,
    pub witness: ExponentPair,
    pub pairs_examined: u64,
    pub decodable_pairs: u64,
}

/// Smallest `|P + Q|` over decodable pairs with `0 ∈ P`, `0 ∈ Q` and all
/// exponents at most `max_exponent`. The witness is the first minimiser in
/// lexicographic order of `(P, Q)`.
pub fn min_recovery_bruteforce(n: usize, max_exponent: u64) -> Result<MinSearch, ExponentError> {
    min_recovery_bruteforce_with(n, max_exponent, &SearchLimits::default())
}

pub fn min_recovery_bruteforce_with(
    n: usize,
    max_exponent: u64,
    limits: &SearchLimits,
) -> Result<MinSearch, ExponentError> {
    if n == 0 {
        return Err(ExponentError::Invalid("batch size must be at least 1".into()));
    }
    if n > limits.max_n || max_exponent > limits.max_exponent {
        return Err(ExponentError::SearchBudgetExceeded { n, max_exponent });
    }
    let candidates = zero_anchored_sets(n, max_exponent);
    let mut best: Option<(usize, ExponentPair)> = None;
    let (mut examined, mut decodable) = (0u64, 0u64);
    for p in &candidates {
        for q in &candidates {
            examined += 1;
            let pair = ExponentPair::new(p.clone(), q.clone())?;
            if !is_decodable(&pair) {
                continue;
            }
            decodable += 1;
            let l = sum_support(&pair).len();
            if best.as_ref().is_none_or(|(b, _)| l < *b) {
                best = Some((l, pair));
            }
        }
    }
    let (l_min, witness) = best.ok_or(ExponentError::NoDecodablePair { n, max_exponent })?;
    Ok(MinSearch {
        l_min,
        witness,
        pairs_examined: examined,
        decodable_pairs: decodable,
    })
}

/// All sorted `n`-sets `{0} ∪ S` with `S ⊆ {1..=max}`, in lexicographic order.
fn zero_anchored_sets(n: usize, max: u64) -> Vec<Vec<u64>> {
    fn extend(cur: &mut Vec<u64>, next: u64, max: u64, n: usize, out: &mut Vec<Vec<u64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in next..=max {
            cur.push(v);
            extend(cur, v + 1, max, n, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut vec![0], 1, max, n, &mut out);
    out
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonInt {
    Num(u64),
    Str(String),
}

const JSON_SAFE: u64 = 1 << 53;

impl JsonInt {
    fn from_u64(v: u64) -> Self {
        if v < JSON_SAFE {
            JsonInt::Num(v)
        } else {
            JsonInt::Str(v.to_string())
        }
    }

    fn to_u64(&self) -> Result<u64, String> {
        match self {
            JsonInt::Num(v) => Ok(*v),
            JsonInt::Str(s) => s.parse().map_err(|e| format!("bad integer {s:?}: {e}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRepr {
    n: usize,
    p: Vec<JsonInt>,
    q: Vec<JsonInt>,
}

impl Serialize for ExponentPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PairRepr {
            n: self.n(),
            p: self.p.iter().map(|&v| JsonInt::from_u64(v)).collect(),
            q: self.q.iter().map(|&v| JsonInt::from_u64(v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExponentPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PairRepr::deserialize(d)?;
        let conv = |v: &[JsonInt]| v.iter().map(JsonInt::to_u64).collect::<Result<Vec<_>, _>>();
        let p = conv(&repr.p).map_err(D::Error::custom)?;
        let q = conv(&repr.q).map_err(D::Error::custom)?;
        if p.len() != repr.n {
            return Err(D::Error::custom(format!("n = {} but P has {} entries", repr.n, p.len())));
        }
        ExponentPair::new(p, q).map_err(D::Error::custom)
    }
}
