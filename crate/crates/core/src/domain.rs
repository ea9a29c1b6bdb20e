//! Sign matrices, dyadic distributions and source distributions.
//!
//! A function class over a finite domain is stored as a dense ±1 table with
//! one row per concept and one column per domain point. Probabilities are
//! dyadic: a distribution with scale exponent `k` is sampled by drawing `k`
//! fair bits and indexing the expanded table of `2^k` equally likely slots.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{LabError, Result};
use crate::seeds::rng_from_seed;

/// Maximum number of cells in a dense sign matrix.
pub const MAX_MATRIX_CELLS: usize = 1 << 24;
/// Largest supported dyadic scale exponent.
pub const MAX_SCALE_EXPONENT: u32 = 62;
/// Scale used when a non-dyadic target (e.g. uniform over 6 points) is quantized.
pub const DEFAULT_QUANTIZATION_BITS: u32 = 16;
/// Default +1 density for Zarankiewicz rejection sampling.
pub const ZARANKIEWICZ_DEFAULT_DENSITY: f64 = 0.25;
pub const ZARANKIEWICZ_DEFAULT_RETRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSignMatrix", into = "RawSignMatrix")]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawSignMatrix {
    rows: usize,
    cols: usize,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    entries: Vec<i8>,
}

impl TryFrom<RawSignMatrix> for SignMatrix {
    type Error = LabError;
    fn try_from(raw: RawSignMatrix) -> Result<Self> {
        SignMatrix::with_labels(raw.rows, raw.cols, raw.entries, raw.row_labels, raw.col_labels)
    }
}

impl From<SignMatrix> for RawSignMatrix {
    fn from(m: SignMatrix) -> Self {
        RawSignMatrix {
            rows: m.rows,
            cols: m.cols,
            row_labels: m.row_labels,
            col_labels: m.col_labels,
            entries: m.entries,
        }
    }
}

impl SignMatrix {
    /// Row-major entries; labels default to the indices.
    pub fn new(rows: usize, cols: usize, entries: Vec<i8>) -> Result<Self> {
        let row_labels = (0..rows).map(|i| i.to_string()).collect();
        let col_labels = (0..cols).map(|j| j.to_string()).collect();
        Self::with_labels(rows, cols, entries, row_labels, col_labels)
    }

    pub fn with_labels(
        rows: usize,
        cols: usize,
        entries: Vec<i8>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LabError::InvalidInput(
                "sign matrix needs at least one row and one column".into(),
            ));
        }
        let cells = rows.checked_mul(cols).unwrap_or(usize::MAX);
        if cells > MAX_MATRIX_CELLS {
            return Err(LabError::SizeLimit {
                what: "sign matrix cells",
                actual: cells,
                limit: MAX_MATRIX_CELLS,
            });
        }
        if entries.len() != cells {
            return Err(LabError::InvalidInput(format!(
                "expected {cells} entries, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(LabError::InvalidInput(format!("entry {bad} is not ±1")));
        }
        if row_labels.len() != rows || col_labels.len() != cols {
            return Err(LabError::InvalidInput("label count mismatch".into()));
        }
        Ok(SignMatrix {
            rows,
            cols,
            entries,
            row_labels,
            col_labels,
        })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LabError::InvalidInput("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, value: i8) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows.saturating_mul(cols)])
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<Self> {
        let entries = (0..rows * cols)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn transpose(&self) -> SignMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        SignMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }

    pub fn negated(&self) -> SignMatrix {
        SignMatrix {
            entries: self.entries.iter().map(|e| -e).collect(),
            ..self.clone()
        }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SignMatrix> {
        let mut entries = Vec::with_capacity(rows.len() * self.cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.rows {
                return Err(LabError::InvalidInput(format!("row {r} out of range")));
            }
            entries.extend_from_slice(self.row(r));
            labels.push(self.row_labels[r].clone());
        }
        SignMatrix::with_labels(rows.len(), self.cols, entries, labels, self.col_labels.clone())
    }

    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> SignMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for &r in row_perm {
            for &c in col_perm {
                entries.push(self.get(r, c));
            }
        }
        SignMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
            row_labels: row_perm.iter().map(|&r| self.row_labels[r].clone()).collect(),
            col_labels: col_perm.iter().map(|&c| self.col_labels[c].clone()).collect(),
        }
    }

    /// The matrix over the expanded uniform domain: row slot `r` of the
    /// `2^k_mu` slots of `mu` maps to the row it selects, likewise for columns.
    pub fn expand(
        &self,
        mu: &DyadicDistribution,
        rho: &DyadicDistribution,
        max_cells: usize,
    ) -> Result<SignMatrix> {
        check_len(mu, self.rows, "mu")?;
        check_len(rho, self.cols, "rho")?;
        let rt = mu.expanded_table(max_cells)?;
        let ct = rho.expanded_table(max_cells)?;
        let cells = rt.len() * ct.len();
        if cells > max_cells {
            return Err(LabError::SizeLimit {
                what: "expanded domain cells",
                actual: cells,
                limit: max_cells,
            });
        }
        let mut entries = Vec::with_capacity(cells);
        for &r in &rt {
            for &c in &ct {
                entries.push(self.get(r, c));
            }
        }
        SignMatrix::new(rt.len(), ct.len(), entries)
    }
}

pub(crate) fn check_len(d: &DyadicDistribution, n: usize, name: &str) -> Result<()> {
    if d.len() != n {
        return Err(LabError::InvalidInput(format!(
            "{name} has {} weights, expected {n}",
            d.len()
        )));
    }
    Ok(())
}

/// Probability vector whose weights are integers summing to `2^scale_exponent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DyadicDistribution {
    weights: Vec<u64>,
    scale_exponent: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    scale_exponent: u32,
    weights: Vec<u64>,
}

impl TryFrom<RawDistribution> for DyadicDistribution {
    type Error = LabError;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        DyadicDistribution::new(raw.weights, raw.scale_exponent)
    }
}

impl From<DyadicDistribution> for RawDistribution {
    fn from(d: DyadicDistribution) -> Self {
        RawDistribution {
            scale_exponent: d.scale_exponent,
            weights: d.weights,
        }
    }
}

impl DyadicDistribution {
    pub fn new(weights: Vec<u64>, scale_exponent: u32) -> Result<Self> {
        if weights.is_empty() {
            return Err(LabError::InvalidDistribution("no weights".into()));
        }
        if scale_exponent > MAX_SCALE_EXPONENT {
            return Err(LabError::InvalidDistribution(format!(
                "scale exponent {scale_exponent} exceeds {MAX_SCALE_EXPONENT}"
            )));
        }
        let total: u128 = weights.iter().map(|&w| w as u128).sum();
        if total != 1u128 << scale_exponent {
            return Err(LabError::InvalidDistribution(format!(
                "weights sum to {total}, expected 2^{scale_exponent}"
            )));
        }
        Ok(DyadicDistribution {
            weights,
            scale_exponent,
        })
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(LabError::InvalidInput(format!("point mass index {index} >= {n}")));
        }
        let mut w = vec![0; n];
        w[index] = 1;
        Self::new(w, 0)
    }

    /// Uniform over `n` points. Exact when `n` is a power of two, otherwise
    /// quantized at [`DEFAULT_QUANTIZATION_BITS`].
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidDistribution("no weights".into()));
        }
        if n.is_power_of_two() {
            let k = n.trailing_zeros();
            return Self::new(vec![1; n], k);
        }
        Self::from_probs(&vec![1.0; n], DEFAULT_QUANTIZATION_BITS)
    }

    /// Quantizes non-negative (unnormalized) masses to scale `2^k` by the
    /// largest-remainder rule, so the weights sum exactly to `2^k`.
    pub fn from_probs(probs: &[f64], k: u32) -> Result<Self> {
        if probs.is_empty() {
            return Err(LabError::InvalidDistribution("no weights".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(LabError::InvalidDistribution("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(LabError::InvalidDistribution("zero total mass".into()));
        }
        if k > MAX_SCALE_EXPONENT {
            return Err(LabError::InvalidDistribution(format!("scale exponent {k} too large")));
        }
        let scale = (1u64 << k) as f64;
        let ideal: Vec<f64> = probs.iter().map(|p| p / total * scale).collect();
        let mut weights: Vec<u64> = ideal.iter().map(|v| v.floor() as u64).collect();
        let assigned: u64 = weights.iter().sum();
        let target = 1u64 << k;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        // Largest remainder first; index breaks ties for determinism.
        order.sort_by(|&a, &b| {
            let ra = ideal[a] - ideal[a].floor();
            let rb = ideal[b] - ideal[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        if assigned <= target {
            let mut missing = target - assigned;
            for &i in order.iter().cycle() {
                if missing == 0 {
                    break;
                }
                if probs[i] > 0.0 {
                    weights[i] += 1;
                    missing -= 1;
                }
            }
        } else {
            // Only reachable through floating-point overshoot.
            let mut excess = assigned - target;
            for &i in order.iter().rev().cycle() {
                if excess == 0 {
                    break;
                }
                if weights[i] > 0 {
                    weights[i] -= 1;
                    excess -= 1;
                }
            }
        }
        Self::new(weights, k)
    }

    /// A uniformly random point of the dyadic simplex at scale `2^k`.
    pub fn random(n: usize, k: u32, rng: &mut impl Rng) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidDistribution("no weights".into()));
        }
        let total = 1u64 << k;
        // Stars and bars: n-1 sorted cut points in [0, total].
        let mut cuts: Vec<u64> = (0..n - 1).map(|_| rng.gen_range(0..=total)).collect();
        cuts.sort_unstable();
        let mut weights = Vec::with_capacity(n);
        let mut prev = 0;
        for c in cuts {
            weights.push(c - prev);
            prev = c;
        }
        weights.push(total - prev);
        Self::new(weights, k)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn scale_exponent(&self) -> u32 {
        self.scale_exponent
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn prob(&self, i: usize) -> Dyadic {
        Dyadic::new(self.weights[i] as i128, self.scale_exponent)
    }

    pub fn prob_f64(&self, i: usize) -> f64 {
        self.weights[i] as f64 / (1u64 << self.scale_exponent) as f64
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.prob_f64(i)).collect()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(i, _)| i)
    }

    /// Index selected by the slot `u ∈ [0, 2^k)` of the expanded table.
    pub fn index_of_slot(&self, slot: u64) -> usize {
        let mut acc = 0u64;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if slot < acc {
                return i;
            }
        }
        unreachable!("slot {slot} outside 2^{}", self.scale_exponent)
    }

    /// Draws `k` fair bits and maps the resulting slot to its index.
    pub fn sample_index(&self, rng: &mut impl RngCore) -> usize {
        let slot = self.draw_slot(rng);
        self.index_of_slot(slot)
    }

    pub fn draw_slot(&self, rng: &mut impl RngCore) -> u64 {
        if self.scale_exponent == 0 {
            0
        } else {
            rng.next_u64() >> (64 - self.scale_exponent)
        }
    }

    /// The table of `2^k` slots, each holding the index it selects.
    pub fn expanded_table(&self, max_len: usize) -> Result<Vec<usize>> {
        let len = 1usize
            .checked_shl(self.scale_exponent)
            .filter(|&l| l <= max_len)
            .ok_or(LabError::SizeLimit {
                what: "expanded distribution table",
                actual: 1usize.checked_shl(self.scale_exponent).unwrap_or(usize::MAX),
                limit: max_len,
            })?;
        let mut table = Vec::with_capacity(len);
        for (i, &w) in self.weights.iter().enumerate() {
            table.extend(std::iter::repeat(i).take(w as usize));
        }
        Ok(table)
    }

    /// Inverse of [`expanded_table`](Self::expanded_table).
    pub fn from_expanded(table: &[usize], n: usize) -> Result<Self> {
        if !table.len().is_power_of_two() {
            return Err(LabError::InvalidDistribution(
                "expanded table length is not a power of two".into(),
            ));
        }
        let mut weights = vec![0u64; n];
        for &i in table {
            if i >= n {
                return Err(LabError::InvalidInput(format!("slot index {i} >= {n}")));
            }
            weights[i] += 1;
        }
        Self::new(weights, table.len().trailing_zeros())
    }

    /// Same distribution with a coarser or finer scale when exactly representable.
    pub fn rescaled(&self, k: u32) -> Option<Self> {
        if k >= self.scale_exponent {
            let shift = k - self.scale_exponent;
            let w = self.weights.iter().map(|&w| w << shift).collect();
            Self::new(w, k).ok()
        } else {
            let shift = self.scale_exponent - k;
            let mask = (1u64 << shift) - 1;
            if self.weights.iter().any(|w| w & mask != 0) {
                return None;
            }
            Self::new(self.weights.iter().map(|w| w >> shift).collect(), k).ok()
        }
    }

    /// Smallest scale at which the distribution is exactly representable.
    pub fn reduced(&self) -> Self {
        let mut k = self.scale_exponent;
        while k > 0 {
            match self.rescaled(k - 1) {
                Some(_) => k -= 1,
                None => break,
            }
        }
        self.rescaled(k).expect("reduction keeps exactness")
    }

    /// Permutes the indices: the result's weight at `i` is `self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        DyadicDistribution {
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            scale_exponent: self.scale_exponent,
        }
    }
}

/// Draws columns from `example_dist` and labels them with the target row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSource", into = "RawSource")]
pub struct SourceDistribution {
    matrix: Arc<SignMatrix>,
    target_row: usize,
    example_dist: DyadicDistribution,
}

#[derive(Serialize, Deserialize)]
struct RawSource {
    matrix: Arc<SignMatrix>,
    target_row: usize,
    example_dist: DyadicDistribution,
}

impl TryFrom<RawSource> for SourceDistribution {
    type Error = LabError;
    fn try_from(raw: RawSource) -> Result<Self> {
        SourceDistribution::new(raw.matrix, raw.target_row, raw.example_dist)
    }
}

impl From<SourceDistribution> for RawSource {
    fn from(s: SourceDistribution) -> Self {
        RawSource {
            matrix: s.matrix,
            target_row: s.target_row,
            example_dist: s.example_dist,
        }
    }
}

impl SourceDistribution {
    pub fn new(
        matrix: Arc<SignMatrix>,
        target_row: usize,
        example_dist: DyadicDistribution,
    ) -> Result<Self> {
        if target_row >= matrix.rows() {
            return Err(LabError::InvalidInput(format!(
                "target row {target_row} >= {}",
                matrix.rows()
            )));
        }
        check_len(&example_dist, matrix.cols(), "example distribution")?;
        Ok(SourceDistribution {
            matrix,
            target_row,
            example_dist,
        })
    }

    pub fn matrix(&self) -> &SignMatrix {
        &self.matrix
    }

    pub fn matrix_arc(&self) -> &Arc<SignMatrix> {
        &self.matrix
    }

    pub fn target_row(&self) -> usize {
        self.target_row
    }

    pub fn example_dist(&self) -> &DyadicDistribution {
        &self.example_dist
    }

    #[inline]
    pub fn label(&self, col: usize) -> i8 {
        self.matrix.get(self.target_row, col)
    }

    /// Same target, different example distribution.
    pub fn with_example_dist(&self, example_dist: DyadicDistribution) -> Result<Self> {
        Self::new(self.matrix.clone(), self.target_row, example_dist)
    }

    pub fn draw(&self, rng: &mut impl RngCore) -> LabeledSample {
        let col = self.example_dist.sample_index(rng);
        LabeledSample {
            col_index: col,
            label: self.label(col),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub col_index: usize,
    pub label: i8,
}

/// `count` i.i.d. samples; deterministic for a fixed seed.
pub fn sample_source(source: &SourceDistribution, count: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| source.draw(&mut rng)).collect()
}

/// Parities on `n` bits: entry `(S, x) = (-1)^{popcount(S & x)}`.
/// Bit `i` of a row index marks `x_{i+1} ∈ S`; bit `i` of a column index is `x_{i+1}`.
pub fn make_parity_class(n: u32) -> Result<SignMatrix> {
    if !(1..=14).contains(&n) {
        return Err(LabError::SizeLimit {
            what: "parity bit-width",
            actual: n as usize,
            limit: 14,
        });
    }
    let size = 1usize << n;
    let mut entries = Vec::with_capacity(size * size);
    for s in 0..size {
        for x in 0..size {
            entries.push(if (s & x).count_ones() % 2 == 0 { 1 } else { -1 });
        }
    }
    let bits = |v: usize| format!("{v:0width$b}", width = n as usize);
    let row_labels = (0..size).map(|s| format!("S={}", bits(s))).collect();
    let col_labels = (0..size).map(|x| format!("x={}", bits(x))).collect();
    SignMatrix::with_labels(size, size, entries, row_labels, col_labels)
}

/// True iff no `c × c` submatrix is all +1.
///
/// Exhaustive over `c`-subsets of rows: a row subset extends to an all-(+1)
/// submatrix exactly when its common +1 columns number at least `c`.
pub fn zarankiewicz_member(matrix: &SignMatrix, c: usize) -> bool {
    if c == 0 {
        return false;
    }
    if c > matrix.rows() || c > matrix.cols() {
        return true;
    }
    let words = matrix.cols().div_ceil(64);
    let plus_masks: Vec<Vec<u64>> = (0..matrix.rows())
        .map(|r| {
            let mut m = vec![0u64; words];
            for (j, &e) in matrix.row(r).iter().enumerate() {
                if e == 1 {
                    m[j / 64] |= 1 << (j % 64);
                }
            }
            m
        })
        .collect();

    fn popcount(m: &[u64]) -> usize {
        m.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn search(masks: &[Vec<u64>], start: usize, depth: usize, c: usize, acc: &[u64]) -> bool {
        // Returns true if some completion of the current row subset is all +1.
        if depth == c {
            return popcount(acc) >= c;
        }
        for r in start..masks.len() {
            if masks.len() - r < c - depth {
                break;
            }
            let next: Vec<u64> = acc.iter().zip(&masks[r]).map(|(a, b)| a & b).collect();
            if popcount(&next) < c {
                continue;
            }
            if search(masks, r + 1, depth + 1, c, &next) {
                return true;
            }
        }
        false
    }

    let full = vec![u64::MAX; words];
    !search(&plus_masks, 0, 0, c, &full)
}

/// Rejection-samples an `n × n` member of the Zarankiewicz class `Z(n, c)`.
pub fn make_zarankiewicz_random(n: usize, c: usize, seed: u64) -> Result<SignMatrix> {
    make_zarankiewicz_random_with(
        n,
        c,
        seed,
        ZARANKIEWICZ_DEFAULT_DENSITY,
        ZARANKIEWICZ_DEFAULT_RETRIES,
    )
}

pub fn make_zarankiewicz_random_with(
    n: usize,
    c: usize,
    seed: u64,
    density: f64,
    max_retries: usize,
) -> Result<SignMatrix> {
    if c < 2 || n < c {
        return Err(LabError::InvalidInput(format!(
            "Zarankiewicz generation needs n >= c >= 2, got n={n}, c={c}"
        )));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(LabError::InvalidInput(format!("density {density} outside [0,1]")));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..max_retries {
        let entries = (0..n * n)
            .map(|_| if rng.gen_bool(density) { 1 } else { -1 })
            .collect();
        let m = SignMatrix::new(n, n, entries)?;
        if zarankiewicz_member(&m, c) {
            return Ok(m);
        }
    }
    Err(LabError::GenerationFailed {
        attempts: max_retries,
        reason: format!("no {n}x{n} sample avoided an all-(+1) {c}x{c} submatrix"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_member(m: &SignMatrix, c: usize) -> bool {
        let n_r = m.rows();
        let n_c = m.cols();
        let subsets = |n: usize| -> Vec<u32> {
            (0u32..1 << n).filter(|s| s.count_ones() as usize == c).collect()
        };
        for rs in subsets(n_r) {
            for cs in subsets(n_c) {
                let all_plus = (0..n_r)
                    .filter(|i| rs >> i & 1 == 1)
                    .all(|i| (0..n_c).filter(|j| cs >> j & 1 == 1).all(|j| m.get(i, j) == 1));
                if all_plus {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn parity_n1_table() {
        let m = make_parity_class(1).unwrap();
        assert_eq!(m.entries(), &[1, 1, 1, -1]);
    }

    #[test]
    fn parity_rows_orthogonal_n2() {
        let m = make_parity_class(2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ip: i32 = (0..4).map(|x| (m.get(i, x) * m.get(j, x)) as i32).sum();
                assert_eq!(ip, if i == j { 4 } else { 0 });
            }
        }
    }

    #[test]
    fn parity_empty_row_constant() {
        for n in 1..=6 {
            let m = make_parity_class(n).unwrap();
            assert!(m.row(0).iter().all(|&e| e == 1));
        }
    }

    #[test]
    fn parity_size_limits() {
        assert!(matches!(make_parity_class(0), Err(LabError::SizeLimit { .. })));
        assert!(matches!(make_parity_class(15), Err(LabError::SizeLimit { .. })));
    }

    #[test]
    fn sign_matrix_rejects_bad_entries() {
        assert!(SignMatrix::new(1, 2, vec![1, 0]).is_err());
        assert!(SignMatrix::new(0, 2, vec![]).is_err());
        assert!(SignMatrix::new(2, 2, vec![1, 1, 1]).is_err());
    }

    #[test]
    fn zarankiewicz_examples() {
        let all_plus = SignMatrix::filled(3, 3, 1).unwrap();
        assert!(!zarankiewicz_member(&all_plus, 2));
        let id = SignMatrix::from_rows(&[vec![1, -1, -1], vec![-1, 1, -1], vec![-1, -1, 1]]).unwrap();
        assert!(zarankiewicz_member(&id, 2));
        assert!(brute_force_member(&id, 2));
        assert!(zarankiewicz_member(&all_plus, 4));
        let all_minus = SignMatrix::filled(5, 5, -1).unwrap();
        for c in 1..=5 {
            assert!(zarankiewicz_member(&all_minus, c));
        }
        let diag = SignMatrix::from_rows(&[vec![1, -1], vec![-1, 1]]).unwrap();
        assert!(zarankiewicz_member(&diag, 2));
    }

    #[test]
    fn zarankiewicz_member_matches_brute_force() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let n = rng.gen_range(2..=5);
            let c = rng.gen_range(2..=3);
            let entries = (0..n * n).map(|_| if rng.gen_bool(0.6) { 1 } else { -1 }).collect();
            let m = SignMatrix::new(n, n, entries).unwrap();
            assert_eq!(zarankiewicz_member(&m, c), brute_force_member(&m, c));
        }
    }

    #[test]
    fn zarankiewicz_generation_verifies() {
        for seed in 0..5 {
            let m = make_zarankiewicz_random(4, 2, seed).unwrap();
            assert!(brute_force_member(&m, 2));
            let m = make_zarankiewicz_random(2, 2, seed).unwrap();
            assert!(zarankiewicz_member(&m, 2));
        }
        let m = make_zarankiewicz_random(12, 2, 3).unwrap();
        assert!(zarankiewicz_member(&m, 2));
        assert!(matches!(
            make_zarankiewicz_random_with(6, 2, 0, 1.0, 3),
            Err(LabError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(DyadicDistribution::new(vec![1, 1], 1).is_ok());
        assert!(DyadicDistribution::new(vec![1, 2], 1).is_err());
        assert!(DyadicDistribution::new(vec![], 0).is_err());
    }

    #[test]
    fn from_probs_sums_exactly() {
        let d = DyadicDistribution::from_probs(&[1.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(d.weights().iter().sum::<u64>(), 16);
        let d = DyadicDistribution::uniform(6).unwrap();
        assert_eq!(d.weights().iter().sum::<u64>(), 1 << DEFAULT_QUANTIZATION_BITS);
        let d = DyadicDistribution::from_probs(&[0.0, 3.0, 1.0], 2).unwrap();
        assert_eq!(d.weights(), &[0, 3, 1]);
    }

    #[test]
    fn expanded_round_trip() {
        let d = DyadicDistribution::new(vec![3, 0, 4, 1], 3).unwrap();
        let t = d.expanded_table(1 << 10).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(DyadicDistribution::from_expanded(&t, 4).unwrap(), d);
    }

    #[test]
    fn point_mass_sampling() {
        let m = Arc::new(make_parity_class(2).unwrap());
        let src = SourceDistribution::new(m, 1, DyadicDistribution::point_mass(4, 3).unwrap()).unwrap();
        let s = sample_source(&src, 100, 5);
        assert!(s.iter().all(|x| x.col_index == 3 && x.label == -1));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = Arc::new(make_parity_class(3).unwrap());
        let src = SourceDistribution::new(m, 5, DyadicDistribution::uniform(8).unwrap()).unwrap();
        assert_eq!(sample_source(&src, 50, 9), sample_source(&src, 50, 9));
        assert_ne!(sample_source(&src, 50, 9), sample_source(&src, 50, 10));
    }

    #[test]
    fn uniform_frequencies_concentrate() {
        // sd of a frequency is sqrt(0.25*0.75/40000) ~ 0.0022; 0.02 is ~9 sd.
        let m = Arc::new(make_parity_class(2).unwrap());
        let src = SourceDistribution::new(m, 0, DyadicDistribution::uniform(4).unwrap()).unwrap();
        let s = sample_source(&src, 40_000, 1);
        let mut counts = [0usize; 4];
        for x in &s {
            counts[x.col_index] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() <= 0.02);
        }
    }

    #[test]
    fn reduced_scale() {
        let d = DyadicDistribution::new(vec![4, 4, 8], 4).unwrap();
        let r = d.reduced();
        assert_eq!(r.scale_exponent(), 2);
        assert_eq!(r.weights(), &[1, 1, 2]);
    }

    #[test]
    fn json_formats() {
        let d = DyadicDistribution::new(vec![1, 3], 2).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"scale_exponent":2,"weights":[1,3]}"#);
        let m = SignMatrix::from_rows(&[vec![1, -1]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"rows":1,"cols":2,"row_labels":["0"],"col_labels":["0","1"],"entries":[1,-1]}"#
        );
        assert!(serde_json::from_str::<SignMatrix>(
            r#"{"rows":1,"cols":2,"row_labels":["0"],"col_labels":["0","1"],"entries":[1,2]}"#
        )
        .is_err());
    }
}
