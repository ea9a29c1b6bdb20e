//! Discrepancy, 2-bit two-party protocols and the 2-party norm.
//!
//! Rows of a sign matrix are Alice's inputs and columns are Bob's. All
//! distributions are products `ζ = ζ_row × ζ_col` of dyadic marginals, so
//! rectangle sums and protocol correlations are exact dyadic rationals.
//!
//! A deterministic 2-bit protocol has the first speaker send one bit that
//! depends on its input; the other party replies with a bit depending on
//! its own input and the received bit. The reply is the output, read as
//! `(-1)^bit`. A protocol where one party sends both bits computes a
//! function of that party's input alone, which the alternating form already
//! covers.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_len, DyadicDistribution, SignMatrix};
use crate::dyadic::Dyadic;
use crate::error::{LabError, Result};
use crate::seeds::{derive_seed, rng_from_seed};

/// Cap on `rows + cols` for exhaustive rectangle search.
pub const DISC_SIZE_CAP: usize = 26;
/// Per-party input cap for protocol enumeration.
pub const DCC2_SIDE_CAP: usize = 8;
/// Cap on expanded-domain cells `2^{k_μ} · 2^{k_ρ}` for `R₂`.
pub const R2_CELL_CAP: usize = 1 << 20;
/// Cap on each side for the closed-form protocol maximization.
pub const DCC2_CLOSED_FORM_CAP: usize = 20;
pub const DEFAULT_GRID_BITS: u32 = 6;
pub const DEFAULT_RESTARTS: usize = 32;
/// Denominator exponent for sampled protocol coins.
pub const COIN_QUANTIZATION_BITS: u32 = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    pub row_set: Vec<usize>,
    pub col_set: Vec<usize>,
}

impl Rectangle {
    pub fn full(rows: usize, cols: usize) -> Self {
        Rectangle {
            row_set: (0..rows).collect(),
            col_set: (0..cols).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.row_set.is_empty() || self.col_set.is_empty()
    }

    fn validate(&self, matrix: &SignMatrix) -> Result<()> {
        if self.row_set.iter().any(|&r| r >= matrix.rows())
            || self.col_set.iter().any(|&c| c >= matrix.cols())
        {
            return Err(LabError::InvalidInput("rectangle index out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub value: Dyadic,
    pub value_f64: f64,
    pub witness: Rectangle,
    pub zeta_row: DyadicDistribution,
    pub zeta_col: DyadicDistribution,
    pub certified_exact_rectangle: bool,
    /// Number of product distributions evaluated (1 for a fixed ζ).
    pub evaluations: usize,
}

/// `Σ_{(x,y)∈R} ζ(x,y) A(x;y)` with its sign.
pub fn rectangle_sum(
    matrix: &SignMatrix,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
    rect: &Rectangle,
) -> Dyadic {
    let mut num: i128 = 0;
    for &x in &rect.row_set {
        for &y in &rect.col_set {
            num += matrix.get(x, y) as i128
                * zeta_row.weight(x) as i128
                * zeta_col.weight(y) as i128;
        }
    }
    Dyadic::new(num, zeta_row.scale_exponent() + zeta_col.scale_exponent())
}

/// `ζ(R)`, the probability mass of the rectangle.
pub fn rectangle_mass(
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
    rect: &Rectangle,
) -> Dyadic {
    let r: i128 = rect.row_set.iter().map(|&x| zeta_row.weight(x) as i128).sum();
    let c: i128 = rect.col_set.iter().map(|&y| zeta_col.weight(y) as i128).sum();
    Dyadic::new(r * c, zeta_row.scale_exponent() + zeta_col.scale_exponent())
}

/// Exact `disc_ζ(A)` for the product distribution `ζ_row × ζ_col`.
///
/// For a fixed row set the best column set takes either every column with a
/// positive partial sum or every column with a negative one, so only the
/// subsets of the smaller side are enumerated.
pub fn discrepancy_under(
    matrix: &SignMatrix,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
) -> Result<DiscrepancyResult> {
    check_len(zeta_row, matrix.rows(), "zeta_row")?;
    check_len(zeta_col, matrix.cols(), "zeta_col")?;
    let size = matrix.rows() + matrix.cols();
    if size > DISC_SIZE_CAP {
        return Err(LabError::SizeLimit {
            what: "rows + cols for rectangle search",
            actual: size,
            limit: DISC_SIZE_CAP,
        });
    }
    let (num, witness) = if matrix.rows() <= matrix.cols() {
        best_rectangle(matrix, zeta_row.weights(), zeta_col.weights())
    } else {
        let t = matrix.transpose();
        let (num, w) = best_rectangle(&t, zeta_col.weights(), zeta_row.weights());
        (
            num,
            Rectangle {
                row_set: w.col_set,
                col_set: w.row_set,
            },
        )
    };
    let value = Dyadic::new(num, zeta_row.scale_exponent() + zeta_col.scale_exponent());
    Ok(DiscrepancyResult {
        value,
        value_f64: value.to_f64(),
        witness,
        zeta_row: zeta_row.clone(),
        zeta_col: zeta_col.clone(),
        certified_exact_rectangle: true,
        evaluations: 1,
    })
}

/// Maximizes over row subsets in Gray-code order; returns the numerator.
fn best_rectangle(matrix: &SignMatrix, row_w: &[u64], col_w: &[u64]) -> (i128, Rectangle) {
    let rows = matrix.rows();
    let cols = matrix.cols();
    let mut partial = vec![0i128; cols];
    let mut best = 0i128;
    let mut best_mask = 0u64;
    let mut best_positive = true;
    let mut mask = 0u64;
    for step in 1u64..(1u64 << rows) {
        let flip = step.trailing_zeros() as usize;
        let sign = if mask >> flip & 1 == 0 { 1 } else { -1 };
        mask ^= 1 << flip;
        let w = row_w[flip] as i128 * sign;
        let mut pos = 0i128;
        let mut neg = 0i128;
        for (y, p) in partial.iter_mut().enumerate() {
            *p += w * matrix.get(flip, y) as i128;
            let v = *p * col_w[y] as i128;
            if v > 0 {
                pos += v;
            } else {
                neg -= v;
            }
        }
        if pos > best {
            best = pos;
            best_mask = mask;
            best_positive = true;
        }
        if neg > best {
            best = neg;
            best_mask = mask;
            best_positive = false;
        }
    }
    let row_set: Vec<usize> = (0..rows).filter(|&r| best_mask >> r & 1 == 1).collect();
    let col_set = if best == 0 {
        Vec::new()
    } else {
        (0..cols)
            .filter(|&y| {
                let s: i128 = row_set
                    .iter()
                    .map(|&x| row_w[x] as i128 * matrix.get(x, y) as i128)
                    .sum();
                if best_positive {
                    s > 0 && col_w[y] > 0
                } else {
                    s < 0 && col_w[y] > 0
                }
            })
            .collect()
    };
    let row_set = if best == 0 { Vec::new() } else { row_set };
    (best, Rectangle { row_set, col_set })
}

/// Searches product distributions on the dyadic grid `2^-grid_bits` for a
/// small `disc_ζ(A)`. Each evaluation is exact, so the returned value is a
/// certified upper bound on `disc^×(A)`. Restart 0 is the (quantized)
/// uniform distribution; the rest start from random grid points.
pub fn discprod_search(
    matrix: &SignMatrix,
    grid_bits: u32,
    restarts: usize,
    seed: u64,
) -> Result<DiscrepancyResult> {
    let size = matrix.rows() + matrix.cols();
    if size > DISC_SIZE_CAP {
        return Err(LabError::SizeLimit {
            what: "rows + cols for rectangle search",
            actual: size,
            limit: DISC_SIZE_CAP,
        });
    }
    if grid_bits == 0 || grid_bits > 20 {
        return Err(LabError::InvalidInput(format!("grid bits {grid_bits} outside 1..=20")));
    }
    let runs: Vec<Result<DiscrepancyResult>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let (zr, zc) = if r == 0 {
                (
                    DyadicDistribution::from_probs(&vec![1.0; matrix.rows()], grid_bits)?,
                    DyadicDistribution::from_probs(&vec![1.0; matrix.cols()], grid_bits)?,
                )
            } else {
                let mut rng = rng_from_seed(derive_seed(seed, "discprod", r as u64));
                (
                    DyadicDistribution::random(matrix.rows(), grid_bits, &mut rng)?,
                    DyadicDistribution::random(matrix.cols(), grid_bits, &mut rng)?,
                )
            };
            coordinate_descent(matrix, zr, zc)
        })
        .collect();
    let mut best: Option<DiscrepancyResult> = None;
    let mut evaluations = 0;
    for run in runs {
        let run = run?;
        evaluations += run.evaluations;
        if best.as_ref().map_or(true, |b| run.value < b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.evaluations = evaluations;
    Ok(best)
}

fn coordinate_descent(
    matrix: &SignMatrix,
    mut zr: DyadicDistribution,
    mut zc: DyadicDistribution,
) -> Result<DiscrepancyResult> {
    const MAX_EVALUATIONS: usize = 20_000;
    let k = zr.scale_exponent();
    let mut current = discrepancy_under(matrix, &zr, &zc)?;
    let mut evaluations = 1;
    let mut step = 1u64 << k.saturating_sub(2);
    while step >= 1 && evaluations < MAX_EVALUATIONS {
        let mut improved = false;
        for side in 0..2 {
            let n = if side == 0 { zr.len() } else { zc.len() };
            for from in 0..n {
                for to in 0..n {
                    if from == to {
                        continue;
                    }
                    let base = if side == 0 { &zr } else { &zc };
                    if base.weight(from) < step {
                        continue;
                    }
                    let mut w = base.weights().to_vec();
                    w[from] -= step;
                    w[to] += step;
                    let cand = DyadicDistribution::new(w, k)?;
                    let r = if side == 0 {
                        discrepancy_under(matrix, &cand, &zc)?
                    } else {
                        discrepancy_under(matrix, &zr, &cand)?
                    };
                    evaluations += 1;
                    if r.value < current.value {
                        current = r;
                        if side == 0 {
                            zr = cand;
                        } else {
                            zc = cand;
                        }
                        improved = true;
                    }
                    if evaluations >= MAX_EVALUATIONS {
                        break;
                    }
                }
            }
        }
        if !improved {
            step /= 2;
        }
    }
    current.evaluations = evaluations;
    Ok(current)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    /// Holds the row index.
    Alice,
    /// Holds the column index.
    Bob,
}

/// Deterministic 2-bit protocol. The last bit transmitted is the output.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolTree {
    pub first_speaker: Party,
    /// First speaker's input → bit.
    pub first_message: Vec<bool>,
    /// Second speaker's input → reply for received bit 0 and 1.
    pub second_message: Vec<[bool; 2]>,
}

#[inline]
fn bit_to_sign(b: bool) -> i8 {
    if b {
        -1
    } else {
        1
    }
}

impl ProtocolTree {
    pub fn bits_transmitted(&self) -> usize {
        2
    }

    pub fn output(&self, x: usize, y: usize) -> i8 {
        let (first, second) = match self.first_speaker {
            Party::Alice => (x, y),
            Party::Bob => (y, x),
        };
        let b = self.first_message[first];
        bit_to_sign(self.second_message[second][b as usize])
    }

    /// The full `rows × cols` output table.
    pub fn behavior(&self, rows: usize, cols: usize) -> Vec<i8> {
        let mut t = Vec::with_capacity(rows * cols);
        for x in 0..rows {
            for y in 0..cols {
                t.push(self.output(x, y));
            }
        }
        t
    }
}

/// Anything with an expected `±1` output per input pair.
pub trait Protocol {
    fn expected_output(&self, x: usize, y: usize) -> f64;
}

impl Protocol for ProtocolTree {
    fn expected_output(&self, x: usize, y: usize) -> f64 {
        self.output(x, y) as f64
    }
}

/// `E_ζ[π(x,y) A(x;y)]`, with protocol coins marginalized analytically.
pub fn correlation<P: Protocol + ?Sized>(
    matrix: &SignMatrix,
    protocol: &P,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
) -> f64 {
    let mut total = 0.0;
    for x in zeta_row.support() {
        let px = zeta_row.prob_f64(x);
        let mut row = 0.0;
        for y in zeta_col.support() {
            row += zeta_col.prob_f64(y) * protocol.expected_output(x, y) * matrix.get(x, y) as f64;
        }
        total += px * row;
    }
    total
}

/// Exact correlation of a deterministic protocol.
pub fn correlation_exact(
    matrix: &SignMatrix,
    protocol: &ProtocolTree,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
) -> Dyadic {
    let mut num: i128 = 0;
    for x in zeta_row.support() {
        for y in zeta_col.support() {
            num += (protocol.output(x, y) * matrix.get(x, y)) as i128
                * zeta_row.weight(x) as i128
                * zeta_col.weight(y) as i128;
        }
    }
    Dyadic::new(num, zeta_row.scale_exponent() + zeta_col.scale_exponent())
}

/// Rule for the coin flipped inside the witness rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InsideRule {
    /// Output `sign(p)` inside (a fair coin if `p = 0`); attains the
    /// rectangle's discrepancy exactly.
    SignOfBias,
    /// Output `+1` with probability `(p+1)/2`; correlation `|p| · disc`.
    ConditionalBias,
}

/// Randomized 2-bit protocol built from a rectangle `R' = B × C`.
///
/// Alice announces `x ∈ B`. Bob replies with a coin: biased when Alice said
/// yes and `y ∈ C`, fair otherwise. Bob's reply is the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleProtocol {
    pub rect: Rectangle,
    pub rule: InsideRule,
    /// Conditional bias `p = Σ_R ζA / ζ(R)`.
    pub bias: f64,
    pub rect_sum: Dyadic,
    pub rect_mass: Dyadic,
    /// Probability of `+1` inside the rectangle.
    pub inside_plus_prob: f64,
    in_rows: Vec<bool>,
    in_cols: Vec<bool>,
}

impl RectangleProtocol {
    /// Alice's message table: membership of her input in `B`.
    pub fn first_message(&self) -> &[bool] {
        &self.in_rows
    }

    /// `inside_plus_prob` rounded to the nearest multiple of `2^-16`.
    pub fn quantized_inside_prob(&self) -> Dyadic {
        let scale = (1u64 << COIN_QUANTIZATION_BITS) as f64;
        Dyadic::new((self.inside_plus_prob * scale).round() as i128, COIN_QUANTIZATION_BITS)
    }

    /// One run of the protocol with fair bits for the coins.
    pub fn sample_output(&self, x: usize, y: usize, rng: &mut impl RngCore) -> i8 {
        let alice_bit = self.in_rows[x];
        let slot = rng.gen_range(0..1u64 << COIN_QUANTIZATION_BITS) as i128;
        let threshold = if alice_bit && self.in_cols[y] {
            let q = self.quantized_inside_prob();
            q.numerator() << (COIN_QUANTIZATION_BITS - q.exponent())
        } else {
            1 << (COIN_QUANTIZATION_BITS - 1)
        };
        if slot < threshold {
            1
        } else {
            -1
        }
    }
}

impl Protocol for RectangleProtocol {
    fn expected_output(&self, x: usize, y: usize) -> f64 {
        if self.in_rows[x] && self.in_cols[y] {
            2.0 * self.inside_plus_prob - 1.0
        } else {
            0.0
        }
    }
}

/// Builds the membership protocol for a witness rectangle.
pub fn protocol_from_rectangle(
    matrix: &SignMatrix,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
    rect: &Rectangle,
    rule: InsideRule,
) -> Result<RectangleProtocol> {
    check_len(zeta_row, matrix.rows(), "zeta_row")?;
    check_len(zeta_col, matrix.cols(), "zeta_col")?;
    rect.validate(matrix)?;
    let mass = rectangle_mass(zeta_row, zeta_col, rect);
    if mass.is_zero() {
        return Err(LabError::DegenerateRectangle);
    }
    let sum = rectangle_sum(matrix, zeta_row, zeta_col, rect);
    let bias = sum.to_f64() / mass.to_f64();
    let inside_plus_prob = match rule {
        InsideRule::SignOfBias => (1.0 + sum.signum() as f64) / 2.0,
        InsideRule::ConditionalBias => (1.0 + bias) / 2.0,
    };
    let mut in_rows = vec![false; matrix.rows()];
    let mut in_cols = vec![false; matrix.cols()];
    rect.row_set.iter().for_each(|&r| in_rows[r] = true);
    rect.col_set.iter().for_each(|&c| in_cols[c] = true);
    Ok(RectangleProtocol {
        rect: rect.clone(),
        rule,
        bias,
        rect_sum: sum,
        rect_mass: mass,
        inside_plus_prob,
        in_rows,
        in_cols,
    })
}

fn check_dcc2_caps(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(LabError::InvalidInput("protocol inputs must be non-empty".into()));
    }
    for (what, n) in [("protocol rows", rows), ("protocol cols", cols)] {
        if n > DCC2_SIDE_CAP {
            return Err(LabError::SizeLimit {
                what,
                actual: n,
                limit: DCC2_SIDE_CAP,
            });
        }
    }
    Ok(())
}

/// Number of distinct behaviors yielded by [`enumerate_dcc2`].
///
/// Alice-first protocols compute exactly the tables with at most two distinct
/// rows, Bob-first ones those with at most two distinct columns.
pub fn dcc2_canonical_count(rows: usize, cols: usize) -> u128 {
    let two_rows = |r: u32, c: u32| -> u128 {
        let tc = 1u128 << c;
        tc + ((1u128 << (r - 1)) - 1) * tc * (tc - 1)
    };
    let (r, c) = (rows as u32, cols as u32);
    let alice = two_rows(r, c);
    let bob = two_rows(c, r);
    let both = (1u128 << c) + ((1u128 << (r - 1)) - 1) * (5 * (1u128 << c) - 8);
    alice + bob - both
}

/// Every deterministic 2-bit protocol on `rows × cols` inputs, once per
/// output behavior.
///
/// Canonical form: the first message maps input 0 to bit 0; a constant first
/// message carries identical reply tables; a non-constant one carries
/// distinct reply tables. Bob-first trees whose behavior an Alice-first tree
/// already produced are skipped.
pub fn enumerate_dcc2(rows: usize, cols: usize) -> Result<impl Iterator<Item = ProtocolTree> + Send> {
    check_dcc2_caps(rows, cols)?;
    let alice = speaker_trees(Party::Alice, rows, cols);
    let bob = speaker_trees(Party::Bob, cols, rows)
        .filter(move |t| distinct_rows(&t.behavior(rows, cols), cols) > 2);
    Ok(alice.chain(bob))
}

fn distinct_rows(table: &[i8], cols: usize) -> usize {
    let mut seen: Vec<&[i8]> = Vec::with_capacity(3);
    for row in table.chunks(cols) {
        if !seen.contains(&row) {
            seen.push(row);
            if seen.len() > 2 {
                break;
            }
        }
    }
    seen.len()
}

fn speaker_trees(
    speaker: Party,
    speaker_inputs: usize,
    listener_inputs: usize,
) -> impl Iterator<Item = ProtocolTree> + Send {
    let tables = 1u32 << listener_inputs;
    let to_bits = move |mask: u32, n: usize| -> Vec<bool> { (0..n).map(|i| mask >> i & 1 == 1).collect() };
    // First-message masks with bit 0 clear.
    (0u32..1 << (speaker_inputs - 1)).flat_map(move |half| {
        let first_mask = half << 1;
        let constant = first_mask == 0;
        (0..tables).flat_map(move |t0| {
            let t1_range: Box<dyn Iterator<Item = u32> + Send> = if constant {
                Box::new(std::iter::once(t0))
            } else {
                Box::new((0..tables).filter(move |&t1| t1 != t0))
            };
            t1_range.map(move |t1| {
                let r0 = to_bits(t0, listener_inputs);
                let r1 = to_bits(t1, listener_inputs);
                ProtocolTree {
                    first_speaker: speaker,
                    first_message: to_bits(first_mask, speaker_inputs),
                    second_message: r0.into_iter().zip(r1).map(|(a, b)| [a, b]).collect(),
                }
            })
        })
    })
}

/// `max_π |E_ζ[π A]|` over all 2-bit protocols without enumerating reply
/// tables: for a fixed first message the best replies pick, per listener
/// input and per received bit, the sign of the partial sum.
pub fn max_dcc2_correlation(
    matrix: &SignMatrix,
    zeta_row: &DyadicDistribution,
    zeta_col: &DyadicDistribution,
) -> Result<Dyadic> {
    check_len(zeta_row, matrix.rows(), "zeta_row")?;
    check_len(zeta_col, matrix.cols(), "zeta_col")?;
    for (what, n) in [("closed-form rows", matrix.rows()), ("closed-form cols", matrix.cols())] {
        if n > DCC2_CLOSED_FORM_CAP {
            return Err(LabError::SizeLimit {
                what,
                actual: n,
                limit: DCC2_CLOSED_FORM_CAP,
            });
        }
    }
    let a = best_partition(matrix, zeta_row.weights(), zeta_col.weights());
    let b = best_partition(&matrix.transpose(), zeta_col.weights(), zeta_row.weights());
    Ok(Dyadic::new(
        a.max(b),
        zeta_row.scale_exponent() + zeta_col.scale_exponent(),
    ))
}

fn best_partition(matrix: &SignMatrix, row_w: &[u64], col_w: &[u64]) -> i128 {
    let rows = matrix.rows();
    let cols = matrix.cols();
    // Weighted column sums of each row.
    let cell: Vec<i128> = (0..rows)
        .flat_map(|x| {
            (0..cols).map(move |y| row_w[x] as i128 * col_w[y] as i128 * matrix.get(x, y) as i128)
        })
        .collect();
    let total: Vec<i128> = (0..cols).map(|y| (0..rows).map(|x| cell[x * cols + y]).sum()).collect();
    (0u64..1 << (rows - 1))
        .into_par_iter()
        .map(|half| {
            let mask = half << 1;
            let mut part = vec![0i128; cols];
            for x in 0..rows {
                if mask >> x & 1 == 1 {
                    for y in 0..cols {
                        part[y] += cell[x * cols + y];
                    }
                }
            }
            part.iter()
                .zip(&total)
                .map(|(&p1, &t)| p1.abs() + (t - p1).abs())
                .sum::<i128>()
        })
        .max()
        .unwrap_or(0)
}

/// Exact `R₂` of `Eval(r, w) = A(f_r; x_w)`, in the factored form
/// `Σ_{f,g} μ(f) μ(g) (Σ_x ρ(x) f(x) g(x))²`.
pub fn r2_norm(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho: &DyadicDistribution,
) -> Result<Dyadic> {
    check_len(mu, matrix.rows(), "mu")?;
    check_len(rho, matrix.cols(), "rho")?;
    let cells_exp = mu.scale_exponent() + rho.scale_exponent();
    if cells_exp > R2_CELL_CAP.trailing_zeros() {
        return Err(LabError::SizeLimit {
            what: "expanded domain cells for R2",
            actual: 1usize.checked_shl(cells_exp).unwrap_or(usize::MAX),
            limit: R2_CELL_CAP,
        });
    }
    let support: Vec<usize> = mu.support().collect();
    let mut num: i128 = 0;
    for (a, &f) in support.iter().enumerate() {
        for &g in &support[a..] {
            let c: i128 = matrix
                .row(f)
                .iter()
                .zip(matrix.row(g))
                .zip(rho.weights())
                .map(|((&u, &v), &w)| (u * v) as i128 * w as i128)
                .sum();
            let term = mu.weight(f) as i128 * mu.weight(g) as i128 * c * c;
            num += if f == g { term } else { 2 * term };
        }
    }
    Ok(Dyadic::new(num, 2 * cells_exp))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrBoundMethod {
    /// Every canonical protocol was evaluated and the closed form agreed.
    Enumeration,
    /// Expanded domain beyond the enumeration cap; closed form only.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrBoundReport {
    pub expanded_rows: usize,
    pub expanded_cols: usize,
    pub max_correlation: Dyadic,
    pub max_correlation_f64: f64,
    pub r2: Dyadic,
    pub r2_f64: f64,
    /// `2^c · R₂^{1/4}` with `c = 2`.
    pub bound: f64,
    pub holds: bool,
    pub slack: f64,
    pub protocols_checked: u64,
    pub method: CorrBoundMethod,
}

/// Checks `max_{π ∈ DCC₂} |E[π · Eval]| <= 4 R₂^{1/4}` on the uniform
/// expanded domain of `(μ, ρ)`.
pub fn corr_bound_check(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho: &DyadicDistribution,
) -> Result<CorrBoundReport> {
    let r2 = r2_norm(matrix, mu, rho)?;
    let expanded = matrix.expand(mu, rho, R2_CELL_CAP)?;
    let er = expanded.rows();
    let ec = expanded.cols();
    let ur = DyadicDistribution::uniform(er)?;
    let uc = DyadicDistribution::uniform(ec)?;
    let closed = max_dcc2_correlation(&expanded, &ur, &uc)?;
    let (max_corr, checked, method) = if er <= DCC2_SIDE_CAP && ec <= DCC2_SIDE_CAP {
        let (best, count) = enumerate_dcc2(er, ec)?
            .par_bridge()
            .map(|p| (correlation_exact(&expanded, &p, &ur, &uc).abs(), 1u64))
            .reduce(|| (Dyadic::ZERO, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
        if best != closed {
            return Err(LabError::InvalidInput(format!(
                "enumerated max correlation {best} disagrees with closed form {closed}"
            )));
        }
        (best, count, CorrBoundMethod::Enumeration)
    } else {
        (closed, 0, CorrBoundMethod::ClosedForm)
    };
    let bound = 4.0 * r2.to_f64().powf(0.25);
    let m = max_corr.to_f64();
    Ok(CorrBoundReport {
        expanded_rows: er,
        expanded_cols: ec,
        max_correlation: max_corr,
        max_correlation_f64: m,
        r2,
        r2_f64: r2.to_f64(),
        bound,
        holds: m <= bound,
        slack: bound - m,
        protocols_checked: checked,
        method,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub sq_lower_bound: usize,
    pub disc_upper_bound: f64,
    /// `√(sq_lb / 2)`.
    pub left_side: f64,
    /// `1 / disc_ub`, a lower bound on `1 / disc^×`.
    pub inverse_disc: f64,
    /// `8 · sq_lb²`.
    pub right_side: f64,
    /// `√(sq_lb/2) <= 1/disc_ub`: sound under both approximations.
    pub left_certified: bool,
    /// `1/disc_ub <= 8 sq_lb²`: an indication only, neither bound certifies it.
    pub right_consistent: bool,
    pub notes: Vec<String>,
}

/// Checks the discrepancy/SQ-dimension sandwich in the directions that stay
/// sound when `sq_lb <= sq(A)` and `disc_ub >= disc^×(A)`.
pub fn sherstov_sandwich_check(sq_lb: usize, disc_ub: f64) -> SandwichReport {
    let left_side = (sq_lb as f64 / 2.0).sqrt();
    let inverse_disc = if disc_ub > 0.0 { 1.0 / disc_ub } else { f64::INFINITY };
    let right_side = 8.0 * (sq_lb as f64).powi(2);
    let left_certified = left_side <= inverse_disc;
    let right_consistent = inverse_disc <= right_side;
    let mut notes = vec![
        "left inequality: certificate (sq lower bound vs discrepancy upper bound)".to_string(),
        "right inequality: indication only".to_string(),
    ];
    if !right_consistent {
        notes.push(format!(
            "right side violated at the computed bounds: 1/disc_ub = {inverse_disc} > {right_side}"
        ));
    }
    SandwichReport {
        sq_lower_bound: sq_lb,
        disc_upper_bound: disc_ub,
        left_side,
        inverse_disc,
        right_side,
        left_certified,
        right_consistent,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_parity_class;
    use std::collections::HashSet;

    fn uni(n: usize) -> DyadicDistribution {
        DyadicDistribution::uniform(n).unwrap()
    }

    #[test]
    fn discrepancy_examples() {
        let ones = SignMatrix::filled(3, 2, 1).unwrap();
        let zr = DyadicDistribution::new(vec![1, 2, 1], 2).unwrap();
        let r = discrepancy_under(&ones, &zr, &uni(2)).unwrap();
        assert_eq!(r.value, Dyadic::ONE);
        assert_eq!(r.witness, Rectangle::full(3, 2));

        let h = make_parity_class(1).unwrap();
        let r = discrepancy_under(&h, &uni(2), &uni(2)).unwrap();
        assert_eq!(r.value, Dyadic::new(1, 1));
        assert_eq!(rectangle_sum(&h, &uni(2), &uni(2), &r.witness).abs(), r.value);

        let p = make_parity_class(2).unwrap();
        let r = discrepancy_under(&p, &uni(4), &uni(4)).unwrap();
        assert_eq!(r.value, Dyadic::new(5, 4));
    }

    #[test]
    fn discrepancy_cap() {
        let m = SignMatrix::filled(14, 13, 1).unwrap();
        assert!(matches!(
            discrepancy_under(&m, &uni(14), &DyadicDistribution::uniform(13).unwrap()),
            Err(LabError::SizeLimit { .. })
        ));
    }

    #[test]
    fn discprod_examples() {
        let one = SignMatrix::filled(1, 1, -1).unwrap();
        assert_eq!(discprod_search(&one, 4, 3, 0).unwrap().value, Dyadic::ONE);
        let ones = SignMatrix::filled(3, 3, 1).unwrap();
        assert_eq!(discprod_search(&ones, 4, 3, 0).unwrap().value, Dyadic::ONE);
        let p = make_parity_class(2).unwrap();
        let r = discprod_search(&p, DEFAULT_GRID_BITS, 4, 1).unwrap();
        assert!(r.value <= Dyadic::new(5, 4));
        let again = discrepancy_under(&p, &r.zeta_row, &r.zeta_col).unwrap();
        assert_eq!(again.value, r.value);
    }

    #[test]
    fn rectangle_protocol_examples() {
        let ones = SignMatrix::filled(2, 2, 1).unwrap();
        let full = Rectangle::full(2, 2);
        let p = protocol_from_rectangle(&ones, &uni(2), &uni(2), &full, InsideRule::ConditionalBias).unwrap();
        assert_eq!(p.bias, 1.0);
        assert_eq!(correlation(&ones, &p, &uni(2), &uni(2)), 1.0);

        let h = make_parity_class(1).unwrap();
        let row0 = Rectangle { row_set: vec![0], col_set: vec![0, 1] };
        for rule in [InsideRule::SignOfBias, InsideRule::ConditionalBias] {
            let p = protocol_from_rectangle(&h, &uni(2), &uni(2), &row0, rule).unwrap();
            assert_eq!(correlation(&h, &p, &uni(2), &uni(2)), 0.5);
        }

        let row1 = Rectangle { row_set: vec![1], col_set: vec![0, 1] };
        let p = protocol_from_rectangle(&h, &uni(2), &uni(2), &row1, InsideRule::ConditionalBias).unwrap();
        assert_eq!(p.bias, 0.0);
        assert_eq!(correlation(&h, &p, &uni(2), &uni(2)), 0.0);

        let empty = Rectangle { row_set: vec![0], col_set: vec![] };
        assert!(matches!(
            protocol_from_rectangle(&h, &uni(2), &uni(2), &empty, InsideRule::SignOfBias),
            Err(LabError::DegenerateRectangle)
        ));
    }

    #[test]
    fn sampled_protocol_matches_expectation() {
        let h = make_parity_class(1).unwrap();
        let rect = Rectangle { row_set: vec![0, 1], col_set: vec![0] };
        let p = protocol_from_rectangle(&h, &uni(2), &uni(2), &rect, InsideRule::ConditionalBias).unwrap();
        let mut rng = rng_from_seed(3);
        let n = 40_000;
        let mean: f64 = (0..n).map(|_| p.sample_output(0, 0, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - p.expected_output(0, 0)).abs() < 0.03);
        let mean_out: f64 = (0..n).map(|_| p.sample_output(0, 1, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!(mean_out.abs() < 0.03);
    }

    #[test]
    fn constant_protocol_on_zero_bias() {
        let h = make_parity_class(1).unwrap();
        let constant = ProtocolTree {
            first_speaker: Party::Alice,
            first_message: vec![false, false],
            second_message: vec![[false, false]; 2],
        };
        // Row 1 has zero bias under uniform columns.
        let zr = DyadicDistribution::point_mass(2, 1).unwrap();
        assert_eq!(correlation(&h, &constant, &zr, &uni(2)), 0.0);
        let ones = SignMatrix::filled(2, 2, 1).unwrap();
        assert_eq!(correlation(&ones, &constant, &uni(2), &uni(2)), 1.0);
    }

    #[test]
    fn enumeration_small_cases() {
        let one: Vec<_> = enumerate_dcc2(1, 1).unwrap().collect();
        assert_eq!(one.len(), 2);
        let behaviors: HashSet<Vec<i8>> = one.iter().map(|p| p.behavior(1, 1)).collect();
        assert_eq!(behaviors.len(), 2);

        let two: Vec<_> = enumerate_dcc2(2, 2).unwrap().collect();
        assert!(two.iter().all(|p| p.bits_transmitted() == 2));
        let behaviors: HashSet<Vec<i8>> = two.iter().map(|p| p.behavior(2, 2)).collect();
        assert_eq!(behaviors.len(), two.len());
        assert_eq!(two.len() as u128, dcc2_canonical_count(2, 2));
        assert_eq!(two.len(), 16);
        assert!(enumerate_dcc2(9, 2).is_err());
    }

    #[test]
    fn closed_form_count_matches_brute_force() {
        // Brute force over every table: count those with <= 2 distinct rows or columns.
        for (r, c) in [(1, 1), (1, 3), (2, 3), (3, 2), (3, 3), (2, 4)] {
            let mut count = 0u128;
            for mask in 0u32..1 << (r * c) {
                let t: Vec<i8> = (0..r * c).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                let tt: Vec<i8> = (0..c).flat_map(|y| (0..r).map(move |x| (x, y))).map(|(x, y)| t[x * c + y]).collect();
                if distinct_rows(&t, c) <= 2 || distinct_rows(&tt, r) <= 2 {
                    count += 1;
                }
            }
            assert_eq!(count, dcc2_canonical_count(r, c), "{r}x{c}");
            let streamed: Vec<_> = enumerate_dcc2(r, c).unwrap().collect();
            let unique: HashSet<Vec<i8>> = streamed.iter().map(|p| p.behavior(r, c)).collect();
            assert_eq!(streamed.len(), unique.len());
            assert_eq!(streamed.len() as u128, count);
        }
    }

    #[test]
    fn r2_examples() {
        let h = make_parity_class(1).unwrap();
        assert_eq!(r2_norm(&h, &uni(2), &uni(2)).unwrap(), Dyadic::new(1, 1));
        let pm = DyadicDistribution::point_mass(2, 1).unwrap();
        assert_eq!(r2_norm(&h, &pm, &uni(2)).unwrap(), Dyadic::ONE);
        let pair = SignMatrix::from_rows(&[vec![1, -1, 1], vec![-1, 1, -1]]).unwrap();
        let rho = DyadicDistribution::new(vec![1, 1, 2], 2).unwrap();
        assert_eq!(r2_norm(&pair, &uni(2), &rho).unwrap(), Dyadic::ONE);
        let big = DyadicDistribution::new(vec![1 << 11, 1 << 11], 12).unwrap();
        assert!(r2_norm(&h, &big, &big).is_err());
    }

    #[test]
    fn corr_bound_examples() {
        let ones = SignMatrix::filled(2, 2, 1).unwrap();
        let r = corr_bound_check(&ones, &uni(2), &uni(2)).unwrap();
        assert_eq!(r.max_correlation, Dyadic::ONE);
        assert_eq!(r.bound, 4.0);
        assert!(r.holds);
        let h = make_parity_class(1).unwrap();
        let r = corr_bound_check(&h, &uni(2), &uni(2)).unwrap();
        assert!(r.holds);
        assert!(r.max_correlation <= Dyadic::ONE);
        assert!((r.bound - 4.0 * 0.5f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(r.method, CorrBoundMethod::Enumeration);
    }

    #[test]
    fn sandwich_examples() {
        let r = sherstov_sandwich_check(1, 1.0);
        assert!(r.left_certified && r.right_consistent);
        let r = sherstov_sandwich_check(4, 0.25);
        assert!(r.left_certified);
        assert!((r.left_side - 2f64.sqrt()).abs() < 1e-15);
        let r = sherstov_sandwich_check(1, 0.01);
        assert!(!r.right_consistent);
    }
}
