//! The `Predict` weak learner and the fixed features obtained by freezing
//! its random string.
//!
//! `Predict(z)` draws `g ∼ μ` and a labeled example `(x, f(x))` and outputs
//! `g(z) g(x) f(x)`. Replacing the label factor `g(x) f(x)` by a Bernoulli sign
//! with the same law makes the predictor independent of the example oracle;
//! fixing the seed then yields a feature `z ↦ g(z) · s`.
//!
//! The Bernoulli bias is computed from the known source (verification
//! mode): `p_g = Pr_{x∼ρ}[g(x) ≠ f(x)]`, one bias per row.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{check_len, DyadicDistribution, SignMatrix, SourceDistribution};
use crate::dyadic::Dyadic;
use crate::error::{LabError, Result};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sqdim::{sqdim_exact, sqdim_greedy, EXACT_ROW_CAP};

pub const DEFAULT_DELTA: f64 = 0.05;
/// Cap on `|supp μ|² · |supp ρ|²` for literal tuple enumeration.
pub const EXACT_TUPLE_CAP: u64 = 1 << 24;
/// Seed spaces up to this many bits are enumerated exhaustively.
pub const EXHAUSTIVE_SEED_BITS: u32 = 20;

/// The random string of one `Predict` run, as raw slots of each draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictSeed {
    pub g_bits: u32,
    pub g_slot: u64,
    /// Example draw; the derandomized feature keeps it only as provenance.
    pub x_bits: u32,
    pub x_slot: u64,
    pub bern_bits: u32,
    pub bern_slot: u64,
}

impl PredictSeed {
    pub fn draw(mu: &DyadicDistribution, rho: &DyadicDistribution, bern_bits: u32, rng: &mut impl RngCore) -> Self {
        PredictSeed {
            g_bits: mu.scale_exponent(),
            g_slot: mu.draw_slot(rng),
            x_bits: rho.scale_exponent(),
            x_slot: rho.draw_slot(rng),
            bern_bits,
            bern_slot: draw_bits(bern_bits, rng),
        }
    }

    pub fn total_bits(&self) -> u32 {
        self.g_bits + self.x_bits + self.bern_bits
    }
}

fn draw_bits(bits: u32, rng: &mut impl RngCore) -> u64 {
    if bits == 0 {
        0
    } else {
        rng.next_u64() >> (64 - bits)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    Seeded {
        seed: PredictSeed,
        rho_id: String,
        row: usize,
        sign: i8,
    },
}

/// A `±1` function on every column of the domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub values: Vec<i8>,
    pub provenance: Provenance,
}

impl Feature {
    pub fn explicit(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(LabError::InvalidInput("feature values must be ±1".into()));
        }
        Ok(Feature {
            values,
            provenance: Provenance::Explicit,
        })
    }

    pub fn negated(&self) -> Feature {
        Feature {
            values: self.values.iter().map(|v| -v).collect(),
            provenance: Provenance::Explicit,
        }
    }

    #[inline]
    pub fn value(&self, col: usize) -> i8 {
        self.values[col]
    }
}

/// Short content id of a distribution, recorded in feature provenance.
pub fn distribution_id(d: &DyadicDistribution) -> String {
    let mut h = Sha256::new();
    h.update(d.scale_exponent().to_le_bytes());
    for w in d.weights() {
        h.update(w.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakAdvantageReport {
    pub zero_one_loss: f64,
    /// Present when the loss was computed exactly rather than estimated.
    pub exact_loss: Option<Dyadic>,
    pub advantage: f64,
    /// `None` for exact population losses.
    pub sample_count: Option<u64>,
    pub confidence_radius: f64,
}

impl WeakAdvantageReport {
    pub fn exact(loss: Dyadic) -> Self {
        let l = loss.to_f64();
        WeakAdvantageReport {
            zero_one_loss: l,
            exact_loss: Some(loss),
            advantage: 0.5 - l,
            sample_count: None,
            confidence_radius: 0.0,
        }
    }
}

/// `√(ln(2/δ) / (2n))`.
pub fn hoeffding_radius(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Exact `Pr_{x∼ρ}[h(x) ≠ f(x)]` under the source.
pub fn population_loss(values: &[i8], source: &SourceDistribution) -> Dyadic {
    let rho = source.example_dist();
    let num: i128 = rho
        .support()
        .filter(|&x| values[x] != source.label(x))
        .map(|x| rho.weight(x) as i128)
        .sum();
    Dyadic::new(num, rho.scale_exponent())
}

/// Hoeffding estimate of the loss from `samples` labeled examples.
pub fn estimate_loss(feature: &Feature, source: &SourceDistribution, samples: u64, seed: u64) -> WeakAdvantageReport {
    let mut rng = rng_from_seed(seed);
    let n = samples.max(1);
    let wrong = (0..n)
        .filter(|_| {
            let s = source.draw(&mut rng);
            feature.value(s.col_index) != s.label
        })
        .count();
    let l = wrong as f64 / n as f64;
    WeakAdvantageReport {
        zero_one_loss: l,
        exact_loss: None,
        advantage: 0.5 - l,
        sample_count: Some(n),
        confidence_radius: hoeffding_radius(n, DEFAULT_DELTA),
    }
}

fn predict_with_rng(source: &SourceDistribution, mu: &DyadicDistribution, z: usize, rng: &mut impl RngCore) -> i8 {
    let g = mu.sample_index(rng);
    let ex = source.draw(rng);
    let m = source.matrix();
    m.get(g, z) * m.get(g, ex.col_index) * ex.label
}

/// One run of `Predict` at `z`; deterministic for a fixed seed.
pub fn predict_once(source: &SourceDistribution, mu: &DyadicDistribution, z: usize, seed: u64) -> Result<i8> {
    check_len(mu, source.matrix().rows(), "mu")?;
    if z >= source.matrix().cols() {
        return Err(LabError::InvalidInput(format!("column {z} out of range")));
    }
    Ok(predict_with_rng(source, mu, z, &mut rng_from_seed(seed)))
}

/// Which target the success probability averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictTarget {
    /// The source's own target row.
    Source,
    /// `f ∼ μ`, drawn independently of `g`.
    Prior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub success_prob: f64,
    pub samples: u64,
    pub confidence_radius: f64,
}

/// Monte Carlo estimate of `Pr[Predict(z) = f(z)]` with `z ∼ ρ`.
pub fn predict_success_prob(
    source: &SourceDistribution,
    mu: &DyadicDistribution,
    target: PredictTarget,
    samples: u64,
    seed: u64,
) -> Result<SuccessEstimate> {
    check_len(mu, source.matrix().rows(), "mu")?;
    if samples == 0 {
        return Err(LabError::InvalidInput("samples must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let m = source.matrix();
    let rho = source.example_dist();
    let mut hits = 0u64;
    for _ in 0..samples {
        let f = match target {
            PredictTarget::Source => source.target_row(),
            PredictTarget::Prior => mu.sample_index(&mut rng),
        };
        let z = rho.sample_index(&mut rng);
        let g = mu.sample_index(&mut rng);
        let x = rho.sample_index(&mut rng);
        if m.get(g, z) * m.get(g, x) * m.get(f, x) == m.get(f, z) {
            hits += 1;
        }
    }
    Ok(SuccessEstimate {
        success_prob: hits as f64 / samples as f64,
        samples,
        confidence_radius: hoeffding_radius(samples, DEFAULT_DELTA),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictExact {
    /// `E[Predict(z) · f(z)]`.
    pub correlation: Dyadic,
    /// `(1 + correlation) / 2`.
    pub success_prob: Dyadic,
    pub tuples: u64,
}

/// Exact success probability by enumerating every `(f, g, x, z)` tuple with
/// its dyadic weight.
pub fn predict_success_exact(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho: &DyadicDistribution,
    target: Option<usize>,
) -> Result<PredictExact> {
    check_len(mu, matrix.rows(), "mu")?;
    check_len(rho, matrix.cols(), "rho")?;
    let fs: Vec<(usize, i128)> = match target {
        Some(t) if t >= matrix.rows() => {
            return Err(LabError::InvalidInput(format!("target row {t} out of range")))
        }
        Some(t) => vec![(t, 1)],
        None => mu.support().map(|f| (f, mu.weight(f) as i128)).collect(),
    };
    let gs: Vec<usize> = mu.support().collect();
    let xs: Vec<usize> = rho.support().collect();
    let tuples = fs.len() as u64 * gs.len() as u64 * (xs.len() as u64).pow(2);
    if tuples > EXACT_TUPLE_CAP {
        return Err(LabError::SizeLimit {
            what: "Predict tuples for exact enumeration",
            actual: tuples as usize,
            limit: EXACT_TUPLE_CAP as usize,
        });
    }
    let f_exp = if target.is_some() { 0 } else { mu.scale_exponent() };
    let exp = f_exp + mu.scale_exponent() + 2 * rho.scale_exponent();
    if exp > 120 {
        return Err(LabError::SizeLimit {
            what: "denominator exponent for exact Predict",
            actual: exp as usize,
            limit: 120,
        });
    }
    let mut num: i128 = 0;
    for &(f, wf) in &fs {
        for &g in &gs {
            let wg = mu.weight(g) as i128;
            for &x in &xs {
                let wx = rho.weight(x) as i128;
                let gx_fx = (matrix.get(g, x) * matrix.get(f, x)) as i128;
                for &z in &xs {
                    let out = matrix.get(g, z) as i128 * gx_fx;
                    num += wf * wg * wx * rho.weight(z) as i128 * out * matrix.get(f, z) as i128;
                }
            }
        }
    }
    let correlation = Dyadic::new(num, exp);
    Ok(PredictExact {
        correlation,
        success_prob: (Dyadic::ONE + correlation) * Dyadic::new(1, 1),
        tuples,
    })
}

/// Bias of the Bernoulli sign that replaces `g(x) f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BernoulliBias {
    Fixed(Dyadic),
    PerRow(Vec<Dyadic>),
}

impl BernoulliBias {
    pub fn for_row(&self, g: usize) -> Dyadic {
        match self {
            BernoulliBias::Fixed(p) => *p,
            BernoulliBias::PerRow(ps) => ps[g],
        }
    }

    /// Smallest slot width that represents every bias exactly.
    pub fn required_bits(&self) -> u32 {
        match self {
            BernoulliBias::Fixed(p) => p.exponent(),
            BernoulliBias::PerRow(ps) => ps.iter().map(|p| p.exponent()).max().unwrap_or(0),
        }
    }

    fn validate(&self, rows: usize, bern_bits: u32) -> Result<()> {
        let ps: Vec<Dyadic> = match self {
            BernoulliBias::Fixed(p) => vec![*p],
            BernoulliBias::PerRow(ps) => {
                if ps.len() != rows {
                    return Err(LabError::InvalidInput(format!(
                        "{} per-row biases for {rows} rows",
                        ps.len()
                    )));
                }
                ps.clone()
            }
        };
        for p in ps {
            if p < Dyadic::ZERO || p > Dyadic::ONE {
                return Err(LabError::InvalidInput(format!("bias {p} outside [0, 1]")));
            }
            if p.exponent() > bern_bits || bern_bits > 62 {
                return Err(LabError::Quantization {
                    value: p.to_f64(),
                    scale_bits: bern_bits,
                });
            }
        }
        Ok(())
    }
}

/// Per-row bias `p_g = Pr_{x∼ρ}[g(x) ≠ f(x)]`, the exact law of `g(x) f(x)`.
pub fn omniscient_bias(matrix: &SignMatrix, target: usize, rho: &DyadicDistribution) -> BernoulliBias {
    BernoulliBias::PerRow(
        (0..matrix.rows())
            .map(|g| {
                let num: i128 = rho
                    .support()
                    .filter(|&x| matrix.get(g, x) != matrix.get(target, x))
                    .map(|x| rho.weight(x) as i128)
                    .sum();
                Dyadic::new(num, rho.scale_exponent())
            })
            .collect(),
    )
}

/// The feature fixed by `seed`: `z ↦ g(z) · s`.
pub fn feature_from_seed(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho: &DyadicDistribution,
    bias: &BernoulliBias,
    seed: &PredictSeed,
) -> Result<Feature> {
    check_len(mu, matrix.rows(), "mu")?;
    check_len(rho, matrix.cols(), "rho")?;
    if seed.g_bits != mu.scale_exponent() || seed.x_bits != rho.scale_exponent() {
        return Err(LabError::InvalidInput("seed bit counts do not match μ and ρ".into()));
    }
    bias.validate(matrix.rows(), seed.bern_bits)?;
    let g = mu.index_of_slot(seed.g_slot);
    let sign = bernoulli_sign(bias.for_row(g), seed.bern_bits, seed.bern_slot);
    Ok(Feature {
        values: matrix.row(g).iter().map(|&v| v * sign).collect(),
        provenance: Provenance::Seeded {
            seed: *seed,
            rho_id: distribution_id(rho),
            row: g,
            sign,
        },
    })
}

/// `-1` on the first `p · 2^bits` slots, `+1` elsewhere.
fn bernoulli_sign(p: Dyadic, bits: u32, slot: u64) -> i8 {
    let threshold = p.numerator() << (bits - p.exponent());
    if (slot as i128) < threshold {
        -1
    } else {
        1
    }
}

/// Draws one seed and materializes the corresponding fixed feature.
pub fn derandomized_feature(
    rho: &DyadicDistribution,
    mu: &DyadicDistribution,
    matrix: &SignMatrix,
    bias: &BernoulliBias,
    bern_bits: u32,
    seed: u64,
) -> Result<Feature> {
    let mut rng = rng_from_seed(seed);
    let s = PredictSeed::draw(mu, rho, bern_bits, &mut rng);
    feature_from_seed(matrix, mu, rho, bias, &s)
}

/// `count` features from `μ^feat_ρ` for the source's `ρ`, each with its
/// exact population loss.
pub fn sample_mu_feat(
    source: &SourceDistribution,
    mu: &DyadicDistribution,
    count: usize,
    seed: u64,
) -> Result<Vec<(Feature, WeakAdvantageReport)>> {
    if count == 0 {
        return Err(LabError::InvalidInput("count must be at least 1".into()));
    }
    let m = source.matrix();
    let rho = source.example_dist();
    let bias = omniscient_bias(m, source.target_row(), rho);
    let bits = rho.scale_exponent();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let f = derandomized_feature(rho, mu, m, &bias, bits, derive_seed(seed, "mu_feat", i as u64))?;
            let loss = population_loss(&f.values, source);
            Ok((f, WeakAdvantageReport::exact(loss)))
        })
        .collect()
}

/// `(1/(8 sq²))⁴ / 16`.
pub fn default_gamma_target(sq: usize) -> f64 {
    (1.0 / (8.0 * (sq as f64).powi(2))).powi(4) / 16.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RflMethod {
    Exhaustive,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RflCell {
    pub weak_prob: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RflReport {
    /// Row index of `f` → candidate index → probability that a sampled
    /// feature has loss `<= ½ - γ`.
    pub per_f: std::collections::BTreeMap<usize, Vec<RflCell>>,
    pub mass_passing: f64,
    pub gamma_used: f64,
    pub prob_target: f64,
    /// Lower bound on the SQ dimension behind the default γ, when used.
    pub sq_used: Option<usize>,
    pub method: RflMethod,
    pub seeds_per_cell: u64,
    pub notes: Vec<String>,
}

/// Probability, over seeds, that the sampled feature is a `γ`-weak
/// approximator of the target.
fn weak_probability(
    source: &SourceDistribution,
    mu: &DyadicDistribution,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, RflMethod, u64)> {
    let m = source.matrix();
    let rho = source.example_dist();
    let bias = omniscient_bias(m, source.target_row(), rho);
    let bits = rho.scale_exponent();
    let threshold = 0.5 - gamma;
    // Loss of `s · g` depends only on (g, s).
    let loss_ok: Vec<[bool; 2]> = (0..m.rows())
        .map(|g| {
            let p = bias.for_row(g).to_f64();
            [p <= threshold, 1.0 - p <= threshold]
        })
        .collect();
    let total_bits = mu.scale_exponent() + 2 * bits;
    if total_bits <= EXHAUSTIVE_SEED_BITS {
        let mut good: u64 = 0;
        for g_slot in 0..1u64 << mu.scale_exponent() {
            let g = mu.index_of_slot(g_slot);
            for _x_slot in 0..1u64 << bits {
                for b in 0..1u64 << bits {
                    let s = bernoulli_sign(bias.for_row(g), bits, b);
                    if loss_ok[g][(s < 0) as usize] {
                        good += 1;
                    }
                }
            }
        }
        let n = 1u64 << total_bits;
        Ok((good as f64 / n as f64, RflMethod::Exhaustive, n))
    } else {
        let mut rng = rng_from_seed(seed);
        let n = trials.max(1);
        let mut good = 0u64;
        for _ in 0..n {
            let s = PredictSeed::draw(mu, rho, bits, &mut rng);
            let g = mu.index_of_slot(s.g_slot);
            let sign = bernoulli_sign(bias.for_row(g), bits, s.bern_slot);
            if loss_ok[g][(sign < 0) as usize] {
                good += 1;
            }
        }
        Ok((good as f64 / n as f64, RflMethod::MonteCarlo, n))
    }
}

/// For every `f` in the support of `μ` and every candidate `ρ`, the
/// probability that a feature from `μ^feat_ρ` is `γ`-weak; a target passes
/// when every candidate reaches `prob_target`.
pub fn rfl_verify(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho_candidates: &[DyadicDistribution],
    gamma_target: Option<f64>,
    prob_target: Option<f64>,
    trials: u64,
    seed: u64,
) -> Result<RflReport> {
    check_len(mu, matrix.rows(), "mu")?;
    if rho_candidates.is_empty() {
        return Err(LabError::InvalidInput("no candidate distributions".into()));
    }
    for rho in rho_candidates {
        check_len(rho, matrix.cols(), "rho candidate")?;
    }
    let mut notes = vec![format!(
        "restricted to {} candidate example distributions",
        rho_candidates.len()
    )];
    let (gamma, sq_used) = match gamma_target {
        Some(g) => (g, None),
        None => {
            let sq = rho_candidates
                .iter()
                .map(|rho| {
                    if matrix.rows() <= EXACT_ROW_CAP {
                        sqdim_exact(matrix, rho)
                    } else {
                        sqdim_greedy(matrix, rho, 32, seed)
                    }
                    .map(|r| r.dimension)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max()
                .unwrap_or(1);
            notes.push(format!("γ from the default constant policy with sq = {sq}"));
            (default_gamma_target(sq), Some(sq))
        }
    };
    let prob_target = prob_target.unwrap_or(gamma);
    let matrix_arc = std::sync::Arc::new(matrix.clone());
    let fs: Vec<usize> = mu.support().collect();
    let rows: Vec<(usize, Vec<(f64, RflMethod, u64)>)> = fs
        .par_iter()
        .map(|&f| {
            let cells = rho_candidates
                .iter()
                .enumerate()
                .map(|(ri, rho)| {
                    let src = SourceDistribution::new(matrix_arc.clone(), f, rho.clone())?;
                    weak_probability(&src, mu, gamma, trials, derive_seed(seed, "rfl", (f * rho_candidates.len() + ri) as u64))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((f, cells))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_f = std::collections::BTreeMap::new();
    let mut mass = 0.0;
    let mut method = RflMethod::Exhaustive;
    let mut seeds_per_cell = 0;
    for (f, cells) in rows {
        let cells: Vec<RflCell> = cells
            .into_iter()
            .map(|(p, m, n)| {
                if m == RflMethod::MonteCarlo {
                    method = RflMethod::MonteCarlo;
                }
                seeds_per_cell = seeds_per_cell.max(n);
                RflCell {
                    weak_prob: p,
                    passes: p >= prob_target,
                }
            })
            .collect();
        if cells.iter().all(|c| c.passes) {
            mass += mu.prob_f64(f);
        }
        per_f.insert(f, cells);
    }
    Ok(RflReport {
        per_f,
        mass_passing: mass,
        gamma_used: gamma,
        prob_target,
        sq_used,
        method,
        seeds_per_cell,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    /// Mean per-seed success probability.
    pub mean_success: f64,
    pub c: f64,
    /// `Pr_r[X_r <= c·p]`.
    pub lhs: f64,
    /// `(1 - p) / (1 - c·p)`.
    pub rhs: f64,
    pub holds: bool,
    pub seeds: u64,
}

/// Enumerates every seed of the derandomized predictor for the source and
/// checks `Pr[X <= cp] <= (1-p)/(1-cp)` for the per-seed success `X`.
pub fn averaging_check(source: &SourceDistribution, mu: &DyadicDistribution, c: f64) -> Result<AveragingReport> {
    if !(0.0..1.0).contains(&c) {
        return Err(LabError::InvalidInput(format!("c = {c} outside [0, 1)")));
    }
    let m = source.matrix();
    check_len(mu, m.rows(), "mu")?;
    let rho = source.example_dist();
    let bits = rho.scale_exponent();
    let total_bits = mu.scale_exponent() + 2 * bits;
    if total_bits > EXHAUSTIVE_SEED_BITS {
        return Err(LabError::SizeLimit {
            what: "seed bits for the averaging check",
            actual: total_bits as usize,
            limit: EXHAUSTIVE_SEED_BITS as usize,
        });
    }
    let bias = omniscient_bias(m, source.target_row(), rho);
    let mut xs = Vec::with_capacity(1 << total_bits);
    for g_slot in 0..1u64 << mu.scale_exponent() {
        let g = mu.index_of_slot(g_slot);
        let loss = population_loss(m.row(g), source).to_f64();
        for _x in 0..1u64 << bits {
            for b in 0..1u64 << bits {
                let s = bernoulli_sign(bias.for_row(g), bits, b);
                xs.push(if s > 0 { 1.0 - loss } else { loss });
            }
        }
    }
    let n = xs.len() as f64;
    let p = xs.iter().sum::<f64>() / n;
    let lhs = xs.iter().filter(|&&x| x <= c * p).count() as f64 / n;
    let rhs = (1.0 - p) / (1.0 - c * p);
    Ok(AveragingReport {
        mean_success: p,
        c,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
        seeds: xs.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::r2_norm;
    use crate::domain::make_parity_class;
    use std::sync::Arc;

    fn parity_source(n: u32, target: usize) -> SourceDistribution {
        let m = make_parity_class(n).unwrap();
        let u = DyadicDistribution::uniform(m.cols()).unwrap();
        SourceDistribution::new(Arc::new(m), target, u).unwrap()
    }

    #[test]
    fn predict_point_masses() {
        let src = parity_source(2, 3);
        let on_f = DyadicDistribution::point_mass(4, 3).unwrap();
        for z in 0..4 {
            for seed in 0..8 {
                assert_eq!(predict_once(&src, &on_f, z, seed).unwrap(), src.label(z));
            }
        }
        // A row and its negation: g(z)·g(x)·f(x) with g = -f still gives f(z).
        let m = SignMatrix::from_rows(&[vec![1, -1, 1, 1], vec![-1, 1, -1, -1]]).unwrap();
        let src = SourceDistribution::new(Arc::new(m), 0, DyadicDistribution::uniform(4).unwrap()).unwrap();
        let neg = DyadicDistribution::point_mass(2, 1).unwrap();
        for z in 0..4 {
            assert_eq!(predict_once(&src, &neg, z, 11).unwrap(), src.label(z));
        }
        assert_eq!(predict_once(&src, &neg, 2, 5).unwrap(), predict_once(&src, &neg, 2, 5).unwrap());
    }

    #[test]
    fn exact_success_examples() {
        let m = make_parity_class(1).unwrap();
        let u = DyadicDistribution::uniform(2).unwrap();
        let r = predict_success_exact(&m, &u, &u, None).unwrap();
        assert_eq!(r.correlation, Dyadic::new(1, 1));
        assert_eq!(r.success_prob, Dyadic::new(3, 2));
        assert_eq!(r.correlation, r2_norm(&m, &u, &u).unwrap());
        let pm = DyadicDistribution::point_mass(2, 0).unwrap();
        assert_eq!(predict_success_exact(&m, &pm, &u, None).unwrap().success_prob, Dyadic::ONE);
        assert_eq!(predict_success_exact(&m, &pm, &u, Some(0)).unwrap().success_prob, Dyadic::ONE);
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let src = parity_source(2, 1);
        let mu = DyadicDistribution::uniform(4).unwrap();
        let exact = predict_success_exact(src.matrix(), &mu, src.example_dist(), Some(1)).unwrap();
        for seed in 0..3 {
            let est = predict_success_prob(&src, &mu, PredictTarget::Source, 20_000, seed).unwrap();
            assert!((est.success_prob - exact.success_prob.to_f64()).abs() <= 4.0 * est.confidence_radius);
        }
    }

    #[test]
    fn derandomized_feature_signs() {
        let m = make_parity_class(2).unwrap();
        let mu = DyadicDistribution::uniform(4).unwrap();
        let rho = DyadicDistribution::uniform(4).unwrap();
        let plus = BernoulliBias::Fixed(Dyadic::ZERO);
        let minus = BernoulliBias::Fixed(Dyadic::ONE);
        for seed in 0..16 {
            let f = derandomized_feature(&rho, &mu, &m, &plus, 2, seed).unwrap();
            let Provenance::Seeded { row, sign, .. } = f.provenance else { panic!() };
            assert_eq!(sign, 1);
            assert_eq!(f.values, m.row(row));
            let f = derandomized_feature(&rho, &mu, &m, &minus, 2, seed).unwrap();
            let Provenance::Seeded { row, .. } = f.provenance else { panic!() };
            assert_eq!(f.values, m.negated().row(row));
        }
        let coarse = BernoulliBias::Fixed(Dyadic::new(1, 5));
        assert!(matches!(
            derandomized_feature(&rho, &mu, &m, &coarse, 2, 0),
            Err(LabError::Quantization { .. })
        ));
    }

    #[test]
    fn mu_feat_point_mass() {
        let src = parity_source(2, 2);
        let pm = DyadicDistribution::point_mass(4, 2).unwrap();
        let feats = sample_mu_feat(&src, &pm, 16, 4).unwrap();
        for (f, rep) in &feats {
            assert_eq!(f.values, src.matrix().row(2));
            assert_eq!(rep.zero_one_loss, 0.0);
            let neg = population_loss(&f.negated().values, &src);
            assert_eq!(neg + rep.exact_loss.unwrap(), Dyadic::ONE);
        }
    }

    #[test]
    fn rfl_parity() {
        let m = make_parity_class(2).unwrap();
        let u = DyadicDistribution::uniform(4).unwrap();
        let r = rfl_verify(&m, &u, &[u.clone()], None, None, 0, 0).unwrap();
        assert_eq!(r.method, RflMethod::Exhaustive);
        assert_eq!(r.sq_used, Some(4));
        assert!(r.mass_passing >= 0.99);
        let zero = rfl_verify(&m, &u, &[u.clone()], Some(0.0), None, 0, 0).unwrap();
        assert_eq!(zero.mass_passing, 1.0);
        let lo = rfl_verify(&m, &u, &[u.clone()], Some(0.1), Some(0.2), 0, 0).unwrap();
        let hi = rfl_verify(&m, &u, &[u.clone()], Some(0.4), Some(0.2), 0, 0).unwrap();
        assert!(hi.mass_passing <= lo.mass_passing);
    }

    #[test]
    fn averaging_holds_on_parity() {
        let src = parity_source(2, 1);
        let mu = DyadicDistribution::uniform(4).unwrap();
        for c in [0.0, 0.25, 0.5, 0.9] {
            let r = averaging_check(&src, &mu, c).unwrap();
            assert!(r.holds, "{r:?}");
            assert!((r.mean_success - 0.625).abs() < 1e-12);
        }
    }
}
