//! AdaBoost over random features and the empirical `adc` estimator.
//!
//! Round distributions live on the dyadic grid `2^-30`: after each accepted
//! feature the weights are multiplied by `exp(-α y f'(x))` in floating point
//! and quantized back by largest remainder, so every `ρ_t` sums to one
//! exactly. Features for round `t` are drawn from `μ^feat_{ρ_t}`.
//!
//! The round budget is `Z = ceil(ln(2/ε) / (2γ²))`. Its VC-dimension factor is
//! left out, as the feature class has none specified.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_len, DyadicDistribution, SignMatrix, SourceDistribution};
use crate::dyadic::Dyadic;
use crate::error::{LabError, Result};
use crate::features::{default_gamma_target, derandomized_feature, omniscient_bias, population_loss, Feature};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sqdim::{sqdim_exact, sqdim_greedy, EXACT_ROW_CAP};

/// Scale exponent of round distributions.
pub const ROUND_WEIGHT_BITS: u32 = 30;
/// Slack for the training-error bound, covering `2^-30` reweighting.
pub const BOUND_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_SAMPLES: u64 = 100_000;
pub const SQ_EXPONENT: f64 = 24.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedFeature {
    pub feature: Feature,
    pub alpha: f64,
    pub error: f64,
    /// `½ - error`.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub error: f64,
    pub alpha: f64,
    /// Loss of the combined model under the initial distribution.
    pub training_loss: f64,
    /// `Π 2√(err(1-err))` up to this round.
    pub bound: f64,
    /// Total draws so far.
    pub d_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostState {
    pub initial_weights: DyadicDistribution,
    pub round_weights: DyadicDistribution,
    pub accepted: Vec<AcceptedFeature>,
    /// `Z`; saturates at `u64::MAX`.
    pub pool_size: u64,
    pub pool_remaining: u64,
    pub d_used: u64,
    pub bound_product: f64,
    pub history: Vec<RoundRecord>,
    /// Set when a feature with zero weighted error ended the run.
    pub exact_feature: bool,
}

impl BoostState {
    pub fn new(example_dist: &DyadicDistribution, pool_size: u64) -> Result<Self> {
        let initial = if example_dist.scale_exponent() <= ROUND_WEIGHT_BITS {
            example_dist
                .rescaled(ROUND_WEIGHT_BITS)
                .expect("rescaling to a finer grid is exact")
        } else {
            DyadicDistribution::from_probs(&example_dist.probs_f64(), ROUND_WEIGHT_BITS)?
        };
        Ok(BoostState {
            round_weights: initial.clone(),
            initial_weights: initial,
            accepted: Vec::new(),
            pool_size,
            pool_remaining: pool_size,
            d_used: 0,
            bound_product: 1.0,
            history: Vec::new(),
            exact_feature: false,
        })
    }

    pub fn rounds(&self) -> usize {
        self.accepted.len()
    }

    pub fn model(&self) -> LinearFeatureModel {
        LinearFeatureModel::new(
            self.accepted.iter().map(|a| a.feature.clone()).collect(),
            self.accepted.iter().map(|a| a.alpha).collect(),
        )
    }

    /// Loss of the current model under the initial distribution.
    pub fn training_loss(&self, labels: &[i8]) -> f64 {
        let model = self.model();
        let w = &self.initial_weights;
        let num: u64 = w
            .support()
            .filter(|&x| model.predict(x) != labels[x])
            .map(|x| w.weight(x))
            .sum();
        num as f64 / (1u64 << w.scale_exponent()) as f64
    }
}

/// `sign(Σ α_i f_i(x))`, ties to `+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFeatureModel {
    pub features: Vec<Feature>,
    pub alphas: Vec<f64>,
    pub l1_norm: f64,
}

impl LinearFeatureModel {
    pub fn new(features: Vec<Feature>, alphas: Vec<f64>) -> Self {
        let l1_norm = alphas.iter().map(|a| a.abs()).sum();
        LinearFeatureModel {
            features,
            alphas,
            l1_norm,
        }
    }

    pub fn dimension(&self) -> usize {
        self.features.len()
    }

    pub fn score(&self, col: usize) -> f64 {
        self.features
            .iter()
            .zip(&self.alphas)
            .map(|(f, a)| a * f.value(col) as f64)
            .sum()
    }

    pub fn predict(&self, col: usize) -> i8 {
        if self.score(col) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn predictions(&self, cols: usize) -> Vec<i8> {
        (0..cols).map(|c| self.predict(c)).collect()
    }

    /// Exact population loss under the source.
    pub fn loss(&self, source: &SourceDistribution) -> Dyadic {
        population_loss(&self.predictions(source.matrix().cols()), source)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundOutcome {
    Accepted,
    Rejected,
    /// Zero weighted error: the candidate alone is exact.
    Exact,
}

/// Weighted error of `values` against `labels` under `w`.
pub fn weighted_error(values: &[i8], labels: &[i8], w: &DyadicDistribution) -> Dyadic {
    let num: i128 = w
        .support()
        .filter(|&x| values[x] != labels[x])
        .map(|x| w.weight(x) as i128)
        .sum();
    Dyadic::new(num, w.scale_exponent())
}

/// One AdaBoost step on `candidate`. Accepts when the weighted error is at
/// most `½ - gamma_accept`; a rejected candidate leaves the state unchanged.
/// A zero-error candidate replaces the model by itself alone.
pub fn adaboost_round(
    state: &mut BoostState,
    candidate: Feature,
    labels: &[i8],
    gamma_accept: f64,
) -> Result<RoundOutcome> {
    let w = &state.round_weights;
    if candidate.values.len() != w.len() || labels.len() != w.len() {
        return Err(LabError::InvalidInput("feature not total on the training columns".into()));
    }
    let err = weighted_error(&candidate.values, labels, w);
    let e = err.to_f64();
    if err.is_zero() {
        state.accepted = vec![AcceptedFeature {
            feature: candidate,
            alpha: 1.0,
            error: 0.0,
            gamma: 0.5,
        }];
        state.exact_feature = true;
        state.bound_product = 0.0;
        state.pool_remaining = state.pool_remaining.saturating_sub(1);
        let loss = state.training_loss(labels);
        state.history.push(RoundRecord {
            round: state.rounds(),
            error: 0.0,
            alpha: 1.0,
            training_loss: loss,
            bound: 0.0,
            d_used: state.d_used,
        });
        return Ok(RoundOutcome::Exact);
    }
    if e > 0.5 - gamma_accept || e >= 0.5 {
        return Ok(RoundOutcome::Rejected);
    }
    let alpha = 0.5 * ((1.0 - e) / e).ln();
    let up = ((1.0 - e) / e).sqrt();
    let down = (e / (1.0 - e)).sqrt();
    let masses: Vec<f64> = (0..w.len())
        .map(|x| {
            let m = w.weight(x) as f64;
            if candidate.value(x) == labels[x] {
                m * down
            } else {
                m * up
            }
        })
        .collect();
    state.round_weights = DyadicDistribution::from_probs(&masses, ROUND_WEIGHT_BITS)?;
    state.bound_product *= 2.0 * (e * (1.0 - e)).sqrt();
    state.accepted.push(AcceptedFeature {
        feature: candidate,
        alpha,
        error: e,
        gamma: 0.5 - e,
    });
    state.pool_remaining = state.pool_remaining.saturating_sub(1);
    let loss = state.training_loss(labels);
    state.history.push(RoundRecord {
        round: state.rounds(),
        error: e,
        alpha,
        training_loss: loss,
        bound: state.bound_product,
        d_used: state.d_used,
    });
    Ok(RoundOutcome::Accepted)
}

/// `ceil(ln(2/ε) / (2γ²))`, saturating.
pub fn pool_size(epsilon: f64, gamma: f64) -> u64 {
    let z = ((2.0 / epsilon).ln() / (2.0 * gamma * gamma)).ceil();
    if z.is_finite() && z < u64::MAX as f64 {
        z as u64
    } else {
        u64::MAX
    }
}

/// Runs AdaBoost with features from `next_feature(state, draw_index)` until
/// the training loss is at most `stop_loss` (with at least one feature), the
/// pool is empty, or `max_samples` draws were used.
pub fn run_adaboost<F>(
    example_dist: &DyadicDistribution,
    labels: &[i8],
    gamma_accept: f64,
    epsilon: f64,
    stop_loss: f64,
    max_samples: u64,
    l1_cap: Option<f64>,
    mut next_feature: F,
) -> Result<BoostState>
where
    F: FnMut(&BoostState, u64) -> Result<Feature>,
{
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(LabError::InvalidInput(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(gamma_accept > 0.0 && gamma_accept <= 0.5) {
        return Err(LabError::InvalidInput(format!("gamma_accept {gamma_accept} outside (0, ½]")));
    }
    let mut state = BoostState::new(example_dist, pool_size(epsilon, gamma_accept))?;
    loop {
        if state.exact_feature {
            break;
        }
        if state.rounds() > 0 && state.training_loss(labels) <= stop_loss {
            break;
        }
        if state.pool_remaining == 0 {
            break;
        }
        loop {
            if state.d_used >= max_samples {
                return Err(LabError::Budget {
                    budget: max_samples as usize,
                    rounds: state.rounds(),
                    partial: Box::new(state),
                });
            }
            let feature = next_feature(&state, state.d_used)?;
            state.d_used += 1;
            let before = state.clone();
            match adaboost_round(&mut state, feature, labels, gamma_accept)? {
                RoundOutcome::Rejected => continue,
                RoundOutcome::Exact => break,
                RoundOutcome::Accepted => {
                    if let Some(cap) = l1_cap {
                        if state.model().l1_norm > cap {
                            let d = state.d_used;
                            state = before;
                            state.d_used = d;
                            state.pool_remaining = 0;
                        }
                    }
                    break;
                }
            }
        }
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub epsilon: f64,
    /// Defaults to half the features' `γ_target`.
    pub gamma_accept: Option<f64>,
    pub max_samples: u64,
    /// Lower bound on the SQ dimension; computed from the source if absent.
    pub sq_dimension: Option<usize>,
    pub l1_cap: Option<f64>,
}

impl BoostConfig {
    pub fn new(epsilon: f64) -> Self {
        BoostConfig {
            epsilon,
            gamma_accept: None,
            max_samples: DEFAULT_MAX_SAMPLES,
            sq_dimension: None,
            l1_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcEstimate {
    /// Features sampled, accepted or not.
    pub d_used: u64,
    /// Features in the final combination.
    pub d_kept: usize,
    pub epsilon_achieved: f64,
    pub l1_norm: f64,
    /// `(1/ε) · sq^{24.01}`.
    pub reference_bound: f64,
    pub rounds: usize,
    pub pool_size: u64,
    pub gamma_accept: f64,
    pub sq_dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostOutcome {
    pub model: LinearFeatureModel,
    pub estimate: AdcEstimate,
    pub state: BoostState,
}

fn sq_lower_bound(matrix: &SignMatrix, rho: &DyadicDistribution, seed: u64) -> Result<usize> {
    Ok(if matrix.rows() <= EXACT_ROW_CAP {
        sqdim_exact(matrix, rho)?.dimension
    } else {
        sqdim_greedy(matrix, rho, 32, seed)?.dimension
    })
}

pub fn reference_bound(epsilon: f64, sq: usize) -> f64 {
    (sq as f64).powf(SQ_EXPONENT) / epsilon
}

/// Boosting where every round draws derandomized `Predict` features for the
/// current round distribution until one is accepted.
pub fn boost_from_mu_feat(
    source: &SourceDistribution,
    mu: &DyadicDistribution,
    config: &BoostConfig,
    seed: u64,
) -> Result<BoostOutcome> {
    let m = source.matrix();
    check_len(mu, m.rows(), "mu")?;
    let sq = match config.sq_dimension {
        Some(s) => s,
        None => sq_lower_bound(m, source.example_dist(), seed)?,
    };
    let gamma = config.gamma_accept.unwrap_or_else(|| default_gamma_target(sq) / 2.0);
    let labels = m.row(source.target_row()).to_vec();
    let target = source.target_row();
    let state = run_adaboost(
        source.example_dist(),
        &labels,
        gamma,
        config.epsilon,
        config.epsilon / 2.0,
        config.max_samples,
        config.l1_cap,
        |st, draw| {
            let rho_t = &st.round_weights;
            let bias = omniscient_bias(m, target, rho_t);
            derandomized_feature(rho_t, mu, m, &bias, ROUND_WEIGHT_BITS, derive_seed(seed, "boost_draw", draw))
        },
    )?;
    let model = state.model();
    let loss = model.loss(source).to_f64();
    let estimate = AdcEstimate {
        d_used: state.d_used,
        d_kept: model.dimension(),
        epsilon_achieved: loss,
        l1_norm: model.l1_norm,
        reference_bound: reference_bound(config.epsilon, sq),
        rounds: state.rounds(),
        pool_size: state.pool_size,
        gamma_accept: gamma,
        sq_dimension: sq,
    };
    Ok(BoostOutcome { model, estimate, state })
}

/// Weak learner returning, for any round distribution, a feature whose
/// weighted error is at most `½ - gamma` and as close to it as the weights
/// allow: it flips the labels of the heaviest points that still fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactGammaLearner {
    pub gamma: f64,
}

impl ExactGammaLearner {
    pub fn propose(&self, weights: &DyadicDistribution, labels: &[i8]) -> Feature {
        let budget = ((0.5 - self.gamma) * (1u64 << weights.scale_exponent()) as f64).floor() as u64;
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| weights.weight(b).cmp(&weights.weight(a)).then(a.cmp(&b)));
        let mut values = labels.to_vec();
        let mut used = 0u64;
        for x in order {
            let w = weights.weight(x);
            if w > 0 && used + w <= budget {
                used += w;
                values[x] = -values[x];
            }
        }
        Feature::explicit(values).expect("labels are ±1")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcTrial {
    pub target_row: usize,
    /// Draws used per candidate `ρ`.
    pub d_used: Vec<u64>,
    pub losses: Vec<f64>,
    pub max_d_used: u64,
    /// Every candidate reached loss `<= ε`.
    pub success: bool,
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovDiagnostic {
    pub mean_d: f64,
    /// `(2/ε) · E[D]`.
    pub threshold: f64,
    pub fraction_exceeding: f64,
    /// `ε / 2`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcReport {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: Vec<AdcTrial>,
    /// `(1-δ)`-quantile over targets of the max-over-`ρ` draw count.
    pub adc_estimate: u64,
    pub mean_max_d_used: f64,
    pub success_fraction: f64,
    pub markov: MarkovDiagnostic,
    pub sq_dimension: usize,
    pub reference_bound: f64,
    pub notes: Vec<String>,
}

/// Empirical `adc_{ε,δ}(μ)` over `trials` targets `f ∼ μ`. Seeds depend on
/// the trial and candidate only, so sweeps over `ε` share their draws.
pub fn adc_estimate(
    matrix: &SignMatrix,
    mu: &DyadicDistribution,
    rho_candidates: &[DyadicDistribution],
    epsilon: f64,
    delta: f64,
    trials: usize,
    config: &BoostConfig,
    seed: u64,
) -> Result<AdcReport> {
    check_len(mu, matrix.rows(), "mu")?;
    if rho_candidates.is_empty() || trials == 0 {
        return Err(LabError::InvalidInput("need candidates and at least one trial".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidInput(format!("delta {delta} outside (0, 1)")));
    }
    let sq = match config.sq_dimension {
        Some(s) => s,
        None => rho_candidates
            .iter()
            .map(|r| sq_lower_bound(matrix, r, seed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(1),
    };
    let cfg = BoostConfig {
        epsilon,
        sq_dimension: Some(sq),
        ..config.clone()
    };
    let arc = std::sync::Arc::new(matrix.clone());
    let out: Vec<AdcTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = mu.sample_index(&mut rng_from_seed(derive_seed(seed, "adc_target", t as u64)));
            let mut d_used = Vec::new();
            let mut losses = Vec::new();
            let mut exhausted = false;
            for (r, rho) in rho_candidates.iter().enumerate() {
                let src = SourceDistribution::new(arc.clone(), f, rho.clone())?;
                let s = derive_seed(seed, "adc_boost", (t * rho_candidates.len() + r) as u64);
                match boost_from_mu_feat(&src, mu, &cfg, s) {
                    Ok(o) => {
                        d_used.push(o.estimate.d_used);
                        losses.push(o.estimate.epsilon_achieved);
                    }
                    Err(LabError::Budget { partial, .. }) => {
                        exhausted = true;
                        d_used.push(partial.d_used);
                        losses.push(partial.model().loss(&src).to_f64());
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(AdcTrial {
                target_row: f,
                max_d_used: d_used.iter().copied().max().unwrap_or(0),
                success: losses.iter().all(|&l| l <= epsilon),
                d_used,
                losses,
                budget_exhausted: exhausted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut maxes: Vec<u64> = out.iter().map(|t| t.max_d_used).collect();
    maxes.sort_unstable();
    let q_index = (((1.0 - delta) * maxes.len() as f64).ceil() as usize).clamp(1, maxes.len()) - 1;
    let mean = maxes.iter().sum::<u64>() as f64 / maxes.len() as f64;
    let all_d: Vec<u64> = out.iter().flat_map(|t| t.d_used.iter().copied()).collect();
    let mean_d = all_d.iter().sum::<u64>() as f64 / all_d.len() as f64;
    let threshold = 2.0 / epsilon * mean_d;
    let exceeding = all_d.iter().filter(|&&d| d as f64 >= threshold).count() as f64 / all_d.len() as f64;
    let success = out.iter().filter(|t| t.success).count() as f64 / out.len() as f64;
    Ok(AdcReport {
        epsilon,
        delta,
        adc_estimate: maxes[q_index],
        mean_max_d_used: mean,
        success_fraction: success,
        markov: MarkovDiagnostic {
            mean_d,
            threshold,
            fraction_exceeding: exceeding,
            bound: epsilon / 2.0,
            holds: exceeding <= epsilon / 2.0,
        },
        sq_dimension: sq,
        reference_bound: reference_bound(epsilon, sq),
        notes: vec![
            format!("restricted to {} candidate example distributions", rho_candidates.len()),
            "round budget omits the VC-dimension factor".to_string(),
        ],
        trials: out,
    })
}
