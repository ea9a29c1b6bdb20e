//! Precision-limited mini-batch SGD.
//!
//! Each step averages per-sample squared-loss gradients, each clipped
//! entrywise to `[-1, 1]`, and rounds every entry to a multiple of the
//! precision `c`. Any rounding within `3c/4` of the clipped average is valid;
//! the default takes the nearest multiple, and a [`RoundingHook`] can pick
//! any other valid one. The SQ-driven variant lives in [`sq`].

pub mod model;
pub mod sq;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{LabeledSample, SourceDistribution};
use crate::error::{LabError, Result};
use crate::seeds::{derive_seed, rng_from_seed};

pub use model::{
    encode_column, input_dim_for, loss_gradient, squared_loss, Architecture, LinearTanh, Mlp, ParametricModel,
};

pub const DEFAULT_KAPPA: f64 = 1.0;
/// Shared by the regime classifier and the error term; see the module docs.
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_INIT_HALF_WIDTH: f64 = 0.5;
/// Float slack when validating a rounding against `3c/4`.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchMode {
    /// `b` i.i.d. draws from the source per step.
    Sampled { size: usize },
    /// The full support weighted by `ρ`, summed in column order.
    Exact,
}

/// Chooses a multiple of `c` for a clipped gradient entry.
pub trait RoundingHook: Send + Sync {
    fn round(&self, clipped: f64, c: f64, step: usize, coord: usize) -> f64;
    fn name(&self) -> String;
}

#[derive(Clone, Default)]
pub enum RoundingMode {
    #[default]
    Nearest,
    Hook(Arc<dyn RoundingHook>),
}

impl fmt::Debug for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl RoundingMode {
    pub fn label(&self) -> String {
        match self {
            RoundingMode::Nearest => "nearest".into(),
            RoundingMode::Hook(h) => format!("hook:{}", h.name()),
        }
    }
}

/// The valid multiple farther from the clipped value when one exists.
#[derive(Clone, Copy, Debug, Default)]
pub struct FarthestValid;

impl RoundingHook for FarthestValid {
    fn round(&self, clipped: f64, c: f64, _step: usize, _coord: usize) -> f64 {
        let valid = valid_roundings(clipped, c);
        *valid
            .iter()
            .max_by(|a, b| (*a - clipped).abs().total_cmp(&(*b - clipped).abs()))
            .expect("the nearest multiple is always valid")
    }

    fn name(&self) -> String {
        "farthest".into()
    }
}

/// A uniformly random valid multiple, keyed by `(seed, step, coord)`.
#[derive(Clone, Copy, Debug)]
pub struct RandomValid {
    pub seed: u64,
}

impl RoundingHook for RandomValid {
    fn round(&self, clipped: f64, c: f64, step: usize, coord: usize) -> f64 {
        let valid = valid_roundings(clipped, c);
        let key = derive_seed(self.seed, "rounding", ((step as u64) << 32) | coord as u64);
        valid[(key % valid.len() as u64) as usize]
    }

    fn name(&self) -> String {
        format!("random-valid({})", self.seed)
    }
}

/// The multiples of `c` within `3c/4` of `clipped` (one or two of them).
pub fn valid_roundings(clipped: f64, c: f64) -> Vec<f64> {
    let lo = (clipped / c).floor() * c;
    let hi = (clipped / c).ceil() * c;
    let mut out: Vec<f64> = [lo, hi]
        .into_iter()
        .filter(|r| (r - clipped).abs() <= 0.75 * c + ROUNDING_SLACK)
        .collect();
    out.dedup();
    out
}

/// Nearest multiple of `c`, half away from zero.
pub fn round_nearest(v: f64, c: f64) -> f64 {
    (v / c).round() * c
}

/// Checks that `rounded` is a multiple of `c` within `3c/4` of `clipped`.
pub fn validate_rounding(clipped: f64, rounded: f64, c: f64) -> Result<()> {
    let k = (rounded / c).round();
    if k * c != rounded || (rounded - clipped).abs() > 0.75 * c + ROUNDING_SLACK || rounded.abs() > 1.0 {
        return Err(LabError::InvalidRounding {
            clipped,
            rounded,
            precision: c,
        });
    }
    Ok(())
}

pub fn round_entry(clipped: f64, c: f64, mode: &RoundingMode, step: usize, coord: usize) -> Result<f64> {
    let r = match mode {
        RoundingMode::Nearest => round_nearest(clipped, c),
        RoundingMode::Hook(h) => h.round(clipped, c, step, coord),
    };
    validate_rounding(clipped, r, c)?;
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BsgdConfig {
    /// `T`.
    pub steps: usize,
    /// `c`; `1/c` must be an integer.
    pub precision: f64,
    pub batch: BatchMode,
    pub learning_rate: f64,
    /// Initial parameters are uniform on `[-h, h]`.
    pub init_half_width: f64,
    #[serde(skip)]
    pub rounding: RoundingMode,
    pub seed: u64,
}

impl BsgdConfig {
    pub fn new(steps: usize, precision: f64, batch: usize, learning_rate: f64, seed: u64) -> Self {
        BsgdConfig {
            steps,
            precision,
            batch: BatchMode::Sampled { size: batch },
            learning_rate,
            init_half_width: DEFAULT_INIT_HALF_WIDTH,
            rounding: RoundingMode::Nearest,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.precision;
        if !(c > 0.0 && c <= 1.0) {
            return Err(LabError::Precision(c));
        }
        let inv = 1.0 / c;
        if (inv - inv.round()).abs() > 1e-9 {
            return Err(LabError::Precision(c));
        }
        if self.steps == 0 {
            return Err(LabError::InvalidInput("T must be at least 1".into()));
        }
        if let BatchMode::Sampled { size: 0 } = self.batch {
            return Err(LabError::InvalidInput("batch size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(LabError::InvalidInput("learning rate must be finite and non-negative".into()));
        }
        if !(self.init_half_width >= 0.0 && self.init_half_width.is_finite()) {
            return Err(LabError::InvalidInput("init half-width must be finite".into()));
        }
        Ok(())
    }

    /// `b`, infinite for exact batches.
    pub fn batch_size(&self) -> f64 {
        match self.batch {
            BatchMode::Sampled { size } => size as f64,
            BatchMode::Exact => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientStep {
    /// Average of clipped per-sample gradients (or raw oracle responses).
    pub clipped: Vec<f64>,
    /// `g_t`.
    pub rounded: Vec<f64>,
}

/// Clipped per-sample gradients averaged over the batch, then rounded.
pub fn clipped_minibatch_gradient(
    model: &dyn ParametricModel,
    w: &[f64],
    inputs: &[Vec<f64>],
    batch: &[LabeledSample],
    c: f64,
    rounding: &RoundingMode,
    step: usize,
) -> Result<GradientStep> {
    if batch.is_empty() {
        return Err(LabError::InvalidInput("empty batch".into()));
    }
    let p = model.param_count();
    let mut acc = vec![0.0; p];
    let mut g = vec![0.0; p];
    for s in batch {
        loss_gradient(model, w, &inputs[s.col_index], s.label as f64, &mut g);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi.clamp(-1.0, 1.0);
        }
    }
    let b = batch.len() as f64;
    acc.iter_mut().for_each(|a| *a /= b);
    round_vector(acc, c, rounding, step)
}

/// `Σ_x ρ(x) [∇ℓ(x)]_1` over the support in column order.
pub fn exact_clipped_gradient(model: &dyn ParametricModel, w: &[f64], inputs: &[Vec<f64>], source: &SourceDistribution) -> Vec<f64> {
    let p = model.param_count();
    let rho = source.example_dist();
    let mut acc = vec![0.0; p];
    let mut g = vec![0.0; p];
    for x in rho.support() {
        loss_gradient(model, w, &inputs[x], source.label(x) as f64, &mut g);
        let px = rho.prob_f64(x);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += px * gi.clamp(-1.0, 1.0);
        }
    }
    acc
}

fn round_vector(clipped: Vec<f64>, c: f64, rounding: &RoundingMode, step: usize) -> Result<GradientStep> {
    let rounded = clipped
        .iter()
        .enumerate()
        .map(|(j, &v)| round_entry(v, c, rounding, step, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientStep { clipped, rounded })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Population losses at `w^{(t)}`, before the update.
    pub loss_sq: f64,
    pub loss_01: f64,
    pub clipped: Vec<f64>,
    /// `g_t / c`, exact integers.
    pub g_multiples: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsgdRun {
    pub architecture: String,
    pub param_count: usize,
    pub precision: f64,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    pub trajectory: Vec<StepRecord>,
    pub final_loss_sq: f64,
    pub final_loss_01: f64,
    /// Statistical queries issued; zero for sample-driven runs.
    pub query_count: u64,
    pub regime: RegimeReport,
    pub rounding: String,
}

/// Population squared and 0/1 losses; outputs are checked to lie in `[-1, 1]`.
pub fn population_losses(model: &dyn ParametricModel, w: &[f64], inputs: &[Vec<f64>], source: &SourceDistribution) -> (f64, f64) {
    let rho = source.example_dist();
    let mut sq = 0.0;
    let mut zo = 0.0;
    for x in rho.support() {
        let f = model.evaluate(w, &inputs[x]);
        assert!(f.abs() <= 1.0, "model output {f} outside [-1, 1]");
        let y = source.label(x) as f64;
        let px = rho.prob_f64(x);
        sq += px * squared_loss(f, y);
        let pred = if f >= 0.0 { 1.0 } else { -1.0 };
        if pred != y {
            zo += px;
        }
    }
    (sq, zo)
}

pub(crate) fn encode_source(source: &SourceDistribution, dim: usize) -> Vec<Vec<f64>> {
    (0..source.matrix().cols()).map(|x| encode_column(x, dim)).collect()
}

pub(crate) fn init_params(p: usize, config: &BsgdConfig) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(config.seed, "init", 0));
    let h = config.init_half_width;
    (0..p)
        .map(|_| if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 })
        .collect()
}

/// Shared update loop: `w ← w - γ g_t` with `g_t` from `next_gradient`.
pub(crate) fn train_loop<G>(
    model: &dyn ParametricModel,
    inputs: &[Vec<f64>],
    source: &SourceDistribution,
    config: &BsgdConfig,
    mut next_gradient: G,
) -> Result<(Vec<f64>, Vec<f64>, Vec<StepRecord>)>
where
    G: FnMut(usize, &[f64]) -> Result<GradientStep>,
{
    let init = init_params(model.param_count(), config);
    let mut w = init.clone();
    let mut trajectory = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        let (loss_sq, loss_01) = population_losses(model, &w, inputs, source);
        let step = next_gradient(t, &w)?;
        for (wi, gi) in w.iter_mut().zip(&step.rounded) {
            *wi -= config.learning_rate * gi;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Divergence { step: t });
        }
        trajectory.push(StepRecord {
            step: t,
            loss_sq,
            loss_01,
            g_multiples: step.rounded.iter().map(|g| (g / config.precision).round() as i64).collect(),
            clipped: step.clipped,
        });
    }
    Ok((init, w, trajectory))
}

/// `T` updates of bSGD on the source.
pub fn run_bsgd(arch: &Architecture, source: &SourceDistribution, config: &BsgdConfig) -> Result<BsgdRun> {
    config.validate()?;
    let dim = input_dim_for(source.matrix().cols());
    let model = arch.build(dim);
    let model = model.as_ref();
    let inputs = encode_source(source, dim);
    let c = config.precision;
    let mut batch_rng = rng_from_seed(derive_seed(config.seed, "batches", 0));
    let (init, w, trajectory) = train_loop(model, &inputs, source, config, |t, w| match config.batch {
        BatchMode::Sampled { size } => {
            let batch: Vec<LabeledSample> = (0..size).map(|_| source.draw(&mut batch_rng)).collect();
            clipped_minibatch_gradient(model, w, &inputs, &batch, c, &config.rounding, t)
        }
        BatchMode::Exact => round_vector(exact_clipped_gradient(model, w, &inputs, source), c, &config.rounding, t),
    })?;
    let (final_loss_sq, final_loss_01) = population_losses(model, &w, &inputs, source);
    Ok(BsgdRun {
        architecture: arch.label(),
        param_count: model.param_count(),
        precision: c,
        initial_params: init,
        final_params: w,
        trajectory,
        final_loss_sq,
        final_loss_01,
        query_count: 0,
        regime: precision_regime(config.steps, model.param_count(), config.batch_size(), c, DEFAULT_KAPPA, DEFAULT_DELTA),
        rounding: config.rounding.label(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Regime {
    SqSimulable,
    SamplePowered,
    Indeterminate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SqSimulable => "SQ-SIMULABLE",
            Regime::SamplePowered => "SAMPLE-POWERED",
            Regime::Indeterminate => "INDETERMINATE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `b c²`; `None` for full-support batches.
    pub bc2: Option<f64>,
    /// `κ ln(T p / δ)`.
    pub sq_threshold: f64,
    /// `1 / (8b)`.
    pub sample_threshold: f64,
    pub kappa: f64,
    pub delta: f64,
}

/// Classifies `(T, p, b, c)`: SQ-simulable when `b c² >= κ ln(Tp/δ)`,
/// sample-powered when `c < 1/(8b)`, indeterminate otherwise. The same `δ`
/// serves the threshold and the error term.
pub fn precision_regime(steps: usize, params: usize, batch: f64, c: f64, kappa: f64, delta: f64) -> RegimeReport {
    let bc2 = batch * c * c;
    let sq_threshold = kappa * ((steps as f64 * params as f64) / delta).ln();
    let sample_threshold = 1.0 / (8.0 * batch);
    let regime = if bc2 >= sq_threshold {
        Regime::SqSimulable
    } else if c < sample_threshold {
        Regime::SamplePowered
    } else {
        Regime::Indeterminate
    };
    RegimeReport {
        regime,
        bc2: bc2.is_finite().then_some(bc2),
        sq_threshold,
        sample_threshold,
        kappa,
        delta,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionFreeReport {
    /// Per source: mean squared and 0/1 population losses over repeats.
    pub mean_loss_sq: Vec<f64>,
    pub mean_loss_01: Vec<f64>,
    /// Max over sources of the mean squared loss: a lower bound on the
    /// supremum over all sources.
    pub error_sq: f64,
    pub error_01: f64,
    pub repeats: usize,
}

/// Worst mean loss over the supplied sources, with fresh initialization and
/// batches per repeat.
pub fn distribution_free_error(
    arch: &Architecture,
    sources: &[SourceDistribution],
    config: &BsgdConfig,
    repeats: usize,
    seed: u64,
) -> Result<DistributionFreeReport> {
    if sources.is_empty() || repeats == 0 {
        return Err(LabError::InvalidInput("need sources and at least one repeat".into()));
    }
    let runs: Vec<(usize, f64, f64)> = (0..sources.len() * repeats)
        .into_par_iter()
        .map(|i| {
            let cfg = BsgdConfig {
                seed: derive_seed(seed, "dfe", i as u64),
                ..config.clone()
            };
            let r = run_bsgd(arch, &sources[i / repeats], &cfg)?;
            Ok((i / repeats, r.final_loss_sq, r.final_loss_01))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sq = vec![0.0; sources.len()];
    let mut zo = vec![0.0; sources.len()];
    for (s, a, b) in runs {
        sq[s] += a / repeats as f64;
        zo[s] += b / repeats as f64;
    }
    Ok(DistributionFreeReport {
        error_sq: sq.iter().copied().fold(0.0, f64::max),
        error_01: zo.iter().copied().fold(0.0, f64::max),
        mean_loss_sq: sq,
        mean_loss_01: zo,
        repeats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstOfKReport {
    pub strategies: Vec<String>,
    pub final_loss_sq: Vec<f64>,
    pub worst_loss_sq: f64,
    pub worst_index: usize,
}

/// Runs `k` random valid rounding strategies (plus the farthest-valid one)
/// and reports the worst final loss. A heuristic for the supremum over
/// roundings, not the optimum adversary.
pub fn worst_of_k_roundings(
    arch: &Architecture,
    source: &SourceDistribution,
    config: &BsgdConfig,
    k: usize,
    seed: u64,
) -> Result<WorstOfKReport> {
    let mut hooks: Vec<Arc<dyn RoundingHook>> = vec![Arc::new(FarthestValid)];
    hooks.extend((0..k).map(|i| Arc::new(RandomValid { seed: derive_seed(seed, "adversary", i as u64) }) as Arc<dyn RoundingHook>));
    let results: Vec<(String, f64)> = hooks
        .par_iter()
        .map(|h| {
            let cfg = BsgdConfig {
                rounding: RoundingMode::Hook(h.clone()),
                ..config.clone()
            };
            Ok((h.name(), run_bsgd(arch, source, &cfg)?.final_loss_sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_index, worst) = results
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r.1 > acc.1 { (i, r.1) } else { acc });
    Ok(WorstOfKReport {
        strategies: results.iter().map(|r| r.0.clone()).collect(),
        final_loss_sq: results.iter().map(|r| r.1).collect(),
        worst_loss_sq: worst,
        worst_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DyadicDistribution, SignMatrix};

    struct Fixed(f64);
    impl RoundingHook for Fixed {
        fn round(&self, _: f64, _: f64, _: usize, _: usize) -> f64 {
            self.0
        }
        fn name(&self) -> String {
            "fixed".into()
        }
    }

    fn linear_source() -> SourceDistribution {
        // Label = first input coordinate.
        let m = SignMatrix::from_rows(&[vec![1, -1, 1, -1]]).unwrap();
        SourceDistribution::new(Arc::new(m), 0, DyadicDistribution::uniform(4).unwrap()).unwrap()
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_entry(0.30, 0.25, &RoundingMode::Nearest, 0, 0).unwrap(), 0.25);
        assert_eq!(round_entry(0.0, 0.25, &RoundingMode::Nearest, 0, 0).unwrap(), 0.0);
        for hook in [Arc::new(FarthestValid) as Arc<dyn RoundingHook>, Arc::new(RandomValid { seed: 3 })] {
            assert_eq!(round_entry(0.0, 0.25, &RoundingMode::Hook(hook), 0, 0).unwrap(), 0.0);
        }
        assert_eq!(
            round_entry(0.30, 0.25, &RoundingMode::Hook(Arc::new(FarthestValid)), 0, 0).unwrap(),
            0.25
        );
        assert_eq!(
            round_entry(0.40, 0.25, &RoundingMode::Hook(Arc::new(FarthestValid)), 0, 0).unwrap(),
            0.25
        );
        assert!(matches!(
            round_entry(0.30, 0.25, &RoundingMode::Hook(Arc::new(Fixed(0.75))), 0, 0),
            Err(LabError::InvalidRounding { .. })
        ));
        assert!(matches!(
            round_entry(0.30, 0.25, &RoundingMode::Hook(Arc::new(Fixed(0.3))), 0, 0),
            Err(LabError::InvalidRounding { .. })
        ));
    }

    #[test]
    fn clipping_before_rounding() {
        // One sample with a raw gradient far above 1 in the bias coordinate.
        let model = LinearTanh { dim: 1, bias: true };
        let inputs = vec![vec![1.0], vec![-1.0]];
        let w = vec![0.0, -5.0];
        let batch = [LabeledSample { col_index: 0, label: 1 }];
        let s = clipped_minibatch_gradient(&model, &w, &inputs, &batch, 0.25, &RoundingMode::Nearest, 0).unwrap();
        assert!(s.clipped.iter().all(|v| v.abs() <= 1.0));
        let big = LinearTanh { dim: 1, bias: false };
        // tanh'(0)·(0 - y)·x with |x| = 1 is exactly ±1.
        let s = clipped_minibatch_gradient(&big, &[0.0], &inputs, &batch, 0.25, &RoundingMode::Nearest, 0).unwrap();
        assert_eq!(s.rounded, vec![-1.0]);
    }

    #[test]
    fn zero_stepsize_keeps_init() {
        let src = linear_source();
        let cfg = BsgdConfig::new(5, 0.25, 8, 0.0, 1);
        let r = run_bsgd(&Architecture::LinearTanh { bias: false }, &src, &cfg).unwrap();
        assert_eq!(r.initial_params, r.final_params);
    }

    #[test]
    fn loss_decreases_early() {
        let src = linear_source();
        let mut cfg = BsgdConfig::new(6, 1.0 / 64.0, 64, 0.1, 2);
        cfg.init_half_width = 0.0;
        let r = run_bsgd(&Architecture::LinearTanh { bias: false }, &src, &cfg).unwrap();
        for pair in r.trajectory.windows(2) {
            assert!(pair[1].loss_sq < pair[0].loss_sq);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let src = linear_source();
        let cfg = BsgdConfig::new(10, 1.0 / 8.0, 16, 0.3, 9);
        let a = run_bsgd(&Architecture::Mlp { hidden: 3 }, &src, &cfg).unwrap();
        let b = run_bsgd(&Architecture::Mlp { hidden: 3 }, &src, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regime_examples() {
        assert_eq!(precision_regime(100, 10, 1000.0, 0.5, 1.0, 0.05).regime, Regime::SqSimulable);
        assert_eq!(precision_regime(100, 10, 100.0, 0.001, 1.0, 0.05).regime, Regime::SamplePowered);
        assert_eq!(precision_regime(100, 10, 1.0, 1.0, 1.0, 0.05).regime, Regime::Indeterminate);
    }

    #[test]
    fn config_validation() {
        assert!(matches!(BsgdConfig::new(1, 0.3, 1, 0.1, 0).validate(), Err(LabError::Precision(_))));
        assert!(BsgdConfig::new(0, 0.25, 1, 0.1, 0).validate().is_err());
        assert!(BsgdConfig::new(1, 0.25, 0, 0.1, 0).validate().is_err());
        assert!(BsgdConfig::new(1, 1.0, 1, 0.1, 0).validate().is_ok());
    }

    #[test]
    fn trivial_source_learned() {
        let m = SignMatrix::filled(1, 4, 1).unwrap();
        let src = SourceDistribution::new(Arc::new(m), 0, DyadicDistribution::uniform(4).unwrap()).unwrap();
        let cfg = BsgdConfig::new(200, 1.0 / 16.0, 16, 0.5, 0);
        let r = distribution_free_error(&Architecture::LinearTanh { bias: true }, &[src], &cfg, 2, 1).unwrap();
        assert_eq!(r.error_01, 0.0);
        assert!(r.error_sq < 0.05);
    }
}
