//! bSGD driven by statistical queries.
//!
//! Every coordinate of every clipped expected gradient is asked as one query
//! `φ(x, y) = [∂_j ℓ(w; x, y)]_1` with tolerance `τ = c/8`; the raw response
//! is rounded to a multiple of `c` exactly as a sampled gradient would be.
//! An honest exact oracle sums over the support in column order, which makes
//! the run bit-identical to bSGD with exact batches.

use std::cell::RefCell;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    encode_source, input_dim_for, precision_regime, round_vector, train_loop, Architecture, BsgdConfig, BsgdRun,
    GradientStep, ParametricModel, DEFAULT_DELTA, DEFAULT_KAPPA,
};
use crate::domain::SourceDistribution;
use crate::error::{LabError, Result};
use crate::seeds::rng_from_seed;

/// A query: a bounded function of `(column, label)`.
pub type SqQuery<'a> = dyn Fn(usize, i8) -> f64 + 'a;

pub trait SqOracle {
    fn tolerance(&self) -> f64;
    fn answer(&mut self, query: &SqQuery<'_>) -> f64;
}

/// `E_{D}[φ]` summed over the support in column order.
pub fn exact_expectation(source: &SourceDistribution, query: &SqQuery<'_>) -> f64 {
    let rho = source.example_dist();
    let mut acc = 0.0;
    for x in rho.support() {
        acc += rho.prob_f64(x) * query(x, source.label(x));
    }
    acc
}

/// Answers every query with its exact expectation.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    pub source: SourceDistribution,
    pub tolerance: f64,
}

impl SqOracle for ExactOracle {
    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn answer(&mut self, query: &SqQuery<'_>) -> f64 {
        exact_expectation(&self.source, query)
    }
}

/// Exact expectation shifted by a fixed amount, clamped to `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct ShiftedOracle {
    pub source: SourceDistribution,
    pub tolerance: f64,
    pub shift: f64,
}

impl SqOracle for ShiftedOracle {
    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn answer(&mut self, query: &SqQuery<'_>) -> f64 {
        (exact_expectation(&self.source, query) + self.shift).clamp(-1.0, 1.0)
    }
}

/// Empirical mean over fresh samples; may break the tolerance contract.
pub struct SampleOracle<R: RngCore> {
    pub source: SourceDistribution,
    pub tolerance: f64,
    pub samples: usize,
    pub rng: R,
}

impl<R: RngCore> SqOracle for SampleOracle<R> {
    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn answer(&mut self, query: &SqQuery<'_>) -> f64 {
        let n = self.samples.max(1);
        let mut acc = 0.0;
        for _ in 0..n {
            let s = self.source.draw(&mut self.rng);
            acc += query(s.col_index, s.label);
        }
        acc / n as f64
    }
}

impl SampleOracle<rand_chacha::ChaCha8Rng> {
    pub fn seeded(source: SourceDistribution, tolerance: f64, samples: usize, seed: u64) -> Self {
        SampleOracle {
            source,
            tolerance,
            samples,
            rng: rng_from_seed(seed),
        }
    }
}

/// Runs bSGD with one query per coordinate per step. With
/// `contract_source`, every response is checked against the exact
/// expectation and a violation of `τ` is an error.
pub fn run_bsgd_via_sq(
    arch: &Architecture,
    source: &SourceDistribution,
    oracle: &mut dyn SqOracle,
    config: &BsgdConfig,
    contract_source: Option<&SourceDistribution>,
) -> Result<BsgdRun> {
    config.validate()?;
    let c = config.precision;
    let tau = oracle.tolerance();
    if tau > c / 8.0 + 1e-15 {
        return Err(LabError::InvalidInput(format!("oracle tolerance {tau} exceeds c/8")));
    }
    let dim = input_dim_for(source.matrix().cols());
    let model = arch.build(dim);
    let model: &dyn ParametricModel = model.as_ref();
    let inputs = encode_source(source, dim);
    let p = model.param_count();
    let cols = source.matrix().cols();
    let mut queries = 0u64;
    let inputs_ref = &inputs;
    let (init, w, trajectory) = train_loop(model, &inputs, source, config, |t, w| {
        // The learner's own forward pass, computed once per column.
        let cache: RefCell<Vec<Option<(f64, Vec<f64>)>>> = RefCell::new(vec![None; cols]);
        let mut responses = Vec::with_capacity(p);
        for j in 0..p {
            let query = |x: usize, y: i8| -> f64 {
                let mut cache = cache.borrow_mut();
                let entry = cache[x].get_or_insert_with(|| {
                    let mut g = vec![0.0; p];
                    let f = model.value_and_grad(w, &inputs_ref[x], &mut g);
                    (f, g)
                });
                ((entry.0 - y as f64) * entry.1[j]).clamp(-1.0, 1.0)
            };
            let v = oracle.answer(&query);
            queries += 1;
            if let Some(src) = contract_source {
                let expected = exact_expectation(src, &query);
                if (v - expected).abs() > tau + 1e-12 {
                    return Err(LabError::OracleContract {
                        expected,
                        response: v,
                        tolerance: tau,
                    });
                }
            }
            responses.push(v);
        }
        let step: GradientStep = round_vector(responses, c, &config.rounding, t)?;
        Ok(step)
    })?;
    let (final_loss_sq, final_loss_01) = super::population_losses(model, &w, &inputs, source);
    Ok(BsgdRun {
        architecture: arch.label(),
        param_count: p,
        precision: c,
        initial_params: init,
        final_params: w,
        trajectory,
        final_loss_sq,
        final_loss_01,
        query_count: queries,
        regime: precision_regime(config.steps, p, config.batch_size(), c, DEFAULT_KAPPA, DEFAULT_DELTA),
        rounding: config.rounding.label(),
    })
}

/// Number of `±1` digits for precision `c = 2^-t`.
pub fn digit_count(c: f64) -> Result<u32> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(LabError::Precision(c));
    }
    let t = (1.0 / c).log2().round();
    if 2f64.powi(-(t as i32)) != c || t < 1.0 {
        return Err(LabError::Precision(c));
    }
    Ok(t as u32)
}

/// Signed digits `d_i ∈ {±1}` with `|v - Σ 2^-i d_i| <= 2^-t` for `v ∈ [-1, 1]`.
pub fn signed_digits(v: f64, t: u32) -> Vec<i8> {
    let mut r = v;
    (1..=t)
        .map(|i| {
            let d: i8 = if r >= 0.0 { 1 } else { -1 };
            r -= d as f64 * 2f64.powi(-(i as i32));
            d
        })
        .collect()
}

/// `Σ 2^-i r_i`, linear in the responses.
pub fn reconstruct(responses: &[f64]) -> f64 {
    responses
        .iter()
        .enumerate()
        .map(|(i, r)| r * 2f64.powi(-(i as i32 + 1)))
        .sum()
}

/// One `±1`-valued query: digit `index` of the original query's value.
#[derive(Clone)]
pub struct BitQuery {
    pub index: usize,
    pub digits: u32,
    inner: Arc<dyn Fn(usize, i8) -> f64 + Send + Sync>,
}

impl BitQuery {
    pub fn eval(&self, x: usize, y: i8) -> f64 {
        signed_digits(self.inner.as_ref()(x, y), self.digits)[self.index] as f64
    }
}

/// Splits a `[-1, 1]` query into `log₂(1/c)` Boolean queries whose
/// responses reconstruct the original expectation within `c`.
pub fn bit_decompose_query(
    query: Arc<dyn Fn(usize, i8) -> f64 + Send + Sync>,
    c: f64,
) -> Result<Vec<BitQuery>> {
    let t = digit_count(c)?;
    Ok((0..t as usize)
        .map(|index| BitQuery {
            index,
            digits: t,
            inner: query.clone(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitReconstruction {
    pub responses: Vec<f64>,
    pub reconstructed: f64,
    pub direct: f64,
}

/// Asks every bit query exactly and reconstructs.
pub fn answer_bit_queries(source: &SourceDistribution, bits: &[BitQuery], original: &SqQuery<'_>) -> BitReconstruction {
    let responses: Vec<f64> = bits.iter().map(|b| exact_expectation(source, &|x, y| b.eval(x, y))).collect();
    BitReconstruction {
        reconstructed: reconstruct(&responses),
        direct: exact_expectation(source, original),
        responses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsgd::{run_bsgd, BatchMode};
    use crate::domain::{make_parity_class, DyadicDistribution, SignMatrix};

    fn source() -> SourceDistribution {
        let m = make_parity_class(3).unwrap();
        let rho = DyadicDistribution::new(vec![1, 2, 3, 1, 4, 1, 2, 2], 4).unwrap();
        SourceDistribution::new(Arc::new(m), 1, rho).unwrap()
    }

    #[test]
    fn honest_oracle_matches_exact_batches() {
        let src = source();
        let mut cfg = BsgdConfig::new(15, 1.0 / 16.0, 1, 0.4, 5);
        cfg.batch = BatchMode::Exact;
        let arch = Architecture::Mlp { hidden: 4 };
        let batch = run_bsgd(&arch, &src, &cfg).unwrap();
        let mut oracle = ExactOracle {
            source: src.clone(),
            tolerance: cfg.precision / 8.0,
        };
        let sq = run_bsgd_via_sq(&arch, &src, &mut oracle, &cfg, Some(&src)).unwrap();
        assert_eq!(sq.trajectory, batch.trajectory);
        assert_eq!(sq.final_params, batch.final_params);
        assert_eq!(sq.query_count, 15 * sq.param_count as u64);
    }

    #[test]
    fn shifted_oracle_contract() {
        let src = source();
        let cfg = BsgdConfig::new(3, 1.0 / 8.0, 1, 0.4, 5);
        let tau = cfg.precision / 8.0;
        let mut within = ShiftedOracle {
            source: src.clone(),
            tolerance: tau,
            shift: tau,
        };
        assert!(run_bsgd_via_sq(&Architecture::LinearTanh { bias: true }, &src, &mut within, &cfg, Some(&src)).is_ok());
        let mut outside = ShiftedOracle {
            source: src.clone(),
            tolerance: tau,
            shift: 2.0 * tau,
        };
        assert!(matches!(
            run_bsgd_via_sq(&Architecture::LinearTanh { bias: true }, &src, &mut outside, &cfg, Some(&src)),
            Err(LabError::OracleContract { .. })
        ));
    }

    #[test]
    fn bit_examples() {
        assert_eq!(digit_count(0.5).unwrap(), 1);
        assert!(matches!(digit_count(0.3), Err(LabError::Precision(_))));
        let d = signed_digits(0.625, 3);
        assert_eq!(d.len(), 3);
        assert_eq!(reconstruct(&d.iter().map(|&v| v as f64).collect::<Vec<_>>()), 0.625);
        for v in [-1.0, -0.3, 0.0, 0.2, 0.99, 1.0] {
            let d = signed_digits(v, 1);
            assert!((reconstruct(&[d[0] as f64]) - v).abs() <= 0.5);
        }
    }

    #[test]
    fn bit_queries_reconstruct_expectation() {
        let m = SignMatrix::from_rows(&[vec![1, -1, 1, 1]]).unwrap();
        let src = SourceDistribution::new(Arc::new(m), 0, DyadicDistribution::new(vec![1, 1, 3, 3], 3).unwrap()).unwrap();
        let q: Arc<dyn Fn(usize, i8) -> f64 + Send + Sync> = Arc::new(|x, y| (x as f64 * 0.3 - 0.5) * y as f64);
        for c in [0.5, 0.125, 1.0 / 64.0] {
            let bits = bit_decompose_query(q.clone(), c).unwrap();
            let r = answer_bit_queries(&src, &bits, q.as_ref());
            assert!((r.reconstructed - r.direct).abs() <= c);
        }
    }
}
