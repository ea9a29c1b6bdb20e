//! Statistical query dimension of a sign matrix.
//!
//! `SQ_ρ(F)` is the largest `d` such that `d` rows have pairwise
//! correlations `E_ρ[f_i f_j] <= 1/d`. The condition is signed: strongly
//! anti-correlated pairs such as `{f, -f}` qualify.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{check_len, DyadicDistribution, SignMatrix};
use crate::dyadic::Dyadic;
use crate::error::{LabError, Result};
use crate::seeds::rng_from_seed;

/// Row cap for the exact clique search.
pub const EXACT_ROW_CAP: usize = 24;
pub const DEFAULT_GREEDY_RESTARTS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqdimResult {
    pub dimension: usize,
    pub witness: Vec<usize>,
    pub distribution: DyadicDistribution,
    pub exact: bool,
}

/// Exact `Σ_x ρ(x) A(i;x) A(j;x)`.
pub fn pairwise_correlation(
    matrix: &SignMatrix,
    i: usize,
    j: usize,
    rho: &DyadicDistribution,
) -> Dyadic {
    Dyadic::new(correlation_numerator(matrix, i, j, rho), rho.scale_exponent())
}

/// Numerator of the correlation over the denominator `2^k` of `rho`.
fn correlation_numerator(matrix: &SignMatrix, i: usize, j: usize, rho: &DyadicDistribution) -> i128 {
    matrix
        .row(i)
        .iter()
        .zip(matrix.row(j))
        .zip(rho.weights())
        .map(|((&a, &b), &w)| (a * b) as i128 * w as i128)
        .sum()
}

/// Checks the `1/d` pairwise condition with `d = witness.len()`.
pub fn verify_witness(matrix: &SignMatrix, rho: &DyadicDistribution, witness: &[usize]) -> bool {
    let d = witness.len() as u64;
    if d == 0 {
        return false;
    }
    for (a, &i) in witness.iter().enumerate() {
        if i >= matrix.rows() {
            return false;
        }
        for &j in &witness[a + 1..] {
            if i == j || !pairwise_correlation(matrix, i, j, rho).le_reciprocal(d) {
                return false;
            }
        }
    }
    true
}

/// Exact SQ dimension by a clique search on the per-`d` threshold graph.
pub fn sqdim_exact(matrix: &SignMatrix, rho: &DyadicDistribution) -> Result<SqdimResult> {
    check_len(rho, matrix.cols(), "rho")?;
    let n = matrix.rows();
    if n > EXACT_ROW_CAP {
        return Err(LabError::SizeLimit {
            what: "rows for exact SQ dimension (use sqdim_greedy)",
            actual: n,
            limit: EXACT_ROW_CAP,
        });
    }
    let scale = 1i128 << rho.scale_exponent();
    let mut corr = vec![0i128; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = correlation_numerator(matrix, i, j, rho);
            corr[i * n + j] = c;
            corr[j * n + i] = c;
        }
    }
    for d in (1..=n).rev() {
        let adj: Vec<u32> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && corr[i * n + j] * d as i128 <= scale)
                    .fold(0u32, |m, j| m | 1 << j)
            })
            .collect();
        if let Some(clique) = find_clique(&adj, d) {
            return Ok(SqdimResult {
                dimension: d,
                witness: clique,
                distribution: rho.clone(),
                exact: true,
            });
        }
    }
    unreachable!("a single row is always a clique of size 1")
}

/// Finds a clique of exactly `target` vertices, if any.
fn find_clique(adj: &[u32], target: usize) -> Option<Vec<usize>> {
    fn expand(adj: &[u32], current: &mut Vec<usize>, candidates: u32, target: usize) -> bool {
        if current.len() == target {
            return true;
        }
        if current.len() + (candidates.count_ones() as usize) < target {
            return false;
        }
        let mut rest = candidates;
        while rest != 0 {
            if current.len() + (rest.count_ones() as usize) < target {
                return false;
            }
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            current.push(v);
            if expand(adj, current, rest & adj[v], target) {
                return true;
            }
            current.pop();
        }
        false
    }
    let all = if adj.len() == 32 { u32::MAX } else { (1u32 << adj.len()) - 1 };
    let mut current = Vec::with_capacity(target);
    expand(adj, &mut current, all, target).then_some(current)
}

/// Randomized greedy set growth; the result is a certified lower bound.
pub fn sqdim_greedy(
    matrix: &SignMatrix,
    rho: &DyadicDistribution,
    restarts: usize,
    seed: u64,
) -> Result<SqdimResult> {
    check_len(rho, matrix.cols(), "rho")?;
    let n = matrix.rows();
    let mut rng = rng_from_seed(seed);
    let mut best: Vec<usize> = vec![0];
    let mut order: Vec<usize> = (0..n).collect();
    for restart in 0..restarts.max(1) {
        if restart > 0 {
            order.shuffle(&mut rng);
        }
        let set = greedy_pass(matrix, rho, &order);
        if set.len() > best.len() {
            best = set;
        }
        if best.len() == n {
            break;
        }
    }
    debug_assert!(verify_witness(matrix, rho, &best));
    Ok(SqdimResult {
        dimension: best.len(),
        witness: best,
        distribution: rho.clone(),
        exact: false,
    })
}

fn greedy_pass(matrix: &SignMatrix, rho: &DyadicDistribution, order: &[usize]) -> Vec<usize> {
    let scale = 1i128 << rho.scale_exponent();
    let mut set: Vec<usize> = Vec::new();
    // Largest pairwise correlation numerator inside the set.
    let mut max_inside = i128::MIN;
    for &v in order {
        let d = set.len() as i128 + 1;
        if max_inside != i128::MIN && max_inside * d > scale {
            break;
        }
        let mut worst = max_inside;
        let mut ok = true;
        for &u in &set {
            let c = correlation_numerator(matrix, u, v, rho);
            if c * d > scale {
                ok = false;
                break;
            }
            worst = worst.max(c);
        }
        if ok {
            set.push(v);
            max_inside = worst;
        }
    }
    set
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqdimOverResult {
    pub result: SqdimResult,
    /// Index into the supplied candidates of the maximizing distribution.
    pub best_index: usize,
    pub candidates_evaluated: usize,
}

/// Max over a candidate family of distributions: a lower bound on `sq(F)`.
/// Uses the exact search within [`EXACT_ROW_CAP`] rows and greedy otherwise.
pub fn sqdim_over_distributions(
    matrix: &SignMatrix,
    candidates: &[DyadicDistribution],
    restarts: usize,
    seed: u64,
) -> Result<SqdimOverResult> {
    if candidates.is_empty() {
        return Err(LabError::InvalidInput("no candidate distributions".into()));
    }
    let mut seen: Vec<DyadicDistribution> = Vec::new();
    let mut best: Option<(SqdimResult, usize)> = None;
    for (idx, rho) in candidates.iter().enumerate() {
        let reduced = rho.reduced();
        if seen.contains(&reduced) {
            continue;
        }
        seen.push(reduced);
        let r = if matrix.rows() <= EXACT_ROW_CAP {
            sqdim_exact(matrix, rho)?
        } else {
            sqdim_greedy(matrix, rho, restarts, seed)?
        };
        if best.as_ref().map_or(true, |(b, _)| r.dimension > b.dimension) {
            best = Some((r, idx));
        }
    }
    let (result, best_index) = best.expect("at least one candidate");
    Ok(SqdimOverResult {
        result,
        best_index,
        candidates_evaluated: seen.len(),
    })
}

/// Query lower bound for SQ learners: returns whether `k > (d τ² - 1) / 2`.
pub fn blum_lower_bound_check(d: usize, k: u64, tau: f64) -> bool {
    k as f64 > (d as f64 * tau * tau - 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_parity_class;

    #[test]
    fn correlation_examples() {
        let m = SignMatrix::from_rows(&[vec![1, -1, 1], vec![1, -1, 1], vec![-1, 1, -1]]).unwrap();
        let rho = DyadicDistribution::new(vec![1, 2, 1], 2).unwrap();
        assert_eq!(pairwise_correlation(&m, 0, 1, &rho), Dyadic::ONE);
        assert_eq!(pairwise_correlation(&m, 0, 2, &rho), Dyadic::from_int(-1));
        let p = make_parity_class(2).unwrap();
        let u = DyadicDistribution::uniform(4).unwrap();
        // rows 1 = {x1}, 2 = {x2}
        assert_eq!(pairwise_correlation(&p, 1, 2, &u), Dyadic::ZERO);
    }

    #[test]
    fn exact_examples() {
        let single = SignMatrix::from_rows(&[vec![1, -1]]).unwrap();
        let u2 = DyadicDistribution::uniform(2).unwrap();
        assert_eq!(sqdim_exact(&single, &u2).unwrap().dimension, 1);

        let p = make_parity_class(2).unwrap();
        let r = sqdim_exact(&p, &DyadicDistribution::uniform(4).unwrap()).unwrap();
        assert_eq!(r.dimension, 4);
        assert!(r.exact);

        // Signed condition: corr(f, -f) = -1 <= 1/2.
        let pair = SignMatrix::from_rows(&[vec![1, -1], vec![-1, 1]]).unwrap();
        assert_eq!(sqdim_exact(&pair, &u2).unwrap().dimension, 2);
    }

    #[test]
    fn exact_cap() {
        let m = SignMatrix::filled(25, 2, 1).unwrap();
        let u = DyadicDistribution::uniform(2).unwrap();
        assert!(matches!(sqdim_exact(&m, &u), Err(LabError::SizeLimit { .. })));
    }

    #[test]
    fn greedy_examples() {
        let p = make_parity_class(3).unwrap();
        let u = DyadicDistribution::uniform(8).unwrap();
        let r = sqdim_greedy(&p, &u, 8, 1).unwrap();
        assert_eq!(r.dimension, 8);
        assert!(verify_witness(&p, &u, &r.witness));

        let one_col = SignMatrix::from_rows(&[vec![1], vec![-1], vec![1], vec![-1]]).unwrap();
        let pm = DyadicDistribution::point_mass(1, 0).unwrap();
        let r = sqdim_greedy(&one_col, &pm, 16, 2).unwrap();
        assert!(r.dimension <= 2);
        assert!(verify_witness(&one_col, &pm, &r.witness));
    }

    #[test]
    fn over_distributions() {
        let p = make_parity_class(2).unwrap();
        let u = DyadicDistribution::uniform(4).unwrap();
        let pm = DyadicDistribution::point_mass(4, 1).unwrap();
        let r = sqdim_over_distributions(&p, &[pm.clone(), u.clone()], 8, 0).unwrap();
        assert_eq!(r.result.dimension, 4);
        assert_eq!(r.best_index, 1);
        // Under a point mass every correlation is ±1.
        assert!(sqdim_exact(&p, &pm).unwrap().dimension <= 2);
        let dup = sqdim_over_distributions(&p, &[u.clone(), u.rescaled(5).unwrap(), u], 8, 0).unwrap();
        assert_eq!(dup.result.dimension, 4);
        assert_eq!(dup.candidates_evaluated, 1);
    }

    #[test]
    fn blum_examples() {
        assert!(blum_lower_bound_check(64, 8, 0.5));
        assert!(!blum_lower_bound_check(1, 0, 1.0));
        assert!(!blum_lower_bound_check(100, 0, 0.1));
        assert!(blum_lower_bound_check(100, 1, 0.1));
    }
}
