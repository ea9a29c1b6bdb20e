//! Library results against brute-force oracles on small instances.

mod common;

use std::sync::Arc;

use common::*;
use rand::Rng;
use sqlab::comm::{discprod_search, discrepancy_under, max_dcc2_correlation, r2_norm};
use sqlab::domain::{make_parity_class, make_zarankiewicz_random};
use sqlab::features::{predict_success_exact, predict_success_prob, PredictTarget};
use sqlab::seeds::rng_from_seed;
use sqlab::sqdim::{sqdim_exact, sqdim_greedy, verify_witness};
use sqlab::{Dyadic, DyadicDistribution, SignMatrix, SourceDistribution};

fn random_instance(rng: &mut impl Rng, max_side: usize, k: u32) -> (SignMatrix, DyadicDistribution, DyadicDistribution) {
    let r = rng.gen_range(1..=max_side);
    let c = rng.gen_range(1..=max_side);
    let m = SignMatrix::random(r, c, rng).unwrap();
    let mu = DyadicDistribution::random(r, k, rng).unwrap();
    let rho = DyadicDistribution::random(c, k, rng).unwrap();
    (m, mu, rho)
}

#[test]
fn sqdim_matches_subset_search() {
    let mut rng = rng_from_seed(101);
    for _ in 0..60 {
        let (m, _, rho) = random_instance(&mut rng, 8, 3);
        let r = sqdim_exact(&m, &rho).unwrap();
        assert_eq!(r.dimension, brute_sqdim(&m, &rho), "{m:?} {rho:?}");
        assert!(verify_witness(&m, &rho, &r.witness));
        let g = sqdim_greedy(&m, &rho, 8, 3).unwrap();
        assert!(g.dimension <= r.dimension);
        assert!(verify_witness(&m, &rho, &g.witness));
    }
    for n in 1..=3 {
        let p = make_parity_class(n).unwrap();
        let u = DyadicDistribution::uniform(1 << n).unwrap();
        assert_eq!(brute_sqdim(&p, &u), 1 << n);
    }
}

#[test]
fn class_and_negation_has_dimension_two() {
    let m = SignMatrix::from_rows(&[vec![1, -1, 1], vec![-1, 1, -1]]).unwrap();
    let rho = DyadicDistribution::new(vec![1, 2, 1], 2).unwrap();
    assert_eq!(sqdim_exact(&m, &rho).unwrap().dimension, 2);
    assert_eq!(brute_sqdim(&m, &rho), 2);
}

#[test]
fn discrepancy_matches_rectangle_enumeration() {
    let mut rng = rng_from_seed(202);
    for _ in 0..40 {
        let (m, zr, zc) = random_instance(&mut rng, 7, 4);
        let d = discrepancy_under(&m, &zr, &zc).unwrap();
        assert_eq!(d.value, brute_disc(&m, &zr, &zc));
    }
    let p = make_parity_class(2).unwrap();
    let u = DyadicDistribution::uniform(4).unwrap();
    assert_eq!(brute_disc(&p, &u, &u), Dyadic::new(5, 4));
}

#[test]
fn product_search_is_an_upper_bound_on_its_own_witness() {
    let mut rng = rng_from_seed(9);
    let m = SignMatrix::random(5, 5, &mut rng).unwrap();
    let r = discprod_search(&m, 4, 4, 1).unwrap();
    assert_eq!(r.value, brute_disc(&m, &r.zeta_row, &r.zeta_col));
}

#[test]
fn r2_matches_fourfold_expansion() {
    let mut rng = rng_from_seed(303);
    for _ in 0..40 {
        let (m, mu, rho) = random_instance(&mut rng, 5, 3);
        assert_eq!(r2_norm(&m, &mu, &rho).unwrap(), brute_r2(&m, &mu, &rho));
    }
}

#[test]
fn predict_matches_slot_enumeration() {
    let mut rng = rng_from_seed(404);
    for _ in 0..30 {
        let (m, mu, rho) = random_instance(&mut rng, 5, 3);
        let exact = predict_success_exact(&m, &mu, &rho, None).unwrap();
        assert_eq!(exact.correlation, brute_predict_correlation(&m, &mu, &rho));
    }
}

#[test]
fn predict_sampling_agrees_with_exact() {
    let m = Arc::new(make_parity_class(1).unwrap());
    let u = DyadicDistribution::uniform(2).unwrap();
    let src = SourceDistribution::new(m.clone(), 1, u.clone()).unwrap();
    let est = predict_success_prob(&src, &u, PredictTarget::Prior, 40_000, 5).unwrap();
    assert!((est.success_prob - 0.75).abs() <= est.confidence_radius, "{est:?}");
}

#[test]
fn dcc2_closed_form_matches_full_enumeration() {
    let mut rng = rng_from_seed(505);
    for _ in 0..25 {
        let (m, zr, zc) = random_instance(&mut rng, 4, 3);
        assert_eq!(max_dcc2_correlation(&m, &zr, &zc).unwrap(), brute_dcc2(&m, &zr, &zc));
    }
}

#[test]
fn zarankiewicz_generator_meets_definition() {
    for seed in 0..5 {
        let m = make_zarankiewicz_random(6, 2, seed).unwrap();
        assert!(!brute_has_plus_block(&m, 2));
    }
}
