//! Brute-force oracles shared by the integration tests. Each one works from
//! the definitions directly and shares no code path with the library.

#![allow(dead_code)]

use sqlab::{Dyadic, DyadicDistribution, SignMatrix};

/// Rows of the uniform expansion: weight `w` at index `i` becomes `w` copies.
pub fn expand(d: &DyadicDistribution) -> Vec<usize> {
    d.weights()
        .iter()
        .enumerate()
        .flat_map(|(i, &w)| std::iter::repeat(i).take(w as usize))
        .collect()
}

/// Largest row subset with every signed pairwise correlation at most
/// `1/|S|`, over all subsets.
pub fn brute_sqdim(m: &SignMatrix, rho: &DyadicDistribution) -> usize {
    let n = m.rows();
    assert!(n <= 16);
    let scale = 1i128 << rho.scale_exponent();
    let corr = |i: usize, j: usize| -> i128 {
        (0..m.cols())
            .map(|x| rho.weights()[x] as i128 * (m.get(i, x) * m.get(j, x)) as i128)
            .sum()
    };
    let mut best = 0;
    for mask in 1u32..1 << n {
        let rows: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let d = rows.len() as i128;
        if rows.len() <= best {
            continue;
        }
        let ok = rows
            .iter()
            .enumerate()
            .all(|(a, &i)| rows[a + 1..].iter().all(|&j| d * corr(i, j) <= scale));
        if ok {
            best = rows.len();
        }
    }
    best
}

/// Max over every row subset and every column subset of the absolute
/// `ζ_row × ζ_col`-weighted sum.
pub fn brute_disc(m: &SignMatrix, zr: &DyadicDistribution, zc: &DyadicDistribution) -> Dyadic {
    let (r, c) = (m.rows(), m.cols());
    assert!(r <= 12 && c <= 12);
    let mut best: i128 = 0;
    for rs in 0u32..1 << r {
        for cs in 0u32..1 << c {
            let mut s: i128 = 0;
            for x in (0..r).filter(|&x| rs >> x & 1 == 1) {
                for y in (0..c).filter(|&y| cs >> y & 1 == 1) {
                    s += zr.weights()[x] as i128 * zc.weights()[y] as i128 * m.get(x, y) as i128;
                }
            }
            best = best.max(s.abs());
        }
    }
    Dyadic::new(best, zr.scale_exponent() + zc.scale_exponent())
}

/// `E[A(f,x) A(g,x) A(f,y) A(g,y)]` with `f, g ∼ μ` and `x, y ∼ ρ`,
/// as a uniform average over the expanded tables.
pub fn brute_r2(m: &SignMatrix, mu: &DyadicDistribution, rho: &DyadicDistribution) -> Dyadic {
    let fs = expand(mu);
    let xs = expand(rho);
    let mut num: i128 = 0;
    for &f in &fs {
        for &g in &fs {
            for &x in &xs {
                let a = (m.get(f, x) * m.get(g, x)) as i128;
                for &y in &xs {
                    num += a * (m.get(f, y) * m.get(g, y)) as i128;
                }
            }
        }
    }
    Dyadic::new(num, 2 * (mu.scale_exponent() + rho.scale_exponent()))
}

/// `E[Predict(z) f(z)]` with `Predict(z) = g(z) g(x) f(x)`, averaging over
/// every slot of `f, g ∼ μ` and `x, z ∼ ρ`.
pub fn brute_predict_correlation(m: &SignMatrix, mu: &DyadicDistribution, rho: &DyadicDistribution) -> Dyadic {
    let fs = expand(mu);
    let xs = expand(rho);
    let mut num: i128 = 0;
    for &f in &fs {
        for &g in &fs {
            for &x in &xs {
                for &z in &xs {
                    let predict = m.get(g, z) * m.get(g, x) * m.get(f, x);
                    num += (predict * m.get(f, z)) as i128;
                }
            }
        }
    }
    Dyadic::new(num, 2 * (mu.scale_exponent() + rho.scale_exponent()))
}

/// Max `|Σ ζ π A|` over every 2-bit protocol: the first speaker sends one
/// bit of its input, the other answers with a bit depending on its input and
/// the received bit, and the answer is the output. All message functions are
/// enumerated, redundancy included.
pub fn brute_dcc2(m: &SignMatrix, zr: &DyadicDistribution, zc: &DyadicDistribution) -> Dyadic {
    let one_side = |m: &SignMatrix, ws: &[u64], wl: &[u64]| -> i128 {
        let (s, l) = (m.rows(), m.cols());
        assert!(s <= 8 && 2 * l <= 16);
        let mut best: i128 = 0;
        for first in 0u32..1 << s {
            for reply in 0u32..1 << (2 * l) {
                let mut sum: i128 = 0;
                for x in 0..s {
                    let bit = (first >> x & 1) as usize;
                    for y in 0..l {
                        let out = if reply >> (2 * y + bit) & 1 == 1 { -1 } else { 1 };
                        sum += ws[x] as i128 * wl[y] as i128 * (out * m.get(x, y)) as i128;
                    }
                }
                best = best.max(sum.abs());
            }
        }
        best
    };
    let a = one_side(m, zr.weights(), zc.weights());
    let t = m.transpose();
    let b = one_side(&t, zc.weights(), zr.weights());
    Dyadic::new(a.max(b), zr.scale_exponent() + zc.scale_exponent())
}

/// True iff some `c × c` submatrix is all +1, by checking every pair of
/// row and column subsets of size `c`.
pub fn brute_has_plus_block(m: &SignMatrix, c: usize) -> bool {
    let subsets = |n: usize| -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|s| s.count_ones() as usize == c)
            .map(|s| (0..n).filter(|&i| s >> i & 1 == 1).collect())
            .collect()
    };
    let rs = subsets(m.rows());
    let cs = subsets(m.cols());
    rs.iter()
        .any(|r| cs.iter().any(|cc| r.iter().all(|&x| cc.iter().all(|&y| m.get(x, y) == 1))))
}
