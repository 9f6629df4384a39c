//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's closed forms; only data types are borrowed.

#![allow(dead_code)]

use interference_lab::{Assignment, Design, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every simple graph on `n` nodes together with its edge count.
pub fn all_graphs(n: usize) -> impl Iterator<Item = (Graph, usize)> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let m = pairs.len();
    (0u64..1 << m).map(move |mask| {
        let edges: Vec<_> = (0..m).filter(|&b| mask >> b & 1 == 1).map(|b| pairs[b]).collect();
        (Graph::new(n, &edges).unwrap(), edges.len())
    })
}

/// Probability of a specific graph with `e` of `m` possible edges under G(n, p).
pub fn er_weight(e: usize, m: usize, p: f64) -> f64 {
    p.powi(e as i32) * (1.0 - p).powi((m - e) as i32)
}

/// Closed k-step neighborhoods from boolean powers of `I + A`.
pub fn reach_matrix(graph: &Graph, k: usize) -> Vec<Vec<usize>> {
    let n = graph.n();
    let mut step = vec![vec![false; n]; n];
    for (i, row) in step.iter_mut().enumerate() {
        row[i] = true;
        for &j in graph.neighbors(i) {
            row[j] = true;
        }
    }
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for _ in 0..k {
        reach = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|l| reach[i][l] && step[l][j])).collect())
            .collect();
    }
    reach.into_iter().map(|row| (0..n).filter(|&j| row[j]).collect()).collect()
}

/// Support of a design as `(bits, probability)` pairs, bit `i` set for B.
pub fn support(design: &Design) -> Vec<(u64, f64)> {
    let n = design.n();
    let all: Vec<u64> = (0u64..1 << n).collect();
    match *design {
        Design::Bd { .. } => all.into_iter().map(|b| (b, 0.5f64.powi(n as i32))).collect(),
        Design::Cbd { .. } => {
            let full = (1u64 << n) - 1;
            let w = 1.0 / ((1u64 << n) - 2) as f64;
            all.into_iter().filter(|&b| b != 0 && b != full).map(|b| (b, w)).collect()
        }
        Design::Crd { n_a, .. } => {
            let zs: Vec<u64> = all.into_iter().filter(|b| n - b.count_ones() as usize == n_a).collect();
            let w = 1.0 / zs.len() as f64;
            zs.into_iter().map(|b| (b, w)).collect()
        }
    }
}

/// `E[f(Z)]`, `Var[f(Z)]` by direct summation over the support.
pub fn brute_moments(design: &Design, mut f: impl FnMut(&Assignment) -> f64) -> (f64, f64) {
    let n = design.n();
    let vals: Vec<(f64, f64)> =
        support(design).into_iter().map(|(b, w)| (w, f(&Assignment::from_bits(n, b).unwrap()))).collect();
    let mean: f64 = vals.iter().map(|(w, v)| w * v).sum();
    let var: f64 = vals.iter().map(|(w, v)| w * (v - mean).powi(2)).sum();
    (mean, var)
}

/// Horvitz–Thompson estimate written out from its definition.
pub fn ht_direct(nbhd: &[Vec<usize>], bits: u64, y_a: &[f64], y_b: &[f64]) -> f64 {
    let n = nbhd.len();
    let mut total = 0.0;
    for i in 0..n {
        let w = 2f64.powi(nbhd[i].len() as i32);
        if nbhd[i].iter().all(|&j| bits >> j & 1 == 0) {
            total += w * y_a[i];
        }
        if nbhd[i].iter().all(|&j| bits >> j & 1 == 1) {
            total -= w * y_b[i];
        }
    }
    total / n as f64
}

/// BD variance of the HT estimator by enumerating all `2^N` assignments.
pub fn ht_variance_brute(nbhd: &[Vec<usize>], y_a: &[f64], y_b: &[f64]) -> f64 {
    let n = nbhd.len();
    let w = 0.5f64.powi(n as i32);
    let vals: Vec<f64> = (0u64..1 << n).map(|b| ht_direct(nbhd, b, y_a, y_b)).collect();
    let mean: f64 = vals.iter().map(|v| w * v).sum();
    vals.iter().map(|v| w * (v - mean).powi(2)).sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Pearson statistic of `counts` against a uniform distribution.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Runs the compiled binary with `INTERFERENCE_LAB_THREADS` set.
pub fn run_cli(args: &[&str], threads: usize) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_interference-lab"))
        .args(args)
        .env("INTERFERENCE_LAB_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}
