//! Erdős–Rényi graph moments behind the HT variance bound (k = 1), the
//! sparse/dense regime sweep, and the graph-averaged variance by Monte Carlo.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Arm, Assignment, Design};
use crate::error::{LabError, Result};
use crate::estimators::ht_estimate;
use crate::exact::ht_variance_from_boundary;
use crate::graph::{Graph, NeighborhoodIndex};
use crate::numeric::{pow_large, CompensatedSum};

/// `ER(N, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErSpec {
    pub n: u64,
    pub p: f64,
}

impl ErSpec {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LabError::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
        }
        if n == 0 {
            return Err(LabError::InvalidArgument("ER graph needs at least one node".into()));
        }
        Ok(Self { n, p })
    }

    fn pairwise(&self) -> Result<()> {
        if self.n < 2 {
            return Err(LabError::InvalidArgument("pairwise moments need N >= 2".into()));
        }
        Ok(())
    }
}

/// `E_G[2^{|N_i|}] = 2 (1 + p)^{N−1}` for the closed 1-neighborhood.
pub fn moment_two_pow_nbhd(spec: &ErSpec) -> f64 {
    2.0 * pow_large(1.0 + spec.p, spec.n - 1)
}

/// `E_G[2^{|N_i ∩ N_j|}] = (3p + 1)(1 + p²)^{N−2}`.
pub fn moment_two_pow_shared(spec: &ErSpec) -> Result<f64> {
    spec.pairwise()?;
    let p = spec.p;
    Ok((3.0 * p + 1.0) * pow_large(1.0 + p * p, spec.n - 2))
}

/// `P_G(N_i ∩ N_j = ∅) = (1 − p)(1 − p²)^{N−2}`.
pub fn prob_no_common(spec: &ErSpec) -> Result<f64> {
    spec.pairwise()?;
    let p = spec.p;
    Ok((1.0 - p) * pow_large(1.0 - p * p, spec.n - 2))
}

/// `h_N(C, p) = 2 C² [ (2(1+p)^{N−1} − 1)/N + ((3p+1)(1+p²)^{N−2} − 1) + 1/N
/// + (1 − (1−p)(1−p²)^{N−2}) ]`.
pub fn h_bound(c: f64, spec: &ErSpec) -> Result<f64> {
    if c <= 0.0 {
        return Err(LabError::InvalidArgument(format!("outcome level must be positive, got {c}")));
    }
    let nf = spec.n as f64;
    let terms = (moment_two_pow_nbhd(spec) - 1.0) / nf
        + (moment_two_pow_shared(spec)? - 1.0)
        + 1.0 / nf
        + (1.0 - prob_no_common(spec)?);
    Ok(2.0 * terms * c * c)
}

/// `E_G[V_R(θ̂)]` for a table whose boundary outcomes all equal `c`.
///
/// Same four moments as [`h_bound`], but the two pairwise terms keep their
/// `(N−1)/N` weight; the result is exact and never exceeds `h_bound(c)`.
pub fn expected_variance_constant(c: f64, spec: &ErSpec) -> Result<f64> {
    let nf = spec.n as f64;
    let pair = (nf - 1.0) / nf;
    let terms = (moment_two_pow_nbhd(spec) - 1.0) / nf
        + pair * (moment_two_pow_shared(spec)? - 1.0)
        + 1.0 / nf
        + pair * (1.0 - prob_no_common(spec)?);
    Ok(2.0 * terms * c * c)
}

/// `4 e^{(N−1)/√N} K² / N`.
pub fn dense_lower_bound(n: u64, k: f64) -> f64 {
    let nf = n as f64;
    4.0 * ((nf - 1.0) / nf.sqrt()).exp() * k * k / nf
}

/// `E_G[E_i] = 2 (1 + p)^{N−1}`.
pub fn expected_effective_treatments(spec: &ErSpec) -> f64 {
    moment_two_pow_nbhd(spec)
}

/// `E_G[F_i] = E_G[S_i] / 2^N = (1/2)(1 − p/2)^{N−1}`.
pub fn expected_informative_fraction(spec: &ErSpec) -> f64 {
    0.5 * pow_large(1.0 - spec.p / 2.0, spec.n - 1)
}

/// Large-`N` limits of the expected effective-treatment count and informative
/// fraction for the sparse (`p = 1/N`) and dense (`p = 1/√N`) families.
pub fn asymptotic_limits(regime: Regime) -> (f64, f64) {
    match regime {
        Regime::Sparse => (2.0 * E, 1.0 / (2.0 * E.sqrt())),
        Regime::Dense => (f64::INFINITY, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `p = 1/N`.
    Sparse,
    /// `p = 1/√N`.
    Dense,
}

impl Regime {
    pub fn p(self, n: u64) -> f64 {
        match self {
            Regime::Sparse => 1.0 / n as f64,
            Regime::Dense => 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Sparse => "sparse",
            Regime::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub n: u64,
    pub p: f64,
    /// Sparse: `h_N(M, 1/N)`. Dense: `4 e^{(N−1)/√N} K² / N`.
    pub bound: f64,
    /// Sparse: `N · h_N(M, 1/N)`. Dense: the bound itself.
    pub scaled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "trend", rename_all = "snake_case")]
pub enum Trend {
    /// Sparse sweep: `N·h` stays within `max_ratio` of its first value.
    Bounded { max_ratio: f64 },
    Unbounded { max_ratio: f64 },
    StrictlyIncreasing,
    NotIncreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub rows: Vec<RegimeRow>,
    pub trend: Trend,
}

/// Ratio allowed between the largest and first `N·h` values of a sparse sweep.
pub const SPARSE_RATIO_LIMIT: f64 = 3.0;

pub fn regime_report(ns: &[u64], regime: Regime, k: f64, m: f64) -> Result<RegimeReport> {
    if ns.is_empty() {
        return Err(LabError::InvalidArgument("empty N sweep".into()));
    }
    if let Some(&bad) = ns.iter().find(|&&n| n < 4) {
        return Err(LabError::InvalidArgument(format!("regime sweep needs N >= 4, got {bad}")));
    }
    let rows = ns
        .iter()
        .map(|&n| {
            let p = regime.p(n);
            let (bound, scaled) = match regime {
                Regime::Sparse => {
                    let h = h_bound(m, &ErSpec::new(n, p)?)?;
                    (h, n as f64 * h)
                }
                Regime::Dense => {
                    let b = dense_lower_bound(n, k);
                    (b, b)
                }
            };
            Ok(RegimeRow { n, p, bound, scaled })
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = match regime {
        Regime::Sparse => {
            let first = rows[0].scaled;
            let max_ratio = rows.iter().map(|r| r.scaled / first).fold(0.0, f64::max);
            if max_ratio <= SPARSE_RATIO_LIMIT {
                Trend::Bounded { max_ratio }
            } else {
                Trend::Unbounded { max_ratio }
            }
        }
        Regime::Dense => {
            if rows.windows(2).all(|w| w[1].scaled > w[0].scaled) {
                Trend::StrictlyIncreasing
            } else {
                Trend::NotIncreasing
            }
        }
    };
    Ok(RegimeReport { regime, rows, trend })
}

/// Draws `ER(N, p)` from a seeded generator.
pub fn sample_er_graph(spec: &ErSpec, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_er_graph_with(spec, &mut rng)
}

pub fn sample_er_graph_with<R: Rng + ?Sized>(spec: &ErSpec, rng: &mut R) -> Result<Graph> {
    let n = usize::try_from(spec.n).map_err(|_| LabError::Capacity("graph too large".into()))?;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < spec.p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges)
}

/// How boundary outcomes are chosen per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TablePolicy {
    /// Every outcome equals `c`.
    Constant(f64),
    /// Independent uniforms on `(lower, upper)` per unit and arm.
    Uniform { lower: f64, upper: f64 },
}

/// How the per-graph design variance is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    ClosedForm,
    /// Sample variance of the HT estimate over `draws` Bernoulli assignments.
    Simulated { draws: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub rejected: usize,
}

/// Largest closed neighborhood a replicate may have before it is rejected.
pub const MC_NBHD_CAP: usize = 30;

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn one_replicate(spec: &ErSpec, k: usize, policy: TablePolicy, method: VarianceMethod, seed: u64, r: u64) -> Result<Option<f64>> {
    let mut rng = replicate_rng(seed, r);
    let graph = sample_er_graph_with(spec, &mut rng)?;
    let index = NeighborhoodIndex::build(&graph, k);
    if index.max_size() > MC_NBHD_CAP {
        return Ok(None);
    }
    let n = graph.n();
    let (y_a, y_b): (Vec<f64>, Vec<f64>) = match policy {
        TablePolicy::Constant(c) => (vec![c; n], vec![c; n]),
        TablePolicy::Uniform { lower, upper } => (0..n)
            .map(|_| (rng.random_range(lower..upper), rng.random_range(lower..upper)))
            .unzip(),
    };
    match method {
        VarianceMethod::ClosedForm => Ok(Some(ht_variance_from_boundary(&index, &y_a, &y_b)?.total)),
        VarianceMethod::Simulated { draws } => {
            let design = Design::bd(n)?;
            let mut sum = CompensatedSum::new();
            let mut sq = CompensatedSum::new();
            for _ in 0..draws {
                let z: Assignment = design.sample_with(&mut rng);
                // HT only reads outcomes of exposed units, which are Y_i(A) or Y_i(B)
                let y: Vec<f64> = (0..n)
                    .map(|i| match z.arm(i) {
                        Arm::A => y_a[i],
                        Arm::B => y_b[i],
                    })
                    .collect();
                let v = ht_estimate(&z, &y, &index, &design)?;
                sum.add(v);
                sq.add(v * v);
            }
            let d = draws as f64;
            let mean = sum.value() / d;
            Ok(Some((sq.value() - d * mean * mean) / (d - 1.0)))
        }
    }
}

/// Graph average of the HT design variance, `E_G[V_R(θ̂)]`, by Monte Carlo.
///
/// Replicate `r` uses the ChaCha stream `r` under `seed`, so the result does
/// not depend on how replicates are spread across workers.
pub fn mc_expected_variance(
    spec: &ErSpec,
    k: usize,
    policy: TablePolicy,
    method: VarianceMethod,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if reps < 2 {
        return Err(LabError::InvalidArgument("need at least two replicates".into()));
    }
    if let TablePolicy::Uniform { lower, upper } = policy {
        if !(lower >= 0.0 && lower < upper) {
            return Err(LabError::InvalidArgument(format!("bad uniform bounds ({lower}, {upper})")));
        }
    }
    if let VarianceMethod::Simulated { draws } = method {
        if draws < 2 {
            return Err(LabError::InvalidArgument("simulated variance needs at least two draws".into()));
        }
        if spec.n as usize > crate::design::MAX_UNITS {
            return Err(LabError::Capacity("simulated variance needs N <= 64".into()));
        }
    }
    let results = (0..reps as u64)
        .into_par_iter()
        .map(|r| one_replicate(spec, k, policy, method, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let accepted: Vec<f64> = results.iter().filter_map(|v| *v).collect();
    let rejected = reps - accepted.len();
    if accepted.is_empty() {
        return Err(LabError::Capacity(format!(
            "all {reps} replicates exceeded the neighborhood cap of {MC_NBHD_CAP}"
        )));
    }
    let count = accepted.len() as f64;
    let mean = accepted.iter().copied().collect::<CompensatedSum>().value() / count;
    let stderr = if accepted.len() > 1 {
        let ss = accepted.iter().map(|v| (v - mean).powi(2)).collect::<CompensatedSum>().value();
        (ss / (count - 1.0)).sqrt() / count.sqrt()
    } else {
        f64::NAN
    };
    Ok(McEstimate { mean, stderr, accepted: accepted.len(), rejected })
}
