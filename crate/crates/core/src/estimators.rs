//! Estimators sharing one evaluation signature: `(design, z, y_obs) -> θ̂`.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::design::{Arm, Assignment, Design};
use crate::error::{LabError, Result};
use crate::graph::NeighborhoodIndex;
use crate::outcomes::{Estimand, LinearFunctional};

/// Bit-exact key for an observed outcome vector.
///
/// Grid values are exact binary fractions, so keys never drift.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YKey(Vec<u64>);

impl YKey {
    pub fn new(y: &[f64]) -> Self {
        // -0.0 and 0.0 must collide
        YKey(y.iter().map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() }).collect())
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from_bits(b)).collect()
    }
}

impl fmt::Display for YKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, v) in self.values().iter().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for YKey {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .split(';')
            .map(|t| t.trim().parse::<f64>().map_err(|_| LabError::Parse(format!("bad ykey {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(YKey::new(&vals))
    }
}

/// An estimator given as a lookup table over `(assignment, observed vector)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularEstimator {
    entries: BTreeMap<(Assignment, YKey), f64>,
}

impl TabularEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, z: Assignment, y: &[f64], value: f64) {
        self.entries.insert((z, YKey::new(y)), value);
    }

    pub fn insert_key(&mut self, z: Assignment, key: YKey, value: f64) {
        self.entries.insert((z, key), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Assignment, &YKey, f64)> {
        self.entries.iter().map(|((z, k), v)| (z, k, *v))
    }

    pub fn evaluate(&self, z: &Assignment, y_obs: &[f64]) -> Result<f64> {
        self.entries
            .get(&(*z, YKey::new(y_obs)))
            .copied()
            .ok_or_else(|| LabError::IncompleteEstimator(format!("no entry for ({z}, {})", YKey::new(y_obs))))
    }

    /// `assignment,ykey,value`, one row per entry in key order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("assignment,ykey,value\n");
        for ((z, k), v) in &self.entries {
            let _ = writeln!(out, "{z},{k},{v:?}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("assignment,ykey,value") {
            return Err(LabError::Parse("expected header \"assignment,ykey,value\"".into()));
        }
        let mut est = Self::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let [z, k, v] = fields.as_slice() else {
                return Err(LabError::Parse(format!("bad witness row {line:?}")));
            };
            let v: f64 = v.trim().parse().map_err(|_| LabError::Parse(format!("bad value in {line:?}")))?;
            est.insert_key(z.parse()?, k.parse()?, v);
        }
        Ok(est)
    }
}

/// The estimators under study.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    /// Difference in means, with the realized group sizes.
    DiffMeans,
    HorvitzThompson { index: NeighborhoodIndex },
    /// The additive-estimand unbiased estimator under BD (offset term zero).
    AdditiveUnbiased { first: LinearFunctional, second: LinearFunctional },
    /// The primary-effect unbiased estimator under BD (offset term zero).
    PrimaryUnbiased,
    Constant(f64),
    Tabular(TabularEstimator),
}

impl Estimator {
    /// The additive unbiased estimator for `estimand` on `n` units.
    pub fn additive_unbiased_for(estimand: &Estimand, n: usize) -> Result<Self> {
        let (first, second) = estimand.additive_parts(n).ok_or_else(|| {
            LabError::UnsupportedEstimand(format!("{} is not additive", estimand.name()))
        })?;
        Ok(Estimator::AdditiveUnbiased { first, second })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::DiffMeans => "diff_in_means",
            Estimator::HorvitzThompson { .. } => "horvitz_thompson",
            Estimator::AdditiveUnbiased { .. } => "additive_unbiased",
            Estimator::PrimaryUnbiased => "primary_unbiased",
            Estimator::Constant(_) => "constant",
            Estimator::Tabular(_) => "tabular",
        }
    }

    pub fn evaluate(&self, design: &Design, z: &Assignment, y_obs: &[f64]) -> Result<f64> {
        if z.len() != y_obs.len() {
            return Err(LabError::InvalidArgument(format!(
                "assignment has {} units but {} outcomes were observed",
                z.len(),
                y_obs.len()
            )));
        }
        match self {
            Estimator::DiffMeans => Ok(realized_diff_in_means(z, y_obs)),
            Estimator::HorvitzThompson { index } => ht_estimate(z, y_obs, index, design),
            Estimator::AdditiveUnbiased { first, second } => additive_unbiased_estimator(z, y_obs, first, second),
            Estimator::PrimaryUnbiased => Ok(primary_unbiased_estimator(z, y_obs)),
            Estimator::Constant(c) => Ok(*c),
            Estimator::Tabular(t) => t.evaluate(z, y_obs),
        }
    }
}

fn group_sums(z: &Assignment, y: &[f64]) -> ((f64, usize), (f64, usize)) {
    y.iter().enumerate().fold(((0.0, 0), (0.0, 0)), |((sa, na), (sb, nb)), (i, &v)| match z.arm(i) {
        Arm::A => ((sa + v, na + 1), (sb, nb)),
        Arm::B => ((sa, na), (sb + v, nb + 1)),
    })
}

/// Difference in means under a CRD: `(1/N_A) Σ_{Z_i=A} y_i − (1/N_B) Σ_{Z_i=B} y_i`.
pub fn diff_in_means(z: &Assignment, y_obs: &[f64], design: &Design) -> Result<f64> {
    let Design::Crd { n, n_a } = *design else {
        return Err(LabError::InvalidDesign(format!(
            "difference in means needs a crd with fixed group sizes, got {}",
            design.name()
        )));
    };
    if z.len() != n || y_obs.len() != n {
        return Err(LabError::InvalidArgument("dimension mismatch".into()));
    }
    if z.count(Arm::A) != n_a {
        return Err(LabError::InvalidArgument(format!("{z} is outside the crd support")));
    }
    let ((sa, na), (sb, nb)) = group_sums(z, y_obs);
    if na == 0 || nb == 0 {
        return Err(LabError::InvalidDesign("empty treatment group".into()));
    }
    Ok(sa / na as f64 - sb / nb as f64)
}

/// Difference in means with realized group sizes; an empty group's mean is 0.
fn realized_diff_in_means(z: &Assignment, y_obs: &[f64]) -> f64 {
    let ((sa, na), (sb, nb)) = group_sums(z, y_obs);
    let mean = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
    mean(sa, na) - mean(sb, nb)
}

/// Horvitz–Thompson estimator under k-local exposure and a Bernoulli design.
///
/// `(1/N) Σ_i [1{N_i all A} / P_i(A) − 1{N_i all B} / P_i(B)] y_i` with
/// `P_i = 2^{-|N_i|}`.
pub fn ht_estimate(z: &Assignment, y_obs: &[f64], index: &NeighborhoodIndex, design: &Design) -> Result<f64> {
    if !design.is_bernoulli() {
        return Err(LabError::UnsupportedDesign(format!(
            "horvitz-thompson weights are closed-form only under bd, not {}",
            design.name()
        )));
    }
    let n = index.n();
    if z.len() != n || y_obs.len() != n {
        return Err(LabError::InvalidArgument("dimension mismatch".into()));
    }
    let total: f64 = (0..n)
        .map(|i| {
            let nbhd = index.neighborhood(i);
            let weight = 2f64.powi(nbhd.len() as i32);
            if z.all_on(nbhd, Arm::A) {
                weight * y_obs[i]
            } else if z.all_on(nbhd, Arm::B) {
                -weight * y_obs[i]
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// `2^N g1(y)` at all-A, `2^N g2(y)` at all-B, zero elsewhere.
pub fn additive_unbiased_estimator(
    z: &Assignment,
    y_obs: &[f64],
    first: &LinearFunctional,
    second: &LinearFunctional,
) -> Result<f64> {
    let scale = 2f64.powi(z.len() as i32);
    if z.is_all(Arm::A) {
        Ok(scale * first.apply(y_obs)?)
    } else if z.is_all(Arm::B) {
        Ok(scale * second.apply(y_obs)?)
    } else {
        Ok(0.0)
    }
}

/// `(2^N / N) y_i` when `z = Z^{(i)}`, zero elsewhere.
pub fn primary_unbiased_estimator(z: &Assignment, y_obs: &[f64]) -> f64 {
    match z.single_treated_unit() {
        Some(i) => 2f64.powi(z.len() as i32) / z.len() as f64 * y_obs[i],
        None => 0.0,
    }
}

pub fn tabular_evaluate(est: &TabularEstimator, z: &Assignment, y_obs: &[f64]) -> Result<f64> {
    est.evaluate(z, y_obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn z(s: &str) -> Assignment {
        s.parse().unwrap()
    }

    #[test]
    fn diff_in_means_examples() {
        let crd = Design::crd(4, 2).unwrap();
        assert_eq!(diff_in_means(&z("AABB"), &[3.0, 1.0, 2.0, 0.0], &crd).unwrap(), 1.0);
        assert_eq!(diff_in_means(&z("ABAB"), &[7.0; 4], &crd).unwrap(), 0.0);
        let crd = Design::crd(2, 1).unwrap();
        assert_eq!(diff_in_means(&z("AB"), &[5.0, 3.0], &crd).unwrap(), 2.0);
        let bd = Design::bd(2).unwrap();
        assert!(matches!(diff_in_means(&z("AB"), &[5.0, 3.0], &bd), Err(LabError::InvalidDesign(_))));
    }

    #[test]
    fn realized_diff_in_means_handles_empty_groups() {
        let bd = Design::bd(2).unwrap();
        assert_eq!(Estimator::DiffMeans.evaluate(&bd, &z("AA"), &[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(Estimator::DiffMeans.evaluate(&bd, &z("BB"), &[1.0, 3.0]).unwrap(), -2.0);
    }

    #[test]
    fn ht_examples() {
        let bd = Design::bd(2).unwrap();
        let idx = NeighborhoodIndex::build(&Graph::complete(2), 1);
        assert_eq!(ht_estimate(&z("AA"), &[1.0, 1.0], &idx, &bd).unwrap(), 4.0);
        assert_eq!(ht_estimate(&z("AB"), &[1.0, 1.0], &idx, &bd).unwrap(), 0.0);
        assert_eq!(ht_estimate(&z("BB"), &[1.0, 1.0], &idx, &bd).unwrap(), -4.0);
        let idx = NeighborhoodIndex::build(&Graph::empty(2), 1);
        assert_eq!(ht_estimate(&z("AB"), &[2.0, 4.0], &idx, &bd).unwrap(), -2.0);
        let crd = Design::crd(2, 1).unwrap();
        assert!(matches!(ht_estimate(&z("AB"), &[2.0, 4.0], &idx, &crd), Err(LabError::UnsupportedDesign(_))));
    }

    #[test]
    fn additive_unbiased_examples() {
        let (g1, g2) = Estimand::Ate.additive_parts(2).unwrap();
        assert_eq!(additive_unbiased_estimator(&z("AA"), &[1.0, 1.0], &g1, &g2).unwrap(), 4.0);
        assert_eq!(additive_unbiased_estimator(&z("AB"), &[9.0, 1.0], &g1, &g2).unwrap(), 0.0);
        assert_eq!(additive_unbiased_estimator(&z("BB"), &[1.0, 3.0], &g1, &g2).unwrap(), -8.0);
    }

    #[test]
    fn primary_unbiased_examples() {
        assert_eq!(primary_unbiased_estimator(&z("AB"), &[4.0, 7.0]), 8.0);
        assert_eq!(primary_unbiased_estimator(&z("AA"), &[4.0, 7.0]), 0.0);
        assert_eq!(primary_unbiased_estimator(&z("BAB"), &[1.0, 5.0, 1.0]), 8.0 / 3.0 * 5.0);
    }

    #[test]
    fn tabular_examples() {
        let mut t = TabularEstimator::new();
        t.insert(z("AB"), &[0.5, 1.0], 1.5);
        assert_eq!(tabular_evaluate(&t, &z("AB"), &[0.5, 1.0]).unwrap(), 1.5);
        assert!(matches!(t.evaluate(&z("BA"), &[0.5, 1.0]), Err(LabError::IncompleteEstimator(_))));
        let empty = TabularEstimator::new();
        assert!(matches!(empty.evaluate(&z("AB"), &[0.0, 0.0]), Err(LabError::IncompleteEstimator(_))));
        let back = TabularEstimator::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.to_csv(), "assignment,ykey,value\nAB,0.5;1,1.5\n");
    }

    #[test]
    fn negative_zero_keys_collide() {
        assert_eq!(YKey::new(&[-0.0, 1.0]), YKey::new(&[0.0, 1.0]));
    }
}
