//! Assignment vectors and the three assignment mechanisms (CRD, BD, CBD).
//!
//! Assignments are bit-packed into a `u64`: bit `i` is set when unit `i`
//! receives arm B. Support enumeration walks vectors in lexicographic order
//! over units (unit 0 first, A before B).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::binomial;

/// Largest unit count an [`Assignment`] can hold.
pub const MAX_UNITS: usize = 64;

/// Default cap on `N` for exact support enumeration.
pub const ENUMERATION_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::A => Arm::B,
            Arm::B => Arm::A,
        }
    }

    fn as_char(self) -> char {
        match self {
            Arm::A => 'A',
            Arm::B => 'B',
        }
    }
}

/// A length-`N` vector over `{A, B}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    n: usize,
    bits: u64,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_units(n: usize) -> Result<()> {
    if n == 0 {
        return Err(LabError::InvalidArgument("assignment needs at least one unit".into()));
    }
    if n > MAX_UNITS {
        return Err(LabError::Capacity(format!(
            "assignments are limited to {MAX_UNITS} units, got {n}"
        )));
    }
    Ok(())
}

impl Assignment {
    /// Builds an assignment from packed bits (bit `i` set means unit `i` is B).
    pub fn from_bits(n: usize, bits: u64) -> Result<Self> {
        check_units(n)?;
        if bits & !mask(n) != 0 {
            return Err(LabError::InvalidArgument(format!(
                "bits {bits:#x} exceed {n} units"
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn from_arms(arms: &[Arm]) -> Result<Self> {
        check_units(arms.len())?;
        let bits = arms
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &a)| if a == Arm::B { acc | 1 << i } else { acc });
        Ok(Self { n: arms.len(), bits })
    }

    pub fn all(n: usize, arm: Arm) -> Result<Self> {
        check_units(n)?;
        let bits = match arm {
            Arm::A => 0,
            Arm::B => mask(n),
        };
        Ok(Self { n, bits })
    }

    /// `Z^{(i)}`: unit `i` on A, every other unit on B.
    pub fn single_treated(n: usize, i: usize) -> Result<Self> {
        check_units(n)?;
        if i >= n {
            return Err(LabError::InvalidArgument(format!("unit {i} out of range for N={n}")));
        }
        Ok(Self { n, bits: mask(n) & !(1u64 << i) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn arm(&self, i: usize) -> Arm {
        debug_assert!(i < self.n);
        if self.bits >> i & 1 == 1 {
            Arm::B
        } else {
            Arm::A
        }
    }

    pub fn arms(&self) -> impl Iterator<Item = Arm> + '_ {
        (0..self.n).map(|i| self.arm(i))
    }

    pub fn with_arm(mut self, i: usize, arm: Arm) -> Self {
        match arm {
            Arm::A => self.bits &= !(1u64 << i),
            Arm::B => self.bits |= 1u64 << i,
        }
        self
    }

    pub fn count(&self, arm: Arm) -> usize {
        let b = self.bits.count_ones() as usize;
        match arm {
            Arm::A => self.n - b,
            Arm::B => b,
        }
    }

    pub fn is_all(&self, arm: Arm) -> bool {
        self.count(arm) == self.n
    }

    /// If exactly one unit is on A, returns that unit.
    pub fn single_treated_unit(&self) -> Option<usize> {
        if self.count(Arm::A) == 1 {
            let a_bits = !self.bits & mask(self.n);
            Some(a_bits.trailing_zeros() as usize)
        } else {
            None
        }
    }

    /// Packs the arms of `units` (ascending node order) into a code; bit `j`
    /// of the code is the arm of `units[j]`.
    pub fn restrict_code(&self, units: &[usize]) -> u64 {
        units
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &u)| acc | ((self.bits >> u & 1) << j))
    }

    /// True iff every unit in `units` is on `arm`.
    pub fn all_on(&self, units: &[usize], arm: Arm) -> bool {
        units.iter().all(|&u| self.arm(u) == arm)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.arms() {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let arms = s
            .trim()
            .chars()
            .map(|c| match c {
                'A' => Ok(Arm::A),
                'B' => Ok(Arm::B),
                other => Err(LabError::Parse(format!("invalid arm label {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Assignment::from_arms(&arms)
    }
}

/// Iterates all `2^n` assignments in lexicographic order (unit 0 most significant).
pub fn lexicographic(n: usize) -> impl Iterator<Item = Assignment> {
    let total = 1u64 << n;
    (0..total).map(move |c| Assignment {
        n,
        bits: c.reverse_bits() >> (64 - n),
    })
}

/// An assignment mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DesignSpec", into = "DesignSpec")]
pub enum Design {
    /// Completely randomized: exactly `n_a` units on A.
    Crd { n: usize, n_a: usize },
    /// Bernoulli: independent fair coins.
    Bd { n: usize },
    /// Conditional Bernoulli: fair coins with all-A and all-B excluded.
    Cbd { n: usize },
}

/// Wire form of a design, `{"design": "crd"|"bd"|"cbd", "n": .., "n_a": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub design: DesignKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Crd,
    Bd,
    Cbd,
}

impl TryFrom<DesignSpec> for Design {
    type Error = LabError;

    fn try_from(spec: DesignSpec) -> Result<Self> {
        match (spec.design, spec.n_a) {
            (DesignKind::Crd, Some(n_a)) => Design::crd(spec.n, n_a),
            (DesignKind::Crd, None) => Err(LabError::InvalidDesign("crd requires n_a".into())),
            (DesignKind::Bd, None) => Design::bd(spec.n),
            (DesignKind::Cbd, None) => Design::cbd(spec.n),
            (_, Some(_)) => Err(LabError::InvalidDesign("n_a is only valid for crd".into())),
        }
    }
}

impl From<Design> for DesignSpec {
    fn from(d: Design) -> Self {
        match d {
            Design::Crd { n, n_a } => DesignSpec { design: DesignKind::Crd, n, n_a: Some(n_a) },
            Design::Bd { n } => DesignSpec { design: DesignKind::Bd, n, n_a: None },
            Design::Cbd { n } => DesignSpec { design: DesignKind::Cbd, n, n_a: None },
        }
    }
}

/// Which arms an exposure probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureArms {
    Single(Arm),
    Pair(Arm, Arm),
}

impl Design {
    pub fn crd(n: usize, n_a: usize) -> Result<Self> {
        check_units(n)?;
        if n_a == 0 || n_a >= n {
            return Err(LabError::InvalidDesign(format!(
                "crd needs 0 < n_a < n, got n={n}, n_a={n_a}"
            )));
        }
        Ok(Design::Crd { n, n_a })
    }

    pub fn bd(n: usize) -> Result<Self> {
        check_units(n)?;
        Ok(Design::Bd { n })
    }

    pub fn cbd(n: usize) -> Result<Self> {
        check_units(n)?;
        if n < 2 {
            return Err(LabError::InvalidDesign("cbd needs at least two units".into()));
        }
        Ok(Design::Cbd { n })
    }

    pub fn n(&self) -> usize {
        match *self {
            Design::Crd { n, .. } | Design::Bd { n } | Design::Cbd { n } => n,
        }
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self, Design::Bd { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Design::Crd { .. } => "crd",
            Design::Bd { .. } => "bd",
            Design::Cbd { .. } => "cbd",
        }
    }

    /// Number of assignments with positive probability.
    pub fn support_size(&self) -> f64 {
        match *self {
            Design::Crd { n, n_a } => match binomial(n as u64, n_a as u64) {
                Some(c) => c as f64,
                None => unreachable!("n <= 64 keeps binomials inside u128"),
            },
            Design::Bd { n } => 2f64.powi(n as i32),
            Design::Cbd { n } => 2f64.powi(n as i32) - 2.0,
        }
    }

    pub fn pmf(&self, z: &Assignment) -> Result<f64> {
        if z.len() != self.n() {
            return Err(LabError::InvalidArgument(format!(
                "assignment has {} units, design has {}",
                z.len(),
                self.n()
            )));
        }
        Ok(match *self {
            Design::Crd { n_a, .. } => {
                if z.count(Arm::A) == n_a {
                    1.0 / self.support_size()
                } else {
                    0.0
                }
            }
            Design::Bd { n } => 0.5f64.powi(n as i32),
            Design::Cbd { .. } => {
                if z.is_all(Arm::A) || z.is_all(Arm::B) {
                    0.0
                } else {
                    1.0 / self.support_size()
                }
            }
        })
    }

    pub fn enumerate_support(&self) -> Result<Vec<(Assignment, f64)>> {
        self.enumerate_support_with_cap(ENUMERATION_CAP)
    }

    /// Every positive-probability assignment, once, in lexicographic order.
    pub fn enumerate_support_with_cap(&self, cap: usize) -> Result<Vec<(Assignment, f64)>> {
        let n = self.n();
        if n > cap {
            return Err(LabError::Capacity(format!(
                "exact enumeration is capped at N={cap} (got N={n}); use the Monte Carlo path"
            )));
        }
        let p = 1.0 / self.support_size();
        let keep = |z: &Assignment| match *self {
            Design::Crd { n_a, .. } => z.count(Arm::A) == n_a,
            Design::Bd { .. } => true,
            Design::Cbd { .. } => !(z.is_all(Arm::A) || z.is_all(Arm::B)),
        };
        Ok(lexicographic(n).filter(keep).map(|z| (z, p)).collect())
    }

    pub fn sample(&self, seed: u64) -> Assignment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let n = self.n();
        let coin = |rng: &mut R| Assignment { n, bits: rng.random::<u64>() & mask(n) };
        match *self {
            Design::Bd { .. } => coin(rng),
            Design::Crd { n_a, .. } => {
                let mut bits = mask(n);
                for i in index::sample(rng, n, n_a) {
                    bits &= !(1u64 << i);
                }
                Assignment { n, bits }
            }
            Design::Cbd { .. } => loop {
                let z = coin(rng);
                if !(z.is_all(Arm::A) || z.is_all(Arm::B)) {
                    break z;
                }
            },
        }
    }

    /// Exposure probability of one or two closed neighborhoods (BD only).
    ///
    /// Single: `(1/2)^{|N_i|}`. Same-arm pair: `(1/2)^{|N_i ∪ N_j|}`.
    /// Cross-arm pair: zero when the neighborhoods meet, else the product.
    pub fn exposure_probability(
        &self,
        nbhd_i: &[usize],
        nbhd_j: Option<&[usize]>,
        arms: ExposureArms,
    ) -> Result<f64> {
        if !self.is_bernoulli() {
            return Err(LabError::UnsupportedDesign(format!(
                "exposure probabilities are only available in closed form for bd, not {}",
                self.name()
            )));
        }
        let half_pow = |k: usize| 0.5f64.powi(k as i32);
        let set_i: BTreeSet<usize> = nbhd_i.iter().copied().collect();
        match (nbhd_j, arms) {
            (None, ExposureArms::Single(_)) => Ok(half_pow(set_i.len())),
            (Some(nj), ExposureArms::Pair(a, b)) => {
                let set_j: BTreeSet<usize> = nj.iter().copied().collect();
                if a == b {
                    Ok(half_pow(set_i.union(&set_j).count()))
                } else if set_i.intersection(&set_j).next().is_some() {
                    Ok(0.0)
                } else {
                    Ok(half_pow(set_i.len()) * half_pow(set_j.len()))
                }
            }
            _ => Err(LabError::InvalidArgument(
                "pass one arm for a single neighborhood and two for a pair".into(),
            )),
        }
    }
}
