//! Potential-outcome tables keyed by effective treatment, and estimands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{lexicographic, Arm, Assignment};
use crate::error::{LabError, Result};
use crate::graph::{Graph, InterferenceStructure};

/// Largest `N` for which an arbitrary-interference table is materialized.
pub const ARBITRARY_CAP: usize = 14;
/// Largest reference group a k-local table may carry.
pub const KLOCAL_GROUP_CAP: usize = 20;

/// Declared outcome bounds `K < Y < M` (open interval).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// `Y_i(z)` for every unit, stored per effective treatment.
///
/// Unit `i`'s values live in a vector of length `2^{|G_i|}` indexed by the
/// code of `z` restricted to `G_i` (bit `j` is the arm of the `j`-th smallest
/// node of `G_i`, B = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeTable {
    structure: InterferenceStructure,
    groups: Vec<Vec<usize>>,
    values: Vec<Vec<Option<f64>>>,
    bounds: Option<Bounds>,
}

fn group_cap_check(structure: &InterferenceStructure) -> Result<()> {
    match structure {
        InterferenceStructure::Arbitrary { n } if *n > ARBITRARY_CAP => Err(LabError::Capacity(
            format!("arbitrary-interference tables are capped at N={ARBITRARY_CAP}, got {n}"),
        )),
        InterferenceStructure::KLocal { index, .. } if index.max_size() > KLOCAL_GROUP_CAP => {
            Err(LabError::Capacity(format!(
                "k-local tables are capped at |N_i| <= {KLOCAL_GROUP_CAP}, got {}",
                index.max_size()
            )))
        }
        _ => Ok(()),
    }
}

impl PotentialOutcomeTable {
    /// A table with every entry missing.
    pub fn empty(structure: InterferenceStructure) -> Result<Self> {
        group_cap_check(&structure)?;
        let n = structure.n();
        let groups: Vec<Vec<usize>> = (0..n).map(|i| structure.reference_group(i)).collect();
        let values = groups.iter().map(|g| vec![None; 1usize << g.len()]).collect();
        Ok(Self { structure, groups, values, bounds: None })
    }

    /// Fills every entry with `f(unit, code)`.
    pub fn from_fn(
        structure: InterferenceStructure,
        mut f: impl FnMut(usize, u64) -> f64,
    ) -> Result<Self> {
        let mut table = Self::empty(structure)?;
        for (i, vals) in table.values.iter_mut().enumerate() {
            for (code, v) in vals.iter_mut().enumerate() {
                *v = Some(f(i, code as u64));
            }
        }
        Ok(table)
    }

    pub fn constant(structure: InterferenceStructure, c: f64) -> Result<Self> {
        Self::from_fn(structure, |_, _| c)
    }

    /// No-interference table from the two boundary vectors.
    pub fn no_interference(y_a: &[f64], y_b: &[f64]) -> Result<Self> {
        if y_a.len() != y_b.len() {
            return Err(LabError::InvalidArgument("Y(A) and Y(B) differ in length".into()));
        }
        let structure = InterferenceStructure::NoInterference { n: y_a.len() };
        Self::from_fn(structure, |i, code| if code == 0 { y_a[i] } else { y_b[i] })
    }

    /// Arbitrary-interference table from a full outcome vector per assignment.
    pub fn arbitrary_from_fn(n: usize, mut f: impl FnMut(&Assignment) -> Vec<f64>) -> Result<Self> {
        let mut table = Self::empty(InterferenceStructure::Arbitrary { n })?;
        for z in lexicographic(n) {
            let row = f(&z);
            if row.len() != n {
                return Err(LabError::InvalidArgument(format!(
                    "outcome row for {z} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (i, y) in row.into_iter().enumerate() {
                table.values[i][z.bits() as usize] = Some(y);
            }
        }
        Ok(table)
    }

    /// Independent uniform draws on `(K, M)` per unit and effective treatment.
    pub fn generate_random(
        structure: InterferenceStructure,
        lower: f64,
        upper: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(lower >= 0.0 && lower < upper && upper.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "need 0 <= K < M, got K={lower}, M={upper}"
            )));
        }
        let eps = 1e-9 * (upper - lower);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Self::from_fn(structure, |_, _| rng.random_range(lower + eps..upper - eps))?;
        table.bounds = Some(Bounds { lower, upper });
        Ok(table)
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self> {
        self.bounds = Some(bounds);
        self.check_bounds()?;
        Ok(self)
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    /// Checks `K < Y < M` (and `Y > 0`) on every present entry.
    pub fn check_bounds(&self) -> Result<()> {
        let Some(Bounds { lower, upper }) = self.bounds else {
            return Ok(());
        };
        for (i, vals) in self.values.iter().enumerate() {
            for v in vals.iter().flatten() {
                if !(*v > lower.max(0.0) && *v < upper) {
                    return Err(LabError::InvalidArgument(format!(
                        "outcome {v} of unit {i} violates {lower} < Y < {upper}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> &InterferenceStructure {
        &self.structure
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.groups[i]
    }

    pub fn set(&mut self, i: usize, code: u64, value: f64) -> Result<()> {
        let slot = self
            .values
            .get_mut(i)
            .and_then(|v| v.get_mut(code as usize))
            .ok_or_else(|| LabError::InvalidArgument(format!("no slot for unit {i}, code {code}")))?;
        *slot = Some(value);
        Ok(())
    }

    pub fn value_at_code(&self, i: usize, code: u64) -> Option<f64> {
        self.values.get(i)?.get(code as usize).copied().flatten()
    }

    /// `Y_i(z)`.
    pub fn outcome(&self, i: usize, z: &Assignment) -> Result<f64> {
        if z.len() != self.n() {
            return Err(LabError::InvalidArgument(format!(
                "assignment has {} units, table has {}",
                z.len(),
                self.n()
            )));
        }
        if i >= self.n() {
            return Err(LabError::InvalidArgument(format!("unit {i} out of range")));
        }
        let code = z.restrict_code(&self.groups[i]);
        self.values[i][code as usize]
            .ok_or_else(|| LabError::IncompleteTable(format!("missing Y_{i} at {z}")))
    }

    pub fn observed_vector(&self, z: &Assignment) -> Result<Vec<f64>> {
        (0..self.n()).map(|i| self.outcome(i, z)).collect()
    }

    /// The table with the roles of A and B exchanged: `Y'(z) = Y(complement of z)`.
    pub fn swap_arms(&self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.groups)
            .map(|(vals, g)| {
                let full = (1usize << g.len()) - 1;
                (0..vals.len()).map(|code| vals[code ^ full]).collect()
            })
            .collect();
        Self { structure: self.structure.clone(), groups: self.groups.clone(), values, bounds: self.bounds }
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values.iter().flatten().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// CSV form for arbitrary-interference tables: `assignment,unit,outcome`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("assignment,unit,outcome\n");
        for z in lexicographic(self.n()) {
            for i in 0..self.n() {
                if let Ok(y) = self.outcome(i, &z) {
                    let _ = writeln!(out, "{z},{i},{y:?}");
                }
            }
        }
        Ok(out)
    }

    /// Parses the arbitrary-interference CSV. Missing rows stay missing.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("assignment,unit,outcome") => {}
            other => {
                return Err(LabError::Parse(format!(
                    "expected header \"assignment,unit,outcome\", got {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [z, i, y] = fields.as_slice() else {
                return Err(LabError::Parse(format!("bad table row {line:?}")));
            };
            let z: Assignment = z.parse()?;
            let i: usize = i.parse().map_err(|_| LabError::Parse(format!("bad unit in {line:?}")))?;
            let y: f64 = y.parse().map_err(|_| LabError::Parse(format!("bad outcome in {line:?}")))?;
            rows.push((z, i, y));
        }
        let n = rows
            .first()
            .map(|(z, _, _)| z.len())
            .ok_or_else(|| LabError::Parse("table CSV has no rows".into()))?;
        let mut table = Self::empty(InterferenceStructure::Arbitrary { n })?;
        for (z, i, y) in rows {
            if z.len() != n || i >= n {
                return Err(LabError::Parse(format!("row ({z}, {i}) does not fit N={n}")));
            }
            table.values[i][z.bits() as usize] = Some(y);
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        let structure = match &self.structure {
            InterferenceStructure::NoInterference { n } => StructureJson::NoInterference { n: *n },
            InterferenceStructure::KLocal { graph, index } => {
                StructureJson::KLocal { k: index.k(), graph: graph.clone() }
            }
            InterferenceStructure::Arbitrary { n } => StructureJson::Arbitrary { n: *n },
        };
        let units = self
            .groups
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(unit, (group, vals))| UnitJson {
                unit,
                group: group.clone(),
                outcomes: vals
                    .iter()
                    .enumerate()
                    .filter_map(|(code, v)| v.map(|v| (code_to_label(code as u64, group.len()), v)))
                    .collect(),
            })
            .collect();
        let doc = TableJson { structure, bounds: self.bounds, units };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableJson = serde_json::from_str(text)?;
        let structure = doc.structure.into_structure();
        let mut table = Self::empty(structure)?;
        for unit in doc.units {
            if unit.unit >= table.n() {
                return Err(LabError::Parse(format!("unit {} out of range", unit.unit)));
            }
            if unit.group != table.groups[unit.unit] {
                return Err(LabError::Parse(format!(
                    "unit {} declares group {:?}, structure implies {:?}",
                    unit.unit, unit.group, table.groups[unit.unit]
                )));
            }
            for (label, y) in unit.outcomes {
                let code = label_to_code(&label, unit.group.len())?;
                table.values[unit.unit][code as usize] = Some(y);
            }
        }
        if let Some(b) = doc.bounds {
            table = table.with_bounds(b)?;
        }
        Ok(table)
    }
}

fn code_to_label(code: u64, len: usize) -> String {
    (0..len).map(|j| if code >> j & 1 == 1 { 'B' } else { 'A' }).collect()
}

fn label_to_code(label: &str, len: usize) -> Result<u64> {
    if label.len() != len {
        return Err(LabError::Parse(format!("label {label:?} should have {len} arms")));
    }
    label.chars().enumerate().try_fold(0u64, |acc, (j, c)| match c {
        'A' => Ok(acc),
        'B' => Ok(acc | 1 << j),
        _ => Err(LabError::Parse(format!("bad arm {c:?} in {label:?}"))),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StructureJson {
    NoInterference { n: usize },
    KLocal { k: usize, graph: Graph },
    Arbitrary { n: usize },
}

impl StructureJson {
    fn into_structure(self) -> InterferenceStructure {
        match self {
            StructureJson::NoInterference { n } => InterferenceStructure::NoInterference { n },
            StructureJson::KLocal { k, graph } => InterferenceStructure::k_local(graph, k),
            StructureJson::Arbitrary { n } => InterferenceStructure::Arbitrary { n },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitJson {
    unit: usize,
    group: Vec<usize>,
    outcomes: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableJson {
    structure: StructureJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<Bounds>,
    units: Vec<UnitJson>,
}

/// A linear functional of an outcome vector, `Σ_i w_i y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearFunctional {
    pub weights: Vec<f64>,
}

impl LinearFunctional {
    pub fn mean(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn neg_mean(n: usize) -> Self {
        Self { weights: vec![-1.0 / n as f64; n] }
    }

    pub fn apply(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.weights.len() {
            return Err(LabError::InvalidArgument(format!(
                "functional over {} units applied to {} outcomes",
                self.weights.len(),
                y.len()
            )));
        }
        Ok(self.weights.iter().zip(y).map(|(w, v)| w * v).sum())
    }
}

/// Causal estimands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// `mean Y(A) − mean Y(B)`.
    Ate,
    /// `g1(Y(A)) + g2(Y(B))`.
    Additive { first: LinearFunctional, second: LinearFunctional },
    /// `(1/N) Σ_i Y_i(Z^{(i)})`.
    PrimaryEffect,
}

impl Estimand {
    /// `(g1, g2)` for additive estimands; ATE maps to `(mean, −mean)`.
    pub fn additive_parts(&self, n: usize) -> Option<(LinearFunctional, LinearFunctional)> {
        match self {
            Estimand::Ate => Some((LinearFunctional::mean(n), LinearFunctional::neg_mean(n))),
            Estimand::Additive { first, second } => Some((first.clone(), second.clone())),
            Estimand::PrimaryEffect => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimand::Ate => "ate",
            Estimand::Additive { .. } => "additive",
            Estimand::PrimaryEffect => "primary_effect",
        }
    }

    /// Assignments whose outcomes the estimand reads.
    pub fn boundary(&self, n: usize) -> Result<Vec<Assignment>> {
        match self {
            Estimand::Ate | Estimand::Additive { .. } => {
                Ok(vec![Assignment::all(n, Arm::A)?, Assignment::all(n, Arm::B)?])
            }
            Estimand::PrimaryEffect => (0..n).map(|i| Assignment::single_treated(n, i)).collect(),
        }
    }

    /// The estimand evaluated on the boundary outcome vectors of `table`.
    pub fn value(&self, table: &PotentialOutcomeTable) -> Result<f64> {
        let n = table.n();
        match self.additive_parts(n) {
            Some((g1, g2)) => {
                let ya = table.observed_vector(&Assignment::all(n, Arm::A)?)?;
                let yb = table.observed_vector(&Assignment::all(n, Arm::B)?)?;
                Ok(g1.apply(&ya)? + g2.apply(&yb)?)
            }
            None => {
                let total: f64 = (0..n)
                    .map(|i| table.outcome(i, &Assignment::single_treated(n, i)?))
                    .sum::<Result<f64>>()?;
                Ok(total / n as f64)
            }
        }
    }
}

pub fn estimand_value(estimand: &Estimand, table: &PotentialOutcomeTable) -> Result<f64> {
    estimand.value(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(s: &str) -> Assignment {
        s.parse().unwrap()
    }

    #[test]
    fn outcome_examples() {
        let t = PotentialOutcomeTable::no_interference(&[2.0, 5.0], &[1.0, 3.0]).unwrap();
        assert_eq!(t.outcome(0, &z("AB")).unwrap(), 2.0);
        assert_eq!(t.observed_vector(&z("AB")).unwrap(), vec![2.0, 3.0]);

        let t = PotentialOutcomeTable::arbitrary_from_fn(2, |z| {
            let base = z.bits() as f64;
            vec![10.0 + base, 20.0 + base]
        })
        .unwrap();
        assert_eq!(t.observed_vector(&z("AA")).unwrap(), vec![10.0, 20.0]);
        assert_eq!(t.observed_vector(&z("AB")).unwrap(), vec![12.0, 22.0]);
        assert_eq!(t.observed_vector(&z("BA")).unwrap(), vec![11.0, 21.0]);
    }

    #[test]
    fn k_local_flip_outside_group_is_invisible() {
        let s = InterferenceStructure::k_local(Graph::path(4), 1);
        let t = PotentialOutcomeTable::generate_random(s, 0.0, 1.0, 3).unwrap();
        let a = z("AAAA");
        assert_eq!(t.outcome(0, &a).unwrap(), t.outcome(0, &a.with_arm(3, Arm::B)).unwrap());
        assert_ne!(t.outcome(0, &a).unwrap(), t.outcome(0, &a.with_arm(1, Arm::B)).unwrap());
    }

    #[test]
    fn missing_entry_is_incomplete() {
        let t = PotentialOutcomeTable::empty(InterferenceStructure::NoInterference { n: 2 }).unwrap();
        assert!(matches!(t.outcome(0, &z("AB")), Err(LabError::IncompleteTable(_))));
        assert!(matches!(Estimand::Ate.value(&t), Err(LabError::IncompleteTable(_))));
    }

    #[test]
    fn estimand_examples() {
        let t = PotentialOutcomeTable::no_interference(&[3.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(Estimand::Ate.value(&t).unwrap(), 1.0);
        let t = PotentialOutcomeTable::no_interference(&[3.0, 1.0], &[3.0, 1.0]).unwrap();
        assert_eq!(Estimand::Ate.value(&t).unwrap(), 0.0);

        let mut t = PotentialOutcomeTable::empty(InterferenceStructure::Arbitrary { n: 2 }).unwrap();
        t.set(0, z("AB").bits(), 4.0).unwrap();
        t.set(1, z("BA").bits(), 2.0).unwrap();
        assert_eq!(Estimand::PrimaryEffect.value(&t).unwrap(), 3.0);
    }

    #[test]
    fn generator_respects_bounds_and_seed() {
        let s = InterferenceStructure::k_local(Graph::path(5), 1);
        let a = PotentialOutcomeTable::generate_random(s.clone(), 0.0, 1.0, 11).unwrap();
        let b = PotentialOutcomeTable::generate_random(s.clone(), 0.0, 1.0, 11).unwrap();
        assert_eq!(a, b);
        let (lo, hi) = a.min_max().unwrap();
        assert!(lo > 0.0 && hi < 1.0);
        a.check_bounds().unwrap();
        let c = PotentialOutcomeTable::generate_random(s, 2.0, 3.0, 11).unwrap();
        let (lo, hi) = c.min_max().unwrap();
        assert!(lo > 2.0 && hi < 3.0);
    }

    #[test]
    fn generator_caps() {
        let s = InterferenceStructure::Arbitrary { n: 15 };
        assert!(PotentialOutcomeTable::generate_random(s, 0.0, 1.0, 1).unwrap_err().is_capacity());
        let s = InterferenceStructure::k_local(Graph::star(22), 1);
        assert!(PotentialOutcomeTable::generate_random(s, 0.0, 1.0, 1).unwrap_err().is_capacity());
        let s = InterferenceStructure::NoInterference { n: 3 };
        assert!(PotentialOutcomeTable::generate_random(s, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn swap_arms_negates_ate() {
        let s = InterferenceStructure::k_local(Graph::path(4), 1);
        let t = PotentialOutcomeTable::generate_random(s, 0.0, 1.0, 5).unwrap();
        let a = Estimand::Ate.value(&t).unwrap();
        let b = Estimand::Ate.value(&t.swap_arms()).unwrap();
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let t = PotentialOutcomeTable::generate_random(InterferenceStructure::Arbitrary { n: 3 }, 0.0, 1.0, 9)
            .unwrap();
        let back = PotentialOutcomeTable::from_csv(&t.to_csv().unwrap()).unwrap();
        for zz in lexicographic(3) {
            assert_eq!(back.observed_vector(&zz).unwrap(), t.observed_vector(&zz).unwrap());
        }
        let s = InterferenceStructure::k_local(Graph::path(3), 1);
        let t = PotentialOutcomeTable::generate_random(s, 0.0, 1.0, 2).unwrap();
        let back = PotentialOutcomeTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(PotentialOutcomeTable::from_csv("a,b,c\n").is_err());
    }

    #[test]
    fn json_schema_shape() {
        let t = PotentialOutcomeTable::no_interference(&[2.0], &[1.0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["structure"]["kind"], "no_interference");
        assert_eq!(v["units"][0]["outcomes"]["A"], 2.0);
        assert_eq!(v["units"][0]["outcomes"]["B"], 1.0);
    }
}
