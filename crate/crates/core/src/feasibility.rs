//! Finite feasibility check for unbiased estimation.
//!
//! Every `(assignment, observed vector)` pair reachable from a family of
//! outcome tables becomes an unknown `ĝ(z, y)`. Each table contributes one
//! linear constraint `Σ_z P(z) ĝ(z, y_t(z)) = θ(t)`. The system is solved in
//! the least-squares sense; a vanishing residual yields a tabular witness, a
//! residual bounded away from zero certifies that no estimator is unbiased
//! over the family (and hence over all tables).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{Assignment, Design};
use crate::error::{LabError, Result};
use crate::estimators::{additive_unbiased_estimator, primary_unbiased_estimator, TabularEstimator, YKey};
use crate::outcomes::{Estimand, PotentialOutcomeTable};

pub const FEASIBILITY_MAX_N: usize = 6;
pub const MAX_GRID: usize = 4;
/// Residual at or below which the system is declared solvable.
pub const FEASIBLE_TOL: f64 = 1e-9;
/// Residual above which the system is declared unsolvable.
pub const INFEASIBLE_TOL: f64 = 1e-6;
/// Largest acceptable condition estimate of the retained triangular block.
pub const CONDITION_GUARD: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityStatus {
    Feasible { witness: TabularEstimator },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub status: FeasibilityStatus,
    /// `‖A x − b‖₂` at the least-squares solution.
    pub residual: f64,
    pub family_size: usize,
    pub unknowns: usize,
    pub rank: usize,
    pub condition: f64,
}

impl FeasibilityCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible { .. })
    }

    pub fn witness(&self) -> Option<&TabularEstimator> {
        match &self.status {
            FeasibilityStatus::Feasible { witness } => Some(witness),
            FeasibilityStatus::Infeasible => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry {
            assignment: String,
            ykey: String,
            value: f64,
        }
        let mut doc = serde_json::json!({
            "status": if self.is_feasible() { "feasible" } else { "infeasible" },
            "residual": self.residual,
            "family_size": self.family_size,
            "unknowns": self.unknowns,
            "rank": self.rank,
            "condition": self.condition,
        });
        if let Some(w) = self.witness() {
            let entries: Vec<Entry> = w
                .iter()
                .map(|(z, k, v)| Entry { assignment: z.to_string(), ykey: k.to_string(), value: v })
                .collect();
            doc["witness"] = serde_json::to_value(entries).expect("plain data serializes");
        }
        doc
    }
}

/// The minimal family the impossibility arguments need: every assignment off
/// the estimand's boundary sees the constant vector `y0`, and each boundary
/// assignment sees a constant vector; all constants range over `grid`.
pub fn default_witness_family(n: usize, estimand: &Estimand, grid: &[f64]) -> Result<Vec<PotentialOutcomeTable>> {
    if grid.is_empty() || grid.len() > MAX_GRID {
        return Err(LabError::InvalidArgument(format!("grid must hold 1..={MAX_GRID} values")));
    }
    let boundary = estimand.boundary(n)?;
    let slots = boundary.len() + 1;
    let combos = grid.len().pow(slots as u32);
    let mut family = Vec::with_capacity(combos);
    for mut c in 0..combos {
        let mut pick = Vec::with_capacity(slots);
        for _ in 0..slots {
            pick.push(grid[c % grid.len()]);
            c /= grid.len();
        }
        let y0 = pick[0];
        let table = PotentialOutcomeTable::arbitrary_from_fn(n, |z| {
            let v = boundary.iter().position(|b| b == z).map_or(y0, |k| pick[k + 1]);
            vec![v; n]
        })?;
        family.push(table);
    }
    Ok(family)
}

/// Decides whether some estimator is unbiased for `estimand` over `family`.
pub fn unbiased_feasibility(
    design: &Design,
    estimand: &Estimand,
    family: &[PotentialOutcomeTable],
) -> Result<FeasibilityCertificate> {
    if family.is_empty() {
        return Err(LabError::InvalidArgument("witness family is empty".into()));
    }
    let n = design.n();
    if n > FEASIBILITY_MAX_N {
        return Err(LabError::Capacity(format!(
            "feasibility analysis is capped at N={FEASIBILITY_MAX_N}, got {n}"
        )));
    }
    if let Some(t) = family.iter().find(|t| t.n() != n) {
        return Err(LabError::InvalidArgument(format!("family table has {} units, design has {n}", t.n())));
    }
    let support = design.enumerate_support()?;

    let mut columns: BTreeMap<(Assignment, YKey), usize> = BTreeMap::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(family.len());
    let mut rhs = Vec::with_capacity(family.len());
    for table in family {
        let mut row = Vec::with_capacity(support.len());
        for (z, p) in &support {
            let key = YKey::new(&table.observed_vector(z)?);
            let next = columns.len();
            let col = *columns.entry((*z, key)).or_insert(next);
            row.push((col, *p));
        }
        rows.push(row);
        rhs.push(estimand.value(table)?);
    }

    let (m, k) = (rows.len(), columns.len());
    let mut a = DMatrix::<f64>::zeros(m, k);
    for (r, row) in rows.iter().enumerate() {
        for &(c, p) in row {
            a[(r, c)] += p;
        }
    }
    let b = DVector::from_vec(rhs);

    let (x, rank, condition) = min_norm_least_squares(&a, &b)?;
    if condition > CONDITION_GUARD {
        return Err(LabError::NumericallyAmbiguous(format!(
            "constraint matrix condition number {condition:e} exceeds {CONDITION_GUARD:e}"
        )));
    }
    let gap = &b - &a * &x;
    let residual = gap.norm();
    // At a least-squares optimum the gap is orthogonal to every column; it
    // then certifies infeasibility on its own (Aᵀλ = 0, λᵀb = ‖λ‖² > 0).
    let stationarity = (a.transpose() * &gap).norm();
    if stationarity > FEASIBLE_TOL * a.norm().max(1.0) * b.norm().max(1.0) {
        return Err(LabError::NumericallyAmbiguous(format!(
            "least-squares solution is not stationary (|A^T r| = {stationarity:e})"
        )));
    }

    let status = if residual <= FEASIBLE_TOL {
        let mut witness = TabularEstimator::new();
        for ((z, key), &c) in &columns {
            witness.insert_key(*z, key.clone(), x[c]);
        }
        for (r, table) in family.iter().enumerate() {
            let mean: f64 = support
                .iter()
                .map(|(z, p)| Ok(p * witness.evaluate(z, &table.observed_vector(z)?)?))
                .sum::<Result<f64>>()?;
            if (mean - b[r]).abs() > FEASIBLE_TOL {
                return Err(LabError::NumericallyAmbiguous(format!(
                    "witness misses family table {r}: expectation {mean}, estimand {}",
                    b[r]
                )));
            }
        }
        FeasibilityStatus::Feasible { witness }
    } else if residual > INFEASIBLE_TOL {
        FeasibilityStatus::Infeasible
    } else {
        return Err(LabError::NumericallyAmbiguous(format!(
            "residual {residual:e} lies between {FEASIBLE_TOL:e} and {INFEASIBLE_TOL:e}"
        )));
    };
    Ok(FeasibilityCertificate { status, residual, family_size: m, unknowns: k, rank, condition })
}

/// Minimum-norm least-squares solution by complete orthogonal decomposition.
///
/// A column-pivoted QR of `A` reveals the rank `r`; a second QR of the
/// leading `r` rows of its triangular factor gives the minimum-norm point.
/// Returns the solution, the rank and `|R₀₀| / |R_{r−1,r−1}|` as the
/// condition estimate.
fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize, f64)> {
    let (m, k) = a.shape();
    let cp = a.clone().col_piv_qr();
    let (q, r, p) = (cp.q(), cp.r(), cp.p());
    let r00 = r[(0, 0)].abs();
    let tol = r00 * f64::EPSILON * m.max(k) as f64;
    let rank = (0..m.min(k)).take_while(|&i| r[(i, i)].abs() > tol).count();
    if rank == 0 {
        return Ok((DVector::zeros(k), 0, f64::INFINITY));
    }
    let condition = r00 / r[(rank - 1, rank - 1)].abs();
    let c = q.columns(0, rank).transpose() * b;
    let lower = r.rows(0, rank).transpose().qr();
    let (w, t) = (lower.q(), lower.r());
    let coeffs = t
        .transpose()
        .solve_lower_triangular(&c)
        .ok_or_else(|| LabError::NumericallyAmbiguous("rank-deficient triangular factor".into()))?;
    let mut x = w * coeffs;
    p.inv_permute_rows(&mut x);
    Ok((x, rank, condition))
}

/// How a witness departs from the zero-offset unbiased estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetReport {
    /// Largest `|Σ_z P(z) C_t(z)|` over family tables `t`, with
    /// `C_t(z) = witness(z, y_t(z)) − reference(z, y_t(z))`.
    pub max_weighted_offset_sum: f64,
    /// Largest spread of `C(z, ·)` across observed vectors at a fixed `z`.
    pub max_offset_spread: f64,
    /// Largest `|C|` on the estimand's boundary assignments.
    pub max_boundary_offset: f64,
}

/// Compares a witness with the zero-offset estimator for `estimand` (the
/// additive form for additive estimands, the single-treated form for the
/// primary effect) across `family`.
pub fn offset_analysis(
    witness: &TabularEstimator,
    design: &Design,
    estimand: &Estimand,
    family: &[PotentialOutcomeTable],
) -> Result<OffsetReport> {
    let n = design.n();
    let parts = estimand.additive_parts(n);
    let reference = |z: &Assignment, y: &[f64]| -> Result<f64> {
        match &parts {
            Some((g1, g2)) => additive_unbiased_estimator(z, y, g1, g2),
            None => Ok(primary_unbiased_estimator(z, y)),
        }
    };
    let boundary = estimand.boundary(n)?;
    let support = design.enumerate_support()?;
    let mut per_z: BTreeMap<Assignment, (f64, f64)> = BTreeMap::new();
    let mut max_sum = 0.0f64;
    let mut max_boundary = 0.0f64;
    for table in family {
        let mut sum = 0.0;
        for (z, p) in &support {
            let y = table.observed_vector(z)?;
            let c = witness.evaluate(z, &y)? - reference(z, &y)?;
            sum += p * c;
            let e = per_z.entry(*z).or_insert((c, c));
            e.0 = e.0.min(c);
            e.1 = e.1.max(c);
            if boundary.contains(z) {
                max_boundary = max_boundary.max(c.abs());
            }
        }
        max_sum = max_sum.max(sum.abs());
    }
    let spread = per_z.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    Ok(OffsetReport { max_weighted_offset_sum: max_sum, max_offset_spread: spread, max_boundary_offset: max_boundary })
}
