//! Exact design moments by support enumeration, the Neyman variance terms,
//! the closed-form Horvitz–Thompson variance under BD, and the worst-case
//! MSE construction for arbitrary interference.

use serde::Serialize;

use crate::design::{Arm, Assignment, Design, ENUMERATION_CAP};
use crate::error::{LabError, Result};
use crate::estimators::Estimator;
use crate::graph::{Graph, InterferenceStructure, NeighborhoodIndex};
use crate::numeric::CompensatedSum;
use crate::outcomes::{Bounds, Estimand, LinearFunctional, PotentialOutcomeTable};

/// Design-based moments of an estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub expectation: f64,
    pub variance: f64,
    pub mse_vs_estimand: f64,
    pub support_size: usize,
    pub estimand: f64,
    pub bias: f64,
}

pub fn exact_moments(
    estimator: &Estimator,
    design: &Design,
    table: &PotentialOutcomeTable,
    estimand: &Estimand,
) -> Result<MomentReport> {
    if table.n() != design.n() {
        return Err(LabError::InvalidArgument(format!(
            "table has {} units, design has {}",
            table.n(),
            design.n()
        )));
    }
    let support = design.enumerate_support_with_cap(ENUMERATION_CAP)?;
    let theta = estimand.value(table)?;
    let values = support
        .iter()
        .map(|(z, p)| {
            let y = table.observed_vector(z)?;
            Ok((*p, estimator.evaluate(design, z, &y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let expectation = values.iter().map(|&(p, v)| p * v).collect::<CompensatedSum>().value();
    let variance = values
        .iter()
        .map(|&(p, v)| p * (v - expectation).powi(2))
        .collect::<CompensatedSum>()
        .value();
    let mse = values.iter().map(|&(p, v)| p * (v - theta).powi(2)).collect::<CompensatedSum>().value();
    Ok(MomentReport {
        expectation,
        variance,
        mse_vs_estimand: mse,
        support_size: support.len(),
        estimand: theta,
        bias: expectation - theta,
    })
}

/// The finite-population variance pieces of the difference in means under a CRD.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeymanTerms {
    pub v_a: f64,
    pub v_b: f64,
    pub v_theta: f64,
    /// `V_A/N_A + V_B/N_B − V_θ/N`.
    pub variance: f64,
    /// `4 M² / (N − 1)`.
    pub bound: f64,
    pub m: f64,
    /// Enumeration variance, when `N` is within the enumeration cap.
    pub enumerated_variance: Option<f64>,
}

/// Neyman decomposition for a no-interference table and `N_A` treated units.
///
/// `M` is taken from the table's declared upper bound, or from its largest
/// outcome when no bound is declared.
pub fn neyman_variance_terms(table: &PotentialOutcomeTable, n_a: usize) -> Result<NeymanTerms> {
    let InterferenceStructure::NoInterference { n } = *table.structure() else {
        return Err(LabError::InvalidArgument("neyman terms need a no-interference table".into()));
    };
    if n < 2 {
        return Err(LabError::InvalidArgument("neyman terms need N >= 2".into()));
    }
    let design = Design::crd(n, n_a)?;
    let ya = table.observed_vector(&Assignment::all(n, Arm::A)?)?;
    let yb = table.observed_vector(&Assignment::all(n, Arm::B)?)?;
    let nf = n as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let (ma, mb) = (mean(&ya), mean(&yb));
    let theta = ma - mb;
    let ss = |it: &mut dyn Iterator<Item = f64>| it.collect::<CompensatedSum>().value() / (nf - 1.0);
    let v_a = ss(&mut ya.iter().map(|y| (y - ma).powi(2)));
    let v_b = ss(&mut yb.iter().map(|y| (y - mb).powi(2)));
    let v_theta = ss(&mut ya.iter().zip(&yb).map(|(a, b)| (a - b - theta).powi(2)));
    let n_b = n - n_a;
    let variance = v_a / n_a as f64 + v_b / n_b as f64 - v_theta / nf;
    let m = match table.bounds() {
        Some(Bounds { upper, .. }) => upper,
        None => table.min_max().map(|(lo, hi)| hi.max(-lo)).unwrap_or(0.0),
    };
    let bound = 4.0 * m * m / (nf - 1.0);

    let enumerated_variance = if n <= ENUMERATION_CAP {
        let report = exact_moments(&Estimator::DiffMeans, &design, table, &Estimand::Ate)?;
        let tol = 1e-10 * report.variance.abs().max(1.0);
        if (report.variance - variance).abs() > tol {
            return Err(LabError::NumericallyAmbiguous(format!(
                "neyman identity off: formula {variance}, enumeration {}",
                report.variance
            )));
        }
        Some(report.variance)
    } else {
        None
    };
    Ok(NeymanTerms { v_a, v_b, v_theta, variance, bound, m, enumerated_variance })
}

/// The three pieces of the Horvitz–Thompson variance under BD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HtVariance {
    pub v_a: f64,
    pub v_b: f64,
    pub cov: f64,
    /// `V_A + V_B − 2 Cov`.
    pub total: f64,
}

/// Closed-form variance of the HT estimator given the boundary outcomes.
///
/// Pairwise terms use the overlap `|N_i ∩ N_j|` of the closed neighborhoods.
pub fn ht_variance_from_boundary(index: &NeighborhoodIndex, y_a: &[f64], y_b: &[f64]) -> Result<HtVariance> {
    let n = index.n();
    if y_a.len() != n || y_b.len() != n {
        return Err(LabError::InvalidArgument("boundary outcome vectors must have N entries".into()));
    }
    let mut va = CompensatedSum::new();
    let mut vb = CompensatedSum::new();
    let mut cov = CompensatedSum::new();
    for i in 0..n {
        let w = 2f64.powi(index.neighborhood(i).len() as i32) - 1.0;
        va.add(w * y_a[i] * y_a[i]);
        vb.add(w * y_b[i] * y_b[i]);
        cov.add(y_a[i] * y_b[i]);
        for j in 0..n {
            if j == i {
                continue;
            }
            let shared = index.overlap(i, j);
            if shared > 0 {
                let w = 2f64.powi(shared as i32) - 1.0;
                va.add(w * y_a[i] * y_a[j]);
                vb.add(w * y_b[i] * y_b[j]);
                cov.add(y_a[i] * y_b[j]);
            }
        }
    }
    let n2 = (n * n) as f64;
    let v_a = va.value() / n2;
    let v_b = vb.value() / n2;
    let cov = -cov.value() / n2;
    Ok(HtVariance { v_a, v_b, cov, total: v_a + v_b - 2.0 * cov })
}

pub fn ht_variance_closed_form(graph: &Graph, k: usize, table: &PotentialOutcomeTable) -> Result<HtVariance> {
    let index = NeighborhoodIndex::build(graph, k);
    ht_variance_for_index(&index, table)
}

pub fn ht_variance_for_index(index: &NeighborhoodIndex, table: &PotentialOutcomeTable) -> Result<HtVariance> {
    let n = index.n();
    if table.n() != n {
        return Err(LabError::InvalidArgument("table and graph sizes differ".into()));
    }
    let y_a = table.observed_vector(&Assignment::all(n, Arm::A)?)?;
    let y_b = table.observed_vector(&Assignment::all(n, Arm::B)?)?;
    ht_variance_from_boundary(index, &y_a, &y_b)
}

/// Result of the worst-case table construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryReport {
    pub table: PotentialOutcomeTable,
    pub mse: f64,
    /// Estimand value realized by the adversarial table.
    pub estimand: f64,
    /// `M²/8 · (1 − 10 ε / M)`.
    pub bound: f64,
    pub bound_holds: bool,
}

/// Interior offset used to keep adversarial outcomes strictly inside `(0, M)`.
pub const ADVERSARY_EPS: f64 = 1e-6;

/// Boundary vectors `(Y(A), Y(B))` inside `[ε, M − ε]` whose estimand value is
/// as close to `target` as the box allows.
fn realize_target(first: &LinearFunctional, second: &LinearFunctional, m: f64, eps: f64, target: f64) -> (Vec<f64>, Vec<f64>) {
    let weights: Vec<f64> = first.weights.iter().chain(&second.weights).copied().collect();
    let (lo_pt, hi_pt): (Vec<f64>, Vec<f64>) = weights
        .iter()
        .map(|&w| {
            if w > 0.0 {
                (eps, m - eps)
            } else if w < 0.0 {
                (m - eps, eps)
            } else {
                (m / 2.0, m / 2.0)
            }
        })
        .unzip();
    let eval = |y: &[f64]| weights.iter().zip(y).map(|(w, v)| w * v).sum::<f64>();
    let (f_lo, f_hi) = (eval(&lo_pt), eval(&hi_pt));
    let s = if f_hi > f_lo { ((target - f_lo) / (f_hi - f_lo)).clamp(0.0, 1.0) } else { 0.0 };
    let y: Vec<f64> = lo_pt.iter().zip(&hi_pt).map(|(a, b)| a + s * (b - a)).collect();
    let n = first.weights.len();
    (y[..n].to_vec(), y[n..].to_vec())
}

/// Builds the worst-case arbitrary-interference table for `estimator`: every
/// assignment off `{all-A, all-B}` sees the constant vector `M/2`, and the
/// boundary vectors push the estimand to 0 or (nearly) `M`, whichever yields
/// the larger MSE.
pub fn mse_adversary(estimator: &Estimator, design: &Design, estimand: &Estimand, m: f64) -> Result<AdversaryReport> {
    if !matches!(design, Design::Crd { .. } | Design::Bd { .. }) {
        return Err(LabError::UnsupportedDesign(format!(
            "the worst-case construction covers crd and bd, not {}",
            design.name()
        )));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(LabError::InvalidArgument(format!("M must be positive, got {m}")));
    }
    let n = design.n();
    if n > ENUMERATION_CAP {
        return Err(LabError::Capacity(format!("adversary enumerates the support; N={n} exceeds the cap")));
    }
    let (first, second) = estimand.additive_parts(n).ok_or_else(|| {
        LabError::UnsupportedEstimand(format!("{} is not a function of Y(A) and Y(B)", estimand.name()))
    })?;
    let pos: f64 = first.weights.iter().chain(&second.weights).map(|w| w.max(0.0)).sum();
    let neg: f64 = first.weights.iter().chain(&second.weights).map(|w| w.min(0.0)).sum();
    if pos < 1.0 - 1e-12 || neg > 1e-12 {
        return Err(LabError::UnsupportedEstimand(format!(
            "estimand range over (0, M)^2N is not onto [0, M] (positive mass {pos}, negative mass {neg})"
        )));
    }
    let eps = ADVERSARY_EPS * m;
    let all_a = Assignment::all(n, Arm::A)?;
    let all_b = Assignment::all(n, Arm::B)?;
    let bounds = Bounds { lower: 0.0, upper: m };

    let mut best: Option<AdversaryReport> = None;
    for target in [0.0, m] {
        let (ya, yb) = realize_target(&first, &second, m, eps, target);
        let table = PotentialOutcomeTable::arbitrary_from_fn(n, |z| {
            if *z == all_a {
                ya.clone()
            } else if *z == all_b {
                yb.clone()
            } else {
                vec![m / 2.0; n]
            }
        })?
        .with_bounds(bounds)?;
        let report = exact_moments(estimator, design, &table, estimand)?;
        if best.as_ref().is_none_or(|b| report.mse_vs_estimand > b.mse) {
            let bound = m * m / 8.0 * (1.0 - 10.0 * eps / m);
            best = Some(AdversaryReport {
                table,
                mse: report.mse_vs_estimand,
                estimand: report.estimand,
                bound,
                bound_holds: report.mse_vs_estimand >= bound,
            });
        }
    }
    Ok(best.expect("two candidates evaluated"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ht_variance_examples() {
        let t = PotentialOutcomeTable::constant(InterferenceStructure::k_local(Graph::complete(2), 1), 1.0).unwrap();
        let v = ht_variance_closed_form(&Graph::complete(2), 1, &t).unwrap();
        assert_eq!((v.v_a, v.v_b, v.cov, v.total), (3.0, 3.0, -1.0, 8.0));

        let c = 1.5;
        let t = PotentialOutcomeTable::constant(InterferenceStructure::k_local(Graph::empty(4), 1), c).unwrap();
        let v = ht_variance_closed_form(&Graph::empty(4), 1, &t).unwrap();
        assert!((v.cov + c * c / 4.0).abs() < 1e-15);

        let t = PotentialOutcomeTable::no_interference(&[2.0], &[3.0]).unwrap();
        let v = ht_variance_closed_form(&Graph::empty(1), 1, &t).unwrap();
        assert_eq!(v.v_a, 4.0);
        assert_eq!(v.total, 4.0 + 9.0 + 2.0 * 6.0);
    }

    #[test]
    fn ht_moments_on_two_node_complete_graph() {
        let g = Graph::complete(2);
        let s = InterferenceStructure::k_local(g.clone(), 1);
        let t = PotentialOutcomeTable::constant(s, 1.0).unwrap();
        let est = Estimator::HorvitzThompson { index: NeighborhoodIndex::build(&g, 1) };
        let r = exact_moments(&est, &Design::bd(2).unwrap(), &t, &Estimand::Ate).unwrap();
        assert_eq!(r.expectation, 0.0);
        assert_eq!(r.variance, 8.0);
        assert_eq!(r.support_size, 4);
    }

    #[test]
    fn constant_estimator_moments() {
        let t = PotentialOutcomeTable::no_interference(&[3.0, 1.0], &[1.0, 1.0]).unwrap();
        for d in [Design::bd(2).unwrap(), Design::crd(2, 1).unwrap(), Design::cbd(2).unwrap()] {
            let r = exact_moments(&Estimator::Constant(0.25), &d, &t, &Estimand::Ate).unwrap();
            assert_eq!(r.variance, 0.0);
            assert_eq!(r.mse_vs_estimand, (0.25 - 1.0f64).powi(2));
        }
    }

    #[test]
    fn neyman_examples() {
        let t = PotentialOutcomeTable::no_interference(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let terms = neyman_variance_terms(&t, 1).unwrap();
        assert_eq!((terms.v_a, terms.v_b, terms.v_theta, terms.variance), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(terms.enumerated_variance, Some(0.0));

        let t = PotentialOutcomeTable::generate_random(InterferenceStructure::NoInterference { n: 5 }, 0.0, 1.0, 1)
            .unwrap();
        assert_eq!(neyman_variance_terms(&t, 2).unwrap().bound, 1.0);

        let t = PotentialOutcomeTable::no_interference(&[1.0], &[0.0]).unwrap();
        assert!(matches!(neyman_variance_terms(&t, 1), Err(LabError::InvalidArgument(_))));
    }

    #[test]
    fn adversary_rejects_primary_effect_and_cbd() {
        let crd = Design::crd(4, 2).unwrap();
        let err = mse_adversary(&Estimator::DiffMeans, &crd, &Estimand::PrimaryEffect, 1.0).unwrap_err();
        assert!(matches!(err, LabError::UnsupportedEstimand(_)));
        let cbd = Design::cbd(4).unwrap();
        let err = mse_adversary(&Estimator::DiffMeans, &cbd, &Estimand::Ate, 1.0).unwrap_err();
        assert!(matches!(err, LabError::UnsupportedDesign(_)));
        let half = Estimand::Additive { first: LinearFunctional::mean(4), second: LinearFunctional { weights: vec![0.0; 4] } };
        let scaled = Estimand::Additive {
            first: LinearFunctional { weights: vec![0.1; 4] },
            second: LinearFunctional { weights: vec![0.0; 4] },
        };
        assert!(mse_adversary(&Estimator::DiffMeans, &crd, &half, 1.0).is_ok());
        assert!(matches!(
            mse_adversary(&Estimator::DiffMeans, &crd, &scaled, 1.0),
            Err(LabError::UnsupportedEstimand(_))
        ));
    }

    #[test]
    fn adversary_examples() {
        let crd = Design::crd(4, 2).unwrap();
        let r = mse_adversary(&Estimator::Constant(0.0), &crd, &Estimand::Ate, 1.0).unwrap();
        assert!(r.mse >= 0.25 - 1e-5);
        assert!(r.estimand > 0.99);
        let r = mse_adversary(&Estimator::DiffMeans, &crd, &Estimand::Ate, 1.0).unwrap();
        assert!(r.mse >= 0.125 && r.bound_holds);
        r.table.check_bounds().unwrap();
        let bd = Design::bd(3).unwrap();
        let est = Estimator::additive_unbiased_for(&Estimand::Ate, 3).unwrap();
        let r = mse_adversary(&est, &bd, &Estimand::Ate, 1.0).unwrap();
        assert!(r.mse >= 0.125 && r.bound_holds);
    }
}
