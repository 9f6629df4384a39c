mod common;

use common::{brute_moments, ht_variance_brute, random_graph, reach_matrix, rng, uniform_vec};
use interference_lab::exact::{exact_moments, ht_variance_for_index, mse_adversary, neyman_variance_terms};
use interference_lab::{
    Arm, Assignment, Design, Estimand, Estimator, InterferenceStructure, LinearFunctional, NeighborhoodIndex,
    PotentialOutcomeTable, TabularEstimator,
};
use proptest::prelude::*;
use rand::Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn diff_in_means_unbiased_under_crd() {
    let mut r = rng(1);
    for n in 2..=10 {
        let n_a = r.random_range(1..n);
        let (ya, yb) = (uniform_vec(&mut r, n, 0.0, 5.0), uniform_vec(&mut r, n, 0.0, 5.0));
        let table = PotentialOutcomeTable::no_interference(&ya, &yb).unwrap();
        let design = Design::crd(n, n_a).unwrap();
        let report = exact_moments(&Estimator::DiffMeans, &design, &table, &Estimand::Ate).unwrap();
        assert!(report.bias.abs() <= 1e-10, "n={n} bias={}", report.bias);

        let (mean, var) = brute_moments(&design, |z| {
            let (mut sa, mut sb) = (0.0, 0.0);
            for i in 0..n {
                match z.arm(i) {
                    Arm::A => sa += ya[i],
                    Arm::B => sb += yb[i],
                }
            }
            sa / n_a as f64 - sb / (n - n_a) as f64
        });
        assert!(rel_close(report.expectation, mean, 1e-12));
        assert!(rel_close(report.variance, var, 1e-10));
    }
}

#[test]
fn ht_unbiased_and_variance_matches_brute_force() {
    let mut r = rng(2);
    for case in 0..50 {
        let n = r.random_range(2..=10);
        let p = r.random_range(0.0..0.6);
        let graph = random_graph(&mut r, n, p);
        let k = if case % 5 == 0 { 2 } else { 1 };
        let structure = InterferenceStructure::k_local(graph.clone(), k);
        let table = PotentialOutcomeTable::generate_random(structure, 0.5, 3.0, case).unwrap();
        let index = NeighborhoodIndex::build(&graph, k);
        let report = exact_moments(
            &Estimator::HorvitzThompson { index: index.clone() },
            &Design::bd(n).unwrap(),
            &table,
            &Estimand::Ate,
        )
        .unwrap();
        assert!(report.bias.abs() <= 1e-10, "case {case}: bias {}", report.bias);

        let ya = table.observed_vector(&Assignment::all(n, Arm::A).unwrap()).unwrap();
        let yb = table.observed_vector(&Assignment::all(n, Arm::B).unwrap()).unwrap();
        let brute = ht_variance_brute(&reach_matrix(&graph, k), &ya, &yb);
        let closed = ht_variance_for_index(&index, &table).unwrap().total;
        assert!(rel_close(closed, brute, 1e-10), "case {case}: {closed} vs {brute}");
        assert!(rel_close(report.variance, brute, 1e-10));
    }
}

#[test]
fn additive_and_primary_unbiased_under_bd() {
    let mut r = rng(3);
    for n in 1..=6 {
        let table = PotentialOutcomeTable::arbitrary_from_fn(n, |_| uniform_vec(&mut r, n, -2.0, 2.0)).unwrap();
        let design = Design::bd(n).unwrap();
        let weights = |r: &mut rand_chacha::ChaCha8Rng| LinearFunctional { weights: uniform_vec(r, n, -1.0, 1.0) };
        let additive = Estimand::Additive { first: weights(&mut r), second: weights(&mut r) };
        for estimand in [Estimand::Ate, additive] {
            let est = Estimator::additive_unbiased_for(&estimand, n).unwrap();
            let rep = exact_moments(&est, &design, &table, &estimand).unwrap();
            assert!(rep.bias.abs() <= 1e-10, "additive n={n}: {}", rep.bias);
        }
        let rep = exact_moments(&Estimator::PrimaryUnbiased, &design, &table, &Estimand::PrimaryEffect).unwrap();
        assert!(rep.bias.abs() <= 1e-10, "primary n={n}: {}", rep.bias);
    }
}

#[test]
fn neyman_decomposition_matches_enumeration() {
    let mut r = rng(4);
    for n in 2..=12 {
        let n_a = r.random_range(1..n);
        let (ya, yb) = (uniform_vec(&mut r, n, 0.0, 1.0), uniform_vec(&mut r, n, 0.0, 1.0));
        let table = PotentialOutcomeTable::no_interference(&ya, &yb).unwrap();
        let terms = neyman_variance_terms(&table, n_a).unwrap();

        let nf = n as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
        let (ma, mb) = (mean(&ya), mean(&yb));
        let s2 = |d: &dyn Fn(usize) -> f64| (0..n).map(|i| d(i).powi(2)).sum::<f64>() / (nf - 1.0);
        let v_a = s2(&|i| ya[i] - ma);
        let v_b = s2(&|i| yb[i] - mb);
        let v_t = s2(&|i| ya[i] - yb[i] - (ma - mb));
        let formula = v_a / n_a as f64 + v_b / (n - n_a) as f64 - v_t / nf;

        let design = Design::crd(n, n_a).unwrap();
        let enumerated = exact_moments(&Estimator::DiffMeans, &design, &table, &Estimand::Ate).unwrap().variance;
        assert!(rel_close(formula, enumerated, 1e-10), "n={n}");
        assert!(rel_close(terms.variance, enumerated, 1e-10));
        assert!(enumerated <= 4.0 / (nf - 1.0) + 1e-12);
    }
}

#[test]
fn worst_case_mse_reaches_the_bound() {
    let designs = [Design::crd(6, 3).unwrap(), Design::bd(6).unwrap()];
    for design in designs {
        let estimators = [Estimator::DiffMeans, Estimator::Constant(0.0), Estimator::additive_unbiased_for(&Estimand::Ate, 6).unwrap()];
        for est in estimators {
            let rep = mse_adversary(&est, &design, &Estimand::Ate, 1.0).unwrap();
            assert!(rep.mse >= 0.125 - 1e-6, "{} / {}: {}", est.name(), design.name(), rep.mse);
            assert!(rep.bound_holds);
            let (lo, hi) = rep.table.min_max().unwrap();
            assert!(lo > 0.0 && hi < 1.0);
            let check = exact_moments(&est, &design, &rep.table, &Estimand::Ate).unwrap();
            assert_eq!(check.mse_vs_estimand, rep.mse);
        }
    }
}

#[test]
fn adversary_rejects_primary_effect_and_cbd() {
    let bd = Design::bd(3).unwrap();
    assert!(mse_adversary(&Estimator::PrimaryUnbiased, &bd, &Estimand::PrimaryEffect, 1.0).is_err());
    assert!(mse_adversary(&Estimator::DiffMeans, &Design::cbd(3).unwrap(), &Estimand::Ate, 1.0).is_err());
}

#[test]
fn tabular_estimator_reproduces_additive() {
    let n = 3;
    let design = Design::bd(n).unwrap();
    let table = PotentialOutcomeTable::arbitrary_from_fn(n, |z| (0..n).map(|i| (z.bits() + i as u64) as f64).collect()).unwrap();
    let additive = Estimator::additive_unbiased_for(&Estimand::Ate, n).unwrap();
    let mut tab = TabularEstimator::new();
    for (z, _) in design.enumerate_support().unwrap() {
        let y = table.observed_vector(&z).unwrap();
        tab.insert(z, &y, additive.evaluate(&design, &z, &y).unwrap());
    }
    let tab = TabularEstimator::from_csv(&tab.to_csv()).unwrap();
    let a = exact_moments(&additive, &design, &table, &Estimand::Ate).unwrap();
    let b = exact_moments(&Estimator::Tabular(tab), &design, &table, &Estimand::Ate).unwrap();
    assert_eq!(a, b);
}

fn arb_no_interference() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..8).prop_flat_map(|n| {
        (proptest::collection::vec(0.0f64..10.0, n), proptest::collection::vec(0.0f64..10.0, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_arms_negates_diff_in_means((ya, yb) in arb_no_interference(), frac in 0.0f64..1.0) {
        let n = ya.len();
        let n_a = 1 + ((n - 1) as f64 * frac) as usize % (n - 1);
        let table = PotentialOutcomeTable::no_interference(&ya, &yb).unwrap();
        let swapped = table.swap_arms();
        let here = exact_moments(&Estimator::DiffMeans, &Design::crd(n, n_a).unwrap(), &table, &Estimand::Ate).unwrap();
        let there = exact_moments(&Estimator::DiffMeans, &Design::crd(n, n - n_a).unwrap(), &swapped, &Estimand::Ate).unwrap();
        prop_assert!((here.expectation + there.expectation).abs() < 1e-10);
        prop_assert!((here.variance - there.variance).abs() < 1e-9);
    }

    #[test]
    fn mse_is_variance_plus_squared_bias((ya, yb) in arb_no_interference(), c in -3.0f64..3.0) {
        let n = ya.len();
        let table = PotentialOutcomeTable::no_interference(&ya, &yb).unwrap();
        for design in [Design::bd(n).unwrap(), Design::cbd(n).unwrap(), Design::crd(n, 1).unwrap()] {
            for est in [Estimator::DiffMeans, Estimator::Constant(c)] {
                let r = exact_moments(&est, &design, &table, &Estimand::Ate).unwrap();
                prop_assert!((r.mse_vs_estimand - r.variance - r.bias * r.bias).abs() < 1e-9);
                prop_assert!(r.variance >= -1e-12);
            }
        }
    }

    #[test]
    fn ht_variance_scales_quadratically(seed in any::<u64>(), n in 2usize..8, scale in 0.1f64..4.0) {
        let mut r = rng(seed);
        let graph = random_graph(&mut r, n, 0.4);
        let index = NeighborhoodIndex::build(&graph, 1);
        let s = InterferenceStructure::k_local(graph, 1);
        let t = PotentialOutcomeTable::generate_random(s.clone(), 0.0, 1.0, seed).unwrap();
        let scaled = PotentialOutcomeTable::from_fn(s, |i, code| scale * t.value_at_code(i, code).unwrap()).unwrap();
        let v = ht_variance_for_index(&index, &t).unwrap().total;
        let w = ht_variance_for_index(&index, &scaled).unwrap().total;
        prop_assert!(rel_close(w, scale * scale * v, 1e-12));
    }
}
