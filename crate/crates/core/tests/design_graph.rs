mod common;

use common::{chi_square_uniform, reach_matrix, rng, support};
use interference_lab::design::{lexicographic, ExposureArms};
use interference_lab::{Arm, Assignment, Design, Graph, InterferenceStructure, NeighborhoodIndex};
use proptest::prelude::*;

fn sample_counts(design: &Design, draws: usize, seed: u64) -> Vec<usize> {
    let support = support(design);
    let mut counts = vec![0usize; support.len()];
    let mut r = rng(seed);
    for _ in 0..draws {
        let z = design.sample_with(&mut r);
        let slot = support.iter().position(|&(b, _)| b == z.bits()).expect("sample outside the support");
        counts[slot] += 1;
    }
    counts
}

// Upper 0.1% points of the chi-square distribution.
const CHI2_DF15: f64 = 37.697;
const CHI2_DF5: f64 = 20.515;
const CHI2_DF13: f64 = 34.528;

#[test]
fn bd_sampler_is_uniform() {
    let stat = chi_square_uniform(&sample_counts(&Design::bd(4).unwrap(), 32_000, 11));
    assert!(stat < CHI2_DF15, "chi2 = {stat}");
}

#[test]
fn crd_sampler_is_uniform() {
    let stat = chi_square_uniform(&sample_counts(&Design::crd(6, 1).unwrap(), 12_000, 12));
    assert!(stat < CHI2_DF5, "chi2 = {stat}");
}

#[test]
fn cbd_sampler_is_uniform() {
    let stat = chi_square_uniform(&sample_counts(&Design::cbd(4).unwrap(), 28_000, 13));
    assert!(stat < CHI2_DF13, "chi2 = {stat}");
}

#[test]
fn enumerated_support_matches_brute_force() {
    for design in [
        Design::bd(5).unwrap(),
        Design::cbd(5).unwrap(),
        Design::crd(5, 2).unwrap(),
        Design::crd(6, 3).unwrap(),
    ] {
        let mut got: Vec<(u64, f64)> =
            design.enumerate_support().unwrap().into_iter().map(|(z, p)| (z.bits(), p)).collect();
        let mut want = support(&design);
        got.sort_by_key(|x| x.0);
        want.sort_by_key(|x| x.0);
        assert_eq!(got.len(), want.len());
        for ((gb, gp), (wb, wp)) in got.iter().zip(&want) {
            assert_eq!(gb, wb);
            assert!((gp - wp).abs() < 1e-15);
        }
        assert_eq!(design.support_size(), want.len() as f64);
    }
}

#[test]
fn lexicographic_order_reads_left_to_right() {
    let labels: Vec<String> = lexicographic(3).map(|z| z.to_string()).collect();
    assert_eq!(labels, ["AAA", "AAB", "ABA", "ABB", "BAA", "BAB", "BBA", "BBB"]);
}

#[test]
fn pmf_rejects_off_support() {
    let crd = Design::crd(4, 2).unwrap();
    assert_eq!(crd.pmf(&"AABB".parse().unwrap()).unwrap(), 1.0 / 6.0);
    assert_eq!(crd.pmf(&"AAAB".parse().unwrap()).unwrap(), 0.0);
    let cbd = Design::cbd(3).unwrap();
    assert_eq!(cbd.pmf(&"AAA".parse().unwrap()).unwrap(), 0.0);
}

#[test]
fn informative_set_matches_enumeration() {
    let graph = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (4, 5)]).unwrap();
    let design = Design::bd(6).unwrap();
    for s in [
        InterferenceStructure::NoInterference { n: 6 },
        InterferenceStructure::k_local(graph.clone(), 1),
        InterferenceStructure::k_local(graph, 2),
        InterferenceStructure::Arbitrary { n: 6 },
    ] {
        for i in 0..6 {
            for z in [Assignment::all(6, Arm::A).unwrap(), "ABBABA".parse().unwrap()] {
                let eff = s.effective_treatment(i, &z);
                let same = lexicographic(6).filter(|w| s.effective_treatment(i, w) == eff).count();
                let (size, fraction) = s.informative_set(&design, i, &z).unwrap();
                assert_eq!(size, same as u128, "{} unit {i}", s.name());
                assert_eq!(fraction, same as f64 / 64.0);
                assert_eq!(s.effective_treatment_count(i), 64 / same as u128);
            }
        }
    }
}

#[test]
fn exposure_probability_matches_enumeration() {
    let design = Design::bd(5).unwrap();
    let ni = [0usize, 1, 2];
    let nj = [2usize, 3];
    let nk = [4usize];
    let count = |pred: &dyn Fn(&Assignment) -> bool| lexicographic(5).filter(|z| pred(z)).count() as f64 / 32.0;
    let cases: [(&[usize], &[usize], Arm, Arm); 4] =
        [(&ni, &nj, Arm::A, Arm::A), (&ni, &nj, Arm::A, Arm::B), (&ni, &nk, Arm::B, Arm::A), (&nj, &nk, Arm::B, Arm::B)];
    for (a, b, x, y) in cases {
        let want = count(&|z| z.all_on(a, x) && z.all_on(b, y));
        let got = design.exposure_probability(a, Some(b), ExposureArms::Pair(x, y)).unwrap();
        assert_eq!(got, want);
    }
    let want = count(&|z| z.all_on(&ni, Arm::B));
    assert_eq!(design.exposure_probability(&ni, None, ExposureArms::Single(Arm::B)).unwrap(), want);
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |flags| {
            let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
            let edges: Vec<_> = pairs.zip(flags).filter(|(_, f)| *f).map(|(e, _)| e).collect();
            Graph::new(n, &edges).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn neighborhoods_match_matrix_powers(graph in arb_graph(9), k in 0usize..4) {
        let oracle = reach_matrix(&graph, k);
        let index = NeighborhoodIndex::build(&graph, k);
        for i in 0..graph.n() {
            prop_assert_eq!(index.neighborhood(i), oracle[i].as_slice());
            prop_assert_eq!(graph.k_step_neighborhood(i, k).unwrap(), oracle[i].clone());
        }
    }

    #[test]
    fn neighborhoods_are_symmetric_and_nested(graph in arb_graph(9), k in 0usize..3) {
        let small = NeighborhoodIndex::build(&graph, k);
        let big = NeighborhoodIndex::build(&graph, k + 1);
        for i in 0..graph.n() {
            prop_assert!(small.neighborhood(i).contains(&i));
            for &j in small.neighborhood(i) {
                prop_assert!(small.neighborhood(j).contains(&i));
                prop_assert!(big.neighborhood(i).contains(&j));
            }
            for j in 0..graph.n() {
                let shared = small.neighborhood(i).iter().filter(|u| small.neighborhood(j).contains(u)).count();
                prop_assert_eq!(small.overlap(i, j), shared);
            }
        }
    }

    #[test]
    fn graph_text_round_trips(graph in arb_graph(8)) {
        prop_assert_eq!(Graph::parse(&graph.to_text()).unwrap(), graph);
    }

    #[test]
    fn assignment_labels_round_trip(n in 1usize..20, bits in any::<u64>()) {
        let z = Assignment::from_bits(n, bits & ((1u64 << n) - 1)).unwrap();
        prop_assert_eq!(z.to_string().parse::<Assignment>().unwrap(), z);
        prop_assert_eq!(z.count(Arm::A) + z.count(Arm::B), n);
    }
}
