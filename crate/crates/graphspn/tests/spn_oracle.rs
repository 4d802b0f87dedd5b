//! Inference checked against brute-force enumeration in linear space.

mod common;

use common::{random_evidence, random_valid_spn, randomize_weights, variables};
use graphspn::learn::{generate_dense_structure, StructureParams};
use graphspn::oracle;
use graphspn::spn::{Evidence, NodeId, Spn, SpnNode, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_cardinalities(rng: &mut ChaCha8Rng) -> Vec<usize> {
    if rng.gen_bool(0.5) {
        vec![2; rng.gen_range(2..=6)]
    } else {
        vec![3; rng.gen_range(2..=5)]
    }
}

#[test]
fn eval_log_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for round in 0..40 {
        let cards = mixed_cardinalities(&mut rng);
        let spn = random_valid_spn(&cards, round, &mut rng);
        assert!(spn.validate().is_valid());
        for _ in 0..4 {
            let evidence = random_evidence(&cards, &mut rng);
            let expected = oracle::eval(&spn, &evidence);
            let got = spn.eval_log(&evidence).unwrap().exp();
            assert!(
                (got - expected).abs() < 1e-9,
                "round {round}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn observed_assignments_match_the_joint_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cards = vec![2, 2, 2, 3];
    let spn = random_valid_spn(&cards, 3, &mut rng);
    for assignment in oracle::assignments(&spn) {
        let expected = oracle::joint_value(&spn, &assignment);
        let got = spn.eval_log(&Evidence::from_assignment(&assignment)).unwrap().exp();
        assert!((got - expected).abs() < 1e-9);
    }
}

#[test]
fn normalized_network_total_mass_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..20 {
        // At most 12 joint states worth ~ keep it small: 2x2x3 or 2x2x2.
        let cards = if round % 2 == 0 { vec![2, 2, 3] } else { vec![2, 2, 2] };
        let spn = random_valid_spn(&cards, 50 + round, &mut rng);
        let total: f64 = oracle::assignments(&spn)
            .iter()
            .map(|a| spn.eval_log(&Evidence::from_assignment(a)).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "round {round}: mass {total}");
    }
}

#[test]
fn soft_evidence_equals_multiplier_weighted_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cards = vec![3, 3, 2];
    let spn = random_valid_spn(&cards, 9, &mut rng);
    let mut evidence = Evidence::marginalized(3);
    let alpha = 0.3;
    evidence.set_soft(VarId(0), vec![alpha, 1.0 - alpha, 0.5]);
    evidence.set_soft(VarId(2), vec![0.9, 0.2]);
    let expected: f64 = oracle::assignments(&spn)
        .iter()
        .map(|a| oracle::joint_value(&spn, a) * oracle::evidence_weight(&spn, &evidence, a))
        .sum();
    let got = spn.eval_log(&evidence).unwrap().exp();
    assert!((got - expected).abs() < 1e-9);
}

#[test]
fn marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..30 {
        let cards = mixed_cardinalities(&mut rng);
        let spn = random_valid_spn(&cards, 100 + round, &mut rng);
        for _ in 0..3 {
            let evidence = random_evidence(&cards, &mut rng);
            let expected = oracle::marginals(&spn, &evidence);
            let got = spn.marginals(&evidence).unwrap();
            for (var, (g, e)) in got.iter().zip(&expected).enumerate() {
                assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (k, (gv, ev)) in g.iter().zip(e).enumerate() {
                    assert!(
                        (gv - ev).abs() < 1e-9,
                        "round {round}, var {var}, value {k}: {gv} vs {ev}"
                    );
                }
            }
        }
    }
}

#[test]
fn contradictory_soft_evidence_still_matches_the_oracle() {
    // Neighboring variables pull in opposite directions; the middle
    // variable's posterior must simply match enumeration and sum to one.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cards = vec![2, 2, 2];
    let spn = random_valid_spn(&cards, 77, &mut rng);
    let mut evidence = Evidence::marginalized(3);
    evidence.set_soft(VarId(0), vec![0.95, 0.05]);
    evidence.set_soft(VarId(2), vec![0.05, 0.95]);
    let got = spn.marginals(&evidence).unwrap();
    let expected = oracle::marginals(&spn, &evidence);
    assert!((got[1].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    for (g, e) in got[1].iter().zip(&expected[1]) {
        assert!((g - e).abs() < 1e-9);
    }
}

#[test]
fn mpe_value_matches_enumeration_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for round in 0..30 {
        let cards = mixed_cardinalities(&mut rng);
        let spn = random_valid_spn(&cards, 200 + round, &mut rng);
        for _ in 0..3 {
            let evidence = random_evidence(&cards, &mut rng);
            let expected = oracle::best_max_value(&spn, &evidence);
            if expected == 0.0 {
                continue;
            }
            let result = spn.mpe(&evidence).unwrap();
            // Tie-safe: compare achieved values, not assignments.
            assert!((result.log_value.exp() - expected).abs() < 1e-9, "round {round}");
            let achieved = oracle::max_circuit_value(&spn, &result.assignment)
                * oracle::evidence_weight(&spn, &evidence, &result.assignment);
            assert!((achieved - expected).abs() < 1e-9, "round {round}");
        }
    }
}

#[test]
fn eval_log_is_monotone_in_a_soft_multiplier() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let cards = vec![3, 2, 3];
    let spn = random_valid_spn(&cards, 5, &mut rng);
    for _ in 0..50 {
        let mut evidence = random_evidence(&cards, &mut rng);
        let var = rng.gen_range(0..cards.len());
        let mut soft: Vec<f64> = (0..cards[var]).map(|_| rng.gen_range(0.01..1.0)).collect();
        evidence.set_soft(VarId(var), soft.clone());
        let before = spn.eval_log(&evidence).unwrap();
        let bump = rng.gen_range(0..cards[var]);
        soft[bump] += rng.gen_range(0.1..1.0);
        evidence.set_soft(VarId(var), soft);
        let after = spn.eval_log(&evidence).unwrap();
        assert!(after >= before - 1e-12);
    }
}

#[test]
fn normalization_preserves_the_map_assignment() {
    // Unnormalized network: argmax of the joint over complete assignments
    // is unchanged by weight normalization.
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for round in 0..10 {
        let cards = vec![2, 2, 3];
        let params = StructureParams { rng_seed: 300 + round, ..Default::default() };
        let mut spn = generate_dense_structure(&variables(&cards), &params).unwrap();
        // Random, deliberately unnormalized weights.
        let sums: Vec<(usize, usize)> = spn
            .nodes()
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n {
                SpnNode::Sum { children } => Some((id, children.len())),
                _ => None,
            })
            .collect();
        for (id, len) in sums {
            let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..3.0)).collect();
            spn.set_sum_weights(NodeId(id), &w).unwrap();
        }
        let argmax = |s: &Spn| {
            oracle::assignments(s)
                .into_iter()
                .max_by(|a, b| {
                    oracle::joint_value(s, a).total_cmp(&oracle::joint_value(s, b))
                })
                .unwrap()
        };
        let before = argmax(&spn);
        let mut normalized = spn.clone();
        normalized.normalize_weights().unwrap();
        let after = argmax(&normalized);
        assert_eq!(before, after, "round {round}");
    }
}

#[test]
fn mixture_posterior_shifts_with_the_evidence() {
    // Three-component mixture over two binary variables: observing one
    // variable moves the other towards the component that explains it.
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let cards = vec![2, 2];
    let mut spn = random_valid_spn(&cards, 13, &mut rng);
    randomize_weights(&mut spn, &mut rng);
    let mut evidence = Evidence::marginalized(2);
    evidence.set_observed(VarId(0), 1);
    let got = spn.marginals(&evidence).unwrap();
    let expected = oracle::marginals(&spn, &evidence);
    assert_eq!(got[0], vec![0.0, 1.0]);
    for (g, e) in got[1].iter().zip(&expected[1]) {
        assert!((g - e).abs() < 1e-9);
    }
}
