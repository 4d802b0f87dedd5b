//! Shared helpers for the oracle-driven integration tests.

use graphspn::learn::{generate_dense_structure, StructureParams};
use graphspn::spn::{CategoricalVariable, Evidence, Spn, SpnNode, VarId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn variables(cardinalities: &[usize]) -> Vec<CategoricalVariable> {
    cardinalities
        .iter()
        .enumerate()
        .map(|(i, &c)| CategoricalVariable { id: VarId(i), cardinality: c })
        .collect()
}

/// A random valid normalized network: generated dense structure with
/// randomized, strictly positive sum weights.
pub fn random_valid_spn(cardinalities: &[usize], seed: u64, rng: &mut ChaCha8Rng) -> Spn {
    let params = StructureParams { rng_seed: seed, ..Default::default() };
    let mut spn = generate_dense_structure(&variables(cardinalities), &params).unwrap();
    randomize_weights(&mut spn, rng);
    spn
}

/// Replaces every sum's weights with fresh positive draws and renormalizes.
pub fn randomize_weights(spn: &mut Spn, rng: &mut ChaCha8Rng) {
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
        let weights: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
        spn.set_sum_weights(graphspn::spn::NodeId(id), &weights).unwrap();
    }
    spn.normalize_weights().unwrap();
}

/// A random evidence pattern mixing observed, soft, and marginalized
/// variables.
pub fn random_evidence(cardinalities: &[usize], rng: &mut ChaCha8Rng) -> Evidence {
    let mut evidence = Evidence::marginalized(cardinalities.len());
    for (var, &card) in cardinalities.iter().enumerate() {
        match rng.gen_range(0..3) {
            0 => evidence.set_observed(VarId(var), rng.gen_range(0..card)),
            1 => {
                let soft: Vec<f64> = (0..card).map(|_| rng.gen_range(0.01..1.0)).collect();
                evidence.set_soft(VarId(var), soft);
            }
            _ => {}
        }
    }
    evidence
}
