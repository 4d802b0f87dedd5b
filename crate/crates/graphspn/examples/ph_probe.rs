use graphspn::data::*;
use graphspn::learn::{StructureParams, TrainConfig};
use graphspn::model::train_templates;
use graphspn::spn::{Evidence, VarEvidence};
use graphspn::templates::default_template_set;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn soft(gt: usize) -> VarEvidence {
    // Level-2-like evidence: 0.91 on gt, rest spread.
    let mut v = vec![0.01; 10];
    v[gt] = 0.91;
    VarEvidence::Soft(v)
}

fn main() {
    let graphs: Vec<TopoGraph> = (0..40)
        .map(|i| {
            generate_synthetic_floor(&SynthFloorParams {
                rng_seed: 400 + i,
                corridor_length: 9,
                rooms_per_corridor: 4,
                room_size_range: (2, 5),
                ..Default::default()
            })
            .unwrap()
        })
        .collect();
    let templates = default_template_set();
    let ba = PlaceCategory::Bathroom.index();
    let dw = PlaceCategory::Doorway.index();
    let kt = PlaceCategory::Kitchen.index();
    for (sums, reps, restarts) in [(4, 10, 1), (8, 10, 1), (8, 10, 4), (8, 30, 4), (12, 30, 4), (16, 30, 4)] {
        let structure = StructureParams { num_sums_per_subscope: sums, ..Default::default() };
        let config = TrainConfig { restarts, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model =
            train_templates(&graphs, &templates, &structure, &config, reps, &mut rng).unwrap();

        // P(slot2 | in-room context), PATH5 = [DW, BA, ?, BA, BA]
        let t5 = model.template_spn("PATH5").unwrap();
        let ev = Evidence::from_entries(vec![
            soft(dw), soft(ba), VarEvidence::Marginalized, soft(ba), soft(ba),
        ]);
        let p5 = t5.spn.marginals(&ev).unwrap()[2][ba];
        // STAR4: center evidence KT, two leaves KT, one unknown leaf.
        let t4 = model.template_spn("STAR4").unwrap();
        let ev = Evidence::from_entries(vec![
            soft(kt), soft(kt), VarEvidence::Marginalized, soft(kt),
        ]);
        let p4 = t4.spn.marginals(&ev).unwrap()[2][kt];
        // PATH3 in-room.
        let t3 = model.template_spn("PATH3").unwrap();
        let ev = Evidence::from_entries(vec![soft(ba), VarEvidence::Marginalized, soft(ba)]);
        let p3 = t3.spn.marginals(&ev).unwrap()[1][ba];
        println!(
            "sums={sums} reps={reps} restarts={restarts}: PATH5 P(BA|ctx)={p5:.3} STAR4 P(KT|ctx)={p4:.3} PATH3 P(BA|ctx)={p3:.3}"
        );
    }
}
