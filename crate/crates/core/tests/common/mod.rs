#![allow(dead_code)]

pub mod als_oracle;

use std::collections::{BTreeMap, BTreeSet};

use hge::data::{
    build_all_incidences, cold_start_split, synth_generate, ColdStartSplit, Hierarchy, Interaction,
    InteractionLog, SplitParams, SynthParams,
};
use hge::numerics::SparseIncidence;

pub fn event(user: &str, item: &str, ts: u64) -> Interaction {
    Interaction {
        user_id: user.into(),
        item_id: item.into(),
        timestamp: ts,
        value: 1.0,
    }
}

/// Six items in three fine and two coarse categories, four users; `i5` is cold.
pub fn hand_fixture() -> (ColdStartSplit, Hierarchy, Vec<SparseIncidence>) {
    let train_pairs = [
        ("u0", "i0"), ("u0", "i1"), ("u0", "i2"),
        ("u1", "i1"), ("u1", "i3"), ("u1", "i4"),
        ("u2", "i4"), ("u2", "i0"), ("u2", "i5"),
        ("u3", "i2"), ("u3", "i3"), ("u3", "i0"),
    ];
    let train = InteractionLog::new(
        train_pairs.iter().enumerate().map(|(t, (u, i))| event(u, i, 100 + t as u64)).collect(),
    );
    let test = InteractionLog::new(vec![event("u0", "i5", 10_000), event("u1", "i5", 10_001)]);
    let cold: BTreeSet<String> = ["i5".to_string()].into();
    let split = ColdStartSplit::from_parts(train, test, cold, SplitParams::default(), 1_000).unwrap();
    let fine: BTreeMap<String, String> = (0..6).map(|i| (format!("i{i}"), format!("f{}", i / 2))).collect();
    let coarse: BTreeMap<String, String> =
        (0..6).map(|i| (format!("i{i}"), if i < 4 { "c0" } else { "c1" }.to_string())).collect();
    let h = Hierarchy::new(vec![fine, coarse]);
    let levels = incidences(&h, &split);
    (split, h, levels)
}

pub fn incidences(h: &Hierarchy, split: &ColdStartSplit) -> Vec<SparseIncidence> {
    build_all_incidences(h, &split.items)
        .unwrap()
        .into_iter()
        .map(|l| l.incidence)
        .collect()
}

/// The default synthetic generator, split with the default protocol.
pub fn synth_benchmark(seed: u64) -> (ColdStartSplit, Hierarchy, Vec<SparseIncidence>) {
    let params = SynthParams {
        seed,
        ..SynthParams::default()
    };
    let (log, h) = synth_generate(&params).unwrap();
    let split = cold_start_split(
        &log,
        SplitParams {
            seed,
            ..SplitParams::default()
        },
    )
    .unwrap();
    let levels = incidences(&h, &split);
    (split, h, levels)
}
