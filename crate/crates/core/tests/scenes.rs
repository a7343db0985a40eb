use std::collections::BTreeMap;

use proptest::prelude::*;
use soundshift_core::format::{parse_plan, parse_scene, parse_timeline, serialize_plan, serialize_scene, serialize_timeline};
use soundshift_core::model::{Condition, ScenarioId};
use soundshift_core::presets::preset;
use soundshift_core::schedule::{generate_scenario, ScenarioTemplate};
use soundshift_core::timeshift::plan_timeline;

fn key_counts(scene: &soundshift_core::model::Scene) -> BTreeMap<u8, usize> {
    let sources = scene.source_map();
    let mut counts = BTreeMap::new();
    for ev in &scene.events {
        if let Some(k) = sources[ev.source.as_str()].identification_key {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    counts
}

#[test]
fn inventories_hold_for_many_seeds() {
    let expected = |id| match id {
        ScenarioId::FullyMixed => BTreeMap::from([(1, 6), (2, 6), (3, 5), (4, 5)]),
        _ => BTreeMap::from([(1, 5), (2, 5), (3, 5), (4, 5)]),
    };
    for id in ScenarioId::ALL {
        for seed in 0..100 {
            let scene = generate_scenario(&ScenarioTemplate::for_id(id), seed).unwrap();
            assert_eq!(key_counts(&scene), expected(id), "{id:?} seed {seed}");
            assert!((85.0..=95.0).contains(&scene.duration), "{id:?} seed {seed}: {}", scene.duration);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_documents_round_trip(seed in any::<u64>(), which in 0usize..3, cond in 0usize..3) {
        let id = ScenarioId::ALL[which];
        let scene = generate_scenario(&ScenarioTemplate::for_id(id), seed).unwrap();
        let text = serialize_scene(&scene);
        prop_assert_eq!(&parse_scene(&text).unwrap(), &scene);
        prop_assert_eq!(serialize_scene(&parse_scene(&text).unwrap()), text);

        let plan = preset(Condition::ALL[cond], &scene).unwrap();
        prop_assert_eq!(&parse_plan(&serialize_plan(&plan)).unwrap(), &plan);

        let tl = plan_timeline(&scene, &plan).unwrap();
        prop_assert_eq!(&parse_timeline(&serialize_timeline(&tl)).unwrap(), &tl);
    }
}
