mod common;

use common::{brute_force_onsets, check_time_shift, random_shift_scene, GridInstance};
use proptest::prelude::*;
use soundshift_core::model::{ManipulationPlan, SoundCategory};
use soundshift_core::presets::street_plan;
use soundshift_core::schedule::{generate_scenario, ScenarioTemplate};
use soundshift_core::model::ScenarioId;
use soundshift_core::timeshift::{plan_timeline, protected_intervals, shift_onsets, time_shift, ShiftJob};

fn protected_plan(guard: f64) -> ManipulationPlan {
    let mut plan = ManipulationPlan::transparency_only("ss", 1.0);
    plan.time_shift.enabled = true;
    plan.time_shift.guard_gap = guard;
    plan.time_shift.protected_categories.insert("@protected".into());
    plan
}

#[test]
fn greedy_matches_grid_oracle() {
    for seed in 0..300 {
        let inst = GridInstance::random(seed, 10, 20_000);
        let got = shift_onsets(&inst.jobs(), &inst.protected(), inst.guard_seconds());
        let want = brute_force_onsets(&inst);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(
                (g - *w as f64 / 1000.0).abs() < 1e-9,
                "seed {seed} job {i}: greedy {g}, oracle {w} ms; {inst:?}"
            );
        }
    }
}

#[test]
fn postconditions_on_one_thousand_schedules() {
    for seed in 0..1000 {
        let inst = GridInstance::random(10_000 + seed, 25, 60_000);
        let jobs = inst.jobs();
        let protected = inst.protected();
        let onsets = shift_onsets(&jobs, &protected, inst.guard_seconds());
        check_time_shift(&jobs, &protected, inst.guard_seconds(), &onsets)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn scene_level_shift_is_idempotent_and_conserves_events() {
    for seed in 0..200 {
        let guard = [0.0, 0.1, 0.3][seed as usize % 3];
        let scene = random_shift_scene(seed, 16, 40.0);
        let plan = protected_plan(guard);
        let tl = plan_timeline(&scene, &plan).unwrap();
        assert_eq!(tl.entries.len(), scene.events.len(), "seed {seed}");

        let protected = protected_intervals(&scene, &plan);
        let mut jobs = vec![None; scene.events.len()];
        let mut onsets = vec![0.0; scene.events.len()];
        for e in &tl.entries {
            jobs[e.event_id] = Some(ShiftJob {
                scheduled_onset: e.scheduled_onset,
                duration: e.duration,
                shiftable: e.category == SoundCategory::Virtual,
            });
            onsets[e.event_id] = e.actual_onset;
        }
        let jobs: Vec<ShiftJob> = jobs.into_iter().map(Option::unwrap).collect();
        check_time_shift(&jobs, &protected, guard, &onsets).unwrap_or_else(|e| panic!("seed {seed}: {e}"));

        // Feed the shifted onsets back in as the schedule.
        let mut again = scene.clone();
        for e in &tl.entries {
            again.events[e.event_id].scheduled_onset = e.actual_onset;
        }
        let tl2 = time_shift(&again, &protected, guard).unwrap();
        for e in &tl2.entries {
            assert_eq!(e.actual_onset, e.scheduled_onset, "seed {seed}: second pass moved event {}", e.event_id);
        }
    }
}

#[test]
fn generated_street_scenes_keep_virtual_events_clear() {
    let template = ScenarioTemplate::for_id(ScenarioId::RwFocused);
    for seed in 0..20 {
        let scene = generate_scenario(&template, seed).unwrap();
        let plan = street_plan();
        let protected = protected_intervals(&scene, &plan);
        assert!(!protected.is_empty());
        let tl = plan_timeline(&scene, &plan).unwrap();
        for e in tl.entries.iter().filter(|e| e.category == SoundCategory::Virtual) {
            for p in &protected {
                let hit = e.actual_onset < p.end && p.start < e.actual_onset + e.duration;
                assert!(!hit, "seed {seed}: {} overlaps {}", e.source, p.source);
            }
        }
    }
}

fn job_strategy() -> impl Strategy<Value = ShiftJob> {
    (0.0f64..30.0, 0.05f64..4.0, any::<bool>()).prop_map(|(o, d, s)| ShiftJob {
        scheduled_onset: o,
        duration: d,
        shiftable: s,
    })
}

proptest! {
    #[test]
    fn arbitrary_schedules_satisfy_postconditions(
        jobs in proptest::collection::vec(job_strategy(), 0..30),
        guard in 0.0f64..0.5,
    ) {
        let protected: Vec<_> = jobs
            .iter()
            .filter(|j| !j.shiftable)
            .map(|j| soundshift_core::timeshift::ProtectedInterval {
                start: j.scheduled_onset,
                end: j.scheduled_onset + j.duration,
                source: "rw".into(),
            })
            .collect();
        let onsets = shift_onsets(&jobs, &protected, guard);
        prop_assert!(check_time_shift(&jobs, &protected, guard, &onsets).is_ok());
    }
}
