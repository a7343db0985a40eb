//! Built-in plans for the three study conditions.
//!
//! Full transparency and noise cancellation only set the transparency
//! level. The SoundShift plans are scenario specific; see the per-scenario
//! functions below for the exact manipulator settings.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{
    Condition, EarChannel, EarconAttachment, EarconTrigger, ManipulationPlan, Placement, Scene,
    ScenarioId, StyleFilter, TauStep, TimeShiftConfig, TransparencyParams, SCHEMA_VERSION,
};
use crate::synth::ClipKind;

/// Half transparency used by the SoundShift plans.
pub const HALF_TRANSPARENCY: f64 = 0.5;
/// Low-pass cutoff that softens drilling.
pub const DRILL_LOWPASS_HZ: f64 = 800.0;
/// Radius around a construction site that triggers its warning earcon.
pub const CONSTRUCTION_RADIUS: f64 = 10.0;
pub const TELEPHONE_LOW_HZ: f64 = 300.0;
pub const TELEPHONE_HIGH_HZ: f64 = 3400.0;

fn ranks(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn time_shift() -> TimeShiftConfig {
    TimeShiftConfig {
        enabled: true,
        guard_gap: 0.0,
        protected_categories: BTreeSet::from(["@protected".to_string()]),
    }
}

fn ss_base(tau: f64) -> ManipulationPlan {
    let mut plan = ManipulationPlan::transparency_only("ss", tau);
    plan.time_shift = time_shift();
    plan
}

/// Street navigation: half transparency; manhole taps, drilling,
/// navigation and ringtone ranked loudest to quietest; navigation left
/// and ringtone right; low-passed drilling; Time Shift; an earcon on
/// approaching a construction site.
pub fn street_plan() -> ManipulationPlan {
    let mut plan = ss_base(HALF_TRANSPARENCY);
    plan.envelope_ranks = ranks(&[("cane_manhole", 1), ("drill", 2), ("nav", 3), ("ringtone", 4)]);
    plan.position_overrides = BTreeMap::from([
        ("nav".to_string(), Placement::ear(EarChannel::Left)),
        ("ringtone".to_string(), Placement::ear(EarChannel::Right)),
    ]);
    plan.style_filters = BTreeMap::from([(
        "drill".to_string(),
        StyleFilter::LowPass { cutoff: DRILL_LOWPASS_HZ },
    )]);
    plan.earcons = vec![EarconAttachment {
        earcon_clip: ClipKind::EarconA.id().into(),
        trigger: EarconTrigger::OnProximity {
            selector: "drill".into(),
            radius: CONSTRUCTION_RADIUS,
        },
        lead_time: EarconAttachment::DEFAULT_LEAD_TIME,
    }];
    plan
}

/// Help desk: noise cancellation that switches to half transparency for
/// the duration of each announcement; knocks, announcements, handbook and
/// voice notes ranked loudest to quietest; handbook left and voice notes
/// right; Time Shift.
pub fn help_desk_plan(scene: &Scene) -> ManipulationPlan {
    let mut plan = ss_base(0.0);
    let mut steps = Vec::new();
    for ev in scene.events.iter().filter(|e| e.source == "announcement") {
        steps.push(TauStep { time: ev.scheduled_onset, tau: HALF_TRANSPARENCY });
        steps.push(TauStep { time: ev.end(), tau: 0.0 });
    }
    steps.sort_by(|a, b| a.time.total_cmp(&b.time));
    plan.transparency = TransparencyParams {
        tau_automation: steps,
        ..TransparencyParams::with_tau(0.0)
    };
    plan.envelope_ranks = ranks(&[("knock", 1), ("announcement", 2), ("handbook", 3), ("voice_note", 4)]);
    plan.position_overrides = BTreeMap::from([
        ("handbook".to_string(), Placement::ear(EarChannel::Left)),
        ("voice_note".to_string(), Placement::ear(EarChannel::Right)),
    ]);
    plan
}

/// Hybrid conference: half transparency; real and virtual voices share
/// the top rank above dish clinks and broadcasts; broadcasts right;
/// telephone-band virtual voices; Time Shift; separate earcons before dish
/// clinks and broadcasts.
pub fn conference_plan() -> ManipulationPlan {
    let mut plan = ss_base(HALF_TRANSPARENCY);
    plan.envelope_ranks = ranks(&[("rw_speaker", 1), ("vr_speaker", 1), ("dish", 2), ("broadcast", 3)]);
    plan.position_overrides = BTreeMap::from([(
        "broadcast".to_string(),
        Placement::ear(EarChannel::Right),
    )]);
    plan.style_filters = BTreeMap::from([(
        "vr_speaker".to_string(),
        StyleFilter::Telephone {
            low: TELEPHONE_LOW_HZ,
            high: TELEPHONE_HIGH_HZ,
        },
    )]);
    let on_event = |clip: ClipKind, selector: &str| EarconAttachment {
        earcon_clip: clip.id().into(),
        trigger: EarconTrigger::OnEvent { selector: selector.into() },
        lead_time: EarconAttachment::DEFAULT_LEAD_TIME,
    };
    plan.earcons = vec![
        on_event(ClipKind::EarconA, "dish"),
        on_event(ClipKind::EarconB, "broadcast"),
    ];
    plan
}

/// The plan for `condition` applied to `scene`. The SoundShift plan needs
/// the scene's scenario.
pub fn preset(condition: Condition, scene: &Scene) -> Result<ManipulationPlan> {
    let plan = match condition {
        Condition::Ft => ManipulationPlan::transparency_only("ft", 1.0),
        Condition::Nc => ManipulationPlan::transparency_only("nc", 0.0),
        Condition::Ss => match scene.scenario {
            Some(ScenarioId::RwFocused) => street_plan(),
            Some(ScenarioId::VrFocused) => help_desk_plan(scene),
            Some(ScenarioId::FullyMixed) => conference_plan(),
            None => {
                return Err(Error::Schema {
                    path: "scenario".into(),
                    message: "the ss preset needs a scene generated from a scenario template".into(),
                })
            }
        },
    };
    debug_assert_eq!(plan.schema_version, SCHEMA_VERSION);
    Ok(plan)
}
