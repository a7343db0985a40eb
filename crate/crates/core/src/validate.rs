//! Invariant checks for scenes, plans and timelines. Each failed check is
//! reported as a [`Violation`] with a stable rule name.

use std::collections::{BTreeMap, BTreeSet};

use crate::dsp::{MAX_RESAMPLE_RATIO, MIN_RESAMPLE_RATIO};
use crate::error::Violation;
use crate::model::{
    EarconTrigger, ListenerPath, ManipulationPlan, Placement, Scene, SoundCategory, SoundEvent,
    StyleFilter, Timeline, OVERRUN_ALLOWANCE, SAMPLE_RATE, SCHEMA_VERSION,
};
use crate::schedule::ScenarioTemplate;

const NYQUIST: f64 = SAMPLE_RATE as f64 / 2.0;

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn new() -> Self {
        Self { out: Vec::new() }
    }

    fn check(&mut self, ok: bool, rule: &'static str, path: impl Into<String>, msg: impl Into<String>) {
        if !ok {
            self.out.push(Violation::new(rule, path, msg));
        }
    }

    fn finite(&mut self, v: f64, path: impl Into<String>) -> bool {
        let ok = v.is_finite();
        self.check(ok, "finite_values", path, format!("{v} is not finite"));
        ok
    }
}

fn check_schema_version(c: &mut Checker, v: u32, kind: &str, expected_kind: &str) {
    c.check(
        v == SCHEMA_VERSION,
        "schema_version",
        "schema_version",
        format!("unsupported schema version {v}"),
    );
    c.check(
        kind == expected_kind,
        "document_kind",
        "kind",
        format!("expected `{expected_kind}`, found `{kind}`"),
    );
}

fn check_listener(c: &mut Checker, listener: &ListenerPath) {
    let wps = &listener.waypoints;
    c.check(!wps.is_empty(), "listener_nonempty", "listener.waypoints", "no waypoints");
    if let Some(first) = wps.first() {
        c.check(
            first.time == 0.0,
            "listener_first_waypoint_zero",
            "listener.waypoints[0].time",
            format!("first waypoint at {} s, expected 0", first.time),
        );
    }
    for (i, w) in wps.iter().enumerate() {
        let path = format!("listener.waypoints[{i}]");
        c.finite(w.time, format!("{path}.time"));
        c.finite(w.yaw, format!("{path}.yaw"));
        c.check(
            w.position.is_finite(),
            "finite_values",
            format!("{path}.position"),
            "non-finite position",
        );
    }
    for (i, pair) in wps.windows(2).enumerate() {
        c.check(
            pair[1].time > pair[0].time,
            "listener_times_increasing",
            format!("listener.waypoints[{}].time", i + 1),
            format!("{} does not follow {}", pair[1].time, pair[0].time),
        );
    }
}

fn check_event(c: &mut Checker, scene: &Scene, ev: &SoundEvent, path: &str, identifiable: bool) {
    let onset_ok = c.finite(ev.scheduled_onset, format!("{path}.scheduled_onset"));
    let dur_ok = c.finite(ev.duration, format!("{path}.duration"));
    c.check(
        ev.scheduled_onset >= 0.0,
        "event_onset_nonnegative",
        format!("{path}.scheduled_onset"),
        format!("onset {} < 0", ev.scheduled_onset),
    );
    c.check(
        ev.duration > 0.0,
        "event_duration_positive",
        format!("{path}.duration"),
        format!("duration {} <= 0", ev.duration),
    );
    if onset_ok && dur_ok {
        c.check(
            ev.end() <= scene.duration + 1e-9,
            "event_within_duration",
            path,
            format!("ends at {} s, past scene end {} s", ev.end(), scene.duration),
        );
    }
    if let Some(period) = ev.repeat_every {
        c.check(
            period.is_finite() && period > 0.0,
            "repeat_period_positive",
            format!("{path}.repeat_every"),
            format!("period {period} must be > 0"),
        );
    }
    match scene.source(&ev.source) {
        None => c.check(
            false,
            "event_source_exists",
            format!("{path}.source"),
            format!("unknown source `{}`", ev.source),
        ),
        Some(src) if identifiable => c.check(
            src.identification_key.is_some(),
            "event_requires_identifiable_source",
            format!("{path}.source"),
            format!("source `{}` has no identification key", ev.source),
        ),
        Some(src) => c.check(
            src.identification_key.is_none(),
            "ambient_requires_unidentifiable_source",
            format!("{path}.source"),
            format!("ambient bed uses identifiable source `{}`", ev.source),
        ),
    }
}

/// All violated scene invariants; empty when the scene is valid.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut c = Checker::new();
    check_schema_version(&mut c, scene.schema_version, &scene.kind, "scene");
    if c.finite(scene.duration, "duration") {
        c.check(
            scene.duration > 0.0,
            "duration_positive",
            "duration",
            format!("{} <= 0", scene.duration),
        );
    }

    let mut seen = BTreeSet::new();
    for (i, s) in scene.sources.iter().enumerate() {
        let path = format!("sources[{i}]");
        c.check(
            seen.insert(s.id.as_str()),
            "source_id_unique",
            format!("{path}.id"),
            format!("duplicate source id `{}`", s.id),
        );
        if let Some(k) = s.identification_key {
            c.check(
                (1..=4).contains(&k),
                "identification_key_range",
                format!("{path}.identification_key"),
                format!("key {k} not in 1..=4"),
            );
        }
        c.check(
            s.category == SoundCategory::Virtual || s.placement.is_spatial(),
            "rw_requires_spatial",
            format!("{path}.placement"),
            format!("real-world source `{}` must be spatial", s.id),
        );
        if let Placement::Spatial { position } = s.placement {
            c.check(
                position.is_finite(),
                "finite_values",
                format!("{path}.placement.position"),
                "non-finite position",
            );
        }
    }

    for (i, ev) in scene.ambient_beds.iter().enumerate() {
        check_event(&mut c, scene, ev, &format!("ambient_beds[{i}]"), false);
    }
    for (i, ev) in scene.events.iter().enumerate() {
        check_event(&mut c, scene, ev, &format!("events[{i}]"), true);
    }
    check_listener(&mut c, &scene.listener);

    if let Some(id) = scene.scenario {
        let expected = ScenarioTemplate::for_id(id).key_counts();
        let mut actual: BTreeMap<u8, usize> = BTreeMap::new();
        for ev in &scene.events {
            if let Some(k) = scene.source(&ev.source).and_then(|s| s.identification_key) {
                *actual.entry(k).or_default() += 1;
            }
        }
        c.check(
            actual == expected,
            "template_event_count",
            "events",
            format!("per-key counts {actual:?}, template requires {expected:?}"),
        );
    }
    c.out
}

fn check_unit(c: &mut Checker, v: f64, rule: &'static str, path: &str) {
    c.check(
        (0.0..=1.0).contains(&v),
        rule,
        path,
        format!("{v} not in [0, 1]"),
    );
}

fn check_style(c: &mut Checker, f: &StyleFilter, path: &str) {
    let in_band = |hz: f64| hz > 0.0 && hz < NYQUIST;
    match *f {
        StyleFilter::LowPass { cutoff } | StyleFilter::HighPass { cutoff } => c.check(
            in_band(cutoff),
            "style_cutoff_range",
            path,
            format!("cutoff {cutoff} Hz outside (0, {NYQUIST})"),
        ),
        StyleFilter::Telephone { low, high } => {
            c.check(
                in_band(low) && in_band(high),
                "style_cutoff_range",
                path,
                format!("band {low}..{high} Hz outside (0, {NYQUIST})"),
            );
            c.check(low < high, "telephone_order", path, format!("low {low} >= high {high}"));
        }
        StyleFilter::PitchScale { ratio } => c.check(
            (MIN_RESAMPLE_RATIO..=MAX_RESAMPLE_RATIO).contains(&ratio),
            "pitch_ratio_range",
            path,
            format!("ratio {ratio} outside [{MIN_RESAMPLE_RATIO}, {MAX_RESAMPLE_RATIO}]"),
        ),
    }
}

/// All violated plan invariants; empty when the plan is valid.
pub fn validate_plan(plan: &ManipulationPlan) -> Vec<Violation> {
    let mut c = Checker::new();
    check_schema_version(&mut c, plan.schema_version, &plan.kind, "plan");
    let t = &plan.transparency;
    check_unit(&mut c, t.tau, "tau_range", "transparency.tau");
    check_unit(&mut c, t.eta, "eta_range", "transparency.eta");
    c.check(
        t.s_default > 0.0 && t.s_default <= 1.0,
        "s_default_range",
        "transparency.s_default",
        format!("{} not in (0, 1]", t.s_default),
    );
    c.check(
        t.z >= 0.0 && t.z < NYQUIST,
        "z_range",
        "transparency.z",
        format!("{} Hz not in [0, {NYQUIST})", t.z),
    );
    for (i, step) in t.tau_automation.iter().enumerate() {
        let path = format!("transparency.tau_automation[{i}]");
        check_unit(&mut c, step.tau, "tau_range", &format!("{path}.tau"));
        c.finite(step.time, format!("{path}.time"));
    }
    for (i, pair) in t.tau_automation.windows(2).enumerate() {
        c.check(
            pair[1].time >= pair[0].time,
            "automation_sorted",
            format!("transparency.tau_automation[{}]", i + 1),
            format!("time {} before {}", pair[1].time, pair[0].time),
        );
    }
    for (sel, &rank) in &plan.envelope_ranks {
        c.check(
            rank >= 1,
            "rank_positive",
            format!("envelope_ranks.{sel}"),
            "rank must be >= 1",
        );
    }
    c.check(
        plan.envelope_rank_step_db.is_finite() && plan.envelope_rank_step_db >= 0.0,
        "rank_step_nonnegative",
        "envelope_rank_step_db",
        format!("{} dB", plan.envelope_rank_step_db),
    );
    for (sel, f) in &plan.style_filters {
        check_style(&mut c, f, &format!("style_filters.{sel}"));
    }
    c.check(
        plan.time_shift.guard_gap.is_finite() && plan.time_shift.guard_gap >= 0.0,
        "guard_gap_nonnegative",
        "time_shift.guard_gap",
        format!("{}", plan.time_shift.guard_gap),
    );
    for (i, e) in plan.earcons.iter().enumerate() {
        let path = format!("earcons[{i}]");
        c.check(
            e.lead_time.is_finite() && e.lead_time >= 0.0,
            "lead_time_nonnegative",
            format!("{path}.lead_time"),
            format!("{}", e.lead_time),
        );
        if let EarconTrigger::OnProximity { radius, .. } = e.trigger {
            c.check(
                radius.is_finite() && radius > 0.0,
                "earcon_radius_positive",
                format!("{path}.trigger.radius"),
                format!("{radius}"),
            );
        }
    }
    c.out
}

/// Cross-document checks between a plan and the scene it is applied to.
pub fn validate_plan_for_scene(plan: &ManipulationPlan, scene: &Scene) -> Vec<Violation> {
    let mut c = Checker::new();
    for src in &scene.sources {
        let placement = crate::manipulate::position_override(plan, src);
        c.check(
            src.category == SoundCategory::Virtual || placement.is_spatial(),
            "rw_requires_spatial",
            format!("position_overrides[{}]", src.id),
            format!("override moves real-world source `{}` off spatial placement", src.id),
        );
    }
    c.out
}

/// All violated timeline invariants; empty when the timeline is valid.
pub fn validate_timeline(tl: &Timeline) -> Vec<Violation> {
    let mut c = Checker::new();
    check_schema_version(&mut c, tl.schema_version, &tl.kind, "timeline");
    if c.finite(tl.duration, "duration") {
        c.check(
            tl.duration > 0.0,
            "duration_positive",
            "duration",
            format!("{} <= 0", tl.duration),
        );
    }
    for (i, e) in tl.entries.iter().enumerate() {
        let path = format!("entries[{i}]");
        let a = c.finite(e.actual_onset, format!("{path}.actual_onset"));
        let s = c.finite(e.scheduled_onset, format!("{path}.scheduled_onset"));
        c.finite(e.duration, format!("{path}.duration"));
        if a && s {
            c.check(
                e.actual_onset >= e.scheduled_onset,
                "actual_not_before_scheduled",
                format!("{path}.actual_onset"),
                format!("actual {} < scheduled {}", e.actual_onset, e.scheduled_onset),
            );
        }
        c.check(
            e.scheduled_onset >= 0.0,
            "event_onset_nonnegative",
            format!("{path}.scheduled_onset"),
            format!("{}", e.scheduled_onset),
        );
        c.check(
            e.duration > 0.0,
            "event_duration_positive",
            format!("{path}.duration"),
            format!("{}", e.duration),
        );
        c.check(
            e.gain >= 0.0,
            "gain_nonnegative",
            format!("{path}.gain"),
            format!("{}", e.gain),
        );
        if let Some(k) = e.identification_key {
            c.check(
                (1..=4).contains(&k),
                "identification_key_range",
                format!("{path}.identification_key"),
                format!("key {k} not in 1..=4"),
            );
        }
        c.check(
            e.dropped || e.actual_onset + e.duration <= tl.duration + OVERRUN_ALLOWANCE + 1e-9,
            "within_overrun_allowance",
            path.clone(),
            format!(
                "ends at {} s, beyond {} s + {OVERRUN_ALLOWANCE} s allowance without `dropped`",
                e.actual_onset + e.duration,
                tl.duration
            ),
        );
    }
    for (i, pair) in tl.entries.windows(2).enumerate() {
        c.check(
            pair[1].actual_onset >= pair[0].actual_onset,
            "entries_sorted",
            format!("entries[{}]", i + 1),
            format!("onset {} before {}", pair[1].actual_onset, pair[0].actual_onset),
        );
    }
    let mut ids = BTreeSet::new();
    for (i, e) in tl.entries.iter().enumerate() {
        c.check(
            ids.insert(e.event_id),
            "event_id_unique",
            format!("entries[{i}].event_id"),
            format!("duplicate event id {}", e.event_id),
        );
    }
    c.out
}
