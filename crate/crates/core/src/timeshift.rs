//! Time Shift: delays Virtual events out of protected real-world spans.
//!
//! Events are swept in ascending scheduled onset (ties by event index).
//! A Virtual event that collides with a guard-inflated protected interval
//! or with a previously delayed Virtual event is moved to the earliest
//! time at or after its scheduled onset that clears all of them. Delayed
//! events form a FIFO queue, so a later-scheduled delayed event never
//! starts before an earlier one ends (plus the guard gap). Events that
//! already start after the blockers are left alone; preemption of a
//! sounding event is not modelled.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    ManipulationPlan, Scene, Selector, SoundCategory, Timeline, TimelineEntry,
    OVERRUN_ALLOWANCE,
};

pub const TAG_DELAYED: &str = "time_shift";
pub const TAG_PROTECTED: &str = "time_shift:protected";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedInterval {
    pub start: f64,
    pub end: f64,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftJob {
    pub scheduled_onset: f64,
    pub duration: f64,
    pub shiftable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    start: f64,
    end: f64,
}

impl Span {
    fn hits(&self, t: f64, dur: f64) -> bool {
        t < self.end && self.start < t + dur
    }
}

/// Earliest `t' >= t` where `[t', t' + dur)` misses every blocker.
fn earliest_clear(mut t: f64, dur: f64, blockers: &[Span]) -> f64 {
    loop {
        let mut moved = false;
        for b in blockers {
            if b.hits(t, dur) {
                t = b.end;
                moved = true;
            }
        }
        if !moved {
            return t;
        }
    }
}

/// Actual onsets for `jobs`, in input order.
pub fn shift_onsets(jobs: &[ShiftJob], protected: &[ProtectedInterval], guard_gap: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| {
        jobs[a]
            .scheduled_onset
            .total_cmp(&jobs[b].scheduled_onset)
            .then(a.cmp(&b))
    });

    let mut blockers: Vec<Span> = protected
        .iter()
        .map(|p| Span {
            start: p.start - guard_gap,
            end: p.end + guard_gap,
        })
        .collect();
    let mut queue_free = f64::NEG_INFINITY;
    let mut actual: Vec<f64> = jobs.iter().map(|j| j.scheduled_onset).collect();

    for i in order {
        let job = jobs[i];
        if !job.shiftable {
            continue;
        }
        let sched = job.scheduled_onset;
        if earliest_clear(sched, job.duration, &blockers) == sched {
            continue;
        }
        let onset = earliest_clear(sched.max(queue_free), job.duration, &blockers);
        let end = onset + job.duration;
        blockers.push(Span {
            start: onset - guard_gap,
            end: end + guard_gap,
        });
        queue_free = end + guard_gap;
        actual[i] = onset;
    }
    actual
}

/// One interval per event whose real-world source matches a protected
/// selector. Intervals are not merged.
pub fn protected_intervals(scene: &Scene, plan: &ManipulationPlan) -> Vec<ProtectedInterval> {
    let cfg = &plan.time_shift;
    if !cfg.enabled || cfg.protected_categories.is_empty() {
        return Vec::new();
    }
    let sources = scene.source_map();
    scene
        .events
        .iter()
        .filter(|ev| {
            sources.get(ev.source.as_str()).is_some_and(|src| {
                src.category == SoundCategory::RealWorld
                    && cfg
                        .protected_categories
                        .iter()
                        .any(|sel| Selector::parse(sel).matches(src))
            })
        })
        .map(|ev| ProtectedInterval {
            start: ev.scheduled_onset,
            end: ev.end(),
            source: ev.source.clone(),
        })
        .collect()
}

/// Builds the scene's timeline with Virtual events shifted out of
/// `protected`. Events pushed past `duration + OVERRUN_ALLOWANCE` stay in
/// the timeline flagged `dropped`.
pub fn time_shift(scene: &Scene, protected: &[ProtectedInterval], guard_gap: f64) -> Result<Timeline> {
    let sources = scene.source_map();
    let mut jobs = Vec::with_capacity(scene.events.len());
    for ev in &scene.events {
        let src = sources
            .get(ev.source.as_str())
            .ok_or_else(|| crate::Error::Invariant(vec![crate::Violation::new(
                "event_source_exists",
                "events",
                format!("unknown source `{}`", ev.source),
            )]))?;
        jobs.push(ShiftJob {
            scheduled_onset: ev.scheduled_onset,
            duration: ev.duration,
            shiftable: src.category == SoundCategory::Virtual,
        });
    }
    let onsets = shift_onsets(&jobs, protected, guard_gap);
    let protected_sources: Vec<&str> = protected.iter().map(|p| p.source.as_str()).collect();

    let mut entries: Vec<TimelineEntry> = scene
        .events
        .iter()
        .zip(&onsets)
        .enumerate()
        .map(|(event_id, (ev, &actual))| {
            let src = sources[ev.source.as_str()];
            let mut tags = Vec::new();
            if actual > ev.scheduled_onset {
                tags.push(TAG_DELAYED.to_string());
            }
            if protected_sources.contains(&ev.source.as_str()) {
                tags.push(TAG_PROTECTED.to_string());
            }
            TimelineEntry {
                event_id,
                source: ev.source.clone(),
                identification_key: src.identification_key,
                category: src.category,
                scheduled_onset: ev.scheduled_onset,
                actual_onset: actual,
                duration: ev.duration,
                gain: 0.0,
                applied_manipulations: tags,
                dropped: actual + ev.duration > scene.duration + OVERRUN_ALLOWANCE,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.actual_onset
            .total_cmp(&b.actual_onset)
            .then(a.event_id.cmp(&b.event_id))
    });

    let mut tl = Timeline::new(scene.id.clone(), scene.duration, entries);
    tl.scenario = scene.scenario;
    Ok(tl)
}

/// Timeline without any shifting: actual onsets equal scheduled ones.
pub fn identity_timeline(scene: &Scene) -> Result<Timeline> {
    time_shift(scene, &[], 0.0)
}

/// Convenience for plans: protected intervals and the shift in one go.
pub fn plan_timeline(scene: &Scene, plan: &ManipulationPlan) -> Result<Timeline> {
    if !plan.time_shift.enabled {
        return identity_timeline(scene);
    }
    let protected = protected_intervals(scene, plan);
    time_shift(scene, &protected, plan.time_shift.guard_gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(start: f64, end: f64) -> ProtectedInterval {
        ProtectedInterval {
            start,
            end,
            source: "p".into(),
        }
    }

    fn vr(onset: f64, duration: f64) -> ShiftJob {
        ShiftJob {
            scheduled_onset: onset,
            duration,
            shiftable: true,
        }
    }

    #[test]
    fn single_collision_moves_to_interval_end() {
        let out = shift_onsets(&[vr(3.0, 1.0)], &[pi(2.0, 4.0)], 0.0);
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn no_protection_is_identity() {
        let jobs = [vr(1.0, 2.0), vr(1.5, 2.0), vr(7.0, 0.5)];
        let out = shift_onsets(&jobs, &[], 0.3);
        assert_eq!(out, vec![1.0, 1.5, 7.0]);
    }

    #[test]
    fn queued_events_keep_order_and_gap() {
        let d1 = 1.0;
        let out = shift_onsets(&[vr(3.0, d1), vr(3.2, 0.5)], &[pi(2.0, 4.0)], 0.1);
        // The first event clears the guard-inflated interval end.
        assert!((out[0] - 4.1).abs() < 1e-12);
        assert!((out[1] - (out[0] + d1 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn fifo_blocks_short_event_from_jumping_the_queue() {
        let protected = [pi(2.0, 3.0), pi(4.0, 5.0)];
        let out = shift_onsets(&[vr(1.9, 1.5), vr(2.0, 0.5)], &protected, 0.0);
        assert_eq!(out[0], 5.0);
        assert_eq!(out[1], 6.5);
    }

    #[test]
    fn real_world_jobs_never_move() {
        let rw = ShiftJob {
            scheduled_onset: 3.0,
            duration: 1.0,
            shiftable: false,
        };
        assert_eq!(shift_onsets(&[rw], &[pi(2.0, 4.0)], 0.0), vec![3.0]);
    }
}
