//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the code paths it is used to check.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soundshift_core::dsp::{apply_chain, Filter};
use soundshift_core::model::{
    EarChannel, ListenerPath, Placement, Scene, SoundCategory, SoundEvent, SoundSource, Timeline,
    TimelineEntry, Vec3, Waypoint, SCHEMA_VERSION,
};
use soundshift_core::scoring::{Press, ResponseLog};
use soundshift_core::timeshift::{ProtectedInterval, ShiftJob};

pub const SR: f64 = 48_000.0;

// ---------------------------------------------------------------- Time Shift

/// A Time Shift instance with every quantity on a 1 ms grid.
#[derive(Debug, Clone)]
pub struct GridInstance {
    /// (onset ms, duration ms, shiftable)
    pub jobs: Vec<(i64, i64, bool)>,
    pub protected: Vec<(i64, i64)>,
    pub guard: i64,
}

impl GridInstance {
    pub fn random(seed: u64, max_jobs: usize, span_ms: i64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=max_jobs);
        let mut jobs = Vec::with_capacity(n);
        let mut protected = Vec::new();
        for _ in 0..n {
            let onset = rng.random_range(0..span_ms);
            let dur = rng.random_range(100..3000);
            let shiftable = rng.random_bool(0.6);
            if !shiftable && rng.random_bool(0.7) {
                protected.push((onset, onset + dur));
            }
            jobs.push((onset, dur, shiftable));
        }
        let guard = [0, 50, 100, 250][rng.random_range(0..4)];
        Self { jobs, protected, guard }
    }

    pub fn jobs(&self) -> Vec<ShiftJob> {
        self.jobs
            .iter()
            .map(|&(o, d, s)| ShiftJob {
                scheduled_onset: o as f64 / 1000.0,
                duration: d as f64 / 1000.0,
                shiftable: s,
            })
            .collect()
    }

    pub fn protected(&self) -> Vec<ProtectedInterval> {
        self.protected
            .iter()
            .map(|&(s, e)| ProtectedInterval {
                start: s as f64 / 1000.0,
                end: e as f64 / 1000.0,
                source: "rw".into(),
            })
            .collect()
    }

    pub fn guard_seconds(&self) -> f64 {
        self.guard as f64 / 1000.0
    }
}

/// Minimal feasible onsets by scanning a 1 ms grid. Events are visited in
/// scheduled order; a Virtual event keeps its slot if that slot is clear,
/// otherwise it takes the first grid point at or after both its schedule
/// and the end of the previous delayed event (plus guard) where it
/// clears every protected interval and every earlier delayed event, all
/// inflated by the guard.
pub fn brute_force_onsets(inst: &GridInstance) -> Vec<i64> {
    let g = inst.guard;
    let mut order: Vec<usize> = (0..inst.jobs.len()).collect();
    order.sort_by_key(|&i| (inst.jobs[i].0, i));
    let mut blocked: Vec<(i64, i64)> = inst.protected.iter().map(|&(s, e)| (s - g, e + g)).collect();
    let mut out: Vec<i64> = inst.jobs.iter().map(|j| j.0).collect();
    let mut queue_free = i64::MIN;
    for i in order {
        let (sched, dur, shiftable) = inst.jobs[i];
        if !shiftable {
            continue;
        }
        let clear = |t: i64, blocked: &[(i64, i64)]| blocked.iter().all(|&(s, e)| !(t < e && s < t + dur));
        if clear(sched, &blocked) {
            continue;
        }
        let mut t = sched.max(queue_free);
        while !clear(t, &blocked) {
            t += 1;
        }
        blocked.push((t - g, t + dur + g));
        queue_free = t + dur + g;
        out[i] = t;
    }
    out
}

fn intersects(a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
    const EPS: f64 = 1e-9;
    a0 < b1 - EPS && b0 < a1 - EPS
}

/// Checks the Time Shift postconditions for one instance and returns the
/// first violation found.
pub fn check_time_shift(
    jobs: &[ShiftJob],
    protected: &[ProtectedInterval],
    guard: f64,
    onsets: &[f64],
) -> Result<(), String> {
    if onsets.len() != jobs.len() {
        return Err(format!("{} onsets for {} jobs", onsets.len(), jobs.len()));
    }
    for (i, (j, &a)) in jobs.iter().zip(onsets).enumerate() {
        if a < j.scheduled_onset - 1e-12 {
            return Err(format!("job {i} moved earlier: {} -> {a}", j.scheduled_onset));
        }
        if !j.shiftable && a != j.scheduled_onset {
            return Err(format!("real-world job {i} moved"));
        }
        if j.shiftable {
            for p in protected {
                if intersects(a, a + j.duration, p.start - guard, p.end + guard) {
                    return Err(format!(
                        "job {i} [{a}, {}) hits protected [{}, {}) with guard {guard}",
                        a + j.duration,
                        p.start,
                        p.end
                    ));
                }
            }
        }
    }
    let delayed: Vec<usize> = (0..jobs.len())
        .filter(|&i| jobs[i].shiftable && onsets[i] > jobs[i].scheduled_onset)
        .collect();
    for &i in &delayed {
        for &k in &delayed {
            let before = (jobs[i].scheduled_onset, i) < (jobs[k].scheduled_onset, k);
            if before && onsets[k] < onsets[i] + jobs[i].duration + guard - 1e-9 {
                return Err(format!("delayed jobs {i} and {k} out of FIFO order"));
            }
            if i != k && intersects(onsets[i] - guard, onsets[i] + jobs[i].duration + guard, onsets[k], onsets[k] + jobs[k].duration) {
                return Err(format!("delayed jobs {i} and {k} overlap"));
            }
        }
    }
    Ok(())
}

/// A scene with `n` events over `duration` seconds; real-world sources are
/// protected. Used to exercise Time Shift through the scene-level API.
pub fn random_shift_scene(seed: u64, n: usize, duration: f64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::new();
    let mut events = Vec::new();
    for i in 0..n {
        let rw = rng.random_bool(0.45);
        let id = format!("{}.{i}", if rw { "rw" } else { "vr" });
        sources.push(SoundSource {
            id: id.clone(),
            clip: "knock".into(),
            category: if rw { SoundCategory::RealWorld } else { SoundCategory::Virtual },
            placement: if rw {
                Placement::spatial(rng.random_range(-5.0..5.0), 0.0, rng.random_range(-5.0..5.0))
            } else {
                Placement::ear(EarChannel::Both)
            },
            identification_key: Some(rng.random_range(1..=4)),
            protected: rw,
            follows_listener: false,
        });
        let dur = rng.random_range(0.2..4.0);
        let onset = rng.random_range(0.0..(duration - dur));
        events.push(SoundEvent::new(id, onset, dur));
    }
    events.sort_by(|a, b| a.scheduled_onset.total_cmp(&b.scheduled_onset));
    Scene {
        schema_version: SCHEMA_VERSION,
        kind: "scene".into(),
        id: format!("shift-{seed}"),
        scenario: None,
        duration,
        seed,
        sources,
        ambient_beds: vec![],
        events,
        listener: ListenerPath::stationary(Vec3::ZERO, 0.0),
    }
}

// ------------------------------------------------------------------ Scoring

/// Maximum number of (event, press) pairs, each event and press used at
/// most once, with matching keys and `onset <= t <= onset + window`.
/// Exhaustive search with memoization over the used-press mask.
pub fn exhaustive_matches(events: &[(f64, u8)], presses: &[Press], window: f64) -> usize {
    assert!(presses.len() <= 24);
    fn go(
        i: usize,
        used: u32,
        events: &[(f64, u8)],
        presses: &[Press],
        window: f64,
        memo: &mut HashMap<(usize, u32), usize>,
    ) -> usize {
        if i == events.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let (onset, key) = events[i];
        let mut best = go(i + 1, used, events, presses, window, memo);
        for (j, p) in presses.iter().enumerate() {
            let free = used & (1 << j) == 0;
            if free && p.key == i64::from(key) && onset <= p.t && p.t <= onset + window {
                best = best.max(1 + go(i + 1, used | (1 << j), events, presses, window, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, events, presses, window, &mut HashMap::new())
}

/// Up to 8 events with same-key gaps of at least 1 s, and a noisy log of
/// correct, wrong-key, late and invalid presses.
pub fn random_scoring_instance(seed: u64) -> (Timeline, ResponseLog) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=8);
    let mut last_by_key = [f64::NEG_INFINITY; 5];
    let mut entries = Vec::new();
    let mut t = 0.0;
    while entries.len() < n {
        t += rng.random_range(0.0..2.5);
        let key: u8 = rng.random_range(1..=4);
        if t - last_by_key[key as usize] < 1.0 {
            continue;
        }
        last_by_key[key as usize] = t;
        entries.push(TimelineEntry {
            event_id: entries.len(),
            source: format!("k{key}"),
            identification_key: Some(key),
            category: SoundCategory::Virtual,
            scheduled_onset: t,
            actual_onset: t,
            duration: 1.0,
            gain: 1.0,
            applied_manipulations: vec![],
            dropped: false,
        });
    }
    let mut presses = Vec::new();
    for e in &entries {
        let key = i64::from(e.identification_key.unwrap());
        for _ in 0..rng.random_range(0..=2) {
            let wrong = rng.random_bool(0.15);
            presses.push(Press {
                t: e.actual_onset + rng.random_range(-0.5..7.0),
                key: if wrong { rng.random_range(0..=5) } else { key },
            });
        }
    }
    presses.truncate(12);
    presses.sort_by(|a, b| a.t.total_cmp(&b.t));
    let tl = Timeline::new(format!("score-{seed}"), 60.0, entries);
    (tl, ResponseLog { presses })
}

// ---------------------------------------------------------------------- DSP

/// Steady-state gain of `chain` at `freq` in dB, measured by passing a unit
/// sine through it for one second and comparing RMS over the second half.
pub fn probe_gain_db(chain: &[Filter], freq: f64) -> f64 {
    let n = SR as usize;
    let input: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq * i as f64 / SR).sin()).collect();
    let out = apply_chain(&input, chain);
    let tail = &out[n / 2..];
    let rms = (tail.iter().map(|x| x * x).sum::<f64>() / tail.len() as f64).sqrt();
    20.0 * (rms * SQRT_2).log10()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

// ------------------------------------------------------------------- Render

/// A small renderable scene over the synthesized clip bank with a moving
/// listener, spatial and ear-channel sources of both categories.
pub fn random_render_scene(seed: u64, n: usize) -> Scene {
    const CLIPS: [&str; 5] = ["knock", "dish_clink", "ringtone", "tap", "earcon_b"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = 6.0;
    let mut sources = Vec::new();
    let mut events = Vec::new();
    for i in 0..n {
        let rw = rng.random_bool(0.5);
        let spatial = rw || rng.random_bool(0.5);
        let id = format!("src.{i}");
        sources.push(SoundSource {
            id: id.clone(),
            clip: CLIPS[rng.random_range(0..CLIPS.len())].into(),
            category: if rw { SoundCategory::RealWorld } else { SoundCategory::Virtual },
            placement: if spatial {
                Placement::spatial(rng.random_range(-6.0..6.0), rng.random_range(-1.0..1.0), rng.random_range(-6.0..6.0))
            } else {
                Placement::ear([EarChannel::Left, EarChannel::Right, EarChannel::Both][rng.random_range(0..3)])
            },
            identification_key: Some(rng.random_range(1..=4)),
            protected: false,
            follows_listener: false,
        });
        let dur = rng.random_range(0.2..1.5);
        let mut ev = SoundEvent::new(id, rng.random_range(0.0..(duration - dur)), dur);
        if rng.random_bool(0.3) {
            ev.repeat_every = Some(rng.random_range(0.1..0.5));
        }
        events.push(ev);
    }
    events.sort_by(|a, b| a.scheduled_onset.total_cmp(&b.scheduled_onset));
    Scene {
        schema_version: SCHEMA_VERSION,
        kind: "scene".into(),
        id: format!("render-{seed}"),
        scenario: None,
        duration,
        seed,
        sources,
        ambient_beds: vec![],
        events,
        listener: ListenerPath {
            waypoints: vec![
                Waypoint { time: 0.0, position: Vec3::ZERO, yaw: 0.0 },
                Waypoint { time: duration, position: Vec3::new(1.0, 0.0, 4.0), yaw: 1.2 },
            ],
        },
    }
}

/// `scene` restricted to the events whose index satisfies `keep`.
pub fn subset(scene: &Scene, keep: impl Fn(usize) -> bool) -> Scene {
    let mut s = scene.clone();
    s.events = scene
        .events
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, e)| e.clone())
        .collect();
    s
}
