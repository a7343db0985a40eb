//! Seeded generation of the three study scenarios.
//!
//! Every lane of same-key events is placed with a uniform spacing draw
//! (sorted uniform offsets over the lane's slack), so a feasible lane
//! never needs rejection sampling. Times are quantized to whole
//! milliseconds and positions to centimeters so generated files stay
//! readable and exact on round-trip.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    EarChannel, ListenerPath, Placement, Scene, ScenarioId, SoundCategory, SoundEvent, SoundSource,
    Vec3, Waypoint, SCHEMA_VERSION,
};
use crate::synth::ClipKind;

/// Cane tap cadence in the street scenario.
pub const TAP_PERIOD: f64 = 0.5;
/// Taps played with the manhole clip after each manhole contact.
pub const MANHOLE_TAPS: u32 = 4;
/// Pause between consecutive audio-handbook sentences.
pub const HANDBOOK_PAUSE: f64 = 1.0;
/// Minimum fraction of a speaker turn that overlaps another turn.
pub const SPEAKER_OVERLAP: f64 = 0.25;
/// Listener walking speed along +z in the street scenario, m/s.
pub const WALK_SPEED: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub id: ScenarioId,
    /// Nominal scene length in seconds.
    pub duration: f64,
    /// Largest automatic extension tried when a lane does not fit.
    pub max_extension: f64,
    /// Silence required between consecutive events with the same key.
    pub same_key_gap: f64,
    /// Keep-out at both scene ends for identifiable events.
    pub margin: f64,
}

impl ScenarioTemplate {
    pub fn for_id(id: ScenarioId) -> Self {
        Self {
            id,
            duration: 90.0,
            max_extension: 5.0,
            same_key_gap: 1.0,
            margin: 1.0,
        }
    }

    /// Identifiable event count per response key.
    pub fn key_counts(&self) -> BTreeMap<u8, usize> {
        let counts: [usize; 4] = match self.id {
            ScenarioId::RwFocused | ScenarioId::VrFocused => [5, 5, 5, 5],
            ScenarioId::FullyMixed => [6, 6, 5, 5],
        };
        (1u8..=4).zip(counts).collect()
    }

    pub fn total_events(&self) -> usize {
        self.key_counts().values().sum()
    }
}

fn ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn secs(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

fn cm(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Onsets (ms) for a lane of back-to-back items with lengths `lengths`
/// (ms), separated by at least `gap`, inside `[lo, hi]`. With `grid > 1`
/// every onset is a multiple of `grid`.
fn place_lane(
    rng: &mut ChaCha8Rng,
    name: &str,
    lengths: &[i64],
    gap: i64,
    lo: i64,
    hi: i64,
    grid: i64,
) -> Result<Vec<i64>> {
    let n = lengths.len() as i64;
    let lo = lo.div_euclid(grid) * grid + if lo % grid == 0 { 0 } else { grid };
    let needed: i64 = lengths.iter().sum::<i64>() + (n - 1).max(0) * gap;
    let slack = hi - lo - needed;
    if slack < 0 {
        return Err(Error::Infeasible {
            constraint: format!(
                "{name}: {n} events need {:.3} s but only {:.3} s is available",
                secs(needed),
                secs(hi - lo)
            ),
        });
    }
    let steps = slack / grid;
    let mut offsets: Vec<i64> = (0..n).map(|_| rng.random_range(0..=steps) * grid).collect();
    offsets.sort_unstable();
    let mut cursor = lo;
    Ok(offsets
        .iter()
        .zip(lengths)
        .scan(0i64, |prev, (&off, &len)| {
            cursor += off - *prev;
            *prev = off;
            let onset = cursor;
            cursor += len + gap;
            Some(onset)
        })
        .collect())
}

struct Builder {
    rng: ChaCha8Rng,
    duration: f64,
    gap_ms: i64,
    lo_ms: i64,
    hi_ms: i64,
    sources: Vec<SoundSource>,
    events: Vec<SoundEvent>,
    beds: Vec<SoundEvent>,
}

impl Builder {
    fn source(
        &mut self,
        id: impl Into<String>,
        clip: ClipKind,
        category: SoundCategory,
        placement: Placement,
        key: Option<u8>,
    ) -> String {
        let id = id.into();
        self.sources.push(SoundSource {
            id: id.clone(),
            clip: clip.id().into(),
            category,
            placement,
            identification_key: key,
            protected: key.is_some() && category == SoundCategory::RealWorld,
            follows_listener: false,
        });
        id
    }

    fn lane(&mut self, name: &str, count: usize, length: f64) -> Result<Vec<f64>> {
        let lengths = vec![ms(length); count];
        let (gap, lo, hi) = (self.gap_ms, self.lo_ms, self.hi_ms);
        Ok(place_lane(&mut self.rng, name, &lengths, gap, lo, hi, 1)?
            .into_iter()
            .map(secs)
            .collect())
    }

    fn looped_bed(&mut self, source: &str, period: f64) {
        self.beds.push(SoundEvent {
            source: source.into(),
            scheduled_onset: 0.0,
            duration: self.duration,
            repeat_every: Some(period),
        });
    }

    fn crowds(&mut self, count: usize, mut position: impl FnMut(&mut ChaCha8Rng) -> Vec3) {
        for i in 1..=count {
            let p = position(&mut self.rng);
            let id = self.source(
                format!("crowd.{i}"),
                ClipKind::CrowdBed,
                SoundCategory::RealWorld,
                Placement::spatial(cm(p.x), cm(p.y), cm(p.z)),
                None,
            );
            self.looped_bed(&id, ClipKind::CrowdBed.default_duration());
        }
    }

    fn finish(mut self, template: &ScenarioTemplate, seed: u64, listener: ListenerPath) -> Scene {
        self.events.sort_by(|a, b| {
            a.scheduled_onset
                .total_cmp(&b.scheduled_onset)
                .then_with(|| a.source.cmp(&b.source))
        });
        self.beds.sort_by(|a, b| {
            a.scheduled_onset
                .total_cmp(&b.scheduled_onset)
                .then_with(|| a.source.cmp(&b.source))
        });
        Scene {
            schema_version: SCHEMA_VERSION,
            kind: "scene".into(),
            id: format!("{}-seed{seed}", template.id.short_name()),
            scenario: Some(template.id),
            duration: self.duration,
            seed,
            sources: self.sources,
            ambient_beds: self.beds,
            events: self.events,
            listener,
        }
    }
}

fn street(b: &mut Builder) -> Result<ListenerPath> {
    let d = b.duration;
    let cane_pos = Vec3::new(0.15, -0.9, 0.7);
    b.sources.push(SoundSource {
        id: "cane".into(),
        clip: ClipKind::Tap.id().into(),
        category: SoundCategory::RealWorld,
        placement: Placement::Spatial { position: cane_pos },
        identification_key: None,
        protected: false,
        follows_listener: true,
    });
    b.sources.push(SoundSource {
        id: "cane_manhole".into(),
        clip: ClipKind::TapOnManhole.id().into(),
        category: SoundCategory::RealWorld,
        placement: Placement::Spatial { position: cane_pos },
        identification_key: Some(1),
        protected: true,
        follows_listener: true,
    });

    // Manhole contacts sit on the tap grid and span four taps.
    let period_ms = ms(TAP_PERIOD);
    let manhole_len = period_ms * i64::from(MANHOLE_TAPS);
    let manholes = place_lane(
        &mut b.rng,
        "manhole taps",
        &[manhole_len; 5],
        b.gap_ms,
        b.lo_ms,
        b.hi_ms,
        period_ms,
    )?;
    for &m in &manholes {
        b.events.push(SoundEvent {
            source: "cane_manhole".into(),
            scheduled_onset: secs(m),
            duration: secs(manhole_len),
            repeat_every: Some(TAP_PERIOD),
        });
    }
    // Regular taps fill the grid between manhole runs.
    let total_ms = ms(d);
    let mut cursor = 0;
    for stop in manholes.iter().copied().chain([total_ms]) {
        if stop > cursor {
            b.beds.push(SoundEvent {
                source: "cane".into(),
                scheduled_onset: secs(cursor),
                duration: secs(stop - cursor),
                repeat_every: Some(TAP_PERIOD),
            });
        }
        cursor = stop + manhole_len;
    }

    // Construction sites on the listener's right, near where the listener
    // is when the drilling starts.
    let drills = b.lane("drilling", 5, ClipKind::Drill.default_duration())?;
    for (i, onset) in drills.into_iter().enumerate() {
        let x = uniform(&mut b.rng, 2.0, 5.0);
        let z = onset * WALK_SPEED + uniform(&mut b.rng, -2.0, 6.0);
        let id = b.source(
            format!("drill.{}", i + 1),
            ClipKind::Drill,
            SoundCategory::RealWorld,
            Placement::spatial(cm(x), 0.0, cm(z)),
            Some(2),
        );
        b.events.push(SoundEvent::new(id, onset, ClipKind::Drill.default_duration()));
    }

    let nav = b.source(
        "nav",
        ClipKind::SpeechPlaceholder,
        SoundCategory::Virtual,
        Placement::ear(EarChannel::Both),
        Some(3),
    );
    let nav_len = ClipKind::SpeechPlaceholder.default_duration();
    for onset in b.lane("navigation", 5, nav_len)? {
        b.events.push(SoundEvent::new(nav.clone(), onset, nav_len));
    }
    let ring = b.source(
        "ringtone",
        ClipKind::Ringtone,
        SoundCategory::Virtual,
        Placement::ear(EarChannel::Both),
        Some(4),
    );
    let ring_len = ClipKind::Ringtone.default_duration();
    for onset in b.lane("ringtone", 5, ring_len)? {
        b.events.push(SoundEvent::new(ring.clone(), onset, ring_len));
    }

    let walk = d * WALK_SPEED;
    b.crowds(4, |rng| {
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        Vec3::new(side * uniform(rng, 3.0, 8.0), 0.0, uniform(rng, 0.0, walk))
    });

    // Passing cars on the listener's left.
    let car_len = ClipKind::CarPass.default_duration();
    let cars = place_lane(
        &mut b.rng,
        "cars",
        &[ms(car_len); 6],
        2000,
        0,
        ms(d),
        1,
    )?;
    for (i, onset) in cars.into_iter().map(secs).enumerate() {
        let z = onset * WALK_SPEED + uniform(&mut b.rng, -5.0, 5.0);
        let id = b.source(
            format!("car.{}", i + 1),
            ClipKind::CarPass,
            SoundCategory::RealWorld,
            Placement::spatial(-4.0, 0.0, cm(z)),
            None,
        );
        b.beds.push(SoundEvent::new(id, onset, car_len));
    }

    Ok(ListenerPath {
        waypoints: vec![
            Waypoint { time: 0.0, position: Vec3::ZERO, yaw: 0.0 },
            Waypoint { time: d, position: Vec3::new(0.0, 0.0, walk), yaw: 0.0 },
        ],
    })
}

fn help_desk(b: &mut Builder) -> Result<ListenerPath> {
    let speech = ClipKind::SpeechPlaceholder.default_duration();

    // The handbook reads its five sentences as one passage.
    let handbook = b.source(
        "handbook",
        ClipKind::SpeechPlaceholder,
        SoundCategory::Virtual,
        Placement::ear(EarChannel::Both),
        Some(1),
    );
    let passage = 5.0 * speech + 4.0 * HANDBOOK_PAUSE;
    let start = b.lane("handbook passage", 1, passage)?[0];
    for i in 0..5 {
        let onset = secs(ms(start + f64::from(i) * (speech + HANDBOOK_PAUSE)));
        b.events.push(SoundEvent::new(handbook.clone(), onset, speech));
    }

    let notes = b.source(
        "voice_note",
        ClipKind::SpeechPlaceholder,
        SoundCategory::Virtual,
        Placement::ear(EarChannel::Both),
        Some(2),
    );
    for onset in b.lane("voice notes", 5, speech)? {
        b.events.push(SoundEvent::new(notes.clone(), onset, speech));
    }

    let knock_len = ClipKind::Knock.default_duration();
    for (i, onset) in b.lane("knocks", 5, knock_len)?.into_iter().enumerate() {
        let x = uniform(&mut b.rng, -0.6, 0.6);
        let z = uniform(&mut b.rng, 0.6, 1.0);
        let id = b.source(
            format!("knock.{}", i + 1),
            ClipKind::Knock,
            SoundCategory::RealWorld,
            Placement::spatial(cm(x), 0.0, cm(z)),
            Some(3),
        );
        b.events.push(SoundEvent::new(id, onset, knock_len));
    }

    let announcement = b.source(
        "announcement",
        ClipKind::BroadcastPlaceholder,
        SoundCategory::RealWorld,
        Placement::spatial(0.0, 2.5, 8.0),
        Some(4),
    );
    let ann_len = ClipKind::BroadcastPlaceholder.default_duration();
    for onset in b.lane("announcements", 5, ann_len)? {
        b.events.push(SoundEvent::new(announcement.clone(), onset, ann_len));
    }

    b.crowds(3, |rng| {
        let angle = uniform(rng, -PI, PI);
        let r = uniform(rng, 4.0, 9.0);
        Vec3::new(r * angle.sin(), 0.0, r * angle.cos())
    });
    let door = b.source(
        "door",
        ClipKind::SlidingDoor,
        SoundCategory::RealWorld,
        Placement::spatial(-6.0, 0.0, 5.0),
        None,
    );
    let door_len = ClipKind::SlidingDoor.default_duration();
    let doors = place_lane(&mut b.rng, "doors", &[ms(door_len); 4], 3000, 0, ms(b.duration), 1)?;
    for onset in doors {
        b.beds.push(SoundEvent::new(door.clone(), secs(onset), door_len));
    }

    Ok(ListenerPath::stationary(Vec3::ZERO, 0.0))
}

fn speaker_position(rng: &mut ChaCha8Rng, on_stage: bool) -> Placement {
    let p = if on_stage {
        Vec3::new(uniform(rng, -4.0, 4.0), 0.5, uniform(rng, 6.0, 9.0))
    } else {
        let angle = uniform(rng, -PI, PI);
        let r = uniform(rng, 1.2, 1.6);
        Vec3::new(r * angle.sin(), 0.0, r * angle.cos())
    };
    Placement::spatial(cm(p.x), cm(p.y), cm(p.z))
}

fn conference(b: &mut Builder) -> Result<ListenerPath> {
    let turn = ClipKind::SpeechPlaceholder.default_duration();
    let turn_ms = ms(turn);
    // Each real turn is paired with a virtual turn offset by at most
    // (1 - overlap) of a turn, so both overlap by at least that share.
    let max_offset = ((1.0 - SPEAKER_OVERLAP) * turn_ms as f64) as i64;
    let offsets: Vec<i64> = (0..6)
        .map(|_| b.rng.random_range(-max_offset..=max_offset))
        .collect();
    let blocks: Vec<i64> = offsets.iter().map(|o| turn_ms + o.abs()).collect();
    let (gap, lo, hi) = (b.gap_ms, b.lo_ms, b.hi_ms);
    let starts = place_lane(&mut b.rng, "speaker turns", &blocks, gap, lo, hi, 1)?;
    for (i, (&start, &offset)) in starts.iter().zip(&offsets).enumerate() {
        let (rw_at, vr_at) = if offset >= 0 {
            (start, start + offset)
        } else {
            (start - offset, start)
        };
        // Alternate stage panelists and table attendees.
        let on_stage = i % 2 == 0;
        let rw_place = speaker_position(&mut b.rng, on_stage);
        let vr_place = speaker_position(&mut b.rng, on_stage);
        let rw = b.source(
            format!("rw_speaker.{}", i + 1),
            ClipKind::SpeechPlaceholder,
            SoundCategory::RealWorld,
            rw_place,
            Some(1),
        );
        let vr = b.source(
            format!("vr_speaker.{}", i + 1),
            ClipKind::SpeechPlaceholder,
            SoundCategory::Virtual,
            vr_place,
            Some(2),
        );
        b.events.push(SoundEvent::new(rw, secs(rw_at), turn));
        b.events.push(SoundEvent::new(vr, secs(vr_at), turn));
    }

    let dish_len = ClipKind::DishClink.default_duration();
    for (i, onset) in b.lane("dish clinks", 5, dish_len)?.into_iter().enumerate() {
        let angle = uniform(&mut b.rng, -PI, PI);
        let r = uniform(&mut b.rng, 0.6, 1.0);
        let id = b.source(
            format!("dish.{}", i + 1),
            ClipKind::DishClink,
            SoundCategory::RealWorld,
            Placement::spatial(cm(r * angle.sin()), 0.0, cm(r * angle.cos())),
            Some(3),
        );
        b.events.push(SoundEvent::new(id, onset, dish_len));
    }

    let broadcast = b.source(
        "broadcast",
        ClipKind::BroadcastPlaceholder,
        SoundCategory::Virtual,
        Placement::ear(EarChannel::Both),
        Some(4),
    );
    let bc_len = ClipKind::BroadcastPlaceholder.default_duration();
    for onset in b.lane("broadcasts", 5, bc_len)? {
        b.events.push(SoundEvent::new(broadcast.clone(), onset, bc_len));
    }

    b.crowds(4, |rng| {
        let angle = uniform(rng, -PI, PI);
        let r = uniform(rng, 3.0, 8.0);
        Vec3::new(r * angle.sin(), 0.0, r * angle.cos())
    });
    Ok(ListenerPath::stationary(Vec3::ZERO, 0.0))
}

fn attempt(template: &ScenarioTemplate, seed: u64, duration: f64) -> Result<Scene> {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        duration,
        gap_ms: ms(template.same_key_gap),
        lo_ms: ms(template.margin),
        hi_ms: ms(duration - template.margin),
        sources: Vec::new(),
        events: Vec::new(),
        beds: Vec::new(),
    };
    let listener = match template.id {
        ScenarioId::RwFocused => street(&mut b)?,
        ScenarioId::VrFocused => help_desk(&mut b)?,
        ScenarioId::FullyMixed => conference(&mut b)?,
    };
    Ok(b.finish(template, seed, listener))
}

/// Generates a scene for `template`, deterministic in `(template, seed)`.
/// If a lane does not fit, the duration is extended one second at a time
/// up to `max_extension` before giving up.
pub fn generate_scenario(template: &ScenarioTemplate, seed: u64) -> Result<Scene> {
    let mut extension = 0.0;
    loop {
        match attempt(template, seed, template.duration + extension) {
            Ok(scene) => return Ok(scene),
            Err(Error::Infeasible { constraint }) if extension >= template.max_extension => {
                return Err(Error::Infeasible {
                    constraint: format!(
                        "{constraint} (after extending to {} s)",
                        template.duration + extension
                    ),
                });
            }
            Err(Error::Infeasible { .. }) => extension = (extension + 1.0).min(template.max_extension),
            Err(other) => return Err(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_scene;

    fn counts(scene: &Scene) -> BTreeMap<u8, usize> {
        let mut out = BTreeMap::new();
        for ev in &scene.events {
            let k = scene.source(&ev.source).unwrap().identification_key.unwrap();
            *out.entry(k).or_default() += 1;
        }
        out
    }

    #[test]
    fn street_inventory() {
        let t = ScenarioTemplate::for_id(ScenarioId::RwFocused);
        let s = generate_scenario(&t, 1).unwrap();
        assert_eq!(s.events.len(), 20);
        assert_eq!(counts(&s), t.key_counts());
        assert!(validate_scene(&s).is_empty(), "{:?}", validate_scene(&s));
    }

    #[test]
    fn deterministic() {
        for id in ScenarioId::ALL {
            let t = ScenarioTemplate::for_id(id);
            assert_eq!(generate_scenario(&t, 5).unwrap(), generate_scenario(&t, 5).unwrap());
            assert_ne!(generate_scenario(&t, 5).unwrap(), generate_scenario(&t, 6).unwrap());
        }
    }

    #[test]
    fn cane_taps_follow_grid_and_manholes_switch_four_taps() {
        let s = generate_scenario(&ScenarioTemplate::for_id(ScenarioId::RwFocused), 3).unwrap();
        let manholes: Vec<&SoundEvent> = s.events.iter().filter(|e| e.source == "cane_manhole").collect();
        assert_eq!(manholes.len(), 5);
        for m in &manholes {
            assert_eq!(m.duration, TAP_PERIOD * f64::from(MANHOLE_TAPS));
            assert_eq!(m.repeat_every, Some(TAP_PERIOD));
            assert_eq!((m.scheduled_onset / TAP_PERIOD).fract(), 0.0);
        }
        // Regular taps plus manhole taps cover every grid slot exactly once.
        let mut taps: Vec<i64> = Vec::new();
        for ev in s.ambient_beds.iter().filter(|e| e.source == "cane").chain(manholes.iter().copied()) {
            let mut t = ev.scheduled_onset;
            while t < ev.end() - 1e-9 {
                taps.push(ms(t));
                t += TAP_PERIOD;
            }
        }
        taps.sort_unstable();
        let expected: Vec<i64> = (0..ms(s.duration) / 500).map(|k| k * 500).collect();
        assert_eq!(taps, expected);
    }

    #[test]
    fn handbook_sentences_one_second_apart() {
        let s = generate_scenario(&ScenarioTemplate::for_id(ScenarioId::VrFocused), 2).unwrap();
        let hb: Vec<&SoundEvent> = s.events.iter().filter(|e| e.source == "handbook").collect();
        assert_eq!(hb.len(), 5);
        for pair in hb.windows(2) {
            let pause = pair[1].scheduled_onset - pair[0].end();
            assert!((pause - HANDBOOK_PAUSE).abs() < 1e-9, "{pause}");
        }
    }

    #[test]
    fn same_key_events_are_separated() {
        for id in ScenarioId::ALL {
            for seed in 0..20 {
                let s = generate_scenario(&ScenarioTemplate::for_id(id), seed).unwrap();
                let mut by_key: BTreeMap<u8, Vec<&SoundEvent>> = BTreeMap::new();
                for ev in &s.events {
                    let k = s.source(&ev.source).unwrap().identification_key.unwrap();
                    by_key.entry(k).or_default().push(ev);
                }
                for evs in by_key.values() {
                    for pair in evs.windows(2) {
                        assert!(pair[1].scheduled_onset - pair[0].end() >= 1.0 - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn speaker_turns_overlap() {
        let s = generate_scenario(&ScenarioTemplate::for_id(ScenarioId::FullyMixed), 9).unwrap();
        let turns: Vec<&SoundEvent> = s.events.iter().filter(|e| e.source.contains("speaker")).collect();
        assert_eq!(turns.len(), 12);
        for (i, a) in turns.iter().enumerate() {
            let best = turns
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| (a.end().min(b.end()) - a.scheduled_onset.max(b.scheduled_onset)).max(0.0))
                .fold(0.0, f64::max);
            assert!(best >= SPEAKER_OVERLAP * a.duration - 1e-9, "turn {i} overlaps {best}");
        }
    }

    #[test]
    fn cars_on_the_left() {
        let s = generate_scenario(&ScenarioTemplate::for_id(ScenarioId::RwFocused), 4).unwrap();
        let cars: Vec<&SoundSource> = s.sources.iter().filter(|s| s.group() == "car").collect();
        assert!(!cars.is_empty());
        for c in cars {
            let Placement::Spatial { position } = c.placement else { panic!() };
            assert!(position.x < 0.0);
        }
    }

    #[test]
    fn short_template_extends_then_fails() {
        let mut t = ScenarioTemplate::for_id(ScenarioId::RwFocused);
        t.duration = 20.0;
        let s = generate_scenario(&t, 1).unwrap();
        assert!(s.duration > 20.0 && s.duration <= 25.0);
        t.duration = 10.0;
        match generate_scenario(&t, 1).unwrap_err() {
            Error::Infeasible { constraint } => assert!(constraint.contains("15 s"), "{constraint}"),
            e => panic!("{e}"),
        }
    }
}
