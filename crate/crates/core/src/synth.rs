//! Procedural stand-ins for every stimulus the scenarios need.
//!
//! Spectral signatures (approximate energy centers):
//!
//! | kind | signature |
//! |------|-----------|
//! | tap | 1.5 kHz high-passed click plus a 2.4 kHz ping |
//! | tap_on_manhole | tap pitched down an octave plus a 420 Hz hollow ring |
//! | drill | 110 Hz sawtooth buzz, 28 Hz chatter, 3 kHz grit |
//! | ringtone | 1000/1250 Hz trill in 0.4 s bursts |
//! | speech_placeholder | 300-3000 Hz noise at a 4 Hz syllable rate |
//! | knock | three 180/320 Hz thumps |
//! | dish_clink | inharmonic 2.8-7.9 kHz partials |
//! | crowd_bed | overlapping babble low-passed at 2 kHz |
//! | car_pass | sub-500 Hz rumble with a swell |
//! | sliding_door | 600-1500 Hz swoosh over an 80 Hz roll |
//! | earcon_a | rising 880 -> 1320 Hz chime |
//! | earcon_b | falling 1320 -> 880 Hz chime |
//! | broadcast_placeholder | 660/990 Hz ding then 500-2500 Hz speech noise |

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{
    apply_chain, apply_filter, design_highpass, design_lowpass, resample_ratio,
    seconds_to_samples, Filter, BUTTERWORTH_Q,
};
use crate::model::{AudioClip, SAMPLE_RATE};

/// Peak level every synthesized clip is normalized to.
pub const PEAK: f64 = 0.9;

const FS: f64 = SAMPLE_RATE as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipKind {
    Tap,
    TapOnManhole,
    Drill,
    Ringtone,
    SpeechPlaceholder,
    Knock,
    DishClink,
    CrowdBed,
    CarPass,
    SlidingDoor,
    EarconA,
    EarconB,
    BroadcastPlaceholder,
}

impl ClipKind {
    pub const ALL: [ClipKind; 13] = [
        ClipKind::Tap,
        ClipKind::TapOnManhole,
        ClipKind::Drill,
        ClipKind::Ringtone,
        ClipKind::SpeechPlaceholder,
        ClipKind::Knock,
        ClipKind::DishClink,
        ClipKind::CrowdBed,
        ClipKind::CarPass,
        ClipKind::SlidingDoor,
        ClipKind::EarconA,
        ClipKind::EarconB,
        ClipKind::BroadcastPlaceholder,
    ];

    /// Clip id used in scene files.
    pub fn id(self) -> &'static str {
        match self {
            ClipKind::Tap => "tap",
            ClipKind::TapOnManhole => "tap_on_manhole",
            ClipKind::Drill => "drill",
            ClipKind::Ringtone => "ringtone",
            ClipKind::SpeechPlaceholder => "speech_placeholder",
            ClipKind::Knock => "knock",
            ClipKind::DishClink => "dish_clink",
            ClipKind::CrowdBed => "crowd_bed",
            ClipKind::CarPass => "car_pass",
            ClipKind::SlidingDoor => "sliding_door",
            ClipKind::EarconA => "earcon_a",
            ClipKind::EarconB => "earcon_b",
            ClipKind::BroadcastPlaceholder => "broadcast_placeholder",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    /// Default clip length in seconds.
    pub fn default_duration(self) -> f64 {
        match self {
            ClipKind::Tap | ClipKind::TapOnManhole => 0.1,
            ClipKind::EarconA | ClipKind::EarconB => 0.4,
            ClipKind::SpeechPlaceholder => 3.0,
            ClipKind::Knock => 0.6,
            ClipKind::DishClink => 0.8,
            ClipKind::SlidingDoor => 1.0,
            ClipKind::Ringtone => 1.5,
            ClipKind::Drill
            | ClipKind::CrowdBed
            | ClipKind::CarPass
            | ClipKind::BroadcastPlaceholder => 2.0,
        }
    }

    fn salt(self) -> u64 {
        Self::ALL.iter().position(|k| *k == self).unwrap() as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub kind: ClipKind,
    pub duration: f64,
    pub seed: u64,
}

impl ClipSpec {
    pub fn new(kind: ClipKind, duration: f64, seed: u64) -> Self {
        Self { kind, duration, seed }
    }
}

fn rng_for(kind: ClipKind, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ kind.salt().wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn t(i: usize) -> f64 {
    i as f64 / FS
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn hp(x: &[f64], hz: f64) -> Vec<f64> {
    apply_filter(x, &Filter::Biquad(design_highpass(hz, BUTTERWORTH_Q).expect("valid cutoff")))
}

fn lp(x: &[f64], hz: f64) -> Vec<f64> {
    apply_filter(x, &Filter::Biquad(design_lowpass(hz, BUTTERWORTH_Q).expect("valid cutoff")))
}

fn band(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let chain = [
        Filter::Biquad(design_highpass(lo, BUTTERWORTH_Q).expect("valid cutoff")),
        Filter::Biquad(design_lowpass(hi, BUTTERWORTH_Q).expect("valid cutoff")),
    ];
    apply_chain(x, &chain)
}

/// Decaying sine starting at sample `start`.
fn ping(out: &mut [f64], start: usize, freq: f64, decay: f64, amp: f64) {
    for (j, s) in out.iter_mut().skip(start).enumerate() {
        let tt = t(j);
        *s += amp * (-tt / decay).exp() * (2.0 * PI * freq * tt).sin();
    }
}

/// Linear fades at both ends, `ms` milliseconds long.
fn fade_edges(x: &mut [f64], ms: f64) {
    let n = ((ms / 1000.0) * FS) as usize;
    let n = n.min(x.len() / 2);
    let len = x.len();
    for i in 0..n {
        let g = i as f64 / n as f64;
        x[i] *= g;
        x[len - 1 - i] *= g;
    }
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let k = PEAK / peak;
        x.iter_mut().for_each(|s| *s = (*s * k).clamp(-PEAK, PEAK));
    }
    x
}

fn tap(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let click = hp(&noise(rng, n), 1500.0);
    let mut out: Vec<f64> = click
        .iter()
        .enumerate()
        .map(|(i, s)| s * (-t(i) / 0.004).exp())
        .collect();
    ping(&mut out, 0, 2400.0, 0.015, 0.6);
    out
}

fn tap_on_manhole(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = tap(n.div_ceil(2).max(2), rng);
    let mut out = resample_ratio(&base, 0.5).expect("ratio in range");
    out.resize(n, 0.0);
    ping(&mut out, 0, 420.0, 0.06, 0.8);
    out
}

fn drill(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0 = 110.0;
    let grit = hp(&noise(rng, n), 3000.0);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let tt = t(i);
            let saw: f64 = (1..=30)
                .map(|k| (2.0 * PI * f0 * k as f64 * tt).sin() / k as f64)
                .sum();
            let chatter = 0.6 + 0.4 * (2.0 * PI * 28.0 * tt).sin();
            chatter * (saw + 0.3 * grit[i])
        })
        .collect();
    fade_edges(&mut out, 10.0);
    out
}

fn ringtone(n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let tt = t(i);
            let in_burst = (tt % 0.6) < 0.4;
            if !in_burst {
                return 0.0;
            }
            let freq = if ((tt / 0.05) as u64).is_multiple_of(2) { 1000.0 } else { 1250.0 };
            (2.0 * PI * freq * tt).sin()
        })
        .collect();
    fade_edges(&mut out, 5.0);
    out
}

/// Band-limited noise with a raised-cosine syllable envelope.
fn babble(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64, rate: f64) -> Vec<f64> {
    let carrier = band(&noise(rng, n), lo, hi);
    let syllables = (n as f64 / FS * rate).ceil() as usize + 1;
    let amps: Vec<f64> = (0..syllables).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
    let phase = rng.random::<f64>();
    carrier
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cycles = t(i) * rate + phase;
            let env = 0.5 - 0.5 * (2.0 * PI * cycles).cos();
            s * env * amps[(cycles as usize).min(syllables - 1)]
        })
        .collect()
}

fn speech(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = babble(n, rng, 300.0, 3000.0, 4.0);
    fade_edges(&mut out, 10.0);
    out
}

fn knock(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for k in 0..3 {
        let start = seconds_to_samples(0.18 * k as f64);
        if start >= n {
            break;
        }
        ping(&mut out, start, 180.0, 0.025, 1.0);
        ping(&mut out, start, 320.0, 0.018, 0.5);
        let clicks = noise(rng, seconds_to_samples(0.003));
        for (j, c) in clicks.iter().enumerate() {
            if let Some(s) = out.get_mut(start + j) {
                *s += 0.3 * c;
            }
        }
    }
    out
}

fn dish_clink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for start_s in [0.0, 0.25] {
        let start = seconds_to_samples(start_s);
        if start >= n {
            break;
        }
        for (freq, amp) in [(2800.0, 1.0), (4300.0, 0.7), (6100.0, 0.5), (7900.0, 0.35)] {
            let detune = 1.0 + 0.01 * (rng.random::<f64>() - 0.5);
            ping(&mut out, start, freq * detune, 0.12, amp);
        }
    }
    out
}

fn crowd(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for _ in 0..6 {
        let rate = 3.0 + 2.0 * rng.random::<f64>();
        let voice = babble(n, rng, 250.0, 2500.0, rate);
        out.iter_mut().zip(&voice).for_each(|(o, v)| *o += v);
    }
    let mut out = lp(&out, 2000.0);
    fade_edges(&mut out, 5.0);
    out
}

fn car_pass(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rumble = lp(&lp(&noise(rng, n), 500.0), 500.0);
    let mid = n as f64 / 2.0;
    let width = n as f64 / 5.0;
    rumble
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let z = (i as f64 - mid) / width;
            s * (-0.5 * z * z).exp()
        })
        .collect()
}

fn sliding_door(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let swoosh = band(&noise(rng, n), 600.0, 1500.0);
    let len = n as f64;
    let mut out: Vec<f64> = swoosh
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x = i as f64 / len;
            let env = (x / 0.2).min(1.0).min((1.0 - x) / 0.3).max(0.0);
            env * (s + 0.2 * (2.0 * PI * 80.0 * t(i)).sin())
        })
        .collect();
    fade_edges(&mut out, 5.0);
    out
}

fn chime(n: usize, first: f64, second: f64) -> Vec<f64> {
    let half = n / 2;
    let mut out = vec![0.0; n];
    for (seg, freq) in [(0..half, first), (half..n, second)] {
        let seg_len = seg.len() as f64;
        let start = seg.start;
        for i in seg {
            let local = (i - start) as f64;
            let attack = (local / (0.005 * FS)).min(1.0);
            let release = (-local / (0.35 * seg_len)).exp();
            out[i] = attack * release * (2.0 * PI * freq * t(i)).sin();
        }
    }
    fade_edges(&mut out, 2.0);
    out
}

fn broadcast(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let ding_len = seconds_to_samples(0.3).min(n);
    let mut out = vec![0.0; n];
    ping(&mut out[..ding_len], 0, 660.0, 0.08, 0.8);
    ping(&mut out[..ding_len], 0, 990.0, 0.08, 0.6);
    if n > ding_len {
        let voice = babble(n - ding_len, rng, 500.0, 2500.0, 5.0);
        out[ding_len..].iter_mut().zip(&voice).for_each(|(o, v)| *o += v);
    }
    fade_edges(&mut out, 5.0);
    out
}

/// Synthesizes one clip. Pure in `spec`.
pub fn synthesize(spec: &ClipSpec) -> AudioClip {
    let n = seconds_to_samples(spec.duration).max(1);
    let rng = &mut rng_for(spec.kind, spec.seed);
    let samples = match spec.kind {
        ClipKind::Tap => tap(n, rng),
        ClipKind::TapOnManhole => tap_on_manhole(n, rng),
        ClipKind::Drill => drill(n, rng),
        ClipKind::Ringtone => ringtone(n),
        ClipKind::SpeechPlaceholder => speech(n, rng),
        ClipKind::Knock => knock(n, rng),
        ClipKind::DishClink => dish_clink(n, rng),
        ClipKind::CrowdBed => crowd(n, rng),
        ClipKind::CarPass => car_pass(n, rng),
        ClipKind::SlidingDoor => sliding_door(n, rng),
        ClipKind::EarconA => chime(n, 880.0, 1320.0),
        ClipKind::EarconB => chime(n, 1320.0, 880.0),
        ClipKind::BroadcastPlaceholder => broadcast(n, rng),
    };
    AudioClip::mono(spec.kind.id(), normalize(samples))
}

/// One clip per kind at its default duration.
pub fn default_clip_bank(seed: u64) -> BTreeMap<ClipKind, AudioClip> {
    ClipKind::ALL
        .into_iter()
        .map(|k| (k, synthesize(&ClipSpec::new(k, k.default_duration(), seed))))
        .collect()
}

/// Clips addressable by id, as referenced from scene sources and plans.
#[derive(Debug, Clone, Default)]
pub struct ClipBank {
    clips: BTreeMap<String, AudioClip>,
}

impl ClipBank {
    pub fn synthesized(seed: u64) -> Self {
        let mut bank = Self::default();
        for clip in default_clip_bank(seed).into_values() {
            bank.insert(clip);
        }
        bank
    }

    /// Adds or replaces a clip under its own id.
    pub fn insert(&mut self, clip: AudioClip) {
        self.clips.insert(clip.id.clone(), clip);
    }

    pub fn get(&self, id: &str) -> Option<&AudioClip> {
        self.clips.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.clips.keys().map(String::as_str)
    }

    pub fn clips(&self) -> impl Iterator<Item = &AudioClip> {
        self.clips.values()
    }
}
