//! Success rate and delay time from a timeline and a keypress log.
//!
//! A press `(t, k)` is matched to the earliest unmatched event with key `k`
//! whose onset satisfies `onset <= t <= onset + window`. All windows have
//! the same length, so this greedy assignment is also a maximum matching.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Timeline, SCHEMA_VERSION};

pub const DEFAULT_WINDOW: f64 = 5.0;
/// Earliest a synthetic press may follow its event's onset.
pub const MIN_SYNTHETIC_DELAY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Press {
    pub t: f64,
    pub key: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseLog {
    pub presses: Vec<Press>,
}

#[derive(Serialize)]
struct ResponseDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    presses: &'a [Press],
}

#[derive(Deserialize)]
struct ResponseObject {
    presses: Vec<Press>,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::ResponseFormat {
        line,
        message: message.into(),
    }
}

impl ResponseLog {
    pub fn new(presses: Vec<Press>) -> Result<Self> {
        for (i, w) in presses.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(format_err(i + 2, format!("time {} is before {}", w[1].t, w[0].t)));
            }
        }
        if let Some((i, p)) = presses.iter().enumerate().find(|(_, p)| !p.t.is_finite()) {
            return Err(format_err(i + 1, format!("non-finite time {}", p.t)));
        }
        Ok(Self { presses })
    }

    /// Accepts a JSON document (`{"presses": [...]}` or a bare array),
    /// JSON lines of `{"t":..,"key":..}`, or CSV `t,key` with an optional
    /// header row.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            let presses: Vec<Press> =
                serde_json::from_str(text).map_err(|e| format_err(e.line(), e.to_string()))?;
            return Self::new(presses);
        }
        if trimmed.starts_with('{') {
            if let Ok(obj) = serde_json::from_str::<ResponseObject>(text) {
                return Self::new(obj.presses);
            }
            return Self::parse_json_lines(text);
        }
        Self::parse_csv(text)
    }

    fn parse_json_lines(text: &str) -> Result<Self> {
        let mut presses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let p: Press = serde_json::from_str(line).map_err(|e| format_err(i + 1, e.to_string()))?;
            presses.push(p);
        }
        Self::new(presses)
    }

    fn parse_csv(text: &str) -> Result<Self> {
        let mut presses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(t), Some(key), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(format_err(i + 1, "expected two columns `t,key`"));
            };
            if presses.is_empty() && t.eq_ignore_ascii_case("t") && key.eq_ignore_ascii_case("key") {
                continue;
            }
            let t: f64 = t.parse().map_err(|_| format_err(i + 1, format!("bad time `{t}`")))?;
            let key: i64 = key.parse().map_err(|_| format_err(i + 1, format!("bad key `{key}`")))?;
            presses.push(Press { t, key });
        }
        Self::new(presses)
    }

    pub fn to_json(&self) -> String {
        let doc = ResponseDoc {
            schema_version: SCHEMA_VERSION,
            kind: "responses",
            presses: &self.presses,
        };
        crate::format::to_canonical_json(&doc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,key\n");
        for p in &self.presses {
            out.push_str(&format!("{},{}\n", p.t, p.key));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub event_id: usize,
    pub key: u8,
    pub press_time: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyStats {
    pub events: usize,
    pub matched: usize,
    pub success_rate: f64,
    pub mean_delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub kind: String,
    pub window: f64,
    pub success_rate: f64,
    /// Mean onset-to-press time over matched events; null with no matches.
    pub mean_delay: Option<f64>,
    pub total_events: usize,
    pub matched_events: usize,
    pub unmatched_presses: usize,
    /// Presses with a key outside 1..=4.
    pub rejected_presses: usize,
    pub per_key: BTreeMap<String, KeyStats>,
    pub matches: Vec<MatchedPair>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn rate(matched: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

/// Scores `log` against the non-dropped identifiable events of `timeline`.
pub fn score(timeline: &Timeline, log: &ResponseLog, window: f64) -> MetricsReport {
    // Per key: (onset, event_id) sorted by onset, plus a matched flag.
    let mut by_key: BTreeMap<u8, Vec<(f64, usize, bool)>> = BTreeMap::new();
    for e in timeline.scorable() {
        let key = e.identification_key.expect("scorable entries have a key");
        by_key.entry(key).or_default().push((e.actual_onset, e.event_id, false));
    }
    for events in by_key.values_mut() {
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let total_events: usize = by_key.values().map(Vec::len).sum();

    let mut matches = Vec::new();
    let mut unmatched = 0;
    let mut rejected = 0;
    for p in &log.presses {
        let Ok(key) = u8::try_from(p.key) else {
            rejected += 1;
            continue;
        };
        if !(1..=4).contains(&key) {
            rejected += 1;
            continue;
        }
        let hit = by_key.get_mut(&key).and_then(|events| {
            events
                .iter_mut()
                .find(|(onset, _, used)| !*used && *onset <= p.t && p.t <= *onset + window)
        });
        match hit {
            Some(ev) => {
                ev.2 = true;
                matches.push(MatchedPair {
                    event_id: ev.1,
                    key,
                    press_time: p.t,
                    delay: p.t - ev.0,
                });
            }
            None => unmatched += 1,
        }
    }

    let per_key = by_key
        .iter()
        .map(|(&key, events)| {
            let hits: Vec<&MatchedPair> = matches.iter().filter(|m| m.key == key).collect();
            let stats = KeyStats {
                events: events.len(),
                matched: hits.len(),
                success_rate: rate(hits.len(), events.len()),
                mean_delay: mean(hits.iter().map(|m| m.delay)),
            };
            (key.to_string(), stats)
        })
        .collect();

    MetricsReport {
        schema_version: SCHEMA_VERSION,
        kind: "metrics".into(),
        window,
        success_rate: rate(matches.len(), total_events),
        mean_delay: mean(matches.iter().map(|m| m.delay)),
        total_events,
        matched_events: matches.len(),
        unmatched_presses: unmatched,
        rejected_presses: rejected,
        per_key,
        matches,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponderProfile {
    pub delay_mean: f64,
    pub delay_jitter: f64,
    pub miss_prob: f64,
    pub seed: u64,
}

impl ResponderProfile {
    pub fn perfect(delay: f64) -> Self {
        Self {
            delay_mean: delay,
            delay_jitter: 0.0,
            miss_prob: 0.0,
            seed: 0,
        }
    }
}

/// Simulated participant: one press per non-missed scorable event at
/// `onset + max(MIN_SYNTHETIC_DELAY, delay)`, with the delay drawn from a
/// normal distribution.
pub fn synthetic_responder(timeline: &Timeline, profile: &ResponderProfile) -> ResponseLog {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let normal = Normal::new(profile.delay_mean, profile.delay_jitter.max(0.0))
        .expect("finite delay parameters");
    let mut events: Vec<_> = timeline.scorable().collect();
    events.sort_by(|a, b| a.actual_onset.total_cmp(&b.actual_onset).then(a.event_id.cmp(&b.event_id)));
    let mut presses = Vec::new();
    for e in events {
        let missed = rng.random::<f64>() < profile.miss_prob;
        let delay = normal.sample(&mut rng);
        if missed {
            continue;
        }
        presses.push(Press {
            t: e.actual_onset + delay.max(MIN_SYNTHETIC_DELAY),
            key: i64::from(e.identification_key.unwrap_or_default()),
        });
    }
    presses.sort_by(|a, b| a.t.total_cmp(&b.t));
    ResponseLog { presses }
}
