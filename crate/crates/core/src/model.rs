//! Domain types shared by every stage of the pipeline: clips, sources,
//! scenes, manipulation plans and timelines.
//!
//! Coordinates are meters in a right-handed world frame: +z is listener
//! forward at yaw 0, +x is listener right, +y is up. Yaw rotates about the
//! vertical axis; positive yaw turns the listener towards +x.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Engine-wide sample rate in Hz.
pub const SAMPLE_RATE: u32 = 48_000;

/// Version written into every scene, plan and timeline document.
pub const SCHEMA_VERSION: u32 = 1;

/// Seconds a time-shifted event may run past the scene end before it is
/// flagged as dropped.
pub const OVERRUN_ALLOWANCE: f64 = 5.0;

/// A decoded audio asset. Samples are interleaved when `channels == 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub channels: u16,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn mono(id: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            channels: 1,
            samples,
        }
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / usize::from(self.channels.max(1))
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / f64::from(SAMPLE_RATE)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Mono mixdown: channel average for stereo clips.
    pub fn to_mono(&self) -> Vec<f64> {
        match self.channels {
            2 => self
                .samples
                .chunks_exact(2)
                .map(|f| 0.5 * (f[0] + f[1]))
                .collect(),
            _ => self.samples.clone(),
        }
    }

    /// Checks the clip invariants: one or two channels, finite samples
    /// within [-1, 1].
    pub fn check(&self) -> Result<(), String> {
        if self.channels != 1 && self.channels != 2 {
            return Err(format!("clip {}: {} channels", self.id, self.channels));
        }
        if !self.samples.len().is_multiple_of(usize::from(self.channels)) {
            return Err(format!("clip {}: ragged interleaving", self.id));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(format!("clip {}: sample {i} out of range", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundCategory {
    RealWorld,
    Virtual,
}

impl SoundCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            SoundCategory::RealWorld => "real_world",
            SoundCategory::Virtual => "virtual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, o: Vec3, k: f64) -> Vec3 {
        self + (o - self).scale(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarChannel {
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Placement {
    Spatial { position: Vec3 },
    EarChannel { channel: EarChannel },
}

impl Placement {
    pub fn spatial(x: f64, y: f64, z: f64) -> Self {
        Placement::Spatial {
            position: Vec3::new(x, y, z),
        }
    }

    pub fn ear(channel: EarChannel) -> Self {
        Placement::EarChannel { channel }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Placement::Spatial { .. })
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundSource {
    pub id: String,
    pub clip: String,
    pub category: SoundCategory,
    pub placement: Placement,
    /// Response key 1..=4; absent for ambient beds.
    #[serde(default)]
    pub identification_key: Option<u8>,
    /// RealWorld sources flagged here are matched by the `@protected`
    /// selector in Time Shift plans.
    #[serde(default)]
    pub protected: bool,
    /// Spatial position is expressed in the listener's local frame
    /// (carried sounds such as a cane tip) rather than the world frame.
    #[serde(default, skip_serializing_if = "is_false")]
    pub follows_listener: bool,
}

impl SoundSource {
    /// Group name: the id up to the first `.`, so `drill.3` is in `drill`.
    pub fn group(&self) -> &str {
        self.id.split('.').next().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundEvent {
    pub source: String,
    pub scheduled_onset: f64,
    pub duration: f64,
    /// Retrigger the clip every `repeat_every` seconds while inside the
    /// event's duration. Absent means the clip plays once.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_every: Option<f64>,
}

impl SoundEvent {
    pub fn new(source: impl Into<String>, scheduled_onset: f64, duration: f64) -> Self {
        Self {
            source: source.into(),
            scheduled_onset,
            duration,
            repeat_every: None,
        }
    }

    pub fn end(&self) -> f64 {
        self.scheduled_onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub position: Vec3,
    pub yaw: f64,
}

/// Listener position and heading; linear interpolation between
/// waypoints, held constant outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListenerPath {
    pub waypoints: Vec<Waypoint>,
}

impl ListenerPath {
    pub fn stationary(position: Vec3, yaw: f64) -> Self {
        Self {
            waypoints: vec![Waypoint {
                time: 0.0,
                position,
                yaw,
            }],
        }
    }

    /// Interpolated `(position, yaw)` at time `t`.
    pub fn at(&self, t: f64) -> (Vec3, f64) {
        let wps = &self.waypoints;
        let Some(first) = wps.first() else {
            return (Vec3::ZERO, 0.0);
        };
        if t <= first.time {
            return (first.position, first.yaw);
        }
        for pair in wps.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.time {
                let k = (t - a.time) / (b.time - a.time);
                return (a.position.lerp(b.position, k), a.yaw + (b.yaw - a.yaw) * k);
            }
        }
        let last = wps[wps.len() - 1];
        (last.position, last.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    RwFocused,
    VrFocused,
    FullyMixed,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [
        ScenarioId::RwFocused,
        ScenarioId::VrFocused,
        ScenarioId::FullyMixed,
    ];

    /// Short CLI name.
    pub fn short_name(self) -> &'static str {
        match self {
            ScenarioId::RwFocused => "rw",
            ScenarioId::VrFocused => "vr",
            ScenarioId::FullyMixed => "mixed",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.short_name() == s)
    }
}

fn scene_kind() -> String {
    "scene".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub schema_version: u32,
    #[serde(default = "scene_kind")]
    pub kind: String,
    pub id: String,
    /// Template the scene was generated from, if any.
    #[serde(default)]
    pub scenario: Option<ScenarioId>,
    pub duration: f64,
    pub seed: u64,
    pub sources: Vec<SoundSource>,
    pub ambient_beds: Vec<SoundEvent>,
    pub events: Vec<SoundEvent>,
    pub listener: ListenerPath,
}

impl Scene {
    pub fn source(&self, id: &str) -> Option<&SoundSource> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn source_map(&self) -> BTreeMap<&str, &SoundSource> {
        self.sources.iter().map(|s| (s.id.as_str(), s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauStep {
    pub time: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransparencyParams {
    /// Transparency level: 1 passes real-world sound unchanged, 0 is full
    /// noise cancellation.
    pub tau: f64,
    /// Headphone blocking level.
    #[serde(default = "TransparencyParams::default_eta")]
    pub eta: f64,
    #[serde(default = "TransparencyParams::default_s_default")]
    pub s_default: f64,
    /// Baseline high-pass cutoff in Hz.
    #[serde(default = "TransparencyParams::default_z")]
    pub z: f64,
    /// Step-interpolated overrides of `tau`, sorted by time.
    #[serde(default)]
    pub tau_automation: Vec<TauStep>,
}

impl TransparencyParams {
    pub const DEFAULT_ETA: f64 = 0.75;
    pub const DEFAULT_S_DEFAULT: f64 = 0.5;
    pub const DEFAULT_Z: f64 = 2000.0;

    fn default_eta() -> f64 {
        Self::DEFAULT_ETA
    }
    fn default_s_default() -> f64 {
        Self::DEFAULT_S_DEFAULT
    }
    fn default_z() -> f64 {
        Self::DEFAULT_Z
    }

    pub fn with_tau(tau: f64) -> Self {
        Self {
            tau,
            eta: Self::DEFAULT_ETA,
            s_default: Self::DEFAULT_S_DEFAULT,
            z: Self::DEFAULT_Z,
            tau_automation: Vec::new(),
        }
    }

    /// Transparency level in effect at `t`: the last automation step at
    /// or before `t`, else the static `tau`.
    pub fn tau_at(&self, t: f64) -> f64 {
        self.tau_automation
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(self.tau, |s| s.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StyleFilter {
    LowPass { cutoff: f64 },
    HighPass { cutoff: f64 },
    Telephone { low: f64, high: f64 },
    PitchScale { ratio: f64 },
}

impl StyleFilter {
    pub fn tag(&self) -> &'static str {
        match self {
            StyleFilter::LowPass { .. } => "style:lowpass",
            StyleFilter::HighPass { .. } => "style:highpass",
            StyleFilter::Telephone { .. } => "style:telephone",
            StyleFilter::PitchScale { .. } => "style:pitch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EarconTrigger {
    /// Fires `lead_time` before every matching event.
    OnEvent { selector: String },
    /// Fires whenever the listener enters `radius` of a matching source.
    OnProximity { selector: String, radius: f64 },
}

impl EarconTrigger {
    pub fn selector(&self) -> &str {
        match self {
            EarconTrigger::OnEvent { selector } | EarconTrigger::OnProximity { selector, .. } => {
                selector
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarconAttachment {
    pub earcon_clip: String,
    pub trigger: EarconTrigger,
    #[serde(default = "EarconAttachment::default_lead_time")]
    pub lead_time: f64,
}

impl EarconAttachment {
    pub const DEFAULT_LEAD_TIME: f64 = 0.4;

    fn default_lead_time() -> f64 {
        Self::DEFAULT_LEAD_TIME
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeShiftConfig {
    pub enabled: bool,
    #[serde(default)]
    pub guard_gap: f64,
    /// Selectors naming the RealWorld sources whose events block
    /// Virtual events.
    #[serde(default)]
    pub protected_categories: BTreeSet<String>,
}

impl Default for TimeShiftConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            guard_gap: 0.0,
            protected_categories: BTreeSet::new(),
        }
    }
}

fn plan_kind() -> String {
    "plan".into()
}

fn default_rank_step() -> f64 {
    ManipulationPlan::DEFAULT_RANK_STEP_DB
}

/// Declarative configuration of all six manipulators for one condition.
///
/// Map keys and trigger targets are selectors, resolved by
/// [`Selector`]: an exact source id, a group name (`drill` matches
/// `drill.1`), `@real_world` / `@virtual`, or `@protected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulationPlan {
    pub schema_version: u32,
    #[serde(default = "plan_kind")]
    pub kind: String,
    pub name: String,
    pub transparency: TransparencyParams,
    #[serde(default)]
    pub envelope_ranks: BTreeMap<String, u32>,
    #[serde(default = "default_rank_step")]
    pub envelope_rank_step_db: f64,
    #[serde(default)]
    pub position_overrides: BTreeMap<String, Placement>,
    #[serde(default)]
    pub style_filters: BTreeMap<String, StyleFilter>,
    #[serde(default)]
    pub time_shift: TimeShiftConfig,
    #[serde(default)]
    pub earcons: Vec<EarconAttachment>,
}

impl ManipulationPlan {
    pub const DEFAULT_RANK_STEP_DB: f64 = 3.0;

    /// A plan applying only the given transparency level.
    pub fn transparency_only(name: impl Into<String>, tau: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: plan_kind(),
            name: name.into(),
            transparency: TransparencyParams::with_tau(tau),
            envelope_ranks: BTreeMap::new(),
            envelope_rank_step_db: Self::DEFAULT_RANK_STEP_DB,
            position_overrides: BTreeMap::new(),
            style_filters: BTreeMap::new(),
            time_shift: TimeShiftConfig::default(),
            earcons: Vec::new(),
        }
    }
}

/// How a plan key addresses sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector<'a> {
    Category(SoundCategory),
    Protected,
    /// Exact id or group name.
    Name(&'a str),
}

impl<'a> Selector<'a> {
    pub fn parse(s: &'a str) -> Self {
        match s {
            "@real_world" => Selector::Category(SoundCategory::RealWorld),
            "@virtual" => Selector::Category(SoundCategory::Virtual),
            "@protected" => Selector::Protected,
            name => Selector::Name(name),
        }
    }

    /// Match strength: exact id 3, group 2, flag/category 1, none 0.
    pub fn specificity(&self, source: &SoundSource) -> u8 {
        match self {
            Selector::Name(n) if *n == source.id => 3,
            Selector::Name(n) if *n == source.group() => 2,
            Selector::Name(_) => 0,
            Selector::Protected => u8::from(source.protected),
            Selector::Category(c) => u8::from(*c == source.category),
        }
    }

    pub fn matches(&self, source: &SoundSource) -> bool {
        self.specificity(source) > 0
    }
}

/// Looks up the most specific entry of a selector-keyed map for `source`.
/// Ties at equal specificity go to the lexicographically first key.
pub fn resolve<'m, V>(map: &'m BTreeMap<String, V>, source: &SoundSource) -> Option<&'m V> {
    let mut best: Option<(u8, &V)> = None;
    for (key, value) in map {
        let s = Selector::parse(key).specificity(source);
        if s > 0 && best.is_none_or(|(b, _)| s > b) {
            best = Some((s, value));
        }
    }
    best.map(|(_, v)| v)
}

/// Conditions a timeline or render can be produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Full transparency.
    Ft,
    /// Noise cancellation.
    Nc,
    /// All scenario-matched manipulations.
    Ss,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Ft, Condition::Nc, Condition::Ss];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ft => "ft",
            Condition::Nc => "nc",
            Condition::Ss => "ss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineEntry {
    /// Index of the event in the scene's `events` list.
    pub event_id: usize,
    pub source: String,
    pub identification_key: Option<u8>,
    pub category: SoundCategory,
    pub scheduled_onset: f64,
    pub actual_onset: f64,
    pub duration: f64,
    /// Linear playback gain before distance attenuation and panning.
    #[serde(default)]
    pub gain: f64,
    #[serde(default)]
    pub applied_manipulations: Vec<String>,
    #[serde(default)]
    pub dropped: bool,
}

fn timeline_kind() -> String {
    "timeline".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeline {
    pub schema_version: u32,
    #[serde(default = "timeline_kind")]
    pub kind: String,
    #[serde(default)]
    pub scene_id: String,
    #[serde(default)]
    pub scenario: Option<ScenarioId>,
    #[serde(default)]
    pub condition: Option<String>,
    pub duration: f64,
    pub entries: Vec<TimelineEntry>,
}

impl Timeline {
    pub fn new(scene_id: impl Into<String>, duration: f64, entries: Vec<TimelineEntry>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: timeline_kind(),
            scene_id: scene_id.into(),
            scenario: None,
            condition: None,
            duration,
            entries,
        }
    }

    /// Entries that count towards scoring.
    pub fn scorable(&self) -> impl Iterator<Item = &TimelineEntry> {
        self.entries
            .iter()
            .filter(|e| !e.dropped && e.identification_key.is_some())
    }
}
