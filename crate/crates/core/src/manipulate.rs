//! The six manipulators and their composition into render directives.
//!
//! Directives are compiled in a fixed order: Time Shift onsets,
//! transparency gain and cutoff on real-world sources, envelope rank gain,
//! style chain, position override, earcon attachment. Gains multiply and
//! filters concatenate.

use crate::dsp::{telephone, design_highpass, design_lowpass, Filter, BUTTERWORTH_Q};
use crate::error::{Error, Result};
use crate::model::{
    resolve, EarChannel, EarconTrigger, ManipulationPlan, Placement, Scene, Selector,
    SoundCategory, SoundSource, StyleFilter, Timeline, TransparencyParams, Vec3,
};
use crate::timeshift::plan_timeline;
use crate::validate::{validate_plan, validate_plan_for_scene, validate_scene};

pub const TAG_TRANSPARENCY: &str = "transparency";
pub const TAG_POSITION: &str = "position";
pub const TAG_EARCON: &str = "earcon";

/// Real-world volume under transparency `tau(t)`:
/// `S_default - (1 - tau) * S_default * eta`.
pub fn transparency_volume(params: &TransparencyParams, t: f64) -> f64 {
    let tau = params.tau_at(t);
    params.s_default - ((1.0 - tau) * params.s_default * params.eta)
}

/// High-pass cutoff for real-world sources, `(1 - tau(t)) * Z` Hz; zero
/// means no filter.
pub fn transparency_cutoff(params: &TransparencyParams, t: f64) -> f64 {
    (1.0 - params.tau_at(t)) * params.z
}

pub fn envelope_rank(plan: &ManipulationPlan, source: &SoundSource) -> Option<u32> {
    resolve(&plan.envelope_ranks, source).copied()
}

/// `10^(-(rank - 1) * step_db / 20)`; unranked sources get 1.
pub fn envelope_gain(plan: &ManipulationPlan, source: &SoundSource) -> f64 {
    envelope_rank(plan, source).map_or(1.0, |rank| {
        let db = -(f64::from(rank) - 1.0) * plan.envelope_rank_step_db;
        10f64.powf(db / 20.0)
    })
}

pub fn position_override(plan: &ManipulationPlan, source: &SoundSource) -> Placement {
    resolve(&plan.position_overrides, source)
        .copied()
        .unwrap_or(source.placement)
}

/// Filters plus an optional pitch ratio for one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StyleChain {
    pub filters: Vec<Filter>,
    pub pitch_ratio: Option<f64>,
}

impl StyleChain {
    pub fn is_empty(&self) -> bool {
        self.filters.is_empty() && self.pitch_ratio.is_none()
    }
}

pub fn style_chain(plan: &ManipulationPlan, source: &SoundSource) -> Result<StyleChain> {
    let Some(style) = resolve(&plan.style_filters, source) else {
        return Ok(StyleChain::default());
    };
    let chain = match *style {
        StyleFilter::LowPass { cutoff } => StyleChain {
            filters: vec![Filter::Biquad(design_lowpass(cutoff, BUTTERWORTH_Q)?)],
            pitch_ratio: None,
        },
        StyleFilter::HighPass { cutoff } => StyleChain {
            filters: vec![Filter::Biquad(design_highpass(cutoff, BUTTERWORTH_Q)?)],
            pitch_ratio: None,
        },
        StyleFilter::Telephone { low, high } => StyleChain {
            filters: telephone(low, high)?.to_vec(),
            pitch_ratio: None,
        },
        StyleFilter::PitchScale { ratio } => StyleChain {
            filters: Vec::new(),
            pitch_ratio: Some(ratio),
        },
    };
    Ok(chain)
}

/// An earcon scheduled by a Sound Append rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EarconCue {
    pub clip: String,
    pub onset: f64,
    /// Event the cue announces, for event-triggered earcons.
    pub event_id: Option<usize>,
    /// Source whose radius was entered, for proximity earcons.
    pub source: Option<String>,
}

/// Times in `[0, horizon]` at which the listener enters the sphere of
/// `radius` around `center`, including `0` if it starts inside.
pub fn proximity_entries(scene: &Scene, center: Vec3, radius: f64, horizon: f64) -> Vec<f64> {
    let wps = &scene.listener.waypoints;
    let r2 = radius * radius;
    let inside = |p: Vec3| (p - center).dot(p - center) <= r2;
    let mut out = Vec::new();
    let Some(first) = wps.first() else {
        return out;
    };
    if inside(first.position) {
        out.push(0.0);
    }
    for pair in wps.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.time >= horizon {
            break;
        }
        // |a + v s - c|^2 = r^2 for s in (0, 1]; an entry is the smaller
        // root when the segment starts outside.
        let v = b.position - a.position;
        let w = a.position - center;
        let qa = v.dot(v);
        let qb = 2.0 * v.dot(w);
        let qc = w.dot(w) - r2;
        if qa == 0.0 || qc <= 0.0 {
            continue;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let s = (-qb - disc.sqrt()) / (2.0 * qa);
        if s > 0.0 && s <= 1.0 {
            let t = a.time + s * (b.time - a.time);
            if t <= horizon {
                out.push(t);
            }
        }
    }
    out
}

/// Sound Append: earcon cues for `timeline`, which must already carry
/// the final (shifted) onsets.
pub fn attach_earcons(plan: &ManipulationPlan, scene: &Scene, timeline: &Timeline) -> Vec<EarconCue> {
    let sources = scene.source_map();
    let mut cues = Vec::new();
    for att in &plan.earcons {
        let sel = Selector::parse(att.trigger.selector());
        match att.trigger {
            EarconTrigger::OnEvent { .. } => {
                for entry in timeline.entries.iter().filter(|e| !e.dropped) {
                    if sources.get(entry.source.as_str()).is_some_and(|s| sel.matches(s)) {
                        cues.push(EarconCue {
                            clip: att.earcon_clip.clone(),
                            onset: (entry.actual_onset - att.lead_time).max(0.0),
                            event_id: Some(entry.event_id),
                            source: None,
                        });
                    }
                }
            }
            EarconTrigger::OnProximity { radius, .. } => {
                for src in scene.sources.iter().filter(|s| sel.matches(s) && !s.follows_listener) {
                    let Placement::Spatial { position } = src.placement else {
                        continue;
                    };
                    for t in proximity_entries(scene, position, radius, scene.duration) {
                        cues.push(EarconCue {
                            clip: att.earcon_clip.clone(),
                            onset: t,
                            event_id: None,
                            source: Some(src.id.clone()),
                        });
                    }
                }
            }
        }
    }
    cues.sort_by(|a, b| a.onset.total_cmp(&b.onset).then_with(|| a.clip.cmp(&b.clip)));
    cues
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveKind {
    /// Identifiable event, by index in `scene.events`.
    Event(usize),
    /// Ambient bed, by index in `scene.ambient_beds`.
    Ambient(usize),
    /// Appended earcon, by index in the cue list.
    Earcon(usize),
}

/// Everything the renderer needs to play one sound.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderDirective {
    pub kind: DirectiveKind,
    pub source: Option<String>,
    pub clip: String,
    pub actual_onset: f64,
    /// Playback window; the clip is truncated at its end.
    pub duration: f64,
    pub repeat_every: Option<f64>,
    pub gain: f64,
    pub filter_chain: Vec<Filter>,
    pub pitch_ratio: Option<f64>,
    pub placement: Placement,
    pub follows_listener: bool,
    pub appended_earcons: Vec<(String, f64)>,
    pub tags: Vec<String>,
}

impl RenderDirective {
    /// Event index for identifiable-event directives.
    pub fn event_id(&self) -> Option<usize> {
        match self.kind {
            DirectiveKind::Event(i) => Some(i),
            _ => None,
        }
    }
}

struct Staged {
    gain: f64,
    filters: Vec<Filter>,
    pitch_ratio: Option<f64>,
    placement: Placement,
    tags: Vec<String>,
}

/// Transparency, envelope, style and position for one source sounding
/// at `onset`.
fn stage_source(plan: &ManipulationPlan, src: &SoundSource, onset: f64) -> Result<Staged> {
    let params = &plan.transparency;
    let mut tags = Vec::new();
    let mut filters = Vec::new();

    let mut gain = params.s_default;
    if src.category == SoundCategory::RealWorld {
        gain = transparency_volume(params, onset);
        let cutoff = transparency_cutoff(params, onset);
        let hp = Filter::highpass_or_bypass(cutoff)?;
        if hp != Filter::Bypass {
            filters.push(hp);
        }
        if params.tau_at(onset) < 1.0 {
            tags.push(TAG_TRANSPARENCY.to_string());
        }
    }

    if let Some(rank) = envelope_rank(plan, src) {
        gain *= envelope_gain(plan, src);
        tags.push(format!("envelope:rank{rank}"));
    }

    let style = style_chain(plan, src)?;
    if let Some(f) = resolve(&plan.style_filters, src) {
        tags.push(f.tag().to_string());
    }
    filters.extend(style.filters);

    let placement = position_override(plan, src);
    if resolve(&plan.position_overrides, src).is_some() {
        tags.push(TAG_POSITION.to_string());
    }

    Ok(Staged {
        gain,
        filters,
        pitch_ratio: style.pitch_ratio,
        placement,
        tags,
    })
}

/// Applies all manipulators in `plan` to `scene`.
///
/// Returns one directive per identifiable event, then per ambient bed,
/// then per earcon cue, plus the timeline with final onsets, gains and
/// tags. Dropped events get no directive.
pub fn compile_directives(scene: &Scene, plan: &ManipulationPlan) -> Result<(Vec<RenderDirective>, Timeline)> {
    let mut violations = validate_scene(scene);
    violations.extend(validate_plan(plan));
    violations.extend(validate_plan_for_scene(plan, scene));
    if !violations.is_empty() {
        return Err(Error::Invariant(violations));
    }

    let mut timeline = plan_timeline(scene, plan)?;
    timeline.condition = Some(plan.name.clone());
    let cues = attach_earcons(plan, scene, &timeline);
    let sources = scene.source_map();

    let mut event_dirs: Vec<Option<RenderDirective>> = vec![None; scene.events.len()];
    for entry in &mut timeline.entries {
        let src = sources[entry.source.as_str()];
        let ev = &scene.events[entry.event_id];
        let staged = stage_source(plan, src, entry.actual_onset)?;
        entry.gain = staged.gain;

        let appended: Vec<(String, f64)> = cues
            .iter()
            .filter(|c| {
                c.event_id == Some(entry.event_id)
                    || c.source.as_deref() == Some(entry.source.as_str())
            })
            .map(|c| (c.clip.clone(), c.onset))
            .collect();
        let mut tags = std::mem::take(&mut entry.applied_manipulations);
        tags.extend(staged.tags);
        let earcon_targets = plan
            .earcons
            .iter()
            .any(|a| Selector::parse(a.trigger.selector()).matches(src));
        if earcon_targets {
            tags.push(TAG_EARCON.to_string());
        }
        entry.applied_manipulations = tags.clone();

        if entry.dropped {
            continue;
        }
        event_dirs[entry.event_id] = Some(RenderDirective {
            kind: DirectiveKind::Event(entry.event_id),
            source: Some(src.id.clone()),
            clip: src.clip.clone(),
            actual_onset: entry.actual_onset,
            duration: ev.duration,
            repeat_every: ev.repeat_every,
            gain: staged.gain,
            filter_chain: staged.filters,
            pitch_ratio: staged.pitch_ratio,
            placement: staged.placement,
            follows_listener: src.follows_listener,
            appended_earcons: appended,
            tags,
        });
    }

    let mut directives: Vec<RenderDirective> = event_dirs.into_iter().flatten().collect();
    for (i, bed) in scene.ambient_beds.iter().enumerate() {
        let src = sources[bed.source.as_str()];
        let staged = stage_source(plan, src, bed.scheduled_onset)?;
        directives.push(RenderDirective {
            kind: DirectiveKind::Ambient(i),
            source: Some(src.id.clone()),
            clip: src.clip.clone(),
            actual_onset: bed.scheduled_onset,
            duration: bed.duration,
            repeat_every: bed.repeat_every,
            gain: staged.gain,
            filter_chain: staged.filters,
            pitch_ratio: staged.pitch_ratio,
            placement: staged.placement,
            follows_listener: src.follows_listener,
            appended_earcons: Vec::new(),
            tags: staged.tags,
        });
    }
    for (i, cue) in cues.iter().enumerate() {
        directives.push(RenderDirective {
            kind: DirectiveKind::Earcon(i),
            source: None,
            clip: cue.clip.clone(),
            actual_onset: cue.onset,
            duration: f64::INFINITY,
            repeat_every: None,
            gain: plan.transparency.s_default,
            filter_chain: Vec::new(),
            pitch_ratio: None,
            placement: Placement::ear(EarChannel::Both),
            follows_listener: false,
            appended_earcons: Vec::new(),
            tags: vec![TAG_EARCON.to_string()],
        });
    }
    Ok((directives, timeline))
}
