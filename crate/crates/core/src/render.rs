//! Offline binaural-ish renderer: compiles a plan against a scene and
//! mixes every directive into a stereo buffer.
//!
//! Directives are rendered independently (in parallel) and summed in
//! directive order, so output does not depend on the thread count.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{
    apply_chain, distance_gain, fold_azimuth, finalize, mix_into, pan_gains, relative_azimuth,
    resample_ratio, seconds_to_samples, StereoBuffer,
};
use crate::error::{Error, Result};
use crate::manipulate::{compile_directives, DirectiveKind, RenderDirective};
use crate::model::{EarChannel, ManipulationPlan, Placement, Scene, Timeline, Vec3};
use crate::synth::ClipBank;

/// Distance inside which spatial sources are not attenuated.
pub const MIN_DISTANCE: f64 = 1.0;
pub const MASTER_GAIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderReport {
    pub schema_version: u32,
    pub kind: String,
    pub scene_id: String,
    pub condition: Option<String>,
    pub sample_rate: u32,
    pub samples: usize,
    pub duration_seconds: f64,
    pub directives: usize,
    pub earcons: usize,
    pub clipped_samples: usize,
    pub dropped_events: Vec<usize>,
    pub delayed_events: usize,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub audio: StereoBuffer,
    pub timeline: Timeline,
    pub report: RenderReport,
}

/// Fixed (left, right) gains for an ear-channel placement.
pub fn ear_gains(channel: EarChannel) -> (f64, f64) {
    match channel {
        EarChannel::Left => (1.0, 0.0),
        EarChannel::Right => (0.0, 1.0),
        EarChannel::Both => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    }
}

/// Stereo gains for a spatial source at `position` heard at time `t`.
/// Positions of listener-following sources are in the listener's frame
/// (x right, y up, z forward).
pub fn spatial_gains(scene: &Scene, position: Vec3, follows_listener: bool, t: f64) -> (f64, f64) {
    let (azimuth, distance) = if follows_listener {
        (position.x.atan2(position.z), position.norm())
    } else {
        let (pos, yaw) = scene.listener.at(t);
        (relative_azimuth(pos, yaw, position), (position - pos).norm())
    };
    let (az, rear) = fold_azimuth(azimuth);
    let (gl, gr) = pan_gains(az);
    let g = rear * distance_gain(distance, MIN_DISTANCE);
    (gl * g, gr * g)
}

/// Trigger times of a directive relative to its onset.
fn trigger_offsets(d: &RenderDirective) -> Vec<f64> {
    match d.repeat_every {
        Some(p) if d.duration.is_finite() => {
            let n = ((d.duration / p) - 1e-9).ceil().max(1.0) as usize;
            (0..n).map(|k| k as f64 * p).collect()
        }
        _ => vec![0.0],
    }
}

/// Renders one directive. Returns its start sample and the stereo signal
/// with gain, filters and placement applied.
pub fn render_directive(scene: &Scene, bank: &ClipBank, d: &RenderDirective) -> Result<(usize, StereoBuffer)> {
    let clip = bank.get(&d.clip).ok_or_else(|| Error::MissingClip(d.clip.clone()))?;
    let mut mono = clip.to_mono();
    if let Some(ratio) = d.pitch_ratio {
        mono = resample_ratio(&mono, ratio)?;
    }
    let mono = apply_chain(&mono, &d.filter_chain);

    let start = seconds_to_samples(d.actual_onset);
    let window_end = if d.duration.is_finite() {
        seconds_to_samples(d.actual_onset + d.duration)
    } else {
        usize::MAX
    };
    let mut out = StereoBuffer::default();
    for offset in trigger_offsets(d) {
        let t = d.actual_onset + offset;
        let at = seconds_to_samples(t).max(start);
        let len = mono.len().min(window_end.saturating_sub(at));
        if len == 0 {
            continue;
        }
        let (gl, gr) = match d.placement {
            Placement::EarChannel { channel } => ear_gains(channel),
            Placement::Spatial { position } => spatial_gains(scene, position, d.follows_listener, t),
        };
        let seg = &mono[..len];
        let trigger = StereoBuffer {
            left: seg.iter().map(|s| s * gl).collect(),
            right: seg.iter().map(|s| s * gr).collect(),
        };
        mix_into(&mut out, &trigger, at - start, d.gain);
    }
    Ok((start, out))
}

/// Sum of all directives before the output stage. The buffer is at least
/// as long as the scene and grows to fit shifted events.
pub fn mix_directives(scene: &Scene, bank: &ClipBank, directives: &[RenderDirective]) -> Result<StereoBuffer> {
    let parts: Vec<(usize, StereoBuffer)> = directives
        .par_iter()
        .map(|d| render_directive(scene, bank, d))
        .collect::<Result<_>>()?;
    let mut mix = StereoBuffer::silent(seconds_to_samples(scene.duration));
    for (start, part) in &parts {
        mix_into(&mut mix, part, *start, 1.0);
    }
    Ok(mix)
}

/// Compiles `plan` against `scene` and mixes the result before the output
/// stage. Exposed for superposition checks.
pub fn render_mix(scene: &Scene, plan: &ManipulationPlan, bank: &ClipBank) -> Result<(StereoBuffer, Timeline, Vec<RenderDirective>)> {
    let (directives, timeline) = compile_directives(scene, plan)?;
    let mix = mix_directives(scene, bank, &directives)?;
    Ok((mix, timeline, directives))
}

pub fn render(scene: &Scene, plan: &ManipulationPlan, bank: &ClipBank) -> Result<RenderOutput> {
    let (mix, timeline, directives) = render_mix(scene, plan, bank)?;
    let (audio, clipped) = finalize(&mix, MASTER_GAIN);
    let report = RenderReport {
        schema_version: crate::model::SCHEMA_VERSION,
        kind: "render_report".into(),
        scene_id: scene.id.clone(),
        condition: timeline.condition.clone(),
        sample_rate: crate::model::SAMPLE_RATE,
        samples: audio.len(),
        duration_seconds: audio.len() as f64 / f64::from(crate::model::SAMPLE_RATE),
        directives: directives.len(),
        earcons: directives
            .iter()
            .filter(|d| matches!(d.kind, DirectiveKind::Earcon(_)))
            .count(),
        clipped_samples: clipped,
        dropped_events: timeline
            .entries
            .iter()
            .filter(|e| e.dropped)
            .map(|e| e.event_id)
            .collect(),
        delayed_events: timeline
            .entries
            .iter()
            .filter(|e| e.actual_onset > e.scheduled_onset)
            .count(),
    };
    Ok(RenderOutput {
        audio,
        timeline,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ListenerPath, SoundCategory, SoundEvent, SoundSource, SCHEMA_VERSION};
    use crate::model::AudioClip;

    fn scene(sources: Vec<SoundSource>, events: Vec<SoundEvent>, duration: f64) -> Scene {
        Scene {
            schema_version: SCHEMA_VERSION,
            kind: "scene".into(),
            id: "t".into(),
            scenario: None,
            duration,
            seed: 0,
            sources,
            ambient_beds: vec![],
            events,
            listener: ListenerPath::stationary(Vec3::ZERO, 0.0),
        }
    }

    fn impulse_bank() -> ClipBank {
        let mut bank = ClipBank::default();
        let mut s = vec![0.0; 480];
        s[0] = 1.0;
        bank.insert(AudioClip::mono("imp", s));
        bank
    }

    fn vr_source(id: &str, placement: Placement) -> SoundSource {
        SoundSource {
            id: id.into(),
            clip: "imp".into(),
            category: SoundCategory::Virtual,
            placement,
            identification_key: Some(1),
            protected: false,
            follows_listener: false,
        }
    }

    #[test]
    fn empty_scene_is_silent() {
        let s = scene(vec![], vec![], 1.0);
        let out = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap();
        assert_eq!(out.audio.len(), 48_000);
        assert!(out.audio.left.iter().chain(&out.audio.right).all(|&x| x == 0.0));
        assert_eq!(out.report.directives, 0);
    }

    #[test]
    fn left_ear_impulse_lands_at_onset() {
        let s = scene(
            vec![vr_source("a", Placement::ear(EarChannel::Left))],
            vec![SoundEvent::new("a", 0.5, 0.01)],
            1.0,
        );
        let out = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap();
        let at = 24_000;
        assert!((out.audio.left[at] - 0.5).abs() < 1e-12);
        assert_eq!(out.audio.right[at], 0.0);
        let nonzero = out.audio.left.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn source_to_the_right_is_louder_right() {
        let s = scene(
            vec![vr_source("a", Placement::spatial(3.0, 0.0, 0.0))],
            vec![SoundEvent::new("a", 0.0, 0.01)],
            1.0,
        );
        let out = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap();
        assert!(out.audio.right[0] > out.audio.left[0]);
        assert!(out.audio.left[0].abs() < 1e-12);
        // 0.5 base gain, 1/3 distance gain
        assert!((out.audio.right[0] - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn repeats_retrigger_inside_window() {
        let mut ev = SoundEvent::new("a", 0.0, 1.0);
        ev.repeat_every = Some(0.25);
        let s = scene(vec![vr_source("a", Placement::ear(EarChannel::Right))], vec![ev], 2.0);
        let out = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap();
        let hits: Vec<usize> = (0..out.audio.len()).filter(|&i| out.audio.right[i] != 0.0).collect();
        assert_eq!(hits, vec![0, 12_000, 24_000, 36_000]);
    }

    #[test]
    fn missing_clip_is_reported() {
        let mut src = vr_source("a", Placement::ear(EarChannel::Left));
        src.clip = "nope".into();
        let s = scene(vec![src], vec![SoundEvent::new("a", 0.0, 0.5)], 1.0);
        let err = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap_err();
        assert!(matches!(err, Error::MissingClip(id) if id == "nope"));
    }

    #[test]
    fn carried_source_ignores_listener_heading() {
        let mut src = vr_source("a", Placement::spatial(-1.0, 0.0, 1.0));
        src.follows_listener = true;
        let mut s = scene(vec![src], vec![SoundEvent::new("a", 0.0, 0.01)], 1.0);
        s.listener = ListenerPath::stationary(Vec3::new(5.0, 0.0, 5.0), 2.0);
        let out = render(&s, &ManipulationPlan::transparency_only("ft", 1.0), &impulse_bank()).unwrap();
        assert!(out.audio.left[0] > out.audio.right[0]);
    }
}
