//! Sample-level DSP primitives. Everything runs in `f64` at
//! [`SAMPLE_RATE`] and is deterministic for identical inputs.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use thiserror::Error;

use crate::model::{Vec3, SAMPLE_RATE};

pub const MIN_RESAMPLE_RATIO: f64 = 0.25;
pub const MAX_RESAMPLE_RATIO: f64 = 4.0;

/// Gain applied to sources folded in from behind the listener.
pub const REAR_GAIN: f64 = 0.7;

/// Butterworth quality factor.
pub const BUTTERWORTH_Q: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("cutoff {cutoff} Hz outside (0, {nyquist}) Hz")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },
    #[error("resample ratio {0} outside [0.25, 4]")]
    RatioOutOfRange(f64),
}

fn nyquist() -> f64 {
    f64::from(SAMPLE_RATE) / 2.0
}

pub fn seconds_to_samples(t: f64) -> usize {
    (t * f64::from(SAMPLE_RATE)).round().max(0.0) as usize
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StereoBuffer {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl StereoBuffer {
    pub fn silent(len: usize) -> Self {
        Self {
            left: vec![0.0; len],
            right: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    fn ensure_len(&mut self, len: usize) {
        if self.left.len() < len {
            self.left.resize(len, 0.0);
            self.right.resize(len, 0.0);
        }
    }

    pub fn rms(samples: &[f64]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
    }
}

/// Equal-power gains `(left, right)` for an azimuth in radians, where
/// `-π/2` is hard left, `0` is ahead and `+π/2` is hard right. Inputs
/// outside that range are clamped.
pub fn pan_gains(azimuth: f64) -> (f64, f64) {
    let az = azimuth.clamp(-FRAC_PI_2, FRAC_PI_2);
    let theta = (az + FRAC_PI_2) / 2.0;
    (theta.cos(), theta.sin())
}

pub fn pan_equal_power(mono: &[f64], azimuth: f64) -> StereoBuffer {
    let (gl, gr) = pan_gains(azimuth);
    StereoBuffer {
        left: mono.iter().map(|s| s * gl).collect(),
        right: mono.iter().map(|s| s * gr).collect(),
    }
}

/// Azimuth of `source` as heard by a listener at `listener` facing `yaw`,
/// in `(-π, π]`; positive is to the listener's right.
pub fn relative_azimuth(listener: Vec3, yaw: f64, source: Vec3) -> f64 {
    let d = source - listener;
    let forward = Vec3::new(yaw.sin(), 0.0, yaw.cos());
    let right = Vec3::new(yaw.cos(), 0.0, -yaw.sin());
    d.dot(right).atan2(d.dot(forward))
}

/// Folds a rear azimuth onto the frontal half-plane. Returns the folded
/// azimuth and the gain factor ([`REAR_GAIN`] for rear sources).
pub fn fold_azimuth(azimuth: f64) -> (f64, f64) {
    if azimuth.abs() <= FRAC_PI_2 {
        (azimuth, 1.0)
    } else {
        let folded = azimuth.signum() * (PI - azimuth.abs());
        (folded, REAR_GAIN)
    }
}

/// Inverse-distance attenuation, unity inside `min_distance`.
pub fn distance_gain(distance: f64, min_distance: f64) -> f64 {
    min_distance / distance.max(min_distance)
}

/// Normalized biquad coefficients (`a0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoeffs {
    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Magnitude response at `freq` Hz in dB.
    pub fn magnitude_db(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / f64::from(SAMPLE_RATE);
        let (c1, s1) = (w.cos(), w.sin());
        let (c2, s2) = ((2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = -(self.b1 * s1 + self.b2 * s2);
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = -(self.a1 * s1 + self.a2 * s2);
        let num = num_re.hypot(num_im);
        let den = den_re.hypot(den_im);
        20.0 * (num / den).log10()
    }
}

fn check_cutoff(cutoff: f64) -> Result<(), DspError> {
    if cutoff > 0.0 && cutoff < nyquist() {
        Ok(())
    } else {
        Err(DspError::CutoffOutOfRange {
            cutoff,
            nyquist: nyquist(),
        })
    }
}

struct Prewarp {
    cos: f64,
    alpha: f64,
}

fn prewarp(cutoff: f64, q: f64) -> Prewarp {
    let w0 = 2.0 * PI * cutoff / f64::from(SAMPLE_RATE);
    Prewarp {
        cos: w0.cos(),
        alpha: w0.sin() / (2.0 * q),
    }
}

fn normalize(b: [f64; 3], a: [f64; 3]) -> BiquadCoeffs {
    BiquadCoeffs {
        b0: b[0] / a[0],
        b1: b[1] / a[0],
        b2: b[2] / a[0],
        a1: a[1] / a[0],
        a2: a[2] / a[0],
    }
}

/// Second-order low-pass (audio EQ cookbook form).
pub fn design_lowpass(cutoff: f64, q: f64) -> Result<BiquadCoeffs, DspError> {
    check_cutoff(cutoff)?;
    let Prewarp { cos, alpha } = prewarp(cutoff, q);
    Ok(normalize(
        [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
        [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
    ))
}

/// Second-order high-pass (audio EQ cookbook form).
pub fn design_highpass(cutoff: f64, q: f64) -> Result<BiquadCoeffs, DspError> {
    check_cutoff(cutoff)?;
    let Prewarp { cos, alpha } = prewarp(cutoff, q);
    Ok(normalize(
        [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
        [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    Bypass,
    Biquad(BiquadCoeffs),
}

impl Filter {
    /// High-pass at `cutoff`, or bypass when `cutoff == 0`.
    pub fn highpass_or_bypass(cutoff: f64) -> Result<Self, DspError> {
        if cutoff == 0.0 {
            Ok(Filter::Bypass)
        } else {
            design_highpass(cutoff, BUTTERWORTH_Q).map(Filter::Biquad)
        }
    }
}

/// Telephone band: high-pass at `low` followed by low-pass at `high`.
pub fn telephone(low: f64, high: f64) -> Result<[Filter; 2], DspError> {
    Ok([
        Filter::Biquad(design_highpass(low, BUTTERWORTH_Q)?),
        Filter::Biquad(design_lowpass(high, BUTTERWORTH_Q)?),
    ])
}

/// Runs `filter` over `input` from zero state (direct form I).
pub fn apply_filter(input: &[f64], filter: &Filter) -> Vec<f64> {
    let c = match filter {
        Filter::Bypass => return input.to_vec(),
        Filter::Biquad(c) => c,
    };
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    input
        .iter()
        .map(|&x| {
            let y = c.b0 * x + c.b1 * x1 + c.b2 * x2 - c.a1 * y1 - c.a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

pub fn apply_chain(input: &[f64], chain: &[Filter]) -> Vec<f64> {
    chain
        .iter()
        .fold(input.to_vec(), |buf, f| apply_filter(&buf, f))
}

/// Linear-interpolation resampling by `ratio`: pitch scales by `ratio`,
/// length by `1 / ratio`.
pub fn resample_ratio(input: &[f64], ratio: f64) -> Result<Vec<f64>, DspError> {
    if !(MIN_RESAMPLE_RATIO..=MAX_RESAMPLE_RATIO).contains(&ratio) {
        return Err(DspError::RatioOutOfRange(ratio));
    }
    if ratio == 1.0 {
        return Ok(input.to_vec());
    }
    let out_len = (input.len() as f64 / ratio).round() as usize;
    let last = input.len().saturating_sub(1);
    Ok((0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = pos.floor() as usize;
            if idx >= last {
                return input.get(last).copied().unwrap_or(0.0);
            }
            let frac = pos - idx as f64;
            input[idx] + (input[idx + 1] - input[idx]) * frac
        })
        .collect())
}

/// `dest[i + offset] += gain * src[i]`, growing `dest` as needed.
pub fn mix_into(dest: &mut StereoBuffer, src: &StereoBuffer, offset: usize, gain: f64) {
    dest.ensure_len(offset + src.len());
    for (d, s) in dest.left[offset..].iter_mut().zip(&src.left) {
        *d += gain * s;
    }
    for (d, s) in dest.right[offset..].iter_mut().zip(&src.right) {
        *d += gain * s;
    }
}

/// Applies `master_gain` and hard-clamps to [-1, 1]. Returns the output
/// and how many samples were clamped.
pub fn finalize(buffer: &StereoBuffer, master_gain: f64) -> (StereoBuffer, usize) {
    let mut clipped = 0;
    let mut stage = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let y = x * master_gain;
                if y.abs() > 1.0 {
                    clipped += 1;
                }
                y.clamp(-1.0, 1.0)
            })
            .collect()
    };
    let left = stage(&buffer.left);
    let right = stage(&buffer.right);
    (StereoBuffer { left, right }, clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = SAMPLE_RATE as f64;

    fn sine(freq: f64, secs: f64) -> Vec<f64> {
        let n = (secs * FS) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / FS).sin())
            .collect()
    }

    /// Steady-state gain in dB measured from RMS over the second half of
    /// a one-second probe.
    fn measured_gain_db(chain: &[Filter], freq: f64) -> f64 {
        let x = sine(freq, 1.0);
        let y = apply_chain(&x, chain);
        let half = x.len() / 2;
        20.0 * (StereoBuffer::rms(&y[half..]) / StereoBuffer::rms(&x[half..])).log10()
    }

    #[test]
    fn pan_centre_and_endpoints() {
        let (l, r) = pan_gains(0.0);
        assert!((l - FRAC_1_SQRT_2).abs() < 1e-12 && (r - FRAC_1_SQRT_2).abs() < 1e-12);
        let (l, r) = pan_gains(-FRAC_PI_2);
        assert!((l - 1.0).abs() < 1e-12 && r.abs() < 1e-12);
        let (l, r) = pan_gains(FRAC_PI_2);
        assert!(l.abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let (l, r) = pan_gains(PI / 4.0);
        assert!((l * l + r * r - 1.0).abs() < 1e-9);
        assert!(r > l);
    }

    #[test]
    fn azimuth_convention() {
        let ahead = relative_azimuth(Vec3::ZERO, 0.0, Vec3::new(0.0, 0.0, 5.0));
        assert!(ahead.abs() < 1e-12);
        let right = relative_azimuth(Vec3::ZERO, 0.0, Vec3::new(3.0, 0.0, 0.0));
        assert!((right - FRAC_PI_2).abs() < 1e-12);
        // turning right by 90 degrees puts a +x source dead ahead
        let turned = relative_azimuth(Vec3::ZERO, FRAC_PI_2, Vec3::new(3.0, 0.0, 0.0));
        assert!(turned.abs() < 1e-12);
        let (az, g) = fold_azimuth(relative_azimuth(Vec3::ZERO, 0.0, Vec3::new(1.0, 0.0, -1.0)));
        assert!((az - PI / 4.0).abs() < 1e-12);
        assert_eq!(g, REAR_GAIN);
    }

    #[test]
    fn distance_law() {
        assert_eq!(distance_gain(0.5, 1.0), 1.0);
        assert_eq!(distance_gain(1.0, 1.0), 1.0);
        assert_eq!(distance_gain(4.0, 1.0), 0.25);
    }

    #[test]
    fn highpass_response_from_probe_sines() {
        let hp = [Filter::Biquad(design_highpass(1000.0, BUTTERWORTH_Q).unwrap())];
        let at_cutoff = measured_gain_db(&hp, 1000.0);
        assert!((at_cutoff + 3.0).abs() <= 0.5, "{at_cutoff}");
        assert!(measured_gain_db(&hp, 500.0) <= -11.0);
        assert!(measured_gain_db(&hp, 100.0) <= -20.0);
    }

    #[test]
    fn lowpass_passband_flat() {
        let lp = [Filter::Biquad(design_lowpass(20_000.0, BUTTERWORTH_Q).unwrap())];
        assert!(measured_gain_db(&lp, 440.0).abs() <= 0.1);
        let lp = [Filter::Biquad(design_lowpass(1000.0, BUTTERWORTH_Q).unwrap())];
        assert!((measured_gain_db(&lp, 1000.0) + 3.0).abs() <= 0.5);
        assert!(measured_gain_db(&lp, 2000.0) <= -11.0);
    }

    #[test]
    fn analytic_magnitude_agrees_with_probe() {
        let c = design_highpass(1000.0, BUTTERWORTH_Q).unwrap();
        for f in [200.0, 1000.0, 4000.0] {
            let probe = measured_gain_db(&[Filter::Biquad(c)], f);
            assert!((probe - c.magnitude_db(f)).abs() < 0.05, "{f}: {probe}");
        }
    }

    #[test]
    fn telephone_passes_1k() {
        let chain = telephone(300.0, 3400.0).unwrap();
        assert!(measured_gain_db(&chain, 1000.0) >= -1.5);
    }

    #[test]
    fn highpass_rejects_dc() {
        let mut impulse = vec![0.0; 48_000];
        impulse[0] = 1.0;
        let h = apply_filter(&impulse, &Filter::Biquad(design_highpass(1000.0, BUTTERWORTH_Q).unwrap()));
        assert!(h.iter().sum::<f64>().abs() < 1e-3);
    }

    #[test]
    fn bypass_and_bad_cutoffs() {
        let x = sine(440.0, 0.01);
        assert_eq!(apply_filter(&x, &Filter::Bypass), x);
        assert_eq!(Filter::highpass_or_bypass(0.0).unwrap(), Filter::Bypass);
        assert!(design_lowpass(0.0, BUTTERWORTH_Q).is_err());
        assert!(design_highpass(24_000.0, BUTTERWORTH_Q).is_err());
        assert!(design_highpass(-5.0, BUTTERWORTH_Q).is_err());
    }

    fn dominant_frequency(x: &[f64]) -> f64 {
        // Direct DFT scan on a 1 Hz grid around the expected band.
        let n = x.len() as f64;
        (600..1200)
            .map(|f| {
                let w = 2.0 * PI * f as f64 / FS;
                let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, s)| {
                    (re + s * (w * i as f64).cos(), im - s * (w * i as f64).sin())
                });
                (f as f64, (re * re + im * im) / n)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn resample_doubles_pitch_and_halves_length() {
        let x = sine(440.0, 1.0);
        let y = resample_ratio(&x, 2.0).unwrap();
        assert_eq!(y.len(), 24_000);
        let f = dominant_frequency(&y);
        assert!((f - 880.0).abs() <= 5.0, "{f}");
        assert_eq!(resample_ratio(&x, 1.0).unwrap(), x);
        assert!(resample_ratio(&x, 5.0).is_err());
        assert!(resample_ratio(&x, 0.2).is_err());
    }

    #[test]
    fn mixing_examples() {
        let mut dest = StereoBuffer::silent(20);
        let before = dest.clone();
        mix_into(&mut dest, &StereoBuffer::silent(5), 3, 1.0);
        assert_eq!(dest, before);
        let mut imp = StereoBuffer::silent(1);
        imp.left[0] = 1.0;
        imp.right[0] = 1.0;
        mix_into(&mut dest, &imp, 10, 0.5);
        assert_eq!(dest.left[10], 0.5);
        mix_into(&mut dest, &imp, 30, 1.0);
        assert_eq!(dest.len(), 31);
    }

    #[test]
    fn finalize_clamps_and_counts() {
        let buf = StereoBuffer {
            left: vec![0.5, 1.5, -0.25],
            right: vec![0.0, 0.1, -0.9],
        };
        let (out, clipped) = finalize(&buf, 1.0);
        assert_eq!(out.left, vec![0.5, 1.0, -0.25]);
        assert_eq!(clipped, 1);
        let (half, clipped) = finalize(&StereoBuffer { left: vec![0.5], right: vec![-0.8] }, 0.5);
        assert_eq!((half.left[0], half.right[0], clipped), (0.25, -0.4, 0));
    }

    proptest! {
        #[test]
        fn equal_power_identity(az in -FRAC_PI_2..=FRAC_PI_2) {
            let (l, r) = pan_gains(az);
            prop_assert!((l * l + r * r - 1.0).abs() < 1e-9);
        }

        #[test]
        fn designed_filters_are_stable(cutoff in 20.0f64..23_000.0, hp in any::<bool>()) {
            let c = if hp { design_highpass(cutoff, BUTTERWORTH_Q) } else { design_lowpass(cutoff, BUTTERWORTH_Q) }.unwrap();
            prop_assert!(c.is_stable());
        }

        #[test]
        fn mix_order_is_irrelevant(
            a in proptest::collection::vec(-1.0f64..1.0, 1..64),
            b in proptest::collection::vec(-1.0f64..1.0, 1..64),
            oa in 0usize..32, ob in 0usize..32, ga in 0.0f64..2.0, gb in 0.0f64..2.0,
        ) {
            let sa = pan_equal_power(&a, 0.3);
            let sb = pan_equal_power(&b, -0.7);
            let mut ab = StereoBuffer::default();
            mix_into(&mut ab, &sa, oa, ga);
            mix_into(&mut ab, &sb, ob, gb);
            let mut ba = StereoBuffer::default();
            mix_into(&mut ba, &sb, ob, gb);
            mix_into(&mut ba, &sa, oa, ga);
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn impulse_responses_decay_within_one_second() {
        let mut impulse = vec![0.0; 2 * 48_000];
        impulse[0] = 1.0;
        for cutoff in [20.0, 300.0, 1000.0, 3400.0, 20_000.0] {
            for c in [
                design_highpass(cutoff, BUTTERWORTH_Q).unwrap(),
                design_lowpass(cutoff, BUTTERWORTH_Q).unwrap(),
            ] {
                let h = apply_filter(&impulse, &Filter::Biquad(c));
                assert!(h[48_001..].iter().all(|v| v.abs() < 1e-6), "{cutoff}");
            }
        }
    }
}
