//! Command implementations behind the `soundshift` binary.
//!
//! Each `cmd_*` function does the file I/O for one subcommand and returns
//! its result, so the binary, the integration tests and the acceptance
//! suite drive exactly the same code.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use soundshift_core::format::{
    parse_plan, parse_scene, parse_timeline, serialize_plan, serialize_scene, serialize_timeline,
    to_canonical_json, validate_document,
};
use soundshift_core::model::{Condition, ManipulationPlan, ScenarioId, Scene, SCHEMA_VERSION};
use soundshift_core::presets::preset;
use soundshift_core::render::{render, RenderReport};
use soundshift_core::schedule::{generate_scenario, ScenarioTemplate};
use soundshift_core::scoring::{score, synthetic_responder, MetricsReport, ResponderProfile, ResponseLog};
use soundshift_core::synth::{ClipBank, ClipKind};
use soundshift_core::wav::{read_clip, wav_bytes, write_clip_wav};
use soundshift_core::Violation;

/// Directory of `<clip id>.wav` files that replace synthesized clips.
pub const ASSETS_ENV: &str = "SOUNDSHIFT_ASSETS";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    parse_scene(&read_text(path)?).with_context(|| format!("loading scene {}", path.display()))
}

/// Synthesized clips for `seed`, with any overrides from `assets_dir`.
pub fn load_bank(seed: u64, assets_dir: Option<&Path>) -> Result<ClipBank> {
    let mut bank = ClipBank::synthesized(seed);
    let Some(dir) = assets_dir else {
        return Ok(bank);
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading asset directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let clip = read_clip(&path, &id).with_context(|| format!("loading asset {}", path.display()))?;
        bank.insert(clip);
    }
    Ok(bank)
}

fn env_assets() -> Option<PathBuf> {
    std::env::var_os(ASSETS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn cmd_generate(scenario: ScenarioId, seed: u64, duration: Option<f64>, out: &Path) -> Result<Scene> {
    let mut template = ScenarioTemplate::for_id(scenario);
    if let Some(d) = duration {
        template.duration = d;
    }
    let scene = generate_scenario(&template, seed)?;
    write_file(out, serialize_scene(&scene).as_bytes())?;
    Ok(scene)
}

#[derive(Debug, Clone)]
pub enum PlanSource {
    Condition(Condition),
    File(PathBuf),
}

pub fn resolve_plan(source: &PlanSource, scene: &Scene) -> Result<ManipulationPlan> {
    match source {
        PlanSource::Condition(c) => Ok(preset(*c, scene)?),
        PlanSource::File(path) => {
            parse_plan(&read_text(path)?).with_context(|| format!("loading plan {}", path.display()))
        }
    }
}

pub fn cmd_plan(scene_path: &Path, condition: Condition) -> Result<String> {
    let scene = load_scene(scene_path)?;
    Ok(serialize_plan(&preset(condition, &scene)?))
}

#[derive(Debug, Clone)]
pub struct RenderArtifacts {
    pub wav: PathBuf,
    pub timeline: PathBuf,
    pub report: PathBuf,
    pub rendered: RenderReport,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Renders `scene` and writes `<prefix>.wav`, `<prefix>.timeline.json`
/// and `<prefix>.report.json`.
pub fn render_scene(
    scene: &Scene,
    plan: &ManipulationPlan,
    bank: &ClipBank,
    out_prefix: &Path,
) -> Result<RenderArtifacts> {
    let out = render(scene, plan, bank)?;
    let wav = with_suffix(out_prefix, ".wav");
    let timeline = with_suffix(out_prefix, ".timeline.json");
    let report = with_suffix(out_prefix, ".report.json");
    write_file(&wav, &wav_bytes(&out.audio)?)?;
    write_file(&timeline, serialize_timeline(&out.timeline).as_bytes())?;
    write_file(&report, to_canonical_json(&out.report).as_bytes())?;
    Ok(RenderArtifacts {
        wav,
        timeline,
        report,
        rendered: out.report,
    })
}

/// `seed` selects the clip synthesis seed and defaults to the scene's.
pub fn cmd_render(scene_path: &Path, plan: &PlanSource, seed: Option<u64>, out_prefix: &Path) -> Result<RenderArtifacts> {
    let scene = load_scene(scene_path)?;
    let plan = resolve_plan(plan, &scene)?;
    let bank = load_bank(seed.unwrap_or(scene.seed), env_assets().as_deref())?;
    render_scene(&scene, &plan, &bank, out_prefix)
}

pub fn cmd_score(timeline_path: &Path, responses_path: &Path, window: f64) -> Result<MetricsReport> {
    if !(window.is_finite() && window >= 0.0) {
        bail!("window must be a non-negative number of seconds, got {window}");
    }
    let tl = parse_timeline(&read_text(timeline_path)?)
        .with_context(|| format!("loading timeline {}", timeline_path.display()))?;
    let log = ResponseLog::parse(&read_text(responses_path)?)
        .with_context(|| format!("loading responses {}", responses_path.display()))?;
    Ok(score(&tl, &log, window))
}

pub fn cmd_respond(timeline_path: &Path, profile: &ResponderProfile) -> Result<ResponseLog> {
    if !(0.0..=1.0).contains(&profile.miss_prob) {
        bail!("miss probability must be in [0, 1], got {}", profile.miss_prob);
    }
    if !(profile.delay_mean.is_finite() && profile.delay_jitter.is_finite() && profile.delay_jitter >= 0.0) {
        bail!("delay mean and jitter must be finite, jitter non-negative");
    }
    let tl = parse_timeline(&read_text(timeline_path)?)?;
    Ok(synthetic_responder(&tl, profile))
}

pub fn cmd_assets_export(out_dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let bank = ClipBank::synthesized(seed);
    let mut written = Vec::new();
    for kind in ClipKind::ALL {
        let clip = bank.get(kind.id()).expect("synthesized bank has every kind");
        let path = out_dir.join(format!("{}.wav", kind.id()));
        write_clip_wav(clip, &path)?;
        written.push(path);
    }
    Ok(written)
}

// ------------------------------------------------------------------ batch

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub seed: u64,
    pub condition: String,
    pub scene: FileRef,
    pub wav: FileRef,
    pub timeline: FileRef,
    pub report: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: String,
    pub scenario: ScenarioId,
    pub conditions: Vec<String>,
    pub seeds: Vec<u64>,
    pub bundles: Vec<BundleEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn file_ref(root: &Path, path: &Path) -> Result<FileRef> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    Ok(FileRef {
        path: rel.to_string_lossy().replace('\\', "/"),
        sha256: sha256_hex(&bytes),
    })
}

/// Generates and renders every (seed, condition) pair, seeds in parallel.
/// Layout: `<out>/seed-<k>/scene.json` and `<out>/seed-<k>/<condition>.*`.
pub fn cmd_batch(
    scenario: ScenarioId,
    conditions: &[Condition],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Manifest> {
    if conditions.is_empty() || seeds.is_empty() {
        bail!("batch needs at least one condition and one seed");
    }
    fs::create_dir_all(out_dir)?;
    let assets = env_assets();
    let per_seed: Vec<Vec<BundleEntry>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<BundleEntry>> {
            let dir = out_dir.join(format!("seed-{seed}"));
            let scene_path = dir.join("scene.json");
            let scene = cmd_generate(scenario, seed, None, &scene_path)?;
            let bank = load_bank(scene.seed, assets.as_deref())?;
            let mut entries = Vec::new();
            for &c in conditions {
                let plan = preset(c, &scene)?;
                let art = render_scene(&scene, &plan, &bank, &dir.join(c.as_str()))?;
                entries.push(BundleEntry {
                    seed,
                    condition: c.as_str().into(),
                    scene: file_ref(out_dir, &scene_path)?,
                    wav: file_ref(out_dir, &art.wav)?,
                    timeline: file_ref(out_dir, &art.timeline)?,
                    report: file_ref(out_dir, &art.report)?,
                });
            }
            Ok(entries)
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        kind: "manifest".into(),
        scenario,
        conditions: conditions.iter().map(|c| c.as_str().to_string()).collect(),
        seeds: seeds.to_vec(),
        bundles: per_seed.into_iter().flatten().collect(),
    };
    write_file(&out_dir.join(MANIFEST_FILE), to_canonical_json(&manifest).as_bytes())?;
    Ok(manifest)
}

// --------------------------------------------------------------- validate

fn check_wav(path: &Path, out: &mut Vec<Violation>) {
    let label = path.display().to_string();
    match soundshift_core::wav::read_wav(path) {
        Ok(buf) if buf.is_empty() => out.push(Violation::new("wav_format", label, "no samples")),
        Ok(_) => {}
        Err(e) => out.push(Violation::new("wav_format", label, e.to_string())),
    }
}

fn check_json(path: &Path, text: &str, out: &mut Vec<Violation>) {
    let label = path.display().to_string();
    let kind = serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned));
    match kind.as_deref() {
        Some("manifest") => check_manifest(path, text, out),
        Some("render_report") => {
            if let Err(e) = serde_json::from_str::<RenderReport>(text) {
                out.push(Violation::new("schema", label, e.to_string()));
            }
        }
        Some("metrics") => {
            if let Err(e) = serde_json::from_str::<MetricsReport>(text) {
                out.push(Violation::new("schema", label, e.to_string()));
            }
        }
        Some("responses") => {
            if let Err(e) = ResponseLog::parse(text) {
                out.push(Violation::new("response_log", label, e.to_string()));
            }
        }
        _ => out.extend(validate_document(text).into_iter().map(|mut v| {
            v.path = if v.path.is_empty() { label.clone() } else { format!("{label}:{}", v.path) };
            v
        })),
    }
}

fn check_manifest(path: &Path, text: &str, out: &mut Vec<Violation>) {
    let label = path.display().to_string();
    let manifest: Manifest = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return out.push(Violation::new("schema", label, e.to_string())),
    };
    let root = path.parent().unwrap_or(Path::new("."));
    let expected = manifest.conditions.len() * manifest.seeds.len();
    if manifest.bundles.len() != expected {
        out.push(Violation::new(
            "manifest_bundle_count",
            label.clone(),
            format!("{} bundles for {expected} (seed, condition) pairs", manifest.bundles.len()),
        ));
    }
    for (i, b) in manifest.bundles.iter().enumerate() {
        for (field, r) in [("scene", &b.scene), ("wav", &b.wav), ("timeline", &b.timeline), ("report", &b.report)] {
            let file = root.join(&r.path);
            let at = format!("{label}:bundles[{i}].{field}");
            match fs::read(&file) {
                Ok(bytes) if sha256_hex(&bytes) != r.sha256 => {
                    out.push(Violation::new("manifest_hash", at, format!("{} changed since the batch ran", r.path)))
                }
                Ok(_) => {}
                Err(e) => out.push(Violation::new("manifest_file_exists", at, format!("{}: {e}", r.path))),
            }
        }
        check_bundle(root, b, &format!("{label}:bundles[{i}]"), out);
    }
}

/// Cross-file checks for one rendered bundle.
fn check_bundle(root: &Path, b: &BundleEntry, at: &str, out: &mut Vec<Violation>) {
    let scene = fs::read_to_string(root.join(&b.scene.path)).ok().and_then(|t| parse_scene(&t).ok());
    let tl = fs::read_to_string(root.join(&b.timeline.path)).ok().and_then(|t| parse_timeline(&t).ok());
    let (Some(scene), Some(tl)) = (scene, tl) else {
        return;
    };
    if tl.scene_id != scene.id {
        out.push(Violation::new(
            "bundle_consistency",
            at.to_string(),
            format!("timeline is for `{}`, scene is `{}`", tl.scene_id, scene.id),
        ));
    }
    if tl.entries.len() != scene.events.len() {
        out.push(Violation::new(
            "bundle_consistency",
            at.to_string(),
            format!("{} timeline entries for {} events", tl.entries.len(), scene.events.len()),
        ));
    }
    if tl.condition.as_deref() != Some(b.condition.as_str()) {
        out.push(Violation::new(
            "bundle_consistency",
            at.to_string(),
            format!("timeline condition {:?}, manifest says {}", tl.condition, b.condition),
        ));
    }
}

fn validate_file(path: &Path, out: &mut Vec<Violation>) -> Result<()> {
    let is_wav = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"));
    if is_wav {
        check_wav(path, out);
    } else {
        check_json(path, &read_text(path)?, out);
    }
    Ok(())
}

/// Every violated invariant in a document, WAV file or directory of
/// them. A directory is checked file by file (JSON and WAV), manifests
/// included. An empty list means valid.
pub fn cmd_validate(path: &Path) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            validate_file(&f, &mut out)?;
        }
    } else {
        validate_file(path, &mut out)?;
    }
    Ok(out)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path
            .extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| x.eq_ignore_ascii_case("json") || x.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Parses a comma-separated condition list such as `ft,nc,ss`.
pub fn parse_conditions(list: &str) -> Result<Vec<Condition>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Condition::parse(s).with_context(|| format!("unknown condition `{s}` (expected ft, nc or ss)")))
        .collect()
}
