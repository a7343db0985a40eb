//! JSON documents for scenes, plans and timelines.
//!
//! Serialization is canonical: object keys are sorted and floats use the
//! shortest representation that round-trips, so `serialize(parse(text))`
//! is byte-stable for any canonical `text`.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result, Violation};
use crate::model::{ManipulationPlan, Scene, Timeline};
use crate::validate::{validate_plan, validate_scene, validate_timeline};

/// Deserializes `text`, naming the offending JSON path on failure.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Canonical pretty JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // `serde_json::Value` objects are BTreeMap-backed, so going through a
    // Value sorts every object's keys.
    let value = serde_json::to_value(value).expect("model types always serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

fn checked<T>(value: T, violations: Vec<Violation>) -> Result<T> {
    if violations.is_empty() {
        Ok(value)
    } else {
        Err(Error::Invariant(violations))
    }
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let scene: Scene = from_json(text)?;
    let v = validate_scene(&scene);
    checked(scene, v)
}

pub fn serialize_scene(scene: &Scene) -> String {
    to_canonical_json(scene)
}

pub fn parse_plan(text: &str) -> Result<ManipulationPlan> {
    let plan: ManipulationPlan = from_json(text)?;
    let v = validate_plan(&plan);
    checked(plan, v)
}

pub fn serialize_plan(plan: &ManipulationPlan) -> String {
    to_canonical_json(plan)
}

pub fn parse_timeline(text: &str) -> Result<Timeline> {
    let tl: Timeline = from_json(text)?;
    let v = validate_timeline(&tl);
    checked(tl, v)
}

pub fn serialize_timeline(tl: &Timeline) -> String {
    to_canonical_json(tl)
}

/// Which document type a JSON file holds, from its `kind` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Scene,
    Plan,
    Timeline,
}

pub fn sniff_kind(text: &str) -> Result<DocumentKind> {
    #[derive(serde::Deserialize)]
    struct Probe {
        kind: Option<String>,
    }
    let probe: Probe = from_json(text)?;
    match probe.kind.as_deref() {
        Some("scene") => Ok(DocumentKind::Scene),
        Some("plan") => Ok(DocumentKind::Plan),
        Some("timeline") => Ok(DocumentKind::Timeline),
        other => Err(Error::Schema {
            path: "kind".into(),
            message: format!("expected scene, plan or timeline, found {other:?}"),
        }),
    }
}

/// Parses any document and returns every violated invariant. Schema
/// failures come back as a single `schema` violation.
pub fn validate_document(text: &str) -> Vec<Violation> {
    fn schema(e: Error) -> Vec<Violation> {
        match e {
            Error::Schema { path, message } => vec![Violation::new("schema", path, message)],
            other => vec![Violation::new("schema", "", other.to_string())],
        }
    }
    let kind = match sniff_kind(text) {
        Ok(k) => k,
        Err(e) => return schema(e),
    };
    match kind {
        DocumentKind::Scene => from_json::<Scene>(text).map_or_else(schema, |s| validate_scene(&s)),
        DocumentKind::Plan => {
            from_json::<ManipulationPlan>(text).map_or_else(schema, |p| validate_plan(&p))
        }
        DocumentKind::Timeline => {
            from_json::<Timeline>(text).map_or_else(schema, |t| validate_timeline(&t))
        }
    }
}
