//! Artifact files: canonical JSON wrapped in a hashed envelope.
//!
//! ```json
//! {"content_hash": "<sha256 hex of canonical payload>", "kind": "sign_matrix",
//!  "payload": {...}, "schema_version": 1}
//! ```
//!
//! Canonical JSON sorts object keys, writes no whitespace, and prints every
//! float as `d.dddddddddddddddde±x` (17 significant digits). Integers and
//! dyadic pairs stay integers. Files use the `.lab.json` extension.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: u64 = 1;
pub const EXTENSION: &str = ".lab.json";

/// A type that can be stored in an envelope.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

macro_rules! artifact {
    ($($t:ty => $k:literal),* $(,)?) => {
        $(impl Artifact for $t { const KIND: &'static str = $k; })*
    };
}

artifact! {
    crate::domain::SignMatrix => "sign_matrix",
    crate::domain::DyadicDistribution => "dyadic_distribution",
    Vec<crate::domain::DyadicDistribution> => "distribution_list",
    crate::domain::SourceDistribution => "source_distribution",
    crate::features::Feature => "feature",
    crate::features::RflReport => "rfl_report",
    crate::boost::LinearFeatureModel => "linear_feature_model",
    crate::boost::AdcReport => "adc_report",
    crate::bsgd::BsgdRun => "bsgd_run",
    crate::pipeline::ChainReport => "chain_report",
    crate::pipeline::SeparationReport => "separation_report",
    crate::pipeline::ParityContrastReport => "parity_contrast_report",
}

/// Canonical bytes of a JSON value.
pub fn canonical_json(value: &Value) -> Result<String> {
    let mut out = String::new();
    write_canonical(value, &mut out)?;
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                if !f.is_finite() {
                    return Err(LabError::Malformed("non-finite float".into()));
                }
                out.push_str(&format!("{f:.16e}"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).map_err(|e| LabError::Malformed(e.to_string()))?),
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).map_err(|e| LabError::Malformed(e.to_string()))?);
                out.push(':');
                write_canonical(&map[k], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// Canonical JSON of any serializable value.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| LabError::Malformed(e.to_string()))?;
    canonical_json(&v)
}

pub fn content_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// The envelope text for an artifact, and its content hash.
pub fn envelope_string<T: Artifact>(artifact: &T) -> Result<(String, String)> {
    let payload = serde_json::to_value(artifact).map_err(|e| LabError::Malformed(e.to_string()))?;
    let hash = content_hash(&canonical_json(&payload)?);
    let env = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "content_hash": hash,
        "kind": T::KIND,
        "payload": payload,
    });
    Ok((canonical_json(&env)?, hash))
}

/// Writes the envelope and returns the content hash.
pub fn save<T: Artifact>(artifact: &T, path: impl AsRef<Path>) -> Result<String> {
    let (text, hash) = envelope_string(artifact)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(hash)
}

/// Parses and verifies envelope text.
pub fn from_envelope_str<T: Artifact>(text: &str) -> Result<T> {
    let env: Value = serde_json::from_str(text).map_err(|e| LabError::Malformed(e.to_string()))?;
    let obj = env
        .as_object()
        .ok_or_else(|| LabError::Malformed("envelope is not an object".into()))?;
    let version = obj
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| LabError::Malformed("missing schema_version".into()))?;
    if version != SCHEMA_VERSION {
        return Err(LabError::SchemaMismatch(format!(
            "schema version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| LabError::Malformed("missing kind".into()))?;
    if kind != T::KIND {
        return Err(LabError::SchemaMismatch(format!("kind {kind:?}, expected {:?}", T::KIND)));
    }
    let stored = obj
        .get("content_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| LabError::Malformed("missing content_hash".into()))?;
    let payload = obj
        .get("payload")
        .ok_or_else(|| LabError::Malformed("missing payload".into()))?;
    let computed = content_hash(&canonical_json(payload)?);
    if computed != stored {
        return Err(LabError::HashMismatch {
            stored: stored.to_string(),
            computed,
        });
    }
    serde_json::from_value(payload.clone()).map_err(|e| LabError::Malformed(e.to_string()))
}

pub fn load<T: Artifact>(path: impl AsRef<Path>) -> Result<T> {
    from_envelope_str(&fs::read_to_string(path)?)
}

/// Loads either an envelope or the bare JSON format of `T`.
pub fn load_any<T: Artifact>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| LabError::Malformed(e.to_string()))?;
    let is_envelope = v
        .as_object()
        .is_some_and(|o| o.contains_key("schema_version") && o.contains_key("payload"));
    if is_envelope {
        from_envelope_str(&text)
    } else {
        serde_json::from_value(v).map_err(|e| LabError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_parity_class, DyadicDistribution, SignMatrix};

    #[test]
    fn round_trip_and_stable_hash() {
        let dir = tempfile::tempdir().unwrap();
        let m = make_parity_class(2).unwrap();
        let p = dir.path().join("m.lab.json");
        let h1 = save(&m, &p).unwrap();
        let back: SignMatrix = load(&p).unwrap();
        assert_eq!(back, m);
        let h2 = save(&m, dir.path().join("again.lab.json")).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn tampering_detected() {
        let d = DyadicDistribution::new(vec![3, 1, 4], 3).unwrap();
        let (text, _) = envelope_string(&d).unwrap();
        let tampered = text.replacen("[3,1,4]", "[3,2,3]", 1);
        assert_ne!(tampered, text);
        assert!(matches!(
            from_envelope_str::<DyadicDistribution>(&tampered),
            Err(LabError::HashMismatch { .. })
        ));
        let wrong_version = text.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(
            from_envelope_str::<DyadicDistribution>(&wrong_version),
            Err(LabError::SchemaMismatch(_))
        ));
        assert!(matches!(
            from_envelope_str::<SignMatrix>(&text),
            Err(LabError::SchemaMismatch(_))
        ));
        assert!(matches!(
            from_envelope_str::<DyadicDistribution>(&text[..text.len() - 3]),
            Err(LabError::Malformed(_))
        ));
    }

    #[test]
    fn floats_are_fixed_width() {
        let v = serde_json::json!({"b": 0.1, "a": [1, 2.5, -3e-20]});
        assert_eq!(
            canonical_json(&v).unwrap(),
            r#"{"a":[1,2.5000000000000000e0,-3.0000000000000003e-20],"b":1.0000000000000001e-1}"#
        );
        let back: Value = serde_json::from_str(&canonical_json(&v).unwrap()).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }
}
