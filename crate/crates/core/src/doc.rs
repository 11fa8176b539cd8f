//! Versioned JSON documents for keys, ciphertexts, gadgets and reports.
//!
//! Every file is `{"format_version": 1, "kind": …, "payload": …}` with
//! object keys in sorted order, so equal content gives equal bytes.

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{QheError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Keyset,
    Bundle,
    Qciphertext,
    Gadget,
    Plan,
    Ghprotocol,
    Program,
    Report,
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().ok_or(fmt::Error)?)
    }
}

impl FromStr for DocKind {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| QheError::Document(format!("unknown document kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentEnvelope {
    pub format_version: u32,
    pub kind: DocKind,
    pub payload: Value,
}

impl DocumentEnvelope {
    pub fn new<T: Serialize>(kind: DocKind, payload: &T) -> Result<Self> {
        let payload = serde_json::to_value(payload).map_err(|e| QheError::Document(e.to_string()))?;
        Ok(DocumentEnvelope { format_version: FORMAT_VERSION, kind, payload })
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        // Going through `Value` sorts every object's keys.
        let v = serde_json::to_value(self).map_err(|e| QheError::Document(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| QheError::Document(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: DocumentEnvelope =
            serde_json::from_str(text).map_err(|e| QheError::Document(format!("not a document: {e}")))?;
        if env.format_version != FORMAT_VERSION {
            return Err(QheError::Document(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                env.format_version
            )));
        }
        Ok(env)
    }

    /// Decodes the payload, checking the kind first.
    pub fn payload_as<T: DeserializeOwned>(&self, kind: DocKind) -> Result<T> {
        if self.kind != kind {
            return Err(QheError::Document(format!("expected a {kind} document, found {}", self.kind)));
        }
        serde_json::from_value(self.payload.clone()).map_err(|e| QheError::Document(format!("bad {kind} payload: {e}")))
    }
}

/// Serializes `payload` as a complete document.
pub fn write_document<T: Serialize>(kind: DocKind, payload: &T) -> Result<String> {
    DocumentEnvelope::new(kind, payload)?.to_json()
}

pub fn read_document<T: DeserializeOwned>(kind: DocKind, text: &str) -> Result<T> {
    DocumentEnvelope::from_json(text)?.payload_as(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrington::BranchingProgram;
    use crate::gardenhose::GHProtocol;

    #[test]
    fn kinds_round_trip_as_text() {
        for k in [DocKind::Keyset, DocKind::Qciphertext, DocKind::Ghprotocol, DocKind::Report] {
            assert_eq!(k.to_string().parse::<DocKind>().unwrap(), k);
        }
        assert_eq!(DocKind::Ghprotocol.to_string(), "ghprotocol");
        assert!("nope".parse::<DocKind>().is_err());
    }

    #[test]
    fn envelope_is_byte_stable() {
        let p = GHProtocol::toy_dec();
        let a = write_document(DocKind::Ghprotocol, &p).unwrap();
        let back: GHProtocol = read_document(DocKind::Ghprotocol, &a).unwrap();
        assert_eq!(back, p);
        assert_eq!(write_document(DocKind::Ghprotocol, &back).unwrap(), a);
        let i = a.find("\"format_version\"").unwrap();
        let j = a.find("\"kind\"").unwrap();
        let k = a.find("\"payload\"").unwrap();
        assert!(i < j && j < k);
    }

    #[test]
    fn wrong_kind_and_version() {
        let a = write_document(DocKind::Program, &BranchingProgram::or_example()).unwrap();
        assert!(read_document::<GHProtocol>(DocKind::Ghprotocol, &a).is_err());
        let bumped = a.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(DocumentEnvelope::from_json(&bumped), Err(QheError::Document(_))));
        assert!(DocumentEnvelope::from_json("{").is_err());
    }
}
