//! The `procmat/1` interchange format (`.procmat.json`).
//!
//! A JSON document with, in this key order:
//!
//! * `format_version`: always `"procmat/1"`;
//! * `parties`: `{name, d_in, d_out}` objects in layout order, with an
//!   optional `subparties` list of `[d_in, d_out]` pairs when a party is a
//!   merged party;
//! * `matrix`: `{dim, entries}` where `entries` holds `dim * dim` `[re, im]`
//!   pairs in row-major order, using the same big-endian subsystem order as
//!   the rest of the crate (each party's inputs, then its outputs);
//! * `metadata` (optional): `{description, seed, provenance}`, each optional.
//!
//! [`serialize`] emits a canonical form: two-space indentation, one party
//! and one entry per line, floats in shortest round-trip notation, trailing
//! newline. Parsing then reserializing any accepted document yields the
//! canonical bytes, and entries round-trip bit for bit.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::process::{Party, PartyLayout, ProcessMatrix, SubParty};

pub const FORMAT_VERSION: &str = "procmat/1";
pub const FILE_EXTENSION: &str = ".procmat.json";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unsupported format version `{found}` (expected `{FORMAT_VERSION}`)")]
    Version { found: String },

    #[error("{path}: missing field")]
    Missing { path: String },

    #[error("{path}: unexpected field")]
    Unexpected { path: String },

    #[error("{path}: {message}")]
    Type { path: String, message: String },

    #[error("{path}: malformed number: {message}")]
    Number { path: String, message: String },

    #[error("{path}: dimension mismatch: {message}")]
    Dimension { path: String, message: String },

    #[error("parties: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    pub description: Option<String>,
    pub seed: Option<u64>,
    pub provenance: Option<String>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        self.description.is_none() && self.seed.is_none() && self.provenance.is_none()
    }
}

/// A parsed document: the process plus optional metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcmatDocument {
    pub process: ProcessMatrix,
    pub metadata: Option<Metadata>,
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, FormatError> {
    obj.get(key).ok_or_else(|| FormatError::Missing { path: format!("{path}.{key}") })
}

fn as_object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, FormatError> {
    let obj = v
        .as_object()
        .ok_or_else(|| FormatError::Type { path: path.to_string(), message: "expected an object".into() })?;
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(FormatError::Unexpected { path: format!("{path}.{k}") });
    }
    Ok(obj)
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, FormatError> {
    v.as_array()
        .ok_or_else(|| FormatError::Type { path: path.to_string(), message: "expected an array".into() })
}

fn as_dim(v: &Value, path: &str) -> Result<usize, FormatError> {
    v.as_u64()
        .filter(|&d| d >= 1)
        .and_then(|d| usize::try_from(d).ok())
        .ok_or_else(|| FormatError::Number {
            path: path.to_string(),
            message: format!("expected a positive integer, found {v}"),
        })
}

fn as_float(v: &Value, path: &str) -> Result<f64, FormatError> {
    match v {
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).ok_or_else(|| FormatError::Number {
            path: path.to_string(),
            message: format!("{n} is not a finite double"),
        }),
        other => Err(FormatError::Number { path: path.to_string(), message: format!("expected a number, found {other}") }),
    }
}

fn as_string(v: &Value, path: &str) -> Result<String, FormatError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| FormatError::Type { path: path.to_string(), message: "expected a string".into() })
}

fn parse_party(v: &Value, path: &str) -> Result<Party, FormatError> {
    let obj = as_object(v, path, &["name", "d_in", "d_out", "subparties"])?;
    let name = as_string(field(obj, "name", path)?, &format!("{path}.name"))?;
    let d_in = as_dim(field(obj, "d_in", path)?, &format!("{path}.d_in"))?;
    let d_out = as_dim(field(obj, "d_out", path)?, &format!("{path}.d_out"))?;
    let Some(subs) = obj.get("subparties") else {
        return Ok(Party::new(name, d_in, d_out));
    };
    let sub_path = format!("{path}.subparties");
    let mut subparties = Vec::new();
    for (k, s) in as_array(subs, &sub_path)?.iter().enumerate() {
        let p = format!("{sub_path}[{k}]");
        let pair = as_array(s, &p)?;
        if pair.len() != 2 {
            return Err(FormatError::Type { path: p, message: "expected a [d_in, d_out] pair".into() });
        }
        subparties.push(SubParty::new(as_dim(&pair[0], &format!("{p}[0]"))?, as_dim(&pair[1], &format!("{p}[1]"))?));
    }
    let party = Party::with_subparties(name, subparties);
    if party.d_in() != d_in || party.d_out() != d_out {
        return Err(FormatError::Dimension {
            path: sub_path,
            message: format!(
                "sub-parties multiply to {}x{}, party declares {d_in}x{d_out}",
                party.d_in(),
                party.d_out()
            ),
        });
    }
    Ok(party)
}

fn parse_metadata(v: &Value) -> Result<Metadata, FormatError> {
    let path = "metadata";
    let obj = as_object(v, path, &["description", "seed", "provenance"])?;
    let description = obj.get("description").map(|d| as_string(d, "metadata.description")).transpose()?;
    let provenance = obj.get("provenance").map(|d| as_string(d, "metadata.provenance")).transpose()?;
    let seed = obj
        .get("seed")
        .map(|s| {
            s.as_u64().ok_or_else(|| FormatError::Number {
                path: "metadata.seed".into(),
                message: format!("expected an unsigned 64-bit integer, found {s}"),
            })
        })
        .transpose()?;
    Ok(Metadata { description, seed, provenance })
}

/// Parses a document with its metadata.
pub fn parse_document(text: &str) -> Result<ProcmatDocument, FormatError> {
    let root: Value = serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$", &["format_version", "parties", "matrix", "metadata"])?;
    let version = as_string(field(obj, "format_version", "$")?, "$.format_version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version { found: version });
    }

    let parties = as_array(field(obj, "parties", "$")?, "$.parties")?
        .iter()
        .enumerate()
        .map(|(i, p)| parse_party(p, &format!("$.parties[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let layout = PartyLayout::new(parties).map_err(|e| FormatError::Layout(e.to_string()))?;

    let matrix = as_object(field(obj, "matrix", "$")?, "$.matrix", &["dim", "entries"])?;
    let dim = as_dim(field(matrix, "dim", "$.matrix")?, "$.matrix.dim")?;
    if dim != layout.total_dim() {
        return Err(FormatError::Dimension {
            path: "$.matrix.dim".into(),
            message: format!("dim is {dim} but the parties span {}", layout.total_dim()),
        });
    }
    let raw = as_array(field(matrix, "entries", "$.matrix")?, "$.matrix.entries")?;
    if raw.len() != dim * dim {
        return Err(FormatError::Dimension {
            path: "$.matrix.entries".into(),
            message: format!("{} entries, expected dim^2 = {}", raw.len(), dim * dim),
        });
    }
    let mut entries = Vec::with_capacity(raw.len());
    for (k, e) in raw.iter().enumerate() {
        let path = format!("$.matrix.entries[{k}]");
        let pair = as_array(e, &path)?;
        if pair.len() != 2 {
            return Err(FormatError::Type { path, message: "expected an [re, im] pair".into() });
        }
        let re = as_float(&pair[0], &format!("{path}[0]"))?;
        let im = as_float(&pair[1], &format!("{path}[1]"))?;
        entries.push(C64::new(re, im));
    }
    let op = CMatrix::from_entries(dim, entries).expect("length checked");
    let process = ProcessMatrix::new(layout, op).map_err(|e| FormatError::Layout(e.to_string()))?;
    let metadata = obj.get("metadata").map(parse_metadata).transpose()?;
    Ok(ProcmatDocument { process, metadata })
}

pub fn parse(text: &str) -> Result<ProcessMatrix, FormatError> {
    parse_document(text).map(|d| d.process)
}

fn float(x: f64) -> String {
    serde_json::to_string(&x).expect("finite floats serialize")
}

fn string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Canonical text of a document.
pub fn serialize_document(doc: &ProcmatDocument) -> String {
    let w = &doc.process;
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"format_version\": {},", string(FORMAT_VERSION));
    out.push_str("  \"parties\": [\n");
    let parties = w.layout().parties();
    for (i, p) in parties.iter().enumerate() {
        let _ = write!(
            out,
            "    {{\"name\": {}, \"d_in\": {}, \"d_out\": {}",
            string(p.name()),
            p.d_in(),
            p.d_out()
        );
        if p.subparties().len() > 1 {
            let subs: Vec<String> = p.subparties().iter().map(|s| format!("[{}, {}]", s.d_in, s.d_out)).collect();
            let _ = write!(out, ", \"subparties\": [{}]", subs.join(", "));
        }
        out.push('}');
        out.push_str(if i + 1 < parties.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n");
    out.push_str("  \"matrix\": {\n");
    let _ = writeln!(out, "    \"dim\": {},", w.op().dim());
    out.push_str("    \"entries\": [\n");
    let entries = w.op().entries();
    for (k, z) in entries.iter().enumerate() {
        let _ = write!(out, "      [{}, {}]", float(z.re), float(z.im));
        out.push_str(if k + 1 < entries.len() { ",\n" } else { "\n" });
    }
    out.push_str("    ]\n");
    out.push_str("  }");
    if let Some(meta) = doc.metadata.as_ref().filter(|m| !m.is_empty()) {
        let mut fields = Vec::new();
        if let Some(d) = &meta.description {
            fields.push(format!("    \"description\": {}", string(d)));
        }
        if let Some(s) = meta.seed {
            fields.push(format!("    \"seed\": {s}"));
        }
        if let Some(p) = &meta.provenance {
            fields.push(format!("    \"provenance\": {}", string(p)));
        }
        let _ = write!(out, ",\n  \"metadata\": {{\n{}\n  }}", fields.join(",\n"));
    }
    out.push_str("\n}\n");
    out
}

pub fn serialize(w: &ProcessMatrix) -> String {
    serialize_document(&ProcmatDocument { process: w.clone(), metadata: None })
}
