//! JSON input formats and the provenance header carried by every artifact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::braid::{BraidWord, Unitriangular};
use crate::error::{Error, Result};
use crate::rational::{parse_q, QMatrix};
use crate::spectrum::Spectrum;
use crate::C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    u: Vec<[f64; 2]>,
}

pub fn parse_spectrum(text: &str) -> Result<Spectrum> {
    let s: SpectrumJson = serde_json::from_str(text).map_err(|e| Error::Parse(format!("spectrum: {e}")))?;
    if s.u.is_empty() {
        return Err(Error::Parse("spectrum: empty".into()));
    }
    Spectrum::new(s.u.iter().map(|[re, im]| C64::new(*re, *im)).collect())
}

pub fn spectrum_json(spec: &Spectrum) -> Value {
    let u: Vec<[f64; 2]> = spec.u().iter().map(|z| [z.re, z.im]).collect();
    serde_json::to_value(SpectrumJson { u }).expect("plain data")
}

fn entry(v: &Value) -> Result<crate::rational::Q> {
    match v {
        Value::String(s) => parse_q(s),
        Value::Number(n) => parse_q(&n.to_string()),
        other => Err(Error::Parse(format!("matrix entry {other}"))),
    }
}

pub fn parse_matrix(text: &str) -> Result<QMatrix> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix: {e}")))?;
    let rows = v.as_array().ok_or_else(|| Error::Parse("matrix: expected array of rows".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let r = r.as_array().ok_or_else(|| Error::Parse("matrix: expected array row".into()))?;
        out.push(r.iter().map(entry).collect::<Result<Vec<_>>>()?);
    }
    QMatrix::from_rows(out)
}

pub fn parse_unitriangular(text: &str) -> Result<Unitriangular> {
    Unitriangular::new(parse_matrix(text)?)
}

/// Rows of exact rationals as strings.
pub fn matrix_json(m: &QMatrix) -> Value {
    Value::Array(
        m.rows()
            .iter()
            .map(|r| Value::Array(r.iter().map(|q| Value::String(q.to_string())).collect()))
            .collect(),
    )
}

pub fn parse_word(text: &str) -> Result<BraidWord> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("braid word: {e}")))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs_sha256: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub parameters: BTreeMap<String, Value>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance { tool: "ttstar".into(), version: VERSION.into(), command: command.into(), ..Default::default() }
    }

    pub fn input(mut self, name: &str, contents: &str) -> Self {
        self.inputs_sha256.insert(name.into(), sha256_hex(contents.as_bytes()));
        self
    }

    pub fn tol(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.into(), v);
        self
    }

    pub fn param(mut self, name: &str, v: impl Serialize) -> Self {
        self.parameters.insert(name.into(), serde_json::to_value(v).expect("serializable"));
        self
    }
}

/// `{"provenance": ..., <report fields>}`.
pub fn with_provenance(prov: &Provenance, report: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("provenance".into(), serde_json::to_value(prov).expect("plain data"));
    match report {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("report".into(), other);
        }
    }
    Value::Object(out)
}

pub fn to_json_string(v: &Value, indent: usize) -> String {
    if indent == 0 {
        return serde_json::to_string(v).expect("valid json");
    }
    let pad = vec![b' '; indent];
    let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    v.serialize(&mut ser).expect("valid json");
    String::from_utf8(buf).expect("utf8")
}
