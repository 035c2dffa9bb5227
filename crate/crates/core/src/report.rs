//! Run reports and their canonical JSON form: sorted keys, two-space
//! indentation, and every float written with 17 significant digits, so equal
//! runs produce byte-identical files on any platform.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::matrix::PNorm;

/// Where an OPT reference value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// A closed-form value (e.g. the Hadamard construction).
    Analytic,
    /// The norm of the planted noise, an upper bound on OPT.
    PlantedNoise,
    /// The alternating-minimization oracle, an upper bound on OPT.
    Oracle,
    /// The exact ℓ2 truncation residual.
    Svd,
}

impl ReferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::Analytic => "analytic",
            ReferenceKind::PlantedNoise => "planted-noise",
            ReferenceKind::Oracle => "oracle",
            ReferenceKind::Svd => "svd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub value: f64,
}

/// The JSON payload of a CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub command: String,
    pub shape: (usize, usize),
    pub p: PNorm,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub error: f64,
    pub reference: Option<Reference>,
    pub bound: f64,
    pub passed: bool,
    /// Left out of the JSON unless set; wall time would break
    /// byte-identical reruns.
    pub runtime_ms: Option<u64>,
    /// Command-specific extras (selected subset, guess ladder, ...).
    pub details: BTreeMap<String, Value>,
}

impl ApproxReport {
    pub fn new(command: impl Into<String>, shape: (usize, usize), p: PNorm) -> Self {
        Self {
            command: command.into(),
            shape,
            p,
            k: None,
            seed: None,
            error: 0.0,
            reference: None,
            bound: 1.0,
            passed: true,
            runtime_ms: None,
            details: BTreeMap::new(),
        }
    }

    /// `error / reference`, or `None` without a positive reference.
    pub fn ratio(&self) -> Option<f64> {
        match self.reference {
            Some(r) if r.value > 0.0 => Some(self.error / r.value),
            _ => None,
        }
    }

    pub fn detail(&mut self, key: &str, value: Value) -> &mut Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut inputs = json!({
            "shape": [self.shape.0, self.shape.1],
            "p": pnorm_json(self.p),
        });
        if let Some(k) = self.k {
            inputs["k"] = json!(k);
        }
        if let Some(seed) = self.seed {
            inputs["seed"] = json!(seed);
        }
        let reference = match self.reference {
            Some(r) => json!({ "kind": r.kind.as_str(), "value": float(r.value) }),
            None => Value::Null,
        };
        let mut out = json!({
            "command": self.command,
            "inputs": inputs,
            "error": float(self.error),
            "reference": reference,
            "ratio": self.ratio().map(float).unwrap_or(Value::Null),
            "bound": float(self.bound),
            "passed": self.passed,
        });
        if let Some(ms) = self.runtime_ms {
            out["runtime_ms"] = json!(ms);
        }
        if !self.details.is_empty() {
            out["details"] = Value::Object(self.details.clone().into_iter().collect());
        }
        out
    }

    pub fn to_canonical_string(&self) -> String {
        canonical_json(&self.to_json())
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_canonical_string())
    }
}

/// `p` as a JSON number, or the string `"inf"`.
pub fn pnorm_json(p: PNorm) -> Value {
    match p {
        PNorm::Finite(v) => float(v),
        PNorm::Infinity => Value::String("inf".into()),
    }
}

/// A float as JSON; non-finite values become `null`.
pub fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Serializes `v` with sorted keys and 17-significant-digit floats, ending
/// with a newline.
pub fn canonical_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::default());
    v.serialize(&mut ser).expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Pretty-printing with a fixed float format.
#[derive(Default)]
struct CanonicalFormatter {
    pretty: PrettyFormatter<'static>,
}

fn write_float<W: ?Sized + Write>(w: &mut W, x: f64) -> io::Result<()> {
    if x == 0.0 {
        // Collapse -0 so sign noise in zero residuals cannot change bytes.
        return w.write_all(b"0.0000000000000000e0");
    }
    write!(w, "{x:.16e}")
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write_float(w, value)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write_float(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ApproxReport {
        let mut r = ApproxReport::new("css", (4, 4), PNorm::Infinity);
        r.k = Some(2);
        r.error = 0.1;
        r.bound = 3.0;
        r.reference = Some(Reference {
            kind: ReferenceKind::Analytic,
            value: 0.05,
        });
        r
    }

    #[test]
    fn keys_sorted_floats_fixed() {
        let s = sample().to_canonical_string();
        assert!(s.contains("\"p\": \"inf\""));
        assert!(s.contains("\"error\": 1.0000000000000001e-1"));
        assert!(s.contains("\"ratio\": 2.0000000000000000e0"));
        let b = s.find("\"bound\"").unwrap();
        let c = s.find("\"command\"").unwrap();
        let e = s.find("\"error\"").unwrap();
        assert!(b < c && c < e);
        assert!(!s.contains("runtime_ms"));
    }

    #[test]
    fn zero_reference_gives_null_ratio() {
        let mut r = sample();
        r.reference.as_mut().unwrap().value = 0.0;
        assert_eq!(r.to_json()["ratio"], Value::Null);
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -2.5] {
            let s = canonical_json(&float(x));
            assert_eq!(s.trim().parse::<f64>().unwrap(), x);
        }
        assert_eq!(canonical_json(&float(-0.0)), canonical_json(&float(0.0)));
    }
}
