//! JSON envelope shared by every command.
//!
//! Floats are written with 17 significant digits. Non-finite floats become
//! `null` and their location is listed under `nonfinite`.

use std::io::{self, Write};
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Number, Value};
use serde_value::Value as Raw;

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

struct Digits17(PrettyFormatter<'static>);

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Renders `v` with 17 significant digits per float.
pub fn to_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("serializing a JSON value into memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// A non-finite float replaced by `null`.
#[derive(Debug, Clone, Serialize)]
pub struct NonFinite {
    pub path: String,
    pub value: String,
}

fn float(v: f64, path: &str, flags: &mut Vec<NonFinite>) -> Value {
    match Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None => {
            flags.push(NonFinite { path: path.to_string(), value: v.to_string() });
            Value::Null
        }
    }
}

fn key_name(k: &Raw) -> String {
    match k {
        Raw::String(s) => s.clone(),
        other => match convert(other, "", &mut Vec::new()) {
            Value::String(s) => s,
            v => v.to_string(),
        },
    }
}

fn convert(v: &Raw, path: &str, flags: &mut Vec<NonFinite>) -> Value {
    match v {
        Raw::Bool(b) => Value::Bool(*b),
        Raw::U8(x) => json!(x),
        Raw::U16(x) => json!(x),
        Raw::U32(x) => json!(x),
        Raw::U64(x) => json!(x),
        Raw::I8(x) => json!(x),
        Raw::I16(x) => json!(x),
        Raw::I32(x) => json!(x),
        Raw::I64(x) => json!(x),
        Raw::F32(x) => float(*x as f64, path, flags),
        Raw::F64(x) => float(*x, path, flags),
        Raw::Char(c) => Value::String(c.to_string()),
        Raw::String(s) => Value::String(s.clone()),
        Raw::Unit | Raw::Option(None) => Value::Null,
        Raw::Option(Some(inner)) | Raw::Newtype(inner) => convert(inner, path, flags),
        Raw::Seq(items) => Value::Array(
            items.iter().enumerate().map(|(i, x)| convert(x, &format!("{path}[{i}]"), flags)).collect(),
        ),
        Raw::Map(m) => {
            let mut out = Map::new();
            for (k, x) in m {
                let name = key_name(k);
                let child = if path.is_empty() { name.clone() } else { format!("{path}.{name}") };
                out.insert(name, convert(x, &child, flags));
            }
            Value::Object(out)
        }
        Raw::Bytes(b) => Value::Array(b.iter().map(|x| json!(x)).collect()),
    }
}

/// Converts any serializable value, recording non-finite floats under `root`.
pub fn value_of<T: Serialize>(t: &T, root: &str, flags: &mut Vec<NonFinite>) -> CliResult<Value> {
    let raw = serde_value::to_value(t).map_err(|e| CliError::Numerical(format!("cannot serialize output: {e}")))?;
    Ok(convert(&raw, root, flags))
}

/// Writes the versioned result document to `output` or standard output.
pub fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
    elapsed: Duration,
    output: Option<&Path>,
) -> CliResult<()> {
    let mut flags = Vec::new();
    let config = value_of(config, "config", &mut flags)?;
    let result = value_of(result, "result", &mut flags)?;
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert("command".into(), json!(command));
    doc.insert("config".into(), config);
    doc.insert("result".into(), result);
    doc.insert("nonfinite".into(), serde_json::to_value(&flags).expect("plain strings"));
    doc.insert("timing".into(), json!({ "wall_seconds": elapsed.as_secs_f64() }));
    write_text(output, &to_string(&Value::Object(doc)))
}

pub fn write_text(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
