//! Result tables and their CSV / JSON files.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => f.write_str(&format_sig6(*v)),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

/// Six significant digits, fixed notation for moderate exponents and
/// scientific otherwise, trailing zeros removed.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..6).contains(&exp) {
        // re-round through the mantissa so fixed and scientific agree
        let rounded: f64 = sci.parse().expect("round trip");
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{}", trim(mant), exp)
    }
}

/// Rounds to the value that [`format_sig6`] prints.
pub fn round_sig6(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format_sig6(v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Written as `# key: value` lines ahead of the table.
    pub metadata: Vec<(String, String)>,
}

impl ExperimentResult {
    pub fn new(id: &str, columns: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Rows whose string/bool columns match all `(column, value)` filters.
    pub fn select(&self, filters: &[(&str, &str)]) -> Vec<&Vec<Value>> {
        let idx: Vec<(usize, &str)> =
            filters.iter().filter_map(|(c, v)| self.column(c).map(|i| (i, *v))).collect();
        self.rows
            .iter()
            .filter(|r| idx.iter().all(|(i, v)| r[*i].to_string() == *v))
            .collect()
    }

    pub fn float(&self, row: &[Value], column: &str) -> Option<f64> {
        match row.get(self.column(column)?)? {
            Value::Float(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
            }
            w.flush()?;
        }
        String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        use serde_json::{json, Map, Value as J};
        let meta: Map<String, J> = self.metadata.iter().map(|(k, v)| (k.clone(), J::String(v.clone()))).collect();
        let rows: Vec<J> = self
            .rows
            .iter()
            .map(|r| {
                J::Array(
                    r.iter()
                        .map(|v| match v {
                            Value::Str(s) => J::String(s.clone()),
                            Value::Int(i) => json!(i),
                            Value::Bool(b) => J::Bool(*b),
                            Value::Float(f) if f.is_finite() => json!(round_sig6(*f)),
                            Value::Float(f) => J::String(format_sig6(*f)),
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = json!({
            "experiment": self.id,
            "metadata": J::Object(meta),
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes `result` to `path`.
pub fn emit_results(result: &ExperimentResult, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => result.to_csv_string()?,
        Format::Json => result.to_json_string()?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// A CSV file read back as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(text: &str) -> Result<ParsedTable> {
    let mut metadata = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(": ").unwrap_or((rest, ""));
            metadata.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok(ParsedTable { metadata, columns, rows })
}
