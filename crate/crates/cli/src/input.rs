//! Data, frequency-set and parameter files.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use sgm_core::estimators::SampleMatrix;
use sgm_core::FrequencySet;

use crate::error::{CliError, CliResult};

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a comma-separated numeric table. A first row with any non-numeric
/// cell is taken as a header.
pub fn read_csv(path: &Path) -> CliResult<SampleMatrix> {
    let text = read_file(path)?;
    parse_csv(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv(text: &str) -> CliResult<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        if r == 0 && record.iter().any(|c| !c.trim().is_empty() && parse_cell(c).is_none()) {
            log::debug!("treating first row as a header");
            continue;
        }
        let line = r + 1;
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let col = c + 1;
            if cell.trim().is_empty() {
                return Err(CliError::Data(format!("blank cell at line {line}, column {col}")));
            }
            match parse_cell(cell) {
                Some(v) if v.is_finite() => row.push(v),
                _ => return Err(CliError::Data(format!("bad number {cell:?} at line {line}, column {col}"))),
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    Ok(SampleMatrix::from_rows(&rows)?)
}

pub fn write_csv(data: &SampleMatrix, header: bool) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Data(e.to_string());
    if header {
        w.write_record((1..=data.m()).map(|j| format!("x{j}"))).map_err(io)?;
    }
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("numeric CSV is ASCII"))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty())
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_freq(line: usize, fields: &[&str]) -> CliResult<Vec<u32>> {
    fields
        .iter()
        .map(|s| s.parse::<u32>().map_err(|_| CliError::Data(format!("line {line}: bad frequency component {s:?}"))))
        .collect()
}

/// `standard` or `file:PATH`, resolved against dimension `dim`.
pub fn resolve_freqs(spec: &str, dim: usize) -> CliResult<FrequencySet> {
    if spec == "standard" {
        return Ok(FrequencySet::standard(dim)?);
    }
    let Some(path) = spec.strip_prefix("file:") else {
        return Err(CliError::Usage(format!("--freqs must be `standard` or `file:PATH`, got {spec:?}")));
    };
    let text = read_file(Path::new(path))?;
    let mut freqs = Vec::new();
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = split_fields(l).collect();
        freqs.push(parse_freq(line, &fields)?);
    }
    if freqs.is_empty() {
        return Err(CliError::Data(format!("{path}: no frequencies")));
    }
    let f = FrequencySet::new(freqs[0].len(), freqs)?;
    if f.dim() != dim {
        return Err(CliError::Data(format!("{path}: frequencies have dimension {}, data has {dim}", f.dim())));
    }
    Ok(f)
}

/// A frequency set with one coefficient per frequency.
#[derive(Debug, Clone)]
pub struct Params {
    pub freqs: FrequencySet,
    pub theta: Vec<f64>,
}

#[derive(Deserialize)]
struct ParamsJson {
    freqs: FrequencySet,
    theta: Vec<f64>,
}

/// Reads parameters either from the JSON written by `fit` (or any object
/// with `freqs` and `theta`, possibly under `result`) or from text lines
/// `u_1 … u_m θ_u`.
pub fn read_params(path: &Path) -> CliResult<Params> {
    let text = read_file(path)?;
    let bad = |m: String| CliError::Data(format!("{}: {m}", path.display()));
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let obj = if v.get("theta").is_some() { &v } else { v.get("result").unwrap_or(&v) };
        let p: ParamsJson = serde_json::from_value(obj.clone()).map_err(|e| bad(e.to_string()))?;
        if p.theta.len() != p.freqs.len() {
            return Err(bad(format!("{} coefficients for {} frequencies", p.theta.len(), p.freqs.len())));
        }
        return Ok(Params { freqs: p.freqs, theta: p.theta });
    }
    let mut pairs = Vec::new();
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = split_fields(l).collect();
        let Some((last, head)) = fields.split_last().filter(|(_, h)| !h.is_empty()) else {
            return Err(bad(format!("line {line}: expected frequency components then a coefficient")));
        };
        let theta = last.parse::<f64>().ok().filter(|t| t.is_finite());
        let theta = theta.ok_or_else(|| bad(format!("line {line}: bad coefficient {last:?}")))?;
        pairs.push((parse_freq(line, head)?, theta));
    }
    if pairs.is_empty() {
        return Err(bad("no parameters".into()));
    }
    let freqs = FrequencySet::new(pairs[0].0.len(), pairs.iter().map(|p| p.0.clone()).collect())?;
    let mut theta = vec![0.0; freqs.len()];
    for (u, t) in &pairs {
        theta[freqs.index_of(u).expect("present after construction")] = *t;
    }
    Ok(Params { freqs, theta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        let a = parse_csv("x,y\n0.1,0.2\n0.3,0.4\n").unwrap();
        let b = parse_csv("0.1,0.2\n0.3,0.4\n").unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.n(), 2);
    }

    #[test]
    fn blank_and_ragged_rows_are_errors() {
        assert!(matches!(parse_csv("0.1,\n0.3,0.4\n"), Err(CliError::Data(m)) if m.contains("blank")));
        assert!(matches!(parse_csv("0.1,0.2\n0.3\n"), Err(CliError::Data(_))));
        assert!(matches!(parse_csv("0.1,nan\n"), Err(CliError::Data(_))));
        assert!(matches!(parse_csv("a,b\n"), Err(CliError::Data(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = SampleMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![0.0, 1.0]]).unwrap();
        let back = parse_csv(&write_csv(&d, true).unwrap()).unwrap();
        assert_eq!(back.values(), d.values());
    }
}
