use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use trigfree::infer::Dataset;

use crate::error::{CliError, Result};
use crate::output::num;

/// How to read a CSV into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Schema {
    pub response: String,
    /// Categorical columns, expanded to indicators with the first level dropped.
    pub factors: Vec<String>,
    /// Columns to keep besides the response; all of them when `None`.
    pub columns: Option<Vec<String>>,
}

const MISSING: [&str; 4] = ["", "NA", "NaN", "."];

pub fn csv_ingest(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    ingest_reader(file, schema)
}

/// Levels in sorted order: numerically when every level is a number.
fn sorted_levels(values: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = values.iter().collect();
    let mut levels: Vec<String> = set.into_iter().cloned().collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut paired: Vec<(f64, String)> = keys.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = paired.into_iter().map(|p| p.1).collect();
    }
    levels
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let parse_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        CliError::Parse { line, column: String::new(), message: e.to_string() }
    };
    let header: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::usage(format!("column '{name}' is not in the header")))
    };
    let response_at = find(&schema.response)?;
    for f in &schema.factors {
        find(f)?;
    }
    let kept: Vec<usize> = match &schema.columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != response_at).collect(),
    };
    if kept.contains(&response_at) {
        return Err(CliError::usage("the response cannot also be a covariate"));
    }
    for f in &schema.factors {
        if !kept.contains(&find(f)?) {
            return Err(CliError::usage(format!("factor '{f}' is not among the selected columns")));
        }
    }

    let mut responses = Vec::new();
    let mut lines = Vec::new();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); kept.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        lines.push(line);
        let field = |i: usize| -> Result<&str> {
            let v = rec.get(i).unwrap_or("");
            if MISSING.contains(&v) {
                return Err(CliError::Parse { line, column: header[i].clone(), message: "missing value".into() });
            }
            Ok(v)
        };
        let y = field(response_at)?;
        let bad_y = |msg: &str| CliError::Parse { line, column: header[response_at].clone(), message: format!("{msg} '{y}'") };
        let v: f64 = y.parse().map_err(|_| bad_y("non-numeric response"))?;
        if !(v >= 0.0 && v.fract() == 0.0 && v <= 9_007_199_254_740_992.0) {
            return Err(bad_y("response must be a non-negative integer, got"));
        }
        responses.push(v as u64);
        for (slot, &i) in raw.iter_mut().zip(&kept) {
            slot.push(field(i)?.to_string());
        }
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (values, &i) in raw.iter().zip(&kept) {
        let name = &header[i];
        if schema.factors.contains(name) {
            for level in sorted_levels(values).into_iter().skip(1) {
                names.push(format!("{name}{level}"));
                columns.push(values.iter().map(|v| if *v == level { 1.0 } else { 0.0 }).collect());
            }
        } else {
            let mut col = Vec::with_capacity(values.len());
            for (row, v) in values.iter().enumerate() {
                let x: f64 = v.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| CliError::Parse {
                    line: lines[row],
                    column: name.clone(),
                    message: format!("non-numeric value '{v}' (declare the column as a factor)"),
                })?;
                col.push(x);
            }
            names.push(name.clone());
            columns.push(col);
        }
    }
    Ok(Dataset::new(responses, names, columns)?)
}

/// CSV text with the response first and then every covariate column.
pub fn emit(data: &Dataset, response: &str) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let mut header = vec![response.to_string()];
    header.extend(data.names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for i in 0..data.n() {
        let mut row = vec![data.responses[i].to_string()];
        row.extend(data.columns.iter().map(|c| num(c[i])));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
