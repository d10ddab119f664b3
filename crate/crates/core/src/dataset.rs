//! Dataset CSV: `model,p1,p2,degenerate,<features>,label`, one row per point.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{feature_count, feature_names, FeatureRow};
use crate::labels::{format_float, format_params, parse_float, parse_params};

fn bad(detail: String) -> Error {
    Error::Format { what: "dataset", detail }
}

pub fn header(site_count: usize) -> Vec<String> {
    let mut h: Vec<String> = ["model", "p1", "p2", "degenerate"].map(String::from).into();
    h.extend(feature_names(site_count));
    h.push("label".into());
    h
}

/// Site count implied by a header, if it has the dataset layout.
fn site_count_of(header: &[&str]) -> Option<usize> {
    let n_features = header.len().checked_sub(5)?;
    let n = (n_features.checked_sub(3)? / 3).checked_sub(1)? * 2;
    (n >= 2 && feature_count(n) == n_features && header == header_refs(&self::header(n))).then_some(n)
}

fn header_refs(h: &[String]) -> Vec<&str> {
    h.iter().map(String::as_str).collect()
}

/// Writes rows that share one site count. An empty slice writes nothing.
pub fn write_dataset<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let Some(first) = rows.first() else { return Ok(()) };
    let n = first.site_count;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n))?;
    let mut rec: Vec<String> = Vec::with_capacity(feature_count(n) + 5);
    for row in rows {
        if row.site_count != n || row.features.len() != feature_count(n) {
            return Err(bad(format!("row {} has N = {}, expected {n}", row.params, row.site_count)));
        }
        rec.clear();
        rec.push(row.model().name().to_string());
        rec.extend(format_params(&row.params));
        rec.push(row.degenerate.to_string());
        rec.extend(row.features.iter().map(|x| format_float(*x)));
        rec.push(row.label.map(|l| l.as_str().to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let h = r.headers()?.clone();
    let cols: Vec<&str> = h.iter().collect();
    let n = site_count_of(&cols).ok_or_else(|| {
        bad(format!("unexpected header (got {} columns starting {:?})", cols.len(), cols.iter().take(5).collect::<Vec<_>>()))
    })?;
    let width = cols.len();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(bad(format!("line {line}: {} columns, expected {width}", rec.len())));
        }
        let params = parse_params(&rec[0], &rec[1], &rec[2], "dataset")?;
        let degenerate = match &rec[3] {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("line {line}: degenerate flag {other:?}"))),
        };
        let features = (4..width - 1).map(|j| parse_float(&rec[j], "dataset")).collect::<Result<Vec<_>>>()?;
        let label = match &rec[width - 1] {
            "" => None,
            s => Some(s.parse()?),
        };
        if let Some(l) = label {
            crate::labels::check_compatible(params.model(), l)?;
        }
        rows.push(FeatureRow { params, site_count: n, features, degenerate, label });
    }
    Ok(rows)
}

pub fn save_dataset(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(f, rows)
}

pub fn load_dataset(path: &Path) -> Result<Vec<FeatureRow>> {
    read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}
