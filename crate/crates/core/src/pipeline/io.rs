use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::PipelineError;
use crate::table::Table;

pub const ID_COLUMN: &str = "blockgroup_id";

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => PipelineError::io(path, source),
        other => PipelineError::Data(format!("{}: {other:?}", path.display())),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| PipelineError::io(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// Writes a header row even when `rows` is empty.
pub fn write_records(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| PipelineError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| PipelineError::io(path, e))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `blockgroup_id` followed by every column in name order; undefined
/// values are empty fields.
pub fn write_table(path: &Path, table: &Table) -> Result<(), PipelineError> {
    let names: Vec<&str> = table.column_names().collect();
    let cols: Vec<&[Option<f64>]> = names.iter().map(|n| table.column(n).expect("listed column")).collect();
    let mut header = vec![ID_COLUMN];
    header.extend(&names);
    let rows = table.ids().iter().enumerate().map(|(i, id)| {
        let mut r = vec![id.clone()];
        r.extend(cols.iter().map(|c| fmt_opt(c[i])));
        r
    });
    write_records(path, &header, rows)
}

pub fn read_table(path: &Path) -> Result<Table, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some(ID_COLUMN) {
        return Err(PipelineError::Data(format!("{}: first column must be `{ID_COLUMN}`", path.display())));
    }
    let mut ids = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len() - 1];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        ids.push(rec[0].to_string());
        for (j, col) in cols.iter_mut().enumerate() {
            let s = &rec[j + 1];
            let v = if s.is_empty() {
                None
            } else {
                Some(s.parse::<f64>().map_err(|_| PipelineError::Data(format!("{}: bad number `{s}` in `{}`", path.display(), &headers[j + 1])))?)
            };
            col.push(v);
        }
    }
    let mut t = Table::new(ids);
    for (name, col) in headers.iter().skip(1).zip(cols) {
        t.insert(name, col);
    }
    Ok(t)
}
