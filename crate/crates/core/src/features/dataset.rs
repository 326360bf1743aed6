//! Labeled dataset assembly and its CSV form (23 feature columns + `label`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DatasetError, FeatureVector, Label, FEATURE_COUNT, FEATURE_NAMES};

/// Truncates the longer class from its tail so both classes have equal
/// counts, then concatenates VR rows followed by Non-VR rows.
pub fn balance_dataset(
    vr: &[FeatureVector],
    nonvr: &[FeatureVector],
) -> Result<Vec<FeatureVector>, DatasetError> {
    if vr.is_empty() {
        return Err(DatasetError::EmptyClass("no VR samples"));
    }
    if nonvr.is_empty() {
        return Err(DatasetError::EmptyClass("no Non-VR samples"));
    }
    let n = vr.len().min(nonvr.len());
    let mut rows = Vec::with_capacity(2 * n);
    rows.extend(vr[..n].iter().map(|r| r.with_label(Some(Label::Vr))));
    rows.extend(nonvr[..n].iter().map(|r| r.with_label(Some(Label::NonVr))));
    Ok(rows)
}

pub fn emit_dataset_csv<W: Write>(rows: &[FeatureVector], out: W) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_writer(out);
    let header = FEATURE_NAMES.iter().copied().chain(std::iter::once("label"));
    writer.write_record(header).map_err(csv_io)?;
    for row in rows {
        // `{}` on f64 prints the shortest representation that parses back
        // to the same value.
        let fields = row
            .values
            .iter()
            .map(|v| v.to_string())
            .chain(std::iter::once(
                row.label.map(|l| l.as_u8().to_string()).unwrap_or_default(),
            ));
        writer.write_record(fields).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::Row {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a dataset. Columns may appear in any order; lines starting with
/// `#` are skipped. An empty `label` cell means unlabeled.
pub fn load_dataset_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Row {
            line: e.position().map(|p| p.line()).unwrap_or(1),
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let expected: Vec<&str> = FEATURE_NAMES.iter().copied().chain(std::iter::once("label")).collect();
    let missing: Vec<String> = expected
        .iter()
        .filter(|e| !names.contains(e))
        .map(|s| s.to_string())
        .collect();
    let extra: Vec<String> = names
        .iter()
        .filter(|n| !expected.contains(n))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(DatasetError::Header { missing, extra });
    }
    let column: Vec<usize> = expected
        .iter()
        .map(|e| names.iter().position(|n| n == e).expect("checked above"))
        .collect();

    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| DatasetError::Row {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut values = [0.0; FEATURE_COUNT];
        for (i, value) in values.iter_mut().enumerate() {
            let cell = &record[column[i]];
            *value = cell.trim().parse::<f64>().map_err(|_| DatasetError::Row {
                line,
                message: format!("column {}: not a number: {cell:?}", FEATURE_NAMES[i]),
            })?;
        }
        let label_cell = record[column[FEATURE_COUNT]].trim();
        let label = if label_cell.is_empty() {
            None
        } else {
            let parsed = label_cell
                .parse::<u8>()
                .ok()
                .and_then(Label::from_u8)
                .ok_or_else(|| DatasetError::Row {
                    line,
                    message: format!("label must be 0 or 1, found {label_cell:?}"),
                })?;
            Some(parsed)
        };
        rows.push(FeatureVector { values, label });
    }
    Ok(rows)
}

pub fn write_dataset_csv(rows: &[FeatureVector], path: &Path) -> Result<(), DatasetError> {
    emit_dataset_csv(rows, BufWriter::new(File::create(path)?))
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<FeatureVector>, DatasetError> {
    load_dataset_csv(BufReader::new(File::open(path)?))
}
