use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Label, StreamEvent};
use crate::error::{Error, Result};

/// A column addressed by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl ColumnSelector {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize> {
        match self {
            ColumnSelector::Index(i) if *i < headers.len() => Ok(*i),
            ColumnSelector::Index(i) => Err(Error::config(format!(
                "column index {i} out of range ({} columns)",
                headers.len()
            ))),
            ColumnSelector::Name(n) => headers
                .iter()
                .position(|h| h.trim() == n)
                .ok_or_else(|| Error::config(format!("no column named `{n}`"))),
        }
    }
}

impl From<&str> for ColumnSelector {
    fn from(s: &str) -> Self {
        match s.parse() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        }
    }
}

/// Raw label values mapped to normal / outlier. Empty cells mean "unlabeled".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub normal: Vec<String>,
    pub outlier: Vec<String>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping {
            normal: vec!["0".into(), "0.0".into(), "normal".into()],
            outlier: vec!["1".into(), "1.0".into(), "outlier".into()],
        }
    }
}

impl LabelMapping {
    fn map(&self, raw: &str) -> std::result::Result<Option<Label>, String> {
        let raw = raw.trim();
        if raw.is_empty() {
            Ok(None)
        } else if self.normal.iter().any(|v| v == raw) {
            Ok(Some(Label::Normal))
        } else if self.outlier.iter().any(|v| v == raw) {
            Ok(Some(Label::Outlier))
        } else {
            Err(format!("unmapped label value `{raw}`"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub delimiter: char,
    /// Empty means every column except the label column.
    pub feature_columns: Vec<ColumnSelector>,
    pub label_column: Option<ColumnSelector>,
    pub label_mapping: LabelMapping,
    /// Columns ignored when `feature_columns` is empty.
    pub exclude_columns: Vec<ColumnSelector>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: ',',
            feature_columns: Vec::new(),
            label_column: None,
            label_mapping: LabelMapping::default(),
            exclude_columns: Vec::new(),
        }
    }
}

/// Reads a headed CSV file in row order. Row numbers in errors count data
/// rows from 1 (the header is row 0).
pub fn ingest_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Vec<StreamEvent>> {
    let path = path.as_ref();
    if !options.delimiter.is_ascii() {
        return Err(Error::config("csv delimiter must be a single ASCII character"));
    }
    let file = File::open(path).map_err(|e| Error::Data {
        row: 0,
        message: format!("cannot open {}: {e}", path.display()),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let label_idx = options.label_column.as_ref().map(|c| c.resolve(&headers)).transpose()?;
    let feature_idx: Vec<usize> = if options.feature_columns.is_empty() {
        let excluded = options
            .exclude_columns
            .iter()
            .map(|c| c.resolve(&headers))
            .collect::<Result<Vec<_>>>()?;
        (0..headers.len())
            .filter(|i| Some(*i) != label_idx && !excluded.contains(i))
            .collect()
    } else {
        options
            .feature_columns
            .iter()
            .map(|c| c.resolve(&headers))
            .collect::<Result<_>>()?
    };
    if feature_idx.is_empty() {
        return Err(Error::config("no feature columns selected"));
    }

    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Data {
            row,
            message: e.to_string(),
        })?;
        let x_raw = feature_idx
            .iter()
            .map(|&j| {
                let cell = record.get(j).unwrap_or("").trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Data {
                        row,
                        message: format!("non-numeric feature `{cell}` in column `{}`", &headers[j]),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match label_idx {
            Some(j) => options
                .label_mapping
                .map(record.get(j).unwrap_or(""))
                .map_err(|message| Error::Data { row, message })?,
            None => None,
        };
        events.push(StreamEvent {
            index: i as u64,
            x_raw,
            label,
            phase_id: None,
        });
    }
    Ok(events)
}

/// Writes events as `x0..x{D-1},label,phase`; readable by [`ingest_csv`]
/// with `label_column = "label"` and `exclude_columns = ["phase"]`.
pub fn export_csv<'a>(path: impl AsRef<Path>, events: impl IntoIterator<Item = &'a StreamEvent>) -> Result<()> {
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(File::create(path)?));
    let mut header_written = false;
    for e in events {
        if !header_written {
            let mut header: Vec<String> = (0..e.x_raw.len()).map(|j| format!("x{j}")).collect();
            header.push("label".into());
            header.push("phase".into());
            out.write_record(&header)?;
            header_written = true;
        }
        let mut rec: Vec<String> = e.x_raw.iter().map(|v| format!("{v:?}")).collect();
        rec.push(match e.label {
            Some(Label::Normal) => "normal".into(),
            Some(Label::Outlier) => "outlier".into(),
            None => String::new(),
        });
        rec.push(e.phase_id.map(|p| p.to_string()).unwrap_or_default());
        out.write_record(&rec)?;
    }
    out.flush()?;
    out.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn unlabeled_rows() {
        let f = write("a,b\n1,2\n3,4\n5,6\n");
        let ev = ingest_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|e| e.label.is_none()));
        assert_eq!(ev[2].x_raw, vec![5.0, 6.0]);
        assert_eq!(ev[2].index, 2);
    }

    #[test]
    fn empty_file_gives_empty_stream() {
        let f = write("");
        assert!(ingest_csv(f.path(), &CsvOptions::default()).unwrap().is_empty());
        let f = write("a,b\n");
        assert!(ingest_csv(f.path(), &CsvOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn skab_style_labels_and_delimiter() {
        let f = write("datetime;A1;A2;anomaly;changepoint\nt0;0.5;1.5;0.0;0.0\nt1;0.7;1.1;1.0;0.0\n");
        let opts = CsvOptions {
            delimiter: ';',
            feature_columns: vec!["A1".into(), ColumnSelector::Index(2)],
            label_column: Some("anomaly".into()),
            ..CsvOptions::default()
        };
        let ev = ingest_csv(f.path(), &opts).unwrap();
        assert_eq!(ev[0].label, Some(Label::Normal));
        assert_eq!(ev[1].label, Some(Label::Outlier));
        assert_eq!(ev[1].x_raw, vec![0.7, 1.1]);
    }

    #[test]
    fn errors_carry_row() {
        let f = write("a,b\n1,2\n3,x\n");
        match ingest_csv(f.path(), &CsvOptions::default()).unwrap_err() {
            Error::Data { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains('x'));
            }
            e => panic!("unexpected {e}"),
        }
        let f = write("a,l\n1,2\n");
        let opts = CsvOptions {
            label_column: Some("l".into()),
            ..CsvOptions::default()
        };
        assert!(matches!(ingest_csv(f.path(), &opts), Err(Error::Data { row: 1, .. })));
        let f = write("a,b\n1,2\n3\n");
        assert!(matches!(
            ingest_csv(f.path(), &CsvOptions::default()),
            Err(Error::Data { row: 2, .. })
        ));
    }

    #[test]
    fn missing_file_and_unknown_column() {
        assert!(matches!(
            ingest_csv("/nonexistent/file.csv", &CsvOptions::default()),
            Err(Error::Data { row: 0, .. })
        ));
        let f = write("a,b\n1,2\n");
        let opts = CsvOptions {
            feature_columns: vec!["c".into()],
            ..CsvOptions::default()
        };
        assert!(matches!(ingest_csv(f.path(), &opts), Err(Error::Config(_))));
    }

    #[test]
    fn export_roundtrip() {
        let events: Vec<StreamEvent> = super::super::generate(super::super::preset("mild4", 2).unwrap())
            .unwrap()
            .take(500)
            .collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        export_csv(f.path(), &events).unwrap();
        let opts = CsvOptions {
            label_column: Some("label".into()),
            exclude_columns: vec!["phase".into()],
            ..CsvOptions::default()
        };
        let back = ingest_csv(f.path(), &opts).unwrap();
        assert_eq!(back.len(), events.len());
        for (a, b) in events.iter().zip(&back) {
            assert_eq!(a.x_raw, b.x_raw);
            assert_eq!(a.label, b.label);
        }
    }
}
