use std::io::Cursor;

use calamine::{Data, Reader};
use thiserror::Error;

use super::artifact::FileArtifact;
use super::mime::{detect_mime, sniff_delimiter, Mime};
use crate::table::{format_number, TableError, TabularDataset};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{0} is not a tabular format")]
    UnsupportedMime(Mime),
    #[error("record {record} has {got} fields, header has {expected}")]
    RaggedRows {
        record: usize,
        expected: usize,
        got: usize,
    },
    #[error("table has no header row")]
    EmptyTable,
    #[error("unsupported sheet: {0}")]
    UnsupportedSheet(String),
    #[error("text is not valid UTF-8")]
    InvalidEncoding,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Parses CSV, JSON (array of objects) or XLSX (first sheet) into a table.
pub fn parse_tabular(artifact: &FileArtifact) -> Result<TabularDataset, ParseError> {
    let mime = artifact.mime.unwrap_or_else(|| detect_mime(&artifact.bytes));
    match mime {
        Mime::Csv => parse_csv(&artifact.bytes),
        Mime::Json => parse_json(&artifact.bytes),
        Mime::Xlsx => parse_xlsx(&artifact.bytes),
        other => Err(ParseError::UnsupportedMime(other)),
    }
}

fn parse_csv(bytes: &[u8]) -> Result<TabularDataset, ParseError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError::InvalidEncoding)?;
    let delimiter = sniff_delimiter(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let headers: Vec<String> = match records.next() {
        Some(r) => r
            .map_err(|e| ParseError::Malformed(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect(),
        None => return Err(ParseError::EmptyTable),
    };
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| ParseError::Malformed(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(ParseError::RaggedRows {
                record: i + 1,
                expected: headers.len(),
                got: rec.len(),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(TabularDataset::from_rows(headers, rows)?)
}

fn json_cell(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

fn parse_json(bytes: &[u8]) -> Result<TabularDataset, ParseError> {
    use serde_json::Value;
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(ParseError::Malformed(
            "expected a top-level array of objects".into(),
        ));
    };
    let mut headers: Vec<String> = Vec::new();
    let mut objects = Vec::with_capacity(items.len());
    for item in items {
        let Value::Object(map) = item else {
            return Err(ParseError::Malformed("array element is not an object".into()));
        };
        for k in map.keys() {
            if !headers.contains(k) {
                headers.push(k.clone());
            }
        }
        objects.push(map);
    }
    if headers.is_empty() {
        return Err(ParseError::EmptyTable);
    }
    let rows = objects
        .iter()
        .map(|o| {
            headers
                .iter()
                .map(|h| o.get(h).map(json_cell).unwrap_or_default())
                .collect()
        })
        .collect();
    Ok(TabularDataset::from_rows(headers, rows)?)
}

fn xlsx_cell(d: &Data) -> String {
    match d {
        Data::Empty => String::new(),
        Data::String(s) => s.clone(),
        Data::Int(i) => i.to_string(),
        Data::Float(f) => format_number(*f),
        Data::Bool(b) => b.to_string(),
        Data::DateTime(dt) => format_number(dt.as_f64()),
        Data::DateTimeIso(s) | Data::DurationIso(s) => s.clone(),
        Data::Error(e) => format!("#{e:?}"),
    }
}

fn parse_xlsx(bytes: &[u8]) -> Result<TabularDataset, ParseError> {
    let mut wb = calamine::Xlsx::new(Cursor::new(bytes))
        .map_err(|e| ParseError::Malformed(e.to_string()))?;
    let range = wb
        .worksheet_range_at(0)
        .ok_or_else(|| ParseError::UnsupportedSheet("workbook has no worksheets".into()))?
        .map_err(|e| ParseError::UnsupportedSheet(e.to_string()))?;
    let mut rows = range.rows();
    let headers: Vec<String> = rows
        .next()
        .ok_or(ParseError::EmptyTable)?
        .iter()
        .map(xlsx_cell)
        .collect();
    let body = rows.map(|r| r.iter().map(xlsx_cell).collect()).collect();
    Ok(TabularDataset::from_rows(headers, body)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> FileArtifact {
        FileArtifact::new("t.csv", text.as_bytes().to_vec()).with_mime(Mime::Csv)
    }

    #[test]
    fn csv_basic() {
        let t = parse_tabular(&csv("a,b\n1,2")).unwrap();
        assert_eq!(t.headers(), vec!["a", "b"]);
        assert_eq!(t.columns()[0].cells, vec!["1"]);
        assert_eq!(t.columns()[1].cells, vec!["2"]);
    }

    #[test]
    fn json_matches_csv() {
        let j = FileArtifact::new("t.json", br#"[{"a":1,"b":2}]"#.to_vec());
        assert_eq!(parse_tabular(&j).unwrap(), parse_tabular(&csv("a,b\n1,2")).unwrap());
    }

    #[test]
    fn json_missing_keys_are_null() {
        let j = FileArtifact::new("t.json", br#"[{"a":1},{"b":"x","a":null}]"#.to_vec());
        let t = parse_tabular(&j).unwrap();
        assert_eq!(t.headers(), vec!["a", "b"]);
        assert_eq!(t.columns()[0].cells, vec!["1", ""]);
        assert_eq!(t.columns()[1].cells, vec!["", "x"]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_tabular(&csv("a,b\n1,2\n1,2,3\n")).unwrap_err();
        assert!(matches!(err, ParseError::RaggedRows { expected: 2, got: 3, .. }));
    }

    #[test]
    fn empty_table() {
        assert_eq!(parse_tabular(&csv("")), Err(ParseError::EmptyTable));
        let j = FileArtifact::new("t.json", b"[]".to_vec()).with_mime(Mime::Json);
        assert_eq!(parse_tabular(&j), Err(ParseError::EmptyTable));
    }

    #[test]
    fn non_tabular_mime() {
        let p = FileArtifact::new("x", vec![0]).with_mime(Mime::Png);
        assert_eq!(parse_tabular(&p), Err(ParseError::UnsupportedMime(Mime::Png)));
    }

    #[test]
    fn header_only_csv_has_zero_rows() {
        let t = parse_tabular(&csv("a,b\n")).unwrap();
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.n_rows(), 0);
    }
}
