use std::fmt;
use std::io::Cursor;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The closed set of MIME types the engine recognises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mime {
    Csv,
    Json,
    Xlsx,
    Zip,
    Png,
    Jpeg,
    OctetStream,
}

impl Mime {
    pub const ALL: [Mime; 7] = [
        Mime::Csv,
        Mime::Json,
        Mime::Xlsx,
        Mime::Zip,
        Mime::Png,
        Mime::Jpeg,
        Mime::OctetStream,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mime::Csv => "text/csv",
            Mime::Json => "application/json",
            Mime::Xlsx => "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
            Mime::Zip => "application/zip",
            Mime::Png => "image/png",
            Mime::Jpeg => "image/jpeg",
            Mime::OctetStream => "application/octet-stream",
        }
    }

    pub fn parse(s: &str) -> Option<Mime> {
        Mime::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_tabular(self) -> bool {
        matches!(self, Mime::Csv | Mime::Json | Mime::Xlsx)
    }

    pub fn is_image(self) -> bool {
        matches!(self, Mime::Png | Mime::Jpeg)
    }
}

impl fmt::Display for Mime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Mime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Mime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Mime::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unsupported MIME `{s}`")))
    }
}

pub fn is_supported_mime(s: &str) -> bool {
    Mime::parse(s).is_some()
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";
const JPEG_MAGIC: &[u8] = b"\xFF\xD8\xFF";
const ZIP_LOCAL: &[u8] = b"PK\x03\x04";
const ZIP_EMPTY: &[u8] = b"PK\x05\x06";

const DELIMITERS: [u8; 3] = [b',', b';', b'\t'];
const SNIFF_ROWS: usize = 100;

/// Classifies bytes by content alone.
///
/// Probe order: magic bytes, ZIP container inspection (XLSX before plain
/// ZIP), JSON document, CSV dialect. Anything else is
/// `application/octet-stream`.
pub fn detect_mime(bytes: &[u8]) -> Mime {
    if bytes.starts_with(PNG_MAGIC) {
        return Mime::Png;
    }
    if bytes.starts_with(JPEG_MAGIC) {
        return Mime::Jpeg;
    }
    if bytes.starts_with(ZIP_LOCAL) || bytes.starts_with(ZIP_EMPTY) {
        return if is_xlsx_container(bytes) {
            Mime::Xlsx
        } else {
            Mime::Zip
        };
    }
    let Some(text) = as_text(bytes) else {
        return Mime::OctetStream;
    };
    if is_json_document(text) {
        return Mime::Json;
    }
    if sniff(text).is_some_and(|d| d.accepted) {
        return Mime::Csv;
    }
    Mime::OctetStream
}

fn is_xlsx_container(bytes: &[u8]) -> bool {
    let Ok(archive) = zip::ZipArchive::new(Cursor::new(bytes)) else {
        return false;
    };
    let mut content_types = false;
    let mut xl = false;
    for name in archive.file_names() {
        content_types |= name == "[Content_Types].xml";
        xl |= name.starts_with("xl/");
    }
    content_types && xl
}

/// Valid UTF-8 without control characters other than tab, CR and LF.
fn as_text(bytes: &[u8]) -> Option<&str> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).ok()?;
    if text.trim().is_empty() {
        return None;
    }
    let clean = text
        .chars()
        .all(|c| !c.is_control() || matches!(c, '\t' | '\r' | '\n'));
    clean.then_some(text)
}

// Top-level objects and arrays only: a bare `42` is not a dataset.
fn is_json_document(text: &str) -> bool {
    let t = text.trim_start();
    if !(t.starts_with('{') || t.starts_with('[')) {
        return false;
    }
    serde_json::from_str::<serde_json::Value>(text).is_ok()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dialect {
    pub delimiter: u8,
    pub modal_count: usize,
    pub accepted: bool,
}

fn probe(text: &str, delimiter: u8) -> Option<Dialect> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(text.as_bytes());
    let mut arities: Vec<usize> = Vec::new();
    for rec in reader.records().take(SNIFF_ROWS) {
        arities.push(rec.ok()?.len());
    }
    let mut hist = std::collections::BTreeMap::<usize, usize>::new();
    for a in &arities {
        *hist.entry(*a).or_default() += 1;
    }
    // Ties between arities go to the wider one.
    let (modal_arity, modal_count) = hist
        .iter()
        .max_by_key(|(arity, count)| (**count, **arity))
        .map(|(a, c)| (*a, *c))?;
    let rows = arities.len();
    let accepted = rows >= 2 && modal_arity >= 2 && modal_count * 10 >= rows * 9;
    Some(Dialect {
        delimiter,
        modal_count,
        accepted,
    })
}

pub(crate) fn sniff(text: &str) -> Option<Dialect> {
    let mut best: Option<Dialect> = None;
    for d in DELIMITERS {
        let Some(cand) = probe(text, d) else { continue };
        let better = match best {
            None => true,
            Some(b) => (cand.accepted, cand.modal_count) > (b.accepted, b.modal_count),
        };
        if better {
            best = Some(cand);
        }
    }
    best
}

/// Best delimiter among comma, semicolon and tab; comma when undecided.
pub fn sniff_delimiter(text: &str) -> u8 {
    sniff(text)
        .filter(|d| d.accepted)
        .map_or(b',', |d| d.delimiter)
}
