//! Fixture generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Cursor, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use medpipe::anonymize::PiiKind;
use medpipe::ingest::FileArtifact;
use medpipe::matching::{ModelDatabase, ModelDescriptor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zip::write::SimpleFileOptions;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// containers

/// Builds a stored ZIP from `(name, bytes)` entries.
pub fn zip_of(entries: &[(&str, &[u8])]) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for (name, bytes) in entries {
        w.start_file(*name, opts).unwrap();
        w.write_all(bytes).unwrap();
    }
    w.finish().unwrap().into_inner()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn col_letter(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

/// Minimal single-sheet workbook. Numeric-looking cells are written as
/// numbers, everything else through the shared string table.
pub fn xlsx_of(headers: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut shared: Vec<String> = Vec::new();
    let mut sheet = String::from(
        r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main"><sheetData>"#,
    );
    let all_rows = std::iter::once(headers.iter().map(|h| h.to_string()).collect::<Vec<_>>()).chain(rows.iter().cloned());
    for (r, row) in all_rows.enumerate() {
        sheet.push_str(&format!(r#"<row r="{}">"#, r + 1));
        for (c, cell) in row.iter().enumerate() {
            let at = format!("{}{}", col_letter(c), r + 1);
            if cell.is_empty() {
                continue;
            }
            if r > 0 && cell.parse::<f64>().is_ok() {
                sheet.push_str(&format!(r#"<c r="{at}"><v>{cell}</v></c>"#));
            } else {
                let idx = shared.iter().position(|s| s == cell).unwrap_or_else(|| {
                    shared.push(cell.clone());
                    shared.len() - 1
                });
                sheet.push_str(&format!(r#"<c r="{at}" t="s"><v>{idx}</v></c>"#));
            }
        }
        sheet.push_str("</row>");
    }
    sheet.push_str("</sheetData></worksheet>");
    let mut sst = format!(
        r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><sst xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" count="{0}" uniqueCount="{0}">"#,
        shared.len()
    );
    for s in &shared {
        sst.push_str(&format!("<si><t>{}</t></si>", xml_escape(s)));
    }
    sst.push_str("</sst>");

    let content_types = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types"><Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/><Default Extension="xml" ContentType="application/xml"/><Override PartName="/xl/workbook.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/><Override PartName="/xl/worksheets/sheet1.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/><Override PartName="/xl/sharedStrings.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml"/></Types>"#;
    let rels = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships"><Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="xl/workbook.xml"/></Relationships>"#;
    let workbook = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships"><sheets><sheet name="Sheet1" sheetId="1" r:id="rId1"/></sheets></workbook>"#;
    let wb_rels = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?><Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships"><Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" Target="worksheets/sheet1.xml"/><Relationship Id="rId2" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings" Target="sharedStrings.xml"/></Relationships>"#;
    zip_of(&[
        ("[Content_Types].xml", content_types.as_bytes()),
        ("_rels/.rels", rels.as_bytes()),
        ("xl/workbook.xml", workbook.as_bytes()),
        ("xl/_rels/workbook.xml.rels", wb_rels.as_bytes()),
        ("xl/worksheets/sheet1.xml", sheet.as_bytes()),
        ("xl/sharedStrings.xml", sst.as_bytes()),
    ])
}

fn gradient(w: u32, h: u32, seed: u8) -> image::RgbImage {
    image::RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([
            (x * 7 + u32::from(seed)) as u8,
            (y * 5 + u32::from(seed) * 3) as u8,
            ((x + y) as u8).wrapping_mul(seed | 1),
        ])
    })
}

pub fn png_bytes(w: u32, h: u32, seed: u8) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    gradient(w, h, seed).write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn jpeg_bytes(w: u32, h: u32, seed: u8) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    gradient(w, h, seed).write_to(&mut out, image::ImageFormat::Jpeg).unwrap();
    out.into_inner()
}

pub fn random_csv(r: &mut ChaCha8Rng, delimiter: char) -> Vec<u8> {
    let cols = r.gen_range(2..6);
    let rows = r.gen_range(3..12);
    let mut s = (0..cols).map(|c| format!("col_{c}")).collect::<Vec<_>>().join(&delimiter.to_string());
    s.push('\n');
    for _ in 0..rows {
        let line: Vec<String> = (0..cols).map(|_| r.gen_range(0..1000).to_string()).collect();
        s.push_str(&line.join(&delimiter.to_string()));
        s.push('\n');
    }
    s.into_bytes()
}

pub fn random_json(r: &mut ChaCha8Rng) -> Vec<u8> {
    let rows: Vec<serde_json::Value> = (0..r.gen_range(1..8))
        .map(|i| serde_json::json!({"id": i, "score": r.gen_range(0.0..1.0), "label": format!("l{}", r.gen_range(0..3))}))
        .collect();
    serde_json::to_vec_pretty(&rows).unwrap()
}

pub fn random_xlsx(r: &mut ChaCha8Rng) -> Vec<u8> {
    let rows: Vec<Vec<String>> = (0..r.gen_range(2..8))
        .map(|_| vec![r.gen_range(0..90).to_string(), ["F", "M"][r.gen_range(0..2)].to_string()])
        .collect();
    xlsx_of(&["age", "gender"], &rows)
}

/// Nested ZIP, `depth` archive levels deep, with `leaves` non-archive files
/// spread across the levels. Returns the bytes and the leaf names in
/// depth-first entry order.
pub fn nested_zip(depth: usize, leaves: usize) -> (Vec<u8>, Vec<String>) {
    assert!(depth >= 1 && leaves >= depth);
    let per_level = leaves / depth;
    let mut counts = vec![per_level; depth];
    counts[depth - 1] += leaves - per_level * depth;
    let mut r = rng(99);
    let mut inner: Option<Vec<u8>> = None;
    let mut names_by_level: Vec<Vec<String>> = vec![Vec::new(); depth];
    for level in (0..depth).rev() {
        let mut entries: Vec<(String, Vec<u8>)> = Vec::new();
        for k in 0..counts[level] {
            let name = format!("l{level}_f{k}.dat");
            let bytes = match k % 3 {
                0 => random_csv(&mut r, ','),
                1 => random_json(&mut r),
                _ => png_bytes(8, 8, k as u8),
            };
            names_by_level[level].push(name.clone());
            entries.push((name, bytes));
        }
        if let Some(z) = inner.take() {
            entries.push((format!("inner_{}.zip", level + 1), z));
        }
        let refs: Vec<(&str, &[u8])> = entries.iter().map(|(n, b)| (n.as_str(), b.as_slice())).collect();
        inner = Some(zip_of(&refs));
    }
    let order = names_by_level.into_iter().flatten().collect();
    (inner.unwrap(), order)
}

// ---------------------------------------------------------------------------
// PII corpora

const GIVEN: &[&str] = &[
    "Aaron", "Abigail", "Adam", "Alice", "Amanda", "Andrew", "Angela", "Anna", "Arthur", "Barbara", "Benjamin",
    "Brenda", "Brian", "Carlos", "Carol", "Charles", "Charlotte", "Christine", "Cynthia",
];
const SURNAMES: &[&str] = &[
    "Okafor", "Lindqvist", "Moreau", "Tanaka", "Whitfield", "Novak", "Ferreira", "Brennan", "Kowalski", "Haddad",
    "Abernathy", "Quintero", "Ostrowski", "Van", "Delacroix",
];
const MONTHS: &[&str] = &[
    "Jan", "February", "Mar", "April", "May", "June", "Jul", "August", "Sep", "October", "Nov", "December",
];
const WORDS: &[&str] = &[
    "stable", "reviewed", "dose", "follow", "up", "clinic", "ward", "mild", "nausea", "reported", "scan", "normal",
    "left", "knee", "pain", "score", "improved", "visit", "completed", "therapy",
];

/// Column header that puts a kind's detector in context.
pub fn header_for(kind: PiiKind) -> &'static str {
    match kind {
        PiiKind::DateOfBirth => "dob",
        PiiKind::PersonName => "patient_name",
        _ => "notes",
    }
}

fn luhn_complete(prefix: &str, len: usize, r: &mut ChaCha8Rng) -> String {
    let mut digits: String = prefix.to_string();
    while digits.len() < len - 1 {
        digits.push(char::from(b'0' + r.gen_range(0..10)));
    }
    for check in 0..10u8 {
        let cand = format!("{digits}{check}");
        if medpipe::anonymize::luhn_valid(&cand) {
            return cand;
        }
    }
    unreachable!()
}

fn pii_value(kind: PiiKind, i: usize, r: &mut ChaCha8Rng) -> String {
    match kind {
        PiiKind::Email => {
            let user = format!("{}.{}{}", GIVEN[i % GIVEN.len()].to_lowercase(), SURNAMES[r.gen_range(0..SURNAMES.len())].to_lowercase(), r.gen_range(0..100));
            let domain = ["clinic", "mail", "health-net", "uni"][i % 4];
            let tld = ["org", "com", "net", "io", "co.uk"][r.gen_range(0..5)];
            format!("{user}@{domain}.{tld}")
        }
        PiiKind::Phone => {
            let a = r.gen_range(201..990);
            let b = r.gen_range(200..999);
            let c = r.gen_range(0..10000);
            match i % 6 {
                0 => format!("{a}-{b}-{c:04}"),
                1 => format!("({a}) {b}-{c:04}"),
                2 => format!("+1 {a} {b} {c:04}"),
                3 => format!("{a}.{b}.{c:04}"),
                4 => format!("+44 20 {:04} {c:04}", r.gen_range(1000..10000)),
                _ => format!("+1{a}{b}{c:04}"),
            }
        }
        PiiKind::CreditCard => {
            let prefix = ["4", "51", "52", "53", "55"][i % 5];
            let n = luhn_complete(prefix, 16, r);
            match i % 3 {
                0 => n,
                1 => n.as_bytes().chunks(4).map(|c| std::str::from_utf8(c).unwrap()).collect::<Vec<_>>().join(" "),
                _ => n.as_bytes().chunks(4).map(|c| std::str::from_utf8(c).unwrap()).collect::<Vec<_>>().join("-"),
            }
        }
        PiiKind::IpAddress => {
            if i % 4 == 3 {
                format!("2001:db8:{:x}:{:x}::{:x}", r.gen_range(1..0xffff), r.gen_range(1..0xffff), r.gen_range(1..0xffff))
            } else {
                format!("{}.{}.{}.{}", r.gen_range(1..=255), r.gen_range(0..=255), r.gen_range(0..=255), r.gen_range(1..=254))
            }
        }
        PiiKind::DateOfBirth => {
            let y = r.gen_range(1920..2020);
            let m = r.gen_range(1..=12);
            let d = r.gen_range(1..=28);
            match i % 5 {
                0 => format!("{y}-{m:02}-{d:02}"),
                1 => format!("{m:02}/{d:02}/{y}"),
                2 => format!("{d}.{m}.{y}"),
                3 => format!("{} {d}, {y}", MONTHS[m - 1]),
                _ => format!("{d} {} {y}", MONTHS[m - 1]),
            }
        }
        PiiKind::MedicalRecordNumber => {
            let digits = r.gen_range(6..=10);
            let n: String = (0..digits).map(|_| char::from(b'0' + r.gen_range(0..10))).collect();
            let sep = ["-", " ", ""][i % 3];
            format!("MRN{sep}{n}")
        }
        PiiKind::NationalId => {
            let area = loop {
                let a = r.gen_range(1..900);
                if a != 666 {
                    break a;
                }
            };
            format!("{area:03}-{:02}-{:04}", r.gen_range(1..100), r.gen_range(1..10000))
        }
        PiiKind::PersonName => {
            let g = GIVEN[i % GIVEN.len()];
            let s = SURNAMES[r.gen_range(0..SURNAMES.len())];
            match i % 3 {
                0 => format!("{g} {s}"),
                1 => g.to_string(),
                _ => format!("{g} {s}-{}", SURNAMES[r.gen_range(0..SURNAMES.len())]),
            }
        }
    }
}

/// One corpus entry: the cell text and the byte span of the planted value.
#[derive(Debug, Clone)]
pub struct Planted {
    pub text: String,
    pub span: (usize, usize),
}

/// `n` strings each carrying exactly one value of `kind`, sometimes
/// surrounded by benign lowercase context.
pub fn pii_corpus(kind: PiiKind, n: usize, seed: u64) -> Vec<Planted> {
    let mut r = rng(seed ^ (kind as u64) << 8);
    (0..n)
        .map(|i| {
            let value = pii_value(kind, i, &mut r);
            let (pre, post) = match i % 4 {
                0 => ("", ""),
                1 => ("contact ", ""),
                2 => ("", " reported"),
                _ => ("value ", " on file"),
            };
            Planted {
                text: format!("{pre}{value}{post}"),
                span: (pre.len(), pre.len() + value.len()),
            }
        })
        .collect()
}

/// Strings with no PII under any header context.
pub fn benign_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| match i % 5 {
            0 => format!("{} mg twice daily", r.gen_range(1..500)),
            1 => format!("score {}/{}", r.gen_range(0..30), r.gen_range(30..100)),
            2 => {
                let k = r.gen_range(2..6);
                (0..k).map(|_| *WORDS.choose(&mut r).unwrap()).collect::<Vec<_>>().join(" ")
            }
            3 => format!("bp {}/{} hr {}", r.gen_range(90..180), r.gen_range(50..110), r.gen_range(40..140)),
            _ => format!("ward {}{} bed {}", ['a', 'b', 'c'][i % 3], r.gen_range(1..9), r.gen_range(1..40)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// toy dataset and registry

pub const MODEL_01_HEADERS: [&str; 7] =
    ["age", "gender", "ECOG", "living_situation", "antidepressants", "vomiting", "anxiety"];

/// Rows with MODEL_01's headers. `anxiety` is a noiseless rule of ECOG and
/// antidepressants.
pub fn toy_rows(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let ecog = r.gen_range(0..5);
            let anti = r.gen_bool(0.4);
            let anxiety = ecog >= 3 || anti;
            vec![
                r.gen_range(30..90).to_string(),
                ["F", "M"][r.gen_range(0..2)].to_string(),
                ecog.to_string(),
                ["alone", "family", "care home"][r.gen_range(0..3)].to_string(),
                if anti { "yes" } else { "no" }.to_string(),
                if r.gen_bool(0.2) { "yes" } else { "no" }.to_string(),
                if anxiety { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect()
}

pub fn toy_csv_bytes(n: usize, seed: u64) -> Vec<u8> {
    let mut s = MODEL_01_HEADERS.join(",");
    s.push('\n');
    for row in toy_rows(n, seed) {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

pub fn toy_artifact() -> FileArtifact {
    FileArtifact::new("toy.csv", toy_csv_bytes(120, 7))
}

pub fn toy_registry() -> ModelDatabase {
    ModelDatabase::from_models(vec![
        ModelDescriptor::table("MODEL_01", "anxiety prediction", &MODEL_01_HEADERS, "anxiety"),
        ModelDescriptor::image(
            "MODEL_02",
            "colon colonoscopy scan",
            "Detects and classifies hyperplastic vs. adenomatous polyps in colonoscopy images",
        ),
        ModelDescriptor::table(
            "MODEL_03",
            "fall risk",
            &["gait_speed", "grip_strength", "prior_falls", "falls"],
            "falls",
        ),
        ModelDescriptor::table(
            "MODEL_04",
            "readmission",
            &["length_of_stay", "discharge_ward", "comorbidity_index", "readmitted"],
            "readmitted",
        ),
    ])
    .unwrap()
}

// ---------------------------------------------------------------------------
// mock HTTP server

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

/// Serves requests on an ephemeral local port from a background thread and
/// returns the base URL. Every response closes its connection.
pub fn serve(handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handler: Arc<Handler> = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() {
                    return;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or("").to_string();
                let path = parts.next().unwrap_or("").to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" || h == "\n" {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.trim().eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0; len];
                if reader.read_exact(&mut body).is_err() {
                    return;
                }
                let (status, out) = handler(&Request { method, path, body });
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{out}",
                    out.len()
                );
                let _ = stream.write_all(resp.as_bytes());
                let _ = stream.flush();
            });
        }
    });
    format!("http://{addr}")
}

/// Embedding sidecar stand-in backed by the hashed trigram vectors, so a
/// remote run must agree with the fallback embedder.
pub fn mock_sidecar() -> String {
    serve(|req| match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/health") => (200, r#"{"model":"mock-encoder","dim":768}"#.to_string()),
        ("POST", "/embed") => {
            let v: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
            let vectors: Vec<Vec<f64>> = v["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| medpipe::matching::HashedTrigramEmbedder::vector(t.as_str().unwrap()))
                .collect();
            (200, serde_json::json!({ "vectors": vectors }).to_string())
        }
        _ => (404, "{}".to_string()),
    })
}
