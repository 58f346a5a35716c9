//! Rule-based PII detectors.
//!
//! Every built-in [`PiiKind`] has exactly one detector. Candidates from all
//! detectors are merged with longest-match-wins, so the findings of a cell
//! never overlap.

use std::collections::HashSet;
use std::fmt;
use std::net::Ipv6Addr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use super::names::GIVEN_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiiKind {
    PersonName,
    Email,
    Phone,
    MedicalRecordNumber,
    CreditCard,
    IpAddress,
    DateOfBirth,
    NationalId,
}

impl PiiKind {
    pub const ALL: [PiiKind; 8] = [
        PiiKind::PersonName,
        PiiKind::Email,
        PiiKind::Phone,
        PiiKind::MedicalRecordNumber,
        PiiKind::CreditCard,
        PiiKind::IpAddress,
        PiiKind::DateOfBirth,
        PiiKind::NationalId,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PiiKind::PersonName => "person_name",
            PiiKind::Email => "email",
            PiiKind::Phone => "phone",
            PiiKind::MedicalRecordNumber => "medical_record_number",
            PiiKind::CreditCard => "credit_card",
            PiiKind::IpAddress => "ip_address",
            PiiKind::DateOfBirth => "date_of_birth",
            PiiKind::NationalId => "national_id",
        }
    }

    // Tie-break on equal-length overlaps; lower wins.
    fn priority(self) -> u8 {
        match self {
            PiiKind::CreditCard => 0,
            PiiKind::NationalId => 1,
            PiiKind::MedicalRecordNumber => 2,
            PiiKind::Email => 3,
            PiiKind::IpAddress => 4,
            PiiKind::DateOfBirth => 5,
            PiiKind::Phone => 6,
            PiiKind::PersonName => 7,
        }
    }
}

/// What produced a finding: a built-in kind or a configured pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingKind {
    Pii(PiiKind),
    Custom(String),
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FindingKind::Pii(k) => f.write_str(k.as_str()),
            FindingKind::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl Serialize for FindingKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Rule,
    Checksum,
    Dictionary,
}

/// One detected span inside a cell, in byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellMatch {
    pub kind: FindingKind,
    pub start: usize,
    pub end: usize,
    pub confidence: Confidence,
}

impl CellMatch {
    fn len(&self) -> usize {
        self.end - self.start
    }

    fn priority(&self) -> u8 {
        match &self.kind {
            FindingKind::Pii(k) => k.priority(),
            FindingKind::Custom(_) => 8,
        }
    }
}

/// A user-supplied detector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomPattern {
    pub name: String,
    pub pattern: String,
}

pub const DEFAULT_MRN_PATTERN: &str = r"MRN[- ]?\d{6,10}";

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid pattern `{name}`: {source}")]
    InvalidPattern {
        name: String,
        #[source]
        source: regex::Error,
    },
}

struct Patterns {
    email: Regex,
    phone: [Regex; 3],
    card: Regex,
    ipv4: Regex,
    ipv6: Regex,
    dates: Vec<Regex>,
    ssn: Regex,
    name_pair: Regex,
    name_token: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("built-in pattern compiles");
        const MONTH: &str = r"(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?";
        Patterns {
            email: re(r"(?i)[a-z0-9][a-z0-9._%+-]*@[a-z0-9](?:[a-z0-9-]*[a-z0-9])?(?:\.[a-z0-9](?:[a-z0-9-]*[a-z0-9])?)*\.[a-z]{2,}"),
            phone: [
                // North American numbers with optional country code.
                re(r"(?:\+?1[ .-]?)?(?:\(\d{3}\)[ .-]?|\d{3}[ .-])\d{3}[ .-]\d{4}"),
                // International with separators.
                re(r"\+\d{1,3}(?:[ .-]\(?\d{1,4}\)?){2,5}"),
                // Compact E.164.
                re(r"\+[1-9]\d{6,14}"),
            ],
            card: re(r"\d(?:[ -]?\d){12,18}"),
            ipv4: re(r"\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}"),
            ipv6: re(r"(?i)(?:[0-9a-f]{0,4}:){2,7}[0-9a-f]{0,4}"),
            dates: vec![
                re(r"\d{4}[-/.]\d{1,2}[-/.]\d{1,2}"),
                re(r"\d{1,2}[-/.]\d{1,2}[-/.]\d{4}"),
                re(&format!(r"(?i){MONTH} \d{{1,2}},? \d{{4}}")),
                re(&format!(r"(?i)\d{{1,2}} {MONTH},? \d{{4}}")),
            ],
            ssn: re(r"\d{3}-\d{2}-\d{4}"),
            name_pair: re(r"[A-Z][a-z']+(?:[ -][A-Z][a-z']+){1,2}"),
            name_token: re(r"[A-Z][a-z]+"),
        }
    })
}

fn given_names() -> &'static HashSet<&'static str> {
    static N: OnceLock<HashSet<&'static str>> = OnceLock::new();
    N.get_or_init(|| GIVEN_NAMES.iter().copied().collect())
}

/// True when the span is not glued to surrounding word characters.
fn bounded(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    !glued(before) && !glued(after)
}

/// Luhn mod-10 check over an ASCII digit string.
pub fn luhn_valid(digits: &str) -> bool {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let sum: u32 = digits
        .bytes()
        .rev()
        .enumerate()
        .map(|(i, b)| {
            let d = u32::from(b - b'0');
            if i % 2 == 1 {
                let dd = d * 2;
                if dd > 9 {
                    dd - 9
                } else {
                    dd
                }
            } else {
                d
            }
        })
        .sum();
    sum % 10 == 0
}

fn ssn_valid(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    let [area, group, serial] = parts.as_slice() else {
        return false;
    };
    let area: u32 = area.parse().unwrap_or(0);
    area != 0
        && area != 666
        && area < 900
        && *group != "00"
        && *serial != "0000"
}

fn ipv4_valid(s: &str) -> bool {
    s.split('.')
        .all(|o| o.parse::<u16>().is_ok_and(|v| v <= 255))
}

fn date_valid(s: &str) -> bool {
    const FORMATS: [&str; 16] = [
        "%Y-%m-%d", "%Y/%m/%d", "%Y.%m.%d", "%m/%d/%Y", "%d/%m/%Y", "%m-%d-%Y", "%d-%m-%Y",
        "%d.%m.%Y", "%m.%d.%Y", "%b %d, %Y", "%b %d %Y", "%B %d, %Y", "%B %d %Y", "%d %b %Y",
        "%d %B %Y", "%d %B, %Y",
    ];
    let cleaned = s.replace('.', if s.contains(' ') { "" } else { "." });
    FORMATS
        .iter()
        .any(|f| NaiveDate::parse_from_str(&cleaned, f).is_ok())
}

fn header_tokens(header: &str) -> Vec<String> {
    header
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Whether a column header signals dates of birth.
pub fn is_birth_context(header: &str) -> bool {
    let lower = header.to_lowercase();
    lower.contains("birth")
        || header_tokens(header)
            .iter()
            .any(|t| matches!(t.as_str(), "dob" | "birthdate" | "date_of_birth"))
}

/// Whether a column header signals person names.
pub fn is_name_context(header: &str) -> bool {
    let lower = header.to_lowercase();
    ["name", "patient", "physician"]
        .iter()
        .any(|w| lower.contains(w))
}

/// Compiled detector set. Immutable after construction and shareable.
#[derive(Debug, Clone)]
pub struct Detector {
    enabled: HashSet<PiiKind>,
    mrn: Regex,
    custom: Vec<(String, Regex)>,
}

impl Default for Detector {
    fn default() -> Self {
        Self::new(&[], DEFAULT_MRN_PATTERN, &[]).expect("default detector compiles")
    }
}

impl Detector {
    /// `disabled` must list every built-in kind to switch off explicitly.
    pub fn new(
        disabled: &[PiiKind],
        mrn_pattern: &str,
        custom: &[CustomPattern],
    ) -> Result<Self, DetectorError> {
        let mrn = Regex::new(mrn_pattern).map_err(|source| DetectorError::InvalidPattern {
            name: "medical_record_number".into(),
            source,
        })?;
        let custom = custom
            .iter()
            .map(|c| {
                Regex::new(&c.pattern)
                    .map(|r| (c.name.clone(), r))
                    .map_err(|source| DetectorError::InvalidPattern {
                        name: c.name.clone(),
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            enabled: PiiKind::ALL
                .into_iter()
                .filter(|k| !disabled.contains(k))
                .collect(),
            mrn,
            custom,
        })
    }

    pub fn is_enabled(&self, kind: PiiKind) -> bool {
        self.enabled.contains(&kind)
    }

    /// All non-overlapping findings in `text`, ordered by start offset.
    pub fn scan_cell(&self, text: &str, header: &str) -> Vec<CellMatch> {
        if text.is_empty() {
            return Vec::new();
        }
        let mut cands = self.candidates(text, header);
        cands.sort_by(|a, b| {
            b.len()
                .cmp(&a.len())
                .then(a.start.cmp(&b.start))
                .then(a.priority().cmp(&b.priority()))
        });
        let mut accepted: Vec<CellMatch> = Vec::new();
        for c in cands {
            if accepted.iter().all(|a| c.end <= a.start || c.start >= a.end) {
                accepted.push(c);
            }
        }
        accepted.sort_by_key(|m| m.start);
        accepted
    }

    fn candidates(&self, text: &str, header: &str) -> Vec<CellMatch> {
        let p = patterns();
        let mut out = Vec::new();
        let mut push = |kind: PiiKind, start: usize, end: usize, confidence: Confidence| {
            out.push(CellMatch {
                kind: FindingKind::Pii(kind),
                start,
                end,
                confidence,
            })
        };
        let on = |k: PiiKind| self.enabled.contains(&k);

        if on(PiiKind::Email) {
            for m in p.email.find_iter(text) {
                if bounded(text, m.start(), m.end()) {
                    push(PiiKind::Email, m.start(), m.end(), Confidence::Rule);
                }
            }
        }
        if on(PiiKind::Phone) {
            for re in &p.phone {
                for m in re.find_iter(text) {
                    let digits = m.as_str().bytes().filter(u8::is_ascii_digit).count();
                    if (7..=15).contains(&digits) && bounded(text, m.start(), m.end()) {
                        push(PiiKind::Phone, m.start(), m.end(), Confidence::Rule);
                    }
                }
            }
        }
        if on(PiiKind::CreditCard) {
            for m in p.card.find_iter(text) {
                let digits: String = m.as_str().chars().filter(char::is_ascii_digit).collect();
                if (13..=19).contains(&digits.len())
                    && luhn_valid(&digits)
                    && bounded(text, m.start(), m.end())
                {
                    push(PiiKind::CreditCard, m.start(), m.end(), Confidence::Checksum);
                }
            }
        }
        if on(PiiKind::IpAddress) {
            for m in p.ipv4.find_iter(text) {
                let trailing_dot = text[m.end()..].starts_with('.');
                if ipv4_valid(m.as_str()) && bounded(text, m.start(), m.end()) && !trailing_dot {
                    push(PiiKind::IpAddress, m.start(), m.end(), Confidence::Rule);
                }
            }
            for m in p.ipv6.find_iter(text) {
                if m.as_str().parse::<Ipv6Addr>().is_ok()
                    && !text[m.end()..].starts_with(':')
                    && bounded(text, m.start(), m.end())
                {
                    push(PiiKind::IpAddress, m.start(), m.end(), Confidence::Rule);
                }
            }
        }
        if on(PiiKind::DateOfBirth) && is_birth_context(header) {
            for re in &p.dates {
                for m in re.find_iter(text) {
                    if date_valid(m.as_str()) && bounded(text, m.start(), m.end()) {
                        push(PiiKind::DateOfBirth, m.start(), m.end(), Confidence::Rule);
                    }
                }
            }
        }
        if on(PiiKind::MedicalRecordNumber) {
            for m in self.mrn.find_iter(text) {
                if !m.is_empty() && bounded(text, m.start(), m.end()) {
                    push(PiiKind::MedicalRecordNumber, m.start(), m.end(), Confidence::Rule);
                }
            }
        }
        if on(PiiKind::NationalId) {
            for m in p.ssn.find_iter(text) {
                if ssn_valid(m.as_str()) && bounded(text, m.start(), m.end()) {
                    push(PiiKind::NationalId, m.start(), m.end(), Confidence::Rule);
                }
            }
        }
        if on(PiiKind::PersonName) && is_name_context(header) {
            for m in p.name_pair.find_iter(text) {
                if bounded(text, m.start(), m.end()) {
                    push(PiiKind::PersonName, m.start(), m.end(), Confidence::Rule);
                }
            }
            let names = given_names();
            for m in p.name_token.find_iter(text) {
                if names.contains(m.as_str()) && bounded(text, m.start(), m.end()) {
                    push(PiiKind::PersonName, m.start(), m.end(), Confidence::Dictionary);
                }
            }
        }
        for (name, re) in &self.custom {
            for m in re.find_iter(text) {
                if !m.is_empty() {
                    out.push(CellMatch {
                        kind: FindingKind::Custom(name.clone()),
                        start: m.start(),
                        end: m.end(),
                        confidence: Confidence::Rule,
                    });
                }
            }
        }
        out
    }
}

/// Scans one cell with the default detector set.
pub fn scan_cell(text: &str, header: &str) -> Vec<CellMatch> {
    static D: OnceLock<Detector> = OnceLock::new();
    D.get_or_init(Detector::default).scan_cell(text, header)
}
