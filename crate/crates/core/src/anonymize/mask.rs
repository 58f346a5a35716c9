use serde::{Deserialize, Serialize};

use super::detect::{Confidence, CustomPattern, Detector, DetectorError, FindingKind, PiiKind, DEFAULT_MRN_PATTERN};
use crate::exec::Exec;
use crate::table::{Column, TabularDataset};

/// Replacement for every masked span. Its length never depends on the input.
pub const MASK_TOKEN: &str = "****";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskGranularity {
    /// Replace only the detected spans.
    #[default]
    Substring,
    /// Replace any cell with a finding by a single token.
    Cell,
}

/// Masking configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskPolicy {
    /// Built-in kinds switched off. Nothing is disabled unless listed here.
    pub disabled: Vec<PiiKind>,
    pub mrn_pattern: String,
    pub custom: Vec<CustomPattern>,
    pub granularity: MaskGranularity,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        Self {
            disabled: Vec::new(),
            mrn_pattern: DEFAULT_MRN_PATTERN.to_string(),
            custom: Vec::new(),
            granularity: MaskGranularity::Substring,
        }
    }
}

impl MaskPolicy {
    pub fn detector(&self) -> Result<Detector, DetectorError> {
        Detector::new(&self.disabled, &self.mrn_pattern, &self.custom)
    }
}

/// A finding located in a table. Never carries the matched text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PiiFinding {
    pub kind: FindingKind,
    pub column: String,
    pub row: usize,
    pub span: (usize, usize),
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskOutcome {
    pub table: TabularDataset,
    pub findings: Vec<PiiFinding>,
}

impl MaskOutcome {
    /// Findings as JSON Lines, one object per line.
    pub fn findings_jsonl(&self) -> String {
        findings_jsonl(&self.findings)
    }
}

pub fn findings_jsonl(findings: &[PiiFinding]) -> String {
    let mut out = String::new();
    for f in findings {
        out.push_str(&serde_json::to_string(f).expect("finding serializes"));
        out.push('\n');
    }
    out
}

fn mask_cell(cell: &str, spans: &[(usize, usize)], granularity: MaskGranularity) -> String {
    if spans.is_empty() {
        return cell.to_string();
    }
    if granularity == MaskGranularity::Cell {
        return MASK_TOKEN.to_string();
    }
    let mut out = String::with_capacity(cell.len());
    let mut pos = 0;
    for &(s, e) in spans {
        out.push_str(&cell[pos..s]);
        out.push_str(MASK_TOKEN);
        pos = e;
    }
    out.push_str(&cell[pos..]);
    out
}

/// Masks every finding in every cell. Headers, shape and PII-free cells are
/// left untouched.
pub fn mask_table(
    table: &TabularDataset,
    detector: &Detector,
    granularity: MaskGranularity,
    exec: Exec,
) -> MaskOutcome {
    let per_column = exec.map_slice(table.columns(), |col| {
        let mut findings = Vec::new();
        let cells = col
            .cells
            .iter()
            .enumerate()
            .map(|(row, cell)| {
                let matches = detector.scan_cell(cell, &col.name);
                let spans: Vec<_> = matches.iter().map(|m| (m.start, m.end)).collect();
                findings.extend(matches.into_iter().map(|m| PiiFinding {
                    kind: m.kind,
                    column: col.name.clone(),
                    row,
                    span: (m.start, m.end),
                    confidence: m.confidence,
                }));
                mask_cell(cell, &spans, granularity)
            })
            .collect();
        (Column::new(col.name.clone(), cells), findings)
    });
    let mut columns = Vec::with_capacity(per_column.len());
    let mut findings = Vec::new();
    for (c, f) in per_column {
        columns.push(c);
        findings.extend(f);
    }
    findings.sort_by(|a, b| (a.row, &a.column, a.span).cmp(&(b.row, &b.column, b.span)));
    MaskOutcome {
        table: TabularDataset::new(columns).expect("shape preserved"),
        findings,
    }
}
