//! PII detection and masking for tables, and region redaction for images.

mod detect;
mod image;
mod mask;
mod names;

pub use detect::{
    is_birth_context, is_name_context, luhn_valid, scan_cell, CellMatch, Confidence, CustomPattern,
    Detector, DetectorError, FindingKind, PiiKind, DEFAULT_MRN_PATTERN,
};
pub use image::{redact_image, MockRedactionClient, RedactError, RemoteRedactionClient, VisualRedactionClient};
pub use mask::{findings_jsonl, mask_table, MaskGranularity, MaskOutcome, MaskPolicy, PiiFinding, MASK_TOKEN};
