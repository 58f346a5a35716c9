use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Serialize, Serializer};
use thiserror::Error;

/// The seven pipeline stages in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageId {
    IngestionClassifier,
    IngestionAnonymizer,
    IngestionSelector,
    IngestionFeatureMatcher,
    PreprocessingRecommender,
    PreprocessingImplementor,
    ModelInferencer,
}

impl StageId {
    pub const ALL: [StageId; 7] = [
        StageId::IngestionClassifier,
        StageId::IngestionAnonymizer,
        StageId::IngestionSelector,
        StageId::IngestionFeatureMatcher,
        StageId::PreprocessingRecommender,
        StageId::PreprocessingImplementor,
        StageId::ModelInferencer,
    ];

    /// Agent name as written in the audit trail.
    pub fn as_str(self) -> &'static str {
        match self {
            StageId::IngestionClassifier => "Ingestion_Classifier",
            StageId::IngestionAnonymizer => "Ingestion_Anonymizer",
            StageId::IngestionSelector => "Ingestion_Selector",
            StageId::IngestionFeatureMatcher => "Ingestion_Feature_Matcher",
            StageId::PreprocessingRecommender => "Preprocessing_Recommender",
            StageId::PreprocessingImplementor => "Preprocessing_Implementor",
            StageId::ModelInferencer => "Model_Inferencer",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<StageId> {
        StageId::ALL.get(self.index() + 1).copied()
    }
}

impl std::fmt::Display for StageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for StageId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Ok,
    Skipped,
    Failed,
}

fn rfc3339<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Micros, true))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEvent {
    pub stage: StageId,
    #[serde(serialize_with = "rfc3339")]
    pub started_at: DateTime<Utc>,
    #[serde(serialize_with = "rfc3339")]
    pub ended_at: DateTime<Utc>,
    pub outcome: Outcome,
    pub detail: String,
    /// SHA-256 of the canonical JSON of the stage output.
    pub payload_digest: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("{got} cannot follow {last:?}; expected {expected:?}")]
    OrderViolation {
        last: Option<StageId>,
        got: StageId,
        expected: Option<StageId>,
    },
    #[error("no event may follow a failed stage")]
    AfterFailure,
    #[error("event for {0} ends before it starts or before the previous event")]
    TimeReversal(StageId),
}

/// Appends `event`, enforcing canonical stage order and time order.
pub fn append_audit(audit: &mut Vec<AuditEvent>, event: AuditEvent) -> Result<(), AuditError> {
    let last = audit.last();
    if last.is_some_and(|e| e.outcome == Outcome::Failed) {
        return Err(AuditError::AfterFailure);
    }
    let expected = match last {
        None => Some(StageId::IngestionClassifier),
        Some(e) => e.stage.next(),
    };
    if expected != Some(event.stage) {
        return Err(AuditError::OrderViolation {
            last: last.map(|e| e.stage),
            got: event.stage,
            expected,
        });
    }
    if event.ended_at < event.started_at || last.is_some_and(|e| event.ended_at <= e.ended_at) {
        return Err(AuditError::TimeReversal(event.stage));
    }
    audit.push(event);
    Ok(())
}

/// One JSON object per line, `\n` terminated.
pub fn audit_jsonl(audit: &[AuditEvent]) -> String {
    audit
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect()
}

/// Source of event timestamps. Readings must strictly increase.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

/// Wall-clock time, nudged forward by a microsecond when two readings
/// would otherwise coincide.
#[derive(Debug, Default)]
pub struct SystemClock {
    last: Mutex<Option<DateTime<Utc>>>,
}

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        let mut last = self.last.lock().unwrap();
        let mut t = Utc::now();
        if let Some(prev) = *last {
            if t <= prev {
                t = prev + TimeDelta::microseconds(1);
            }
        }
        *last = Some(t);
        t
    }
}

/// Deterministic clock: the epoch plus one millisecond per reading.
#[derive(Debug, Default)]
pub struct LogicalClock {
    ticks: AtomicI64,
}

impl Clock for LogicalClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        DateTime::<Utc>::UNIX_EPOCH + TimeDelta::milliseconds(n)
    }
}
