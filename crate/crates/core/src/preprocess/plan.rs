use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::profile::{ColumnMetadata, ColumnType, StorageType, TypingThresholds};
use super::{infer_column_type, OverrideRejection, PreprocessError};

/// Default serialized-size threshold above which plans are automatic.
pub const DEFAULT_SIZE_GATE_BYTES: u64 = 50 * (1 << 20);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    MedianImpute,
    MeanImpute,
    ModeImpute,
    ConstantImpute { value: String },
    ZScore,
    MinMax,
    /// Maps two levels onto {0,1}. Without `positive`, the level that sorts
    /// last becomes 1.
    MapBinary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positive: Option<String>,
    },
    OneHot,
    Ordinal,
    Drop { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCategory {
    Imputation,
    Encoding,
    Scaling,
    Drop,
}

impl Step {
    pub fn category(&self) -> StepCategory {
        match self {
            Step::MedianImpute | Step::MeanImpute | Step::ModeImpute | Step::ConstantImpute { .. } => {
                StepCategory::Imputation
            }
            Step::MapBinary { .. } | Step::OneHot | Step::Ordinal => StepCategory::Encoding,
            Step::ZScore | Step::MinMax => StepCategory::Scaling,
            Step::Drop { .. } => StepCategory::Drop,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Step::MedianImpute => "median_impute",
            Step::MeanImpute => "mean_impute",
            Step::ModeImpute => "mode_impute",
            Step::ConstantImpute { .. } => "constant_impute",
            Step::ZScore => "z_score",
            Step::MinMax => "min_max",
            Step::MapBinary { .. } => "map_binary",
            Step::OneHot => "one_hot",
            Step::Ordinal => "ordinal",
            Step::Drop { .. } => "drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub column: String,
    #[serde(flatten)]
    pub step: Step,
}

impl PlanStep {
    pub fn new(column: &str, step: Step) -> Self {
        Self {
            column: column.to_string(),
            step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    UserGuided,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    pub storage_type: StorageType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingPlan {
    pub mode: PlanMode,
    pub dataset_bytes: u64,
    pub target: Option<String>,
    pub columns: Vec<PlannedColumn>,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub size_gate_bytes: u64,
    /// Force automatic mode regardless of size.
    pub force_auto: bool,
    pub one_hot_max_levels: usize,
    pub typing: TypingThresholds,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            size_gate_bytes: DEFAULT_SIZE_GATE_BYTES,
            force_auto: false,
            one_hot_max_levels: 20,
            typing: TypingThresholds::default(),
        }
    }
}

/// Operator edit applied to a recommended plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PlanEdit {
    /// Replaces the column's step of the same category, or adds it.
    Set {
        column: String,
        #[serde(flatten)]
        step: Step,
    },
    /// Drops a column.
    Drop { column: String },
    /// Re-enables a dropped column with the defaults for its type.
    Enable { column: String },
}

fn default_steps(meta: &ColumnMetadata, ty: ColumnType, is_target: bool, cfg: &PlanConfig) -> Result<Vec<Step>, PreprocessError> {
    if meta.null_count == meta.row_count {
        if is_target {
            return Err(PreprocessError::UnsupportedTarget(meta.name.clone()));
        }
        return Ok(vec![Step::Drop {
            reason: "column has no values".into(),
        }]);
    }
    if is_target {
        return match ty {
            ColumnType::Binary => Ok(vec![Step::ModeImpute, Step::MapBinary { positive: None }]),
            _ if meta.storage_type.is_numeric() => Ok(vec![Step::MedianImpute]),
            _ => Err(PreprocessError::UnsupportedTarget(meta.name.clone())),
        };
    }
    Ok(match ty {
        ColumnType::Numerical => vec![Step::MedianImpute, Step::ZScore],
        ColumnType::Binary => vec![Step::ModeImpute, Step::MapBinary { positive: None }],
        ColumnType::Categorical if meta.unique_count <= cfg.one_hot_max_levels => vec![Step::ModeImpute, Step::OneHot],
        ColumnType::Categorical => vec![Step::ModeImpute, Step::Ordinal],
        ColumnType::Textual => vec![Step::Drop {
            reason: "free-text column".into(),
        }],
    })
}

/// Default plan for the profiled table, with optional operator edits.
///
/// Above the size gate (or when `force_auto` is set) the plan is
/// automatic and any edits are rejected.
pub fn recommend(
    metas: &[ColumnMetadata],
    target: Option<&str>,
    dataset_bytes: u64,
    overrides: Option<&[PlanEdit]>,
    cfg: &PlanConfig,
) -> Result<PreprocessingPlan, PreprocessError> {
    if let Some(t) = target {
        if !metas.iter().any(|m| m.name == t) {
            return Err(PreprocessError::UnknownColumn(t.to_string()));
        }
    }
    let auto = cfg.force_auto || dataset_bytes > cfg.size_gate_bytes;
    let mut columns = Vec::with_capacity(metas.len());
    let mut steps = Vec::new();
    for m in metas {
        let ty = infer_column_type(m, &cfg.typing);
        let is_target = target == Some(m.name.as_str());
        for s in default_steps(m, ty, is_target, cfg)? {
            steps.push(PlanStep::new(&m.name, s));
        }
        columns.push(PlannedColumn {
            name: m.name.clone(),
            column_type: ty,
            storage_type: m.storage_type,
        });
    }
    let plan = PreprocessingPlan {
        mode: if auto { PlanMode::Auto } else { PlanMode::UserGuided },
        dataset_bytes,
        target: target.map(str::to_string),
        columns,
        steps,
    };
    plan.validate()?;
    match overrides {
        Some(edits) if !edits.is_empty() => apply_edits(&plan, edits, metas, cfg),
        _ => Ok(plan),
    }
}

/// Applies operator edits and revalidates. Automatic plans accept none.
pub fn apply_edits(
    plan: &PreprocessingPlan,
    edits: &[PlanEdit],
    metas: &[ColumnMetadata],
    cfg: &PlanConfig,
) -> Result<PreprocessingPlan, PreprocessError> {
    if plan.dataset_bytes > cfg.size_gate_bytes {
        return Err(PreprocessError::OverridesRejected {
            reason: OverrideRejection::SizeGate,
        });
    }
    if plan.mode == PlanMode::Auto {
        return Err(PreprocessError::OverridesRejected {
            reason: OverrideRejection::AutoMode,
        });
    }
    let mut out = plan.clone();
    for edit in edits {
        let column = match edit {
            PlanEdit::Set { column, .. } | PlanEdit::Drop { column } | PlanEdit::Enable { column } => column,
        };
        let Some(info) = out.columns.iter().find(|c| &c.name == column).cloned() else {
            return Err(PreprocessError::InvalidEdit(format!("unknown column `{column}`")));
        };
        let is_target = out.target.as_deref() == Some(column.as_str());
        match edit {
            PlanEdit::Set { step, .. } => {
                if matches!(step, Step::Drop { .. }) {
                    return Err(PreprocessError::InvalidEdit("use the `drop` op to drop a column".into()));
                }
                if out.steps.iter().any(|s| &s.column == column && s.step.category() == StepCategory::Drop) {
                    return Err(PreprocessError::InvalidEdit(format!("`{column}` is dropped; enable it first")));
                }
                let cat = step.category();
                let new = PlanStep::new(column, step.clone());
                if let Some(existing) = out
                    .steps
                    .iter_mut()
                    .find(|s| &s.column == column && s.step.category() == cat)
                {
                    *existing = new;
                } else {
                    // Insert after the column's last step of an earlier
                    // category so per-column order stays valid.
                    let pos = out
                        .steps
                        .iter()
                        .rposition(|s| &s.column == column && s.step.category() < cat)
                        .map(|p| p + 1)
                        .or_else(|| out.steps.iter().position(|s| &s.column == column))
                        .unwrap_or(out.steps.len());
                    out.steps.insert(pos, new);
                }
            }
            PlanEdit::Drop { .. } => {
                if is_target {
                    return Err(PreprocessError::InvalidEdit(format!("cannot drop the target `{column}`")));
                }
                let pos = out.steps.iter().position(|s| &s.column == column);
                out.steps.retain(|s| &s.column != column);
                out.steps.insert(
                    pos.unwrap_or(out.steps.len()).min(out.steps.len()),
                    PlanStep::new(column, Step::Drop { reason: "dropped by operator".into() }),
                );
            }
            PlanEdit::Enable { .. } => {
                let pos = out.steps.iter().position(|s| &s.column == column && s.step.category() == StepCategory::Drop);
                let Some(pos) = pos else {
                    return Err(PreprocessError::InvalidEdit(format!("`{column}` is not dropped")));
                };
                let meta = metas
                    .iter()
                    .find(|m| &m.name == column)
                    .ok_or_else(|| PreprocessError::InvalidEdit(format!("no metadata for `{column}`")))?;
                if meta.null_count == meta.row_count {
                    return Err(PreprocessError::InvalidEdit(format!("`{column}` has no values")));
                }
                // Free text has no default encoding; enabled text gets
                // ordinal codes.
                let ty = match info.column_type {
                    ColumnType::Textual => ColumnType::Categorical,
                    t => t,
                };
                let mut enable_cfg = *cfg;
                if info.column_type == ColumnType::Textual {
                    enable_cfg.one_hot_max_levels = 0;
                }
                let restored = default_steps(meta, ty, false, &enable_cfg)?;
                out.steps.remove(pos);
                for (i, s) in restored.into_iter().enumerate() {
                    out.steps.insert(pos + i, PlanStep::new(column, s));
                }
            }
        }
    }
    out.validate().map_err(|e| PreprocessError::InvalidEdit(e.to_string()))?;
    Ok(out)
}

impl PreprocessingPlan {
    /// Checks the plan's structural invariants.
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let known: HashMap<&str, &PlannedColumn> = self.columns.iter().map(|c| (c.name.as_str(), c)).collect();
        if let Some(t) = &self.target {
            if !known.contains_key(t.as_str()) {
                return Err(PreprocessError::UnknownColumn(t.clone()));
            }
        }
        let mut last: BTreeMap<&str, StepCategory> = BTreeMap::new();
        let mut encoding: BTreeMap<&str, &Step> = BTreeMap::new();
        for s in &self.steps {
            if !known.contains_key(s.column.as_str()) {
                return Err(PreprocessError::UnknownColumn(s.column.clone()));
            }
            let cat = s.step.category();
            let col = s.column.as_str();
            if let Some(&prev) = last.get(col) {
                if prev == StepCategory::Drop || cat == StepCategory::Drop {
                    return Err(PreprocessError::InvalidPlan(format!("`{col}` is dropped and also transformed")));
                }
                if prev == cat {
                    return Err(PreprocessError::InvalidPlan(format!("`{col}` has more than one {} step", s.step.name())));
                }
                if prev > cat {
                    return Err(PreprocessError::InvalidPlan(format!(
                        "`{col}`: {} must come before earlier-stage steps",
                        s.step.name()
                    )));
                }
            }
            if cat == StepCategory::Scaling {
                if self.target.as_deref() == Some(col) {
                    return Err(PreprocessError::InvalidPlan(format!("target `{col}` cannot be scaled")));
                }
                if matches!(encoding.get(col), Some(Step::OneHot) | Some(Step::MapBinary { .. })) {
                    return Err(PreprocessError::InvalidPlan(format!("`{col}` is indicator-coded and cannot be scaled")));
                }
            }
            if cat == StepCategory::Encoding {
                encoding.insert(col, &s.step);
                if matches!(s.step, Step::OneHot) && self.target.as_deref() == Some(col) {
                    return Err(PreprocessError::InvalidPlan(format!("target `{col}` cannot be one-hot encoded")));
                }
            }
            if cat == StepCategory::Drop && self.target.as_deref() == Some(col) {
                return Err(PreprocessError::InvalidPlan(format!("target `{col}` cannot be dropped")));
            }
            last.insert(col, cat);
        }
        Ok(())
    }

    pub fn steps_for<'a>(&'a self, column: &'a str) -> impl Iterator<Item = &'a Step> + 'a {
        self.steps.iter().filter(move |s| s.column == column).map(|s| &s.step)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PreprocessError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| PreprocessError::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::preprocess::profile_columns;
    use crate::table::{Column, TabularDataset};

    fn metas() -> Vec<ColumnMetadata> {
        let n = 40;
        let t = TabularDataset::new(vec![
            Column::new("age", (0..n).map(|i| if i == 3 { String::new() } else { format!("{}.5", 30 + i) }).collect()),
            Column::new("sex", (0..n).map(|i| ["F", "M"][i % 2].to_string()).collect()),
            Column::new("stage", (0..n).map(|i| ["I", "II", "III"][i % 3].to_string()).collect()),
            Column::new("note", (0..n).map(|i| format!("a long free-text clinical remark #{i}")).collect()),
            Column::new("y", (0..n).map(|i| (i % 2).to_string()).collect()),
        ])
        .unwrap();
        profile_columns(&t, Exec::Sequential).unwrap()
    }

    fn kinds(plan: &PreprocessingPlan, col: &str) -> Vec<&'static str> {
        plan.steps_for(col).map(Step::name).collect()
    }

    #[test]
    fn defaults_per_type() {
        let p = recommend(&metas(), Some("y"), 1 << 20, None, &PlanConfig::default()).unwrap();
        assert_eq!(p.mode, PlanMode::UserGuided);
        assert_eq!(kinds(&p, "age"), vec!["median_impute", "z_score"]);
        assert_eq!(kinds(&p, "sex"), vec!["mode_impute", "map_binary"]);
        assert_eq!(kinds(&p, "stage"), vec!["mode_impute", "one_hot"]);
        assert_eq!(kinds(&p, "note"), vec!["drop"]);
        assert_eq!(kinds(&p, "y"), vec!["mode_impute", "map_binary"]);
    }

    #[test]
    fn size_gate() {
        let m = metas();
        let edits = [PlanEdit::Set {
            column: "age".into(),
            step: Step::MinMax,
        }];
        let big = 51 * (1 << 20);
        assert_eq!(
            recommend(&m, Some("y"), big, Some(&edits), &PlanConfig::default()),
            Err(PreprocessError::OverridesRejected {
                reason: OverrideRejection::SizeGate
            })
        );
        let p = recommend(&m, Some("y"), big, None, &PlanConfig::default()).unwrap();
        assert_eq!(p.mode, PlanMode::Auto);
        let p = recommend(&m, Some("y"), DEFAULT_SIZE_GATE_BYTES, None, &PlanConfig::default()).unwrap();
        assert_eq!(p.mode, PlanMode::UserGuided);
    }

    #[test]
    fn edits() {
        let m = metas();
        let cfg = PlanConfig::default();
        let p = recommend(&m, Some("y"), 0, None, &cfg).unwrap();
        let edited = apply_edits(
            &p,
            &[
                PlanEdit::Set {
                    column: "age".into(),
                    step: Step::MinMax,
                },
                PlanEdit::Enable { column: "note".into() },
                PlanEdit::Drop { column: "stage".into() },
            ],
            &m,
            &cfg,
        )
        .unwrap();
        assert_eq!(kinds(&edited, "age"), vec!["median_impute", "min_max"]);
        assert_eq!(kinds(&edited, "note"), vec!["mode_impute", "ordinal"]);
        assert_eq!(kinds(&edited, "stage"), vec!["drop"]);

        let bad = apply_edits(&p, &[PlanEdit::Drop { column: "nope".into() }], &m, &cfg);
        assert!(matches!(bad, Err(PreprocessError::InvalidEdit(_))));
        let scaled_target = apply_edits(
            &p,
            &[PlanEdit::Set {
                column: "y".into(),
                step: Step::ZScore,
            }],
            &m,
            &cfg,
        );
        assert!(matches!(scaled_target, Err(PreprocessError::InvalidEdit(_))));
    }

    #[test]
    fn json_round_trip() {
        let p = recommend(&metas(), Some("y"), 0, None, &PlanConfig::default()).unwrap();
        let json = p.to_json();
        assert!(json.contains("\"kind\": \"median_impute\""));
        assert_eq!(PreprocessingPlan::from_json(&json).unwrap(), p);
        let edits: Vec<PlanEdit> =
            serde_json::from_str(r#"[{"op":"set","column":"age","kind":"min_max"},{"op":"enable","column":"note"}]"#).unwrap();
        assert_eq!(edits.len(), 2);
    }

    #[test]
    fn validation() {
        let mut p = recommend(&metas(), Some("y"), 0, None, &PlanConfig::default()).unwrap();
        p.steps.push(PlanStep::new("age", Step::MeanImpute));
        assert!(matches!(p.validate(), Err(PreprocessError::InvalidPlan(_))));
    }
}
