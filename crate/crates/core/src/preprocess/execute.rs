use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::plan::{PlanStep, PreprocessingPlan, Step};
use super::PreprocessError;
use crate::exec::Exec;
use crate::table::{format_number, parse_number, Column, TabularDataset};

/// Statistics learned by one step, enough to replay it on unseen data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fitted", rename_all = "snake_case")]
pub enum Fitted {
    Impute { value: String },
    ZScore { mean: f64, sd: f64, degenerate: bool },
    MinMax { min: f64, max: f64, degenerate: bool },
    MapBinary { negative: String, positive: String },
    /// Unseen levels encode as all zeros.
    OneHot { levels: Vec<String> },
    /// Unseen levels encode as `levels.len()`.
    Ordinal { levels: Vec<String> },
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStep {
    #[serde(flatten)]
    pub step: PlanStep,
    pub params: Fitted,
}

/// Everything needed to reapply a plan to new rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformParams {
    pub steps: Vec<FittedStep>,
}

impl TransformParams {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

fn numbers(col: &Column, step: &str) -> Result<Vec<Option<f64>>, PreprocessError> {
    col.cells
        .iter()
        .map(|c| {
            if c.is_empty() {
                Ok(None)
            } else {
                parse_number(c).map(Some).ok_or_else(|| PreprocessError::NonNumericUnderScaling {
                    column: col.name.clone(),
                    step: step.to_string(),
                })
            }
        })
        .collect()
}

/// Levels in ascending order; numerically when every level is a number.
fn sorted_levels(col: &Column) -> Vec<String> {
    let mut levels: Vec<String> = col.non_null().map(str::to_string).collect();
    levels.sort();
    levels.dedup();
    let nums: Option<Vec<f64>> = levels.iter().map(|l| parse_number(l)).collect();
    if let Some(nums) = nums {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        return pairs.into_iter().map(|p| p.1).collect();
    }
    levels
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn fit(col: &Column, step: &Step) -> Result<Fitted, PreprocessError> {
    let no_values = || PreprocessError::NoValues(col.name.clone());
    Ok(match step {
        Step::MedianImpute | Step::MeanImpute => {
            let vals: Vec<f64> = numbers(col, step.name())?.into_iter().flatten().collect();
            if vals.is_empty() {
                return Err(no_values());
            }
            let v = if matches!(step, Step::MedianImpute) {
                median(vals)
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            Fitted::Impute { value: format_number(v) }
        }
        Step::ModeImpute => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for v in col.non_null() {
                *counts.entry(v).or_default() += 1;
            }
            // Highest count; ties go to the smallest level.
            let best = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .ok_or_else(no_values)?;
            Fitted::Impute { value: best.0.to_string() }
        }
        Step::ConstantImpute { value } => Fitted::Impute { value: value.clone() },
        Step::ZScore => {
            let vals: Vec<f64> = numbers(col, step.name())?.into_iter().flatten().collect();
            if vals.is_empty() {
                return Err(no_values());
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let degenerate = !(sd > 0.0) || !sd.is_finite();
            Fitted::ZScore {
                mean,
                sd: if degenerate { 0.0 } else { sd },
                degenerate,
            }
        }
        Step::MinMax => {
            let vals: Vec<f64> = numbers(col, step.name())?.into_iter().flatten().collect();
            if vals.is_empty() {
                return Err(no_values());
            }
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Fitted::MinMax {
                min,
                max,
                degenerate: !(max > min),
            }
        }
        Step::MapBinary { positive } => {
            let levels = sorted_levels(col);
            match (levels.as_slice(), positive) {
                ([a, b], None) => Fitted::MapBinary {
                    negative: a.clone(),
                    positive: b.clone(),
                },
                ([a, b], Some(p)) if p == a || p == b => Fitted::MapBinary {
                    negative: if p == a { b.clone() } else { a.clone() },
                    positive: p.clone(),
                },
                _ => {
                    return Err(PreprocessError::NotBinary {
                        column: col.name.clone(),
                        levels: levels.len(),
                    })
                }
            }
        }
        Step::OneHot => Fitted::OneHot { levels: sorted_levels(col) },
        Step::Ordinal => Fitted::Ordinal { levels: sorted_levels(col) },
        Step::Drop { .. } => Fitted::Drop,
    })
}

/// Applies one fitted step. Nulls pass through every step but imputation.
fn apply(cols: Vec<Column>, params: &Fitted) -> Result<Vec<Column>, PreprocessError> {
    let [col] = <[Column; 1]>::try_from(cols).map_err(|cols| {
        PreprocessError::InvalidPlan(format!(
            "step applied to `{}` after it was expanded",
            cols.first().map_or("", |c| c.name.as_str())
        ))
    })?;
    let map_numbers = |col: Column, step: &str, f: &dyn Fn(f64) -> f64| -> Result<Vec<Column>, PreprocessError> {
        let vals = numbers(&col, step)?;
        let cells = vals
            .into_iter()
            .map(|v| v.map(|x| format_number(f(x))).unwrap_or_default())
            .collect();
        Ok(vec![Column::new(col.name, cells)])
    };
    match params {
        Fitted::Impute { value } => {
            let cells = col
                .cells
                .into_iter()
                .map(|c| if c.is_empty() { value.clone() } else { c })
                .collect();
            Ok(vec![Column::new(col.name, cells)])
        }
        Fitted::ZScore { mean, sd, degenerate } => {
            let (mean, sd, degenerate) = (*mean, *sd, *degenerate);
            map_numbers(col, "z_score", &move |x| if degenerate { 0.0 } else { (x - mean) / sd })
        }
        Fitted::MinMax { min, max, degenerate } => {
            let (min, max, degenerate) = (*min, *max, *degenerate);
            map_numbers(col, "min_max", &move |x| if degenerate { 0.0 } else { (x - min) / (max - min) })
        }
        Fitted::MapBinary { negative, positive } => {
            let cells = col
                .cells
                .iter()
                .map(|c| match c.as_str() {
                    "" => Ok(String::new()),
                    v if v == positive => Ok("1".to_string()),
                    v if v == negative => Ok("0".to_string()),
                    v => Err(PreprocessError::UnseenLevel {
                        column: col.name.clone(),
                        level: v.to_string(),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![Column::new(col.name, cells)])
        }
        Fitted::OneHot { levels } => Ok(levels
            .iter()
            .map(|l| {
                let cells = col
                    .cells
                    .iter()
                    .map(|c| match c.as_str() {
                        "" => String::new(),
                        v if v == l => "1".into(),
                        _ => "0".into(),
                    })
                    .collect();
                Column::new(format!("{}={l}", col.name), cells)
            })
            .collect()),
        Fitted::Ordinal { levels } => {
            let index: HashMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            let cells = col
                .cells
                .iter()
                .map(|c| match c.as_str() {
                    "" => String::new(),
                    v => index.get(v).copied().unwrap_or(levels.len()).to_string(),
                })
                .collect();
            Ok(vec![Column::new(col.name, cells)])
        }
        Fitted::Drop => Ok(vec![]),
    }
}

fn assemble(outputs: Vec<Vec<Column>>) -> Result<TabularDataset, PreprocessError> {
    let cols: Vec<Column> = outputs.into_iter().flatten().collect();
    for c in &cols {
        if c.cells.iter().any(|v| v.is_empty()) {
            return Err(PreprocessError::NullsRemaining(c.name.clone()));
        }
    }
    Ok(TabularDataset::new(cols)?)
}

/// Fits and applies the plan. Columns keep their table order; one-hot
/// columns expand in place as `col=level`. Columns without steps pass
/// through unchanged.
pub fn execute_plan(
    table: &TabularDataset,
    plan: &PreprocessingPlan,
    exec: Exec,
) -> Result<(TabularDataset, TransformParams), PreprocessError> {
    plan.validate()?;
    for s in &plan.steps {
        table.require(&s.column).map_err(|_| PreprocessError::UnknownColumn(s.column.clone()))?;
    }
    let results = exec.map_slice(table.columns(), |col| -> Result<(Vec<Column>, Vec<FittedStep>), PreprocessError> {
        let mut current = vec![col.clone()];
        let mut fitted = Vec::new();
        for s in plan.steps.iter().filter(|s| s.column == col.name) {
            let params = match current.as_slice() {
                [c] => fit(c, &s.step)?,
                _ => {
                    return Err(PreprocessError::InvalidPlan(format!(
                        "`{}` is expanded before {}",
                        col.name,
                        s.step.name()
                    )))
                }
            };
            current = apply(current, &params)?;
            fitted.push(FittedStep { step: s.clone(), params });
        }
        Ok((current, fitted))
    });
    let mut outputs = Vec::with_capacity(results.len());
    let mut by_column = HashMap::new();
    for (col, r) in table.columns().iter().zip(results) {
        let (cols, fitted) = r?;
        outputs.push(cols);
        by_column.insert(col.name.as_str(), fitted);
    }
    // Record parameters in plan order.
    let mut cursor: HashMap<&str, usize> = HashMap::new();
    let mut steps = Vec::with_capacity(plan.steps.len());
    for s in &plan.steps {
        let i = cursor.entry(s.column.as_str()).or_default();
        steps.push(by_column[s.column.as_str()][*i].clone());
        *i += 1;
    }
    Ok((assemble(outputs)?, TransformParams { steps }))
}

/// Replays recorded parameters on a table with the same source columns.
pub fn apply_params(table: &TabularDataset, params: &TransformParams, exec: Exec) -> Result<TabularDataset, PreprocessError> {
    for s in &params.steps {
        table
            .require(&s.step.column)
            .map_err(|_| PreprocessError::UnknownColumn(s.step.column.clone()))?;
    }
    let outputs = exec.map_slice(table.columns(), |col| -> Result<Vec<Column>, PreprocessError> {
        let mut current = vec![col.clone()];
        for s in params.steps.iter().filter(|s| s.step.column == col.name) {
            current = apply(current, &s.params)?;
        }
        Ok(current)
    });
    assemble(outputs.into_iter().collect::<Result<Vec<_>, _>>()?)
}
