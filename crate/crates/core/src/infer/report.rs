use serde::Serialize;

use super::explain::{FeatureScore, TOP_FEATURES};
use super::gbm::{sigmoid, train_gbm, BoostedModel, GbmConfig, MarginModel, Task, TrainedModel};
use super::InferError;
use crate::digest::sha256_hex;
use crate::exec::Exec;
use crate::table::{format_number, TabularDataset};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub row: usize,
    /// SHA-256 of the row's feature cells, unit-separator joined.
    pub inputs_digest: String,
    pub prediction: f64,
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub row: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub task: Task,
    pub features: Vec<String>,
    pub rows: Vec<PredictionRow>,
    pub attributions: Option<Vec<Attribution>>,
    pub top_features: Vec<FeatureScore>,
}

impl PredictionReport {
    /// RFC 4180 CSV with header `row,prediction[,probability]`.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let classify = self.task == Task::BinaryClassification;
        if classify {
            w.write_record(["row", "prediction", "probability"])
        } else {
            w.write_record(["row", "prediction"])
        }
        .expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.row.to_string(), format_number(r.prediction)];
            if let Some(p) = r.probability {
                rec.push(format_number(p));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Replaces positional row numbers with the given source indices.
    pub fn relabel_rows(&mut self, ids: &[usize]) {
        for r in &mut self.rows {
            r.row = ids[r.row];
        }
        if let Some(attrs) = &mut self.attributions {
            for a in attrs {
                a.row = ids[a.row];
            }
        }
    }

    pub fn set_top_features(&mut self, ranking: &[FeatureScore]) {
        self.top_features = ranking.iter().take(TOP_FEATURES).cloned().collect();
    }
}

/// Predicts every row of `table`. Classification reports the 0/1 label
/// at probability 0.5 plus the probability.
pub fn predict(model: &BoostedModel, table: &TabularDataset, exec: Exec) -> Result<PredictionReport, InferError> {
    let x = model.design(table)?;
    let cols: Vec<&crate::table::Column> = model
        .feature_names
        .iter()
        .map(|f| table.column(f).expect("design checked"))
        .collect();
    let rows = exec.map_range(x.len(), |i| {
        let m = model.margin(&x[i]);
        let joined: Vec<&str> = cols.iter().map(|c| c.cells[i].as_str()).collect();
        let inputs_digest = sha256_hex(joined.join("\u{1f}").as_bytes());
        let (prediction, probability) = match model.task {
            Task::Regression => (m, None),
            Task::BinaryClassification => {
                let p = sigmoid(m);
                (if p >= 0.5 { 1.0 } else { 0.0 }, Some(p))
            }
        };
        PredictionRow {
            row: i,
            inputs_digest,
            prediction,
            probability,
        }
    });
    Ok(PredictionReport {
        task: model.task,
        features: model.feature_names.clone(),
        rows,
        attributions: None,
        top_features: Vec::new(),
    })
}

/// Fraction of rows whose predicted label equals the target.
pub fn accuracy(model: &BoostedModel, table: &TabularDataset, rows: &[usize]) -> Result<f64, InferError> {
    let sub = table.take_rows(rows);
    let report = predict(model, &sub, Exec::Sequential)?;
    let y = super::gbm::numeric_column(&sub, &model.target)?;
    if y.is_empty() {
        return Ok(0.0);
    }
    let hits = report.rows.iter().zip(&y).filter(|(r, &t)| r.prediction == t).count();
    Ok(hits as f64 / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrainReport {
    pub features: Vec<String>,
    pub old_holdout_loss: f64,
    pub new_holdout_loss: f64,
    #[serde(skip)]
    pub trained: TrainedModel,
}

/// Retrains on the `k` highest-ranked features (all of them if fewer).
pub fn retrain_top_k(
    previous: &TrainedModel,
    table: &TabularDataset,
    ranking: &[FeatureScore],
    k: usize,
    cfg: &GbmConfig,
    exec: Exec,
) -> Result<RetrainReport, InferError> {
    if k == 0 {
        return Err(InferError::InvalidK);
    }
    let chosen: Vec<&str> = ranking.iter().take(k).map(|f| f.feature.as_str()).collect();
    // Keep the original feature order so k = all reproduces the model.
    let features: Vec<String> = previous
        .model
        .feature_names
        .iter()
        .filter(|f| chosen.contains(&f.as_str()))
        .cloned()
        .collect();
    let trained = train_gbm(table, &previous.model.target, &features, previous.model.task, cfg, exec)?;
    Ok(RetrainReport {
        features,
        old_holdout_loss: previous.final_holdout_loss(),
        new_holdout_loss: trained.final_holdout_loss(),
        trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Column;

    fn model(task: Task) -> BoostedModel {
        BoostedModel {
            trees: vec![],
            learning_rate: 0.1,
            base_score: 0.25,
            feature_names: vec!["a".into()],
            target: "y".into(),
            task,
        }
    }

    #[test]
    fn csv_headers() {
        let t = TabularDataset::new(vec![Column::new("a", vec!["1".into()])]).unwrap();
        let r = predict(&model(Task::Regression), &t, Exec::Sequential).unwrap();
        assert_eq!(r.to_csv(), b"row,prediction\r\n0,0.25\r\n");
        let r = predict(&model(Task::BinaryClassification), &t, Exec::Sequential).unwrap();
        let text = String::from_utf8(r.to_csv()).unwrap();
        assert!(text.starts_with("row,prediction,probability\r\n0,1,0.56"));
    }

    #[test]
    fn missing_feature() {
        let t = TabularDataset::new(vec![Column::new("b", vec!["1".into()])]).unwrap();
        assert_eq!(
            predict(&model(Task::Regression), &t, Exec::Sequential),
            Err(InferError::MissingFeature("a".into()))
        );
    }

    #[test]
    fn top_features_capped() {
        let mut r = PredictionReport {
            task: Task::Regression,
            features: vec![],
            rows: vec![],
            attributions: None,
            top_features: vec![],
        };
        let ranking: Vec<FeatureScore> = (0..15)
            .map(|i| FeatureScore { feature: format!("f{i}"), score: 1.0 })
            .collect();
        r.set_top_features(&ranking);
        assert_eq!(r.top_features.len(), TOP_FEATURES);
    }
}
