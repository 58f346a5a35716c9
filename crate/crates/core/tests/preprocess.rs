mod common;

use medpipe::ingest::{parse_tabular, FileArtifact};
use medpipe::preprocess::{
    apply_edits, apply_params, execute_plan, profile_columns, recommend, OverrideRejection, PlanConfig, PlanEdit,
    PlanMode, PreprocessError, PreprocessingPlan, Step, TransformParams,
};
use medpipe::{Column, Exec, TabularDataset};
use proptest::prelude::*;

fn toy() -> TabularDataset {
    parse_tabular(&FileArtifact::new("toy.csv", common::toy_csv_bytes(80, 4))).unwrap()
}

#[test]
fn toy_defaults() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &PlanConfig::default()).unwrap();
    assert_eq!(plan.mode, PlanMode::UserGuided);
    let steps = |c: &str| plan.steps_for(c).cloned().collect::<Vec<_>>();
    assert_eq!(steps("age"), vec![Step::MedianImpute, Step::ZScore]);
    assert_eq!(steps("gender"), vec![Step::ModeImpute, Step::MapBinary { positive: None }]);
    assert_eq!(steps("living_situation"), vec![Step::ModeImpute, Step::OneHot]);
    assert_eq!(steps("anxiety"), vec![Step::ModeImpute, Step::MapBinary { positive: None }]);

    let (out, _) = execute_plan(&t, &plan, Exec::default()).unwrap();
    let levels = ["alone", "care home", "family"];
    for l in levels {
        assert!(out.column(&format!("living_situation={l}")).is_some());
    }
    assert!(out.column("living_situation").is_none());
    assert!(out.columns().iter().all(|c| c.cells.iter().all(|v| v.parse::<f64>().is_ok())));
}

#[test]
fn plan_and_params_json_round_trip() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &PlanConfig::default()).unwrap();
    assert_eq!(PreprocessingPlan::from_json(&plan.to_json()).unwrap(), plan);
    let (_, params) = execute_plan(&t, &plan, Exec::default()).unwrap();
    let back: TransformParams = serde_json::from_str(&params.to_json()).unwrap();
    assert_eq!(back, params);
}

#[test]
fn replay_matches_fit() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &PlanConfig::default()).unwrap();
    let (out, params) = execute_plan(&t, &plan, Exec::default()).unwrap();
    assert_eq!(apply_params(&t, &params, Exec::default()).unwrap(), out);
}

#[test]
fn sequential_and_parallel_agree() {
    let t = toy();
    let metas = profile_columns(&t, Exec::Sequential).unwrap();
    assert_eq!(metas, profile_columns(&t, Exec::Parallel).unwrap());
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &PlanConfig::default()).unwrap();
    assert_eq!(
        execute_plan(&t, &plan, Exec::Sequential).unwrap(),
        execute_plan(&t, &plan, Exec::Parallel).unwrap()
    );
}

#[test]
fn edits_merge_over_defaults() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let cfg = PlanConfig::default();
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &cfg).unwrap();
    let edited = apply_edits(
        &plan,
        &[
            PlanEdit::Set { column: "age".into(), step: Step::MinMax },
            PlanEdit::Drop { column: "vomiting".into() },
        ],
        &metas,
        &cfg,
    )
    .unwrap();
    assert_eq!(edited.steps_for("age").cloned().collect::<Vec<_>>(), vec![Step::MedianImpute, Step::MinMax]);
    assert!(matches!(edited.steps_for("vomiting").last(), Some(Step::Drop { .. })));
    let (out, _) = execute_plan(&t, &edited, Exec::default()).unwrap();
    assert!(out.column("vomiting").is_none());
    let age = out.column("age").unwrap().to_f64().unwrap();
    assert!(age.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn bad_edits_are_invalid() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let cfg = PlanConfig::default();
    let plan = recommend(&metas, Some("anxiety"), 4096, None, &cfg).unwrap();
    assert!(matches!(
        apply_edits(&plan, &[PlanEdit::Drop { column: "nope".into() }], &metas, &cfg),
        Err(PreprocessError::InvalidEdit(_) | PreprocessError::UnknownColumn(_))
    ));
    assert!(apply_edits(&plan, &[PlanEdit::Set { column: "gender".into(), step: Step::ZScore }], &metas, &cfg).is_err());
}

#[test]
fn forced_auto_rejects_edits() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let cfg = PlanConfig { force_auto: true, ..Default::default() };
    let edits = [PlanEdit::Drop { column: "age".into() }];
    assert_eq!(
        recommend(&metas, Some("anxiety"), 4096, Some(&edits), &cfg),
        Err(PreprocessError::OverridesRejected { reason: OverrideRejection::AutoMode })
    );
}

#[test]
fn gate_is_exclusive() {
    let t = toy();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let cfg = PlanConfig::default();
    let at = recommend(&metas, None, cfg.size_gate_bytes, None, &cfg).unwrap();
    let over = recommend(&metas, None, cfg.size_gate_bytes + 1, None, &cfg).unwrap();
    assert_eq!((at.mode, over.mode), (PlanMode::UserGuided, PlanMode::Auto));
}

#[test]
fn unseen_levels_on_replay() {
    let t = TabularDataset::new(vec![
        Column::new("site", ["a", "b", "a", "c"].map(String::from).to_vec()),
        Column::new("flag", ["y", "n", "y", "n"].map(String::from).to_vec()),
    ])
    .unwrap();
    let metas = profile_columns(&t, Exec::default()).unwrap();
    let plan = recommend(&metas, None, 10, None, &PlanConfig::default()).unwrap();
    let (_, params) = execute_plan(&t, &plan, Exec::default()).unwrap();
    let fresh = TabularDataset::new(vec![
        Column::new("site", vec!["z".into()]),
        Column::new("flag", vec!["y".into()]),
    ])
    .unwrap();
    let out = apply_params(&fresh, &params, Exec::default()).unwrap();
    for l in ["a", "b", "c"] {
        assert_eq!(out.column(&format!("site={l}")).unwrap().cells, vec!["0"]);
    }
    let bad = TabularDataset::new(vec![Column::new("site", vec!["a".into()]), Column::new("flag", vec!["maybe".into()])]).unwrap();
    assert!(matches!(apply_params(&bad, &params, Exec::default()), Err(PreprocessError::UnseenLevel { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zscore_standardises(values in prop::collection::vec(-1e6f64..1e6, 3..60)) {
        let distinct = values.iter().map(|v| v.to_bits()).collect::<std::collections::BTreeSet<_>>().len();
        prop_assume!(distinct > 2);
        let t = TabularDataset::new(vec![Column::from_numbers("x", &values)]).unwrap();
        let metas = profile_columns(&t, Exec::default()).unwrap();
        let mut plan = recommend(&metas, None, 10, None, &PlanConfig::default()).unwrap();
        plan.steps.retain(|s| s.column != "x");
        plan.steps.push(medpipe::preprocess::PlanStep::new("x", Step::ZScore));
        let (out, _) = execute_plan(&t, &plan, Exec::default()).unwrap();
        let z = out.column("x").unwrap().to_f64().unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!(mean.abs() <= 1e-9, "mean {mean}");
        prop_assert!((sd - 1.0).abs() <= 1e-9, "sd {sd}");
    }
}
