mod common;

use std::sync::{Arc, Mutex};

use medpipe::ingest::{parse_tabular, FileArtifact};
use medpipe::matching::{
    assign, embed, route_image, select_model, Classification, EmbedError, HashedTrigramEmbedder, MatchSettings,
    MatchStrategy, ModelDatabase, ModelDescriptor, RemoteEmbedder, RemoteVlm, RouteError, RouteThresholds,
    ScriptedVlm, SelectError, EMBEDDING_DIM,
};
use proptest::prelude::*;

fn texts(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn remote_embedder_contract() {
    let seen: Arc<Mutex<Vec<serde_json::Value>>> = Arc::default();
    let log = seen.clone();
    let url = common::serve(move |req| match req.path.as_str() {
        "/health" => (200, r#"{"model":"m","dim":768}"#.into()),
        "/embed" => {
            let body: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
            log.lock().unwrap().push(body.clone());
            let n = body["texts"].as_array().unwrap().len();
            let mut v = vec![0.0; EMBEDDING_DIM];
            v[0] = 3.0;
            v[1] = 4.0;
            (200, serde_json::json!({ "vectors": vec![v; n] }).to_string())
        }
        _ => (404, "{}".into()),
    });
    let e = RemoteEmbedder::new(&url);
    assert_eq!(e.verify().unwrap().dim, EMBEDDING_DIM);
    let out = embed(&texts(&["age", "gender"]), &e).unwrap();
    assert_eq!(out.len(), 2);
    // Normalised on the client side.
    assert!((out[0].norm() - 1.0).abs() <= 1e-12);
    assert!((out[0].as_slice()[0] - 0.6).abs() <= 1e-12);
    assert_eq!(seen.lock().unwrap()[0], serde_json::json!({"texts": ["age", "gender"]}));
}

#[test]
fn remote_embedder_rejects_wrong_dimension() {
    let url = common::serve(|req| match req.path.as_str() {
        "/health" => (200, r#"{"model":"m","dim":384}"#.into()),
        _ => (200, serde_json::json!({ "vectors": [vec![1.0; 384]] }).to_string()),
    });
    let e = RemoteEmbedder::new(&url);
    assert_eq!(e.verify(), Err(EmbedError::DimensionMismatch { expected: 768, got: 384 }));
    assert_eq!(
        embed(&texts(&["age"]), &e),
        Err(EmbedError::DimensionMismatch { expected: 768, got: 384 })
    );
}

#[test]
fn remote_embedder_server_error_is_unavailable() {
    let url = common::serve(|_| (500, "{}".into()));
    assert!(matches!(embed(&texts(&["age"]), &RemoteEmbedder::new(&url)), Err(EmbedError::EmbedderUnavailable(_))));
    // Nothing listens on port 9 of localhost.
    assert!(matches!(RemoteEmbedder::new("http://127.0.0.1:9").verify(), Err(EmbedError::EmbedderUnavailable(_))));
}

#[test]
fn sidecar_and_fallback_pick_the_same_model() {
    let table = parse_tabular(&common::toy_artifact()).unwrap();
    let reg = common::toy_registry();
    let settings = MatchSettings::default();
    let local = select_model(&table, &reg, &HashedTrigramEmbedder, &settings).unwrap();
    let remote = select_model(&table, &reg, &RemoteEmbedder::new(common::mock_sidecar()), &settings).unwrap();
    assert_eq!(local.model.id, remote.model.id);
    assert_eq!(local.filtered, remote.filtered);
}

#[test]
fn extra_columns_are_filtered_out() {
    let mut csv = String::from("notes,");
    csv.push_str(&common::MODEL_01_HEADERS.join(","));
    csv.push('\n');
    for row in common::toy_rows(10, 1) {
        csv.push_str(&format!("seen,{}\n", row.join(",")));
    }
    let table = parse_tabular(&FileArtifact::new("t.csv", csv.into_bytes())).unwrap();
    let sel = select_model(&table, &common::toy_registry(), &HashedTrigramEmbedder, &MatchSettings::default()).unwrap();
    assert_eq!(sel.model.id, "MODEL_01");
    assert_eq!(sel.filtered.headers(), common::MODEL_01_HEADERS.to_vec());
    assert_eq!(sel.evaluated.len(), 3);
}

#[test]
fn renamed_headers_still_match() {
    let csv = "Age,Gender,ecog,living-situation,antidepressants,vomiting,anxiety\n50,F,1,alone,no,no,yes\n";
    let table = parse_tabular(&FileArtifact::new("t.csv", csv.as_bytes().to_vec())).unwrap();
    let sel = select_model(&table, &common::toy_registry(), &HashedTrigramEmbedder, &MatchSettings::default()).unwrap();
    assert_eq!(sel.model.id, "MODEL_01");
    assert_eq!(sel.filtered.headers(), common::MODEL_01_HEADERS.to_vec());
    assert_eq!(sel.filtered.column("living_situation").unwrap().cells, vec!["alone"]);
}

#[test]
fn unrelated_dataset_is_ineligible() {
    let csv = "zip_code,hair_colour\n1,a\n2,b\n";
    let table = parse_tabular(&FileArtifact::new("t.csv", csv.as_bytes().to_vec())).unwrap();
    assert!(matches!(
        select_model(&table, &common::toy_registry(), &HashedTrigramEmbedder, &MatchSettings::default()),
        Err(SelectError::NoEligibleModel { .. })
    ));
}

#[test]
fn registry_json_round_trip() {
    let reg = common::toy_registry();
    let back = ModelDatabase::from_json(&reg.to_json()).unwrap();
    // The file groups table models before image models.
    let sorted = |db: &ModelDatabase| {
        let mut m = db.models().to_vec();
        m.sort_by(|a, b| a.id.cmp(&b.id));
        m
    };
    assert_eq!(sorted(&back), sorted(&reg));
    assert_eq!(back.to_json(), reg.to_json());
}

#[test]
fn routes_through_scripted_vlm() {
    let reg = common::toy_registry();
    let images = vec![FileArtifact::new("a.png", common::png_bytes(8, 8, 1))];
    let vlm = ScriptedVlm::new(vec![
        Classification { label: "colon colonoscopy scan".into(), confidence: 0.9 },
        Classification { label: "polyps".into(), confidence: 0.8 },
    ]);
    let route = route_image(&images, &reg, &vlm, RouteThresholds::default(), 0).unwrap();
    assert_eq!(route.model_id, "MODEL_02");
    assert_eq!(route.attempts, 1);
}

#[test]
fn low_confidence_exhausts_attempts() {
    let reg = common::toy_registry();
    let images = vec![FileArtifact::new("a.png", common::png_bytes(8, 8, 1))];
    let vlm = ScriptedVlm::new(vec![Classification { label: "colon colonoscopy scan".into(), confidence: 0.2 }]);
    assert_eq!(
        route_image(&images, &reg, &vlm, RouteThresholds::default(), 0),
        Err(RouteError::RoutingInconclusive { attempts: 3 })
    );
}

#[test]
fn remote_vlm_wire_format() {
    let url = common::serve(|req| {
        let body: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
        assert_eq!(req.path, "/classify");
        assert!(body["image"].as_str().is_some_and(|s| !s.is_empty()));
        match body["task"].as_str().unwrap() {
            "modality" => (200, r#"{"label":"colon colonoscopy scan","confidence":0.95}"#.into()),
            _ => {
                assert_eq!(body["modality"], "colon colonoscopy scan");
                (200, r#"{"label":"adenomatous polyps","confidence":0.7}"#.into())
            }
        }
    });
    let images = vec![FileArtifact::new("a.png", common::png_bytes(8, 8, 1))];
    let route = route_image(&images, &common::toy_registry(), &RemoteVlm { base_url: url }, RouteThresholds::default(), 1).unwrap();
    assert_eq!(route.model_id, "MODEL_02");
}

#[test]
fn table_only_registry_rejects_images() {
    let reg = ModelDatabase::from_models(vec![ModelDescriptor::table("M", "x", &["a", "b"], "b")]).unwrap();
    let images = vec![FileArtifact::new("a.png", common::png_bytes(8, 8, 1))];
    assert_eq!(
        route_image(&images, &reg, &ScriptedVlm::new(vec![]), RouteThresholds::default(), 0),
        Err(RouteError::NoImageModels)
    );
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0f64..1.0, c), r))
}

proptest! {
    #[test]
    fn raising_threshold_never_adds_pairs(sims in matrix(), lo in 0.0f64..1.0, d in 0.0f64..0.5,
                                          global in any::<bool>()) {
        let s = if global { MatchStrategy::Global } else { MatchStrategy::PerField };
        let a = assign(&sims, lo, s).iter().filter(|p| p.is_some()).count();
        let b = assign(&sims, lo + d, s).iter().filter(|p| p.is_some()).count();
        prop_assert!(b <= a);
    }

    #[test]
    fn assignments_are_injective(sims in matrix(), t in 0.0f64..1.0) {
        for s in [MatchStrategy::PerField, MatchStrategy::Global] {
            let cols: Vec<usize> = assign(&sims, t, s).iter().flatten().map(|p| p.0).collect();
            let mut dedup = cols.clone();
            dedup.sort_unstable();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), cols.len());
        }
    }
}
