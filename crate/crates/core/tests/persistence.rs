mod common;

use chmm::cascade::{CascadeModel, FORMAT_VERSION};
use chmm::Error;

#[test]
fn save_load_round_trip_is_exact() {
    let model = common::small_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = CascadeModel::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_json().unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn invalid_row_sum_is_rejected_on_load() {
    let model = common::small_model();
    let mut doc: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
    let row = &mut doc["simple_models"][0]["transition"][0];
    let n = row.as_array().unwrap().len();
    *row = serde_json::Value::Array(
        (0..n)
            .map(|j| serde_json::json!(if j == 0 { 0.8 } else { 0.0 }))
            .collect(),
    );
    match CascadeModel::from_json(&doc.to_string()) {
        Err(Error::Validation(msg)) => assert!(msg.contains("sum"), "{msg}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unknown_format_version_is_rejected() {
    let model = common::small_model();
    let mut doc: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
    doc["format_version"] = serde_json::json!(999);
    match CascadeModel::from_json(&doc.to_string()) {
        Err(Error::UnsupportedVersion { found, expected }) => {
            assert_eq!(found, 999);
            assert_eq!(expected, FORMAT_VERSION);
        }
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn garbage_is_a_document_error() {
    assert!(matches!(CascadeModel::from_json("{not json"), Err(Error::Json(_))));
    assert!(matches!(CascadeModel::from_json("{}"), Err(Error::Validation(_))));
}
