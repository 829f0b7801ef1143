use ordinalkit::data::{apply_normalization, fit_normalization, read_csv};
use ordinalkit::models::{ModelDocument, ModelSpec, Prediction, MODEL_NAMES};
use ordinalkit::rounding::{RoundingStrategy, ThresholdMap};
use ordinalkit::synth::{generate, SynthData, SynthParams};
use ordinalkit::LabelSpace;
use proptest::prelude::*;

fn small_spec(name: &str) -> ModelSpec {
    let json = match name {
        "rf" | "orf" => format!(r#"{{"model": "{name}", "n_trees": 8}}"#),
        "nnrank" | "orcnn" | "coral" | "corn" | "condor" | "spacecutter" => {
            format!(r#"{{"model": "{name}", "epochs": 4}}"#)
        }
        _ => format!(r#"{{"model": "{name}"}}"#),
    };
    serde_json::from_str(&json).unwrap()
}

fn data() -> SynthData {
    generate(&SynthParams::new(300, 21)).unwrap()
}

#[test]
fn every_registered_model_fits_predicts_and_round_trips() {
    let data = data();
    let ds = apply_normalization(&data.dataset, &fit_normalization(&data.dataset).unwrap()).unwrap();
    let (x, y) = (ds.features(), ds.levels());
    let space = ds.level_space().unwrap();
    for name in MODEL_NAMES {
        let spec = small_spec(name);
        assert_eq!(spec.name(), name);
        let fitted = spec.fit(&x, ds.feature_names(), &y, &space, 5).unwrap();
        let pred = fitted.predict(&x).unwrap();
        match &pred {
            Prediction::Raw(r) => {
                assert!(spec.is_regressor(), "{name}");
                assert!(r.iter().all(|v| v.is_finite()), "{name}");
            }
            Prediction::Labels(l) => {
                assert!(!spec.is_regressor(), "{name}");
                assert!(l.iter().all(|&v| space.contains(v)), "{name}");
            }
        }
        let doc = ModelDocument::new(spec.clone(), fitted.clone());
        let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back, doc, "{name}");
        assert_eq!(back.model.predict(&x).unwrap(), pred, "{name}");

        let again = spec.fit(&x, ds.feature_names(), &y, &space, 5).unwrap();
        assert_eq!(again, fitted, "{name} is not deterministic under a fixed seed");
    }
}

#[test]
fn unknown_model_keys_are_rejected() {
    assert!(serde_json::from_str::<ModelSpec>(r#"{"model": "ridge", "lamda": 1.0}"#).is_err());
    assert!(serde_json::from_str::<ModelSpec>(r#"{"model": "xgboost"}"#).is_err());
}

#[test]
fn model_document_rejects_other_versions() {
    let data = data();
    let spec = small_spec("ols");
    let ds = &data.dataset;
    let fitted = spec
        .fit(&ds.features(), ds.feature_names(), &ds.levels(), &ds.level_space().unwrap(), 0)
        .unwrap();
    let json = ModelDocument::new(spec, fitted).to_json().unwrap();
    let bumped = json.replacen("\"format_version\":1", "\"format_version\":99", 1);
    assert!(ModelDocument::from_json(&bumped).is_err());
}

#[test]
fn csv_round_trip_preserves_the_dataset() {
    let ds = data().dataset;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn grids_containing_half_never_lose_to_half_rounding() {
    let data = data();
    let ds = &data.dataset;
    let space = ds.level_space().unwrap();
    let (x, y) = (ds.features(), ds.levels());
    let Prediction::Raw(raw) = small_spec("ridge").fit(&x, ds.feature_names(), &y, &space, 0).unwrap().predict(&x).unwrap()
    else {
        panic!("ridge is a regressor");
    };
    let cost = |s: &str| {
        let strategy: RoundingStrategy = serde_json::from_str(s).unwrap();
        let map = strategy.fit(&raw, &y, &space, 1).unwrap();
        ordinalkit::rounding::total_abs_deviation(&raw, &y, &map)
    };
    let half = cost(r#"{"strategy": "half"}"#);
    assert!(cost(r#"{"strategy": "graph", "grid": "R1"}"#) <= half);
    assert!(cost(r#"{"strategy": "graph", "grid": "R2"}"#) <= half);
    assert!(cost(r#"{"strategy": "global", "grid": "R1"}"#) <= half);
}

proptest! {
    #[test]
    fn threshold_maps_are_monotone_and_stay_in_range(
        lo in -3i32..3,
        offsets in prop::collection::vec(0.01f64..0.99, 1..6),
        mut xs in prop::collection::vec(-20.0f64..20.0, 2..40),
    ) {
        let map = ThresholdMap::new(lo, offsets.clone()).unwrap();
        let space = LabelSpace::range(lo, lo + offsets.len() as i32).unwrap();
        xs.sort_by(f64::total_cmp);
        let out = map.apply_all(&xs);
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(out.iter().all(|&v| space.contains(v)));
    }

    #[test]
    fn graph_rounding_never_loses_to_half(
        seed in 0u64..1000,
        n in 1usize..60,
    ) {
        use rand::Rng;
        let mut r = ordinalkit::rng::stream(seed, 0);
        let space = LabelSpace::range(1, 5).unwrap();
        let y: Vec<i32> = (0..n).map(|_| r.random_range(1..=5)).collect();
        let raw: Vec<f64> = y.iter().map(|&v| v as f64 + r.random_range(-1.2..1.2)).collect();
        let half = ThresholdMap::constant(&space, 0.5).unwrap();
        let graph: RoundingStrategy = serde_json::from_str(r#"{"strategy": "graph", "grid": "R1"}"#).unwrap();
        let fit = graph.fit(&raw, &y, &space, 0).unwrap();
        prop_assert!(
            ordinalkit::rounding::total_abs_deviation(&raw, &y, &fit)
                <= ordinalkit::rounding::total_abs_deviation(&raw, &y, &half)
        );
    }
}
