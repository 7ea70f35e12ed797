use std::ffi::{c_char, CStr, CString};
use std::ptr;

use simfuse::cnn::{CnnParams, CnnShape};
use simfuse::corpus::tokenize;
use simfuse::embedding::EmbeddingTable;
use simfuse::fusion::{FusionParams, FusionWeights};
use simfuse::pipeline::ModelBundle;
use simfuse::tfidf::CorpusStats;
use simfuse_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = simfuse_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned())
}

fn write_bundle(dir: &std::path::Path) {
    let mut table = EmbeddingTable::new(4, 0).unwrap();
    for (i, w) in ["the", "cat", "sat", "dog", "ran"].iter().enumerate() {
        let mut v = vec![0.1; 4];
        v[i % 4] = 1.0;
        table.insert(*w, v).unwrap();
    }
    let stats = CorpusStats::from_parts(
        10,
        [("the", 6), ("cat", 2), ("sat", 2), ("dog", 1)]
            .into_iter()
            .map(|(w, n)| (w.to_owned(), n))
            .collect(),
    )
    .unwrap();
    let bundle = ModelBundle {
        stats,
        cnn: CnnParams::init(CnnShape::with_dim(4), 1).unwrap(),
        table,
        weights: FusionWeights::DEFAULT,
        fusion: FusionParams::weighted_sum(),
        n_max: 32,
    };
    bundle.save(dir).unwrap();
}

fn load(dir: &std::path::Path) -> *mut SimfuseModel {
    let path = c(dir.to_str().unwrap());
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { simfuse_model_load(path.as_ptr(), &mut model) },
        SimfuseStatus::Ok
    );
    assert!(!model.is_null());
    model
}

#[test]
fn version() {
    let v = unsafe { CStr::from_ptr(simfuse_version()) }
        .to_str()
        .unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn score_with_model() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    let model = load(dir.path());

    let mut s = SimfuseScores::default();
    let (a, b) = (c("The cat sat"), c("the cat sat"));
    assert_eq!(
        unsafe { simfuse_model_score(model, a.as_ptr(), b.as_ptr(), &mut s) },
        SimfuseStatus::Ok
    );
    assert_eq!(last_error(), None);
    assert_eq!(s.jaccard, 1.0);
    assert_eq!(s.tfidf, 1.0);
    assert!(s.similar);

    let bundle = ModelBundle::load(dir.path()).unwrap();
    let expected = simfuse::pipeline::score_pair(
        &tokenize("the dog ran").unwrap(),
        &tokenize("a cat").unwrap(),
        &bundle,
    )
    .unwrap();
    let (a, b) = (c("the dog ran"), c("a cat"));
    assert_eq!(
        unsafe { simfuse_model_score(model, a.as_ptr(), b.as_ptr(), &mut s) },
        SimfuseStatus::Ok
    );
    assert_eq!(s.fused, expected.fused);
    assert_eq!(s.w2vcnn, expected.w2vcnn);

    let mut w = SimfuseWeights::default();
    assert_eq!(
        unsafe { simfuse_model_weights(model, &mut w) },
        SimfuseStatus::Ok
    );
    assert_eq!((w.alpha, w.beta, w.gamma), (0.38, 0.40, 0.22));

    let empty = c("   ");
    assert_eq!(
        unsafe { simfuse_model_score(model, empty.as_ptr(), b.as_ptr(), &mut s) },
        SimfuseStatus::EmptySentence
    );
    assert!(last_error().is_some());
    unsafe { simfuse_model_free(model) };
}

#[test]
fn load_errors() {
    let mut model = ptr::dangling_mut::<SimfuseModel>();
    let missing = c("/definitely/not/a/model");
    assert_eq!(
        unsafe { simfuse_model_load(missing.as_ptr(), &mut model) },
        SimfuseStatus::Io
    );
    assert!(model.is_null());
    assert!(last_error().unwrap().contains("stats.tsv"));

    assert_eq!(
        unsafe { simfuse_model_load(ptr::null(), &mut model) },
        SimfuseStatus::NullPointer
    );
    assert_eq!(
        unsafe { simfuse_model_load(missing.as_ptr(), ptr::null_mut()) },
        SimfuseStatus::NullPointer
    );
    assert!(last_error().unwrap().contains("out"));

    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    std::fs::write(dir.path().join("cnn.params"), "garbage\n").unwrap();
    let path = c(dir.path().to_str().unwrap());
    assert_eq!(
        unsafe { simfuse_model_load(path.as_ptr(), &mut model) },
        SimfuseStatus::Format
    );
    unsafe { simfuse_model_free(ptr::null_mut()) };
}

#[test]
fn null_and_invalid_arguments() {
    let mut s = SimfuseScores::default();
    let a = c("a");
    assert_eq!(
        unsafe { simfuse_model_score(ptr::null(), a.as_ptr(), a.as_ptr(), &mut s) },
        SimfuseStatus::NullPointer
    );
    let bad = [0xffu8 as c_char, 0];
    let mut d = 0usize;
    assert_eq!(
        unsafe { simfuse_edit_distance(bad.as_ptr(), a.as_ptr(), &mut d) },
        SimfuseStatus::InvalidUtf8
    );
    let mut w = SimfuseWeights::default();
    assert_eq!(
        unsafe { simfuse_calibrate_weights(f64::NAN, 0.0, 0.0, &mut w) },
        SimfuseStatus::InvalidArgument
    );
    let mut out = 0.0;
    let bad_weights = SimfuseWeights {
        alpha: 0.5,
        beta: 0.5,
        gamma: 0.5,
    };
    assert_eq!(
        unsafe { simfuse_fuse_weighted(1.0, 1.0, 1.0, &bad_weights, &mut out) },
        SimfuseStatus::Config
    );
}

#[test]
fn standalone_functions() {
    let mut w = SimfuseWeights::default();
    assert_eq!(
        unsafe { simfuse_calibrate_weights(0.79, 0.80, 0.25, &mut w) },
        SimfuseStatus::Ok
    );
    assert!((w.alpha - 0.3857).abs() < 1e-3 && (w.gamma - 0.2248).abs() < 1e-3);

    let mut fused = 0.0;
    let defaults = SimfuseWeights {
        alpha: 0.38,
        beta: 0.40,
        gamma: 0.22,
    };
    assert_eq!(
        unsafe { simfuse_fuse_weighted(0.253, 0.842, 0.451, &defaults, &mut fused) },
        SimfuseStatus::Ok
    );
    assert!((fused - 0.53216).abs() < 1e-12);

    assert!(simfuse_classify(0.5));
    assert!(!simfuse_classify(0.483));

    let (a, b) = (c("kitten"), c("sitting"));
    let mut d = 0usize;
    assert_eq!(
        unsafe { simfuse_edit_distance(a.as_ptr(), b.as_ptr(), &mut d) },
        SimfuseStatus::Ok
    );
    assert_eq!(d, 3);

    let (a, b) = (c("a b c"), c("a b d"));
    let mut j = 0.0;
    assert_eq!(
        unsafe { simfuse_jaccard(a.as_ptr(), b.as_ptr(), &mut j) },
        SimfuseStatus::Ok
    );
    assert_eq!(j, 0.5);
}

#[test]
fn errors_are_per_thread() {
    let bad = c("x");
    let mut d = 0usize;
    assert_eq!(
        unsafe { simfuse_edit_distance(bad.as_ptr(), ptr::null(), &mut d) },
        SimfuseStatus::NullPointer
    );
    assert!(last_error().is_some());
    std::thread::spawn(|| assert_eq!(last_error(), None))
        .join()
        .unwrap();
}
