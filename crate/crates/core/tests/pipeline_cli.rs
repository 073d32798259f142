//! Train/explain/evaluate/serve on a small generated corpus: bundle schema,
//! index, error paths, HTTP serving and rerun determinism.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use rexnet::audio_io::Emotion;
use rexnet::pipeline::{
    cmd_evaluate, cmd_explain, cmd_train, load_run, Config, ContrastSelection, ExplanationBundle, StaticServer,
    TrainedRun, BUNDLE_SCHEMA, INDEX_SCHEMA,
};
use rexnet::RexError;
use serde_json::Value;

const SMALL: &str = r#"{
  "synthetic": true,
  "synthetic_per_class": 8,
  "pretrain": {"epochs": 4},
  "speaker": {"epochs": 2},
  "gan": {"epochs": 2, "classifier_epochs": 2},
  "joint": {"epochs": 1}
}"#;

fn small_config() -> Config {
    serde_json::from_str(SMALL).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("pipeline_cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// One small trained run shared by the tests of this file.
fn fixture() -> &'static (PathBuf, TrainedRun) {
    static RUN: OnceLock<(PathBuf, TrainedRun)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = scratch("fixture");
        cmd_train(&small_config(), &dir).unwrap();
        let run = load_run(&dir).unwrap();
        (dir, run)
    })
}

fn first_test_clip(run: &TrainedRun) -> String {
    let i = run.corpus.test_indices()[0];
    run.corpus.clips()[i].meta.clip_id.clone()
}

fn validator(schema: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str::<Value>(schema).unwrap()).unwrap()
}

fn schema_errors(schema: &str, doc: &Value) -> Vec<String> {
    validator(schema).iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}

#[test]
fn bundle_matches_published_schema_and_files_exist() {
    let (_, run) = fixture();
    let out = scratch("bundle");
    let id = first_test_clip(run);
    let b = cmd_explain(run, &id, &ContrastSelection::All, &out).unwrap();
    assert_eq!(b.contrasts.len(), 7);
    assert!(b.contrasts.iter().all(|c| c.contrast != b.prediction.predicted));

    let text = std::fs::read_to_string(out.join(format!("bundles/{id}.json"))).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let errors = schema_errors(BUNDLE_SCHEMA, &doc);
    assert!(errors.is_empty(), "{errors:#?}");
    for p in b.paths() {
        assert!(out.join(p).is_file(), "missing {p}");
    }
    assert!(b.contrasts.iter().all(|c| c.saliency.per_frame.len() == 297));
    // A generator was trained, so every explained contrast carries an image.
    assert!(b
        .contrasts
        .iter()
        .filter(|c| c.available)
        .all(|c| c.counterfactual.as_ref().unwrap().synthetic_image.is_some()));

    let reparsed = ExplanationBundle::from_json(&text).unwrap();
    assert_eq!(reparsed.to_json().unwrap(), text);
}

#[test]
fn schema_rejects_broken_bundles() {
    let (_, run) = fixture();
    let out = scratch("broken");
    let id = first_test_clip(run);
    cmd_explain(run, &id, &ContrastSelection::All, &out).unwrap();
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(format!("bundles/{id}.json"))).unwrap()).unwrap();

    let mut short = doc.clone();
    short["contrasts"].as_array_mut().unwrap().pop();
    assert!(!schema_errors(BUNDLE_SCHEMA, &short).is_empty());
    let mut absolute = doc.clone();
    absolute["clip"]["audio"] = Value::from("/etc/passwd");
    assert!(!schema_errors(BUNDLE_SCHEMA, &absolute).is_empty());
    let mut version = doc;
    version["schema_version"] = Value::from(2);
    assert!(!schema_errors(BUNDLE_SCHEMA, &version).is_empty());
    assert!(ExplanationBundle::from_json(&version.to_string()).is_err());
}

#[test]
fn index_is_sorted_and_valid() {
    let (_, run) = fixture();
    let out = scratch("index");
    let test = run.corpus.test_indices();
    let mut ids: Vec<String> = test.iter().take(3).map(|&i| run.corpus.clips()[i].meta.clip_id.clone()).collect();
    for id in ids.iter().rev() {
        cmd_explain(run, id, &ContrastSelection::All, &out).unwrap();
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    let errors = schema_errors(INDEX_SCHEMA, &doc);
    assert!(errors.is_empty(), "{errors:#?}");
    let listed: Vec<&str> = doc["clips"].as_array().unwrap().iter().map(|c| c["clip_id"].as_str().unwrap()).collect();
    ids.sort();
    assert_eq!(listed, ids);
}

#[test]
fn unknown_clip_lists_valid_ids() {
    let (_, run) = fixture();
    let err = cmd_explain(run, "no-such-clip", &ContrastSelection::All, &scratch("unknown")).unwrap_err();
    match err {
        RexError::UnknownClip { clip_id, valid } => {
            assert_eq!(clip_id, "no-such-clip");
            assert!(valid.contains(&run.corpus.clips()[0].meta.clip_id), "{valid}");
        }
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn self_contrast_is_rejected_and_unrequested_entries_are_marked() {
    let (_, run) = fixture();
    let out = scratch("contrasts");
    let id = first_test_clip(run);
    let all = cmd_explain(run, &id, &ContrastSelection::All, &out).unwrap();
    let predicted = all.prediction.predicted;
    let err = cmd_explain(run, &id, &ContrastSelection::Only(vec![predicted]), &out).unwrap_err();
    assert!(matches!(err, RexError::SelfContrast(_)), "{err}");

    let other = Emotion::ALL.into_iter().find(|&e| e != predicted).unwrap();
    let one = cmd_explain(run, &id, &ContrastSelection::Only(vec![other]), &out).unwrap();
    assert_eq!(one.contrasts.len(), 7);
    for c in &one.contrasts {
        if c.contrast == other {
            assert_eq!(c.available, all.contrasts.iter().find(|a| a.contrast == other).unwrap().available);
        } else {
            assert!(!c.available);
            assert_eq!(c.unavailable_reason.as_deref(), Some("contrast not requested"));
        }
    }
}

#[test]
fn evaluate_honours_k_fraction_and_row_order() {
    let (dir, _) = fixture();
    let ev = cmd_evaluate(dir, Some(0.4)).unwrap();
    assert_eq!(ev.report.k_fraction, 0.4);
    let main = ev.report.ablation.iter().find(|s| s.k_fraction == 0.4).unwrap();
    assert_eq!(main.absolute.k_fraction, 0.4);
    assert_eq!(ev.report.absolute_ablation_decrease, main.absolute.decrease);
    assert!(!ev.checks.is_empty());

    let text = std::fs::read_to_string(dir.join("metrics.txt")).unwrap();
    let rows = [
        "Initial concept",
        "Final concept",
        "Absolute saliency",
        "Contrastive saliency",
        "Counterfactual",
        "Cue difference relation",
    ];
    let at: Vec<usize> = rows.iter().map(|r| text.find(r).unwrap_or_else(|| panic!("no row {r}"))).collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{text}");
    assert!(text.contains("PASS") || text.contains("FAIL"));
}

fn get(port: u16, path: &str) -> (u16, String, Vec<u8>) {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(s, "GET {path} HTTP/1.0\r\nHost: localhost\r\n\r\n").unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let ctype = head
        .lines()
        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-type:").map(|v| v.trim().to_string()))
        .unwrap_or_default();
    (status, ctype, raw[split + 4..].to_vec())
}

#[test]
fn serve_bundle_directory() {
    let (_, run) = fixture();
    let out = scratch("serve");
    let id = first_test_clip(run);
    cmd_explain(run, &id, &ContrastSelection::All, &out).unwrap();
    std::fs::write(out.parent().unwrap().join("secret.txt"), "outside").unwrap();

    let server = StaticServer::bind(&out, 0).unwrap().spawn();
    let port = server.port();

    let (status, ctype, body) = get(port, "/index.json");
    assert_eq!((status, ctype.as_str()), (200, "application/json"));
    let index: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(index["clips"][0]["clip_id"], Value::from(id.clone()));
    assert!(index["clips"][0]["predicted"].is_string());

    let (status, _, body) = get(port, &format!("/bundles/{id}.json"));
    assert_eq!(status, 200);
    let errors = schema_errors(BUNDLE_SCHEMA, &serde_json::from_slice(&body).unwrap());
    assert!(errors.is_empty(), "{errors:#?}");

    let (status, ctype, body) = get(port, &format!("/audio/{id}.wav"));
    assert_eq!((status, ctype.as_str()), (200, "audio/wav"));
    assert_eq!(&body[..4], b"RIFF");

    assert_eq!(get(port, "/bundles/nope.json").0, 404);
    assert_eq!(get(port, "/../secret.txt").0, 404);
    assert_eq!(get(port, "/%2e%2e/secret.txt").0, 404);

    // A second server on the same port must fail instead of sharing it.
    assert!(StaticServer::bind(&out, port).is_err());
    server.stop();
}

#[test]
fn serve_requires_an_index() {
    assert!(StaticServer::bind(&scratch("empty"), 0).is_err());
}

#[test]
fn skip_gan_falls_back_to_samples() {
    let dir = scratch("skip_gan");
    let cfg = Config {
        skip_gan: true,
        ..small_config()
    };
    let trace = cmd_train(&cfg, &dir).unwrap();
    assert!(trace.gan.is_none());
    assert!(!dir.join("stargan.rxn").exists());
    let run = load_run(&dir).unwrap();
    assert!(run.gan.is_none());
    let b = cmd_explain(&run, &first_test_clip(&run), &ContrastSelection::All, &dir.join("bundles")).unwrap();
    for c in b.contrasts.iter().filter(|c| c.available) {
        let cf = c.counterfactual.as_ref().unwrap();
        assert!(cf.synthetic_image.is_none());
        assert!(cf.audio.is_some());
    }
}

fn rexnet_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rexnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_rerun_is_byte_identical() {
    let root = scratch("determinism");
    let config = root.join("small.json");
    std::fs::write(&config, SMALL).unwrap();
    let mut traces = Vec::new();
    let mut models = Vec::new();
    for run in ["a", "b"] {
        let out = root.join(run);
        let o = rexnet_cli(&["train", "--config", config.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        traces.push(std::fs::read(out.join("metrics_trace.json")).unwrap());
        models.push(std::fs::read(out.join("rexnet.rxn")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(models[0], models[1]);
    let trace: Value = serde_json::from_slice(&traces[0]).unwrap();
    assert_eq!(trace["seed"], Value::from(3));
}

#[test]
fn cli_without_dataset_explains_the_fix() {
    let o = rexnet_cli(&["train", "--out", scratch("nodata").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--synthetic") && err.contains("--data"), "{err}");
}
