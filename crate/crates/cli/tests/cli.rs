use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srspla::synth::{gen_session, DatasetConfig, SessionSpec};
use srspla::trace_format::{write_trace, DeviceLabel};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn srspla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srspla")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_creates_missing_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a/b/traces");
    let o = srspla(&["gen", "--config", s(&smoke_config()), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("legit_a.srstrace").is_file());
    assert!(out.join("attack.srstrace").is_file());
}

#[test]
fn invalid_profile_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(smoke_config()).unwrap().replace("doppler_hz = 0.8", "doppler_hz = -3.0");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = srspla(&["gen", "--config", s(&cfg), "--out", s(&tmp.path().join("t"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("devices.ue2.doppler_hz"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[train]\nlearning_rate = 0.1\n").unwrap();
    let o = srspla(&["gen", "--config", s(&cfg), "--out", s(&tmp.path().join("t"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn single_probe_trace_extracts_one_row_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let probes = gen_session(&SessionSpec::new(
        DatasetConfig::default_legit_profile(),
        1,
        DeviceLabel::Legit,
        4,
    ))
    .unwrap();
    let trace = tmp.path().join("one.srstrace");
    std::fs::write(&trace, write_trace(&probes[0].to_records()).unwrap()).unwrap();
    let (f1, f2) = (tmp.path().join("f1.srsfeat"), tmp.path().join("f2.srsfeat"));
    for f in [&f1, &f2] {
        let o = srspla(&["extract", "--input", s(&trace), "--out", s(f)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("1 rows x 2531"));
    }
    let bytes = std::fs::read(&f1).unwrap();
    assert_eq!(bytes, std::fs::read(&f2).unwrap());
    assert_eq!(&bytes[..8], b"SRSFEAT1");
    assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2531);
}

#[test]
fn missing_feature_file_reports_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.srsfeat");
    let o = srspla(&["eval", "--features", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nope.srsfeat"), "{}", stderr(&o));
}

#[test]
fn train_eval_bench_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let traces = tmp.path().join("traces");
    let feats = tmp.path().join("f.srsfeat");
    assert!(srspla(&["gen", "--config", s(&cfg), "--out", s(&traces)]).status.success());
    assert!(srspla(&["extract", "--input", s(&traces), "--out", s(&feats)]).status.success());

    let models: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("m{i}.srsmdl"))).collect();
    for m in &models {
        let o = srspla(&["train", "--config", s(&cfg), "--seed", "7", "--features", s(&feats), "--out", s(m)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&models[0]).unwrap(), std::fs::read(&models[1]).unwrap());
    assert!(tmp.path().join("m0.srsmdl.history.csv").is_file());

    let pearson = tmp.path().join("p.json");
    let o = srspla(&[
        "train", "--config", s(&cfg), "--features", s(&feats), "--model", "pearson", "--out", s(&pearson),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let rep = tmp.path().join("rep");
    let o = srspla(&[
        "eval", "--config", s(&cfg), "--features", s(&feats), "--model", "pearson", "--compare-splits", "--out",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("delta EER"));
    for f in ["summary.json", "report_chronological.json", "det_random.csv", "hist_chronological.csv"] {
        assert!(rep.join("pearson").join(f).is_file(), "{f}");
    }

    let saved = tmp.path().join("saved");
    let o = srspla(&[
        "eval", "--config", s(&cfg), "--features", s(&feats), "--split", "chrono", "--model-file",
        s(&models[0]), "--out", s(&saved),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(saved.join("resnet/report_chronological.json").is_file());

    let bench = tmp.path().join("bench");
    let o = srspla(&[
        "bench", "--traces", s(&traces), "--model-file", s(&models[0]), "--n", "5", "--out", s(&bench),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bench.join("latency.json")).unwrap()).unwrap();
    let stages: Vec<&str> = table["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["parse", "extract", "dl_inference", "pearson"]);
}
