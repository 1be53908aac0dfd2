//! End-to-end runs of the compiled binary: synthesize a corpus, extract
//! it, train a bank, classify held-out traffic, and report on it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use platsight_core::bank::{BankManifest, ManifestEntry, BANK_SCHEMA};
use platsight_core::fields::Protocol;
use platsight_core::pcap::{LinkType, PcapWriter};
use platsight_core::provider::Provider;
use platsight_core::report::read_predictions_jsonl;
use platsight_core::synth::{builtin_roster, profiles_to_json, read_labels_csv};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platsight"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary spawns");
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes the YouTube QUIC slice of the built-in roster to a profiles file.
fn write_yt_quic_profiles(dir: &Path) -> PathBuf {
    let profiles: Vec<_> = builtin_roster()
        .into_iter()
        .filter(|p| p.provider == Provider::Yt && p.protocol == Protocol::Quic)
        .collect();
    assert_eq!(profiles.len(), 12);
    let path = dir.join("profiles.json");
    std::fs::write(&path, profiles_to_json(&profiles)).unwrap();
    path
}

fn write_manifest(dir: &Path, provider: &str, protocol: Protocol, threshold: f64) -> PathBuf {
    let manifest = BankManifest {
        schema: BANK_SCHEMA.to_string(),
        threshold,
        models: ["platform", "device", "agent"]
            .iter()
            .map(|objective| ManifestEntry {
                provider: provider.to_string(),
                protocol,
                objective: objective.to_string(),
                path: format!("{objective}.json"),
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

/// synth -> extract -> train x3, returning (bank manifest, dicts path).
fn build_bank(dir: &Path, profiles: &Path, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    let pcap = dir.join("train.pcap");
    let labels = dir.join("train_labels.csv");
    let flows = dir.join("train_flows.jsonl");
    let dicts = dir.join("dicts.json");
    run_ok(&[
        "synth",
        "--profiles",
        path_str(profiles),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
        "--out-pcap",
        path_str(&pcap),
        "--out-labels",
        path_str(&labels),
    ]);
    run_ok(&[
        "extract",
        "--pcap",
        path_str(&pcap),
        "--out",
        path_str(&flows),
        "--dicts",
        path_str(&dicts),
        "--mode",
        "train",
    ]);
    for objective in ["platform", "device", "agent"] {
        run_ok(&[
            "train",
            "--data",
            path_str(&flows),
            "--labels",
            path_str(&labels),
            "--provider",
            "YT",
            "--protocol",
            "QUIC",
            "--objective",
            objective,
            "--dicts",
            path_str(&dicts),
            "--out",
            path_str(&dir.join(format!("{objective}.json"))),
        ]);
    }
    let manifest = write_manifest(dir, "YT", Protocol::Quic, 0.8);
    (manifest, dicts)
}

#[test]
fn pipeline_classifies_held_out_synth_above_95_percent() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let profiles = write_yt_quic_profiles(dir);
    let (manifest, dicts) = build_bank(dir, &profiles, 30, 11);

    let held_pcap = dir.join("held.pcap");
    let held_labels = dir.join("held_labels.csv");
    run_ok(&[
        "synth",
        "--profiles",
        path_str(&profiles),
        "--count",
        "10",
        "--seed",
        "99",
        "--out-pcap",
        path_str(&held_pcap),
        "--out-labels",
        path_str(&held_labels),
    ]);
    let predictions_path = dir.join("predictions.jsonl");
    run_ok(&[
        "classify",
        "--pcap",
        path_str(&held_pcap),
        "--bank",
        path_str(&manifest),
        "--dicts",
        path_str(&dicts),
        "--out",
        path_str(&predictions_path),
    ]);

    let truth: HashMap<(String, String, u16, u16), String> = read_labels_csv(&held_labels)
        .unwrap()
        .into_iter()
        .map(|l| {
            (
                (l.src.clone(), l.dst.clone(), l.sport, l.dport),
                format!("{}/{}", l.os, l.agent),
            )
        })
        .collect();
    let predictions = read_predictions_jsonl(&predictions_path).unwrap();
    assert_eq!(predictions.len(), truth.len());

    let mut correct = 0usize;
    let mut total = 0usize;
    for p in &predictions {
        let key = (
            p.flow.client_addr.to_string(),
            p.flow.server_addr.to_string(),
            p.flow.client_port,
            p.flow.server_port,
        );
        let expected = truth.get(&key).expect("every flow is labeled");
        let result = p.result.as_ref().expect("every flow is classified");
        total += 1;
        if result.platform.class == *expected {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(
        accuracy >= 0.95,
        "end-to-end accuracy {accuracy:.4} below 0.95 ({correct}/{total})"
    );

    let report_dir = dir.join("report");
    run_ok(&[
        "report",
        "--predictions",
        path_str(&predictions_path),
        "--out-dir",
        path_str(&report_dir),
        "--group-by",
        "device",
    ]);
    for file in [
        "watch_time.csv",
        "bandwidth_quartiles.csv",
        "hourly_usage.csv",
        "summary.json",
    ] {
        assert!(report_dir.join(file).exists(), "{file} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["total_flows"], predictions.len());
    let excluded = summary["excluded_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&excluded));
}

#[test]
fn classify_of_empty_capture_writes_empty_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let profiles = write_yt_quic_profiles(dir);
    let (manifest, dicts) = build_bank(dir, &profiles, 4, 5);

    let empty_pcap = dir.join("empty.pcap");
    drop(PcapWriter::create(&empty_pcap, LinkType::RawIp).unwrap());

    let predictions_path = dir.join("predictions.jsonl");
    run_ok(&[
        "classify",
        "--pcap",
        path_str(&empty_pcap),
        "--bank",
        path_str(&manifest),
        "--dicts",
        path_str(&dicts),
        "--out",
        path_str(&predictions_path),
    ]);
    let predictions = read_predictions_jsonl(&predictions_path).unwrap();
    assert!(predictions.is_empty());
}

#[test]
fn training_single_class_data_fails_with_degenerate_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let single: Vec<_> = builtin_roster()
        .into_iter()
        .filter(|p| p.provider == Provider::Yt && p.protocol == Protocol::Quic)
        .take(1)
        .collect();
    let profiles = dir.join("one.json");
    std::fs::write(&profiles, profiles_to_json(&single)).unwrap();

    let pcap = dir.join("train.pcap");
    let labels = dir.join("labels.csv");
    let flows = dir.join("flows.jsonl");
    let dicts = dir.join("dicts.json");
    run_ok(&[
        "synth",
        "--profiles",
        path_str(&profiles),
        "--count",
        "5",
        "--seed",
        "3",
        "--out-pcap",
        path_str(&pcap),
        "--out-labels",
        path_str(&labels),
    ]);
    run_ok(&[
        "extract",
        "--pcap",
        path_str(&pcap),
        "--out",
        path_str(&flows),
        "--dicts",
        path_str(&dicts),
        "--mode",
        "train",
    ]);
    let out = bin()
        .args([
            "train",
            "--data",
            path_str(&flows),
            "--labels",
            path_str(&labels),
            "--provider",
            "YT",
            "--protocol",
            "QUIC",
            "--objective",
            "platform",
            "--dicts",
            path_str(&dicts),
            "--out",
            path_str(&dir.join("model.json")),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(parsed["error"]["code"], "forest.degenerate_data");
}

#[test]
fn identical_inputs_and_seed_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let profiles = write_yt_quic_profiles(dir);

    let mut outputs: Vec<(Vec<u8>, Vec<u8>, Vec<u8>, Vec<u8>, Vec<u8>)> = Vec::new();
    for tag in ["a", "b"] {
        let pcap = dir.join(format!("{tag}.pcap"));
        let labels = dir.join(format!("{tag}_labels.csv"));
        let flows = dir.join(format!("{tag}_flows.jsonl"));
        let dicts = dir.join(format!("{tag}_dicts.json"));
        let model = dir.join(format!("{tag}_model.json"));
        run_ok(&[
            "synth",
            "--profiles",
            path_str(&profiles),
            "--count",
            "6",
            "--seed",
            "21",
            "--out-pcap",
            path_str(&pcap),
            "--out-labels",
            path_str(&labels),
        ]);
        run_ok(&[
            "extract",
            "--pcap",
            path_str(&pcap),
            "--out",
            path_str(&flows),
            "--dicts",
            path_str(&dicts),
            "--mode",
            "train",
        ]);
        run_ok(&[
            "train",
            "--data",
            path_str(&flows),
            "--labels",
            path_str(&labels),
            "--provider",
            "YT",
            "--protocol",
            "QUIC",
            "--objective",
            "platform",
            "--dicts",
            path_str(&dicts),
            "--out",
            path_str(&model),
        ]);
        outputs.push((
            std::fs::read(&pcap).unwrap(),
            std::fs::read(&labels).unwrap(),
            std::fs::read(&flows).unwrap(),
            std::fs::read(&dicts).unwrap(),
            std::fs::read(&model).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "pcap bytes differ");
    assert_eq!(outputs[0].1, outputs[1].1, "labels bytes differ");
    assert_eq!(outputs[0].2, outputs[1].2, "flow records differ");
    assert_eq!(outputs[0].3, outputs[1].3, "dictionaries differ");
    assert_eq!(outputs[0].4, outputs[1].4, "model bytes differ");
}
