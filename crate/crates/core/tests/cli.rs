use std::path::Path;
use std::process::Command;

use ldgcn::cli::run_command;
use ldgcn::model::checkpoint::load_model;

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("ldgcn").chain(args.iter().copied()))
}

fn synth(dir: &Path) -> String {
    let data = dir.join("synth.eegd").display().to_string();
    assert_eq!(
        run(&["synth", "--seed", "5", "--per-class", "10", "-o", &data]),
        0
    );
    data
}

fn train_into(data: &str, out: &Path) {
    let out = out.display().to_string();
    assert_eq!(
        run(&["train", "-d", data, "-o", &out, "--epochs", "3", "--seed", "9"]),
        0
    );
}

#[test]
fn train_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train_into(&data, &a);
    train_into(&data, &b);
    for name in [
        "fold_001.ldgc",
        "fold_001.history.json",
        "fold_002.ldgc",
        "fold_002.history.json",
        "model.ldgc",
        "model.history.json",
    ] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs");
    }
    // The written config differs only in where it was written.
    let strip = |dir: &Path| -> String {
        std::fs::read_to_string(dir.join("config.toml"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("output_dir"))
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
    let cfg = std::fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(cfg.contains("epochs = 3"), "{cfg}");
    let history: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("model.history.json")).unwrap()).unwrap();
    assert_eq!(history["epochs"].as_array().unwrap().len(), 3);
}

#[test]
fn prune_infer_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("run");
    train_into(&data, &out);
    let model = out.join("model.ldgc").display().to_string();
    let pruned = out.join("pruned.ldgc").display().to_string();
    let report = out.join("prune.json");
    assert_eq!(
        run(&[
            "prune",
            "--in",
            &model,
            "--out",
            &pruned,
            "--report",
            &report.display().to_string(),
            "--pr-channel",
            "0.25",
            "--latency-reps",
            "100",
        ]),
        0
    );
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["pruned_channel_indices"].as_array().unwrap().len(), 4);
    assert_eq!(r["pruned_neuron_indices"].as_array().unwrap().len(), 77);
    assert!(r["latency_after_ms"].as_f64().unwrap() > 0.0);
    let (_, p) = load_model(Path::new(&pruned)).unwrap();
    assert_eq!(p.channel_mask.iter().filter(|m| !**m).count(), 4);

    let output = Command::new(env!("CARGO_BIN_EXE_ldgcn"))
        .args(["infer", "-m", &pruned, "-w", &data, "--index", "3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let json: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let label = json["label"].as_str().unwrap();
    assert!(label == "Alert" || label == "Drowsiness", "{label}");
    let probs: Vec<f64> = json["p"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(probs.len(), 2);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let bench_out = dir.path().join("bench").display().to_string();
    assert_eq!(
        run(&[
            "bench",
            "-d",
            &data,
            "-o",
            &bench_out,
            "--epochs",
            "2",
            "--latency-reps",
            "100",
            "--no-ablations",
        ]),
        0
    );
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(&bench_out).join("report.json")).unwrap())
            .unwrap();
    assert_eq!(rep["resource"]["power_w"], "unsupported");
    assert_eq!(rep["folds"].as_array().unwrap().len(), 2);
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(Path::new(&bench_out).join("folds.csv")).unwrap();
    assert!(csv.starts_with("ID,Acc,Pre,Spe\n1,"));
    assert!(csv.lines().last().unwrap().starts_with("Avg,"));
}

#[test]
fn preprocess_writes_one_graph_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("pre");
    assert_eq!(
        run(&["preprocess", "-d", &data, "-o", &out.display().to_string()]),
        0
    );
    let graphs = std::fs::read_dir(out.join("graphs")).unwrap().count();
    assert_eq!(graphs, 20);
    let len = std::fs::metadata(out.join("graphs/window_00000.bdsg"))
        .unwrap()
        .len();
    assert_eq!(len, 12 + 4 * 384 * 384 + 4 * 384);
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert_ne!(run(&["train", "--no-such-flag"]), 0);
    assert_ne!(run(&["frobnicate"]), 0);
    // No dataset given.
    assert_ne!(run(&["train", "-o", &dir.path().display().to_string()]), 0);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "k = 3\nbogus_key = 1\n").unwrap();
    let data = synth(dir.path());
    assert_ne!(
        run(&["train", "-c", &cfg.display().to_string(), "-d", &data]),
        0
    );
    assert_ne!(
        run(&[
            "train",
            "-d",
            &data,
            "--channel",
            "Cz",
            "-o",
            &dir.path().display().to_string()
        ]),
        0
    );
    let missing = dir.path().join("none.ldgc").display().to_string();
    assert_ne!(run(&["infer", "-m", &missing, "-w", &data]), 0);

    let status = Command::new(env!("CARGO_BIN_EXE_ldgcn"))
        .arg("--bogus")
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "k = 2\n[train]\nepochs = 1\nbatch_size = 4\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        run(&[
            "train",
            "-c",
            &cfg.display().to_string(),
            "-d",
            &data,
            "-o",
            &out.display().to_string(),
            "--epochs",
            "2",
        ]),
        0
    );
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    let v: toml::Value = toml::from_str(&written).unwrap();
    assert_eq!(v["k"].as_integer(), Some(2));
    assert_eq!(v["train"]["epochs"].as_integer(), Some(2));
    assert_eq!(v["train"]["batch_size"].as_integer(), Some(4));
}
