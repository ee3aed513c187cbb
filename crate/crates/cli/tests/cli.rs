use std::path::Path;
use std::process::{Command, Output};

fn snn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn"))
        .args(args)
        .env_remove("SNN_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small NSL-KDD style file covering every class.
fn write_kdd(path: &Path, rows: usize) {
    let services = ["http", "private", "ftp", "telnet", "smtp"];
    let labels = ["normal", "neptune", "satan", "guess_passwd", "rootkit", "normal", "smurf"];
    let mut text = String::new();
    for r in 0..rows {
        let proto = ["tcp", "udp", "icmp"][r % 3];
        let mut f = vec![(r % 11).to_string(), proto.into(), services[r % 5].into(), "SF".into()];
        for c in 4..41 {
            f.push(format!("{}", ((r * 7 + c * 3) % 13) as f64 / 13.0));
        }
        f.push(labels[r % labels.len()].into());
        f.push("21".into());
        text.push_str(&f.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn missing_input_exits_2_with_path() {
    let o = snn(&["preprocess", "--dataset", "nsl-kdd", "--input", "/no/such/KDDTrain.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/KDDTrain.txt"), "{}", stderr(&o));
}

#[test]
fn missing_data_dir_is_a_usage_error() {
    let o = snn(&["preprocess", "--dataset", "awid"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SNN_DATA_DIR"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(snn(&["train", "--bogus"]).status.code(), Some(2));
}

#[test]
fn preprocess_reports_contract_widths() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("kdd.txt");
    write_kdd(&raw, 40);
    for (variant, width) in [("original", 122), ("resampled", 312)] {
        let out = dir.path().join(variant);
        let o = snn(&["preprocess", "--dataset", "nsl-kdd", "--variant", variant, "--input", p(&raw), "--test", p(&raw), "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains(&format!("width: {width}")), "{}", stdout(&o));
        assert!(out.join("train.snnd").exists() && out.join("test.snnd.manifest.json").exists());
    }
}

#[test]
fn default_config_echoes_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "schema_version = 1\nepochs = 1\nhidden = [3]\n").unwrap();
    let o = snn(&["train", "--dataset", "xor", "--config", p(&cfg), "--out", p(&dir.path().join("r"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("K=100 lambda=0.001") && s.contains("batch_size=128"), "{s}");
}

#[test]
fn xor_smoke_config_reaches_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/xor.toml");
    let out = dir.path().join("xor");
    let o = snn(&["train", "--dataset", "xor", "--config", cfg, "--seed", "3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["final_metrics"]["full_train_acc"], 1.0);
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("kdd.txt");
    write_kdd(&raw, 60);
    let data = dir.path().join("data");
    assert!(snn(&["preprocess", "--dataset", "nsl-kdd", "--input", p(&raw), "--out", p(&data)]).status.success());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "schema_version = 1\nepochs = 3\nbatch_size = 16\nhidden = [8]\ncheckpoint_every = 2\n").unwrap();
    let train = data.join("train.snnd");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = snn(&["train", "--config", p(&cfg), "--input", p(&train), "--val-fraction", "0.2", "--seed", "7", "--threads", threads, "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "3"));
    for f in ["history.csv", "model.ckpt", "checkpoint-epoch-0002.ckpt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    // Evaluate the trained model on the same encoding.
    let ev = dir.path().join("eval");
    let o = snn(&["eval", "--checkpoint", p(&a.join("model.ckpt")), "--input", p(&train), "--out", p(&ev)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Records correctly classified"));
    for f in ["report.csv", "report.txt", "confusion_counts.csv", "confusion_percent.csv"] {
        assert!(ev.join(f).exists(), "{f}");
    }

    // A checkpoint with a different input width is rejected up front.
    let xor = dir.path().join("xor");
    let xor_cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/xor.toml");
    assert!(snn(&["train", "--dataset", "xor", "--config", xor_cfg, "--out", p(&xor)]).status.success());
    let o = snn(&["eval", "--checkpoint", p(&xor.join("model.ckpt")), "--input", p(&train), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("width"), "{}", stderr(&o));

    // So is a corrupted one.
    let mut bytes = std::fs::read(a.join("model.ckpt")).unwrap();
    bytes[80] ^= 1;
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, bytes).unwrap();
    let o = snn(&["eval", "--checkpoint", p(&bad), "--input", p(&train), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corrupted"), "{}", stderr(&o));
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn curves_match_oracle_and_have_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = snn(&["plot-curves", "--model", "nlif-exp", "--grid", "57", "--seed", "2", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out.join("curves.csv"));
    assert_eq!(rows.len(), 57);
    assert_eq!(read_csv(&out.join("loss_slice.csv")).len(), 57);
    for r in &rows {
        let (cf, or): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((cf - or).abs() <= 1e-6 * or.abs(), "{r:?}");
    }
}

#[test]
fn silent_regions_are_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    // Seed 1 gives weights too weak for the leaky Lambert neuron to fire.
    let o = snn(&["plot-curves", "--model", "lif-exp-bt1", "--grid", "11", "--seed", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out.join("curves.csv"));
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[1].is_empty() && r[2].is_empty()), "{rows:?}");
    let o = snn(&["plot-curves", "--model", "lif-exp-bt1", "--tau", "-1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
