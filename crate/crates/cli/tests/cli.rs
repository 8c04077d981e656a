use std::path::Path;
use std::process::{Command, Output};

use boundary_core::io::decode_heatmaps;

fn boundary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundary"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn boundary")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn synth(dir: &Path, n: usize) {
    ok(&boundary(&["synth", "--n", &n.to_string(), "--seed", "3", "--out", p(dir)]));
}

#[test]
fn gen_heatmaps_writes_quarter_size_archives_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 1);
    let manifest = data.join("manifest.json");
    let run = |out: &Path| ok(&boundary(&["gen-heatmaps", "--manifest", p(&manifest), "--out", p(out), "--montage"]));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let archives: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "bhm"))
        .collect();
    assert_eq!(archives.len(), 1);
    let bytes = std::fs::read(&archives[0]).unwrap();
    let (k, h, w, values) = decode_heatmaps(&bytes).unwrap();
    assert_eq!((k, h, w), (13, 64, 64));
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    let name = archives[0].file_name().unwrap();
    assert_eq!(bytes, std::fs::read(b.join(name)).unwrap());
    assert!(a.join("resolved_config.json").is_file());
    assert!(archives[0].with_extension("png").is_file());
}

#[test]
fn missing_image_exits_with_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 2);
    let victim = std::fs::read_dir(data.join("images")).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(&victim).unwrap();
    let out = boundary(&[
        "gen-heatmaps",
        "--manifest",
        p(&data.join("manifest.json")),
        "--out",
        p(&dir.path().join("hm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(victim.file_name().unwrap().to_str().unwrap()), "{stderr}");
    // The surviving sample is still written.
    assert_eq!(std::fs::read_dir(dir.path().join("hm")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "bhm")
    }).count(), 1);
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(boundary(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(boundary(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(boundary(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"train": {"batch_size": 0}}"#).unwrap();
    let out = boundary(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = boundary(&["ablate", "--variants", "BL+NOPE", "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ablate_emits_one_row_per_variant_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"train": {"max_epochs": 1}, "data": {"synthetic": {"n_train": 8, "n_val": 4}}}"#).unwrap();
    let run = |out: &Path| {
        ok(&boundary(&["ablate", "--config", p(&cfg), "--seed", "5", "--variants", "BL,BL+L1", "--out", p(out)]));
        std::fs::read_to_string(out.join("ablation.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b);
    let lines: Vec<_> = a.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("BL,5,"));
    assert!(lines[2].starts_with("BL+L1,5,"));
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["train"]["seed"], 5);
    assert_eq!(resolved["train"]["max_epochs"], 1);
}

#[test]
fn train_then_eval_reports_all_three_normalizations() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&boundary(&[
        "train", "--epochs", "1", "--n-train", "8", "--n-val", "4", "--seed", "2", "--out", p(&run),
    ]));
    for f in ["checkpoint.json", "train_report.json", "metrics.jsonl", "resolved_config.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let log = std::fs::read_to_string(run.join("metrics.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for k in ["step", "loss_G", "loss_D", "loss_R", "val_nme"] {
        assert!(first.get(k).is_some(), "{k} missing from {first}");
    }
    let ev = dir.path().join("eval");
    ok(&boundary(&[
        "eval",
        "--checkpoint",
        p(&run.join("checkpoint.json")),
        "--norms",
        "inter_ocular,inter_pupil,face_size",
        "--out",
        p(&ev),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ev.join("metrics.json")).unwrap()).unwrap();
    let norms = report["by_normalization"].as_object().unwrap();
    assert_eq!(norms.len(), 3);
    for k in ["inter_ocular", "inter_pupil", "face_size"] {
        assert!(norms[k]["mean_nme"].as_f64().unwrap().is_finite());
    }
    let summary = std::fs::read_to_string(ev.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn plot_ced_of_constant_errors() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let errors = vec![0.05; 20];
    let json = serde_json::json!({
        "label": "const",
        "scheme_id": "300w_68",
        "samples": 20,
        "threshold": 0.1,
        "by_normalization": {"inter_ocular": {"mean_nme": 0.05, "auc": 0.5, "failure_rate": 0.0, "errors": errors}}
    });
    std::fs::write(&report, json.to_string()).unwrap();
    let out = dir.path().join("plot");
    ok(&boundary(&["plot-ced", p(&report), "--out", p(&out)]));
    let summary = std::fs::read_to_string(out.join("ced_summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let row: Vec<_> = lines.next().unwrap().split(',').collect();
    let auc_col = header.iter().position(|h| *h == "auc").unwrap();
    assert!((row[auc_col].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);

    let curve = std::fs::read_to_string(out.join("ced.csv")).unwrap();
    for line in curve.lines().skip(1) {
        let mut it = line.split(',').map(|v| v.parse::<f64>().unwrap());
        let (t, f) = (it.next().unwrap(), it.next().unwrap());
        if (t - 0.05).abs() > 1e-9 {
            assert_eq!(f, if t > 0.05 { 1.0 } else { 0.0 }, "t = {t}");
        }
    }
    let svg = std::fs::read_to_string(out.join("ced.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("const"));
}
