use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn celsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celsa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn bundled_spec() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixture.json")
}

#[test]
fn help_exits_zero() {
    let out = celsa(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["split", "train", "compress", "baseline", "eval", "segment", "recommend", "experiment"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = celsa(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = celsa(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = celsa(&["split", "--data", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

/// Six blocks of ten items; each user draws from one block.
fn write_log(path: &Path) {
    let mut csv = String::from("user,item\n");
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    for u in 0..240 {
        let block = u % 6;
        for j in 0..10 {
            if next() % 10 < 4 {
                csv.push_str(&format!("u{u},b{}\n", block * 10 + j));
            }
        }
        csv.push_str(&format!("u{u},b{}\n", next() % 60));
    }
    fs::write(path, csv).unwrap();
}

fn write_metadata(path: &Path) {
    let mut csv = String::from("item_id,title,tags\n");
    for i in 0..60 {
        csv.push_str(&format!("b{i},Book {i},block{}|shelf\n", i / 10));
    }
    fs::write(path, csv).unwrap();
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    write_log(&dir.path().join("log.csv"));
    write_metadata(&dir.path().join("meta.csv"));

    let ok = |args: &[&str]| {
        let out = celsa(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    ok(&["split", "--data", &p("log.csv"), "--out", &p("split"), "--seed", "3"]);
    assert!(dir.path().join("split/config.json").exists());
    assert!(dir.path().join("split/manifest.json").exists());

    ok(&["train", "--data", &p("split"), "--out", &p("dense"), "--d", "8", "--epochs", "3", "--lr", "0.05"]);
    ok(&[
        "compress", "--data", &p("split"), "--out", &p("sparse"), "--d", "12", "--k", "3", "--epochs", "6",
        "--schedule", "linear", "--restart", "continue", "--lr", "0.05",
    ]);
    ok(&["baseline", "--data", &p("split"), "--out", &p("ease"), "--kind", "ease", "--lambda", "10"]);
    ok(&["baseline", "--data", &p("split"), "--out", &p("pop"), "--kind", "popularity"]);

    for model in ["dense", "sparse", "ease", "pop"] {
        let out = ok(&["eval", "--data", &p("split"), "--model", &p(&format!("{model}/model.spem")), "--cutoffs", "5,10"]);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let ndcg = report["ndcg"][1]["mean"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&ndcg), "{model}: {ndcg}");
    }

    ok(&["segment", "--model", &p("sparse/model.spem"), "--metadata", &p("meta.csv"), "--tau", "0.8", "--out", &p("segments")]);
    let segments: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("segments/segments.json")).unwrap()).unwrap();
    assert!(!segments.as_array().unwrap().is_empty());

    let out = ok(&[
        "recommend", "--model", &p("sparse/model.spem"), "--items", "b1,b2", "--n", "5", "--exclude-seen",
        "--segments", &p("segments/segments.json"),
    ]);
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let items = rec["items"].as_array().unwrap();
    assert_eq!(items.len(), 5);
    assert!(items.iter().all(|i| i["id"] != "b1" && i["id"] != "b2"));
    assert!(!rec["segments"].as_array().unwrap().is_empty());
    let out = ok(&["recommend", "--model", &p("sparse/model.spem"), "--items", "b1", "--n", "60", "--exclude-seen", "false"]);
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rec["items"].as_array().unwrap().iter().any(|i| i["id"] == "b1"));

    // same flags, same outputs
    ok(&["train", "--data", &p("split"), "--out", &p("dense2"), "--d", "8", "--epochs", "3", "--lr", "0.05"]);
    assert_eq!(fs::read(dir.path().join("dense/model.spem")).unwrap(), fs::read(dir.path().join("dense2/model.spem")).unwrap());
}

#[test]
fn experiment_smoke_on_bundled_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = celsa(&["experiment", "--spec", bundled_spec().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.starts_with("label,method"));
    assert!(csv.lines().count() > 1);
    for f in ["results.json", "config.json", "manifest.json", "curves/ndcg_vs_k.csv", "curves/ndcg_vs_d.csv"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}
