use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_organforge"));
    c.env_remove("ORGANFORGE_CACHE").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

/// Exit code and the parsed single stderr line.
fn fails(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    (out.status.code().unwrap(), serde_json::from_str(err.trim()).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Built-in 1k templates, written once per test binary.
fn templates() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        ok(&["templates", "--out", s(d.path()), "--resolution", "1k"]);
        d
    })
    .path()
}

fn template(name: &str) -> String {
    templates().join("1k").join(format!("{name}.obj")).to_str().unwrap().to_string()
}

#[test]
fn eval_of_identical_pair_is_perfect() {
    let t = template("left_xcat-like");
    let v = ok(&["eval", "--pred", &t, "--gt", &t, "--seed", "4", "--metrics", "chamfer,iou,hausdorff_point"]);
    assert_eq!(v["n"], 1);
    assert_eq!(v["mean"]["chamfer"].as_f64(), Some(0.0));
    assert_eq!(v["mean"]["hausdorff_point"].as_f64(), Some(0.0));
    assert_eq!(v["mean"]["iou"].as_f64(), Some(1.0));
    assert!(v["mean"]["emd"].is_null());
}

#[test]
fn deform_with_zero_displacement_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let t = template("right_ncat-like");
    let zero = dir.path().join("zero.bin");
    fs::write(&zero, vec![0u8; 64 * 3 * 8]).unwrap();
    let out = dir.path().join("out.obj");
    let v = ok(&["deform", "--template", &t, "--delta", s(&zero), "--out", s(&out)]);
    assert_eq!(fs::read(&t).unwrap(), fs::read(&out).unwrap());
    assert_eq!(v["manifold"]["is_closed_manifold"], true);
}

#[test]
fn deform_accepts_json_and_writes_ply() {
    let dir = tempfile::tempdir().unwrap();
    let t = template("left_xcat-like");
    let triples: Vec<[f64; 3]> = (0..64).map(|i| [0.0, 0.0, if i % 2 == 0 { 0.01 } else { -0.01 }]).collect();
    let delta = dir.path().join("d.json");
    fs::write(&delta, serde_json::to_string(&triples).unwrap()).unwrap();
    let out = dir.path().join("moved.obj");
    let v = ok(&["deform", "--template", &t, "--delta", s(&delta), "--out", s(&out), "--ply", "--centered"]);
    assert_eq!(v["max_displacement"].as_f64(), Some(0.01));
    assert!(dir.path().join("moved.ply").exists());
    assert_ne!(fs::read(&t).unwrap(), fs::read(&out).unwrap());
    let bad = dir.path().join("short.json");
    fs::write(&bad, "[0.0, 0.0, 0.0]").unwrap();
    let (code, e) = fails(&["deform", "--template", &t, "--delta", s(&bad), "--out", s(&out)]);
    assert_eq!((code, e["error"].as_str()), (2, Some("data")));
}

#[test]
fn exit_codes_and_error_lines() {
    let (code, e) = fails(&[]);
    assert_eq!((code, e["error"].as_str()), (1, Some("usage")));
    let (code, _) = fails(&["datagen", "--out", "x", "--no-such-flag"]);
    assert_eq!(code, 1);
    let (code, e) = fails(&["datagen", "--out", "/nonexistent/never"]);
    assert_eq!(code, 1);
    assert!(e["message"].as_str().unwrap().contains("--seed"));
    let (code, _) = fails(&["fit", "--target", "t.obj", "--out", "o"]);
    assert_eq!(code, 1);
    let (code, _) = fails(&["eval", "--pred", "a.obj", "--gt", "b.obj", "--seed", "1", "--metrics", "bogus"]);
    assert_eq!(code, 1);
    let (code, e) = fails(&["eval", "--pred", "missing.obj", "--gt", "missing.obj", "--seed", "1"]);
    assert_eq!((code, e["error"].as_str()), (2, Some("data")));
    let (code, _) = fails(&["project", "--phantom", "--volume", "v.orgv", "--out", "x.pgm"]);
    assert_eq!(code, 1);
    let (code, _) = fails(&["project", "--phantom", "--coarse", "--mode", "fan", "--out", "x.pgm"]);
    assert_eq!(code, 1);
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let t = template("left_xcat-like");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"eval": {"seed": 9, "metrics": ["chamfer"], "points": 64}}"#).unwrap();
    let v = ok(&["eval", "--config", s(&cfg), "--pred", &t, "--gt", &t]);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["n_points"], 64);
    let v = ok(&["eval", "--config", s(&cfg), "--pred", &t, "--gt", &t, "--seed", "2", "--points", "32"]);
    assert_eq!(v["config"]["seed"], 2);
    assert_eq!(v["config"]["n_points"], 32);
    assert!(v["mean"]["iou"].is_null());
    fs::write(&cfg, r#"{"seed": 1, "typo": 3}"#).unwrap();
    let (code, e) = fails(&["eval", "--config", s(&cfg), "--pred", &t, "--gt", &t]);
    assert_eq!(code, 1);
    assert!(e["message"].as_str().unwrap().contains("typo"));
}

#[test]
fn every_subcommand_documents_every_flag() {
    for sub in ["datagen", "project", "deform", "fit", "train", "infer", "eval", "validate", "templates"] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let text = String::from_utf8(out.stdout).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut flags = 0;
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            if !(t.starts_with("--") || t.starts_with("-h")) {
                continue;
            }
            flags += 1;
            // "--flag <VALUE>   description", or the description alone on the next line.
            let inline = t.split_once("  ").map(|p| p.1).is_some_and(|d| !d.trim().is_empty());
            let next = lines.get(i + 1).is_some_and(|n| {
                let n = n.trim_start();
                !n.is_empty() && !n.starts_with('-')
            });
            assert!(inline || next, "{sub}: undocumented flag line {line:?}");
        }
        assert!(flags >= 3, "{sub}: {text}");
    }
}

#[test]
fn project_phantom_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    let args = |p: &Path| {
        vec!["project", "--phantom", "--coarse", "--resolution", "12x24", "--noise", "--seed", "3", "--out"]
            .into_iter()
            .map(String::from)
            .chain([s(p).to_string()])
            .collect::<Vec<_>>()
    };
    let v = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(256), Some(192)));
    ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (code, _) = fails(&["project", "--phantom", "--coarse", "--noise", "--out", s(&a)]);
    assert_eq!(code, 1);
}

fn mean_hd(report: &Path) -> f64 {
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    v["mean"]["hausdorff_mesh"].as_f64().unwrap()
}

#[test]
fn smoke_pipeline_beats_undeformed_templates() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let ds = p("ds");
    let common = ["--resolution", "1k"];
    let v = ok(&[&["datagen", "--out", &ds, "--seed", "11", "--n-samples", "20", "--coarse"][..], &common].concat());
    assert_eq!((v["train"].as_u64(), v["test"].as_u64()), (Some(16), Some(4)));
    let again = p("ds2");
    ok(&[&["datagen", "--out", &again, "--seed", "11", "--n-samples", "20", "--coarse", "--threads", "1"][..], &common].concat());
    for f in ["manifest.json", "images/0007.pgm", "meshes/0007_l.obj", "meta/0019.json"] {
        assert_eq!(fs::read(dir.path().join("ds").join(f)).unwrap(), fs::read(dir.path().join("ds2").join(f)).unwrap(), "{f}");
    }
    assert_eq!(ok(&["validate", "--dataset", &ds])["ok"], true);

    ok(&[&["fit", "--dataset", &ds, "--out", &p("fit"), "--seed", "2", "--steps", "200"][..], &common].concat());
    ok(&[&["fit", "--dataset", &ds, "--out", &p("base"), "--seed", "2", "--steps", "0"][..], &common].concat());
    let csv = p("table.csv");
    for run in ["fit", "base"] {
        ok(&[
            "eval", "--pred-dir", &p(run), "--dataset", &ds, "--seed", "5", "--metrics", "hausdorff_mesh,chamfer",
            "--out", &p(&format!("{run}.json")), "--csv", &csv, "--label", run,
        ]);
    }
    let (fit, base) = (mean_hd(&dir.path().join("fit.json")), mean_hd(&dir.path().join("base.json")));
    assert!(fit < base, "fit {fit} vs undeformed {base}");
    let table = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "method,n,CD,EMD,F_eps,F_1.5eps,IoU,HD_mesh");
    assert!(rows[1].starts_with("fit,4,") && rows[2].starts_with("base,4,"));

    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit/summary.json")).unwrap()).unwrap();
    let first = summary["outputs"][0]["name"].as_str().unwrap().to_string();
    let pred = dir.path().join("fit").join(format!("{first}.obj"));
    assert_eq!(ok(&["validate", "--mesh", s(&pred)])["ok"], true);

    // Same outputs on one thread.
    ok(&[&["fit", "--dataset", &ds, "--out", &p("fit1"), "--seed", "2", "--steps", "200", "--threads", "1"][..], &common].concat());
    assert_eq!(fs::read(&pred).unwrap(), fs::read(dir.path().join("fit1").join(format!("{first}.obj"))).unwrap());

    let model = p("model.orgm");
    let t = ok(&[
        &["train", "--dataset", &ds, "--out", &model, "--seed", "1", "--steps", "30", "--batch-size", "4", "--hidden", "32,32"][..],
        &common,
    ]
    .concat());
    assert!(t["smoothed_end"].as_f64().unwrap().is_finite());
    assert!(Path::new(&format!("{model}.json")).exists() && Path::new(&format!("{model}.train.json")).exists());
    ok(&[&["infer", "--model", &model, "--dataset", &ds, "--out", &p("inf")][..], &common].concat());
    let inferred: Vec<String> = fs::read_dir(dir.path().join("inf"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "obj"))
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    assert_eq!(inferred.len(), 12);
    let mut args = vec!["validate".to_string()];
    for m in &inferred {
        args.extend(["--mesh".to_string(), m.clone()]);
    }
    assert_eq!(ok(&args.iter().map(String::as_str).collect::<Vec<_>>())["ok"], true);
    let img = dir.path().join("ds/images").join(format!("{first}.pgm"));
    ok(&[&["infer", "--model", &model, "--image", s(&img), "--out", &p("one")][..], &common].concat());
    assert_eq!(
        fs::read(dir.path().join("one/pred.obj")).unwrap(),
        fs::read(dir.path().join("inf").join(format!("{first}.obj"))).unwrap()
    );
    let (code, _) = fails(&[&["infer", "--model", &model, "--dataset", &ds, "--out", &p("inf2"), "--hidden"][..], &common].concat());
    assert_eq!(code, 1);
}
