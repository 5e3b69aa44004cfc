use std::path::Path;
use std::process::{Command, Output};

fn framereg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framereg"))
        .args(args)
        .env("FRAMEREG_THREADS", "1")
        .output()
        .expect("spawn framereg")
}

fn ok(args: &[&str]) -> String {
    let out = framereg(args);
    assert!(
        out.status.success(),
        "framereg {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Builds every artifact of a small problem under `root`.
fn build(root: &Path) {
    let op = root.join("operator");
    ok(&[
        "radon",
        "assemble",
        "--n",
        "16",
        "--p",
        "16",
        "--ntheta",
        "24",
        "--out",
        p(&op),
    ]);
    for kind in ["exp", "wavelet"] {
        let dir = root.join("frames").join(kind);
        ok(&["frame", "build", "--kind", kind, "--operator", p(&op), "--out", p(&dir)]);
        ok(&[
            "frame",
            "duals",
            "--method",
            "explicit",
            "--param",
            "0",
            "--frame",
            p(&dir),
        ]);
    }
    ok(&["svd", "compute", "--operator", p(&op), "--out", p(&root.join("svd"))]);
}

#[test]
fn full_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("art");
    build(&root);

    let rec = tmp.path().join("rec");
    let frame = root.join("frames/exp");
    let args = [
        "reconstruct",
        "--frame",
        p(&frame),
        "--filter",
        "tikhonov",
        "--rule",
        "fixed",
        "--alpha",
        "1e-3",
        "--out",
        p(&rec),
    ];
    ok(&args);
    for f in [
        "reconstruction.pgm",
        "reconstruction.frv",
        "reconstruction.json",
        "manifest.json",
    ] {
        assert!(rec.join(f).is_file(), "{f} missing");
    }
    let stamp = std::fs::metadata(rec.join("reconstruction.frv"))
        .unwrap()
        .modified()
        .unwrap();
    let again = ok(&args);
    assert!(again.contains("up to date"), "{again}");
    assert_eq!(
        std::fs::metadata(rec.join("reconstruction.frv"))
            .unwrap()
            .modified()
            .unwrap(),
        stamp
    );

    let svd_rec = tmp.path().join("svd_rec");
    ok(&[
        "reconstruct",
        "--frame",
        p(&root.join("svd")),
        "--rule",
        "fixed",
        "--alpha",
        "1",
        "--out",
        p(&svd_rec),
    ]);

    let cfg = tmp.path().join("table.json");
    std::fs::write(&cfg, format!("{{\"artifacts\": {:?}}}", p(&root))).unwrap();
    let (a, b) = (tmp.path().join("t1"), tmp.path().join("t2"));
    ok(&["study", "table", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["study", "table", "--config", p(&cfg), "--out", p(&b)]);
    let ta = std::fs::read(a.join("table.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("table.csv")).unwrap());
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 1 + 3 * 2 * 5);

    let sweep = tmp.path().join("sweep.json");
    std::fs::write(
        &sweep,
        format!(
            "{{\"artifacts\": {:?}, \"alphas\": {{\"min\": 1e-4, \"max\": 1, \"points\": 5}}}}",
            p(&root)
        ),
    )
    .unwrap();
    ok(&[
        "study",
        "sweep",
        "--config",
        p(&sweep),
        "--out",
        p(&tmp.path().join("sweep")),
    ]);
    let csv = std::fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn rate_study_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("rates.json");
    std::fs::write(
        &cfg,
        r#"{"studies": [{"mu": 0.5, "filter": "tikhonov", "truncation": 200, "seeds": 2,
            "deltas": [1e-2, 1e-3, 1e-4], "rule": {"rule": "apriori", "c": 1.0}}]}"#,
    )
    .unwrap();
    let out = tmp.path().join("rates");
    let stdout = ok(&["study", "rates", "--config", p(&cfg), "--out", p(&out)]);
    assert!(stdout.contains("slope"), "{stdout}");
    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("study,delta,error,alpha"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(framereg(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(framereg(&["--help"]).status.code(), Some(0));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"artifacts": "x", "noise_levels": [2.0]}"#).unwrap();
    let out = framereg(&["study", "table", "--config", p(&bad), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&bad, r#"{"artifacts": "x", "unknown": 1}"#).unwrap();
    let out = framereg(&["study", "table", "--config", p(&bad), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));

    let missing = tmp.path().join("nothing");
    let out = framereg(&["reconstruct", "--frame", p(&missing), "--out", p(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = tmp.path().join("table.json");
    std::fs::write(&cfg, format!("{{\"artifacts\": {:?}}}", p(&missing))).unwrap();
    let out = framereg(&["study", "table", "--config", p(&cfg), "--out", p(&tmp.path().join("t"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radon assemble"));
}
