use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cgrd::io::{batch_file_name, read_batch, read_batch_dir, read_point, write_batch, RunManifest};
use cgrd::manifold::hpd_distance_squared;

fn cgrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cgrd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr holds one JSON object")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn icrb_prints_linear_and_db_values() {
    let stdout = ok(&["icrb", "10", "20", "1"]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, ["0.595000", "-2.2548 dB"]);
}

#[test]
fn simulate_writes_reloadable_deterministic_batches() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&[
            "simulate",
            "--p",
            "2",
            "--n",
            "4",
            "--t",
            "3",
            "--seed",
            "7",
            "--out",
            s(dir),
        ]);
    }
    let batches = read_batch_dir(&a).unwrap();
    assert_eq!(batches.len(), 3);
    for (k, batch) in batches.iter().enumerate() {
        assert_eq!((batch.p(), batch.n(), batch.t()), (2, 4, k + 1));
    }
    let fa = data_files(&a);
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, data_files(&b));
    let manifest = RunManifest::read(&a.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "simulate");
    assert_eq!(manifest.seed, Some(7));
    assert_eq!(manifest.outputs.len(), 4);
}

#[test]
fn tyler_error_shrinks_with_more_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let mean_error = |n: usize| {
        let errs: Vec<f64> = (0..6)
            .map(|seed| {
                let data = tmp.path().join(format!("d{n}_{seed}"));
                let est = tmp.path().join(format!("e{n}_{seed}"));
                let seed = seed.to_string();
                let n = n.to_string();
                ok(&[
                    "simulate",
                    "--p",
                    "3",
                    "--n",
                    &n,
                    "--t",
                    "1",
                    "--seed",
                    &seed,
                    "--out",
                    s(&data),
                ]);
                ok(&["estimate", "--data", s(&data), "--method", "tyler", "--out", s(&est)]);
                let truth = read_point(&data.join("theta_true.csv")).unwrap();
                let hat = read_point(&est.join("tyler_00001.csv")).unwrap();
                hpd_distance_squared(truth.sigma(), hat.sigma()).unwrap()
            })
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let small = mean_error(50);
    let large = mean_error(500);
    assert!(large < small / 3.0, "n=50: {small}, n=500: {large}");
}

#[test]
fn every_estimator_writes_its_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "simulate",
        "--p",
        "2",
        "--n",
        "8",
        "--t",
        "4",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    for (method, files) in [
        ("tyler", vec!["tyler_00001.csv", "tyler_00004.csv"]),
        ("mle0", vec!["mle0_00001.csv", "mle0_00004.csv"]),
        ("recursive", vec!["recursive.csv"]),
        ("arithmetic", vec!["arithmetic.csv"]),
    ] {
        let out = tmp.path().join(method);
        ok(&["estimate", "--data", s(&data), "--method", method, "--out", s(&out)]);
        for f in files {
            assert!(out.join(f).exists(), "{method}: missing {f}");
        }
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn identical_batches_are_not_a_change() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "simulate",
        "--p",
        "2",
        "--n",
        "8",
        "--t",
        "1",
        "--seed",
        "5",
        "--out",
        s(&data),
    ]);
    let first = read_batch(&data.join(batch_file_name(1))).unwrap();
    for t in 2..=4 {
        write_batch(&data.join(batch_file_name(t)), &first.clone().with_time(t)).unwrap();
    }
    for mode in ["batch", "recursive"] {
        let out = tmp.path().join(mode);
        let stdout = ok(&[
            "detect",
            "--data",
            s(&data),
            "--mode",
            mode,
            "--pfa",
            "0.4",
            "--trials",
            "300",
            "--out",
            s(&out),
        ]);
        let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert!(report["log_lambda"].as_f64().unwrap().abs() < 1e-6, "{mode}: {report}");
        assert_eq!(report["decision"], "H0");
        assert!(out.join("detection.json").exists());
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn bench_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "bench-fig1",
            "--p",
            "2",
            "--n",
            "6",
            "--t",
            "12",
            "--trials",
            "10",
            "--seed",
            "4",
            "--threads",
            threads,
            "--out",
            s(&out),
        ]);
        fs::read_to_string(out.join("mse.csv")).unwrap()
    };
    let a = run("a", "2");
    assert_eq!(a, run("b", "2"));
    assert_eq!(a, run("c", "1"));
    assert_eq!(a.lines().next().unwrap(), "T,icrb_db,mle_db,art_db,rec_db");
    let ts: Vec<&str> = a.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ts, ["1", "3", "10", "12"]);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# simulation\np = 3\nn = 5\nt = 2\nseed = 9\n").unwrap();
    let out = tmp.path().join("out");
    ok(&["simulate", "--config", s(&cfg), "--p", "2", "--out", s(&out)]);
    let batches = read_batch_dir(&out).unwrap();
    assert_eq!((batches[0].p(), batches[0].n(), batches.len()), (2, 5, 2));
    let manifest = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.config["p"], 2);
    assert_eq!(manifest.seed, Some(9));
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let expect = |args: &[&str], code: i32, kind: &str| {
        let out = cgrd(args);
        assert_eq!(
            out.status.code(),
            Some(code),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(error_json(&out)["error"], kind);
    };
    let missing = tmp.path().join("missing");
    expect(
        &["estimate", "--method", "tolerant", "--data", "x", "--out", "y"],
        2,
        "usage",
    );
    expect(&["estimate", "--method", "tyler", "--out", "y"], 2, "usage");
    expect(
        &["estimate", "--method", "tyler", "--data", s(&missing), "--out", "y"],
        4,
        "io",
    );

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "p = 2\ncolour = red\n").unwrap();
    expect(&["simulate", "--config", s(&cfg), "--out", "y"], 2, "usage");

    let data = tmp.path().join("data");
    ok(&[
        "simulate",
        "--p",
        "2",
        "--n",
        "4",
        "--t",
        "2",
        "--seed",
        "1",
        "--out",
        s(&data),
    ]);
    let est = tmp.path().join("est");
    expect(
        &[
            "estimate",
            "--data",
            s(&data),
            "--method",
            "tyler",
            "--max-iter",
            "1",
            "--out",
            s(&est),
        ],
        3,
        "numerical",
    );

    let other = tmp.path().join("other");
    ok(&[
        "simulate",
        "--p",
        "3",
        "--n",
        "4",
        "--t",
        "1",
        "--seed",
        "1",
        "--out",
        s(&other),
    ]);
    fs::copy(other.join(batch_file_name(1)), data.join(batch_file_name(3))).unwrap();
    let mixed = read_batch(&data.join(batch_file_name(3))).unwrap().with_time(3);
    write_batch(&data.join(batch_file_name(3)), &mixed).unwrap();
    expect(&["detect", "--data", s(&data), "--threshold", "1"], 4, "io");

    fs::write(data.join(batch_file_name(4)), "2,4,4\n1,2,3\n").unwrap();
    expect(
        &["estimate", "--data", s(&data), "--method", "tyler", "--out", s(&est)],
        4,
        "io",
    );
}
