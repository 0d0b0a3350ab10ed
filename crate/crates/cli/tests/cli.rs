use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn estimand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_estimand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

const REDUCED: &str = "id,arm,time,cause\n\
    a,1,2.0,1\nb,1,3.0,2\nc,1,5.0,0\nd,0,4.0,1\ne,0,4.5,0\n";

const FULL: &str = "id,arm,t_obs,delta_t,r_obs,delta_r\n\
    a,1,1.0,1,2.0,0\nb,1,2.0,0,1.5,1\nc,1,3.0,1,3.0,0\n\
    d,0,1.5,1,4.0,0\ne,0,2.5,0,2.5,0\nf,0,0.5,0,0.3,1\n";

#[test]
fn validate_clean_file_exits_zero_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", FULL);
    let out = estimand(&["validate", "--input", &input, "--t-star", "2.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["arm_sizes"], serde_json::json!([3, 3]));
    // Worst-case gap between the exp and product-limit survival transforms.
    let bound = doc["transform_discrepancy_bound"].as_f64().unwrap();
    assert!(bound > 0.0 && bound < 1.0, "bound {bound}");
}

#[test]
fn validate_bad_arm_exits_two_with_row_index() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "id,arm,time,cause\na,7,1.0,1\nb,0,2.0,0\n");
    let out = estimand(&["validate", "--input", &input, "--t-star", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 1"), "stderr: {stderr}");
}

#[test]
fn validate_warns_tp_on_reduced_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", REDUCED);
    let out = estimand(&[
        "validate", "--input", &input, "--t-star", "5", "--strategies", "tp,cv",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let warnings = doc["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("tp not applicable")));
}

#[test]
fn estimate_all_strategies_writes_eighteen_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", FULL);
    let outdir = dir.path().join("curves");
    let out = estimand(&[
        "estimate", "--input", &input, "--t-star", "3",
        "--out", outdir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> = fs::read_dir(&outdir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files.len(), 18, "{files:?}");
    for s in ["tp", "cv", "wo", "hp1", "hp2", "ps"] {
        for suffix in ["arm0", "arm1", "effect"] {
            assert!(files.contains(&format!("{s}_{suffix}.csv")));
        }
    }
    // Files re-parse: header plus one row per event time, 10-significant-digit
    // scientific notation.
    let body = fs::read_to_string(outdir.join("cv_arm1.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "time,mu,variance,ci_lo,ci_hi,truncated");
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 6);
    for f in &fields[..5] {
        let v: f64 = f.parse().unwrap();
        assert!(v.is_finite());
        assert!(f.contains('e'), "expected scientific notation, got {f}");
    }
}

#[test]
fn estimate_tp_on_reduced_data_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", REDUCED);
    let outdir = dir.path().join("curves");
    let out = estimand(&[
        "estimate", "--input", &input, "--t-star", "5",
        "--strategies", "tp", "--out", outdir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("full"));
}

#[test]
fn estimate_degenerate_stratum_exits_one_naming_the_strategy() {
    // Every arm-1 subject has the intercurrent event: the stratum that would
    // avoid it is empty.
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        "id,arm,time,cause\na,1,1.0,2\nb,0,2.0,1\nc,0,3.0,0\n",
    );
    let outdir = dir.path().join("curves");
    let out = estimand(&[
        "estimate", "--input", &input, "--t-star", "4",
        "--strategies", "ps", "--out", outdir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ps") && stderr.contains("denominator"), "stderr: {stderr}");
}

#[test]
fn estimate_cloglog_intervals_stay_interior() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", FULL);
    let plain_dir = dir.path().join("plain");
    let cll_dir = dir.path().join("cloglog");
    for (outdir, extra) in [(&plain_dir, None), (&cll_dir, Some("cloglog"))] {
        let mut args = vec![
            "estimate", "--input", input.as_str(), "--t-star", "3",
            "--strategies", "cv", "--out", outdir.to_str().unwrap(),
        ];
        if let Some(scale) = extra {
            args.extend(["--ci-scale", scale]);
        }
        let out = estimand(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read_cols = |dir: &Path| -> Vec<(f64, f64, f64)> {
        fs::read_to_string(dir.join("cv_arm1.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<f64> =
                    l.split(',').take(5).map(|v| v.parse().unwrap()).collect();
                (f[1], f[3], f[4]) // mu, ci_lo, ci_hi
            })
            .collect()
    };
    let plain = read_cols(&plain_dir);
    let cll = read_cols(&cll_dir);
    assert_eq!(plain.len(), cll.len());
    let mut diverged = false;
    for ((mu_p, lo_p, hi_p), (mu_c, lo_c, hi_c)) in plain.iter().zip(&cll) {
        assert_eq!(mu_p, mu_c); // point estimates are scale-independent
        if *mu_c > 0.0 && *mu_c < 1.0 {
            assert!(*lo_c > 0.0 && *hi_c < 1.0, "cloglog bounds left (0,1)");
            assert!(lo_c <= mu_c && mu_c <= hi_c);
        }
        diverged |= lo_p != lo_c || hi_p != hi_c;
    }
    assert!(diverged, "the two CI scales never differed");
}

#[test]
fn test_command_reports_mirror_symmetry_and_applicability() {
    let dir = tempfile::tempdir().unwrap();
    // Mirror data: identical event patterns in both arms.
    let mirror = write(
        dir.path(),
        "mirror.csv",
        "id,arm,time,cause\na,0,1.0,1\nb,0,2.0,2\nc,0,3.0,0\nd,1,1.0,1\ne,1,2.0,2\nf,1,3.0,0\n",
    );
    let out = estimand(&["test", "--input", &mirror, "--t-star", "4"]);
    assert!(out.status.success());
    let body = String::from_utf8_lossy(&out.stdout);
    let mut saw = 0;
    for line in body.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        match fields[1] {
            "ok" => {
                let p: f64 = fields[5].parse().unwrap();
                assert!((p - 1.0).abs() < 1e-9, "line: {line}");
                saw += 1;
            }
            "not_applicable" => assert_eq!(fields[0], "tp"),
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(saw, 2); // cv and hp run on reduced data; tp cannot
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--a1", "0.4", "--a0", "0.8", "--c1", "0.3", "--c0", "0.15",
        "--censor-rate", "0.1", "--n-per-arm", "50", "--t-star", "2", "--seed", "7",
    ];
    let p1 = dir.path().join("one.csv");
    let p2 = dir.path().join("two.csv");
    for p in [&p1, &p2] {
        let mut a = args.to_vec();
        a.extend(["--out", p.to_str().unwrap()]);
        assert!(estimand(&a).status.success());
    }
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
}

#[test]
fn simulate_per_arm_censor_rates() {
    let dir = tempfile::tempdir().unwrap();
    // Both per-arm flags must be given together.
    let out = estimand(&[
        "simulate", "--a1", "0.5", "--a0", "0.5", "--censor-rate0", "0.2",
        "--n-per-arm", "10", "--t-star", "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Per-arm rates equal to the shared rate reproduce the same dataset.
    let shared = dir.path().join("shared.csv");
    let per_arm = dir.path().join("per_arm.csv");
    let base = [
        "simulate", "--a1", "0.5", "--a0", "0.5", "--n-per-arm", "30",
        "--t-star", "2", "--seed", "9",
    ];
    let mut a = base.to_vec();
    a.extend(["--censor-rate", "0.3", "--out", shared.to_str().unwrap()]);
    assert!(estimand(&a).status.success());
    let mut b = base.to_vec();
    b.extend([
        "--censor-rate0", "0.3", "--censor-rate1", "0.3",
        "--out", per_arm.to_str().unwrap(),
    ]);
    assert!(estimand(&b).status.success());
    assert_eq!(fs::read(&shared).unwrap(), fs::read(&per_arm).unwrap());
}

#[test]
fn simulate_rejects_bad_config() {
    let out = estimand(&[
        "simulate", "--a1", "0", "--a0", "0.8", "--n-per-arm", "10", "--t-star", "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulated_output_reparses_and_collapses_without_intercurrent_events() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    let out = estimand(&[
        "simulate", "--a1", "0.5", "--a0", "0.7", "--n-per-arm", "40",
        "--t-star", "2", "--seed", "3", "--out", data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let outdir = dir.path().join("curves");
    // Product-limit transform: the mode in which all six curves are one
    // curve when no intercurrent events occur.
    let out = estimand(&[
        "estimate", "--input", data.to_str().unwrap(), "--t-star", "2",
        "--out", outdir.to_str().unwrap(), "--product-limit",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let read_mu = |name: &str| -> Vec<f64> {
        fs::read_to_string(outdir.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let reference = read_mu("tp_arm1.csv");
    for s in ["cv", "wo", "hp1", "hp2", "ps"] {
        let mu = read_mu(&format!("{s}_arm1.csv"));
        assert_eq!(mu.len(), reference.len());
        for (a, b) in mu.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-12, "{s}: {a} vs {b}");
        }
    }
}

#[test]
fn calibrate_emits_json_report() {
    let out = estimand(&[
        "simulate", "--a1", "0.5", "--a0", "0.5", "--c1", "0.2", "--c0", "0.2",
        "--censor-rate", "0.1", "--n-per-arm", "30", "--t-star", "2", "--seed", "5",
        "--calibrate", "--replications", "100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["replications"], 100);
    assert!(doc["cells"].as_array().unwrap().len() > 0);
    assert_eq!(doc["tests"].as_array().unwrap().len(), 3);
}

#[test]
fn thread_cap_env_var_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_estimand"))
        .env("ESTIMAND_THREADS", "zero")
        .args(["simulate", "--a1", "1", "--a0", "1", "--n-per-arm", "5", "--t-star", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_estimand"))
        .env("ESTIMAND_THREADS", "2")
        .args(["simulate", "--a1", "1", "--a0", "1", "--n-per-arm", "5", "--t-star", "1"])
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn estimate_json_format_and_custom_times() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", FULL);
    let outdir = dir.path().join("curves");
    let out = estimand(&[
        "estimate", "--input", &input, "--t-star", "3", "--strategies", "cv,wo",
        "--times", "1,2,3", "--format", "json", "--out", outdir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("estimates.json")).unwrap()).unwrap();
    assert_eq!(doc["time"], serde_json::json!([1.0, 2.0, 3.0]));
    assert!(doc["strategies"]["cv"]["arm1"]["mu"].as_array().unwrap().len() == 3);
    assert!(doc["strategies"].get("tp").is_none());
}
