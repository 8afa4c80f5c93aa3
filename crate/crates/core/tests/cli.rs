use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;
use urllc_codesign::prediction::{
    build_constant_accel_model, evaluate_trace, sample_location_trace,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urllc-codesign"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .from_reader(csv_text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        urllc_codesign::cli::config::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
    }
}

#[test]
fn sweep_horizon_marks_infeasible_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[sweep]\nvariable = \"horizon\"\ngrid = [5.0, 9.9, 10.0, 12.0, 20.0, 40.0]\n",
    );
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = run(&[
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "sweep-horizon",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&out1).unwrap();
    assert_eq!(text, fs::read_to_string(&out2).unwrap());
    let header = text.lines().next().unwrap();
    for col in [
        "eps_prediction",
        "eps_queue",
        "eps_tx",
        "eps_overall",
        "horizon",
        "bandwidth",
        "data_fraction",
    ] {
        assert!(header.contains(col), "missing {col}");
    }
    let r = rows(&text);
    assert_eq!(r.len(), 6);
    // At or below the 10 ms core delay there is no budget for a copy.
    for row in &r[..3] {
        assert_eq!(row[2], "infeasible");
    }
    for row in &r[3..] {
        assert_eq!(row[2], "ok");
        let parts: Vec<f64> = row[3..7].iter().map(|v| v.parse().unwrap()).collect();
        // Values are printed with ten significant digits.
        assert!((parts[0] + parts[1] + parts[2] - parts[3]).abs() <= 1e-9 * parts[3]);
    }
}

#[test]
fn tradeoff_baseline_is_dominated() {
    let out = run(&[
        "--config",
        configs().join("tradeoff.toml").to_str().unwrap(),
        "tradeoff",
    ]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 2 * 41);
    for pair in r.chunks(2) {
        let (co, base) = (&pair[0], &pair[1]);
        assert_eq!(co[0], "co-design");
        assert_eq!(base[0], "no-prediction");
        let d_max: f64 = co[1].parse().unwrap();
        if d_max <= 10.0 {
            assert_eq!(base[2], "infeasible");
        }
        if base[2] == "ok" {
            let c: f64 = co[6].parse().unwrap();
            let b: f64 = base[6].parse().unwrap();
            assert!(c <= b);
        }
    }
}

#[test]
fn capacity_modes() {
    let worst = run(&[
        "--config",
        configs().join("capacity_worst_case.toml").to_str().unwrap(),
        "capacity",
    ]);
    assert!(worst.status.success());
    let r = rows(&String::from_utf8(worst.stdout).unwrap());
    let b1: f64 = r[0][2].parse().unwrap();
    for (i, row) in r.iter().enumerate() {
        let b: f64 = row[2].parse().unwrap();
        assert_eq!(b, (i + 1) as f64 * b1);
    }

    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "k.toml",
        "seed = 5\n[sweep]\nvariable = \"n_devices\"\ngrid = [1, 3, 5, 7, 9, 11]\n\
         [capacity]\nmode = \"known_distribution\"\ndraws = 2000\n",
    );
    let one = run(&["--config", &cfg, "--workers", "1", "capacity"]);
    let many = run(&["--config", &cfg, "--workers", "8", "capacity"]);
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    let r = rows(&String::from_utf8(one.stdout).unwrap());
    let probs: Vec<f64> = r.iter().map(|row| row[3].parse().unwrap()).collect();
    assert!(probs.windows(2).all(|w| w[1] >= w[0]));
    assert!(r.iter().all(|row| row[4] == "2000" && row[5] == "5"));

    let reseeded = run(&["--config", &cfg, "--seed", "6", "capacity"]);
    let r = rows(&String::from_utf8(reseeded.stdout).unwrap());
    assert!(r.iter().all(|row| row[5] == "6"));
}

#[test]
fn validate_default_passes_and_zero_tolerance_fails() {
    let dir = TempDir::new().unwrap();
    let small =
        "[validation]\nprediction_trials = 200000\nqueue_slots = 500000\nrandom_cases = 4\n";
    let ok_cfg = write(dir.path(), "ok.toml", small);
    let out = run(&["--config", &ok_cfg, "validate"]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{report}");
    assert!(report.contains("near-optimal gap below the optimum"));
    assert!(report.lines().filter(|l| l.starts_with("PASS")).count() >= 15);

    let strict = write(
        dir.path(),
        "strict.toml",
        &format!("{small}tolerance_scale = 0.0\n"),
    );
    let out = run(&["--config", &strict, "validate"]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(report.contains("FAIL |"));
    assert!(report.trim_end().ends_with("validation FAILED"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[scenario]\nbandwith_mhz = 0.44\n");
    let out = run(&["--config", &cfg, "sweep-horizon"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bandwith_mhz"), "{err}");

    let unwritable = run(&["--out", "/nonexistent-dir/x.csv", "sweep-horizon"]);
    assert_eq!(unwritable.status.code(), Some(2));
}

#[test]
fn eval_trace_matches_library() {
    let model =
        build_constant_accel_model(1e-3, 1.0, [0.05, f64::INFINITY, f64::INFINITY], [0.0; 3])
            .unwrap();
    let trace = sample_location_trace(&model, 5000, 3);
    let dir = TempDir::new().unwrap();
    let mut text = String::from("position\n");
    for x in &trace {
        text.push_str(&format!("{x:e}\n"));
    }
    let path = write(dir.path(), "trace.csv", &text);
    let out = run(&[
        "eval-trace",
        "--trace",
        &path,
        "--slot-ms",
        "1",
        "--horizon",
        "1,10,50",
        "--threshold",
        "0.05",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 3);
    let mut prev = -1.0;
    for (row, h) in r.iter().zip([1u32, 10, 50]) {
        let parsed: Vec<f64> = trace
            .iter()
            .map(|x| format!("{x:e}").parse().unwrap())
            .collect();
        let want = evaluate_trace(&parsed, 1e-3, h, 0.05).unwrap().value();
        let got: f64 = row[2].parse().unwrap();
        assert!((got - want).abs() <= 1e-9 * want.max(1e-300));
        assert!(got >= prev);
        prev = got;
    }
}
