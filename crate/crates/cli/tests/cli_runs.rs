use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tsobs::lmi::{DesignSpec, Objective};
use tsobs::model_io::ParamAffineDoc;
use tsobs::random::{random_dimensions, random_param_affine_model, RandomScales};
use tsobs::simulator::{InputSignal, SimScenario, ThetaSwitch};
use tsobs::example;
use tsobs_cli::config::{ModelSource, Outputs};
use tsobs_cli::RunConfig;

fn tsobs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsobs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn example_doc() -> Value {
    serde_json::to_value(ParamAffineDoc::from_model(&example::param_affine_model())).unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn reproduce_example_writes_the_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bundle");
    let res = tsobs(&["reproduce-example", "--out", out.to_str().unwrap(), "--t-end", "20"], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "design.json",
        "certification.json",
        "summary.json",
        "trajectory.csv",
        "diagnostics.json",
        "err_states.svg",
        "theta_tracking.svg",
        "input.svg",
        "weights.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["decomposition_exact"], true);
    assert_eq!(summary["matrices"]["A1"][0][0].as_f64(), Some(-1.4));
    assert_eq!(summary["matrices"]["A2"][1][2].as_f64(), Some(0.0));
    assert_eq!(summary["theorem1_applicable"], false);
    let h = &summary["H"];
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == 2 && j == 2 { 1.0 } else { 0.0 };
            assert!((h[i][j].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
    assert!(summary["beta_1"].as_f64().unwrap() <= 1e-6);
    let svg = std::fs::read_to_string(out.join("err_states.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn degenerate_premise_box_is_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    let mut model = example_doc();
    model["premises"][0]["max"] = model["premises"][0]["min"].clone();
    let cfg = write_config(tmp.path(), &json!({ "param_affine_model": model }));
    let res = tsobs(&["design", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(4));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("premise"), "{err}");
}

#[test]
fn unobservable_unstable_model_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let model = json!({
        "dimensions": { "n": 2, "n_u": 1, "n_y": 1, "n_p": 1, "n_theta": 1 },
        "premises": [{ "min": -1.0, "max": 1.0, "selector": [1.0, 0.0] }],
        "A": { "base": [[1.0, 0.0], [0.0, -1.0]] },
        "B": { "base": [[1.0], [1.0]] },
        "transmission": [{ "B": { "base": [[0.0], [1.0]] } }],
        "C": [[0.0, 1.0]]
    });
    let cfg = write_config(tmp.path(), &json!({ "param_affine_model": model, "design": { "theta_bar": 0.1 } }));
    let res = tsobs(&["design", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("max_gamma"), "{err}");
}

#[test]
fn unreadable_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = tsobs(&["design", "--config", "does-not-exist.json"], tmp.path());
    assert_eq!(res.status.code(), Some(1));
    let cfg = write_config(tmp.path(), &json!({ "param_affine_model": example_doc(), "bogus": 1 }));
    let res = tsobs(&["design", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn design_then_certify_then_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut scenario = serde_json::to_value(example::scenario(4.0, 1e-3)).unwrap();
    scenario["record_stride"] = json!(50);
    let cfg = json!({
        "param_affine_model": example_doc(),
        "design": { "theta_bar": 0.6, "rho": [1.0] },
        "scenario": scenario,
        "outputs": { "directory": "out" }
    });
    let path = write_config(tmp.path(), &cfg);
    let res = tsobs(&["design", "--config", &path], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let design_file = tmp.path().join("out/design.json");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&design_file).unwrap()).unwrap();
    for key in ["P", "Q", "L", "gamma", "beta", "theta_bar_max", "rho"] {
        assert!(doc.get(key).is_some(), "design.json lacks {key}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/certification.json")).unwrap()).unwrap();
    assert_eq!(report["overall_pass"], true);

    let mut with_design = cfg.clone();
    with_design["design_file"] = json!("out/design.json");
    with_design["outputs"]["directory"] = json!("out2");
    let path = write_config(tmp.path(), &with_design);
    let res = tsobs(&["certify", "--config", &path], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let res = tsobs(&["simulate", "--config", &path], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv_rows(&tmp.path().join("out2/trajectory.csv"));
    assert_eq!(header[0], "t");
    assert_eq!(header.last().unwrap(), "sat");
    assert_eq!(rows.len(), 1 + 4000 / 50);
    assert_eq!(rows[0][0], 0.0);
    assert!(tmp.path().join("out2/diagnostics.json").is_file());
}

#[test]
fn zero_dynamics_give_zero_error_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = SimScenario {
        t_end: 2.0,
        dt: 1e-3,
        x0: vec![0.0; 3],
        xhat0: vec![0.0; 3],
        thetahat0: vec![0.4],
        theta_profile: vec![ThetaSwitch { t: 0.0, theta: vec![0.4] }],
        input: InputSignal::Zero,
        rho: vec![1.0],
        record_stride: 10,
        excitation_window: 1.0,
    };
    let cfg = json!({
        "param_affine_model": example_doc(),
        "design": { "theta_bar": 0.6 },
        "scenario": scenario,
        "outputs": { "directory": "zero", "emit_plots": false }
    });
    let path = write_config(tmp.path(), &cfg);
    let res = tsobs(&["simulate", "--config", &path], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv_rows(&tmp.path().join("zero/trajectory.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &rows {
        for i in 1..=3 {
            assert_eq!(row[col(&format!("x{i}"))], row[col(&format!("xhat{i}"))]);
        }
        assert_eq!(row[col("theta_1")], row[col("thetahat_1")]);
        assert_eq!(row[col("ey_1")], 0.0);
        assert_eq!(row[col("ey_2")], 0.0);
        assert_eq!(row[col("V")], 0.0);
    }
    assert!(!tmp.path().join("zero/err_states.svg").exists());
}

#[test]
fn halving_dt_on_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "param_affine_model": example_doc(),
        "design": { "theta_bar": 0.6, "rho": [1.0] },
        "scenario": example::scenario(20.0, 1e-3),
        "outputs": { "emit_plots": false }
    });
    let path = write_config(tmp.path(), &cfg);
    let mut finals = Vec::new();
    for (dt, dir) in [("0.001", "a"), ("0.0005", "b")] {
        let res = tsobs(&["simulate", "--config", &path, "--dt", dt, "--out", dir], tmp.path());
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        let (header, rows) = csv_rows(&tmp.path().join(dir).join("trajectory.csv"));
        let last = rows.last().unwrap().clone();
        assert_eq!(last[0], 20.0);
        let states: Vec<f64> = header
            .iter()
            .zip(&last)
            .filter(|(h, _)| h.starts_with('x') || h.starts_with("thetahat"))
            .map(|(_, v)| *v)
            .collect();
        finals.push(states);
    }
    let diff = finals[0].iter().zip(&finals[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8, "{diff:e}");
}

fn random_config(seed: u64) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = random_dimensions(&mut rng, 4, 2, 2);
    let pam = random_param_affine_model(&mut rng, dims, RandomScales::default());
    let doc = serde_json::to_value(ParamAffineDoc::from_model(&pam)).unwrap();
    let x = |k: u64| (seed.wrapping_mul(k) % 10_000) as f64 / 7.0 + 1.0 / 3.0;
    RunConfig {
        param_affine_model: Some(ModelSource::Inline(doc)),
        ts_model: None,
        design: DesignSpec {
            theta_bar: Some(x(3) / 1e4),
            objective: [Objective::MinBeta, Objective::MaxGamma, Objective::FeasibilityOnly][(seed % 3) as usize],
            rho: vec![x(5); dims.n_theta],
            ..DesignSpec::default()
        },
        design_file: None,
        scenario: Some(SimScenario {
            t_end: x(7),
            dt: 1e-3 * x(11) / 1e3,
            x0: (0..dims.n).map(|i| x(13 + i as u64) / 1e3).collect(),
            xhat0: vec![],
            thetahat0: vec![],
            theta_profile: vec![ThetaSwitch { t: 0.0, theta: vec![x(17); dims.n_theta] }],
            input: InputSignal::Prbs { amplitude: x(19), dwell: 0.1, seed },
            rho: vec![],
            record_stride: 1 + (seed % 5) as usize,
            excitation_window: x(23),
        }),
        outputs: Outputs { directory: format!("out-{seed}").into(), emit_csv: seed % 2 == 0, emit_plots: true, emit_report: seed % 3 == 0 },
        seed: Some(seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn config_round_trip_is_bitwise(seed in any::<u64>()) {
        let cfg = random_config(seed);
        let text = cfg.to_json();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}
