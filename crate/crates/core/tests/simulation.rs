use num_complex::Complex64;
use nalgebra::DMatrix;
use tsobs::linalg::{Mat, Vector};
use tsobs::simulator::{run_batch, InputSignal, ThetaSwitch};
use tsobs::tsmodel::{AffineFamily, Dimensions, ParamAffineModel, Premise, PremiseSpec};
use tsobs::{example, run, snl_decompose, solve_design, DesignSpec, Execution, ObserverDesign, SimScenario, Trajectory, TsModel};

fn setup() -> (TsModel, ObserverDesign) {
    let model = snl_decompose(&example::param_affine_model()).unwrap();
    let design = solve_design(&model, &example::design_spec()).unwrap();
    (model, design)
}

fn final_state(model: &TsModel, design: &ObserverDesign, t_end: f64, dt: f64) -> Vec<f64> {
    let mut sc = example::scenario(t_end, dt);
    sc.record_stride = (t_end / dt).round() as usize;
    let traj = run(model, design, &sc).unwrap().trajectory;
    let s = traj.last().unwrap();
    assert!((s.t - t_end).abs() < 1e-9);
    [s.x.clone(), s.xhat.clone(), s.thetahat.clone()].concat()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `dx/dt = -x`, one state, no parameters.
fn decay_model() -> TsModel {
    let dims = Dimensions::new(1, 1, 1, 1, 0).unwrap();
    let pam = ParamAffineModel::new(
        dims,
        AffineFamily::constant(Mat::from_element(1, 1, -1.0), 1),
        AffineFamily::zeros(1, 1, 1),
        AffineFamily::zeros(1, 1, 1),
        vec![],
        Mat::from_element(1, 1, 1.0),
        PremiseSpec::new(vec![Premise { min: -1.0, max: 1.0, selector: Vector::from_row_slice(&[1.0, 0.0]) }], 2).unwrap(),
    )
    .unwrap();
    snl_decompose(&pam).unwrap()
}

#[test]
fn rk4_matches_exponential_decay() {
    let model = decay_model();
    let design = solve_design(&model, &DesignSpec::default()).unwrap();
    let sc = SimScenario {
        t_end: 1.0,
        dt: 1e-2,
        x0: vec![1.0],
        xhat0: vec![],
        thetahat0: vec![],
        theta_profile: vec![],
        input: InputSignal::Zero,
        rho: vec![],
        record_stride: 1,
        excitation_window: 0.5,
    };
    let traj = run(&model, &design, &sc).unwrap().trajectory;
    assert_eq!(traj.samples.len(), 101);
    let last = traj.last().unwrap();
    assert!((last.x[0] - (-1.0f64).exp()).abs() <= 1e-9, "{}", last.x[0]);
}

#[test]
fn convergence_order_is_four() {
    let (model, design) = setup();
    let states: Vec<Vec<f64>> = [0.02, 0.01, 0.005].iter().map(|dt| final_state(&model, &design, 10.0, *dt)).collect();
    let order = (distance(&states[0], &states[1]) / distance(&states[1], &states[2])).log2();
    assert!(order >= 3.5, "measured order {order}");
}

#[test]
fn halving_the_step_barely_moves_the_final_state() {
    let (model, design) = setup();
    let a = final_state(&model, &design, 100.0, 1e-3);
    let b = final_state(&model, &design, 100.0, 5e-4);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8, "{diff:e}");
}

#[test]
fn example_run_converges_in_each_window() {
    let (model, design) = setup();
    let out = run(&model, &design, &example::scenario(100.0, 1e-3)).unwrap();
    let traj = &out.trajectory;
    assert_eq!(out.diagnostics.saturated_samples, 0);
    for (t_end, theta) in [(50.0, 0.5), (100.0, 0.3)] {
        let s = traj.samples.iter().rfind(|s| s.t < t_end - 1e-9).unwrap();
        assert_eq!(s.theta[0], theta);
        assert!(s.ex().norm() <= 1e-2, "e_x = {}", s.ex().norm());
        assert!(s.etheta()[0].abs() / theta <= 0.02);
    }
    let last = traj.last().unwrap();
    assert!(last.ex().norm() <= 1e-3);
    assert!(last.etheta()[0].abs() <= 1e-2);
    for s in &traj.samples {
        assert!((s.mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn equilibrium_with_matched_parameter_is_preserved() {
    let (model, design) = setup();
    let mut sc = example::scenario(3.0, 1e-3);
    sc.input = InputSignal::Zero;
    sc.theta_profile = vec![ThetaSwitch { t: 0.0, theta: vec![0.0] }];
    sc.x0 = vec![0.0; 3];
    sc.xhat0 = vec![0.0; 3];
    sc.thetahat0 = vec![0.0];
    let traj = run(&model, &design, &sc).unwrap().trajectory;
    for s in &traj.samples {
        assert!(s.x.iter().chain(&s.xhat).chain(&s.thetahat).all(|v| *v == 0.0));
        assert!(s.ey.iter().all(|v| *v == 0.0) && s.v == 0.0);
    }
}

#[test]
fn zero_output_error_leaves_the_estimate_alone() {
    let (model, design) = setup();
    let mut sc = example::scenario(2.0, 1e-3);
    sc.theta_profile.truncate(1);
    sc.xhat0 = sc.x0.clone();
    sc.thetahat0 = vec![0.5];
    let traj = run(&model, &design, &sc).unwrap().trajectory;
    for s in &traj.samples {
        assert_eq!(s.thetahat[0], 0.5);
        assert!(s.ex().iter().all(|v| *v == 0.0));
    }
}

fn eigen_solution(m: &Mat, e0: &Vector, t: f64) -> Vec<f64> {
    let n = m.nrows();
    let lambdas = m.clone().complex_eigenvalues();
    let mc: DMatrix<Complex64> = m.map(|v| Complex64::new(v, 0.0));
    let mut vecs = DMatrix::<Complex64>::zeros(n, n);
    for (k, lam) in lambdas.iter().enumerate() {
        let shifted = &mc - DMatrix::<Complex64>::identity(n, n) * *lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.unwrap();
        let (idx, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        for i in 0..n {
            vecs[(i, k)] = vt[(idx, i)].conj();
        }
    }
    let inv = vecs.clone().try_inverse().unwrap();
    let e0c = e0.map(|v| Complex64::new(v, 0.0));
    let modal = inv * e0c;
    let evolved = DMatrix::from_fn(n, 1, |k, _| modal[k] * (lambdas[k] * t).exp());
    (vecs * evolved).iter().map(|z| {
        assert!(z.im.abs() < 1e-9);
        z.re
    }).collect()
}

#[test]
fn frozen_vertex_matches_linear_error_dynamics() {
    let (model, design) = setup();
    // Zero selector with upper bound 0: the premise sits on the all-upper corner.
    let pinned = model
        .with_premises(PremiseSpec::new(vec![Premise { min: -1.0, max: 0.0, selector: Vector::zeros(3) }], 3).unwrap())
        .unwrap();
    let theta = 0.5;
    let mut sc = example::scenario(5.0, 1e-3);
    sc.input = InputSignal::Constant { value: vec![1.0] };
    sc.theta_profile = vec![ThetaSwitch { t: 0.0, theta: vec![theta] }];
    sc.thetahat0 = vec![theta];
    // Practically frozen adaptation: the estimate moves by O(1e-12).
    sc.rho = vec![1e12];
    sc.record_stride = 100;
    let traj = run(&pinned, &design, &sc).unwrap().trajectory;
    let m = model.a(0) - &design.l[0] * model.c() + model.a_bar(0, 0) * theta;
    let e0 = traj.samples[0].ex();
    for s in traj.samples.iter().skip(1) {
        assert_eq!(s.mu, vec![1.0, 0.0]);
        let oracle = eigen_solution(&m, &e0, s.t);
        let err = distance(s.ex().as_slice(), &oracle);
        assert!(err <= 1e-6, "t = {}: {err:e}", s.t);
    }
}

#[test]
fn runs_are_deterministic_and_strategy_independent() {
    let (model, design) = setup();
    let mut scenarios = Vec::new();
    for (k, seed) in [1u64, 2, 3, 4].iter().enumerate() {
        let mut sc = example::scenario(4.0, 1e-3);
        sc.input = if k % 2 == 0 {
            InputSignal::Prbs { amplitude: 0.5, dwell: 0.5, seed: *seed }
        } else {
            sc.input
        };
        scenarios.push(sc);
    }
    let seq = run_batch(&model, &design, &scenarios, Execution::Sequential);
    let par = run_batch(&model, &design, &scenarios, Execution::Parallel);
    for (a, b) in seq.iter().zip(&par) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(a.trajectory, b.trajectory);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.trajectory.write_csv(&mut ca).unwrap();
        b.trajectory.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }
    assert_eq!(seq[0].as_ref().unwrap().trajectory, run(&model, &design, &scenarios[0]).unwrap().trajectory);
}

#[test]
fn sample_count_and_stride() {
    let (model, design) = setup();
    let mut sc = example::scenario(1.0, 1e-3);
    sc.record_stride = 7;
    let traj = run(&model, &design, &sc).unwrap().trajectory;
    assert_eq!(traj.samples.len(), 1 + 1000 / 7);
    assert_eq!(traj.samples[0].t, 0.0);
    assert!((traj.samples[1].t - 0.007).abs() < 1e-15);
}

#[test]
fn csv_round_trip_is_bitwise() {
    let (model, design) = setup();
    let traj = run(&model, &design, &example::scenario(2.0, 1e-3)).unwrap().trajectory;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x1,x2,x3,xhat1,xhat2,xhat3,theta_1,thetahat_1,mu_1,mu_2,u_1,ey_1,ey_2,V,sat");
    let back = Trajectory::read_csv(buf.as_slice(), &model, traj.dt, traj.record_stride, traj.rho.clone()).unwrap();
    assert_eq!(back, traj);
}

#[test]
fn switches_beyond_the_horizon_are_reported() {
    let (model, design) = setup();
    let mut sc = example::scenario(2.0, 1e-3);
    sc.theta_profile.push(ThetaSwitch { t: 10.0, theta: vec![0.1] });
    let out = run(&model, &design, &sc).unwrap();
    assert!(out.warnings.iter().any(|w| w.contains("beyond t_end")));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let (model, design) = setup();
    let mut sc = example::scenario(2.0, 1e-3);
    sc.x0 = vec![1.0];
    assert!(run(&model, &design, &sc).is_err());
    let mut sc = example::scenario(2.0, 1e-3);
    sc.dt = 0.0;
    assert!(run(&model, &design, &sc).is_err());
}
