//! `design`, `simulate`, `certify` and `reproduce-example`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tsobs::certify::{certify_seeded, constant_theta_windows, lyapunov_decrease_audit, AuditRecord, CertificationReport, DEFAULT_TOLERANCE, ROBUST_SEED};
use tsobs::example;
use tsobs::linalg::{matrix_to_rows, Mat};
use tsobs::lmi::{check_theorem1, solve_design, theta_bar_admissible, DesignDoc, DesignError, DesignSpec, Objective, ObserverDesign};
use tsobs::model_io::Rows;
use tsobs::simulator::{self, ExcitationDiagnostics, InputSignal, SimError, SimScenario, Trajectory};
use tsobs::tsmodel::{snl_decompose, TsModel};

use crate::config::{resolve, RunConfig};
use crate::error::{CliError, ExitStatus};
use crate::plot::{line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Simulate,
    Certify,
    ReproduceExample,
}

/// Command-line overrides shared by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub objective: Option<Objective>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: ExitStatus,
    pub messages: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { status: ExitStatus::Success, messages: Vec::new(), files: Vec::new() }
    }

    fn say(&mut self, m: impl Into<String>) {
        self.messages.push(m.into());
    }

    pub fn code(&self) -> i32 {
        self.status.code()
    }
}

pub fn execute(cmd: Command, inv: &Invocation) -> Outcome {
    let mut out = Outcome::new();
    let res = match cmd {
        Command::Design => cmd_design(inv, &mut out),
        Command::Simulate => cmd_simulate(inv, &mut out),
        Command::Certify => cmd_certify(inv, &mut out),
        Command::ReproduceExample => cmd_reproduce_example(inv, &mut out),
    };
    if let Err(e) = res {
        out.status = e.status;
        out.say(format!("error: {}", e.message));
    }
    out
}

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out_dir: PathBuf,
}

fn context(inv: &Invocation) -> Result<Context, CliError> {
    let path = inv
        .config
        .as_ref()
        .ok_or_else(|| CliError::invalid("this command needs --config <path>"))?;
    let (mut cfg, base) = RunConfig::load(path)?;
    if let Some(obj) = inv.objective {
        cfg.design.objective = obj;
    }
    if inv.seed.is_some() {
        cfg.seed = inv.seed;
    }
    let out_dir = match &inv.out {
        Some(p) => p.clone(),
        None => resolve(&base, &cfg.outputs.directory),
    };
    make_dir(&out_dir)?;
    Ok(Context { cfg, base, out_dir })
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(out: &mut Outcome, path: PathBuf, contents: &str) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    out.files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(out: &mut Outcome, path: PathBuf, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(format!("cannot serialize {}: {e}", path.display())))?;
    write_file(out, path, &(text + "\n"))
}

/// Solves the design; on infeasibility also tries `max_gamma` to report the
/// largest certifiable parameter bound.
pub fn design_or_explain(model: &TsModel, spec: &DesignSpec) -> Result<ObserverDesign, CliError> {
    match solve_design(model, spec) {
        Ok(d) => Ok(d),
        Err(DesignError::InvalidSpec(m)) => Err(CliError::invalid(format!("design: {m}"))),
        Err(DesignError::SolverFailure(m)) => Err(CliError::new(ExitStatus::SolverFailure, format!("solver failure: {m}"))),
        Err(e @ DesignError::Infeasible { .. }) => {
            let mut msg = e.to_string();
            if spec.objective != Objective::MaxGamma && model.dims().n_theta > 0 {
                let retry = DesignSpec { objective: Objective::MaxGamma, ..spec.clone() };
                match solve_design(model, &retry) {
                    Ok(d) => match d.theta_bar_max {
                        Some(tb) => msg.push_str(&format!(
                            "; with objective max_gamma the largest certifiable theta_bar is {tb:.6e} (rerun with --objective max_gamma)"
                        )),
                        None => msg.push_str("; objective max_gamma finds a design with unbounded theta_bar (rerun with --objective max_gamma)"),
                    },
                    Err(_) => msg.push_str("; no design exists for any theta_bar either (max_gamma is infeasible too)"),
                }
            }
            Err(CliError::new(ExitStatus::Infeasible, msg))
        }
    }
}

fn certify_design(model: &TsModel, design: &ObserverDesign, seed: Option<u64>) -> Result<CertificationReport, CliError> {
    certify_seeded(model, design, DEFAULT_TOLERANCE, seed.unwrap_or(ROBUST_SEED))
        .map_err(|e| CliError::invalid(format!("certification: {e}")))
}

fn report_certification(out: &mut Outcome, report: &CertificationReport) {
    if report.overall_pass {
        out.say("certification: pass");
    } else {
        out.status = ExitStatus::VerificationFailed;
        let failed: Vec<String> = report.failures().map(|c| format!("{} (margin {:.3e})", c.id, c.margin)).collect();
        out.say(format!("certification: FAIL [{}]", failed.join(", ")));
    }
}

fn describe_design(out: &mut Outcome, d: &ObserverDesign) {
    out.say(format!(
        "design: objective {:?}, beta = {:?}, gamma = {:.6e}, theta_bar_max = {}",
        d.objective,
        d.beta,
        d.gamma,
        d.theta_bar_max.map_or("unbounded".to_string(), |t| format!("{t:.6e}"))
    ));
}

fn load_design(ctx: &Context, model: &TsModel) -> Result<Option<ObserverDesign>, CliError> {
    let Some(p) = &ctx.cfg.design_file else { return Ok(None) };
    let path = resolve(&ctx.base, p);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("cannot read design {}: {e}", path.display())))?;
    let doc: DesignDoc = serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("design file {}: {e}", path.display())))?;
    ObserverDesign::from_doc(&doc, model)
        .map(Some)
        .map_err(|e| CliError::invalid(format!("design file {}: {e}", path.display())))
}

pub fn cmd_design(inv: &Invocation, out: &mut Outcome) -> Result<(), CliError> {
    let ctx = context(inv)?;
    let model = ctx.cfg.model(&ctx.base)?.ts;
    let design = design_or_explain(&model, &ctx.cfg.design)?;
    describe_design(out, &design);
    write_json(out, ctx.out_dir.join("design.json"), &design.to_doc())?;
    let report = certify_design(&model, &design, ctx.cfg.seed)?;
    write_json(out, ctx.out_dir.join("certification.json"), &report)?;
    report_certification(out, &report);
    Ok(())
}

pub fn cmd_certify(inv: &Invocation, out: &mut Outcome) -> Result<(), CliError> {
    let ctx = context(inv)?;
    let model = ctx.cfg.model(&ctx.base)?.ts;
    let design = load_design(&ctx, &model)?.ok_or_else(|| CliError::invalid("certify needs design_file in the config"))?;
    let report = certify_design(&model, &design, ctx.cfg.seed)?;
    write_json(out, ctx.out_dir.join("certification.json"), &report)?;
    report_certification(out, &report);
    Ok(())
}

fn apply_overrides(sc: &mut SimScenario, inv: &Invocation, seed: Option<u64>) {
    if let Some(dt) = inv.dt {
        sc.dt = dt;
    }
    if let Some(t) = inv.t_end {
        sc.t_end = t;
    }
    if let (Some(s), InputSignal::Prbs { seed, .. }) = (seed, &mut sc.input) {
        *seed = s;
    }
}

/// Contents of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub samples: usize,
    pub t_final: f64,
    pub final_error_norm: f64,
    pub final_theta_error: Vec<f64>,
    pub excitation: Option<ExcitationDiagnostics>,
    pub lyapunov_audit: Vec<AuditRecord>,
    pub warnings: Vec<String>,
    pub diverged: bool,
}

fn simulation_report(traj: &Trajectory, design: &ObserverDesign, excitation: Option<ExcitationDiagnostics>, warnings: Vec<String>, diverged: bool) -> SimulationReport {
    let last = traj.last();
    SimulationReport {
        samples: traj.samples.len(),
        t_final: last.map_or(0.0, |s| s.t),
        final_error_norm: last.map_or(0.0, |s| s.ex().norm()),
        final_theta_error: last.map_or(Vec::new(), |s| s.etheta().as_slice().to_vec()),
        excitation,
        lyapunov_audit: constant_theta_windows(traj)
            .into_iter()
            .filter_map(|w| lyapunov_decrease_audit(traj, design, Some(w)).ok())
            .collect(),
        warnings,
        diverged,
    }
}

/// Writes the four line plots; returns their paths.
pub fn write_plots(out: &mut Outcome, dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let series = |label: String, f: &dyn Fn(&simulator::Sample) -> f64| {
        Series::new(label, traj.samples.iter().map(|s| (s.t, f(s))).collect())
    };
    let errs: Vec<Series> = (0..traj.n)
        .map(|k| series(format!("e_x{}", k + 1), &move |s| s.x[k] - s.xhat[k]))
        .collect();
    write_file(out, dir.join("err_states.svg"), &line_chart("State estimation errors", "t [s]", "x - xhat", &errs))?;
    let mut th = Vec::new();
    for j in 0..traj.n_theta {
        th.push(series(format!("theta_{}", j + 1), &move |s| s.theta[j]).dashed());
        th.push(series(format!("thetahat_{}", j + 1), &move |s| s.thetahat[j]));
    }
    write_file(out, dir.join("theta_tracking.svg"), &line_chart("Parameter and estimate", "t [s]", "theta", &th))?;
    let u: Vec<Series> = (0..traj.n_u).map(|k| series(format!("u_{}", k + 1), &move |s| s.u[k])).collect();
    write_file(out, dir.join("input.svg"), &line_chart("Input", "t [s]", "u", &u))?;
    let mu: Vec<Series> = (0..traj.r).map(|i| series(format!("mu_{}", i + 1), &move |s| s.mu[i])).collect();
    write_file(out, dir.join("weights.svg"), &line_chart("Weighting functions", "t [s]", "mu", &mu))?;
    Ok(())
}

fn write_trajectory(out: &mut Outcome, path: PathBuf, traj: &Trajectory) -> Result<(), CliError> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(|e| CliError::io(format!("cannot encode trajectory: {e}")))?;
    fs::write(&path, buf).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    out.files.push(path);
    Ok(())
}

/// Runs a scenario and writes the trajectory, diagnostics and plots.
fn simulate_and_write(
    out: &mut Outcome,
    dir: &Path,
    model: &TsModel,
    design: &ObserverDesign,
    scenario: &SimScenario,
    emit: &crate::config::Outputs,
) -> Result<Option<Trajectory>, CliError> {
    match simulator::run(model, design, scenario) {
        Ok(res) => {
            if emit.emit_csv {
                write_trajectory(out, dir.join("trajectory.csv"), &res.trajectory)?;
            }
            let report = simulation_report(&res.trajectory, design, Some(res.diagnostics), res.warnings.clone(), false);
            write_json(out, dir.join("diagnostics.json"), &report)?;
            if emit.emit_plots {
                write_plots(out, dir, &res.trajectory)?;
            }
            for w in &res.warnings {
                out.say(format!("warning: {w}"));
            }
            out.say(format!(
                "simulation: {} samples, final |e_x| = {:.3e}, final e_theta = {:?}",
                report.samples, report.final_error_norm, report.final_theta_error
            ));
            Ok(Some(res.trajectory))
        }
        Err(SimError::Diverged { t, partial }) => {
            if emit.emit_csv {
                write_trajectory(out, dir.join("trajectory.csv"), &partial)?;
            }
            let report = simulation_report(&partial, design, None, vec![format!("diverged at t = {t}")], true);
            write_json(out, dir.join("diagnostics.json"), &report)?;
            Err(CliError::new(ExitStatus::Diverged, format!("simulation diverged at t = {t}; partial trajectory written")))
        }
        Err(e @ SimError::InvalidScenario(_)) => Err(CliError::invalid(e.to_string())),
    }
}

pub fn cmd_simulate(inv: &Invocation, out: &mut Outcome) -> Result<(), CliError> {
    let ctx = context(inv)?;
    let model = ctx.cfg.model(&ctx.base)?.ts;
    let mut scenario = ctx.cfg.scenario.clone().ok_or_else(|| CliError::invalid("simulate needs a scenario in the config"))?;
    apply_overrides(&mut scenario, inv, ctx.cfg.seed);
    let design = match load_design(&ctx, &model)? {
        Some(d) => d,
        None => {
            let d = design_or_explain(&model, &ctx.cfg.design)?;
            describe_design(out, &d);
            write_json(out, ctx.out_dir.join("design.json"), &d.to_doc())?;
            d
        }
    };
    let report = certify_design(&model, &design, ctx.cfg.seed)?;
    if !report.overall_pass {
        out.say("warning: the design does not pass certification; simulating anyway");
    }
    simulate_and_write(out, &ctx.out_dir, &model, &design, &scenario, &ctx.cfg.outputs)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMatrices {
    #[serde(rename = "A1")]
    pub a1: Rows,
    #[serde(rename = "A2")]
    pub a2: Rows,
    #[serde(rename = "A_bar_11")]
    pub a_bar_11: Rows,
    #[serde(rename = "A_bar_21")]
    pub a_bar_21: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "B_bar_11")]
    pub b_bar_11: Rows,
    #[serde(rename = "B_bar_21")]
    pub b_bar_21: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub theta: Vec<f64>,
    pub error_norm_end: f64,
    pub theta_relative_error_end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub t_end: f64,
    pub dt: f64,
    pub windows: Vec<WindowSummary>,
    pub lyapunov_audit: Vec<AuditRecord>,
    pub seconds: f64,
}

/// Contents of `summary.json` written by `reproduce-example`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSummary {
    pub decomposition_exact: bool,
    pub decomposition_mismatches: Vec<String>,
    pub decomposition_seconds: f64,
    pub matrices: ExampleMatrices,
    #[serde(rename = "H")]
    pub h: Rows,
    pub theorem1_applicable: bool,
    pub beta_1: f64,
    pub reported_beta_1: f64,
    #[serde(rename = "P")]
    pub p: Rows,
    pub p_frobenius: f64,
    pub p13: f64,
    pub p23: f64,
    pub p13_relative: f64,
    pub p23_relative: f64,
    pub reported_p13: f64,
    pub reported_p23: f64,
    pub theta_bar_design: f64,
    pub theta_bar_admissible: f64,
    pub certification_pass: bool,
    pub design_seconds: f64,
    pub simulation: Option<SimulationSummary>,
}

fn compare(name: &str, got: &Mat, want: &Mat, mismatches: &mut Vec<String>) {
    if got != want {
        mismatches.push(format!("{name}: decomposed {got:?} differs from reference {want:?}"));
    }
}

fn window_summaries(traj: &Trajectory) -> Vec<WindowSummary> {
    constant_theta_windows(traj)
        .into_iter()
        .map(|(a, b)| {
            let last = &traj.samples[b];
            WindowSummary {
                t_start: traj.samples[a].t,
                t_end: last.t,
                theta: last.theta.clone(),
                error_norm_end: last.ex().norm(),
                theta_relative_error_end: last
                    .etheta()
                    .iter()
                    .zip(&last.theta)
                    .map(|(e, t)| if *t == 0.0 { e.abs() } else { (e / t).abs() })
                    .collect(),
            }
        })
        .collect()
}

pub fn cmd_reproduce_example(inv: &Invocation, out: &mut Outcome) -> Result<(), CliError> {
    let dir = inv.out.clone().unwrap_or_else(|| PathBuf::from("tsobs-example"));
    make_dir(&dir)?;

    let t0 = Instant::now();
    let pam = example::param_affine_model();
    let model = snl_decompose(&pam).map_err(|e| CliError::invalid(e.to_string()))?;
    let reference = example::reference_matrices();
    let mut mismatches = Vec::new();
    compare("A1", model.a(0), &reference.a1, &mut mismatches);
    compare("A2", model.a(1), &reference.a2, &mut mismatches);
    compare("A_bar_11", model.a_bar(0, 0), &reference.a_bar, &mut mismatches);
    compare("A_bar_21", model.a_bar(1, 0), &reference.a_bar, &mut mismatches);
    compare("B1", model.b(0), &reference.b, &mut mismatches);
    compare("B2", model.b(1), &reference.b, &mut mismatches);
    compare("B_bar_11", model.b_bar(0, 0), &reference.b_bar, &mut mismatches);
    compare("B_bar_21", model.b_bar(1, 0), &reference.b_bar, &mut mismatches);
    compare("C", model.c(), &reference.c, &mut mismatches);
    let decomposition_seconds = t0.elapsed().as_secs_f64();
    let matrices = ExampleMatrices {
        a1: matrix_to_rows(model.a(0)),
        a2: matrix_to_rows(model.a(1)),
        a_bar_11: matrix_to_rows(model.a_bar(0, 0)),
        a_bar_21: matrix_to_rows(model.a_bar(1, 0)),
        b: matrix_to_rows(model.b(0)),
        b_bar_11: matrix_to_rows(model.b_bar(0, 0)),
        b_bar_21: matrix_to_rows(model.b_bar(1, 0)),
        c: matrix_to_rows(model.c()),
    };
    out.say(format!(
        "decomposition: {} ({:.3} ms)",
        if mismatches.is_empty() { "matches the reference matrices exactly" } else { "MISMATCH" },
        decomposition_seconds * 1e3
    ));

    let t1 = Instant::now();
    let spec = DesignSpec { rho: vec![1.0], ..example::design_spec() };
    let design = design_or_explain(&model, &spec)?;
    let design_seconds = t1.elapsed().as_secs_f64();
    describe_design(out, &design);
    write_json(out, dir.join("design.json"), &design.to_doc())?;
    let report = certify_design(&model, &design, inv.seed)?;
    write_json(out, dir.join("certification.json"), &report)?;
    report_certification(out, &report);

    let mut scenario = example::scenario(inv.t_end.unwrap_or(100.0), inv.dt.unwrap_or(1e-3));
    apply_overrides(&mut scenario, &Invocation { dt: None, t_end: None, ..inv.clone() }, inv.seed);
    let t2 = Instant::now();
    let sim = simulate_and_write(out, &dir, &model, &design, &scenario, &crate::config::Outputs::default());
    let sim_seconds = t2.elapsed().as_secs_f64();

    let p = &design.p;
    let pf = p.norm();
    let summary = ExampleSummary {
        decomposition_exact: mismatches.is_empty(),
        decomposition_mismatches: mismatches.clone(),
        decomposition_seconds,
        matrices,
        h: matrix_to_rows(&design.h),
        theorem1_applicable: check_theorem1(&model).theorem1_applicable,
        beta_1: design.beta[0],
        reported_beta_1: example::REPORTED_BETA,
        p: matrix_to_rows(p),
        p_frobenius: pf,
        p13: p[(0, 2)],
        p23: p[(1, 2)],
        p13_relative: p[(0, 2)].abs() / pf,
        p23_relative: p[(1, 2)].abs() / pf,
        reported_p13: example::REPORTED_P13,
        reported_p23: example::REPORTED_P23,
        theta_bar_design: example::DESIGN_THETA_BAR,
        theta_bar_admissible: theta_bar_admissible(&design, 1),
        certification_pass: report.overall_pass,
        design_seconds,
        simulation: sim.as_ref().ok().and_then(|t| t.as_ref()).map(|traj| SimulationSummary {
            t_end: scenario.t_end,
            dt: scenario.dt,
            windows: window_summaries(traj),
            lyapunov_audit: constant_theta_windows(traj)
                .into_iter()
                .filter_map(|w| lyapunov_decrease_audit(traj, &design, Some(w)).ok())
                .collect(),
            seconds: sim_seconds,
        }),
    };
    write_json(out, dir.join("summary.json"), &summary)?;
    out.say(format!(
        "summary: beta_1 = {:.3e} (reported {:.2e}), |P13|/|P|_F = {:.3e}, |P23|/|P|_F = {:.3e}, theorem1_applicable = {}",
        summary.beta_1, summary.reported_beta_1, summary.p13_relative, summary.p23_relative, summary.theorem1_applicable
    ));
    sim?;
    if !mismatches.is_empty() {
        return Err(CliError::new(ExitStatus::VerificationFailed, format!("decomposition mismatch: {}", mismatches.join("; "))));
    }
    Ok(())
}
