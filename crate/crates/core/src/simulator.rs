//! Joint simulation of the T-S plant and the adaptive observer
//!
//! ```text
//! dx/dt     = sum_i mu_i [(A_i + sum_j theta_j Abar_ij) x + (B_i + ...) u + F_i + ...]
//! dxhat/dt  = sum_i mu_i [(A_i + sum_j thetahat_j Abar_ij) xhat + ... + L_i e_y]
//! dthetahat_j/dt = (1/rho_j) sum_i mu_i (Abar_ij xhat + Bbar_ij u + Fbar_ij)^T P C^+ e_y
//! ```
//!
//! with `e_y = y - C xhat`. Both systems share the weights computed from the
//! measured premise `z(y, u)`. Integration is classical fixed-step RK4; the
//! input is evaluated at stage times while `theta` is held for the whole step.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, Vector};
use crate::lmi::ObserverDesign;
use crate::parallel::{self, Execution};
use crate::tsmodel::TsModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Zero,
    /// One value per input channel.
    Constant { value: Vec<f64> },
    /// `sum_k a_k sin(2 pi f_k t + phi_k)`, applied to every input channel.
    Multisine {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    /// `+-amplitude`, redrawn every `dwell` seconds from a seeded sequence
    /// (independent stream per channel).
    Prbs {
        amplitude: f64,
        dwell: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for InputSignal {
    fn default() -> Self {
        InputSignal::Zero
    }
}

impl InputSignal {
    pub fn validate(&self, n_u: usize) -> Result<(), String> {
        match self {
            InputSignal::Zero => Ok(()),
            InputSignal::Constant { value } => {
                if value.len() != n_u {
                    Err(format!("constant input has {} entries, expected n_u = {n_u}", value.len()))
                } else if value.iter().any(|v| !v.is_finite()) {
                    Err("constant input must be finite".into())
                } else {
                    Ok(())
                }
            }
            InputSignal::Multisine { amplitudes, frequencies, phases } => {
                if amplitudes.len() != frequencies.len() || amplitudes.len() != phases.len() {
                    return Err("multisine amplitudes, frequencies and phases must have equal length".into());
                }
                if amplitudes.iter().chain(frequencies).chain(phases).any(|v| !v.is_finite()) {
                    return Err("multisine coefficients must be finite".into());
                }
                Ok(())
            }
            InputSignal::Prbs { amplitude, dwell, .. } => {
                if !amplitude.is_finite() {
                    Err("prbs amplitude must be finite".into())
                } else if !(*dwell > 0.0 && dwell.is_finite()) {
                    Err("prbs dwell must be positive".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn value(&self, t: f64, n_u: usize) -> Vector {
        match self {
            InputSignal::Zero => Vector::zeros(n_u),
            InputSignal::Constant { value } => Vector::from_column_slice(value),
            InputSignal::Multisine { amplitudes, frequencies, phases } => {
                let s: f64 = amplitudes
                    .iter()
                    .zip(frequencies)
                    .zip(phases)
                    .map(|((a, f), p)| a * (2.0 * std::f64::consts::PI * f * t + p).sin())
                    .sum();
                Vector::from_element(n_u, s)
            }
            InputSignal::Prbs { amplitude, dwell, seed } => {
                let k = (t / dwell).floor().max(0.0) as u128;
                Vector::from_fn(n_u, |c, _| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(c as u64);
                    rng.set_word_pos(2 * k);
                    if rng.next_u64() & 1 == 1 {
                        *amplitude
                    } else {
                        -*amplitude
                    }
                })
            }
        }
    }
}

pub fn make_input(signal: &InputSignal, t: f64, n_u: usize) -> Vector {
    signal.value(t, n_u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSwitch {
    pub t: f64,
    pub theta: Vec<f64>,
}

fn default_stride() -> usize {
    1
}

fn default_window() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub t_end: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    /// Defaults to zeros.
    #[serde(default)]
    pub xhat0: Vec<f64>,
    /// Defaults to zeros.
    #[serde(default)]
    pub thetahat0: Vec<f64>,
    /// Piecewise-constant schedule; empty means `theta = 0`.
    #[serde(default)]
    pub theta_profile: Vec<ThetaSwitch>,
    #[serde(default, alias = "input_signal")]
    pub input: InputSignal,
    /// Empty means the design's gains.
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Sliding-window length for the excitation diagnostics, seconds.
    #[serde(default = "default_window")]
    pub excitation_window: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64, partial: Box<Trajectory> },
}

/// Scenario with defaults filled in and every length checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub steps: usize,
    pub dt: f64,
    pub x0: Vector,
    pub xhat0: Vector,
    pub thetahat0: Vector,
    pub schedule: Vec<(f64, Vector)>,
    pub input: InputSignal,
    pub rho: Vec<f64>,
    pub record_stride: usize,
    pub excitation_window: f64,
    pub warnings: Vec<String>,
}

impl SimScenario {
    pub fn resolve(&self, model: &TsModel, design: &ObserverDesign) -> Result<ResolvedScenario, SimError> {
        let d = model.dims();
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad("t_end must be at least dt".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if !(self.excitation_window > 0.0) {
            return bad("excitation_window must be positive".into());
        }
        let vec_or_zeros = |name: &str, v: &[f64], len: usize| -> Result<Vector, SimError> {
            if v.is_empty() {
                return Ok(Vector::zeros(len));
            }
            if v.len() != len {
                return Err(SimError::InvalidScenario(format!("{name} has {} entries, expected {len}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(SimError::InvalidScenario(format!("{name} must be finite")));
            }
            Ok(Vector::from_column_slice(v))
        };
        if self.x0.len() != d.n {
            return bad(format!("x0 has {} entries, expected {}", self.x0.len(), d.n));
        }
        let x0 = vec_or_zeros("x0", &self.x0, d.n)?;
        let xhat0 = vec_or_zeros("xhat0", &self.xhat0, d.n)?;
        let thetahat0 = vec_or_zeros("thetahat0", &self.thetahat0, d.n_theta)?;
        self.input.validate(d.n_u).map_err(SimError::InvalidScenario)?;
        let rho = if self.rho.is_empty() { design.rho.clone() } else { self.rho.clone() };
        if rho.len() != d.n_theta || rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad(format!("rho must hold {} positive entries", d.n_theta));
        }
        let steps = (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize;
        let t_last = steps as f64 * self.dt;
        let mut warnings = Vec::new();
        let mut schedule = Vec::new();
        for (k, sw) in self.theta_profile.iter().enumerate() {
            if k == 0 && sw.t != 0.0 {
                return bad("theta_profile must start at t = 0".into());
            }
            if k > 0 && !(sw.t > self.theta_profile[k - 1].t) {
                return bad("theta_profile times must be strictly increasing".into());
            }
            let theta = vec_or_zeros("theta_profile.theta", &sw.theta, d.n_theta)?;
            if sw.theta.len() != d.n_theta {
                return bad(format!("theta_profile[{k}].theta must have {} entries", d.n_theta));
            }
            if sw.t > t_last {
                warnings.push(format!("theta_profile entry at t = {} lies beyond t_end and is ignored", sw.t));
                continue;
            }
            schedule.push((sw.t, theta));
        }
        if schedule.is_empty() {
            schedule.push((0.0, Vector::zeros(d.n_theta)));
        }
        Ok(ResolvedScenario {
            steps,
            dt: self.dt,
            x0,
            xhat0,
            thetahat0,
            schedule,
            input: self.input.clone(),
            rho,
            record_stride: self.record_stride,
            excitation_window: self.excitation_window,
            warnings,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub x: Vector,
    pub xhat: Vector,
    pub thetahat: Vector,
}

/// Quantities available at one evaluation of the coupled dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mu: Vector,
    pub saturated: bool,
    pub y: Vector,
    pub yhat: Vector,
    pub ey: Vector,
}

/// Coupled plant/observer vector field for one model and design.
pub struct Dynamics<'a> {
    model: &'a TsModel,
    design: &'a ObserverDesign,
    rho: Vec<f64>,
    p_cpinv: Mat,
}

impl<'a> Dynamics<'a> {
    pub fn new(model: &'a TsModel, design: &'a ObserverDesign, rho: Vec<f64>) -> Self {
        let p_cpinv = &design.p * &design.c_pinv;
        Dynamics { model, design, rho, p_cpinv }
    }

    pub fn evaluate(&self, x: &Vector, xhat: &Vector, u: &Vector) -> Evaluation {
        let c = self.model.c();
        let y = c * x;
        let yhat = c * xhat;
        let pv = self.model.premises().evaluate(&y, u);
        let mu = self.model.eval_weights(&pv.z).expect("premise length fixed by the model");
        let ey = &y - &yhat;
        Evaluation { mu, saturated: pv.saturated, y, yhat, ey }
    }

    /// `sum_i mu_i (Abar_ij xhat + Bbar_ij u + Fbar_ij)` for parameter `j`.
    pub fn regressor(&self, mu: &Vector, xhat: &Vector, u: &Vector, j: usize) -> Vector {
        let m = self.model;
        let mut g = Vector::zeros(m.dims().n);
        for i in 0..m.dims().r {
            if mu[i] == 0.0 {
                continue;
            }
            let mut gi = m.a_bar(i, j) * xhat + m.f_bar(i, j).column(0);
            if m.dims().n_u > 0 {
                gi += m.b_bar(i, j) * u;
            }
            g += gi * mu[i];
        }
        g
    }

    /// Row vector `phi_j = g_j^T P C^+`.
    pub fn phi(&self, mu: &Vector, xhat: &Vector, u: &Vector, j: usize) -> Vector {
        self.p_cpinv.tr_mul(&self.regressor(mu, xhat, u, j))
    }

    pub fn derivative(&self, s: &ObserverState, theta: &Vector, u: &Vector) -> ObserverState {
        let m = self.model;
        let ev = self.evaluate(&s.x, &s.xhat, u);
        let plant = m.blend_unchecked(&ev.mu, theta);
        let obs = m.blend_unchecked(&ev.mu, &s.thetahat);
        let mut dx = &plant.a * &s.x + plant.f.column(0);
        let mut dxhat = &obs.a * &s.xhat + obs.f.column(0);
        if m.dims().n_u > 0 {
            dx += &plant.b * u;
            dxhat += &obs.b * u;
        }
        for i in 0..m.dims().r {
            if ev.mu[i] != 0.0 {
                dxhat += (&self.design.l[i] * &ev.ey) * ev.mu[i];
            }
        }
        let dtheta = Vector::from_fn(m.dims().n_theta, |j, _| {
            self.phi(&ev.mu, &s.xhat, u, j).dot(&ev.ey) / self.rho[j]
        });
        ObserverState { x: dx, xhat: dxhat, thetahat: dtheta }
    }

    /// One RK4 step from `t` with `theta` held constant and the input sampled
    /// at the stage times.
    pub fn step(&self, s: &ObserverState, theta: &Vector, t: f64, dt: f64, input: impl Fn(f64) -> Vector) -> ObserverState {
        let add = |a: &ObserverState, k: &ObserverState, h: f64| ObserverState {
            x: &a.x + &k.x * h,
            xhat: &a.xhat + &k.xhat * h,
            thetahat: &a.thetahat + &k.thetahat * h,
        };
        let u0 = input(t);
        let um = input(t + 0.5 * dt);
        let u1 = input(t + dt);
        let k1 = self.derivative(s, theta, &u0);
        let k2 = self.derivative(&add(s, &k1, 0.5 * dt), theta, &um);
        let k3 = self.derivative(&add(s, &k2, 0.5 * dt), theta, &um);
        let k4 = self.derivative(&add(s, &k3, dt), theta, &u1);
        let w = dt / 6.0;
        ObserverState {
            x: &s.x + (&k1.x + &k2.x * 2.0 + &k3.x * 2.0 + &k4.x) * w,
            xhat: &s.xhat + (&k1.xhat + &k2.xhat * 2.0 + &k3.xhat * 2.0 + &k4.xhat) * w,
            thetahat: &s.thetahat + (&k1.thetahat + &k2.thetahat * 2.0 + &k3.thetahat * 2.0 + &k4.thetahat) * w,
        }
    }

    /// `V = e_x^T P e_x + sum_j rho_j e_theta_j^2`.
    pub fn lyapunov(&self, s: &ObserverState, theta: &Vector) -> f64 {
        let ex = &s.x - &s.xhat;
        let et = theta - &s.thetahat;
        ex.dot(&(&self.design.p * &ex)) + et.iter().zip(&self.rho).map(|(e, r)| r * e * e).sum::<f64>()
    }
}

/// Single step with a constant input over the step.
pub fn step(
    model: &TsModel,
    design: &ObserverDesign,
    state: &ObserverState,
    theta: &Vector,
    u: &Vector,
    dt: f64,
) -> ObserverState {
    Dynamics::new(model, design, design.rho.clone()).step(state, theta, 0.0, dt, |_| u.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub theta: Vec<f64>,
    pub thetahat: Vec<f64>,
    pub mu: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub yhat: Vec<f64>,
    pub ey: Vec<f64>,
    #[serde(rename = "V")]
    pub v: f64,
    pub sat: bool,
}

impl Sample {
    pub fn ex(&self) -> Vector {
        Vector::from_iterator(self.x.len(), self.x.iter().zip(&self.xhat).map(|(a, b)| a - b))
    }

    pub fn etheta(&self) -> Vector {
        Vector::from_iterator(self.theta.len(), self.theta.iter().zip(&self.thetahat).map(|(a, b)| a - b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_theta: usize,
    pub r: usize,
    /// Integration step and recording stride that produced the samples.
    pub dt: f64,
    pub record_stride: usize,
    pub rho: Vec<f64>,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    fn empty(model: &TsModel, dt: f64, stride: usize, rho: Vec<f64>) -> Self {
        let d = model.dims();
        Trajectory {
            n: d.n,
            n_u: d.n_u,
            n_y: d.n_y,
            n_theta: d.n_theta,
            r: d.r,
            dt,
            record_stride: stride,
            rho,
            samples: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.n).map(|k| format!("x{k}")));
        h.extend((1..=self.n).map(|k| format!("xhat{k}")));
        h.extend((1..=self.n_theta).map(|k| format!("theta_{k}")));
        h.extend((1..=self.n_theta).map(|k| format!("thetahat_{k}")));
        h.extend((1..=self.r).map(|k| format!("mu_{k}")));
        h.extend((1..=self.n_u).map(|k| format!("u_{k}")));
        h.extend((1..=self.n_y).map(|k| format!("ey_{k}")));
        h.push("V".into());
        h.push("sat".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.csv_header())?;
        for s in &self.samples {
            let mut row: Vec<String> = vec![s.t.to_string()];
            for part in [&s.x, &s.xhat, &s.theta, &s.thetahat, &s.mu, &s.u, &s.ey] {
                row.extend(part.iter().map(|v| v.to_string()));
            }
            row.push(s.v.to_string());
            row.push(if s.sat { "1" } else { "0" }.into());
            wr.write_record(row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Trajectory::write_csv`]. The output matrix
    /// restores `y = C x` and `yhat = C xhat`, which the file does not store.
    pub fn read_csv<R: Read>(r: R, model: &TsModel, dt: f64, record_stride: usize, rho: Vec<f64>) -> Result<Self, String> {
        let mut traj = Trajectory::empty(model, dt, record_stride, rho);
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        if header != traj.csv_header() {
            return Err("trajectory header does not match the model dimensions".into());
        }
        let c = model.c();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| format!("row {line}: {e}")))
                .collect::<Result<_, _>>()?;
            let mut it = vals.into_iter();
            let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
            let t = take(1)[0];
            let x = take(traj.n);
            let xhat = take(traj.n);
            let theta = take(traj.n_theta);
            let thetahat = take(traj.n_theta);
            let mu = take(traj.r);
            let u = take(traj.n_u);
            let ey = take(traj.n_y);
            let v = take(1)[0];
            let sat = take(1)[0] != 0.0;
            let y = (c * Vector::from_column_slice(&x)).as_slice().to_vec();
            let yhat = (c * Vector::from_column_slice(&xhat)).as_slice().to_vec();
            traj.samples.push(Sample { t, x, xhat, theta, thetahat, mu, u, y, yhat, ey, v, sat });
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub min: f64,
    pub max: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorStats {
    /// Time average of `|phi_j|^2`.
    pub mean_square: f64,
    /// Smallest `int |phi_j|^2 dt` over sliding windows of `window` seconds.
    pub min_window_energy: f64,
    pub window: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationDiagnostics {
    pub weights: Vec<WeightStats>,
    pub regressors: Vec<RegressorStats>,
    pub saturated_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trajectory: Trajectory,
    pub diagnostics: ExcitationDiagnostics,
    pub warnings: Vec<String>,
}

const DIVERGENCE_LIMIT: f64 = 1e100;

pub fn run(model: &TsModel, design: &ObserverDesign, scenario: &SimScenario) -> Result<SimOutput, SimError> {
    let sc = scenario.resolve(model, design)?;
    let d = *model.dims();
    let dyn_ = Dynamics::new(model, design, sc.rho.clone());
    let mut traj = Trajectory::empty(model, sc.dt, sc.record_stride, sc.rho.clone());
    let mut state = ObserverState { x: sc.x0.clone(), xhat: sc.xhat0.clone(), thetahat: sc.thetahat0.clone() };
    let input = |t: f64| sc.input.value(t, d.n_u);
    let theta_at = |t: f64| -> &Vector {
        let tol = 1e-9 * sc.dt;
        let mut cur = &sc.schedule[0].1;
        for (ts, th) in &sc.schedule {
            if t + tol >= *ts {
                cur = th;
            }
        }
        cur
    };
    let record = |traj: &mut Trajectory, s: &ObserverState, t: f64| {
        let theta = theta_at(t);
        let u = input(t);
        let ev = dyn_.evaluate(&s.x, &s.xhat, &u);
        traj.samples.push(Sample {
            t,
            x: s.x.as_slice().to_vec(),
            xhat: s.xhat.as_slice().to_vec(),
            theta: theta.as_slice().to_vec(),
            thetahat: s.thetahat.as_slice().to_vec(),
            mu: ev.mu.as_slice().to_vec(),
            u: u.as_slice().to_vec(),
            y: ev.y.as_slice().to_vec(),
            yhat: ev.yhat.as_slice().to_vec(),
            ey: ev.ey.as_slice().to_vec(),
            v: dyn_.lyapunov(s, theta),
            sat: ev.saturated,
        });
    };
    record(&mut traj, &state, 0.0);
    for k in 0..sc.steps {
        let t = k as f64 * sc.dt;
        let next = dyn_.step(&state, theta_at(t), t, sc.dt, input);
        let finite = next.x.iter().chain(next.xhat.iter()).chain(next.thetahat.iter()).all(|v| v.is_finite() && v.abs() < DIVERGENCE_LIMIT);
        if !finite {
            log::warn!("simulation diverged at t = {}", t + sc.dt);
            if traj.samples.last().map(|s| s.t) != Some(t) {
                record(&mut traj, &state, t);
            }
            return Err(SimError::Diverged { t: t + sc.dt, partial: Box::new(traj) });
        }
        state = next;
        if (k + 1) % sc.record_stride == 0 {
            record(&mut traj, &state, (k + 1) as f64 * sc.dt);
        }
    }
    let diagnostics = excitation_diagnostics(model, design, &traj, sc.excitation_window);
    let mut warnings = sc.warnings;
    if diagnostics.saturated_samples > 0 {
        warnings.push(format!(
            "premise left its sector at {} of {} recorded samples; weights were clamped",
            diagnostics.saturated_samples,
            traj.samples.len()
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(SimOutput { trajectory: traj, diagnostics, warnings })
}

/// Independent runs over the same model and design.
pub fn run_batch(
    model: &TsModel,
    design: &ObserverDesign,
    scenarios: &[SimScenario],
    exec: Execution,
) -> Vec<Result<SimOutput, SimError>> {
    parallel::map(exec, scenarios, |sc| run(model, design, sc))
}

/// Weight statistics and regressor energies computed from recorded samples.
pub fn excitation_diagnostics(model: &TsModel, design: &ObserverDesign, traj: &Trajectory, window: f64) -> ExcitationDiagnostics {
    let samples = &traj.samples;
    let count = samples.len().max(1) as f64;
    let weights = (0..traj.r)
        .map(|i| {
            let vals: Vec<f64> = samples.iter().map(|s| s.mu[i]).collect();
            let mean = vals.iter().sum::<f64>() / count;
            WeightStats {
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                variance: (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count).max(0.0),
            }
        })
        .collect();
    let dyn_ = Dynamics::new(model, design, traj.rho.clone());
    let h = traj.dt * traj.record_stride as f64;
    let per_window = ((window / h).round() as usize).max(1);
    let regressors = (0..traj.n_theta)
        .map(|j| {
            let sq: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let mu = Vector::from_column_slice(&s.mu);
                    let xhat = Vector::from_column_slice(&s.xhat);
                    let u = Vector::from_column_slice(&s.u);
                    dyn_.phi(&mu, &xhat, &u, j).norm_squared()
                })
                .collect();
            let mut prefix = vec![0.0; sq.len() + 1];
            for (k, v) in sq.iter().enumerate() {
                prefix[k + 1] = prefix[k] + v * h;
            }
            let len = per_window.min(sq.len());
            let windows = sq.len() + 1 - len;
            let min_window_energy = (0..windows)
                .map(|s| prefix[s + len] - prefix[s])
                .fold(f64::INFINITY, f64::min);
            RegressorStats {
                mean_square: sq.iter().sum::<f64>() / count,
                min_window_energy,
                window: len as f64 * h,
                windows,
            }
        })
        .collect();
    ExcitationDiagnostics {
        weights,
        regressors,
        saturated_samples: samples.iter().filter(|s| s.sat).count(),
    }
}
