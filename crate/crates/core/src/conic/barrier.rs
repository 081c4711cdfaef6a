//! Two-phase logarithmic-barrier interior-point method for small dense conic
//! programs.
//!
//! Phase I minimizes a uniform shift `s` added to every cone's identity
//! element until the shifted constraints admit `s < 0`, i.e. the original
//! cones are strictly feasible. If the central path proves `s* > 0` (or the
//! phase converges with `s >= 0`) the program is reported infeasible with that
//! bound as certificate. Phase II follows the central path of
//! `t c^T x + phi(x)` with increasing `t` until the duality-gap bound
//! `nu / t` drops under the tolerance.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{packed_index, ConeKind, ConicProgram};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Absolute bound on the duality gap at termination.
    pub gap_tol: f64,
    /// Barrier weight multiplier between centering steps.
    pub growth: f64,
    /// Centering stops when half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    /// Looser decrement tolerance for the intermediate phase II centerings;
    /// the last one is tightened to `newton_tol`.
    pub inner_newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gap_tol: 1e-9,
            growth: 10.0,
            newton_tol: 1e-10,
            inner_newton_tol: 1e-4,
            max_newton: 200,
            max_outer: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Upper bound on `objective - optimum`.
    pub gap_bound: f64,
    /// Uniform shift reached in phase I (negative: strictly feasible start).
    pub phase1_shift: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error(
        "infeasible: the smallest uniform cone shift making the constraints feasible is at least \
         {shift_lower_bound:e} (phase I reached {shift:e})"
    )]
    Infeasible { shift_lower_bound: f64, shift: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

enum Block {
    Linear {
        g: Vector,
        gm: Mat,
    },
    SecondOrder {
        g: Vector,
        gm: Mat,
    },
    Psd {
        constant: Mat,
        /// Variables that enter the cone and their symmetric coefficient matrix.
        terms: Vec<(usize, Mat)>,
    },
}

struct Dense {
    blocks: Vec<Block>,
    c: Vector,
    nu: f64,
    nv: usize,
}

struct Eval {
    value: f64,
    grad: Vector,
    hess: Mat,
}

impl Dense {
    /// Dense form of `program`; with `shift` an extra trailing variable is
    /// added to every cone along its identity element.
    fn build(program: &ConicProgram, shift: bool) -> Dense {
        let nv = program.n_vars + usize::from(shift);
        let mut blocks = Vec::with_capacity(program.cones.len());
        for cone in &program.cones {
            let rows = cone.rows();
            let mut g = Vector::zeros(rows);
            for &(r, v) in &cone.constant {
                g[r] += v;
            }
            let mut gm = Mat::zeros(rows, nv);
            for &(r, k, v) in &cone.coefficients {
                gm[(r, k)] += v;
            }
            match cone.kind {
                ConeKind::NonNeg => {
                    if shift {
                        gm.column_mut(nv - 1).fill(1.0);
                    }
                    blocks.push(Block::Linear { g, gm });
                }
                ConeKind::SecondOrder => {
                    if shift && rows > 0 {
                        gm[(0, nv - 1)] = 1.0;
                    }
                    blocks.push(Block::SecondOrder { g, gm });
                }
                ConeKind::Psd => {
                    let dim = cone.dim;
                    if shift {
                        for i in 0..dim {
                            gm[(packed_index(i, i), nv - 1)] = 1.0;
                        }
                    }
                    let unpack = |col: &dyn Fn(usize) -> f64| {
                        Mat::from_fn(dim, dim, |i, j| col(packed_index(i, j)))
                    };
                    let constant = unpack(&|r| g[r]);
                    let terms = (0..nv)
                        .filter(|&k| gm.column(k).iter().any(|v| *v != 0.0))
                        .map(|k| (k, unpack(&|r| gm[(r, k)])))
                        .collect();
                    blocks.push(Block::Psd { constant, terms });
                }
            }
        }
        let mut c = Vector::zeros(nv);
        if shift {
            c[nv - 1] = 1.0;
        } else {
            for &(k, v) in &program.objective {
                c[k] += v;
            }
        }
        Dense {
            blocks,
            c,
            nu: program.barrier_parameter(),
            nv,
        }
    }

    /// Smallest "eigenvalue" of every cone slack at `x`.
    fn min_margin(&self, x: &Vector) -> f64 {
        let mut worst = f64::INFINITY;
        for b in &self.blocks {
            let m = match b {
                Block::Linear { g, gm } => (g + gm * x).min(),
                Block::SecondOrder { g, gm } => {
                    let s = g + gm * x;
                    if s.is_empty() {
                        continue;
                    }
                    s[0] - s.rows(1, s.len() - 1).norm()
                }
                Block::Psd { constant, terms, .. } => {
                    let s = psd_slack(constant, terms, x);
                    s.symmetric_eigenvalues().min()
                }
            };
            worst = worst.min(m);
        }
        worst
    }

    /// Barrier value only; `None` outside the cone interiors.
    fn barrier_value(&self, x: &Vector) -> Option<f64> {
        let mut total = 0.0;
        for b in &self.blocks {
            total += match b {
                Block::Linear { g, gm } => {
                    let s = g + gm * x;
                    if s.iter().any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    -s.iter().map(|v| v.ln()).sum::<f64>()
                }
                Block::SecondOrder { g, gm } => {
                    let s = g + gm * x;
                    let d = soc_det(&s)?;
                    -d.ln()
                }
                Block::Psd { constant, terms, .. } => {
                    let s = psd_slack(constant, terms, x);
                    let chol = Cholesky::new(s)?;
                    -2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
                }
            };
        }
        total.is_finite().then_some(total)
    }

    fn evaluate(&self, x: &Vector, t: f64) -> Option<Eval> {
        let nv = self.nv;
        let mut value = t * self.c.dot(x);
        let mut grad = &self.c * t;
        let mut hess = Mat::zeros(nv, nv);
        for b in &self.blocks {
            match b {
                Block::Linear { g, gm } => {
                    let s = g + gm * x;
                    if s.iter().any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    value -= s.iter().map(|v| v.ln()).sum::<f64>();
                    let inv = s.map(|v| 1.0 / v);
                    grad -= gm.transpose() * &inv;
                    let scaled = Mat::from_fn(gm.nrows(), nv, |r, k| gm[(r, k)] * inv[r]);
                    hess += scaled.transpose() * &scaled;
                }
                Block::SecondOrder { g, gm } => {
                    let s = g + gm * x;
                    let d = soc_det(&s)?;
                    value -= d.ln();
                    // phi = -ln(s^T J s), J = diag(1, -1, ..., -1).
                    let js = Vector::from_fn(s.len(), |r, _| if r == 0 { s[0] } else { -s[r] });
                    let grad_s = &js * (-2.0 / d);
                    let mut hess_s = &js * js.transpose() * (4.0 / (d * d));
                    hess_s[(0, 0)] -= 2.0 / d;
                    for r in 1..s.len() {
                        hess_s[(r, r)] += 2.0 / d;
                    }
                    grad += gm.transpose() * grad_s;
                    hess += gm.transpose() * hess_s * gm;
                }
                Block::Psd { constant, terms, .. } => {
                    let s = psd_slack(constant, terms, x);
                    let chol = Cholesky::new(s)?;
                    value -= 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                    let inv = chol.inverse();
                    let w: Vec<Mat> = terms.iter().map(|(_, a)| &inv * a).collect();
                    for (p, (kp, _)) in terms.iter().enumerate() {
                        grad[*kp] -= w[p].trace();
                        for (q, (kq, _)) in terms.iter().enumerate().take(p + 1) {
                            // tr(W_p W_q)
                            let h = w[p].component_mul(&w[q].transpose()).sum();
                            hess[(*kp, *kq)] += h;
                            if p != q {
                                hess[(*kq, *kp)] += h;
                            }
                        }
                    }
                }
            }
        }
        if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Eval { value, grad, hess })
    }
}

fn psd_slack(constant: &Mat, terms: &[(usize, Mat)], x: &Vector) -> Mat {
    let mut s = constant.clone();
    for (k, a) in terms {
        if x[*k] != 0.0 {
            s += a * x[*k];
        }
    }
    s
}

fn soc_det(s: &Vector) -> Option<f64> {
    if s.is_empty() || !(s[0] > 0.0) {
        return None;
    }
    let tail = s.rows(1, s.len() - 1).norm_squared();
    let d = s[0] * s[0] - tail;
    (d > 0.0 && d.is_finite()).then_some(d)
}

/// Solves `H d = -g` with Jacobi equilibration and escalating diagonal
/// regularization when the scaled Hessian is not numerically positive definite.
fn newton_direction(hess: &Mat, grad: &Vector) -> Option<Vector> {
    let n = grad.len();
    let scale = Vector::from_fn(n, |i, _| {
        let d = hess[(i, i)];
        if d > 0.0 && d.is_finite() {
            1.0 / d.sqrt()
        } else {
            1.0
        }
    });
    let mut scaled = Mat::from_fn(n, n, |i, j| hess[(i, j)] * scale[i] * scale[j]);
    let rhs = Vector::from_fn(n, |i, _| -grad[i] * scale[i]);
    let mut reg = 0.0;
    for _ in 0..12 {
        if let Some(ch) = Cholesky::new(scaled.clone()) {
            let y = ch.solve(&rhs);
            let dir = y.component_mul(&scale);
            if dir.iter().all(|v| v.is_finite()) {
                return Some(dir);
            }
        }
        let bump = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
        for i in 0..n {
            scaled[(i, i)] += bump - reg;
        }
        reg = bump;
    }
    None
}

enum Centering {
    Converged,
    Stalled,
    IterationLimit,
}

struct Centered {
    outcome: Centering,
    steps: usize,
}

/// Damped Newton minimization of `t c^T x + phi(x)`. `stop_early` is checked
/// after each step and ends centering when it returns true.
fn center(
    prob: &Dense,
    x: &mut Vector,
    t: f64,
    settings: &SolverSettings,
    stop_early: &dyn Fn(&Vector) -> bool,
) -> Result<Centered, SolverError> {
    for step in 0..settings.max_newton {
        let ev = prob
            .evaluate(x, t)
            .ok_or_else(|| SolverError::Numerical("iterate left the cone interior".into()))?;
        let dir = newton_direction(&ev.hess, &ev.grad)
            .ok_or_else(|| SolverError::Numerical("Newton system could not be factored".into()))?;
        let decrement = -ev.grad.dot(&dir);
        if !decrement.is_finite() {
            return Err(SolverError::Numerical("non-finite Newton decrement".into()));
        }
        if decrement / 2.0 <= settings.newton_tol {
            return Ok(Centered { outcome: Centering::Converged, steps: step });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial = &*x + &dir * alpha;
            if let Some(phi) = prob.barrier_value(&trial) {
                let f = t * prob.c.dot(&trial) + phi;
                let slack = 1e-14 * ev.value.abs().max(1.0);
                if f <= ev.value - 0.25 * alpha * decrement + slack {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(next) => *x = next,
            None => return Ok(Centered { outcome: Centering::Stalled, steps: step }),
        }
        if stop_early(x) {
            return Ok(Centered { outcome: Centering::Converged, steps: step + 1 });
        }
    }
    Ok(Centered {
        outcome: Centering::IterationLimit,
        steps: settings.max_newton,
    })
}

/// Solves `program`, returning an interior point whose objective is within
/// `gap_bound` of the optimum.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverOutput, SolverError> {
    let n = program.n_vars;
    let mut newton_steps = 0;
    let mut outer_iterations = 0;

    // Phase I.
    let phase1 = Dense::build(program, true);
    let mut z = Vector::zeros(n + 1);
    let margin0 = phase1.min_margin(&z);
    z[n] = (-margin0).max(0.0) + 1.0;
    let mut t = 1.0;
    let shifted = |v: &Vector| v[n] < 0.0;
    if !(z[n] > 0.0 && shifted(&z)) {
        loop {
            if outer_iterations >= settings.max_outer {
                return Err(SolverError::Numerical(
                    "phase I did not terminate within the outer iteration limit".into(),
                ));
            }
            outer_iterations += 1;
            let res = center(&phase1, &mut z, t, settings, &|v| v[n] < -1.0)?;
            newton_steps += res.steps;
            if shifted(&z) {
                break;
            }
            let gap = phase1.nu / t;
            let lower = z[n] - gap;
            if lower > 0.0 {
                return Err(SolverError::Infeasible {
                    shift_lower_bound: lower,
                    shift: z[n],
                });
            }
            if gap <= settings.gap_tol || matches!(res.outcome, Centering::Stalled) && gap <= 1e-6 {
                return Err(SolverError::Infeasible {
                    shift_lower_bound: lower,
                    shift: z[n],
                });
            }
            t *= settings.growth;
        }
    }
    let phase1_shift = z[n];
    let mut x = z.rows(0, n).into_owned();

    // Phase II.
    let phase2 = Dense::build(program, false);
    if phase2.barrier_value(&x).is_none() {
        return Err(SolverError::Numerical("phase I point is not strictly feasible".into()));
    }
    let has_objective = phase2.c.iter().any(|v| *v != 0.0);
    let loose = SolverSettings { newton_tol: settings.inner_newton_tol.max(settings.newton_tol), ..settings.clone() };
    let mut t = 1.0;
    loop {
        if outer_iterations >= settings.max_outer {
            return Err(SolverError::Numerical(
                "phase II did not reach the gap tolerance within the outer iteration limit".into(),
            ));
        }
        outer_iterations += 1;
        let gap = if has_objective { phase2.nu / t } else { 0.0 };
        let last = !has_objective || gap <= settings.gap_tol;
        let mut res = center(&phase2, &mut x, t, &loose, &|_| false)?;
        newton_steps += res.steps;
        if last && loose.newton_tol > settings.newton_tol {
            res = center(&phase2, &mut x, t, settings, &|_| false)?;
            newton_steps += res.steps;
        }
        if last {
            if matches!(res.outcome, Centering::IterationLimit) {
                log::warn!("final centering hit the Newton iteration limit");
            }
            let xs: Vec<f64> = x.iter().copied().collect();
            return Ok(SolverOutput {
                objective: program.objective_value(&xs),
                x: xs,
                gap_bound: gap,
                phase1_shift,
                outer_iterations,
                newton_steps,
            });
        }
        t *= settings.growth;
    }
}
