//! Observer synthesis by linear matrix inequalities.
//!
//! Decision variables are the Lyapunov matrix `P`, the decay certificate `Q`,
//! the products `M_i = P L_i`, and (when maximized) `gamma`. The conditions
//! assembled by [`build_constraints`] are
//!
//! ```text
//! P >= eps I,  Q >= eps I
//! P A_i + A_i^T P - M_i C - C^T M_i^T + Q <= -eps I        for every submodel i
//! [ Q - gamma I   P ]
//! [ P             I ] >= 0                                 (only when n_theta > 0)
//! ```
//!
//! with `gamma = (n_theta * a_bar * theta_bar)^2`. The parameter update law
//! needs `Abar_ij^T P`, `Bbar_ij^T P` and `Fbar_ij^T P` to vanish on the kernel
//! of `C`; the `min_beta` objective minimizes the sum of the Frobenius norms of
//! those products times the annihilator `H = I - C^+ C`, each through a
//! second-order-cone epigraph.
//!
//! The Schur block alone does not imply the eigenvalue form
//! `n_theta a_bar theta_bar <= lambda_min(Q) / (2 lambda_max(P))` unless `P` is
//! a multiple of the identity, so by default both are imposed (see
//! [`DesignSpec::enforce_eigenvalue_bound`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{
    self, AffineExpr, ConeKind, ConeRole, ConicProgram, SolverError, SolverSettings, SymExpr,
    VarBlock, VarShape,
};
use crate::linalg::{
    lambda_max, lambda_min, matrix_to_rows, numerical_rank, pseudo_inverse, rows_to_matrix,
    spectral_norm, symmetric_part, Mat, PseudoInverse, Vector, RANK_TOLERANCE,
};
use crate::parallel::{self, Execution};
use crate::tsmodel::TsModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MinBeta,
    MaxGamma,
    #[serde(alias = "feasibility")]
    FeasibilityOnly,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_beta" => Ok(Objective::MinBeta),
            "max_gamma" => Ok(Objective::MaxGamma),
            "feasibility" | "feasibility_only" => Ok(Objective::FeasibilityOnly),
            other => Err(format!(
                "unknown objective `{other}` (expected min_beta, max_gamma or feasibility)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    /// Known bound on `|theta_j|`; required unless maximizing `gamma` or the
    /// model has no unknown parameters.
    pub theta_bar: Option<f64>,
    pub objective: Objective,
    /// Margin `eps` realizing the strict inequalities.
    pub pd_margin: f64,
    /// Adaptation gains; empty means 1 for every parameter.
    pub rho: Vec<f64>,
    /// Box radius keeping the decision variables bounded (`P, Q <= R I`,
    /// `|M_i|_F <= R`).
    pub variable_bound: f64,
    /// Also impose the eigenvalue form of the parameter bound,
    /// `lambda_min(Q) >= 2 sqrt(gamma) lambda_max(P)`, through an auxiliary
    /// scalar `p` with `P <= p I` and `Q >= 2 sqrt(gamma) p I`.
    pub enforce_eigenvalue_bound: bool,
    pub solver: SolverSettings,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            theta_bar: None,
            objective: Objective::MinBeta,
            pd_margin: 1e-6,
            rho: Vec::new(),
            variable_bound: 1e2,
            enforce_eigenvalue_bound: true,
            solver: SolverSettings::default(),
        }
    }
}

impl DesignSpec {
    /// Validates the spec against a parameter count and returns the effective
    /// adaptation gains.
    pub fn resolved_rho(&self, n_theta: usize) -> Result<Vec<f64>, DesignError> {
        if !(self.pd_margin > 0.0 && self.pd_margin.is_finite()) {
            return Err(DesignError::InvalidSpec("pd_margin must be positive".into()));
        }
        if !(self.variable_bound > self.pd_margin && self.variable_bound.is_finite()) {
            return Err(DesignError::InvalidSpec(
                "variable_bound must be finite and larger than pd_margin".into(),
            ));
        }
        if let Some(tb) = self.theta_bar {
            if !(tb > 0.0 && tb.is_finite()) {
                return Err(DesignError::InvalidSpec("theta_bar must be positive".into()));
            }
        }
        if self.theta_bar.is_none() && n_theta > 0 && self.objective != Objective::MaxGamma {
            return Err(DesignError::InvalidSpec(
                "theta_bar is required unless the objective is max_gamma".into(),
            ));
        }
        let rho = if self.rho.is_empty() {
            vec![1.0; n_theta]
        } else {
            self.rho.clone()
        };
        if rho.len() != n_theta {
            return Err(DesignError::InvalidSpec(format!(
                "rho has {} entries but the model has {n_theta} parameters",
                rho.len()
            )));
        }
        if rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(DesignError::InvalidSpec("every rho_j must be positive".into()));
        }
        Ok(rho)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("invalid design specification: {0}")]
    InvalidSpec(String),
    #[error("infeasible: no observer of this form exists for the requested bound ({summary})")]
    Infeasible { summary: String, shift_lower_bound: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmissionKind {
    #[serde(rename = "A_bar")]
    A,
    #[serde(rename = "B_bar")]
    B,
    #[serde(rename = "F_bar")]
    F,
}

impl TransmissionKind {
    pub const ALL: [TransmissionKind; 3] = [TransmissionKind::A, TransmissionKind::B, TransmissionKind::F];

    pub fn label(self) -> &'static str {
        match self {
            TransmissionKind::A => "A_bar",
            TransmissionKind::B => "B_bar",
            TransmissionKind::F => "F_bar",
        }
    }

    pub fn matrix(self, model: &TsModel, i: usize, j: usize) -> &Mat {
        match self {
            TransmissionKind::A => model.a_bar(i, j),
            TransmissionKind::B => model.b_bar(i, j),
            TransmissionKind::F => model.f_bar(i, j),
        }
    }
}

/// One term `|N^T P H|_F` of a residual `beta_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaContribution {
    pub param: usize,
    pub submodel: usize,
    pub matrix: TransmissionKind,
    pub norm: f64,
}

/// Every `|N^T P H|_F` for `N` in `{Abar_ij, Bbar_ij, Fbar_ij}`.
pub fn beta_contributions(model: &TsModel, p: &Mat, h: &Mat) -> Vec<BetaContribution> {
    let d = model.dims();
    let ph = p * h;
    let mut out = Vec::with_capacity(d.n_theta * d.r * 3);
    for j in 0..d.n_theta {
        for i in 0..d.r {
            for kind in TransmissionKind::ALL {
                let n = kind.matrix(model, i, j);
                let norm = if n.is_empty() { 0.0 } else { (n.transpose() * &ph).norm() };
                out.push(BetaContribution { param: j, submodel: i, matrix: kind, norm });
            }
        }
    }
    out
}

pub fn beta_totals(contributions: &[BetaContribution], n_theta: usize) -> Vec<f64> {
    let mut beta = vec![0.0; n_theta];
    for c in contributions {
        beta[c.param] += c.norm;
    }
    beta
}

/// Largest spectral norm over all `Abar_ij`.
pub fn a_bar(model: &TsModel) -> f64 {
    let d = model.dims();
    (0..d.r)
        .flat_map(|i| (0..d.n_theta).map(move |j| (i, j)))
        .map(|(i, j)| spectral_norm(model.a_bar(i, j)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// No parameters: the Schur condition is omitted.
    Absent,
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphTerm {
    pub param: usize,
    pub submodel: usize,
    pub matrix: TransmissionKind,
    pub var: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub p: VarBlock,
    pub q: VarBlock,
    pub m: Vec<VarBlock>,
    pub gamma: Option<usize>,
    /// Upper bound on `lambda_max(P)` used by the eigenvalue form.
    pub p_max: Option<usize>,
    pub epigraph: Vec<EpigraphTerm>,
}

/// Assembled synthesis program plus the data needed to interpret a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub program: ConicProgram,
    pub layout: VarLayout,
    pub gamma: GammaMode,
    pub a_bar: f64,
    pub pinv: PseudoInverse,
    pub rho: Vec<f64>,
    pub pd_margin: f64,
    pub objective: Objective,
}

impl LmiProblem {
    /// Number of synthesis conditions (positivity, decay and Schur blocks),
    /// excluding the eigenvalue form, objective epigraphs and variable bounds.
    pub fn matrix_constraint_count(&self) -> usize {
        self.program
            .cones
            .iter()
            .filter(|c| c.role == ConeRole::Design)
            .count()
    }
}

fn sym_basis(n: usize, k: usize, l: usize) -> Mat {
    let mut e = Mat::zeros(n, n);
    e[(k, l)] = 1.0;
    e[(l, k)] = 1.0;
    e
}

fn unit(rows: usize, cols: usize, a: usize, b: usize) -> Mat {
    let mut e = Mat::zeros(rows, cols);
    e[(a, b)] = 1.0;
    e
}

fn sym_var_expr(block: &VarBlock, n: usize, expr: &mut SymExpr, r0: usize, c0: usize, f: impl Fn(&Mat) -> Mat) {
    for k in 0..n {
        for l in 0..=k {
            let coeff = f(&sym_basis(n, k, l));
            expr.add_term_block(r0, c0, block.index(k, l), &coeff);
        }
    }
}

/// Assembles the program selected by `spec`. For `max_gamma` this is the
/// program with `gamma` free and without the eigenvalue form, which
/// [`solve_design`] refines by bisection when that form is enforced.
pub fn build_constraints(model: &TsModel, spec: &DesignSpec) -> Result<LmiProblem, DesignError> {
    let d = *model.dims();
    spec.resolved_rho(d.n_theta)?;
    let gamma = if d.n_theta == 0 {
        GammaMode::Absent
    } else if spec.objective == Objective::MaxGamma {
        GammaMode::Free
    } else {
        let tb = spec.theta_bar.expect("validated");
        GammaMode::Fixed((d.n_theta as f64 * a_bar(model) * tb).powi(2))
    };
    let eig = spec.enforce_eigenvalue_bound && matches!(gamma, GammaMode::Fixed(g) if g > 0.0);
    build_with_gamma(model, spec, gamma, eig)
}

fn build_with_gamma(model: &TsModel, spec: &DesignSpec, gamma: GammaMode, eigenvalue_form: bool) -> Result<LmiProblem, DesignError> {
    let d = *model.dims();
    let rho = spec.resolved_rho(d.n_theta)?;
    let (n, ny) = (d.n, d.n_y);
    let eps = spec.pd_margin;
    let bound = spec.variable_bound;
    let c = model.c();
    let pinv = pseudo_inverse(c);
    let h = pinv.annihilator.clone();
    let abar = a_bar(model);

    let mut prog = ConicProgram::new();
    let p = prog.add_variable("P", VarShape::Symmetric { dim: n });
    let q = prog.add_variable("Q", VarShape::Symmetric { dim: n });
    let m: Vec<VarBlock> = (0..d.r)
        .map(|i| prog.add_variable(format!("M_{}", i + 1), VarShape::Dense { rows: n, cols: ny }))
        .collect();
    let gamma_var = matches!(gamma, GammaMode::Free).then(|| prog.add_variable("gamma", VarShape::Scalar).offset);

    let eye = Mat::identity(n, n);

    for (name, block) in [("pd_P", &p), ("pd_Q", &q)] {
        let mut e = SymExpr::new(n);
        sym_var_expr(block, n, &mut e, 0, 0, |b| b.clone());
        e.add_constant(&(-&eye * eps));
        prog.add_cone(e.into_cone(name, ConeRole::Design));
    }

    for i in 0..d.r {
        let a = model.a(i);
        // -(P A + A^T P - M C - C^T M^T + Q) - eps I >= 0
        let mut e = SymExpr::new(n);
        sym_var_expr(&p, n, &mut e, 0, 0, |b| -(b * a + a.transpose() * b));
        sym_var_expr(&q, n, &mut e, 0, 0, |b| -b);
        for r in 0..n {
            for s in 0..ny {
                let mc = unit(n, ny, r, s) * c;
                e.add_term(m[i].index(r, s), &(&mc + mc.transpose()));
            }
        }
        e.add_constant(&(-&eye * eps));
        prog.add_cone(e.into_cone(format!("lmi12_{}", i + 1), ConeRole::Design));
    }

    if !matches!(gamma, GammaMode::Absent) {
        let mut e = SymExpr::new(2 * n);
        sym_var_expr(&q, n, &mut e, 0, 0, |b| b.clone());
        sym_var_expr(&p, n, &mut e, n, 0, |b| b.clone());
        e.add_constant_block(n, n, &eye);
        match (gamma, gamma_var) {
            (GammaMode::Fixed(g), _) => e.add_constant_block(0, 0, &(-&eye * g)),
            (GammaMode::Free, Some(gv)) => e.add_term_block(0, 0, gv, &(-&eye)),
            _ => unreachable!(),
        }
        prog.add_cone(e.into_cone("schur13", ConeRole::Design));
    }

    let mut p_max = None;
    if let (true, GammaMode::Fixed(g)) = (eigenvalue_form, gamma) {
        let lam = prog.add_variable("p_max", VarShape::Scalar).offset;
        let mut upper = SymExpr::new(n);
        upper.add_term(lam, &eye);
        sym_var_expr(&p, n, &mut upper, 0, 0, |b| -b);
        prog.add_cone(upper.into_cone("eig10_P", ConeRole::Auxiliary));
        let mut lower = SymExpr::new(n);
        sym_var_expr(&q, n, &mut lower, 0, 0, |b| b.clone());
        lower.add_term(lam, &(-&eye * (2.0 * g.sqrt())));
        prog.add_cone(lower.into_cone("eig10_Q", ConeRole::Auxiliary));
        p_max = Some(lam);
    }

    let mut epigraph = Vec::new();
    if spec.objective == Objective::MinBeta {
        for j in 0..d.n_theta {
            for i in 0..d.r {
                for kind in TransmissionKind::ALL {
                    let nmat = kind.matrix(model, i, j);
                    if nmat.is_empty() || nmat.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let cols = nmat.ncols();
                    let len = cols * n;
                    let mut e = AffineExpr::new(1 + len);
                    for k in 0..n {
                        for l in 0..=k {
                            let coeff = nmat.transpose() * sym_basis(n, k, l) * &h;
                            for a in 0..cols {
                                for b in 0..n {
                                    e.add_term(1 + a * n + b, p.index(k, l), coeff[(a, b)]);
                                }
                            }
                        }
                    }
                    if e.is_constant() {
                        continue;
                    }
                    let name = format!("beta_{}_{}_{}", kind.label(), i + 1, j + 1);
                    let tau = prog.add_variable(format!("tau_{}_{}_{}", kind.label(), i + 1, j + 1), VarShape::Scalar).offset;
                    e.add_term(0, tau, 1.0);
                    prog.add_cone(e.into_cone(name, ConeKind::SecondOrder, 1 + len, ConeRole::Objective));
                    prog.add_objective(tau, 1.0);
                    // Keeps the epigraph variables bounded during phase I.
                    let cap = 10.0 * bound * (nmat.norm() * h.norm() + 1.0);
                    let mut cap_expr = AffineExpr::new(1);
                    cap_expr.add_constant(0, cap);
                    cap_expr.add_term(0, tau, -1.0);
                    prog.add_cone(cap_expr.into_cone(format!("bound_tau_{}_{}_{}", kind.label(), i + 1, j + 1), ConeKind::NonNeg, 1, ConeRole::Bound));
                    epigraph.push(EpigraphTerm { param: j, submodel: i, matrix: kind, var: tau });
                }
            }
        }
    }

    for (name, block) in [("bound_P", &p), ("bound_Q", &q)] {
        let mut e = SymExpr::new(n);
        sym_var_expr(block, n, &mut e, 0, 0, |b| -b);
        e.add_constant(&(&eye * bound));
        prog.add_cone(e.into_cone(name, ConeRole::Bound));
    }
    for (i, mb) in m.iter().enumerate() {
        let mut e = AffineExpr::new(1 + n * ny);
        e.add_constant(0, bound);
        for r in 0..n {
            for s in 0..ny {
                e.add_term(1 + r * ny + s, mb.index(r, s), 1.0);
            }
        }
        prog.add_cone(e.into_cone(format!("bound_M_{}", i + 1), ConeKind::SecondOrder, 1 + n * ny, ConeRole::Bound));
    }
    if let Some(gv) = gamma_var {
        let mut e = AffineExpr::new(2);
        e.add_term(0, gv, 1.0);
        e.add_constant(1, bound);
        e.add_term(1, gv, -1.0);
        prog.add_cone(e.into_cone("bound_gamma", ConeKind::NonNeg, 2, ConeRole::Bound));
        prog.add_objective(gv, -1.0);
    }

    Ok(LmiProblem {
        program: prog,
        layout: VarLayout { p, q, m, gamma: gamma_var, p_max, epigraph },
        gamma,
        a_bar: abar,
        pinv,
        rho,
        pd_margin: eps,
        objective: spec.objective,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub objective: f64,
    pub gap_bound: f64,
    pub phase1_shift: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDesign {
    pub p: Mat,
    pub q: Mat,
    pub m: Vec<Mat>,
    pub l: Vec<Mat>,
    pub gamma: f64,
    pub a_bar: f64,
    /// `sqrt(gamma) / (n_theta a_bar)`; `None` when that ratio is unbounded.
    pub theta_bar_max: Option<f64>,
    pub beta: Vec<f64>,
    pub beta_terms: Vec<BetaContribution>,
    pub rho: Vec<f64>,
    pub c_pinv: Mat,
    pub h: Mat,
    pub objective: Objective,
    pub pd_margin: f64,
    pub solver: Option<SolverStats>,
}

pub fn theta_bar_from_gamma(gamma: f64, n_theta: usize, a_bar: f64) -> Option<f64> {
    let denom = n_theta as f64 * a_bar;
    (denom > 0.0).then(|| gamma.max(0.0).sqrt() / denom)
}

/// Solves the assembled program and extracts the observer.
pub fn solve_problem(model: &TsModel, problem: &LmiProblem, settings: &SolverSettings) -> Result<ObserverDesign, DesignError> {
    let out = conic::solve(&problem.program, settings).map_err(|e| match e {
        SolverError::Infeasible { shift_lower_bound, shift } => DesignError::Infeasible {
            summary: format!(
                "phase I certificate: every cone must be shifted by at least {shift_lower_bound:.3e} \
                 (reached {shift:.3e}) before the conditions admit a solution"
            ),
            shift_lower_bound,
        },
        SolverError::Numerical(msg) => DesignError::SolverFailure(msg),
    })?;
    let x = &out.x;
    let lay = &problem.layout;
    let p = lay.p.value(x);
    let q = lay.q.value(x);
    let m: Vec<Mat> = lay.m.iter().map(|b| b.value(x)).collect();
    let chol = p
        .clone()
        .cholesky()
        .ok_or_else(|| DesignError::SolverFailure("returned P is not positive definite".into()))?;
    let l: Vec<Mat> = m.iter().map(|mi| chol.solve(mi)).collect();
    let d = model.dims();
    let gamma = match problem.gamma {
        GammaMode::Absent => 0.0,
        GammaMode::Fixed(g) => g,
        GammaMode::Free => x[lay.gamma.expect("free gamma has a variable")],
    };
    let beta_terms = beta_contributions(model, &p, &problem.pinv.annihilator);
    let beta = beta_totals(&beta_terms, d.n_theta);
    Ok(ObserverDesign {
        p,
        q,
        m,
        l,
        gamma,
        a_bar: problem.a_bar,
        theta_bar_max: theta_bar_from_gamma(gamma, d.n_theta, problem.a_bar),
        beta,
        beta_terms,
        rho: problem.rho.clone(),
        c_pinv: problem.pinv.pinv.clone(),
        h: problem.pinv.annihilator.clone(),
        objective: problem.objective,
        pd_margin: problem.pd_margin,
        solver: Some(SolverStats {
            objective: out.objective,
            gap_bound: out.gap_bound,
            phase1_shift: out.phase1_shift,
            outer_iterations: out.outer_iterations,
            newton_steps: out.newton_steps,
        }),
    })
}

pub fn solve_design(model: &TsModel, spec: &DesignSpec) -> Result<ObserverDesign, DesignError> {
    let problem = build_constraints(model, spec)?;
    let design = solve_problem(model, &problem, &spec.solver)?;
    if problem.gamma == GammaMode::Free && spec.enforce_eigenvalue_bound && problem.a_bar > 0.0 {
        return bisect_gamma(model, spec, design.gamma.sqrt());
    }
    Ok(design)
}

fn certified_kappa(d: &ObserverDesign) -> f64 {
    let p = symmetric_part(&d.p);
    let q = symmetric_part(&d.q);
    let eig = lambda_min(&q) / (2.0 * lambda_max(&p));
    let schur = lambda_min(&(&q - &p * &p)).max(0.0).sqrt();
    eig.min(schur).max(0.0)
}

/// Relative width at which the bisection on `sqrt(gamma)` stops.
pub const GAMMA_BISECTION_TOL: f64 = 1e-6;

/// Largest `kappa = sqrt(gamma)` in `[0, kappa_hi]` for which the synthesis
/// conditions and the eigenvalue form hold together. The eigenvalue form is
/// bilinear in `(kappa, p)` but linear for fixed `kappa`, so feasibility is
/// bisected.
fn bisect_gamma(model: &TsModel, spec: &DesignSpec, kappa_hi: f64) -> Result<ObserverDesign, DesignError> {
    let solve_at = |kappa: f64| -> Result<ObserverDesign, DesignError> {
        let problem = build_with_gamma(model, spec, GammaMode::Fixed(kappa * kappa), kappa > 0.0)?;
        solve_problem(model, &problem, &spec.solver)
    };
    let mut best = solve_at(0.0)?;
    let (mut lo, mut hi) = (0.0, kappa_hi);
    for _ in 0..80 {
        if hi - lo <= GAMMA_BISECTION_TOL * hi.max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match solve_at(mid) {
            Ok(mut d) => {
                // The solution usually certifies a larger kappa than requested:
                // eigenvalue form up to lambda_min(Q) / (2 lambda_max(P)), Schur
                // form up to sqrt(lambda_min(Q - P^2)).
                let kappa = certified_kappa(&d).min(hi) * (1.0 - 1e-9);
                if kappa > mid {
                    d.gamma = kappa * kappa;
                    d.theta_bar_max = theta_bar_from_gamma(d.gamma, model.dims().n_theta, d.a_bar);
                    lo = kappa;
                } else {
                    lo = mid;
                }
                best = d;
            }
            Err(DesignError::Infeasible { .. }) => hi = mid,
            Err(DesignError::SolverFailure(msg)) => {
                log::debug!("treating solver failure at sqrt(gamma) = {mid} as infeasible: {msg}");
                hi = mid;
            }
            Err(e) => return Err(e),
        }
    }
    best.objective = Objective::MaxGamma;
    Ok(best)
}

/// Largest `theta_bar` certified by `n_theta a_bar theta_bar <= lambda_min(Q) / (2 lambda_max(P))`;
/// infinite when `n_theta a_bar = 0`.
pub fn theta_bar_admissible(design: &ObserverDesign, n_theta: usize) -> f64 {
    let denom = n_theta as f64 * design.a_bar;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    lambda_min(&design.q) / (2.0 * lambda_max(&design.p) * denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub submodel: usize,
    pub param: usize,
    pub matrix: TransmissionKind,
    pub rank: usize,
    pub rank_c: usize,
    pub full_column_rank: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Nonzero transmission matrices only.
    pub entries: Vec<RankEntry>,
    pub theorem1_applicable: bool,
}

impl RankReport {
    pub fn failing(&self) -> impl Iterator<Item = &RankEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

/// Per-matrix rank test: every nonzero transmission matrix must have full
/// column rank and keep its rank after multiplication by `C`.
pub fn check_theorem1(model: &TsModel) -> RankReport {
    let d = model.dims();
    let mut entries = Vec::new();
    for i in 0..d.r {
        for j in 0..d.n_theta {
            for kind in TransmissionKind::ALL {
                let nmat = kind.matrix(model, i, j);
                if nmat.is_empty() || nmat.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let rank = numerical_rank(nmat, RANK_TOLERANCE);
                let rank_c = numerical_rank(&(model.c() * nmat), RANK_TOLERANCE);
                let full_column_rank = rank == nmat.ncols();
                entries.push(RankEntry {
                    submodel: i,
                    param: j,
                    matrix: kind,
                    rank,
                    rank_c,
                    full_column_rank,
                    pass: full_column_rank && rank_c == rank,
                });
            }
        }
    }
    let theorem1_applicable = entries.iter().all(|e| e.pass);
    RankReport { entries, theorem1_applicable }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSampling {
    pub samples: usize,
    pub theta_bar: f64,
    /// Largest sampled `e^T (P M + M^T P) e` over unit `e`.
    pub max_form: f64,
    /// Samples above the tolerance.
    pub violations: usize,
    pub tolerance: f64,
}

pub const ROBUST_SAMPLING_TOLERANCE: f64 = 1e-7;

/// Samples convex weights, parameters with `|theta_j| <= theta_bar` and unit
/// directions, and evaluates the quadratic form of the error dynamics
/// `M = sum_i mu_i (A_i - L_i C + sum_j theta_j Abar_ij)`.
pub fn robust_stability_sampling(
    model: &TsModel,
    design: &ObserverDesign,
    theta_bar: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> RobustSampling {
    let d = *model.dims();
    let forms = parallel::map_range(exec, samples, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut mu = Vector::from_fn(d.r, |_, _| rng.random::<f64>());
        // Every fourth sample sits on a vertex.
        if k % 4 == 0 {
            mu.fill(0.0);
            mu[rng.random_range(0..d.r)] = 1.0;
        }
        let total = mu.sum();
        mu /= total;
        let theta = Vector::from_fn(d.n_theta, |_, _| rng.random_range(-1.0..=1.0) * theta_bar);
        let mut e = Vector::from_fn(d.n, |_, _| rng.random_range(-1.0..=1.0));
        let norm = e.norm();
        if norm == 0.0 {
            e[0] = 1.0;
        } else {
            e /= norm;
        }
        let mut mmat = Mat::zeros(d.n, d.n);
        for i in 0..d.r {
            let mut mi = model.a(i) - &design.l[i] * model.c();
            for j in 0..d.n_theta {
                mi += model.a_bar(i, j) * theta[j];
            }
            mmat += mi * mu[i];
        }
        let pm = &design.p * mmat;
        (e.transpose() * (&pm + pm.transpose()) * &e)[(0, 0)]
    });
    let max_form = forms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    RobustSampling {
        samples,
        theta_bar,
        max_form,
        violations: forms.iter().filter(|f| **f > ROBUST_SAMPLING_TOLERANCE).count(),
        tolerance: ROBUST_SAMPLING_TOLERANCE,
    }
}

/// JSON form of [`ObserverDesign`]; matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDoc {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<Vec<f64>>>,
    pub gamma: f64,
    pub a_bar: f64,
    pub theta_bar_max: Option<f64>,
    pub beta: Vec<f64>,
    pub beta_terms: Vec<BetaContribution>,
    pub rho: Vec<f64>,
    #[serde(rename = "C_pinv")]
    pub c_pinv: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub objective: Objective,
    pub pd_margin: f64,
    #[serde(default)]
    pub solver: Option<SolverStats>,
}

impl ObserverDesign {
    pub fn to_doc(&self) -> DesignDoc {
        DesignDoc {
            p: matrix_to_rows(&self.p),
            q: matrix_to_rows(&self.q),
            m: self.m.iter().map(matrix_to_rows).collect(),
            l: self.l.iter().map(matrix_to_rows).collect(),
            gamma: self.gamma,
            a_bar: self.a_bar,
            theta_bar_max: self.theta_bar_max,
            beta: self.beta.clone(),
            beta_terms: self.beta_terms.clone(),
            rho: self.rho.clone(),
            c_pinv: matrix_to_rows(&self.c_pinv),
            h: matrix_to_rows(&self.h),
            objective: self.objective,
            pd_margin: self.pd_margin,
            solver: self.solver.clone(),
        }
    }

    /// Rebuilds a design, checking shapes against `model`.
    pub fn from_doc(doc: &DesignDoc, model: &TsModel) -> Result<Self, DesignError> {
        let d = model.dims();
        let mat = |name: &str, rows: &[Vec<f64>], r: usize, c: usize| -> Result<Mat, DesignError> {
            let m = rows_to_matrix(rows, c)
                .ok_or_else(|| DesignError::InvalidSpec(format!("{name}: ragged rows")))?;
            if m.shape() != (r, c) {
                return Err(DesignError::InvalidSpec(format!(
                    "{name}: expected {r}x{c}, found {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(m)
        };
        let list = |name: &str, items: &[Vec<Vec<f64>>]| -> Result<Vec<Mat>, DesignError> {
            if items.len() != d.r {
                return Err(DesignError::InvalidSpec(format!("{name}: expected {} matrices", d.r)));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, m)| mat(&format!("{name}[{i}]"), m, d.n, d.n_y))
                .collect()
        };
        if doc.rho.len() != d.n_theta || doc.beta.len() != d.n_theta {
            return Err(DesignError::InvalidSpec("rho/beta length must equal n_theta".into()));
        }
        Ok(ObserverDesign {
            p: mat("P", &doc.p, d.n, d.n)?,
            q: mat("Q", &doc.q, d.n, d.n)?,
            m: list("M", &doc.m)?,
            l: list("L", &doc.l)?,
            gamma: doc.gamma,
            a_bar: doc.a_bar,
            theta_bar_max: doc.theta_bar_max,
            beta: doc.beta.clone(),
            beta_terms: doc.beta_terms.clone(),
            rho: doc.rho.clone(),
            c_pinv: mat("C_pinv", &doc.c_pinv, d.n, d.n_y)?,
            h: mat("H", &doc.h, d.n, d.n)?,
            objective: doc.objective,
            pd_margin: doc.pd_margin,
            solver: doc.solver.clone(),
        })
    }
}
