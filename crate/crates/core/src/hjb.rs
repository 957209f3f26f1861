//! HJB optimal-control problems for affine systems.
//!
//! A problem is `xdot = a(x) x + b(x) u` with running cost
//! `x' Q x + u' R u` and either an infinite horizon or a finite horizon with
//! terminal cost `psi`. Minimizing the Hamiltonian integrand over
//! unconstrained `u` is a quadratic problem with the closed form
//!
//! ```text
//! u*(x, p)  = -1/2 R^-1 b(x)' p'
//! H*(x, p)  = p a(x) x + x' Q x - 1/4 p b(x) R^-1 b(x)' p'
//! ```
//!
//! where `p` is the costate row vector (`V_x`). `H*` is a pointwise minimum
//! of affine functions of `p`, hence concave in `p`. The PDE residual is
//! `V_t + H*(x, V_x)` on a finite horizon and `H*(x, V_x)` on an infinite
//! one.

use crate::autodiff::{Scalar, Scalar2Jet};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Desk-scale caps; the dynamics catalog and the solvers assume them.
pub const MAX_STATE_DIM: usize = 3;
pub const MAX_CONTROL_DIM: usize = 2;

/// Terminal cost for finite-horizon problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCost {
    /// `psi(x) = sum_i c_i x_i^2`
    Quadratic { coeffs: Vec<f64> },
}

impl TerminalCost {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TerminalCost::Quadratic { coeffs } => {
                coeffs.iter().zip(x).map(|(c, xi)| c * xi * xi).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Infinite,
    Finite { t_end: f64, terminal: TerminalCost },
}

impl Horizon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite { .. })
    }
}

/// Registered closed-form dynamics. Custom problems pick from this catalog;
/// there is deliberately no expression parser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Scalar `xdot = a x + b u`.
    Motivation { a: f64, b: f64 },
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

/// Drift vector `a(x) x` and input map `b(x)` at one state, on the stack.
#[derive(Debug, Clone, Copy)]
pub struct DynEval {
    pub drift: [f64; MAX_STATE_DIM],
    pub b: [[f64; MAX_CONTROL_DIM]; MAX_STATE_DIM],
}

impl Dynamics {
    pub fn state_dim(&self) -> usize {
        match self {
            Dynamics::Motivation { .. } | Dynamics::Ex4 => 1,
            _ => 2,
        }
    }

    pub fn control_dim(&self) -> usize {
        1
    }

    /// Drift and input map at `x`.
    pub fn eval(&self, x: &[f64]) -> DynEval {
        let mut out = DynEval {
            drift: [0.0; MAX_STATE_DIM],
            b: [[0.0; MAX_CONTROL_DIM]; MAX_STATE_DIM],
        };
        match self {
            Dynamics::Motivation { a, b } => {
                out.drift[0] = a * x[0];
                out.b[0][0] = *b;
            }
            Dynamics::Ex1 => {
                out.drift[0] = -x[0] + x[1];
                out.drift[1] = -0.5 * x[0] - 0.5 * x[1] + 0.5 * x[0] * x[0] * x[1];
                out.b[1][0] = x[0];
            }
            Dynamics::Ex2 => {
                let c = (2.0 * x[0]).cos() + 2.0;
                out.drift[0] = -x[0] + x[1];
                out.drift[1] = -0.5 * x[0] - 0.5 * x[1] * (1.0 - c * c);
                out.b[1][0] = c;
            }
            Dynamics::Ex3 => {
                let g = std::f64::consts::FRAC_PI_2 + (5.0 * x[0]).atan();
                out.drift[0] = x[1];
                out.drift[1] =
                    -x[0] * g - 5.0 * x[0] * x[0] / (2.0 + 50.0 * x[0] * x[0]) + 4.0 * x[1];
                out.b[1][0] = 3.0;
            }
            Dynamics::Ex4 => {
                out.drift[0] = x[0];
                out.b[0][0] = 1.0;
            }
        }
        out
    }

    /// The matrix `a(x)` with `a(x) x` equal to the drift.
    pub fn a_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Dynamics::Motivation { a, .. } => DMatrix::from_row_slice(1, 1, &[*a]),
            Dynamics::Ex1 => DMatrix::from_row_slice(
                2,
                2,
                &[-1.0, 1.0, -0.5, -0.5 + 0.5 * x[0] * x[0]],
            ),
            Dynamics::Ex2 => {
                let c = (2.0 * x[0]).cos() + 2.0;
                DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -0.5, -0.5 * (1.0 - c * c)])
            }
            Dynamics::Ex3 => {
                let g = std::f64::consts::FRAC_PI_2 + (5.0 * x[0]).atan();
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        0.0,
                        1.0,
                        -g - 5.0 * x[0] / (2.0 + 50.0 * x[0] * x[0]),
                        4.0,
                    ],
                )
            }
            Dynamics::Ex4 => DMatrix::from_row_slice(1, 1, &[1.0]),
        }
    }

    /// The matrix `b(x)`.
    pub fn b_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let (n, m) = (self.state_dim(), self.control_dim());
        let e = self.eval(x);
        DMatrix::from_fn(n, m, |i, j| e.b[i][j])
    }
}

/// An HJB optimal-control problem, immutable after construction.
#[derive(Debug, Clone)]
pub struct HJBProblem {
    id: Option<&'static str>,
    state_dim: usize,
    control_dim: usize,
    dynamics: Dynamics,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: [[f64; MAX_CONTROL_DIM]; MAX_CONTROL_DIM],
    q_arr: [[f64; MAX_STATE_DIM]; MAX_STATE_DIM],
    horizon: Horizon,
    state_box: Vec<(f64, f64)>,
    semidefinite_q: bool,
}

/// PDE residual split into its defining parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParts {
    pub value: f64,
    pub h_term: f64,
    pub v_t_term: f64,
}

impl HJBProblem {
    /// Validates symmetry and (semi)definiteness of the cost matrices and the
    /// state box, then freezes the problem.
    pub fn new(
        dynamics: Dynamics,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        horizon: Horizon,
        state_box: Vec<(f64, f64)>,
        semidefinite_q: bool,
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        let m = dynamics.control_dim();
        if n > MAX_STATE_DIM || m > MAX_CONTROL_DIM {
            return Err(Error::InvalidProblem(format!(
                "state dim {n} / control dim {m} beyond supported size"
            )));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::InvalidProblem(format!(
                "Q must be {n}x{n}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::InvalidProblem(format!(
                "R must be {m}x{m}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if q != q.transpose() {
            return Err(Error::InvalidProblem("Q is not symmetric".into()));
        }
        if r != r.transpose() {
            return Err(Error::InvalidProblem("R is not symmetric".into()));
        }
        let q_min = min_eigenvalue(&q);
        let r_min = min_eigenvalue(&r);
        if r_min <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "R must be positive definite (min eigenvalue {r_min})"
            )));
        }
        if semidefinite_q {
            if q_min < -1e-12 {
                return Err(Error::InvalidProblem(format!(
                    "Q must be positive semidefinite (min eigenvalue {q_min})"
                )));
            }
        } else if q_min <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "Q must be positive definite (min eigenvalue {q_min}); \
                 set the semidefinite flag to relax"
            )));
        }
        if state_box.len() != n {
            return Err(Error::InvalidProblem(format!(
                "state box must have {n} intervals, got {}",
                state_box.len()
            )));
        }
        if state_box.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidProblem("empty state-box interval".into()));
        }
        if let Horizon::Finite { t_end, terminal } = &horizon {
            if !(*t_end > 0.0) {
                return Err(Error::InvalidProblem("t_end must be positive".into()));
            }
            let TerminalCost::Quadratic { coeffs } = terminal;
            if coeffs.len() != n {
                return Err(Error::InvalidProblem(
                    "terminal cost dimension mismatch".into(),
                ));
            }
        }

        let r_full = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidProblem("R is not invertible".into()))?;
        let mut r_inv = [[0.0; MAX_CONTROL_DIM]; MAX_CONTROL_DIM];
        for i in 0..m {
            for j in 0..m {
                r_inv[i][j] = r_full[(i, j)];
            }
        }
        let mut q_arr = [[0.0; MAX_STATE_DIM]; MAX_STATE_DIM];
        for i in 0..n {
            for j in 0..n {
                q_arr[i][j] = q[(i, j)];
            }
        }
        Ok(Self {
            id: None,
            state_dim: n,
            control_dim: m,
            dynamics,
            q,
            r,
            r_inv,
            q_arr,
            horizon,
            state_box,
            semidefinite_q,
        })
    }

    pub fn id(&self) -> Option<&'static str> {
        self.id
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn horizon(&self) -> &Horizon {
        &self.horizon
    }

    pub fn state_box(&self) -> &[(f64, f64)] {
        &self.state_box
    }

    pub fn semidefinite_q(&self) -> bool {
        self.semidefinite_q
    }

    /// Network input dimension: `n` for infinite horizon, `1 + n` (time
    /// first) for finite horizon.
    pub fn input_dim(&self) -> usize {
        match self.horizon {
            Horizon::Infinite => self.state_dim,
            Horizon::Finite { .. } => 1 + self.state_dim,
        }
    }

    /// Box over the full network input (time interval first when finite).
    pub fn input_box(&self) -> Vec<(f64, f64)> {
        match &self.horizon {
            Horizon::Infinite => self.state_box.clone(),
            Horizon::Finite { t_end, .. } => {
                let mut b = Vec::with_capacity(1 + self.state_dim);
                b.push((0.0, *t_end));
                b.extend_from_slice(&self.state_box);
                b
            }
        }
    }

    /// Terminal data `psi(x)` (finite horizon only).
    pub fn terminal_value(&self, x: &[f64]) -> Option<f64> {
        match &self.horizon {
            Horizon::Finite { terminal, .. } => Some(terminal.eval(x)),
            Horizon::Infinite => None,
        }
    }

    /// Running cost `x' Q x`.
    pub fn state_cost(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.state_dim {
            for j in 0..self.state_dim {
                s += x[i] * self.q_arr[i][j] * x[j];
            }
        }
        s
    }

    fn check_state_costate(&self, x: &[f64], p: &[f64]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: x.len(),
            });
        }
        if p.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: p.len(),
            });
        }
        Ok(())
    }
}

/// Minimized Hamiltonian `H*(x, p)`, evaluated from the explicit quadratic
/// minimizer (never a numeric search).
pub fn hamiltonian_min(problem: &HJBProblem, x: &[f64], p: &[f64]) -> Result<f64> {
    problem.check_state_costate(x, p)?;
    Ok(hamiltonian_min_scalar(problem, x, p))
}

/// Generic-scalar Hamiltonian; `p` entries may be tape variables.
pub fn hamiltonian_min_scalar<S: Scalar>(problem: &HJBProblem, x: &[f64], p: &[S]) -> S {
    let n = problem.state_dim;
    let m = problem.control_dim;
    let dyn_eval = problem.dynamics.eval(x);

    // p . a(x) x
    let mut h = p[0].scale(dyn_eval.drift[0]);
    for i in 1..n {
        h = h + p[i].scale(dyn_eval.drift[i]);
    }
    // + x' Q x
    h = h.add_const(problem.state_cost(x));

    // - 1/4 (b' p)' R^-1 (b' p)
    let zero = p[0].zero();
    let mut bp = [zero; MAX_CONTROL_DIM];
    for (k, bp_k) in bp.iter_mut().enumerate().take(m) {
        let mut acc = p[0].scale(dyn_eval.b[0][k]);
        for i in 1..n {
            acc = acc + p[i].scale(dyn_eval.b[i][k]);
        }
        *bp_k = acc;
    }
    let mut quad = (bp[0] * bp[0]).scale(problem.r_inv[0][0]);
    for k in 0..m {
        for l in 0..m {
            if k == 0 && l == 0 {
                continue;
            }
            quad = quad + (bp[k] * bp[l]).scale(problem.r_inv[k][l]);
        }
    }
    h - quad.scale(0.25)
}

/// Minimizer `u*(x, p) = -1/2 R^-1 b(x)' p'` of the Hamiltonian integrand.
pub fn optimal_control(problem: &HJBProblem, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    problem.check_state_costate(x, p)?;
    let n = problem.state_dim;
    let m = problem.control_dim;
    let dyn_eval = problem.dynamics.eval(x);
    let mut bp = [0.0; MAX_CONTROL_DIM];
    for (k, bp_k) in bp.iter_mut().enumerate().take(m) {
        *bp_k = (0..n).map(|i| dyn_eval.b[i][k] * p[i]).sum();
    }
    Ok((0..m)
        .map(|k| -0.5 * (0..m).map(|l| problem.r_inv[k][l] * bp[l]).sum::<f64>())
        .collect())
}

/// Hamiltonian integrand `p.(a x + b u) + x'Qx + u'Ru` at an arbitrary `u`;
/// equals `hamiltonian_min` at `u = optimal_control`.
pub fn hamiltonian_at(problem: &HJBProblem, x: &[f64], p: &[f64], u: &[f64]) -> Result<f64> {
    problem.check_state_costate(x, p)?;
    if u.len() != problem.control_dim {
        return Err(Error::DimensionMismatch {
            expected: problem.control_dim,
            got: u.len(),
        });
    }
    let n = problem.state_dim;
    let m = problem.control_dim;
    let dyn_eval = problem.dynamics.eval(x);
    let mut h = problem.state_cost(x);
    for i in 0..n {
        let bu: f64 = (0..m).map(|k| dyn_eval.b[i][k] * u[k]).sum();
        h += p[i] * (dyn_eval.drift[i] + bu);
    }
    for k in 0..m {
        for l in 0..m {
            h += u[k] * problem.r[(k, l)] * u[l];
        }
    }
    Ok(h)
}

/// PDE residual of a jet evaluated at `input` (layout `(t, x..)` for finite
/// horizon, `(x..)` for infinite).
pub fn residual(problem: &HJBProblem, input: &[f64], jet: &Scalar2Jet) -> Result<ResidualParts> {
    if input.len() != problem.input_dim() || jet.grad.len() != problem.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.input_dim(),
            got: if input.len() != problem.input_dim() {
                input.len()
            } else {
                jet.grad.len()
            },
        });
    }
    match problem.horizon {
        Horizon::Infinite => {
            let h = hamiltonian_min_scalar(problem, input, &jet.grad);
            Ok(ResidualParts {
                value: h,
                h_term: h,
                v_t_term: 0.0,
            })
        }
        Horizon::Finite { .. } => {
            let h = hamiltonian_min_scalar(problem, &input[1..], &jet.grad[1..]);
            let v_t = jet.grad[0];
            Ok(ResidualParts {
                value: v_t + h,
                h_term: h,
                v_t_term: v_t,
            })
        }
    }
}

/// Generic-scalar residual used inside training losses: `v_grad` is the
/// input-gradient of the value network at `input`.
pub fn residual_scalar<S: Scalar>(problem: &HJBProblem, input: &[f64], v_grad: &[S]) -> S {
    match problem.horizon {
        Horizon::Infinite => hamiltonian_min_scalar(problem, input, v_grad),
        Horizon::Finite { .. } => {
            let h = hamiltonian_min_scalar(problem, &input[1..], &v_grad[1..]);
            v_grad[0] + h
        }
    }
}

/// The benchmark problems, exactly as parameterized in the catalog.
///
/// `motivation` defaults to `(a, b) = (1, 1)`; ex1-ex3 are infinite-horizon
/// on `[-1,1]^2`; ex4 is finite-horizon with `T = 10`, `psi(x) = x^2` on
/// `[-1,1]`. Ex3 (`Q = diag(0,1)`) and ex4 (`Q = 0`) carry the
/// positive-semidefinite relaxation flag.
pub fn builtin_problem(id: &str) -> Result<HJBProblem> {
    let mut problem = match id {
        "motivation" => motivation_problem(1.0, 1.0)?,
        "ex1" => HJBProblem::new(
            Dynamics::Ex1,
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            Horizon::Infinite,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            false,
        )?,
        "ex2" => HJBProblem::new(
            Dynamics::Ex2,
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            Horizon::Infinite,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            false,
        )?,
        "ex3" => HJBProblem::new(
            Dynamics::Ex3,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            DMatrix::identity(1, 1),
            Horizon::Infinite,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            true,
        )?,
        "ex4" => HJBProblem::new(
            Dynamics::Ex4,
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            Horizon::Finite {
                t_end: 10.0,
                terminal: TerminalCost::Quadratic { coeffs: vec![1.0] },
            },
            vec![(-1.0, 1.0)],
            true,
        )?,
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    problem.id = Some(match id {
        "motivation" => "motivation",
        "ex1" => "ex1",
        "ex2" => "ex2",
        "ex3" => "ex3",
        "ex4" => "ex4",
        _ => unreachable!(),
    });
    Ok(problem)
}

/// The scalar motivating problem `xdot = a x + b u`, cost `int x^2 + u^2`.
pub fn motivation_problem(a: f64, b: f64) -> Result<HJBProblem> {
    if b == 0.0 {
        return Err(Error::DegenerateInputMap);
    }
    let mut p = HJBProblem::new(
        Dynamics::Motivation { a, b },
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        Horizon::Infinite,
        vec![(-1.0, 1.0)],
        false,
    )?;
    p.id = Some("motivation");
    Ok(p)
}

/// All builtin ids, in catalog order.
pub const BUILTIN_IDS: [&str; 5] = ["motivation", "ex1", "ex2", "ex3", "ex4"];

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

// ---------------------------------------------------------------------------
// Problem definition files
// ---------------------------------------------------------------------------

/// On-disk problem definition: a builtin id or a custom assembly over the
/// registered dynamics catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemFile {
    Id(String),
    Custom(CustomProblem),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomProblem {
    pub dynamics: Dynamics,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub horizon: Horizon,
    pub state_box: Vec<(f64, f64)>,
    #[serde(default)]
    pub allow_semidefinite_q: bool,
}

impl ProblemFile {
    pub fn build(&self) -> Result<HJBProblem> {
        match self {
            ProblemFile::Id(id) => builtin_problem(id),
            ProblemFile::Custom(c) => {
                let n = c.dynamics.state_dim();
                let m = c.dynamics.control_dim();
                let q = rows_to_matrix(&c.q, n, "Q")?;
                let r = rows_to_matrix(&c.r, m, "R")?;
                HJBProblem::new(
                    c.dynamics,
                    q,
                    r,
                    c.horizon.clone(),
                    c.state_box.clone(),
                    c.allow_semidefinite_q,
                )
            }
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidProblem(format!("{name} must be {dim}x{dim}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

/// Load a problem from a JSON definition file.
pub fn load_problem(path: &std::path::Path) -> Result<HJBProblem> {
    let text = std::fs::read_to_string(path)?;
    let file: ProblemFile = serde_json::from_str(&text)?;
    file.build()
}
