//! Self-contained conic interior-point solver.
//!
//! The backend solves linear-objective programs over the product of zero,
//! nonnegative, second-order, and PSD cones with a homogeneous self-dual
//! embedding: Nesterov-Todd scaled predictor-corrector steps, a sparse
//! LDL^T-factored KKT system with a fill-reducing ordering, and Ruiz
//! equilibration of the problem data. Infeasible problems are certified with
//! Farkas rays.

pub(crate) mod cones;
pub(crate) mod hsde;
pub(crate) mod kkt;
pub(crate) mod sparse;
pub(crate) mod standard;

use crate::conic::ConicProgram;
pub use hsde::RawPoint;
use standard::StandardForm;

/// Outcome classification for a conic solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
    NumericalError,
}

/// Scaled residual norms of the returned point.
#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    /// Relative primal/dual feasibility tolerance.
    pub feas_tol: f64,
    /// Infeasibility-certificate tolerance.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Static regularization added to the KKT diagonal.
    pub static_reg: f64,
    /// Floor for dynamically regularized LDL^T pivots.
    pub dyn_reg: f64,
    /// Iterative-refinement steps per KKT solve.
    pub refine_steps: usize,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            feas_tol: 1e-8,
            infeas_tol: 1e-8,
            max_iter: 200,
            static_reg: 1e-8,
            dyn_reg: 1e-13,
            refine_steps: 3,
            verbose: false,
        }
    }
}

/// Result of solving a [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolverStatus,
    /// Objective value including the constant term; `+inf`/`-inf` for
    /// certified primal/dual infeasibility.
    pub objective: f64,
    /// Primal values per program variable.
    pub x: Vec<f64>,
    /// Dual multiplier per linear row, in program order. Nonnegative for
    /// binding `<=` and `>=` rows.
    pub row_duals: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
    /// The full standard-form point (or certificate ray), kept for warm
    /// starts and certificate checks.
    pub raw: RawPoint,
}

impl SolveResult {
    /// For a `PrimalInfeasible` result, the Farkas quality of the returned
    /// dual ray `y`: `(||A'y||_2, -b'y)` over the standard form of `prog`.
    /// A valid certificate has the first component near zero and the second
    /// equal to one (the ray is normalized).
    pub fn farkas_violation(&self, prog: &ConicProgram) -> (f64, f64) {
        let sf = StandardForm::compile(prog);
        let mut aty = vec![0.0; sf.n];
        sf.a.mul_transpose_add(&self.raw.z, &mut aty);
        let norm = aty.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bty: f64 = sf.b.iter().zip(&self.raw.z).map(|(b, z)| b * z).sum();
        (norm, -bty)
    }
}

/// Solve a conic program with the reference interior-point backend.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
    solve_with_start(prog, settings, None)
}

/// Solve with an optional warm start taken from a previous [`SolveResult`]
/// on a program with identical structure (same variables, rows, and cones;
/// only bounds and right-hand sides may differ).
pub fn solve_with_start(
    prog: &ConicProgram,
    settings: &SolverSettings,
    warm: Option<&RawPoint>,
) -> SolveResult {
    let sf = StandardForm::compile(prog);
    let out = hsde::solve_standard(&sf, settings, warm);
    // The standard-form multiplier is the Lagrange multiplier of the row in
    // its original sense (rows are negated for `>=`, and so is the
    // multiplier's contribution), so no sign flip is needed.
    let mut row_duals = vec![0.0; prog.rows.len()];
    for (i, origin) in sf.origins.iter().enumerate() {
        if let standard::RowOrigin::Linear { idx, .. } = *origin {
            row_duals[idx] = out.z[i];
        }
    }
    let objective = match out.status {
        SolverStatus::PrimalInfeasible => f64::INFINITY,
        SolverStatus::DualInfeasible => f64::NEG_INFINITY,
        _ => out.obj + sf.obj_constant,
    };
    SolveResult {
        status: out.status,
        objective,
        x: out.x.clone(),
        row_duals,
        residuals: out.residuals,
        iterations: out.iterations,
        raw: RawPoint { x: out.x, s: out.s, z: out.z },
    }
}
