//! Thin C ABI over Clarabel.
//!
//! The C++ side assembles the problem in Clarabel's native form
//!   min q'x  s.t.  Ax + s = b,  s in K
//! with A given in CSC layout and K described as a list of
//! (kind, dim) pairs. PSD cones use the scaled-triangle (svec)
//! convention, dim = side length.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

pub const CONE_ZERO: i32 = 0;
pub const CONE_NONNEG: i32 = 1;
pub const CONE_SOC: i32 = 2;
pub const CONE_PSD_TRIANGLE: i32 = 3;
pub const CONE_EXP: i32 = 4;

pub const STATUS_SOLVED: i32 = 0;
pub const STATUS_ALMOST_SOLVED: i32 = 1;
pub const STATUS_PRIMAL_INFEASIBLE: i32 = 2;
pub const STATUS_DUAL_INFEASIBLE: i32 = 3;
pub const STATUS_MAX_ITERATIONS: i32 = 4;
pub const STATUS_NUMERICAL_ERROR: i32 = 5;
pub const STATUS_OTHER: i32 = 6;
pub const STATUS_BAD_PROBLEM: i32 = 7;

fn map_status(s: SolverStatus) -> i32 {
    match s {
        SolverStatus::Solved => STATUS_SOLVED,
        SolverStatus::AlmostSolved => STATUS_ALMOST_SOLVED,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            STATUS_PRIMAL_INFEASIBLE
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            STATUS_DUAL_INFEASIBLE
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime => STATUS_MAX_ITERATIONS,
        SolverStatus::NumericalError | SolverStatus::InsufficientProgress => {
            STATUS_NUMERICAL_ERROR
        }
        _ => STATUS_OTHER,
    }
}

/// Solves one conic program. Returns a STATUS_* code.
///
/// `x_out` must have room for `n` doubles, `z_out` and `s_out` for `m`.
/// All pointers must be valid for the documented lengths; `a_colptr`
/// has n+1 entries.
///
/// # Safety
/// Caller guarantees pointer validity and consistent dimensions.
#[no_mangle]
pub unsafe extern "C" fn mondeq_conic_solve(
    n: i64,
    m: i64,
    q: *const f64,
    a_colptr: *const i64,
    a_rowval: *const i64,
    a_nzval: *const f64,
    b: *const f64,
    n_cones: i64,
    cone_kind: *const i32,
    cone_dim: *const i64,
    tol: f64,
    max_iter: i64,
    verbose: i32,
    x_out: *mut f64,
    z_out: *mut f64,
    s_out: *mut f64,
    obj_out: *mut f64,
    solve_time_out: *mut f64,
    iterations_out: *mut i64,
) -> i32 {
    let n = n as usize;
    let m = m as usize;

    let q = std::slice::from_raw_parts(q, n).to_vec();
    let b = std::slice::from_raw_parts(b, m).to_vec();
    let colptr: Vec<usize> = std::slice::from_raw_parts(a_colptr, n + 1)
        .iter()
        .map(|&v| v as usize)
        .collect();
    let nnz = colptr[n];
    let rowval: Vec<usize> = std::slice::from_raw_parts(a_rowval, nnz)
        .iter()
        .map(|&v| v as usize)
        .collect();
    let nzval = std::slice::from_raw_parts(a_nzval, nnz).to_vec();

    let kinds = std::slice::from_raw_parts(cone_kind, n_cones as usize);
    let dims = std::slice::from_raw_parts(cone_dim, n_cones as usize);
    let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(kinds.len());
    for (&k, &d) in kinds.iter().zip(dims.iter()) {
        let d = d as usize;
        match k {
            CONE_ZERO => cones.push(SupportedConeT::ZeroConeT(d)),
            CONE_NONNEG => cones.push(SupportedConeT::NonnegativeConeT(d)),
            CONE_SOC => cones.push(SupportedConeT::SecondOrderConeT(d)),
            CONE_PSD_TRIANGLE => cones.push(SupportedConeT::PSDTriangleConeT(d)),
            CONE_EXP => cones.push(SupportedConeT::ExponentialConeT()),
            _ => return STATUS_BAD_PROBLEM,
        }
    }

    let p = CscMatrix::<f64>::zeros((n, n));
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);

    let settings = DefaultSettings::<f64> {
        verbose: verbose != 0,
        max_iter: max_iter as u32,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        ..DefaultSettings::default()
    };

    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(_) => return STATUS_BAD_PROBLEM,
    };
    solver.solve();

    let sol = &solver.solution;
    std::slice::from_raw_parts_mut(x_out, n).copy_from_slice(&sol.x);
    std::slice::from_raw_parts_mut(z_out, m).copy_from_slice(&sol.z);
    std::slice::from_raw_parts_mut(s_out, m).copy_from_slice(&sol.s);
    *obj_out = sol.obj_val;
    *solve_time_out = sol.solve_time;
    *iterations_out = sol.iterations as i64;

    map_status(sol.status)
}
