//! Linear and mixed-binary programming kernel.
//!
//! A bounded revised simplex with a sparse LU basis factorisation returns
//! basic solutions with row duals (`d objective / d rhs`) and reduced costs,
//! which downstream code uses directly as marginal prices. Mixed-binary
//! problems are solved by best-first branch-and-bound over the same engine.
//!
//! ```
//! use vppfr_lp::{solve_lp, LpProblem, RowSense};
//!
//! let mut p = LpProblem::new();
//! let x = p.add_var("x", 0.0, f64::INFINITY, 1.0).unwrap();
//! p.add_row("floor", &[(x, 1.0)], RowSense::Ge, 1.0).unwrap();
//! let sol = solve_lp(&p).unwrap();
//! assert!((sol.objective - 1.0).abs() < 1e-12);
//! assert!((sol.duals[0] - 1.0).abs() < 1e-12);
//! ```

mod error;
mod lp_format;
mod lu;
mod milp;
mod problem;
mod scaling;
mod simplex;
mod solution;

pub use error::LpError;
pub use lp_format::to_lp_string;
pub use milp::{solve_milp, solve_milp_with, MilpOptions};
pub use problem::{LpProblem, Row, RowId, RowSense, VarId, Variable};
pub use solution::{
    complementary_slackness, dual_objective, duality_gap, primal_residual, LpSolution, MilpReport, Status,
};

/// Solves a pure LP. Integrality marks are rejected.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    if problem.is_mip() {
        return Err(LpError::HasIntegers);
    }
    let mut s = simplex::Simplex::new(problem)?;
    let status = s.solve()?;
    Ok(s.extract(problem, status))
}
