//! Solver output and the optimality certificates checked against it.

use crate::problem::{LpProblem, RowSense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Branch-and-bound bookkeeping attached to MILP results.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpReport {
    pub nodes: usize,
    /// Best lower bound still open when the search stopped.
    pub best_bound: f64,
    /// Absolute gap between the incumbent and `best_bound`.
    pub gap: f64,
    pub node_limit_hit: bool,
    /// Objective of the root relaxation.
    pub root_bound: f64,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: Status,
    /// Primal values, one per column.
    pub x: Vec<f64>,
    /// Row duals `d(objective)/d(rhs)`. Empty for MILP results.
    pub duals: Vec<f64>,
    /// Reduced costs `c_j - y'A_j`. Empty for MILP results.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub milp: Option<MilpReport>,
}

impl LpSolution {
    pub(crate) fn without_values(status: Status, iterations: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            iterations,
            milp: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Largest bound or row violation, scaled by `1 + |rhs|`.
pub fn primal_residual(problem: &LpProblem, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (v, &xi) in problem.vars().iter().zip(x) {
        worst = worst.max((v.lower - xi).max(0.0) / (1.0 + v.lower.abs().min(1e30)));
        worst = worst.max((xi - v.upper).max(0.0) / (1.0 + v.upper.abs().min(1e30)));
    }
    for (r, act) in problem.rows().iter().zip(problem.row_activity(x)) {
        let viol = match r.sense {
            RowSense::Le => (act - r.rhs).max(0.0),
            RowSense::Ge => (r.rhs - act).max(0.0),
            RowSense::Eq => (act - r.rhs).abs(),
        };
        worst = worst.max(viol / (1.0 + r.rhs.abs()));
    }
    worst
}

/// Dual objective `b'y + sum_j d_j * (bound that d_j prices)`.
///
/// Requires a solution carrying duals and reduced costs.
pub fn dual_objective(problem: &LpProblem, sol: &LpSolution) -> f64 {
    let mut obj = problem.objective_offset;
    for (r, y) in problem.rows().iter().zip(&sol.duals) {
        obj += r.rhs * y;
    }
    for (v, &d) in problem.vars().iter().zip(&sol.reduced_costs) {
        if d > 0.0 && v.lower.is_finite() {
            obj += d * v.lower;
        } else if d < 0.0 && v.upper.is_finite() {
            obj += d * v.upper;
        }
    }
    obj
}

/// `|primal - dual| / (1 + |primal|)`.
pub fn duality_gap(problem: &LpProblem, sol: &LpSolution) -> f64 {
    let dual = dual_objective(problem, sol);
    (sol.objective - dual).abs() / (1.0 + sol.objective.abs())
}

/// Largest `|y_i * slack_i|` and `|d_j * (x_j - bound_j)|`, plus sign
/// violations of duals and reduced costs, scaled by `1 + |objective|`.
pub fn complementary_slackness(problem: &LpProblem, sol: &LpSolution) -> f64 {
    let scale = 1.0 + sol.objective.abs();
    let act = problem.row_activity(&sol.x);
    let mut worst: f64 = 0.0;
    for ((r, &y), a) in problem.rows().iter().zip(&sol.duals).zip(act) {
        let sign_viol = match r.sense {
            RowSense::Ge => (-y).max(0.0),
            RowSense::Le => y.max(0.0),
            RowSense::Eq => 0.0,
        };
        worst = worst.max(sign_viol).max((y * (a - r.rhs)).abs() / scale);
    }
    for ((v, &d), &xj) in problem.vars().iter().zip(&sol.reduced_costs).zip(&sol.x) {
        let term = if d > 0.0 {
            if v.lower.is_finite() {
                d * (xj - v.lower)
            } else {
                d
            }
        } else if d < 0.0 {
            if v.upper.is_finite() {
                d * (v.upper - xj)
            } else {
                -d
            }
        } else {
            0.0
        };
        worst = worst.max(term.abs() / scale);
    }
    worst
}
