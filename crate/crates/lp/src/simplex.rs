//! Bounded revised primal simplex on the scaled computational form
//! `A x - s = 0`, where the logical `s_i` carries the row bounds.
//!
//! Phase 1 and phase 2 are merged: every iteration prices with the
//! infeasibility-sum costs while any basic variable is out of bounds and with
//! the true costs otherwise. A bound change (branch-and-bound) therefore needs
//! no special handling: the next solve starts from the old basis and repairs
//! feasibility first.

use log::{debug, trace};

use crate::error::LpError;
use crate::lu::BasisFactor;
use crate::problem::{LpProblem, RowSense};
use crate::scaling::geometric_scaling;
use crate::solution::{LpSolution, Status};

const PRIMAL_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_BEFORE_BLAND: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column parked at zero.
    AtZero,
}

/// Basis snapshot used to warm start a later solve.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    basis: Vec<usize>,
    state: Vec<VarState>,
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    factor: BasisFactor,
    pub iterations: usize,
    iteration_limit: usize,
}

enum Ratio {
    Flip,
    Pivot { pos: usize, to_upper: bool, theta: f64 },
    Unbounded,
}

impl Simplex {
    pub fn new(problem: &LpProblem) -> Result<Self, LpError> {
        problem.validate()?;
        let m = problem.num_rows();
        let n = problem.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in problem.rows().iter().enumerate() {
            for &(v, a) in &row.coeffs {
                cols[v.0].push((i, a));
            }
        }
        let sc = geometric_scaling(m, &cols);
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                col_row.push(i);
                col_val.push(a * sc.row_scale[i] * sc.col_scale[j]);
            }
            col_start.push(col_row.len());
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for (j, v) in problem.vars().iter().enumerate() {
            lower.push(v.lower / sc.col_scale[j]);
            upper.push(v.upper / sc.col_scale[j]);
            cost.push(v.cost * sc.col_scale[j]);
        }
        for (i, r) in problem.rows().iter().enumerate() {
            let b = r.rhs * sc.row_scale[i];
            let (l, u) = match r.sense {
                RowSense::Le => (f64::NEG_INFINITY, b),
                RowSense::Ge => (b, f64::INFINITY),
                RowSense::Eq => (b, b),
            };
            lower.push(l);
            upper.push(u);
            cost.push(0.0);
        }
        let mut s = Simplex {
            m,
            n,
            col_start,
            col_row,
            col_val,
            lower,
            upper,
            cost,
            row_scale: sc.row_scale,
            col_scale: sc.col_scale,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basis: (n..n + m).collect(),
            factor: BasisFactor::default(),
            iterations: 0,
            iteration_limit: 20_000 + 40 * (n + m),
        };
        for j in 0..n {
            s.state[j] = s.resting_state(j, 0.0);
        }
        for i in 0..m {
            s.state[n + i] = VarState::Basic;
        }
        s.refactor()?;
        s.recompute_primal();
        Ok(s)
    }

    fn resting_state(&self, j: usize, near: f64) -> VarState {
        let (l, u) = (self.lower[j], self.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (near - l).abs() <= (u - near).abs() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                }
            }
            (true, false) => VarState::AtLower,
            (false, true) => VarState::AtUpper,
            (false, false) => VarState::AtZero,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::AtZero => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| (self.col_row[e], self.col_val[e]))
                .collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| self.col_val[e] * y[self.col_row[e]])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Changes the bounds of structural column `j` (original units).
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower / self.col_scale[j];
        self.upper[j] = upper / self.col_scale[j];
        if self.state[j] != VarState::Basic {
            self.state[j] = self.resting_state(j, self.x[j]);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub fn snapshot(&self) -> Basis {
        Basis {
            basis: self.basis.clone(),
            state: self.state.clone(),
        }
    }

    pub fn restore(&mut self, b: &Basis) -> Result<(), LpError> {
        self.basis.clone_from(&b.basis);
        self.state.clone_from(&b.state);
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                // bounds may have changed since the snapshot was taken
                let ok = match self.state[j] {
                    VarState::AtLower => self.lower[j].is_finite(),
                    VarState::AtUpper => self.upper[j].is_finite(),
                    VarState::AtZero => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
                    VarState::Basic => true,
                };
                if !ok {
                    self.state[j] = self.resting_state(j, 0.0);
                }
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor()?;
        self.recompute_primal();
        Ok(())
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _attempt in 0..3 {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
            match BasisFactor::factorize(self.m, &cols) {
                Ok(f) => {
                    self.factor = f;
                    return Ok(());
                }
                Err(sing) => {
                    debug!(
                        "singular basis: {} dependent columns, repairing with logicals",
                        sing.cols.len()
                    );
                    for (&pos, &row) in sing.cols.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        self.state[out] = self.resting_state(out, self.x[out]);
                        self.x[out] = self.nonbasic_value(out);
                        self.basis[pos] = self.n + row;
                        self.state[self.n + row] = VarState::Basic;
                    }
                }
            }
        }
        let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
        match BasisFactor::factorize(self.m, &cols) {
            Ok(f) => {
                self.factor = f;
                Ok(())
            }
            Err(sing) => Err(LpError::SingularBasis {
                position: sing.cols[0],
                row: sing.rows[0],
            }),
        }
    }

    fn recompute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for e in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[e]] -= self.col_val[e] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        let mut xb = vec![0.0; self.m];
        self.factor.ftran(&mut rhs, &mut xb);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self) -> Result<Status, LpError> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut verified = false;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut work = vec![0.0; m];
        let start = self.iterations;
        loop {
            if self.iterations - start >= self.iteration_limit {
                return Err(LpError::IterationLimit(self.iterations));
            }
            if self.factor.num_updates() >= REFACTOR_EVERY {
                self.refactor()?;
                self.recompute_primal();
            }
            let mut phase1 = false;
            for (p, &j) in self.basis.iter().enumerate() {
                let v = self.x[j];
                cb[p] = if v < self.lower[j] - PRIMAL_TOL {
                    phase1 = true;
                    -1.0
                } else if v > self.upper[j] + PRIMAL_TOL {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for (p, &j) in self.basis.iter().enumerate() {
                    cb[p] = self.cost[j];
                }
            }
            work.copy_from_slice(&cb);
            self.factor.btran(&mut work, &mut y);

            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            let entering = self.price(&y, phase1, bland);
            let Some((q, dir)) = entering else {
                if !verified && self.factor.num_updates() > 0 {
                    // confirm on a fresh factorisation before declaring the result
                    verified = true;
                    self.refactor()?;
                    self.recompute_primal();
                    continue;
                }
                if phase1 {
                    debug!("infeasible after {} iterations", self.iterations);
                    return Ok(Status::Infeasible);
                }
                debug!("optimal after {} iterations", self.iterations);
                return Ok(Status::Optimal);
            };
            verified = false;

            work.iter_mut().for_each(|w| *w = 0.0);
            for (r, v) in self.column(q) {
                work[r] = v;
            }
            self.factor.ftran(&mut work, &mut alpha);

            match self.ratio_test(q, dir, &alpha, phase1, bland) {
                Ratio::Unbounded => {
                    if phase1 {
                        // numerically inconsistent phase-1 direction; refresh and retry
                        self.refactor()?;
                        self.recompute_primal();
                        self.iterations += 1;
                        continue;
                    }
                    debug!("unbounded direction on column {q}");
                    return Ok(Status::Unbounded);
                }
                Ratio::Flip => {
                    let span = self.upper[q] - self.lower[q];
                    for (p, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= dir * span * alpha[p];
                    }
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                    degenerate = 0;
                }
                Ratio::Pivot { pos, to_upper, theta } => {
                    let theta = theta.max(0.0);
                    if theta <= 1e-12 {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                    for (p, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= dir * theta * alpha[p];
                    }
                    self.x[q] += dir * theta;
                    let out = self.basis[pos];
                    self.state[out] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
                    self.x[out] = self.nonbasic_value(out);
                    self.basis[pos] = q;
                    self.state[q] = VarState::Basic;
                    self.factor.update(pos, &alpha);
                    trace!("pivot in {q} out {out} theta {theta:e}");
                }
            }
            self.iterations += 1;
        }
    }

    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.cost[j] };
            let d = c - self.dot_column(j, y);
            let dir = match st {
                VarState::AtLower if d < -DUAL_TOL => 1.0,
                VarState::AtUpper if d > DUAL_TOL => -1.0,
                VarState::AtZero if d.abs() > DUAL_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool, bland: bool) -> Ratio {
        // bound each basic variable runs into, per position
        let mut targets: Vec<(usize, f64, f64, bool)> = Vec::new();
        let mut theta_max = f64::INFINITY;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[p];
            let rate = -dir * a;
            let v = self.x[j];
            let (l, u) = (self.lower[j], self.upper[j]);
            let (bound, to_upper) = if rate < 0.0 {
                if phase1 && v < l - PRIMAL_TOL {
                    continue;
                } else if phase1 && v > u + PRIMAL_TOL {
                    (u, true)
                } else {
                    (l, false)
                }
            } else if phase1 && v > u + PRIMAL_TOL {
                continue;
            } else if phase1 && v < l - PRIMAL_TOL {
                (l, false)
            } else {
                (u, true)
            };
            if !bound.is_finite() {
                continue;
            }
            let relaxed = ((bound - v).abs() + HARRIS_TOL) / rate.abs();
            let relaxed = if (rate < 0.0 && v < bound) || (rate > 0.0 && v > bound) {
                HARRIS_TOL / rate.abs()
            } else {
                relaxed
            };
            theta_max = theta_max.min(relaxed);
            targets.push((p, bound, rate, to_upper));
        }
        let span = self.upper[q] - self.lower[q];
        if span.is_finite() && span <= theta_max {
            return Ratio::Flip;
        }
        if targets.is_empty() || !theta_max.is_finite() {
            return Ratio::Unbounded;
        }
        let mut chosen: Option<(usize, f64, bool, f64, usize)> = None;
        for &(p, bound, rate, to_upper) in &targets {
            let exact = (bound - self.x[self.basis[p]]) / rate;
            if exact > theta_max {
                continue;
            }
            let size = rate.abs();
            let var = self.basis[p];
            let better = match chosen {
                None => true,
                Some((_, _, _, best_size, best_var)) => {
                    if bland {
                        var < best_var
                    } else {
                        size > best_size || (size == best_size && var < best_var)
                    }
                }
            };
            if better {
                chosen = Some((p, exact, to_upper, size, var));
            }
        }
        match chosen {
            Some((pos, theta, to_upper, _, _)) => Ratio::Pivot { pos, to_upper, theta },
            None => Ratio::Unbounded,
        }
    }

    /// Maps the current basic solution back to problem units.
    pub fn extract(&mut self, problem: &LpProblem, status: Status) -> LpSolution {
        if status != Status::Optimal {
            return LpSolution::without_values(status, self.iterations);
        }
        let n = self.n;
        let mut x = Vec::with_capacity(n);
        for (j, v) in problem.vars().iter().enumerate() {
            let val = match self.state[j] {
                VarState::AtLower => v.lower,
                VarState::AtUpper => v.upper,
                VarState::AtZero => 0.0,
                VarState::Basic => (self.x[j] * self.col_scale[j]).clamp(v.lower, v.upper),
            };
            x.push(val);
        }
        let mut cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let mut ys = vec![0.0; self.m];
        self.factor.btran(&mut cb, &mut ys);
        let duals: Vec<f64> = ys.iter().zip(&self.row_scale).map(|(y, r)| y * r).collect();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    (self.cost[j] - self.dot_column(j, &ys)) / self.col_scale[j]
                }
            })
            .collect();
        LpSolution {
            status,
            objective: problem.objective_value(&x),
            x,
            duals,
            reduced_costs,
            iterations: self.iterations,
            milp: None,
        }
    }

    /// Primal values of the structurals in problem units, without clamping.
    pub fn primal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x[j] * self.col_scale[j]).collect()
    }

    /// Objective of the current basic solution in problem units.
    pub fn objective(&self, problem: &LpProblem) -> f64 {
        problem.objective_value(&self.primal())
    }
}
