//! Best-first branch-and-bound over binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use log::debug;

use crate::error::LpError;
use crate::problem::LpProblem;
use crate::simplex::{Basis, Simplex};
use crate::solution::{LpSolution, MilpReport, Status};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct MilpOptions {
    /// Prune when `bound >= incumbent - max(abs_gap, rel_gap * |incumbent|)`.
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub node_limit: usize,
    /// Run a rounding dive from the root relaxation to seed an incumbent.
    pub dive: bool,
    /// Also dive from every `dive_every`-th node; 0 disables.
    pub dive_every: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            rel_gap: 1e-6,
            abs_gap: 1e-9,
            node_limit: 20_000,
            dive: true,
            dive_every: 100,
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
    warm: Arc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

#[derive(Clone, Copy)]
enum Dive {
    /// Round the least fractional binary to its nearest value.
    Nearest,
    /// Fix the binary closest to one upward.
    Up,
}

struct Search<'a> {
    problem: &'a LpProblem,
    lp: Simplex,
    ints: Vec<usize>,
    base: Vec<(f64, f64)>,
    incumbent: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for (k, &j) in self.ints.iter().enumerate() {
            let (l, u) = self.base[k];
            self.lp.set_bounds(j, l, u);
        }
        for &(j, v) in fixings {
            self.lp.set_bounds(j, v, v);
        }
    }

    fn solve_node(&mut self, fixings: &[(usize, f64)], warm: &Basis) -> Result<Status, LpError> {
        self.apply(fixings);
        self.lp.restore(warm)?;
        self.lp.solve()
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.ints {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > INT_TOL && best.is_none_or(|(_, d)| dist > d) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }

    fn offer(&mut self, x: &[f64]) {
        let mut x = x.to_vec();
        for &j in &self.ints {
            x[j] = x[j].round();
        }
        let obj = self.problem.objective_value(&x);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            debug!("new incumbent {obj}");
            self.incumbent = Some((obj, x));
        }
    }

    fn cutoff(&self, opts: &MilpOptions) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - opts.abs_gap.max(opts.rel_gap * obj.abs()),
            None => f64::INFINITY,
        }
    }

    /// Fixes one fractional binary at a time until the relaxation is
    /// integral. An infeasible fixing is flipped once before the dive gives up.
    fn dive(&mut self, start: &[(usize, f64)], warm: &Basis, opts: &MilpOptions, rule: Dive) -> Result<(), LpError> {
        let mut fixings = start.to_vec();
        let mut warm = warm.clone();
        let mut flipped = false;
        for _ in 0..=2 * self.ints.len() {
            let st = self.solve_node(&fixings, &warm)?;
            if st != Status::Optimal {
                if flipped || fixings.len() == start.len() {
                    return Ok(());
                }
                let last = fixings.len() - 1;
                fixings[last].1 = 1.0 - fixings[last].1;
                flipped = true;
                continue;
            }
            if self.lp.objective(self.problem) >= self.cutoff(opts) {
                return Ok(());
            }
            let x = self.lp.primal();
            let mut pick: Option<(usize, f64)> = None;
            for &j in &self.ints {
                let f = x[j] - x[j].floor();
                if f <= INT_TOL || f >= 1.0 - INT_TOL {
                    continue;
                }
                // smaller is better
                let score = match rule {
                    Dive::Nearest => f.min(1.0 - f),
                    Dive::Up => 1.0 - f,
                };
                if pick.is_none_or(|(_, d)| score < d) {
                    pick = Some((j, score));
                }
            }
            let Some((j, _)) = pick else {
                self.offer(&x);
                return Ok(());
            };
            warm = self.lp.snapshot();
            let v = match rule {
                Dive::Nearest => x[j].round(),
                Dive::Up => 1.0,
            };
            fixings.push((j, v));
            flipped = false;
        }
        Ok(())
    }
}

/// Solves a problem whose integer marks are all binaries.
pub fn solve_milp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_milp_with(problem, &MilpOptions::default())
}

pub fn solve_milp_with(problem: &LpProblem, opts: &MilpOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let ints: Vec<usize> = problem
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer)
        .map(|(j, _)| j)
        .collect();
    let base: Vec<(f64, f64)> = ints
        .iter()
        .map(|&j| (problem.vars()[j].lower, problem.vars()[j].upper))
        .collect();
    let mut lp = Simplex::new(problem)?;
    let root_status = lp.solve()?;
    if root_status != Status::Optimal {
        let mut sol = LpSolution::without_values(root_status, lp.iterations);
        sol.milp = Some(MilpReport {
            nodes: 1,
            best_bound: f64::NAN,
            gap: f64::NAN,
            node_limit_hit: false,
            root_bound: f64::NAN,
        });
        return Ok(sol);
    }
    let root_bound = lp.objective(problem);
    let root_basis = Arc::new(lp.snapshot());
    let mut search = Search {
        problem,
        lp,
        ints,
        base,
        incumbent: None,
    };
    let root_x = search.lp.primal();
    if search.most_fractional(&root_x).is_none() {
        search.offer(&root_x);
    } else if opts.dive {
        search.dive(&[], &root_basis, opts, Dive::Up)?;
        search.dive(&[], &root_basis, opts, Dive::Nearest)?;
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    if let Some(j) = search.most_fractional(&root_x) {
        for v in [0.0, 1.0] {
            heap.push(Node {
                bound: root_bound,
                id: next_id,
                fixings: vec![(j, v)],
                warm: Arc::clone(&root_basis),
            });
            next_id += 1;
        }
    }
    let mut nodes = 1usize;
    let mut limit_hit = false;
    let mut open_bound: Option<f64> = None;
    while let Some(node) = heap.pop() {
        if node.bound >= search.cutoff(opts) {
            // best-first: every remaining node is at least as bad
            open_bound = Some(node.bound);
            break;
        }
        if nodes >= opts.node_limit {
            limit_hit = true;
            open_bound = Some(node.bound);
            break;
        }
        nodes += 1;
        let st = search.solve_node(&node.fixings, &node.warm)?;
        if st != Status::Optimal {
            continue;
        }
        let obj = search.lp.objective(problem);
        if obj >= search.cutoff(opts) {
            continue;
        }
        let x = search.lp.primal();
        let Some(j) = search.most_fractional(&x) else {
            search.offer(&x);
            continue;
        };
        let warm = Arc::new(search.lp.snapshot());
        if opts.dive && opts.dive_every > 0 && nodes % opts.dive_every == 0 {
            search.dive(&node.fixings, &warm, opts, Dive::Nearest)?;
        }
        for v in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((j, v));
            heap.push(Node {
                bound: obj,
                id: next_id,
                fixings,
                warm: Arc::clone(&warm),
            });
            next_id += 1;
        }
    }
    let best_bound = open_bound.unwrap_or(f64::INFINITY);
    let iterations = search.lp.iterations;
    debug!("branch-and-bound: {nodes} nodes, {iterations} iterations");
    let Some((objective, x)) = search.incumbent else {
        let mut sol = LpSolution::without_values(Status::Infeasible, iterations);
        sol.milp = Some(MilpReport {
            nodes,
            best_bound,
            gap: f64::INFINITY,
            node_limit_hit: limit_hit,
            root_bound,
        });
        return Ok(sol);
    };
    let best_bound = best_bound.min(objective);
    Ok(LpSolution {
        status: Status::Optimal,
        x,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        objective,
        iterations,
        milp: Some(MilpReport {
            nodes,
            best_bound,
            gap: objective - best_bound,
            node_limit_hit: limit_hit,
            root_bound,
        }),
    })
}
