//! Writer for the CPLEX LP text format, for cross-checking with other solvers.

use std::fmt::Write;

use crate::problem::{LpProblem, RowSense};

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else if first {
        let _ = write!(out, " {} {}", coef, name);
    } else {
        let _ = write!(out, " + {} {}", coef, name);
    }
}

/// Renders the problem as CPLEX LP text.
pub fn to_lp_string(problem: &LpProblem) -> String {
    let names: Vec<String> = problem.vars().iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (v, name) in problem.vars().iter().zip(&names) {
        if v.cost != 0.0 {
            term(&mut out, first, v.cost, name);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    if problem.objective_offset != 0.0 {
        let _ = write!(out, " + {} constant", problem.objective_offset);
    }
    out.push_str("\nSubject To\n");
    for r in problem.rows() {
        let _ = write!(out, " {}:", sanitize(&r.name));
        let mut first = true;
        for &(v, a) in &r.coeffs {
            term(&mut out, first, a, &names[v.0]);
            first = false;
        }
        if first {
            out.push_str(" 0 constant");
        }
        let sense = match r.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", sense, r.rhs);
    }
    out.push_str("Bounds\n");
    if problem.objective_offset != 0.0 {
        out.push_str(" constant = 1\n");
    }
    for (v, name) in problem.vars().iter().zip(&names) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {}", v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", v.lower);
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
            }
        }
    }
    let bins: Vec<&String> = problem
        .vars()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.integer)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}
