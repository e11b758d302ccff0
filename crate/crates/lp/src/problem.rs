//! Problem description: variables, rows and integrality marks.

use std::collections::HashMap;
use std::fmt;

use crate::error::LpError;

/// Handle to a column of an [`LpProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Handle to a row of an [`LpProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    /// Binary mark. Only meaningful to [`crate::solve_milp`].
    pub integer: bool,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A minimisation problem `min c'x  s.t.  a_i x (<=|=|>=) b_i,  l <= x <= u`.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    var_names: HashMap<String, VarId>,
    row_names: HashMap<String, RowId>,
    /// Constant added to the objective value (does not affect the optimum).
    pub objective_offset: f64,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn row(&self, id: RowId) -> &Row {
        &self.rows[id.0]
    }

    /// Adds a continuous column. Names must be unique.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Result<VarId, LpError> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || !cost.is_finite() {
            return Err(LpError::NonFinite(name));
        }
        if lower > upper {
            return Err(LpError::InconsistentBounds { name, lower, upper });
        }
        let id = VarId(self.vars.len());
        if self.var_names.insert(name.clone(), id).is_some() {
            return Err(LpError::DuplicateName(name));
        }
        self.vars.push(Variable {
            name,
            lower,
            upper,
            cost,
            integer: false,
        });
        Ok(id)
    }

    /// Adds a `{0, 1}` column.
    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> Result<VarId, LpError> {
        let id = self.add_var(name, 0.0, 1.0, cost)?;
        self.vars[id.0].integer = true;
        Ok(id)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: &[(VarId, f64)],
        sense: RowSense,
        rhs: f64,
    ) -> Result<RowId, LpError> {
        let name = name.into();
        if !rhs.is_finite() || coeffs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(LpError::NonFinite(name));
        }
        if let Some((v, _)) = coeffs.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(LpError::UnknownVar(v.0));
        }
        // merge duplicate columns so the matrix stays canonical
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(coeffs.len());
        for &(v, a) in coeffs {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        let id = RowId(self.rows.len());
        if self.row_names.insert(name.clone(), id).is_some() {
            return Err(LpError::DuplicateName(name));
        }
        self.rows.push(Row {
            name,
            coeffs: merged,
            sense,
            rhs,
        });
        Ok(id)
    }

    pub fn set_integer(&mut self, id: VarId, integer: bool) {
        self.vars[id.0].integer = integer;
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), LpError> {
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(LpError::InconsistentBounds {
                name: self.vars[id.0].name.clone(),
                lower,
                upper,
            });
        }
        self.vars[id.0].lower = lower;
        self.vars[id.0].upper = upper;
        Ok(())
    }

    /// Fixes a column to a value (both bounds).
    pub fn fix_var(&mut self, id: VarId, value: f64) -> Result<(), LpError> {
        self.set_bounds(id, value, value)
    }

    pub fn set_cost(&mut self, id: VarId, cost: f64) {
        self.vars[id.0].cost = cost;
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.row_names.get(name).copied()
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// Copy of the problem with every integrality mark removed.
    pub fn relaxation(&self) -> LpProblem {
        let mut p = self.clone();
        for v in &mut p.vars {
            v.integer = false;
        }
        p
    }

    /// Structural check of the invariants the solvers rely on.
    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.vars {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::InconsistentBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if !v.cost.is_finite() {
                return Err(LpError::NonFinite(v.name.clone()));
            }
            if v.integer && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(LpError::NonBinaryInteger(v.name.clone()));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(LpError::NonFinite(r.name.clone()));
            }
        }
        Ok(())
    }

    /// Row activity `a_i x` for every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum())
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum::<f64>()
    }
}
