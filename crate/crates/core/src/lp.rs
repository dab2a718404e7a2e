//! Sparse standard-form linear program with bounded variables.
//!
//! Rows are stored sparsely as `(column, coefficient)` lists with a sense
//! and right-hand side; columns carry bounds and objective coefficients.
//! Every model entity keeps a name so solutions, MPS exports, and audits
//! stay navigable.

use std::collections::HashMap;

use crate::{Error, Result};

/// Row sense of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
    /// Sorted by column index, duplicate-free.
    pub entries: Vec<(usize, f64)>,
}

/// A minimization LP.
#[derive(Debug, Clone)]
pub struct LpProblem {
    name: String,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    col_names: Vec<String>,
    rows: Vec<Row>,
    col_index: HashMap<String, usize>,
    row_index: HashMap<String, usize>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> LpProblem {
        LpProblem {
            name: name.into(),
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            col_names: Vec::new(),
            rows: Vec::new(),
            col_index: HashMap::new(),
            row_index: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Add a column with bounds and objective coefficient; returns its id.
    pub fn add_col(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> usize {
        let name = name.into();
        debug_assert!(
            !self.col_index.contains_key(&name),
            "duplicate column name {name}"
        );
        let id = self.objective.len();
        self.col_index.insert(name.clone(), id);
        self.col_names.push(name);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(objective);
        id
    }

    /// Add a row. Entries are sorted by column; duplicate columns or
    /// references to nonexistent columns are rejected.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: RowSense,
        rhs: f64,
        mut entries: Vec<(usize, f64)>,
    ) -> Result<usize> {
        let name = name.into();
        entries.sort_unstable_by_key(|(c, _)| *c);
        if entries.is_empty() {
            return Err(Error::InvalidLp(format!("row `{name}` has no entries")));
        }
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidLp(format!(
                    "row `{name}` references column {} twice",
                    pair[0].0
                )));
            }
        }
        if let Some((c, _)) = entries.iter().find(|(c, _)| *c >= self.n_cols()) {
            return Err(Error::InvalidLp(format!(
                "row `{name}` references nonexistent column {c}"
            )));
        }
        let id = self.rows.len();
        self.row_index.insert(name.clone(), id);
        self.rows.push(Row {
            name,
            sense,
            rhs,
            entries,
        });
        Ok(id)
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn col_name(&self, col: usize) -> &str {
        &self.col_names[col]
    }

    pub fn col_id(&self, name: &str) -> Option<usize> {
        self.col_index.get(name).copied()
    }

    pub fn row_id(&self, name: &str) -> Option<usize> {
        self.row_index.get(name).copied()
    }

    pub fn set_objective_coef(&mut self, col: usize, coef: f64) {
        self.objective[col] = coef;
    }

    /// Overwrite a column's bounds (used to pin first-stage decisions).
    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    /// Objective value of a candidate point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Structural validity: finite coefficients, consistent bounds, rows
    /// referencing valid columns.
    pub fn validate(&self) -> Result<()> {
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > hi {
                return Err(Error::InvalidLp(format!(
                    "column `{}` has lower {lo} > upper {hi}",
                    self.col_names[j]
                )));
            }
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidLp(format!(
                    "column `{}` has NaN bound",
                    self.col_names[j]
                )));
            }
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidLp(format!(
                "non-finite objective coefficient {c}"
            )));
        }
        for row in &self.rows {
            if row.entries.is_empty() {
                return Err(Error::InvalidLp(format!("row `{}` is empty", row.name)));
            }
            if !row.rhs.is_finite() {
                return Err(Error::InvalidLp(format!(
                    "row `{}` has non-finite rhs",
                    row.name
                )));
            }
            for &(c, v) in &row.entries {
                if c >= self.n_cols() {
                    return Err(Error::InvalidLp(format!(
                        "row `{}` references nonexistent column {c}",
                        row.name
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidLp(format!(
                        "row `{}` has non-finite coefficient on column {c}",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_entries() {
        let mut lp = LpProblem::new("t");
        let x = lp.add_col("x", 0.0, 1.0, 1.0);
        let err = lp
            .add_row("r", RowSense::Le, 1.0, vec![(x, 1.0), (x, 2.0)])
            .unwrap_err();
        assert!(err.to_string().contains("twice"));
    }

    #[test]
    fn rejects_bad_column_reference() {
        let mut lp = LpProblem::new("t");
        lp.add_col("x", 0.0, 1.0, 1.0);
        assert!(lp.add_row("r", RowSense::Le, 1.0, vec![(3, 1.0)]).is_err());
    }

    #[test]
    fn validate_checks_bounds() {
        let mut lp = LpProblem::new("t");
        lp.add_col("x", 2.0, 1.0, 0.0);
        assert!(lp.validate().is_err());
    }

    #[test]
    fn name_lookup() {
        let mut lp = LpProblem::new("t");
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        let r = lp.add_row("r", RowSense::Ge, 3.0, vec![(x, 1.0)]).unwrap();
        assert_eq!(lp.col_id("x"), Some(x));
        assert_eq!(lp.row_id("r"), Some(r));
        assert_eq!(lp.col_id("y"), None);
    }
}
