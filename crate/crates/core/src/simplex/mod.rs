//! Sparse bounded-variable LP solving, MPS export, and solution auditing.
//!
//! The solver is a two-phase revised simplex with product-form basis
//! updates (see [`solver`] internals). It is deterministic: identical
//! inputs produce identical outputs, including the pivot sequence.

mod factor;
mod mps;
mod solver;

use std::fmt;

pub use mps::export_mps;

use crate::lp::{LpProblem, RowSense};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solver tunables. Defaults match the documented tolerances.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Scaled primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Relative reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Hard iteration cap; 0 picks an automatic limit from the problem size.
    pub max_iterations: u64,
    /// Switch to Bland's rule after a stall (guarantees termination).
    pub anti_cycling: bool,
    /// Stall length that triggers the anti-cycling switch.
    pub stall_iterations: u64,
    /// Row/column equilibration with power-of-two scales.
    pub scaling: bool,
    /// Stream iteration/objective lines to standard error.
    pub log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-8,
            max_iterations: 0,
            anti_cycling: true,
            stall_iterations: 200,
            scaling: true,
            log: false,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.feasibility_tol > 0.0) || !(self.optimality_tol > 0.0) {
            return Err(Error::invalid_field(
                "solve_options",
                "tolerances must be > 0",
            ));
        }
        Ok(())
    }
}

/// Outcome of a solve. `objective` is NaN unless the status is Optimal;
/// `infeasibility` carries the phase-1 optimum when the status is
/// Infeasible; `unbounded_ray` certifies an Unbounded status.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: u64,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub complementarity_residual: f64,
    pub infeasibility: f64,
    pub unbounded_ray: Option<Vec<f64>>,
}

/// Solve a linear program to optimality.
pub fn solve(lp: &LpProblem, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    solver::Simplex::new(lp, opts)?.run()
}

/// Solve, then re-solve with the objective pinned to its optimum and a
/// 1e-9 penalty per unit on `penalty_cols` (storage throughput, inter-bus
/// transfers). Makes the reported dispatch deterministic across degenerate
/// optima without perturbing the objective beyond 1e-7 relative.
///
/// The returned result carries the second-pass primal point, the
/// first-pass duals, and the objective recomputed against `lp`.
pub fn solve_with_tiebreak(
    lp: &LpProblem,
    penalty_cols: &[usize],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let first = solve(lp, opts)?;
    if first.status != SolveStatus::Optimal || penalty_cols.is_empty() {
        return Ok(first);
    }
    let obj_entries: Vec<(usize, f64)> = lp
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (j, *c))
        .collect();
    if obj_entries.is_empty() {
        return Ok(first);
    }
    let mut second_lp = lp.clone();
    let cap = first.objective + 1e-7 * (1.0 + first.objective.abs());
    second_lp
        .add_row("tiebreak_objective_cap", RowSense::Le, cap, obj_entries)
        .expect("objective row entries are valid");
    for j in 0..second_lp.n_cols() {
        second_lp.set_objective_coef(j, 0.0);
    }
    for &j in penalty_cols {
        second_lp.set_objective_coef(j, 1e-9);
    }
    let mut pass_opts = opts.clone();
    pass_opts.optimality_tol = opts.optimality_tol.min(1e-12);
    let second = solve(&second_lp, &pass_opts)?;
    if second.status != SolveStatus::Optimal {
        return Ok(first);
    }
    let mut out = first;
    out.primal = second.primal;
    out.objective = lp.objective_value(&out.primal);
    out.iterations += second.iterations;
    // Recheck primal residuals for the replacement point on the original lp.
    let audit = audit_solution(lp, &out.primal)?;
    out.max_primal_residual = audit.max_row_violation.max(audit.max_bound_violation);
    Ok(out)
}

/// Residual report for a candidate primal point.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub max_bound_violation: f64,
    /// Worst row violation, each scaled by the row's coefficient inf-norm.
    pub max_row_violation: f64,
    /// Offending rows (name, scaled violation), worst first, capped at 10.
    pub worst_rows: Vec<(String, f64)>,
}

/// Recompute every constraint of `lp` at `primal` and report violations.
pub fn audit_solution(lp: &LpProblem, primal: &[f64]) -> Result<AuditReport> {
    if primal.len() != lp.n_cols() {
        return Err(Error::invalid_field(
            "primal",
            format!("expected {} values, got {}", lp.n_cols(), primal.len()),
        ));
    }
    let mut max_bound = 0.0f64;
    for j in 0..lp.n_cols() {
        let below = (lp.lower()[j] - primal[j]).max(0.0);
        let above = (primal[j] - lp.upper()[j]).max(0.0);
        max_bound = max_bound.max(below).max(above);
    }
    let mut offenders: Vec<(String, f64)> = Vec::new();
    let mut max_row = 0.0f64;
    for row in lp.rows() {
        let mut act = 0.0;
        let mut norm = 0.0f64;
        for &(j, a) in &row.entries {
            act += a * primal[j];
            norm = norm.max(a.abs());
        }
        let norm = if norm > 0.0 { norm } else { 1.0 };
        let viol = match row.sense {
            RowSense::Le => (act - row.rhs).max(0.0),
            RowSense::Ge => (row.rhs - act).max(0.0),
            RowSense::Eq => (act - row.rhs).abs(),
        } / norm;
        if viol > 0.0 {
            offenders.push((row.name.clone(), viol));
        }
        max_row = max_row.max(viol);
    }
    offenders.sort_by(|a, b| b.1.total_cmp(&a.1));
    offenders.truncate(10);
    Ok(AuditReport {
        max_bound_violation: max_bound,
        max_row_violation: max_row,
        worst_rows: offenders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpProblem, RowSense};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn minimize_x_with_row_bound() {
        let mut lp = LpProblem::new("min_x");
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("r0", RowSense::Ge, 3.0, vec![(x, 1.0)]).unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-9);
        assert!((res.primal[x] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LpProblem::new("infeas");
        let x = lp.add_col("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("ge1", RowSense::Ge, 1.0, vec![(x, 1.0)]).unwrap();
        lp.add_row("le0", RowSense::Le, 0.0, vec![(x, 1.0)]).unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        assert!(res.infeasibility > 1e-6, "{}", res.infeasibility);
    }

    #[test]
    fn unbounded_below_detected_with_ray() {
        let mut lp = LpProblem::new("unbounded");
        let x = lp.add_col("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_col("y", 0.0, f64::INFINITY, 0.0);
        lp.add_row("r", RowSense::Le, 5.0, vec![(x, 1.0), (y, 1.0)])
            .unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Unbounded);
        let ray = res.unbounded_ray.expect("ray certifies unboundedness");
        // Objective decreases along the ray and the row stays feasible.
        let c_dot: f64 = ray[x].mul_add(1.0, 0.0);
        assert!(c_dot < -1e-9);
        assert!(ray[x] + ray[y] <= 1e-9);
    }

    #[test]
    fn bounded_box_no_rows() {
        let mut lp = LpProblem::new("box");
        lp.add_col("a", -2.0, 7.0, 1.0);
        lp.add_col("b", -1.0, 4.0, -2.0);
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - (-2.0 - 8.0)).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x + 2y  s.t.  x + y = 4, x - y = 1, both free.
        let mut lp = LpProblem::new("eq");
        let x = lp.add_col("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_col("y", f64::NEG_INFINITY, f64::INFINITY, 2.0);
        lp.add_row("sum", RowSense::Eq, 4.0, vec![(x, 1.0), (y, 1.0)])
            .unwrap();
        lp.add_row("diff", RowSense::Eq, 1.0, vec![(x, 1.0), (y, -1.0)])
            .unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.primal[x] - 2.5).abs() < 1e-9);
        assert!((res.primal[y] - 1.5).abs() < 1e-9);
        assert!((res.objective - 5.5).abs() < 1e-9);
    }

    #[test]
    fn duality_gap_is_tight() {
        let mut lp = LpProblem::new("gap");
        let x = lp.add_col("x", 0.0, 10.0, 3.0);
        let y = lp.add_col("y", 0.0, 10.0, 5.0);
        lp.add_row("r1", RowSense::Ge, 8.0, vec![(x, 1.0), (y, 2.0)])
            .unwrap();
        lp.add_row("r2", RowSense::Ge, 6.0, vec![(x, 2.0), (y, 1.0)])
            .unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(
            (res.objective - res.dual_objective).abs() <= 1e-6 * (1.0 + res.objective.abs()),
            "primal {} dual {}",
            res.objective,
            res.dual_objective
        );
    }

    #[test]
    fn audit_zero_on_feasible_and_exact_on_perturbed() {
        let mut lp = LpProblem::new("audit");
        let x = lp.add_col("x", 0.0, 10.0, 1.0);
        lp.add_row("fix", RowSense::Eq, 4.0, vec![(x, 1.0)]).unwrap();
        let clean = audit_solution(&lp, &[4.0]).unwrap();
        assert_eq!(clean.max_row_violation, 0.0);
        assert_eq!(clean.max_bound_violation, 0.0);
        assert!(clean.worst_rows.is_empty());

        let bad = audit_solution(&lp, &[4.1]).unwrap();
        assert!((bad.max_row_violation - 0.1).abs() < 1e-12);
        assert_eq!(bad.worst_rows[0].0, "fix");
    }

    #[test]
    fn audit_rejects_wrong_length() {
        let mut lp = LpProblem::new("len");
        lp.add_col("x", 0.0, 1.0, 0.0);
        assert!(audit_solution(&lp, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn scaling_invariance_row_times_ten() {
        let build = |scale: f64| {
            let mut lp = LpProblem::new("scaled");
            let x = lp.add_col("x", 0.0, f64::INFINITY, 2.0);
            let y = lp.add_col("y", 0.0, f64::INFINITY, 3.0);
            lp.add_row(
                "r1",
                RowSense::Ge,
                7.0 * scale,
                vec![(x, 1.0 * scale), (y, 1.0 * scale)],
            )
            .unwrap();
            lp.add_row("r2", RowSense::Ge, 4.0, vec![(x, 2.0), (y, 1.0)])
                .unwrap();
            lp
        };
        let a = solve(&build(1.0), &opts()).unwrap();
        let b = solve(&build(10.0), &opts()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-8);
        for j in 0..2 {
            assert!((a.primal[j] - b.primal[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn beale_cycling_instance_terminates_optimal() {
        // Beale's classic degenerate example; naive Dantzig pricing can
        // cycle on it. The stall-triggered Bland switch must terminate.
        let mut lp = LpProblem::new("beale");
        let x1 = lp.add_col("x1", 0.0, f64::INFINITY, -0.75);
        let x2 = lp.add_col("x2", 0.0, f64::INFINITY, 150.0);
        let x3 = lp.add_col("x3", 0.0, f64::INFINITY, -0.02);
        let x4 = lp.add_col("x4", 0.0, f64::INFINITY, 6.0);
        lp.add_row(
            "r1",
            RowSense::Le,
            0.0,
            vec![(x1, 0.25), (x2, -60.0), (x3, -0.04), (x4, 9.0)],
        )
        .unwrap();
        lp.add_row(
            "r2",
            RowSense::Le,
            0.0,
            vec![(x1, 0.5), (x2, -90.0), (x3, -0.02), (x4, 3.0)],
        )
        .unwrap();
        lp.add_row("r3", RowSense::Le, 1.0, vec![(x3, 1.0)]).unwrap();
        let res = solve(&lp, &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - (-0.05)).abs() < 1e-9, "{}", res.objective);
    }

    #[test]
    fn tiebreak_removes_simultaneous_flows() {
        // Two routes a, b with identical cost move one unit; a third
        // wasteful circulation w is free. The plain optimum may carry w;
        // the tie-break pass must zero it.
        let mut lp = LpProblem::new("tiebreak");
        let a = lp.add_col("a", 0.0, f64::INFINITY, 1.0);
        let b = lp.add_col("b", 0.0, f64::INFINITY, 1.0);
        let w = lp.add_col("w", 0.0, 5.0, 0.0);
        lp.add_row("demand", RowSense::Eq, 1.0, vec![(a, 1.0), (b, 1.0)])
            .unwrap();
        let res = solve_with_tiebreak(&lp, &[w], &opts()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 1.0).abs() < 1e-9);
        assert!(res.primal[w].abs() < 1e-9);
    }

    #[test]
    fn iteration_limit_is_a_status_not_an_error() {
        let mut lp = LpProblem::new("limit");
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_col("y", 0.0, f64::INFINITY, 1.0);
        lp.add_row("r", RowSense::Ge, 2.0, vec![(x, 1.0), (y, 1.0)])
            .unwrap();
        let limited = SolveOptions {
            max_iterations: 1,
            ..SolveOptions::default()
        };
        let res = solve(&lp, &limited).unwrap();
        assert_eq!(res.status, SolveStatus::IterationLimit);
        assert!(res.objective.is_nan());
    }

    #[test]
    fn determinism_same_input_same_output() {
        let mut lp = LpProblem::new("det");
        let x = lp.add_col("x", 0.0, 9.0, 1.5);
        let y = lp.add_col("y", 0.0, 9.0, 1.0);
        let z = lp.add_col("z", 0.0, 9.0, 2.0);
        lp.add_row("r1", RowSense::Ge, 5.0, vec![(x, 1.0), (y, 1.0), (z, 1.0)])
            .unwrap();
        lp.add_row("r2", RowSense::Le, 12.0, vec![(x, 2.0), (y, 3.0), (z, 1.0)])
            .unwrap();
        let a = solve(&lp, &opts()).unwrap();
        let b = solve(&lp, &opts()).unwrap();
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.iterations, b.iterations);
    }
}
