//! Two-phase revised simplex with bounded variables.
//!
//! The problem is standardized as `A x + s = b` with one logical (slack)
//! column per row; slack bounds encode the row sense. Initial infeasibility
//! is absorbed by artificial columns with unit phase-1 cost, which turns
//! phase 1 into an ordinary bounded simplex run with a provable
//! termination argument (Dantzig pricing with a Bland's-rule fallback
//! after a stall). Rows and structural columns are equilibrated with
//! power-of-two scales so scaling introduces no rounding.

use super::factor::{Factorization, FactorizeError, SparseCol};
use super::{SolveOptions, SolveResult, SolveStatus};
use crate::lp::{LpProblem, RowSense};
use crate::{Error, Result};

const INF: f64 = f64::INFINITY;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarStatus {
    Basic(u32),
    AtLower,
    AtUpper,
    FreeZero,
}

enum LoopEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

enum Ratio {
    Flip(f64),
    Pivot { t: f64, pos: usize, to_upper: bool },
    Unbounded,
}

pub(crate) struct Simplex<'a> {
    lp: &'a LpProblem,
    opts: SolveOptions,
    m: usize,
    n_struct: usize,
    cols: Vec<SparseCol>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    obj: Vec<f64>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    first_artificial: usize,

    status: Vec<VarStatus>,
    basis: Vec<usize>,
    x_basic: Vec<f64>,
    factor: Factorization,
    costs: Vec<f64>,

    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    spike: Vec<f64>,
    duals_row: Vec<f64>,

    phase: u8,
    iterations: u64,
    max_iterations: u64,
    cur_obj: f64,
    best_obj: f64,
    stall: u64,
    bland: bool,
    perturbed: bool,
    /// Exact bounds kept aside while the working bounds are widened.
    saved_bounds: Vec<(usize, f64, f64)>,
    price_cursor: usize,
    /// Devex reference weights, one per column.
    devex: Vec<f64>,
    /// Reduced costs for the current phase, maintained incrementally and
    /// recomputed at every refactorization.
    d: Vec<f64>,
    /// Row-major mirror of `cols` for the pivot-row sweep.
    rows_of: Vec<Vec<(u32, f64)>>,
    beta: Vec<f64>,
    beta_mark: Vec<bool>,
    beta_touched: Vec<u32>,
    infeasibility: f64,
    unbounded: Option<(usize, f64, Vec<f64>)>,
    t_btran: std::time::Duration,
    t_price: std::time::Duration,
    t_ftran: std::time::Duration,
    t_refactor: std::time::Duration,
    t_update: std::time::Duration,
}

/// Round `1/x` to the nearest power of two; exact to multiply by.
fn pow2_recip(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return 1.0;
    }
    let e = (-x.log2()).round().clamp(-60.0, 60.0) as i32;
    (e as f64).exp2()
}

impl<'a> Simplex<'a> {
    pub fn new(lp: &'a LpProblem, opts: &SolveOptions) -> Result<Simplex<'a>> {
        lp.validate()?;
        let m = lp.n_rows();
        let n_struct = lp.n_cols();

        // Equilibrate: one row pass, one column pass, powers of two only.
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n_struct];
        if opts.scaling {
            for (i, row) in lp.rows().iter().enumerate() {
                let max = row
                    .entries
                    .iter()
                    .fold(0.0f64, |acc, &(_, v)| acc.max(v.abs()));
                row_scale[i] = pow2_recip(max);
            }
            let mut col_max = vec![0.0f64; n_struct];
            for (i, row) in lp.rows().iter().enumerate() {
                for &(j, v) in &row.entries {
                    col_max[j] = col_max[j].max((v * row_scale[i]).abs());
                }
            }
            for (j, &max) in col_max.iter().enumerate() {
                col_scale[j] = pow2_recip(max);
            }
        }

        // Scaled structural columns, then unit slack columns.
        let mut cols: Vec<SparseCol> = (0..n_struct).map(|_| SparseCol::default()).collect();
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, v) in &row.entries {
                cols[j].push(i, v * row_scale[i] * col_scale[j]);
            }
        }
        let mut lower = Vec::with_capacity(n_struct + m);
        let mut upper = Vec::with_capacity(n_struct + m);
        let mut obj = Vec::with_capacity(n_struct + m);
        for j in 0..n_struct {
            lower.push(lp.lower()[j] / col_scale[j]);
            upper.push(lp.upper()[j] / col_scale[j]);
            obj.push(lp.objective()[j] * col_scale[j]);
        }
        let mut rhs = Vec::with_capacity(m);
        for (i, row) in lp.rows().iter().enumerate() {
            let mut slack = SparseCol::default();
            slack.push(i, 1.0);
            cols.push(slack);
            let (lo, hi) = match row.sense {
                RowSense::Le => (0.0, INF),
                RowSense::Ge => (-INF, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            obj.push(0.0);
            rhs.push(row.rhs * row_scale[i]);
        }

        let max_iterations = if opts.max_iterations > 0 {
            opts.max_iterations
        } else {
            10_000 + 40 * (m as u64 + cols.len() as u64)
        };

        Ok(Simplex {
            lp,
            opts: opts.clone(),
            m,
            n_struct,
            first_artificial: cols.len(),
            cols,
            lower,
            upper,
            obj,
            rhs,
            row_scale,
            col_scale,
            status: Vec::new(),
            basis: Vec::new(),
            x_basic: vec![0.0; m],
            factor: Factorization::new(m),
            costs: Vec::new(),
            work_row: vec![0.0; m],
            work_pos: vec![0.0; m],
            spike: vec![0.0; m],
            duals_row: vec![0.0; m],
            phase: 1,
            iterations: 0,
            max_iterations,
            cur_obj: 0.0,
            best_obj: INF,
            stall: 0,
            bland: false,
            perturbed: false,
            saved_bounds: Vec::new(),
            price_cursor: 0,
            devex: Vec::new(),
            d: Vec::new(),
            rows_of: Vec::new(),
            beta: Vec::new(),
            beta_mark: Vec::new(),
            beta_touched: Vec::new(),
            infeasibility: 0.0,
            unbounded: None,
            t_btran: Default::default(),
            t_price: Default::default(),
            t_ftran: Default::default(),
            t_refactor: Default::default(),
            t_update: Default::default(),
        })
    }

    /// Deterministic fraction in [0, 1) derived from a column id.
    fn hash01(j: usize, salt: u64) -> f64 {
        let mut z = (j as u64).wrapping_add(salt).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z ^= z >> 27;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Anti-degeneracy perturbation: widen every finite working bound by a
    /// tiny deterministic amount. Widening keeps every feasible point
    /// feasible; the exact bounds are restored before results are read.
    fn perturb_bounds(&mut self) {
        if self.perturbed {
            return;
        }
        let scale = 3e-8;
        for j in 0..self.first_artificial.min(self.cols.len()) {
            let lo = self.lower[j];
            let hi = self.upper[j];
            // Pinned columns (equality slacks, retired artificials) may
            // breathe by the perturbation too; they snap back on restore.
            let mut changed = false;
            if lo.is_finite() {
                self.lower[j] = lo - scale * (1.0 + lo.abs()) * (0.5 + Self::hash01(j, 1));
                changed = true;
            }
            if hi.is_finite() {
                self.upper[j] = hi + scale * (1.0 + hi.abs()) * (0.5 + Self::hash01(j, 2));
                changed = true;
            }
            if changed {
                self.saved_bounds.push((j, lo, hi));
            }
        }
        self.perturbed = true;
        if self.opts.log {
            eprintln!("simplex: stall detected, perturbing bounds");
        }
    }

    /// Undo `perturb_bounds`: snap nonbasic variables back to their exact
    /// bounds and recompute basic values. The factorization is unaffected
    /// (bounds do not enter the basis matrix).
    fn restore_bounds(&mut self) {
        if !self.perturbed {
            return;
        }
        for &(j, lo, hi) in &self.saved_bounds {
            self.lower[j] = lo;
            self.upper[j] = hi;
        }
        self.saved_bounds.clear();
        self.perturbed = false;
        self.compute_basic_values();
        self.cur_obj = self.exact_objective();
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.first_artificial
    }

    fn nonbasic_value(&self, col: usize) -> f64 {
        match self.status[col] {
            VarStatus::AtLower => self.lower[col],
            VarStatus::AtUpper => self.upper[col],
            VarStatus::FreeZero => 0.0,
            VarStatus::Basic(pos) => self.x_basic[pos as usize],
        }
    }

    /// Recompute basic values from scratch: `x_B = B^-1 (b - N x_N)`.
    fn compute_basic_values(&mut self) {
        self.work_row.copy_from_slice(&self.rhs);
        for (j, col) in self.cols.iter().enumerate() {
            if matches!(self.status[j], VarStatus::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for (&r, &a) in col.idx.iter().zip(&col.val) {
                    self.work_row[r as usize] -= a * v;
                }
            }
        }
        self.factor.ftran(&mut self.work_row, &mut self.x_basic);
    }

    /// Refactorize the current basis, repairing numerical singularity by
    /// swapping the offending column for the slack of an unreached row.
    fn refactorize(&mut self) -> Result<()> {
        for _ in 0..64 {
            match self.factor.refactorize(&self.cols, &self.basis) {
                Ok(()) => return Ok(()),
                Err(FactorizeError::Singular {
                    position,
                    unpivoted_row,
                }) => {
                    if std::env::var_os("SYNCAP_SOLVE_STATS").is_some() {
                        eprintln!("repair at iter {}", self.iterations);
                    }
                    let displaced = self.basis[position];
                    let slack = self.n_struct + unpivoted_row;
                    if self.opts.log {
                        eprintln!(
                            "simplex: repairing singular basis at position {position} \
                             (column {displaced} out, slack of row {unpivoted_row} in)"
                        );
                    }
                    self.status[displaced] = if self.lower[displaced].is_finite() {
                        VarStatus::AtLower
                    } else if self.upper[displaced].is_finite() {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::FreeZero
                    };
                    if let VarStatus::Basic(other) = self.status[slack] {
                        // The replacement slack was basic elsewhere; hand
                        // its old position the displaced problem to resolve
                        // on the next repair round.
                        self.basis[other as usize] = displaced;
                        self.status[displaced] = VarStatus::Basic(other);
                    }
                    self.basis[position] = slack;
                    self.status[slack] = VarStatus::Basic(position as u32);
                }
            }
        }
        Err(Error::InvalidLp(
            "basis factorization failed beyond repair".into(),
        ))
    }

    fn setup(&mut self) -> Result<()> {
        let n = self.cols.len();
        self.status = Vec::with_capacity(n + 8);
        for j in 0..n {
            let st = if j >= self.n_struct {
                // Slack: bound nearest zero.
                match self.lp.rows()[j - self.n_struct].sense {
                    RowSense::Ge => VarStatus::AtUpper,
                    _ => VarStatus::AtLower,
                }
            } else if self.lower[j].is_finite() && self.upper[j].is_finite() {
                if self.obj[j] >= 0.0 {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            } else if self.lower[j].is_finite() {
                VarStatus::AtLower
            } else if self.upper[j].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::FreeZero
            };
            self.status.push(st);
        }
        self.basis = (0..self.m).map(|i| self.n_struct + i).collect();
        for i in 0..self.m {
            self.status[self.n_struct + i] = VarStatus::Basic(i as u32);
        }
        self.refactorize()?;
        self.compute_basic_values();

        // Absorb bound violations of the initial basis into artificials.
        let ftol = self.opts.feasibility_tol;
        for i in 0..self.m {
            let slack = self.n_struct + i;
            let v = self.x_basic[i];
            let lo = self.lower[slack];
            let hi = self.upper[slack];
            let (bound, to_upper) = if v > hi + ftol * (1.0 + hi.abs()) {
                (hi, true)
            } else if v < lo - ftol * (1.0 + lo.abs()) {
                (lo, false)
            } else {
                continue;
            };
            let resid = v - bound;
            let mut art = SparseCol::default();
            art.push(i, resid.signum());
            self.cols.push(art);
            self.lower.push(0.0);
            self.upper.push(INF);
            self.obj.push(0.0);
            let art_col = self.cols.len() - 1;
            self.status.push(VarStatus::Basic(i as u32));
            self.status[slack] = if to_upper {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            self.basis[i] = art_col;
            self.x_basic[i] = resid.abs();
        }
        if self.cols.len() > self.first_artificial {
            self.refactorize()?;
        }
        self.rows_of = vec![Vec::new(); self.m];
        for (j, col) in self.cols.iter().enumerate() {
            for (&r, &a) in col.idx.iter().zip(&col.val) {
                self.rows_of[r as usize].push((j as u32, a));
            }
        }
        self.beta = vec![0.0; self.cols.len()];
        self.beta_mark = vec![false; self.cols.len()];
        Ok(())
    }

    /// Refresh the reduced-cost array from scratch: `d = c - N^T B^-T c_B`.
    fn recompute_reduced_costs(&mut self) {
        for k in 0..self.m {
            self.work_pos[k] = self.costs[self.basis[k]];
        }
        self.factor.btran(&mut self.work_pos, &mut self.duals_row);
        self.d.clear();
        self.d.resize(self.cols.len(), 0.0);
        for (j, col) in self.cols.iter().enumerate() {
            let mut acc = self.costs[j];
            for (&r, &a) in col.idx.iter().zip(&col.val) {
                acc -= self.duals_row[r as usize] * a;
            }
            self.d[j] = acc;
        }
    }

    fn exact_objective(&self) -> f64 {
        let mut obj = 0.0;
        for (i, &col) in self.basis.iter().enumerate() {
            obj += self.costs[col] * self.x_basic[i];
        }
        for (j, &c) in self.costs.iter().enumerate() {
            if c != 0.0 && !matches!(self.status[j], VarStatus::Basic(_)) {
                obj += c * self.nonbasic_value(j);
            }
        }
        obj
    }

    pub fn run(mut self) -> Result<SolveResult> {
        self.setup()?;
        let n_artificial = self.cols.len() - self.first_artificial;

        if n_artificial > 0 {
            self.phase = 1;
            self.costs = vec![0.0; self.cols.len()];
            for c in &mut self.costs[self.first_artificial..] {
                *c = 1.0;
            }
            match self.iterate()? {
                LoopEnd::IterationLimit => {
                    self.restore_bounds();
                    return self.finish(SolveStatus::IterationLimit);
                }
                LoopEnd::Unbounded => {
                    return Err(Error::InvalidLp(
                        "phase 1 reported unbounded; numerical breakdown".into(),
                    ));
                }
                LoopEnd::Optimal => {}
            }
            let f1 = self.exact_objective();
            let rhs_inf = self.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let f1_tol =
                self.opts.feasibility_tol * (1.0 + rhs_inf) * (self.m as f64).sqrt().max(1.0);
            if f1 > f1_tol {
                self.infeasibility = f1;
                self.restore_bounds();
                return self.finish(SolveStatus::Infeasible);
            }
            self.leave_phase1();
            if std::env::var_os("SYNCAP_SOLVE_STATS").is_some() {
                eprintln!("phase 1 done at iter {}", self.iterations);
            }
        }

        self.phase = 2;
        self.costs = self.obj.clone();
        let end = self.iterate()?;
        self.restore_bounds();
        if std::env::var_os("SYNCAP_SOLVE_STATS").is_some() {
            eprintln!(
                "solve stats: iters={} btran={:?} price={:?} ftran={:?} update={:?} refactor={:?}",
                self.iterations, self.t_btran, self.t_price, self.t_ftran, self.t_update,
                self.t_refactor
            );
        }
        match end {
            LoopEnd::Optimal => self.finish(SolveStatus::Optimal),
            LoopEnd::Unbounded => self.finish(SolveStatus::Unbounded),
            LoopEnd::IterationLimit => self.finish(SolveStatus::IterationLimit),
        }
    }

    /// Pivot basic artificials out where possible, then pin every
    /// artificial to zero for phase 2.
    fn leave_phase1(&mut self) {
        for pos in 0..self.m {
            if !self.is_artificial(self.basis[pos]) {
                continue;
            }
            // rho = (B^-T e_pos): tableau row `pos` over candidate columns.
            self.work_pos.iter_mut().for_each(|v| *v = 0.0);
            self.work_pos[pos] = 1.0;
            self.factor.btran(&mut self.work_pos, &mut self.duals_row);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial {
                if matches!(self.status[j], VarStatus::Basic(_)) || self.lower[j] == self.upper[j]
                {
                    continue;
                }
                let col = &self.cols[j];
                let mut alpha = 0.0;
                for (&r, &a) in col.idx.iter().zip(&col.val) {
                    alpha += self.duals_row[r as usize] * a;
                }
                if best.is_none_or(|(_, b)| alpha.abs() > b.abs()) && alpha.abs() > 1e-7 {
                    best = Some((j, alpha));
                }
            }
            let Some((j, _)) = best else {
                // Row is linearly dependent; the artificial stays basic at
                // zero, pinned by its bounds.
                continue;
            };
            let entering_val = self.nonbasic_value(j);
            self.work_row.iter_mut().for_each(|v| *v = 0.0);
            let col = &self.cols[j];
            for (&r, &a) in col.idx.iter().zip(&col.val) {
                self.work_row[r as usize] = a;
            }
            self.factor.ftran(&mut self.work_row, &mut self.spike);
            let art = self.basis[pos];
            self.status[art] = VarStatus::AtLower;
            self.basis[pos] = j;
            self.status[j] = VarStatus::Basic(pos as u32);
            self.x_basic[pos] = entering_val;
            self.factor.push_eta(pos, &self.spike);
        }
        for a in self.first_artificial..self.cols.len() {
            self.lower[a] = 0.0;
            self.upper[a] = 0.0;
        }
    }

    fn iterate(&mut self) -> Result<LoopEnd> {
        self.cur_obj = self.exact_objective();
        self.best_obj = self.cur_obj;
        self.stall = 0;
        self.bland = false;
        self.devex.clear();
        self.devex.resize(self.cols.len(), 1.0);
        self.recompute_reduced_costs();
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(LoopEnd::IterationLimit);
            }
            if self.factor.should_refactorize() {
                let t = std::time::Instant::now();
                self.refactorize()?;
                self.compute_basic_values();
                self.cur_obj = self.exact_objective();
                self.recompute_reduced_costs();
                self.t_refactor += t.elapsed();
            }

            let t = std::time::Instant::now();
            let picked = self.price();
            self.t_price += t.elapsed();
            let Some((q, dir, d_q)) = picked else {
                return Ok(LoopEnd::Optimal);
            };

            let t = std::time::Instant::now();
            self.work_row.iter_mut().for_each(|v| *v = 0.0);
            let col = &self.cols[q];
            for (&r, &a) in col.idx.iter().zip(&col.val) {
                self.work_row[r as usize] = a;
            }
            self.factor.ftran(&mut self.work_row, &mut self.spike);
            self.t_ftran += t.elapsed();
            let t = std::time::Instant::now();

            match self.ratio_test(q, dir) {
                Ratio::Unbounded => {
                    self.unbounded = Some((q, dir, self.spike.clone()));
                    return Ok(LoopEnd::Unbounded);
                }
                Ratio::Flip(t) => {
                    self.apply_step(t, dir);
                    self.status[q] = match self.status[q] {
                        VarStatus::AtLower => VarStatus::AtUpper,
                        VarStatus::AtUpper => VarStatus::AtLower,
                        other => other,
                    };
                    self.cur_obj += t * dir * d_q;
                }
                Ratio::Pivot { t, pos, to_upper } => {
                    let entering_val = self.nonbasic_value(q) + dir * t;
                    self.apply_step(t, dir);
                    self.pivot_update(q, pos, d_q);
                    let leaving = self.basis[pos];
                    self.status[leaving] = if to_upper {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    if self.phase == 1 && self.is_artificial(leaving) {
                        // Never let a satisfied artificial re-enter.
                        self.lower[leaving] = 0.0;
                        self.upper[leaving] = 0.0;
                        self.status[leaving] = VarStatus::AtLower;
                    }
                    self.basis[pos] = q;
                    self.status[q] = VarStatus::Basic(pos as u32);
                    self.x_basic[pos] = entering_val;
                    self.factor.push_eta(pos, &self.spike);
                    self.cur_obj += t * dir * d_q;
                }
            }

            self.t_update += t.elapsed();
            // Stall detection: first escalate to the anti-degeneracy
            // perturbation, then to Bland's rule, which guarantees
            // termination.
            let improve_eps = 1e-10 * (1.0 + self.best_obj.abs());
            if self.cur_obj < self.best_obj - improve_eps {
                self.best_obj = self.cur_obj;
                self.stall = 0;
                self.bland = false;
            } else {
                self.stall += 1;
                if self.opts.anti_cycling && self.stall > self.opts.stall_iterations {
                    if !self.perturbed {
                        self.perturb_bounds();
                        self.compute_basic_values();
                        self.cur_obj = self.exact_objective();
                        self.best_obj = self.cur_obj;
                        self.stall = 0;
                    } else {
                        self.bland = true;
                    }
                }
            }

            self.iterations += 1;
            if self.opts.log && self.iterations % 1000 == 0 {
                eprintln!(
                    "simplex: phase {} iter {} obj {:.8e}{}",
                    self.phase,
                    self.iterations,
                    self.cur_obj,
                    if self.bland { " [bland]" } else { "" }
                );
            }
        }
    }

    fn apply_step(&mut self, t: f64, dir: f64) {
        if t == 0.0 {
            return;
        }
        let step = t * dir;
        for (i, &w) in self.spike.iter().enumerate() {
            if w != 0.0 {
                self.x_basic[i] -= step * w;
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let col = &self.cols[j];
        let mut acc = self.costs[j];
        for (&r, &a) in col.idx.iter().zip(&col.val) {
            acc -= self.duals_row[r as usize] * a;
        }
        acc
    }

    fn eligibility(&self, j: usize, d: f64) -> Option<f64> {
        let tol = self.opts.optimality_tol * (1.0 + self.costs[j].abs());
        match self.status[j] {
            VarStatus::Basic(_) => None,
            VarStatus::AtLower => (d < -tol).then_some(1.0),
            VarStatus::AtUpper => (d > tol).then_some(-1.0),
            VarStatus::FreeZero => {
                if d < -tol {
                    Some(1.0)
                } else if d > tol {
                    Some(-1.0)
                } else {
                    None
                }
            }
        }
    }

    /// Choose the entering column from the maintained reduced costs:
    /// Devex-weighted scoring, or first-eligible when Bland's rule is
    /// active.
    fn price(&mut self) -> Option<(usize, f64, f64)> {
        let n = self.cols.len();
        if self.bland {
            for j in 0..n {
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                if matches!(self.status[j], VarStatus::Basic(_)) {
                    continue;
                }
                let d = self.d[j];
                if let Some(dir) = self.eligibility(j, d) {
                    return Some((j, dir, d));
                }
            }
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..n {
            if self.lower[j] == self.upper[j] {
                continue;
            }
            if matches!(self.status[j], VarStatus::Basic(_)) {
                continue;
            }
            let d = self.d[j];
            if let Some(dir) = self.eligibility(j, d) {
                let score = d * d / self.devex[j];
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir, d));
                }
            }
        }
        best
    }

    /// Shared post-ratio-test update: computes the pivot row once, then
    /// refreshes the maintained reduced costs and the Devex weights along
    /// its nonzeros. Called before the basis swap, so `basis[pos]` is
    /// still the leaving variable.
    fn pivot_update(&mut self, q: usize, pos: usize, d_q: f64) {
        let alpha_r = self.spike[pos];
        if alpha_r == 0.0 {
            return;
        }
        let theta = d_q / alpha_r;
        let w_q = self.devex[q].max(1.0);
        let ref_ratio = w_q / (alpha_r * alpha_r);
        // rho = B^-T e_pos; beta_j = rho . a_j swept row-wise over the
        // nonzero rows of rho.
        self.work_pos.iter_mut().for_each(|v| *v = 0.0);
        self.work_pos[pos] = 1.0;
        self.factor.btran(&mut self.work_pos, &mut self.duals_row);
        self.beta_touched.clear();
        for (r, &rho_r) in self.duals_row.iter().enumerate() {
            if rho_r == 0.0 {
                continue;
            }
            for &(j, a) in &self.rows_of[r] {
                let j_us = j as usize;
                if self.beta_mark[j_us] {
                    self.beta[j_us] += rho_r * a;
                } else {
                    self.beta_mark[j_us] = true;
                    self.beta[j_us] = rho_r * a;
                    self.beta_touched.push(j);
                }
            }
        }
        let mut w_max = 1.0f64;
        for idx in 0..self.beta_touched.len() {
            let j = self.beta_touched[idx] as usize;
            let b = self.beta[j];
            self.beta[j] = 0.0;
            self.beta_mark[j] = false;
            if b == 0.0 {
                continue;
            }
            self.d[j] -= theta * b;
            if !matches!(self.status[j], VarStatus::Basic(_)) && self.lower[j] != self.upper[j] {
                let cand = b * b * ref_ratio;
                if cand > self.devex[j] {
                    self.devex[j] = cand;
                }
                w_max = w_max.max(self.devex[j]);
            }
        }
        // Exact values for the swap pair.
        self.d[q] = 0.0;
        let leaving = self.basis[pos];
        self.d[leaving] = -theta;
        self.devex[leaving] = ref_ratio.max(1.0);
        // Framework reset keeps the weights bounded.
        if w_max > 1e10 {
            self.devex.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    fn ratio_test(&self, q: usize, dir: f64) -> Ratio {
        let mut t_block = INF;
        let mut blocking: Option<(usize, bool, f64)> = None; // (pos, to_upper, |w|)
        for (i, &w) in self.spike.iter().enumerate() {
            if w.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = dir * w; // x_basic[i] moves by -t * delta
            let b = self.basis[i];
            let (room, to_upper) = if delta > 0.0 {
                let lo = self.lower[b];
                if lo == -INF {
                    continue;
                }
                (self.x_basic[i] - lo, false)
            } else {
                let hi = self.upper[b];
                if hi == INF {
                    continue;
                }
                (hi - self.x_basic[i], true)
            };
            let t_i = (room / delta.abs()).max(0.0);
            let tie = 1e-9 * (1.0 + t_block.min(t_i));
            let better = if t_i < t_block - tie {
                true
            } else if t_i <= t_block + tie {
                match blocking {
                    None => true,
                    Some((pos, _, best_w)) => {
                        if self.bland {
                            self.basis[i] < self.basis[pos]
                        } else {
                            w.abs() > best_w
                        }
                    }
                }
            } else {
                false
            };
            if better {
                t_block = t_block.min(t_i);
                blocking = Some((i, to_upper, w.abs()));
            }
        }
        let t_flip = if self.lower[q].is_finite() && self.upper[q].is_finite() {
            self.upper[q] - self.lower[q]
        } else {
            INF
        };
        if t_flip <= t_block {
            if t_flip == INF {
                return Ratio::Unbounded;
            }
            return Ratio::Flip(t_flip);
        }
        match blocking {
            Some((pos, to_upper, _)) => Ratio::Pivot {
                t: t_block,
                pos,
                to_upper,
            },
            None => Ratio::Unbounded,
        }
    }

    fn finish(mut self, status: SolveStatus) -> Result<SolveResult> {
        let n = self.lp.n_cols();
        let mut primal = vec![0.0; n];
        for (j, value) in primal.iter_mut().enumerate() {
            *value = self.nonbasic_value(j) * self.col_scale[j];
        }

        // Duals and reduced costs under the phase-2 objective.
        self.costs = self.obj.clone();
        for k in 0..self.m {
            self.work_pos[k] = self.costs[self.basis[k]];
        }
        self.factor.btran(&mut self.work_pos, &mut self.duals_row);
        let mut duals = vec![0.0; self.m];
        for i in 0..self.m {
            duals[i] = self.duals_row[i] * self.row_scale[i];
        }
        let mut reduced = vec![0.0; n];
        for (j, slot) in reduced.iter_mut().enumerate() {
            *slot = self.reduced_cost(j) / self.col_scale[j];
        }

        let objective = if status == SolveStatus::Optimal {
            self.lp.objective_value(&primal)
        } else {
            f64::NAN
        };

        // Residuals on the original, unscaled problem.
        let mut max_primal = 0.0f64;
        for row in self.lp.rows() {
            let mut act = 0.0;
            let mut norm = 0.0f64;
            for &(j, a) in &row.entries {
                act += a * primal[j];
                norm = norm.max(a.abs());
            }
            let scale = norm.max(1.0) * (1.0 + row.rhs.abs());
            let viol = match row.sense {
                RowSense::Le => (act - row.rhs).max(0.0),
                RowSense::Ge => (row.rhs - act).max(0.0),
                RowSense::Eq => (act - row.rhs).abs(),
            };
            max_primal = max_primal.max(viol / scale);
        }
        for j in 0..n {
            let scale = 1.0 + primal[j].abs();
            let below = (self.lp.lower()[j] - primal[j]).max(0.0);
            let above = (primal[j] - self.lp.upper()[j]).max(0.0);
            max_primal = max_primal.max(below.max(above) / scale);
        }

        // Dual residual: wrongly signed reduced costs at the final point.
        let mut max_dual = 0.0f64;
        let mut complementarity = 0.0f64;
        if status == SolveStatus::Optimal {
            for j in 0..n {
                let d = reduced[j];
                let scale = 1.0 + self.lp.objective()[j].abs();
                match self.status[j] {
                    VarStatus::Basic(_) => max_dual = max_dual.max(d.abs() / scale),
                    VarStatus::AtLower => max_dual = max_dual.max((-d).max(0.0) / scale),
                    VarStatus::AtUpper => max_dual = max_dual.max(d.max(0.0) / scale),
                    VarStatus::FreeZero => max_dual = max_dual.max(d.abs() / scale),
                }
                let gap_lo = (primal[j] - self.lp.lower()[j]).abs();
                let gap_hi = (self.lp.upper()[j] - primal[j]).abs();
                let dist = match (self.lp.lower()[j].is_finite(), self.lp.upper()[j].is_finite())
                {
                    (true, true) => gap_lo.min(gap_hi),
                    (true, false) => gap_lo,
                    (false, true) => gap_hi,
                    (false, false) => 0.0,
                };
                complementarity = complementarity
                    .max(d.abs() * dist / ((1.0 + d.abs()) * (1.0 + primal[j].abs())));
            }
        }

        // Dual objective for the bounded-variable dual: y b + sum of bound
        // terms picked by the sign of the reduced cost.
        let mut dual_objective = f64::NAN;
        if status == SolveStatus::Optimal {
            let mut acc = 0.0;
            for (row, &y) in self.lp.rows().iter().zip(&duals) {
                acc += y * row.rhs;
            }
            for j in 0..n {
                let d = reduced[j];
                if d > 0.0 && self.lp.lower()[j].is_finite() {
                    acc += d * self.lp.lower()[j];
                } else if d < 0.0 && self.lp.upper()[j].is_finite() {
                    acc += d * self.lp.upper()[j];
                }
            }
            dual_objective = acc;
        }

        let unbounded_ray = self.unbounded.as_ref().map(|(q, dir, spike)| {
            let mut ray = vec![0.0; n];
            if *q < n {
                ray[*q] = dir * self.col_scale[*q];
            }
            for (i, &w) in spike.iter().enumerate() {
                let b = self.basis[i];
                if b < n && w != 0.0 {
                    ray[b] = -dir * w * self.col_scale[b];
                }
            }
            ray
        });

        Ok(SolveResult {
            status,
            primal,
            duals,
            reduced_costs: reduced,
            objective,
            dual_objective,
            iterations: self.iterations,
            max_primal_residual: max_primal,
            max_dual_residual: max_dual,
            complementarity_residual: complementarity,
            infeasibility: self.infeasibility,
            unbounded_ray,
        })
    }
}
