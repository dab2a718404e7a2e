//! Basis factorization for the revised simplex method.
//!
//! The basis is factorized right-looking with Markowitz pivoting under a
//! threshold-pivoting stability rule, which keeps fill-in near zero on the
//! banded, storage-chained bases these energy models produce. Between
//! refactorizations, pivots are absorbed as product-form eta vectors; the
//! eta file is flushed on a refactorization schedule to bound growth.

/// One column of the constraint matrix in compressed form.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseCol {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseCol {
    pub fn push(&mut self, row: usize, value: f64) {
        if value != 0.0 {
            self.idx.push(row as u32);
            self.val.push(value);
        }
    }
}

/// Product-form update: `B_new = B_old * E` where `E` is the identity with
/// column `pos` replaced by the entering spike `w`.
struct Eta {
    pos: usize,
    diag: f64,
    /// Off-diagonal spike entries `(position, w_i)`, `position != pos`.
    entries: Vec<(u32, f64)>,
}

pub(crate) struct Factorization {
    m: usize,
    /// Pivot position -> original row.
    pivot_row: Vec<usize>,
    /// Original row -> pivot position (usize::MAX while unpivoted).
    row_pos: Vec<usize>,
    /// Pivot step -> basis slot of the column eliminated at that step.
    slot: Vec<usize>,
    /// L multipliers per pivot step, flat arena indexed by `l_off`:
    /// (original row, value).
    l_store: Vec<(u32, f64)>,
    l_off: Vec<u32>,
    /// U rows per pivot step, flat arena indexed by `u_off`:
    /// (pivot step > k, value).
    u_store: Vec<(u32, f64)>,
    u_off: Vec<u32>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,

    // Active-submatrix scratch for refactorize(), kept in flat arenas
    // with slack capacity per column/row so the hot loops stay
    // cache-friendly across the ~m pivot steps.
    a_store: Vec<(u32, f64)>,
    a_start: Vec<u32>,
    a_len: Vec<u32>,
    a_cap: Vec<u32>,
    r_store: Vec<(u32, f64)>,
    r_start: Vec<u32>,
    r_len: Vec<u32>,
    r_cap: Vec<u32>,
    col_count: Vec<u32>,
    row_count: Vec<u32>,
    col_pos: Vec<usize>,
    buckets: Vec<Vec<u32>>,
    work: Vec<f64>,
    marked: Vec<bool>,
    touched: Vec<u32>,
    col_stamp: Vec<u64>,
    stamp: u64,
}

pub(crate) enum FactorizeError {
    /// No usable pivot remains; the basis is (numerically) singular.
    /// `unpivoted_row` is a row the factorization never reached, usable
    /// for a slack-column repair.
    Singular {
        position: usize,
        unpivoted_row: usize,
    },
}

/// Absolute floor below which a value cannot pivot.
const PIVOT_ABS_TOL: f64 = 1e-10;
/// Threshold-pivoting factor: a pivot must reach this fraction of its
/// column's largest active magnitude.
const PIVOT_REL_TOL: f64 = 0.05;
/// Markowitz search examines at most this many candidate columns.
const SEARCH_LIMIT: usize = 8;

impl Factorization {
    pub fn new(m: usize) -> Self {
        Factorization {
            m,
            pivot_row: Vec::new(),
            row_pos: vec![usize::MAX; m],
            slot: Vec::new(),
            l_store: Vec::new(),
            l_off: vec![0],
            u_store: Vec::new(),
            u_off: vec![0],
            u_diag: Vec::new(),
            etas: Vec::new(),
            eta_nnz: 0,
            a_store: Vec::new(),
            a_start: Vec::new(),
            a_len: Vec::new(),
            a_cap: Vec::new(),
            r_store: Vec::new(),
            r_start: Vec::new(),
            r_len: Vec::new(),
            r_cap: Vec::new(),
            col_count: Vec::new(),
            row_count: Vec::new(),
            col_pos: Vec::new(),
            buckets: Vec::new(),
            work: vec![0.0; m],
            marked: vec![false; m],
            touched: Vec::new(),
            col_stamp: vec![0; m],
            stamp: 0,
        }
    }

    /// Factorize the basis given by `basis` (column ids into `cols`).
    pub fn refactorize(
        &mut self,
        cols: &[SparseCol],
        basis: &[usize],
    ) -> Result<(), FactorizeError> {
        let m = self.m;
        debug_assert_eq!(basis.len(), m);
        let t_start = std::time::Instant::now();
        self.pivot_row.clear();
        self.row_pos.clear();
        self.row_pos.resize(m, usize::MAX);
        self.slot.clear();
        self.l_store.clear();
        self.l_off.clear();
        self.l_off.push(0);
        self.u_store.clear();
        self.u_off.clear();
        self.u_off.push(0);
        self.u_diag.clear();
        self.etas.clear();
        self.eta_nnz = 0;

        // Working copy of the basis matrix plus row patterns and counts.
        self.col_count.clear();
        self.col_count.resize(m, 0);
        self.row_count.clear();
        self.row_count.resize(m, 0);
        self.col_pos.clear();
        self.col_pos.resize(m, usize::MAX);

        const SPARE: u32 = 4;
        self.a_start.clear();
        self.a_len.clear();
        self.a_cap.clear();
        let mut a_total = 0u32;
        for &col_id in basis {
            let len = cols[col_id].idx.len() as u32;
            self.a_start.push(a_total);
            self.a_len.push(0);
            self.a_cap.push(len + SPARE);
            a_total += len + SPARE;
        }
        self.a_store.clear();
        self.a_store.resize(a_total as usize, (0, 0.0));
        for (k, &col_id) in basis.iter().enumerate() {
            let col = &cols[col_id];
            for (&r, &v) in col.idx.iter().zip(&col.val) {
                self.a_store[(self.a_start[k] + self.a_len[k]) as usize] = (r, v);
                self.a_len[k] += 1;
                self.row_count[r as usize] += 1;
            }
            self.col_count[k] = self.a_len[k];
        }
        self.r_start.clear();
        self.r_len.clear();
        self.r_cap.clear();
        let mut r_total = 0u32;
        for &count in self.row_count.iter() {
            self.r_start.push(r_total);
            self.r_len.push(0);
            self.r_cap.push(count + SPARE);
            r_total += count + SPARE;
        }
        self.r_store.clear();
        self.r_store.resize(r_total as usize, (0, 0.0));
        for k in 0..m {
            let start = self.a_start[k] as usize;
            for idx in 0..self.a_len[k] as usize {
                let (r, v) = self.a_store[start + idx];
                let r = r as usize;
                self.r_store[(self.r_start[r] + self.r_len[r]) as usize] = (k as u32, v);
                self.r_len[r] += 1;
            }
        }

        for b in &mut self.buckets {
            b.clear();
        }
        for k in 0..m {
            let c = self.col_count[k] as usize;
            if self.buckets.len() <= c {
                self.buckets.resize(c + 1, Vec::new());
            }
            self.buckets[c].push(k as u32);
        }

        let t_build = t_start.elapsed();
        let mut t_search = std::time::Duration::ZERO;
        let mut t_lx = std::time::Duration::ZERO;
        let mut t_pat = std::time::Duration::ZERO;
        let mut pat_entries = 0u64;
        let compact_work = 0u64;
        for step in 0..m {
            let t_fp = std::time::Instant::now();
            let found = self.find_pivot();
            t_search += t_fp.elapsed();
            let Some((pi, pj, pval)) = found else {
                let unpivoted_row = (0..m)
                    .find(|&r| self.row_pos[r] == usize::MAX)
                    .expect("fewer than m pivots placed");
                let unpivoted_slot = (0..m)
                    .find(|&j| self.col_pos[j] == usize::MAX)
                    .expect("fewer than m columns eliminated");
                let _ = step;
                return Err(FactorizeError::Singular {
                    position: unpivoted_slot,
                    unpivoted_row,
                });
            };
            self.row_pos[pi] = step;
            self.col_pos[pj] = step;
            self.pivot_row.push(pi);
            self.slot.push(pj);
            self.u_diag.push(pval);

            // L multipliers from the pivot column's other active rows.
            let t_l = std::time::Instant::now();
            let l_start = self.l_store.len();
            let pj_start = self.a_start[pj] as usize;
            for idx in 0..self.a_len[pj] as usize {
                let (r, v) = self.a_store[pj_start + idx];
                let r_us = r as usize;
                if r_us != pi && self.row_pos[r_us] == usize::MAX && v != 0.0 {
                    self.l_store.push((r, v / pval));
                    self.row_count[r_us] -= 1;
                }
            }
            let l_end = self.l_store.len();
            self.l_off.push(l_end as u32);
            t_lx += t_l.elapsed();
            let t_p = std::time::Instant::now();

            // U row and right-looking elimination of the pivot row's
            // other active columns. U entries reference column ids here
            // and are remapped to pivot steps afterwards. Without L
            // multipliers there is no arithmetic to do; the pivot row's
            // entry is retired lazily.
            self.stamp += 1;
            let pat_start = self.r_start[pi] as usize;
            for idx in 0..self.r_len[pi] as usize {
                let (kcol, pivot_row_val) = self.r_store[pat_start + idx];
                let kcol_us = kcol as usize;
                if kcol_us == pj || self.col_pos[kcol_us] != usize::MAX {
                    continue;
                }
                if self.col_stamp[kcol_us] == self.stamp {
                    continue; // duplicate pattern entry after a cancellation
                }
                self.col_stamp[kcol_us] = self.stamp;
                if pivot_row_val == 0.0 {
                    continue;
                }
                self.u_store.push((kcol, pivot_row_val));
                if l_start == l_end {
                    // No multipliers: the pivot row's entry just retires
                    // (lazily) from the column.
                    let c = (self.col_count[kcol_us].max(1) - 1) as usize;
                    self.col_count[kcol_us] = c as u32;
                    if self.buckets.len() <= c {
                        self.buckets.resize(c + 1, Vec::new());
                    }
                    self.buckets[c].push(kcol);
                } else {
                    self.eliminate_column(kcol_us, pi, l_start, l_end, pivot_row_val);
                }
            }
            self.u_off.push(self.u_store.len() as u32);
            t_pat += t_p.elapsed();
            pat_entries += self.r_len[pi] as u64;
        }

        // Remap U entries from column ids to pivot steps.
        for entry in &mut self.u_store {
            entry.0 = self.col_pos[entry.0 as usize] as u32;
        }
        if std::env::var_os("SYNCAP_LU_STATS").is_some() {
            eprintln!(
                "refactor m={} lnnz={} unnz={} build={:?} search={:?} lx={:?} pat={:?} pe={} cw={} total={:?}",
                m,
                self.l_store.len(),
                self.u_store.len(),
                t_build,
                t_search,
                t_lx,
                t_pat,
                pat_entries,
                compact_work,
                t_start.elapsed()
            );
        }
        Ok(())
    }

    /// Subtract `pivot_row_val * l` from column `kcol` along the pivot
    /// column pattern, dropping the pivot row and any retired rows.
    fn eliminate_column(
        &mut self,
        kcol: usize,
        pivot_row: usize,
        l_start: usize,
        l_end: usize,
        pivot_row_val: f64,
    ) {
        self.touched.clear();
        let start = self.a_start[kcol] as usize;
        for idx in 0..self.a_len[kcol] as usize {
            let (r, v) = self.a_store[start + idx];
            let r_us = r as usize;
            if r_us == pivot_row || self.row_pos[r_us] != usize::MAX {
                continue; // lazily retired entry
            }
            self.work[r_us] = v;
            self.marked[r_us] = true;
            self.touched.push(r);
        }
        let old_count = self.touched.len();
        for l_idx in l_start..l_end {
            let (r, l) = self.l_store[l_idx];
            let r_us = r as usize;
            if self.marked[r_us] {
                self.work[r_us] -= l * pivot_row_val;
            } else {
                self.work[r_us] = -l * pivot_row_val;
                self.marked[r_us] = true;
                self.touched.push(r);
            }
        }
        // Write the rebuilt column back, relocating its slot if the fill
        // outgrew the reserved capacity, and mirror the new values into
        // the row patterns.
        if self.touched.len() > self.a_cap[kcol] as usize {
            let new_cap = self.touched.len() + 8;
            self.a_start[kcol] = self.a_store.len() as u32;
            self.a_cap[kcol] = new_cap as u32;
            self.a_store.resize(self.a_store.len() + new_cap, (0, 0.0));
        }
        let start = self.a_start[kcol] as usize;
        let mut cursor = 0;
        for idx in 0..self.touched.len() {
            let r = self.touched[idx];
            let r_us = r as usize;
            let v = self.work[r_us];
            self.work[r_us] = 0.0;
            self.marked[r_us] = false;
            if v != 0.0 {
                self.a_store[start + cursor] = (r, v);
                cursor += 1;
            }
            if idx < old_count {
                self.row_set(r_us, kcol as u32, v);
            } else if v != 0.0 {
                self.row_upsert(r_us, kcol as u32, v);
                self.row_count[r_us] += 1;
            }
        }
        self.a_len[kcol] = cursor as u32;
        self.col_count[kcol] = cursor as u32;
        if self.buckets.len() <= cursor {
            self.buckets.resize(cursor + 1, Vec::new());
        }
        self.buckets[cursor].push(kcol as u32);
    }

    /// Update the mirrored value of an existing row-pattern entry.
    fn row_set(&mut self, r: usize, col: u32, val: f64) {
        let start = self.r_start[r] as usize;
        let len = self.r_len[r] as usize;
        for entry in &mut self.r_store[start..start + len] {
            if entry.0 == col {
                entry.1 = val;
                return;
            }
        }
        debug_assert!(false, "row {r} lost its pattern entry for column {col}");
    }

    /// Insert a fill entry into a row pattern, reusing a cancelled slot if
    /// one exists, relocating the row's arena slot when capacity runs out.
    fn row_upsert(&mut self, r: usize, col: u32, val: f64) {
        let start = self.r_start[r] as usize;
        let len = self.r_len[r] as usize;
        for entry in &mut self.r_store[start..start + len] {
            if entry.0 == col {
                entry.1 = val;
                return;
            }
        }
        if len == self.r_cap[r] as usize {
            let new_cap = len * 2 + 4;
            let new_start = self.r_store.len();
            self.r_store.extend_from_within(start..start + len);
            self.r_store.resize(new_start + new_cap, (0, 0.0));
            self.r_start[r] = new_start as u32;
            self.r_cap[r] = new_cap as u32;
        }
        self.r_store[self.r_start[r] as usize + len] = (col, val);
        self.r_len[r] += 1;
    }

    /// Markowitz pivot search with threshold pivoting: scan columns from
    /// the sparsest bucket upward, examine a bounded number of candidates,
    /// and pick the lowest (r-1)(c-1) cost among stable entries.
    fn find_pivot(&mut self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        let mut best_cost = u64::MAX;
        let mut examined = 0usize;
        for count in 1..self.buckets.len() {
            let mut idx = 0;
            while idx < self.buckets[count].len() {
                let j = self.buckets[count][idx] as usize;
                // Lazy bucket maintenance: drop stale entries for good.
                if self.col_pos[j] != usize::MAX || self.col_count[j] as usize != count {
                    self.buckets[count].swap_remove(idx);
                    continue;
                }
                idx += 1;
                let col =
                    &self.a_store[self.a_start[j] as usize..][..self.a_len[j] as usize];
                let mut col_max = 0.0f64;
                for &(r, v) in col {
                    if self.row_pos[r as usize] == usize::MAX {
                        col_max = col_max.max(v.abs());
                    }
                }
                if col_max <= PIVOT_ABS_TOL {
                    continue;
                }
                let threshold = (col_max * PIVOT_REL_TOL).max(PIVOT_ABS_TOL);
                let mut local: Option<(usize, f64)> = None;
                let mut local_cost = u64::MAX;
                for &(r, v) in col {
                    let r_us = r as usize;
                    if self.row_pos[r_us] != usize::MAX || v.abs() < threshold {
                        continue;
                    }
                    let cost =
                        (count as u64 - 1) * (self.row_count[r_us].saturating_sub(1)) as u64;
                    let better = match local {
                        None => true,
                        Some((lr, lv)) => {
                            cost < local_cost
                                || (cost == local_cost
                                    && (v.abs() > lv.abs()
                                        || (v.abs() == lv.abs() && r_us < lr)))
                        }
                    };
                    if better {
                        local = Some((r_us, v));
                        local_cost = cost;
                    }
                }
                if let Some((r, v)) = local {
                    if local_cost < best_cost
                        || (local_cost == best_cost
                            && best.is_none_or(|(_, _, bv)| v.abs() > bv.abs()))
                    {
                        best = Some((r, j, v));
                        best_cost = local_cost;
                    }
                    examined += 1;
                    if best_cost == 0 || examined >= SEARCH_LIMIT {
                        return best;
                    }
                }
            }
            // A full sparser bucket has been searched; anything in denser
            // buckets can only tie on cost, so stop once we hold a pivot.
            if best.is_some() {
                return best;
            }
        }
        best
    }

    /// Solve `B z = b`. `b` arrives dense in row space and is consumed;
    /// the result lands in `out` indexed by basis slot.
    pub fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let t = b[self.pivot_row[k]];
            if t != 0.0 {
                for &(r, lv) in &self.l_store[self.l_off[k] as usize..self.l_off[k + 1] as usize]
                {
                    b[r as usize] -= lv * t;
                }
            }
        }
        // Gather zeroes b entirely (every row hosts exactly one pivot),
        // freeing it as scratch for the step -> slot permutation below.
        for k in 0..m {
            out[k] = b[self.pivot_row[k]];
            b[self.pivot_row[k]] = 0.0;
        }
        for k in (0..m).rev() {
            let mut acc = out[k];
            for &(p, uv) in &self.u_store[self.u_off[k] as usize..self.u_off[k + 1] as usize] {
                acc -= uv * out[p as usize];
            }
            out[k] = acc / self.u_diag[k];
        }
        for k in 0..m {
            b[self.slot[k]] = out[k];
        }
        out.copy_from_slice(b);
        for v in b.iter_mut() {
            *v = 0.0;
        }
        for eta in &self.etas {
            let z = out[eta.pos] / eta.diag;
            out[eta.pos] = z;
            if z != 0.0 {
                for &(i, wv) in &eta.entries {
                    out[i as usize] -= wv * z;
                }
            }
        }
    }

    /// Solve `B^T w = c`. `c` arrives dense in basis-slot space and is
    /// consumed; the result lands in `out` indexed by original row.
    pub fn btran(&self, c: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.pos];
            for &(i, wv) in &eta.entries {
                acc -= wv * c[i as usize];
            }
            c[eta.pos] = acc / eta.diag;
        }
        // Permute slot space -> elimination-step space, borrowing `out`
        // as scratch before it takes the row-space result.
        for k in 0..m {
            out[k] = c[self.slot[k]];
        }
        c.copy_from_slice(out);
        // U^T forward solve in step space (scatter form).
        for k in 0..m {
            let v = c[k] / self.u_diag[k];
            c[k] = v;
            if v != 0.0 {
                for &(p, uv) in &self.u_store[self.u_off[k] as usize..self.u_off[k + 1] as usize]
                {
                    c[p as usize] -= uv * v;
                }
            }
        }
        for row in out.iter_mut() {
            *row = 0.0;
        }
        for k in 0..m {
            out[self.pivot_row[k]] = c[k];
            c[k] = 0.0;
        }
        // Transposed L passes in reverse order.
        for k in (0..m).rev() {
            let mut acc = out[self.pivot_row[k]];
            for &(r, lv) in &self.l_store[self.l_off[k] as usize..self.l_off[k + 1] as usize] {
                acc -= lv * out[r as usize];
            }
            out[self.pivot_row[k]] = acc;
        }
    }

    /// Record a basis change: the column whose ftran spike is `w` replaces
    /// the basic variable at `pos`.
    pub fn push_eta(&mut self, pos: usize, w: &[f64]) {
        let mut entries = Vec::new();
        for (i, &v) in w.iter().enumerate() {
            if i != pos && v != 0.0 {
                entries.push((i as u32, v));
            }
        }
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            diag: w[pos],
            entries,
        });
    }

    /// Whether the eta file has grown enough to warrant refactorization.
    pub fn should_refactorize(&self) -> bool {
        self.etas.len() >= 40 || self.eta_nnz > 8 * self.m.max(64)
    }
}
