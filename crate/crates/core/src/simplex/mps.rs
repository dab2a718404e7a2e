//! Free-format MPS export for cross-checking models against external
//! solvers.
//!
//! Rows and columns are emitted in insertion order, numeric values with 17
//! significant digits, so exporting the same problem twice is byte
//! identical. Every column appears in COLUMNS at least through its
//! objective entry, which keeps the column count recoverable by any
//! reader.

use std::fmt::Write as _;

use crate::lp::{LpProblem, RowSense};
use crate::Result;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render `lp` as free-format MPS text.
pub fn export_mps(lp: &LpProblem) -> Result<String> {
    lp.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", sanitize(lp.name()));
    out.push_str("ROWS\n N obj\n");
    for row in lp.rows() {
        let tag = match row.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(out, " {} {}", tag, sanitize(&row.name));
    }

    // Row-major storage transposed once so columns stream in order.
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.n_cols()];
    for (i, row) in lp.rows().iter().enumerate() {
        for &(j, v) in &row.entries {
            col_entries[j].push((i, v));
        }
    }
    out.push_str("COLUMNS\n");
    for j in 0..lp.n_cols() {
        let name = sanitize(lp.col_name(j));
        let _ = writeln!(out, " {} obj {}", name, num(lp.objective()[j]));
        for &(i, v) in &col_entries[j] {
            let _ = writeln!(out, " {} {} {}", name, sanitize(&lp.rows()[i].name), num(v));
        }
    }

    out.push_str("RHS\n");
    for row in lp.rows() {
        if row.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", sanitize(&row.name), num(row.rhs));
        }
    }
    out.push_str("RANGES\n");

    out.push_str("BOUNDS\n");
    for j in 0..lp.n_cols() {
        let name = sanitize(lp.col_name(j));
        let lo = lp.lower()[j];
        let hi = lp.upper()[j];
        if lo == hi {
            let _ = writeln!(out, " FX BND {} {}", name, num(lo));
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND {name}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {name}");
        } else if lo != 0.0 {
            let _ = writeln!(out, " LO BND {} {}", name, num(lo));
        }
        if hi != f64::INFINITY {
            let _ = writeln!(out, " UP BND {} {}", name, num(hi));
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpProblem, RowSense};

    fn min_x_lp() -> LpProblem {
        let mut lp = LpProblem::new("min_x");
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("r0", RowSense::Ge, 3.0, vec![(x, 1.0)]).unwrap();
        lp
    }

    #[test]
    fn golden_min_x() {
        let text = export_mps(&min_x_lp()).unwrap();
        let expected = "NAME min_x\n\
                        ROWS\n \
                        N obj\n \
                        G r0\n\
                        COLUMNS\n \
                        x obj 1.0000000000000000e0\n \
                        x r0 1.0000000000000000e0\n\
                        RHS\n \
                        RHS r0 3.0000000000000000e0\n\
                        RANGES\n\
                        BOUNDS\n\
                        ENDATA\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn export_is_deterministic() {
        let a = export_mps(&min_x_lp()).unwrap();
        let b = export_mps(&min_x_lp()).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn bounds_cover_all_shapes() {
        let mut lp = LpProblem::new("bounds");
        lp.add_col("free", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_col("fixed", 2.0, 2.0, 0.0);
        lp.add_col("lo_up", 1.0, 5.0, 0.0);
        lp.add_col("mi_up", f64::NEG_INFINITY, 5.0, 0.0);
        let c = lp.add_col("plain", 0.0, f64::INFINITY, 0.0);
        lp.add_row("r", RowSense::Le, 1.0, vec![(c, 1.0)]).unwrap();
        let text = export_mps(&lp).unwrap();
        assert!(text.contains(" FR BND free"));
        assert!(text.contains(" FX BND fixed 2.0000000000000000e0"));
        assert!(text.contains(" LO BND lo_up 1.0000000000000000e0"));
        assert!(text.contains(" UP BND lo_up 5.0000000000000000e0"));
        assert!(text.contains(" MI BND mi_up"));
        assert!(!text.contains("BND plain"));
    }
}
