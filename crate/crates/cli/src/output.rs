//! Table and plot-data writers for convergence studies.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use vkctrl_core::convergence::{Column, EocTable};

use crate::config::Formats;

/// Column groups of the two tables: energy errors and controls in one, lower-order
/// state/adjoint norms in the other.
pub const CONTROL_TABLE: [Column; 5] =
    [Column::StateEnergy, Column::AdjointEnergy, Column::ControlL2, Column::PostprocessedL2, Column::CentroidL2];
pub const STATE_TABLE: [Column; 4] = [Column::StateH1, Column::StateL2, Column::AdjointH1, Column::AdjointL2];

/// Eight significant digits.
pub fn sig8(v: f64) -> String {
    format!("{v:.7e}")
}

fn eoc_cell(v: Option<f64>) -> String {
    v.map(sig8).unwrap_or_default()
}

pub fn csv(table: &EocTable, cols: &[Column]) -> String {
    let mut s = String::from("N,h_over_h0");
    for c in cols {
        let _ = write!(s, ",{0},eoc_{0}", c.name());
    }
    s.push('\n');
    let eocs: Vec<_> = cols.iter().map(|&c| table.eoc(c)).collect();
    for (i, r) in table.records.iter().enumerate() {
        let _ = write!(s, "{},{}", r.n_free, sig8(r.h_ratio));
        for (k, &c) in cols.iter().enumerate() {
            let _ = write!(s, ",{},{}", sig8(r.get(c)), eoc_cell(eocs[k][i]));
        }
        s.push('\n');
    }
    s
}

pub fn markdown(title: &str, table: &EocTable, cols: &[Column]) -> String {
    let mut s = format!("### {title}\n\n| N | h/h0 |");
    for c in cols {
        let _ = write!(s, " {} | EOC |", c.name());
    }
    s.push_str("\n|---:|---:|");
    for _ in cols {
        s.push_str("---:|---:|");
    }
    s.push('\n');
    let eocs: Vec<_> = cols.iter().map(|&c| table.eoc(c)).collect();
    for (i, r) in table.records.iter().enumerate() {
        let _ = write!(s, "| {} | {} |", r.n_free, sig8(r.h_ratio));
        for (k, &c) in cols.iter().enumerate() {
            let e = eocs[k][i].map_or_else(|| "–".to_string(), |v| format!("{v:.3}"));
            let _ = write!(s, " {} | {} |", sig8(r.get(c)), e);
        }
        s.push('\n');
    }
    s
}

/// Two columns, `h/h0` and the error.
pub fn dat(table: &EocTable, col: Column) -> String {
    let mut s = format!("# h_over_h0 {}\n", col.name());
    for r in &table.records {
        let _ = writeln!(s, "{} {}", sig8(r.h_ratio), sig8(r.get(col)));
    }
    s
}

/// Writes the selected formats into `dir`; returns the written paths in a fixed order.
pub fn write_study(dir: &Path, case: &str, table: &EocTable, formats: Formats) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> io::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let tables = [("table_control", &CONTROL_TABLE[..]), ("table_state", &STATE_TABLE[..])];
    for (name, cols) in tables {
        if formats.csv {
            put(format!("{name}.csv"), csv(table, cols))?;
        }
        if formats.md {
            put(format!("{name}.md"), markdown(&format!("{case}: {name}"), table, cols))?;
        }
    }
    if formats.dat {
        for (_, cols) in tables {
            for &c in cols {
                put(format!("{}.dat", c.name()), dat(table, c))?;
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vkctrl_core::convergence::{ErrorRecord, NormSet};

    fn rec(level: u32, e: f64) -> ErrorRecord {
        let ns = NormSet { l2: e, h1: e, h2_semi: e };
        ErrorRecord {
            level,
            n_free: 4 * ((1usize << (level + 1)) - 1).pow(2),
            h_ratio: 0.5f64.powi(level as i32),
            state: ns,
            adjoint: ns,
            control_l2: e,
            postprocessed_l2: e,
            centroid_l2: e,
            outer_iterations: 1,
            newton_iterations: 1,
            seconds: 0.0,
        }
    }

    #[test]
    fn csv_layout() {
        let t = EocTable { records: vec![rec(1, 4.0), rec(2, 1.0)] };
        let s = csv(&t, &STATE_TABLE);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "N,h_over_h0,state_h1,eoc_state_h1,state_l2,eoc_state_l2,adjoint_h1,eoc_adjoint_h1,adjoint_l2,eoc_adjoint_l2");
        assert!(lines[1].starts_with("36,5.0000000e-1,4.0000000e0,,"));
        assert!(lines[2].starts_with("196,2.5000000e-1,1.0000000e0,2.0000000e0,"));
    }

    #[test]
    fn markdown_marks_undefined() {
        let t = EocTable { records: vec![rec(1, 4.0), rec(2, 1.0)] };
        let s = markdown("x", &t, &CONTROL_TABLE);
        assert!(s.contains("| – |"));
        assert!(s.contains("| 2.000 |"));
    }

    #[test]
    fn sig8_digits() {
        assert_eq!(sig8(0.10369078), "1.0369078e-1");
    }
}
