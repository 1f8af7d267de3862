//! Snapshot, diagnostics and sweep CSV files.

use std::fs;
use std::path::Path;

use super::{format_number, write_atomic};
use crate::error::{Error, Result};
use crate::sim::{DiagnosticsRecord, SimState, SweepRow};

pub const SWEEP_HEADER: &str = "eps_or_omega,penalty_flux,leakage_cells,leakage_chem,sum_drift";

/// Column names of a snapshot for grid dimension `dim`.
pub fn snapshot_header(dim: usize) -> Vec<&'static str> {
    let mut h = vec!["x", "y"];
    if dim == 3 {
        h.push("z");
    }
    h.extend(["phi", "P", "Q", "D", "C", "W", "vx", "vy"]);
    if dim == 3 {
        h.push("vz");
    }
    h.push("sigma");
    h
}

pub(crate) fn push_row(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(',');
        }
        out.push_str(&format_number(v));
        first = false;
    }
    out.push('\n');
}

pub fn snapshot_csv(state: &SimState) -> String {
    let g = *state.grid();
    let dim = g.dim();
    let mut s = String::with_capacity(g.len() * 160);
    s.push_str(&snapshot_header(dim).join(","));
    s.push('\n');
    let mut row = Vec::with_capacity(16);
    for i in 0..g.len() {
        row.clear();
        let x = g.coords(i);
        row.extend_from_slice(&x[..dim]);
        row.push(state.ls.phi()[i]);
        row.extend([state.cells.p[i], state.cells.q[i], state.cells.d[i], state.chem.c[i], state.chem.w[i]]);
        for a in 0..dim {
            row.push(state.flow.v.comp(a)[i]);
        }
        row.push(state.flow.sigma[i]);
        push_row(&mut s, row.iter().copied());
    }
    s
}

/// One row per node in storage order (x fastest).
pub fn write_snapshot(state: &SimState, path: &Path) -> Result<()> {
    write_atomic(path, snapshot_csv(state).as_bytes())
}

/// Parsed CSV table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", k + 2))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(bad(format!("line {}: {} fields, expected {}", k + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_snapshot(path: &Path) -> Result<Table> {
    let t = read_table(path)?;
    let dim = if t.header.iter().any(|h| h == "z") { 3 } else { 2 };
    if t.header != snapshot_header(dim) {
        return Err(Error::Parse { path: path.to_path_buf(), msg: format!("unexpected header {:?}", t.header) });
    }
    Ok(t)
}

pub fn diagnostics_csv(series: &[DiagnosticsRecord]) -> String {
    let mut s = DiagnosticsRecord::COLUMNS.join(",");
    s.push('\n');
    for r in series {
        push_row(&mut s, r.values());
    }
    s
}

pub fn write_diagnostics(series: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_atomic(path, diagnostics_csv(series).as_bytes())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let t = read_table(path)?;
    if t.header.iter().map(String::as_str).ne(DiagnosticsRecord::COLUMNS.iter().copied()) {
        return Err(Error::Parse { path: path.to_path_buf(), msg: "diagnostics header mismatch".into() });
    }
    Ok(t.rows.iter().map(|r| DiagnosticsRecord::from_values(r).expect("width checked")).collect())
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        push_row(&mut s, [r.value, r.penalty_flux, r.leakage_cells, r.leakage_chem, r.sum_drift]);
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let t = read_table(path)?;
    if t.header.join(",") != SWEEP_HEADER {
        return Err(Error::Parse { path: path.to_path_buf(), msg: "sweep header mismatch".into() });
    }
    Ok(t.rows
        .iter()
        .map(|r| SweepRow { value: r[0], penalty_flux: r[1], leakage_cells: r[2], leakage_chem: r[3], sum_drift: r[4] })
        .collect())
}
