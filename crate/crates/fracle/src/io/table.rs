//! Named-column tables as CSV (17 significant digits) plus a JSON twin.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::blowup::SweepRow;
use crate::error::{Error, Result};
use crate::hls::FreeField;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_full(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty table".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
        let mut t = Table {
            columns,
            rows: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::Format(format!("line {}: malformed number '{c}'", i + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            t.push(row).map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        }
        Ok(t)
    }
}

/// 17 significant digits, which round-trips every f64.
pub fn fmt_full(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn json_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (CSV) and the same payload with `metadata` next to it as JSON.
pub fn write_table(table: &Table, path: &Path, metadata: &serde_json::Value) -> Result<()> {
    fs::write(path, table.to_csv())?;
    let payload = serde_json::json!({
        "columns": table.columns,
        "rows": table.rows,
        "metadata": metadata,
    });
    let text = serde_json::to_string_pretty(&payload).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(json_path(path), text + "\n")?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::from_csv(&fs::read_to_string(path)?)
}

/// eps, q, alpha, beta, lambda, x_c0.., theta, S_Omega, energy, lam_dist,
/// lam_pow_eps, boundary_sup, max_green_dev.
pub fn sweep_table(rows: &[SweepRow], n: usize) -> Table {
    let mut cols: Vec<String> = ["eps", "q", "alpha", "beta", "lambda"].iter().map(|c| c.to_string()).collect();
    cols.extend((0..n).map(|i| format!("x_c{i}")));
    cols.extend(
        ["theta", "S_Omega", "energy", "lam_dist", "lam_pow_eps", "boundary_sup", "max_green_dev"]
            .iter()
            .map(|c| c.to_string()),
    );
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for r in rows {
        let mut v = vec![r.eps, r.q, r.alpha, r.beta, r.lambda];
        v.extend(&r.x_c);
        v.extend([r.theta, r.s_omega, r.energy, r.lam_dist, r.lam_pow_eps, r.boundary_sup, r.max_green_dev]);
        t.rows.push(v);
    }
    t
}

/// Per-row, per-point ratios to the predicted kernel multiples; NaN where
/// a kernel value was unresolved.
pub fn green_table(rows: &[SweepRow]) -> Table {
    let points = rows.first().map_or(0, |r| r.ring_u.len());
    let mut cols = vec!["eps".to_string()];
    for i in 0..points {
        cols.push(format!("u_ratio{i}"));
    }
    for i in 0..points {
        cols.push(format!("v_ratio{i}"));
    }
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for r in rows {
        let mut v = vec![r.eps];
        v.extend(r.green.u_ratio.iter().map(|x| x.unwrap_or(f64::NAN)));
        v.extend(r.green.v_ratio.iter().map(|x| x.unwrap_or(f64::NAN)));
        t.rows.push(v);
    }
    t
}

/// r_inner, r_outer, r_mean, mean, min, max, count per shell of width 2h.
pub fn radial_profile_table(f: &FreeField) -> Table {
    let mut t = Table::new(&["r_inner", "r_outer", "r_mean", "mean", "min", "max", "count"]);
    for s in f.radial_profile() {
        t.rows
            .push(vec![s.r_inner, s.r_outer, s.r_mean, s.mean, s.min, s.max, s.count as f64]);
    }
    t
}
