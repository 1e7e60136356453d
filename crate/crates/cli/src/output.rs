//! Field CSVs and run summaries.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use mfg_congestion::MFGSolution;
use serde::Serialize;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `t, x[, y], u, m, b_x[, b_y], w_x[, w_y]`, one row per space-time node.
pub fn fields_csv(sol: &MFGSolution) -> String {
    let grid = *sol.m.grid();
    let time = *sol.m.time();
    let (n, d) = (grid.len(), grid.dim());
    let w = sol.momentum();
    let axes = ["x", "y"];
    let mut out = String::from("t");
    for a in &axes[..d] {
        write!(out, ",{a}").unwrap();
    }
    out.push_str(",u,m");
    for prefix in ["b", "w"] {
        for a in &axes[..d] {
            write!(out, ",{prefix}_{a}").unwrap();
        }
    }
    out.push('\n');
    for k in 0..=time.steps() {
        let t = num(time.t(k));
        let (u, m, b, wk) = (sol.u.at(k), sol.m.at(k), sol.drift.at(k), w.at(k));
        for i in 0..n {
            let x = grid.point(i);
            out.push_str(&t);
            for xa in &x[..d] {
                write!(out, ",{}", num(*xa)).unwrap();
            }
            write!(out, ",{},{}", num(u[i]), num(m[i])).unwrap();
            for field in [b, wk] {
                for a in 0..d {
                    write!(out, ",{}", num(field[a * n + i])).unwrap();
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_fields(dir: &Path, sol: &MFGSolution) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("fields.csv"), fields_csv(sol))
}

/// Structured-text summary assembled section by section.
#[derive(Default)]
pub struct Summary {
    table: toml::Table,
}

impl Summary {
    pub fn new(command: &str, status: &str) -> Self {
        let mut table = toml::Table::new();
        table.insert("command".into(), command.into());
        table.insert("status".into(), status.into());
        Self { table }
    }

    pub fn set_status(&mut self, status: &str) {
        self.table.insert("status".into(), status.into());
    }

    pub fn section<T: Serialize>(&mut self, name: &str, value: &T) {
        match toml::Value::try_from(value) {
            Ok(v) => {
                self.table.insert(name.into(), v);
            }
            Err(e) => {
                self.table.insert(name.into(), format!("unserializable: {e}").into());
            }
        }
    }

    pub fn text(&mut self, name: &str, value: impl Into<String>) {
        self.table.insert(name.into(), toml::Value::String(value.into()));
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = toml::to_string(&self.table).map_err(io::Error::other)?;
        std::fs::write(dir.join("summary.toml"), text)
    }
}
