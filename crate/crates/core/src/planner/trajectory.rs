//! Solved trajectories and their file formats.
//!
//! CSV: header `t,q_0..,dq_0..,ddq_0..,tau_0..`, one row per state.
//! JSON: every field of [`Trajectory`], including link twists,
//! accelerations and wrenches. Plot data: whitespace-separated columns
//! `t q_* tau_*` with a `#` header, readable by gnuplot.

use crate::error::{Error, Result};
use crate::error::GraphError;
use crate::graph::{VariableKey, VariableValues};
use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qd: Vec<DVector<f64>>,
    pub qdd: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
    #[serde(default)]
    pub twists: Vec<Vec<Vector6<f64>>>,
    #[serde(default)]
    pub accels: Vec<Vec<Vector6<f64>>>,
    #[serde(default)]
    pub wrenches: Vec<Vec<Vector6<f64>>>,
}

impl Trajectory {
    pub fn from_values(values: &VariableValues, times: &[f64], dof: usize) -> Result<Self, GraphError> {
        let col = |f: fn(usize, usize) -> VariableKey, i: usize| -> Result<DVector<f64>, GraphError> {
            (0..dof).map(|j| values.scalar(&f(j, i))).collect::<Result<Vec<_>, _>>().map(DVector::from_vec)
        };
        let links = |f: fn(usize, usize) -> VariableKey, i: usize| -> Result<Vec<Vector6<f64>>, GraphError> {
            (0..dof).map(|j| values.at(&f(j, i)).map(|v| Vector6::from_column_slice(v.as_slice()))).collect()
        };
        let mut t = Trajectory {
            times: times.to_vec(),
            q: vec![],
            qd: vec![],
            qdd: vec![],
            tau: vec![],
            twists: vec![],
            accels: vec![],
            wrenches: vec![],
        };
        for i in 0..times.len() {
            t.q.push(col(VariableKey::q, i)?);
            t.qd.push(col(VariableKey::v, i)?);
            t.qdd.push(col(VariableKey::a, i)?);
            t.tau.push(col(VariableKey::torque, i)?);
            t.twists.push(links(VariableKey::twist, i)?);
            t.accels.push(links(VariableKey::accel, i)?);
            t.wrenches.push(links(VariableKey::wrench, i)?);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |q| q.len())
    }

    /// `Σ_i Σ_j |τ_ij|` over every state.
    pub fn total_abs_torque(&self) -> f64 {
        self.tau.iter().map(|t| t.iter().map(|x| x.abs()).sum::<f64>()).sum()
    }

    /// Checks that lengths agree and times strictly increase.
    pub fn check_shape(&self) -> Result<()> {
        let n = self.len();
        let d = self.dof();
        let rows = [&self.q, &self.qd, &self.qdd, &self.tau];
        if rows.iter().any(|r| r.len() != n || r.iter().any(|v| v.len() != d)) {
            return Err(Error::Config("trajectory columns have inconsistent lengths".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("trajectory times must strictly increase".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let d = self.dof();
        let mut out = String::from("t");
        for prefix in ["q", "dq", "ddq", "tau"] {
            for j in 0..d {
                write!(out, ",{prefix}_{j}").unwrap();
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{}", self.times[i]).unwrap();
            for col in [&self.q, &self.qd, &self.qdd, &self.tau] {
                for x in col[i].iter() {
                    write!(out, ",{x}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form; link quantities are left empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty trajectory file".into()))?.split(',').map(str::trim).collect();
        if header.first() != Some(&"t") || (header.len() - 1) % 4 != 0 {
            return Err(Error::Config("trajectory header must be t,q_*,dq_*,ddq_*,tau_*".into()));
        }
        let d = (header.len() - 1) / 4;
        for (b, prefix) in ["q", "dq", "ddq", "tau"].iter().enumerate() {
            for j in 0..d {
                let want = format!("{prefix}_{j}");
                if header[1 + b * d + j] != want {
                    return Err(Error::Config(format!("trajectory header column {} should be {want}", 1 + b * d + j)));
                }
            }
        }
        let mut t = Trajectory { times: vec![], q: vec![], qd: vec![], qdd: vec![], tau: vec![], twists: vec![], accels: vec![], wrenches: vec![] };
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Config(format!("trajectory row {}: {e}", row + 1)))?;
            if vals.len() != header.len() {
                return Err(Error::Config(format!("trajectory row {} has {} columns, expected {}", row + 1, vals.len(), header.len())));
            }
            t.times.push(vals[0]);
            let block = |b: usize| DVector::from_column_slice(&vals[1 + b * d..1 + (b + 1) * d]);
            t.q.push(block(0));
            t.qd.push(block(1));
            t.qdd.push(block(2));
            t.tau.push(block(3));
        }
        t.check_shape()?;
        Ok(t)
    }

    pub fn to_plot_data(&self) -> String {
        let d = self.dof();
        let mut out = String::from("# t");
        for j in 0..d {
            write!(out, " q_{j}").unwrap();
        }
        for j in 0..d {
            write!(out, " tau_{j}").unwrap();
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{:.9}", self.times[i]).unwrap();
            for x in self.q[i].iter().chain(self.tau[i].iter()) {
                write!(out, " {x:.9}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Writes JSON for `.json` paths and CSV otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?
        } else {
            self.to_csv()
        };
        write_text(path, &text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            let t: Trajectory = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            t.check_shape()?;
            t
        } else {
            Self::from_csv(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        };
        Ok(t)
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
