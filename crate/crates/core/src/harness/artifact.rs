use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::control::{uniform_grid, ControlFunction};
use crate::error::{Error, Result};
use crate::flow_jac::Trajectory;
use crate::picard::{IterationRecord, Termination};

pub const SCHEMA: &str = "gramsynth.run/v1";

/// Column order of `telemetry.csv`.
pub const TELEMETRY_COLUMNS: [&str; 7] =
    ["n", "err_end", "err_fp", "energy", "energy_sq_norm", "gramian_condition", "wall_time"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub termination: Option<Termination>,
    pub success: bool,
    pub error: Option<String>,
}

impl RunStatus {
    pub fn finished(termination: Termination) -> Self {
        Self { termination: Some(termination), success: termination.is_success(), error: None }
    }

    pub fn failed(error: &Error) -> Self {
        Self { termination: None, success: false, error: Some(error.to_string()) }
    }

    pub fn ok() -> Self {
        Self { termination: None, success: true, error: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub err_end: f64,
    pub err_fp: f64,
    /// `1/2 int |u|^2` of the returned control.
    pub energy: f64,
    /// `int |u|^2`.
    pub energy_sq_norm: f64,
    /// `(int |u|^2)^(1/2)`.
    pub l2_norm: f64,
    /// `1/2 y^T lambda`, symmetric map only.
    pub certificate: Option<f64>,
    /// First iteration whose `err_end` is within 10x of the best one.
    pub iterations_to_floor: Option<usize>,
    pub initial_condition: Option<f64>,
    pub singular_start: bool,
    pub total_wall_time: f64,
}

impl RunSummary {
    pub fn from_records(records: &[IterationRecord]) -> Self {
        let Some(last) = records.last() else {
            return Self::default();
        };
        let best = records.iter().map(|r| r.err_end).fold(f64::INFINITY, f64::min);
        Self {
            iterations: last.n,
            err_end: last.err_end,
            err_fp: last.err_fp,
            energy: last.energy,
            energy_sq_norm: last.energy_sq_norm,
            l2_norm: last.energy_sq_norm.sqrt(),
            certificate: None,
            iterations_to_floor: records.iter().find(|r| r.err_end <= 10.0 * best).map(|r| r.n),
            initial_condition: None,
            singular_start: false,
            total_wall_time: records.iter().map(|r| r.wall_time).sum(),
        }
    }
}

/// Uniform samples of a vector-valued signal, one row per time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn of_control(u: &ControlFunction, m: usize) -> Result<Self> {
        let (t0, t1) = u.span();
        let g = u.grid_values(m)?;
        Ok(Self { times: uniform_grid(t0, t1, m), values: (0..m).map(|i| g.node(i).to_vec()).collect() })
    }

    pub fn of_trajectory(traj: &Trajectory, m: usize) -> Result<Self> {
        let (t0, t1) = traj.span();
        let times = uniform_grid(t0, t1, m);
        let values = times.iter().map(|t| traj.solution.eval(*t)).collect::<std::result::Result<_, _>>()?;
        Ok(Self { times, values })
    }

    /// CSV with header `t, <prefix>1, ..., <prefix>n`.
    pub fn write_csv(&self, path: &Path, prefix: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let width = self.values.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=width).map(|i| format!("{prefix}{i}")));
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything one command produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema: String,
    pub command: String,
    pub system: String,
    pub seed: u64,
    pub status: RunStatus,
    pub summary: RunSummary,
    pub telemetry: Vec<IterationRecord>,
    pub control: SampleTable,
    pub trajectory: SampleTable,
    /// Extra named scalars, e.g. a baseline energy.
    pub metrics: std::collections::BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

impl RunArtifact {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema: SCHEMA.into(),
            command: command.into(),
            system: config.system.clone(),
            seed: config.seed,
            status: RunStatus::ok(),
            summary: RunSummary::default(),
            telemetry: Vec::new(),
            control: SampleTable::default(),
            trajectory: SampleTable::default(),
            metrics: Default::default(),
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(s)?;
        if a.schema != SCHEMA {
            return Err(Error::Serialization(format!("unsupported schema `{}`", a.schema)));
        }
        Ok(a)
    }

    /// JSON has no encoding for NaN or infinity.
    fn check_finite(&self) -> Result<()> {
        let s = &self.summary;
        let scalars = self
            .telemetry
            .iter()
            .flat_map(|r| [r.err_end, r.err_fp, r.energy, r.energy_sq_norm, r.gramian_condition, r.wall_time])
            .chain([s.err_end, s.err_fp, s.energy, s.energy_sq_norm, s.l2_norm, s.total_wall_time])
            .chain(s.certificate)
            .chain(s.initial_condition)
            .chain(self.metrics.values().copied())
            .chain(self.control.values.iter().flatten().copied())
            .chain(self.trajectory.values.iter().flatten().copied());
        for v in scalars {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue("run artifact"));
            }
        }
        Ok(())
    }

    /// `summary.json`, telemetry, `control.csv` and `trajectory.csv` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.flush()?;
        match self.config.output.format {
            super::TelemetryFormat::Csv => write_telemetry_csv(&self.telemetry, &dir.join("telemetry.csv"))?,
            super::TelemetryFormat::Json => {
                std::fs::write(dir.join("telemetry.json"), serde_json::to_string_pretty(&self.telemetry)?)?
            }
        }
        if !self.control.times.is_empty() {
            self.control.write_csv(&dir.join("control.csv"), "u")?;
        }
        if !self.trajectory.times.is_empty() {
            self.trajectory.write_csv(&dir.join("trajectory.csv"), "x")?;
        }
        Ok(())
    }
}

pub fn write_telemetry_csv(records: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TELEMETRY_COLUMNS)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.err_end.to_string(),
            r.err_fp.to_string(),
            r.energy.to_string(),
            r.energy_sq_norm.to_string(),
            r.gramian_condition.to_string(),
            r.wall_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_telemetry_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
