//! On-disk record store: one CSV file per record kind plus a JSON manifest.
//!
//! ```text
//! <store>/manifest.json
//! <store>/config.json
//! <store>/{corr,corr_rows,energy,error}.csv      merged, ordered by t_r
//! <store>/trajectories/tr_<t_r>/entry.json        per-ramp outcome
//! <store>/trajectories/tr_<t_r>/*.csv             per-ramp records
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::trajectory::{Outcome, TrajectoryData};
use crate::error::{Error, Result};
use crate::records::{CorrRecord, EnergyRecord, ErrorRecord, FitRecord, RowCorrRecord};

pub const CORR: &str = "corr.csv";
pub const CORR_ROWS: &str = "corr_rows.csv";
pub const ENERGY: &str = "energy.csv";
pub const ERROR: &str = "error.csv";
pub const FITS: &str = "fits.csv";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub t_r: f64,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub seconds: f64,
    pub final_delta: Option<f64>,
    pub bond_history: Vec<(f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub trajectories: Vec<TrajectoryEntry>,
}

impl RunManifest {
    pub fn entry(&self, t_r: f64) -> Option<&TrajectoryEntry> {
        self.trajectories.iter().find(|e| e.t_r == t_r)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        // serde-driven headers need a record; an empty file means no rows
        std::fs::write(path, "")?;
        return Ok(());
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() || std::fs::metadata(path)?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|x| x.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Store(e.to_string())
}

/// A record store directory.
#[derive(Clone, Debug)]
pub struct Store {
    pub root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn trajectory_dir(&self, t_r: f64) -> PathBuf {
        self.root.join("trajectories").join(format!("tr_{t_r}"))
    }

    pub fn manifest(&self) -> Result<Option<RunManifest>> {
        let p = self.path(MANIFEST);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&std::fs::read(p)?)?))
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        std::fs::write(self.path(MANIFEST), serde_json::to_vec_pretty(m)?)?;
        Ok(())
    }

    pub fn config(&self) -> Result<RunConfig> {
        let p = self.path(CONFIG);
        if !p.exists() {
            return Err(Error::Store(format!("{} has no {CONFIG}", self.root.display())));
        }
        Ok(serde_json::from_slice(&std::fs::read(p)?)?)
    }

    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(self.path(CONFIG), serde_json::to_vec_pretty(cfg)?)?;
        Ok(())
    }

    /// Previously finished trajectory, if its records are all present.
    pub fn finished(&self, t_r: f64) -> Result<Option<TrajectoryEntry>> {
        let p = self.trajectory_dir(t_r).join("entry.json");
        if !p.exists() {
            return Ok(None);
        }
        let e: TrajectoryEntry = serde_json::from_slice(&std::fs::read(p)?)?;
        Ok(e.outcome.is_final().then_some(e))
    }

    pub fn save_trajectory(&self, entry: &TrajectoryEntry, data: &TrajectoryData) -> Result<()> {
        let dir = self.trajectory_dir(entry.t_r);
        std::fs::create_dir_all(&dir)?;
        write_csv(&dir.join(CORR), &data.corr)?;
        write_csv(&dir.join(CORR_ROWS), &data.rows)?;
        write_csv(&dir.join(ENERGY), &data.energy)?;
        write_csv(&dir.join(ERROR), &data.errors)?;
        // written last: its presence marks the records complete
        std::fs::write(dir.join("entry.json"), serde_json::to_vec_pretty(entry)?)?;
        Ok(())
    }

    /// Rebuilds the merged CSV files from the manifest's finished trajectories.
    pub fn merge(&self, manifest: &RunManifest) -> Result<()> {
        let mut entries: Vec<&TrajectoryEntry> = manifest.trajectories.iter().filter(|e| e.outcome.is_final()).collect();
        entries.sort_by(|a, b| a.t_r.total_cmp(&b.t_r));
        fn gather<T: DeserializeOwned + Serialize>(store: &Store, entries: &[&TrajectoryEntry], name: &str) -> Result<()> {
            let mut all: Vec<T> = Vec::new();
            for e in entries {
                all.extend(read_csv::<T>(&store.trajectory_dir(e.t_r).join(name))?);
            }
            write_csv(&store.path(name), &all)
        }
        gather::<CorrRecord>(self, &entries, CORR)?;
        gather::<RowCorrRecord>(self, &entries, CORR_ROWS)?;
        gather::<EnergyRecord>(self, &entries, ENERGY)?;
        gather::<ErrorRecord>(self, &entries, ERROR)?;
        Ok(())
    }

    pub fn corr(&self) -> Result<Vec<CorrRecord>> {
        read_csv(&self.path(CORR))
    }

    pub fn rows(&self) -> Result<Vec<RowCorrRecord>> {
        read_csv(&self.path(CORR_ROWS))
    }

    pub fn energy(&self) -> Result<Vec<EnergyRecord>> {
        read_csv(&self.path(ENERGY))
    }

    pub fn errors(&self) -> Result<Vec<ErrorRecord>> {
        read_csv(&self.path(ERROR))
    }

    pub fn fits(&self) -> Result<Vec<FitRecord>> {
        read_csv(&self.path(FITS))
    }
}
