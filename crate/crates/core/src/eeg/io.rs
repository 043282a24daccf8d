//! Session recordings on disk: a CSV of samples (`time` in seconds, then one
//! column per channel, microvolts) next to a JSON sidecar with the sample
//! rate, montage and trial boundaries.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EegEpoch, Montage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialBoundary {
    pub trial: u32,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate: f64,
    #[serde(default)]
    pub montage: Option<Vec<(String, String)>>,
    pub trial_boundaries: Vec<TrialBoundary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate: f64,
    pub montage: Montage,
    pub channels: Vec<String>,
    pub times: Vec<f64>,
    /// channels × samples
    pub data: Vec<Vec<f64>>,
    pub boundaries: Vec<TrialBoundary>,
}

/// `<stem>.csv` and `<stem>.json` in the same directory.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl Recording {
    pub fn read(csv_path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(csv_path))?)?;
        let mut reader = csv::Reader::from_path(csv_path).map_err(|e| csv_error(csv_path, 1, e))?;
        let headers = reader.headers().map_err(|e| csv_error(csv_path, 1, e))?.clone();
        if headers.len() < 2 {
            return Err(csv_error(csv_path, 1, "need a time column and at least one channel"));
        }
        let channels: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut times = Vec::new();
        let mut data = vec![Vec::new(); channels.len()];
        for (i, row) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| csv_error(csv_path, line, e))?;
            if row.len() != headers.len() {
                return Err(csv_error(csv_path, line, format!("{} fields, expected {}", row.len(), headers.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_error(csv_path, line, format!("bad number `{s}`")))
            };
            times.push(parse(&row[0])?);
            for (c, field) in row.iter().skip(1).enumerate() {
                data[c].push(parse(field)?);
            }
        }
        let montage = side.montage.map(|pairs| Montage { pairs }).unwrap_or_default();
        montage.validate()?;
        Ok(Self {
            sample_rate: side.sample_rate,
            montage,
            channels,
            times,
            data,
            boundaries: side.trial_boundaries,
        })
    }

    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| csv_error(csv_path, 0, e))?;
        let mut header = vec!["time".to_string()];
        header.extend(self.channels.iter().cloned());
        w.write_record(&header).map_err(|e| csv_error(csv_path, 1, e))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.6}")];
            row.extend(self.data.iter().map(|ch| format!("{:.4}", ch[i])));
            w.write_record(&row).map_err(|e| csv_error(csv_path, i as u64 + 2, e))?;
        }
        w.flush()?;
        let side = Sidecar {
            sample_rate: self.sample_rate,
            montage: Some(self.montage.pairs.clone()),
            trial_boundaries: self.boundaries.clone(),
        };
        fs::write(sidecar_path(csv_path), serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    /// One epoch per trial boundary, holding the samples with
    /// `start_s <= time < end_s`.
    pub fn epochs(&self) -> Result<Vec<EegEpoch>> {
        self.boundaries
            .iter()
            .map(|b| {
                if b.end_s <= b.start_s {
                    return Err(Error::invalid(format!("trial {} ends before it starts", b.trial)));
                }
                let idx: Vec<usize> = self
                    .times
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| **t >= b.start_s && **t < b.end_s)
                    .map(|(i, _)| i)
                    .collect();
                let samples = self.data.iter().map(|ch| idx.iter().map(|&i| ch[i]).collect()).collect();
                EegEpoch::new(b.trial, self.sample_rate, self.channels.clone(), samples)
            })
            .collect()
    }
}

fn csv_error(path: &Path, line: u64, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
