//! Observation tables and their on-disk interchange formats.
//!
//! Tables are CSV with a header row: `unit_id`, the covariate columns, `A`, `Y`.
//! The dependence structure lives in a JSON sidecar tagged by `kind`; network
//! edges are written as pairs of unit ids.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    covariate_names: Vec<String>,
    covariates: Matrix,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
    unit_ids: Vec<String>,
}

impl ObservationTable {
    pub fn new(
        covariate_names: Vec<String>,
        covariates: Matrix,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
        unit_ids: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("observation table has no units".into()));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::SizeMismatch { expected: covariates.ncols(), found: covariate_names.len() });
        }
        for len in [treatment.len(), outcome.len(), unit_ids.len()] {
            if len != n {
                return Err(Error::SizeMismatch { expected: n, found: len });
            }
        }
        if !covariates.all_finite() {
            return Err(Error::NonFinite("covariates".into()));
        }
        if outcome.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("outcome".into()));
        }
        if let Some(a) = treatment.iter().find(|&&a| a > 1) {
            return Err(Error::InvalidInput(format!("treatment must be 0 or 1, found {a}")));
        }
        Ok(Self { covariate_names, covariates, treatment, outcome, unit_ids })
    }

    /// Table with unit ids `0..n` rendered as strings.
    pub fn with_default_ids(
        covariate_names: Vec<String>,
        covariates: Matrix,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let ids = (0..covariates.nrows()).map(|i| i.to_string()).collect();
        Self::new(covariate_names, covariates, treatment, outcome, ids)
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn treated_fraction(&self) -> f64 {
        self.treatment.iter().map(|&a| f64::from(a)).sum::<f64>() / self.n() as f64
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.covariate_names.clone(),
            self.covariates.select_rows(idx),
            idx.iter().map(|&i| self.treatment[i]).collect(),
            idx.iter().map(|&i| self.outcome[i]).collect(),
            idx.iter().map(|&i| self.unit_ids[i].clone()).collect(),
        )
    }

    /// Same table with outcomes shifted by `c`.
    pub fn shift_outcome(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.outcome.iter_mut().for_each(|y| *y += c);
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["unit_id".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.push("A".into());
        header.push("Y".into());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.unit_ids[i].clone()];
            rec.extend(self.covariates.row(i).iter().map(|v| v.to_string()));
            rec.push(self.treatment[i].to_string());
            rec.push(self.outcome[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let pos = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
        };
        let (id_col, a_col, y_col) = (pos("unit_id")?, pos("A")?, pos("Y")?);
        let cov_cols: Vec<usize> = (0..header.len()).filter(|c| ![id_col, a_col, y_col].contains(c)).collect();
        let names = cov_cols.iter().map(|&c| header[c].clone()).collect();
        let (mut data, mut a, mut y, mut ids) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec[c].trim().parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: column `{}` is not numeric", line + 1, header[c]))
                })
            };
            ids.push(rec[id_col].to_string());
            for &c in &cov_cols {
                data.push(num(c)?);
            }
            let av = num(a_col)?;
            if av != 0.0 && av != 1.0 {
                return Err(Error::InvalidInput(format!("row {}: treatment must be 0 or 1", line + 1)));
            }
            a.push(av as u8);
            y.push(num(y_col)?);
        }
        let n = ids.len();
        Self::new(names, Matrix::new(n, cov_cols.len(), data)?, a, y, ids)
    }
}

/// JSON sidecar describing a dependence structure in terms of unit ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureFile {
    Independent,
    OneWayClustered { cluster_ids: Vec<usize> },
    TwoWayClustered { row_ids: Vec<usize>, col_ids: Vec<usize> },
    Network { edges: Vec<(String, String)> },
    TimeSeries { m: usize },
}

impl StructureFile {
    pub fn from_structure(structure: &DependenceStructure, unit_ids: &[String]) -> Self {
        match structure {
            DependenceStructure::Independent { .. } => StructureFile::Independent,
            DependenceStructure::OneWayClustered { cluster_ids, .. } => {
                StructureFile::OneWayClustered { cluster_ids: cluster_ids.clone() }
            }
            DependenceStructure::TwoWayClustered(tw) => {
                StructureFile::TwoWayClustered { row_ids: tw.row_ids().to_vec(), col_ids: tw.col_ids().to_vec() }
            }
            DependenceStructure::Network(adj) => StructureFile::Network {
                edges: adj.edges().into_iter().map(|(u, v)| (unit_ids[u].clone(), unit_ids[v].clone())).collect(),
            },
            DependenceStructure::TimeSeries { m, .. } => StructureFile::TimeSeries { m: *m },
        }
    }

    /// Resolves the sidecar against a table's unit ids.
    pub fn into_structure(self, unit_ids: &[String]) -> Result<DependenceStructure> {
        let n = unit_ids.len();
        let check_len = |len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::SizeMismatch { expected: n, found: len })
            }
        };
        match self {
            StructureFile::Independent => Ok(DependenceStructure::Independent { n }),
            StructureFile::OneWayClustered { cluster_ids } => {
                check_len(cluster_ids.len())?;
                Ok(DependenceStructure::one_way(cluster_ids))
            }
            StructureFile::TwoWayClustered { row_ids, col_ids } => {
                check_len(row_ids.len())?;
                DependenceStructure::two_way(row_ids, col_ids)
            }
            StructureFile::Network { edges } => {
                let index: HashMap<&str, usize> = unit_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
                let lookup = |u: &str| {
                    index.get(u).copied().ok_or_else(|| Error::InvalidInput(format!("edge references unknown unit `{u}`")))
                };
                let pairs = edges
                    .iter()
                    .map(|(u, v)| Ok((lookup(u)?, lookup(v)?)))
                    .collect::<Result<Vec<_>>>()?;
                DependenceStructure::network(n, &pairs)
            }
            StructureFile::TimeSeries { m } => Ok(DependenceStructure::TimeSeries { n, m }),
        }
    }
}
