//! Field snapshots: CSV with coordinates, or raw little-endian `f64` with a
//! JSON sidecar.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sym_components, sym_index, ScalarField, SymTensorField, TorusGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub d: usize,
    pub resolution: Vec<usize>,
    pub periods: Vec<f64>,
    /// Component labels in storage order, e.g. `u` or `h_01`.
    pub components: Vec<String>,
    pub time: f64,
}

impl SnapshotHeader {
    fn grid(&self) -> Result<TorusGrid> {
        if self.resolution.len() != self.d || self.periods.len() != self.d {
            return Err(Error::Format("header dimension does not match resolution/periods".into()));
        }
        TorusGrid::with_periods(self.resolution.clone(), self.periods.clone())
    }
}

fn tensor_labels(d: usize) -> Vec<String> {
    let mut out = vec![String::new(); sym_components(d)];
    for i in 0..d {
        for j in i..d {
            out[sym_index(d, i, j)] = format!("h_{i}{j}");
        }
    }
    out
}

/// One or more scalar component arrays on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub data: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn scalar(u: &ScalarField, time: f64) -> Self {
        let g = u.grid();
        Self {
            header: SnapshotHeader {
                d: g.d(),
                resolution: g.resolution().to_vec(),
                periods: g.periods().to_vec(),
                components: vec!["u".into()],
                time,
            },
            data: vec![u.values().to_vec()],
        }
    }

    pub fn tensor(h: &SymTensorField, time: f64) -> Self {
        let g = h.grid();
        Self {
            header: SnapshotHeader {
                d: g.d(),
                resolution: g.resolution().to_vec(),
                periods: g.periods().to_vec(),
                components: tensor_labels(g.d()),
                time,
            },
            data: h.components().to_vec(),
        }
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.data.len() != 1 {
            return Err(Error::Format(format!("expected one component, found {}", self.data.len())));
        }
        ScalarField::new(self.header.grid()?, self.data[0].clone())
    }

    pub fn to_tensor(&self) -> Result<SymTensorField> {
        SymTensorField::new(self.header.grid()?, self.data.clone())
    }

    /// Columns `x0..x{d-1}` followed by one column per component.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let grid = self.header.grid()?;
        let d = grid.d();
        let mut out = csv::Writer::from_writer(w);
        let mut head: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
        head.extend(self.header.components.iter().cloned());
        out.write_record(&head).map_err(csv_err)?;
        for idx in 0..grid.len() {
            let x = grid.coords(idx);
            let mut row: Vec<String> = x[..d].iter().map(|v| format!("{v:e}")).collect();
            row.extend(self.data.iter().map(|c| format!("{:e}", c[idx])));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.bin` (component-major little-endian `f64`) and `<stem>.json`.
    pub fn write_raw(&self, stem: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.data.iter().map(Vec::len).sum::<usize>() * 8);
        for c in &self.data {
            for v in c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::File::create(stem.with_extension("bin"))?.write_all(&bytes)?;
        let json = serde_json::to_string_pretty(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(stem.with_extension("json"), json)?;
        Ok(())
    }

    pub fn read_raw(stem: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(stem.with_extension("json"))?;
        let header: SnapshotHeader = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        let grid = header.grid()?;
        let mut bytes = Vec::new();
        std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
        let n = grid.len();
        let expect = n * header.components.len() * 8;
        if bytes.len() != expect {
            return Err(Error::Format(format!("expected {expect} bytes, found {}", bytes.len())));
        }
        let data = bytes
            .chunks_exact(n * 8)
            .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
            .collect();
        Ok(Self { header, data })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
