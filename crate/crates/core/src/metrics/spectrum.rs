use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::compress::spectra;
use crate::error::{Error, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub layer: usize,
    pub index: usize,
    pub singular_value: f64,
    /// `s_i / s_0`; zero for an all-zero layer.
    pub normalized: f64,
}

/// Singular values of every collapsed layer, in (layer, index) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumReport {
    /// Normalized value at `index` of `layer`, if present.
    pub fn normalized(&self, layer: usize, index: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.layer == layer && r.index == index)
            .map(|r| r.normalized)
    }

    pub fn layer(&self, layer: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| r.normalized)
            .collect()
    }

    /// CSV with columns `layer,index,singular_value,normalized`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn spectrum_report(model: &Mlp) -> Result<SpectrumReport> {
    let mut rows = Vec::new();
    for (layer, s) in spectra(model)?.into_iter().enumerate() {
        let top = s.first().copied().unwrap_or(0.0);
        for (index, &v) in s.iter().enumerate() {
            let normalized = if top > 0.0 { v / top } else { 0.0 };
            rows.push(SpectrumRow {
                layer,
                index,
                singular_value: v,
                normalized,
            });
        }
    }
    Ok(SpectrumReport { rows })
}
