//! JSON interchange (schema v1).
//!
//! Complex entries are `[re, im]` pairs and matrices are lists of rows.
//!
//! ```json
//! {"type":"assemblage","m":2,"d":2,"dimB":2,"sigma":[ /* (a,x) lexicographic */ ]}
//! {"type":"behavior","mA":2,"mB":2,"dA":2,"dB":2,"p":[ /* p[x][y][a][b] */ ]}
//! {"type":"measurements","dim":2,"povms":[ /* list of effect lists */ ]}
//! ```
//!
//! Hypergraphs use `{"vertices": m, "hyperedges": [[1,2,4],[1,3]]}`.

use std::fs;
use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::compat::CompatHypergraph;
use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, MeasurementSet, Povm, Tolerances};
use crate::scenario::{Assemblage, Behavior};

type JsonMatrix = Vec<Vec<[f64; 2]>>;

fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn matrix_from_json(rows: &JsonMatrix, n: usize) -> Result<ComplexMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("expected a {n}x{n} matrix")));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| Complex::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Document {
    Assemblage {
        m: usize,
        d: usize,
        #[serde(rename = "dimB")]
        dim_b: usize,
        sigma: Vec<JsonMatrix>,
    },
    Behavior {
        #[serde(rename = "mA")]
        m_a: usize,
        #[serde(rename = "mB")]
        m_b: usize,
        #[serde(rename = "dA")]
        d_a: usize,
        #[serde(rename = "dB")]
        d_b: usize,
        p: Vec<Vec<Vec<Vec<f64>>>>,
    },
    Measurements {
        dim: usize,
        povms: Vec<Vec<JsonMatrix>>,
    },
}

impl Document {
    pub fn from_assemblage(a: &Assemblage) -> Self {
        Self::Assemblage { m: a.inputs(), d: a.outcomes(), dim_b: a.dim_b(), sigma: a.sigmas().iter().map(matrix_to_json).collect() }
    }

    pub fn from_behavior(b: &Behavior) -> Self {
        let (m_a, m_b, d_a, d_b) = b.shape();
        let p = (1..=m_a)
            .map(|x| (1..=m_b).map(|y| (0..d_a).map(|a| (0..d_b).map(|bb| *b.prob(a, bb, x, y)).collect()).collect()).collect())
            .collect();
        Self::Behavior { m_a, m_b, d_a, d_b, p }
    }

    pub fn from_measurements(meas: &MeasurementSet) -> Self {
        Self::Measurements {
            dim: meas.dim(),
            povms: meas.povms().iter().map(|p| p.effects().iter().map(matrix_to_json).collect()).collect(),
        }
    }

    pub fn into_assemblage(self) -> Result<Assemblage> {
        let Self::Assemblage { m, d, dim_b, sigma } = self else {
            return Err(Error::InvalidInput("document is not an assemblage".into()));
        };
        if sigma.len() != m * d {
            return Err(Error::DimensionMismatch(format!("{} sigma entries, expected m*d = {}", sigma.len(), m * d)));
        }
        let sigma = sigma.iter().map(|s| matrix_from_json(s, dim_b)).collect::<Result<_>>()?;
        Assemblage::new(m, d, sigma)
    }

    pub fn into_behavior(self) -> Result<Behavior> {
        let Self::Behavior { m_a, m_b, d_a, d_b, p } = self else {
            return Err(Error::InvalidInput("document is not a behavior".into()));
        };
        let shape_ok = p.len() == m_a
            && p.iter().all(|py| py.len() == m_b && py.iter().all(|pa| pa.len() == d_a && pa.iter().all(|pb| pb.len() == d_b)));
        if !shape_ok {
            return Err(Error::DimensionMismatch(format!("p does not have shape [{m_a}][{m_b}][{d_a}][{d_b}]")));
        }
        let flat = p.into_iter().flatten().flatten().flatten().collect();
        Behavior::new(m_a, m_b, d_a, d_b, flat)
    }

    pub fn into_measurements(self) -> Result<MeasurementSet> {
        let Self::Measurements { dim, povms } = self else {
            return Err(Error::InvalidInput("document is not a measurement set".into()));
        };
        let povms = povms
            .iter()
            .map(|effects| {
                let effects = effects.iter().map(|e| matrix_from_json(e, dim)).collect::<Result<Vec<_>>>()?;
                Povm::with_tolerances(effects, Tolerances::uniform(1e-8))
            })
            .collect::<Result<_>>()?;
        MeasurementSet::new(povms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn read_document(path: impl AsRef<Path>) -> Result<Document> {
    Document::from_json(&fs::read_to_string(path)?)
}

pub fn write_document(path: impl AsRef<Path>, doc: &Document) -> Result<()> {
    Ok(fs::write(path, doc.to_json()?)?)
}

pub fn read_assemblage(path: impl AsRef<Path>) -> Result<Assemblage> {
    read_document(path)?.into_assemblage()
}

pub fn read_behavior(path: impl AsRef<Path>) -> Result<Behavior> {
    read_document(path)?.into_behavior()
}

pub fn read_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    read_document(path)?.into_measurements()
}

pub fn hypergraph_to_json(h: &CompatHypergraph) -> Result<String> {
    Ok(serde_json::to_string(h)?)
}

pub fn hypergraph_from_json(s: &str) -> Result<CompatHypergraph> {
    let raw: CompatHypergraph = serde_json::from_str(s)?;
    CompatHypergraph::new(raw.vertices, raw.hyperedges)
}
