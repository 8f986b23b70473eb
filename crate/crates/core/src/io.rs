//! JSON schemas for problems, spectral data and reports. Complex numbers
//! are always `[re, im]` pairs.

use crate::graph::{GraphSpectralData, StarGraphProblem};
use crate::problem::Coefficients;
use crate::spectral::{Band, SpectralData};
use crate::stability::Partition;
use crate::{CMat, CVec, Cx, Error, Result};
use serde::{Deserialize, Serialize};

type CxPair = [f64; 2];

fn to_pair(z: Cx) -> CxPair {
    [z.re, z.im]
}

fn from_pair(p: CxPair) -> Cx {
    Cx::new(p[0], p[1])
}

fn matrix_to_rows(m: &CMat) -> Vec<Vec<CxPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<CxPair>], dim: usize) -> Result<CMat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse(format!("expected a {dim} x {dim} matrix")));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| from_pair(rows[i][j])))
}

/// Interval problem record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientsJson {
    pub m: usize,
    #[serde(rename = "M")]
    pub segments: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Vec<CxPair>>>,
    pub h: Vec<Vec<CxPair>>,
    #[serde(rename = "H")]
    pub big_h: Vec<Vec<CxPair>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl CoefficientsJson {
    pub fn from_coefficients(c: &Coefficients) -> Self {
        CoefficientsJson {
            m: c.dim(),
            segments: c.segments(),
            q: c.potential().iter().map(matrix_to_rows).collect(),
            h: matrix_to_rows(c.h()),
            big_h: matrix_to_rows(c.big_h()),
            config_hash: None,
        }
    }

    pub fn into_coefficients(&self) -> Result<Coefficients> {
        if self.q.len() != self.segments + 1 {
            return Err(Error::Parse(format!(
                "Q must carry M + 1 = {} samples, found {}",
                self.segments + 1,
                self.q.len()
            )));
        }
        let q = self
            .q
            .iter()
            .map(|rows| matrix_from_rows(rows, self.m))
            .collect::<Result<Vec<_>>>()?;
        Coefficients::new(
            q,
            matrix_from_rows(&self.h, self.m)?,
            matrix_from_rows(&self.big_h, self.m)?,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandJson {
    pub n: usize,
    pub lambda: Vec<f64>,
    /// Norming vectors, one inner vector of `[re, im]` entries per member.
    pub vectors: Vec<Vec<CxPair>>,
}

/// Spectral data record, shared by the interval and graph problems (the
/// graph stores its derivative-normalized vectors here).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDataJson {
    pub m: usize,
    pub bands: Vec<BandJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl SpectralDataJson {
    pub fn from_data(d: &SpectralData) -> Self {
        SpectralDataJson {
            m: d.dim(),
            bands: d
                .bands()
                .iter()
                .enumerate()
                .map(|(i, b)| BandJson {
                    n: i + 1,
                    lambda: b.lambdas.clone(),
                    vectors: b
                        .vectors
                        .iter()
                        .map(|v| v.iter().map(|z| to_pair(*z)).collect())
                        .collect(),
                })
                .collect(),
            config_hash: None,
        }
    }

    pub fn into_data(&self) -> Result<SpectralData> {
        let mut bands = Vec::with_capacity(self.bands.len());
        for (i, b) in self.bands.iter().enumerate() {
            if b.n != i + 1 {
                return Err(Error::Parse(format!(
                    "band numbers must be consecutive from 1, found {} at position {}",
                    b.n,
                    i + 1
                )));
            }
            if b.lambda.len() != self.m || b.vectors.len() != self.m {
                return Err(Error::Parse(format!(
                    "band {} must carry m = {} eigenvalues and vectors",
                    b.n, self.m
                )));
            }
            let vectors = b
                .vectors
                .iter()
                .map(|v| {
                    if v.len() != self.m {
                        return Err(Error::Parse("vector length must equal m".into()));
                    }
                    Ok(CVec::from_fn(self.m, |i, _| from_pair(v[i])))
                })
                .collect::<Result<Vec<_>>>()?;
            bands.push(Band {
                lambdas: b.lambda.clone(),
                vectors,
            });
        }
        SpectralData::new(self.m, bands)
    }

    pub fn into_graph_data(&self) -> Result<GraphSpectralData> {
        Ok(GraphSpectralData::new(self.into_data()?))
    }
}

/// Star-graph problem record: per-edge real potential samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphProblemJson {
    pub m: usize,
    #[serde(rename = "M")]
    pub segments: usize,
    pub q: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl GraphProblemJson {
    pub fn from_problem(g: &StarGraphProblem) -> Self {
        GraphProblemJson {
            m: g.edges(),
            segments: g.segments(),
            q: g.edge_potentials().to_vec(),
            config_hash: None,
        }
    }

    pub fn into_problem(&self) -> Result<StarGraphProblem> {
        if self.q.len() != self.m {
            return Err(Error::Parse(format!(
                "expected {} edges, found {}",
                self.m,
                self.q.len()
            )));
        }
        if self.q.iter().any(|e| e.len() != self.segments + 1) {
            return Err(Error::Parse(format!(
                "each edge must carry M + 1 = {} samples",
                self.segments + 1
            )));
        }
        StarGraphProblem::new(self.q.clone())
    }
}

/// Partition file: a list of groups, each a list of `[n, k]` pairs.
pub fn partition_from_json(text: &str) -> Result<Partition> {
    let raw: Vec<Vec<[usize; 2]>> =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Partition::new(
        raw.into_iter()
            .map(|g| {
                g.into_iter()
                    .map(|[n, k]| crate::spectral::IndexPair::new(n, k))
                    .collect()
            })
            .collect(),
    )
}

pub fn partition_to_json(p: &Partition) -> String {
    let raw: Vec<Vec<[usize; 2]>> = p
        .groups()
        .iter()
        .map(|g| g.iter().map(|p| [p.band, p.member]).collect())
        .collect();
    serde_json::to_string_pretty(&raw).expect("serializable")
}

/// Debug dump of one assembled system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembledSystemJson {
    pub x: f64,
    pub m: usize,
    pub bands: usize,
    pub cols_per_band: usize,
    pub psi: Vec<Vec<CxPair>>,
    pub r: Vec<Vec<CxPair>>,
}

impl AssembledSystemJson {
    pub fn from_system(a: &crate::kernels::AssembledSystem) -> Self {
        AssembledSystemJson {
            x: a.x,
            m: a.dim,
            bands: a.band_count,
            cols_per_band: a.cols_per_band,
            psi: (0..a.psi.nrows())
                .map(|i| (0..a.psi.ncols()).map(|j| to_pair(a.psi[(i, j)])).collect())
                .collect(),
            r: (0..a.r.nrows())
                .map(|i| (0..a.r.ncols()).map(|j| to_pair(a.r[(i, j)])).collect())
                .collect(),
        }
    }
}

pub fn parse_coefficients(text: &str) -> Result<Coefficients> {
    let json: CoefficientsJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    json.into_coefficients()
}

pub fn parse_spectral_data(text: &str) -> Result<SpectralData> {
    let json: SpectralDataJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    json.into_data()
}

pub fn parse_graph_problem(text: &str) -> Result<StarGraphProblem> {
    let json: GraphProblemJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    json.into_problem()
}
