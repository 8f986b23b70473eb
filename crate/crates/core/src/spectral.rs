//! Spectral data: eigenvalue bands with norming vectors, and the derived
//! rank-one matrices and band aggregates used by the inverse machinery.

use crate::{CMat, CVec, Cx, Error, Result};

/// Double index `(n, k)` of an eigenvalue: band `n >= 1`, member
/// `k in 1..=m`. The derived ordering is lexicographic, which is exactly
/// the order the eigenvalue sequence is numbered in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexPair {
    pub band: usize,
    pub member: usize,
}

impl IndexPair {
    pub fn new(band: usize, member: usize) -> Self {
        IndexPair { band, member }
    }
}

/// One band of `m` eigenvalues (with multiplicity) and their norming vectors.
#[derive(Clone, Debug)]
pub struct Band {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<CVec>,
}

/// Eigenvalues and norming vectors of a matrix Sturm-Liouville problem,
/// numbered in bands according to their asymptotics.
#[derive(Clone, Debug)]
pub struct SpectralData {
    dim: usize,
    bands: Vec<Band>,
}

/// Square-root branch used everywhere: `arg rho` in `(-pi/2, pi/2]`, so
/// negative eigenvalues map to positive-imaginary `rho`.
pub fn sqrt_branch(lambda: f64) -> Cx {
    if lambda >= 0.0 {
        Cx::new(lambda.sqrt(), 0.0)
    } else {
        Cx::new(0.0, (-lambda).sqrt())
    }
}

impl SpectralData {
    pub fn new(dim: usize, bands: Vec<Band>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, band) in bands.iter().enumerate() {
            if band.lambdas.len() != dim || band.vectors.len() != dim {
                return Err(Error::invalid(format!(
                    "band {} must carry exactly {dim} eigenvalues and vectors",
                    i + 1
                )));
            }
            if band.vectors.iter().any(|v| v.len() != dim) {
                return Err(Error::invalid("norming vectors must have length m"));
            }
            for &l in &band.lambdas {
                if l < prev - 1e-12 * (1.0 + prev.abs()) {
                    return Err(Error::invalid(
                        "eigenvalues must be non-decreasing along the index order",
                    ));
                }
                prev = prev.max(l);
            }
        }
        Ok(SpectralData { dim, bands })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Eigenvalue at a 1-based index pair.
    pub fn lambda(&self, p: IndexPair) -> f64 {
        self.bands[p.band - 1].lambdas[p.member - 1]
    }

    pub fn rho(&self, p: IndexPair) -> Cx {
        sqrt_branch(self.lambda(p))
    }

    pub fn vector(&self, p: IndexPair) -> &CVec {
        &self.bands[p.band - 1].vectors[p.member - 1]
    }

    /// Rank-one matrix `v v*` for one index pair.
    pub fn beta(&self, p: IndexPair) -> CMat {
        let v = self.vector(p);
        v * v.adjoint()
    }

    /// Matrix whose columns are the norming vectors of band `n`.
    pub fn vector_matrix(&self, band: usize) -> CMat {
        let m = self.dim;
        let mut out = CMat::zeros(m, m);
        for k in 0..m {
            out.set_column(k, &self.bands[band - 1].vectors[k]);
        }
        out
    }

    /// Band aggregate `beta_n = sum_k v_nk v_nk* = V_n V_n*`.
    pub fn beta_band(&self, band: usize) -> CMat {
        let v = self.vector_matrix(band);
        &v * v.adjoint()
    }

    /// All index pairs up to the stored band count, in order.
    pub fn index_pairs(&self) -> impl Iterator<Item = IndexPair> + '_ {
        let m = self.dim;
        (1..=self.band_count())
            .flat_map(move |n| (1..=m).map(move |k| IndexPair::new(n, k)))
    }

    /// Keep only the first `bands` bands.
    pub fn truncated(&self, bands: usize) -> SpectralData {
        SpectralData {
            dim: self.dim,
            bands: self.bands[..bands.min(self.bands.len())].to_vec(),
        }
    }
}

/// Derived quantities of one data set: per-pair rank-one matrices, band
/// vector matrices and band sums.
#[derive(Clone, Debug)]
pub struct BetaAggregates {
    /// `beta_nk = v_nk v_nk*`, flattened in index-pair order.
    pub per_pair: Vec<CMat>,
    /// `V_n`, one per band.
    pub vector_matrices: Vec<CMat>,
    /// `beta_n = V_n V_n*`, one per band.
    pub band_sums: Vec<CMat>,
}

pub fn beta_aggregates(data: &SpectralData) -> BetaAggregates {
    let per_pair = data.index_pairs().map(|p| data.beta(p)).collect();
    let vector_matrices: Vec<CMat> = (1..=data.band_count())
        .map(|n| data.vector_matrix(n))
        .collect();
    let band_sums = vector_matrices.iter().map(|v| v * v.adjoint()).collect();
    BetaAggregates {
        per_pair,
        vector_matrices,
        band_sums,
    }
}
