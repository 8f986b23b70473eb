//! Sturm-Liouville problem on the star-shaped graph in matrix form:
//! Dirichlet conditions at the boundary vertices and standard matching at
//! the interior vertex become `Y(0) = 0`, `T Y'(pi) - T_perp Y(pi) = 0`
//! with the rank-one averaging projector `T`.

use crate::direct::{scan_spectrum, BandWindow, Propagator, MULT_TOL, SCAN_STEP};
use crate::inverse::InverseOptions;
use crate::kernels::{
    sin_cardinal, sin_difference_quotient, sin_difference_quotient_dx, sin_kernel_quotient,
    sin_kernel_quotient_dx, sin_product_integral, sin_product_integral_dx, write_block,
    write_scaled,
};
use crate::linalg::{self, inv_sqrt_hermitian, trapezoid_matrix, PivotedLu};
use crate::problem::Coefficients;
use crate::spectral::{Band, IndexPair, SpectralData};
use crate::stability::{Partition, SpectralView};
use crate::{CMat, CVec, Cx, Error, Result};
use std::f64::consts::PI;

/// Tolerance on the per-edge potential means.
pub const EDGE_MEAN_TOL: f64 = 1e-8;
/// Frequencies below this threshold use the `v x` branch of the sine system.
pub const ZERO_RHO_TOL: f64 = 1e-8;

/// Star graph with `m` edges of length `pi`: per-edge real potentials
/// sampled on a shared uniform grid.
#[derive(Clone, Debug)]
pub struct StarGraphProblem {
    q: Vec<Vec<f64>>,
}

impl StarGraphProblem {
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("at least one edge is required"));
        }
        let len = q[0].len();
        if len < 3 {
            return Err(Error::invalid("the grid needs at least M = 2 segments"));
        }
        if q.iter().any(|e| e.len() != len) {
            return Err(Error::invalid("all edges must share one grid"));
        }
        Ok(StarGraphProblem { q })
    }

    pub fn from_functions(fns: &[&dyn Fn(f64) -> f64], segments: usize) -> Self {
        let step = PI / segments as f64;
        StarGraphProblem {
            q: fns
                .iter()
                .map(|f| (0..=segments).map(|i| f(i as f64 * step)).collect())
                .collect(),
        }
    }

    pub fn edges(&self) -> usize {
        self.q.len()
    }

    pub fn segments(&self) -> usize {
        self.q[0].len() - 1
    }

    pub fn step(&self) -> f64 {
        PI / self.segments() as f64
    }

    pub fn edge_potentials(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// Largest per-edge mean `∫ q_j` (trapezoid); the class requires zero.
    pub fn max_mean_defect(&self) -> f64 {
        self.q
            .iter()
            .map(|e| linalg::trapezoid_scalar(e, self.step()).abs())
            .fold(0.0, f64::max)
    }

    pub fn in_class(&self) -> bool {
        self.max_mean_defect() <= EDGE_MEAN_TOL
    }

    /// Matrix form of the potential: `diag{q_j}` wrapped as coefficients so
    /// the interval propagator integrates the same equation.
    pub fn as_coefficients(&self) -> Coefficients {
        let m = self.edges();
        let samples: Vec<CMat> = (0..=self.segments())
            .map(|i| {
                CMat::from_fn(m, m, |r, c| {
                    if r == c {
                        Cx::new(self.q[r][i], 0.0)
                    } else {
                        Cx::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Coefficients::new(samples, CMat::zeros(m, m), CMat::zeros(m, m))
            .expect("diagonal samples are square")
    }

    pub fn l2_norm(&self) -> f64 {
        let step = self.step();
        self.q
            .iter()
            .map(|e| {
                let sq: Vec<f64> = e.iter().map(|v| v * v).collect();
                linalg::trapezoid_scalar(&sq, step).sqrt()
            })
            .sum()
    }

    /// Linear resampling of the edge potentials onto a different grid.
    pub fn resampled(&self, segments: usize) -> StarGraphProblem {
        let src_step = self.step();
        let dst_step = PI / segments as f64;
        let last = self.segments();
        let q = self
            .q
            .iter()
            .map(|e| {
                (0..=segments)
                    .map(|i| {
                        let x = i as f64 * dst_step;
                        let t = ((x / src_step).floor() as usize).min(last - 1);
                        let w = (x - t as f64 * src_step) / src_step;
                        e[t] * (1.0 - w) + e[t + 1] * w
                    })
                    .collect()
            })
            .collect();
        StarGraphProblem { q }
    }

    /// Per-edge L2 distances to another problem on the same grid.
    pub fn edge_distances(&self, other: &StarGraphProblem) -> Result<Vec<f64>> {
        if self.edges() != other.edges() || self.segments() != other.segments() {
            return Err(Error::invalid(
                "edge distance requires matching edge counts and grids",
            ));
        }
        let step = self.step();
        Ok(self
            .q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| {
                let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
                linalg::trapezoid_scalar(&sq, step).sqrt()
            })
            .collect())
    }
}

/// Rank-one averaging projector and its complement.
pub fn projectors(m: usize) -> (CMat, CMat) {
    let t = CMat::from_element(m, m, Cx::new(1.0 / m as f64, 0.0));
    let t_perp = CMat::identity(m, m) - &t;
    (t, t_perp)
}

// ---------------------------------------------------------------------
// Graph spectral data
// ---------------------------------------------------------------------

/// Model `rho` of pair `(n, k)`: `n - 1/2` for the first family, `n` after.
pub fn graph_model_rho(p: IndexPair) -> f64 {
    if p.member == 1 {
        p.band as f64 - 0.5
    } else {
        p.band as f64
    }
}

/// Normalization factor relating the norming vector to the eigenfunction
/// derivative at the boundary vertex.
pub fn graph_scale(p: IndexPair) -> f64 {
    if p.member == 1 {
        p.band as f64 - 0.5
    } else {
        p.band as f64
    }
}

/// Orthonormal basis of the complement of the constant direction
/// (Helmert construction), used by the model data.
fn helmert_basis(m: usize) -> Vec<CVec> {
    (1..m)
        .map(|k| {
            let norm = (k as f64 * (k + 1) as f64).sqrt();
            CVec::from_fn(m, |i, _| {
                if i < k {
                    Cx::new(1.0 / norm, 0.0)
                } else if i == k {
                    Cx::new(-(k as f64) / norm, 0.0)
                } else {
                    Cx::new(0.0, 0.0)
                }
            })
        })
        .collect()
}

/// Eigenvalues and norming vectors of a star-graph problem under the
/// derivative normalization: weights carry the band-dependent scales.
#[derive(Clone, Debug)]
pub struct GraphSpectralData {
    inner: SpectralData,
}

impl GraphSpectralData {
    pub fn new(inner: SpectralData) -> Self {
        GraphSpectralData { inner }
    }

    /// Exact model data of the zero-potential star graph.
    pub fn model(m: usize, bands: usize) -> Self {
        let scale = (2.0 / PI).sqrt();
        let ones = CVec::from_element(m, Cx::new(scale / (m as f64).sqrt(), 0.0));
        let rest: Vec<CVec> = helmert_basis(m)
            .into_iter()
            .map(|v| v * Cx::new(scale, 0.0))
            .collect();
        let bands_vec: Vec<Band> = (1..=bands)
            .map(|n| {
                let mut lambdas = vec![(n as f64 - 0.5).powi(2)];
                let mut vectors = vec![ones.clone()];
                for v in &rest {
                    lambdas.push((n as f64).powi(2));
                    vectors.push(v.clone());
                }
                Band { lambdas, vectors }
            })
            .collect();
        GraphSpectralData {
            inner: SpectralData::new(m, bands_vec).expect("model data is valid"),
        }
    }

    pub fn data(&self) -> &SpectralData {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn band_count(&self) -> usize {
        self.inner.band_count()
    }

    pub fn lambda(&self, p: IndexPair) -> f64 {
        self.inner.lambda(p)
    }

    pub fn rho(&self, p: IndexPair) -> Cx {
        self.inner.rho(p)
    }

    pub fn vector(&self, p: IndexPair) -> &CVec {
        self.inner.vector(p)
    }

    /// Scaled weight `beta_nk`: `(n - 1/2)^2 v v*` or `n^2 v v*`.
    pub fn beta(&self, p: IndexPair) -> CMat {
        let s = graph_scale(p);
        self.inner.beta(p) * Cx::new(s * s, 0.0)
    }

    /// Weight of the first family in band `n`.
    pub fn beta_first(&self, band: usize) -> CMat {
        self.beta(IndexPair::new(band, 1))
    }

    /// Sum of the upper-family weights in band `n`.
    pub fn beta_rest(&self, band: usize) -> CMat {
        let m = self.dim();
        let mut acc = CMat::zeros(m, m);
        for k in 2..=m {
            acc += self.beta(IndexPair::new(band, k));
        }
        acc
    }

    pub fn truncated(&self, bands: usize) -> GraphSpectralData {
        GraphSpectralData {
            inner: self.inner.truncated(bands),
        }
    }
}

impl SpectralView for GraphSpectralData {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn band_count(&self) -> usize {
        self.band_count()
    }
    fn rho(&self, p: IndexPair) -> Cx {
        self.rho(p)
    }
    fn beta(&self, p: IndexPair) -> CMat {
        self.beta(p)
    }
}

/// Extend finite graph data with exact model bands.
pub fn complete_graph_tail(partial: &GraphSpectralData, total: usize) -> GraphSpectralData {
    let m = partial.dim();
    let model = GraphSpectralData::model(m, total);
    let mut bands: Vec<Band> = partial.inner.bands().iter().take(total).cloned().collect();
    for n in bands.len() + 1..=total {
        bands.push(model.inner.bands()[n - 1].clone());
    }
    GraphSpectralData {
        inner: SpectralData::new(m, bands).expect("model tail preserves validity"),
    }
}

// ---------------------------------------------------------------------
// Forward problem
// ---------------------------------------------------------------------

fn graph_boundary(prop: &Propagator<'_>, t: &CMat, t_perp: &CMat, lambda: Cx) -> CMat {
    let m = t.nrows();
    let (p, d) = prop.endpoint(lambda, &CMat::zeros(m, m), &CMat::identity(m, m));
    t * d - t_perp * p
}

fn graph_windows(g: &StarGraphProblem, bands: usize) -> Vec<BandWindow> {
    let m = g.edges();
    let floor = g.l2_norm() * PI.sqrt() + 2.0;
    let s_lo = -floor;
    let mut windows = Vec::new();
    for n in 1..=bands {
        let nf = n as f64;
        windows.push(BandWindow {
            s_lo: if n == 1 { s_lo } else { nf - 0.9 },
            s_hi: nf - 0.1,
            expected: 1,
            band: n,
            anchor: nf - 0.5,
        });
        if m >= 2 {
            windows.push(BandWindow {
                s_lo: nf - 0.1,
                s_hi: nf + 0.4,
                expected: m - 1,
                band: n,
                anchor: nf,
            });
        }
    }
    windows
}

/// Forward solve on the star graph: eigenvalue families, orthonormalized
/// boundary-derivative vectors, rescaled by the band factors.
pub fn graph_forward(g: &StarGraphProblem, bands: usize) -> Result<GraphSpectralData> {
    let m = g.edges();
    let coeffs = g.as_coefficients();
    let prop = Propagator::new(&coeffs);
    let (t, t_perp) = projectors(m);
    let boundary = |lambda: f64| graph_boundary(&prop, &t, &t_perp, Cx::new(lambda, 0.0));
    let windows = graph_windows(g, bands);
    let roots = scan_spectrum(&boundary, &windows, SCAN_STEP)?;

    // norming vectors per distinct root
    let groups = crate::par::parallel_map(roots.len(), |i| {
        graph_norming(&prop, &t, &t_perp, roots[i].lambda, roots[i].multiplicity)
    });
    let mut flat: Vec<(f64, CVec)> = Vec::new();
    for (root, group) in roots.iter().zip(groups) {
        for u in group? {
            flat.push((root.lambda, u));
        }
    }
    if flat.len() < bands * m {
        return Err(Error::invalid("scan produced fewer eigenvalues than requested"));
    }
    flat.truncate(bands * m);
    let bands_vec: Vec<Band> = (0..bands)
        .map(|n| {
            let chunk = &flat[n * m..(n + 1) * m];
            Band {
                lambdas: chunk.iter().map(|c| c.0).collect(),
                vectors: chunk
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let p = IndexPair::new(n + 1, j + 1);
                        &c.1 * Cx::new(1.0 / graph_scale(p), 0.0)
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(GraphSpectralData {
        inner: SpectralData::new(m, bands_vec)?,
    })
}

/// Orthonormalized boundary-derivative coefficients of one eigenvalue:
/// kernel basis of the matching matrix, Gram-normalized in `L2`.
fn graph_norming(
    prop: &Propagator<'_>,
    t: &CMat,
    t_perp: &CMat,
    lambda: f64,
    multiplicity: usize,
) -> Result<Vec<CVec>> {
    let m = t.nrows();
    let traj = prop.trajectory(
        Cx::new(lambda, 0.0),
        &CMat::zeros(m, m),
        &CMat::identity(m, m),
    );
    let (pe, de) = traj.end();
    let bmat = t * de - t_perp * pe;
    let tol = MULT_TOL * (1.0 + lambda.abs());
    let kernel = linalg::kernel_basis(&bmat, tol);
    if kernel.len() != multiplicity {
        return Err(Error::RankMismatch {
            lambda,
            kernel_dim: kernel.len(),
            multiplicity,
        });
    }
    let mut w = CMat::zeros(m, multiplicity);
    for (j, v) in kernel.iter().enumerate() {
        w.set_column(j, v);
    }
    let samples: Vec<CMat> = traj.phi.iter().map(|p| p.adjoint() * p).collect();
    let f = trapezoid_matrix(&samples, prop.coeffs().step());
    let g = w.adjoint() * &f * &w;
    let g_inv_half = inv_sqrt_hermitian(&g)?;
    let vmat = &w * g_inv_half;
    Ok((0..multiplicity).map(|j| vmat.column(j).into_owned()).collect())
}

/// Weyl matrix of the graph problem: `Phi'(0, lambda)` for the matrix
/// solution with `Phi(0) = I` satisfying the vertex condition.
pub fn graph_weyl(g: &StarGraphProblem, lambda: Cx) -> Result<CMat> {
    let m = g.edges();
    let coeffs = g.as_coefficients();
    let prop = Propagator::new(&coeffs);
    let (t, t_perp) = projectors(m);
    let (sp, sd) = prop.endpoint(lambda, &CMat::zeros(m, m), &CMat::identity(m, m));
    let b_s = &t * sd - &t_perp * sp;
    let (cp, cd) = prop.endpoint(lambda, &CMat::identity(m, m), &CMat::zeros(m, m));
    let b_c = &t * cd - &t_perp * cp;
    let sv = linalg::singular_values(&b_s);
    let cond = (sv[0] + linalg::opnorm(&b_c) + 1.0) / sv[sv.len() - 1];
    if !cond.is_finite() || cond > crate::direct::WEYL_COND_LIMIT {
        return Err(Error::NearEigenvalue { lambda, cond });
    }
    let lu = PivotedLu::new(b_s);
    let mut rhs = b_c;
    lu.solve_in_place(&mut rhs);
    Ok(-rhs)
}

// ---------------------------------------------------------------------
// Main equation on the graph
// ---------------------------------------------------------------------

/// Precomputed quantities for the sine-kernel main equation.
pub struct GraphMainSystem {
    dim: usize,
    bands: usize,
    rho: Vec<Vec<Cx>>,
    rho_hat: Vec<Vec<Cx>>,
    beta: Vec<Vec<CMat>>,
    beta_first_model: Vec<CMat>,
    beta_rest_model: Vec<CMat>,
    active: Vec<bool>,
}

impl GraphMainSystem {
    pub fn new(data: &GraphSpectralData, bands: usize) -> Result<Self> {
        if data.band_count() < bands {
            return Err(Error::invalid(format!(
                "main equation needs {bands} bands, data carries {}",
                data.band_count()
            )));
        }
        let m = data.dim();
        let (t, t_perp) = projectors(m);
        let mut rho = Vec::with_capacity(bands);
        let mut rho_hat = Vec::with_capacity(bands);
        let mut beta = Vec::with_capacity(bands);
        let mut beta_first_model = Vec::with_capacity(bands);
        let mut beta_rest_model = Vec::with_capacity(bands);
        let mut active = Vec::with_capacity(bands);
        for n in 1..=bands {
            let rs: Vec<Cx> = (1..=m).map(|k| data.rho(IndexPair::new(n, k))).collect();
            let hats: Vec<Cx> = (1..=m)
                .map(|k| rs[k - 1] - Cx::new(graph_model_rho(IndexPair::new(n, k)), 0.0))
                .collect();
            let bs: Vec<CMat> = (1..=m).map(|k| data.beta(IndexPair::new(n, k))).collect();
            let nf = n as f64;
            let bf = &t * Cx::new(2.0 / PI * (nf - 0.5) * (nf - 0.5), 0.0);
            let br = &t_perp * Cx::new(2.0 / PI * nf * nf, 0.0);
            let snap = crate::kernels::MODEL_SNAP_TOL;
            let is_active = hats.iter().any(|h| h.norm() > snap)
                || (&bs[0] - &bf).norm() > snap
                || (bs[1..].iter().fold(CMat::zeros(m, m), |acc, b| acc + b) - &br).norm() > snap;
            rho.push(rs);
            rho_hat.push(hats);
            beta.push(bs);
            beta_first_model.push(bf);
            beta_rest_model.push(br);
            active.push(is_active);
        }
        Ok(GraphMainSystem {
            dim: m,
            bands,
            rho,
            rho_hat,
            beta,
            beta_first_model,
            beta_rest_model,
            active,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn size(&self) -> usize {
        self.bands * (self.dim + 2) * self.dim
    }

    pub fn rho_hat_at(&self, band: usize, k: usize) -> Cx {
        self.rho_hat[band - 1][k - 1]
    }

    fn model_rho_of(&self, n: usize, k: usize) -> f64 {
        graph_model_rho(IndexPair::new(n, k))
    }

    /// Assemble the dense truncated graph system at `x`.
    pub fn assemble(&self, x: f64, derivatives: bool) -> crate::kernels::AssembledSystem {
        let m = self.dim;
        let cols = m + 2;
        let d = self.size();
        let mut psi = CMat::zeros(m, d);
        let mut r = CMat::zeros(d, d);
        let mut psi_dx = derivatives.then(|| CMat::zeros(m, d));
        let mut r_dx = derivatives.then(|| CMat::zeros(d, d));
        let block_at = |n: usize, s: usize| ((n - 1) * cols + (s - 1)) * m;

        for n in 1..=self.bands {
            let nf = Cx::new(n as f64, 0.0);
            let first_ref = Cx::new(n as f64 - 0.5, 0.0);
            let rest_ref = Cx::new(n as f64, 0.0);
            for k in 1..=m {
                let r_ref = Cx::new(self.model_rho_of(n, k), 0.0);
                let w = nf * sin_difference_quotient(x, self.rho[n - 1][k - 1], r_ref);
                let c0 = block_at(n, k);
                for i in 0..m {
                    psi[(i, c0 + i)] = w;
                }
                if let Some(p) = psi_dx.as_mut() {
                    let wd = nf * sin_difference_quotient_dx(x, self.rho[n - 1][k - 1], r_ref);
                    for i in 0..m {
                        p[(i, c0 + i)] = wd;
                    }
                }
            }
            for (s, r_ref) in [(m + 1, first_ref), (m + 2, rest_ref)] {
                let c0 = block_at(n, s);
                let val = nf * sin_cardinal(x, r_ref);
                for i in 0..m {
                    psi[(i, c0 + i)] = val;
                }
                if let Some(p) = psi_dx.as_mut() {
                    let vd = nf * (r_ref * x).cos();
                    for i in 0..m {
                        p[(i, c0 + i)] = vd;
                    }
                }
            }
        }

        for l in 1..=self.bands {
            if !self.active[l - 1] {
                continue;
            }
            let first_ref = Cx::new(l as f64 - 0.5, 0.0);
            let rest_ref = Cx::new(l as f64, 0.0);
            for n in 1..=self.bands {
                let scale = Cx::new(n as f64 / l as f64, 0.0);
                for k in 1..=cols {
                    let eval = |theta: Cx| -> Cx {
                        if k <= m {
                            let r_ref = Cx::new(self.model_rho_of(n, k), 0.0);
                            sin_kernel_quotient(x, theta, self.rho[n - 1][k - 1], r_ref)
                        } else if k == m + 1 {
                            sin_product_integral(x, theta, Cx::new(n as f64 - 0.5, 0.0))
                        } else {
                            sin_product_integral(x, theta, Cx::new(n as f64, 0.0))
                        }
                    };
                    let eval_dx = |theta: Cx| -> Cx {
                        if k <= m {
                            let r_ref = Cx::new(self.model_rho_of(n, k), 0.0);
                            sin_kernel_quotient_dx(x, theta, self.rho[n - 1][k - 1], r_ref)
                        } else if k == m + 1 {
                            sin_product_integral_dx(x, theta, Cx::new(n as f64 - 0.5, 0.0))
                        } else {
                            sin_product_integral_dx(x, theta, Cx::new(n as f64, 0.0))
                        }
                    };
                    let c0 = block_at(n, k);
                    // rows s <= m: individual shifted weights
                    for s in 1..=m {
                        let hat = self.rho_hat[l - 1][s - 1];
                        if hat.norm() <= crate::kernels::MODEL_SNAP_TOL {
                            continue;
                        }
                        let r0 = block_at(l, s);
                        let scal = scale * hat * eval(self.rho[l - 1][s - 1]);
                        write_scaled(&mut r, r0, c0, &self.beta[l - 1][s - 1], scal);
                        if let Some(rd) = r_dx.as_mut() {
                            let scal_dx = scale * hat * eval_dx(self.rho[l - 1][s - 1]);
                            write_scaled(rd, r0, c0, &self.beta[l - 1][s - 1], scal_dx);
                        }
                    }
                    // row m+1: first family against its model weight
                    {
                        let r0 = block_at(l, m + 1);
                        let block = (&self.beta[l - 1][0] * eval(self.rho[l - 1][0])
                            - &self.beta_first_model[l - 1] * eval(first_ref))
                            * scale;
                        write_block(&mut r, r0, c0, &block);
                        if let Some(rd) = r_dx.as_mut() {
                            let block_dx = (&self.beta[l - 1][0] * eval_dx(self.rho[l - 1][0])
                                - &self.beta_first_model[l - 1] * eval_dx(first_ref))
                                * scale;
                            write_block(rd, r0, c0, &block_dx);
                        }
                    }
                    // row m+2: upper families against their model sum
                    {
                        let r0 = block_at(l, m + 2);
                        let mut block = CMat::zeros(m, m);
                        let mut block_dx = derivatives.then(|| CMat::zeros(m, m));
                        for s in 2..=m {
                            block += &self.beta[l - 1][s - 1] * eval(self.rho[l - 1][s - 1]);
                            if let Some(bd) = block_dx.as_mut() {
                                *bd +=
                                    &self.beta[l - 1][s - 1] * eval_dx(self.rho[l - 1][s - 1]);
                            }
                        }
                        block -= &self.beta_rest_model[l - 1] * eval(rest_ref);
                        block *= scale;
                        write_block(&mut r, r0, c0, &block);
                        if let Some(bd) = block_dx.as_mut() {
                            *bd -= &self.beta_rest_model[l - 1] * eval_dx(rest_ref);
                            *bd *= scale;
                            write_block(r_dx.as_mut().unwrap(), r0, c0, bd);
                        }
                    }
                }
            }
        }

        crate::kernels::AssembledSystem {
            x,
            dim: m,
            band_count: self.bands,
            cols_per_band: cols,
            psi,
            r,
            psi_dx,
            r_dx,
        }
    }
}

/// Assemble the graph main equation at one point.
pub fn graph_assemble(
    x: f64,
    data: &GraphSpectralData,
    bands: usize,
) -> Result<crate::kernels::AssembledSystem> {
    Ok(GraphMainSystem::new(data, bands)?.assemble(x, false))
}

// ---------------------------------------------------------------------
// Inverse problem on the graph
// ---------------------------------------------------------------------

struct GraphNode {
    phi: Vec<CMat>,
    phi_dx: Vec<CMat>,
    condition: f64,
}

fn graph_solve_node(
    sys: &GraphMainSystem,
    x: f64,
    node: usize,
    cond_limit: f64,
) -> Result<GraphNode> {
    let m = sys.dim();
    let cols = m + 2;
    let d = sys.size();
    let asm = sys.assemble(x, true);
    let mut a = asm.r.transpose();
    for i in 0..d {
        a[(i, i)] += Cx::new(1.0, 0.0);
    }
    let a_norm1 = linalg::norm1(&a);
    let lu = PivotedLu::new(a);
    let condition = lu.condition_estimate(a_norm1);
    if lu.is_singular() || !condition.is_finite() || condition > cond_limit {
        return Err(Error::IllConditioned {
            node,
            x,
            cond: condition,
            limit: cond_limit,
        });
    }
    let mut psi_t = asm.psi.transpose();
    lu.solve_in_place(&mut psi_t);
    let r_dx_t = asm.r_dx.as_ref().unwrap().transpose();
    let mut rhs = asm.psi_dx.as_ref().unwrap().transpose();
    rhs -= &r_dx_t * &psi_t;
    lu.solve_in_place(&mut rhs);
    let psi_dx_t = rhs;

    let take = |src: &CMat, band: usize, s: usize| -> CMat {
        let r0 = ((band - 1) * cols + (s - 1)) * m;
        src.view((r0, 0), (m, m)).transpose()
    };
    let mut phi = Vec::with_capacity(sys.bands() * cols);
    let mut phi_dx = Vec::with_capacity(sys.bands() * cols);
    for n in 1..=sys.bands() {
        let nf = Cx::new(n as f64, 0.0);
        let anchor_first = take(&psi_t, n, m + 1) / nf;
        let anchor_first_dx = take(&psi_dx_t, n, m + 1) / nf;
        let anchor_rest = take(&psi_t, n, m + 2) / nf;
        let anchor_rest_dx = take(&psi_dx_t, n, m + 2) / nf;
        for k in 1..=m {
            let hat = sys.rho_hat[n - 1][k - 1];
            let w = take(&psi_t, n, k) / nf;
            let w_dx = take(&psi_dx_t, n, k) / nf;
            let (anchor, anchor_dx) = if k == 1 {
                (&anchor_first, &anchor_first_dx)
            } else {
                (&anchor_rest, &anchor_rest_dx)
            };
            phi.push(anchor + w * hat);
            phi_dx.push(anchor_dx + w_dx * hat);
        }
        phi.push(anchor_first);
        phi_dx.push(anchor_first_dx);
        phi.push(anchor_rest);
        phi_dx.push(anchor_rest_dx);
    }
    Ok(GraphNode {
        phi,
        phi_dx,
        condition,
    })
}

/// Result of a graph reconstruction with its quality diagnostics.
#[derive(Clone, Debug)]
pub struct GraphReconstruction {
    pub problem: StarGraphProblem,
    /// Full recovered matrix potential on the grid.
    pub full_q: Vec<CMat>,
    /// Largest operator-norm of the off-diagonal part across the grid.
    pub offdiag_residual: f64,
    pub hermitian_defect: f64,
    pub max_condition: f64,
}

/// Recover the potential from graph spectral data through the sine-kernel
/// main equation: `Q = -2 (d/dx) sum (phi beta phi_model - model terms)`,
/// then read the edge potentials off the diagonal.
pub fn graph_reconstruct(
    data: &GraphSpectralData,
    opts: &InverseOptions,
) -> Result<GraphReconstruction> {
    opts_check(opts)?;
    let m = data.dim();
    let completed = complete_graph_tail(data, opts.bands);
    let sys = GraphMainSystem::new(&completed, opts.bands)?;
    let step = PI / opts.grid as f64;
    let nodes = crate::par::parallel_map(opts.grid + 1, |i| {
        graph_solve_node(&sys, i as f64 * step, i, opts.cond_limit)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let cols = m + 2;
    let mut full_q = Vec::with_capacity(nodes.len());
    let mut defect: f64 = 0.0;
    let mut offdiag: f64 = 0.0;
    for (i, node) in nodes.iter().enumerate() {
        let x = i as f64 * step;
        let mut acc_dx = CMat::zeros(m, m);
        for n in 1..=opts.bands {
            let base = (n - 1) * cols;
            for k in 1..=m {
                let p = IndexPair::new(n, k);
                let rho = completed.rho(p);
                let beta = completed.beta(p);
                let s = sin_cardinal(x, rho).conj();
                let s_dx = (rho * x).cos().conj();
                acc_dx += &node.phi_dx[base + k - 1] * &beta * s
                    + &node.phi[base + k - 1] * &beta * s_dx;
            }
            let first_ref = Cx::new(n as f64 - 0.5, 0.0);
            let rest_ref = Cx::new(n as f64, 0.0);
            let bf = &sys.beta_first_model[n - 1];
            let br = &sys.beta_rest_model[n - 1];
            acc_dx -= &node.phi_dx[base + m] * bf * sin_cardinal(x, first_ref)
                + &node.phi[base + m] * bf * (first_ref * x).cos();
            acc_dx -= &node.phi_dx[base + m + 1] * br * sin_cardinal(x, rest_ref)
                + &node.phi[base + m + 1] * br * (rest_ref * x).cos();
        }
        let q_raw = acc_dx * Cx::new(-2.0, 0.0);
        defect = defect.max(linalg::hermitian_defect(&q_raw));
        let q = if opts.symmetrize {
            linalg::hermitian_part(&q_raw)
        } else {
            q_raw
        };
        let mut off = q.clone();
        for j in 0..m {
            off[(j, j)] = Cx::new(0.0, 0.0);
        }
        offdiag = offdiag.max(linalg::opnorm(&off));
        full_q.push(q);
    }
    let edges: Vec<Vec<f64>> = (0..m)
        .map(|j| full_q.iter().map(|qi| qi[(j, j)].re).collect())
        .collect();
    let max_condition = nodes.iter().map(|n| n.condition).fold(0.0, f64::max);
    Ok(GraphReconstruction {
        problem: StarGraphProblem::new(edges)?,
        full_q,
        offdiag_residual: offdiag,
        hermitian_defect: defect,
        max_condition,
    })
}

fn opts_check(opts: &InverseOptions) -> Result<()> {
    if opts.bands < 1 {
        return Err(Error::invalid("at least one band is required"));
    }
    if opts.grid < 8 {
        return Err(Error::invalid("grid must have at least 8 segments"));
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Riesz diagnostic and per-edge distances
// ---------------------------------------------------------------------

/// Riesz lower-bound surrogate of the sine system
/// `v_nk sin(rho_nk x)` (with the `v x` branch at `rho = 0`).
pub fn graph_riesz(data: &GraphSpectralData, bands: usize) -> f64 {
    let m = data.dim();
    let bands = bands.min(data.band_count());
    let pairs: Vec<IndexPair> = (1..=bands)
        .flat_map(|n| (1..=m).map(move |k| IndexPair::new(n, k)))
        .collect();
    let d = pairs.len();
    if d == 0 {
        return 0.0;
    }
    let sine_inner = |ra: Cx, rb: Cx| -> Cx {
        let a0 = ra.norm() < ZERO_RHO_TOL;
        let b0 = rb.norm() < ZERO_RHO_TOL;
        if a0 && b0 {
            Cx::new(PI * PI * PI / 3.0, 0.0)
        } else if a0 {
            ((rb * PI).sin() - rb * PI * (rb * PI).cos()) / (rb * rb)
        } else if b0 {
            let ra = ra.conj();
            ((ra * PI).sin() - ra * PI * (ra * PI).cos()) / (ra * ra)
        } else {
            let ra = ra.conj();
            (crate::kernels::sinc((ra - rb) * PI) - crate::kernels::sinc((ra + rb) * PI))
                * (0.5 * PI)
        }
    };
    let mut gram = CMat::zeros(d, d);
    for a in 0..d {
        let pa = pairs[a];
        let va = data.vector(pa);
        for b in 0..d {
            let pb = pairs[b];
            let inner = (va.adjoint() * data.vector(pb))[(0, 0)];
            gram[(a, b)] = inner * sine_inner(data.rho(pa), data.rho(pb));
        }
    }
    crate::linalg::lambda_min_hermitian(&gram).max(0.0).sqrt()
}

/// The natural graph partition: one group per eigenvalue family, i.e.
/// `{(n,1)}` and `{(n,2),...,(n,m)}` for each band.
pub fn family_partition(bands: usize, dim: usize) -> Partition {
    let mut groups = Vec::with_capacity(2 * bands);
    for n in 1..=bands {
        groups.push(vec![IndexPair::new(n, 1)]);
        if dim >= 2 {
            groups.push((2..=dim).map(|k| IndexPair::new(n, k)).collect());
        }
    }
    Partition::new(groups).expect("family groups are disjoint")
}

/// Per-edge stability distances `Z_j`, comparing only the `(j, j)` diagonal
/// entries of the group weight sums.
pub fn z_per_edge(
    part: &Partition,
    a: &GraphSpectralData,
    b: &GraphSpectralData,
) -> Result<Vec<f64>> {
    (1..=a.dim())
        .map(|j| crate::stability::zeta_z_diagonal(part, a, b, j).map(|(_, z)| z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_is_rank_one() {
        let (t, t_perp) = projectors(3);
        assert!((&t * &t - &t).norm() < 1e-14);
        assert!((&t * &t_perp).norm() < 1e-14);
        let sv = linalg::singular_values(&t);
        assert!((sv[0] - 1.0).abs() < 1e-14 && sv[1] < 1e-14);
    }

    #[test]
    fn model_graph_data_is_consistent() {
        let d = GraphSpectralData::model(3, 4);
        let (t, t_perp) = projectors(3);
        for n in 1..=4usize {
            let nf = n as f64;
            let bf = d.beta_first(n);
            let expect = &t * Cx::new(2.0 / PI * (nf - 0.5) * (nf - 0.5), 0.0);
            assert!((bf - expect).norm() < 1e-13);
            let br = d.beta_rest(n);
            let expect_r = &t_perp * Cx::new(2.0 / PI * nf * nf, 0.0);
            assert!((br - expect_r).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_graph_forward_families() {
        let g = StarGraphProblem::from_functions(&[&|_| 0.0, &|_| 0.0, &|_| 0.0], 800);
        let d = graph_forward(&g, 3).unwrap();
        for n in 1..=3usize {
            let nf = n as f64;
            assert!((d.lambda(IndexPair::new(n, 1)) - (nf - 0.5).powi(2)).abs() < 1e-8);
            for k in 2..=3 {
                assert!((d.lambda(IndexPair::new(n, k)) - nf * nf).abs() < 1e-8);
            }
            let (t, t_perp) = projectors(3);
            let bf = d.beta_first(n);
            assert!(
                (bf - &t * Cx::new(2.0 / PI * (nf - 0.5) * (nf - 0.5), 0.0)).norm() < 1e-6
            );
            let br = d.beta_rest(n);
            assert!((br - &t_perp * Cx::new(2.0 / PI * nf * nf, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn single_edge_star_is_dirichlet_neumann() {
        let g = StarGraphProblem::from_functions(&[&|_| 0.0], 800);
        let d = graph_forward(&g, 3).unwrap();
        for n in 1..=3usize {
            let expect = (n as f64 - 0.5).powi(2);
            assert!((d.lambda(IndexPair::new(n, 1)) - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn graph_assemble_on_model_data_is_trivial() {
        let d = GraphSpectralData::model(3, 4);
        let asm = graph_assemble(0.8, &d, 4).unwrap();
        assert_eq!(asm.r.norm(), 0.0);
        let m = 3;
        for n in 1..=4usize {
            let nf = n as f64;
            let c0 = ((n - 1) * (m + 2) + m) * m;
            let expect = Cx::new(nf, 0.0) * sin_cardinal(0.8, Cx::new(nf - 0.5, 0.0));
            assert!((asm.psi[(0, c0)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn sine_orthogonality_pinned_value() {
        // ∫ sin t sin 2t over (0, pi) vanishes, so the corresponding
        // kernel entry carries an exact zero.
        let v = sin_product_integral(PI, Cx::new(1.0, 0.0), Cx::new(2.0, 0.0));
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn graph_model_reconstructs_to_zero() {
        let d = GraphSpectralData::model(3, 5);
        let opts = InverseOptions {
            bands: 5,
            grid: 16,
            ..Default::default()
        };
        let rec = graph_reconstruct(&d, &opts).unwrap();
        for e in rec.problem.edge_potentials() {
            assert!(e.iter().all(|v| v.abs() < 1e-12));
        }
        assert!(rec.offdiag_residual < 1e-12);
    }

    #[test]
    fn graph_riesz_model_and_degenerate() {
        let d = GraphSpectralData::model(3, 10);
        let eps = graph_riesz(&d, 10);
        assert!(eps > 0.3, "model eps_hat = {eps}");
        // corrupt: identical rho and vector twice inside one band makes
        // two Gram rows coincide
        let mut bands = d.inner.bands().to_vec();
        bands[2].vectors[2] = bands[2].vectors[1].clone();
        let corrupt = GraphSpectralData::new(SpectralData::new(3, bands).unwrap());
        assert!(graph_riesz(&corrupt, 10) < 1e-3);
    }

    #[test]
    fn graph_riesz_zero_rho_branch() {
        // rho_11 = 0 exercises the `v x` branch
        let mut bands = GraphSpectralData::model(2, 3).inner.bands().to_vec();
        bands[0].lambdas[0] = 0.0;
        let d = GraphSpectralData::new(SpectralData::new(2, bands).unwrap());
        let eps = graph_riesz(&d, 3);
        assert!(eps.is_finite() && eps > 0.0);
    }

    #[test]
    fn helmert_vectors_are_orthonormal_complement() {
        let m = 4;
        let basis = helmert_basis(m);
        let ones = CVec::from_element(m, Cx::new(1.0, 0.0));
        for (i, u) in basis.iter().enumerate() {
            assert!((u.adjoint() * &ones)[(0, 0)].norm() < 1e-14);
            for (j, w) in basis.iter().enumerate() {
                let inner = (u.adjoint() * w)[(0, 0)];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner - Cx::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }
}
