//! Closed-form model-problem kernels and assembly of the linear main
//! equation.
//!
//! Every kernel is an elementary trigonometric expression; difference
//! quotients are evaluated through a stable `sinc` divided-difference so
//! that nearly coincident spectral parameters lose no precision. No
//! numeric quadrature appears anywhere in the assembly path.

use crate::spectral::{IndexPair, SpectralData};
use crate::{CMat, CVec, Cx, Error, Result};
use std::f64::consts::PI;

/// Below this modulus, `sinc`-family functions switch to power series.
const SERIES_SWITCH: f64 = 0.1;
/// Below this argument separation, divided differences switch to the
/// midpoint-derivative form.
const QUOTIENT_SWITCH: f64 = 1e-3;
/// Below this modulus a frequency counts as zero in the sine kernels.
const SMALL_FREQ: f64 = 1e-4;
/// Spectral quantities closer to the model than this are treated as exact
/// model data, so completed tails contribute exactly nothing.
pub(crate) const MODEL_SNAP_TOL: f64 = 1e-13;

/// `sin(z) / z`, continuous at the origin.
pub fn sinc(z: Cx) -> Cx {
    if z.norm() < SERIES_SWITCH {
        let z2 = z * z;
        Cx::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
            + z2 * z2 * z2 * z2 / 362880.0
    } else {
        z.sin() / z
    }
}

fn sinc_d1(z: Cx) -> Cx {
    if z.norm() < SERIES_SWITCH {
        let z2 = z * z;
        z * (Cx::new(-1.0 / 3.0, 0.0) + z2 / 30.0 - z2 * z2 / 840.0 + z2 * z2 * z2 / 45360.0)
    } else {
        (z.cos() - sinc(z)) / z
    }
}

fn sinc_d2(z: Cx) -> Cx {
    if z.norm() < SERIES_SWITCH {
        let z2 = z * z;
        Cx::new(-1.0 / 3.0, 0.0) + z2 / 10.0 - z2 * z2 / 168.0 + z2 * z2 * z2 / 6480.0
    } else {
        -(z.sin() + sinc_d1(z) * 2.0) / z
    }
}

fn sinc_d3(z: Cx) -> Cx {
    if z.norm() < SERIES_SWITCH {
        let z2 = z * z;
        z * (Cx::new(0.2, 0.0) - z2 / 42.0 + z2 * z2 / 1080.0)
    } else {
        -(z.cos() + sinc_d2(z) * 3.0) / z
    }
}

/// Divided difference `(sinc a - sinc b) / (a - b)`, continuous across
/// `a = b` via the symmetric midpoint expansion.
pub fn sinc_divided_difference(a: Cx, b: Cx) -> Cx {
    let d = a - b;
    if d.norm() >= QUOTIENT_SWITCH {
        (sinc(a) - sinc(b)) / d
    } else {
        let mid = (a + b) * 0.5;
        sinc_d1(mid) + sinc_d3(mid) * (d * d / 24.0)
    }
}

/// `D(x, theta^2, rho^2) = ∫_0^x cos(theta t) cos(rho t) dt` in closed form.
pub fn cos_product_integral(x: f64, theta: Cx, rho: Cx) -> Cx {
    (sinc((theta - rho) * x) + sinc((theta + rho) * x)) * (0.5 * x)
}

/// `∂/∂x D(x, theta^2, rho^2) = cos(theta x) cos(rho x)`.
pub fn cos_product_integral_dx(x: f64, theta: Cx, rho: Cx) -> Cx {
    (theta * x).cos() * (rho * x).cos()
}

/// Difference quotient of the model cosine in the spectral parameter:
/// `(cos(rho x) - cos(rho_ref x)) / (rho - rho_ref)`, equal to the
/// derivative `-x sin(rho_ref x)` at coincidence.
pub fn cos_difference_quotient(x: f64, rho: Cx, rho_ref: Cx) -> Cx {
    -(((rho + rho_ref) * (0.5 * x)).sin()) * sinc((rho - rho_ref) * (0.5 * x)) * x
}

/// `∂/∂x` of [`cos_difference_quotient`].
pub fn cos_difference_quotient_dx(x: f64, rho: Cx, rho_ref: Cx) -> Cx {
    -(rho * ((rho + rho_ref) * (0.5 * x)).cos() * sinc((rho - rho_ref) * (0.5 * x)) * x
        + (rho_ref * x).sin())
}

/// Difference quotient of the cosine product integral in its second
/// frequency: `(D(x, theta^2, rho^2) - D(x, theta^2, rho_ref^2)) / (rho - rho_ref)`.
pub fn cos_kernel_quotient(x: f64, theta: Cx, rho: Cx, rho_ref: Cx) -> Cx {
    let plus = sinc_divided_difference((theta + rho) * x, (theta + rho_ref) * x);
    let minus = sinc_divided_difference((theta - rho) * x, (theta - rho_ref) * x);
    (plus - minus) * (0.5 * x * x)
}

/// `∂/∂x` of [`cos_kernel_quotient`].
pub fn cos_kernel_quotient_dx(x: f64, theta: Cx, rho: Cx, rho_ref: Cx) -> Cx {
    (theta * x).cos() * cos_difference_quotient(x, rho, rho_ref)
}

/// `sin(rho x) / rho`, continuous at `rho = 0` (value `x`).
pub fn sin_cardinal(x: f64, rho: Cx) -> Cx {
    sinc(rho * x) * x
}

/// `∫_0^x (sin(theta t)/theta) (sin(rho t)/rho) dt` in closed form, stable
/// for small frequencies.
pub fn sin_product_integral(x: f64, theta: Cx, rho: Cx) -> Cx {
    let ts = theta.norm() < SMALL_FREQ;
    let rs = rho.norm() < SMALL_FREQ;
    if !ts && !rs {
        (sinc((theta - rho) * x) - sinc((theta + rho) * x)) * (0.5 * x) / (theta * rho)
    } else if ts && rs {
        // ∫ t^2 sinc(theta t) sinc(rho t) dt, truncated series
        let x2 = x * x;
        let sum2 = theta * theta + rho * rho;
        (Cx::new(1.0, 0.0) / 3.0 - sum2 * (x2 / 30.0)) * (x2 * x)
    } else {
        let (big, small) = if ts { (rho, theta) } else { (theta, rho) };
        -sinc_divided_difference((big - small) * x, (big + small) * x) * (x * x) / big
    }
}

/// `∂/∂x` of [`sin_product_integral`].
pub fn sin_product_integral_dx(x: f64, theta: Cx, rho: Cx) -> Cx {
    sin_cardinal(x, theta) * sin_cardinal(x, rho)
}

/// Difference quotient of the model sine kernel in the spectral parameter:
/// `(sin(rho x)/rho - sin(rho_ref x)/rho_ref) / (rho - rho_ref)`.
pub fn sin_difference_quotient(x: f64, rho: Cx, rho_ref: Cx) -> Cx {
    sinc_divided_difference(rho * x, rho_ref * x) * (x * x)
}

/// `∂/∂x` of [`sin_difference_quotient`].
pub fn sin_difference_quotient_dx(x: f64, rho: Cx, rho_ref: Cx) -> Cx {
    cos_difference_quotient(x, rho, rho_ref)
}

/// Difference quotient of the sine product integral in its second
/// frequency, stable when `rho` and `rho_ref` nearly coincide.
pub fn sin_kernel_quotient(x: f64, theta: Cx, rho: Cx, rho_ref: Cx) -> Cx {
    if theta.norm() < QUOTIENT_SWITCH
        || rho.norm() < QUOTIENT_SWITCH
        || rho_ref.norm() < QUOTIENT_SWITCH
    {
        // Frequencies this small never coincide with the model references,
        // so the direct quotient is safe here.
        return (sin_product_integral(x, theta, rho) - sin_product_integral(x, theta, rho_ref))
            / (rho - rho_ref);
    }
    // A(r) := g(theta - r) - g(theta + r) with g(u) = sin(u x)/u; then
    // W = ((A(rho) - A(ref))/(rho - ref) - A(ref)/ref) / (2 theta rho).
    let x2 = x * x;
    let quot = -(sinc_divided_difference((theta - rho) * x, (theta - rho_ref) * x)
        + sinc_divided_difference((theta + rho) * x, (theta + rho_ref) * x))
        * x2;
    let a_ref = (sinc((theta - rho_ref) * x) - sinc((theta + rho_ref) * x)) * x;
    (quot - a_ref / rho_ref) / (theta * rho * 2.0)
}

/// `∂/∂x` of [`sin_kernel_quotient`].
pub fn sin_kernel_quotient_dx(x: f64, theta: Cx, rho: Cx, rho_ref: Cx) -> Cx {
    sin_cardinal(x, theta) * sin_difference_quotient(x, rho, rho_ref)
}

// ---------------------------------------------------------------------
// Model problem data (zero potential, zero boundary matrices)
// ---------------------------------------------------------------------

/// `rho` of band `n` of the model problem: `n - 1`.
pub fn model_rho(band: usize) -> f64 {
    (band - 1) as f64
}

pub fn model_lambda(band: usize) -> f64 {
    let r = model_rho(band);
    r * r
}

/// Scale of the model band sum: `1/pi` for the first band, `2/pi` after.
pub fn model_beta_scale(band: usize) -> f64 {
    if band == 1 {
        1.0 / PI
    } else {
        2.0 / PI
    }
}

pub fn model_beta_band(band: usize, dim: usize) -> CMat {
    CMat::identity(dim, dim) * Cx::new(model_beta_scale(band), 0.0)
}

/// Model norming vectors of one band: scaled standard basis vectors.
pub fn model_vectors(band: usize, dim: usize) -> Vec<CVec> {
    let scale = model_beta_scale(band).sqrt();
    (0..dim)
        .map(|k| {
            let mut v = CVec::zeros(dim);
            v[k] = Cx::new(scale, 0.0);
            v
        })
        .collect()
}

/// Per-band distance of spectral data from the model problem:
/// `xi_n = sum_k |rho_nk - rho_ref_n| + ||beta_n - beta_ref_n||`.
pub fn xi_sequence(data: &SpectralData) -> Vec<f64> {
    let m = data.dim();
    (1..=data.band_count())
        .map(|n| {
            let r_ref = Cx::new(model_rho(n), 0.0);
            let spread: f64 = (1..=m)
                .map(|k| (data.rho(IndexPair::new(n, k)) - r_ref).norm())
                .sum();
            let defect = crate::linalg::opnorm(&(data.beta_band(n) - model_beta_band(n, m)));
            spread + defect
        })
        .collect()
}

// ---------------------------------------------------------------------
// Main equation assembly (interval problem)
// ---------------------------------------------------------------------

/// Dense snapshot of the truncated main equation at one point: the row
/// vector of model kernels and the block operator acting on it.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub x: f64,
    pub dim: usize,
    pub band_count: usize,
    /// Block columns per band: `m + 1` on the interval, `m + 2` on the graph.
    pub cols_per_band: usize,
    /// `m x D` row of blocks, `D = band_count * cols_per_band * dim`.
    pub psi: CMat,
    /// `D x D` block matrix acting from the right.
    pub r: CMat,
    pub psi_dx: Option<CMat>,
    pub r_dx: Option<CMat>,
}

impl AssembledSystem {
    pub fn size(&self) -> usize {
        self.band_count * self.cols_per_band * self.dim
    }

    /// View of one `m x m` block of the operator.
    pub fn block(&self, row: (usize, usize), col: (usize, usize)) -> CMat {
        let m = self.dim;
        let r0 = ((row.0 - 1) * self.cols_per_band + (row.1 - 1)) * m;
        let c0 = ((col.0 - 1) * self.cols_per_band + (col.1 - 1)) * m;
        self.r.view((r0, c0), (m, m)).into_owned()
    }
}

/// Precomputed spectral quantities for assembling the interval main
/// equation at arbitrary points.
pub struct MainSystem {
    dim: usize,
    bands: usize,
    rho: Vec<Vec<Cx>>,
    rho_hat: Vec<Vec<Cx>>,
    beta: Vec<Vec<CMat>>,
    model_beta: Vec<CMat>,
    /// Bands identical to the model contribute nothing to the operator.
    active: Vec<bool>,
}

impl MainSystem {
    pub fn new(data: &SpectralData, bands: usize) -> Result<Self> {
        if data.band_count() < bands {
            return Err(Error::invalid(format!(
                "main equation needs {bands} bands, data carries {}",
                data.band_count()
            )));
        }
        let m = data.dim();
        let mut rho = Vec::with_capacity(bands);
        let mut rho_hat = Vec::with_capacity(bands);
        let mut beta = Vec::with_capacity(bands);
        let mut model_beta = Vec::with_capacity(bands);
        let mut active = Vec::with_capacity(bands);
        for n in 1..=bands {
            let r_ref = Cx::new(model_rho(n), 0.0);
            let rs: Vec<Cx> = (1..=m).map(|k| data.rho(IndexPair::new(n, k))).collect();
            let hats: Vec<Cx> = rs.iter().map(|r| r - r_ref).collect();
            let bs: Vec<CMat> = (1..=m).map(|k| data.beta(IndexPair::new(n, k))).collect();
            let band_sum = data.beta_band(n);
            let mb = model_beta_band(n, m);
            let is_active = hats.iter().any(|h| h.norm() > MODEL_SNAP_TOL)
                || (&band_sum - &mb).norm() > MODEL_SNAP_TOL;
            rho.push(rs);
            rho_hat.push(hats);
            beta.push(bs);
            model_beta.push(mb);
            active.push(is_active);
        }
        Ok(MainSystem {
            dim: m,
            bands,
            rho,
            rho_hat,
            beta,
            model_beta,
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
        self.bands * (self.dim + 1) * self.dim
    }

    pub fn rho_hat(&self, band: usize, k: usize) -> Cx {
        self.rho_hat[band - 1][k - 1]
    }

    /// Assemble the dense truncated system at `x`; optionally also its
    /// x-derivative counterparts.
    pub fn assemble(&self, x: f64, derivatives: bool) -> AssembledSystem {
        let m = self.dim;
        let cols = m + 1;
        let d = self.size();
        let mut psi = CMat::zeros(m, d);
        let mut r = CMat::zeros(d, d);
        let mut psi_dx = derivatives.then(|| CMat::zeros(m, d));
        let mut r_dx = derivatives.then(|| CMat::zeros(d, d));

        let block_at = |n: usize, s: usize| ((n - 1) * cols + (s - 1)) * m;

        // psi row: difference quotients for k <= m, plain model cosine for m+1.
        for n in 1..=self.bands {
            let r_ref = Cx::new(model_rho(n), 0.0);
            for k in 1..=m {
                let w = cos_difference_quotient(x, self.rho[n - 1][k - 1], r_ref);
                let c0 = block_at(n, k);
                for i in 0..m {
                    psi[(i, c0 + i)] = w;
                }
                if let Some(p) = psi_dx.as_mut() {
                    let wd = cos_difference_quotient_dx(x, self.rho[n - 1][k - 1], r_ref);
                    for i in 0..m {
                        p[(i, c0 + i)] = wd;
                    }
                }
            }
            let c0 = block_at(n, m + 1);
            let val = Cx::new((model_rho(n) * x).cos(), 0.0);
            for i in 0..m {
                psi[(i, c0 + i)] = val;
            }
            if let Some(p) = psi_dx.as_mut() {
                let rr = model_rho(n);
                let vd = Cx::new(-rr * (rr * x).sin(), 0.0);
                for i in 0..m {
                    p[(i, c0 + i)] = vd;
                }
            }
        }

        // Operator blocks, row band l, column band n.
        for l in 1..=self.bands {
            if !self.active[l - 1] {
                continue;
            }
            let l_ref = Cx::new(model_rho(l), 0.0);
            for n in 1..=self.bands {
                let n_ref = Cx::new(model_rho(n), 0.0);
                for k in 1..=cols {
                    // Kernel in the second frequency for this column.
                    let eval = |theta: Cx| -> Cx {
                        if k <= m {
                            cos_kernel_quotient(x, theta, self.rho[n - 1][k - 1], n_ref)
                        } else {
                            cos_product_integral(x, theta, n_ref)
                        }
                    };
                    let eval_dx = |theta: Cx| -> Cx {
                        if k <= m {
                            cos_kernel_quotient_dx(x, theta, self.rho[n - 1][k - 1], n_ref)
                        } else {
                            cos_product_integral_dx(x, theta, n_ref)
                        }
                    };
                    let c0 = block_at(n, k);
                    for s in 1..=m {
                        let hat = self.rho_hat[l - 1][s - 1];
                        if hat.norm() <= MODEL_SNAP_TOL {
                            continue;
                        }
                        let r0 = block_at(l, s);
                        let scal = hat * eval(self.rho[l - 1][s - 1]);
                        write_scaled(&mut r, r0, c0, &self.beta[l - 1][s - 1], scal);
                        if let Some(rd) = r_dx.as_mut() {
                            let scal_dx = hat * eval_dx(self.rho[l - 1][s - 1]);
                            write_scaled(rd, r0, c0, &self.beta[l - 1][s - 1], scal_dx);
                        }
                    }
                    let r0 = block_at(l, m + 1);
                    let mut block = CMat::zeros(m, m);
                    let mut block_dx = derivatives.then(|| CMat::zeros(m, m));
                    for s in 1..=m {
                        block += &self.beta[l - 1][s - 1] * eval(self.rho[l - 1][s - 1]);
                        if let Some(bd) = block_dx.as_mut() {
                            *bd += &self.beta[l - 1][s - 1] * eval_dx(self.rho[l - 1][s - 1]);
                        }
                    }
                    block -= &self.model_beta[l - 1] * eval(l_ref);
                    write_block(&mut r, r0, c0, &block);
                    if let Some(bd) = block_dx.as_mut() {
                        *bd -= &self.model_beta[l - 1] * eval_dx(l_ref);
                        write_block(r_dx.as_mut().unwrap(), r0, c0, bd);
                    }
                }
            }
        }

        AssembledSystem {
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

pub(crate) fn write_scaled(target: &mut CMat, r0: usize, c0: usize, block: &CMat, scale: Cx) {
    let m = block.nrows();
    for i in 0..m {
        for j in 0..m {
            target[(r0 + i, c0 + j)] += block[(i, j)] * scale;
        }
    }
}

pub(crate) fn write_block(target: &mut CMat, r0: usize, c0: usize, block: &CMat) {
    let m = block.nrows();
    for i in 0..m {
        for j in 0..m {
            target[(r0 + i, c0 + j)] += block[(i, j)];
        }
    }
}
