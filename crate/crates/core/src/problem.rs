//! Problem coefficients on the interval: the matrix potential together
//! with the Robin boundary matrices, sampled on a uniform grid over
//! `[0, pi]`, plus validation and the impedance (quasi-derivative) form.

use crate::linalg::{cumulative_trapezoid, hermitian_defect, opnorm, trapezoid_matrix};
use crate::{CMat, Cx, Error, Result, HERMITIAN_TOL, MEAN_DEFECT_TOL};
use std::f64::consts::PI;

/// Coefficient triple `(Q, h, H)` of the boundary value problem
/// `-Y'' + Q Y = lambda Y`, `Y'(0) - h Y(0) = 0`, `Y'(pi) + H Y(pi) = 0`.
///
/// `q` holds `M + 1` samples of the potential on the uniform grid
/// `x_i = i pi / M`. All three coefficients are expected Hermitian.
#[derive(Clone, Debug)]
pub struct Coefficients {
    dim: usize,
    q: Vec<CMat>,
    h: CMat,
    big_h: CMat,
}

impl Coefficients {
    pub fn new(q: Vec<CMat>, h: CMat, big_h: CMat) -> Result<Self> {
        if q.len() < 3 {
            return Err(Error::invalid("the grid needs at least M = 2 segments"));
        }
        let dim = h.nrows();
        if dim == 0 || h.ncols() != dim || big_h.nrows() != dim || big_h.ncols() != dim {
            return Err(Error::invalid("h and H must be square of the same size"));
        }
        if q.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::invalid("potential samples must be m x m"));
        }
        Ok(Coefficients { dim, q, h, big_h })
    }

    /// Zero potential with zero boundary matrices: the model problem.
    pub fn zero(dim: usize, segments: usize) -> Self {
        Coefficients {
            dim,
            q: vec![CMat::zeros(dim, dim); segments + 1],
            h: CMat::zeros(dim, dim),
            big_h: CMat::zeros(dim, dim),
        }
    }

    /// Scalar problem from a potential function sampled on `segments + 1` nodes.
    pub fn scalar(q: impl Fn(f64) -> f64, h: f64, big_h: f64, segments: usize) -> Self {
        let step = PI / segments as f64;
        let samples = (0..=segments)
            .map(|i| CMat::from_element(1, 1, Cx::new(q(i as f64 * step), 0.0)))
            .collect();
        Coefficients {
            dim: 1,
            q: samples,
            h: CMat::from_element(1, 1, Cx::new(h, 0.0)),
            big_h: CMat::from_element(1, 1, Cx::new(big_h, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid segments `M`.
    pub fn segments(&self) -> usize {
        self.q.len() - 1
    }

    pub fn step(&self) -> f64 {
        PI / self.segments() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    pub fn potential(&self) -> &[CMat] {
        &self.q
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn big_h(&self) -> &CMat {
        &self.big_h
    }

    /// Mean defect `h + H + 1/2 ∫ Q` (trapezoid rule).
    pub fn mean_defect(&self) -> CMat {
        &self.h + &self.big_h + trapezoid_matrix(&self.q, self.step()) * Cx::new(0.5, 0.0)
    }

    /// Element-wise L2 norm of the potential, `sum_{jk} ||q_jk||_{L2}`.
    pub fn potential_l2_norm(&self) -> f64 {
        let m = self.dim;
        let step = self.step();
        let mut total = 0.0;
        for j in 0..m {
            for k in 0..m {
                let sq: Vec<f64> = self.q.iter().map(|qi| qi[(j, k)].norm_sqr()).collect();
                total += crate::linalg::trapezoid_scalar(&sq, step).sqrt();
            }
        }
        total
    }

    pub fn validate(&self) -> ValidationReport {
        let mut max_defect = hermitian_defect(&self.h).max(hermitian_defect(&self.big_h));
        for qi in &self.q {
            max_defect = max_defect.max(hermitian_defect(qi));
        }
        let mean_defect_norm = opnorm(&self.mean_defect());
        ValidationReport {
            dim: self.dim,
            segments: self.segments(),
            max_hermitian_defect: max_defect,
            mean_defect_norm,
            hermitian: max_defect <= HERMITIAN_TOL,
            in_restricted_class: max_defect <= HERMITIAN_TOL && mean_defect_norm <= MEAN_DEFECT_TOL,
        }
    }

    /// Linear resampling of the potential onto a different uniform grid;
    /// boundary matrices are copied.
    pub fn resampled(&self, segments: usize) -> Coefficients {
        let src_step = self.step();
        let dst_step = PI / segments as f64;
        let last = self.q.len() - 1;
        let q = (0..=segments)
            .map(|i| {
                let x = i as f64 * dst_step;
                let t = (x / src_step).floor() as usize;
                let t = t.min(last - 1);
                let w = (x - t as f64 * src_step) / src_step;
                &self.q[t] * Cx::new(1.0 - w, 0.0) + &self.q[t + 1] * Cx::new(w, 0.0)
            })
            .collect();
        Coefficients {
            dim: self.dim,
            q,
            h: self.h.clone(),
            big_h: self.big_h.clone(),
        }
    }

    /// Element-wise L2 distance between the potentials plus operator-norm
    /// distances of the boundary matrices.
    pub fn distance(&self, other: &Coefficients) -> Result<f64> {
        if self.dim != other.dim || self.segments() != other.segments() {
            return Err(Error::invalid(
                "coefficient distance requires matching dimensions and grids",
            ));
        }
        let m = self.dim;
        let step = self.step();
        let mut total = 0.0;
        for j in 0..m {
            for k in 0..m {
                let sq: Vec<f64> = self
                    .q
                    .iter()
                    .zip(&other.q)
                    .map(|(a, b)| (a[(j, k)] - b[(j, k)]).norm_sqr())
                    .collect();
                total += crate::linalg::trapezoid_scalar(&sq, step).sqrt();
            }
        }
        total += opnorm(&(&self.h - &other.h));
        total += opnorm(&(&self.big_h - &other.big_h));
        Ok(total)
    }
}

/// Pure validation report; nothing here is an error by itself.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub dim: usize,
    pub segments: usize,
    /// Largest operator-norm Hermiticity defect among Q samples, h, H.
    pub max_hermitian_defect: f64,
    /// Operator norm of `h + H + 1/2 ∫ Q`.
    pub mean_defect_norm: f64,
    pub hermitian: bool,
    /// Whether the triple sits in the restricted class (zero mean defect).
    pub in_restricted_class: bool,
}

/// Impedance form of the problem: `sigma(x) = h + ∫_0^x Q`, together with
/// the transformed right boundary matrix.
#[derive(Clone, Debug)]
pub struct ImpedanceForm {
    pub sigma: Vec<CMat>,
    pub h_check: CMat,
}

/// Convert coefficients to the impedance form by cumulative integration of
/// the potential from the left endpoint.
pub fn to_impedance_form(c: &Coefficients) -> ImpedanceForm {
    let sigma = cumulative_trapezoid(c.potential(), c.step(), c.h().clone());
    let h_check = c.big_h() + sigma.last().expect("grid is non-empty");
    ImpedanceForm { sigma, h_check }
}
