//! Forward solver for the interval problem: matrix trajectories of the
//! Sturm-Liouville equation, eigenvalue localization through a singular
//! value scan of the boundary matrix, norming vectors, weight matrices,
//! and the Weyl matrix.

use crate::linalg::{self, inv_sqrt_hermitian, trapezoid_matrix, PivotedLu};
use crate::problem::Coefficients;
use crate::spectral::{Band, SpectralData};
use crate::{CMat, CVec, Cx, Error, Result};

/// Singular values below `MULT_TOL * (1 + |lambda|)` count towards an
/// eigenvalue's multiplicity.
pub const MULT_TOL: f64 = 1e-6;
/// Default spacing of the localization mesh in the `rho` parameter.
pub const SCAN_STEP: f64 = 0.1;
/// Condition-number ceiling for Weyl matrix evaluation.
pub const WEYL_COND_LIMIT: f64 = 1e12;

fn one() -> Cx {
    Cx::new(1.0, 0.0)
}

/// In-place `y += a * x` for same-shape matrices.
#[inline]
fn add_scaled(y: &mut CMat, a: Cx, x: &CMat) {
    y.zip_apply(x, |yi, xi| *yi += a * xi);
}

/// Values of a matrix solution and its derivative on the problem grid.
#[derive(Clone, Debug)]
pub struct MatrixTrajectory {
    pub step: f64,
    pub phi: Vec<CMat>,
    pub phi_prime: Vec<CMat>,
}

impl MatrixTrajectory {
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn end(&self) -> (&CMat, &CMat) {
        (
            self.phi.last().expect("non-empty trajectory"),
            self.phi_prime.last().expect("non-empty trajectory"),
        )
    }
}

/// Classical fourth-order one-step integrator for
/// `(phi, phi')' = (phi', (Q - lambda) phi)` on the fixed problem grid.
/// Midpoint potential values come from cubic interpolation of the stored
/// samples, so the scheme stays fourth order for smooth potentials.
pub struct Propagator<'a> {
    coeffs: &'a Coefficients,
    q_mid: Vec<CMat>,
}

impl<'a> Propagator<'a> {
    pub fn new(coeffs: &'a Coefficients) -> Self {
        let q = coeffs.potential();
        let m = q.len() - 1;
        let s = |i: usize, w: f64| -> CMat { &q[i] * Cx::new(w / 16.0, 0.0) };
        let mut q_mid = Vec::with_capacity(m);
        for i in 0..m {
            let mid = if m >= 3 {
                if i == 0 {
                    s(0, 5.0) + s(1, 15.0) - s(2, 5.0) + s(3, 1.0)
                } else if i == m - 1 {
                    s(m - 3, 1.0) - s(m - 2, 5.0) + s(m - 1, 15.0) + s(m, 5.0)
                } else {
                    -s(i - 1, 1.0) + s(i, 9.0) + s(i + 1, 9.0) - s(i + 2, 1.0)
                }
            } else if i == 0 {
                (&q[0] * Cx::new(3.0 / 8.0, 0.0)) + (&q[1] * Cx::new(6.0 / 8.0, 0.0))
                    - (&q[2] * Cx::new(1.0 / 8.0, 0.0))
            } else {
                (&q[2] * Cx::new(3.0 / 8.0, 0.0)) + (&q[1] * Cx::new(6.0 / 8.0, 0.0))
                    - (&q[0] * Cx::new(1.0 / 8.0, 0.0))
            };
            q_mid.push(mid);
        }
        Propagator { coeffs, q_mid }
    }

    pub fn coeffs(&self) -> &Coefficients {
        self.coeffs
    }

    fn run(
        &self,
        lambda: Cx,
        p0: &CMat,
        d0: &CMat,
        mut store: Option<&mut MatrixTrajectory>,
    ) -> (CMat, CMat) {
        let m = self.coeffs.dim();
        let q = self.coeffs.potential();
        let h = self.coeffs.step();
        let (hc, h2c) = (Cx::new(h, 0.0), Cx::new(0.5 * h, 0.0));
        let q4c = Cx::new(0.25 * h * h, 0.0);
        let hsq2 = Cx::new(0.5 * h * h, 0.0);
        let h26c = Cx::new(h * h / 6.0, 0.0);
        let h6c = Cx::new(h / 6.0, 0.0);
        let h3c = Cx::new(h / 3.0, 0.0);

        let mut p = p0.clone();
        let mut d = d0.clone();
        let mut k1 = CMat::zeros(m, m);
        let mut k2 = CMat::zeros(m, m);
        let mut k3 = CMat::zeros(m, m);
        let mut k4 = CMat::zeros(m, m);
        let mut pa = CMat::zeros(m, m);

        // kd = (q - lambda) * p_arg
        let stage = |qm: &CMat, p_arg: &CMat, out: &mut CMat| {
            out.copy_from(p_arg);
            *out *= -lambda;
            out.gemm(one(), qm, p_arg, one());
        };

        if let Some(t) = store.as_deref_mut() {
            t.phi.push(p.clone());
            t.phi_prime.push(d.clone());
        }
        for i in 0..q.len() - 1 {
            stage(&q[i], &p, &mut k1);
            pa.copy_from(&p);
            add_scaled(&mut pa, h2c, &d);
            stage(&self.q_mid[i], &pa, &mut k2);
            add_scaled(&mut pa, q4c, &k1);
            stage(&self.q_mid[i], &pa, &mut k3);
            pa.copy_from(&p);
            add_scaled(&mut pa, hc, &d);
            add_scaled(&mut pa, hsq2, &k2);
            stage(&q[i + 1], &pa, &mut k4);

            add_scaled(&mut p, hc, &d);
            add_scaled(&mut p, h26c, &k1);
            add_scaled(&mut p, h26c, &k2);
            add_scaled(&mut p, h26c, &k3);
            add_scaled(&mut d, h6c, &k1);
            add_scaled(&mut d, h3c, &k2);
            add_scaled(&mut d, h3c, &k3);
            add_scaled(&mut d, h6c, &k4);

            if let Some(t) = store.as_deref_mut() {
                t.phi.push(p.clone());
                t.phi_prime.push(d.clone());
            }
        }
        (p, d)
    }

    /// Endpoint values `(phi(pi), phi'(pi))` without storing the trajectory.
    pub fn endpoint(&self, lambda: Cx, p0: &CMat, d0: &CMat) -> (CMat, CMat) {
        self.run(lambda, p0, d0, None)
    }

    /// Full trajectory from given initial values.
    pub fn trajectory(&self, lambda: Cx, p0: &CMat, d0: &CMat) -> MatrixTrajectory {
        let mut t = MatrixTrajectory {
            step: self.coeffs.step(),
            phi: Vec::with_capacity(self.coeffs.segments() + 1),
            phi_prime: Vec::with_capacity(self.coeffs.segments() + 1),
        };
        self.run(lambda, p0, d0, Some(&mut t));
        t
    }

    /// Trajectory of the solution normalized by `phi(0) = I`, `phi'(0) = h`.
    pub fn phi_trajectory(&self, lambda: Cx) -> MatrixTrajectory {
        let m = self.coeffs.dim();
        self.trajectory(lambda, &CMat::identity(m, m), &self.coeffs.h().clone())
    }

    /// Boundary matrix `phi'(pi) + H phi(pi)` whose singular lambdas are
    /// the eigenvalues.
    pub fn boundary_matrix(&self, lambda: Cx) -> CMat {
        let m = self.coeffs.dim();
        let (p, d) = self.endpoint(lambda, &CMat::identity(m, m), self.coeffs.h());
        d + self.coeffs.big_h() * p
    }
}

/// Matrix solution values `phi(x_i, lambda)` and `phi'(x_i, lambda)` with
/// the standard initial conditions.
pub fn integrate_phi(coeffs: &Coefficients, lambda: Cx) -> MatrixTrajectory {
    Propagator::new(coeffs).phi_trajectory(lambda)
}

/// `phi'(pi, lambda) + H phi(pi, lambda)` at real `lambda`.
pub fn boundary_matrix(coeffs: &Coefficients, lambda: f64) -> CMat {
    Propagator::new(coeffs).boundary_matrix(Cx::new(lambda, 0.0))
}

// ---------------------------------------------------------------------
// Eigenvalue localization
// ---------------------------------------------------------------------

/// Scan parameter: `lambda = s |s|`, so one real axis covers the negative
/// spectrum and `s = rho` on the positive side.
fn lambda_of_s(s: f64) -> f64 {
    s * s.abs()
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ScanRoot {
    pub s: f64,
    pub lambda: f64,
    pub multiplicity: usize,
}

/// One localization window: expect `expected` roots (with multiplicity)
/// for band `band`, nearest to `anchor` in the scan parameter.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BandWindow {
    pub s_lo: f64,
    pub s_hi: f64,
    pub expected: usize,
    pub band: usize,
    pub anchor: f64,
}

fn multiplicity_at(boundary: &(dyn Fn(f64) -> CMat + Sync), lambda: f64) -> usize {
    let b = boundary(lambda);
    let tol = MULT_TOL * (1.0 + lambda.abs());
    linalg::singular_values(&b).iter().filter(|s| **s < tol).count()
}

/// Bracketed minimization of `f(s)^2` by safeguarded parabolic
/// interpolation; `f` is the smallest singular value along the scan.
fn refine_minimum(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut c: f64) -> f64 {
    let g = |s: f64| {
        let v = f(s);
        v * v
    };
    let (mut ga, mut gb, mut gc) = (g(a), g(b), g(c));
    for _ in 0..90 {
        if c - a < 1e-13 * (1.0 + b.abs()) {
            break;
        }
        let d1 = (gb - ga) / (b - a);
        let d2 = (gc - gb) / (c - b);
        let curv = (d2 - d1) / (c - a);
        let mut v = if curv > 0.0 {
            0.5 * (a + b) - d1 / (2.0 * curv)
        } else {
            f64::NAN
        };
        if !v.is_finite() || v <= a || v >= c || (v - b).abs() < 1e-15 * (1.0 + b.abs()) {
            v = if b - a > c - b {
                0.5 * (a + b)
            } else {
                0.5 * (b + c)
            };
        }
        let gv = g(v);
        if v < b {
            if gv <= gb {
                c = b;
                gc = gb;
                b = v;
                gb = gv;
            } else {
                a = v;
                ga = gv;
            }
        } else if gv <= gb {
            a = b;
            ga = gb;
            b = v;
            gb = gv;
        } else {
            c = v;
            gc = gv;
        }
    }
    b
}

fn window_contains(w: &BandWindow, s: f64) -> bool {
    s >= w.s_lo && s < w.s_hi
}

fn assign_window(windows: &[BandWindow], s: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, w) in windows.iter().enumerate() {
        if window_contains(w, s) {
            let d = (s - w.anchor).abs();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn scan_window_minima(
    boundary: &(dyn Fn(f64) -> CMat + Sync),
    lo: f64,
    hi: f64,
    mesh: f64,
) -> Vec<(f64, f64, f64)> {
    let count = ((hi - lo) / mesh).ceil() as usize + 3;
    let values = crate::par::parallel_map(count, |i| {
        let s = lo - mesh + i as f64 * mesh;
        linalg::sigma_min(&boundary(lambda_of_s(s)))
    });
    let mut brackets = Vec::new();
    for i in 1..count - 1 {
        if values[i] < values[i - 1] && values[i] <= values[i + 1] {
            let s = lo - mesh + i as f64 * mesh;
            brackets.push((s - mesh, s, s + mesh));
        }
    }
    brackets
}

fn merge_root(roots: &mut Vec<ScanRoot>, candidate: ScanRoot) {
    for r in roots.iter_mut() {
        if (r.s - candidate.s).abs() < 1e-7 * (1.0 + candidate.s.abs()) {
            if candidate.multiplicity > r.multiplicity {
                *r = candidate;
            }
            return;
        }
    }
    roots.push(candidate);
}

/// Run the windowed singular-value scan: mesh sweep, parabolic refinement,
/// multiplicity counting, and adaptive rescans of windows whose root count
/// disagrees with the expectation.
pub(crate) fn scan_spectrum(
    boundary: &(dyn Fn(f64) -> CMat + Sync),
    windows: &[BandWindow],
    mesh: f64,
) -> Result<Vec<ScanRoot>> {
    let smin = |s: f64| linalg::sigma_min(&boundary(lambda_of_s(s)));
    let mut roots: Vec<ScanRoot> = Vec::new();
    let counts = |roots: &[ScanRoot]| -> Vec<usize> {
        let mut c = vec![0usize; windows.len()];
        for r in roots {
            if let Some(i) = assign_window(windows, r.s) {
                c[i] += r.multiplicity;
            }
        }
        c
    };
    let refine_brackets = |brackets: &[(f64, f64, f64)], roots: &mut Vec<ScanRoot>| {
        let refined = crate::par::parallel_map(brackets.len(), |i| {
            let (a, b, c) = brackets[i];
            let s = refine_minimum(&smin, a, b, c);
            let lambda = lambda_of_s(s);
            let mult = multiplicity_at(boundary, lambda);
            ScanRoot {
                s,
                lambda,
                multiplicity: mult,
            }
        });
        for r in refined {
            if r.multiplicity >= 1 {
                merge_root(roots, r);
            }
        }
    };
    for attempt in 0..4 {
        let cur_mesh = mesh / 10f64.powi(attempt);
        let current = counts(&roots);
        let targets: Vec<usize> = (0..windows.len())
            .filter(|i| current[*i] != windows[*i].expected)
            .collect();
        if targets.is_empty() {
            break;
        }
        let mut brackets = Vec::new();
        for &wi in &targets {
            let w = &windows[wi];
            // cap the evaluation count on very wide windows
            let mesh_w = cur_mesh.max((w.s_hi - w.s_lo) / 1e5);
            brackets.extend(scan_window_minima(boundary, w.s_lo, w.s_hi, mesh_w));
        }
        refine_brackets(&brackets, &mut roots);
    }
    // Focused pass: nearly degenerate pairs closer than the finest window
    // mesh show up as one root; re-scan tight neighborhoods around the
    // roots of still-deficient windows.
    let current = counts(&roots);
    let deficient: Vec<usize> = (0..windows.len())
        .filter(|i| current[*i] < windows[*i].expected)
        .collect();
    if !deficient.is_empty() {
        let mut brackets = Vec::new();
        for &wi in &deficient {
            let w = &windows[wi];
            let centers: Vec<f64> = roots
                .iter()
                .filter(|r| assign_window(windows, r.s) == Some(wi))
                .map(|r| r.s)
                .collect();
            for center in centers {
                brackets.extend(scan_window_minima(
                    boundary,
                    (center - 3e-4).max(w.s_lo),
                    (center + 3e-4).min(w.s_hi),
                    1e-6,
                ));
            }
        }
        refine_brackets(&brackets, &mut roots);
    }
    let final_counts = counts(&roots);
    for (i, w) in windows.iter().enumerate() {
        if final_counts[i] != w.expected {
            return Err(Error::BandIncomplete {
                band: w.band,
                found: final_counts[i],
                expected: w.expected,
            });
        }
    }
    roots.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    Ok(roots)
}

/// Lower end of the scan in lambda: a standard form bound covering every
/// negative eigenvalue.
fn scan_floor(coeffs: &Coefficients) -> f64 {
    let bound = linalg::opnorm(coeffs.h())
        + linalg::opnorm(coeffs.big_h())
        + coeffs.potential_l2_norm() * std::f64::consts::PI.sqrt()
        + 1.0;
    -(bound * bound)
}

fn interval_windows(coeffs: &Coefficients, bands: usize) -> Vec<BandWindow> {
    let m = coeffs.dim();
    let s_lo = -(-scan_floor(coeffs)).sqrt();
    let mut windows = vec![BandWindow {
        s_lo,
        s_hi: 0.5,
        expected: m,
        band: 1,
        anchor: 0.0,
    }];
    for n in 2..=bands {
        windows.push(BandWindow {
            s_lo: n as f64 - 1.5,
            s_hi: n as f64 - 0.5,
            expected: m,
            band: n,
            anchor: n as f64 - 1.0,
        });
    }
    windows
}

/// Lowest `bands * m` eigenvalues, grouped into bands of `m` each,
/// counting multiplicities.
pub fn find_eigenvalues(coeffs: &Coefficients, bands: usize) -> Result<Vec<Vec<f64>>> {
    let roots = interval_roots(coeffs, bands)?;
    Ok(group_bands(&roots, coeffs.dim(), bands))
}

fn interval_roots(coeffs: &Coefficients, bands: usize) -> Result<Vec<ScanRoot>> {
    let prop = Propagator::new(coeffs);
    let boundary = |lambda: f64| prop.boundary_matrix(Cx::new(lambda, 0.0));
    let windows = interval_windows(coeffs, bands);
    scan_spectrum(&boundary, &windows, SCAN_STEP)
}

pub(crate) fn group_bands(roots: &[ScanRoot], dim: usize, bands: usize) -> Vec<Vec<f64>> {
    let mut flat = Vec::new();
    for r in roots {
        for _ in 0..r.multiplicity {
            flat.push(r.lambda);
        }
    }
    flat.truncate(bands * dim);
    flat.chunks(dim).map(|c| c.to_vec()).collect()
}

// ---------------------------------------------------------------------
// Norming vectors and weight matrices
// ---------------------------------------------------------------------

/// Norming vectors of one eigenvalue: an orthonormalized kernel basis of
/// the boundary matrix. Returned vectors `v` make `phi(., lambda) v`
/// orthonormal in `L2`; they are unique only up to a right unitary factor.
pub fn norming_vectors(
    coeffs: &Coefficients,
    lambda: f64,
    multiplicity: usize,
) -> Result<Vec<CVec>> {
    let prop = Propagator::new(coeffs);
    norming_vectors_with(&prop, lambda, multiplicity)
}

fn norming_vectors_with(
    prop: &Propagator<'_>,
    lambda: f64,
    multiplicity: usize,
) -> Result<Vec<CVec>> {
    let coeffs = prop.coeffs();
    let m = coeffs.dim();
    let traj = prop.phi_trajectory(Cx::new(lambda, 0.0));
    let (pe, de) = traj.end();
    let bmat = de + coeffs.big_h() * pe;
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
    // F = ∫ phi* phi dx on the grid, then G = W* F W.
    let samples: Vec<CMat> = traj
        .phi
        .iter()
        .map(|p| p.adjoint() * p)
        .collect();
    let f = trapezoid_matrix(&samples, coeffs.step());
    let g = w.adjoint() * &f * &w;
    let g_inv_half = inv_sqrt_hermitian(&g)?;
    let vmat = &w * g_inv_half;
    Ok((0..multiplicity).map(|j| vmat.column(j).into_owned()).collect())
}

/// Full forward solve: eigenvalue bands plus norming vectors.
pub fn forward(coeffs: &Coefficients, bands: usize) -> Result<SpectralData> {
    let m = coeffs.dim();
    let roots = interval_roots(coeffs, bands)?;
    let prop = Propagator::new(coeffs);
    let vec_groups = crate::par::parallel_map(roots.len(), |i| {
        norming_vectors_with(&prop, roots[i].lambda, roots[i].multiplicity)
    });
    let mut lambdas = Vec::new();
    let mut vectors = Vec::new();
    for (root, group) in roots.iter().zip(vec_groups) {
        let group = group?;
        for v in group {
            lambdas.push(root.lambda);
            vectors.push(v);
        }
        if lambdas.len() >= bands * m {
            break;
        }
    }
    if lambdas.len() < bands * m {
        return Err(Error::invalid("scan produced fewer eigenvalues than requested"));
    }
    lambdas.truncate(bands * m);
    vectors.truncate(bands * m);
    let bands_vec: Vec<Band> = (0..bands)
        .map(|n| Band {
            lambdas: lambdas[n * m..(n + 1) * m].to_vec(),
            vectors: vectors[n * m..(n + 1) * m].to_vec(),
        })
        .collect();
    SpectralData::new(m, bands_vec)
}

/// Weight matrices `alpha_nk`: group sums of `v v*` over equal
/// eigenvalues, repeated across each group, flattened in index-pair order.
#[derive(Clone, Debug)]
pub struct WeightMatrices {
    pub alphas: Vec<CMat>,
}

pub fn weight_matrices(data: &SpectralData) -> WeightMatrices {
    let m = data.dim();
    let flat: Vec<(f64, &CVec)> = data
        .bands()
        .iter()
        .flat_map(|b| b.lambdas.iter().copied().zip(b.vectors.iter()))
        .collect();
    let mut alphas: Vec<CMat> = Vec::with_capacity(flat.len());
    let mut start = 0;
    while start < flat.len() {
        let lambda = flat[start].0;
        let mut end = start + 1;
        while end < flat.len() && (flat[end].0 - lambda).abs() <= 1e-7 * (1.0 + lambda.abs()) {
            end += 1;
        }
        let mut alpha = CMat::zeros(m, m);
        for (_, v) in &flat[start..end] {
            alpha += *v * v.adjoint();
        }
        for _ in start..end {
            alphas.push(alpha.clone());
        }
        start = end;
    }
    WeightMatrices { alphas }
}

// ---------------------------------------------------------------------
// Weyl matrix
// ---------------------------------------------------------------------

/// Weyl matrix `M(lambda)`: with `S` the solution pinned by
/// `S(0) = 0, S'(0) = I`, this is
/// `-[phi'(pi) + H phi(pi)]^{-1} [S'(pi) + H S(pi)]`.
pub fn weyl_matrix(coeffs: &Coefficients, lambda: Cx) -> Result<CMat> {
    let m = coeffs.dim();
    let prop = Propagator::new(coeffs);
    let (pp, pd) = prop.endpoint(lambda, &CMat::identity(m, m), coeffs.h());
    let b_phi = pd + coeffs.big_h() * pp;
    let (sp, sd) = prop.endpoint(lambda, &CMat::zeros(m, m), &CMat::identity(m, m));
    let b_s = sd + coeffs.big_h() * sp;
    // Conditioning of the solve relative to the problem scale, so a scalar
    // boundary value that nearly vanishes is still flagged.
    let sv = linalg::singular_values(&b_phi);
    let cond = (sv[0] + linalg::opnorm(&b_s) + 1.0) / sv[sv.len() - 1];
    if !cond.is_finite() || cond > WEYL_COND_LIMIT {
        return Err(Error::NearEigenvalue { lambda, cond });
    }
    let lu = PivotedLu::new(b_phi);
    let mut rhs = b_s;
    lu.solve_in_place(&mut rhs);
    Ok(-rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_problem_trajectory_is_cosine() {
        let c = Coefficients::zero(2, 400);
        for rho in [1.0, 2.0] {
            let traj = integrate_phi(&c, Cx::new(rho * rho, 0.0));
            let mut worst: f64 = 0.0;
            for (i, p) in traj.phi.iter().enumerate() {
                let x = traj.node(i);
                let expect = CMat::identity(2, 2) * Cx::new((rho * x).cos(), 0.0);
                worst = worst.max((p - expect).norm());
            }
            assert!(worst < 1e-8, "rho = {rho}: deviation {worst}");
        }
    }

    #[test]
    fn zero_problem_at_zero_lambda_is_constant() {
        let c = Coefficients::zero(1, 64);
        let traj = integrate_phi(&c, Cx::new(0.0, 0.0));
        for (p, d) in traj.phi.iter().zip(&traj.phi_prime) {
            assert!((p - CMat::identity(1, 1)).norm() == 0.0);
            assert!(d.norm() == 0.0);
        }
    }

    #[test]
    fn trajectory_matches_richardson_oracle() {
        let value_at = |segments: usize| {
            let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, segments);
            integrate_phi(&c, Cx::new(4.0, 0.0)).end().0[(0, 0)]
        };
        let coarse = value_at(400);
        let fine = value_at(800);
        let extrapolated = (fine * 16.0 - coarse) / 15.0;
        assert!((coarse - extrapolated).norm() < 1e-7);
    }

    #[test]
    fn boundary_matrix_closed_form_zero_problem() {
        let c = Coefficients::zero(2, 400);
        let b1 = boundary_matrix(&c, 1.0);
        assert!(b1.norm() < 1e-8, "lambda = 1 is an eigenvalue");
        let b2 = boundary_matrix(&c, 0.25);
        let expect = CMat::identity(2, 2) * Cx::new(-0.5, 0.0);
        assert!((b2 - expect).norm() < 1e-8);
    }

    #[test]
    fn boundary_matrix_vanishes_at_found_eigenvalue() {
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 800);
        let bands = find_eigenvalues(&c, 2).unwrap();
        let lambda1 = bands[1][0];
        let v = boundary_matrix(&c, lambda1);
        assert!(v.norm() < 1e-7, "|B(lambda_1)| = {}", v.norm());
    }

    #[test]
    fn zero_problem_spectrum_with_multiplicity() {
        let c = Coefficients::zero(3, 800);
        let bands = find_eigenvalues(&c, 4).unwrap();
        for (n, band) in bands.iter().enumerate() {
            let exact = (n as f64).powi(2);
            assert_eq!(band.len(), 3);
            for l in band {
                assert!((l - exact).abs() < 1e-8, "band {n}: {l} vs {exact}");
            }
        }
    }

    #[test]
    fn cosine_potential_matches_fd_oracle() {
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 2000);
        let bands = find_eigenvalues(&c, 10).unwrap();
        let oracle = matspec_oracles::scalar_robin_eigs_fd(|x| x.cos(), 0.0, 0.0, 10, 4000);
        for (n, band) in bands.iter().enumerate() {
            assert!(
                (band[0] - oracle[n]).abs() < 1e-4,
                "band {n}: {} vs oracle {}",
                band[0],
                oracle[n]
            );
        }
    }

    #[test]
    fn diagonal_potential_is_union_of_scalar_spectra() {
        let segments = 1200;
        let step = PI / segments as f64;
        let q: Vec<CMat> = (0..=segments)
            .map(|i| {
                let x = i as f64 * step;
                CMat::from_diagonal(&CVec::from_vec(vec![
                    Cx::new(x.cos(), 0.0),
                    Cx::new(-x.cos(), 0.0),
                ]))
            })
            .collect();
        let c = Coefficients::new(q, CMat::zeros(2, 2), CMat::zeros(2, 2)).unwrap();
        let bands = find_eigenvalues(&c, 4).unwrap();

        let plus = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, segments);
        let minus = Coefficients::scalar(|x| -x.cos(), 0.0, 0.0, segments);
        let mut union: Vec<f64> = find_eigenvalues(&plus, 4)
            .unwrap()
            .into_iter()
            .flatten()
            .chain(find_eigenvalues(&minus, 4).unwrap().into_iter().flatten())
            .collect();
        union.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let flat: Vec<f64> = bands.into_iter().flatten().collect();
        for (a, b) in flat.iter().zip(union.iter()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_problem_norming_vectors_band_sums() {
        let c = Coefficients::zero(2, 400);
        let data = forward(&c, 3).unwrap();
        let b1 = data.beta_band(1);
        let b2 = data.beta_band(2);
        assert!((b1 - CMat::identity(2, 2) * Cx::new(1.0 / PI, 0.0)).norm() < 1e-9);
        assert!((b2 - CMat::identity(2, 2) * Cx::new(2.0 / PI, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn scalar_norming_vector_matches_direct_quadrature() {
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 1200);
        let bands = find_eigenvalues(&c, 1).unwrap();
        let v = norming_vectors(&c, bands[0][0], 1).unwrap();
        let traj = integrate_phi(&c, Cx::new(bands[0][0], 0.0));
        let sq: Vec<f64> = traj.phi.iter().map(|p| p[(0, 0)].norm_sqr()).collect();
        let integral = crate::linalg::trapezoid_scalar(&sq, c.step());
        assert!((v[0][0].norm_sqr() - 1.0 / integral).abs() < 1e-9);
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 1000);
        let data = forward(&c, 4).unwrap();
        let prop = Propagator::new(&c);
        let trajs: Vec<MatrixTrajectory> = (1..=4)
            .map(|n| prop.phi_trajectory(Cx::new(data.bands()[n - 1].lambdas[0], 0.0)))
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let samples: Vec<f64> = (0..=1000)
                    .map(|i| {
                        let ya = trajs[a].phi[i][(0, 0)] * data.bands()[a].vectors[0][0];
                        let yb = trajs[b].phi[i][(0, 0)] * data.bands()[b].vectors[0][0];
                        (ya.conj() * yb).re
                    })
                    .collect();
                let g = crate::linalg::trapezoid_scalar(&samples, c.step());
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-7, "gram({a},{b}) = {g}");
            }
        }
    }

    #[test]
    fn weight_matrices_group_structure() {
        // simple eigenvalue: alpha = beta
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 800);
        let data = forward(&c, 3).unwrap();
        let w = weight_matrices(&data);
        for (i, p) in data.index_pairs().enumerate() {
            assert!((w.alphas[i].clone() - data.beta(p)).norm() < 1e-12);
        }
    }

    #[test]
    fn weight_matrices_on_multiplicity_groups() {
        let c = Coefficients::zero(2, 400);
        let data = forward(&c, 2).unwrap();
        let w = weight_matrices(&data);
        // each alpha is the full band sum, repeated for both members
        assert!((w.alphas[0].clone() - data.beta_band(1)).norm() < 1e-12);
        assert!((w.alphas[1].clone() - data.beta_band(1)).norm() < 1e-12);
        assert_eq!(w.alphas.len(), 4);
    }

    #[test]
    fn weight_matrices_distinct_close_eigenvalues_stay_rank_one() {
        // First band of the completeness-failure example: two distinct
        // eigenvalues, both vectors along e1.
        use crate::spectral::Band;
        let s = (1.0 / PI).sqrt();
        let e1 = CVec::from_vec(vec![Cx::new(s, 0.0), Cx::new(0.0, 0.0)]);
        let data = SpectralData::new(
            2,
            vec![Band {
                lambdas: vec![0.01, 0.04],
                vectors: vec![e1.clone(), e1],
            }],
        )
        .unwrap();
        let w = weight_matrices(&data);
        for alpha in &w.alphas {
            assert!((alpha[(0, 0)].re - 1.0 / PI).abs() < 1e-12);
            assert!(alpha[(1, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn weyl_matrix_zero_problem_closed_form() {
        let c = Coefficients::zero(1, 400);
        // rho = 0.5: cos(pi/2) = 0, so M = 0
        let m = weyl_matrix(&c, Cx::new(0.25, 0.0)).unwrap();
        assert!(m.norm() < 1e-8);
        // generic rho: M = cot(rho pi) / rho
        let rho = 0.7_f64;
        let m2 = weyl_matrix(&c, Cx::new(rho * rho, 0.0)).unwrap();
        let expect = (rho * PI).cos() / ((rho * PI).sin() * rho);
        assert!((m2[(0, 0)].re - expect).abs() < 1e-8);
    }

    #[test]
    fn weyl_matrix_rejects_near_eigenvalue() {
        // bisect to the discrete operator's own eigenvalue near lambda = 1
        let c = Coefficients::zero(1, 200);
        let value = |l: f64| boundary_matrix(&c, l)[(0, 0)].re;
        let (mut a, mut b) = (0.9, 1.1);
        assert!(value(a) * value(b) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if value(a) * value(mid) <= 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        let err = weyl_matrix(&c, Cx::new(0.5 * (a + b), 0.0));
        assert!(matches!(err, Err(Error::NearEigenvalue { .. })));
    }

    #[test]
    fn weyl_matrix_hermitian_symmetry() {
        let c = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 600);
        let lam = Cx::new(1.0, 1.0);
        let m1 = weyl_matrix(&c, lam).unwrap();
        let m2 = weyl_matrix(&c, lam.conj()).unwrap();
        assert!((m2.adjoint() - m1).norm() < 1e-7);
    }

    #[test]
    fn wronskian_identity_drifts_below_tolerance() {
        let c = Coefficients::scalar(|x| (2.0 * x).cos() * 0.8, 0.3, 0.0, 800);
        for lambda in [Cx::new(2.0, 0.0), Cx::new(-1.0, 0.0), Cx::new(3.0, 0.5)] {
            let t1 = integrate_phi(&c, lambda);
            let t2 = integrate_phi(&c, lambda.conj());
            let mut worst: f64 = 0.0;
            for i in 0..=800 {
                let w = t2.phi[i].adjoint() * &t1.phi_prime[i]
                    - t2.phi_prime[i].adjoint() * &t1.phi[i];
                worst = worst.max(w.norm());
            }
            assert!(worst < 1e-8, "lambda {lambda}: wronskian drift {worst}");
        }
    }
}
