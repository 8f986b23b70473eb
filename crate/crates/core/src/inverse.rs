//! Inverse solver: solve the truncated main equation node by node, recover
//! the solution values of the target problem, accumulate the
//! reconstruction kernel and read off the coefficients.

use crate::kernels::{self, MainSystem};
use crate::linalg::{self, PivotedLu};
use crate::problem::Coefficients;
use crate::spectral::{Band, SpectralData};
use crate::{CMat, Cx, Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug)]
pub struct InverseOptions {
    /// Truncation band count of the main equation.
    pub bands: usize,
    /// Reconstruction grid resolution (segments over `[0, pi]`).
    pub grid: usize,
    /// Estimated-condition ceiling per node.
    pub cond_limit: f64,
    /// Replace the raw output by its Hermitian part and report the defect.
    pub symmetrize: bool,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            bands: 25,
            grid: 200,
            cond_limit: 1e12,
            symmetrize: true,
        }
    }
}

impl InverseOptions {
    fn check(&self) -> Result<()> {
        if self.bands < 1 {
            return Err(Error::invalid("at least one band is required"));
        }
        if self.grid < 8 {
            return Err(Error::invalid("grid must have at least 8 segments"));
        }
        Ok(())
    }
}

/// Solution of the main equation at one grid node: the kernel row blocks,
/// the recovered solution values, and their x-derivatives.
#[derive(Clone, Debug)]
pub struct NodeSolution {
    pub x: f64,
    /// `psi_(n,s)` blocks, `s = 1..=m+1` per band, flattened band-major.
    pub psi: Vec<CMat>,
    pub psi_dx: Vec<CMat>,
    /// Recovered `phi(x, lambda_nk)` for `k <= m` plus `phi(x, model)` at
    /// position `m+1`, flattened band-major.
    pub phi: Vec<CMat>,
    pub phi_dx: Vec<CMat>,
    /// Estimated 1-norm condition of the truncated operator.
    pub condition: f64,
}

/// Per-node solutions over the whole reconstruction grid.
#[derive(Clone, Debug)]
pub struct PsiSolution {
    pub dim: usize,
    pub bands: usize,
    pub grid: usize,
    pub nodes: Vec<NodeSolution>,
}

impl PsiSolution {
    pub fn max_condition(&self) -> f64 {
        self.nodes.iter().map(|n| n.condition).fold(0.0, f64::max)
    }
}

/// Extend finite data with exact model bands up to `total` bands.
pub fn complete_with_model_tail(partial: &SpectralData, total: usize) -> SpectralData {
    let m = partial.dim();
    let mut bands: Vec<Band> = partial
        .bands()
        .iter()
        .take(total)
        .cloned()
        .collect();
    for n in bands.len() + 1..=total {
        bands.push(Band {
            lambdas: vec![kernels::model_lambda(n); m],
            vectors: kernels::model_vectors(n, m),
        });
    }
    SpectralData::new(m, bands).expect("model tail preserves validity")
}

fn solve_node(sys: &MainSystem, x: f64, node: usize, cond_limit: f64) -> Result<NodeSolution> {
    let m = sys.dim();
    let cols = m + 1;
    let d = sys.size();
    let asm = sys.assemble(x, true);

    // Psi (I + R) = PsiModel  =>  (I + R)^T Psi^T = PsiModel^T.
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

    // Psi' = (PsiModel' - Psi R') (I + R)^{-1}, transposed throughout.
    let r_dx_t = asm.r_dx.as_ref().expect("derivatives requested").transpose();
    let mut rhs = asm.psi_dx.as_ref().unwrap().transpose();
    rhs -= &r_dx_t * &psi_t;
    lu.solve_in_place(&mut rhs);
    let psi_dx_t = rhs;

    let take = |src: &CMat, band: usize, s: usize| -> CMat {
        let r0 = ((band - 1) * cols + (s - 1)) * m;
        src.view((r0, 0), (m, m)).transpose()
    };
    let mut psi = Vec::with_capacity(sys.bands() * cols);
    let mut psi_dx = Vec::with_capacity(sys.bands() * cols);
    let mut phi = Vec::with_capacity(sys.bands() * cols);
    let mut phi_dx = Vec::with_capacity(sys.bands() * cols);
    for n in 1..=sys.bands() {
        for s in 1..=cols {
            psi.push(take(&psi_t, n, s));
            psi_dx.push(take(&psi_dx_t, n, s));
        }
        let base = psi.len() - cols;
        for k in 1..=m {
            let hat = sys.rho_hat(n, k);
            phi.push(&psi[base + m] + &psi[base + k - 1] * hat);
            phi_dx.push(&psi_dx[base + m] + &psi_dx[base + k - 1] * hat);
        }
        phi.push(psi[base + m].clone());
        phi_dx.push(psi_dx[base + m].clone());
    }
    Ok(NodeSolution {
        x,
        psi,
        psi_dx,
        phi,
        phi_dx,
        condition,
    })
}

/// Solve the truncated main equation on the uniform reconstruction grid.
/// Data beyond `opts.bands` is ignored; missing bands are completed with
/// exact model data, which makes the truncated system exact for finite
/// data.
pub fn solve_main_equation(data: &SpectralData, opts: &InverseOptions) -> Result<PsiSolution> {
    opts.check()?;
    let completed = complete_with_model_tail(data, opts.bands);
    let sys = MainSystem::new(&completed, opts.bands)?;
    let step = PI / opts.grid as f64;
    let nodes = crate::par::parallel_map(opts.grid + 1, |i| {
        solve_node(&sys, i as f64 * step, i, opts.cond_limit)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(PsiSolution {
        dim: data.dim(),
        bands: opts.bands,
        grid: opts.grid,
        nodes,
    })
}

/// Reconstruction kernel and its analytic derivative on the grid:
/// `E0(x) = sum_n ( sum_k phi_nk beta_nk cos(rho_nk x) - phi_(n,m+1) beta_model_n cos(rho_model_n x) )`,
/// with the derivative assembled term-wise by the product rule.
pub fn compute_e0(sol: &PsiSolution, data: &SpectralData) -> (Vec<CMat>, Vec<CMat>) {
    let m = sol.dim;
    let completed = complete_with_model_tail(data, sol.bands);
    let cols = m + 1;
    let mut e0 = Vec::with_capacity(sol.nodes.len());
    let mut e0_dx = Vec::with_capacity(sol.nodes.len());
    for node in &sol.nodes {
        let x = node.x;
        let mut acc = CMat::zeros(m, m);
        let mut acc_dx = CMat::zeros(m, m);
        for n in 1..=sol.bands {
            let base = (n - 1) * cols;
            for k in 1..=m {
                let p = crate::spectral::IndexPair::new(n, k);
                let rho = completed.rho(p);
                let beta = completed.beta(p);
                let c = (rho * x).cos().conj();
                let c_dx = (-(rho) * (rho * x).sin()).conj();
                let phi = &node.phi[base + k - 1];
                let phi_dx = &node.phi_dx[base + k - 1];
                acc += phi * &beta * c;
                acc_dx += phi_dx * &beta * c + phi * &beta * c_dx;
            }
            let r_ref = kernels::model_rho(n);
            let beta_ref = kernels::model_beta_band(n, m);
            let c = Cx::new((r_ref * x).cos(), 0.0);
            let c_dx = Cx::new(-r_ref * (r_ref * x).sin(), 0.0);
            let phi = &node.phi[base + m];
            let phi_dx = &node.phi_dx[base + m];
            acc -= phi * &beta_ref * c;
            acc_dx -= phi_dx * &beta_ref * c + phi * &beta_ref * c_dx;
        }
        e0.push(acc);
        e0_dx.push(acc_dx);
    }
    (e0, e0_dx)
}

/// Result of a reconstruction run with its quality diagnostics.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub coefficients: Coefficients,
    /// Largest Hermiticity defect of the raw output before symmetrization.
    pub hermitian_defect: f64,
    pub max_condition: f64,
    /// Set when the data looks numerically outside the solvable class.
    pub class_warning: Option<String>,
}

/// Recover `(Q, h, H)` from spectral data through the main equation:
/// `Q = -2 E0'`, `h = -E0(0)`, `H = E0(pi)`.
pub fn reconstruct(data: &SpectralData, opts: &InverseOptions) -> Result<Reconstruction> {
    let screen_bands = data.band_count().min(opts.bands).min(12);
    let eps_hat = crate::stability::riesz_lower_bound(data, screen_bands);
    let class_warning = (eps_hat < 1e-6).then(|| {
        format!("Riesz lower-bound surrogate {eps_hat:.3e} is numerically zero; data may be outside the solvable class")
    });

    let sol = solve_main_equation(data, opts)?;
    let (e0, e0_dx) = compute_e0(&sol, data);
    let q_raw: Vec<CMat> = e0_dx.iter().map(|d| d * Cx::new(-2.0, 0.0)).collect();
    let h_raw = -&e0[0];
    let big_h_raw = e0[e0.len() - 1].clone();

    let mut defect = linalg::hermitian_defect(&h_raw).max(linalg::hermitian_defect(&big_h_raw));
    for qi in &q_raw {
        defect = defect.max(linalg::hermitian_defect(qi));
    }
    let (q, h, big_h) = if opts.symmetrize {
        (
            q_raw.iter().map(linalg::hermitian_part).collect(),
            linalg::hermitian_part(&h_raw),
            linalg::hermitian_part(&big_h_raw),
        )
    } else {
        (q_raw, h_raw, big_h_raw)
    };
    Ok(Reconstruction {
        coefficients: Coefficients::new(q, h, big_h)?,
        hermitian_defect: defect,
        max_condition: sol.max_condition(),
        class_warning,
    })
}
