//! Independent numerical oracles used only by tests.
//!
//! Everything here is deliberately written with methods different from the
//! library under test: Simpson and adaptive Simpson quadrature, and
//! second-order finite-difference eigensolvers (Sturm-sequence bisection on
//! tridiagonal/arrowhead pencils) with Richardson extrapolation.

use num_complex::Complex64;

/// Composite Simpson rule with `n` subintervals (`n` rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature for complex-valued integrands.
pub fn adaptive_quad(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn simpson_panel(
        f: &impl Fn(f64) -> Complex64,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
    ) -> (Complex64, Complex64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((fa + fm * 4.0 + fb) * ((b - a) / 6.0), fm, m)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> Complex64,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
        whole: Complex64,
        fm: Complex64,
        m: f64,
        tol: f64,
        depth: usize,
    ) -> Complex64 {
        let (left, flm, lm) = simpson_panel(f, a, fa, m, fm);
        let (right, frm, rm) = simpson_panel(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, flm, lm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, frm, rm, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm, m) = simpson_panel(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, m, tol, 40)
}

/// Count eigenvalues of a symmetric tridiagonal pencil `(A - lambda B)`
/// strictly below `lambda` via the sign changes of the LDL^T pivots.
fn sturm_count(diag_a: &[f64], off_a: &[f64], diag_b: &[f64], lambda: f64) -> usize {
    let n = diag_a.len();
    let mut count = 0;
    let mut d = diag_a[0] - lambda * diag_b[0];
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let mut prev = d;
        if prev == 0.0 {
            prev = 1e-300;
        }
        d = (diag_a[i] - lambda * diag_b[i]) - off_a[i - 1] * off_a[i - 1] / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_pencil(
    count_below: &impl Fn(f64) -> usize,
    index: usize,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    while count_below(hi) <= index {
        hi += (hi - lo).abs().max(1.0);
    }
    while count_below(lo) > index {
        lo -= (hi - lo).abs().max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if count_below(mid) <= index {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First `count` eigenvalues of the scalar Robin problem
/// `-y'' + q y = lambda y`, `y'(0) = h y(0)`, `y'(pi) = -H y(pi)`, by a
/// second-order finite-difference discretization with half-weighted
/// endpoint rows (ghost-node Robin treatment keeps the pencil symmetric).
fn scalar_robin_eigs_fd_single(
    q: &impl Fn(f64) -> f64,
    h: f64,
    big_h: f64,
    count: usize,
    points: usize,
) -> Vec<f64> {
    let n = points + 1;
    let step = std::f64::consts::PI / points as f64;
    let s2 = step * step;
    let mut diag_a: Vec<f64> = (0..n).map(|i| 2.0 / s2 + q(i as f64 * step)).collect();
    let mut diag_b = vec![1.0; n];
    let off_a = vec![-1.0 / s2; n - 1];
    diag_a[0] = 1.0 / s2 + 0.5 * q(0.0) + h / step;
    diag_b[0] = 0.5;
    diag_a[n - 1] = 1.0 / s2 + 0.5 * q(std::f64::consts::PI) + big_h / step;
    diag_b[n - 1] = 0.5;
    let lo = -4.0 / s2 - q(0.0).abs() - h.abs() - big_h.abs() - 10.0;
    (0..count)
        .map(|k| {
            bisect_pencil(
                &|l| sturm_count(&diag_a, &off_a, &diag_b, l),
                k,
                lo,
                (count as f64 + 2.0).powi(2),
            )
        })
        .collect()
}

/// Richardson-extrapolated FD eigenvalues of the scalar Robin problem.
pub fn scalar_robin_eigs_fd(
    q: impl Fn(f64) -> f64,
    h: f64,
    big_h: f64,
    count: usize,
    points: usize,
) -> Vec<f64> {
    let coarse = scalar_robin_eigs_fd_single(&q, h, big_h, count, points);
    let fine = scalar_robin_eigs_fd_single(&q, h, big_h, count, 2 * points);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}

/// Eigenvalue counter for the star-graph pencil: `m` edges with Dirichlet
/// outer ends, one shared interior-vertex unknown, and Kirchhoff flux
/// balance. Interior chains are eliminated edge by edge; the vertex pivot
/// closes the arrowhead, so Sylvester inertia counting still applies.
fn star_graph_count(qs: &[Vec<f64>], step: f64, lambda: f64) -> usize {
    let s2 = step * step;
    let mut negatives = 0;
    let mut vertex = 0.0;
    for q in qs {
        let k = q.len() - 1;
        let mut d = f64::INFINITY;
        for (i, qi) in q.iter().enumerate().take(k).skip(1) {
            let c = 2.0 / s2 + qi - lambda;
            d = if i == 1 {
                c
            } else {
                c - (1.0 / (s2 * s2)) / if d == 0.0 { 1e-300 } else { d }
            };
            if d < 0.0 {
                negatives += 1;
            }
        }
        vertex += 1.0 / s2 + 0.5 * (q[k] - lambda)
            - (1.0 / (s2 * s2)) / if d == 0.0 { 1e-300 } else { d };
    }
    if vertex < 0.0 {
        negatives += 1;
    }
    negatives
}

fn star_graph_eigs_fd_single<F: Fn(f64) -> f64>(
    qs: &[F],
    count: usize,
    points: usize,
) -> Vec<f64> {
    let step = std::f64::consts::PI / points as f64;
    let sampled: Vec<Vec<f64>> = qs
        .iter()
        .map(|q| (0..=points).map(|i| q(i as f64 * step)).collect())
        .collect();
    let lo = -8.0 / (step * step);
    (0..count)
        .map(|k| {
            bisect_pencil(
                &|l| star_graph_count(&sampled, step, l),
                k,
                lo,
                (count as f64 + 2.0).powi(2) + 10.0,
            )
        })
        .collect()
}

/// Richardson-extrapolated FD eigenvalues of the star graph with Dirichlet
/// boundary conditions and standard matching at the interior vertex.
pub fn star_graph_eigs_fd<F: Fn(f64) -> f64>(qs: &[F], count: usize, points: usize) -> Vec<f64> {
    let coarse = star_graph_eigs_fd_single(qs, count, points);
    let fine = star_graph_eigs_fd_single(qs, count, 2 * points);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}
