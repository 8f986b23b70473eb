//! Deterministic generation of test problems: Hermitian trigonometric
//! polynomial potentials with zero mean, seeded by a small xorshift
//! generator so runs are reproducible everywhere.

use crate::problem::Coefficients;
use crate::{CMat, Cx};
use std::f64::consts::PI;

/// xorshift64* generator; deterministic across platforms.
#[derive(Clone, Debug)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 {
            state: seed.max(1).wrapping_mul(0x9E3779B97F4A7C15),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in `[-1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

/// Hermitian matrix potential that is a cosine polynomial in each entry,
/// so the triple `(Q, 0, 0)` stays in the restricted class. Real cosine
/// coefficients on the diagonal, complex ones off the diagonal.
pub fn random_trig_coefficients(
    dim: usize,
    segments: usize,
    terms: usize,
    scale: f64,
    seed: u64,
) -> Coefficients {
    let mut rng = Rng64::new(seed);
    // coefficient table: [entry][term] with entry = (row, col), col >= row
    let mut table: Vec<Vec<(usize, Cx)>> = Vec::new();
    for row in 0..dim {
        for col in row..dim {
            let coefs = (1..=terms)
                .map(|t| {
                    let re = rng.symmetric() * scale / t as f64;
                    let im = if row == col {
                        0.0
                    } else {
                        rng.symmetric() * scale / t as f64
                    };
                    (t, Cx::new(re, im))
                })
                .collect();
            table.push(coefs);
        }
    }
    let step = PI / segments as f64;
    let samples: Vec<CMat> = (0..=segments)
        .map(|i| {
            let x = i as f64 * step;
            let mut q = CMat::zeros(dim, dim);
            let mut idx = 0;
            for row in 0..dim {
                for col in row..dim {
                    let mut v = Cx::new(0.0, 0.0);
                    for (t, c) in &table[idx] {
                        v += c * (*t as f64 * x).cos();
                    }
                    q[(row, col)] = v;
                    q[(col, row)] = v.conj();
                    idx += 1;
                }
            }
            q
        })
        .collect();
    Coefficients::new(samples, CMat::zeros(dim, dim), CMat::zeros(dim, dim))
        .expect("generated samples are square")
}

/// Synthetic spectral data near the model problem: square-summable
/// eigenvalue remainders of size `amplitude / n` and norming vectors
/// obtained by perturbing and mixing the model basis at the `1/n` scale.
/// Structurally valid data of the kind the solvable class contains.
pub fn perturbed_spectral_data(
    dim: usize,
    bands: usize,
    amplitude: f64,
    seed: u64,
) -> crate::spectral::SpectralData {
    use crate::spectral::{Band, SpectralData};
    use crate::{CVec, Cx};
    let mut rng = Rng64::new(seed);
    let mut out = Vec::with_capacity(bands);
    for n in 1..=bands {
        let base = (n - 1) as f64;
        let decay = 1.0 / (n * n) as f64;
        let mut offsets: Vec<f64> = (0..dim)
            .map(|_| amplitude * rng.symmetric() * decay)
            .collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lambdas: Vec<f64> = offsets
            .iter()
            .map(|d| {
                let rho = base + d;
                rho * rho.abs()
            })
            .collect();
        let scale = crate::kernels::model_beta_scale(n).sqrt();
        let vectors: Vec<CVec> = (0..dim)
            .map(|k| {
                CVec::from_fn(dim, |i, _| {
                    let unit = if i == k { 1.0 } else { 0.0 };
                    let wobble = amplitude * rng.symmetric() * decay;
                    Cx::new(scale * (unit + wobble), scale * wobble * 0.3)
                })
            })
            .collect();
        out.push(Band { lambdas, vectors });
    }
    SpectralData::new(dim, out).expect("perturbation preserves ordering")
}
