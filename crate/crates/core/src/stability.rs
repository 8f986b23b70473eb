//! Quantitative stability diagnostics: asymptotic remainder norms, a
//! computable Riesz lower-bound surrogate, membership screening for the
//! uniform-boundedness class, partitions of the index set with their
//! distance functionals, and the stability-ratio experiment.

use crate::kernels::{self, cos_product_integral};
use crate::problem::Coefficients;
use crate::spectral::{IndexPair, SpectralData};
use crate::{CMat, Cx, Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Common read-only view over eigenvalue/weight sequences. The stability
/// functionals are defined on arbitrary formal sequences, so the interval
/// data, the graph data (with its scaled weights) and raw test sequences
/// all plug in here.
pub trait SpectralView {
    fn dim(&self) -> usize;
    fn band_count(&self) -> usize;
    fn rho(&self, p: IndexPair) -> Cx;
    fn beta(&self, p: IndexPair) -> CMat;
}

impl SpectralView for SpectralData {
    fn dim(&self) -> usize {
        SpectralData::dim(self)
    }
    fn band_count(&self) -> usize {
        SpectralData::band_count(self)
    }
    fn rho(&self, p: IndexPair) -> Cx {
        SpectralData::rho(self, p)
    }
    fn beta(&self, p: IndexPair) -> CMat {
        SpectralData::beta(self, p)
    }
}

/// Plain container for formal `(rho, beta)` sequences.
#[derive(Clone, Debug)]
pub struct RawSequence {
    pub dim: usize,
    pub rho: Vec<Vec<Cx>>,
    pub beta: Vec<Vec<CMat>>,
}

impl SpectralView for RawSequence {
    fn dim(&self) -> usize {
        self.dim
    }
    fn band_count(&self) -> usize {
        self.rho.len()
    }
    fn rho(&self, p: IndexPair) -> Cx {
        self.rho[p.band - 1][p.member - 1]
    }
    fn beta(&self, p: IndexPair) -> CMat {
        self.beta[p.band - 1][p.member - 1].clone()
    }
}

// ---------------------------------------------------------------------
// Remainder norms and membership
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct RemainderNorms {
    /// l2 norm of `kappa_nk = n (rho_nk - (n-1) - omega_k / (pi n))`.
    pub kappa_norm: f64,
    /// l2 norm of `K_n = n (V_n* V_n - (2/pi) I)`.
    pub k_norm: f64,
    /// For nonzero mean defect: per distinct diagonal value, the l2 norm of
    /// the grouped weight-sum remainders.
    pub omega_class_norms: Vec<f64>,
}

fn check_omega(dim: usize, omega: &[f64]) -> Result<()> {
    if omega.len() != dim {
        return Err(Error::invalid("omega must list one diagonal entry per channel"));
    }
    if omega.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("omega diagonal must be non-decreasing"));
    }
    Ok(())
}

/// Remainder norms of the eigenvalue and weight asymptotics, optionally
/// against a nonzero diagonal mean defect.
pub fn remainder_norms(data: &SpectralData, omega: Option<&[f64]>) -> Result<RemainderNorms> {
    let m = data.dim();
    if let Some(w) = omega {
        check_omega(m, w)?;
    }
    let mut kappa_sq = 0.0;
    for n in 1..=data.band_count() {
        for k in 1..=m {
            let shift = omega.map_or(0.0, |w| w[k - 1] / (PI * n as f64));
            let kappa = (data.rho(IndexPair::new(n, k)) - Cx::new((n - 1) as f64 + shift, 0.0))
                * n as f64;
            kappa_sq += kappa.norm_sqr();
        }
    }
    let mut k_sq = 0.0;
    for n in 1..=data.band_count() {
        let v = data.vector_matrix(n);
        // band 1 is compared against the model's own Gram scale 1/pi
        let scale = kernels::model_beta_scale(n);
        let rem = (v.adjoint() * v - CMat::identity(m, m) * Cx::new(scale, 0.0))
            * Cx::new(n as f64, 0.0);
        k_sq += crate::linalg::opnorm(&rem).powi(2);
    }
    let omega_class_norms = match omega {
        None => Vec::new(),
        Some(w) => {
            // distinct values, in order
            let mut classes: Vec<f64> = Vec::new();
            for v in w {
                if classes.last().map_or(true, |c| (c - v).abs() > 0.0) {
                    classes.push(*v);
                }
            }
            classes
                .iter()
                .map(|value| {
                    let members: Vec<usize> = (1..=m).filter(|k| w[k - 1] == *value).collect();
                    let mut eye = CMat::zeros(m, m);
                    for k in &members {
                        eye[(k - 1, k - 1)] = Cx::new(2.0 / PI, 0.0);
                    }
                    let mut sq = 0.0;
                    for n in 1..=data.band_count() {
                        let mut sum = CMat::zeros(m, m);
                        for k in &members {
                            sum += data.beta(IndexPair::new(n, *k));
                        }
                        sq += crate::linalg::opnorm(&(sum - &eye)).powi(2);
                    }
                    sq.sqrt()
                })
                .collect()
        }
    };
    Ok(RemainderNorms {
        kappa_norm: kappa_sq.sqrt(),
        k_norm: k_sq.sqrt(),
        omega_class_norms,
    })
}

/// Smallest singular value surrogate of the Riesz lower frame bound: the
/// square root of the smallest eigenvalue of the Gram matrix of
/// `v_nk cos(rho_nk x)` over the first `bands` bands.
pub fn riesz_lower_bound(data: &SpectralData, bands: usize) -> f64 {
    let m = data.dim();
    let bands = bands.min(data.band_count());
    let pairs: Vec<IndexPair> = (1..=bands)
        .flat_map(|n| (1..=m).map(move |k| IndexPair::new(n, k)))
        .collect();
    let d = pairs.len();
    if d == 0 {
        return 0.0;
    }
    let mut gram = CMat::zeros(d, d);
    let entries = crate::par::parallel_map(d, |a| {
        let pa = pairs[a];
        let va = data.vector(pa);
        let ra = data.rho(pa);
        (0..d)
            .map(|b| {
                let pb = pairs[b];
                let inner = (va.adjoint() * data.vector(pb))[(0, 0)];
                inner * cos_product_integral(PI, ra.conj(), data.rho(pb))
            })
            .collect::<Vec<Cx>>()
    });
    for (a, row) in entries.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            gram[(a, b)] = *v;
        }
    }
    crate::linalg::lambda_min_hermitian(&gram).max(0.0).sqrt()
}

/// Membership report against the class parameters `(Omega, eps)`.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub kappa_norm: f64,
    pub k_norm: f64,
    pub eps_hat: f64,
    pub xi: Vec<f64>,
    pub omega_class_norms: Vec<f64>,
    pub member: bool,
    /// The surrogate is computed from a truncated Gram matrix; the
    /// infinite tail is not certified.
    pub truncated_surrogate: bool,
}

/// Screen data against `(Omega, eps)`: remainder norms within `Omega` and
/// Riesz surrogate at least `eps`.
pub fn membership(
    data: &SpectralData,
    omega_bound: f64,
    eps: f64,
    omega: Option<&[f64]>,
) -> Result<(bool, StabilityReport)> {
    if omega_bound <= 0.0 || eps <= 0.0 {
        return Err(Error::invalid("Omega and eps must be positive"));
    }
    let norms = remainder_norms(data, omega)?;
    let eps_hat = riesz_lower_bound(data, data.band_count());
    let member = norms.kappa_norm <= omega_bound
        && norms.k_norm <= omega_bound
        && norms.omega_class_norms.iter().all(|v| *v <= omega_bound)
        && eps_hat >= eps;
    let report = StabilityReport {
        kappa_norm: norms.kappa_norm,
        k_norm: norms.k_norm,
        eps_hat,
        xi: kernels::xi_sequence(data),
        omega_class_norms: norms.omega_class_norms,
        member,
        truncated_surrogate: true,
    };
    Ok((member, report))
}

// ---------------------------------------------------------------------
// Partitions and the distance functionals
// ---------------------------------------------------------------------

/// Partition of the truncated index set into finite disjoint groups.
#[derive(Clone, Debug)]
pub struct Partition {
    groups: Vec<Vec<IndexPair>>,
}

impl Partition {
    pub fn new(mut groups: Vec<Vec<IndexPair>>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        groups.retain(|g| !g.is_empty());
        for g in &mut groups {
            g.sort();
            for p in g.iter() {
                if !seen.insert(*p) {
                    return Err(Error::invalid(format!(
                        "index pair ({}, {}) appears in two groups",
                        p.band, p.member
                    )));
                }
            }
        }
        Ok(Partition { groups })
    }

    /// One group per index pair.
    pub fn singletons(bands: usize, dim: usize) -> Self {
        let groups = (1..=bands)
            .flat_map(|n| (1..=dim).map(move |k| vec![IndexPair::new(n, k)]))
            .collect();
        Partition { groups }
    }

    /// One group per band.
    pub fn per_band(bands: usize, dim: usize) -> Self {
        let groups = (1..=bands)
            .map(|n| (1..=dim).map(|k| IndexPair::new(n, k)).collect())
            .collect();
        Partition { groups }
    }

    pub fn groups(&self) -> &[Vec<IndexPair>] {
        &self.groups
    }

    fn check_covers(&self, bands: usize, dim: usize) -> Result<()> {
        let mut need = std::collections::BTreeSet::new();
        for n in 1..=bands {
            for k in 1..=dim {
                need.insert(IndexPair::new(n, k));
            }
        }
        let have: std::collections::BTreeSet<IndexPair> =
            self.groups.iter().flatten().copied().collect();
        if need != have {
            return Err(Error::invalid(
                "partition must cover the truncated index set exactly",
            ));
        }
        Ok(())
    }
}

/// Refinement of a partition: each group split into disjoint subgroups.
#[derive(Clone, Debug)]
pub struct RefinedPartition {
    pub groups: Vec<Vec<Vec<IndexPair>>>,
}

impl RefinedPartition {
    /// The canonical refinement by equal diagonal mean-defect values:
    /// band-size groups split into channels with equal `omega_k`.
    pub fn by_omega_classes(bands: usize, omega: &[f64]) -> Self {
        let mut groups = Vec::with_capacity(bands);
        for n in 1..=bands {
            let mut sub: BTreeMap<u64, Vec<IndexPair>> = BTreeMap::new();
            let mut order: Vec<u64> = Vec::new();
            for (k, w) in omega.iter().enumerate() {
                let key = w.to_bits();
                if !sub.contains_key(&key) {
                    order.push(key);
                }
                sub.entry(key).or_default().push(IndexPair::new(n, k + 1));
            }
            groups.push(order.into_iter().map(|k| sub.remove(&k).unwrap()).collect());
        }
        RefinedPartition { groups }
    }

    pub fn flatten(&self) -> Partition {
        Partition {
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().flatten().copied().collect())
                .collect(),
        }
    }
}

/// Ordering key for group ranking: monotone in the eigenvalue.
fn rho_key(r: Cx) -> f64 {
    r.re * r.re - r.im * r.im
}

fn ordered_group_indices(part: &Partition, a: &dyn SpectralView) -> Vec<usize> {
    let mut order: Vec<usize> = (0..part.groups.len()).collect();
    order.sort_by(|&i, &j| {
        let gi = &part.groups[i];
        let gj = &part.groups[j];
        let ki = gi
            .iter()
            .map(|p| rho_key(a.rho(*p)))
            .fold(f64::INFINITY, f64::min);
        let kj = gj
            .iter()
            .map(|p| rho_key(a.rho(*p)))
            .fold(f64::INFINITY, f64::min);
        ki.partial_cmp(&kj)
            .unwrap()
            .then_with(|| gi[0].cmp(&gj[0]))
    });
    order
}

fn group_beta_sum(view: &dyn SpectralView, group: &[IndexPair]) -> CMat {
    let m = view.dim();
    let mut acc = CMat::zeros(m, m);
    for p in group {
        acc += view.beta(*p);
    }
    acc
}

fn group_spread(view: &dyn SpectralView, group: &[IndexPair]) -> f64 {
    let first = view.rho(group[0]);
    group[1..]
        .iter()
        .map(|p| (view.rho(*p) - first).norm())
        .sum()
}

fn common_bands(part: &Partition, a: &dyn SpectralView, b: &dyn SpectralView) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("data sets have different dimensions"));
    }
    let bands = a.band_count().min(b.band_count());
    part.check_covers(bands, a.dim())?;
    Ok(bands)
}

/// Group distances and their weighted aggregate:
/// `zeta_s = |rho_1^A - rho_1^B| + ||beta(J_s)^A - beta(J_s)^B||
///  + sum_{j >= 2} (|rho_j^A - rho_1^A| + |rho_j^B - rho_1^B|)`,
/// `Z = l2 norm of { s zeta_s }` with groups ordered by smallest
/// eigenvalue.
pub fn zeta_z(
    part: &Partition,
    a: &dyn SpectralView,
    b: &dyn SpectralView,
) -> Result<(Vec<f64>, f64)> {
    common_bands(part, a, b)?;
    let order = ordered_group_indices(part, a);
    let mut zetas = Vec::with_capacity(order.len());
    let mut z_sq = 0.0;
    for (ordinal, gi) in order.iter().enumerate() {
        let group = &part.groups[*gi];
        let first_gap = (a.rho(group[0]) - b.rho(group[0])).norm();
        let beta_gap =
            crate::linalg::opnorm(&(group_beta_sum(a, group) - group_beta_sum(b, group)));
        let zeta = first_gap + beta_gap + group_spread(a, group) + group_spread(b, group);
        let s = (ordinal + 1) as f64;
        z_sq += (s * zeta) * (s * zeta);
        zetas.push(zeta);
    }
    Ok((zetas, z_sq.sqrt()))
}

/// Per-channel variant used on the graph: the weight term only compares
/// one diagonal entry of the group sums.
pub fn zeta_z_diagonal(
    part: &Partition,
    a: &dyn SpectralView,
    b: &dyn SpectralView,
    channel: usize,
) -> Result<(Vec<f64>, f64)> {
    common_bands(part, a, b)?;
    if channel == 0 || channel > a.dim() {
        return Err(Error::invalid("channel index out of range"));
    }
    let j = channel - 1;
    let order = ordered_group_indices(part, a);
    let mut zetas = Vec::with_capacity(order.len());
    let mut z_sq = 0.0;
    for (ordinal, gi) in order.iter().enumerate() {
        let group = &part.groups[*gi];
        let first_gap = (a.rho(group[0]) - b.rho(group[0])).norm();
        let beta_gap =
            (group_beta_sum(a, group)[(j, j)] - group_beta_sum(b, group)[(j, j)]).norm();
        let zeta = first_gap + beta_gap + group_spread(a, group) + group_spread(b, group);
        let s = (ordinal + 1) as f64;
        z_sq += (s * zeta) * (s * zeta);
        zetas.push(zeta);
    }
    Ok((zetas, z_sq.sqrt()))
}

/// Refined distances: inner spreads per subgroup, subgroup weight-sum
/// differences weighted by `1/s`, plus the whole-group weight difference;
/// `Theta = l2 norm of { s theta_s }`.
pub fn theta_big_theta(
    refined: &RefinedPartition,
    a: &dyn SpectralView,
    b: &dyn SpectralView,
) -> Result<(Vec<f64>, f64)> {
    let flat = refined.flatten();
    common_bands(&flat, a, b)?;
    let order = ordered_group_indices(&flat, a);
    let mut thetas = Vec::with_capacity(order.len());
    let mut big_sq = 0.0;
    for (ordinal, gi) in order.iter().enumerate() {
        let s = (ordinal + 1) as f64;
        let subgroups = &refined.groups[*gi];
        let mut theta = 0.0;
        for sub in subgroups {
            theta += (a.rho(sub[0]) - b.rho(sub[0])).norm();
            theta += group_spread(a, sub) + group_spread(b, sub);
            theta += crate::linalg::opnorm(&(group_beta_sum(a, sub) - group_beta_sum(b, sub))) / s;
        }
        let whole = &flat.groups[*gi];
        theta += crate::linalg::opnorm(&(group_beta_sum(a, whole) - group_beta_sum(b, whole)));
        big_sq += (s * theta) * (s * theta);
        thetas.push(theta);
    }
    Ok((thetas, big_sq.sqrt()))
}

/// Greedy partition heuristic: cluster the union of both data sets'
/// `rho` values, starting a new group when the gap to the previous value
/// exceeds `gap / band`, and never splitting ties. Clusters are then
/// closed under "both values of one index pair stay together".
pub fn auto_partition(
    a: &dyn SpectralView,
    b: &dyn SpectralView,
    gap: f64,
) -> Result<Partition> {
    if gap <= 0.0 {
        return Err(Error::invalid("gap must be positive"));
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid("data sets have different dimensions"));
    }
    let bands = a.band_count().min(b.band_count());
    let m = a.dim();
    // (sortable key, pair)
    let mut items: Vec<(f64, IndexPair)> = Vec::with_capacity(2 * bands * m);
    for n in 1..=bands {
        for k in 1..=m {
            let p = IndexPair::new(n, k);
            items.push((signed_sqrt_key(a.rho(p)), p));
            items.push((signed_sqrt_key(b.rho(p)), p));
        }
    }
    items.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then_with(|| x.1.cmp(&y.1)));
    let mut cluster_of_item = vec![0usize; items.len()];
    let mut cluster = 0usize;
    for i in 1..items.len() {
        let band = items[i - 1].1.band.max(1) as f64;
        if items[i].0 - items[i - 1].0 > gap / band {
            cluster += 1;
        }
        cluster_of_item[i] = cluster;
    }
    // union-find over clusters forced by shared index pairs
    let mut parent: Vec<usize> = (0..=cluster).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    let mut first_cluster: BTreeMap<IndexPair, usize> = BTreeMap::new();
    for (i, (_, p)) in items.iter().enumerate() {
        let c = cluster_of_item[i];
        if let Some(&c0) = first_cluster.get(p) {
            let (r0, r1) = (find(&mut parent, c0), find(&mut parent, c));
            if r0 != r1 {
                parent[r1.max(r0)] = r1.min(r0);
            }
        } else {
            first_cluster.insert(*p, c);
        }
    }
    let mut groups: BTreeMap<usize, std::collections::BTreeSet<IndexPair>> = BTreeMap::new();
    for (i, (_, p)) in items.iter().enumerate() {
        let root = find(&mut parent, cluster_of_item[i]);
        groups.entry(root).or_default().insert(*p);
    }
    Partition::new(
        groups
            .into_values()
            .map(|g| g.into_iter().collect())
            .collect(),
    )
}

/// Monotone scan coordinate: `rho` on the positive axis, the negative
/// square root of `|lambda|` below zero.
fn signed_sqrt_key(r: Cx) -> f64 {
    let lambda = r.re * r.re - r.im * r.im;
    lambda.signum() * lambda.abs().sqrt()
}

/// Outcome of the stability-ratio experiment.
#[derive(Clone, Debug)]
pub struct StabilityRatio {
    /// `(||Q_a - Q_b||_L2 + ||h_a - h_b|| + ||H_a - H_b||) / Z`.
    pub ratio: f64,
    pub coefficient_distance: f64,
    pub z: f64,
    pub zetas: Vec<f64>,
}

/// Forward-solve both problems, evaluate `Z` for the supplied partition
/// (or the greedy heuristic), and return the coefficient-to-data ratio.
pub fn stability_ratio(
    prob_a: &Coefficients,
    prob_b: &Coefficients,
    partition: Option<&Partition>,
    bands: usize,
    gap: f64,
) -> Result<StabilityRatio> {
    let data_a = crate::direct::forward(prob_a, bands)?;
    let data_b = crate::direct::forward(prob_b, bands)?;
    let auto;
    let part = match partition {
        Some(p) => p,
        None => {
            auto = auto_partition(&data_a, &data_b, gap)?;
            &auto
        }
    };
    let (zetas, z) = zeta_z(part, &data_a, &data_b)?;
    let coefficient_distance = prob_a.distance(prob_b)?;
    if z < 1e-14 {
        if coefficient_distance > 1e-10 {
            return Err(Error::DegenerateZ {
                z,
                distance: coefficient_distance,
            });
        }
        return Ok(StabilityRatio {
            ratio: 0.0,
            coefficient_distance,
            z,
            zetas,
        });
    }
    Ok(StabilityRatio {
        ratio: coefficient_distance / z,
        coefficient_distance,
        z,
        zetas,
    })
}

/// The eigenvalue-splitting family: two formal data sequences sharing the
/// split eigenvalues `rho = n - 1 -+ delta/n^2` whose rank-one weights come
/// from two different orthogonal bases. Used in tests and experiments.
pub fn splitting_family(delta: f64, bands: usize) -> (RawSequence, RawSequence) {
    let mut rho = Vec::with_capacity(bands);
    let mut beta_a = Vec::with_capacity(bands);
    let mut beta_b = Vec::with_capacity(bands);
    for n in 1..=bands {
        let nf = n as f64;
        let base = nf - 1.0;
        let split = delta / (nf * nf);
        rho.push(vec![
            Cx::new(base - split, 0.0),
            Cx::new(base + split, 0.0),
        ]);
        let e1 = CMat::from_fn(2, 2, |i, j| {
            Cx::new(if i == 0 && j == 0 { 2.0 / PI } else { 0.0 }, 0.0)
        });
        let e2 = CMat::from_fn(2, 2, |i, j| {
            Cx::new(if i == 1 && j == 1 { 2.0 / PI } else { 0.0 }, 0.0)
        });
        beta_a.push(vec![e1, e2]);
        let plus = CMat::from_fn(2, 2, |_, _| Cx::new(1.0 / PI, 0.0));
        let minus = CMat::from_fn(2, 2, |i, j| {
            Cx::new(if i == j { 1.0 / PI } else { -1.0 / PI }, 0.0)
        });
        beta_b.push(vec![plus, minus]);
    }
    (
        RawSequence {
            dim: 2,
            rho: rho.clone(),
            beta: beta_a,
        },
        RawSequence {
            dim: 2,
            rho,
            beta: beta_b,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{model_lambda, model_vectors};
    use crate::spectral::Band;
    use crate::CVec;

    fn model_data(dim: usize, bands: usize) -> SpectralData {
        let bands = (1..=bands)
            .map(|n| Band {
                lambdas: vec![model_lambda(n); dim],
                vectors: model_vectors(n, dim),
            })
            .collect();
        SpectralData::new(dim, bands).unwrap()
    }

    fn completeness_failure_data(bands: usize) -> SpectralData {
        let s1 = (1.0 / PI).sqrt();
        let e1 = CVec::from_vec(vec![Cx::new(s1, 0.0), Cx::new(0.0, 0.0)]);
        let mut b = vec![Band {
            lambdas: vec![1e-4, 4e-4],
            vectors: vec![e1.clone(), e1],
        }];
        for n in 2..=bands {
            b.push(Band {
                lambdas: vec![model_lambda(n); 2],
                vectors: model_vectors(n, 2),
            });
        }
        SpectralData::new(2, b).unwrap()
    }

    #[test]
    fn remainder_norms_vanish_on_model() {
        let d = model_data(2, 8);
        let n = remainder_norms(&d, None).unwrap();
        assert_eq!(n.kappa_norm, 0.0);
        assert!(n.k_norm < 1e-13);
    }

    #[test]
    fn single_rho_shift_gives_exact_kappa() {
        let mut bands = model_data(1, 5).bands().to_vec();
        bands[0].lambdas = vec![0.09]; // rho_11 = 0.3, band n = 1
        let d = SpectralData::new(1, bands).unwrap();
        let n = remainder_norms(&d, None).unwrap();
        assert!((n.kappa_norm - 0.3).abs() < 1e-14);
    }

    #[test]
    fn riesz_bound_is_one_on_model_data() {
        for bands in [1, 5, 17] {
            let d = model_data(2, bands);
            let eps = riesz_lower_bound(&d, bands);
            assert!((eps - 1.0).abs() < 1e-10, "bands {bands}: {eps}");
        }
    }

    #[test]
    fn riesz_bound_detects_completeness_failure() {
        let d = completeness_failure_data(40);
        let eps = riesz_lower_bound(&d, 40);
        assert!(eps < 1e-3, "eps_hat = {eps}");
    }

    #[test]
    fn riesz_bound_collapses_on_duplicate_rho() {
        let mut bands = model_data(1, 6).bands().to_vec();
        // duplicate eigenvalue across bands 2 and 3
        bands[2].lambdas = bands[1].lambdas.clone();
        let d = SpectralData::new(1, bands).unwrap();
        assert!(riesz_lower_bound(&d, 6) < 1e-6);
    }

    #[test]
    fn membership_screens_and_is_monotone() {
        let d = model_data(2, 10);
        let (ok, rep) = membership(&d, 0.1, 0.5, None).unwrap();
        assert!(ok && rep.member);
        let fail = completeness_failure_data(30);
        let (bad, _) = membership(&fail, 10.0, 0.01, None).unwrap();
        assert!(!bad);
        // enlarging Omega / shrinking eps never flips true -> false
        let (ok2, _) = membership(&d, 0.2, 0.25, None).unwrap();
        assert!(ok2);
    }

    #[test]
    fn zeta_zero_on_identical_data() {
        let d = model_data(2, 6);
        let part = Partition::per_band(6, 2);
        let (zetas, z) = zeta_z(&part, &d, &d).unwrap();
        assert!(zetas.iter().all(|v| *v == 0.0));
        assert_eq!(z, 0.0);
    }

    #[test]
    fn singleton_partition_matches_explicit_formula_scalar() {
        // m = 1: ordinal s equals the band index, so Z reduces to the
        // explicit n-weighted l2 sum.
        let a = model_data(1, 7);
        let mut bands = a.bands().to_vec();
        for (n, b) in bands.iter_mut().enumerate() {
            let rho = model_lambda(n + 1).sqrt() + 0.1 / (n as f64 + 1.0).powi(2);
            b.lambdas = vec![rho * rho];
        }
        let b = SpectralData::new(1, bands).unwrap();
        let part = Partition::singletons(7, 1);
        let (_, z) = zeta_z(&part, &a, &b).unwrap();
        let mut expect = 0.0;
        for n in 1..=7usize {
            let rho_a = a.rho(IndexPair::new(n, 1));
            let rho_b = b.rho(IndexPair::new(n, 1));
            let beta_gap = crate::linalg::opnorm(
                &(a.beta(IndexPair::new(n, 1)) - b.beta(IndexPair::new(n, 1))),
            );
            let term = n as f64 * ((rho_a - rho_b).norm() + beta_gap);
            expect += term * term;
        }
        assert!((z - expect.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn z_is_invariant_under_group_listing_order() {
        // the ordinal weighting comes from the eigenvalue ordering, not
        // from the order groups were supplied in
        let a = model_data(1, 6);
        let mut bands = a.bands().to_vec();
        bands[2].lambdas = vec![4.4];
        bands[4].lambdas = vec![16.3];
        let b = SpectralData::new(1, bands).unwrap();
        let forward: Vec<Vec<IndexPair>> =
            (1..=6).map(|n| vec![IndexPair::new(n, 1)]).collect();
        let mut shuffled = forward.clone();
        shuffled.reverse();
        shuffled.swap(1, 4);
        let (_, z1) = zeta_z(&Partition::new(forward).unwrap(), &a, &b).unwrap();
        let (_, z2) = zeta_z(&Partition::new(shuffled).unwrap(), &a, &b).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn zeta_symmetric_for_singletons() {
        let a = model_data(1, 5);
        let mut bands = a.bands().to_vec();
        bands[3].lambdas = vec![9.4];
        let b = SpectralData::new(1, bands).unwrap();
        let part = Partition::singletons(5, 1);
        let (_, zab) = zeta_z(&part, &a, &b).unwrap();
        let (_, zba) = zeta_z(&part, &b, &a).unwrap();
        assert!((zab - zba).abs() < 1e-14);
    }

    #[test]
    fn splitting_family_zeta_values() {
        let delta = 0.37;
        let (a, b) = splitting_family(delta, 50);
        let part = Partition::per_band(50, 2);
        let (zetas, z) = zeta_z(&part, &a, &b).unwrap();
        for (i, zeta) in zetas.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!(
                (zeta - 4.0 * delta / (n * n)).abs() < 1e-12,
                "zeta_{} = {zeta}",
                i + 1
            );
        }
        let expect: f64 = (1..=50)
            .map(|n| {
                let t = 4.0 * delta / n as f64;
                t * t
            })
            .sum::<f64>()
            .sqrt();
        assert!((z - expect).abs() < 1e-12);
    }

    #[test]
    fn splitting_family_singletons_diverge() {
        let delta = 0.37;
        let (a, b) = splitting_family(delta, 60);
        let z_at = |bands: usize| {
            let part = Partition::singletons(bands, 2);
            let (at, bt) = (truncate_raw(&a, bands), truncate_raw(&b, bands));
            zeta_z(&part, &at, &bt).unwrap().1
        };
        let z20 = z_at(20);
        let z40 = z_at(40);
        let z60 = z_at(60);
        assert!(z40 > 2.0 * z20 && z60 > 1.5 * z40, "{z20} {z40} {z60}");
    }

    fn truncate_raw(r: &RawSequence, bands: usize) -> RawSequence {
        RawSequence {
            dim: r.dim,
            rho: r.rho[..bands].to_vec(),
            beta: r.beta[..bands].to_vec(),
        }
    }

    #[test]
    fn theta_zero_on_identical_data() {
        let d = model_data(2, 4);
        let refined = RefinedPartition::by_omega_classes(4, &[0.0, 1.0]);
        let (thetas, theta) = theta_big_theta(&refined, &d, &d).unwrap();
        assert!(thetas.iter().all(|v| *v == 0.0));
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn theta_reduces_to_zeta_plus_weighted_group_term() {
        // single-subgroup refinement on a 2-band toy
        let a = model_data(2, 2);
        let mut bands = a.bands().to_vec();
        bands[1].lambdas = vec![1.1, 1.3];
        for v in bands[1].vectors.iter_mut() {
            *v *= Cx::new(1.05, 0.0);
        }
        let b = SpectralData::new(2, bands).unwrap();
        let refined = RefinedPartition {
            groups: vec![
                vec![vec![IndexPair::new(1, 1), IndexPair::new(1, 2)]],
                vec![vec![IndexPair::new(2, 1), IndexPair::new(2, 2)]],
            ],
        };
        let part = refined.flatten();
        let (zetas, _) = zeta_z(&part, &a, &b).unwrap();
        let (thetas, _) = theta_big_theta(&refined, &a, &b).unwrap();
        for s in 0..2 {
            let group = &part.groups()[s];
            let beta_gap =
                crate::linalg::opnorm(&(group_beta_sum(&a, group) - group_beta_sum(&b, group)));
            let expect = zetas[s] + beta_gap / (s as f64 + 1.0);
            assert!((thetas[s] - expect).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn auto_partition_shapes() {
        // well separated simple spectra: singletons
        let a = model_data(1, 5);
        let mut bands = a.bands().to_vec();
        for b in bands.iter_mut() {
            b.lambdas = vec![b.lambdas[0] + 0.01];
        }
        let b = SpectralData::new(1, bands).unwrap();
        let part = auto_partition(&a, &b, 0.5).unwrap();
        assert_eq!(part.groups().len(), 5);
        assert!(part.groups().iter().all(|g| g.len() == 1));

        // exact ties on the model: band-size groups
        let d = model_data(3, 4);
        let part = auto_partition(&d, &d, 0.5).unwrap();
        assert_eq!(part.groups().len(), 4);
        assert!(part.groups().iter().all(|g| g.len() == 3));

        // splitting family with small delta: two-element groups per band
        let (ra, rb) = splitting_family(1e-3, 6);
        let part = auto_partition(&ra, &rb, 0.5).unwrap();
        assert_eq!(part.groups().len(), 6);
        assert!(part.groups().iter().all(|g| g.len() == 2));
    }

    #[test]
    fn stability_ratio_guards_identical_problems() {
        let c = Coefficients::scalar(|x| 0.4 * (2.0 * x).cos(), 0.0, 0.0, 500);
        let r = stability_ratio(&c, &c, None, 3, 0.5).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(r.z < 1e-12);
        assert!(r.coefficient_distance < 1e-10);
    }
}
