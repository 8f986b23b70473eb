//! Command implementations: parse inputs, run the library, write JSON/CSV
//! artifacts plus a manifest. Inputs are fully parsed before any output
//! file is created, so failed runs leave no partial artifacts.

use matspec_core::inverse::InverseOptions;
use matspec_core::io::{
    AssembledSystemJson, CoefficientsJson, GraphProblemJson, SpectralDataJson,
};
use matspec_core::{direct, graph, inverse, io, kernels, par, stability};
use matspec_core::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const DEFAULT_BANDS: usize = 25;
pub const DEFAULT_GRID: usize = 200;

pub struct RunContext {
    pub seed: u64,
    started: Instant,
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        RunContext {
            seed,
            started: Instant::now(),
        }
    }

    /// FNV-1a hash of the canonical run configuration, hex-encoded.
    fn config_hash(&self, parts: &[String]) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for part in parts {
            for b in part.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0x1f;
            h = h.wrapping_mul(0x100000001b3);
        }
        for b in self.seed.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    fn manifest(&self, command: &str, hash: &str, artifacts: &[&Path]) -> serde_json::Value {
        serde_json::json!({
            "tool": "matspec",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": self.seed,
            "threads": par::thread_count(),
            "config_hash": hash,
            "elapsed_ms": self.started.elapsed().as_millis() as u64,
            "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn write_artifact(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_artifact(path, &text)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn finish(ctx: &RunContext, command: &str, hash: &str, artifacts: &[&Path]) -> Result<()> {
    let manifest = ctx.manifest(command, hash, artifacts);
    write_json(&manifest_path(artifacts[0]), &manifest)
}

fn require_hermitian(report: &matspec_core::problem::ValidationReport) -> Result<()> {
    if !report.hermitian {
        return Err(Error::invalid(format!(
            "coefficients are not Hermitian (defect {:.3e})",
            report.max_hermitian_defect
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------

pub fn forward(
    ctx: &RunContext,
    problem: &Path,
    bands: usize,
    weights: bool,
    out: &Path,
) -> Result<()> {
    let coeffs = io::parse_coefficients(&read_input(problem)?)?;
    let report = coeffs.validate();
    require_hermitian(&report)?;
    if !report.in_restricted_class {
        eprintln!(
            "note: mean defect {:.3e} puts the problem outside the restricted class; the inverse solver assumes zero",
            report.mean_defect_norm
        );
    }
    let hash = ctx.config_hash(&["forward".into(), bands.to_string()]);
    let data = direct::forward(&coeffs, bands)?;
    let mut json = SpectralDataJson::from_data(&data);
    json.config_hash = Some(hash.clone());
    write_json(out, &json)?;
    if weights {
        let w = direct::weight_matrices(&data);
        let weights_path = out.with_extension("weights.json");
        let payload = serde_json::json!({
            "m": data.dim(),
            "alphas": w
                .alphas
                .iter()
                .map(|a| (0..a.nrows())
                    .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect::<Vec<_>>())
                    .collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "config_hash": hash,
        });
        write_json(&weights_path, &payload)?;
        return finish(ctx, "forward", &hash, &[out, &weights_path]);
    }
    finish(ctx, "forward", &hash, &[out])
}

pub fn inverse(
    ctx: &RunContext,
    spectra: &Path,
    bands: usize,
    grid: usize,
    symmetrize: bool,
    dump_system: Option<f64>,
    out: &Path,
) -> Result<()> {
    let data = io::parse_spectral_data(&read_input(spectra)?)?;
    let opts = InverseOptions {
        bands,
        grid,
        symmetrize,
        ..Default::default()
    };
    let hash = ctx.config_hash(&[
        "inverse".into(),
        bands.to_string(),
        grid.to_string(),
        symmetrize.to_string(),
    ]);
    let rec = inverse::reconstruct(&data, &opts)?;
    if let Some(warning) = &rec.class_warning {
        eprintln!("note: {warning}");
    }
    let mut json = CoefficientsJson::from_coefficients(&rec.coefficients);
    json.config_hash = Some(hash.clone());
    write_json(out, &json)?;
    let mut artifacts: Vec<PathBuf> = vec![out.to_path_buf()];
    if let Some(x) = dump_system {
        let completed = inverse::complete_with_model_tail(&data, bands);
        let sys = kernels::MainSystem::new(&completed, bands)?;
        let asm = sys.assemble(x.clamp(0.0, std::f64::consts::PI), false);
        let dump_path = out.with_extension("system.json");
        write_json(&dump_path, &AssembledSystemJson::from_system(&asm))?;
        artifacts.push(dump_path);
    }
    println!(
        "reconstructed m = {}, hermitian defect {:.3e}, max condition {:.3e}",
        rec.coefficients.dim(),
        rec.hermitian_defect,
        rec.max_condition
    );
    let refs: Vec<&Path> = artifacts.iter().map(|p| p.as_path()).collect();
    finish(ctx, "inverse", &hash, &refs)
}

#[derive(Serialize)]
struct RoundtripReport {
    bands: usize,
    grid: usize,
    l2_error_q: f64,
    h_error: f64,
    big_h_error: f64,
    hermitian_defect: f64,
    max_condition: f64,
    mean_defect_norm: f64,
    config_hash: String,
}

pub fn roundtrip(
    ctx: &RunContext,
    problem: &Path,
    bands: usize,
    grid: usize,
    out: &Path,
) -> Result<()> {
    let coeffs = io::parse_coefficients(&read_input(problem)?)?;
    require_hermitian(&coeffs.validate())?;
    let hash = ctx.config_hash(&["roundtrip".into(), bands.to_string(), grid.to_string()]);
    let data = direct::forward(&coeffs, bands)?;
    let opts = InverseOptions {
        bands,
        grid,
        ..Default::default()
    };
    let rec = inverse::reconstruct(&data, &opts)?;
    let truth = coeffs.resampled(grid);
    let q_err = potential_l2_distance(&rec.coefficients, &truth);
    let report = RoundtripReport {
        bands,
        grid,
        l2_error_q: q_err,
        h_error: matspec_core::linalg::opnorm(&(rec.coefficients.h() - truth.h())),
        big_h_error: matspec_core::linalg::opnorm(&(rec.coefficients.big_h() - truth.big_h())),
        hermitian_defect: rec.hermitian_defect,
        max_condition: rec.max_condition,
        mean_defect_norm: rec.coefficients.validate().mean_defect_norm,
        config_hash: hash.clone(),
    };
    write_json(out, &report)?;
    println!(
        "roundtrip: |q_rec - q|_L2 = {:.3e}, |h - h_rec| = {:.3e}, |H - H_rec| = {:.3e}",
        report.l2_error_q, report.h_error, report.big_h_error
    );
    finish(ctx, "roundtrip", &hash, &[out])
}

fn potential_l2_distance(
    a: &matspec_core::problem::Coefficients,
    b: &matspec_core::problem::Coefficients,
) -> f64 {
    let m = a.dim();
    let step = a.step();
    let mut total = 0.0;
    for j in 0..m {
        for k in 0..m {
            let sq: Vec<f64> = a
                .potential()
                .iter()
                .zip(b.potential())
                .map(|(x, y)| (x[(j, k)] - y[(j, k)]).norm_sqr())
                .collect();
            total += matspec_core::linalg::trapezoid_scalar(&sq, step).sqrt();
        }
    }
    total
}

#[derive(Serialize)]
struct StabilityArtifact {
    kappa_norm_a: f64,
    k_norm_a: f64,
    eps_hat_a: f64,
    kappa_norm_b: f64,
    k_norm_b: f64,
    eps_hat_b: f64,
    partition_groups: usize,
    zetas: Vec<f64>,
    z: f64,
    config_hash: String,
}

pub fn stability(
    ctx: &RunContext,
    spectra_a: &Path,
    spectra_b: &Path,
    partition: &str,
    gap: f64,
    out: &Path,
) -> Result<()> {
    let a = io::parse_spectral_data(&read_input(spectra_a)?)?;
    let b = io::parse_spectral_data(&read_input(spectra_b)?)?;
    let part = if partition == "auto" {
        stability::auto_partition(&a, &b, gap)?
    } else {
        io::partition_from_json(&read_input(Path::new(partition))?)?
    };
    let hash = ctx.config_hash(&["stability".into(), partition.into(), gap.to_string()]);
    let (zetas, z) = stability::zeta_z(&part, &a, &b)?;
    let norms_a = stability::remainder_norms(&a, None)?;
    let norms_b = stability::remainder_norms(&b, None)?;
    let artifact = StabilityArtifact {
        kappa_norm_a: norms_a.kappa_norm,
        k_norm_a: norms_a.k_norm,
        eps_hat_a: stability::riesz_lower_bound(&a, a.band_count()),
        kappa_norm_b: norms_b.kappa_norm,
        k_norm_b: norms_b.k_norm,
        eps_hat_b: stability::riesz_lower_bound(&b, b.band_count()),
        partition_groups: part.groups().len(),
        zetas,
        z,
        config_hash: hash.clone(),
    };
    write_json(out, &artifact)?;
    println!("Z = {:.6e} over {} groups", artifact.z, artifact.partition_groups);
    finish(ctx, "stability", &hash, &[out])
}

pub fn partition(
    ctx: &RunContext,
    spectra_a: &Path,
    spectra_b: &Path,
    gap: f64,
    out: &Path,
) -> Result<()> {
    let a = io::parse_spectral_data(&read_input(spectra_a)?)?;
    let b = io::parse_spectral_data(&read_input(spectra_b)?)?;
    let part = stability::auto_partition(&a, &b, gap)?;
    let hash = ctx.config_hash(&["partition".into(), gap.to_string()]);
    write_artifact(out, &io::partition_to_json(&part))?;
    finish(ctx, "partition", &hash, &[out])
}

pub fn sweep(
    ctx: &RunContext,
    problem: &Path,
    prefixes: &str,
    bands: usize,
    grid: usize,
    out: &Path,
) -> Result<()> {
    let coeffs = io::parse_coefficients(&read_input(problem)?)?;
    require_hermitian(&coeffs.validate())?;
    let prefix_list: Vec<usize> = prefixes
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad prefix list entry {p:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if prefix_list.iter().any(|p| *p > bands) {
        return Err(Error::invalid("prefixes cannot exceed the band count"));
    }
    let hash = ctx.config_hash(&[
        "sweep".into(),
        prefixes.into(),
        bands.to_string(),
        grid.to_string(),
    ]);
    let data = direct::forward(&coeffs, bands)?;
    let truth = coeffs.resampled(grid);
    let mut csv = String::from("prefix_bands,l2_error_q,h_error,H_error\n");
    for p in prefix_list {
        let partial = data.truncated(p);
        let opts = InverseOptions {
            bands,
            grid,
            ..Default::default()
        };
        let rec = inverse::reconstruct(&partial, &opts)?;
        let q_err = potential_l2_distance(&rec.coefficients, &truth);
        let h_err = matspec_core::linalg::opnorm(&(rec.coefficients.h() - truth.h()));
        let bh_err = matspec_core::linalg::opnorm(&(rec.coefficients.big_h() - truth.big_h()));
        csv.push_str(&format!("{p},{q_err:.12e},{h_err:.12e},{bh_err:.12e}\n"));
    }
    csv.push_str(&format!("# config_hash={hash}\n"));
    write_artifact(out, &csv)?;
    finish(ctx, "sweep", &hash, &[out])
}

// ---------------------------------------------------------------------
// Graph commands
// ---------------------------------------------------------------------

fn check_edges(g: &matspec_core::graph::StarGraphProblem, edges: Option<usize>) -> Result<()> {
    if let Some(k) = edges {
        if g.edges() != k {
            return Err(Error::invalid(format!(
                "problem file has {} edges, --edges asked for {k}",
                g.edges()
            )));
        }
    }
    Ok(())
}

pub fn graph_forward(
    ctx: &RunContext,
    problem: &Path,
    edges: Option<usize>,
    bands: usize,
    out: &Path,
) -> Result<()> {
    let g = io::parse_graph_problem(&read_input(problem)?)?;
    check_edges(&g, edges)?;
    if !g.in_class() {
        eprintln!(
            "note: edge mean defect {:.3e} exceeds the zero-mean class tolerance",
            g.max_mean_defect()
        );
    }
    let hash = ctx.config_hash(&["graph-forward".into(), bands.to_string()]);
    let data = graph::graph_forward(&g, bands)?;
    let mut json = SpectralDataJson::from_data(data.data());
    json.config_hash = Some(hash.clone());
    write_json(out, &json)?;
    finish(ctx, "graph forward", &hash, &[out])
}

pub fn graph_inverse(
    ctx: &RunContext,
    spectra: &Path,
    bands: usize,
    grid: usize,
    symmetrize: bool,
    out: &Path,
) -> Result<()> {
    let json: SpectralDataJson = serde_json::from_str(&read_input(spectra)?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let data = json.into_graph_data()?;
    let opts = InverseOptions {
        bands,
        grid,
        symmetrize,
        ..Default::default()
    };
    let hash = ctx.config_hash(&[
        "graph-inverse".into(),
        bands.to_string(),
        grid.to_string(),
        symmetrize.to_string(),
    ]);
    let rec = graph::graph_reconstruct(&data, &opts)?;
    let mut out_json = GraphProblemJson::from_problem(&rec.problem);
    out_json.config_hash = Some(hash.clone());
    write_json(out, &out_json)?;
    println!(
        "recovered {} edges, off-diagonal residual {:.3e}, max condition {:.3e}",
        rec.problem.edges(),
        rec.offdiag_residual,
        rec.max_condition
    );
    finish(ctx, "graph inverse", &hash, &[out])
}

#[derive(Serialize)]
struct GraphRoundtripReport {
    bands: usize,
    grid: usize,
    edge_l2_errors: Vec<f64>,
    max_edge_error: f64,
    offdiag_residual: f64,
    hermitian_defect: f64,
    max_condition: f64,
    config_hash: String,
}

pub fn graph_roundtrip(
    ctx: &RunContext,
    problem: &Path,
    edges: Option<usize>,
    bands: usize,
    grid: usize,
    out: &Path,
) -> Result<()> {
    let g = io::parse_graph_problem(&read_input(problem)?)?;
    check_edges(&g, edges)?;
    let hash = ctx.config_hash(&["graph-roundtrip".into(), bands.to_string(), grid.to_string()]);
    let data = graph::graph_forward(&g, bands)?;
    let opts = InverseOptions {
        bands,
        grid,
        ..Default::default()
    };
    let rec = graph::graph_reconstruct(&data, &opts)?;
    let truth = g.resampled(grid);
    let edge_l2_errors = rec.problem.edge_distances(&truth)?;
    let max_edge_error = edge_l2_errors.iter().copied().fold(0.0, f64::max);
    let report = GraphRoundtripReport {
        bands,
        grid,
        edge_l2_errors,
        max_edge_error,
        offdiag_residual: rec.offdiag_residual,
        hermitian_defect: rec.hermitian_defect,
        max_condition: rec.max_condition,
        config_hash: hash.clone(),
    };
    write_json(out, &report)?;
    println!(
        "graph roundtrip: max edge error {:.3e}, off-diagonal residual {:.3e}",
        report.max_edge_error, report.offdiag_residual
    );
    finish(ctx, "graph roundtrip", &hash, &[out])
}
