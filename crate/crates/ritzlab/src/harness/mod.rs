//! Config-driven experiment studies with CSV/JSON reports: stability-ratio
//! refinement runs, 𝒢_h studies, maximal-operator/convolution audits and
//! convergence sanity checks. The `ritzlab` CLI is a thin wrapper over the
//! `run_*` functions here.

mod catalog;
mod config;
mod reports;

pub use catalog::{build_function, parse_function_id, DomainDef, FunctionId};
pub use config::ExperimentConfig;
pub use reports::{fmt, write_json, CsvWriter};

use crate::assembly::AssemblyError;
use crate::fespace::{build_space, quadrature_rule, FeError, FeSpace};
use crate::geometry::{point_segment_distance, Point2};
use crate::greens::{estimate_gh, GhReport, GreensError};
use crate::mesh::{Mesh, MeshError};
use crate::numeric::least_squares_slope;
use crate::ritz::{
    energy_error, l2_error, ritz_project, stability_ratio, RitzError, SingularQuadSpec,
};
use crate::sampling::HaltonRect;
use crate::weights::{
    a1_constant, convolution_bound_check, normalize_mollifier, A1Estimate, ConvolutionReport,
    MaximalSpec, Weight, WeightError,
};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "ritzlab-report-1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error{}: {message}", match line { Some(l) => format!(" at line {l}"), None => String::new() })]
    Config { line: Option<usize>, message: String },
    #[error("slope fit error: {0}")]
    SlopeFit(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Ritz(#[from] RitzError),
    #[error(transparent)]
    Greens(#[from] GreensError),
}

impl HarnessError {
    /// CLI exit code: 2 for validation errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. }
            | HarnessError::SlopeFit(_)
            | HarnessError::Sampling(_)
            | HarnessError::Io(_)
            | HarnessError::Weight(WeightError::Parse(_))
            | HarnessError::Weight(WeightError::ExponentOutOfRange { .. })
            | HarnessError::Weight(WeightError::NonPositiveScale(_))
            | HarnessError::Weight(WeightError::NonPositiveMollifierParams { .. })
            | HarnessError::Fe(_) => 2,
            HarnessError::Mesh(e) => match e {
                MeshError::OutsideDomain { .. } => 3,
                _ => 2,
            },
            _ => 3,
        }
    }
}

/// Least-squares slope of `log value` against `log h`.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<f64, HarnessError> {
    if pairs.len() < 2 {
        return Err(HarnessError::SlopeFit(format!(
            "need at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    for &(h, v) in pairs {
        if !(h > 0.0) || !(v > 0.0) {
            return Err(HarnessError::SlopeFit(format!(
                "non-positive entry (h = {h}, value = {v})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(h, v)| (h.ln(), v.ln())).collect();
    Ok(least_squares_slope(&logs))
}

fn singular_quad_spec(config: &ExperimentConfig) -> SingularQuadSpec {
    SingularQuadSpec {
        base_exactness: config.quad_exactness,
        depth: config.quad_depth,
        ..SingularQuadSpec::default()
    }
}

fn build_level_space(
    domain: &DomainDef,
    level: usize,
    degree: usize,
) -> Result<Arc<FeSpace>, HarnessError> {
    let mesh = domain.mesh_at_level(level)?;
    Ok(Arc::new(build_space(Arc::new(mesh), degree)?))
}

// ---------------------------------------------------------------------------
// Stability study
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilityRow {
    pub level: usize,
    pub h_max: f64,
    pub numerator: f64,
    pub numerator_indicator: f64,
    pub denominator: f64,
    pub denominator_indicator: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub schema_version: &'static str,
    pub config: ExperimentConfig,
    pub rows: Vec<StabilityRow>,
    /// Least-squares slope of log ρ against log h over all rows.
    pub slope: f64,
    pub max_rho: f64,
    pub min_rho: f64,
}

/// Runs the stability-ratio refinement study and writes `stability.csv`
/// and `stability.json` under `out_dir`.
pub fn run_stability(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<StabilityReport, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let domain = DomainDef::parse(&config.domain)?;
    let weight = Weight::parse(&config.weight)?;
    let fid = parse_function_id(&config.function).map_err(|m| HarnessError::Config {
        line: None,
        message: m,
    })?;
    let center = config.function_center.map(|c| Point2::new(c[0], c[1]));
    let u = build_function(&fid, &domain, center)?;
    let spec = singular_quad_spec(config);

    let mut csv = CsvWriter::create(
        &out_dir.join("stability.csv"),
        "level,h_max,numerator,numerator_indicator,denominator,denominator_indicator,rho",
    )?;
    let mut rows = Vec::new();
    for &level in &config.levels {
        let space = build_level_space(&domain, level, config.degree)?;
        let m = stability_ratio(&space, &u, &weight, &spec, config.rel_tol)?;
        let row = StabilityRow {
            level,
            h_max: space.mesh().h_max(),
            numerator: m.numerator.value,
            numerator_indicator: m.numerator.indicator,
            denominator: m.denominator.value,
            denominator_indicator: m.denominator.indicator,
            rho: m.rho,
        };
        csv.row(&[
            row.level.to_string(),
            fmt(row.h_max),
            fmt(row.numerator),
            fmt(row.numerator_indicator),
            fmt(row.denominator),
            fmt(row.denominator_indicator),
            fmt(row.rho),
        ])?;
        rows.push(row);
    }
    let slope = fit_loglog_slope(&rows.iter().map(|r| (r.h_max, r.rho)).collect::<Vec<_>>())?;
    let report = StabilityReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows: rows.clone(),
        slope,
        max_rho: rows.iter().map(|r| r.rho).fold(f64::MIN, f64::max),
        min_rho: rows.iter().map(|r| r.rho).fold(f64::MAX, f64::min),
    };
    write_json(&out_dir.join("stability.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h_max: f64,
    pub dofs: usize,
    pub l2_error: f64,
    pub energy_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub schema_version: &'static str,
    pub config: ExperimentConfig,
    pub rows: Vec<ConvergenceRow>,
    /// Errors scale like h^rate; these are slopes of log error against
    /// log h. `None` when errors vanish to rounding (V_h members).
    pub l2_rate: Option<f64>,
    pub energy_rate: Option<f64>,
}

/// Manufactured-solution convergence study; writes `convergence.csv` and
/// `convergence.json`.
pub fn run_convergence(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ConvergenceReport, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let domain = DomainDef::parse(&config.domain)?;
    let fid = parse_function_id(&config.function).map_err(|m| HarnessError::Config {
        line: None,
        message: m,
    })?;
    let center = config.function_center.map(|c| Point2::new(c[0], c[1]));
    let u = build_function(&fid, &domain, center)?;
    let quad = quadrature_rule((2 * config.degree + 2).min(20))?;

    let mut csv = CsvWriter::create(
        &out_dir.join("convergence.csv"),
        "level,h_max,dofs,l2_error,energy_error",
    )?;
    let mut rows = Vec::new();
    for &level in &config.levels {
        let space = build_level_space(&domain, level, config.degree)?;
        let uh = ritz_project(&space, &u, config.rel_tol)?;
        let row = ConvergenceRow {
            level,
            h_max: space.mesh().h_max(),
            dofs: space.n_dofs(),
            l2_error: l2_error(&u, &uh, &quad),
            energy_error: energy_error(&u, &uh, &quad),
        };
        csv.row(&[
            row.level.to_string(),
            fmt(row.h_max),
            row.dofs.to_string(),
            fmt(row.l2_error),
            fmt(row.energy_error),
        ])?;
        rows.push(row);
    }
    let fit = |select: &dyn Fn(&ConvergenceRow) -> f64| -> Option<f64> {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h_max, select(r))).collect();
        if pairs.iter().any(|&(_, v)| v <= 1e-13) {
            None
        } else {
            fit_loglog_slope(&pairs).ok()
        }
    };
    let report = ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows: rows.clone(),
        l2_rate: fit(&|r| r.l2_error),
        energy_rate: fit(&|r| r.energy_error),
    };
    write_json(&out_dir.join("convergence.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// 𝒢_h study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct GhStudyReport {
    pub schema_version: &'static str,
    pub config: ExperimentConfig,
    pub runs: Vec<GhReport>,
    /// Slope of log 𝒢̂_h against log h per (K, γ, r) group.
    pub slopes: Vec<GhSlope>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GhSlope {
    pub k_param: f64,
    pub gamma: f64,
    pub r: usize,
    pub slope: f64,
}

/// Distance from `z` to the nearest edge of its containing element.
fn element_edge_distance(mesh: &Mesh, z: Point2) -> Option<f64> {
    let (t, _) = mesh.locate_point(z).ok()?;
    let [a, b, c] = mesh.triangle_vertices(t);
    Some(
        point_segment_distance(z, a, b)
            .min(point_segment_distance(z, b, c))
            .min(point_segment_distance(z, c, a)),
    )
}

fn valid_source_point(meshes: &[&Mesh], z: Point2) -> bool {
    meshes.iter().all(|m| {
        element_edge_distance(m, z)
            .map(|d| d >= 1e-6 * m.h_min())
            .unwrap_or(false)
    })
}

/// Interior source points valid on every mesh in the family, kept away
/// from the boundary by 2.5h of the finest mesh (capped by the domain's
/// inradius so coarse-only runs stay feasible).
fn interior_source_points(
    domain: &DomainDef,
    meshes: &[&Mesh],
    n: usize,
    seed: u64,
) -> Result<Vec<Point2>, HarnessError> {
    let (lo, hi) = domain.bounding_box();
    let h_finest = meshes
        .iter()
        .map(|m| m.h_max())
        .fold(f64::INFINITY, f64::min);
    let inradius_est = HaltonRect::new(lo, hi, 0)
        .take(500)
        .map(|p| domain.boundary_distance(p))
        .fold(0.0f64, f64::max);
    let margin = (2.5 * h_finest).min(0.5 * inradius_est);
    let mut out = Vec::with_capacity(n);
    let mut tried = 0usize;
    for p in HaltonRect::new(lo, hi, seed) {
        if out.len() >= n {
            break;
        }
        tried += 1;
        if tried > 100_000 {
            return Err(HarnessError::Sampling(
                "could not find enough interior source points".into(),
            ));
        }
        if domain.boundary_distance(p) < margin {
            continue;
        }
        if valid_source_point(meshes, p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Near-boundary band points at distance ~1.5h, nudged tangentially until
/// strictly interior to an element.
fn near_boundary_source_points(mesh: &Mesh, n: usize) -> Vec<Point2> {
    if n == 0 {
        return Vec::new();
    }
    let h = mesh.h_max();
    let boundary_edges: Vec<_> = mesh
        .edges()
        .iter()
        .filter(|e| e.is_boundary())
        .cloned()
        .collect();
    let mut out = Vec::with_capacity(n);
    let stride = (boundary_edges.len() / n).max(1);
    for e in boundary_edges.iter().step_by(stride) {
        if out.len() >= n {
            break;
        }
        let a = mesh.vertex(e.v[0]);
        let b = mesh.vertex(e.v[1]);
        let mid = (a + b) * 0.5;
        let tri = mesh.triangle(e.t0);
        let opposite = tri
            .iter()
            .copied()
            .find(|v| *v != e.v[0] && *v != e.v[1])
            .expect("triangle has a third vertex");
        let to_in = mesh.vertex(opposite) - mid;
        let edge = b - a;
        let mut normal = Point2::new(-edge.y, edge.x) * (1.0 / edge.norm());
        if normal.dot(to_in) < 0.0 {
            normal = -normal;
        }
        let tangent = edge * (1.0 / edge.norm());
        for k in 0..32 {
            let p = mid + normal * (1.5 * h) + tangent * ((k as f64 + 1.0) * 0.0137 * h);
            if valid_source_point(&[mesh], p) {
                out.push(p);
                break;
            }
        }
    }
    out
}

/// Runs the 𝒢_h study over the configured levels and (K, γ) sweep; writes
/// `gh.csv` and `gh.json`.
pub fn run_gh_study(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<GhStudyReport, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let domain = DomainDef::parse(&config.domain)?;

    let meshes: Vec<Mesh> = config
        .levels
        .iter()
        .map(|&l| domain.mesh_at_level(l))
        .collect::<Result<_, _>>()?;
    let mesh_refs: Vec<&Mesh> = meshes.iter().collect();
    let interior = interior_source_points(&domain, &mesh_refs, config.z_samples, config.seed)?;

    let mut r_values = vec![config.ref_levels];
    if config.ref_levels_alt != 0 && config.ref_levels_alt != config.ref_levels {
        r_values.push(config.ref_levels_alt);
    }

    let mut csv = CsvWriter::create(
        &out_dir.join("gh.csv"),
        "level,h_max,k_param,gamma,r,gh_estimate,gh_interior,gh_near_boundary",
    )?;
    let mut runs: Vec<GhReport> = Vec::new();
    let mut slopes = Vec::new();
    for pair in config.sweep_pairs() {
        let mollifier = normalize_mollifier(pair[0], pair[1])?;
        for &r in &r_values {
            let mut level_pairs = Vec::new();
            for (idx, &level) in config.levels.iter().enumerate() {
                let space = Arc::new(build_space(Arc::new(meshes[idx].clone()), config.degree)?);
                let mut z = interior.clone();
                z.extend(near_boundary_source_points(
                    &meshes[idx],
                    config.z_boundary_samples,
                ));
                let report = estimate_gh(
                    &space,
                    &mollifier,
                    &z,
                    config.x_samples,
                    r,
                    config.rel_tol,
                    level,
                )?;
                csv.row(&[
                    level.to_string(),
                    fmt(report.h),
                    fmt(report.k_param),
                    fmt(report.gamma),
                    r.to_string(),
                    fmt(report.gh_estimate),
                    fmt(report.gh_interior),
                    fmt(report.gh_near_boundary),
                ])?;
                level_pairs.push((report.h, report.gh_estimate));
                runs.push(report);
            }
            if level_pairs.len() >= 2 && level_pairs.iter().all(|&(_, v)| v > 0.0) {
                slopes.push(GhSlope {
                    k_param: pair[0],
                    gamma: pair[1],
                    r,
                    slope: fit_loglog_slope(&level_pairs)?,
                });
            }
        }
    }
    let report = GhStudyReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        runs,
        slopes,
    };
    write_json(&out_dir.join("gh.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Weight audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct WeightAuditReport {
    pub schema_version: &'static str,
    pub config: ExperimentConfig,
    pub a1: A1Estimate,
    /// Same estimate with twice the samples (sample-doubling stability).
    pub a1_doubled: A1Estimate,
    pub maximal_spec: MaximalSpec,
    pub eps_list: Vec<f64>,
    pub convolutions: Vec<ConvolutionReport>,
    pub max_ratio_maximal_over_weight: f64,
}

/// Runs the maximal-operator / convolution audit; writes `weights.csv` and
/// `weights.json`. One CSV row per (eps, sample).
pub fn run_weight_audit(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<WeightAuditReport, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let domain = DomainDef::parse(&config.domain)?;
    let weight = Weight::parse(&config.weight)?;
    let (lo, hi) = domain.bounding_box();
    let spec = MaximalSpec::for_diameter(domain.diameter());
    let mollifier = normalize_mollifier(config.mollifier_k, config.mollifier_gamma)?;

    let singular = weight.singular_points();
    let mut samples = Vec::with_capacity(config.samples);
    for p in HaltonRect::new(lo, hi, config.seed) {
        if samples.len() >= config.samples {
            break;
        }
        if singular.iter().any(|s| p.dist(*s) < 1e-6) {
            continue;
        }
        samples.push(p);
    }

    let a1 = a1_constant(&weight, lo, hi, config.samples, &spec)?;
    let a1_doubled = a1_constant(&weight, lo, hi, 2 * config.samples, &spec)?;

    let eps_list: Vec<f64> = config
        .levels
        .iter()
        .map(|&l| domain.mesh_at_level(l).map(|m| m.h_max()))
        .collect::<Result<_, _>>()?;

    let mut csv = CsvWriter::create(
        &out_dir.join("weights.csv"),
        "eps,x,y,weight,maximal,maximal_over_weight,conv,conv_over_weight,conv_over_maximal",
    )?;
    let mut convolutions = Vec::new();
    let mut max_ratio = 0.0f64;
    for &eps in &eps_list {
        let report = convolution_bound_check(&mollifier, &weight, eps, &samples, &spec)?;
        for row in &report.rows {
            let mw_over_w = row.maximal / row.weight;
            max_ratio = max_ratio.max(mw_over_w);
            csv.row(&[
                fmt(eps),
                fmt(row.x[0]),
                fmt(row.x[1]),
                fmt(row.weight),
                fmt(row.maximal),
                fmt(mw_over_w),
                fmt(row.conv),
                fmt(row.ratio_to_weight),
                fmt(row.ratio_to_maximal),
            ])?;
        }
        convolutions.push(report);
    }
    let report = WeightAuditReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        a1,
        a1_doubled,
        maximal_spec: spec,
        eps_list,
        convolutions,
        max_ratio_maximal_over_weight: max_ratio,
    };
    write_json(&out_dir.join("weights.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Mesh generation entry point used by the CLI
// ---------------------------------------------------------------------------

/// Reads a polygon file (`x y` per line, `#` comments), triangulates it to
/// the target mesh size, and writes the plain-text mesh format.
pub fn run_mesh_generation(
    polygon_path: &Path,
    h_target: f64,
    out_path: &Path,
) -> Result<Mesh, HarnessError> {
    let text = std::fs::read_to_string(polygon_path)?;
    let mut polygon = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(HarnessError::Config {
                line: Some(idx + 1),
                message: format!("polygon line needs `x y`, got {} fields", fields.len()),
            });
        }
        let x: f64 = fields[0].parse().map_err(|_| HarnessError::Config {
            line: Some(idx + 1),
            message: format!("invalid coordinate {:?}", fields[0]),
        })?;
        let y: f64 = fields[1].parse().map_err(|_| HarnessError::Config {
            line: Some(idx + 1),
            message: format!("invalid coordinate {:?}", fields[1]),
        })?;
        polygon.push(Point2::new(x, y));
    }
    let mesh = crate::mesh::triangulate_convex_polygon(&polygon, h_target)?;
    let file = std::fs::File::create(out_path)?;
    let mut writer = std::io::BufWriter::new(file);
    crate::mesh::write_mesh(&mesh, &mut writer)?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_fit_examples() {
        assert_relative_eq!(
            fit_loglog_slope(&[(1.0, 1.0), (0.5, 0.25)]).unwrap(),
            2.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            fit_loglog_slope(&[(1.0, 3.0), (0.5, 3.0), (0.25, 3.0)]).unwrap(),
            0.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            fit_loglog_slope(&[(1.0, 2.0), (0.5, 1.0), (0.25, 0.5)]).unwrap(),
            1.0,
            epsilon = 1e-13
        );
        assert!(fit_loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (0.5, -1.0)]).is_err());
        assert!(fit_loglog_slope(&[(0.0, 1.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn stability_study_hat_is_flat() {
        let config = ExperimentConfig {
            function: "hat".into(),
            levels: vec![1, 2],
            ..ExperimentConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let report = run_stability(&config, dir.path()).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!((row.rho - 1.0).abs() <= 1e-8, "rho {}", row.rho);
        }
        assert!(report.slope.abs() <= 1e-6);
        assert!(dir.path().join("stability.csv").exists());
        assert!(dir.path().join("stability.json").exists());
    }

    #[test]
    fn convergence_study_polynomial_is_exact() {
        let config = ExperimentConfig {
            function: "polynomial:1".into(),
            levels: vec![1, 2, 3],
            ..ExperimentConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let report = run_convergence(&config, dir.path()).unwrap();
        for row in &report.rows {
            assert!(row.l2_error <= 1e-9, "l2 {}", row.l2_error);
            assert!(row.energy_error <= 1e-9, "energy {}", row.energy_error);
        }
    }

    #[test]
    fn weight_audit_constant_weight() {
        let config = ExperimentConfig {
            weight: "const:1".into(),
            levels: vec![2],
            samples: 16,
            ..ExperimentConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let report = run_weight_audit(&config, dir.path()).unwrap();
        assert_eq!(report.a1.constant, 1.0);
        for conv in &report.convolutions {
            for row in &conv.rows {
                assert!((row.ratio_to_weight - 1.0).abs() <= 1e-6);
                assert!((row.ratio_to_maximal - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_reruns_are_byte_identical() {
        let config = ExperimentConfig {
            function: "sine".into(),
            weight: "power:0.5,0.5,0.5".into(),
            levels: vec![1, 2],
            samples: 8,
            ..ExperimentConfig::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_stability(&config, dir_a.path()).unwrap();
        run_stability(&config, dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("stability.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("stability.csv")).unwrap();
        assert_eq!(a, b);
        let a = std::fs::read(dir_a.path().join("stability.json")).unwrap();
        let b = std::fs::read(dir_b.path().join("stability.json")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn source_point_helpers_produce_valid_points() {
        let domain = DomainDef::unit_square();
        let meshes = [
            domain.mesh_at_level(2).unwrap(),
            domain.mesh_at_level(3).unwrap(),
        ];
        let refs: Vec<&Mesh> = meshes.iter().collect();
        let pts = interior_source_points(&domain, &refs, 3, 0).unwrap();
        assert_eq!(pts.len(), 3);
        for p in &pts {
            assert!(valid_source_point(&refs, *p));
        }
        let band = near_boundary_source_points(&meshes[0], 2);
        assert_eq!(band.len(), 2);
        for p in &band {
            assert!(valid_source_point(&[&meshes[0]], *p));
            assert!(meshes[0].boundary_distance(*p) < 2.0 * meshes[0].h_max());
        }
    }
}
