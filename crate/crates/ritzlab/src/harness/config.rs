//! Line-based experiment configuration: `key = value`, `#` comments,
//! comma-separated lists, unknown keys rejected.

use super::catalog::{parse_function_id, DomainDef};
use super::HarnessError;
use crate::weights::Weight;
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    /// `unit-square`, `pentagon`, or `polygon:x0,y0;x1,y1;...`.
    pub domain: String,
    pub degree: usize,
    /// Refinement levels of the centroid-fan base mesh; strictly increasing.
    pub levels: Vec<usize>,
    /// Weight spec in the `const:`/`power:`/`prodpower:` mini-grammar.
    pub weight: String,
    /// Test function id: `sine`, `bubble-power:<beta>`, `hat`,
    /// `polynomial:<k>`.
    pub function: String,
    /// Center for `bubble-power`; defaults to the domain centroid.
    pub function_center: Option<[f64; 2]>,
    pub mollifier_k: f64,
    pub mollifier_gamma: f64,
    /// (K, γ) pairs for the 𝒢_h sensitivity sweep; defaults to the single
    /// configured pair.
    pub mollifier_sweep: Vec<[f64; 2]>,
    /// Per-cell exactness of the weighted-norm quadrature.
    pub quad_exactness: usize,
    /// Graded subdivision depth of the weighted-norm quadrature.
    pub quad_depth: usize,
    pub rel_tol: f64,
    /// Extra refinement levels of the Green reference surrogate.
    pub ref_levels: usize,
    /// Second reference depth for the self-consistency comparison
    /// (0 disables it).
    pub ref_levels_alt: usize,
    /// Interior Green source points per level.
    pub z_samples: usize,
    /// Near-boundary Green source points per level.
    pub z_boundary_samples: usize,
    /// Quasi-random evaluation points per source point.
    pub x_samples: usize,
    /// Sample count for the weight audit.
    pub samples: usize,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "unit-square".into(),
            degree: 1,
            levels: vec![2, 3, 4, 5],
            weight: "const:1".into(),
            function: "sine".into(),
            function_center: None,
            mollifier_k: 1.0,
            mollifier_gamma: 0.5,
            mollifier_sweep: Vec::new(),
            quad_exactness: 6,
            quad_depth: 6,
            rel_tol: 1e-12,
            ref_levels: 2,
            ref_levels_alt: 0,
            z_samples: 4,
            z_boundary_samples: 2,
            x_samples: 200,
            samples: 200,
            seed: 0,
            deterministic: true,
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line: Some(line),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line_no, format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_usize = |v: &str| -> Result<usize, HarnessError> {
                v.parse()
                    .map_err(|_| config_err(line_no, format!("invalid integer {v:?} for {key}")))
            };
            let parse_f64 = |v: &str| -> Result<f64, HarnessError> {
                v.parse()
                    .map_err(|_| config_err(line_no, format!("invalid number {v:?} for {key}")))
            };
            match key {
                "domain" => cfg.domain = value.to_string(),
                "degree" => cfg.degree = parse_usize(value)?,
                "levels" => {
                    cfg.levels = value
                        .split(',')
                        .map(|s| parse_usize(s.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "weight" => cfg.weight = value.to_string(),
                "function" => cfg.function = value.to_string(),
                "function_center" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 2 {
                        return Err(config_err(line_no, "function_center needs `x,y`"));
                    }
                    cfg.function_center = Some([parse_f64(parts[0])?, parse_f64(parts[1])?]);
                }
                "mollifier_k" => cfg.mollifier_k = parse_f64(value)?,
                "mollifier_gamma" => cfg.mollifier_gamma = parse_f64(value)?,
                "mollifier_sweep" => {
                    let mut sweep = Vec::new();
                    for pair in value.split(';') {
                        let parts: Vec<&str> = pair.split(',').collect();
                        if parts.len() != 2 {
                            return Err(config_err(
                                line_no,
                                "mollifier_sweep needs `K,gamma;K,gamma;...`",
                            ));
                        }
                        sweep.push([parse_f64(parts[0])?, parse_f64(parts[1])?]);
                    }
                    cfg.mollifier_sweep = sweep;
                }
                "quad_exactness" => cfg.quad_exactness = parse_usize(value)?,
                "quad_depth" => cfg.quad_depth = parse_usize(value)?,
                "rel_tol" => cfg.rel_tol = parse_f64(value)?,
                "ref_levels" => cfg.ref_levels = parse_usize(value)?,
                "ref_levels_alt" => cfg.ref_levels_alt = parse_usize(value)?,
                "z_samples" => cfg.z_samples = parse_usize(value)?,
                "z_boundary_samples" => cfg.z_boundary_samples = parse_usize(value)?,
                "x_samples" => cfg.x_samples = parse_usize(value)?,
                "samples" => cfg.samples = parse_usize(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| config_err(line_no, format!("invalid seed {value:?}")))?;
                }
                "deterministic" => {
                    cfg.deterministic = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(config_err(
                                line_no,
                                format!("deterministic must be true or false, got {other:?}"),
                            ))
                        }
                    };
                }
                unknown => {
                    return Err(config_err(line_no, format!("unknown key {unknown:?}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |message: String| HarnessError::Config {
            line: None,
            message,
        };
        if !(self.degree == 1 || self.degree == 2) {
            return Err(err(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if self.levels.is_empty() {
            return Err(err("levels must be non-empty".into()));
        }
        if !self.levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(err(format!("levels must be increasing: {:?}", self.levels)));
        }
        Weight::parse(&self.weight)?;
        parse_function_id(&self.function)
            .map_err(|m| err(format!("invalid function id {:?}: {m}", self.function)))?;
        DomainDef::parse(&self.domain)?;
        if !(1..=20).contains(&self.quad_exactness) {
            return Err(err(format!(
                "quad_exactness must be in 1..=20, got {}",
                self.quad_exactness
            )));
        }
        if !(2..=12).contains(&self.quad_depth) {
            return Err(err(format!(
                "quad_depth must be in 2..=12, got {}",
                self.quad_depth
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(err(format!("rel_tol must be in (0,1), got {}", self.rel_tol)));
        }
        if !(2..=4).contains(&self.ref_levels) {
            return Err(err(format!(
                "ref_levels must be in 2..=4, got {}",
                self.ref_levels
            )));
        }
        if self.ref_levels_alt != 0 && !(2..=4).contains(&self.ref_levels_alt) {
            return Err(err(format!(
                "ref_levels_alt must be 0 or in 2..=4, got {}",
                self.ref_levels_alt
            )));
        }
        if !(self.mollifier_k > 0.0 && self.mollifier_gamma > 0.0) {
            return Err(err("mollifier parameters must be positive".into()));
        }
        for pair in &self.mollifier_sweep {
            if !(pair[0] > 0.0 && pair[1] > 0.0) {
                return Err(err(format!("mollifier_sweep entry {pair:?} must be positive")));
            }
        }
        Ok(())
    }

    /// The (K, γ) pairs the gh study runs: the sweep, or the single
    /// configured pair when no sweep is given.
    pub fn sweep_pairs(&self) -> Vec<[f64; 2]> {
        if self.mollifier_sweep.is_empty() {
            vec![[self.mollifier_k, self.mollifier_gamma]]
        } else {
            self.mollifier_sweep.clone()
        }
    }
}
