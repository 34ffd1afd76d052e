//! Experiment cells and the line-oriented matrix format.
//!
//! A matrix file holds one line per block of cells: whitespace-separated
//! `key=value` tokens where list-valued keys expand into their cartesian
//! product.
//!
//! ```text
//! # sinograms made by DD, reconstructed with every backprojector and filter
//! dataset=sl-full algo=fbp fwd=dd adj=all filter=all
//! dataset=sl-under algo=mlem fwd=pd adj=pd,kb,rd iters=100
//! ```
//!
//! Keys: `dataset`, `algo` (`forward`, `fbp`, `admm`, `pwls`, `mlem`,
//! `sirt`), `fwd`, `adj` (`all`, `matched` or a list), `filter`, `views`,
//! `sigma` (`none` for noiseless), `seed`, `source`, plus solver keys
//! (`iters`, `lambda`, `rho`, `beta`, `delta`, `cg_iters`, `constraints`,
//! `epsilon`). For `fbp`, `fwd` names the projector that generates the data;
//! without it the data are analytic.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{DataSource, DatasetPreset, PresetName};
use crate::fbp::FilterKind;
use crate::io::parse_key_values;
use crate::solvers::{Algorithm, SolverConfig};
use crate::{Error, ProjectorKind, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Forward-project the phantom rasterization and score the sinogram.
    Forward,
    Fbp(FilterKind),
    Iterative(SolverConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetPreset,
    /// Forward model; for FBP, the projector that generated the data (if any).
    pub forward: Option<ProjectorKind>,
    pub adjoint: ProjectorKind,
    pub method: Method,
}

impl ExperimentSpec {
    pub fn algo_token(&self) -> &'static str {
        match &self.method {
            Method::Forward => "forward",
            Method::Fbp(_) => "fbp",
            Method::Iterative(cfg) => cfg.algorithm.token(),
        }
    }

    pub fn filter_token(&self) -> &'static str {
        match &self.method {
            Method::Fbp(f) => f.token(),
            _ => "-",
        }
    }

    pub fn forward_token(&self) -> String {
        match self.forward {
            Some(k) => k.token().to_string(),
            None => self.dataset.source.to_string(),
        }
    }

    /// Complete description; two cells with equal text compute the same thing.
    pub fn canonical(&self) -> String {
        let mut s = format!(
            "{} fwd={} adj={} algo={} filter={}",
            self.dataset.label(),
            self.forward_token(),
            self.adjoint,
            self.algo_token(),
            self.filter_token()
        );
        if let Method::Iterative(cfg) = &self.method {
            for line in cfg.to_key_values().lines() {
                s.push(' ');
                s.push_str(line);
            }
        }
        s
    }

    /// Short content hash naming the cell's output files.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn check(&self) -> Result<()> {
        match &self.method {
            Method::Forward if self.forward != Some(self.adjoint) => {
                Err(Error::InvalidParameter("forward cells take no separate adjoint".into()))
            }
            Method::Iterative(cfg) if self.forward.is_none() => {
                Err(Error::InvalidParameter(format!("{} needs a forward projector", cfg.algorithm)))
            }
            Method::Iterative(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }
}

/// Default solver settings for a preset, from the configuration files
/// shipped with the crate.
pub fn shipped_config(preset: PresetName, algorithm: Algorithm) -> Result<SolverConfig> {
    let family = match preset {
        PresetName::SlFull => "sl-full",
        PresetName::SlUnder | PresetName::Fig4a => "sl-under",
        PresetName::SlNoise | PresetName::Fig4b => "sl-noise",
        PresetName::SlUconstr | PresetName::Fig4c => "sl-uconstr",
    };
    let text = match (family, algorithm) {
        ("sl-full", Algorithm::Admm) => include_str!("../../configs/sl-full.admm.conf"),
        ("sl-full", Algorithm::Pwls) => include_str!("../../configs/sl-full.pwls.conf"),
        ("sl-under", Algorithm::Admm) => include_str!("../../configs/sl-under.admm.conf"),
        ("sl-under", Algorithm::Pwls) => include_str!("../../configs/sl-under.pwls.conf"),
        ("sl-noise", Algorithm::Admm) => include_str!("../../configs/sl-noise.admm.conf"),
        ("sl-noise", Algorithm::Pwls) => include_str!("../../configs/sl-noise.pwls.conf"),
        ("sl-uconstr", Algorithm::Admm) => include_str!("../../configs/sl-uconstr.admm.conf"),
        ("sl-uconstr", Algorithm::Pwls) => include_str!("../../configs/sl-uconstr.pwls.conf"),
        _ => "",
    };
    let mut cfg = SolverConfig::new(algorithm);
    let mut pairs = parse_key_values(text)?;
    pairs.remove("algorithm");
    cfg.apply_overrides(&pairs)?;
    Ok(cfg)
}

const SOLVER_KEYS: [&str; 9] =
    ["iters", "iterations", "lambda", "rho", "beta", "delta", "cg_iters", "constraints", "epsilon"];

fn list<T>(value: &str, all: &[T], parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>>
where
    T: Copy,
{
    if value.eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    value.split(',').filter(|v| !v.trim().is_empty()).map(|v| parse(v.trim())).collect()
}

fn parse_line(line: &str, lineno: usize) -> Result<Vec<ExperimentSpec>> {
    let at = |msg: String| Error::Parse(format!("line {lineno}: {msg}"));
    let mut keys: BTreeMap<&str, &str> = BTreeMap::new();
    for tok in line.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| at(format!("expected key=value, got `{tok}`")))?;
        if keys.insert(k, v).is_some() {
            return Err(at(format!("key `{k}` given twice")));
        }
    }
    let take = |k: &str| keys.get(k).copied();

    let datasets = list(take("dataset").ok_or_else(|| at("missing `dataset`".into()))?, &PresetName::ALL, str::parse)?;
    let algos: Vec<&str> = take("algo").ok_or_else(|| at("missing `algo`".into()))?.split(',').collect();
    let filters = list(take("filter").unwrap_or("ramp"), &FilterKind::ALL, str::parse)?;
    let fwds: Vec<Option<ProjectorKind>> = match take("fwd") {
        Some(v) => list(v, &ProjectorKind::ALL, str::parse)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let adj_spec = take("adj");

    let mut overrides = BTreeMap::new();
    for k in SOLVER_KEYS {
        if let Some(v) = take(k) {
            let key = if k == "iters" { "iterations" } else { k };
            overrides.insert(key.to_string(), v.to_string());
        }
    }
    for k in keys.keys() {
        let known = ["dataset", "algo", "filter", "fwd", "adj", "views", "sigma", "seed", "source"];
        if !known.contains(k) && !SOLVER_KEYS.contains(k) {
            return Err(at(format!("unknown key `{k}`")));
        }
    }

    let mut out = Vec::new();
    for name in datasets {
        let mut preset = DatasetPreset::named(name);
        if let Some(v) = take("views") {
            preset.views = v.parse().map_err(|_| at(format!("views: `{v}`")))?;
        }
        if let Some(v) = take("sigma") {
            preset.sigma_fraction =
                if v == "none" { None } else { Some(v.parse().map_err(|_| at(format!("sigma: `{v}`")))?) };
        }
        if let Some(v) = take("seed") {
            preset.seed = v.parse().map_err(|_| at(format!("seed: `{v}`")))?;
        }
        if let Some(v) = take("source") {
            preset.source = v.parse()?;
        }
        for algo in &algos {
            let method_filters: Vec<Option<FilterKind>> = match *algo {
                "fbp" => filters.iter().copied().map(Some).collect(),
                _ => vec![None],
            };
            for filter in method_filters {
                for &fwd in &fwds {
                    let adjs = match adj_spec {
                        None | Some("matched") => match (fwd, *algo) {
                            (Some(k), _) => vec![k],
                            (None, _) => return Err(at("`adj` is required without `fwd`".into())),
                        },
                        Some(v) => list(v, &ProjectorKind::ALL, str::parse)?,
                    };
                    for adj in adjs {
                        let mut dataset = preset.clone();
                        let method = match *algo {
                            "forward" => Method::Forward,
                            "fbp" => {
                                if let Some(k) = fwd {
                                    dataset.source = DataSource::Projector(k);
                                }
                                Method::Fbp(filter.expect("fbp cells carry a filter"))
                            }
                            other => {
                                let a: Algorithm = other.parse().map_err(|e| at(format!("{e}")))?;
                                let mut cfg = shipped_config(name, a)?;
                                cfg.apply_overrides(&overrides).map_err(|e| at(format!("{e}")))?;
                                Method::Iterative(cfg)
                            }
                        };
                        let spec = ExperimentSpec { dataset, forward: fwd, adjoint: adj, method };
                        spec.check().map_err(|e| at(format!("{e}")))?;
                        out.push(spec);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Parses a whole matrix file; blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<Vec<ExperimentSpec>> {
    let mut specs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            specs.extend(parse_line(line, i + 1)?);
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbp_block_expands() {
        let specs = parse_matrix("dataset=sl-full algo=fbp fwd=dd adj=all filter=all\n").unwrap();
        assert_eq!(specs.len(), 24);
        assert!(specs.iter().all(|s| s.dataset.source == DataSource::Projector(ProjectorKind::Dd)));
        let ids: std::collections::BTreeSet<_> = specs.iter().map(|s| s.id()).collect();
        assert_eq!(ids.len(), 24);
    }

    #[test]
    fn solver_overrides_and_defaults() {
        let specs = parse_matrix("# comment\n\ndataset=sl-under algo=mlem fwd=pd adj=pd,kb iters=7\n").unwrap();
        assert_eq!(specs.len(), 2);
        match &specs[1].method {
            Method::Iterative(cfg) => {
                assert_eq!(cfg.algorithm, Algorithm::Mlem);
                assert_eq!(cfg.iterations, 7);
            }
            m => panic!("{m:?}"),
        }
        assert_eq!(specs[1].adjoint, ProjectorKind::Kb);
        let forward = parse_matrix("dataset=sl-full algo=forward fwd=all").unwrap();
        assert_eq!(forward.len(), 6);
        assert!(forward.iter().all(|s| s.forward == Some(s.adjoint)));
    }

    #[test]
    fn bad_lines_are_reported() {
        assert!(parse_matrix("dataset=sl-full algo=admm adj=pd").is_err());
        assert!(parse_matrix("dataset=sl-full algo=admm fwd=pd colour=red").is_err());
        assert!(parse_matrix("dataset=sl-full algo=forward fwd=pd adj=rd").is_err());
        assert!(parse_matrix("dataset=sl-full algo=sirt fwd=pd iters=0").is_err());
        let err = parse_matrix("\ndataset=nope algo=fbp adj=pd").unwrap_err().to_string();
        assert!(err.contains("nope"), "{err}");
        assert!(parse_matrix("").unwrap().is_empty());
    }

    #[test]
    fn shipped_configs_parse() {
        for name in PresetName::ALL {
            for algo in Algorithm::ALL {
                let cfg = shipped_config(name, algo).unwrap();
                assert_eq!(cfg.algorithm, algo);
            }
        }
    }
}
