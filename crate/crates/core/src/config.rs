//! Run configuration documents and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::solver::SolverConfig;
use crate::spoq::SpoqParams;
use crate::tuning::GridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub n_seeds: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self { n_seeds: 20 }
    }
}

/// One document describing the data, the model and the solver settings.
///
/// The observation comes either from `dataset` (synthesized with the noise
/// seed given on the command line) or from a dataset document at
/// `dataset_path`, resolved relative to the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    /// Length of the estimated kernel for documents without a kernel or
    /// spec.
    #[serde(default)]
    pub kernel_len: Option<usize>,
    pub filter: FilterSpec,
    pub spoq: SpoqParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grid: GridSpec,
    /// Select the cutoff among spectral peaks before the grid search.
    #[serde(default)]
    pub tune_cutoff: bool,
    #[serde(default)]
    pub battery: BatteryConfig,
    /// Parameters from a previous grid search, overriding `filter` and
    /// `spoq` when present.
    #[serde(default)]
    pub params_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.dataset {
            d.validate()?;
            self.filter.validate(d.n_samples)?;
        }
        if self.dataset.is_none() && self.dataset_path.is_none() {
            return Err(Error::invalid("configuration needs `dataset` or `dataset_path`"));
        }
        self.spoq.validate()?;
        self.solver.validate()?;
        self.grid.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Reads a file, or a bundled preset when `source` is `preset:<name>`.
    /// Relative paths inside a file are resolved against its directory.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(name) = source.strip_prefix("preset:") {
            return preset(name);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, source)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset_path, &mut cfg.params_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Bundled presets: datasets A and B at two noise levels with both penalty
/// shapes, plus a noiseless non-blind sanity run.
pub const PRESETS: &[(&str, &str)] = &[
    ("a-0.5-soot", include_str!("../presets/a-0.5-soot.json")),
    ("a-0.5-p075", include_str!("../presets/a-0.5-p075.json")),
    ("a-1-soot", include_str!("../presets/a-1-soot.json")),
    ("a-1-p075", include_str!("../presets/a-1-p075.json")),
    ("b-0.5-soot", include_str!("../presets/b-0.5-soot.json")),
    ("b-0.5-p075", include_str!("../presets/b-0.5-p075.json")),
    ("b-1-soot", include_str!("../presets/b-1-soot.json")),
    ("b-1-p075", include_str!("../presets/b-1-p075.json")),
    ("a-noiseless-nonblind", include_str!("../presets/a-noiseless-nonblind.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid(format!("unknown preset `{name}`; known: {}", preset_names().join(", "))))?;
    RunConfig::from_json(text, &format!("preset:{name}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.name.as_deref(), Some(name));
            assert_eq!(cfg.dataset.as_ref().unwrap().n_samples, 200);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"dataset_path": "d.json", "filter": {"cutoff_bin": 3}, "spoq": {"p": 1, "q": 2, "alpha": 7e-7, "beta": 5e-3, "eta": 0.1, "lambda": 1}, "bogus": 1}"#;
        assert!(matches!(RunConfig::from_json(text, "x"), Err(Error::Format { .. })));
        let ok = text.replace(r#", "bogus": 1"#, "");
        let cfg = RunConfig::from_json(&ok, "x").unwrap();
        assert_eq!(cfg.filter.transition_bins, 2);
        assert_eq!(cfg.solver, SolverConfig::default());
    }
}
