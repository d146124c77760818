//! Declarative run configuration: a list of catalog cases with optional
//! parameter overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{CaseId, CaseSpec, StartName};
use crate::error::HarnessError;

/// Overrides for one catalog case; unset fields keep the catalog default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseOverrides {
    pub id: String,
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<i32>>,
    pub reference_n: Option<usize>,
    pub dt: Option<f64>,
    pub dt_per_n: Option<f64>,
    pub final_time: Option<f64>,
    pub start: Option<StartName>,
    pub shifts: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed applied to cases that do not set their own.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub case: Vec<CaseOverrides>,
    /// Provenance written next to results; ignored when read back.
    #[serde(default, skip_serializing)]
    pub run: Option<toml::Table>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolve every entry against the catalog and validate it. A seed given
    /// here (from the command line) wins over seeds in the file.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Vec<CaseSpec>, HarnessError> {
        self.case
            .iter()
            .map(|o| {
                let mut spec = o.apply(self.seed)?;
                if let Some(seed) = seed_override {
                    spec.seed = seed;
                }
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }
}

impl CaseOverrides {
    pub fn for_case(id: CaseId) -> Self {
        Self {
            id: id.to_string(),
            ..Self::default()
        }
    }

    /// Catalog defaults with these overrides applied. A seed set on the entry
    /// wins over `fallback_seed`.
    pub fn apply(&self, fallback_seed: Option<u64>) -> Result<CaseSpec, HarnessError> {
        let id: CaseId = self.id.parse()?;
        let mut s = id.defaults();
        if let Some(v) = &self.n {
            s.n = v.clone();
        }
        if let Some(v) = &self.k {
            s.k = v.clone();
        }
        if self.reference_n.is_some() {
            s.reference_n = self.reference_n;
        }
        if self.dt.is_some() {
            s.dt = self.dt;
            s.dt_per_n = None;
        }
        if self.dt_per_n.is_some() {
            s.dt_per_n = self.dt_per_n;
            s.dt = None;
        }
        if self.final_time.is_some() {
            s.final_time = self.final_time;
        }
        if self.start.is_some() {
            s.start = self.start;
        }
        if let Some(v) = &self.shifts {
            s.shifts = v.clone();
        }
        if self.tolerance.is_some() {
            s.tolerance = self.tolerance;
        }
        if self.max_iters.is_some() {
            s.max_iters = self.max_iters;
        }
        if let Some(seed) = self.seed.or(fallback_seed) {
            s.seed = seed;
        }
        if self.output.is_some() {
            s.output = self.output.clone();
        }
        Ok(s)
    }
}
