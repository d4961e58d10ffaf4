//! Scenario files: a JSON description of one experiment (sources, array,
//! observation pattern, program mode) plus the manifest stamped next to
//! every batch of outputs so results stay traceable to their inputs.

use serde::{Deserialize, Serialize};

use crate::doa::SourceModel;
use crate::error::{Error, Result};
use crate::geometry::{cantor_array, IndexSet};
use crate::linalg::CVec;
use crate::solver::{Mode, ProblemSpec, SolverConfig};

/// Array geometry: a named construction or explicit element positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArraySpec {
    Cantor { order: u32 },
    Explicit {
        indices: Vec<usize>,
        /// Number of lags; defaults to one past the largest element.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ambient: Option<usize>,
    },
}

impl ArraySpec {
    pub fn build(&self) -> Result<IndexSet> {
        match self {
            ArraySpec::Cantor { order } => cantor_array(*order),
            ArraySpec::Explicit { indices, ambient } => {
                let max = indices.iter().copied().max().ok_or_else(|| {
                    Error::Schema("explicit array has no elements".into())
                })?;
                IndexSet::new(indices.clone(), ambient.unwrap_or(max + 1))
            }
        }
    }
}

/// A lag or row set, by name or as explicit indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Named(String),
    Indices(Vec<usize>),
}

impl SetSpec {
    fn resolve(&self, array: &IndexSet, names: &[(&str, fn(&IndexSet) -> IndexSet)]) -> Result<IndexSet> {
        match self {
            SetSpec::Named(name) => names
                .iter()
                .find(|(n, _)| *n == name.as_str())
                .map(|(_, f)| f(array))
                .ok_or_else(|| {
                    let known: Vec<&str> = names.iter().map(|(n, _)| *n).collect();
                    Error::Schema(format!("unknown set name {name:?}; expected one of {known:?}"))
                }),
            SetSpec::Indices(idx) => IndexSet::new(idx.clone(), array.ambient()),
        }
    }
}

fn default_omega() -> SetSpec {
    SetSpec::Named("coarray".into())
}

fn default_compression() -> SetSpec {
    SetSpec::Named("array".into())
}

/// One experiment description. Frequencies and powers fix the truth, the
/// array fixes the geometry, and the remaining fields select what is
/// observed and how the program is run. Omitted fields take the documented
/// defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub taus: Vec<f64>,
    #[serde(alias = "amplitudes")]
    pub powers: Vec<f64>,
    pub array: ArraySpec,
    /// Observed lags: "coarray" (default), "full", or explicit indices.
    #[serde(default = "default_omega")]
    pub omega: SetSpec,
    /// Semidefinite block rows: "array" (default), "identity", or indices.
    #[serde(default = "default_compression")]
    pub compression: SetSpec,
    /// "exact" (default) or "denoise"; "denoise" requires `lambda`.
    #[serde(default)]
    pub mode: ScenarioMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Snapshot count for the statistics pipeline.
    #[serde(default, alias = "L", skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_threshold: Option<f64>,
    /// Treat the source count as known and keep exactly this many peaks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_sources: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    #[default]
    Exact,
    Denoise,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?.validate()?;
        let array = self.array.build()?;
        self.resolve_omega(&array)?;
        self.resolve_compression(&array)?;
        if self.mode == ScenarioMode::Denoise && self.lambda.is_none() {
            return Err(Error::Schema("denoise mode requires lambda".into()));
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn model(&self) -> Result<SourceModel> {
        let array = self.array.build()?;
        Ok(SourceModel {
            taus: self.taus.clone(),
            powers: self.powers.clone(),
            aperture: array.ambient(),
        })
    }

    pub fn resolve_omega(&self, array: &IndexSet) -> Result<IndexSet> {
        self.omega.resolve(
            array,
            &[
                ("coarray", |a: &IndexSet| a.difference_set()),
                ("full", |a: &IndexSet| IndexSet::full(a.ambient())),
            ],
        )
    }

    pub fn resolve_compression(&self, array: &IndexSet) -> Result<IndexSet> {
        self.compression.resolve(
            array,
            &[
                ("array", |a: &IndexSet| a.clone()),
                ("identity", |a: &IndexSet| IndexSet::full(a.ambient())),
            ],
        )
    }

    /// Assemble the noiseless program instance: observe the true moments on
    /// the resolved lag set.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let array = self.array.build()?;
        let model = self.model()?;
        let omega = self.resolve_omega(&array)?;
        let compression = self.resolve_compression(&array)?;
        let x = model.x_star()?;
        let observed: CVec = omega.selection().select(&x)?;
        let mode = match self.mode {
            ScenarioMode::Exact => Mode::Exact,
            ScenarioMode::Denoise => Mode::Denoise {
                lambda: self
                    .lambda
                    .ok_or_else(|| Error::Schema("denoise mode requires lambda".into()))?,
            },
        };
        Ok(ProblemSpec { ambient: array.ambient(), omega, observed, compression, mode })
    }
}

/// Written alongside every command's outputs: what ran, with which resolved
/// configuration, and which files it produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    /// Resolved configuration snapshot.
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub timestamp_unix: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&str>, config: serde_json::Value, seed: u64) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config_path: config_path.map(str::to_string),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &std::path::Path) {
        self.outputs.push(path.display().to_string());
    }
}
