//! Run configuration: parsing, defaults and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uqsurro_core::bnn::PriorSpec;
use uqsurro_core::data::VOID_OUTPUTS;
use uqsurro_core::mcd::DEFAULT_UQ_SAMPLES;
use uqsurro_core::net::{Activation, DropoutScaling, LayerSpec, TrainConfig};
use uqsurro_core::pca::DEFAULT_PROPAGATION_SAMPLES;
use uqsurro_core::Method;

use crate::error::{HarnessError, Result};

const DEFAULT_LHS_ITERATIONS: usize = 1000;

fn default_fgr_samples() -> usize {
    200
}
fn default_lhs_iterations() -> usize {
    DEFAULT_LHS_ITERATIONS
}
fn default_void_cases() -> usize {
    86
}
fn default_void_per_case() -> usize {
    30
}
fn default_gap_samples() -> usize {
    200
}
fn default_gap_noise() -> f64 {
    0.05
}
fn default_threshold() -> f64 {
    0.99
}
fn default_curve_samples() -> usize {
    DEFAULT_PROPAGATION_SAMPLES
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Fission-gas-release curves: five inputs, 100 time points.
    SynthFgr {
        #[serde(default = "default_fgr_samples")]
        samples: usize,
        #[serde(default = "default_lhs_iterations")]
        lhs_iterations: usize,
    },
    /// Four void fractions over a case × multiplier design.
    SynthVoid {
        #[serde(default = "default_void_cases")]
        cases: usize,
        #[serde(default = "default_void_per_case")]
        samples_per_case: usize,
        #[serde(default = "default_lhs_iterations")]
        lhs_iterations: usize,
    },
    /// One-dimensional regression with a held-out gap.
    SynthGap {
        #[serde(default = "default_gap_samples")]
        samples: usize,
        #[serde(default = "default_gap_noise")]
        noise_std: f64,
    },
    /// User data. A relative `path` is resolved against the config file's directory.
    Csv {
        path: PathBuf,
        inputs: Vec<String>,
        outputs: Vec<String>,
        /// Outputs are points of one curve (enables PCA).
        #[serde(default)]
        curve: bool,
    },
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::SynthFgr { .. } => "synth_fgr",
            ProblemConfig::SynthVoid { .. } => "synth_void",
            ProblemConfig::SynthGap { .. } => "synth_gap",
            ProblemConfig::Csv { .. } => "csv",
        }
    }

    pub fn is_curve(&self) -> bool {
        match self {
            ProblemConfig::SynthFgr { .. } => true,
            ProblemConfig::Csv { curve, .. } => *curve,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// Widths of every layer after the input, output layer included.
    pub neurons: Vec<usize>,
    /// Hidden-layer activation; the output layer is linear.
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Score vectors drawn per test case for curve bands.
    #[serde(default = "default_curve_samples")]
    pub curve_samples: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            threshold: default_threshold(),
            curve_samples: default_curve_samples(),
        }
    }
}

/// Per-response replacements for the shared settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub method: Method,
    pub architecture: ArchitectureConfig,
    pub train: TrainConfig,
    /// Training dropout ratio `p_D` (mcd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_scaling: Option<DropoutScaling>,
    /// Prediction-time dropout ratio when it should differ from `dropout` (mcd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict_dropout: Option<f64>,
    /// Stochastic passes `T` at prediction time (mcd, bnn).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uq_samples: Option<usize>,
    /// Ensemble size `M` (de).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
    /// Weight prior (bnn).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub pca: PcaConfig,
    /// Restrict training and UQ to these responses; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub response_overrides: BTreeMap<String, ResponseOverride>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    /// Parse JSON text. Errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                HarnessError::Config(inner.to_string())
            } else {
                config_err(&path, inner)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, parse and validate a config file; a relative CSV path is anchored at the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let ProblemConfig::Csv { path: csv, .. } = &mut cfg.problem {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_problem()?;
        self.validate_architecture()?;
        self.train.validate().map_err(|e| config_err("train", e))?;
        if self.train.seed != 0 {
            return Err(config_err(
                "train.seed",
                "model seeds derive from the top-level `seed`; remove this key",
            ));
        }
        self.validate_method_fields()?;
        if !(self.pca.threshold > 0.0 && self.pca.threshold <= 1.0) {
            return Err(config_err(
                "pca.threshold",
                format!("must lie in (0, 1], got {}", self.pca.threshold),
            ));
        }
        if self.pca.curve_samples < 2 {
            return Err(config_err("pca.curve_samples", "must be ≥ 2"));
        }
        if self.pca.enabled && !self.problem.is_curve() {
            return Err(config_err(
                "pca.enabled",
                format!(
                    "problem `{}` does not produce curve-valued outputs",
                    self.problem.kind()
                ),
            ));
        }
        if let Some(r) = &self.responses {
            if r.is_empty() {
                return Err(config_err("responses", "list is empty"));
            }
            let mut seen = std::collections::BTreeSet::new();
            for name in r {
                if !seen.insert(name) {
                    return Err(config_err("responses", format!("`{name}` listed twice")));
                }
            }
        }
        for (name, o) in &self.response_overrides {
            let key = format!("response_overrides.{name}");
            if let Some(lr) = o.learning_rate {
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(config_err(
                        &format!("{key}.learning_rate"),
                        format!("must be finite and ≥ 0, got {lr}"),
                    ));
                }
            }
            if o.epochs == Some(0) {
                return Err(config_err(&format!("{key}.epochs"), "must be ≥ 1"));
            }
            if o.batch_size == Some(0) {
                return Err(config_err(&format!("{key}.batch_size"), "must be ≥ 1"));
            }
        }
        if let Some(dir) = &self.output_dir {
            if dir.as_os_str().is_empty() {
                return Err(config_err("output_dir", "empty path"));
            }
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<()> {
        match &self.problem {
            ProblemConfig::SynthFgr {
                samples,
                lhs_iterations,
            } => {
                if *samples == 0 {
                    return Err(config_err("problem.samples", "must be ≥ 1"));
                }
                if *lhs_iterations == 0 {
                    return Err(config_err("problem.lhs_iterations", "must be ≥ 1"));
                }
            }
            ProblemConfig::SynthVoid {
                cases,
                samples_per_case,
                lhs_iterations,
            } => {
                if *cases == 0 {
                    return Err(config_err("problem.cases", "must be ≥ 1"));
                }
                if *samples_per_case == 0 {
                    return Err(config_err("problem.samples_per_case", "must be ≥ 1"));
                }
                if *lhs_iterations == 0 {
                    return Err(config_err("problem.lhs_iterations", "must be ≥ 1"));
                }
            }
            ProblemConfig::SynthGap { samples, noise_std } => {
                if *samples == 0 {
                    return Err(config_err("problem.samples", "must be ≥ 1"));
                }
                if !(*noise_std >= 0.0 && noise_std.is_finite()) {
                    return Err(config_err(
                        "problem.noise_std",
                        format!("must be finite and ≥ 0, got {noise_std}"),
                    ));
                }
            }
            ProblemConfig::Csv {
                path, inputs, outputs, ..
            } => {
                if path.as_os_str().is_empty() {
                    return Err(config_err("problem.path", "empty path"));
                }
                if inputs.is_empty() {
                    return Err(config_err("problem.inputs", "list is empty"));
                }
                if outputs.is_empty() {
                    return Err(config_err("problem.outputs", "list is empty"));
                }
                let mut seen = std::collections::BTreeSet::new();
                for (key, name) in inputs
                    .iter()
                    .map(|n| ("problem.inputs", n))
                    .chain(outputs.iter().map(|n| ("problem.outputs", n)))
                {
                    if !seen.insert(name) {
                        return Err(config_err(key, format!("column `{name}` appears twice")));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_architecture(&self) -> Result<()> {
        let n = &self.architecture.neurons;
        if n.is_empty() {
            return Err(config_err("architecture.neurons", "list is empty"));
        }
        if let Some(i) = n.iter().position(|&w| w == 0) {
            return Err(config_err("architecture.neurons", format!("layer {i} has zero width")));
        }
        let want = self.output_width();
        let last = *n.last().expect("non-empty");
        if last != want {
            return Err(config_err(
                "architecture.neurons",
                format!(
                    "method {} needs a final layer of width {want} per response, got {last}",
                    self.method
                ),
            ));
        }
        Ok(())
    }

    fn validate_method_fields(&self) -> Result<()> {
        let forbid = |present: bool, key: &str, owner: &str| {
            if present {
                Err(config_err(
                    key,
                    format!("only used by method {owner}, not {}", self.method),
                ))
            } else {
                Ok(())
            }
        };
        match self.method {
            Method::Mcd => {
                let p = self
                    .dropout
                    .ok_or_else(|| config_err("dropout", "required for method mcd"))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(config_err(
                        "dropout",
                        format!("must lie strictly inside (0, 1), got {p}"),
                    ));
                }
                if let Some(q) = self.predict_dropout {
                    if !(q > 0.0 && q < 1.0) {
                        return Err(config_err(
                            "predict_dropout",
                            format!("must lie strictly inside (0, 1), got {q}"),
                        ));
                    }
                }
                forbid(self.members.is_some(), "members", "de")?;
                forbid(self.prior.is_some(), "prior", "bnn")?;
            }
            Method::De => {
                let m = self
                    .members
                    .ok_or_else(|| config_err("members", "required for method de"))?;
                if m < 2 {
                    return Err(config_err(
                        "members",
                        format!("an ensemble needs at least 2 members, got {m}"),
                    ));
                }
                forbid(self.dropout.is_some(), "dropout", "mcd")?;
                forbid(self.dropout_scaling.is_some(), "dropout_scaling", "mcd")?;
                forbid(self.predict_dropout.is_some(), "predict_dropout", "mcd")?;
                forbid(self.prior.is_some(), "prior", "bnn")?;
            }
            Method::Bnn => {
                let prior = self
                    .prior
                    .ok_or_else(|| config_err("prior", "required for method bnn"))?;
                prior.validate().map_err(|e| config_err("prior", e))?;
                forbid(self.dropout.is_some(), "dropout", "mcd")?;
                forbid(self.dropout_scaling.is_some(), "dropout_scaling", "mcd")?;
                forbid(self.predict_dropout.is_some(), "predict_dropout", "mcd")?;
                forbid(self.members.is_some(), "members", "de")?;
            }
        }
        if let Some(t) = self.uq_samples {
            if t < 2 {
                return Err(config_err("uq_samples", format!("need at least 2 passes, got {t}")));
            }
        }
        Ok(())
    }

    /// Network outputs per response: a point value for mcd, mean and variance otherwise.
    pub fn output_width(&self) -> usize {
        match self.method {
            Method::Mcd => 1,
            Method::De | Method::Bnn => 2,
        }
    }

    pub fn uq_samples(&self) -> usize {
        self.uq_samples.unwrap_or(DEFAULT_UQ_SAMPLES)
    }

    /// Layer list for `response` with its overrides applied.
    pub fn layers_for(&self, response: &str) -> Vec<LayerSpec> {
        let act = self
            .response_overrides
            .get(response)
            .and_then(|o| o.activation)
            .unwrap_or(self.architecture.activation);
        LayerSpec::stack(&self.architecture.neurons, act)
    }

    /// Training settings for `response` with its overrides applied.
    pub fn train_for(&self, response: &str) -> TrainConfig {
        let mut cfg = self.train.clone();
        if let Some(o) = self.response_overrides.get(response) {
            if let Some(lr) = o.learning_rate {
                cfg.learning_rate = lr;
            }
            if let Some(e) = o.epochs {
                cfg.epochs = e;
            }
            if let Some(b) = o.batch_size {
                cfg.batch_size = b;
            }
        }
        cfg
    }

    /// Check `responses` and `response_overrides` against the responses the data offers,
    /// and return the ones to model, in data order.
    pub fn select_responses(&self, available: &[String]) -> Result<Vec<String>> {
        for name in self.response_overrides.keys() {
            if !available.contains(name) {
                return Err(config_err(
                    &format!("response_overrides.{name}"),
                    format!("no such response (available: {})", available.join(", ")),
                ));
            }
        }
        match &self.responses {
            None => Ok(available.to_vec()),
            Some(wanted) => {
                if let Some(bad) = wanted.iter().find(|w| !available.contains(w)) {
                    return Err(config_err(
                        "responses",
                        format!("no such response `{bad}` (available: {})", available.join(", ")),
                    ));
                }
                Ok(available.iter().filter(|a| wanted.contains(a)).cloned().collect())
            }
        }
    }

    /// The run directory: `--out` wins over `output_dir`.
    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| config_err("output_dir", "missing; set it in the config or pass --out"))
    }
}

/// Response names a synthetic problem yields without PCA, when they are known up front.
pub fn known_outputs(problem: &ProblemConfig) -> Option<Vec<String>> {
    match problem {
        ProblemConfig::SynthVoid { .. } => Some(VOID_OUTPUTS.iter().map(|s| s.to_string()).collect()),
        ProblemConfig::SynthGap { .. } => Some(vec!["y".into()]),
        ProblemConfig::Csv { outputs, .. } => Some(outputs.clone()),
        ProblemConfig::SynthFgr { .. } => None,
    }
}
