//! `generate`: experiment design plus simulator outputs, or an imported CSV.

use serde::{Deserialize, Serialize};
use uqsurro_core::data::{self, Dataset, InputDistribution, InputSchema};
use uqsurro_core::{artifact::SCHEMA_VERSION, rng};

use crate::config::{ProblemConfig, RunConfig};
use crate::error::{HarnessError, Result};
use crate::layout::{self, RunLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataManifest {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    pub seed: u64,
    /// Version tag of the synthetic simulator; absent for imported data.
    pub oracle_version: Option<String>,
    pub n: usize,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    /// Input columns sampled log-uniformly; models see their `log10`.
    pub log10_inputs: Vec<usize>,
    /// Abscissa of curve-valued outputs.
    pub times: Option<Vec<f64>>,
}

impl DataManifest {
    /// The dataset a config would produce must be the one on disk.
    pub fn check_compatible(&self, cfg: &RunConfig) -> Result<()> {
        let same = match (&self.problem, &cfg.problem) {
            (
                ProblemConfig::Csv {
                    inputs: a,
                    outputs: b,
                    curve: c,
                    ..
                },
                ProblemConfig::Csv {
                    inputs: x,
                    outputs: y,
                    curve: z,
                    ..
                },
            ) => a == x && b == y && c == z,
            (a, b) => a == b,
        };
        if !same {
            return Err(HarnessError::Data(format!(
                "compatibility: the dataset was generated for problem {:?}, the config describes {:?}",
                self.problem, cfg.problem
            )));
        }
        Ok(())
    }
}

fn log10_columns(schema: &InputSchema) -> Vec<usize> {
    schema
        .parameters
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distribution == InputDistribution::LogUniform)
        .map(|(i, _)| i)
        .collect()
}

fn core_err(context: &str) -> impl Fn(uqsurro_core::Error) -> HarnessError + '_ {
    move |e| HarnessError::core(context, e)
}

/// Build the dataset a config describes, with its manifest.
pub fn build_dataset(cfg: &RunConfig) -> Result<(Dataset, DataManifest)> {
    let mut design_rng = rng::substream(cfg.seed, "design");
    let (dataset, oracle, log10_inputs, times) = match &cfg.problem {
        ProblemConfig::SynthFgr {
            samples,
            lhs_iterations,
        } => {
            let schema = data::fgr_schema();
            let design =
                data::maximin_lhs(*samples, &schema, *lhs_iterations, &mut design_rng).map_err(core_err("design"))?;
            let times = data::fgr_time_grid();
            let curves = data::synth_fgr(&design, &times).map_err(core_err("simulator"))?;
            let ds = Dataset::new(schema.names(), data::fgr_output_names(&times), design, curves)
                .and_then(|d| d.with_input_bounds(schema.bounds()))
                .map_err(core_err("dataset"))?;
            (ds, Some(data::FGR_ORACLE_VERSION), log10_columns(&schema), Some(times))
        }
        ProblemConfig::SynthVoid {
            cases,
            samples_per_case,
            lhs_iterations,
        } => {
            let schema = data::void_schema();
            let design = data::void_design(*cases, *samples_per_case, *lhs_iterations, &mut design_rng)
                .map_err(core_err("design"))?;
            let outputs = data::synth_voidfraction(&design).map_err(core_err("simulator"))?;
            let names = data::VOID_OUTPUTS.iter().map(|s| s.to_string()).collect();
            let ds = Dataset::new(schema.names(), names, design, outputs)
                .and_then(|d| d.with_input_bounds(schema.bounds()))
                .map_err(core_err("dataset"))?;
            (ds, Some(data::VOID_ORACLE_VERSION), log10_columns(&schema), None)
        }
        ProblemConfig::SynthGap { samples, noise_std } => {
            let ds = data::gap_problem(*samples, *noise_std, &mut design_rng).map_err(core_err("gap problem"))?;
            (ds, Some(data::GAP_ORACLE_VERSION), Vec::new(), None)
        }
        ProblemConfig::Csv {
            path,
            inputs,
            outputs,
            curve,
        } => {
            let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            let ds = data::load_dataset(path, &ins, &outs)
                .map_err(|e| HarnessError::Data(format!("loading {}: {e}", path.display())))?;
            let times = curve.then(|| (0..outputs.len()).map(|i| i as f64).collect());
            (ds, None, Vec::new(), times)
        }
    };
    let manifest = DataManifest {
        schema_version: SCHEMA_VERSION,
        problem: cfg.problem.clone(),
        seed: cfg.seed,
        oracle_version: oracle.map(str::to_owned),
        n: dataset.n(),
        input_names: dataset.input_names().to_vec(),
        output_names: dataset.output_names().to_vec(),
        log10_inputs,
        times,
    };
    Ok((dataset, manifest))
}

pub fn cmd_generate(cfg: &RunConfig, force: bool) -> Result<DataManifest> {
    let layout = RunLayout::new(cfg.output_dir()?);
    let (dataset, manifest) = build_dataset(cfg)?;
    layout::prepare_output(&layout.data_dir(), force)?;
    data::write_dataset_csv(&layout.dataset(), &dataset).map_err(core_err("writing dataset"))?;
    layout::save_json(&layout.data_manifest(), &manifest)?;
    log::info!(
        "generated {} rows ({} inputs, {} outputs) in {}",
        manifest.n,
        manifest.input_names.len(),
        manifest.output_names.len(),
        layout.data_dir().display()
    );
    Ok(manifest)
}

/// Load the generated dataset and check it against the config.
pub fn load_generated(cfg: &RunConfig, layout: &RunLayout) -> Result<(Dataset, DataManifest)> {
    layout::require_files("this stage", &[layout.dataset(), layout.data_manifest()])?;
    let manifest: DataManifest = layout::load_json(&layout.data_manifest())?;
    manifest.check_compatible(cfg)?;
    let ins: Vec<&str> = manifest.input_names.iter().map(String::as_str).collect();
    let outs: Vec<&str> = manifest.output_names.iter().map(String::as_str).collect();
    let ds = data::load_dataset(&layout.dataset(), &ins, &outs)
        .map_err(|e| HarnessError::Data(format!("loading {}: {e}", layout.dataset().display())))?;
    if ds.n() != manifest.n {
        return Err(HarnessError::Data(format!(
            "{} has {} rows, manifest says {}",
            layout.dataset().display(),
            ds.n(),
            manifest.n
        )));
    }
    Ok((ds, manifest))
}
