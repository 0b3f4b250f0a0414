//! `train`: one model (or ensemble) per response.

use serde::{Deserialize, Serialize};
use uqsurro_core::bnn::{train_bnn, Bnn, PriorSpec, VariationalPosterior};
use uqsurro_core::data::{self, Affine, Dataset, Partition};
use uqsurro_core::ensemble::{train_ensemble, Ensemble};
use uqsurro_core::net::{self, Dropout, LayerSpec, Mlp, TrainConfig, TrainLog};
use uqsurro_core::objectives::Objective;
use uqsurro_core::{artifact::SCHEMA_VERSION, rng, Matrix, Method};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::generate::{load_generated, DataManifest};
use crate::layout::{self, fmt, RunLayout};
use crate::reduce::{load_pca, score_names};

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitArtifact {
    pub schema_version: u32,
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitArtifact {
    pub fn partition(&self, n: usize) -> Result<Vec<Partition>> {
        let mut p = vec![None; n];
        for (idx, part) in [
            (&self.train, Partition::Train),
            (&self.val, Partition::Val),
            (&self.test, Partition::Test),
        ] {
            for &i in idx {
                match p.get_mut(i) {
                    Some(slot @ None) => *slot = Some(part),
                    _ => {
                        return Err(HarnessError::Data(format!(
                            "split: row {i} is out of range or listed twice"
                        )))
                    }
                }
            }
        }
        p.into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| HarnessError::Data(format!("split: row {i} is in no partition"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsManifest {
    pub schema_version: u32,
    pub method: Method,
    pub seed: u64,
    pub responses: Vec<String>,
    pub pca: bool,
}

/// Input preprocessing and output scaling for one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalerArtifact {
    pub schema_version: u32,
    /// Columns passed through `log10` before standardization.
    pub log10_inputs: Vec<usize>,
    pub inputs: Affine,
    pub output: Affine,
}

impl ScalerArtifact {
    pub fn prepare(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for &j in &self.log10_inputs {
            v[j] = v[j].log10();
        }
        self.inputs.transform_row(&v)
    }

    /// Map a standardized mean and variance back to response units.
    pub fn unscale(&self, mean: f64, variance: f64) -> (f64, f64) {
        let s = self.output.scale[0];
        (self.output.inverse_value(0, mean), variance * s * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArtifact {
    pub schema_version: u32,
    #[serde(flatten)]
    pub net: Mlp,
    pub training_config: TrainConfig,
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<Dropout>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleManifest {
    pub schema_version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub seeds: Vec<u64>,
    pub arch: Arch,
    pub objective: Objective,
    pub training_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnArtifact {
    pub schema_version: u32,
    pub arch: Arch,
    pub prior: PriorSpec,
    pub mu: Vec<Matrix>,
    pub rho: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub training_config: TrainConfig,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Mcd { mlp: Mlp, dropout: Dropout },
    De(Ensemble),
    Bnn(Bnn),
}

#[derive(Debug, Clone)]
pub struct ResponseModel {
    pub response: String,
    pub scaler: ScalerArtifact,
    pub model: TrainedModel,
}

/// Targets the models learn: PC scores when PCA is on, else the selected outputs.
/// Returns `(all available names, values N × k)`.
pub fn targets(cfg: &RunConfig, layout: &RunLayout, data: &Dataset) -> Result<(Vec<String>, Matrix)> {
    if cfg.pca.enabled {
        let (_, scores) = load_pca(layout, data.n())?;
        Ok((score_names(scores.cols()), scores))
    } else {
        Ok((data.output_names().to_vec(), data.outputs().clone()))
    }
}

fn log_inputs(data: &Dataset, cols: &[usize]) -> Result<Matrix> {
    let mut x = data.inputs().clone();
    for i in 0..x.rows() {
        let row = x.row_mut(i);
        for &j in cols {
            if !(row[j] > 0.0) {
                return Err(HarnessError::Data(format!(
                    "input `{}` row {i}: log10 of non-positive value {}",
                    data.input_names()[j],
                    row[j]
                )));
            }
            row[j] = row[j].log10();
        }
    }
    Ok(x)
}

fn write_log(path: &std::path::Path, log: &TrainLog) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .train_loss
        .iter()
        .zip(&log.val_loss)
        .enumerate()
        .map(|(e, (t, v))| vec![e.to_string(), fmt(*t), fmt(*v)])
        .collect();
    layout::write_csv(path, &["epoch", "train_loss", "val_loss"], &rows)
}

fn dropout_of(cfg: &RunConfig) -> Result<Dropout> {
    let rate = cfg
        .dropout
        .ok_or_else(|| HarnessError::Config("dropout: required for method mcd".into()))?;
    Dropout::with_scaling(rate, cfg.dropout_scaling.unwrap_or_default()).map_err(|e| HarnessError::core("dropout", e))
}

pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<Vec<String>> {
    let layout = RunLayout::new(cfg.output_dir()?);
    let (data, manifest) = load_generated(cfg, &layout)?;
    let (available, values) = targets(cfg, &layout, &data)?;
    let responses = cfg.select_responses(&available)?;

    let split = data::split(&data, cfg.train.split, &mut rng::substream(cfg.seed, "split"))
        .map_err(|e| HarnessError::core("split", e))?;
    let split_art = SplitArtifact {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        train: split.indices(Partition::Train),
        val: split.indices(Partition::Val),
        test: split.indices(Partition::Test),
    };
    let x = log_inputs(&data, &manifest.log10_inputs)?;

    let dir = layout.models_dir(cfg.method);
    layout::prepare_output(&dir, force)?;
    layout::save_json(&layout.split(cfg.method), &split_art)?;

    for response in &responses {
        let k = available
            .iter()
            .position(|a| a == response)
            .expect("selected from available");
        let y = Matrix::from_vec(data.n(), 1, values.column(k)).expect("column length");
        let ds = Dataset::new(data.input_names().to_vec(), vec![response.clone()], x.clone(), y)
            .and_then(|d| d.with_partition(split.partition().to_vec()))
            .map_err(|e| HarnessError::core("dataset", e))?;
        let (scaled, scaler) = data::standardize(&ds, true).map_err(|e| HarnessError::core("standardize", e))?;
        let scaler = ScalerArtifact {
            schema_version: SCHEMA_VERSION,
            log10_inputs: manifest.log10_inputs.clone(),
            inputs: scaler.inputs,
            output: scaler.outputs.expect("outputs standardized"),
        };
        log::info!("training {} for response {response}", cfg.method);
        train_response(cfg, &layout, response, &scaled, &scaler)?;
    }

    let models = ModelsManifest {
        schema_version: SCHEMA_VERSION,
        method: cfg.method,
        seed: cfg.seed,
        responses: responses.clone(),
        pca: cfg.pca.enabled,
    };
    layout::save_json(&layout.models_manifest(cfg.method), &models)?;
    Ok(responses)
}

fn train_response(
    cfg: &RunConfig,
    layout: &RunLayout,
    response: &str,
    data: &Dataset,
    scaler: &ScalerArtifact,
) -> Result<()> {
    let dir = layout.response_dir(cfg.method, response);
    let layers = cfg.layers_for(response);
    let tc = cfg.train_for(response);
    let mut rng = rng::substream(cfg.seed, &format!("init:{response}"));
    let ctx = format!("method {}, response {response}", cfg.method);
    let wrap = |e| HarnessError::core(&ctx, e);
    match cfg.method {
        Method::Mcd => {
            let dropout = dropout_of(cfg)?;
            let mlp = Mlp::new(data.input_dim(), &layers, &mut rng).map_err(wrap)?;
            let (mlp, log) = net::train(mlp, data, &tc, Objective::Mse, Some(dropout), &mut rng).map_err(wrap)?;
            layout::save_json(
                &dir.join("model.json"),
                &MlpArtifact {
                    schema_version: SCHEMA_VERSION,
                    net: mlp,
                    training_config: tc,
                    objective: Objective::Mse,
                    dropout: Some(dropout),
                },
            )?;
            write_log(&dir.join("log.csv"), &log)?;
        }
        Method::De => {
            let m = cfg
                .members
                .ok_or_else(|| HarnessError::Config("members: required for method de".into()))?;
            let ens = train_ensemble(data, &layers, &tc, m, &mut rng).map_err(wrap)?;
            for (i, (member, log)) in ens.members().iter().zip(ens.logs()).enumerate() {
                layout::save_json(
                    &dir.join(format!("member_{i}.json")),
                    &MlpArtifact {
                        schema_version: SCHEMA_VERSION,
                        net: member.clone(),
                        training_config: tc.clone(),
                        objective: Objective::Nll,
                        dropout: None,
                    },
                )?;
                write_log(&dir.join(format!("log_{i}.csv")), log)?;
            }
            layout::save_json(
                &dir.join("manifest.json"),
                &EnsembleManifest {
                    schema_version: SCHEMA_VERSION,
                    m,
                    seeds: ens.seeds().to_vec(),
                    arch: Arch {
                        input_dim: data.input_dim(),
                        layers,
                    },
                    objective: Objective::Nll,
                    training_config: tc,
                },
            )?;
        }
        Method::Bnn => {
            let prior = cfg
                .prior
                .ok_or_else(|| HarnessError::Config("prior: required for method bnn".into()))?;
            let (bnn, log) = train_bnn(data, &layers, &tc, prior, &mut rng).map_err(wrap)?;
            layout::save_json(
                &dir.join("model.json"),
                &BnnArtifact {
                    schema_version: SCHEMA_VERSION,
                    arch: Arch {
                        input_dim: bnn.input_dim(),
                        layers: bnn.layers().to_vec(),
                    },
                    prior,
                    mu: bnn.posterior().mu.clone(),
                    rho: bnn.posterior().rho.clone(),
                    biases: bnn.biases().to_vec(),
                    training_config: tc,
                },
            )?;
            write_log(&dir.join("log.csv"), &log)?;
        }
    }
    layout::save_json(&dir.join("scaler.json"), scaler)
}

/// Expected files for one trained response.
pub fn response_files(layout: &RunLayout, method: Method, response: &str, members: usize) -> Vec<std::path::PathBuf> {
    let dir = layout.response_dir(method, response);
    let mut files = vec![dir.join("scaler.json")];
    match method {
        Method::Mcd | Method::Bnn => files.push(dir.join("model.json")),
        Method::De => {
            files.push(dir.join("manifest.json"));
            files.extend((0..members).map(|i| dir.join(format!("member_{i}.json"))));
        }
    }
    files
}

fn check_input_dim(response: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(HarnessError::Data(format!(
            "compatibility: model for {response} takes {got} inputs, the dataset has {want}"
        )));
    }
    Ok(())
}

/// Load every trained response model of `method`.
pub fn load_models(
    layout: &RunLayout,
    method: Method,
    manifest: &DataManifest,
) -> Result<(ModelsManifest, SplitArtifact, Vec<ResponseModel>)> {
    layout::require_files("uq", &[layout.models_manifest(method), layout.split(method)])?;
    let models: ModelsManifest = layout::load_json(&layout.models_manifest(method))?;
    let split: SplitArtifact = layout::load_json(&layout.split(method))?;
    split.partition(manifest.n)?;
    let mut out = Vec::new();
    for response in &models.responses {
        let dir = layout.response_dir(method, response);
        let members = if method == Method::De {
            let path = dir.join("manifest.json");
            layout::require_files("uq", &[path.clone()])?;
            layout::load_json::<EnsembleManifest>(&path)?.m
        } else {
            0
        };
        layout::require_files("uq", &response_files(layout, method, response, members))?;
        let scaler: ScalerArtifact = layout::load_json(&dir.join("scaler.json"))?;
        let want = manifest.input_names.len();
        let model = match method {
            Method::Mcd => {
                let a: MlpArtifact = layout::load_json(&dir.join("model.json"))?;
                check_input_dim(response, a.net.input_dim(), want)?;
                let dropout = a
                    .dropout
                    .ok_or_else(|| HarnessError::Data(format!("{}: no dropout settings", dir.display())))?;
                TrainedModel::Mcd { mlp: a.net, dropout }
            }
            Method::De => {
                let em: EnsembleManifest = layout::load_json(&dir.join("manifest.json"))?;
                let mut nets = Vec::with_capacity(em.m);
                for i in 0..em.m {
                    let a: MlpArtifact = layout::load_json(&dir.join(format!("member_{i}.json")))?;
                    check_input_dim(response, a.net.input_dim(), want)?;
                    nets.push(a.net);
                }
                TrainedModel::De(
                    Ensemble::from_members(nets, em.seeds, Vec::new()).map_err(|e| HarnessError::core(response, e))?,
                )
            }
            Method::Bnn => {
                let a: BnnArtifact = layout::load_json(&dir.join("model.json"))?;
                check_input_dim(response, a.arch.input_dim, want)?;
                TrainedModel::Bnn(
                    Bnn::from_parts(
                        a.arch.input_dim,
                        a.arch.layers,
                        VariationalPosterior { mu: a.mu, rho: a.rho },
                        a.biases,
                        a.prior,
                    )
                    .map_err(|e| HarnessError::core(response, e))?,
                )
            }
        };
        out.push(ResponseModel {
            response: response.clone(),
            scaler,
            model,
        });
    }
    Ok((models, split, out))
}
