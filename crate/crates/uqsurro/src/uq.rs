//! `uq`: predictive distributions on the test partition, coverage, curve bands.

use serde::{Deserialize, Serialize};
use uqsurro_core::bnn::bnn_sample;
use uqsurro_core::data::{gap_eval_grids, Partition};
use uqsurro_core::ensemble::ensemble_predict;
use uqsurro_core::mcd::{mcd_sample, z_score};
use uqsurro_core::net::Dropout;
use uqsurro_core::pca::{propagate_uncertainty, Propagation, ScoreDistribution};
use uqsurro_core::rng::{self, Rng};
use uqsurro_core::{artifact::SCHEMA_VERSION, Method};

use crate::config::{ProblemConfig, RunConfig};
use crate::error::{HarnessError, Result};
use crate::generate::load_generated;
use crate::layout::{self, fmt, RunLayout};
use crate::reduce::{load_pca, score_names};
use crate::train::{load_models, targets, ResponseModel, TrainedModel};

/// Raw MC-dropout draws kept per case and response.
pub const SAMPLE_CAP: usize = 10_000;
/// Evaluation points per region for the gap diagnostic.
pub const GAP_GRID_POINTS: usize = 100;

pub const PREDICTION_HEADER: [&str; 10] = [
    "case_id",
    "response",
    "method",
    "mean",
    "std",
    "ci68_lo",
    "ci68_hi",
    "ci95_lo",
    "ci95_hi",
    "reference",
];

#[derive(Debug, Clone, PartialEq)]
pub struct UqRow {
    pub case_id: usize,
    pub response: String,
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub ci68: (f64, f64),
    pub ci95: (f64, f64),
    pub reference: f64,
}

impl UqRow {
    pub fn new(case_id: usize, response: &str, method: Method, mean: f64, variance: f64, reference: f64) -> Self {
        let std = variance.max(0.0).sqrt();
        let z68 = z_score(0.6827).expect("valid level");
        let z95 = z_score(0.95).expect("valid level");
        Self {
            case_id,
            response: response.to_owned(),
            method,
            mean,
            std,
            ci68: (mean - z68 * std, mean + z68 * std),
            ci95: (mean - z95 * std, mean + z95 * std),
            reference,
        }
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.case_id.to_string(),
            self.response.clone(),
            self.method.to_string(),
            fmt(self.mean),
            fmt(self.std),
            fmt(self.ci68.0),
            fmt(self.ci68.1),
            fmt(self.ci95.0),
            fmt(self.ci95.1),
            fmt(self.reference),
        ]
    }

    pub fn from_record(rec: &[String], path: &std::path::Path, row: usize) -> Result<Self> {
        if rec.len() != PREDICTION_HEADER.len() {
            return Err(HarnessError::Data(format!(
                "{}: row {row} has {} fields",
                path.display(),
                rec.len()
            )));
        }
        let num = |i: usize| layout::parse_f64(&rec[i], path, row, PREDICTION_HEADER[i]);
        Ok(Self {
            case_id: rec[0]
                .parse()
                .map_err(|_| HarnessError::Data(format!("{}: row {row}: bad case_id `{}`", path.display(), rec[0])))?,
            response: rec[1].clone(),
            method: rec[2]
                .parse()
                .map_err(|e| HarnessError::Data(format!("{}: row {row}: {e}", path.display())))?,
            mean: num(3)?,
            std: num(4)?,
            ci68: (num(5)?, num(6)?),
            ci95: (num(7)?, num(8)?),
            reference: num(9)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSummary {
    pub response: String,
    pub n_cases: usize,
    pub rmse: f64,
    pub mean_std: f64,
    pub coverage68: f64,
    pub coverage95: f64,
}

/// Accuracy and calibration of the rows for one response.
pub fn summarize(response: &str, rows: &[&UqRow]) -> ResponseSummary {
    let n = rows.len() as f64;
    let inside = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
    ResponseSummary {
        response: response.to_owned(),
        n_cases: rows.len(),
        rmse: (rows.iter().map(|r| (r.mean - r.reference).powi(2)).sum::<f64>() / n).sqrt(),
        mean_std: rows.iter().map(|r| r.std).sum::<f64>() / n,
        coverage68: rows.iter().filter(|r| inside(r.ci68, r.reference)).count() as f64 / n,
        coverage95: rows.iter().filter(|r| inside(r.ci95, r.reference)).count() as f64 / n,
    }
}

/// Summaries per response, in first-appearance order.
pub fn summarize_all(rows: &[UqRow]) -> Vec<ResponseSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.response.as_str()) {
            names.push(&r.response);
        }
    }
    names
        .iter()
        .map(|name| {
            let sel: Vec<&UqRow> = rows.iter().filter(|r| r.response == *name).collect();
            summarize(name, &sel)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutMeta {
    pub train_rate: f64,
    pub predict_rate: f64,
    /// Prediction used a ratio other than the training one.
    pub overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSummary {
    pub mode: String,
    pub n_points: usize,
    pub rmse: f64,
    pub mean_std: f64,
    pub coverage95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationSummary {
    pub response: String,
    pub gap_mean_std: f64,
    pub support_mean_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqSummary {
    pub schema_version: u32,
    pub method: Method,
    pub seed: u64,
    /// Stochastic passes `T` (mcd, bnn).
    pub uq_samples: Option<usize>,
    /// Ensemble size `M` (de).
    pub members: Option<usize>,
    pub dropout: Option<DropoutMeta>,
    pub n_test_cases: usize,
    pub responses: Vec<ResponseSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<CurveSummary>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolation: Option<Vec<ExtrapolationSummary>>,
}

/// Predictive mean and variance in response units, plus raw MC-dropout draws.
fn predict(model: &ResponseModel, x: &[f64], cfg: &RunConfig, rng: &mut Rng) -> Result<(f64, f64, Option<Vec<f64>>)> {
    let z = model.scaler.prepare(x);
    let ctx = format!("predicting {}", model.response);
    let wrap = |e| HarnessError::core(&ctx, e);
    let (mean, var, draws) = match &model.model {
        TrainedModel::Mcd { mlp, dropout } => {
            let d = match cfg.predict_dropout {
                Some(rate) => Dropout::with_scaling(rate, dropout.scaling).map_err(wrap)?,
                None => *dropout,
            };
            let (dist, samples) = mcd_sample(mlp, &z, cfg.uq_samples(), d, rng).map_err(wrap)?;
            let draws = samples
                .iter()
                .take(SAMPLE_CAP)
                .map(|s| model.scaler.output.inverse_value(0, s[0]))
                .collect();
            (dist.mean[0], dist.variance[0], Some(draws))
        }
        TrainedModel::De(e) => {
            let dist = ensemble_predict(e, &z).map_err(wrap)?;
            (dist.mean[0], dist.variance[0], None)
        }
        TrainedModel::Bnn(b) => {
            let (dist, _) = bnn_sample(b, &z, cfg.uq_samples(), rng).map_err(wrap)?;
            (dist.mean[0], dist.variance[0], None)
        }
    };
    let (m, v) = model.scaler.unscale(mean, var);
    Ok((m, v, draws))
}

struct CurveAcc {
    mode: &'static str,
    n: usize,
    sq_err: f64,
    std_sum: f64,
    hits: usize,
}

impl CurveAcc {
    fn new(mode: &'static str) -> Self {
        Self {
            mode,
            n: 0,
            sq_err: 0.0,
            std_sum: 0.0,
            hits: 0,
        }
    }

    fn push(&mut self, mean: f64, std: f64, reference: f64) {
        let z = z_score(0.95).expect("valid level");
        self.n += 1;
        self.sq_err += (mean - reference).powi(2);
        self.std_sum += std;
        if (mean - z * std..=mean + z * std).contains(&reference) {
            self.hits += 1;
        }
    }

    fn finish(&self) -> CurveSummary {
        let n = self.n.max(1) as f64;
        CurveSummary {
            mode: self.mode.to_owned(),
            n_points: self.n,
            rmse: (self.sq_err / n).sqrt(),
            mean_std: self.std_sum / n,
            coverage95: self.hits as f64 / n,
        }
    }
}

pub fn cmd_uq(cfg: &RunConfig, force: bool) -> Result<UqSummary> {
    let layout = RunLayout::new(cfg.output_dir()?);
    let (data, manifest) = load_generated(cfg, &layout)?;
    let (models_manifest, split, models) = load_models(&layout, cfg.method, &manifest)?;
    if models_manifest.pca != cfg.pca.enabled {
        return Err(HarnessError::Data(format!(
            "compatibility: models were trained with pca.enabled = {}, the config says {}",
            models_manifest.pca, cfg.pca.enabled
        )));
    }
    let (available, values) = targets(cfg, &layout, &data)?;
    let partition = split.partition(data.n())?;
    let test: Vec<usize> = (0..data.n()).filter(|&i| partition[i] == Partition::Test).collect();

    let pca = if cfg.pca.enabled {
        let (model, _) = load_pca(&layout, data.n())?;
        let complete = models_manifest.responses == score_names(model.retained());
        if !complete {
            log::warn!("curve bands skipped: not every retained PC score has a model");
        }
        complete.then_some(model)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut sample_rows = Vec::new();
    let mut band_rows = Vec::new();
    let mut curve_acc = [CurveAcc::new("monte_carlo"), CurveAcc::new("closed_form")];
    for &case in &test {
        let mut rng = rng::substream(cfg.seed, &format!("uq:{case}"));
        let mut scores = Vec::with_capacity(models.len());
        for m in &models {
            let k = available
                .iter()
                .position(|a| *a == m.response)
                .ok_or_else(|| HarnessError::Data(format!("compatibility: no data for response {}", m.response)))?;
            let (mean, var, draws) = predict(m, data.inputs().row(case), cfg, &mut rng)?;
            rows.push(UqRow::new(case, &m.response, cfg.method, mean, var, values[(case, k)]));
            scores.push(ScoreDistribution {
                mean,
                variance: var.max(0.0),
            });
            for (t, v) in draws.into_iter().flatten().enumerate() {
                sample_rows.push(vec![case.to_string(), m.response.clone(), t.to_string(), fmt(v)]);
            }
        }
        if let Some(model) = &pca {
            let times = manifest.times.clone().unwrap_or_default();
            let modes = [
                Propagation::MonteCarlo {
                    samples: cfg.pca.curve_samples,
                    keep_samples: false,
                },
                Propagation::ClosedForm,
            ];
            for (acc, mode) in curve_acc.iter_mut().zip(modes) {
                let band = propagate_uncertainty(model, &scores, mode, &mut rng)
                    .map_err(|e| HarnessError::core("curve band", e))?;
                for j in 0..band.mean.len() {
                    let reference = data.outputs()[(case, j)];
                    acc.push(band.mean[j], band.std[j], reference);
                    band_rows.push(vec![
                        case.to_string(),
                        j.to_string(),
                        times.get(j).map_or_else(|| j.to_string(), |t| fmt(*t)),
                        acc.mode.to_owned(),
                        fmt(band.mean[j]),
                        fmt(band.std[j]),
                        fmt(reference),
                    ]);
                }
            }
        }
    }

    let extrapolation = if matches!(cfg.problem, ProblemConfig::SynthGap { .. }) {
        Some(gap_diagnostic(cfg, &models)?)
    } else {
        None
    };

    let dropout = match models.first().map(|m| &m.model) {
        Some(TrainedModel::Mcd { dropout, .. }) => {
            let predict_rate = cfg.predict_dropout.unwrap_or(dropout.rate);
            Some(DropoutMeta {
                train_rate: dropout.rate,
                predict_rate,
                overridden: predict_rate != dropout.rate,
            })
        }
        _ => None,
    };
    let members = match models.first().map(|m| &m.model) {
        Some(TrainedModel::De(e)) => Some(e.size()),
        _ => None,
    };
    let summary = UqSummary {
        schema_version: SCHEMA_VERSION,
        method: cfg.method,
        seed: cfg.seed,
        uq_samples: (cfg.method != Method::De).then(|| cfg.uq_samples()),
        members,
        dropout,
        n_test_cases: test.len(),
        responses: summarize_all(&rows),
        curves: pca.as_ref().map(|_| curve_acc.iter().map(CurveAcc::finish).collect()),
        extrapolation: extrapolation.as_ref().map(|(s, _)| s.clone()),
    };

    let dir = layout.uq_dir(cfg.method);
    layout::prepare_output(&dir, force)?;
    let records: Vec<Vec<String>> = rows.iter().map(UqRow::to_record).collect();
    layout::write_csv(&layout.predictions(cfg.method), &PREDICTION_HEADER, &records)?;
    if !sample_rows.is_empty() {
        layout::write_csv(
            &layout.samples(cfg.method),
            &["case_id", "response", "draw", "value"],
            &sample_rows,
        )?;
    }
    if pca.is_some() {
        layout::write_csv(
            &layout.curve_bands(cfg.method),
            &["case_id", "point", "time", "mode", "mean", "std", "reference"],
            &band_rows,
        )?;
    }
    if let Some((_, grid_rows)) = &extrapolation {
        layout::write_csv(
            &layout.extrapolation(cfg.method),
            &["response", "region", "x", "mean", "std"],
            grid_rows,
        )?;
    }
    layout::save_json(&layout.uq_summary(cfg.method), &summary)?;
    for s in &summary.responses {
        log::info!(
            "{} {}: rmse {:.4e}, mean std {:.4e}, coverage68 {:.3}, coverage95 {:.3}",
            cfg.method,
            s.response,
            s.rmse,
            s.mean_std,
            s.coverage68,
            s.coverage95
        );
    }
    Ok(summary)
}

/// Mean predictive std inside the held-out gap and across the training support.
fn gap_diagnostic(cfg: &RunConfig, models: &[ResponseModel]) -> Result<(Vec<ExtrapolationSummary>, Vec<Vec<String>>)> {
    let (gap, support) = gap_eval_grids(GAP_GRID_POINTS);
    let mut rng = rng::substream(cfg.seed, "uq:grid");
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for m in models {
        let mut means = [0.0; 2];
        for (slot, (region, xs)) in [("gap", &gap), ("support", &support)].into_iter().enumerate() {
            for &x in xs {
                let (mean, var, _) = predict(m, &[x], cfg, &mut rng)?;
                let std = var.max(0.0).sqrt();
                means[slot] += std / xs.len() as f64;
                rows.push(vec![m.response.clone(), region.to_owned(), fmt(x), fmt(mean), fmt(std)]);
            }
        }
        summaries.push(ExtrapolationSummary {
            response: m.response.clone(),
            gap_mean_std: means[0],
            support_mean_std: means[1],
        });
    }
    Ok((summaries, rows))
}

/// Read a predictions CSV back into rows.
pub fn read_predictions(path: &std::path::Path) -> Result<Vec<UqRow>> {
    let (header, rows) = layout::read_csv(path)?;
    if header != PREDICTION_HEADER {
        return Err(HarnessError::Data(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| UqRow::from_record(r, path, i + 1))
        .collect()
}
