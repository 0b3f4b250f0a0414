//! Deep ensembles: `M` Gaussian-head networks trained independently from different random
//! initializations and minibatch orders, combined as an equal-weight mixture.

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mcd::{Method, PredictiveDistribution};
use crate::net::{self, LayerSpec, Mlp, TrainConfig, TrainLog};
use crate::objectives::{GaussianHeadOutput, Objective};
use crate::rng;

/// Paper configuration for the number of members.
pub const DEFAULT_MEMBERS: usize = 5;

/// Absolute slack, relative to the mixture second moment, below which a negative mixture
/// variance is treated as rounding and clamped to zero.
const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-12;

/// Mean and variance of an equal-weight mixture of `(mean, variance)` components:
/// `μ = (1/M) Σ μᵢ` and `σ² = (1/M) Σ (σᵢ² + μᵢ²) − μ²`.
pub fn mixture_moments(components: &[(f64, f64)]) -> Result<(f64, f64)> {
    if components.is_empty() {
        return Err(Error::State("mixture of zero components".into()));
    }
    if let [single] = components {
        return Ok(*single);
    }
    let m = components.len() as f64;
    let mean = components.iter().map(|c| c.0).sum::<f64>() / m;
    let second = components.iter().map(|(mu, var)| var + mu * mu).sum::<f64>() / m;
    let var = second - mean * mean;
    if var >= 0.0 {
        return Ok((mean, var));
    }
    if -var <= NEGATIVE_VARIANCE_TOLERANCE * second.max(1.0) {
        log::warn!("mixture variance {var:e} clamped to zero");
        return Ok((mean, 0.0));
    }
    // Cancellation beyond the tolerance: fall back to the nonnegative decomposition.
    Ok((mean, mixture_moments_decomposed(components)?.1))
}

/// Same moments via `mean(σᵢ²) + population variance of μᵢ`.
pub fn mixture_moments_decomposed(components: &[(f64, f64)]) -> Result<(f64, f64)> {
    if components.is_empty() {
        return Err(Error::State("mixture of zero components".into()));
    }
    let m = components.len() as f64;
    let mean = components.iter().map(|c| c.0).sum::<f64>() / m;
    let aleatoric = components.iter().map(|c| c.1).sum::<f64>() / m;
    let spread = components.iter().map(|c| (c.0 - mean).powi(2)).sum::<f64>() / m;
    Ok((mean, aleatoric + spread))
}

/// Decode raw head outputs `[m₁, s₁, m₂, s₂, …]` into one head per response.
pub fn decode_heads(raw: &[f64]) -> Vec<GaussianHeadOutput> {
    raw.chunks_exact(2)
        .map(|c| GaussianHeadOutput::from_raw(c[0], c[1]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Mlp>,
    seeds: Vec<u64>,
    logs: Vec<TrainLog>,
}

impl Ensemble {
    /// Assemble from already-trained Gaussian-head members with a shared architecture.
    pub fn from_members(members: Vec<Mlp>, seeds: Vec<u64>, logs: Vec<TrainLog>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::State("ensemble has no trained members".into()));
        }
        if seeds.len() != members.len() {
            return Err(Error::Shape("one seed per member".into()));
        }
        let first = &members[0];
        if first.output_dim() % 2 != 0 {
            return Err(Error::InvalidArchitecture(
                "ensemble members need Gaussian heads (two outputs per response)".into(),
            ));
        }
        if members
            .iter()
            .any(|m| m.layers() != first.layers() || m.input_dim() != first.input_dim())
        {
            return Err(Error::InvalidArchitecture("members differ in architecture".into()));
        }
        Ok(Self { members, seeds, logs })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn logs(&self) -> &[TrainLog] {
        &self.logs
    }

    pub fn responses(&self) -> usize {
        self.members[0].output_dim() / 2
    }

    /// Per-member heads at `x`: `heads[member][response]`.
    pub fn member_heads(&self, x: &[f64]) -> Result<Vec<Vec<GaussianHeadOutput>>> {
        self.members
            .iter()
            .map(|m| Ok(decode_heads(&m.forward(x, None)?)))
            .collect()
    }
}

/// Train `m` members on the same training partition. Member seeds are drawn from `rng`;
/// each seed drives that member's initialization and its minibatch shuffles.
pub fn train_ensemble(
    data: &Dataset,
    arch: &[LayerSpec],
    cfg: &TrainConfig,
    m: usize,
    rng: &mut rng::Rng,
) -> Result<Ensemble> {
    if m < 2 {
        return Err(Error::InvalidHyperparameter(format!(
            "an ensemble needs at least 2 members, got {m}"
        )));
    }
    let want = Objective::Nll.output_width(data.output_dim());
    if arch.last().map(|l| l.width) != Some(want) {
        return Err(Error::InvalidArchitecture(format!(
            "ensemble output layer must have width {want} (mean and variance per response)"
        )));
    }
    let seeds: Vec<u64> = (0..m).map(|_| rng.random()).collect();
    let mut members = Vec::with_capacity(m);
    let mut logs = Vec::with_capacity(m);
    for (i, &seed) in seeds.iter().enumerate() {
        let mlp = Mlp::new(data.input_dim(), arch, &mut rng::substream(seed, "init"))?;
        let (trained, log) = net::train(mlp, data, cfg, Objective::Nll, None, &mut rng::substream(seed, "train"))
            .map_err(|e| e.with_context(&format!("ensemble member {i}")))?;
        members.push(trained);
        logs.push(log);
    }
    Ensemble::from_members(members, seeds, logs)
}

/// Mixture mean and variance over members, per response.
pub fn ensemble_predict(e: &Ensemble, x: &[f64]) -> Result<PredictiveDistribution> {
    let heads = e.member_heads(x)?;
    let mut mean = Vec::with_capacity(e.responses());
    let mut variance = Vec::with_capacity(e.responses());
    for k in 0..e.responses() {
        let comps: Vec<(f64, f64)> = heads.iter().map(|h| (h[k].mean, h[k].variance)).collect();
        let (mu, var) = mixture_moments(&comps)?;
        mean.push(mu);
        variance.push(var);
    }
    Ok(PredictiveDistribution {
        mean,
        variance,
        samples_used: e.size(),
        source: Method::De,
    })
}

/// [`ensemble_predict`] for each row of `x`.
pub fn ensemble_predict_batch(e: &Ensemble, x: &Matrix) -> Result<Vec<PredictiveDistribution>> {
    (0..x.rows()).map(|i| ensemble_predict(e, x.row(i))).collect()
}
