//! Monte Carlo dropout: keep dropout active at prediction time and summarize `T` stochastic
//! forward passes by their sample mean and unbiased (`T − 1`) variance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::net::{Dropout, Mlp};
use crate::rng::Rng;

/// Default number of stochastic passes for MC dropout and BNN prediction.
pub const DEFAULT_UQ_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcd,
    De,
    Bnn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcd => "mcd",
            Method::De => "de",
            Method::Bnn => "bnn",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcd" => Ok(Method::Mcd),
            "de" => Ok(Method::De),
            "bnn" => Ok(Method::Bnn),
            other => Err(Error::Schema(format!("unknown method `{other}`"))),
        }
    }
}

/// Two-sided normal quantile for a central interval. The two levels used in reports map to
/// the customary constants 1 and 1.96.
pub fn z_score(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    if (level - 0.6827).abs() < 1e-12 {
        return Ok(1.0);
    }
    if (level - 0.95).abs() < 1e-12 {
        return Ok(1.96);
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// Per-response predictive mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `T` for sampling methods, `M` for ensembles.
    pub samples_used: usize,
    pub source: Method,
}

impl PredictiveDistribution {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// `mean ± z(level)·std` per response.
    pub fn ci(&self, level: f64) -> Result<Vec<(f64, f64)>> {
        let z = z_score(level)?;
        Ok(self
            .mean
            .iter()
            .zip(self.std())
            .map(|(m, s)| (m - z * s, m + z * s))
            .collect())
    }

    /// Moments of stored draws (`samples[t][k]`), computed in two passes.
    pub fn from_samples(samples: &[Vec<f64>], source: Method) -> Result<Self> {
        let (mean, variance) = two_pass_moments(samples)?;
        Ok(Self {
            mean,
            variance,
            samples_used: samples.len(),
            source,
        })
    }
}

/// Welford accumulator for per-response mean and unbiased variance.
#[derive(Debug, Clone)]
pub struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased variance; requires at least two observations.
    pub fn variance(&self) -> Vec<f64> {
        let d = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }
}

pub fn two_pass_moments(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = samples.len();
    if t < 2 {
        return Err(Error::InvalidHyperparameter(format!(
            "need at least 2 samples for a variance, got {t}"
        )));
    }
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        if s.len() != dim {
            return Err(Error::Shape("ragged sample vectors".into()));
        }
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    for v in &mut var {
        *v /= (t - 1) as f64;
    }
    Ok((mean, var))
}

/// Anything that yields a random output vector per call.
pub trait StochasticPredictor {
    fn output_dim(&self) -> usize;
    fn draw(&self, x: &[f64], rng: &mut Rng) -> Result<Vec<f64>>;
}

/// An MLP evaluated with a freshly sampled dropout mask on each draw.
#[derive(Debug, Clone, Copy)]
pub struct McDropout<'a> {
    pub mlp: &'a Mlp,
    pub dropout: Dropout,
}

impl StochasticPredictor for McDropout<'_> {
    fn output_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    fn draw(&self, x: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let mask = self.dropout.sample_mask(self.mlp, rng);
        self.mlp.forward(x, Some(&mask))
    }
}

/// `T` draws in sequence, reduced with the streaming accumulator. Returns the distribution
/// and the raw draws (`samples[t][k]`).
pub fn monte_carlo<P: StochasticPredictor + ?Sized>(
    predictor: &P,
    x: &[f64],
    t: usize,
    source: Method,
    rng: &mut Rng,
) -> Result<(PredictiveDistribution, Vec<Vec<f64>>)> {
    if t < 2 {
        return Err(Error::InvalidHyperparameter(format!(
            "need T ≥ 2 passes for a variance, got {t}"
        )));
    }
    let mut acc = Moments::new(predictor.output_dim());
    let mut samples = Vec::with_capacity(t);
    for _ in 0..t {
        let y = predictor.draw(x, rng)?;
        acc.push(&y);
        samples.push(y);
    }
    Ok((
        PredictiveDistribution {
            mean: acc.mean().to_vec(),
            variance: acc.variance(),
            samples_used: t,
            source,
        },
        samples,
    ))
}

/// MC dropout prediction at `x` with `t` passes.
pub fn mcd_predict(mlp: &Mlp, x: &[f64], t: usize, dropout: Dropout, rng: &mut Rng) -> Result<PredictiveDistribution> {
    Ok(mcd_sample(mlp, x, t, dropout, rng)?.0)
}

/// Like [`mcd_predict`] but also returns the raw per-pass outputs.
pub fn mcd_sample(
    mlp: &Mlp,
    x: &[f64],
    t: usize,
    dropout: Dropout,
    rng: &mut Rng,
) -> Result<(PredictiveDistribution, Vec<Vec<f64>>)> {
    monte_carlo(&McDropout { mlp, dropout }, x, t, Method::Mcd, rng)
}
