//! Mean-field variational Bayesian networks trained by Bayes by Backprop.
//!
//! Every weight has an independent Gaussian posterior `N(μ, σ²)` with `σ = softplus(ρ)`;
//! biases are plain point estimates. A weight sample is `w = μ + σ ⊙ ε`, `ε ~ N(0, I)`, so
//! gradients reach `(μ, ρ)` through the sample. The loss on a minibatch is
//!
//! ```text
//! KL(q ‖ prior) / n_batches  −  (1/n_mc) Σ_s log p(batch | w⁽ˢ⁾)
//! ```
//!
//! and summing it over an epoch's minibatches gives the full variational free energy.
//! The network emits a Gaussian head per response, so the log-likelihood is the negative
//! summed Gaussian NLL.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::ensemble::{decode_heads, mixture_moments};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mcd::{Method, PredictiveDistribution};
use crate::net::{self, validate_architecture, Activation, LayerSpec, Mlp, Optimizer, TrainConfig, TrainLog};
use crate::objectives::{sigmoid, softplus, softplus_inv, LossSpec, Objective, HALF_LN_TWO_PI};
use crate::rng::Rng;

/// Initial posterior scale as a fraction of the weight initialization scale.
const INIT_SIGMA_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Gaussian {
        sigma: f64,
    },
    /// `π N(0, σ₁²) + (1 − π) N(0, σ₂²)`
    ScaleMixture {
        pi: f64,
        sigma1: f64,
        sigma2: f64,
    },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Gaussian { sigma: 1.0 }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PriorSpec::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            PriorSpec::ScaleMixture { pi, sigma1, sigma2 } => {
                pi > 0.0 && pi < 1.0 && sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidHyperparameter(format!("invalid prior {self:?}")))
        }
    }

    pub fn log_density(&self, w: f64) -> f64 {
        match *self {
            PriorSpec::Gaussian { sigma } => normal_log_density(w, sigma),
            PriorSpec::ScaleMixture { pi, sigma1, sigma2 } => {
                let a = pi.ln() + normal_log_density(w, sigma1);
                let b = (1.0 - pi).ln() + normal_log_density(w, sigma2);
                let hi = a.max(b);
                hi + ((a - hi).exp() + (b - hi).exp()).ln()
            }
        }
    }

    /// `d log p(w) / dw`
    pub fn log_density_grad(&self, w: f64) -> f64 {
        match *self {
            PriorSpec::Gaussian { sigma } => -w / (sigma * sigma),
            PriorSpec::ScaleMixture { pi, sigma1, sigma2 } => {
                let a = pi.ln() + normal_log_density(w, sigma1);
                let b = (1.0 - pi).ln() + normal_log_density(w, sigma2);
                let hi = a.max(b);
                let (ea, eb) = ((a - hi).exp(), (b - hi).exp());
                let (ra, rb) = (ea / (ea + eb), eb / (ea + eb));
                -w * (ra / (sigma1 * sigma1) + rb / (sigma2 * sigma2))
            }
        }
    }
}

fn normal_log_density(w: f64, sigma: f64) -> f64 {
    -HALF_LN_TWO_PI - sigma.ln() - w * w / (2.0 * sigma * sigma)
}

/// Closed-form `KL(N(μ_q, σ_q²) ‖ N(0, σ_p²))`.
pub fn kl_gaussian(mu_q: f64, sigma_q: f64, sigma_p: f64) -> f64 {
    (sigma_p / sigma_q).ln() + (sigma_q * sigma_q + mu_q * mu_q) / (2.0 * sigma_p * sigma_p) - 0.5
}

/// Per-weight posterior means and raw scales, shaped like the network's weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub mu: Vec<Matrix>,
    pub rho: Vec<Matrix>,
}

impl VariationalPosterior {
    pub fn sigma(&self, layer: usize) -> Matrix {
        let r = &self.rho[layer];
        let data = r.as_slice().iter().map(|&v| softplus(v)).collect();
        Matrix::from_vec(r.rows(), r.cols(), data).expect("same shape")
    }

    pub fn weight_count(&self) -> usize {
        self.mu.iter().map(|m| m.as_slice().len()).sum()
    }
}

/// Sum over weights of the closed-form Gaussian KL to a zero-mean Gaussian prior.
pub fn kl_gaussians(posterior: &VariationalPosterior, prior: &PriorSpec) -> Result<f64> {
    let PriorSpec::Gaussian { sigma: sigma_p } = *prior else {
        return Err(Error::InvalidHyperparameter(
            "closed-form KL needs a Gaussian prior; scale mixtures use the Monte Carlo estimate".into(),
        ));
    };
    let mut kl = 0.0;
    for (mu, rho) in posterior.mu.iter().zip(&posterior.rho) {
        for (&m, &r) in mu.as_slice().iter().zip(rho.as_slice()) {
            kl += kl_gaussian(m, softplus(r), sigma_p);
        }
    }
    Ok(kl)
}

/// Standard-normal noise for one weight sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightNoise {
    pub eps: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bnn {
    input_dim: usize,
    layers: Vec<LayerSpec>,
    posterior: VariationalPosterior,
    biases: Vec<Vec<f64>>,
    prior: PriorSpec,
}

impl Bnn {
    /// Posterior means drawn like ordinary weights; `σ` starts at a small fraction of the
    /// initialization scale; biases start at zero.
    pub fn new(input_dim: usize, layers: &[LayerSpec], prior: PriorSpec, rng: &mut Rng) -> Result<Self> {
        prior.validate()?;
        let mean = Mlp::new(input_dim, layers, rng)?;
        let rho = mean
            .weights()
            .iter()
            .zip(layers)
            .map(|(w, spec)| {
                let (fan_in, fan_out) = w.shape();
                let init_scale = match spec.activation {
                    Activation::Relu => (2.0 / fan_in as f64).sqrt(),
                    // std of U(−a, a) with a = √(6 / (fan_in + fan_out))
                    _ => (2.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let r0 = softplus_inv(INIT_SIGMA_FRACTION * init_scale);
                Matrix::from_vec(fan_in, fan_out, vec![r0; fan_in * fan_out]).expect("shape")
            })
            .collect();
        Ok(Self {
            input_dim,
            layers: layers.to_vec(),
            biases: mean.biases().to_vec(),
            posterior: VariationalPosterior {
                mu: mean.weights().to_vec(),
                rho,
            },
            prior,
        })
    }

    pub fn from_parts(
        input_dim: usize,
        layers: Vec<LayerSpec>,
        posterior: VariationalPosterior,
        biases: Vec<Vec<f64>>,
        prior: PriorSpec,
    ) -> Result<Self> {
        prior.validate()?;
        // reuse the MLP shape checks on the means
        let check = Mlp::from_parts(input_dim, layers.clone(), posterior.mu.clone(), biases.clone())?;
        if posterior.rho.len() != posterior.mu.len()
            || posterior
                .rho
                .iter()
                .zip(&posterior.mu)
                .any(|(r, m)| r.shape() != m.shape())
        {
            return Err(Error::Shape("ρ must mirror μ layer by layer".into()));
        }
        if posterior.rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::Domain("non-finite ρ".into()));
        }
        drop(check);
        Ok(Self {
            input_dim,
            layers,
            posterior,
            biases,
            prior,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn posterior(&self) -> &VariationalPosterior {
        &self.posterior
    }

    pub fn posterior_mut(&mut self) -> &mut VariationalPosterior {
        &mut self.posterior
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn responses(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width / 2)
    }

    pub fn sample_noise(&self, rng: &mut Rng) -> WeightNoise {
        WeightNoise {
            eps: self
                .posterior
                .mu
                .iter()
                .map(|m| {
                    let data = (0..m.as_slice().len()).map(|_| StandardNormal.sample(rng)).collect();
                    Matrix::from_vec(m.rows(), m.cols(), data).expect("shape")
                })
                .collect(),
        }
    }

    /// All-zero noise: the sampled weights equal the posterior means.
    pub fn zero_noise(&self) -> WeightNoise {
        WeightNoise {
            eps: self
                .posterior
                .mu
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    /// `w = μ + softplus(ρ) ⊙ ε`
    pub fn weights_for(&self, noise: &WeightNoise) -> Vec<Matrix> {
        self.posterior
            .mu
            .iter()
            .zip(&self.posterior.rho)
            .zip(&noise.eps)
            .map(|((mu, rho), eps)| {
                let data = mu
                    .as_slice()
                    .iter()
                    .zip(rho.as_slice())
                    .zip(eps.as_slice())
                    .map(|((&m, &r), &e)| m + softplus(r) * e)
                    .collect();
                Matrix::from_vec(mu.rows(), mu.cols(), data).expect("shape")
            })
            .collect()
    }

    pub fn sample_weights(&self, rng: &mut Rng) -> Vec<Matrix> {
        self.weights_for(&self.sample_noise(rng))
    }

    /// The deterministic network carrying the weights for `noise`.
    pub fn network(&self, noise: &WeightNoise) -> Result<Mlp> {
        Mlp::from_parts(
            self.input_dim,
            self.layers.clone(),
            self.weights_for(noise),
            self.biases.clone(),
        )
    }

    pub fn mean_network(&self) -> Result<Mlp> {
        self.network(&self.zero_noise())
    }

    /// `KL(q ‖ prior)`: closed form for Gaussian priors, otherwise the single-sample estimate
    /// `log q(w) − log p(w)` at the weights given by `noise`.
    pub fn kl_term(&self, noise: &WeightNoise) -> Result<f64> {
        match self.prior {
            PriorSpec::Gaussian { .. } => kl_gaussians(&self.posterior, &self.prior),
            PriorSpec::ScaleMixture { .. } => {
                let mut kl = 0.0;
                for l in 0..self.layers.len() {
                    let (mu, rho, eps) = (&self.posterior.mu[l], &self.posterior.rho[l], &noise.eps[l]);
                    for i in 0..mu.as_slice().len() {
                        let sigma = softplus(rho.as_slice()[i]);
                        let e = eps.as_slice()[i];
                        let w = mu.as_slice()[i] + sigma * e;
                        let log_q = -HALF_LN_TWO_PI - sigma.ln() - 0.5 * e * e;
                        kl += log_q - self.prior.log_density(w);
                    }
                }
                Ok(kl)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Bnn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            input_dim: usize,
            layers: Vec<LayerSpec>,
            posterior: VariationalPosterior,
            biases: Vec<Vec<f64>>,
            prior: PriorSpec,
        }
        let r = Raw::deserialize(d)?;
        Bnn::from_parts(r.input_dim, r.layers, r.posterior, r.biases, r.prior).map_err(serde::de::Error::custom)
    }
}

/// Gradients of the minibatch loss with respect to `(μ, ρ, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnGradients {
    pub mu: Vec<Matrix>,
    pub rho: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl BnnGradients {
    fn zeros(bnn: &Bnn) -> Self {
        Self {
            mu: bnn
                .posterior
                .mu
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
            rho: bnn
                .posterior
                .mu
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
            biases: bnn.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.mu.iter().chain(&self.rho).all(Matrix::is_finite)
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

fn check_loss_args(n_batches: usize, noises: &[WeightNoise]) -> Result<()> {
    if n_batches == 0 {
        return Err(Error::InvalidHyperparameter("n_batches must be ≥ 1".into()));
    }
    if noises.is_empty() {
        return Err(Error::InvalidHyperparameter("n_mc must be ≥ 1".into()));
    }
    Ok(())
}

/// Minibatch loss and exact gradients for the given (frozen) weight noises, one per
/// Monte Carlo sample.
pub fn elbo_loss_with_noise(
    bnn: &Bnn,
    inputs: &Matrix,
    targets: &Matrix,
    n_batches: usize,
    noises: &[WeightNoise],
) -> Result<(f64, BnnGradients)> {
    check_loss_args(n_batches, noises)?;
    let n_mc = noises.len() as f64;
    let batch = inputs.rows() as f64;
    let kl_weight = 1.0 / n_batches as f64;
    let mut grads = BnnGradients::zeros(bnn);
    let mut loss = 0.0;

    for noise in noises {
        let mlp = bnn.network(noise)?;
        // mean NLL → summed NLL = −log-likelihood of the batch
        let (mean_nll, mut g) = mlp.loss_and_gradients(inputs, targets, &LossSpec::plain(Objective::Nll), None)?;
        g.scale(batch / n_mc);
        loss += mean_nll * batch / n_mc;
        for l in 0..bnn.layers.len() {
            let rho = bnn.posterior.rho[l].as_slice();
            let eps = noise.eps[l].as_slice();
            let gw = g.weights[l].as_slice();
            let (gmu, grho) = (grads.mu[l].as_mut_slice(), grads.rho[l].as_mut_slice());
            for i in 0..gw.len() {
                gmu[i] += gw[i];
                grho[i] += gw[i] * eps[i] * sigmoid(rho[i]);
            }
            for (acc, v) in grads.biases[l].iter_mut().zip(&g.biases[l]) {
                *acc += v;
            }
        }
        if let PriorSpec::ScaleMixture { .. } = bnn.prior {
            // single-sample KL estimate, reparameterized
            loss += kl_weight * bnn.kl_term(noise)? / n_mc;
            let c = kl_weight / n_mc;
            for l in 0..bnn.layers.len() {
                let (mu, rho, eps) = (
                    bnn.posterior.mu[l].as_slice(),
                    bnn.posterior.rho[l].as_slice(),
                    noise.eps[l].as_slice(),
                );
                let (gmu, grho) = (grads.mu[l].as_mut_slice(), grads.rho[l].as_mut_slice());
                for i in 0..mu.len() {
                    let sigma = softplus(rho[i]);
                    let w = mu[i] + sigma * eps[i];
                    let d_neg_log_p = -bnn.prior.log_density_grad(w);
                    let ds = sigmoid(rho[i]);
                    gmu[i] += c * d_neg_log_p;
                    grho[i] += c * (d_neg_log_p * eps[i] * ds - ds / sigma);
                }
            }
        }
    }

    if let PriorSpec::Gaussian { sigma: sp } = bnn.prior {
        loss += kl_weight * kl_gaussians(&bnn.posterior, &bnn.prior)?;
        let sp2 = sp * sp;
        for l in 0..bnn.layers.len() {
            let (mu, rho) = (bnn.posterior.mu[l].as_slice(), bnn.posterior.rho[l].as_slice());
            let (gmu, grho) = (grads.mu[l].as_mut_slice(), grads.rho[l].as_mut_slice());
            for i in 0..mu.len() {
                let sigma = softplus(rho[i]);
                gmu[i] += kl_weight * mu[i] / sp2;
                grho[i] += kl_weight * (-1.0 / sigma + sigma / sp2) * sigmoid(rho[i]);
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            last_finite_epoch: None,
            context: "non-finite ELBO".into(),
        });
    }
    Ok((loss, grads))
}

/// Minibatch loss with `n_mc` fresh weight samples.
pub fn elbo_loss(
    bnn: &Bnn,
    inputs: &Matrix,
    targets: &Matrix,
    n_batches: usize,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let noises: Vec<WeightNoise> = (0..n_mc).map(|_| bnn.sample_noise(rng)).collect();
    Ok(elbo_loss_with_noise(bnn, inputs, targets, n_batches, &noises)?.0)
}

/// Minibatch gradient descent on the ELBO with one weight sample per step.
///
/// The logged training loss for an epoch is the sum of its minibatch losses (a one-sample
/// estimate of the full free energy); the validation loss is the mean NLL of the
/// posterior-mean network on the validation partition.
pub fn train_bnn(
    data: &Dataset,
    arch: &[LayerSpec],
    cfg: &TrainConfig,
    prior: PriorSpec,
    rng: &mut Rng,
) -> Result<(Bnn, TrainLog)> {
    validate_architecture(data.input_dim(), arch)?;
    let bnn = Bnn::new(data.input_dim(), arch, prior, rng)?;
    fit_bnn(bnn, data, cfg, rng)
}

/// Continue training an existing posterior.
pub fn fit_bnn(mut bnn: Bnn, data: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<(Bnn, TrainLog)> {
    cfg.validate()?;
    let want = Objective::Nll.output_width(data.output_dim());
    if bnn.layers.last().map(|l| l.width) != Some(want) {
        return Err(Error::InvalidArchitecture(format!(
            "BNN output layer must have width {want} (mean and variance per response)"
        )));
    }
    let (train_x, train_y) = data.partition_xy(Partition::Train);
    let n = train_x.rows();
    if n == 0 {
        return Err(Error::State("training partition is empty".into()));
    }
    if cfg.batch_size > n {
        return Err(Error::InvalidHyperparameter(format!(
            "batch_size {} exceeds training-set size {n}",
            cfg.batch_size
        )));
    }
    let (val_x, val_y) = net::validation_xy(data);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut log = TrainLog::default();
    let n_batches = n.div_ceil(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for idx in net::minibatches(n, cfg.batch_size, rng) {
            let x = train_x.select_rows(&idx);
            let y = train_y.select_rows(&idx);
            let noise = bnn.sample_noise(rng);
            let (loss, grads) =
                elbo_loss_with_noise(&bnn, &x, &y, n_batches, std::slice::from_ref(&noise)).map_err(|_| {
                    Error::Divergence {
                        epoch,
                        last_finite_epoch: epoch.checked_sub(1),
                        context: "non-finite ELBO".into(),
                    }
                })?;
            if !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_epoch: epoch.checked_sub(1),
                    context: "non-finite ELBO gradient".into(),
                });
            }
            total += loss;
            opt.next_step();
            for l in 0..bnn.layers.len() {
                opt.update(3 * l, bnn.posterior.mu[l].as_mut_slice(), grads.mu[l].as_slice());
                opt.update(3 * l + 1, bnn.posterior.rho[l].as_mut_slice(), grads.rho[l].as_slice());
                opt.update(3 * l + 2, &mut bnn.biases[l], &grads.biases[l]);
            }
        }
        let val_out = bnn.mean_network()?.forward_batch(&val_x, None)?;
        let (val, _) = Objective::Nll.batch_loss(&val_out, &val_y)?;
        log.push(epoch, total, val, "BNN validation loss")?;
    }
    Ok((bnn, log))
}

/// Head outputs for `t` posterior draws at `x`: `draws[t][response] = (mean, variance)`.
pub fn bnn_sample_heads(bnn: &Bnn, x: &[f64], t: usize, rng: &mut Rng) -> Result<Vec<Vec<(f64, f64)>>> {
    (0..t)
        .map(|_| {
            let mlp = bnn.network(&bnn.sample_noise(rng))?;
            Ok(decode_heads(&mlp.forward(x, None)?)
                .into_iter()
                .map(|h| (h.mean, h.variance))
                .collect())
        })
        .collect()
}

/// Combine per-draw heads into the predictive mixture, response by response.
pub fn mixture_of_draws(draws: &[Vec<(f64, f64)>], source: Method) -> Result<PredictiveDistribution> {
    let responses = draws.first().map_or(0, Vec::len);
    let mut mean = Vec::with_capacity(responses);
    let mut variance = Vec::with_capacity(responses);
    for k in 0..responses {
        let comps: Vec<(f64, f64)> = draws.iter().map(|d| d[k]).collect();
        let (m, v) = mixture_moments(&comps)?;
        mean.push(m);
        variance.push(v);
    }
    Ok(PredictiveDistribution {
        mean,
        variance,
        samples_used: draws.len(),
        source,
    })
}

/// Posterior predictive moments from `t` weight samples.
pub fn bnn_predict(bnn: &Bnn, x: &[f64], t: usize, rng: &mut Rng) -> Result<PredictiveDistribution> {
    Ok(bnn_sample(bnn, x, t, rng)?.0)
}

/// Like [`bnn_predict`] but also returns the per-draw heads.
pub fn bnn_sample(
    bnn: &Bnn,
    x: &[f64],
    t: usize,
    rng: &mut Rng,
) -> Result<(PredictiveDistribution, Vec<Vec<(f64, f64)>>)> {
    if t < 2 {
        return Err(Error::InvalidHyperparameter(format!(
            "need T ≥ 2 posterior draws, got {t}"
        )));
    }
    let draws = bnn_sample_heads(bnn, x, t, rng)?;
    Ok((mixture_of_draws(&draws, Method::Bnn)?, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn kl_hand_values() {
        assert!((kl_gaussian(0.0, 1.0, 1.0)).abs() < 1e-15);
        assert!((kl_gaussian(1.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        // q = N(0, 4): σ_q = 2
        assert!((kl_gaussian(0.0, 2.0, 1.0) - 0.5 * (4.0 - 1.0 - 4f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn closed_form_kl_rejects_mixture_prior() {
        let bnn = Bnn::new(
            2,
            &LayerSpec::stack(&[3, 2], Activation::Tanh),
            PriorSpec::ScaleMixture {
                pi: 0.5,
                sigma1: 1.0,
                sigma2: 0.1,
            },
            &mut rng::seeded(0),
        )
        .unwrap();
        assert!(kl_gaussians(bnn.posterior(), bnn.prior()).is_err());
    }

    #[test]
    fn zero_noise_gives_means() {
        let bnn = Bnn::new(
            2,
            &LayerSpec::stack(&[3, 2], Activation::Relu),
            PriorSpec::default(),
            &mut rng::seeded(1),
        )
        .unwrap();
        assert_eq!(bnn.weights_for(&bnn.zero_noise()), bnn.posterior().mu);
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(PriorSpec::ScaleMixture {
            pi: 1.0,
            sigma1: 1.0,
            sigma2: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn mixture_prior_gradient_matches_difference() {
        let p = PriorSpec::ScaleMixture {
            pi: 0.3,
            sigma1: 1.5,
            sigma2: 0.2,
        };
        for w in [-2.0, -0.3, 0.0, 0.1, 0.9] {
            let h = 1e-6;
            let fd = (p.log_density(w + h) - p.log_density(w - h)) / (2.0 * h);
            assert!((fd - p.log_density_grad(w)).abs() < 1e-6, "w={w}");
        }
    }

    #[test]
    fn predict_needs_two_draws() {
        let bnn = Bnn::new(
            1,
            &LayerSpec::stack(&[3, 2], Activation::Tanh),
            PriorSpec::default(),
            &mut rng::seeded(1),
        )
        .unwrap();
        assert!(matches!(
            bnn_predict(&bnn, &[0.0], 1, &mut rng::seeded(0)),
            Err(Error::InvalidHyperparameter(_))
        ));
    }
}
