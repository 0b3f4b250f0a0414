//! Training objectives: squared error, the dropout-regularized squared error used for
//! MC dropout, and the Gaussian negative log-likelihood used by distribution heads.
//!
//! A distribution head emits two raw numbers per response, `(mean, raw_variance)`. The
//! variance is `softplus(raw_variance) + VARIANCE_FLOOR`, so it can never reach zero and
//! the log term stays finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{Gradients, Mlp};

/// Lower bound added to every head variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// `½ ln 2π`, the constant part of the Gaussian NLL.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`], for positive arguments.
pub fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus_inv needs a positive argument");
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHeadOutput {
    pub mean: f64,
    pub raw_variance: f64,
    pub variance: f64,
}

impl GaussianHeadOutput {
    pub fn from_raw(mean: f64, raw_variance: f64) -> Self {
        Self {
            mean,
            raw_variance,
            variance: softplus(raw_variance) + VARIANCE_FLOOR,
        }
    }

    pub fn nll(&self, y: f64) -> f64 {
        let r = y - self.mean;
        0.5 * self.variance.ln() + r * r / (2.0 * self.variance) + HALF_LN_TWO_PI
    }

    /// `(∂nll/∂mean, ∂nll/∂raw_variance)`
    pub fn nll_gradient(&self, y: f64) -> (f64, f64) {
        let r = y - self.mean;
        let d_mean = -r / self.variance;
        let d_var = 0.5 / self.variance - r * r / (2.0 * self.variance * self.variance);
        (d_mean, d_var * sigmoid(self.raw_variance))
    }
}

/// Mean of squared residuals.
pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Shape("mse of empty vectors".into()));
    }
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / preds.len() as f64)
}

/// Squared error plus `λ Σ_l (p_D ‖W_l‖² + ‖b_l‖²)`.
pub fn mcd_loss(preds: &[f64], targets: &[f64], mlp: &Mlp, lambda: f64, p_drop: f64) -> Result<f64> {
    let reg = Regularization::mcd(lambda, p_drop)?;
    Ok(mse(preds, targets)? + reg.penalty(mlp))
}

/// Gaussian negative log-likelihood including the `½ ln 2π` constant.
pub fn gaussian_nll(y: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Domain(format!(
            "Gaussian NLL needs positive variance, got {variance}"
        )));
    }
    let r = y - mean;
    Ok(0.5 * variance.ln() + r * r / (2.0 * variance) + HALF_LN_TWO_PI)
}

/// Mean NLL over a batch of `(observation, head)` pairs.
pub fn mnll(batch: &[(f64, GaussianHeadOutput)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("MNLL of an empty batch".into()));
    }
    let mut sum = 0.0;
    for (y, head) in batch {
        sum += gaussian_nll(*y, head.mean, head.variance)?;
    }
    Ok(sum / batch.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Mse,
    Nll,
}

impl Objective {
    /// Network output width needed for `responses` scalar targets.
    pub fn output_width(self, responses: usize) -> usize {
        match self {
            Objective::Mse => responses,
            Objective::Nll => 2 * responses,
        }
    }

    pub fn responses(self, output_width: usize) -> usize {
        match self {
            Objective::Mse => output_width,
            Objective::Nll => output_width / 2,
        }
    }

    /// Data term averaged over rows, with its gradient with respect to the raw outputs.
    ///
    /// Rows of `outputs` are network outputs; rows of `targets` hold one value per response.
    /// Vector responses sum their per-response terms.
    pub fn batch_loss(self, outputs: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
        let n = outputs.rows();
        if n == 0 || n != targets.rows() {
            return Err(Error::Shape(format!(
                "{} output rows vs {} target rows",
                n,
                targets.rows()
            )));
        }
        if self.output_width(targets.cols()) != outputs.cols() {
            return Err(Error::Shape(format!(
                "{:?} objective: {} outputs cannot serve {} responses",
                self,
                outputs.cols(),
                targets.cols()
            )));
        }
        let inv_n = 1.0 / n as f64;
        let mut grad = Matrix::zeros(outputs.rows(), outputs.cols());
        let mut total = 0.0;
        match self {
            Objective::Mse => {
                for i in 0..n {
                    for k in 0..targets.cols() {
                        let r = outputs[(i, k)] - targets[(i, k)];
                        total += r * r;
                        grad[(i, k)] = 2.0 * r * inv_n;
                    }
                }
            }
            Objective::Nll => {
                for i in 0..n {
                    for k in 0..targets.cols() {
                        let head = GaussianHeadOutput::from_raw(outputs[(i, 2 * k)], outputs[(i, 2 * k + 1)]);
                        let y = targets[(i, k)];
                        total += head.nll(y);
                        let (dm, ds) = head.nll_gradient(y);
                        grad[(i, 2 * k)] = dm * inv_n;
                        grad[(i, 2 * k + 1)] = ds * inv_n;
                    }
                }
            }
        }
        Ok((total * inv_n, grad))
    }
}

/// `λ Σ_l (weight_factor ‖W_l‖² + ‖b_l‖²)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub lambda: f64,
    pub weight_factor: f64,
}

impl Regularization {
    pub fn none() -> Self {
        Self {
            lambda: 0.0,
            weight_factor: 1.0,
        }
    }

    pub fn l2(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "regularization λ must be finite and ≥ 0, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            weight_factor: 1.0,
        })
    }

    /// Dropout form: weights are scaled by the drop probability, biases are not.
    pub fn mcd(lambda: f64, p_drop: f64) -> Result<Self> {
        if !(p_drop > 0.0 && p_drop < 1.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "dropout ratio must lie in (0, 1), got {p_drop}"
            )));
        }
        Ok(Self {
            weight_factor: p_drop,
            ..Self::l2(lambda)?
        })
    }

    pub fn penalty(&self, mlp: &Mlp) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for (w, b) in mlp.weights().iter().zip(mlp.biases()) {
            s += self.weight_factor * w.squared_norm() + b.iter().map(|v| v * v).sum::<f64>();
        }
        self.lambda * s
    }

    pub fn add_gradient(&self, mlp: &Mlp, grads: &mut Gradients) {
        if self.lambda == 0.0 {
            return;
        }
        let cw = 2.0 * self.lambda * self.weight_factor;
        let cb = 2.0 * self.lambda;
        for (l, (w, b)) in mlp.weights().iter().zip(mlp.biases()).enumerate() {
            for (g, v) in grads.weights[l].as_mut_slice().iter_mut().zip(w.as_slice()) {
                *g += cw * v;
            }
            for (g, v) in grads.biases[l].iter_mut().zip(b) {
                *g += cb * v;
            }
        }
    }
}

/// Objective plus regularizer: the full training loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub objective: Objective,
    pub regularization: Regularization,
}

impl LossSpec {
    pub fn plain(objective: Objective) -> Self {
        Self {
            objective,
            regularization: Regularization::none(),
        }
    }
}
