//! PCA of curve-valued outputs and propagation of score uncertainty back to curves.
//!
//! Data matrices follow the responses-by-samples layout: `A` is `p × N`, one column per
//! simulated curve. Fitting centers the rows, takes the SVD `A_c = U Λ Vᵀ`, and keeps the
//! leading `p*` left singular vectors (as rows of `P*`) that reach the variance threshold.
//! Scores are `P* (a − u)`; reconstruction is `P*ᵀ b* + u`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::mcd::Moments;
use crate::rng::Rng;

/// Score samples drawn per test case when propagating to curves.
pub const DEFAULT_PROPAGATION_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel {
    /// Row means `u` (length `p`).
    #[serde(rename = "u")]
    mean: Vec<f64>,
    /// `P*`, `p* × p`, orthonormal rows.
    components: Matrix,
    /// All PC variances (length `p`), descending, sample-covariance scaled.
    pc_variances: Vec<f64>,
    explained_fraction: f64,
    threshold: f64,
}

impl<'de> Deserialize<'de> for PcaModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            u: Vec<f64>,
            components: Matrix,
            pc_variances: Vec<f64>,
            explained_fraction: f64,
            threshold: f64,
        }
        let r = Raw::deserialize(d)?;
        let p = r.u.len();
        if r.components.cols() != p || r.pc_variances.len() != p || r.components.rows() == 0 {
            return Err(serde::de::Error::custom(format!(
                "inconsistent PCA artifact: u has {p} entries, components are {:?}, {} variances",
                r.components.shape(),
                r.pc_variances.len()
            )));
        }
        Ok(PcaModel {
            mean: r.u,
            components: r.components,
            pc_variances: r.pc_variances,
            explained_fraction: r.explained_fraction,
            threshold: r.threshold,
        })
    }
}

/// One row of the variance-decay table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub pc_index: usize,
    pub variance: f64,
    pub fraction: f64,
    pub cumulative_fraction: f64,
}

/// Fit on a `p × N` matrix (columns are samples), keeping the fewest leading components
/// whose variance fraction reaches `threshold`. A threshold of exactly 1 keeps `min(p, N)`.
pub fn fit_pca(a: &Matrix, threshold: f64) -> Result<PcaModel> {
    let (p, n) = a.shape();
    if n < 2 {
        return Err(Error::DegenerateData(format!("PCA needs at least 2 samples, got {n}")));
    }
    if p == 0 {
        return Err(Error::Shape("PCA of a matrix with no rows".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "variance threshold must be in (0, 1], got {threshold}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Domain("non-finite entries in PCA data".into()));
    }
    let mean: Vec<f64> = (0..p).map(|i| a.row(i).iter().sum::<f64>() / n as f64).collect();
    let centered = nalgebra::DMatrix::from_fn(p, n, |i, j| a[(i, j)] - mean[i]);
    let scale = centered.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let svd = centered.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut pc_variances: Vec<f64> = order
        .iter()
        .map(|&k| svd.singular_values[k].powi(2) / (n - 1) as f64)
        .collect();
    pc_variances.resize(p, 0.0);
    let total: f64 = pc_variances.iter().sum();
    let tiny = (scale * f64::EPSILON).powi(2) * (p * n) as f64;
    if !(total > tiny) || scale == 0.0 {
        return Err(Error::DegenerateData(
            "all rows are constant; no variance to decompose".into(),
        ));
    }

    let available = order.len();
    let retained = if threshold >= 1.0 {
        available
    } else {
        let mut cum = 0.0;
        let mut k = available;
        for (i, v) in pc_variances.iter().take(available).enumerate() {
            cum += v / total;
            if cum >= threshold {
                k = i + 1;
                break;
            }
        }
        k
    };

    let mut components = Matrix::zeros(retained, p);
    for (r, &k) in order.iter().take(retained).enumerate() {
        let col = u.column(k);
        // sign convention: largest-magnitude entry positive (first one on ties)
        let mut lead = 0;
        for i in 1..p {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            components[(r, i)] = sign * col[i];
        }
    }
    let explained_fraction = pc_variances[..retained].iter().sum::<f64>() / total;
    Ok(PcaModel {
        mean,
        components,
        pc_variances,
        explained_fraction: explained_fraction.min(1.0),
        threshold,
    })
}

impl PcaModel {
    /// Original dimension `p`.
    pub fn p(&self) -> usize {
        self.mean.len()
    }

    /// Retained dimension `p*`.
    pub fn retained(&self) -> usize {
        self.components.rows()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn pc_variances(&self) -> &[f64] {
        &self.pc_variances
    }

    pub fn explained_fraction(&self) -> f64 {
        self.explained_fraction
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Fraction of total variance per PC (all `p` of them).
    pub fn explained_fractions(&self) -> Vec<f64> {
        let total: f64 = self.pc_variances.iter().sum();
        self.pc_variances.iter().map(|v| v / total).collect()
    }

    pub fn variance_table(&self) -> Vec<VarianceRow> {
        let mut cum = 0.0;
        self.explained_fractions()
            .into_iter()
            .zip(&self.pc_variances)
            .enumerate()
            .map(|(i, (f, &v))| {
                cum += f;
                VarianceRow {
                    pc_index: i + 1,
                    variance: v,
                    fraction: f,
                    cumulative_fraction: cum,
                }
            })
            .collect()
    }

    /// Scores `P* (a − u)`.
    pub fn project(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.p() {
            return Err(Error::Shape(format!(
                "curve has {} points, model expects {}",
                a.len(),
                self.p()
            )));
        }
        let centered: Vec<f64> = a.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok((0..self.retained())
            .map(|k| dot(self.components.row(k), &centered))
            .collect())
    }

    /// Curve `P*ᵀ b + u`.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.retained() {
            return Err(Error::Shape(format!(
                "{} scores for {} retained components",
                scores.len(),
                self.retained()
            )));
        }
        let mut out = self.mean.clone();
        for (k, &b) in scores.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.components.row(k)) {
                *o += b * c;
            }
        }
        Ok(out)
    }

    /// Scores for every column of a `p × N` matrix, as an `N × p*` matrix (one row per sample).
    pub fn project_columns(&self, a: &Matrix) -> Result<Matrix> {
        let rows = (0..a.cols())
            .map(|j| self.project(&a.column(j)))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }
}

/// Independent Gaussian for one PC score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Sample score vectors, reconstruct each, summarize per time point.
    MonteCarlo { samples: usize, keep_samples: bool },
    /// Linear propagation: variance at each point is `Σ_k P*[k,·]² σ_k²`.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

pub fn propagate_uncertainty(
    model: &PcaModel,
    scores: &[ScoreDistribution],
    mode: Propagation,
    rng: &mut Rng,
) -> Result<CurveBand> {
    if scores.len() != model.retained() {
        return Err(Error::Shape(format!(
            "{} score distributions for {} retained components",
            scores.len(),
            model.retained()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(s.variance >= 0.0) || !s.mean.is_finite()) {
        return Err(Error::Domain(format!("invalid score distribution {s:?}")));
    }
    let means: Vec<f64> = scores.iter().map(|s| s.mean).collect();
    match mode {
        Propagation::ClosedForm => {
            let mean = model.reconstruct(&means)?;
            let std = (0..model.p())
                .map(|i| {
                    scores
                        .iter()
                        .enumerate()
                        .map(|(k, s)| model.components[(k, i)].powi(2) * s.variance)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            Ok(CurveBand {
                mean,
                std,
                samples: None,
            })
        }
        Propagation::MonteCarlo { samples, keep_samples } => {
            if samples < 2 {
                return Err(Error::InvalidHyperparameter(format!(
                    "need at least 2 propagation samples, got {samples}"
                )));
            }
            let sds: Vec<f64> = scores.iter().map(|s| s.variance.sqrt()).collect();
            let mut acc = Moments::new(model.p());
            let mut kept = keep_samples.then(|| Vec::with_capacity(samples));
            let mut b = vec![0.0; scores.len()];
            for _ in 0..samples {
                for (k, v) in b.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = means[k] + sds[k] * z;
                }
                let curve = model.reconstruct(&b)?;
                acc.push(&curve);
                if let Some(k) = kept.as_mut() {
                    k.push(curve);
                }
            }
            Ok(CurveBand {
                mean: acc.mean().to_vec(),
                std: acc.variance().into_iter().map(f64::sqrt).collect(),
                samples: kept,
            })
        }
    }
}
