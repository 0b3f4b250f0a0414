//! Datasets, experiment designs and the synthetic simulator stand-ins.
//!
//! Two synthetic response families stand in for expensive simulator output:
//!
//! * [`synth_fgr`] — a fission-gas-release-like time series (percent released) driven by
//!   five scale factors: a logistic baseline release plus a burst near `t = 50 h`.
//! * [`synth_voidfraction`] — four axial void fractions (percent) driven by four boundary
//!   conditions and five closure-model multipliers. The lowest elevation sits at exactly
//!   `0.0` over a large part of the input space, which makes it a many-to-one mapping.
//!
//! Both are pure, versioned formulas ([`FGR_ORACLE_VERSION`], [`VOID_ORACLE_VERSION`]); they
//! are ground truth for tests, not physical models.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution as _, Normal as NormalDist};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

pub const FGR_ORACLE_VERSION: &str = "fgr-1";
pub const VOID_ORACLE_VERSION: &str = "void-1";
pub const GAP_ORACLE_VERSION: &str = "gap-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let s = Self { train, val, test };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Split(format!("{name} fraction must lie in (0, 1), got {f}")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes: floors for val and test, remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        (n.saturating_sub(val + test), val, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_names: Vec<String>,
    output_names: Vec<String>,
    inputs: Matrix,
    outputs: Matrix,
    input_bounds: Vec<(f64, f64)>,
    partition: Vec<Partition>,
}

fn column_bounds(m: &Matrix) -> Vec<(f64, f64)> {
    (0..m.cols())
        .map(|j| {
            m.column(j)
                .into_iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

impl Dataset {
    /// All rows start in the training partition; bounds default to observed min/max.
    pub fn new(input_names: Vec<String>, output_names: Vec<String>, inputs: Matrix, outputs: Matrix) -> Result<Self> {
        if inputs.rows() != outputs.rows() {
            return Err(Error::Shape(format!(
                "{} input rows vs {} output rows",
                inputs.rows(),
                outputs.rows()
            )));
        }
        if input_names.len() != inputs.cols() || output_names.len() != outputs.cols() {
            return Err(Error::Shape("column names do not match matrix widths".into()));
        }
        let mut seen = HashSet::new();
        for name in input_names.iter().chain(&output_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{name}`")));
            }
        }
        if !inputs.is_finite() || !outputs.is_finite() {
            return Err(Error::Domain("dataset contains NaN or infinite values".into()));
        }
        Ok(Self {
            input_bounds: column_bounds(&inputs),
            partition: vec![Partition::Train; inputs.rows()],
            input_names,
            output_names,
            inputs,
            outputs,
        })
    }

    pub fn with_input_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.inputs.cols() {
            return Err(Error::Shape("one bound pair per input column".into()));
        }
        self.input_bounds = bounds;
        Ok(self)
    }

    pub fn with_partition(mut self, partition: Vec<Partition>) -> Result<Self> {
        if partition.len() != self.n() {
            return Err(Error::Shape(format!(
                "{} partition tags for {} rows",
                partition.len(),
                self.n()
            )));
        }
        self.partition = partition;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.inputs.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.cols()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn outputs(&self) -> &Matrix {
        &self.outputs
    }

    pub fn input_bounds(&self) -> &[(f64, f64)] {
        &self.input_bounds
    }

    pub fn partition(&self) -> &[Partition] {
        &self.partition
    }

    pub fn indices(&self, part: Partition) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.partition[i] == part).collect()
    }

    pub fn partition_xy(&self, part: Partition) -> (Matrix, Matrix) {
        let idx = self.indices(part);
        (self.inputs.select_rows(&idx), self.outputs.select_rows(&idx))
    }

    /// Same rows and partition, keeping only the named output columns.
    pub fn select_outputs(&self, names: &[&str]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|name| {
                self.output_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Schema(format!("no output column `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            output_names: idx.iter().map(|&j| self.output_names[j].clone()).collect(),
            outputs: self.outputs.select_cols(&idx),
            ..self.clone()
        })
    }

    /// Same inputs and partition with a new output block.
    pub fn replace_outputs(&self, names: Vec<String>, outputs: Matrix) -> Result<Dataset> {
        Dataset::new(self.input_names.clone(), names, self.inputs.clone(), outputs)?
            .with_input_bounds(self.input_bounds.clone())?
            .with_partition(self.partition.clone())
    }

    pub fn replace_inputs(&self, inputs: Matrix) -> Result<Dataset> {
        Dataset::new(
            self.input_names.clone(),
            self.output_names.clone(),
            inputs,
            self.outputs.clone(),
        )?
        .with_partition(self.partition.clone())
    }

    /// Per-column `(min, max)` of the inputs and outputs, in header order.
    pub fn column_ranges(&self) -> Vec<(String, f64, f64)> {
        self.input_names
            .iter()
            .chain(&self.output_names)
            .cloned()
            .zip(
                column_bounds(&self.inputs)
                    .into_iter()
                    .chain(column_bounds(&self.outputs)),
            )
            .map(|(n, (lo, hi))| (n, lo, hi))
            .collect()
    }
}

/// Shuffle rows, then assign contiguous train/val/test blocks.
pub fn split(data: &Dataset, fractions: SplitFractions, rng: &mut Rng) -> Result<Dataset> {
    fractions.validate()?;
    let (n_train, n_val, n_test) = fractions.sizes(data.n());
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Split(format!(
            "{} rows at {}/{}/{} leaves an empty partition ({n_train}/{n_val}/{n_test})",
            data.n(),
            fractions.train,
            fractions.val,
            fractions.test
        )));
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(rng);
    let mut partition = vec![Partition::Train; data.n()];
    for &i in &order[n_train..n_train + n_val] {
        partition[i] = Partition::Val;
    }
    for &i in &order[n_train + n_val..] {
        partition[i] = Partition::Test;
    }
    data.clone().with_partition(partition)
}

/// Per-column affine map `x ↦ (x − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Affine {
    pub fn identity(cols: usize) -> Self {
        Self {
            shift: vec![0.0; cols],
            scale: vec![1.0; cols],
        }
    }

    /// Mean and population standard deviation of each column; zero-spread columns get
    /// unit scale and are returned in the flagged list.
    pub fn fit(m: &Matrix) -> (Self, Vec<usize>) {
        let n = m.rows() as f64;
        let mut shift = Vec::with_capacity(m.cols());
        let mut scale = Vec::with_capacity(m.cols());
        let mut flagged = Vec::new();
        for j in 0..m.cols() {
            let col = m.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            shift.push(mean);
            if sd > 1e-12 * mean.abs().max(1.0) {
                scale.push(sd);
            } else {
                scale.push(1.0);
                flagged.push(j);
            }
        }
        (Self { shift, scale }, flagged)
    }

    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.shift[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn inverse(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.shift[j];
            }
        }
        out
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.shift[j]) / self.scale[j])
            .collect()
    }

    pub fn inverse_value(&self, col: usize, v: f64) -> f64 {
        v * self.scale[col] + self.shift[col]
    }
}

/// Standardization fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub inputs: Affine,
    pub outputs: Option<Affine>,
    /// Input columns with zero training spread (left at unit scale).
    #[serde(default)]
    pub flagged_inputs: Vec<usize>,
}

impl Scaler {
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let x = self.inputs.transform(data.inputs());
        let y = match &self.outputs {
            Some(a) => a.transform(data.outputs()),
            None => data.outputs().clone(),
        };
        Dataset::new(data.input_names().to_vec(), data.output_names().to_vec(), x, y)?
            .with_partition(data.partition().to_vec())
    }

    pub fn inverse(&self, data: &Dataset) -> Result<Dataset> {
        let x = self.inputs.inverse(data.inputs());
        let y = match &self.outputs {
            Some(a) => a.inverse(data.outputs()),
            None => data.outputs().clone(),
        };
        Dataset::new(data.input_names().to_vec(), data.output_names().to_vec(), x, y)?
            .with_input_bounds(data.input_bounds().to_vec())?
            .with_partition(data.partition().to_vec())
    }
}

/// Zero-mean, unit-variance inputs (and outputs when `outputs` is set), using training
/// partition statistics only.
pub fn standardize(data: &Dataset, outputs: bool) -> Result<(Dataset, Scaler)> {
    let (x, y) = data.partition_xy(Partition::Train);
    if x.rows() == 0 {
        return Err(Error::State("cannot standardize without training rows".into()));
    }
    let (inputs, flagged_inputs) = Affine::fit(&x);
    for &j in &flagged_inputs {
        log::warn!(
            "input column `{}` is constant on the training partition; left at unit scale",
            data.input_names()[j]
        );
    }
    let outputs = outputs.then(|| Affine::fit(&y).0);
    let scaler = Scaler {
        inputs,
        outputs,
        flagged_inputs,
    };
    Ok((scaler.transform(data)?, scaler))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputDistribution {
    Uniform,
    /// Uniform in `log10`.
    LogUniform,
    /// Normal truncated to the parameter bounds.
    Normal {
        mean: f64,
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub distribution: InputDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<f64>,
}

impl InputParameter {
    pub fn new(name: &str, lower: f64, upper: f64, distribution: InputDistribution) -> Self {
        Self {
            name: name.to_owned(),
            lower,
            upper,
            distribution,
            nominal: None,
        }
    }

    pub fn nominal(mut self, value: f64) -> Self {
        self.nominal = Some(value);
        self
    }

    /// Map a unit-interval coordinate to this parameter's distribution.
    pub fn map_unit(&self, u: f64) -> f64 {
        let (lo, hi) = (self.lower, self.upper);
        let v = match self.distribution {
            InputDistribution::Uniform => lo + u * (hi - lo),
            InputDistribution::LogUniform => {
                let (a, b) = (lo.log10(), hi.log10());
                10f64.powf(a + u * (b - a))
            }
            InputDistribution::Normal { mean, std } => {
                let n = Normal::new(mean, std).expect("validated normal parameters");
                let (ca, cb) = (n.cdf(lo), n.cdf(hi));
                n.inverse_cdf(ca + u * (cb - ca))
            }
        };
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputSchema {
    pub parameters: Vec<InputParameter>,
}

impl InputSchema {
    pub fn new(parameters: Vec<InputParameter>) -> Result<Self> {
        let s = Self { parameters };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.parameters.iter().map(|p| (p.lower, p.upper)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameters.is_empty() {
            return Err(Error::Schema("schema has no parameters".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Schema(format!("duplicate parameter `{}`", p.name)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::Schema(format!(
                    "parameter `{}`: need finite lower < upper, got [{}, {}]",
                    p.name, p.lower, p.upper
                )));
            }
            match p.distribution {
                InputDistribution::LogUniform if p.lower <= 0.0 => {
                    return Err(Error::Schema(format!(
                        "parameter `{}`: log-uniform needs a positive lower bound",
                        p.name
                    )))
                }
                InputDistribution::Normal { mean, std } if !(std > 0.0 && mean.is_finite()) => {
                    return Err(Error::Schema(format!(
                        "parameter `{}`: normal needs finite mean and std > 0",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn check_within(&self, design: &Matrix) -> Result<()> {
        if design.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "design has {} columns, schema has {}",
                design.cols(),
                self.dim()
            )));
        }
        for i in 0..design.rows() {
            for (j, p) in self.parameters.iter().enumerate() {
                let v = design[(i, j)];
                if !(v >= p.lower && v <= p.upper) {
                    return Err(Error::Domain(format!(
                        "row {i}: `{}` = {v} outside [{}, {}]",
                        p.name, p.lower, p.upper
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn map_unit_design(&self, unit: &Matrix) -> Matrix {
        let mut out = unit.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.parameters[j].map_unit(*v);
            }
        }
        out
    }
}

/// Outcome of a maximin search on the unit hypercube.
#[derive(Debug, Clone)]
pub struct MaximinDesign {
    /// Selected design on `[0, 1)^d`, before mapping through the schema.
    pub unit: Matrix,
    pub min_distance: f64,
    pub first_candidate_min_distance: f64,
}

/// One random Latin hypercube: each column has exactly one point per stratum `[k/n, (k+1)/n)`.
pub fn random_lhs(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &k) in perm.iter().enumerate() {
            let jitter: f64 = rng.random();
            // keep the point strictly inside its stratum even if rounding pushes it up
            m[(i, j)] = ((k as f64 + jitter) / n as f64).min((k as f64 + 1.0) / n as f64 - f64::EPSILON);
        }
    }
    m
}

/// Smallest pairwise Euclidean distance between rows (`+∞` for fewer than two rows).
pub fn min_pairwise_distance(m: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..m.rows() {
        for k in i + 1..m.rows() {
            let d2: f64 = m.row(i).iter().zip(m.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Best of `iterations` random Latin hypercubes by minimum pairwise distance.
pub fn maximin_lhs_unit(n: usize, d: usize, iterations: usize, rng: &mut Rng) -> Result<MaximinDesign> {
    if n == 0 || d == 0 || iterations == 0 {
        return Err(Error::InvalidHyperparameter(format!(
            "maximin LHS needs n, d, iterations ≥ 1 (got {n}, {d}, {iterations})"
        )));
    }
    let mut best = random_lhs(n, d, rng);
    let first = min_pairwise_distance(&best);
    let mut best_dist = first;
    for _ in 1..iterations {
        let cand = random_lhs(n, d, rng);
        let dist = min_pairwise_distance(&cand);
        if dist > best_dist {
            best = cand;
            best_dist = dist;
        }
    }
    Ok(MaximinDesign {
        unit: best,
        min_distance: best_dist,
        first_candidate_min_distance: first,
    })
}

/// Maximin LHS mapped through the schema's bounds and distributions (`n × d`).
pub fn maximin_lhs(n: usize, schema: &InputSchema, iterations: usize, rng: &mut Rng) -> Result<Matrix> {
    schema.validate()?;
    let design = maximin_lhs_unit(n, schema.dim(), iterations, rng)?;
    Ok(schema.map_unit_design(&design.unit))
}

/// Read a CSV with a header row, picking the named input and output columns.
pub fn load_dataset(path: &Path, input_names: &[&str], output_names: &[&str]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                row: 0,
                column: name.to_owned(),
                message: "column missing from header".into(),
            })
    };
    let in_idx = input_names.iter().map(|n| locate(n)).collect::<Result<Vec<_>>>()?;
    let out_idx = output_names.iter().map(|n| locate(n)).collect::<Result<Vec<_>>>()?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (cols, names, sink) in [(&in_idx, input_names, &mut x), (&out_idx, output_names, &mut y)] {
            for (&c, name) in cols.iter().zip(names) {
                let cell = record.get(c).unwrap_or("").trim();
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: (*name).to_owned(),
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: (*name).to_owned(),
                        message: format!("non-finite value `{cell}`"),
                    });
                }
                sink.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "file has no data rows".into(),
        });
    }
    let data = Dataset::new(
        input_names.iter().map(|s| (*s).to_owned()).collect(),
        output_names.iter().map(|s| (*s).to_owned()).collect(),
        Matrix::from_vec(rows, input_names.len(), x)?,
        Matrix::from_vec(rows, output_names.len(), y)?,
    )?;
    log::info!("loaded {} rows from {}", data.n(), path.display());
    for (name, lo, hi) in data.column_ranges() {
        log::debug!("  {name}: [{lo}, {hi}]");
    }
    Ok(data)
}

/// Header row, then one row per sample: inputs followed by outputs.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(data.input_names().iter().chain(data.output_names()))?;
    for i in 0..data.n() {
        w.write_record(
            data.inputs()
                .row(i)
                .iter()
                .chain(data.outputs().row(i))
                .map(|v| v.to_string()),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    crate::artifact::write_atomic(path, &bytes)
}

// ---------------------------------------------------------------------------
// Fission-gas-release stand-in
// ---------------------------------------------------------------------------

/// Five scale factors: two truncated normals, three log-uniform over `[0.1, 10]`.
pub fn fgr_schema() -> InputSchema {
    use InputDistribution::*;
    InputSchema::new(vec![
        InputParameter::new("temperature_scalef", 0.95, 1.05, Normal { mean: 1.0, std: 0.025 }).nominal(1.0),
        InputParameter::new("grainradius_scalef", 0.4, 1.6, Normal { mean: 1.0, std: 0.3 }).nominal(1.0),
        InputParameter::new("igdiffcoeff_scalef", 0.1, 10.0, LogUniform).nominal(1.0),
        InputParameter::new("resolutionp_scalef", 0.1, 10.0, LogUniform).nominal(1.0),
        InputParameter::new("gbdiffcoeff_scalef", 0.1, 10.0, LogUniform).nominal(1.0),
    ])
    .expect("static schema is valid")
}

/// 100 time points (hours): 85 evenly spaced over `[0, 100]` and 15 more packed around the
/// burst at 50 h.
pub fn fgr_time_grid() -> Vec<f64> {
    let mut t: Vec<f64> = (0..85).map(|i| i as f64 * 100.0 / 84.0).collect();
    t.extend((0..15).map(|k| 48.05 + 0.3 * k as f64));
    t.sort_by(f64::total_cmp);
    t
}

fn logistic(x: f64) -> f64 {
    crate::objectives::sigmoid(x)
}

/// One FGR curve (percent) for one design row.
///
/// ```text
/// s  = log10(igdiff / resolution)        effective intra-granular diffusion
/// g  = log10(gbdiff)
/// κ  = exp(12 (T − 1)) · 10^(0.35 s) / a²
/// A  = 40 (1 − exp(−0.5 κ))              baseline amplitude
/// tc = 30 − 60 (T − 1),  w = 6           baseline onset and width
/// B  = 10 (1 + 0.9 tanh g) (0.5 + A/80)  burst amplitude
/// FGR(t) = clamp(A·σ((t − tc)/w) + B·σ((t − 50)/0.4), 0, 100)
/// ```
///
/// Depends on the diffusion and resolution factors only through their ratio.
pub fn fgr_curve(row: &[f64], times: &[f64]) -> Vec<f64> {
    let (temp, radius, igdiff, resolution, gbdiff) = (row[0], row[1], row[2], row[3], row[4]);
    let s = (igdiff / resolution).log10();
    let g = gbdiff.log10();
    let kappa = (12.0 * (temp - 1.0)).exp() * 10f64.powf(0.35 * s) / (radius * radius);
    let amp = 40.0 * (1.0 - (-0.5 * kappa).exp());
    let onset = 30.0 - 60.0 * (temp - 1.0);
    let burst = 10.0 * (1.0 + 0.9 * g.tanh()) * (0.5 + amp / 80.0);
    times
        .iter()
        .map(|&t| {
            let v = amp * logistic((t - onset) / 6.0) + burst * logistic((t - 50.0) / 0.4);
            v.clamp(0.0, 100.0)
        })
        .collect()
}

/// Curves for every design row (`n × p`).
pub fn synth_fgr(design: &Matrix, times: &[f64]) -> Result<Matrix> {
    fgr_schema().check_within(design)?;
    let rows: Vec<Vec<f64>> = (0..design.rows()).map(|i| fgr_curve(design.row(i), times)).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, times.len()));
    }
    Matrix::from_rows(&rows)
}

pub fn fgr_output_names(times: &[f64]) -> Vec<String> {
    (0..times.len()).map(|i| format!("fgr_t{i:03}")).collect()
}

// ---------------------------------------------------------------------------
// Void-fraction stand-in
// ---------------------------------------------------------------------------

pub const VOID_OUTPUTS: [&str; 4] = ["VoidF1", "VoidF2", "VoidF3", "VoidF4"];

/// Boundary conditions of the test cases (pressure MPa, flow t/h, power MW, inlet °C).
pub fn void_condition_schema() -> InputSchema {
    use InputDistribution::Uniform;
    InputSchema::new(vec![
        InputParameter::new("pressure", 5.5, 8.7, Uniform),
        InputParameter::new("flow_rate", 10.0, 70.0, Uniform),
        InputParameter::new("power", 0.5, 7.5, Uniform),
        InputParameter::new("inlet_temperature", 220.0, 290.0, Uniform),
    ])
    .expect("static schema is valid")
}

/// Closure-model multipliers, uniform on `(0, 5)` with nominal 1.0.
pub fn void_multiplier_schema() -> InputSchema {
    use InputDistribution::Uniform;
    InputSchema::new(
        ["P1008", "P1012", "P1022", "P1028", "P1029"]
            .iter()
            .map(|n| InputParameter::new(n, 0.0, 5.0, Uniform).nominal(1.0))
            .collect(),
    )
    .expect("static schema is valid")
}

/// All nine columns: boundary conditions then multipliers.
pub fn void_schema() -> InputSchema {
    let mut p = void_condition_schema().parameters;
    p.extend(void_multiplier_schema().parameters);
    InputSchema::new(p).expect("static schema is valid")
}

/// Relative heights of the four measurement elevations along the heated length.
const VOID_ELEVATIONS: [f64; 4] = [0.184, 0.460, 0.736, 1.0];

/// Four void fractions (percent) for one nine-column row.
///
/// ```text
/// Tsat = 200 + 12 p,  ΔT = max(Tsat − Tin, 0),  ṁ = G / 3.6,  h_fg = 2 − 0.08 p
/// shift = 0.01 (√P1012 − 1) − 0.004 (P1008 − 1)
/// q_k = clamp((Q f_k − 0.0055 ΔT ṁ) / (ṁ h_fg) + shift, 0, 1)
/// r = 0.0075 p,  C0 = 1.1 + 0.03 (P1028 − 1) + 0.015 (P1029 − 1),  δ = 0.02 + 0.004 P1022
/// α_k = 100 q_k / (q_k (C0 − r) + r + δ)
/// ```
///
/// `α` is increasing in `q` and `q` in the elevation, so outputs are ordered and the
/// lowest one is exactly zero whenever its quality clamps at zero.
pub fn void_fractions(row: &[f64]) -> [f64; 4] {
    let (p, flow, power, t_in) = (row[0], row[1], row[2], row[3]);
    let (p1008, p1012, p1022, p1028, p1029) = (row[4], row[5], row[6], row[7], row[8]);
    let t_sat = 200.0 + 12.0 * p;
    let subcool = (t_sat - t_in).max(0.0);
    let mdot = flow / 3.6;
    let h_fg = 2.0 - 0.08 * p;
    let shift = 0.01 * (p1012.sqrt() - 1.0) - 0.004 * (p1008 - 1.0);
    let sub_power = 0.0055 * subcool * mdot;
    let r = 0.0075 * p;
    let c0 = 1.1 + 0.03 * (p1028 - 1.0) + 0.015 * (p1029 - 1.0);
    let delta = 0.02 + 0.004 * p1022;
    VOID_ELEVATIONS.map(|f| {
        let q = ((power * f - sub_power) / (mdot * h_fg) + shift).clamp(0.0, 1.0);
        100.0 * q / (q * (c0 - r) + r + delta)
    })
}

pub fn synth_voidfraction(design: &Matrix) -> Result<Matrix> {
    void_schema().check_within(design)?;
    let mut out = Matrix::zeros(design.rows(), 4);
    for i in 0..design.rows() {
        out.row_mut(i).copy_from_slice(&void_fractions(design.row(i)));
    }
    Ok(out)
}

/// Test-case design: `cases` boundary conditions, each crossed with `per_case` multiplier
/// samples (both maximin LHS). Rows are grouped by case.
pub fn void_design(cases: usize, per_case: usize, iterations: usize, rng: &mut Rng) -> Result<Matrix> {
    let conditions = maximin_lhs(cases, &void_condition_schema(), iterations, rng)?;
    let multipliers = void_multiplier_schema();
    let mut rows = Vec::with_capacity(cases * per_case);
    for c in 0..cases {
        let m = maximin_lhs(per_case, &multipliers, iterations, rng)?;
        for s in 0..per_case {
            let mut row = conditions.row(c).to_vec();
            row.extend_from_slice(m.row(s));
            rows.push(row);
        }
    }
    Matrix::from_rows(&rows)
}

// ---------------------------------------------------------------------------
// One-dimensional problems
// ---------------------------------------------------------------------------

/// Half-width of the held-out interval in the gap problem.
pub const GAP_HALF_WIDTH: f64 = 0.4;

pub fn gap_function(x: f64) -> f64 {
    (3.0 * x).sin()
}

/// `y = sin(3x) + ε` with `x` on `[−1, −0.4] ∪ [0.4, 1]` (uniform) and `ε ~ N(0, noise²)`.
/// No training point falls in the gap `(−0.4, 0.4)`.
pub fn gap_problem(n: usize, noise_std: f64, rng: &mut Rng) -> Result<Dataset> {
    let noise = NormalDist::new(0.0, noise_std).map_err(|e| Error::InvalidHyperparameter(format!("noise std: {e}")))?;
    let span = 1.0 - GAP_HALF_WIDTH;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(-span..span);
        let xi = if u < 0.0 {
            u - GAP_HALF_WIDTH
        } else {
            u + GAP_HALF_WIDTH
        };
        x.push(xi);
        y.push(gap_function(xi) + noise.sample(rng));
    }
    Dataset::new(
        vec!["x".into()],
        vec!["y".into()],
        Matrix::from_vec(n, 1, x)?,
        Matrix::from_vec(n, 1, y)?,
    )?
    .with_input_bounds(vec![(-1.0, 1.0)])
}

/// Evenly spaced points inside the gap and across the training support.
pub fn gap_eval_grids(points: usize) -> (Vec<f64>, Vec<f64>) {
    let h = GAP_HALF_WIDTH;
    let gap = (0..points)
        .map(|i| -h + 2.0 * h * (i as f64 + 0.5) / points as f64)
        .collect();
    let span = 1.0 - h;
    let support = (0..points)
        .map(|i| {
            let u = -span + 2.0 * span * (i as f64 + 0.5) / points as f64;
            if u < 0.0 {
                u - h
            } else {
                u + h
            }
        })
        .collect();
    (gap, support)
}

/// `y = 2x` on an even grid over `[−1, 1]`.
pub fn linear_problem(n: usize) -> Result<Dataset> {
    let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n.max(2) - 1) as f64).collect();
    let y = x.iter().map(|v| 2.0 * v).collect();
    Dataset::new(
        vec!["x".into()],
        vec!["y".into()],
        Matrix::from_vec(n, 1, x)?,
        Matrix::from_vec(n, 1, y)?,
    )
}
