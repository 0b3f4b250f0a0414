//! `pca`: reduce curve outputs to principal-component scores.

use uqsurro_core::pca::{fit_pca, PcaModel};
use uqsurro_core::Matrix;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::generate::load_generated;
use crate::layout::{self, fmt, RunLayout};

pub fn score_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("pc{i}")).collect()
}

pub fn cmd_pca(cfg: &RunConfig, force: bool) -> Result<PcaModel> {
    if !cfg.pca.enabled {
        return Err(HarnessError::Config("pca.enabled: PCA is disabled for this run".into()));
    }
    let layout = RunLayout::new(cfg.output_dir()?);
    let (data, _) = load_generated(cfg, &layout)?;
    if data.output_dim() < 2 {
        return Err(HarnessError::Config(format!(
            "pca.enabled: the dataset has {} output column(s), not a curve",
            data.output_dim()
        )));
    }
    // p × N: one column per simulation
    let a = data.outputs().transpose();
    let model = fit_pca(&a, cfg.pca.threshold).map_err(|e| HarnessError::core("PCA", e))?;
    let scores = model.project_columns(&a).map_err(|e| HarnessError::core("PCA", e))?;

    layout::prepare_output(&layout.pca_dir(), force)?;
    layout::save_json(&layout.pca_model(), &model)?;
    let variance: Vec<Vec<String>> = model
        .variance_table()
        .iter()
        .map(|r| {
            vec![
                r.pc_index.to_string(),
                fmt(r.variance),
                fmt(r.fraction),
                fmt(r.cumulative_fraction),
            ]
        })
        .collect();
    layout::write_csv(
        &layout.pca_variance(),
        &["pc_index", "variance", "fraction", "cumulative_fraction"],
        &variance,
    )?;
    write_scores(&layout, &scores)?;
    log::info!(
        "retained {} of {} components ({:.4} of the variance)",
        model.retained(),
        model.p(),
        model.explained_fraction()
    );
    Ok(model)
}

fn write_scores(layout: &RunLayout, scores: &Matrix) -> Result<()> {
    let names = score_names(scores.cols());
    let mut header = vec!["case_id"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..scores.rows())
        .map(|i| {
            std::iter::once(i.to_string())
                .chain(scores.row(i).iter().map(|&v| fmt(v)))
                .collect()
        })
        .collect();
    layout::write_csv(&layout.pca_scores(), &header, &rows)
}

/// The fitted model and the `N × p*` score matrix.
pub fn load_pca(layout: &RunLayout, n: usize) -> Result<(PcaModel, Matrix)> {
    layout::require_files("PCA-enabled stages", &[layout.pca_model(), layout.pca_scores()])?;
    let model: PcaModel = layout::load_json(&layout.pca_model())?;
    let path = layout.pca_scores();
    let (header, rows) = layout::read_csv(&path)?;
    let k = model.retained();
    if header.len() != k + 1 || rows.len() != n {
        return Err(HarnessError::Data(format!(
            "{}: expected {n} rows of {k} scores, found {} rows and {} columns",
            path.display(),
            rows.len(),
            header.len()
        )));
    }
    let mut m = Matrix::zeros(n, k);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..k {
            m.row_mut(i)[j] = layout::parse_f64(&row[j + 1], &path, i + 1, &header[j + 1])?;
        }
    }
    Ok((model, m))
}
