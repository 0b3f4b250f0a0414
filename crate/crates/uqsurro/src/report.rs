//! `report`: tidy tables over every method present in a run directory.

use std::path::PathBuf;

use uqsurro_core::Method;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::layout::{self, fmt, RunLayout};
use crate::uq::{read_predictions, summarize_all, UqSummary, PREDICTION_HEADER};

pub const METHODS: [Method; 3] = [Method::Mcd, Method::De, Method::Bnn];

/// Files written, in order.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = RunLayout::new(cfg.output_dir()?);
    let mut missing = Vec::new();
    for p in [layout.dataset(), layout.data_manifest()] {
        if !p.is_file() {
            missing.push(p);
        }
    }
    if cfg.pca.enabled && !layout.pca_variance().is_file() {
        missing.push(layout.pca_variance());
    }
    let mut methods = Vec::new();
    for m in METHODS {
        let started = m == cfg.method || layout.models_dir(m).exists() || layout.uq_dir(m).exists();
        if !started {
            continue;
        }
        let need = [layout.models_manifest(m), layout.predictions(m), layout.uq_summary(m)];
        let absent: Vec<PathBuf> = need.iter().filter(|p| !p.is_file()).cloned().collect();
        if absent.is_empty() {
            methods.push(m);
        }
        missing.extend(absent);
    }
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(HarnessError::Data(format!(
            "incomplete run in {}; missing:\n  {}",
            layout.root.display(),
            list.join("\n  ")
        )));
    }

    let out = layout.report_dir();
    let mut written = Vec::new();

    let mut error_bars = Vec::new();
    let mut summary_rows = Vec::new();
    let mut bands = Vec::new();
    let mut bands_header: Option<Vec<String>> = None;
    for &m in &methods {
        let rows = read_predictions(&layout.predictions(m))?;
        let stored: UqSummary = layout::load_json(&layout.uq_summary(m))?;
        let t = stored.uq_samples.map_or_else(String::new, |t| t.to_string());
        let members = stored.members.map_or_else(String::new, |k| k.to_string());
        for s in summarize_all(&rows) {
            summary_rows.push(vec![
                m.to_string(),
                s.response,
                s.n_cases.to_string(),
                fmt(s.rmse),
                fmt(s.mean_std),
                fmt(s.coverage68),
                fmt(s.coverage95),
                t.clone(),
                members.clone(),
            ]);
        }
        error_bars.extend(rows.iter().map(|r| r.to_record()));
        if layout.curve_bands(m).is_file() {
            let (header, rows) = layout::read_csv(&layout.curve_bands(m))?;
            bands_header.get_or_insert(header);
            bands.extend(rows.into_iter().map(|r| {
                let mut rec = vec![m.to_string()];
                rec.extend(r);
                rec
            }));
        }
    }

    let p = out.join("error_bars.csv");
    layout::write_csv(&p, &PREDICTION_HEADER, &error_bars)?;
    written.push(p);

    let p = out.join("summary.csv");
    layout::write_csv(
        &p,
        &[
            "method",
            "response",
            "n_cases",
            "rmse",
            "mean_std",
            "coverage68",
            "coverage95",
            "uq_samples",
            "members",
        ],
        &summary_rows,
    )?;
    written.push(p);

    if layout.pca_variance().is_file() {
        let (header, rows) = layout::read_csv(&layout.pca_variance())?;
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let p = out.join("variance_decay.csv");
        layout::write_csv(&p, &header, &rows)?;
        written.push(p);
    }

    if let Some(h) = bands_header {
        let mut header = vec!["method"];
        header.extend(h.iter().map(String::as_str));
        let p = out.join("curve_bands.csv");
        layout::write_csv(&p, &header, &bands)?;
        written.push(p);
    }
    log::info!("wrote {} report tables to {}", written.len(), out.display());
    Ok(written)
}
