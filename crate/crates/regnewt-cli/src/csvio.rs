//! CSV emission and re-validation. Floats are serialized at 17 significant
//! digits so re-parsing reproduces the in-memory values exactly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use regnewt::solver::{IterationRecord, RunResult, RunStatus};

/// 17 significant digits: enough to round-trip any finite f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> anyhow::Result<f64> {
    s.parse::<f64>().with_context(|| format!("bad float field {s:?}"))
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// File name for a single run's per-iteration table.
pub fn run_file_name(delta: f64, seed: u64) -> String {
    format!("run_delta{delta:e}_seed{seed}.csv")
}

/// Writes the per-iteration table: k, alpha, residual, error, stability.
pub fn write_run_csv(path: &Path, records: &[IterationRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["k", "alpha", "residual_norm", "error_norm", "stability_ratio"])?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            format_f64(r.alpha),
            format_f64(r.residual_norm),
            opt(r.error_norm),
            opt(r.stability_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Re-parses a per-iteration table.
pub fn read_run_csv(path: &Path) -> anyhow::Result<Vec<IterationRecord>> {
    let mut rd = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        if row.len() != 5 {
            bail!("expected 5 fields, got {}", row.len());
        }
        let parse_opt = |s: &str| -> anyhow::Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_f64(s)?))
            }
        };
        out.push(IterationRecord {
            k: row[0].parse().context("bad iteration index")?,
            alpha: parse_f64(&row[1])?,
            residual_norm: parse_f64(&row[2])?,
            error_norm: parse_opt(&row[3])?,
            stability_ratio: parse_opt(&row[4])?,
        });
    }
    Ok(out)
}

/// One row of the run summary table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub delta: f64,
    pub seed: u64,
    pub tau: f64,
    pub status: String,
    pub k_delta: Option<usize>,
    pub final_residual: f64,
    pub final_error: Option<f64>,
    pub run_file: String,
}

impl SummaryRow {
    pub fn from_result(delta: f64, seed: u64, tau: f64, result: &RunResult) -> Self {
        let last = result.records.last();
        SummaryRow {
            delta,
            seed,
            tau,
            status: result.status.as_str().to_string(),
            k_delta: result.k_delta,
            final_residual: last.map(|r| r.residual_norm).unwrap_or(f64::NAN),
            final_error: last.and_then(|r| r.error_norm),
            run_file: run_file_name(delta, seed),
        }
    }

    pub fn stopped(&self) -> bool {
        self.status == RunStatus::StoppedByDiscrepancy.as_str()
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record([
        "delta",
        "seed",
        "tau",
        "status",
        "k_delta",
        "final_residual",
        "final_error",
        "run_file",
    ])?;
    for r in rows {
        w.write_record([
            format_f64(r.delta),
            r.seed.to_string(),
            format_f64(r.tau),
            r.status.clone(),
            r.k_delta.map(|k| k.to_string()).unwrap_or_default(),
            format_f64(r.final_residual),
            opt(r.final_error),
            r.run_file.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> anyhow::Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        if row.len() != 8 {
            bail!("expected 8 fields, got {}", row.len());
        }
        out.push(SummaryRow {
            delta: parse_f64(&row[0])?,
            seed: row[1].parse().context("bad seed")?,
            tau: parse_f64(&row[2])?,
            status: row[3].to_string(),
            k_delta: if row[4].is_empty() {
                None
            } else {
                Some(row[4].parse().context("bad k_delta")?)
            },
            final_residual: parse_f64(&row[5])?,
            final_error: if row[6].is_empty() {
                None
            } else {
                Some(parse_f64(&row[6])?)
            },
            run_file: row[7].to_string(),
        })
    }
    Ok(out)
}

/// Recomputes the stopping-rule postcondition for every stopped run from the
/// emitted files alone: residual(k_delta) <= tau*delta < residual(j) for all
/// j < k_delta, with contiguous iteration indices.
pub fn validate_emitted_runs(dir: &Path) -> anyhow::Result<()> {
    let summary = read_summary_csv(&dir.join("summary.csv"))?;
    for row in &summary {
        let records = read_run_csv(&dir.join(&row.run_file))?;
        if records.is_empty() {
            bail!("{}: empty per-iteration table", row.run_file);
        }
        for (i, r) in records.iter().enumerate() {
            if r.k != i {
                bail!("{}: non-contiguous iteration index at row {i}", row.run_file);
            }
        }
        if !row.stopped() {
            continue;
        }
        let k = row
            .k_delta
            .with_context(|| format!("{}: stopped run without k_delta", row.run_file))?;
        if records.len() != k + 1 {
            bail!(
                "{}: stopped at k={k} but table has {} rows",
                row.run_file,
                records.len()
            );
        }
        let threshold = row.tau * row.delta;
        if records[k].residual_norm > threshold {
            bail!(
                "{}: residual at stopping index exceeds tau*delta ({} > {threshold})",
                row.run_file,
                records[k].residual_norm
            );
        }
        for r in &records[..k] {
            if r.residual_norm <= threshold {
                bail!(
                    "{}: rule already satisfied at j={} ({} <= {threshold})",
                    row.run_file,
                    r.k,
                    r.residual_norm
                );
            }
        }
    }
    Ok(())
}

/// One aggregated rate-study point.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub delta: f64,
    pub median_error: f64,
    pub transformed: f64,
    pub k_min: usize,
    pub k_max: usize,
}

pub fn write_rate_points_csv(path: &Path, points: &[RatePoint]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "median_error", "transformed_level", "k_delta_min", "k_delta_max"])?;
    for p in points {
        w.write_record([
            format_f64(p.delta),
            format_f64(p.median_error),
            format_f64(p.transformed),
            p.k_min.to_string(),
            p.k_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rate_fit_csv(
    path: &Path,
    kind: &str,
    nu_or_mu: f64,
    theoretical_exponent: f64,
    fitted_slope: f64,
    intercept: f64,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source_kind", "nu_or_mu", "theoretical_exponent", "fitted_slope", "intercept"])?;
    w.write_record([
        kind.to_string(),
        format_f64(nu_or_mu),
        format_f64(theoretical_exponent),
        format_f64(fitted_slope),
        format_f64(intercept),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
