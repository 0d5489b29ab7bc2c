//! Subcommand drivers: single runs, rate studies and assumption
//! verification, with CSV/SVG emission and post-hoc re-validation of the
//! stopping rule from the emitted files.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use regnewt::filters::FilterFamily;
use regnewt::problems::{
    construct_initial_guess, diagonal_problem, elliptic_problem, make_noisy, rescale_problem,
    NoiseSpec, NonlinearProblem, SourceKind,
};
use regnewt::schedule::AlphaSchedule;
use regnewt::solver::{
    run_discrepancy, run_discrepancy_with_stability, RunResult, RunStatus, SolverConfig,
};
use regnewt::space::Vector;
use regnewt::verify as rv;

use crate::config::{ExperimentConfig, ProblemConfig, SourceConfig, VerifyConfig};
use crate::csvio;
use crate::svg;

/// Command-line overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed_override: Option<u64>,
    pub lardy_zero_based: bool,
}

pub struct BuiltExperiment {
    pub problem: NonlinearProblem,
    pub family: FilterFamily,
    pub schedule: AlphaSchedule,
    pub x0: Vector,
    pub y: Vector,
    pub scale_factor: f64,
    pub omega_norm: Option<f64>,
    pub source_kind: Option<SourceKind>,
}

fn build_problem(cfg: &ProblemConfig) -> anyhow::Result<NonlinearProblem> {
    match cfg {
        ProblemConfig::Diagonal {
            dim,
            sigma_scale,
            sigma_decay,
            rho,
            x_true,
        } => {
            let sigma: Vec<f64> = (1..=*dim)
                .map(|i| sigma_scale * (i as f64).powf(-sigma_decay))
                .collect();
            let p = diagonal_problem(&sigma, *rho)?;
            let xt = x_true.build(*dim, p.weights_x())?;
            Ok(p.with_solution(xt)?)
        }
        ProblemConfig::Elliptic {
            grid_size,
            g0,
            g1,
            rho,
            forcing,
            coefficient,
        } => {
            let weights = cfg.weights_x()?;
            let f = forcing.build(*grid_size, &weights)?;
            let c = coefficient.build(*grid_size, &weights)?;
            Ok(elliptic_problem(*grid_size, &f, *g0, *g1, &c, *rho)?)
        }
    }
}

/// Deterministic in-ball sample points for the rescaling norm estimate.
fn scaling_samples(problem: &NonlinearProblem, count: usize) -> anyhow::Result<Vec<Vector>> {
    let xt = problem
        .x_true()
        .ok_or_else(|| anyhow!("rescaling needs a problem with x_true"))?;
    let mut points = vec![xt.clone()];
    for j in 0..count.saturating_sub(1) {
        let dir = Vector::new(
            (0..problem.dim_x())
                .map(|i| (((j + 1) * (i + 1)) as f64).sin())
                .collect(),
            xt.weights().clone(),
        )?;
        let n = dir.norm().max(1e-300);
        points.push(xt.axpy(0.2 * problem.rho() / n, &dir)?);
    }
    Ok(points)
}

/// Builds the (optionally rescaled) problem, the initial guess from the
/// source condition (x0 = x_true when no source is given) and the exact data.
pub fn build_experiment(cfg: &ExperimentConfig) -> anyhow::Result<BuiltExperiment> {
    let family = cfg.filter.family()?;
    let schedule = cfg.schedule.schedule()?;
    schedule.compatible_with(family)?;
    let mut problem = build_problem(&cfg.problem)?;
    let mut scale_factor = 1.0;
    if let Some(sc) = &cfg.scaling {
        if sc.apply {
            let samples = scaling_samples(&problem, sc.samples.max(1))?;
            let (scaled, s) = rescale_problem(&problem, family, sc.alpha0, &samples)?;
            problem = scaled;
            scale_factor = s;
        }
    }
    let weights = problem.weights_x().clone();
    let n = problem.dim_x();
    let (x0, omega_norm, source_kind) = match &cfg.source {
        Some(src) => {
            let spec = src.spec(n, &weights)?;
            let built = construct_initial_guess(&problem, &spec)?;
            if built.dropped_norm > 1e-9 * spec.omega.norm().max(1.0) {
                eprintln!(
                    "note: source representer has norm {:.3e} outside the derivative's right singular span (dropped)",
                    built.dropped_norm
                );
            }
            (built.x0, Some(spec.omega.norm()), Some(spec.kind))
        }
        None => (
            problem
                .x_true()
                .ok_or_else(|| anyhow!("no source given and problem has no x_true"))?
                .clone(),
            None,
            None,
        ),
    };
    let y = problem.exact_data()?;
    Ok(BuiltExperiment {
        problem,
        family,
        schedule,
        x0,
        y,
        scale_factor,
        omega_norm,
        source_kind,
    })
}

fn effective_seeds(cfg: &ExperimentConfig, opts: &CliOptions) -> Vec<u64> {
    match opts.seed_override {
        Some(s) => vec![s],
        None => cfg.run.seeds.clone(),
    }
}

fn out_dir(cfg: &ExperimentConfig, opts: &CliOptions) -> anyhow::Result<PathBuf> {
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    Ok(dir)
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .context("cannot build worker pool")?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

type CellResult = (f64, u64, anyhow::Result<RunResult>);

/// Runs the (delta, seed) matrix concurrently; results come back keyed, so
/// aggregation order is independent of scheduling.
fn run_cells(
    exp: &BuiltExperiment,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    workers: Option<usize>,
    with_stability: bool,
) -> anyhow::Result<Vec<CellResult>> {
    use rayon::prelude::*;
    let cells: Vec<(f64, u64)> = cfg
        .run
        .delta_list
        .iter()
        .flat_map(|&d| seeds.iter().map(move |&s| (d, s)))
        .collect();
    with_pool(workers, || {
        cells
            .par_iter()
            .map(|&(delta, seed)| {
                let run = || -> anyhow::Result<RunResult> {
                    let ydelta = make_noisy(&exp.y, &NoiseSpec { delta, seed })?;
                    let config = SolverConfig::new(cfg.run.tau, delta)?
                        .with_kmax(cfg.run.kmax)?
                        .with_record_errors(cfg.run.record_errors);
                    let result = if with_stability {
                        run_discrepancy_with_stability(
                            &exp.problem,
                            exp.family,
                            &exp.schedule,
                            &config,
                            &exp.x0,
                            &exp.y,
                            &ydelta,
                        )?
                    } else {
                        run_discrepancy(
                            &exp.problem,
                            exp.family,
                            &exp.schedule,
                            &config,
                            &exp.x0,
                            &ydelta,
                        )?
                    };
                    Ok(result)
                };
                (delta, seed, run())
            })
            .collect()
    })
}

fn emit_runs(
    dir: &Path,
    tau: f64,
    results: &[CellResult],
) -> anyhow::Result<Vec<csvio::SummaryRow>> {
    let mut rows = Vec::new();
    for (delta, seed, res) in results {
        let result = res
            .as_ref()
            .map_err(|e| anyhow!("run (delta={delta:e}, seed={seed}) failed: {e}"))?;
        csvio::write_run_csv(&dir.join(csvio::run_file_name(*delta, *seed)), &result.records)?;
        rows.push(csvio::SummaryRow::from_result(*delta, *seed, tau, result));
    }
    csvio::write_summary_csv(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

/// `run`: one solver run per (delta, seed); per-iteration CSVs plus a summary
/// line each; exit 0 only when every run stopped by the discrepancy rule.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &CliOptions) -> anyhow::Result<i32> {
    let exp = build_experiment(cfg)?;
    let seeds = effective_seeds(cfg, opts);
    let dir = out_dir(cfg, opts)?;
    let with_stability = cfg.run.record_errors && exp.problem.x_true().is_some();
    let results = run_cells(&exp, cfg, &seeds, opts.workers, with_stability)?;
    let rows = emit_runs(&dir, cfg.run.tau, &results)?;
    csvio::validate_emitted_runs(&dir)?;
    let mut all_stopped = true;
    for r in &rows {
        println!(
            "delta={:<10e} seed={:<6} status={:<22} k_delta={:<6} final_error={}",
            r.delta,
            r.seed,
            r.status,
            r.k_delta.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            r.final_error.map(csvio::format_f64).unwrap_or_else(|| "-".into()),
        );
        all_stopped &= r.stopped();
    }
    if exp.scale_factor != 1.0 {
        println!(
            "note: problem rescaled by s={:.6e}; configured noise levels apply to the rescaled data",
            exp.scale_factor
        );
    }
    Ok(if all_stopped { 0 } else { 1 })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Outcome of a rate study, before emission.
pub struct RateStudy {
    pub points: Vec<csvio::RatePoint>,
    pub nu_or_mu: f64,
    pub theoretical_exponent: f64,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub kind: &'static str,
}

/// Runs the full (delta, seed) matrix for a configured source condition and
/// fits the log-log slope of the median stopping error: against delta for
/// Holder sources, against (1 + |ln(delta/||omega||)|)^(-mu) for logarithmic
/// sources. Errors out identifying the first cell that fails to stop.
pub fn run_rate_study(
    cfg: &ExperimentConfig,
    opts: &CliOptions,
) -> anyhow::Result<(RateStudy, Vec<CellResult>)> {
    if cfg.run.delta_list.len() < 4 {
        bail!("a rate study needs at least 4 noise levels");
    }
    let src = cfg
        .source
        .as_ref()
        .ok_or_else(|| anyhow!("a rate study needs a [source] section"))?;
    let exp = build_experiment(cfg)?;
    let seeds = effective_seeds(cfg, opts);
    let results = run_cells(&exp, cfg, &seeds, opts.workers, false)?;
    for (delta, seed, res) in &results {
        let r = res
            .as_ref()
            .map_err(|e| anyhow!("cell (delta={delta:e}, seed={seed}): {e}"))?;
        if r.status != RunStatus::StoppedByDiscrepancy {
            bail!(
                "cell (delta={delta:e}, seed={seed}) did not stop by discrepancy: {}",
                r.status.as_str()
            );
        }
    }
    let omega_norm = exp.omega_norm.unwrap_or(1.0);
    let (kind, nu_or_mu, theoretical_exponent): (&'static str, f64, f64) = match src {
        SourceConfig::Holder { nu, .. } => ("holder", *nu, 2.0 * nu / (1.0 + 2.0 * nu)),
        SourceConfig::Logarithmic { mu, .. } => ("logarithmic", *mu, 1.0),
    };
    let mut points = Vec::new();
    for &delta in &cfg.run.delta_list {
        let mut errs = Vec::new();
        let mut ks = Vec::new();
        for (d, _, res) in &results {
            if *d != delta {
                continue;
            }
            let r = res.as_ref().unwrap();
            let err = r
                .records
                .last()
                .and_then(|rec| rec.error_norm)
                .ok_or_else(|| anyhow!("rate study needs record_errors = true"))?;
            errs.push(err);
            ks.push(r.k_delta.unwrap());
        }
        let transformed = match src {
            SourceConfig::Holder { .. } => delta,
            SourceConfig::Logarithmic { mu, .. } => {
                (1.0 + (delta / omega_norm).ln().abs()).powf(-mu)
            }
        };
        points.push(csvio::RatePoint {
            delta,
            median_error: median(&mut errs),
            transformed,
            k_min: ks.iter().copied().min().unwrap(),
            k_max: ks.iter().copied().max().unwrap(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.transformed.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_error.ln()).collect();
    let (fitted_slope, intercept) = least_squares_line(&xs, &ys);
    Ok((
        RateStudy {
            points,
            nu_or_mu,
            theoretical_exponent,
            fitted_slope,
            intercept,
            kind,
        },
        results,
    ))
}

/// `rate-study`: aggregated rate reproduction with CSV + SVG emission.
pub fn cmd_rate_study(cfg: &ExperimentConfig, opts: &CliOptions) -> anyhow::Result<i32> {
    let (study, results) = run_rate_study(cfg, opts)?;
    let dir = out_dir(cfg, opts)?;
    emit_runs(&dir, cfg.run.tau, &results)?;
    csvio::validate_emitted_runs(&dir)?;
    csvio::write_rate_points_csv(&dir.join("rate_points.csv"), &study.points)?;
    csvio::write_rate_fit_csv(
        &dir.join("rate_fit.csv"),
        study.kind,
        study.nu_or_mu,
        study.theoretical_exponent,
        study.fitted_slope,
        study.intercept,
    )?;
    let (x_label, title) = if study.kind == "holder" {
        (
            "delta",
            format!(
                "median error at stopping vs delta (nu={}, target slope {:.4})",
                study.nu_or_mu, study.theoretical_exponent
            ),
        )
    } else {
        (
            "(1+|ln(delta/|omega|)|)^-mu",
            format!("median error at stopping vs log level (mu={})", study.nu_or_mu),
        )
    };
    let pts: Vec<(f64, f64)> = study
        .points
        .iter()
        .map(|p| (p.transformed, p.median_error))
        .collect();
    let svg_text = svg::rate_plot_svg(
        &title,
        x_label,
        "median error",
        &pts,
        (study.fitted_slope, study.intercept),
        study.theoretical_exponent,
    );
    std::fs::write(dir.join("rate.svg"), svg_text)?;
    println!(
        "{} source, nu_or_mu={} fitted_slope={:.4} theoretical={:.4}",
        study.kind, study.nu_or_mu, study.fitted_slope, study.theoretical_exponent
    );
    for p in &study.points {
        println!(
            "  delta={:<10e} median_error={:.6e} k_delta=[{}, {}]",
            p.delta, p.median_error, p.k_min, p.k_max
        );
    }
    Ok(0)
}

fn default_families() -> Vec<FilterFamily> {
    vec![
        FilterFamily::IteratedTikhonov { order: 1 },
        FilterFamily::IteratedTikhonov { order: 2 },
        FilterFamily::Landweber,
        FilterFamily::Lardy,
        FilterFamily::Exponential,
    ]
}

/// `verify`: runs all applicable structure checks and prints one table row
/// per check; exit 0 only if every check passed.
pub fn cmd_verify(cfg: &ExperimentConfig, opts: &CliOptions) -> anyhow::Result<i32> {
    let vc = cfg.verify.clone().unwrap_or_else(|| {
        toml::from_str::<VerifyConfig>("").expect("default verify config")
    });
    // An explicitly empty list means "check nothing" (vacuous pass); an
    // absent key falls back to the default family set.
    let families: Vec<FilterFamily> = match &vc.families {
        None => default_families(),
        Some(list) => list
            .iter()
            .map(|f| f.family().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?,
    };
    let commutator_families: Vec<FilterFamily> = match &vc.commutator_families {
        None => vec![
            FilterFamily::IteratedTikhonov { order: 1 },
            FilterFamily::IteratedTikhonov { order: 2 },
            FilterFamily::Landweber,
        ],
        Some(list) => list
            .iter()
            .map(|f| f.family().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?,
    };
    let lambda_grid = rv::default_lambda_grid();
    let alpha_grid = rv::default_alpha_grid();
    let schedule = cfg.schedule.schedule()?;
    let mut reports: Vec<rv::CheckReport> = Vec::new();

    for &family in &families {
        reports.extend(rv::check_assumption_2_1(family, &lambda_grid, &alpha_grid)?);
        reports.extend(rv::check_sqrt_envelopes(family, &lambda_grid, &alpha_grid));
        let qual = regnewt::filters::family_constants(family).qualification;
        let nus: Vec<f64> = vc.nus.iter().copied().filter(|&nu| qual.admits(nu)).collect();
        reports.extend(rv::check_qualification(family, &nus, &lambda_grid, &alpha_grid)?);
        reports.extend(rv::check_log_qualification(family, &vc.mus, &alpha_grid, 1.0)?);
        match rv::check_assumption_2_2(family, &schedule, vc.kmax, &lambda_grid) {
            Ok(rep) => reports.push(rep),
            Err(regnewt::Error::ScheduleCompatibility(msg)) => {
                println!("skipping schedule ratio for {}: {msg}", family.name());
            }
            Err(e) => return Err(e.into()),
        }
        reports.push(rv::check_interpolation_lemma(family, vc.lemma_trials, vc.seed)?);
    }

    let comm_alphas: Vec<f64> = (0..7).map(|i| 1e-3 * (1e3_f64).powf(i as f64 / 6.0)).collect();
    for &family in &commutator_families {
        reports.extend(rv::check_commutators(
            family,
            vc.commutator_pairs,
            &comm_alphas,
            vc.seed,
        )?);
    }

    if vc.nonlinearity_samples > 0 {
        let problem = build_problem(&cfg.problem)?;
        if problem.x_true().is_some() {
            reports.extend(rv::estimate_nonlinearity(
                &problem,
                vc.nonlinearity_samples,
                vc.seed,
            )?);
            let fam = cfg.filter.family()?;
            reports.extend(rv::check_strengthened_commutators(
                &problem,
                fam,
                vc.nonlinearity_samples / 2,
                &comm_alphas,
                vc.seed,
            )?);
        }
    }

    if opts.lardy_zero_based {
        reports.push(rv::check_lardy_zero_based_positivity(&lambda_grid, &alpha_grid));
    }

    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(10).min(70);
    println!(
        "{:<width$}  {:>13}  {:>13}  {:<6}  worst case",
        "check", "measured", "bound", "status",
    );
    let mut all_passed = true;
    for r in &reports {
        all_passed &= r.passed;
        println!(
            "{:<width$}  {:>13.6e}  {:>13}  {:<6}  {}",
            r.name,
            r.measured,
            r.bound.map(|b| format!("{b:.6e}")).unwrap_or_else(|| "-".into()),
            if r.passed { "pass" } else { "FAIL" },
            r.worst_case,
        );
    }
    println!(
        "{} checks, {} failed",
        reports.len(),
        reports.iter().filter(|r| !r.passed).count()
    );
    Ok(if all_passed { 0 } else { 1 })
}
