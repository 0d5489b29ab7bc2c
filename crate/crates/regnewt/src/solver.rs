//! The outer Newton-type iteration with pluggable spectral filters,
//! discrepancy-principle termination, and the noise-free companion iteration
//! used for stability diagnostics.
//!
//! One step linearizes F at the current iterate x_k and applies the filter to
//! the shifted linear equation: with A_k = F'(x_k) and
//! b_k = y^delta - F(x_k) + A_k (x_k - x0),
//!
//! ```text
//! x_{k+1} = x0 + g_{alpha_k}(A_k* A_k) A_k* b_k.
//! ```
//!
//! The run stops at the first k with ||F(x_k) - y^delta|| <= tau * delta; the
//! residual is evaluated before stepping, so a stopping index of 0 is
//! representable.

use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterFamily};
use crate::problems::NonlinearProblem;
use crate::schedule::AlphaSchedule;
use crate::space::Vector;

/// Discrepancy-run parameters. `tau > 1` per the stopping rule; `delta` is
/// the noise level (a zero level disables the rule and the run falls to
/// kmax); `kmax` caps the number of Newton steps.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tau: f64,
    pub delta: f64,
    pub kmax: usize,
    pub record_errors: bool,
}

impl SolverConfig {
    pub const DEFAULT_KMAX: usize = 10_000;

    pub fn new(tau: f64, delta: f64) -> Result<Self> {
        if !(tau > 1.0) {
            return Err(Error::Configuration(format!("tau must exceed 1, got {tau}")));
        }
        if !(delta >= 0.0) {
            return Err(Error::Configuration(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        Ok(Self {
            tau,
            delta,
            kmax: Self::DEFAULT_KMAX,
            record_errors: true,
        })
    }

    pub fn with_kmax(mut self, kmax: usize) -> Result<Self> {
        if kmax == 0 {
            return Err(Error::Configuration("kmax must be >= 1".into()));
        }
        self.kmax = kmax;
        Ok(self)
    }

    pub fn with_record_errors(mut self, record: bool) -> Self {
        self.record_errors = record;
        self
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    StoppedByDiscrepancy,
    ReachedKmax,
    LeftDomainBall,
    NumericalFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::StoppedByDiscrepancy => "stopped-by-discrepancy",
            RunStatus::ReachedKmax => "reached-kmax",
            RunStatus::LeftDomainBall => "left-domain-ball",
            RunStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// Per-iteration observables. `stability_ratio` is
/// ||x_k^delta - x_k|| sqrt(alpha_k) / delta against the noise-free
/// companion; it is only filled by [`run_discrepancy_with_stability`].
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub residual_norm: f64,
    pub error_norm: Option<f64>,
    pub stability_ratio: Option<f64>,
}

/// Outcome of a run: termination status, the stopping index when the
/// discrepancy rule fired, the final iterate and the per-iteration records.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub k_delta: Option<usize>,
    pub final_iterate: Vector,
    pub records: Vec<IterationRecord>,
}

/// One Newton-type step from x_k at regularization level alpha.
pub fn newton_step(
    problem: &NonlinearProblem,
    family: FilterFamily,
    alpha: f64,
    x0: &Vector,
    x_k: &Vector,
    ydelta: &Vector,
) -> Result<Vector> {
    let a = problem.derivative(x_k)?;
    let fx = problem.forward(x_k)?;
    let shift = a.apply(&x_k.sub(x0)?)?;
    let b = ydelta.sub(&fx)?.add(&shift)?;
    let h = apply_filter(family, alpha, &a, &b)?;
    x0.add(&h)
}

struct LoopSpec<'a> {
    problem: &'a NonlinearProblem,
    family: FilterFamily,
    schedule: &'a AlphaSchedule,
    tau: f64,
    delta: f64,
    kmax: usize,
    record_errors: bool,
    use_discrepancy: bool,
    x0: &'a Vector,
    data: &'a Vector,
    /// Exact data for the lockstep noise-free companion iteration.
    companion_exact: Option<&'a Vector>,
}

fn run_loop(spec: LoopSpec<'_>) -> Result<RunResult> {
    let mut x = spec.x0.clone();
    let mut companion = spec.companion_exact.map(|_| spec.x0.clone());
    let mut records = Vec::new();
    let threshold = spec.tau * spec.delta;

    let mut k = 0usize;
    loop {
        let alpha = spec.schedule.alpha(k);
        let fx = spec.problem.forward(&x)?;
        let residual_norm = fx.sub(spec.data)?.norm();
        if !residual_norm.is_finite() || !x.is_finite() {
            return Ok(RunResult {
                status: RunStatus::NumericalFailure,
                k_delta: None,
                final_iterate: x,
                records,
            });
        }
        let error_norm = match (spec.record_errors, spec.problem.x_true()) {
            (true, Some(xt)) => Some(x.sub(xt)?.norm()),
            _ => None,
        };
        let stability_ratio = match (&companion, spec.delta > 0.0) {
            (Some(z), true) => Some(x.sub(z)?.norm() * alpha.sqrt() / spec.delta),
            _ => None,
        };
        records.push(IterationRecord {
            k,
            alpha,
            residual_norm,
            error_norm,
            stability_ratio,
        });

        if spec.use_discrepancy && spec.delta > 0.0 && residual_norm <= threshold {
            return Ok(RunResult {
                status: RunStatus::StoppedByDiscrepancy,
                k_delta: Some(k),
                final_iterate: x,
                records,
            });
        }
        if let Some(xt) = spec.problem.x_true() {
            if x.sub(xt)?.norm() > spec.problem.rho() {
                return Ok(RunResult {
                    status: RunStatus::LeftDomainBall,
                    k_delta: None,
                    final_iterate: x,
                    records,
                });
            }
        }
        if k == spec.kmax {
            return Ok(RunResult {
                status: RunStatus::ReachedKmax,
                k_delta: None,
                final_iterate: x,
                records,
            });
        }

        x = newton_step(spec.problem, spec.family, alpha, spec.x0, &x, spec.data)?;
        if let (Some(z), Some(y)) = (&mut companion, spec.companion_exact) {
            *z = newton_step(spec.problem, spec.family, alpha, spec.x0, z, y)?;
        }
        k += 1;
    }
}

/// Runs the iteration under the discrepancy principle: stops at the first k
/// with ||F(x_k) - y^delta|| <= tau * delta (evaluated before stepping).
/// With delta = 0 the rule never fires and the run terminates at kmax. Leaves
/// of the domain ball around a known solution end the run with
/// `LeftDomainBall`.
pub fn run_discrepancy(
    problem: &NonlinearProblem,
    family: FilterFamily,
    schedule: &AlphaSchedule,
    config: &SolverConfig,
    x0: &Vector,
    ydelta: &Vector,
) -> Result<RunResult> {
    run_loop(LoopSpec {
        problem,
        family,
        schedule,
        tau: config.tau,
        delta: config.delta,
        kmax: config.kmax,
        record_errors: config.record_errors,
        use_discrepancy: true,
        x0,
        data: ydelta,
        companion_exact: None,
    })
}

/// Same as [`run_discrepancy`] but advances a noise-free companion iteration
/// (driven by the exact data `y`) in lockstep and fills each record's
/// `stability_ratio` with ||x_k^delta - x_k|| sqrt(alpha_k) / delta.
pub fn run_discrepancy_with_stability(
    problem: &NonlinearProblem,
    family: FilterFamily,
    schedule: &AlphaSchedule,
    config: &SolverConfig,
    x0: &Vector,
    y: &Vector,
    ydelta: &Vector,
) -> Result<RunResult> {
    run_loop(LoopSpec {
        problem,
        family,
        schedule,
        tau: config.tau,
        delta: config.delta,
        kmax: config.kmax,
        record_errors: config.record_errors,
        use_discrepancy: true,
        x0,
        data: ydelta,
        companion_exact: Some(y),
    })
}

/// Runs exactly `kmax` steps on exact data (no stopping rule); `kmax = 0`
/// returns x0 with its single record.
pub fn run_noise_free(
    problem: &NonlinearProblem,
    family: FilterFamily,
    schedule: &AlphaSchedule,
    kmax: usize,
    x0: &Vector,
    y: &Vector,
) -> Result<RunResult> {
    run_loop(LoopSpec {
        problem,
        family,
        schedule,
        tau: 2.0,
        delta: 0.0,
        kmax,
        record_errors: true,
        use_discrepancy: false,
        x0,
        data: y,
        companion_exact: None,
    })
}

/// Asserts the defining property of the stopping rule on a finished run:
/// residual(k_delta) <= tau delta < residual(j) for all j < k_delta. Returns
/// the violation description, if any.
pub fn discrepancy_postcondition(result: &RunResult, tau: f64, delta: f64) -> Option<String> {
    if result.status != RunStatus::StoppedByDiscrepancy {
        return None;
    }
    let k = result.k_delta?;
    let threshold = tau * delta;
    if result.records.len() != k + 1 {
        return Some(format!(
            "expected {} records for stopping index {k}, found {}",
            k + 1,
            result.records.len()
        ));
    }
    if result.records[k].residual_norm > threshold {
        return Some(format!(
            "residual at stopping index {k} is {} > tau*delta = {threshold}",
            result.records[k].residual_norm
        ));
    }
    for rec in &result.records[..k] {
        if rec.residual_norm <= threshold {
            return Some(format!(
                "residual at j={} already satisfied the rule: {} <= {threshold}",
                rec.k, rec.residual_norm
            ));
        }
    }
    None
}
