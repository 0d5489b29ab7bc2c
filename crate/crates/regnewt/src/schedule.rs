//! Regularization-parameter schedules alpha_k and their interplay with the
//! residual functions (the measured c5 ratio).

use crate::error::{Error, Result};
use crate::filters::{ln_r_scalar, C5Hint, FilterFamily};

/// A positive nonincreasing schedule alpha_k -> 0 with bounded decay ratio
/// alpha_k / alpha_{k+1} <= r.
///
/// `ReciprocalInt { n0, q }` gives alpha_k = 1/(n0 + q k);
/// `ReciprocalReal { t0, theta0 }` gives 1/alpha_k = t0 + theta0 k.
/// The degenerate increments q = 0 / theta0 = 0 are accepted for diagnostic
/// use (constant schedules never reach alpha_k -> 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Geometric { alpha0: f64, ratio: f64 },
    ReciprocalInt { n0: u64, q: u64 },
    ReciprocalReal { t0: f64, theta0: f64 },
}

impl AlphaSchedule {
    pub fn geometric(alpha0: f64, ratio: f64) -> Result<Self> {
        if !(alpha0 > 0.0) || !(ratio > 1.0) {
            return Err(Error::Configuration(format!(
                "geometric schedule needs alpha0 > 0 and ratio > 1, got ({alpha0}, {ratio})"
            )));
        }
        Ok(AlphaSchedule::Geometric { alpha0, ratio })
    }

    pub fn reciprocal_int(n0: u64, q: u64) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::Configuration("reciprocal schedule needs n0 >= 1".into()));
        }
        Ok(AlphaSchedule::ReciprocalInt { n0, q })
    }

    pub fn reciprocal_real(t0: f64, theta0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !(theta0 >= 0.0) {
            return Err(Error::Configuration(format!(
                "reciprocal schedule needs t0 > 0 and theta0 >= 0, got ({t0}, {theta0})"
            )));
        }
        Ok(AlphaSchedule::ReciprocalReal { t0, theta0 })
    }

    /// alpha_k by closed form.
    pub fn alpha(&self, k: usize) -> f64 {
        match self {
            AlphaSchedule::Geometric { alpha0, ratio } => alpha0 * ratio.powi(-(k as i32)),
            AlphaSchedule::ReciprocalInt { n0, q } => 1.0 / ((n0 + q * k as u64) as f64),
            AlphaSchedule::ReciprocalReal { t0, theta0 } => 1.0 / (t0 + theta0 * k as f64),
        }
    }

    /// The constant r bounding alpha_k / alpha_{k+1} (attained at k = 0 for
    /// the reciprocal kinds).
    pub fn ratio_bound(&self) -> f64 {
        match self {
            AlphaSchedule::Geometric { ratio, .. } => *ratio,
            AlphaSchedule::ReciprocalInt { n0, q } => (n0 + q) as f64 / *n0 as f64,
            AlphaSchedule::ReciprocalReal { t0, theta0 } => (t0 + theta0) / t0,
        }
    }

    /// Bound on the reciprocal increments 1/alpha_{k+1} - 1/alpha_k, when one
    /// exists (the geometric schedule has unbounded increments).
    pub fn reciprocal_increment_bound(&self) -> Option<f64> {
        match self {
            AlphaSchedule::Geometric { .. } => None,
            AlphaSchedule::ReciprocalInt { q, .. } => Some(*q as f64),
            AlphaSchedule::ReciprocalReal { theta0, .. } => Some(*theta0),
        }
    }

    /// Landweber/Lardy count inner steps as floor(1/alpha) + 1; they require
    /// bounded reciprocal increments and alpha_0 <= 1.
    pub fn compatible_with(&self, family: FilterFamily) -> Result<()> {
        if !family.requires_alpha_le_one() {
            return Ok(());
        }
        if self.reciprocal_increment_bound().is_none() {
            return Err(Error::ScheduleCompatibility(format!(
                "{} needs a bounded-increment schedule, not a geometric one",
                family.name()
            )));
        }
        if self.alpha(0) > 1.0 + 1e-12 {
            return Err(Error::ScheduleCompatibility(format!(
                "{} needs alpha_0 <= 1, got {}",
                family.name(),
                self.alpha(0)
            )));
        }
        Ok(())
    }
}

impl C5Hint {
    /// Evaluates the analytic c5 bound for a schedule, when one exists.
    pub fn bound_for(&self, schedule: &AlphaSchedule) -> Option<f64> {
        match self {
            C5Hint::RatioPower(m) => Some(schedule.ratio_bound().powi(*m as i32)),
            C5Hint::IncrementPowerOfTwo => schedule
                .reciprocal_increment_bound()
                .map(|q| 2.0_f64.powf(q.ceil())),
            C5Hint::IncrementExponential => {
                schedule.reciprocal_increment_bound().map(|t| t.exp())
            }
        }
    }
}

/// Outcome of a schedule/family compatibility measurement.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleValidation {
    /// Grid supremum of r_{alpha_k} / r_{alpha_{k+1}} over k <= kmax; a lower
    /// bound of the true c5.
    pub measured_c5: f64,
    /// Analytic bound from the family's c5 hint, when the schedule admits one.
    pub analytic_bound: Option<f64>,
    /// Whether the measurement stayed within the analytic bound.
    pub within_bound: Option<bool>,
}

/// Grid supremum of the consecutive-residual ratio, computed in log space so
/// underflowing residuals at large k cannot corrupt it.
pub(crate) fn measured_c5_on_grid(
    schedule: &AlphaSchedule,
    family: FilterFamily,
    kmax: usize,
    lambda_grid: &[f64],
) -> (f64, (usize, f64)) {
    let mut sup = f64::NEG_INFINITY;
    let mut arg = (0usize, 0.0f64);
    for k in 0..=kmax {
        let (ak, ak1) = (schedule.alpha(k), schedule.alpha(k + 1));
        for &lam in lambda_grid {
            let ratio = (ln_r_scalar(family, ak, lam) - ln_r_scalar(family, ak1, lam)).exp();
            if ratio > sup {
                sup = ratio;
                arg = (k, lam);
            }
        }
    }
    (sup, arg)
}

/// Measures sup_k sup_lambda r_{alpha_k}(lambda) / r_{alpha_{k+1}}(lambda)
/// for k <= kmax and reports it against the family's analytic c5 hint.
/// Errors on incompatible pairings (Landweber/Lardy with a geometric
/// schedule).
pub fn validate_schedule(
    schedule: &AlphaSchedule,
    family: FilterFamily,
    kmax: usize,
) -> Result<ScheduleValidation> {
    schedule.compatible_with(family)?;
    let grid: Vec<f64> = (0..=256).map(|i| 0.5 * i as f64 / 256.0).collect();
    let (measured, _) = measured_c5_on_grid(schedule, family, kmax, &grid);
    let analytic = crate::filters::family_constants(family)
        .c5_hint
        .bound_for(schedule);
    let within = analytic.map(|b| measured <= b * (1.0 + 1e-9));
    Ok(ScheduleValidation {
        measured_c5: measured,
        analytic_bound: analytic,
        within_bound: within,
    })
}
