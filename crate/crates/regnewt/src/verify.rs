//! Numerical verification of the inequality-style structure conditions the
//! convergence theory rests on: filter envelopes and monotonicity, the
//! relative-difference constant, square-root envelopes, qualification bounds,
//! consecutive-residual ratios, the interpolation inequality, commutator
//! scalings and empirical nonlinearity constants.
//!
//! All suprema are grid or sample suprema and therefore lower bounds of the
//! true constants; a failed report prints the witness so it can be
//! reproduced. Checks are deterministic given seed and grids.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filters::{
    family_constants, g_scalar, lardy_zero_based_r, ln_r_scalar, qualification_bound, r_scalar,
    FilterFamily,
};
use crate::operator::LinearOperator;
use crate::problems::NonlinearProblem;
use crate::schedule::{measured_c5_on_grid, AlphaSchedule};
use crate::space::Vector;

/// Result of one verification check. `passed` means: the measured supremum
/// stayed within the bound (when a bound exists) or is finite (existence-only
/// checks). `worst_case` describes the argmax grid point or sample.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub measured: f64,
    pub bound: Option<f64>,
    pub passed: bool,
    pub worst_case: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, measured: f64, bound: Option<f64>, worst_case: impl Into<String>) -> Self {
        let passed = match bound {
            Some(b) => measured <= b * (1.0 + 1e-9),
            None => measured.is_finite(),
        };
        CheckReport {
            name: name.into(),
            measured,
            bound,
            passed,
            worst_case: worst_case.into(),
        }
    }

    fn with_passed(mut self, passed: bool) -> Self {
        self.passed = passed;
        self
    }
}

/// 512-point spectral grid on [0, 1/2]: a uniform part plus a log-spaced part
/// so small-lambda argmaxima are bracketed across the alpha decades.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(512);
    grid.push(0.0);
    for i in 1..=383 {
        grid.push(0.5 * i as f64 / 383.0);
    }
    for i in 0..128 {
        grid.push(1e-6 * (0.5 / 1e-6_f64).powf(i as f64 / 127.0));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid
}

/// 16 log-spaced regularization levels in [1e-4, 1].
pub fn default_alpha_grid() -> Vec<f64> {
    (0..16)
        .map(|i| 1e-4 * (1e4_f64).powf(i as f64 / 15.0))
        .collect()
}

/// Envelope, monotonicity and relative-difference checks for a filter family
/// on the given grids. Three reports:
///
/// 1. the envelope `0 < r <= 1`, `r(lambda) lambda <= c0 alpha`,
///    `0 <= g <= c1/alpha` (measured value is the sup of
///    `r lambda / alpha`; side violations flip `passed`);
/// 2. monotonicity of `r` in alpha (measured value is the largest
///    log-violation, bound 0);
/// 3. the relative difference `(r_beta - r_alpha) / (sqrt(lambda/alpha)
///    r_beta)` against c2.
pub fn check_assumption_2_1(
    family: FilterFamily,
    lambda_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<Vec<CheckReport>> {
    let consts = family_constants(family);
    let fname = family.name();

    // (1) envelope
    let mut sup_env = 0.0_f64;
    let mut env_arg = (f64::NAN, f64::NAN);
    let mut violation: Option<String> = None;
    for &alpha in alpha_grid {
        for &lam in lambda_grid {
            let ln_r = ln_r_scalar(family, alpha, lam);
            let g = g_scalar(family, alpha, lam);
            if ln_r > 1e-14 {
                violation.get_or_insert(format!(
                    "r > 1 at (alpha={alpha:.3e}, lambda={lam:.3e}): ln r = {ln_r:.3e}"
                ));
            }
            if !ln_r.is_finite() {
                violation.get_or_insert(format!(
                    "r not positive at (alpha={alpha:.3e}, lambda={lam:.3e})"
                ));
            }
            if g < -1e-14 {
                violation.get_or_insert(format!(
                    "g < 0 at (alpha={alpha:.3e}, lambda={lam:.3e}): g = {g:.3e}"
                ));
            }
            if g * alpha > consts.c1 * (1.0 + 1e-9) {
                violation.get_or_insert(format!(
                    "g > c1/alpha at (alpha={alpha:.3e}, lambda={lam:.3e}): g*alpha = {:.6e}",
                    g * alpha
                ));
            }
            let ratio = ln_r.exp() * lam / alpha;
            if ratio > sup_env {
                sup_env = ratio;
                env_arg = (alpha, lam);
            }
        }
    }
    let mut env_report = CheckReport::new(
        format!("{fname}: residual/filter envelope (c0, c1)"),
        sup_env,
        Some(consts.c0),
        format!("r*lambda/alpha argmax at (alpha={:.3e}, lambda={:.3e})", env_arg.0, env_arg.1),
    );
    if let Some(v) = violation {
        env_report = env_report.with_passed(false);
        env_report.worst_case = v;
    }

    // (2) monotonicity in alpha
    let mut worst_mono = f64::NEG_INFINITY;
    let mut mono_arg = (f64::NAN, f64::NAN, f64::NAN);
    for (i, &a_small) in alpha_grid.iter().enumerate() {
        for &a_big in &alpha_grid[i..] {
            for &lam in lambda_grid {
                let viol = ln_r_scalar(family, a_small, lam) - ln_r_scalar(family, a_big, lam);
                if viol > worst_mono {
                    worst_mono = viol;
                    mono_arg = (a_small, a_big, lam);
                }
            }
        }
    }
    let mono_report = CheckReport::new(
        format!("{fname}: residual monotonicity in alpha"),
        worst_mono.max(0.0),
        Some(0.0),
        format!(
            "largest log-violation at (alpha={:.3e}, beta={:.3e}, lambda={:.3e})",
            mono_arg.0, mono_arg.1, mono_arg.2
        ),
    );

    // (3) relative difference against c2
    let mut sup_rel = 0.0_f64;
    let mut rel_arg = (f64::NAN, f64::NAN, f64::NAN);
    for (i, &a_small) in alpha_grid.iter().enumerate() {
        for &a_big in &alpha_grid[i..] {
            for &lam in lambda_grid {
                if lam == 0.0 {
                    continue;
                }
                let diff = -(ln_r_scalar(family, a_small, lam) - ln_r_scalar(family, a_big, lam))
                    .exp_m1();
                let ratio = diff / (lam / a_small).sqrt();
                if ratio > sup_rel {
                    sup_rel = ratio;
                    rel_arg = (a_small, a_big, lam);
                }
            }
        }
    }
    let rel_report = CheckReport::new(
        format!("{fname}: relative residual difference (c2)"),
        sup_rel,
        Some(consts.c2),
        format!(
            "argmax at (alpha={:.3e}, beta={:.3e}, lambda={:.3e})",
            rel_arg.0, rel_arg.1, rel_arg.2
        ),
    );

    Ok(vec![env_report, mono_report, rel_report])
}

/// Square-root envelopes `r sqrt(lambda) <= c3 sqrt(alpha)` and
/// `g sqrt(lambda) <= c4 / sqrt(alpha)` against the family's constants.
pub fn check_sqrt_envelopes(
    family: FilterFamily,
    lambda_grid: &[f64],
    alpha_grid: &[f64],
) -> Vec<CheckReport> {
    let consts = family_constants(family);
    let fname = family.name();
    let mut sup_r = 0.0_f64;
    let mut arg_r = (f64::NAN, f64::NAN);
    let mut sup_g = 0.0_f64;
    let mut arg_g = (f64::NAN, f64::NAN);
    for &alpha in alpha_grid {
        for &lam in lambda_grid {
            let rr = r_scalar(family, alpha, lam) * lam.sqrt() / alpha.sqrt();
            if rr > sup_r {
                sup_r = rr;
                arg_r = (alpha, lam);
            }
            let gg = g_scalar(family, alpha, lam) * lam.sqrt() * alpha.sqrt();
            if gg > sup_g {
                sup_g = gg;
                arg_g = (alpha, lam);
            }
        }
    }
    vec![
        CheckReport::new(
            format!("{fname}: sqrt-weighted residual envelope (c3)"),
            sup_r,
            Some(consts.c3),
            format!("argmax at (alpha={:.3e}, lambda={:.3e})", arg_r.0, arg_r.1),
        ),
        CheckReport::new(
            format!("{fname}: sqrt-weighted filter envelope (c4)"),
            sup_g,
            Some(consts.c4),
            format!("argmax at (alpha={:.3e}, lambda={:.3e})", arg_g.0, arg_g.1),
        ),
    ]
}

/// Qualification bounds `r lambda^nu <= d_nu alpha^nu` for each requested nu.
pub fn check_qualification(
    family: FilterFamily,
    nu_list: &[f64],
    lambda_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<Vec<CheckReport>> {
    let fname = family.name();
    nu_list
        .iter()
        .map(|&nu| {
            let d_nu = qualification_bound(family, nu)?;
            let mut sup = 0.0_f64;
            let mut arg = (f64::NAN, f64::NAN);
            for &alpha in alpha_grid {
                for &lam in lambda_grid {
                    let value = if lam == 0.0 {
                        if nu == 0.0 {
                            r_scalar(family, alpha, lam)
                        } else {
                            0.0
                        }
                    } else {
                        (ln_r_scalar(family, alpha, lam) + nu * (lam / alpha).ln()).exp()
                    };
                    if value > sup {
                        sup = value;
                        arg = (alpha, lam);
                    }
                }
            }
            Ok(CheckReport::new(
                format!("{fname}: qualification bound nu={nu} (d_nu)"),
                sup,
                Some(d_nu),
                format!("argmax at (alpha={:.3e}, lambda={:.3e})", arg.0, arg.1),
            ))
        })
        .collect()
}

/// Measured constants b_mu in the log-weighted residual bound
/// `r (-ln lambda)^{-mu} <= b_mu (-ln(alpha/(2 alpha0)))^{-mu}` for
/// 0 < alpha <= alpha0. Existence-only: the report passes when finite. The
/// lambda = 0 grid point is skipped (the left side tends to 0 there).
pub fn check_log_qualification(
    family: FilterFamily,
    mu_list: &[f64],
    alpha_grid: &[f64],
    alpha0: f64,
) -> Result<Vec<CheckReport>> {
    if alpha_grid.iter().any(|&a| a > alpha0 * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "alpha grid must lie in (0, alpha0 = {alpha0}]"
        )));
    }
    let lambda_grid = default_lambda_grid();
    let fname = family.name();
    mu_list
        .iter()
        .map(|&mu| {
            let mut sup = 0.0_f64;
            let mut arg = (f64::NAN, f64::NAN);
            for &alpha in alpha_grid {
                let scale = -(alpha / (2.0 * alpha0)).ln();
                for &lam in &lambda_grid {
                    if lam == 0.0 {
                        continue;
                    }
                    let value = (ln_r_scalar(family, alpha, lam)).exp() * (scale / -lam.ln()).powf(mu);
                    if value > sup {
                        sup = value;
                        arg = (alpha, lam);
                    }
                }
            }
            Ok(CheckReport::new(
                format!("{fname}: log-source residual constant mu={mu} (b_mu, measured)"),
                sup,
                None,
                format!("argmax at (alpha={:.3e}, lambda={:.3e})", arg.0, arg.1),
            ))
        })
        .collect()
}

/// Consecutive-residual ratio `sup_k sup_lambda r_{alpha_k} / r_{alpha_{k+1}}`
/// against the family's analytic c5 hint for the given schedule.
pub fn check_assumption_2_2(
    family: FilterFamily,
    schedule: &AlphaSchedule,
    kmax: usize,
    lambda_grid: &[f64],
) -> Result<CheckReport> {
    schedule.compatible_with(family)?;
    let (measured, (k, lam)) = measured_c5_on_grid(schedule, family, kmax, lambda_grid);
    let bound = family_constants(family).c5_hint.bound_for(schedule);
    Ok(CheckReport::new(
        format!("{}: consecutive residual ratio (c5)", family.name()),
        measured,
        bound,
        format!("argmax at (k={k}, lambda={lam:.3e})"),
    ))
}

fn random_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return Vector::euclidean(v.into_iter().map(|x| x / n).collect()).unwrap();
        }
    }
}

/// Interpolation inequality of the residual functions: for random operators
/// with ||A|| <= 1/sqrt(2), random x, x_bar and random 0 < alpha <= beta,
///
/// ```text
/// ||(r_beta(A*A) - r_alpha(A*A)) x|| <= ||x_bar - r_beta(A*A) x||
///                                       + c2/sqrt(alpha) ||A x_bar||.
/// ```
///
/// Measured is the largest LHS/RHS ratio; it must stay at or below 1.
pub fn check_interpolation_lemma(
    family: FilterFamily,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    if trials == 0 {
        return Err(Error::InsufficientData("need at least one trial".into()));
    }
    let c2 = family_constants(family).c2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measured = 0.0_f64;
    let mut worst = String::from("no admissible trial");
    for t in 0..trials {
        let dim = rng.gen_range(2..=10);
        let norm = std::f64::consts::FRAC_1_SQRT_2 * rng.gen_range(0.3..=1.0);
        let a = crate::operator::random_operator_with_norm(dim, dim, norm, &mut rng)?;
        let factors = crate::operator::svd_dense(&a)?;
        let x = random_unit_vector(dim, &mut rng).scale(rng.gen_range(0.1..=3.0));
        let x_bar = random_unit_vector(dim, &mut rng).scale(rng.gen_range(0.1..=3.0));
        let alpha = 10f64.powf(rng.gen_range(-4.0..=0.0));
        let beta = 10f64.powf(rng.gen_range(alpha.log10()..=0.0));
        let lhs = factors
            .apply_sym_fn(
                |lam| r_scalar(family, beta, lam) - r_scalar(family, alpha, lam),
                &x,
            )?
            .norm();
        let r_beta_x = factors.apply_sym_fn(|lam| r_scalar(family, beta, lam), &x)?;
        let rhs = x_bar.sub(&r_beta_x)?.norm() + c2 / alpha.sqrt() * a.apply(&x_bar)?.norm();
        if rhs <= 1e-300 {
            continue;
        }
        let ratio = lhs / rhs;
        if ratio > measured {
            measured = ratio;
            worst = format!("trial {t}: dim={dim}, alpha={alpha:.3e}, beta={beta:.3e}");
        }
    }
    Ok(CheckReport::new(
        format!("{}: residual interpolation inequality", family.name()),
        measured,
        Some(1.0),
        worst,
    ))
}

struct PlainSvd {
    sigma: Vec<f64>,
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
}

fn plain_svd(m: &DMatrix<f64>) -> Result<PlainSvd> {
    let svd = m.clone().svd(true, true);
    Ok(PlainSvd {
        sigma: svd.singular_values.iter().copied().collect(),
        u: svd.u.ok_or(Error::NumericalFailure("SVD left factor missing".into()))?,
        v_t: svd
            .v_t
            .ok_or(Error::NumericalFailure("SVD right factor missing".into()))?,
    })
}

fn spec_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// phi(M^T M) from the SVD of M, as a dense matrix (phi(0) on the orthogonal
/// complement of the right singular span).
fn sym_fn_mat(svd: &PlainSvd, phi: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = svd.v_t.ncols();
    let phi0 = phi(0.0);
    let mut m = DMatrix::identity(n, n) * phi0;
    for (idx, s) in svd.sigma.iter().enumerate() {
        let c = phi(s * s) - phi0;
        if c == 0.0 {
            continue;
        }
        let row = svd.v_t.row(idx);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += c * row[i] * row[j];
            }
        }
    }
    m
}

/// Per-level commutator candidates for the four scalings, maxed over random
/// operator pairs. Entry `[i][j]` is the i-th inequality's candidate at
/// `alpha_grid[j]`:
///
/// 0. `||r(A*A) - r(B*B)|| sqrt(alpha) / ||A - B||`
/// 1. `||(r(A*A) - r(B*B)) B*|| / ||A - B||`
/// 2. `||A (r(A*A) - r(B*B)) B*|| / (sqrt(alpha) ||A - B||)`
/// 3. `||(g(A*A) - g(B*B)) B*|| alpha / ||A - B||`
///
/// Pairs alternate between independent draws and near-identity perturbations,
/// where the worst cases concentrate.
pub fn commutator_candidates(
    family: FilterFamily,
    pairs: usize,
    dim: usize,
    alpha_grid: &[f64],
    seed: u64,
) -> Result<[Vec<f64>; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cands: [Vec<f64>; 4] = [
        vec![0.0; alpha_grid.len()],
        vec![0.0; alpha_grid.len()],
        vec![0.0; alpha_grid.len()],
        vec![0.0; alpha_grid.len()],
    ];
    let cap = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..pairs {
        let style = p % 4;
        let (a, b) = match style {
            0 => {
                let a = crate::operator::random_operator_with_norm(
                    dim,
                    dim,
                    cap * rng.gen_range(0.4..=1.0),
                    &mut rng,
                )?;
                let b = crate::operator::random_operator_with_norm(
                    dim,
                    dim,
                    cap * rng.gen_range(0.4..=1.0),
                    &mut rng,
                )?;
                (a, b)
            }
            3 => {
                // Deterministic diagonal pair differing in one entry: the
                // scalar-case extremal structure. The perturbed level sweeps
                // a log ladder below the cap so every alpha's worst spectral
                // location gets probed regardless of the random draws.
                let rungs = 12;
                let u = ((p / 4) % rungs) as f64 / (rungs - 1) as f64;
                let a_top = cap * 10f64.powf(-1.8 * u);
                let diag: Vec<f64> = (0..dim).map(|i| a_top * 0.5f64.powi(i as i32)).collect();
                let a = LinearOperator::diagonal(&diag)?;
                let mut diag_b = diag;
                diag_b[0] -= 1e-7 * a_top;
                let b = LinearOperator::diagonal(&diag_b)?;
                (a, b)
            }
            _ => {
                let eps = if style == 1 {
                    10f64.powf(rng.gen_range(-6.0..=-3.0))
                } else {
                    0.05
                };
                let a = crate::operator::random_operator_with_norm(
                    dim,
                    dim,
                    cap * rng.gen_range(0.4..=0.85),
                    &mut rng,
                )?;
                let e = crate::operator::random_operator_with_norm(dim, dim, eps, &mut rng)?;
                let bm = a.dense().unwrap() + e.dense().unwrap();
                let b = LinearOperator::from_matrix(
                    bm,
                    a.weights_in().clone(),
                    a.weights_out().clone(),
                )?;
                (a, b)
            }
        };
        let am = a.dense().unwrap().clone_owned();
        let bm = b.dense().unwrap().clone_owned();
        let diff_norm = spec_norm(&(&am - &bm));
        if diff_norm <= 1e-14 {
            continue;
        }
        let sa = plain_svd(&am)?;
        let sb = plain_svd(&bm)?;
        let bt = bm.transpose();
        for (j, &alpha) in alpha_grid.iter().enumerate() {
            let ra = sym_fn_mat(&sa, |lam| r_scalar(family, alpha, lam));
            let rb = sym_fn_mat(&sb, |lam| r_scalar(family, alpha, lam));
            let d = &ra - &rb;
            let dbt = &d * &bt;
            cands[0][j] = cands[0][j].max(spec_norm(&d) * alpha.sqrt() / diff_norm);
            cands[1][j] = cands[1][j].max(spec_norm(&dbt) / diff_norm);
            cands[2][j] = cands[2][j].max(spec_norm(&(&am * &dbt)) / (alpha.sqrt() * diff_norm));
            let ga = sym_fn_mat(&sa, |lam| g_scalar(family, alpha, lam));
            let gb = sym_fn_mat(&sb, |lam| g_scalar(family, alpha, lam));
            let gd = (&ga - &gb) * &bt;
            cands[3][j] = cands[3][j].max(spec_norm(&gd) * alpha / diff_norm);
        }
    }
    Ok(cands)
}

const COMMUTATOR_NAMES: [&str; 4] = [
    "residual commutator, alpha^{-1/2} scaling (c6)",
    "adjoint-sided residual commutator, O(1) scaling (c6)",
    "two-sided residual commutator, alpha^{1/2} scaling (c6)",
    "adjoint-sided filter commutator, alpha^{-1} scaling (c6)",
];

/// How much the commutator candidates may vary across the alpha grid while
/// still counting as "bounded": the content of the condition is a single
/// alpha-independent constant, and a spread within this factor over three
/// decades is consistent with one.
pub const COMMUTATOR_STABILITY_FACTOR: f64 = 4.0;

/// Commutator-scaling checks: measured c6 candidates for the four
/// inequalities, sampled over random 8x8 operator pairs. Each report passes
/// when its candidates are finite and their spread over the alpha grid stays
/// within [`COMMUTATOR_STABILITY_FACTOR`] -- boundedness is the content of
/// the condition, which fixes no numeric c6.
pub fn check_commutators(
    family: FilterFamily,
    trials: usize,
    alpha_grid: &[f64],
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let cands = commutator_candidates(family, trials, 8, alpha_grid, seed)?;
    let fname = family.name();
    Ok((0..4)
        .map(|i| {
            let c = &cands[i];
            let mut measured = 0.0_f64;
            let mut arg = f64::NAN;
            let mut low = f64::INFINITY;
            for (j, &v) in c.iter().enumerate() {
                if v > measured {
                    measured = v;
                    arg = alpha_grid[j];
                }
                low = low.min(v);
            }
            let spread = if low > 0.0 { measured / low } else { f64::INFINITY };
            let stable = measured.is_finite()
                && spread <= COMMUTATOR_STABILITY_FACTOR * (1.0 + 1e-9);
            CheckReport::new(
                format!("{fname}: {}", COMMUTATOR_NAMES[i]),
                measured,
                None,
                format!("argmax at alpha={arg:.3e}; spread over the alpha grid: factor {spread:.2}"),
            )
            .with_passed(stable)
        })
        .collect())
}

/// Empirical nonlinearity constants over sampled points of the domain ball.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearityEstimates {
    pub lipschitz: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

fn sample_ball_points(
    problem: &NonlinearProblem,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vector>> {
    let xt = problem
        .x_true()
        .ok_or(Error::Configuration("sampling needs x_true".into()))?;
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..problem.dim_x()).map(|_| StandardNormal.sample(rng)).collect();
            let dir = Vector::new(raw, xt.weights().clone())?;
            let n = dir.norm().max(1e-300);
            let radius = problem.rho() * rng.gen_range(0.0..=0.4);
            xt.axpy(radius / n, &dir)
        })
        .collect()
}

/// Minimal-sum nonnegative (K1, K2) satisfying a_i K1 + b_i K2 >= c_i for all
/// sampled constraints: a two-variable feasibility problem solved exactly over
/// the candidate vertices.
fn fit_k1_k2(constraints: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    let active: Vec<&(f64, f64, f64)> = constraints
        .iter()
        .filter(|(a, b, c)| *c > 1e-14 * (1.0 + a + b))
        .collect();
    if active.is_empty() {
        return Ok((0.0, 0.0));
    }
    for (a, b, c) in &active {
        if *a <= 1e-300 && *b <= 1e-300 && *c > 0.0 {
            return Err(Error::InsufficientData(
                "degenerate constraint with zero coefficients".into(),
            ));
        }
    }
    let feasible = |k1: f64, k2: f64| {
        k1 >= -1e-12
            && k2 >= -1e-12
            && active
                .iter()
                .all(|(a, b, c)| a * k1 + b * k2 >= c * (1.0 - 1e-9))
    };
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |k1: f64, k2: f64| {
        if feasible(k1, k2) {
            let sum = k1 + k2;
            if best.is_none_or(|(b1, b2)| sum < b1 + b2) {
                best = Some((k1.max(0.0), k2.max(0.0)));
            }
        }
    };
    // Axis intercepts.
    let k1_only = active
        .iter()
        .map(|(a, _, c)| if *a > 1e-300 { c / a } else { f64::INFINITY })
        .fold(0.0_f64, f64::max);
    consider(k1_only, 0.0);
    let k2_only = active
        .iter()
        .map(|(_, b, c)| if *b > 1e-300 { c / b } else { f64::INFINITY })
        .fold(0.0_f64, f64::max);
    consider(0.0, k2_only);
    // Pairwise intersections.
    for (i, (a1, b1, c1)) in active.iter().enumerate() {
        for (a2, b2, c2) in active.iter().skip(i + 1) {
            let det = a1 * b2 - a2 * b1;
            if det.abs() <= 1e-14 {
                continue;
            }
            let k1 = (c1 * b2 - c2 * b1) / det;
            let k2 = (a1 * c2 - a2 * c1) / det;
            consider(k1, k2);
        }
    }
    best.ok_or(Error::InsufficientData(
        "no feasible nonnegative (K1, K2) found".into(),
    ))
}

fn nonlinearity_estimates_impl(
    problem: &NonlinearProblem,
    samples: usize,
    seed: u64,
) -> Result<(NonlinearityEstimates, bool)> {
    if samples < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_ball_points(problem, samples, &mut rng)?;
    let mats: Vec<DMatrix<f64>> = points
        .iter()
        .map(|p| problem.derivative(p).and_then(|a| conjugated(&a)))
        .collect::<Result<_>>()?;
    let ops: Vec<LinearOperator> = points
        .iter()
        .map(|p| problem.derivative(p))
        .collect::<Result<_>>()?;

    let mut lipschitz = 0.0_f64;
    let mut k0 = 0.0_f64;
    let mut rank_deficient = false;
    let mut constraints = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let dist = points[i].sub(&points[j])?.norm();
            if dist <= 1e-12 {
                continue;
            }
            if i < j {
                lipschitz = lipschitz.max(spec_norm(&(&mats[i] - &mats[j])) / dist);
            }
            // Factorization estimate: R solving F'(x_j) R = F'(x_i), identity
            // on the numerically null subspace of F'(x_j).
            let svd_j = plain_svd(&mats[j])?;
            let smax = svd_j.sigma.iter().cloned().fold(0.0, f64::max);
            let thresh = 1e-10 * smax;
            let n = mats[j].ncols();
            let mut r = DMatrix::identity(n, n);
            let mut rank = 0;
            for (idx, s) in svd_j.sigma.iter().enumerate() {
                if *s <= thresh {
                    continue;
                }
                rank += 1;
                // Replace the v_idx-row component of I with sigma^{-1} u_idx^T M_i.
                let u_col = svd_j.u.column(idx);
                let coeff_row = u_col.transpose() * &mats[i] / *s;
                let v_row = svd_j.v_t.row(idx);
                for a in 0..n {
                    for bcol in 0..n {
                        r[(a, bcol)] += v_row[a] * (coeff_row[bcol] - v_row[bcol]);
                    }
                }
            }
            if rank < n {
                rank_deficient = true;
            }
            k0 = k0.max(spec_norm(&(&r - DMatrix::identity(n, n))) / dist);
            // Difference constraints for (K1, K2) on two random probes.
            if i < j {
                for _ in 0..2 {
                    let w = {
                        let raw: Vec<f64> =
                            (0..problem.dim_x()).map(|_| StandardNormal.sample(&mut rng)).collect();
                        Vector::new(raw, points[i].weights().clone())?
                    };
                    let fz_w = ops[j].apply(&w)?.norm();
                    let diff_w = ops[i].apply(&w)?.sub(&ops[j].apply(&w)?)?.norm();
                    let step = points[i].sub(&points[j])?;
                    let fz_step = ops[j].apply(&step)?.norm();
                    constraints.push((dist * fz_w, fz_step * w.norm(), diff_w));
                }
            }
        }
    }
    let (k1, k2) = fit_k1_k2(&constraints)?;
    Ok((
        NonlinearityEstimates {
            lipschitz,
            k0,
            k1,
            k2,
        },
        rank_deficient,
    ))
}

fn conjugated(a: &LinearOperator) -> Result<DMatrix<f64>> {
    // Weighted operator norms equal plain 2-norms of the conjugated matrix.
    a.conjugated_matrix()
}

/// Sampled nonlinearity constants: the Lipschitz constant of the derivative,
/// the factorization constant K0, the difference-splitting pair (K1, K2) and
/// a Taylor-remainder cross-check. All values are heuristic: sampled lower
/// bounds (L, K0) or feasible fits (K1, K2), not certified suprema.
pub fn estimate_nonlinearity(
    problem: &NonlinearProblem,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let (est, rank_deficient) = nonlinearity_estimates_impl(problem, samples, seed)?;
    let rank_note = if rank_deficient {
        "; restricted to the numerically nonzero singular subspace"
    } else {
        ""
    };
    // Taylor cross-check on fresh samples.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1CE);
    let fresh = sample_ball_points(problem, samples.clamp(2, 8), &mut rng)?;
    let mut taylor = 0.0_f64;
    for i in 0..fresh.len() {
        for j in 0..fresh.len() {
            if i == j {
                continue;
            }
            let step = fresh[i].sub(&fresh[j])?;
            let dist = step.norm();
            if dist <= 1e-12 {
                continue;
            }
            let defect = problem
                .forward(&fresh[i])?
                .sub(&problem.forward(&fresh[j])?)?
                .sub(&problem.derivative(&fresh[j])?.apply(&step)?)?
                .norm();
            let denom = 0.5 * est.lipschitz * dist * dist;
            if defect <= 1e-13 {
                continue;
            }
            taylor = taylor.max(defect / denom.max(1e-300));
        }
    }
    Ok(vec![
        CheckReport::new(
            "derivative Lipschitz constant L (heuristic sampled lower bound)",
            est.lipschitz,
            None,
            format!("{samples} ball samples"),
        ),
        CheckReport::new(
            "derivative factorization constant K0 (heuristic)",
            est.k0,
            None,
            format!("{samples} ball samples{rank_note}"),
        ),
        CheckReport::new(
            "derivative difference constant K1 (heuristic feasibility fit)",
            est.k1,
            None,
            "minimal K1+K2 over sampled constraints",
        ),
        CheckReport::new(
            "derivative difference constant K2 (heuristic feasibility fit)",
            est.k2,
            None,
            "minimal K1+K2 over sampled constraints",
        ),
        CheckReport::new(
            "Taylor remainder vs (L/2)||x-z||^2 on fresh samples",
            taylor,
            Some(1.5),
            "20%+ slack over the sampled L",
        ),
    ])
}

/// Strengthened, derivative-structured commutator checks on a concrete
/// problem: measured c7/c8 candidates with the heuristic K estimates in the
/// denominators. Linear problems produce identically-zero left-hand sides.
pub fn check_strengthened_commutators(
    problem: &NonlinearProblem,
    family: FilterFamily,
    sample_pairs: usize,
    alpha_grid: &[f64],
    seed: u64,
) -> Result<Vec<CheckReport>> {
    if sample_pairs == 0 {
        return Err(Error::InsufficientData("need at least one sample pair".into()));
    }
    let (est, _) = nonlinearity_estimates_impl(problem, (2 * sample_pairs).max(4), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED5);
    let xs = sample_ball_points(problem, sample_pairs, &mut rng)?;
    let zs = sample_ball_points(problem, sample_pairs, &mut rng)?;
    let mut c7 = 0.0_f64;
    let mut c8 = 0.0_f64;
    let mut arg7 = String::from("all left-hand sides vanished (linear problem)");
    let mut arg8 = arg7.clone();
    for (pair_idx, (x, z)) in xs.iter().zip(zs.iter()).enumerate() {
        let step = x.sub(z)?;
        let dist = step.norm();
        if dist <= 1e-12 {
            continue;
        }
        let ax = problem.derivative(x)?;
        let az = problem.derivative(z)?;
        let axm = conjugated(&ax)?;
        let azm = conjugated(&az)?;
        let sx = plain_svd(&axm)?;
        let sz = plain_svd(&azm)?;
        let fx_step = ax.apply(&step)?.norm();
        let fz_step = az.apply(&step)?.norm();
        for &alpha in alpha_grid {
            let rx = sym_fn_mat(&sx, |lam| r_scalar(family, alpha, lam));
            let rz = sym_fn_mat(&sz, |lam| r_scalar(family, alpha, lam));
            let d = &rx - &rz;
            let lhs1 = spec_norm(&d);
            if lhs1 > 1e-13 {
                let den = est.k0 * dist;
                let cand = lhs1 / den.max(1e-300);
                if cand > c7 {
                    c7 = cand;
                    arg7 = format!("pair {pair_idx}, alpha={alpha:.3e}");
                }
            }
            let lhs2 = spec_norm(&(&axm * &d));
            if lhs2 > 1e-13 {
                let den = (est.k0 + est.k1) * alpha.sqrt() * dist + est.k2 * (fx_step + fz_step);
                let cand = lhs2 / den.max(1e-300);
                if cand > c8 {
                    c8 = cand;
                    arg8 = format!("pair {pair_idx}, alpha={alpha:.3e}");
                }
            }
        }
    }
    let fname = family.name();
    Ok(vec![
        CheckReport::new(
            format!("{fname}: structured residual commutator c7 (heuristic K0)"),
            c7,
            None,
            arg7,
        ),
        CheckReport::new(
            format!("{fname}: structured two-sided commutator c8 (heuristic K0..K2)"),
            c8,
            None,
            arg8,
        ),
    ])
}

/// Positivity scan of the zero-based Lardy residual over the grids. This is a
/// negative control: the scan is expected to FAIL by locating a witness with
/// r <= 0, which is why the solver uses the 1-based sum.
pub fn check_lardy_zero_based_positivity(
    lambda_grid: &[f64],
    alpha_grid: &[f64],
) -> CheckReport {
    let mut min_r = f64::INFINITY;
    let mut witness = (f64::NAN, f64::NAN);
    for &alpha in alpha_grid {
        if alpha > 1.0 {
            continue;
        }
        for &lam in lambda_grid {
            let r = lardy_zero_based_r(alpha, lam).unwrap_or(f64::INFINITY);
            if r < min_r {
                min_r = r;
                witness = (alpha, lam);
            }
        }
    }
    CheckReport::new(
        "lardy zero-based sum: residual positivity (negative control)",
        min_r,
        None,
        format!(
            "minimum at (alpha={:.6e}, lambda={:.6e}); positivity requires r > 0",
            witness.0, witness.1
        ),
    )
    .with_passed(min_r > 0.0)
}
