//! Concrete inverse-problem instances (diagonal synthetic operator, 1-D
//! elliptic parameter identification), source-condition construction of the
//! initial guess, scaling enforcement and exact-norm noise generation.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filters::{beta0, family_constants, FilterFamily};
use crate::operator::{op_norm_estimate, svd_dense, LinearOperator};
use crate::space::{unit_weights, weights_from, Vector, Weights};

type ForwardFn = Arc<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;
type DerivativeFn = Arc<dyn Fn(&Vector) -> Result<LinearOperator> + Send + Sync>;

/// A nonlinear forward problem F: X -> Y with a Frechet-derivative factory,
/// a domain ball radius rho around the (optional) exact solution, and the
/// inner-product weights of both spaces. Immutable; safe to share across
/// concurrent runs.
#[derive(Clone)]
pub struct NonlinearProblem {
    dim_x: usize,
    dim_y: usize,
    weights_x: Weights,
    weights_y: Weights,
    forward: ForwardFn,
    derivative: DerivativeFn,
    rho: f64,
    x_true: Option<Vector>,
}

impl std::fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("dim_x", &self.dim_x)
            .field("dim_y", &self.dim_y)
            .field("rho", &self.rho)
            .field("x_true", &self.x_true.is_some())
            .finish()
    }
}

impl NonlinearProblem {
    pub fn new(
        weights_x: Weights,
        weights_y: Weights,
        rho: f64,
        forward: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
        derivative: impl Fn(&Vector) -> Result<LinearOperator> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Configuration(format!("rho must be positive, got {rho}")));
        }
        Ok(Self {
            dim_x: weights_x.len(),
            dim_y: weights_y.len(),
            weights_x,
            weights_y,
            forward: Arc::new(forward),
            derivative: Arc::new(derivative),
            rho,
            x_true: None,
        })
    }

    /// Attaches the exact solution; `forward(x_true)` then defines the exact
    /// data.
    pub fn with_solution(mut self, x_true: Vector) -> Result<Self> {
        if x_true.len() != self.dim_x {
            return Err(Error::DimensionMismatch {
                expected: self.dim_x,
                got: x_true.len(),
                context: "x_true",
            });
        }
        self.x_true = Some(x_true);
        Ok(self)
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn weights_x(&self) -> &Weights {
        &self.weights_x
    }

    pub fn weights_y(&self) -> &Weights {
        &self.weights_y
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn x_true(&self) -> Option<&Vector> {
        self.x_true.as_ref()
    }

    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        (self.forward)(x)
    }

    pub fn derivative(&self, x: &Vector) -> Result<LinearOperator> {
        (self.derivative)(x)
    }

    /// Exact data F(x_true); requires the solution to be attached.
    pub fn exact_data(&self) -> Result<Vector> {
        let xt = self
            .x_true
            .as_ref()
            .ok_or(Error::Configuration("problem has no exact solution attached".into()))?;
        self.forward(xt)
    }
}

/// Linear diagonal test problem F(x) = diag(sigma) x with unit weights. All
/// structure assumptions hold trivially (constant derivative). Requires
/// sigma_i in (0, 1/sqrt(2)].
pub fn diagonal_problem(sigma: &[f64], rho: f64) -> Result<NonlinearProblem> {
    let bound = std::f64::consts::FRAC_1_SQRT_2;
    for &s in sigma {
        if !(s > 0.0) {
            return Err(Error::Configuration(format!(
                "diagonal entries must be positive, got {s}"
            )));
        }
        if s > bound + 1e-12 {
            return Err(Error::ScalingViolation { norm: s, bound });
        }
    }
    let op = Arc::new(LinearOperator::diagonal(sigma)?);
    let op_fwd = op.clone();
    let n = sigma.len();
    NonlinearProblem::new(
        unit_weights(n),
        unit_weights(n),
        rho,
        move |x: &Vector| op_fwd.apply(x),
        move |_x: &Vector| Ok((*op).clone()),
    )
}

/// Tridiagonal system (-u'' + c u = f discretized) with constant
/// off-diagonals; solved by the Thomas algorithm with positivity-checked
/// pivots.
struct Tridiag {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiag {
    fn new(c: &[f64], h: f64) -> Self {
        let inv_h2 = 1.0 / (h * h);
        Tridiag {
            diag: c.iter().map(|ci| 2.0 * inv_h2 + ci).collect(),
            off: -inv_h2,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot > 1e-300) {
            return Err(Error::IllPosedInstance(
                "state operator lost positive definiteness".into(),
            ));
        }
        cp[0] = self.off / pivot;
        dp[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.off * cp[i - 1];
            if !(pivot > 1e-300) {
                return Err(Error::IllPosedInstance(
                    "state operator lost positive definiteness".into(),
                ));
            }
            cp[i] = self.off / pivot;
            dp[i] = (rhs[i] - self.off * dp[i - 1]) / pivot;
        }
        let mut u = vec![0.0; n];
        u[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = dp[i] - cp[i] * u[i + 1];
        }
        Ok(u)
    }
}

/// 1-D elliptic parameter identification: recover the coefficient c in
/// -u'' + c u = f on (0,1), u(0)=g0, u(1)=g1, from the state u. Centered
/// second differences on n interior points, mesh h = 1/(n+1), discrete-L2
/// weights h on both spaces. The derivative is h |-> -A(c)^{-1}(h .* u(c))
/// and its adjoint w |-> -u(c) .* (A(c)^{-1} w) uses the self-adjointness of
/// A(c) in the h-weighted product.
pub fn elliptic_problem(
    n: usize,
    f: &Vector,
    g0: f64,
    g1: f64,
    c_true: &Vector,
    rho: f64,
) -> Result<NonlinearProblem> {
    if n < 8 {
        return Err(Error::Configuration(format!("grid size must be >= 8, got {n}")));
    }
    if f.len() != n || c_true.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len().min(c_true.len()),
            context: "elliptic forcing / coefficient length",
        });
    }
    if let Some((i, &bad)) = c_true.entries().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::Configuration(format!(
            "c_true must be nonnegative, entry {i} is {bad}"
        )));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let weights = weights_from(vec![h; n])?;
    let inv_h2 = 1.0 / (h * h);
    let mut rhs = f.entries().to_vec();
    rhs[0] += g0 * inv_h2;
    rhs[n - 1] += g1 * inv_h2;
    let rhs = Arc::new(rhs);

    let rhs_fwd = rhs.clone();
    let w_fwd = weights.clone();
    let forward = move |c: &Vector| -> Result<Vector> {
        if c.len() != rhs_fwd.len() {
            return Err(Error::DimensionMismatch {
                expected: rhs_fwd.len(),
                got: c.len(),
                context: "elliptic coefficient",
            });
        }
        let u = Tridiag::new(c.entries(), h).solve(&rhs_fwd)?;
        Vector::new(u, w_fwd.clone())
    };

    let rhs_der = rhs.clone();
    let w_der = weights.clone();
    let derivative = move |c: &Vector| -> Result<LinearOperator> {
        let tri = Tridiag::new(c.entries(), h);
        let u = tri.solve(&rhs_der)?;
        // Dense materialization: column j is -u_j * A(c)^{-1} e_j.
        let nn = c.len();
        let mut m = DMatrix::zeros(nn, nn);
        let mut e = vec![0.0; nn];
        for j in 0..nn {
            e[j] = 1.0;
            let col = tri.solve(&e)?;
            e[j] = 0.0;
            for i in 0..nn {
                m[(i, j)] = -u[j] * col[i];
            }
        }
        LinearOperator::from_matrix(m, w_der.clone(), w_der.clone())
    };

    NonlinearProblem::new(weights, weights_from(vec![h; n])?, rho, forward, derivative)?
        .with_solution(c_true.clone())
}

/// Smoothness model for the initial-guess offset x0 - x_true.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// x0 - x_true = (A*A)^nu omega.
    Holder { nu: f64 },
    /// x0 - x_true = (-ln A*A)^{-mu} omega; needs the spectrum of A*A inside
    /// (0, 1/2] so the logarithm is positive.
    Logarithmic { mu: f64 },
}

/// Source-condition specification: smoothness kind plus the representer.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub omega: Vector,
}

/// Result of building the initial guess from a source condition: the guess
/// itself and the norm of the part of omega outside the right singular span
/// (dropped, since it falls outside the orthogonal complement of the
/// derivative's null space).
#[derive(Debug, Clone)]
pub struct SourceConstruction {
    pub x0: Vector,
    pub dropped_norm: f64,
}

/// Builds x0 = x_true + phi(A*A) omega with A = F'(x_true), through the dense
/// SVD: phi(lambda) = lambda^nu (Holder) or (-ln lambda)^{-mu} (logarithmic).
pub fn construct_initial_guess(
    problem: &NonlinearProblem,
    spec: &SourceSpec,
) -> Result<SourceConstruction> {
    let x_true = problem
        .x_true()
        .ok_or(Error::Configuration("source construction needs x_true".into()))?;
    x_true.same_space(&spec.omega)?;
    match spec.kind {
        SourceKind::Holder { nu } => {
            if !(nu >= 0.0) {
                return Err(Error::Domain(format!("nu must be nonnegative, got {nu}")));
            }
        }
        SourceKind::Logarithmic { mu } => {
            if !(mu > 0.0) {
                return Err(Error::Domain(format!("mu must be positive, got {mu}")));
            }
        }
    }
    let a = problem.derivative(x_true)?;
    let factors = svd_dense(&a)?;
    let smax = factors.singular_values().first().copied().unwrap_or(0.0);
    if let SourceKind::Logarithmic { .. } = spec.kind {
        if smax * smax > 0.5 + 1e-9 {
            return Err(Error::Domain(format!(
                "logarithmic source needs spectrum of A*A in (0, 1/2], top eigenvalue is {}",
                smax * smax
            )));
        }
    }
    let threshold = 1e-12 * smax;
    let phi = |lam: f64| -> f64 {
        match spec.kind {
            SourceKind::Holder { nu } => {
                if nu == 0.0 {
                    1.0
                } else {
                    lam.powf(nu)
                }
            }
            SourceKind::Logarithmic { mu } => (-lam.ln()).powf(-mu),
        }
    };
    let mut offset = Vector::zeros(x_true.weights().clone());
    let mut projection = Vector::zeros(x_true.weights().clone());
    for (s, v) in factors
        .singular_values()
        .iter()
        .zip(factors.right_vectors().iter())
    {
        if *s <= threshold {
            continue;
        }
        let coeff = spec.omega.inner(v)?;
        offset = offset.axpy(phi(s * s) * coeff, v)?;
        projection = projection.axpy(coeff, v)?;
    }
    let dropped_norm = spec.omega.sub(&projection)?.norm();
    Ok(SourceConstruction {
        x0: x_true.add(&offset)?,
        dropped_norm,
    })
}

/// Rescales the problem so the scaling condition holds: estimates
/// M = max ||F'(x)|| over the sample points and multiplies F (hence the data
/// side) by s = min(1, bound / M) where
/// bound = min(c3 sqrt(alpha0), sqrt(beta0)). Callers must multiply the noise
/// level delta by the returned factor as well.
pub fn rescale_problem(
    problem: &NonlinearProblem,
    family: FilterFamily,
    alpha0: f64,
    sample_points: &[Vector],
) -> Result<(NonlinearProblem, f64)> {
    if sample_points.is_empty() {
        return Err(Error::InsufficientData("rescale needs at least one sample point".into()));
    }
    if let Some(xt) = problem.x_true() {
        for (i, p) in sample_points.iter().enumerate() {
            if p.sub(xt)?.norm() > problem.rho() * (1.0 + 1e-9) {
                return Err(Error::Configuration(format!(
                    "sample point {i} lies outside the domain ball"
                )));
            }
        }
    }
    let mut max_norm = 0.0_f64;
    for p in sample_points {
        let a = problem.derivative(p)?;
        max_norm = max_norm.max(op_norm_estimate(&a, 200, 0xBEE5));
    }
    if max_norm == 0.0 {
        return Err(Error::DegenerateProblem(
            "all sampled derivatives vanish; nothing to rescale".into(),
        ));
    }
    let consts = family_constants(family);
    let bound = (consts.c3 * alpha0.sqrt()).min(beta0(family, alpha0)?.sqrt());
    let s = (bound / max_norm).min(1.0);

    let fwd = problem.forward.clone();
    let der = problem.derivative.clone();
    let mut scaled = NonlinearProblem {
        dim_x: problem.dim_x,
        dim_y: problem.dim_y,
        weights_x: problem.weights_x.clone(),
        weights_y: problem.weights_y.clone(),
        forward: Arc::new(move |x: &Vector| fwd(x).map(|y| y.scale(s))),
        derivative: Arc::new(move |x: &Vector| der(x).map(|a| a.scaled(s))),
        rho: problem.rho,
        x_true: None,
    };
    if let Some(xt) = problem.x_true() {
        scaled = scaled.with_solution(xt.clone())?;
    }
    Ok((scaled, s))
}

/// Noise-realization specification: level plus RNG seed.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// Returns y + delta * xi / ||xi|| for a seeded uniform-symmetric draw xi, so
/// the perturbation has weighted norm exactly delta.
pub fn make_noisy(y: &Vector, spec: &NoiseSpec) -> Result<Vector> {
    if !(spec.delta >= 0.0) {
        return Err(Error::Domain(format!(
            "noise level must be nonnegative, got {}",
            spec.delta
        )));
    }
    if spec.delta == 0.0 {
        return Ok(y.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xi = Vector::zeros(y.weights().clone());
    loop {
        for e in xi.entries_mut() {
            *e = rng.gen_range(-1.0..1.0);
        }
        let n = xi.norm();
        if n > 0.0 {
            xi = xi.scale(1.0 / n);
            break;
        }
    }
    y.axpy(spec.delta, &xi)
}

/// Ratio ||F(x + t d) - F(x) - t F'(x) d|| / t^2 for each step size; bounded
/// ratios certify the second-order Taylor remainder of a Lipschitz-derivative
/// problem.
pub fn taylor_defect(
    problem: &NonlinearProblem,
    x: &Vector,
    direction: &Vector,
    steps: &[f64],
) -> Result<Vec<f64>> {
    let fx = problem.forward(x)?;
    let a = problem.derivative(x)?;
    let ad = a.apply(direction)?;
    steps
        .iter()
        .map(|&t| {
            let xt = x.axpy(t, direction)?;
            let ft = problem.forward(&xt)?;
            let defect = ft.sub(&fx)?.sub(&ad.scale(t))?.norm();
            Ok(defect / (t * t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::adjoint_defect;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_forward_and_adjoint() {
        let p = diagonal_problem(&[0.5, 0.25], 10.0).unwrap();
        let x = Vector::euclidean(vec![1.0, 2.0]).unwrap();
        let y = p.forward(&x).unwrap();
        assert_eq!(y.entries(), &[0.5, 0.5]);
        let a = p.derivative(&x).unwrap();
        assert!(adjoint_defect(&a, 100, 1).unwrap() <= 1e-14);
    }

    #[test]
    fn diagonal_rejects_oversized_sigma() {
        assert!(matches!(
            diagonal_problem(&[0.9], 1.0),
            Err(Error::ScalingViolation { .. })
        ));
        assert!(diagonal_problem(&[0.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn diagonal_is_linear_zero_lipschitz() {
        let p = diagonal_problem(&[0.5, 0.25], 10.0).unwrap();
        let x = Vector::euclidean(vec![0.3, -0.2]).unwrap();
        let z = Vector::euclidean(vec![-1.0, 2.0]).unwrap();
        let ax = p.derivative(&x).unwrap();
        let az = p.derivative(&z).unwrap();
        let dx = ax.dense().unwrap() - az.dense().unwrap();
        assert_eq!(dx.norm(), 0.0);
    }

    fn sine_elliptic(n: usize) -> NonlinearProblem {
        // c = 0, f = pi^2 sin(pi x): the continuous solution is sin(pi x).
        let h = 1.0 / (n as f64 + 1.0);
        let f: Vec<f64> = (1..=n)
            .map(|i| std::f64::consts::PI.powi(2) * (std::f64::consts::PI * i as f64 * h).sin())
            .collect();
        let w = weights_from(vec![h; n]).unwrap();
        let fv = Vector::new(f, w.clone()).unwrap();
        let c = Vector::zeros(w);
        elliptic_problem(n, &fv, 0.0, 0.0, &c, 1.0).unwrap()
    }

    #[test]
    fn elliptic_reproduces_sine_solution() {
        let n = 64;
        let p = sine_elliptic(n);
        let u = p.exact_data().unwrap();
        let h = 1.0 / (n as f64 + 1.0);
        let mut max_err = 0.0_f64;
        for (i, ui) in u.entries().iter().enumerate() {
            let x = (i + 1) as f64 * h;
            max_err = max_err.max((ui - (std::f64::consts::PI * x).sin()).abs());
        }
        assert!(max_err <= 1e-3, "discretization error {max_err}");
    }

    #[test]
    fn elliptic_adjoint_consistency() {
        let n = 32;
        let h = 1.0 / (n as f64 + 1.0);
        let w = weights_from(vec![h; n]).unwrap();
        let f = Vector::new(vec![3.0; n], w.clone()).unwrap();
        let c = Vector::new(
            (1..=n).map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * i as f64 * h).sin()).collect(),
            w.clone(),
        )
        .unwrap();
        let p = elliptic_problem(n, &f, 0.5, -0.25, &c, 1.0).unwrap();
        let a = p.derivative(&c).unwrap();
        assert!(adjoint_defect(&a, 100, 7).unwrap() <= 1e-10);
    }

    #[test]
    fn elliptic_taylor_second_order() {
        let n = 32;
        let p = sine_elliptic(n);
        let c = p.x_true().unwrap().clone();
        let dir = Vector::new(
            (0..n).map(|i| (0.3 + i as f64 / n as f64).cos()).collect(),
            c.weights().clone(),
        )
        .unwrap();
        let ratios = taylor_defect(&p, &c, &dir, &[1e-2, 1e-3, 1e-4]).unwrap();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max.is_finite() && max > 0.0);
        assert!(max / min <= 1.5, "ratios not quadratic: {ratios:?}");
    }

    #[test]
    fn elliptic_rejects_negative_coefficient() {
        let n = 8;
        let h = 1.0 / (n as f64 + 1.0);
        let w = weights_from(vec![h; n]).unwrap();
        let f = Vector::new(vec![1.0; n], w.clone()).unwrap();
        let mut c = vec![0.0; n];
        c[3] = -0.5;
        let c = Vector::new(c, w).unwrap();
        assert!(elliptic_problem(n, &f, 0.0, 0.0, &c, 1.0).is_err());
    }

    #[test]
    fn source_construction_diagonal_holder() {
        let p = diagonal_problem(&[0.5, 0.25], 10.0)
            .unwrap()
            .with_solution(Vector::euclidean(vec![1.0, -1.0]).unwrap())
            .unwrap();
        let spec = SourceSpec {
            kind: SourceKind::Holder { nu: 1.0 },
            omega: Vector::euclidean(vec![1.0, 1.0]).unwrap(),
        };
        let built = construct_initial_guess(&p, &spec).unwrap();
        let offset = built.x0.sub(p.x_true().unwrap()).unwrap();
        assert_relative_eq!(offset.entries()[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(offset.entries()[1], 0.0625, epsilon = 1e-14);
        assert_eq!(built.dropped_norm, 0.0);
    }

    #[test]
    fn source_construction_nu_zero_is_projection() {
        let p = diagonal_problem(&[0.5, 0.25], 10.0)
            .unwrap()
            .with_solution(Vector::euclidean(vec![0.0, 0.0]).unwrap())
            .unwrap();
        let omega = Vector::euclidean(vec![0.7, -0.3]).unwrap();
        let spec = SourceSpec {
            kind: SourceKind::Holder { nu: 0.0 },
            omega: omega.clone(),
        };
        let built = construct_initial_guess(&p, &spec).unwrap();
        assert!(built.x0.sub(&omega).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn source_construction_logarithmic() {
        let p = diagonal_problem(&[0.5, 0.25], 10.0)
            .unwrap()
            .with_solution(Vector::euclidean(vec![2.0, 3.0]).unwrap())
            .unwrap();
        let spec = SourceSpec {
            kind: SourceKind::Logarithmic { mu: 1.0 },
            omega: Vector::euclidean(vec![1.0, 0.0]).unwrap(),
        };
        let built = construct_initial_guess(&p, &spec).unwrap();
        let offset = built.x0.sub(p.x_true().unwrap()).unwrap();
        assert_relative_eq!(offset.entries()[0], 1.0 / (4.0_f64).ln(), epsilon = 1e-12);
        assert_relative_eq!(offset.entries()[0], 0.7213475204444817, epsilon = 1e-12);
        assert_relative_eq!(offset.entries()[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn source_construction_reports_null_space_mass() {
        // Rank-deficient derivative: the third coordinate lies outside the
        // right singular span, so that part of omega is dropped and reported.
        let m = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 0.0, 0.0, 0.25, 0.0]);
        let op = Arc::new(LinearOperator::from_matrix(m, unit_weights(3), unit_weights(2)).unwrap());
        let op2 = op.clone();
        let p = NonlinearProblem::new(
            unit_weights(3),
            unit_weights(2),
            10.0,
            move |x: &Vector| op.apply(x),
            move |_x: &Vector| Ok((*op2).clone()),
        )
        .unwrap()
        .with_solution(Vector::euclidean(vec![0.0, 0.0, 0.0]).unwrap())
        .unwrap();
        let spec = SourceSpec {
            kind: SourceKind::Holder { nu: 1.0 },
            omega: Vector::euclidean(vec![1.0, 1.0, 1.0]).unwrap(),
        };
        let built = construct_initial_guess(&p, &spec).unwrap();
        assert_relative_eq!(built.dropped_norm, 1.0, epsilon = 1e-12);
        assert_relative_eq!(built.x0.entries()[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(built.x0.entries()[1], 0.0625, epsilon = 1e-12);
        assert_relative_eq!(built.x0.entries()[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn source_construction_requires_solution() {
        let p = diagonal_problem(&[0.5], 1.0).unwrap();
        let spec = SourceSpec {
            kind: SourceKind::Holder { nu: 1.0 },
            omega: Vector::euclidean(vec![1.0]).unwrap(),
        };
        assert!(matches!(
            construct_initial_guess(&p, &spec),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn rescale_diagonal_problem() {
        let family = FilterFamily::IteratedTikhonov { order: 1 };
        let p = diagonal_problem(&[0.5, 0.25], 10.0)
            .unwrap()
            .with_solution(Vector::euclidean(vec![0.0, 0.0]).unwrap())
            .unwrap();
        let samples = vec![Vector::euclidean(vec![0.1, 0.1]).unwrap()];
        let (scaled, s) = rescale_problem(&p, family, 1.0, &samples).unwrap();
        let consts = family_constants(family);
        let bound = (consts.c3).min(beta0(family, 1.0).unwrap().sqrt());
        assert!(s <= 1.0);
        let a = scaled.derivative(&samples[0]).unwrap();
        assert!(op_norm_estimate(&a, 200, 3) <= bound + 1e-12);
        // Scaling twice is idempotent up to slack.
        let (_, s2) = rescale_problem(&scaled, family, 1.0, &samples).unwrap();
        assert_relative_eq!(s2, 1.0, epsilon = 1e-9);
        // Data scales with the factor.
        let y = p.exact_data().unwrap();
        let ys = scaled.exact_data().unwrap();
        assert!(ys.sub(&y.scale(s)).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn rescale_zero_operator_is_degenerate() {
        let p = NonlinearProblem::new(
            unit_weights(2),
            unit_weights(2),
            1.0,
            |x: &Vector| Ok(x.scale(0.0)),
            |_x: &Vector| LinearOperator::from_rows(2, 2, &[0.0; 4]),
        )
        .unwrap();
        let samples = vec![Vector::euclidean(vec![0.4, 0.1]).unwrap()];
        assert!(matches!(
            rescale_problem(&p, FilterFamily::Landweber, 1.0, &samples),
            Err(Error::DegenerateProblem(_))
        ));
    }

    #[test]
    fn noise_has_exact_norm_and_is_deterministic() {
        let y = Vector::euclidean(vec![1.0, -2.0, 0.5]).unwrap();
        let spec = NoiseSpec { delta: 1e-3, seed: 42 };
        let y1 = make_noisy(&y, &spec).unwrap();
        let y2 = make_noisy(&y, &spec).unwrap();
        assert_relative_eq!(y1.sub(&y).unwrap().norm(), 1e-3, epsilon = 1e-15);
        assert_eq!(y1.entries(), y2.entries());
        let y3 = make_noisy(&y, &NoiseSpec { delta: 1e-3, seed: 43 }).unwrap();
        assert!(y3.sub(&y1).unwrap().norm() > 0.0);
        let y0 = make_noisy(&y, &NoiseSpec { delta: 0.0, seed: 42 }).unwrap();
        assert_eq!(y0.entries(), y.entries());
    }

    #[test]
    fn noise_exact_norm_under_nonuniform_weights() {
        let w = weights_from(vec![0.1, 2.0, 0.7]).unwrap();
        let y = Vector::new(vec![1.0, 1.0, 1.0], w).unwrap();
        let yd = make_noisy(&y, &NoiseSpec { delta: 0.05, seed: 9 }).unwrap();
        assert_relative_eq!(yd.sub(&y).unwrap().norm(), 0.05, epsilon = 1e-15);
    }
}
