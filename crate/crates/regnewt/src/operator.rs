//! Matrix-free linear operators between weighted spaces, with an optional
//! dense materialization, a power-iteration norm estimator and a dense SVD
//! that serves as the spectral oracle for the rest of the crate.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::space::{unit_weights, Vector, Weights};

type ApplyFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Maximum dimension accepted by [`svd_dense`]. The oracle is meant to be
/// trustworthy at desk scale, not fast.
pub const SVD_DIM_CAP: usize = 2048;

/// Linear map between two weighted spaces, given by apply/adjoint-apply
/// callbacks on raw entries. Immutable after construction; callbacks must be
/// pure, so an operator can be shared across threads.
#[derive(Clone)]
pub struct LinearOperator {
    dim_in: usize,
    dim_out: usize,
    weights_in: Weights,
    weights_out: Weights,
    apply: ApplyFn,
    apply_adjoint: ApplyFn,
    dense: Option<Arc<DMatrix<f64>>>,
}

impl std::fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearOperator")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("dense", &self.dense.is_some())
            .finish()
    }
}

impl LinearOperator {
    /// Matrix-free constructor. `apply` maps raw entry slices of length
    /// `dim_in` to length `dim_out`; `apply_adjoint` must realize the adjoint
    /// with respect to the weighted products.
    pub fn matrix_free(
        dim_in: usize,
        dim_out: usize,
        weights_in: Weights,
        weights_out: Weights,
        apply: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        apply_adjoint: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if weights_in.len() != dim_in || weights_out.len() != dim_out || dim_in == 0 || dim_out == 0
        {
            return Err(Error::DimensionMismatch {
                expected: dim_in.max(1),
                got: weights_in.len(),
                context: "operator dimensions vs weights",
            });
        }
        Ok(Self {
            dim_in,
            dim_out,
            weights_in,
            weights_out,
            apply: Arc::new(apply),
            apply_adjoint: Arc::new(apply_adjoint),
            dense: None,
        })
    }

    /// Dense constructor. The matrix acts on raw entries; the adjoint is
    /// derived from it through the weighted products,
    /// `A* w = W_in^{-1} M^T W_out w`.
    pub fn from_matrix(matrix: DMatrix<f64>, weights_in: Weights, weights_out: Weights) -> Result<Self> {
        let (dim_out, dim_in) = (matrix.nrows(), matrix.ncols());
        if weights_in.len() != dim_in || weights_out.len() != dim_out || dim_in == 0 || dim_out == 0
        {
            return Err(Error::DimensionMismatch {
                expected: dim_in.max(1),
                got: weights_in.len(),
                context: "matrix dimensions vs weights",
            });
        }
        let m = Arc::new(matrix);
        let m_apply = m.clone();
        let m_adj = m.clone();
        let win = weights_in.clone();
        let wout = weights_out.clone();
        let apply = move |x: &[f64]| -> Vec<f64> {
            let v = nalgebra::DVector::from_column_slice(x);
            (&*m_apply * v).data.into()
        };
        let apply_adjoint = move |y: &[f64]| -> Vec<f64> {
            let scaled: Vec<f64> = y.iter().zip(wout.iter()).map(|(v, w)| v * w).collect();
            let v = nalgebra::DVector::from_column_slice(&scaled);
            let mut t = m_adj.tr_mul(&v);
            for (ti, wi) in t.iter_mut().zip(win.iter()) {
                *ti /= wi;
            }
            t.data.into()
        };
        Ok(Self {
            dim_in,
            dim_out,
            weights_in,
            weights_out,
            apply: Arc::new(apply),
            apply_adjoint: Arc::new(apply_adjoint),
            dense: Some(m),
        })
    }

    /// Dense constructor from row-major data with unit weights.
    pub fn from_rows(dim_out: usize, dim_in: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != dim_out * dim_in {
            return Err(Error::DimensionMismatch {
                expected: dim_out * dim_in,
                got: row_major.len(),
                context: "row-major matrix data",
            });
        }
        Self::from_matrix(
            DMatrix::from_row_slice(dim_out, dim_in, row_major),
            unit_weights(dim_in),
            unit_weights(dim_out),
        )
    }

    /// Dense constructor with custom apply callbacks: the callbacks are used
    /// for application (they may exploit structure), the matrix backs the
    /// dense-only paths (SVD, Gram solves). Callers guarantee consistency.
    pub fn from_matrix_with_apply(
        matrix: DMatrix<f64>,
        weights_in: Weights,
        weights_out: Weights,
        apply: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        apply_adjoint: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut op = Self::matrix_free(
            matrix.ncols(),
            matrix.nrows(),
            weights_in,
            weights_out,
            apply,
            apply_adjoint,
        )?;
        op.dense = Some(Arc::new(matrix));
        Ok(op)
    }

    /// Square diagonal operator with unit weights; applies in O(n).
    pub fn diagonal(sigma: &[f64]) -> Result<Self> {
        let n = sigma.len();
        let d: Arc<[f64]> = sigma.to_vec().into();
        let d2 = d.clone();
        Self::from_matrix_with_apply(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(sigma)),
            unit_weights(n),
            unit_weights(n),
            move |x| x.iter().zip(d.iter()).map(|(xi, s)| s * xi).collect(),
            move |y| y.iter().zip(d2.iter()).map(|(yi, s)| s * yi).collect(),
        )
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn weights_in(&self) -> &Weights {
        &self.weights_in
    }

    pub fn weights_out(&self) -> &Weights {
        &self.weights_out
    }

    pub fn has_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Dense materialization acting on raw entries, when available.
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_deref()
    }

    pub(crate) fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        (self.apply)(x)
    }

    pub(crate) fn apply_adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        (self.apply_adjoint)(y)
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                got: x.len(),
                context: "operator apply",
            });
        }
        Vector::new(self.apply_raw(x.entries()), self.weights_out.clone())
    }

    pub fn apply_adjoint(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.dim_out {
            return Err(Error::DimensionMismatch {
                expected: self.dim_out,
                got: y.len(),
                context: "operator adjoint apply",
            });
        }
        Vector::new(self.apply_adjoint_raw(y.entries()), self.weights_in.clone())
    }

    /// Scales the operator by `s` (both apply and adjoint).
    pub fn scaled(&self, s: f64) -> Self {
        let a = self.apply.clone();
        let b = self.apply_adjoint.clone();
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            weights_in: self.weights_in.clone(),
            weights_out: self.weights_out.clone(),
            apply: Arc::new(move |x| a(x).into_iter().map(|v| s * v).collect()),
            apply_adjoint: Arc::new(move |y| b(y).into_iter().map(|v| s * v).collect()),
            dense: self.dense.as_ref().map(|m| Arc::new(m.as_ref() * s)),
        }
    }

    /// The plain matrix `W_out^{1/2} M W_in^{-1/2}` whose Euclidean geometry
    /// matches the weighted geometry of the operator. Requires a dense form.
    pub(crate) fn conjugated_matrix(&self) -> Result<DMatrix<f64>> {
        let m = self
            .dense()
            .ok_or(Error::UnsupportedOperator("no dense materialization"))?;
        let mut out = m.clone_owned();
        for i in 0..self.dim_out {
            let si = self.weights_out[i].sqrt();
            for j in 0..self.dim_in {
                out[(i, j)] *= si / self.weights_in[j].sqrt();
            }
        }
        Ok(out)
    }
}

/// Power-iteration estimate of the operator norm (largest singular value)
/// with respect to the weighted products. Deterministic for a fixed seed.
/// Returns 0 for the zero operator. The Rayleigh-quotient estimate never
/// exceeds the true largest singular value (up to rounding).
pub fn op_norm_estimate(a: &LinearOperator, iters: usize, seed: u64) -> f64 {
    assert!(iters >= 1, "op_norm_estimate requires iters >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..a.dim_in()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let wx = a.weights_in().clone();
    let norm_wx =
        |u: &[f64]| -> f64 { u.iter().zip(wx.iter()).map(|(x, w)| w * x * x).sum::<f64>().sqrt() };
    let nv = norm_wx(&v);
    if nv == 0.0 {
        v[0] = 1.0 / wx[0].sqrt();
    } else {
        v.iter_mut().for_each(|x| *x /= nv);
    }
    let mut lambda = 0.0_f64;
    for _ in 0..iters {
        let w = a.apply_adjoint_raw(&a.apply_raw(&v));
        // Rayleigh quotient of A*A at the unit vector v.
        lambda = v
            .iter()
            .zip(w.iter())
            .zip(wx.iter())
            .map(|((vi, wi), g)| g * vi * wi)
            .sum::<f64>();
        let nw = norm_wx(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda.max(0.0).sqrt()
}

/// Maximum normalized adjoint defect |<Au,v> - <u,A*v>| / (||u|| ||v|| scale)
/// over `trials` random pairs, with scale = max(1, estimated operator norm).
pub fn adjoint_defect(a: &LinearOperator, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = op_norm_estimate(a, 50, seed ^ 0x9e3779b97f4a7c15).max(1.0);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let u = Vector::new(
            (0..a.dim_in()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a.weights_in().clone(),
        )?;
        let v = Vector::new(
            (0..a.dim_out()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a.weights_out().clone(),
        )?;
        let lhs = a.apply(&u)?.inner(&v)?;
        let rhs = u.inner(&a.apply_adjoint(&v)?)?;
        let denom = (u.norm() * v.norm() * scale).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / denom);
    }
    Ok(worst)
}

/// Singular value decomposition of an operator with respect to the weighted
/// inner products: `A v_j = s_j u_j`, `A* u_j = s_j v_j`, with `{u_j}` and
/// `{v_j}` orthonormal in the weighted products of the output and input
/// spaces respectively. Singular values are nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    singular_values: Vec<f64>,
    left_vectors: Vec<Vector>,
    right_vectors: Vec<Vector>,
}

impl SvdFactors {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn left_vectors(&self) -> &[Vector] {
        &self.left_vectors
    }

    pub fn right_vectors(&self) -> &[Vector] {
        &self.right_vectors
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .take_while(|&&s| s > rel_tol * smax)
            .count()
    }

    /// Applies phi(A*A) to x spectrally: modes with singular value s get the
    /// factor phi(s^2); the orthogonal complement of the right singular span
    /// gets phi(0).
    pub fn apply_sym_fn(&self, phi: impl Fn(f64) -> f64, x: &Vector) -> Result<Vector> {
        let phi0 = phi(0.0);
        let mut out = x.scale(phi0);
        for (s, v) in self.singular_values.iter().zip(self.right_vectors.iter()) {
            let c = (phi(s * s) - phi0) * x.inner(v)?;
            out = out.axpy(c, v)?;
        }
        Ok(out)
    }

    /// Computes sum_j coeff(s_j) <b, u_j> v_j, the spectral form of maps like
    /// g(A*A) A* b (with coeff(s) = g(s^2) s).
    pub fn apply_adjoint_fn(&self, coeff: impl Fn(f64) -> f64, b: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(
            self.right_vectors
                .first()
                .map(|v| v.weights().clone())
                .ok_or(Error::DegenerateProblem("empty SVD".into()))?,
        );
        for ((s, u), v) in self
            .singular_values
            .iter()
            .zip(self.left_vectors.iter())
            .zip(self.right_vectors.iter())
        {
            let c = coeff(*s) * b.inner(u)?;
            out = out.axpy(c, v)?;
        }
        Ok(out)
    }

    /// Relative Frobenius reconstruction error against the operator's dense
    /// matrix.
    pub fn reconstruction_error(&self, a: &LinearOperator) -> Result<f64> {
        let m = a
            .dense()
            .ok_or(Error::UnsupportedOperator("no dense materialization"))?;
        // A x = sum_k s_k u_k <v_k, x>_W, so the raw matrix carries the input
        // weights: M = sum_k s_k u_k v_k^T W_in.
        let mut recon = DMatrix::zeros(a.dim_out(), a.dim_in());
        for ((s, u), v) in self
            .singular_values
            .iter()
            .zip(self.left_vectors.iter())
            .zip(self.right_vectors.iter())
        {
            for i in 0..a.dim_out() {
                for j in 0..a.dim_in() {
                    recon[(i, j)] += s * u.entries()[i] * v.entries()[j] * a.weights_in()[j];
                }
            }
        }
        let denom = m.norm().max(f64::MIN_POSITIVE);
        Ok((m - recon).norm() / denom)
    }
}

/// Dense SVD of the operator in the weighted geometry: the weights are
/// absorbed symmetrically, the plain SVD is taken, and the factors are mapped
/// back so that left/right vectors are orthonormal in the weighted products.
pub fn svd_dense(a: &LinearOperator) -> Result<SvdFactors> {
    if a.dim_in() > SVD_DIM_CAP || a.dim_out() > SVD_DIM_CAP {
        return Err(Error::UnsupportedOperator("dimensions exceed the dense SVD cap"));
    }
    let conj = a.conjugated_matrix()?;
    let svd = conj.svd(true, true);
    let u_hat = svd.u.ok_or(Error::NumericalFailure("SVD left factor missing".into()))?;
    let vt_hat = svd
        .v_t
        .ok_or(Error::NumericalFailure("SVD right factor missing".into()))?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut singular_values = Vec::with_capacity(k);
    let mut left_vectors = Vec::with_capacity(k);
    let mut right_vectors = Vec::with_capacity(k);
    for &idx in &order {
        singular_values.push(svd.singular_values[idx]);
        let u: Vec<f64> = (0..a.dim_out())
            .map(|i| u_hat[(i, idx)] / a.weights_out()[i].sqrt())
            .collect();
        let v: Vec<f64> = (0..a.dim_in())
            .map(|j| vt_hat[(idx, j)] / a.weights_in()[j].sqrt())
            .collect();
        left_vectors.push(Vector::new(u, a.weights_out().clone())?);
        right_vectors.push(Vector::new(v, a.weights_in().clone())?);
    }
    Ok(SvdFactors {
        singular_values,
        left_vectors,
        right_vectors,
    })
}

/// Random dense operator with unit weights and prescribed operator norm,
/// drawn from Gaussian entries. Test/diagnostic helper.
pub fn random_operator_with_norm(
    dim_out: usize,
    dim_in: usize,
    target_norm: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LinearOperator> {
    use rand_distr::{Distribution, StandardNormal};
    let data: Vec<f64> = (0..dim_out * dim_in)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let m = DMatrix::from_row_slice(dim_out, dim_in, &data);
    let smax = m.clone().svd(false, false).singular_values.max();
    if smax == 0.0 {
        return Err(Error::DegenerateProblem("zero random matrix".into()));
    }
    LinearOperator::from_matrix(
        m * (target_norm / smax),
        unit_weights(dim_in),
        unit_weights(dim_out),
    )
}
