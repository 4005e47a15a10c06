use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;

/// A point of the finite-dimensional state space.
pub type State = DVector<f64>;

/// The semi-discretized generator `A` together with the inner product
/// `⟨x, y⟩ = xᵀ M y` of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOperator {
    matrix: DMatrix<f64>,
    metric: DMatrix<f64>,
    // metric = L Lᵀ
    factor: DMatrix<f64>,
    factor_inv_t: DMatrix<f64>,
    identity_metric: bool,
}

impl GeneratorOperator {
    pub fn new(matrix: DMatrix<f64>, metric: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(invalid("generator must be a non-empty square matrix"));
        }
        if metric.nrows() != n || metric.ncols() != n {
            return Err(Error::Dimension { expected: n, found: metric.nrows() });
        }
        if matrix.iter().chain(metric.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator or metric entry".into()));
        }
        let scale = metric.amax().max(f64::MIN_POSITIVE);
        if (&metric - metric.transpose()).amax() > 1e-12 * scale {
            return Err(Error::MetricNotSpd);
        }
        let identity_metric = metric == DMatrix::identity(n, n);
        let chol = metric.clone().cholesky().ok_or(Error::MetricNotSpd)?;
        let factor = chol.l();
        let factor_inv_t = factor
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::MetricNotSpd)?
            .transpose();
        Ok(GeneratorOperator { matrix, metric, factor, factor_inv_t, identity_metric })
    }

    pub fn with_identity_metric(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// Lower-triangular `L` with `metric = L Lᵀ`.
    pub fn metric_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn has_identity_metric(&self) -> bool {
        self.identity_metric
    }

    /// `√(xᵀ M x)`.
    pub fn metric_norm(&self, x: &State) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: x.len() });
        }
        Ok(self.norm(x))
    }

    /// [`Self::metric_norm`] for a state already known to have the right dimension.
    pub fn norm(&self, x: &State) -> f64 {
        if self.identity_metric {
            x.norm()
        } else {
            self.factor.tr_mul(x).norm()
        }
    }

    /// `Lᵀ op L⁻ᵀ`: the operator expressed in coordinates where the metric is Euclidean.
    pub fn to_euclidean(&self, op: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity_metric {
            op.clone()
        } else {
            self.factor.tr_mul(&(op * &self.factor_inv_t))
        }
    }

    /// Metric operator norm `sup ‖op x‖ / ‖x‖`.
    pub fn operator_norm(&self, op: &DMatrix<f64>) -> f64 {
        spectral_norm(&self.to_euclidean(op))
    }

    /// Logarithmic norm of `op` in the metric: the largest eigenvalue of its symmetric part.
    pub fn log_norm(&self, op: &DMatrix<f64>) -> f64 {
        let e = self.to_euclidean(op);
        let sym = (&e + e.transpose()) * 0.5;
        sym.symmetric_eigenvalues().max()
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().max()
}

/// The bounded delay-feedback operator `B` with its metric operator norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackOperator {
    matrix: DMatrix<f64>,
    norm: f64,
}

impl FeedbackOperator {
    pub fn new(matrix: DMatrix<f64>, generator: &GeneratorOperator) -> Result<Self> {
        Self::check_shape(&matrix, generator)?;
        let norm = generator.operator_norm(&matrix);
        Ok(FeedbackOperator { matrix, norm })
    }

    /// Uses a declared norm, which must dominate the computed one.
    pub fn with_declared_norm(matrix: DMatrix<f64>, generator: &GeneratorOperator, norm: f64) -> Result<Self> {
        Self::check_shape(&matrix, generator)?;
        let computed = generator.operator_norm(&matrix);
        if !(norm >= computed * (1.0 - 1e-12)) {
            return Err(invalid(format!("declared feedback norm {norm} is below the computed norm {computed}")));
        }
        Ok(FeedbackOperator { matrix, norm })
    }

    fn check_shape(matrix: &DMatrix<f64>, generator: &GeneratorOperator) -> Result<()> {
        let n = generator.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension { expected: n, found: matrix.nrows() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feedback entry".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearMap {
    /// `G(x) = L x / (1 + ‖x‖)`, which is `L`-Lipschitz in any inner-product norm.
    Saturation,
    /// `G(x) = N x`.
    Linear(DMatrix<f64>),
    /// The scalar expression in `u` applied to each component.
    Componentwise(Expr),
}

/// A Lipschitz nonlinearity `G` with `G(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    map: NonlinearMap,
    lipschitz: f64,
}

impl Nonlinearity {
    pub fn saturation(lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(invalid("Lipschitz constant must be finite and nonnegative"));
        }
        Ok(Nonlinearity { map: NonlinearMap::Saturation, lipschitz })
    }

    pub fn linear(matrix: DMatrix<f64>, generator: &GeneratorOperator) -> Result<Self> {
        let fb = FeedbackOperator::new(matrix, generator)?;
        let lipschitz = fb.norm();
        Ok(Nonlinearity { map: NonlinearMap::Linear(fb.matrix), lipschitz })
    }

    pub fn componentwise(expr: Expr, lipschitz: f64) -> Result<Self> {
        if expr.variables() != ["u"] {
            return Err(invalid("componentwise nonlinearity must be an expression in u"));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(invalid("Lipschitz constant must be finite and nonnegative"));
        }
        Ok(Nonlinearity { map: NonlinearMap::Componentwise(expr), lipschitz })
    }

    pub fn map(&self) -> &NonlinearMap {
        &self.map
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, generator: &GeneratorOperator, x: &State) -> State {
        match &self.map {
            NonlinearMap::Saturation => x * (self.lipschitz / (1.0 + generator.norm(x))),
            NonlinearMap::Linear(n) => n * x,
            NonlinearMap::Componentwise(e) => x.map(|v| e.eval1(v)),
        }
    }

    /// Checks `G(0) = 0` exactly and the Lipschitz bound on seeded random pairs.
    pub fn validate(&self, generator: &GeneratorOperator) -> Result<()> {
        let n = generator.dim();
        if let NonlinearMap::Linear(m) = &self.map {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension { expected: n, found: m.nrows() });
            }
        }
        let zero = State::zeros(n);
        if self.apply(generator, &zero).iter().any(|v| *v != 0.0) {
            return Err(invalid("nonlinearity must satisfy G(0) = 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x6c69_7073);
        for i in 0..96 {
            let scale = [1e-3, 1.0, 1e3][i % 3];
            let x = State::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0));
            let y = if i % 2 == 0 {
                State::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
            } else {
                &x + State::from_fn(n, |_, _| 1e-4 * scale * rng.random_range(-1.0..1.0))
            };
            let lhs = generator.norm(&(self.apply(generator, &x) - self.apply(generator, &y)));
            let rhs = self.lipschitz * generator.norm(&(&x - &y));
            if !(lhs <= rhs * (1.0 + 1e-12) + 1e-12) {
                return Err(invalid(format!(
                    "nonlinearity violates its Lipschitz constant {}: ‖G(x)-G(y)‖ = {lhs:e} > {rhs:e}",
                    self.lipschitz
                )));
            }
        }
        Ok(())
    }
}
