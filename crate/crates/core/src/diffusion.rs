//! Diffusion models `dX = a^θ(X) dt + σ(X) dB`.
//!
//! Only the drift depends on θ; σ is parameter free so that the path measures
//! for different θ stay mutually absolutely continuous.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::ParameterVector;
use crate::Real;

pub trait DiffusionModel<S: Real>: Send + Sync {
    /// State dimension N.
    fn dimension(&self) -> usize;

    /// Brownian dimension d.
    fn noise_dimension(&self) -> usize;

    /// Names and nominal values of θ.
    fn parameters(&self) -> &ParameterVector<S>;

    fn state_names(&self) -> Vec<String> {
        (0..self.dimension()).map(|i| format!("x{i}")).collect()
    }

    /// `a^θ(x)`, length N.
    fn drift(&self, theta: &[S], x: &[S], out: &mut [S]);

    /// `σ(x)`, N × d.
    fn diffusion(&self, x: &[S], out: &mut Matrix<S>);

    /// `∇θ a(x)`, N × P.
    fn drift_gradient(&self, theta: &[S], x: &[S], out: &mut Matrix<S>);
}

fn non_finite<S: Real>(what: &'static str, x: &[S]) -> Error {
    Error::NonFinite {
        what,
        state: x.iter().map(|v| v.as_f64()).collect(),
    }
}

pub fn drift_eval<S: Real, M: DiffusionModel<S> + ?Sized>(model: &M, theta: &[S], x: &[S]) -> Result<Vec<S>> {
    let mut out = vec![S::zero(); model.dimension()];
    model.drift(theta, x, &mut out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(non_finite("drift", x))
    }
}

pub fn diffusion_eval<S: Real, M: DiffusionModel<S> + ?Sized>(model: &M, x: &[S]) -> Result<Matrix<S>> {
    let mut out = Matrix::zeros(model.dimension(), model.noise_dimension());
    model.diffusion(x, &mut out);
    if out.as_slice().iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(non_finite("diffusion", x))
    }
}

pub fn drift_gradient_eval<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    x: &[S],
) -> Result<Matrix<S>> {
    let mut out = Matrix::zeros(model.dimension(), model.parameters().len());
    model.drift_gradient(theta, x, &mut out);
    if out.as_slice().iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(non_finite("drift gradient", x))
    }
}

/// Logistic growth with linear multiplicative noise,
/// `dX = ν X (1 − X/K) dt + μ X dB`, θ = (ν, K).
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic<S> {
    parameters: ParameterVector<S>,
    /// Noise amplitude μ.
    pub noise: S,
}

impl<S: Real> Logistic<S> {
    pub fn new(growth: S, capacity: S, noise: S) -> Result<Self> {
        if capacity <= S::zero() || noise <= S::zero() {
            return Err(Error::Argument(
                "logistic capacity and noise amplitude must be positive".into(),
            ));
        }
        Ok(Self {
            parameters: ParameterVector::new(["nu", "K"], vec![growth, capacity])?,
            noise,
        })
    }
}

impl<S: Real> DiffusionModel<S> for Logistic<S> {
    fn dimension(&self) -> usize {
        1
    }

    fn noise_dimension(&self) -> usize {
        1
    }

    fn parameters(&self) -> &ParameterVector<S> {
        &self.parameters
    }

    fn state_names(&self) -> Vec<String> {
        vec!["X".into()]
    }

    #[inline]
    fn drift(&self, theta: &[S], x: &[S], out: &mut [S]) {
        out[0] = theta[0] * x[0] * (S::one() - x[0] / theta[1]);
    }

    #[inline]
    fn diffusion(&self, x: &[S], out: &mut Matrix<S>) {
        out[(0, 0)] = self.noise * x[0];
    }

    #[inline]
    fn drift_gradient(&self, theta: &[S], x: &[S], out: &mut Matrix<S>) {
        let ratio = x[0] / theta[1];
        out[(0, 0)] = x[0] * (S::one() - ratio);
        out[(0, 1)] = theta[0] * ratio * ratio;
    }
}

/// Brownian motion with drift, `dX = θ dt + dB`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftedBrownian<S> {
    parameters: ParameterVector<S>,
}

impl<S: Real> DriftedBrownian<S> {
    pub fn new(drift: S) -> Self {
        Self {
            parameters: ParameterVector::new(["theta"], vec![drift]).expect("single finite parameter"),
        }
    }
}

impl<S: Real> DiffusionModel<S> for DriftedBrownian<S> {
    fn dimension(&self) -> usize {
        1
    }

    fn noise_dimension(&self) -> usize {
        1
    }

    fn parameters(&self) -> &ParameterVector<S> {
        &self.parameters
    }

    fn drift(&self, theta: &[S], _x: &[S], out: &mut [S]) {
        out[0] = theta[0];
    }

    fn diffusion(&self, _x: &[S], out: &mut Matrix<S>) {
        out[(0, 0)] = S::one();
    }

    fn drift_gradient(&self, _theta: &[S], _x: &[S], out: &mut Matrix<S>) {
        out[(0, 0)] = S::one();
    }
}

type DriftFn<S> = Box<dyn Fn(&[S], &[S], &mut [S]) + Send + Sync>;
type DiffusionFn<S> = Box<dyn Fn(&[S], &mut Matrix<S>) + Send + Sync>;
type GradientFn<S> = Box<dyn Fn(&[S], &[S], &mut Matrix<S>) + Send + Sync>;

/// Diffusion model assembled from closures.
pub struct ClosureModel<S> {
    dimension: usize,
    noise_dimension: usize,
    parameters: ParameterVector<S>,
    drift: DriftFn<S>,
    diffusion: DiffusionFn<S>,
    gradient: GradientFn<S>,
}

impl<S: Real> ClosureModel<S> {
    pub fn new(
        dimension: usize,
        noise_dimension: usize,
        parameters: ParameterVector<S>,
        drift: impl Fn(&[S], &[S], &mut [S]) + Send + Sync + 'static,
        diffusion: impl Fn(&[S], &mut Matrix<S>) + Send + Sync + 'static,
        gradient: impl Fn(&[S], &[S], &mut Matrix<S>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dimension,
            noise_dimension,
            parameters,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            gradient: Box::new(gradient),
        }
    }
}

impl<S: Real> DiffusionModel<S> for ClosureModel<S> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn noise_dimension(&self) -> usize {
        self.noise_dimension
    }

    fn parameters(&self) -> &ParameterVector<S> {
        &self.parameters
    }

    fn drift(&self, theta: &[S], x: &[S], out: &mut [S]) {
        (self.drift)(theta, x, out)
    }

    fn diffusion(&self, x: &[S], out: &mut Matrix<S>) {
        (self.diffusion)(x, out)
    }

    fn drift_gradient(&self, theta: &[S], x: &[S], out: &mut Matrix<S>) {
        (self.gradient)(theta, x, out)
    }
}
