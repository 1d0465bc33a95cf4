//! Euler–Maruyama paths `X_{n+1} = X_n + Δt a^θ(X_n) + √Δt σ(X_n) ΔB_{n+1}`
//! on the grid `t_n = n T / N`, `n = 0..=N`.

use serde::Serialize;

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{Generator, RngStream};
use crate::Real;

/// Callback for each Euler step.
pub trait GridObserver<S> {
    /// Step `n ∈ 1..=N` moved `x_prev = X_{n-1}` to `x_next = X_n` using the
    /// standard normal increment `noise`.
    fn step(&mut self, n: usize, x_prev: &[S], noise: &[S], x_next: &[S]) -> Result<()>;
}

/// Fixed-step path together with the increments that generated it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTrajectory<S> {
    pub horizon: S,
    pub steps: usize,
    pub dimension: usize,
    pub noise_dimension: usize,
    /// `(N + 1) × dimension`, row-major.
    pub states: Vec<S>,
    /// `N × noise_dimension`; row `n − 1` drives step `n`.
    pub noise: Vec<S>,
}

impl<S: Real> GridTrajectory<S> {
    pub fn dt(&self) -> S {
        self.horizon / S::from_len(self.steps)
    }

    pub fn state(&self, n: usize) -> &[S] {
        &self.states[n * self.dimension..(n + 1) * self.dimension]
    }

    pub fn increment(&self, n: usize) -> &[S] {
        &self.noise[(n - 1) * self.noise_dimension..n * self.noise_dimension]
    }

    pub fn final_state(&self) -> &[S] {
        self.state(self.steps)
    }

    /// Recomputes the states from the stored increments.
    pub fn replay<M: DiffusionModel<S> + ?Sized>(&self, model: &M, theta: &[S]) -> Result<Vec<S>> {
        let mut stepper = Stepper::new(model, self.dt());
        let mut x = self.state(0).to_vec();
        let mut next = vec![S::zero(); self.dimension];
        let mut out = x.clone();
        for n in 1..=self.steps {
            stepper.step(model, theta, &x, self.increment(n), &mut next, n)?;
            x.copy_from_slice(&next);
            out.extend_from_slice(&x);
        }
        Ok(out)
    }
}

/// Scratch buffers for one Euler step.
pub(crate) struct Stepper<S> {
    dt: S,
    sqrt_dt: S,
    drift: Vec<S>,
    sigma: Matrix<S>,
}

impl<S: Real> Stepper<S> {
    pub(crate) fn new<M: DiffusionModel<S> + ?Sized>(model: &M, dt: S) -> Self {
        Self {
            dt,
            sqrt_dt: dt.sqrt(),
            drift: vec![S::zero(); model.dimension()],
            sigma: Matrix::zeros(model.dimension(), model.noise_dimension()),
        }
    }

    #[inline]
    pub(crate) fn step<M: DiffusionModel<S> + ?Sized>(
        &mut self,
        model: &M,
        theta: &[S],
        x: &[S],
        noise: &[S],
        out: &mut [S],
        n: usize,
    ) -> Result<()> {
        model.drift(theta, x, &mut self.drift);
        model.diffusion(x, &mut self.sigma);
        for i in 0..x.len() {
            let mut diff = S::zero();
            for (k, &db) in noise.iter().enumerate() {
                diff += self.sigma[(i, k)] * db;
            }
            let v = x[i] + self.dt * self.drift[i] + self.sqrt_dt * diff;
            if !v.is_finite() {
                return Err(Error::Diverged { step: n });
            }
            out[i] = v;
        }
        Ok(())
    }
}

fn check_grid<S: Real>(horizon: S, steps: usize) -> Result<()> {
    if !(horizon > S::zero()) || !horizon.is_finite() {
        return Err(Error::Argument(format!("final time must be positive, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::Argument("at least one Euler step is required".into()));
    }
    Ok(())
}

/// Runs the Euler recursion drawing increments from `rng`.
pub fn drive_euler<S: Real, M: DiffusionModel<S> + ?Sized, O: GridObserver<S>>(
    model: &M,
    theta: &[S],
    x0: &[S],
    horizon: S,
    steps: usize,
    rng: &mut Generator,
    observer: &mut O,
) -> Result<()> {
    check_grid(horizon, steps)?;
    if x0.len() != model.dimension() {
        return Err(Error::Argument(format!(
            "initial state has {} entries, model dimension is {}",
            x0.len(),
            model.dimension()
        )));
    }
    let dt = horizon / S::from_len(steps);
    let mut stepper = Stepper::new(model, dt);
    let mut x = x0.to_vec();
    let mut next = vec![S::zero(); x.len()];
    let mut noise = vec![S::zero(); model.noise_dimension()];
    for n in 1..=steps {
        noise.iter_mut().for_each(|z| *z = rng.normal());
        stepper.step(model, theta, &x, &noise, &mut next, n)?;
        observer.step(n, &x, &noise, &next)?;
        std::mem::swap(&mut x, &mut next);
    }
    Ok(())
}

struct GridRecorder<S> {
    states: Vec<S>,
    noise: Vec<S>,
}

impl<S: Real> GridObserver<S> for GridRecorder<S> {
    fn step(&mut self, _: usize, _: &[S], noise: &[S], x_next: &[S]) -> Result<()> {
        self.noise.extend_from_slice(noise);
        self.states.extend_from_slice(x_next);
        Ok(())
    }
}

/// One Euler–Maruyama path with its increments.
pub fn euler_path<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    x0: &[S],
    horizon: S,
    steps: usize,
    stream: RngStream,
) -> Result<GridTrajectory<S>> {
    let mut rec = GridRecorder {
        states: x0.to_vec(),
        noise: Vec::with_capacity(steps * model.noise_dimension()),
    };
    drive_euler(model, theta, x0, horizon, steps, &mut stream.generator(), &mut rec)?;
    Ok(GridTrajectory {
        horizon,
        steps,
        dimension: model.dimension(),
        noise_dimension: model.noise_dimension(),
        states: rec.states,
        noise: rec.noise,
    })
}

/// Pair at `θ ± ε e_k` driven by the same increments.
#[allow(clippy::too_many_arguments)]
pub fn coupled_pair_euler<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    k: usize,
    epsilon: S,
    x0: &[S],
    horizon: S,
    steps: usize,
    stream: RngStream,
) -> Result<(GridTrajectory<S>, GridTrajectory<S>)> {
    if k >= theta.len() || !(epsilon >= S::zero()) {
        return Err(Error::Argument(format!(
            "invalid perturbation of parameter {k} by {epsilon}"
        )));
    }
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[k] += epsilon;
    minus[k] -= epsilon;
    Ok((
        euler_path(model, &plus, x0, horizon, steps, stream)?,
        euler_path(model, &minus, x0, horizon, steps, stream)?,
    ))
}
