//! Path functionals: terminal values `f(X_T)` and ergodic averages
//! `(1/T) ∫ f(X_t) dt`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::ReactionNetwork;
use crate::simulate::grid::GridTrajectory;
use crate::simulate::jump::JumpTrajectory;
use crate::Real;

/// A set of named linear observables `f_i(x) = Σ_s w_is x_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables<S> {
    names: Vec<String>,
    /// One sparse weight list per observable.
    weights: Vec<Vec<(usize, S)>>,
}

impl<S: Real> Observables<S> {
    /// Each state component as its own observable.
    pub fn identity(names: &[String]) -> Self {
        Self {
            names: names.to_vec(),
            weights: (0..names.len()).map(|i| vec![(i, S::one())]).collect(),
        }
    }

    pub fn new(names: Vec<String>, weights: Vec<Vec<(usize, S)>>) -> Result<Self> {
        if names.len() != weights.len() {
            return Err(Error::Argument("observable names and weights differ in length".into()));
        }
        Ok(Self { names, weights })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[Vec<(usize, S)>] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Largest state index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.weights.iter().flatten().map(|&(i, _)| i).max()
    }

    #[inline]
    pub fn eval_counts(&self, x: &[i64], out: &mut [S]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.iter().map(|&(i, c)| c * S::from_count(x[i])).sum();
        }
    }

    #[inline]
    pub fn eval_real(&self, x: &[S], out: &mut [S]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.iter().map(|&(i, c)| c * x[i]).sum();
        }
    }
}

/// `f(X_T)` on a jump path.
pub fn jump_terminal<S: Real>(
    traj: &JumpTrajectory<S>,
    network: &ReactionNetwork<S>,
    f: impl Fn(&[i64]) -> Vec<S>,
) -> Vec<S> {
    f(&traj.final_state(network))
}

/// `(1/T) ∫₀ᵀ f(X_t) dt` on a jump path, exact for the piecewise-constant path.
pub fn jump_ergodic<S: Real>(
    traj: &JumpTrajectory<S>,
    network: &ReactionNetwork<S>,
    f: impl Fn(&[i64]) -> Vec<S>,
) -> Vec<S> {
    let mut acc: Vec<S> = Vec::new();
    for (t0, t1, x) in traj.segments(network) {
        let v = f(&x);
        if acc.is_empty() {
            acc = vec![S::zero(); v.len()];
        }
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += (t1 - t0) * vi;
        }
    }
    acc.iter().map(|&a| a / traj.horizon).collect()
}

/// `f(X_N)` on a grid path.
pub fn grid_terminal<S: Real>(traj: &GridTrajectory<S>, f: impl Fn(&[S]) -> Vec<S>) -> Vec<S> {
    f(traj.final_state())
}

/// Left-endpoint Riemann sum `(Δt/T) Σ_{n<N} f(X_n)`.
pub fn grid_ergodic<S: Real>(traj: &GridTrajectory<S>, f: impl Fn(&[S]) -> Vec<S>) -> Vec<S> {
    let mut acc: Vec<S> = Vec::new();
    for n in 0..traj.steps {
        let v = f(traj.state(n));
        if acc.is_empty() {
            acc = vec![S::zero(); v.len()];
        }
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += vi;
        }
    }
    let scale = traj.dt() / traj.horizon;
    acc.iter().map(|&a| a * scale).collect()
}
