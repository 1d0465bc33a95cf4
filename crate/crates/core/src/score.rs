//! Likelihood-ratio weights (score processes) `W^θ = ∇θ log dP^θ_{0:T}`.
//!
//! * CTMC: `W = Σ_jumps ∇θ log a_j(X_{s−}) − ∫₀ᵀ ∇θ λ(X_s) ds`, where the
//!   integral is exact because λ is constant between jumps.
//! * Euler–Maruyama: `W = Σ_n Γ(X_{n−1})ᵀ √Δt ΔB_n` with `σ Γ = ∇θ a`.
//! * i.i.d. samples: `W = Σ_t w(X_t)` for a score function `w`.

use serde::Serialize;

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::linalg::{solve_columns, Matrix};
use crate::network::ReactionNetwork;
use crate::simulate::{GridTrajectory, JumpTrajectory};
use crate::Real;

/// Sign applied to the CTMC score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SignConvention {
    /// Gradient of the path log-likelihood: jump terms positive.
    #[default]
    Likelihood,
    /// Integral term positive, jump terms negative.
    Reversed,
}

impl SignConvention {
    #[inline]
    pub fn factor<S: Real>(self) -> S {
        match self {
            SignConvention::Likelihood => S::one(),
            SignConvention::Reversed => -S::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct JumpSegment<S> {
    t0: S,
    t1: S,
    grad_total_rate: Vec<S>,
    /// `∇θ log a_j` of the jump closing the segment, if any.
    jump: Option<Vec<S>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Windowing<S> {
    Jump(Vec<JumpSegment<S>>),
    Grid { dt: S, increments: Matrix<S> },
}

/// Score of one trajectory, optionally with the per-event or per-step
/// contributions retained so that windowed scores can be extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord<S> {
    pub total: Vec<S>,
    horizon: S,
    sign: S,
    windowing: Option<Windowing<S>>,
}

impl<S: Real> ScoreRecord<S> {
    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn has_windowing(&self) -> bool {
        self.windowing.is_some()
    }

    /// Score restricted to `(T − T_d, T]`.
    pub fn truncated(&self, window: S) -> Result<Vec<S>> {
        if !(window > S::zero()) || window > self.horizon {
            return Err(Error::Argument(format!(
                "window {window} must lie in (0, {}]",
                self.horizon
            )));
        }
        let start = self.horizon - window;
        let p = self.total.len();
        let mut w = vec![S::zero(); p];
        match &self.windowing {
            None => return Err(Error::Capability("score was recorded without windowing".into())),
            Some(Windowing::Jump(segments)) => {
                for seg in segments {
                    if seg.t1 <= start {
                        continue;
                    }
                    let overlap = seg.t1 - seg.t0.max(start);
                    for (wi, g) in w.iter_mut().zip(&seg.grad_total_rate) {
                        *wi -= overlap * *g;
                    }
                    if let Some(jump) = &seg.jump {
                        for (wi, g) in w.iter_mut().zip(jump) {
                            *wi += *g;
                        }
                    }
                }
                for wi in &mut w {
                    *wi *= self.sign;
                }
            }
            Some(Windowing::Grid { dt, increments }) => {
                let first = first_step_after(start, *dt);
                for n in first..=increments.rows() {
                    for (wi, v) in w.iter_mut().zip(increments.row(n - 1)) {
                        *wi += *v;
                    }
                }
            }
        }
        Ok(w)
    }
}

/// Smallest `n ≥ 1` with `t_n = n Δt > start` (grid-snapped).
pub(crate) fn first_step_after<S: Real>(start: S, dt: S) -> usize {
    let q = start / dt;
    let r = q.round();
    let m = if (q - r).abs() <= S::lit(1e-9) * r.abs().max(S::one()) {
        r
    } else {
        q.floor()
    };
    m.max(S::zero()).to_usize().unwrap_or(0) + 1
}

/// Score of a jump trajectory generated under `(network, θ)`.
pub fn ctmc_score<S: Real>(
    traj: &JumpTrajectory<S>,
    network: &ReactionNetwork<S>,
    theta: &[S],
    sign: SignConvention,
    windowed: bool,
) -> Result<ScoreRecord<S>> {
    let p = network.num_parameters();
    let r = network.num_reactions();
    let mut total = vec![S::zero(); p];
    let mut a = vec![S::zero(); r];
    let mut segments = Vec::new();
    for (k, (t0, t1, x)) in traj.segments(network).enumerate() {
        network.propensities_into(theta, &x, &mut a)?;
        let mut grad_total = vec![S::zero(); p];
        for j in 0..r {
            network.gradient_entries(j, theta, &x, |q, v| grad_total[q] += v)?;
        }
        let hold = t1 - t0;
        for (w, g) in total.iter_mut().zip(&grad_total) {
            *w -= hold * *g;
        }
        // segment k closes with event k; the final one runs to the horizon
        let jump = match traj.events.get(k) {
            Some(&(_, j)) => Some(jump_term(network, theta, &x, j, &a, t1)?),
            None => None,
        };
        if let Some(jt) = &jump {
            for (w, g) in total.iter_mut().zip(jt) {
                *w += *g;
            }
        }
        if windowed {
            segments.push(JumpSegment {
                t0,
                t1,
                grad_total_rate: grad_total,
                jump,
            });
        }
    }
    let s = sign.factor::<S>();
    for w in &mut total {
        *w *= s;
    }
    Ok(ScoreRecord {
        total,
        horizon: traj.horizon,
        sign: s,
        windowing: windowed.then_some(Windowing::Jump(segments)),
    })
}

fn jump_term<S: Real>(network: &ReactionNetwork<S>, theta: &[S], x: &[i64], j: usize, a: &[S], t: S) -> Result<Vec<S>> {
    if !(a[j] > S::zero()) {
        return Err(Error::Inconsistent(format!(
            "reaction {j} fired at t = {t} with zero propensity at state {x:?}"
        )));
    }
    let mut g = vec![S::zero(); network.num_parameters()];
    network.gradient_entries(j, theta, x, |q, v| g[q] += v)?;
    for v in &mut g {
        *v /= a[j];
    }
    Ok(g)
}

/// Reusable solver for `σ(x) Γ(x) = ∇θ a(x)`.
pub(crate) struct GammaSolver<S> {
    sigma: Matrix<S>,
    grad: Matrix<S>,
    /// `d × P`.
    pub(crate) gamma: Matrix<S>,
}

/// Condition numbers above this reject the step.
pub const MAX_CONDITION: f64 = 1e12;
/// Least-squares residual tolerance relative to `‖∇θ a‖`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

impl<S: Real> GammaSolver<S> {
    pub(crate) fn new<M: DiffusionModel<S> + ?Sized>(model: &M) -> Self {
        let (n, d, p) = (model.dimension(), model.noise_dimension(), model.parameters().len());
        Self {
            sigma: Matrix::zeros(n, d),
            grad: Matrix::zeros(n, p),
            gamma: Matrix::zeros(d, p),
        }
    }

    pub(crate) fn solve<M: DiffusionModel<S> + ?Sized>(
        &mut self,
        model: &M,
        theta: &[S],
        x: &[S],
        step: usize,
    ) -> Result<()> {
        model.diffusion(x, &mut self.sigma);
        model.drift_gradient(theta, x, &mut self.grad);
        let grad_norm = self.grad.max_abs();
        if !grad_norm.is_finite() || self.sigma.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "diffusion or drift gradient",
                state: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
        if grad_norm == S::zero() {
            self.gamma = Matrix::zeros(self.gamma.rows(), self.gamma.cols());
            return Ok(());
        }
        if self.sigma.rows() == 1 && self.sigma.cols() == 1 {
            let s = self.sigma[(0, 0)];
            if s == S::zero() || (grad_norm / s.abs()).as_f64() > MAX_CONDITION {
                return Err(Error::IllConditioned {
                    step,
                    condition: f64::INFINITY,
                });
            }
            for p in 0..self.grad.cols() {
                self.gamma[(0, p)] = self.grad[(0, p)] / s;
            }
            return Ok(());
        }
        let solved = solve_columns(&self.sigma, &self.grad).ok_or(Error::IllConditioned {
            step,
            condition: f64::INFINITY,
        })?;
        if !(solved.condition.as_f64() <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                step,
                condition: solved.condition.as_f64(),
            });
        }
        if solved.residual > S::lit(RESIDUAL_TOLERANCE) * grad_norm {
            return Err(Error::Domain(format!(
                "σΓ = ∇θa has no solution at step {step} (residual {})",
                solved.residual
            )));
        }
        self.gamma = solved.solution;
        Ok(())
    }

    /// Adds `Γᵀ √Δt ΔB` to `out`.
    #[inline]
    pub(crate) fn accumulate(&self, sqrt_dt: S, noise: &[S], out: &mut [S]) {
        for (p, o) in out.iter_mut().enumerate() {
            let mut v = S::zero();
            for (k, &db) in noise.iter().enumerate() {
                v += self.gamma[(k, p)] * db;
            }
            *o += sqrt_dt * v;
        }
    }
}

/// Score of an Euler–Maruyama path, recomputed from its stored increments.
pub fn euler_score<S: Real, M: DiffusionModel<S> + ?Sized>(
    traj: &GridTrajectory<S>,
    model: &M,
    theta: &[S],
    windowed: bool,
) -> Result<ScoreRecord<S>> {
    let p = model.parameters().len();
    let dt = traj.dt();
    let sqrt_dt = dt.sqrt();
    let mut solver = GammaSolver::new(model);
    let mut total = vec![S::zero(); p];
    let mut increments = if windowed {
        Matrix::zeros(traj.steps, p)
    } else {
        Matrix::zeros(0, p)
    };
    let mut inc = vec![S::zero(); p];
    for n in 1..=traj.steps {
        solver.solve(model, theta, traj.state(n - 1), n)?;
        inc.iter_mut().for_each(|v| *v = S::zero());
        solver.accumulate(sqrt_dt, traj.increment(n), &mut inc);
        for (w, v) in total.iter_mut().zip(&inc) {
            *w += *v;
        }
        if windowed {
            increments.row_mut(n - 1).copy_from_slice(&inc);
        }
    }
    Ok(ScoreRecord {
        total,
        horizon: traj.horizon,
        sign: S::one(),
        windowing: windowed.then_some(Windowing::Grid { dt, increments }),
    })
}

/// Per-sample data of an i.i.d. sequence `X_1..X_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IidRecord<S> {
    /// `f(X_T)`.
    pub terminal: Vec<S>,
    /// `(1/T) Σ_t f(X_t)`.
    pub ergodic: Vec<S>,
    /// `Σ_t w(X_t)`.
    pub score: Vec<S>,
}

/// Score and observables of an i.i.d. sequence with score function `w`.
pub fn iid_score<S: Real, X>(
    samples: &[X],
    w: impl Fn(&X) -> Vec<S>,
    f: impl Fn(&X) -> Vec<S>,
) -> Result<IidRecord<S>> {
    let last = samples
        .last()
        .ok_or_else(|| Error::Argument("empty sample sequence".into()))?;
    let mut score: Vec<S> = Vec::new();
    let mut ergodic: Vec<S> = Vec::new();
    for x in samples {
        let wx = w(x);
        let fx = f(x);
        if score.is_empty() {
            score = vec![S::zero(); wx.len()];
            ergodic = vec![S::zero(); fx.len()];
        }
        score.iter_mut().zip(wx).for_each(|(a, b)| *a += b);
        ergodic.iter_mut().zip(fx).for_each(|(a, b)| *a += b);
    }
    let t = S::from_len(samples.len());
    ergodic.iter_mut().for_each(|v| *v /= t);
    Ok(IidRecord {
        terminal: f(last),
        ergodic,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DriftedBrownian;
    use crate::models::{birth_death, immigration};
    use crate::rng::RngStream;
    use crate::simulate::{euler_path, ssa_path};

    #[test]
    fn immigration_score_by_hand() {
        // b = 2, T = 5, nine jumps: W_b = 9/2 − 5
        let net = immigration(2.0f64).unwrap();
        let tr = JumpTrajectory {
            initial: vec![0],
            events: (1..=9).map(|i| (0.5 * i as f64, 0)).collect(),
            horizon: 5.0,
        };
        let w = ctmc_score(&tr, &net, &[2.0], SignConvention::Likelihood, false).unwrap();
        assert!((w.total[0] + 0.5).abs() < 1e-14);
        let r = ctmc_score(&tr, &net, &[2.0], SignConvention::Reversed, false).unwrap();
        assert!((r.total[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn jump_exactly_at_horizon_is_counted() {
        let net = immigration(2.0f64).unwrap();
        let tr = JumpTrajectory {
            initial: vec![0],
            events: vec![(1.0, 0), (5.0, 0)],
            horizon: 5.0,
        };
        let w = ctmc_score(&tr, &net, &[2.0], SignConvention::Likelihood, true).unwrap();
        assert!((w.total[0] - (1.0 - 5.0)).abs() < 1e-14);
        let win = w.truncated(1.0).unwrap();
        assert!((win[0] - (0.5 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn unused_parameter_scores_exactly_zero() {
        let net = crate::network::ReactionNetwork::new(
            vec!["X".into()],
            vec![crate::network::Reaction::mass_action([], [(0, 1)], 0)],
            crate::params::ParameterVector::new(["b", "unused"], vec![3.0, 1.0]).unwrap(),
        )
        .unwrap();
        let tr = ssa_path(&net, net.theta(), &[0], 10.0, RngStream::new(1, 0)).unwrap();
        let w = ctmc_score(&tr, &net, net.theta(), SignConvention::Likelihood, false).unwrap();
        assert_eq!(w.total[1], 0.0);
    }

    #[test]
    fn zero_rate_firing_is_inconsistent() {
        let net = birth_death(1.0f64, 1.0).unwrap();
        let tr = JumpTrajectory {
            initial: vec![0],
            events: vec![(1.0, 1)],
            horizon: 2.0,
        };
        assert!(matches!(
            ctmc_score(&tr, &net, &[1.0, 1.0], SignConvention::Likelihood, false),
            Err(Error::Inconsistent(_)) | Err(Error::Domain(_))
        ));
    }

    #[test]
    fn quiet_window_is_constant_rate_integral() {
        let net = birth_death(4.0f64, 0.5).unwrap();
        let tr = JumpTrajectory {
            initial: vec![6],
            events: vec![],
            horizon: 10.0,
        };
        let w = ctmc_score(&tr, &net, &[4.0, 0.5], SignConvention::Likelihood, true).unwrap();
        let win = w.truncated(2.5).unwrap();
        // ∇λ = (1, x) = (1, 6)
        assert!((win[0] + 2.5).abs() < 1e-14);
        assert!((win[1] + 15.0).abs() < 1e-14);
        assert_eq!(w.truncated(10.0).unwrap(), w.total);
    }

    #[test]
    fn window_requires_recording_and_valid_length() {
        let net = birth_death(4.0f64, 0.5).unwrap();
        let tr = ssa_path(&net, net.theta(), &[0], 3.0, RngStream::new(0, 0)).unwrap();
        let plain = ctmc_score(&tr, &net, net.theta(), SignConvention::Likelihood, false).unwrap();
        assert!(matches!(plain.truncated(1.0), Err(Error::Capability(_))));
        let rec = ctmc_score(&tr, &net, net.theta(), SignConvention::Likelihood, true).unwrap();
        assert!(matches!(rec.truncated(4.0), Err(Error::Argument(_))));
    }

    #[test]
    fn constant_drift_score_is_brownian_path() {
        let m = DriftedBrownian::new(0.3f64);
        let tr = euler_path(&m, &[0.3], &[0.0], 2.0, 100, RngStream::new(3, 3)).unwrap();
        let w = euler_score(&tr, &m, &[0.3], false).unwrap();
        let bm: f64 = tr.noise.iter().sum::<f64>() * (0.02f64).sqrt();
        assert!((w.total[0] - bm).abs() < 1e-12);
        // X_N − x0 − θT is exactly the Brownian part
        assert!((tr.final_state()[0] - 0.6 - bm).abs() < 1e-12);
    }

    #[test]
    fn euler_window_sums_tail_steps() {
        let m = DriftedBrownian::new(0.0f64);
        let tr = euler_path(&m, &[0.0], &[0.0], 1.0, 10, RngStream::new(3, 1)).unwrap();
        let w = euler_score(&tr, &m, &[0.0], true).unwrap();
        let tail: f64 = tr.noise[7..].iter().sum::<f64>() * 0.1f64.sqrt();
        assert!((w.truncated(0.3).unwrap()[0] - tail).abs() < 1e-14);
    }

    #[test]
    fn step_snapping() {
        assert_eq!(first_step_after(0.0f64, 0.1), 1);
        assert_eq!(first_step_after(0.7f64, 0.1), 8);
        assert_eq!(first_step_after(0.75f64, 0.1), 8);
    }

    #[test]
    fn iid_score_of_parameter_free_density_is_zero() {
        let xs = [1.0f64, 2.0, 3.0];
        let r = iid_score(&xs, |_| vec![0.0], |&x| vec![x]).unwrap();
        assert_eq!(r.score, vec![0.0]);
        assert_eq!(r.ergodic, vec![2.0]);
        assert_eq!(r.terminal, vec![3.0]);
    }
}
