//! Exact simulation of reaction networks.
//!
//! Plain replicas use Gillespie's direct method on a single stream. Coupled
//! finite-difference pairs use the next-reaction formulation with one
//! unit-rate Poisson stream per channel (random time change); both members
//! of a pair read the same channel streams, so they coincide when their
//! parameters do.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::ReactionNetwork;
use crate::rng::{Generator, RngStream};
use crate::Real;

/// Callbacks fired while a jump path is generated.
pub trait JumpObserver<S> {
    /// State `x` is held on `[t0, t1)`; `a` are its propensities.
    fn hold(&mut self, t0: S, t1: S, x: &[i64], a: &[S]) -> Result<()>;

    /// Channel `j` fires at `t` from pre-jump state `x` with propensities `a`.
    fn jump(&mut self, t: S, j: usize, x: &[i64], a: &[S]) -> Result<()>;
}

/// A jump path stored as its event list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpTrajectory<S> {
    pub initial: Vec<i64>,
    /// `(time, channel)` pairs with strictly increasing times in `(0, T]`.
    pub events: Vec<(S, usize)>,
    pub horizon: S,
}

impl<S: Real> JumpTrajectory<S> {
    /// Piecewise-constant segments `(t0, t1, state)` covering `[0, T]`.
    pub fn segments<'a>(&'a self, network: &'a ReactionNetwork<S>) -> Segments<'a, S> {
        Segments {
            traj: self,
            network,
            state: self.initial.clone(),
            next: 0,
            t: S::zero(),
            done: false,
        }
    }

    pub fn final_state(&self, network: &ReactionNetwork<S>) -> Vec<i64> {
        let mut x = self.initial.clone();
        for &(_, j) in &self.events {
            network.fire(j, &mut x);
        }
        x
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, network: &ReactionNetwork<S>, t: S) -> Vec<i64> {
        let mut x = self.initial.clone();
        for &(te, j) in &self.events {
            if te > t {
                break;
            }
            network.fire(j, &mut x);
        }
        x
    }

    /// The path restricted to `[0, t]`.
    pub fn truncated(&self, t: S) -> Self {
        Self {
            initial: self.initial.clone(),
            events: self.events.iter().copied().filter(|&(te, _)| te <= t).collect(),
            horizon: t,
        }
    }

    /// States on the grid `0, step, 2·step, … ≤ T`.
    pub fn sample_grid(&self, network: &ReactionNetwork<S>, step: S) -> Vec<Vec<i64>> {
        let n = (self.horizon / step).floor().to_usize().unwrap_or(0);
        let mut out = Vec::with_capacity(n + 1);
        let mut x = self.initial.clone();
        let mut ev = self.events.iter().peekable();
        for i in 0..=n {
            let t = step * S::from_len(i);
            while let Some(&&(te, j)) = ev.peek() {
                if te > t {
                    break;
                }
                network.fire(j, &mut x);
                ev.next();
            }
            out.push(x.clone());
        }
        out
    }
}

/// Iterator over the holding segments of a [`JumpTrajectory`].
pub struct Segments<'a, S> {
    traj: &'a JumpTrajectory<S>,
    network: &'a ReactionNetwork<S>,
    state: Vec<i64>,
    next: usize,
    t: S,
    done: bool,
}

impl<S: Real> Iterator for Segments<'_, S> {
    type Item = (S, S, Vec<i64>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let current = self.state.clone();
        let t0 = self.t;
        match self.traj.events.get(self.next) {
            Some(&(te, j)) => {
                self.network.fire(j, &mut self.state);
                self.next += 1;
                self.t = te;
                Some((t0, te, current))
            }
            None => {
                self.done = true;
                Some((t0, self.traj.horizon, current))
            }
        }
    }
}

fn check_horizon<S: Real>(horizon: S) -> Result<()> {
    if horizon > S::zero() && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("final time must be positive, got {horizon}")))
    }
}

/// Gillespie direct method driving `observer`.
pub fn drive_direct<S: Real, O: JumpObserver<S>>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    horizon: S,
    rng: &mut Generator,
    observer: &mut O,
) -> Result<()> {
    check_horizon(horizon)?;
    let mut x = x0.to_vec();
    let mut a = vec![S::zero(); network.num_reactions()];
    let mut t = S::zero();
    loop {
        network.propensities_into(theta, &x, &mut a)?;
        let total: S = a.iter().copied().sum();
        if total <= S::zero() {
            observer.hold(t, horizon, &x, &a)?;
            return Ok(());
        }
        let t_next = t + rng.exponential::<S>() / total;
        if t_next > horizon {
            observer.hold(t, horizon, &x, &a)?;
            return Ok(());
        }
        observer.hold(t, t_next, &x, &a)?;
        let j = select_channel(&a, rng.uniform::<S>() * total);
        observer.jump(t_next, j, &x, &a)?;
        network.fire(j, &mut x);
        t = t_next;
    }
}

/// First channel whose cumulative propensity exceeds `target`, never one
/// with zero propensity.
#[inline]
fn select_channel<S: Real>(a: &[S], target: S) -> usize {
    let mut acc = S::zero();
    let mut last_positive = 0;
    for (j, &aj) in a.iter().enumerate() {
        if aj > S::zero() {
            acc += aj;
            last_positive = j;
            if target < acc {
                return j;
            }
        }
    }
    last_positive
}

/// Next-reaction method with one unit-rate exponential stream per channel.
pub fn drive_next_reaction<S: Real, O: JumpObserver<S>>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    horizon: S,
    stream: RngStream,
    observer: &mut O,
) -> Result<()> {
    check_horizon(horizon)?;
    let r = network.num_reactions();
    let mut channels: Vec<Generator> = (0..r).map(|j| stream.channel(j).generator()).collect();
    let mut internal = vec![S::zero(); r];
    let mut next_fire: Vec<S> = channels.iter_mut().map(|g| g.exponential()).collect();
    let mut x = x0.to_vec();
    let mut a = vec![S::zero(); r];
    let mut t = S::zero();
    loop {
        network.propensities_into(theta, &x, &mut a)?;
        let mut best: Option<(usize, S)> = None;
        for j in 0..r {
            if a[j] > S::zero() {
                let wait = (next_fire[j] - internal[j]) / a[j];
                if best.is_none_or(|(_, w)| wait < w) {
                    best = Some((j, wait));
                }
            }
        }
        let Some((mu, wait)) = best else {
            observer.hold(t, horizon, &x, &a)?;
            return Ok(());
        };
        let t_next = t + wait;
        if t_next > horizon {
            observer.hold(t, horizon, &x, &a)?;
            return Ok(());
        }
        observer.hold(t, t_next, &x, &a)?;
        for j in 0..r {
            internal[j] += a[j] * wait;
        }
        internal[mu] = next_fire[mu];
        next_fire[mu] += channels[mu].exponential::<S>();
        observer.jump(t_next, mu, &x, &a)?;
        network.fire(mu, &mut x);
        t = t_next;
    }
}

struct Recorder<S> {
    events: Vec<(S, usize)>,
}

impl<S: Real> JumpObserver<S> for Recorder<S> {
    fn hold(&mut self, _: S, _: S, _: &[i64], _: &[S]) -> Result<()> {
        Ok(())
    }

    fn jump(&mut self, t: S, j: usize, _: &[i64], _: &[S]) -> Result<()> {
        self.events.push((t, j));
        Ok(())
    }
}

/// One exact SSA path on `[0, T]`.
pub fn ssa_path<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    horizon: S,
    stream: RngStream,
) -> Result<JumpTrajectory<S>> {
    let mut rec = Recorder { events: Vec::new() };
    drive_direct(network, theta, x0, horizon, &mut stream.generator(), &mut rec)?;
    Ok(JumpTrajectory {
        initial: x0.to_vec(),
        events: rec.events,
        horizon,
    })
}

/// Next-reaction path reading per-channel streams of `stream`.
pub fn channel_stream_path<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    horizon: S,
    stream: RngStream,
) -> Result<JumpTrajectory<S>> {
    let mut rec = Recorder { events: Vec::new() };
    drive_next_reaction(network, theta, x0, horizon, stream, &mut rec)?;
    Ok(JumpTrajectory {
        initial: x0.to_vec(),
        events: rec.events,
        horizon,
    })
}

/// `θ ± ε e_k`, rejecting perturbations that make `θ_k` negative.
pub fn perturbed_pair<S: Real>(names: &[String], theta: &[S], k: usize, epsilon: S) -> Result<(Vec<S>, Vec<S>)> {
    if k >= theta.len() {
        return Err(Error::Argument(format!(
            "parameter index {k} out of range ({} parameters)",
            theta.len()
        )));
    }
    if !(epsilon >= S::zero()) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("perturbation must be ≥ 0, got {epsilon}")));
    }
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[k] += epsilon;
    minus[k] -= epsilon;
    if minus[k] < S::zero() {
        return Err(Error::Parameter {
            name: names.get(k).cloned().unwrap_or_default(),
            value: minus[k].as_f64(),
            reason: "perturbation makes the rate negative",
        });
    }
    Ok((plus, minus))
}

/// Coupled pair at `θ ± ε e_k` sharing every channel's Poisson stream.
pub fn coupled_pair_ssa<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    k: usize,
    epsilon: S,
    x0: &[i64],
    horizon: S,
    stream: RngStream,
) -> Result<(JumpTrajectory<S>, JumpTrajectory<S>)> {
    let (plus, minus) = perturbed_pair(network.parameters().names(), theta, k, epsilon)?;
    Ok((
        channel_stream_path(network, &plus, x0, horizon, stream)?,
        channel_stream_path(network, &minus, x0, horizon, stream)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{birth_death, p53};

    #[test]
    fn zero_rates_give_constant_path() {
        let net = birth_death(0.0f64, 0.0).unwrap();
        let tr = ssa_path(&net, &[0.0, 0.0], &[5], 10.0, RngStream::new(1, 0)).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.final_state(&net), vec![5]);
        let tr = channel_stream_path(&net, &[0.0, 0.0], &[5], 10.0, RngStream::new(1, 0)).unwrap();
        assert!(tr.events.is_empty());
    }

    #[test]
    fn event_times_increase_and_states_stay_nonnegative() {
        let net = p53::<f64>().unwrap();
        let tr = ssa_path(&net, net.theta(), &[0, 0, 0], 5.0, RngStream::new(3, 0)).unwrap();
        assert!(!tr.events.is_empty());
        let mut prev = 0.0;
        for &(t, _) in &tr.events {
            assert!(t > prev && t <= 5.0);
            prev = t;
        }
        for (_, _, x) in tr.segments(&net) {
            assert!(x.iter().all(|&v| v >= 0));
        }
    }

    #[test]
    fn same_stream_same_events() {
        let net = birth_death(10.0f64, 1.0).unwrap();
        let s = RngStream::replica(42, 0, 9);
        let a = ssa_path(&net, net.theta(), &[0], 20.0, s).unwrap();
        let b = ssa_path(&net, net.theta(), &[0], 20.0, s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_pair_coincides_at_zero_perturbation() {
        let net = p53::<f64>().unwrap();
        let (p, m) = coupled_pair_ssa(&net, net.theta(), 2, 0.0, &[0, 0, 0], 5.0, RngStream::new(5, 1)).unwrap();
        assert_eq!(p, m);
    }

    #[test]
    fn negative_perturbation_is_rejected() {
        let net = p53::<f64>().unwrap();
        let err = coupled_pair_ssa(&net, net.theta(), 1, 0.01, &[0, 0, 0], 1.0, RngStream::new(5, 1)).unwrap_err();
        assert!(matches!(err, Error::Parameter { .. }));
    }

    #[test]
    fn truncation_and_state_lookup() {
        let net = birth_death(10.0f64, 1.0).unwrap();
        let tr = ssa_path(&net, net.theta(), &[0], 10.0, RngStream::new(2, 0)).unwrap();
        let half = tr.truncated(5.0);
        assert!(half.events.iter().all(|&(t, _)| t <= 5.0));
        assert_eq!(half.final_state(&net), tr.state_at(&net, 5.0));
        let grid = tr.sample_grid(&net, 0.5);
        assert_eq!(grid.len(), 21);
        assert_eq!(grid[20], tr.final_state(&net));
    }
}
