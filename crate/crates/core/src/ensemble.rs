//! Replica ensembles with scores and observables recorded online.
//!
//! One pass over `M` independent replicas records, at every requested
//! checkpoint time `t`, the terminal observable `f(X_t)`, the ergodic
//! average `(1/t)∫₀ᵗ f`, the score `W(X_{0:t})` and, when a window `T_d` is
//! set, the windowed score `W(X_{t−T_d:t})`. Every LR estimator for every
//! parameter is then a reduction over this data. Finite-difference pairs are
//! separate ensembles, one per perturbed parameter.
//!
//! Replicas run on the current rayon pool. Each replica owns its stream and
//! results are gathered in replica order, so the output does not depend on
//! the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::ReactionNetwork;
use crate::rng::RngStream;
use crate::score::{GammaSolver, IidRecord, SignConvention};
use crate::simulate::grid::{drive_euler, GridObserver};
use crate::simulate::jump::{drive_direct, drive_next_reaction, perturbed_pair, JumpObserver};
use crate::simulate::Observables;
use crate::Real;

/// Stream tag of plain LR ensembles.
pub const LR_TAG: u16 = 0;
/// Tags `PAIR_TAG + k` label the coupled ensemble for parameter `k`.
pub const PAIR_TAG: u16 = 1;
/// Tags `INDEPENDENT_TAG + k` drive the minus member of uncoupled pairs.
pub const INDEPENDENT_TAG: u16 = 0x8000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig<S> {
    pub replicas: usize,
    /// Strictly increasing, positive; the last entry is the final time.
    pub checkpoints: Vec<S>,
    /// Truncation windows `T_d` for windowed scores.
    pub windows: Vec<S>,
    pub seed: u64,
    pub sign: SignConvention,
}

impl<S: Real> EnsembleConfig<S> {
    pub fn new(replicas: usize, checkpoints: Vec<S>, seed: u64) -> Self {
        Self {
            replicas,
            checkpoints,
            windows: Vec::new(),
            seed,
            sign: SignConvention::Likelihood,
        }
    }

    pub fn with_window(mut self, window: S) -> Self {
        self.windows.push(window);
        self
    }

    pub fn horizon(&self) -> S {
        *self.checkpoints.last().expect("validated checkpoints")
    }

    fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::Argument(format!(
                "an ensemble needs at least 2 replicas, got {}",
                self.replicas
            )));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Argument("no checkpoint times".into()));
        }
        let mut prev = S::zero();
        for &t in &self.checkpoints {
            if !(t > prev) || !t.is_finite() {
                return Err(Error::Argument(format!(
                    "checkpoints must be positive and strictly increasing, got {t} after {prev}"
                )));
            }
            prev = t;
        }
        for &w in &self.windows {
            if !(w > S::zero()) {
                return Err(Error::Argument(format!("window must be positive, got {w}")));
            }
        }
        Ok(())
    }

    /// Times at which the score must be sampled, ascending and unique.
    fn score_times(&self) -> Vec<S> {
        let mut times = self.checkpoints.clone();
        for &w in &self.windows {
            times.extend(self.checkpoints.iter().filter(|&&t| w < t).map(|&t| t - w));
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup();
        times
    }
}

/// Windowed scores `W(X_{t−T_d:t})` at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedScore<S> {
    pub length: S,
    /// `M × P`.
    pub score: Matrix<S>,
}

/// Replica data at a single final time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble<S> {
    pub time: S,
    pub observables: Vec<String>,
    pub parameters: Vec<String>,
    pub theta: Vec<S>,
    /// `f(X_t)`, `M × m`.
    pub terminal: Matrix<S>,
    /// `(1/t)∫₀ᵗ f(X_s) ds`, `M × m`.
    pub ergodic: Matrix<S>,
    /// `W(X_{0:t})`, `M × P`.
    pub score: Matrix<S>,
    /// One entry per configured window not longer than `time`.
    pub windows: Vec<WindowedScore<S>>,
}

impl<S: Real> Ensemble<S> {
    pub fn replicas(&self) -> usize {
        self.score.rows()
    }

    /// Windowed scores for `T_d = length`, if recorded.
    pub fn window(&self, length: S) -> Option<&WindowedScore<S>> {
        let tol = S::lit(1e-9) * self.time.max(S::one());
        self.windows.iter().find(|w| (w.length - length).abs() <= tol)
    }

    /// Builds an ensemble from i.i.d. sequence records.
    pub fn from_iid(
        time: S,
        observables: Vec<String>,
        parameters: Vec<String>,
        theta: Vec<S>,
        records: &[IidRecord<S>],
    ) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::Argument("an ensemble needs at least 2 replicas".into()));
        }
        let rows = |get: fn(&IidRecord<S>) -> &Vec<S>| {
            Matrix::from_rows(&records.iter().map(|r| get(r).clone()).collect::<Vec<_>>())
        };
        Ok(Self {
            time,
            observables,
            parameters,
            theta,
            terminal: rows(|r| &r.terminal),
            ergodic: rows(|r| &r.ergodic),
            score: rows(|r| &r.score),
            windows: Vec::new(),
        })
    }
}

/// Coupled (or independent) perturbed-pair data at one final time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEnsemble<S> {
    pub time: S,
    pub observables: Vec<String>,
    pub parameter: String,
    pub index: usize,
    pub epsilon: S,
    pub perturbation: Perturbation,
    pub plus_terminal: Matrix<S>,
    pub minus_terminal: Matrix<S>,
    pub plus_ergodic: Matrix<S>,
    pub minus_ergodic: Matrix<S>,
}

impl<S: Real> PairEnsemble<S> {
    pub fn replicas(&self) -> usize {
        self.plus_terminal.rows()
    }
}

/// Direction in which a finite-difference pair moves parameter `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Perturbation {
    /// `θ_k ± ε`; differences estimate `∂/∂θ_k`.
    #[default]
    Additive,
    /// `θ_k e^{±ε}`; differences estimate `∂/∂log θ_k`.
    Logarithmic,
}

/// What a finite-difference ensemble perturbs and how its members are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSpec<S> {
    pub index: usize,
    pub epsilon: S,
    pub perturbation: Perturbation,
    pub coupling: Coupling,
}

impl<S: Real> PairSpec<S> {
    /// Additive, commonly coupled pair for parameter `index`.
    pub fn new(index: usize, epsilon: S) -> Self {
        Self {
            index,
            epsilon,
            perturbation: Perturbation::Additive,
            coupling: Coupling::Common,
        }
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Parameter vectors of the plus and minus members.
    pub fn perturb(&self, names: &[String], theta: &[S]) -> Result<(Vec<S>, Vec<S>)> {
        match self.perturbation {
            Perturbation::Additive => perturbed_pair(names, theta, self.index, self.epsilon),
            Perturbation::Logarithmic => {
                let (mut plus, mut minus) = perturbed_pair(names, theta, self.index, S::zero())?;
                if !(self.epsilon >= S::zero()) || !self.epsilon.is_finite() {
                    return Err(Error::Argument(format!(
                        "perturbation must be ≥ 0, got {}",
                        self.epsilon
                    )));
                }
                if !(theta[self.index] > S::zero()) {
                    return Err(Error::Parameter {
                        name: names[self.index].clone(),
                        value: theta[self.index].as_f64(),
                        reason: "a logarithmic perturbation needs a positive value",
                    });
                }
                plus[self.index] = theta[self.index] * self.epsilon.exp();
                minus[self.index] = theta[self.index] * (-self.epsilon).exp();
                Ok((plus, minus))
            }
        }
    }
}

/// How the two members of a finite-difference pair share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Coupling {
    /// Common random numbers / common channel streams.
    #[default]
    Common,
    /// Independent streams, as a baseline.
    Independent,
}

#[derive(Debug, Clone, Default)]
struct Checkpoint<S> {
    terminal: Vec<S>,
    ergodic: Vec<S>,
    score: Vec<S>,
    /// Parallel to the configured windows.
    windows: Vec<Option<Vec<S>>>,
}

fn assemble<S: Real>(
    cfg: &EnsembleConfig<S>,
    observables: &Observables<S>,
    parameters: &[String],
    theta: &[S],
    replicas: Vec<Result<Vec<Checkpoint<S>>>>,
) -> Result<Vec<Ensemble<S>>> {
    let replicas: Vec<Vec<Checkpoint<S>>> = replicas.into_iter().collect::<Result<_>>()?;
    let stack = |c: usize, get: &dyn Fn(&Checkpoint<S>) -> &Vec<S>| {
        Matrix::from_rows(&replicas.iter().map(|r| get(&r[c]).clone()).collect::<Vec<_>>())
    };
    Ok(cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(c, &time)| Ensemble {
            time,
            observables: observables.names().to_vec(),
            parameters: parameters.to_vec(),
            theta: theta.to_vec(),
            terminal: stack(c, &|r| &r.terminal),
            ergodic: stack(c, &|r| &r.ergodic),
            score: stack(c, &|r| &r.score),
            windows: cfg
                .windows
                .iter()
                .enumerate()
                .filter(|&(i, _)| replicas[0][c].windows[i].is_some())
                .map(|(i, &length)| WindowedScore {
                    length,
                    score: stack(c, &|r| r.windows[i].as_ref().expect("window recorded")),
                })
                .collect(),
        })
        .collect())
}

/// Turns sampled `W(s)` values into checkpoint scores and windows.
fn finish_scores<S: Real>(cfg: &EnsembleConfig<S>, times: &[S], sampled: &[Vec<S>], out: &mut [Checkpoint<S>]) {
    let at = |t: S| {
        let i = times.iter().position(|&s| s == t).expect("sampled time");
        &sampled[i]
    };
    for (cp, &t) in out.iter_mut().zip(&cfg.checkpoints) {
        let full = at(t).clone();
        cp.windows = cfg
            .windows
            .iter()
            .map(|&w| {
                if w < t {
                    let start = at(t - w);
                    Some(full.iter().zip(start).map(|(a, b)| *a - *b).collect())
                } else if w == t {
                    Some(full.clone())
                } else {
                    None
                }
            })
            .collect();
        cp.score = full;
    }
}

struct JumpAccumulator<'a, S> {
    network: &'a ReactionNetwork<S>,
    theta: &'a [S],
    observables: &'a Observables<S>,
    horizon: S,
    sign: S,
    checkpoints: &'a [S],
    score_times: &'a [S],
    with_score: bool,
    next_checkpoint: usize,
    next_score: usize,
    w: Vec<S>,
    grad_total: Vec<S>,
    integral: Vec<S>,
    f: Vec<S>,
    out: Vec<Checkpoint<S>>,
    sampled: Vec<Vec<S>>,
}

impl<'a, S: Real> JumpAccumulator<'a, S> {
    fn new(
        network: &'a ReactionNetwork<S>,
        theta: &'a [S],
        observables: &'a Observables<S>,
        cfg: &'a EnsembleConfig<S>,
        score_times: &'a [S],
        with_score: bool,
    ) -> Self {
        let p = network.num_parameters();
        Self {
            network,
            theta,
            observables,
            horizon: cfg.horizon(),
            sign: cfg.sign.factor(),
            checkpoints: &cfg.checkpoints,
            score_times,
            with_score,
            next_checkpoint: 0,
            next_score: 0,
            w: vec![S::zero(); p],
            grad_total: vec![S::zero(); p],
            integral: vec![S::zero(); observables.len()],
            f: vec![S::zero(); observables.len()],
            out: Vec::with_capacity(cfg.checkpoints.len()),
            sampled: Vec::with_capacity(score_times.len()),
        }
    }

    #[inline]
    fn covers(&self, s: S, t1: S) -> bool {
        s < t1 || (t1 == self.horizon && s <= t1)
    }
}

impl<S: Real> JumpObserver<S> for JumpAccumulator<'_, S> {
    fn hold(&mut self, t0: S, t1: S, x: &[i64], _a: &[S]) -> Result<()> {
        self.observables.eval_counts(x, &mut self.f);
        if self.with_score {
            self.grad_total.iter_mut().for_each(|g| *g = S::zero());
            let grad = &mut self.grad_total;
            for j in 0..self.network.num_reactions() {
                self.network.gradient_entries(j, self.theta, x, |q, v| grad[q] += v)?;
            }
            while self.next_score < self.score_times.len() && self.covers(self.score_times[self.next_score], t1) {
                let dt = self.score_times[self.next_score] - t0;
                let ws = self
                    .w
                    .iter()
                    .zip(&self.grad_total)
                    .map(|(&w, &g)| w - self.sign * dt * g)
                    .collect();
                self.sampled.push(ws);
                self.next_score += 1;
            }
        }
        while self.next_checkpoint < self.checkpoints.len() && self.covers(self.checkpoints[self.next_checkpoint], t1) {
            let s = self.checkpoints[self.next_checkpoint];
            let dt = s - t0;
            self.out.push(Checkpoint {
                terminal: self.f.clone(),
                ergodic: self
                    .integral
                    .iter()
                    .zip(&self.f)
                    .map(|(&i, &f)| (i + dt * f) / s)
                    .collect(),
                ..Checkpoint::default()
            });
            self.next_checkpoint += 1;
        }
        let hold = t1 - t0;
        for (i, &f) in self.integral.iter_mut().zip(&self.f) {
            *i += hold * f;
        }
        if self.with_score {
            for (w, &g) in self.w.iter_mut().zip(&self.grad_total) {
                *w -= self.sign * hold * g;
            }
        }
        Ok(())
    }

    fn jump(&mut self, t: S, j: usize, x: &[i64], a: &[S]) -> Result<()> {
        if !self.with_score {
            return Ok(());
        }
        if !(a[j] > S::zero()) {
            return Err(Error::Inconsistent(format!(
                "reaction {j} fired at t = {t} with zero propensity"
            )));
        }
        let scale = self.sign / a[j];
        let w = &mut self.w;
        self.network
            .gradient_entries(j, self.theta, x, |q, v| w[q] += scale * v)
    }
}

fn check_observables<S: Real>(observables: &Observables<S>, dim: usize) -> Result<()> {
    if observables.is_empty() {
        return Err(Error::Argument("at least one observable is required".into()));
    }
    if observables.max_index().is_some_and(|i| i >= dim) {
        return Err(Error::Argument(
            "observable references a missing state component".into(),
        ));
    }
    Ok(())
}

/// LR ensemble of SSA replicas under `θ`.
pub fn jump_ensemble<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
) -> Result<Vec<Ensemble<S>>> {
    cfg.validate()?;
    check_observables(observables, network.num_species())?;
    let times = cfg.score_times();
    let horizon = cfg.horizon();
    let replicas: Vec<Result<Vec<Checkpoint<S>>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|m| {
            let mut acc = JumpAccumulator::new(network, theta, observables, cfg, &times, true);
            let mut rng = RngStream::replica(cfg.seed, LR_TAG, m).generator();
            drive_direct(network, theta, x0, horizon, &mut rng, &mut acc)?;
            let mut out = acc.out;
            finish_scores(cfg, &times, &acc.sampled, &mut out);
            Ok(out)
        })
        .collect();
    assemble(cfg, observables, network.parameters().names(), theta, replicas)
}

fn jump_observables_path<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    x0: &[i64],
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
    stream: RngStream,
) -> Result<Vec<Checkpoint<S>>> {
    let mut acc = JumpAccumulator::new(network, theta, observables, cfg, &[], false);
    drive_next_reaction(network, theta, x0, cfg.horizon(), stream, &mut acc)?;
    Ok(acc.out)
}

/// Plus and minus member checkpoints of one replica pair.
type PairCheckpoints<S> = (Vec<Checkpoint<S>>, Vec<Checkpoint<S>>);

fn assemble_pairs<S: Real>(
    cfg: &EnsembleConfig<S>,
    observables: &Observables<S>,
    parameter: String,
    spec: &PairSpec<S>,
    pairs: Vec<Result<PairCheckpoints<S>>>,
) -> Result<Vec<PairEnsemble<S>>> {
    let pairs: Vec<_> = pairs.into_iter().collect::<Result<_>>()?;
    let stack = |c: usize, plus: bool, terminal: bool| {
        Matrix::from_rows(
            &pairs
                .iter()
                .map(|(p, m)| {
                    let cp = if plus { &p[c] } else { &m[c] };
                    if terminal {
                        cp.terminal.clone()
                    } else {
                        cp.ergodic.clone()
                    }
                })
                .collect::<Vec<_>>(),
        )
    };
    Ok(cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(c, &time)| PairEnsemble {
            time,
            observables: observables.names().to_vec(),
            parameter: parameter.clone(),
            index: spec.index,
            epsilon: spec.epsilon,
            perturbation: spec.perturbation,
            plus_terminal: stack(c, true, true),
            minus_terminal: stack(c, false, true),
            plus_ergodic: stack(c, true, false),
            minus_ergodic: stack(c, false, false),
        })
        .collect())
}

/// Finite-difference pairs for one parameter of a network.
pub fn jump_pair_ensemble<S: Real>(
    network: &ReactionNetwork<S>,
    theta: &[S],
    spec: &PairSpec<S>,
    x0: &[i64],
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
) -> Result<Vec<PairEnsemble<S>>> {
    cfg.validate()?;
    check_observables(observables, network.num_species())?;
    let names = network.parameters().names();
    let (plus, minus) = spec.perturb(names, theta)?;
    let tag = pair_tag(spec.index)?;
    let coupling = spec.coupling;
    let pairs = (0..cfg.replicas)
        .into_par_iter()
        .map(|m| {
            let stream = RngStream::replica(cfg.seed, tag, m);
            let other = match coupling {
                Coupling::Common => stream,
                Coupling::Independent => RngStream::replica(cfg.seed, INDEPENDENT_TAG + tag, m),
            };
            Ok((
                jump_observables_path(network, &plus, x0, observables, cfg, stream)?,
                jump_observables_path(network, &minus, x0, observables, cfg, other)?,
            ))
        })
        .collect();
    assemble_pairs(cfg, observables, names[spec.index].clone(), spec, pairs)
}

fn pair_tag(k: usize) -> Result<u16> {
    u16::try_from(k + usize::from(PAIR_TAG))
        .ok()
        .filter(|&t| t < INDEPENDENT_TAG)
        .ok_or_else(|| Error::Argument(format!("parameter index {k} too large")))
}

/// Maps checkpoint times onto grid step indices.
fn grid_steps<S: Real>(times: &[S], dt: S) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let q = t / dt;
            let r = q.round();
            if (q - r).abs() > S::lit(1e-6) * r.max(S::one()) {
                Err(Error::Argument(format!(
                    "time {t} is not on the Euler grid with step {dt}"
                )))
            } else {
                Ok(r.to_usize().unwrap_or(0))
            }
        })
        .collect()
}

struct GridAccumulator<'a, S, M: ?Sized> {
    model: &'a M,
    theta: &'a [S],
    observables: &'a Observables<S>,
    dt: S,
    sqrt_dt: S,
    checkpoint_steps: &'a [usize],
    checkpoint_times: &'a [S],
    score_steps: &'a [usize],
    with_score: bool,
    solver: Option<GammaSolver<S>>,
    next_checkpoint: usize,
    next_score: usize,
    w: Vec<S>,
    integral: Vec<S>,
    f: Vec<S>,
    out: Vec<Checkpoint<S>>,
    sampled: Vec<Vec<S>>,
}

impl<S: Real, M: DiffusionModel<S> + ?Sized> GridObserver<S> for GridAccumulator<'_, S, M> {
    fn step(&mut self, n: usize, x_prev: &[S], noise: &[S], x_next: &[S]) -> Result<()> {
        self.observables.eval_real(x_prev, &mut self.f);
        for (i, &f) in self.integral.iter_mut().zip(&self.f) {
            *i += self.dt * f;
        }
        if let Some(solver) = self.solver.as_mut() {
            solver.solve(self.model, self.theta, x_prev, n)?;
            solver.accumulate(self.sqrt_dt, noise, &mut self.w);
        }
        if self.with_score {
            while self.next_score < self.score_steps.len() && self.score_steps[self.next_score] == n {
                self.sampled.push(self.w.clone());
                self.next_score += 1;
            }
        }
        while self.next_checkpoint < self.checkpoint_steps.len() && self.checkpoint_steps[self.next_checkpoint] == n {
            let t = self.checkpoint_times[self.next_checkpoint];
            let mut terminal = vec![S::zero(); self.observables.len()];
            self.observables.eval_real(x_next, &mut terminal);
            self.out.push(Checkpoint {
                terminal,
                ergodic: self.integral.iter().map(|&i| i / t).collect(),
                ..Checkpoint::default()
            });
            self.next_checkpoint += 1;
        }
        Ok(())
    }
}

struct GridPlan<S> {
    dt: S,
    steps: usize,
    checkpoint_steps: Vec<usize>,
    score_times: Vec<S>,
    score_steps: Vec<usize>,
}

fn grid_plan<S: Real>(cfg: &EnsembleConfig<S>, steps: usize) -> Result<GridPlan<S>> {
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::Argument("at least one Euler step is required".into()));
    }
    let dt = cfg.horizon() / S::from_len(steps);
    let score_times = cfg.score_times();
    Ok(GridPlan {
        dt,
        steps,
        checkpoint_steps: grid_steps(&cfg.checkpoints, dt)?,
        score_steps: grid_steps(&score_times, dt)?,
        score_times,
    })
}

/// Scores sampled at the plan's score times.
type SampledScores<S> = Vec<Vec<S>>;

#[allow(clippy::too_many_arguments)]
fn run_grid<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    x0: &[S],
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
    plan: &GridPlan<S>,
    stream: RngStream,
    with_score: bool,
) -> Result<(Vec<Checkpoint<S>>, SampledScores<S>)> {
    let p = model.parameters().len();
    let mut acc = GridAccumulator {
        model,
        theta,
        observables,
        dt: plan.dt,
        sqrt_dt: plan.dt.sqrt(),
        checkpoint_steps: &plan.checkpoint_steps,
        checkpoint_times: &cfg.checkpoints,
        score_steps: &plan.score_steps,
        with_score,
        solver: with_score.then(|| GammaSolver::new(model)),
        next_checkpoint: 0,
        next_score: 0,
        w: vec![S::zero(); p],
        integral: vec![S::zero(); observables.len()],
        f: vec![S::zero(); observables.len()],
        out: Vec::with_capacity(cfg.checkpoints.len()),
        sampled: Vec::new(),
    };
    // a window reaching back to t = 0 samples the initial zero score
    let zero_samples = plan.score_steps.iter().take_while(|&&n| n == 0).count();
    acc.sampled.extend((0..zero_samples).map(|_| vec![S::zero(); p]));
    acc.next_score = zero_samples;
    drive_euler(
        model,
        theta,
        x0,
        cfg.horizon(),
        plan.steps,
        &mut stream.generator(),
        &mut acc,
    )?;
    Ok((acc.out, acc.sampled))
}

/// LR ensemble of Euler–Maruyama replicas under `θ`.
pub fn diffusion_ensemble<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    x0: &[S],
    steps: usize,
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
) -> Result<Vec<Ensemble<S>>> {
    let plan = grid_plan(cfg, steps)?;
    check_observables(observables, model.dimension())?;
    let replicas: Vec<Result<Vec<Checkpoint<S>>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|m| {
            let stream = RngStream::replica(cfg.seed, LR_TAG, m);
            let (mut out, sampled) = run_grid(model, theta, x0, observables, cfg, &plan, stream, true)?;
            finish_scores(cfg, &plan.score_times, &sampled, &mut out);
            Ok(out)
        })
        .collect();
    assemble(cfg, observables, model.parameters().names(), theta, replicas)
}

/// Finite-difference pairs for one drift parameter of a diffusion model.
pub fn diffusion_pair_ensemble<S: Real, M: DiffusionModel<S> + ?Sized>(
    model: &M,
    theta: &[S],
    spec: &PairSpec<S>,
    x0: &[S],
    steps: usize,
    observables: &Observables<S>,
    cfg: &EnsembleConfig<S>,
) -> Result<Vec<PairEnsemble<S>>> {
    let plan = grid_plan(cfg, steps)?;
    check_observables(observables, model.dimension())?;
    let names = model.parameters().names();
    let (plus, minus) = spec.perturb(names, theta)?;
    let tag = pair_tag(spec.index)?;
    let coupling = spec.coupling;
    let pairs = (0..cfg.replicas)
        .into_par_iter()
        .map(|m| {
            let stream = RngStream::replica(cfg.seed, tag, m);
            let other = match coupling {
                Coupling::Common => stream,
                Coupling::Independent => RngStream::replica(cfg.seed, INDEPENDENT_TAG + tag, m),
            };
            let (p, _) = run_grid(model, &plus, x0, observables, cfg, &plan, stream, false)?;
            let (q, _) = run_grid(model, &minus, x0, observables, cfg, &plan, other, false)?;
            Ok((p, q))
        })
        .collect();
    assemble_pairs(cfg, observables, names[spec.index].clone(), spec, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Logistic;
    use crate::models::birth_death;
    use crate::score::{ctmc_score, euler_score};
    use crate::simulate::{euler_path, grid_ergodic, jump_ergodic, ssa_path};

    #[test]
    fn online_jump_scores_match_offline_recompute() {
        let net = birth_death(10.0f64, 1.0).unwrap();
        let obs = Observables::identity(net.species());
        let cfg = EnsembleConfig::new(4, vec![2.0, 5.0], 11).with_window(1.5);
        let ens = jump_ensemble(&net, net.theta(), &[0], &obs, &cfg).unwrap();
        for m in 0..4 {
            let tr = ssa_path(&net, net.theta(), &[0], 5.0, RngStream::replica(11, LR_TAG, m)).unwrap();
            for e in &ens {
                let part = tr.truncated(e.time);
                let rec = ctmc_score(&part, &net, net.theta(), SignConvention::Likelihood, true).unwrap();
                for p in 0..2 {
                    assert!((e.score[(m, p)] - rec.total[p]).abs() < 1e-9);
                    let win = rec.truncated(1.5).unwrap();
                    let got = e.window(1.5).unwrap().score[(m, p)];
                    assert!((got - win[p]).abs() < 1e-9, "{got} vs {}", win[p]);
                }
                let fbar = jump_ergodic(&part, &net, |x| vec![x[0] as f64]);
                assert!((e.ergodic[(m, 0)] - fbar[0]).abs() < 1e-9);
                assert_eq!(e.terminal[(m, 0)], part.final_state(&net)[0] as f64);
            }
        }
    }

    #[test]
    fn online_euler_scores_match_offline_recompute() {
        let model = Logistic::new(1.0f64, 100.0, 0.1).unwrap();
        let th = [1.0, 100.0];
        let obs = Observables::identity(&model.state_names());
        let cfg = EnsembleConfig::new(3, vec![1.0, 2.0], 5).with_window(0.5);
        let ens = diffusion_ensemble(&model, &th, &[93.0], 200, &obs, &cfg).unwrap();
        for m in 0..3 {
            let tr = euler_path(&model, &th, &[93.0], 2.0, 200, RngStream::replica(5, LR_TAG, m)).unwrap();
            let rec = euler_score(&tr, &model, &th, true).unwrap();
            let e = &ens[1];
            for p in 0..2 {
                assert!((e.score[(m, p)] - rec.total[p]).abs() < 1e-10);
                let w = rec.truncated(0.5).unwrap()[p];
                assert!((e.window(0.5).unwrap().score[(m, p)] - w).abs() < 1e-10);
            }
            let fbar = grid_ergodic(&tr, |x| vec![x[0]]);
            assert!((e.ergodic[(m, 0)] - fbar[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn window_equal_to_time_is_full_score() {
        let net = birth_death(10.0f64, 1.0).unwrap();
        let obs = Observables::identity(net.species());
        let cfg = EnsembleConfig::new(5, vec![2.0, 4.0], 1).with_window(2.0);
        let ens = jump_ensemble(&net, net.theta(), &[0], &obs, &cfg).unwrap();
        assert_eq!(ens[0].window(2.0).unwrap().score, ens[0].score);
        assert!(ens[1].window(2.0).is_some());
        assert!(ens[0].window(3.0).is_none());
    }

    #[test]
    fn off_grid_checkpoint_rejected() {
        let model = Logistic::new(1.0f64, 100.0, 0.1).unwrap();
        let obs = Observables::identity(&model.state_names());
        let cfg = EnsembleConfig::new(2, vec![0.333, 1.0], 1);
        assert!(diffusion_ensemble(&model, &[1.0, 100.0], &[93.0], 10, &obs, &cfg).is_err());
    }

    #[test]
    fn too_few_replicas_rejected() {
        let net = birth_death(10.0f64, 1.0).unwrap();
        let obs = Observables::identity(net.species());
        let cfg = EnsembleConfig::new(1, vec![1.0], 1);
        assert!(jump_ensemble(&net, net.theta(), &[0], &obs, &cfg).is_err());
    }
}
