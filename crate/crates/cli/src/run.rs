//! Runs a configured estimator suite and writes its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lrsens::ensemble::{
    diffusion_ensemble, diffusion_pair_ensemble, jump_ensemble, jump_pair_ensemble, Ensemble, EnsembleConfig,
    PairEnsemble, PairSpec, Perturbation,
};
use lrsens::estimators::{
    cfd_ergodic, cfd_single, covariance_lr, hstack, log_rescale, lr_ergodic, lr_single, lr_truncated, Centering,
    EstimatorKind, SensitivityReport,
};
use lrsens::models::{builtin, BuiltinModel};
use lrsens::{rxn, Logistic, Observables, ReactionNetwork};
use serde::Serialize;

use crate::config::Config;

/// Dynamics resolved from a config, with overrides applied.
pub enum Model {
    Jump {
        network: ReactionNetwork<f64>,
        initial: Vec<i64>,
        observables: Observables<f64>,
    },
    Diffusion {
        model: Logistic<f64>,
        initial: Vec<f64>,
        observables: Observables<f64>,
    },
}

impl Model {
    pub fn parameter_names(&self) -> &[String] {
        match self {
            Model::Jump { network, .. } => network.parameters().names(),
            Model::Diffusion { model, .. } => lrsens::DiffusionModel::parameters(model).names(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        match self {
            Model::Jump { network, .. } => network.theta(),
            Model::Diffusion { model, .. } => lrsens::DiffusionModel::parameters(model).values(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Model::Jump { .. } => "reaction network",
            Model::Diffusion { .. } => "diffusion",
        }
    }

    fn state_names(&self) -> Vec<String> {
        match self {
            Model::Jump { network, .. } => network.species().to_vec(),
            Model::Diffusion { model, .. } => lrsens::DiffusionModel::state_names(model),
        }
    }
}

/// Loads the model named by `cfg.model`, resolving file paths against `base`.
pub fn load_model(cfg: &Config, base: &Path) -> Result<Model> {
    let mut model = if cfg.model.ends_with(".rxn") {
        let path = base.join(&cfg.model);
        let text = std::fs::read(&path).with_context(|| format!("cannot read model {}", path.display()))?;
        let doc = rxn::parse_model_bytes::<f64>(&text).with_context(|| format!("in {}", path.display()))?;
        Model::Jump {
            observables: doc.observables_or_species(),
            network: doc.network,
            initial: doc.initial,
        }
    } else {
        match builtin::<f64>(&cfg.model)? {
            BuiltinModel::Jump { network, initial } => Model::Jump {
                observables: Observables::identity(network.species()),
                network,
                initial,
            },
            BuiltinModel::Diffusion { model, initial } => Model::Diffusion {
                observables: Observables::identity(&lrsens::DiffusionModel::state_names(&model)),
                model,
                initial,
            },
        }
    };
    apply_overrides(&mut model, cfg)?;
    Ok(model)
}

fn apply_overrides(model: &mut Model, cfg: &Config) -> Result<()> {
    let names = model.parameter_names().to_vec();
    let mut theta = model.theta().to_vec();
    for (name, &v) in &cfg.theta {
        let Some(k) = names.iter().position(|n| n == name) else {
            bail!(
                "`theta.{name}`: the model has no parameter `{name}` (has {})",
                names.join(", ")
            );
        };
        theta[k] = v;
    }
    let states = model.state_names();
    for name in cfg.initial.keys() {
        if !states.contains(name) {
            bail!("`initial.{name}`: the model has no species `{name}`");
        }
    }
    match model {
        Model::Jump { network, initial, .. } => {
            for (k, &v) in theta.iter().enumerate() {
                if !(v > 0.0) {
                    bail!("`theta.{}` must be positive, got {v}", names[k]);
                }
                network.parameters_mut().set(k, v)?;
            }
            for (i, s) in states.iter().enumerate() {
                if let Some(&v) = cfg.initial.get(s) {
                    if v < 0.0 || v.fract() != 0.0 {
                        bail!("`initial.{s}` must be a nonnegative integer, got {v}");
                    }
                    initial[i] = v as i64;
                }
            }
        }
        Model::Diffusion { model, initial, .. } => {
            *model = Logistic::new(theta[0], theta[1], model.noise)?;
            for (i, s) in states.iter().enumerate() {
                if let Some(&v) = cfg.initial.get(s) {
                    initial[i] = v;
                }
            }
        }
    }
    Ok(())
}

/// Everything one run produces, before it is written out.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub config: Config,
    /// One entry per configured estimator, each with one report per checkpoint.
    pub reports: Vec<(EstimatorKind, Vec<SensitivityReport<f64>>)>,
    pub log: String,
    pub trajectories: usize,
}

fn lr_reports(kind: EstimatorKind, ens: &[Ensemble<f64>], window: Option<f64>) -> Result<Vec<SensitivityReport<f64>>> {
    ens.iter()
        .map(|e| {
            Ok(match kind {
                EstimatorKind::I2 => lr_single(e, Centering::None)?,
                EstimatorKind::I2c => lr_single(e, Centering::Plugin)?,
                EstimatorKind::I3 => lr_ergodic(e, Centering::None)?,
                EstimatorKind::I3c => lr_ergodic(e, Centering::Plugin)?,
                EstimatorKind::I4 => lr_truncated(e, window.expect("validated"), Centering::None)?,
                EstimatorKind::I4c => lr_truncated(e, window.expect("validated"), Centering::Plugin)?,
                EstimatorKind::Cov => covariance_lr(e)?.report,
                EstimatorKind::I1 | EstimatorKind::I5 => unreachable!("finite differences"),
            })
        })
        .collect()
}

fn cfd_reports(
    kind: EstimatorKind,
    pairs: &[Vec<PairEnsemble<f64>>],
    checkpoints: usize,
) -> Result<Vec<SensitivityReport<f64>>> {
    (0..checkpoints)
        .map(|c| {
            let columns = pairs
                .iter()
                .map(|per_param| match kind {
                    EstimatorKind::I1 => cfd_single(&per_param[c]),
                    _ => cfd_ergodic(&per_param[c]),
                })
                .collect::<lrsens::Result<Vec<_>>>()?;
            Ok(hstack(&columns)?)
        })
        .collect()
}

/// Simulates and evaluates every configured estimator.
pub fn run_experiment(cfg: &Config, base: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let model = load_model(cfg, base)?;
    let names = model.parameter_names().to_vec();
    let theta = model.theta().to_vec();
    let cfd_names = match &cfg.cfd_parameters {
        Some(list) => {
            for n in list {
                if !names.contains(n) {
                    bail!("`cfd_parameters`: the model has no parameter `{n}`");
                }
            }
            list.clone()
        }
        None => names.clone(),
    };
    let mut resolved = cfg.clone();
    resolved.cfd_replicas = Some(cfg.cfd_replicas());
    resolved.cfd_parameters = Some(cfd_names.clone());
    resolved.theta = names.iter().cloned().zip(theta.iter().copied()).collect();
    let states = model.state_names();
    resolved.initial = match &model {
        Model::Jump { initial, .. } => states.iter().cloned().zip(initial.iter().map(|&x| x as f64)).collect(),
        Model::Diffusion { initial, .. } => states.iter().cloned().zip(initial.iter().copied()).collect(),
    };
    if let Model::Diffusion { .. } = model {
        if cfg.steps.is_none() {
            bail!("`steps` is required for diffusion models");
        }
    } else {
        resolved.steps = None;
    }

    let mut log = String::new();
    let _ = writeln!(
        log,
        "model {} ({}, {} states, {} parameters)",
        cfg.model,
        model.kind(),
        states.len(),
        names.len()
    );
    let _ = writeln!(log, "seed {}", cfg.seed);
    let _ = writeln!(log, "checkpoints {}", join(&cfg.checkpoints));
    let _ = writeln!(
        log,
        "estimators {}",
        cfg.estimators.iter().map(|e| e.id()).collect::<Vec<_>>().join(" ")
    );
    let mut trajectories = 0;

    let mut ens_cfg = EnsembleConfig::new(cfg.replicas, cfg.checkpoints.clone(), cfg.seed);
    ens_cfg.sign = cfg.sign.into();
    if let Some(w) = cfg.window.filter(|_| cfg.estimators.iter().any(|e| e.needs_window())) {
        ens_cfg = ens_cfg.with_window(w);
    }
    let ensembles = if cfg.needs_lr() {
        log::info!("simulating {} LR replicas", cfg.replicas);
        let ens = match &model {
            Model::Jump {
                network,
                initial,
                observables,
            } => jump_ensemble(network, &theta, initial, observables, &ens_cfg)?,
            Model::Diffusion {
                model,
                initial,
                observables,
            } => diffusion_ensemble(
                model,
                &theta,
                initial,
                cfg.steps.expect("checked"),
                observables,
                &ens_cfg,
            )?,
        };
        trajectories += cfg.replicas;
        let _ = writeln!(log, "lr ensemble: {} trajectories", cfg.replicas);
        ens
    } else {
        Vec::new()
    };

    let mut pairs = Vec::new();
    if cfg.needs_cfd() {
        let eps = cfg.epsilon.expect("validated");
        // with log-scaled output the pairs move log θ, which keeps small
        // rate constants positive
        let perturbation = if cfg.log_scale {
            Perturbation::Logarithmic
        } else {
            Perturbation::Additive
        };
        let mut pair_cfg = EnsembleConfig::new(cfg.cfd_replicas(), cfg.checkpoints.clone(), cfg.seed);
        pair_cfg.sign = cfg.sign.into();
        for name in &cfd_names {
            let k = names.iter().position(|n| n == name).expect("checked");
            log::info!("simulating {} coupled pairs for {name}", cfg.cfd_replicas());
            let spec = PairSpec::new(k, eps).with_perturbation(perturbation);
            let p = match &model {
                Model::Jump {
                    network,
                    initial,
                    observables,
                } => jump_pair_ensemble(network, &theta, &spec, initial, observables, &pair_cfg)?,
                Model::Diffusion {
                    model,
                    initial,
                    observables,
                } => diffusion_pair_ensemble(
                    model,
                    &theta,
                    &spec,
                    initial,
                    cfg.steps.expect("checked"),
                    observables,
                    &pair_cfg,
                )?,
            };
            trajectories += 2 * cfg.cfd_replicas();
            let _ = writeln!(log, "cfd {name}: {} trajectories", 2 * cfg.cfd_replicas());
            pairs.push(p);
        }
    }
    let _ = writeln!(log, "total trajectories: {trajectories}");

    let mut reports = Vec::new();
    for &kind in &cfg.estimators {
        let mut per_time = if kind.is_finite_difference() {
            cfd_reports(kind, &pairs, cfg.checkpoints.len())?
        } else {
            lr_reports(kind, &ensembles, cfg.window)?
        };
        if cfg.log_scale {
            for r in per_time.iter_mut().filter(|r| !r.log_scaled) {
                let th: Vec<f64> = r
                    .parameters
                    .iter()
                    .map(|n| theta[names.iter().position(|m| m == n).expect("known parameter")])
                    .collect();
                *r = log_rescale(r, &th)?;
            }
        }
        reports.push((kind, per_time));
    }
    Ok(RunOutput {
        config: resolved,
        reports,
        log,
        trajectories,
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct ReportFile<'a> {
    estimator: &'a str,
    settings: &'a Config,
    reports: &'a [SensitivityReport<f64>],
}

#[derive(Debug, PartialEq, PartialOrd)]
struct PlotRow {
    estimator: String,
    time: f64,
    observable: String,
    parameter: String,
    estimate: f64,
    std_error: f64,
    normalized_variance: f64,
}

/// Header of `plotdata.csv`.
pub const PLOT_HEADER: [&str; 7] = [
    "estimator",
    "time",
    "observable",
    "parameter",
    "estimate",
    "std_error",
    "normalized_variance",
];

/// Writes `report_<id>.json`, `plotdata.csv` and `run.log` into `out`.
pub fn write_outputs(output: &RunOutput, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for (kind, reports) in &output.reports {
        let path = out.join(format!("report_{}.json", kind.id()));
        let file = ReportFile {
            estimator: kind.id(),
            settings: &output.config,
            reports,
        };
        let mut json = serde_json::to_string_pretty(&file)?;
        json.push('\n');
        std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
        for r in reports {
            for (i, obs) in r.observables.iter().enumerate() {
                for (k, par) in r.parameters.iter().enumerate() {
                    rows.push(PlotRow {
                        estimator: kind.id().to_string(),
                        time: r.time,
                        observable: obs.clone(),
                        parameter: par.clone(),
                        estimate: r.estimate[(i, k)],
                        std_error: r.std_error[(i, k)],
                        normalized_variance: r.normalized_variance[(i, k)],
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.estimator, a.time, &a.observable, &a.parameter)
            .partial_cmp(&(&b.estimator, b.time, &b.observable, &b.parameter))
            .expect("finite checkpoint times")
    });
    let path = out.join("plotdata.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(PLOT_HEADER)?;
    for r in &rows {
        w.write_record([
            r.estimator.clone(),
            r.time.to_string(),
            r.observable.clone(),
            r.parameter.clone(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.normalized_variance.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);
    let path = out.join("run.log");
    std::fs::write(&path, &output.log).with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);
    Ok(written)
}
