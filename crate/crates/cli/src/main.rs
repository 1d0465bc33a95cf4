use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lrsens::models::{builtin_models, BuiltinModel};
use lrsens::{rxn, DiffusionModel};
use lrsens_cli::{run_experiment, write_outputs, Config};

#[derive(Parser)]
#[command(name = "lrsens", version, about = "Likelihood-ratio sensitivity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the estimators listed in an experiment config.
    Run {
        config: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long, env = "LRSENS_WORKERS")]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a `.rxn` model file.
    Parse {
        file: PathBuf,
        /// Print the canonical form.
        #[arg(long)]
        canonical: bool,
    },
    /// List the builtin models.
    ListModels,
}

fn run(config: &Path, seed: Option<u64>, workers: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = Config::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            anyhow::bail!("--workers must be positive");
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let base = config.parent().unwrap_or(Path::new("."));
    let output = pool.install(|| run_experiment(&cfg, base))?;
    for path in write_outputs(&output, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn parse(file: &Path, canonical: bool) -> Result<()> {
    let bytes = std::fs::read(file).with_context(|| format!("cannot read {}", file.display()))?;
    let doc = rxn::parse_model_bytes::<f64>(&bytes).with_context(|| format!("{}", file.display()))?;
    if canonical {
        print!("{}", rxn::serialize_model(&doc.network, &doc.initial, &doc.observables));
    } else {
        println!(
            "{}: {} species, {} reactions, {} parameters",
            file.display(),
            doc.network.num_species(),
            doc.network.num_reactions(),
            doc.network.num_parameters()
        );
    }
    Ok(())
}

fn list_models() {
    for (name, m) in builtin_models::<f64>() {
        match m {
            BuiltinModel::Jump { network, .. } => println!(
                "{name}\treaction network\tspecies: {}\tparameters: {}",
                network.species().join(" "),
                network.parameters().names().join(" ")
            ),
            BuiltinModel::Diffusion { model, .. } => println!(
                "{name}\tdiffusion\tstate: {}\tparameters: {}",
                model.state_names().join(" "),
                model.parameters().names().join(" ")
            ),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => run(config, *seed, *workers, out),
        Command::Parse { file, canonical } => parse(file, *canonical),
        Command::ListModels => {
            list_models();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
