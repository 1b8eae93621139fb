use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;
use val_core::geometry::checks::verify_theory;
use val_core::harness::{emit_csv, emit_svg, run_experiment, ExperimentConfig};
use val_core::strategies::SeedSet;
use val_core::{
    build_strategy, gen_synthetic, load_csv, EmInit, KernelSpec, LabelColumn, LabelOracle, ScoreVariant,
    StrategyConfig, StrategyName, SyntheticShape, SyntheticSpec, TheoremReport, ValError,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "val", version, about = "Volume-based active learning and baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write curve.csv and curve.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config file.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the indices one strategy selects, one per line.
    Select {
        #[arg(long)]
        strategy: StrategyName,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        data: PathBuf,
        /// 1-based column index or header name.
        #[arg(long, default_value = "label")]
        label_col: LabelColumn,
        /// RBF gamma; the median heuristic when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = ScoreVariant::Squared)]
        variant: ScoreVariant,
        #[arg(long, default_value = "plus_plus")]
        em_init: EmInit,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic dataset as CSV.
    GenData {
        #[arg(long, default_value_t = SyntheticShape::Blobs)]
        shape: SyntheticShape,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_std: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the geometry checks and write a report CSV.
    VerifyTheory {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ValError>().is_some_and(ValError::is_config);
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Select {
            strategy,
            k,
            data,
            label_col,
            gamma,
            mu,
            variant,
            em_init,
            seed,
        } => {
            let ds = load_csv(&data, &label_col)?;
            let kernel = match gamma {
                Some(g) => KernelSpec::rbf(g),
                None => KernelSpec::rbf_median_heuristic(ds.features()),
            };
            kernel.validate()?;
            let mut config = StrategyConfig::new(strategy, k, kernel);
            config.sparsify.mu = mu;
            config.sparsify.score_variant = variant;
            config.em.init = em_init;
            config.seed = seed;
            let seeds = match strategy {
                StrategyName::Margin | StrategyName::Random => SeedSet::first_per_class(&ds),
                StrategyName::Val | StrategyName::Ted => SeedSet::empty(),
            };
            let mut oracle = LabelOracle::new(&ds, Some(k));
            let picked = build_strategy(&config).select(&mut oracle, &seeds, k)?;
            let mut out = String::new();
            for i in picked.iter() {
                let _ = writeln!(out, "{i}");
            }
            std::io::stdout().write_all(out.as_bytes())?;
            Ok(())
        }
        Command::GenData {
            shape,
            classes,
            per_class,
            separation,
            noise_std,
            dim,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                shape,
                dim,
                ..SyntheticSpec::blobs(classes, per_class, separation, noise_std, seed)
            };
            let ds = gen_synthetic(&spec)?;
            ds.save_csv(&out)?;
            info!("wrote {} points to {}", ds.len(), out.display());
            Ok(())
        }
        Command::VerifyTheory { trials, seed, out } => {
            if trials == 0 {
                return Err(ValError::Config("--trials must be >= 1".into()).into());
            }
            let reports = verify_theory(trials, seed)?;
            for r in &reports {
                info!(
                    "{}: {} trials, {} violations, max deviation {:.3e}",
                    r.theorem, r.trials, r.violations, r.max_deviation
                );
            }
            let text = reports_csv(&reports);
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}

fn run(config_path: &Path, output_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::from_file(config_path)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    } else if config.output_dir.is_relative() {
        if let Some(parent) = config_path.parent() {
            config.output_dir = parent.join(&config.output_dir);
        }
    }
    let outcome = run_experiment(&config)?;
    for s in &outcome.stages {
        info!("stage {}: {:.1} ms", s.stage, s.millis);
    }
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let csv = config.output_dir.join("curve.csv");
    let svg = config.output_dir.join("curve.svg");
    emit_csv(&outcome.curve, &csv)?;
    emit_svg(&outcome.curve, &svg)?;
    info!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn reports_csv(reports: &[TheoremReport]) -> String {
    let mut s = String::from("theorem,trials,violations,max_deviation,tolerance,passed\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.theorem,
            r.trials,
            r.violations,
            r.max_deviation,
            r.tolerance,
            r.passed()
        );
    }
    s
}
