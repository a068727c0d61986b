use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gapweight::harness::{self, ExperimentConfig};
use gapweight::Error;

/// Neural contextual bandit experiments.
#[derive(Parser)]
#[command(name = "gapweight", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, overriding `seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for seeds and kernel computations.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bandit policy over a stream for every seed.
    RunBandit(Common),
    /// Run online regression and the offline comparator for every seed.
    RunRegression(Common),
    /// NTK spectrum and kernel-bandit bound analysis.
    AnalyzeBounds(Common),
    /// Numerical checks of the loss landscape.
    Diagnose(Common),
    /// SVG plots of result directories.
    Plot {
        /// Directories written by run-bandit or run-regression.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> gapweight::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => harness::parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> gapweight::Result<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> gapweight::Result<()> {
    match cli.command {
        Command::RunBandit(c) => {
            let cfg = load(&c)?;
            let r = with_pool(c.threads, || harness::run_bandit(&cfg))??;
            println!("regret mean {:.6} std {:.6} over {} seeds", r.aggregate.mean, r.aggregate.std, r.seeds.len());
            report(&cfg.output_dir.join("result.json"));
        }
        Command::RunRegression(c) => {
            let cfg = load(&c)?;
            let r = with_pool(c.threads, || harness::run_regression(&cfg))??;
            println!("regret mean {:.6} std {:.6} over {} seeds", r.aggregate.mean, r.aggregate.std, r.seeds.len());
            report(&cfg.output_dir.join("result.json"));
        }
        Command::AnalyzeBounds(c) => {
            let cfg = load(&c)?;
            let b = with_pool(c.threads, || harness::analyze_bounds(&cfg))??;
            let r = &b.constructed;
            println!("n {} lambda0 {:.6e} d_tilde {:.4} S_lb {:.4}", b.n, r.lambda0, r.d_tilde, r.s_lb);
            report(&cfg.output_dir.join("bounds.json"));
        }
        Command::Diagnose(c) => {
            let cfg = load(&c)?;
            let d = with_pool(c.threads, || harness::diagnose(&cfg))??;
            println!(
                "gradient check {:.2e} c_h {:.4} pl pass {:.3}",
                d.gradient_check_max_rel_err, d.c_h_hat, d.pl_pass_fraction
            );
            report(&cfg.output_dir.join("diagnostics.json"));
        }
        Command::Plot { dirs, out } => {
            for path in harness::plot(&dirs, &out)? {
                report(&path);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAPWEIGHT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
