use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sepstruct::pipeline::{render_report, run_analyze, run_build_nulls, run_simulate, PipelineConfig};
use sepstruct::{Error, Result, RunReport};

#[derive(Parser)]
#[command(name = "sepstruct", version, about = "Separability structure of multi-qubit states from SIC-POVM shots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample measurement shots from a named state.
    Simulate(Common),
    /// Build or refresh the null-distribution cache for one shot count.
    BuildNulls(Common),
    /// Reconstruct, measure, filter and search minimal partitions.
    Analyze(Common),
    /// Print a summary of a report.json.
    Report {
        /// Report file, or a directory holding report.json.
        path: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// smolin, w:N, bell[:i], product:N, cc:rho1|rho2|rho3, ginibre:DIM:RANK
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    p_thr: Option<f64>,
    #[arg(long)]
    null_samples: Option<usize>,
    #[arg(long)]
    null_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    noise_p: Option<f64>,
    /// Shot file, or a directory of shot files to concatenate.
    #[arg(long)]
    shot_file: Option<PathBuf>,
    #[arg(long)]
    null_cache_dir: Option<PathBuf>,
    /// Write shots in files of this many lines.
    #[arg(long)]
    chunk: Option<usize>,
    #[arg(long)]
    mle_max_iters: Option<usize>,
    /// Fail instead of building nulls that are not cached.
    #[arg(long)]
    require_cached_nulls: bool,
    /// Exit with status 4 when a reconstruction stops at the iteration cap.
    #[arg(long)]
    require_convergence: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_kv_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = &self.state {
            cfg.set("state", s)?;
        }
        macro_rules! apply {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v.into(); })*
            };
        }
        apply! {
            shots => cfg.n_shots,
            k_max => cfg.k_max,
            p_thr => cfg.p_thr,
            null_samples => cfg.null_samples,
            null_seed => cfg.null_seed,
            seed => cfg.seed,
            out => cfg.out,
            noise_p => cfg.noise_p,
            mle_max_iters => cfg.mle.max_iters,
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.shot_file.is_some() {
            cfg.shot_file = self.shot_file.clone();
        }
        if self.null_cache_dir.is_some() {
            cfg.null_cache_dir = self.null_cache_dir.clone();
        }
        if self.chunk.is_some() {
            cfg.chunk = self.chunk;
        }
        if self.require_cached_nulls {
            cfg.build_missing_nulls = false;
        }
        if self.require_convergence {
            cfg.require_convergence = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn with_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.config()?;
            let paths = with_pool(cfg.workers, || run_simulate(&cfg))??;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::BuildNulls(common) => {
            let cfg = common.config()?;
            let summaries = with_pool(cfg.workers, || run_build_nulls(&cfg))??;
            println!("cache: {}", cfg.cache_dir().display());
            for (s, built) in summaries {
                println!(
                    "{:<40} source {}  n {}  mean {:.5}  std {:.5}  {}",
                    s.key.to_string(),
                    s.source.name(),
                    s.n_samples,
                    s.mean,
                    s.std,
                    if built { "built" } else { "cached" }
                );
            }
        }
        Command::Analyze(common) => {
            let cfg = common.config()?;
            let (analysis, outputs) = with_pool(cfg.workers, || run_analyze(&cfg))??;
            print!("{}", render_report(&analysis.report));
            println!("report: {}", outputs.report.display());
        }
        Command::Report { path } => {
            let file = if path.is_dir() { path.join("report.json") } else { path };
            let text = std::fs::read_to_string(&file)
                .map_err(|e| Error::MissingInput(format!("{}: {e}", file.display())))?;
            let report = RunReport::from_json(&text).map_err(|e| Error::Config(format!("malformed report {}: {e}", file.display())))?;
            print!("{}", render_report(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
