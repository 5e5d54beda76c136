use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rodkit::harness::{
    cmd_eval, cmd_gen, cmd_report, cmd_rod, cmd_solve, CostSource, EvalArgs, GenArgs, RodArgs,
    RodCmdArgs, SolveMethod,
};
use rodkit::rod::GapAggregation;
use rodkit::Error;

#[derive(Parser)]
#[command(
    name = "rodkit",
    version,
    about = "Optimality gaps and ROD for TSP heuristics"
)]
struct Cli {
    /// Worker threads for per-instance work (default: available CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of uniform random instances in the unit square.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Replace a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Write reference costs for every instance of a dataset.
    Solve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// JSON-lines reference file, for `--method import`.
        #[arg(long, required_if_eq("method", "import"))]
        import_file: Option<PathBuf>,
        /// Starts per instance, for `--method lk`.
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Construct tours, apply local search and report optimality gaps.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Model submission (tours or heatmaps).
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[command(flatten)]
        construction: ConstructionArgs,
        /// Comma-separated list of none, 2opt, 3opt, lk.
        #[arg(long, default_value = "none")]
        local_search: String,
        #[command(flatten)]
        lk: LkArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also compute the ROD of every row.
        #[arg(long)]
        rod: bool,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Output path prefix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the ratio of optimal decisions of a model.
    Rod {
        #[arg(long)]
        dataset: PathBuf,
        /// Submission, eval report JSON, or JSON-lines `{"id", "cost"}` file.
        /// May be omitted with `--construction nn`.
        #[arg(long)]
        costs_or_model: Option<PathBuf>,
        /// Row of an eval report, as `model/construction/local_search`.
        #[arg(long)]
        row: Option<String>,
        #[command(flatten)]
        construction: ConstructionArgs,
        /// One of none, 2opt, 3opt, lk, applied after construction.
        #[arg(long, default_value = "none")]
        local_search: String,
        #[command(flatten)]
        lk: LkArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path prefix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge eval reports on the same dataset into one table.
    Report {
        files: Vec<PathBuf>,
        /// Output path prefix; the table is printed either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    HeldKarp,
    Brute,
    Import,
    Lk,
}

#[derive(Args)]
struct ConstructionArgs {
    /// nn, greedy, sample, beam, beam-st or tour.
    #[arg(long)]
    construction: Option<String>,
    /// Sampling iterations.
    #[arg(long, default_value_t = 16)]
    iters: usize,
    /// Beam width.
    #[arg(long, default_value_t = 16)]
    width: usize,
}

#[derive(Args)]
struct LkArgs {
    #[arg(long, default_value_t = 5)]
    lk_depth: usize,
    #[arg(long, default_value_t = 5)]
    lk_neighbors: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// Grid step of the alpha scan.
    #[arg(long, default_value_t = 0.001)]
    k: f64,
    /// Oracle rollouts per instance and grid point.
    #[arg(long, default_value_t = 1)]
    rollouts: usize,
    #[arg(long, value_enum, default_value_t = Aggregation::RatioOfSums)]
    aggregation: Aggregation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aggregation {
    RatioOfSums,
    MeanOfRatios,
}

impl OracleArgs {
    fn rod(&self, seed: u64) -> RodArgs {
        RodArgs {
            k: self.k,
            rollouts: self.rollouts,
            seed,
            aggregation: match self.aggregation {
                Aggregation::RatioOfSums => GapAggregation::RatioOfSums,
                Aggregation::MeanOfRatios => GapAggregation::MeanOfRatios,
            },
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen {
            n,
            count,
            seed,
            out,
            overwrite,
        } => {
            let ds = cmd_gen(&GenArgs {
                n,
                count,
                seed,
                out: out.clone(),
                overwrite,
            })?;
            println!("{}: {} instances in {}", ds.id(), ds.len(), out.display());
        }
        Command::Solve {
            dataset,
            method,
            import_file,
            starts,
            seed,
        } => {
            let method = match method {
                Method::HeldKarp => SolveMethod::HeldKarp,
                Method::Brute => SolveMethod::Brute,
                Method::Import => SolveMethod::Import(import_file.expect("required by clap")),
                Method::Lk => SolveMethod::Lk { starts, seed },
            };
            let refs = cmd_solve(&dataset, &method)?;
            println!("{} references written", refs.len());
        }
        Command::Eval {
            dataset,
            model_file,
            construction,
            local_search,
            lk,
            seed,
            rod,
            oracle,
            out,
        } => {
            let args = EvalArgs {
                model_file,
                construction: construction.construction,
                iterations: construction.iters,
                width: construction.width,
                local_search,
                lk_depth: lk.lk_depth,
                lk_neighbors: lk.lk_neighbors,
                seed,
                rod: rod.then(|| oracle.rod(seed)),
                out,
                ..EvalArgs::new(dataset)
            };
            let (report, written) = cmd_eval(&args)?;
            print!("{}", report.to_markdown());
            for f in written.files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Rod {
            dataset,
            costs_or_model,
            row,
            construction,
            local_search,
            lk,
            oracle,
            seed,
            out,
        } => {
            let source = match (costs_or_model, construction.construction.as_deref()) {
                (Some(path), _) => CostSource::File(path),
                (None, Some("nn")) => CostSource::NearestNeighbour,
                (None, _) => {
                    return Err(Error::Usage(
                        "--costs-or-model is required unless --construction nn".into(),
                    ))
                }
            };
            let args = RodCmdArgs {
                row,
                construction: construction.construction,
                iterations: construction.iters,
                width: construction.width,
                local_search,
                lk_depth: lk.lk_depth,
                lk_neighbors: lk.lk_neighbors,
                rod: oracle.rod(seed),
                out,
                ..RodCmdArgs::new(dataset, source)
            };
            let (result, written) = cmd_rod(&args)?;
            println!(
                "{}: gap {}%, ROD {}%",
                result.model,
                rodkit::harness::percent(result.report.model_gap),
                rodkit::harness::percent(result.report.alpha)
            );
            for f in written.files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Report { files, out } => {
            let (merged, _) = cmd_report(&files, out.as_deref())?;
            print!("{}", merged.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
