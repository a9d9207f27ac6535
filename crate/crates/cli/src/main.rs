use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hge::commands::{
    cmd_benchmark, cmd_evaluate, cmd_export, cmd_grid, cmd_prepare, cmd_synth, cmd_train,
    EMBEDDINGS_FILE,
};
use hge::config::RunConfig;
use hge::Error;

#[derive(Debug, Parser)]
#[command(name = "hge", version, about = "Hierarchical graph embeddings for cold-start recommendation")]
struct Cli {
    /// JSON run config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single worker thread, serialized reductions.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also write TSV tables next to the JSON reports.
    #[arg(long, global = true)]
    tsv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, split and index raw CSVs into a prepared directory.
    Prepare,
    /// Generate a synthetic dataset with a planted hierarchy.
    Synth,
    /// Train the configured model.
    Train,
    /// Tune d and the learning rate on a validation carve-out.
    Grid,
    /// Cold-start HR@k / PR@k of a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Per-epoch MF vs HGE timing.
    Benchmark,
    /// Write item embeddings as TSV.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Destination file (default: <out>/embeddings.tsv).
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::Config(_) | Error::Parameter(_) | Error::Json(_) => 3,
        Error::Data(_) | Error::EmptyData(_) | Error::Parse { .. } => 4,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> hge::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> hge::Result<()> {
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Prepare => {
            let m = cmd_prepare(&cfg, out)?;
            println!(
                "users\t{}\nitems\t{}\ntrain_events\t{}\ntest_events\t{}\ncold_items\t{}",
                m.n_users, m.n_items, m.n_train_events, m.n_test_events, m.n_cold_items
            );
        }
        Command::Synth => {
            let (li, lh) = cmd_synth(&cfg, out)?;
            println!("{}\n{}", li.display(), lh.display());
        }
        Command::Train => {
            let ckpt = cmd_train(&cfg, out)?;
            if let Some(last) = ckpt.loss_history()?.last() {
                println!("final_loss\t{last}");
            }
        }
        Command::Grid => {
            let r = cmd_grid(&cfg, out, cli.tsv)?;
            println!(
                "best_d\t{}\nbest_learning_rate\t{}\nprecision_at_{}\t{}",
                r.best.d,
                r.best.learning_rate,
                r.k,
                r.best.precision.unwrap_or(f64::NAN)
            );
        }
        Command::Evaluate { checkpoint } => {
            let (report, clusters) = cmd_evaluate(&cfg, checkpoint, out, cli.tsv)?;
            for m in &report.metrics {
                println!("hit_rate_at_{}\t{}", m.k, m.hit_rate);
                println!("precision_at_{}\t{}", m.k, m.precision);
            }
            for l in clusters.iter().flat_map(|c| &c.levels) {
                println!("separation_level_{}\t{}", l.level, l.separation);
            }
        }
        Command::Benchmark => {
            let r = cmd_benchmark(&cfg, out, cli.tsv)?;
            print!("{}", r.to_tsv());
        }
        Command::Export { checkpoint, path } => {
            let path = path.clone().unwrap_or_else(|| out.join(EMBEDDINGS_FILE));
            cmd_export(&cfg, checkpoint, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{line}");
            ExitCode::from(exit_code(&e))
        }
    }
}
