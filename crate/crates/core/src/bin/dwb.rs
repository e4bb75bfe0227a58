use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dwb::cli::{load_idx, run_experiment, ExperimentConfig};
use dwb::network::{generate_graph, GraphKind};
use dwb::Error;

#[derive(Parser)]
#[command(name = "dwb", version, about = "Distributed Wasserstein barycenters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file, a preset, or both (the file wins).
    Run {
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write an edge list: `graph-gen <kind> <m> [p] [seed] <out>`.
    GraphGen {
        #[arg(num_args = 3..=5, value_name = "KIND M [P] [SEED] OUT")]
        args: Vec<String>,
    },
    /// Print the header and first image of an IDX image file.
    IdxDump { path: PathBuf },
}

struct Failure {
    usage: bool,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let usage = matches!(
            e,
            Error::Parse { .. } | Error::InvalidParameter(_) | Error::NonPositiveParameter(_)
        );
        Failure {
            usage,
            msg: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        usage: true,
        msg: msg.into(),
    }
}

fn run(
    config: Option<PathBuf>,
    preset: Option<String>,
    rounds: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
) -> Result<(), Failure> {
    if config.is_none() && preset.is_none() {
        return Err(usage("run needs a config path or --preset"));
    }
    let mut cfg = match &preset {
        Some(name) => ExperimentConfig::preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &config {
        let text = std::fs::read_to_string(path).map_err(Error::from)?;
        cfg = cfg.apply(&text)?;
    }
    if let Some(r) = rounds {
        cfg.rounds = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    for report in run_experiment(&cfg)? {
        let name = report.label.as_deref().unwrap_or("run");
        let last = report.result.trace.last();
        println!(
            "{name}: {} rounds, consensus {:e}, e* {}, output in {}",
            report.result.rounds(),
            last.map_or(f64::NAN, |r| r.consensus_norm),
            last.and_then(|r| r.e_star).map_or("nan".into(), |e| format!("{e:e}")),
            report.output_dir.display()
        );
    }
    Ok(())
}

fn graph_gen(args: &[String]) -> Result<(), Failure> {
    let kind: GraphKind = args[0].parse().map_err(|e: Error| usage(e.to_string()))?;
    let m: usize = args[1].parse().map_err(|_| usage(format!("bad node count {:?}", args[1])))?;
    let out = PathBuf::from(args.last().expect("clap enforces at least 3"));
    let middle = &args[2..args.len() - 1];
    let parse_p = |s: &String| s.parse::<f64>().map_err(|_| usage(format!("bad edge probability {s:?}")));
    let parse_seed = |s: &String| s.parse::<u64>().map_err(|_| usage(format!("bad seed {s:?}")));
    let (p, seed) = match middle {
        [] => (None, 0),
        [x] if kind == GraphKind::ErdosRenyi => (Some(parse_p(x)?), 0),
        [x] => (None, parse_seed(x)?),
        [p, s] => (Some(parse_p(p)?), parse_seed(s)?),
        _ => unreachable!(),
    };
    let graph = generate_graph(kind, m, p, seed)?;
    std::fs::write(&out, graph.to_edge_list()).map_err(Error::from)?;
    if graph.meta.bridge_edges > 0 {
        eprintln!(
            "note: {} bridge edges added after {} disconnected samples",
            graph.meta.bridge_edges, graph.meta.resamples
        );
    }
    Ok(())
}

fn idx_dump(path: &PathBuf) -> Result<(), Failure> {
    let images = load_idx(path)?;
    let (rows, cols) = images.first().map_or((0, 0), |a| a.dim());
    println!("images {} rows {rows} cols {cols}", images.len());
    if let Some(img) = images.first() {
        for r in 0..rows {
            let line: String = (0..cols)
                .map(|c| match img[[r, c]] as u8 {
                    0 => ' ',
                    1..=85 => '.',
                    86..=170 => '+',
                    _ => '#',
                })
                .collect();
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            preset,
            rounds,
            seed,
            output_dir,
        } => run(config, preset, rounds, seed, output_dir),
        Command::GraphGen { args } => graph_gen(&args),
        Command::IdxDump { path } => idx_dump(&path),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dwb: {}", f.msg);
            ExitCode::from(if f.usage { 2 } else { 1 })
        }
    }
}
