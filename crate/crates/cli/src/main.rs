use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cayley_lp_cli::{
    cmd_ball, cmd_certify_delta, cmd_chain, cmd_cocycle, cmd_path, cmd_report, cmd_select_p, cmd_verify, powers,
    ChainKind, CliError, Outcome, PSetting, RunConfig,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cayley-lp", version, about = "Equivariant chains and proper ℓᵖ cocycles on Cayley graphs")]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Group descriptor: free:N, cyclic:M1,M2,... or ball:PATH.
    #[arg(long, global = true)]
    group: Option<String>,
    #[arg(long, global = true)]
    radius: Option<u32>,
    #[arg(long, global = true)]
    delta: Option<u32>,
    /// Exponent, or "auto" to select it from fitted decay.
    #[arg(long, global = true)]
    p: Option<PSetting>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    memory_budget_mb: Option<u64>,
    /// Comma-separated generator labels, least first.
    #[arg(long, global = true, value_delimiter = ',')]
    generator_order: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate B(e, R) and print its summary.
    Ball {
        /// Print the whole ball in the Cayley-ball file format.
        #[arg(long)]
        export: bool,
    },
    /// Check δ-thinness of bicombing triangles.
    CertifyDelta,
    /// The bicombing path q[a, b].
    Path { a: String, b: String },
    /// The chain f(b, a) or h(b, a) for basepoint b.
    Chain {
        basepoint: String,
        target: String,
        #[arg(long, value_enum, default_value = "f")]
        which: Which,
    },
    /// Choose p from fitted decay of h.
    SelectP,
    /// ‖π(g)η − η‖_pᵖ with its tail bound and properness data.
    Cocycle { g: String },
    /// Run every invariant suite.
    Verify,
    /// CSV of cocycle norms for a list of elements.
    Report {
        words: Vec<String>,
        /// Add the powers word^1..word^K.
        #[arg(long, requires = "max_k")]
        power_of: Option<String>,
        #[arg(long)]
        max_k: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    F,
    H,
}

fn config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &cli.group {
        cfg.group = g.clone();
    }
    if let Some(r) = cli.radius {
        cfg.radius = r;
    }
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(p) = cli.p {
        cfg.p = p;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if let Some(m) = cli.memory_budget_mb {
        cfg.memory_budget_mb = m;
    }
    if let Some(order) = &cli.generator_order {
        cfg.generator_order = Some(order.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Ball { export } => cmd_ball(cfg, *export),
        Command::CertifyDelta => cmd_certify_delta(cfg),
        Command::Path { a, b } => cmd_path(cfg, a, b),
        Command::Chain {
            basepoint,
            target,
            which,
        } => {
            let kind = match which {
                Which::F => ChainKind::F,
                Which::H => ChainKind::H,
            };
            cmd_chain(cfg, basepoint, target, kind)
        }
        Command::SelectP => cmd_select_p(cfg),
        Command::Cocycle { g } => cmd_cocycle(cfg, g),
        Command::Verify => cmd_verify(cfg),
        Command::Report {
            words,
            power_of,
            max_k,
        } => {
            let mut all = words.clone();
            if let (Some(w), Some(k)) = (power_of, max_k) {
                all.extend(powers(w, *k));
            }
            cmd_report(cfg, &all)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": "config", "message": format!("{e:#}")}));
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(outcome) => {
            if let Err(e) = emit(&cfg, &outcome.text) {
                eprintln!("{}", serde_json::json!({"error": "io", "message": format!("{e:#}")}));
                return ExitCode::from(2);
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(2)
        }
    }
}

fn emit(cfg: &RunConfig, text: &str) -> anyhow::Result<()> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}
