use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vsn_coverage::harness::{self, analysis_exponents, summary_path};
use vsn_coverage::markov::Chain;
use vsn_coverage::oracles::EnumeratedGame;
use vsn_coverage::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "vsn-coverage", version, about = "Coverage games with payoff-based learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated experiments, writing per-run CSV traces and summary.json.
    Run(Common),
    /// Check the potential, U_g, Δ/Ψ symmetry and graph identities exhaustively.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Corrupt half of the utility evaluations; the potential identity must fail.
        #[arg(long)]
        negative_control: bool,
    },
    /// Nash set, global optima and m* of the configured game.
    Oracle(Common),
    /// Stationary masses, unperturbed classes and resistances of the constant-rate chain.
    Markov {
        #[command(flatten)]
        common: Common,
        /// Also write each ladder matrix as a dense binary dump (small chains only).
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Rebuild summary.json from the traces in --out and compare.
    Recheck {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Write per-run CSV traces even if the config disables them.
    #[arg(long)]
    traces: bool,
}

impl Common {
    fn load(&self) -> vsn_coverage::Result<ExperimentConfig> {
        let mut c = vsn_coverage::load_config(&self.config)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.replications {
            c.replications = r;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(o) = &self.out {
            c.output.dir = o.clone();
        }
        if self.traces {
            c.output.traces = true;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Pass or fail of a check that ran to completion.
enum Outcome {
    Ok,
    Failed,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> vsn_coverage::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> vsn_coverage::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_run(common: &Common) -> vsn_coverage::Result<Outcome> {
    let c = common.load()?;
    let dir = c.output.dir.clone();
    let s = harness::run_experiment(&c, Some(&dir))?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    let fmt = |p: Option<f64>| p.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} runs of {} (T = {}, seeds {}..={}): final window [{}, {}] diag(E) = {}, diag(S*) = {}",
        s.replications,
        s.algorithm.name(),
        s.horizon,
        c.seed,
        c.seed + c.replications - 1,
        s.final_window.t_start,
        s.final_window.t_end,
        fmt(s.final_nash()),
        fmt(s.final_optimum()),
    );
    println!("summary: {}", summary_path(&dir).display());
    Ok(Outcome::Ok)
}

fn cmd_verify(common: &Common, negative: bool) -> vsn_coverage::Result<Outcome> {
    let c = common.load()?;
    let rep = harness::verify(&c, negative)?;
    for o in &rep.identities {
        println!(
            "{:<20} {:>8} checks  max violation {:.3e}  {}",
            o.report.name,
            o.report.checks,
            o.report.max_violation,
            if o.pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} profiles, tolerance {:e}{}: {}",
        rep.profiles,
        rep.tolerance,
        if negative { " (negative control)" } else { "" },
        if rep.pass { "PASS" } else { "FAIL" }
    );
    if let Some(o) = &common.out {
        write_json(&o.join("verify.json"), &rep)?;
    }
    Ok(if rep.pass { Outcome::Ok } else { Outcome::Failed })
}

fn cmd_oracle(common: &Common) -> vsn_coverage::Result<Outcome> {
    let c = common.load()?;
    let rep = harness::oracle(&c)?;
    match &common.out {
        Some(o) => {
            write_json(&o.join("oracle.json"), &rep)?;
            println!(
                "{} NE, {} optima (U_g = {:.6}), m* exact {:?}, bound {:.6}",
                rep.nash.len(),
                rep.optima.len(),
                rep.max_global_objective,
                rep.m_star_exact,
                rep.m_star_bound
            );
        }
        None => print_json(&rep)?,
    }
    Ok(Outcome::Ok)
}

fn cmd_markov(common: &Common, dump: bool) -> vsn_coverage::Result<Outcome> {
    let c = common.load()?;
    if dump {
        dump_matrices(common, &c)?;
    }
    let rep = harness::analyze_markov(&c)?;
    match &common.out {
        Some(o) => {
            write_json(&o.join("markov.json"), &rep)?;
            for p in &rep.stability.points {
                println!(
                    "eps {:<8} mass on {} {:.6}  lambda {:.6}  residual {:.1e}",
                    p.epsilon, rep.stability.target, p.target_mass, p.lambda, p.residual
                );
            }
            println!("max resistance error {:.4}", rep.max_resistance_error);
        }
        None => print_json(&rep)?,
    }
    Ok(Outcome::Ok)
}

/// Writes every ladder matrix densely; chains above `caps.dense` are refused.
fn dump_matrices(common: &Common, c: &ExperimentConfig) -> vsn_coverage::Result<()> {
    let dir = common
        .out
        .clone()
        .ok_or_else(|| Error::Config("--dump-matrices needs --out".into()))?;
    let spec = c.game_spec()?;
    let game = EnumeratedGame::new(&spec, c.caps.oracle)?;
    let chain = if c.algorithm.is_async() {
        Chain::asynchronous(&game, analysis_exponents(c, c.m_star(&spec)?), c.caps.states)?
    } else {
        Chain::synchronous(&game, c.caps.states)?
    };
    if chain.space.len() > c.caps.dense {
        return Err(Error::Capacity {
            what: "dense matrix dump".into(),
            needed: chain.space.len() as u128,
            cap: c.caps.dense as u128,
            hint: "raise caps.dense or use a smaller instance".into(),
        });
    }
    std::fs::create_dir_all(&dir)?;
    for &eps in &c.markov.epsilons {
        let path = dir.join(format!("matrix-eps{eps}.bin"));
        chain.matrix(eps)?.write_dense_binary(BufWriter::new(File::create(&path)?))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_recheck(out: &Path) -> vsn_coverage::Result<Outcome> {
    let rep = harness::recheck(out)?;
    println!(
        "{} runs, {} rows: {}",
        rep.runs,
        rep.rows,
        if rep.matches { "summary matches the traces".to_string() } else { format!("MISMATCH in {}", rep.mismatched.join(", ")) }
    );
    Ok(if rep.matches { Outcome::Ok } else { Outcome::Failed })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Parse(_) | Error::Domain(_) => 2,
        Error::Capacity { .. } => 3,
        Error::Structural(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Verify {
            common,
            negative_control,
        } => cmd_verify(common, *negative_control),
        Command::Oracle(c) => cmd_oracle(c),
        Command::Markov {
            common,
            dump_matrices,
        } => cmd_markov(common, *dump_matrices),
        Command::Recheck { out } => cmd_recheck(out),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
