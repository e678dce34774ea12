//! `massid`: simulate scenarios, synthesize observations, identify masses,
//! and train and evaluate force-aware grasp policies.

mod error;
mod identify;
mod output;
mod policy;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};
use massid_core::dynamics::Integrator;
use output::{Ctx, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "massid", version, about = "Mass identification and force-aware grasping", args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every random draw of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "MASSID_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll out a scenario and write its trajectory as JSONL.
    Simulate(identify::SimulateArgs),
    /// Synthesize an observed trajectory or grasp demonstrations.
    GenData(identify::GenDataArgs),
    /// Identify the mass behind an observed trajectory.
    Identify(identify::IdentifyArgs),
    /// Identify with both integrators and compare.
    Ablate(identify::AblateArgs),
    /// Compare the adjoint mass gradient with finite differences.
    Gradcheck(identify::GradcheckArgs),
    /// Train a grasp policy on demonstrations.
    TrainPolicy(policy::TrainArgs),
    /// Cross-evaluate grasp policies over object masses.
    EvalPolicy(policy::EvalArgs),
    /// Re-run a command from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug)]
struct RerunArgs {
    manifest: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegratorArg {
    Semi,
    Explicit,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::Semi => Integrator::SemiImplicit,
            IntegratorArg::Explicit => Integrator::Explicit,
        }
    }
}

fn absolute(p: PathBuf) -> CliResult<PathBuf> {
    Ok(if p.is_absolute() { p } else { std::env::current_dir()?.join(p) })
}

fn run(args: Vec<OsString>) -> CliResult<()> {
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| {
        let _ = e.print();
        CliError::new(if e.use_stderr() { error::EXIT_INPUT } else { 0 }, anyhow::anyhow!(""))
    })?;
    let g = cli.global;

    if let Command::Rerun(r) = cli.command {
        let m = RunManifest::load(&r.manifest)?;
        let out_dir = absolute(g.out_dir)?;
        std::env::set_current_dir(&m.cwd).map_err(|e| CliError::input(format!("{}: {e}", m.cwd.display())))?;
        let mut replay: Vec<OsString> = vec!["massid".into()];
        replay.extend(m.args.iter().map(OsString::from));
        replay.push("--out-dir".into());
        replay.push(out_dir.into());
        return run(replay);
    }

    if let Some(n) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    let mut ctx = Ctx::new(g.out_dir, g.seed, g.json, recorded);
    match cli.command {
        Command::Simulate(a) => identify::simulate(&mut ctx, a),
        Command::GenData(a) => identify::gen_data(&mut ctx, a),
        Command::Identify(a) => identify::identify(&mut ctx, a),
        Command::Ablate(a) => identify::ablate(&mut ctx, a),
        Command::Gradcheck(a) => identify::gradcheck(&mut ctx, a),
        Command::TrainPolicy(a) => policy::train(&mut ctx, a),
        Command::EvalPolicy(a) => policy::eval(&mut ctx, a),
        Command::Rerun(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = e.to_string();
            if !text.is_empty() {
                eprintln!("error: {text}");
            }
            ExitCode::from(e.code)
        }
    }
}
