use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use massid_policy::eval::TrialJitter;
use massid_policy::io::{params_from_bytes, params_to_bytes};
use massid_policy::{
    cross_mass_eval, phase1_train, phase2_train, read_demos, EnvFixture, EpochLoss, GraspEnvConfig, GraspPolicy, MassInput,
    OraclePolicy, Policy, PolicySpec, TrainConfig,
};

use crate::error::{CliError, CliResult};
use crate::identify::mesh_vertices;
use crate::output::{sibling, Ctx};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Demonstrations (JSONL).
    demos: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    phase: Phase,
    /// Starting parameters; required for `--phase 2`.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    epochs_phase1: Option<usize>,
    #[arg(long)]
    epochs_phase2: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    m_ref: Option<f64>,
    /// Zero the mass input.
    #[arg(long)]
    mass_blind: bool,
    /// Grasp environment config (JSON).
    #[arg(long)]
    env_config: Option<PathBuf>,
    #[arg(short, long, default_value = "policy.bin")]
    output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassFeed {
    /// Each policy is told the mass it was trained for.
    Train,
    /// Each policy is told the evaluated object's mass.
    Eval,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Parameter files (glob pattern), evaluated in sorted path order.
    #[arg(long, required_unless_present = "oracle")]
    params: Option<String>,
    /// Training mass of each parameter file, in the same order.
    #[arg(long, value_delimiter = ',')]
    train_masses: Vec<f64>,
    /// Evaluate the hard-wired pinch-and-force oracle instead.
    #[arg(long, conflicts_with = "params")]
    oracle: bool,
    /// Object masses to evaluate against.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.2, 0.8])]
    masses: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value = "train")]
    mass_input: MassFeed,
    /// Object mesh (OBJ) or scenario whose mesh is grasped.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    env_config: Option<PathBuf>,
    #[arg(short, long, default_value = "cross_mass.csv")]
    output: PathBuf,
}

fn read_env(path: Option<&Path>) -> CliResult<GraspEnvConfig> {
    let cfg: GraspEnvConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => GraspEnvConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_policy(path: &Path) -> CliResult<Policy> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let p = params_from_bytes(&bytes).map_err(|e| CliError::from(e).context(path.display().to_string()))?;
    p.check()?;
    Ok(p)
}

pub fn train(ctx: &mut Ctx, a: TrainArgs) -> CliResult<()> {
    let f = std::fs::File::open(&a.demos).map_err(|e| CliError::input(format!("{}: {e}", a.demos.display())))?;
    let demos = read_demos(BufReader::new(f)).map_err(|e| CliError::from(e).context(a.demos.display().to_string()))?;
    if demos.is_empty() {
        return Err(CliError::input(format!("{}: dataset is empty", a.demos.display())));
    }
    let seed = ctx.seed.unwrap_or(0);
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        epochs_phase1: a.epochs_phase1.unwrap_or(defaults.epochs_phase1),
        epochs_phase2: a.epochs_phase2.unwrap_or(defaults.epochs_phase2),
        lr: a.lr.unwrap_or(defaults.lr),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed,
        env: read_env(a.env_config.as_deref())?,
        ..defaults
    };
    cfg.validate()?;

    let start = match (&a.init, a.phase) {
        (Some(p), _) => load_policy(p)?,
        (None, Phase::Two) => return Err(CliError::input("--phase 2 needs --init with phase-1 parameters")),
        (None, _) => {
            let d = PolicySpec::default();
            let spec = PolicySpec {
                bands: a.bands.unwrap_or(d.bands),
                hidden: a.hidden.unwrap_or(d.hidden),
                m_ref: a.m_ref.unwrap_or(d.m_ref),
                mass_blind: a.mass_blind,
            };
            if spec.hidden == 0 || !(spec.m_ref > 0.0) {
                return Err(CliError::input("hidden must be at least 1 and m_ref positive"));
            }
            Policy::init(spec, seed)
        }
    };

    let mut curve: Vec<EpochLoss> = Vec::new();
    let mut policy = start;
    if a.phase != Phase::Two {
        let (p, c) = phase1_train(&policy, &demos, &cfg)?;
        policy = p;
        curve.extend(c);
    }
    if a.phase != Phase::One {
        let fixtures: Vec<EnvFixture> = demos.iter().map(EnvFixture::from).collect();
        let (p, c) = phase2_train(&policy, &fixtures, &cfg)?;
        policy = p;
        curve.extend(c);
    }

    let train_masses: Vec<f64> = {
        let mut m: Vec<f64> = demos.iter().map(|d| d.mass_kg).collect();
        m.sort_by(f64::total_cmp);
        m.dedup();
        m
    };
    let path = ctx.write(&a.output, &params_to_bytes(&policy))?;
    ctx.write_csv(&sibling(&a.output, ".curve.csv"), curve.iter().map(CurveRow::from))?;
    ctx.finish(
        "train-policy",
        &a.output,
        json!({ "demos": a.demos, "phase": a.phase, "init": a.init, "spec": policy.spec, "train": cfg, "train_masses": train_masses }),
        json!({ "init": seed, "shuffle": seed }),
    )?;
    let last = curve.last().copied();
    ctx.report(&json!({ "output": path, "final": last }), || match last {
        Some(l) => format!(
            "wrote {} (final phase {} epoch {}: action {:.3e}, reward {:.3e}, force {:.3e})",
            path.display(),
            l.phase,
            l.epoch,
            l.action,
            l.reward,
            l.force
        ),
        None => format!("wrote {}", path.display()),
    })
}

#[derive(Serialize)]
struct CurveRow {
    phase: u8,
    epoch: usize,
    action: f64,
    reward: f64,
    force: f64,
    total: f64,
    success: Option<f64>,
}

impl From<&EpochLoss> for CurveRow {
    fn from(e: &EpochLoss) -> Self {
        Self {
            phase: e.phase,
            epoch: e.epoch,
            action: e.action,
            reward: e.reward,
            force: e.force,
            total: e.total,
            success: e.success,
        }
    }
}

pub fn eval(ctx: &mut Ctx, a: EvalArgs) -> CliResult<()> {
    let env = read_env(a.env_config.as_deref())?;
    let vertices = mesh_vertices(&a.mesh)?;
    if a.masses.is_empty() || a.masses.iter().any(|m| !(*m > 0.0)) {
        return Err(CliError::input("--masses must be positive"));
    }

    let mut files: Vec<PathBuf> = Vec::new();
    if let Some(pattern) = &a.params {
        let paths = glob::glob(pattern).map_err(|e| CliError::input(format!("bad glob {pattern:?}: {e}")))?;
        for p in paths {
            files.push(p.map_err(|e| CliError::input(e.to_string()))?);
        }
        files.sort();
        if files.is_empty() {
            return Err(CliError::input(format!("no parameter files match {pattern:?}")));
        }
    }
    let policies: Vec<Policy> = files.iter().map(|p| load_policy(p)).collect::<CliResult<_>>()?;

    let train_masses = if a.oracle {
        if a.train_masses.is_empty() {
            a.masses.clone()
        } else {
            a.train_masses.clone()
        }
    } else {
        a.train_masses.clone()
    };
    let rows = if a.oracle { train_masses.len() } else { policies.len() };
    if train_masses.len() != rows {
        return Err(CliError::input(format!(
            "{} parameter files but {} training masses",
            rows,
            train_masses.len()
        )));
    }

    let oracle = OraclePolicy;
    let feed = |m: f64| match a.mass_input {
        MassFeed::Train => MassInput::Fixed(m),
        MassFeed::Eval => MassInput::Eval,
    };
    let table: Vec<(&dyn GraspPolicy, MassInput)> = if a.oracle {
        train_masses.iter().map(|&m| (&oracle as &dyn GraspPolicy, feed(m))).collect()
    } else {
        policies.iter().zip(&train_masses).map(|(p, &m)| (p as &dyn GraspPolicy, feed(m))).collect()
    };
    let seed = ctx.seed.unwrap_or(0);
    let jitter = TrialJitter::default();
    let matrix = cross_mass_eval(&table, &train_masses, &a.masses, &vertices, a.trials, seed, jitter, &env)?;
    let dominance = matrix.diagonal_dominance();

    ctx.write_csv(&a.output, matrix.cells.iter().copied())?;
    ctx.finish(
        "eval-policy",
        &a.output,
        json!({
            "params": files,
            "oracle": a.oracle,
            "train_masses": train_masses,
            "eval_masses": a.masses,
            "trials": a.trials,
            "mass_input": a.mass_input,
            "mesh": a.mesh,
            "jitter": jitter,
            "env": env,
        }),
        json!({ "trials": seed }),
    )?;

    let summary = json!({ "matrix": matrix, "diagonal_dominance": dominance });
    ctx.report(&summary, || {
        let mut lines = Vec::new();
        for (i, m) in train_masses.iter().enumerate() {
            let rates: Vec<String> = (0..a.masses.len()).map(|j| format!("{:.2}", matrix.rate(i, j))).collect();
            let verdict = match dominance[i] {
                Some(true) => "diagonal dominant",
                Some(false) => "NOT diagonal dominant",
                None => "no matching eval mass",
            };
            lines.push(format!("trained {m} kg: [{}] {verdict}", rates.join(", ")));
        }
        lines.join("\n")
    })
}
