use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use massid_core::adjoint::GradReport;
use massid_core::dynamics::{Integrator, Trajectory};
use massid_core::geom::load_mesh;
use massid_core::identify::{
    ablate_integrators, identify_mass, loss_problem, prepare_observations, synthesize_real_trajectory, IdentifyConfig,
    IdentifyReport, IdentifyStatus, Scenario, ScheduleKind,
};
use massid_policy::{generate_demos, write_demos, DemoConfig, GraspEnvConfig};

use crate::error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_DIVERGED, EXIT_IDENTIFY};
use crate::output::{sibling, Ctx};
use crate::IntegratorArg;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    scenario: PathBuf,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    /// Simulated mass; defaults to the scenario's true mass, then its m_init.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(short, long, default_value = "trajectory.jsonl")]
    output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Trajectory,
    Demos,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Scenario file, or an OBJ mesh for `--kind demos`.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "trajectory")]
    kind: DataKind,
    /// Ground-truth mass of the synthetic observation.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    pos_sigma: Option<f64>,
    #[arg(long)]
    z_bias: Option<f64>,
    #[arg(long)]
    quat_sigma: Option<f64>,
    /// Number of demonstrations.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Demonstration masses, cycled in order.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.2, 0.8])]
    masses: Vec<f64>,
    /// Grasp environment config (JSON).
    #[arg(long)]
    env_config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IdentifyArgs {
    scenario: PathBuf,
    /// Observed trajectory (JSONL).
    real: PathBuf,
    #[arg(long)]
    m_init: Option<f64>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(short, long, default_value = "identify.json")]
    output: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    scenario: PathBuf,
    real: PathBuf,
    #[arg(long)]
    m_init: Option<f64>,
    #[arg(short, long, default_value = "ablation.csv")]
    output: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    scenario: PathBuf,
    /// Observed trajectory; defaults to a noiseless rollout at the true mass.
    #[arg(long)]
    real: Option<PathBuf>,
    /// Mass at which the gradient is evaluated; defaults to m_init.
    #[arg(long)]
    mass: Option<f64>,
    /// Finite-difference step relative to the mass.
    #[arg(long, default_value_t = 1e-5)]
    h_rel: f64,
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    #[arg(short, long, default_value = "gradcheck.json")]
    output: PathBuf,
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    Ok(Scenario::load(path)?)
}

fn load_trajectory(path: &Path) -> CliResult<Trajectory> {
    let f = std::fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Trajectory::read_jsonl(BufReader::new(f)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::input(format!("{name} must be positive, got {v}")))
    }
}

fn default_mass(s: &Scenario, flag: Option<f64>) -> CliResult<f64> {
    positive("mass", flag.or(s.file.true_mass_kg).unwrap_or(s.file.m_init_kg))
}

pub fn simulate(ctx: &mut Ctx, a: SimulateArgs) -> CliResult<()> {
    let mut s = load_scenario(&a.scenario)?;
    if let Some(i) = a.integrator {
        s = s.with_integrator(i.into());
    }
    let mass = default_mass(&s, a.mass)?;
    let out = s.simulate(mass).map_err(|e| {
        let code = CliError::from(e.clone()).code;
        CliError::new(code, e).context(format!("simulating {}", a.scenario.display()))
    })?;
    let path = ctx.write(&a.output, out.trajectory.to_jsonl_string().as_bytes())?;
    ctx.finish(
        "simulate",
        &a.output,
        json!({ "scenario": s.file, "mass": mass }),
        json!({}),
    )?;
    ctx.report(&json!({ "output": path, "samples": out.trajectory.len() }), || {
        format!("wrote {} samples to {}", out.trajectory.len(), path.display())
    })
}

pub fn gen_data(ctx: &mut Ctx, a: GenDataArgs) -> CliResult<()> {
    match a.kind {
        DataKind::Trajectory => gen_trajectory(ctx, a),
        DataKind::Demos => gen_demos(ctx, a),
    }
}

fn gen_trajectory(ctx: &mut Ctx, a: GenDataArgs) -> CliResult<()> {
    let s = load_scenario(&a.input)?;
    let mass = default_mass(&s, a.mass)?;
    let mut noise = s.file.noise;
    if let Some(v) = a.pos_sigma {
        noise.pos_sigma = v;
    }
    if let Some(v) = a.z_bias {
        noise.z_bias = v;
    }
    if let Some(v) = a.quat_sigma {
        noise.quat_sigma = v;
    }
    if let Some(seed) = ctx.seed {
        noise.seed = seed;
    }
    let traj = synthesize_real_trajectory(&s, mass, &noise)?;
    let output = a.output.unwrap_or_else(|| PathBuf::from("real.jsonl"));
    let path = ctx.write(&output, traj.to_jsonl_string().as_bytes())?;
    ctx.finish(
        "gen-data",
        &output,
        json!({ "kind": a.kind, "scenario": s.file, "mass": mass, "noise": noise }),
        json!({ "noise": noise.seed }),
    )?;
    ctx.report(&json!({ "output": path, "samples": traj.len(), "noise": noise }), || {
        format!("wrote {} observed samples to {}", traj.len(), path.display())
    })
}

fn read_env_config(path: Option<&Path>) -> CliResult<GraspEnvConfig> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => GraspEnvConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn mesh_vertices(path: &Path) -> CliResult<Vec<massid_core::geom::Vec3>> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mesh = load_mesh(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(mesh.vertices)
    } else {
        Ok(load_scenario(path)?.body.mesh.vertices)
    }
}

fn gen_demos(ctx: &mut Ctx, a: GenDataArgs) -> CliResult<()> {
    let env = read_env_config(a.env_config.as_deref())?;
    let vertices = mesh_vertices(&a.input)?;
    let cfg = DemoConfig {
        count: a.count,
        masses: a.masses.clone(),
        seed: ctx.seed.unwrap_or(0),
        ..DemoConfig::default()
    };
    let demos = generate_demos(&vertices, &cfg, &env)?;
    let mut bytes = Vec::new();
    write_demos(&mut bytes, &demos)?;
    let output = a.output.unwrap_or_else(|| PathBuf::from("demos.jsonl"));
    let path = ctx.write(&output, &bytes)?;
    ctx.finish(
        "gen-data",
        &output,
        json!({ "kind": a.kind, "input": a.input, "demos": cfg, "env": env }),
        json!({ "demos": cfg.seed }),
    )?;
    ctx.report(&json!({ "output": path, "count": demos.len() }), || {
        format!("wrote {} demonstrations to {}", demos.len(), path.display())
    })
}

fn identify_config(s: &Scenario, m_init: Option<f64>) -> CliResult<IdentifyConfig> {
    let mut cfg = IdentifyConfig::for_scenario(s);
    if let Some(m) = m_init {
        cfg.m_init = positive("m-init", m)?;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CurveRow {
    epoch: usize,
    m: f64,
    loss: f64,
}

fn curve_rows(r: &IdentifyReport) -> impl Iterator<Item = CurveRow> + '_ {
    r.curve_rows().map(|(epoch, m, loss)| CurveRow { epoch, m, loss })
}

pub fn identify(ctx: &mut Ctx, a: IdentifyArgs) -> CliResult<()> {
    let mut s = load_scenario(&a.scenario)?;
    if let Some(i) = a.integrator {
        s = s.with_integrator(i.into());
    }
    let real = load_trajectory(&a.real)?;
    let mut cfg = identify_config(&s, a.m_init)?;
    if let Some(k) = a.schedule {
        cfg.schedule = k;
    }
    if let Some(lr) = a.lr {
        cfg.lr = positive("lr", lr)?;
    }
    if let Some(n) = a.max_epochs {
        cfg.max_epochs = n;
    }
    let report = identify_mass(&s, &real, &cfg)?;
    ctx.write_json(&a.output, &report)?;
    ctx.write_csv(&sibling(&a.output, ".curve.csv"), curve_rows(&report))?;
    ctx.finish(
        "identify",
        &a.output,
        json!({ "scenario": s.file, "real": a.real, "identify": cfg }),
        json!({}),
    )?;

    match report.status {
        IdentifyStatus::Unobservable => {
            return Err(CliError::new(EXIT_IDENTIFY, anyhow::anyhow!("mass unobservable")));
        }
        IdentifyStatus::Diverged => {
            let msg = report.diagnostic.clone().unwrap_or_else(|| "rollout diverged".into());
            return Err(CliError::new(EXIT_DIVERGED, anyhow::anyhow!(msg)));
        }
        _ => {}
    }
    let m_hat = report.m_hat.ok_or_else(|| CliError::new(EXIT_IDENTIFY, anyhow::anyhow!("no usable iterate")))?;
    let summary = json!({
        "m_hat": m_hat,
        "epochs": report.epochs_run,
        "status": report.status,
        "rel_err": s.file.true_mass_kg.and_then(|t| report.relative_error(t)),
    });
    ctx.report(&summary, || format!("m_hat = {m_hat} kg ({:?} after {} epochs)", report.status, report.epochs_run))
}

#[derive(Serialize)]
struct AblationRow {
    integrator: &'static str,
    m_hat: String,
    abs_err: String,
    sec_per_iter: f64,
    divergences: usize,
}

fn ablation_row(name: &'static str, r: &IdentifyReport, truth: Option<f64>) -> AblationRow {
    let usable = r.status != IdentifyStatus::Diverged;
    let m = r.m_hat.filter(|_| usable);
    AblationRow {
        integrator: name,
        m_hat: m.map_or_else(|| "diverged".into(), |v| v.to_string()),
        abs_err: match (m, truth) {
            (Some(m), Some(t)) => (m - t).abs().to_string(),
            (None, _) => "diverged".into(),
            _ => String::new(),
        },
        sec_per_iter: r.sec_per_iter(),
        divergences: r.divergences,
    }
}

pub fn ablate(ctx: &mut Ctx, a: AblateArgs) -> CliResult<()> {
    let s = load_scenario(&a.scenario)?;
    let real = load_trajectory(&a.real)?;
    let cfg = identify_config(&s, a.m_init)?;
    let r = ablate_integrators(&s, &real, &cfg)?;
    let rows = [
        ablation_row("semi", &r.semi, r.truth),
        ablation_row("explicit", &r.explicit, r.truth),
    ];
    let summary = json!({
        "semi": { "m_hat": rows[0].m_hat, "abs_err": r.abs_err(Integrator::SemiImplicit), "divergences": r.semi.divergences },
        "explicit": { "m_hat": rows[1].m_hat, "abs_err": r.abs_err(Integrator::Explicit), "divergences": r.explicit.divergences },
    });
    let human = rows
        .iter()
        .map(|x| format!("{:<9} m_hat {:<22} abs_err {:<24} {:.4} s/iter", x.integrator, x.m_hat, x.abs_err, x.sec_per_iter))
        .collect::<Vec<_>>()
        .join("\n");
    ctx.write_csv(&a.output, rows)?;
    ctx.finish(
        "ablate",
        &a.output,
        json!({ "scenario": s.file, "real": a.real, "identify": cfg }),
        json!({}),
    )?;
    ctx.report(&summary, || human)
}

pub fn gradcheck(ctx: &mut Ctx, a: GradcheckArgs) -> CliResult<()> {
    let s = load_scenario(&a.scenario)?;
    let real = match &a.real {
        Some(p) => load_trajectory(p)?,
        None => s.reference_trajectory(s.true_mass()?)?,
    };
    let m = positive("mass", a.mass.unwrap_or(s.file.m_init_kg))?;
    let obs = prepare_observations(&s, &real)?;
    let problem = loss_problem(&s, &obs, s.file.quat_weight);
    let report: GradReport = problem.grad(m)?.with_fd(problem.fd_grad(m, a.h_rel * m)?);
    let rel = report.rel_err.unwrap_or(f64::INFINITY);
    let pass = rel <= a.threshold;
    let out = json!({
        "mass": m,
        "grad": report.grad,
        "fd_grad": report.fd_grad,
        "rel_err": rel,
        "loss": report.loss,
        "threshold": a.threshold,
        "pass": pass,
    });
    ctx.write_json(&a.output, &out)?;
    ctx.finish(
        "gradcheck",
        &a.output,
        json!({ "scenario": s.file, "real": a.real, "mass": m, "h_rel": a.h_rel, "threshold": a.threshold }),
        json!({}),
    )?;
    ctx.report(&out, || {
        format!("grad {:e}  fd_grad {:e}  rel_err {:e}", report.grad, report.fd_grad.unwrap_or(f64::NAN), rel)
    })?;
    if pass {
        Ok(())
    } else {
        Err(CliError::new(
            EXIT_CHECK_FAILED,
            anyhow::anyhow!("relative error {rel:e} exceeds threshold {:e}", a.threshold),
        ))
    }
}
