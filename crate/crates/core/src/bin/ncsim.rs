use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use ncsim::control::{riccati_backward, two_step_u0_optimal};
use ncsim::estimation::TwoStepProblem;
use ncsim::output::{self, RunManifest};
use ncsim::scenario::{parse_scenario, LoadedScenario};
use ncsim::sim::{monte_carlo, parse_grid, prepare, run_episode, sweep_threshold, ControlLaw, EpisodeOptions};
use ncsim::stats::{conditional_moments_compound, truncated_moments, QuadratureSpec, TruncatedGaussian};
use ncsim::{Error, Result, Weights};

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const DEFAULT_SEED: u64 = 1;
const DEFAULT_EPISODES: usize = 1000;

#[derive(Parser)]
#[command(name = "ncsim", version, about = "Networked control loops sharing a contention-based channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory, created if missing.
    #[arg(long, env = "NCSIM_OUT_DIR", default_value = "ncsim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (example1, example1-baseline, example3) or TOML path.
    #[arg(long)]
    scenario: String,
    /// Master seed; defaults to the scenario's seed, then 1.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo episodes; defaults to the scenario's count, then 1000.
    #[arg(long)]
    episodes: Option<usize>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Lqg,
    Zero,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run writing per-loop and per-group cost summaries.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "lqg")]
        law: Law,
        /// Episodes whose full traces and slot logs are written.
        #[arg(long, default_value_t = 1)]
        trace_episodes: usize,
    },
    /// Cost and network statistics over a grid of scheduler thresholds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Threshold grid as lo:hi:step.
        #[arg(long)]
        eps_grid: String,
    },
    /// Certainty-equivalent and dual-effect optimal first control of the
    /// scalar two-step problem.
    TwoStep {
        /// Branch as delta0=1 or delta0=0.
        #[arg(long, default_value = "delta0=1")]
        branch: String,
        /// Delivered initial state, used when delta0=1.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        threshold: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        b: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Backward Riccati sequence for one loop of a scenario, or for a scalar
    /// plant with unit weights.
    Riccati {
        #[arg(long)]
        scenario: Option<String>,
        /// Loop index within the scenario.
        #[arg(long, default_value_t = 0)]
        r#loop: usize,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Moments of a Gaussian truncated above, and optionally of `gain·X + W`
    /// conditioned on lying below `bound`.
    Moments {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mean: f64,
        #[arg(long, default_value_t = 1.0)]
        var: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        upper: f64,
        #[arg(long, allow_hyphen_values = true)]
        gain: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
        #[arg(long, allow_hyphen_values = true)]
        bound: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn load(run: &RunArgs) -> Result<(LoadedScenario, u64, usize)> {
    let loaded = parse_scenario(&run.scenario)?;
    let seed = run.seed.or(loaded.seed).unwrap_or(DEFAULT_SEED);
    let episodes = run.episodes.or(loaded.episodes).unwrap_or(DEFAULT_EPISODES);
    if episodes == 0 {
        return Err(Error::Config("--episodes must be at least 1".into()));
    }
    Ok((loaded, seed, episodes))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn simulate(run: &RunArgs, law: Law, trace_episodes: usize) -> Result<()> {
    let (loaded, seed, episodes) = load(run)?;
    let out = &run.out.out;
    ensure_dir(out)?;
    let law = match law {
        Law::Lqg => ControlLaw::Lqg,
        Law::Zero => ControlLaw::Zero,
    };
    let prepared = prepare(loaded.scenario)?;
    let mc = monte_carlo(&prepared, seed, episodes, law)?;
    let mut manifest = RunManifest::new("simulate");
    manifest.scenario_hash = Some(output::scenario_hash(&prepared.scenario)?);
    manifest.seed = Some(seed);
    manifest.episodes = Some(episodes);

    let summary = out.join("summary.csv");
    output::write_summary(&summary, &mc)?;
    let groups = out.join("groups.csv");
    output::write_groups(&groups, &mc)?;
    manifest.outputs.extend([summary, groups]);
    if trace_episodes > 0 {
        let options = EpisodeOptions { law, record_slots: true };
        let traced = (0..trace_episodes.min(episodes) as u64)
            .map(|e| run_episode(&prepared, seed, e, &options))
            .collect::<Result<Vec<_>>>()?;
        let trace = out.join("trace.csv");
        output::write_trace(&trace, &traced)?;
        let slots = out.join("slots.csv");
        output::write_slots(&slots, &traced)?;
        manifest.outputs.extend([trace, slots]);
    }
    manifest.write(&out.join("manifest.json"))?;

    out!("group\tloops\tJ mean\t± 95%\tJ_DP\ttransmissions");
    for g in &mc.groups {
        out!(
            "{}\t{}\t{:.4}\t{}\t{}\t{:.3}",
            g.group,
            g.loops,
            g.report.j_mean,
            fmt_opt(g.report.ci95()),
            fmt_opt(g.report.jdp),
            g.report.transmissions_mean
        );
    }
    out!(
        "requests/sample {:.4}, collisions/request {:.4}, drops/request {:.4}, bound probability {}",
        mc.network.request_rate(),
        mc.network.collision_rate(),
        mc.network.drop_rate(),
        fmt_opt(mc.network.bound_probability())
    );
    Ok(())
}

fn sweep(run: &RunArgs, grid: &str) -> Result<()> {
    let grid = parse_grid(grid)?;
    let (loaded, seed, episodes) = load(run)?;
    let out = &run.out.out;
    ensure_dir(out)?;
    let prepared = prepare(loaded.scenario)?;
    let result = sweep_threshold(&prepared, &grid, seed, episodes)?;
    let path = out.join("sweep.csv");
    output::write_sweep(&path, &result)?;
    let mut manifest = RunManifest::new("sweep");
    manifest.scenario_hash = Some(output::scenario_hash(&prepared.scenario)?);
    manifest.seed = Some(seed);
    manifest.episodes = Some(episodes);
    manifest.outputs.push(path);
    manifest.write(&out.join("manifest.json"))?;
    out!("epsilon\tJ mean\tSE\tbound probability\tcollision rate");
    for r in &result.rows {
        out!(
            "{}\t{:.4}\t{}\t{}\t{:.4}",
            r.epsilon,
            r.j_mean,
            fmt_opt(r.j_se),
            fmt_opt(r.bound_probability),
            r.collision_rate
        );
    }
    if let Some(best) = result.argmin() {
        out!("lowest mean cost at epsilon = {}", best.epsilon);
    }
    Ok(())
}

fn parse_branch(branch: &str) -> Result<bool> {
    match branch.replace(' ', "").as_str() {
        "delta0=1" => Ok(true),
        "delta0=0" => Ok(false),
        other => Err(Error::Config(format!("--branch must be delta0=1 or delta0=0, got {other:?}"))),
    }
}

fn two_step(branch: &str, x0: f64, threshold: f64, a: f64, b: f64, out: &Path) -> Result<()> {
    let delta0 = parse_branch(branch)?;
    let problem = TwoStepProblem { a, b, threshold, ..Default::default() };
    let sol = two_step_u0_optimal(&problem, x0, delta0)?;
    ensure_dir(out)?;
    let path = out.join("two_step.csv");
    output::write_two_step(&path, &[(delta0, x0, sol.clone())])?;
    let mut manifest = RunManifest::new("two-step");
    manifest.outputs.push(path);
    manifest.write(&out.join("manifest.json"))?;
    out!("S1 = {}", sol.s1);
    out!("x̂_0|0 = {}", sol.xhat00);
    out!("certainty-equivalent u0 = {}", sol.u0_ce);
    out!("optimal u0 = {}", sol.u0_optimal);
    out!("stationarity residual at certainty-equivalent u0 = {}", sol.residual_at_ce);
    Ok(())
}

fn riccati(scenario: Option<&str>, index: usize, a: f64, b: f64, horizon: usize, out: &Path) -> Result<()> {
    let ric = match scenario {
        Some(s) => {
            let loaded = parse_scenario(s)?;
            let l = loaded.scenario.loops.get(index).ok_or_else(|| {
                Error::Config(format!("scenario has {} loops, no index {index}", loaded.scenario.loops.len()))
            })?;
            riccati_backward(&l.plant.a, &l.plant.b, &l.weights, l.horizon)?
        }
        None => riccati_backward(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, b),
            &Weights::identity(1, 1),
            horizon,
        )?,
    };
    ensure_dir(out)?;
    let path = out.join("riccati.csv");
    output::write_riccati(&path, &ric)?;
    let mut manifest = RunManifest::new("riccati");
    manifest.outputs.push(path);
    manifest.write(&out.join("manifest.json"))?;
    out!("S_0 = {}", ric.s[0]);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn moments(
    mean: f64,
    var: f64,
    upper: f64,
    gain: Option<f64>,
    noise_var: f64,
    bound: Option<f64>,
    out: &Path,
) -> Result<()> {
    let tg = TruncatedGaussian::new(mean, var, upper)?;
    let m = truncated_moments(&tg)?;
    ensure_dir(out)?;
    let path = out.join("moments.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["quantity", "probability", "mean", "variance"])?;
    w.write_record(["truncated", &m.probability.to_string(), &m.mean.to_string(), &m.variance.to_string()])?;
    out!("Pr = {}, mean = {}, variance = {}", m.probability, m.mean, m.variance);
    if let Some(gain) = gain {
        let c = bound.ok_or_else(|| Error::Config("--gain requires --bound".into()))?;
        let cm = conditional_moments_compound(gain, &tg, noise_var, c, &QuadratureSpec::default())?;
        w.write_record(["compound", &cm.probability.to_string(), &cm.mean.to_string(), &cm.variance.to_string()])?;
        out!("compound: Pr = {}, mean = {}, variance = {}", cm.probability, cm.mean, cm.variance);
    }
    w.flush()?;
    let mut manifest = RunManifest::new("moments");
    manifest.outputs.push(path);
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, law, trace_episodes } => simulate(&run, law, trace_episodes),
        Command::Sweep { run, eps_grid } => sweep(&run, &eps_grid),
        Command::TwoStep { branch, x0, threshold, a, b, out } => two_step(&branch, x0, threshold, a, b, &out.out),
        Command::Riccati { scenario, r#loop, a, b, horizon, out } => {
            riccati(scenario.as_deref(), r#loop, a, b, horizon, &out.out)
        }
        Command::Moments { mean, var, upper, gain, noise_var, bound, out } => {
            moments(mean, var, upper, gain, noise_var, bound, &out.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ncsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
