//! `fopid` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fopid_core::abc::{tune_fopid, tune_pid, TuneOutcome};
use fopid_core::artifacts::{self, BodeTarget};
use fopid_core::metrics::{
    build_report, disturbance_metrics, switch_reduction_pct, ComparisonReport, DisturbanceMetrics,
};
use fopid_core::{Error, FopidParams, RunConfig, SimResult};

#[derive(Parser)]
#[command(
    name = "fopid",
    version,
    about = "Fractional-order PID tuning for a boost converter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune controller parameters with the bee colony optimizer.
    Tune(TuneArgs),
    /// Run one closed-loop startup with fixed parameters.
    Simulate(SimArgs),
    /// Run the input-voltage step experiment with fixed parameters.
    Disturb(DisturbArgs),
    /// Frequency response of `s^ν` or of a controller.
    Bode(BodeArgs),
    /// Tune PID and FOPID side by side and compare the best of each.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted sections take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    /// Tune a classical PID (λ = μ = 1).
    #[arg(long, conflicts_with = "fopid")]
    pid: bool,
    /// Tune all five fractional-order parameters (default).
    #[arg(long)]
    fopid: bool,
    /// Seed of the first run; run `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 4)]
    runs: usize,
}

#[derive(Args)]
struct ParamArgs {
    /// JSON file holding parameters, either bare or under a `params` key.
    #[arg(long, conflicts_with = "kp")]
    params: Option<PathBuf>,
    #[arg(long)]
    kp: Option<f64>,
    /// Omit to disable integral action.
    #[arg(long, requires = "kp")]
    ti: Option<f64>,
    #[arg(long, requires = "kp")]
    td: Option<f64>,
    #[arg(long, requires = "kp")]
    lambda: Option<f64>,
    #[arg(long, requires = "kp")]
    mu: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct DisturbArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: ParamArgs,
    /// Step time in seconds.
    #[arg(long)]
    time: Option<f64>,
    /// Relative input-voltage step, e.g. 0.1 for +10 %.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct BodeArgs {
    #[command(flatten)]
    common: Common,
    /// Fractional power to approximate; otherwise controller parameters are used.
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
    /// Lower frequency in rad/s (default: lower edge of the approximation band).
    #[arg(long)]
    w_min: Option<f64>,
    /// Upper frequency in rad/s (default: upper edge of the approximation band).
    #[arg(long)]
    w_max: Option<f64>,
    #[arg(long, default_value_t = 20)]
    points_per_decade: usize,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Unstable(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            e if e.is_config() => Failure::Config(e.to_string()),
            Error::NoStableRun => Failure::Unstable(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Tune(a) => tune(a),
        Command::Simulate(a) => simulate(a),
        Command::Disturb(a) => disturb(a),
        Command::Bode(a) => bode(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Unstable(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn resolve_params(args: &ParamArgs, cfg: &RunConfig) -> CliResult<FopidParams> {
    let p = if let Some(path) = &args.params {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
        let inner = value.get("params").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(Error::from)?
    } else if let Some(kp) = args.kp {
        FopidParams {
            kp,
            ti: args.ti.unwrap_or(f64::INFINITY),
            td: args.td.unwrap_or(0.0),
            lambda: args.lambda.unwrap_or(1.0),
            mu: args.mu.unwrap_or(1.0),
        }
    } else if let Some(p) = cfg.controller.params {
        p
    } else {
        return Err(Failure::Config(
            "no controller parameters: pass --params, --kp, or set controller.params".into(),
        ));
    };
    p.validate()?;
    Ok(p)
}

fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    seed: u64,
    params: &FopidParams,
    result: &SimResult,
    disturbance: Option<&DisturbanceMetrics>,
) -> CliResult<()> {
    write(dir, "trace.csv", &artifacts::trace_csv(&result.trace)?)?;
    write(dir, "plot.dat", &artifacts::plot_data(&result.trace))?;
    write(
        dir,
        "summary.json",
        &artifacts::summary_json(cfg, seed, params, result, disturbance)?,
    )
}

fn print_result(label: &str, r: &SimResult) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.5}"));
    if let Some(t) = r.blowup_time {
        println!("{label}: stable=false, breaker tripped at {t:.6} s");
        return;
    }
    println!(
        "{label}: stable={} J_IAE={:.6} overshoot%={} settling_s={} switches={}",
        r.stable,
        r.j_iae,
        opt(r.overshoot_pct),
        opt(r.settling_time),
        r.switch_count
    );
}

struct TunedRun {
    id: usize,
    seed: u64,
    outcome: TuneOutcome,
}

/// `runs` tuning runs on consecutive seeds, one thread per run.
fn tune_runs(
    cfg: &RunConfig,
    fractional: bool,
    first_seed: u64,
    runs: usize,
) -> CliResult<Vec<TunedRun>> {
    if runs == 0 {
        return Err(Failure::Config("--runs must be at least 1".into()));
    }
    let setup = cfg.loop_config();
    let results: Vec<fopid_core::Result<TunedRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..runs)
            .map(|i| {
                let setup = &setup;
                scope.spawn(move || {
                    let seed = first_seed.wrapping_add(i as u64);
                    let mut abc = cfg.abc.clone();
                    abc.rng_seed = seed;
                    let outcome = if fractional {
                        tune_fopid(setup, &cfg.search, &abc)?
                    } else {
                        tune_pid(setup, &cfg.search, &abc)?
                    };
                    Ok(TunedRun {
                        id: i + 1,
                        seed,
                        outcome,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tuning thread panicked"))
            .collect()
    });
    Ok(results.into_iter().collect::<fopid_core::Result<_>>()?)
}

/// Per-run artifacts plus the report; returns the report when any run is stable.
fn write_tuning(
    dir: &Path,
    cfg: &RunConfig,
    kind: &str,
    runs: &[TunedRun],
) -> CliResult<Option<ComparisonReport>> {
    for run in runs {
        let run_dir = dir.join(format!("run_{}", run.id));
        let mut run_cfg = cfg.clone();
        run_cfg.abc.rng_seed = run.seed;
        let o = &run.outcome;
        write(
            &run_dir,
            "history.csv",
            &artifacts::history_csv(&o.optimization.history)?,
        )?;
        write(
            &run_dir,
            "best_params.json",
            &artifacts::best_params_json(
                &run_cfg,
                run.seed,
                kind,
                &o.params,
                o.optimization.best.cost,
                o.optimization.evaluations,
                o.penalized(),
            )?,
        )?;
        write_run(&run_dir, &run_cfg, run.seed, &o.params, &o.result, None)?;
        print_result(
            &format!("{kind} run {} (seed {})", run.id, run.seed),
            &o.result,
        );
    }
    let rows: Vec<_> = runs
        .iter()
        .map(|r| (r.id, r.outcome.params, &r.outcome.result))
        .collect();
    match build_report(kind, &rows) {
        Ok(report) => {
            write(dir, "report.csv", &report.to_csv()?)?;
            write(dir, "report.json", &report.to_json()?)?;
            println!("{kind}: best run {}", report.best_run);
            Ok(Some(report))
        }
        Err(Error::NoStableRun) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn tune(args: TuneArgs) -> CliResult<()> {
    let (cfg, out) = load(&args.common)?;
    let kind = if args.pid { "pid" } else { "fopid" };
    let seed = args.seed.unwrap_or(cfg.abc.rng_seed);
    let runs = tune_runs(&cfg, !args.pid, seed, args.runs)?;
    match write_tuning(&out.join(kind), &cfg, kind, &runs)? {
        Some(_) => Ok(()),
        None => Err(Error::NoStableRun.into()),
    }
}

fn simulate(args: SimArgs) -> CliResult<()> {
    let (cfg, out) = load(&args.common)?;
    let params = resolve_params(&args.params, &cfg)?;
    let r = cfg.loop_config().evaluate(&params)?;
    write_run(&out, &cfg, cfg.abc.rng_seed, &params, &r, None)?;
    print_result("simulate", &r);
    Ok(())
}

fn run_disturbance(
    cfg: &RunConfig,
    params: &FopidParams,
) -> CliResult<(SimResult, Option<DisturbanceMetrics>)> {
    let test = cfg.disturbance_test;
    let setup = cfg.loop_config().with_disturbance(&test);
    let r = setup.evaluate(params)?;
    let m = if r.stable {
        Some(disturbance_metrics(
            &r.trace,
            setup.scenario.v_ref,
            test.time,
            setup.scenario.settling_band,
        )?)
    } else {
        None
    };
    Ok((r, m))
}

fn disturb(args: DisturbArgs) -> CliResult<()> {
    let (mut cfg, out) = load(&args.common)?;
    if let Some(t) = args.time {
        cfg.disturbance_test.time = t;
    }
    if let Some(s) = args.step {
        cfg.disturbance_test.relative_step = s;
    }
    if let Some(h) = args.horizon {
        cfg.disturbance_test.horizon = h;
    }
    cfg.validate()?;
    let params = resolve_params(&args.params, &cfg)?;
    let (r, m) = run_disturbance(&cfg, &params)?;
    write_run(&out, &cfg, cfg.abc.rng_seed, &params, &r, m.as_ref())?;
    print_result("disturb", &r);
    if let Some(m) = m {
        println!(
            "max deviation {:.6} V, recovery {}",
            m.max_deviation,
            m.recovery_time
                .map_or("never".to_string(), |t| format!("{t:.6} s"))
        );
    }
    Ok(())
}

fn bode(args: BodeArgs) -> CliResult<()> {
    let (cfg, out) = load(&args.common)?;
    let target = match args.nu {
        Some(nu) => BodeTarget::Power(nu),
        None => BodeTarget::Controller(resolve_params(&args.params, &cfg)?),
    };
    let w_min = args.w_min.unwrap_or(cfg.ora.omega_l);
    let w_max = args.w_max.unwrap_or(cfg.ora.omega_h);
    if !(w_min > 0.0 && w_max > w_min) {
        return Err(Failure::Config("need 0 < --w-min < --w-max".into()));
    }
    let csv = artifacts::bode_csv(target, &cfg.ora, (w_min, w_max), args.points_per_decade)?;
    write(&out, "bode.csv", &csv)?;
    println!("wrote {}", out.join("bode.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct Comparison<'a> {
    config: &'a RunConfig,
    seed: u64,
    pid: &'a ComparisonReport,
    fopid: &'a ComparisonReport,
    switch_reduction_pct: f64,
}

fn compare(args: CompareArgs) -> CliResult<()> {
    let (cfg, out) = load(&args.common)?;
    let seed = args.seed.unwrap_or(cfg.abc.rng_seed);
    let mut reports = Vec::new();
    for (kind, fractional) in [("pid", false), ("fopid", true)] {
        let runs = tune_runs(&cfg, fractional, seed, args.runs)?;
        let dir = out.join(kind);
        let mut report = write_tuning(&dir, &cfg, kind, &runs)?.ok_or(Error::NoStableRun)?;
        let best = &runs[report.best_run - 1];
        let (r, m) = run_disturbance(&cfg, &best.outcome.params)?;
        let dist_dir = dir.join("disturbance");
        write_run(
            &dist_dir,
            &cfg,
            best.seed,
            &best.outcome.params,
            &r,
            m.as_ref(),
        )?;
        report.disturbance = m;
        write(&dir, "report.json", &report.to_json()?)?;
        reports.push(report);
    }
    let (pid, fopid) = (&reports[0], &reports[1]);
    let reduction = switch_reduction_pct(pid.best().switch_count, fopid.best().switch_count);
    let text = serde_json::to_string_pretty(&Comparison {
        config: &cfg,
        seed,
        pid,
        fopid,
        switch_reduction_pct: reduction,
    })
    .map_err(Error::from)?;
    write(&out, "compare.json", &text)?;
    println!(
        "best J_IAE: pid {:.6}, fopid {:.6}; switch reduction {reduction:.2} %",
        pid.best().j_iae,
        fopid.best().j_iae
    );
    Ok(())
}
