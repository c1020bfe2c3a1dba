use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use coordpath::config::{params_fragment, ConfigFile};
use coordpath::sim::{escape_demo, run_scenario, write_metrics, CsvTrace, Metrics};
use coordpath::verify::{run_suites, Suite, VerifyContext};
use coordpath::{design_coordination_set, CoordParams, Exec};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Hybrid coordinated path following for speed-constrained fixed-wing UAVs.
///
/// Every flag can also be set through an environment variable with the
/// `COORDPATH_` prefix, e.g. `COORDPATH_THREADS=4`.
#[derive(Debug, Parser)]
#[command(name = "coordpath", version)]
struct Cli {
    /// Worker threads for data-parallel loops; 1 runs sequentially.
    #[arg(long, global = true, env = "COORDPATH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, env = "COORDPATH_CONFIG")]
    config: PathBuf,

    /// Output directory; overrides `[output].dir`.
    #[arg(long, env = "COORDPATH_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design the coordination set from `[limits]` and `[design]`.
    DesignParams {
        #[command(flatten)]
        common: Common,
        /// Speed margin between the slowest and fastest assigned speeds (m/s).
        #[arg(long, env = "COORDPATH_C")]
        c: Option<f64>,
        /// Turn-rate margin of the boundary conditions (rad/s).
        #[arg(long, env = "COORDPATH_ALPHA")]
        alpha: Option<f64>,
    },
    /// Run the scenario and write trace.csv, events.csv, series.csv and metrics.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Integration step (s).
        #[arg(long, env = "COORDPATH_DT")]
        dt: Option<f64>,
        /// Simulated time (s).
        #[arg(long, env = "COORDPATH_DURATION")]
        duration: Option<f64>,
    },
    /// Run the randomized property suites.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only this suite; may be repeated.
        #[arg(long, env = "COORDPATH_SUITE", value_delimiter = ',')]
        suite: Vec<Suite>,
        #[arg(long, env = "COORDPATH_SEED")]
        seed: Option<u64>,
        /// Integration step of the closed-loop suites (s).
        #[arg(long, env = "COORDPATH_DT")]
        dt: Option<f64>,
        /// Closed-loop runs per suite.
        #[arg(long, env = "COORDPATH_RUNS")]
        runs: Option<usize>,
        /// Samples for the pointwise suites.
        #[arg(long, env = "COORDPATH_SAMPLES")]
        samples: Option<usize>,
    },
    /// Show that every admissible constant command leaves the escape set.
    DemoEscape {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<coordpath::Error>() {
        Some(err) if err.is_validation() => EXIT_VALIDATION,
        Some(_) => EXIT_RUNTIME,
        None if e.is::<Validation>() => EXIT_VALIDATION,
        None => EXIT_RUNTIME,
    }
}

/// Bad command-line input that the library never sees.
#[derive(Debug)]
struct Validation(String);

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let exec = executor(cli.threads)?;
    match cli.command {
        Command::DesignParams { common, c, alpha } => design(&common, c, alpha, exec),
        Command::Simulate { common, dt, duration } => simulate(&common, dt, duration, exec),
        Command::Verify {
            common,
            suite,
            seed,
            dt,
            runs,
            samples,
        } => verify(&common, &suite, seed, dt, runs, samples, exec),
        Command::DemoEscape { common } => demo_escape(&common, exec),
    }
}

#[cfg(feature = "parallel")]
fn executor(threads: Option<usize>) -> anyhow::Result<Exec> {
    match threads {
        None => Ok(Exec::Parallel),
        Some(0) => Err(Validation("--threads must be at least 1".into()).into()),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("building the thread pool")?;
            Ok(Exec::from_threads(n))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn executor(threads: Option<usize>) -> anyhow::Result<Exec> {
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the `parallel` feature; running sequentially");
    }
    Ok(Exec::Sequential)
}

fn read_config(common: &Common) -> anyhow::Result<ConfigFile> {
    Ok(ConfigFile::read(&common.config)?)
}

fn out_dir(common: &Common, cfg: &ConfigFile) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_params(p: &CoordParams) {
    println!("a      = {:.6} rad", p.a);
    println!("R1     = {:.4} m", p.r1);
    println!("v_m    = {:.4} m/s", p.v_m);
    println!("a*R1   = {:.4}", p.a * p.r1);
    println!("R2     = {:.4} m", p.r2);
    println!("k2     = {:.4}", p.k2);
    println!();
    println!("{:<40} {:>14} {:>14} {:>14}", "constraint", "lhs", "rhs", "slack");
    for c in &p.constraint_report().constraints {
        println!("{:<40} {:>14.6} {:>14.6} {:>14.6}", c.name, c.lhs, c.rhs, c.slack());
    }
}

fn design(common: &Common, c: Option<f64>, alpha: Option<f64>, exec: Exec) -> anyhow::Result<ExitCode> {
    let cfg = read_config(common)?;
    let section = cfg.design.unwrap_or_default();
    let c = c.unwrap_or(section.c);
    let alpha = alpha.unwrap_or(section.alpha);
    let l = cfg.simulation.as_ref().map_or(0.0, |s| s.l);
    let t0 = Instant::now();
    let p = design_coordination_set(&cfg.limits, c, alpha, l, exec)?;
    let elapsed = t0.elapsed();
    println!("design with c = {c}, alpha = {alpha} ({:.3} s)", elapsed.as_secs_f64());
    print_params(&p);
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("params.toml");
    std::fs::write(&path, params_fragment(&p)?).with_context(|| format!("writing {}", path.display()))?;
    println!("\nwrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn print_metrics(m: &Metrics) {
    match m.all_in_s1_time {
        Some(t) => println!("all UAVs in S1 at t = {t:.2} s"),
        None => println!("not all UAVs reached S1"),
    }
    println!(
        "overtaking events: {} before, {} after",
        m.events_before_all_in_s1, m.events_after_all_in_s1
    );
    println!("{:>4} {:>12} {:>12} {:>12} {:>8}", "uav", "rho", "psi", "zeta-L", "resets");
    for u in &m.uavs {
        let dz = u.final_zeta_error.map_or_else(|| "-".to_string(), |z| format!("{z:.3e}"));
        println!(
            "{:>4} {:>12.3e} {:>12.3e} {:>12} {:>8}",
            u.id, u.final_rho, u.final_psi, dz, u.reset_count
        );
    }
}

fn simulate(common: &Common, dt: Option<f64>, duration: Option<f64>, exec: Exec) -> anyhow::Result<ExitCode> {
    let mut cfg = read_config(common)?;
    if let Some(sim) = cfg.simulation.as_mut() {
        if let Some(dt) = dt {
            sim.dt = dt;
        }
        if let Some(d) = duration {
            sim.duration = d;
        }
    }
    let loaded = cfg.load(exec, true)?;
    let dir = out_dir(common, &cfg);
    let every = loaded.output.trace_every;
    let mut sink = CsvTrace::create(&dir, every, Some(loaded.output.series_every.unwrap_or(every)))?;
    std::fs::write(dir.join("params.toml"), params_fragment(&loaded.scenario.params)?)?;
    let t0 = Instant::now();
    let metrics = run_scenario(&loaded.scenario, exec, &mut sink)?;
    write_metrics(&dir.join("metrics.json"), &metrics)?;
    println!(
        "simulated {} s in {} steps ({:.2} s wall)",
        metrics.duration,
        metrics.steps,
        t0.elapsed().as_secs_f64()
    );
    print_metrics(&metrics);
    println!("outputs in {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(
    common: &Common,
    suites: &[Suite],
    seed: Option<u64>,
    dt: Option<f64>,
    runs: Option<usize>,
    samples: Option<usize>,
    exec: Exec,
) -> anyhow::Result<ExitCode> {
    let cfg = read_config(common)?;
    let loaded = cfg.load(exec, false)?;
    let path = loaded
        .scenario
        .paths
        .first()
        .ok_or_else(|| Validation("verify needs at least one [[paths]] entry".into()))?;
    let mut options = loaded.verify;
    if let Some(s) = seed {
        options.seed = s;
    }
    if let Some(dt) = dt {
        options.dt = dt;
    }
    if let Some(r) = runs {
        options.runs = r;
    }
    if let Some(s) = samples {
        options.samples = s;
    }
    if !(options.dt > 0.0) {
        return Err(Validation(format!("dt must be positive, got {}", options.dt)).into());
    }
    let ctx = VerifyContext {
        params: &loaded.scenario.params,
        chi: &loaded.scenario.chi,
        path,
        options,
    };
    let selected = if suites.is_empty() { &Suite::ALL[..] } else { suites };
    let reports = run_suites(selected, &ctx);
    let mut all = true;
    for r in &reports {
        all &= r.passed;
        println!(
            "{:<14} {}  {} cases, {} failures  ({})",
            r.suite,
            if r.passed { "PASS" } else { "FAIL" },
            r.cases,
            r.failures,
            r.summary
        );
        if let Some(ce) = &r.counterexample {
            println!("    first counterexample: {ce}");
        }
    }
    if let Some(dir) = &common.out {
        write_json(dir, "verify.json", &reports)?;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY) })
}

fn demo_escape(common: &Common, exec: Exec) -> anyhow::Result<ExitCode> {
    let cfg = read_config(common)?;
    let (params, _) = cfg.params(exec)?;
    let ecfg = cfg.escape_config(&params);
    if !(ecfg.kappa <= 0.0 && ecfg.kappa > -params.limits.kappa0) {
        return Err(Validation(format!(
            "escape demo needs a curvature in (-kappa0, 0], got {}",
            ecfg.kappa
        ))
        .into());
    }
    let t0 = Instant::now();
    let report = escape_demo(&params, &ecfg, exec);
    println!(
        "{} states x {} controls = {} pairs; {} exit |rho| > R0 ({:.4}%), slowest after {:.2} s ({:.2} s wall)",
        report.states,
        report.controls,
        report.pairs,
        report.exited,
        100.0 * report.exit_fraction,
        report.max_exit_time,
        t0.elapsed().as_secs_f64()
    );
    if let Some((rho, psi, v, w)) = report.first_survivor {
        println!("first survivor: rho = {rho}, psi = {psi}, v = {v}, omega = {w}");
    }
    if let Some(dir) = &common.out {
        write_json(dir, "escape.json", &report)?;
    }
    Ok(if report.states > 0 && report.exit_fraction == 1.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    })
}
