#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actdet::codec::{decode_pilots, decode_scene, encode_pilots, encode_scene};
use actdet::config::{parse_config, Preset, RunConfig};
use actdet::harness::{
    bench, bench_header, parse_schemes, run_trial_on, sweep_to_writer, ExperimentSpec, RhoPolicy,
    SweepParam, TrialData,
};
use actdet::rng::trial_seed;
use actdet::signal::{PilotSet, Scene};
use actdet::{selftest, Error};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "actdet", version, about = "Activity detection experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file (key = value, optional [sections]).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: desk or full.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// default | sweep | <k>x (multiple of the default) | <value>
    #[arg(long, global = true)]
    rho: Option<String>,
    /// Comma list of mle-direct, mle-virtual, bl-mle.
    #[arg(long, global = true)]
    schemes: Option<String>,
    /// Worker threads for trial parallelism.
    #[arg(long, global = true, env = "ACTDET_THREADS")]
    threads: Option<usize>,
    /// Sweep axis: P, L, M, N or noise_var.
    #[arg(long, global = true)]
    param: Option<String>,
    /// Comma list of sweep values.
    #[arg(long, global = true)]
    values: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    max_sweeps: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo error-rate sweep, one CSV row per (value, scheme).
    Sweep,
    /// Median wall-clock timing per sweep value.
    Bench {
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Run one trial and dump per-device scores.
    Trial {
        /// Sweep value to use; defaults to the first.
        #[arg(long)]
        value: Option<f64>,
        /// Trial index under the root seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Read pilots from a binary file instead of generating them.
        #[arg(long)]
        pilots: Option<PathBuf>,
        /// Read the scene from a binary file instead of generating it.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        save_pilots: Option<PathBuf>,
        #[arg(long)]
        save_scene: Option<PathBuf>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut rc = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => {
            let preset: Preset = common.preset.as_deref().unwrap_or("desk").parse()?;
            RunConfig {
                spec: preset.spec(),
                out: None,
                threads: None,
            }
        }
    };
    let spec = &mut rc.spec;
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if let Some(r) = &common.rho {
        spec.rho = r.parse::<RhoPolicy>()?;
    }
    if let Some(s) = &common.schemes {
        spec.schemes = parse_schemes(s)?;
    }
    if let Some(p) = &common.param {
        spec.param = p.parse::<SweepParam>()?;
    }
    if let Some(v) = &common.values {
        spec.values = v
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad sweep value '{t}'")))
            })
            .collect::<actdet::Result<_>>()?;
    }
    if let Some(t) = common.trials {
        spec.trials = t;
    }
    if let Some(m) = common.max_sweeps {
        spec.options.max_sweeps = m;
    }
    if let Some(t) = common.tol {
        if !(t >= 0.0) {
            bail!("tol must be nonnegative");
        }
        spec.options.tol = t;
    }
    if common.out.is_some() {
        rc.out = common.out.clone();
    }
    if common.threads.is_some() {
        rc.threads = common.threads;
    }
    spec.validate()?;
    Ok(rc)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_sweep(rc: &RunConfig) -> Result<()> {
    let mut out = output(rc.out.as_deref())?;
    sweep_to_writer(&rc.spec, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run_bench(rc: &RunConfig, reps: usize) -> Result<()> {
    let rows = bench(&rc.spec, reps)?;
    let mut out = output(rc.out.as_deref())?;
    writeln!(out, "{}", bench_header(&rc.spec.schemes))?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()?;
    Ok(())
}

struct TrialArgs {
    value: Option<f64>,
    index: u64,
    pilots: Option<PathBuf>,
    scene: Option<PathBuf>,
    save_pilots: Option<PathBuf>,
    save_scene: Option<PathBuf>,
}

fn run_single(rc: &RunConfig, a: TrialArgs) -> Result<()> {
    let spec: &ExperimentSpec = &rc.spec;
    let value = a.value.unwrap_or(spec.values[0]);
    let config = spec.param.apply(&spec.base, value)?;
    let seed = trial_seed(spec.seed, a.index);
    let pilots = match &a.pilots {
        Some(p) => decode_pilots(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("decoding {}", p.display()))?,
        None => PilotSet::generate(&config, seed)?,
    };
    let scene = match &a.scene {
        Some(p) => decode_scene(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("decoding {}", p.display()))?,
        None => Scene::generate(&config, seed)?,
    };
    if let Some(p) = &a.save_pilots {
        fs::write(p, encode_pilots(&pilots)).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.save_scene {
        fs::write(p, encode_scene(&scene)).with_context(|| format!("writing {}", p.display()))?;
    }
    let data = TrialData::from_parts(&config, pilots, scene, seed)?;
    let report = run_trial_on(
        &config,
        &spec.schemes,
        &data,
        seed,
        &spec.rho,
        &spec.options,
    )?;

    let mut out = output(rc.out.as_deref())?;
    for r in &report.results {
        let rho = r.rho.map_or_else(|| "-".to_string(), |x| x.to_string());
        writeln!(
            out,
            "# {} errors={} threshold={} sweeps={} rho={} seconds={}",
            r.scheme, r.errors, r.threshold, r.sweeps, rho, r.seconds
        )?;
    }
    write!(out, "device,active")?;
    for r in &report.results {
        write!(out, ",{0}_score,{0}_decision", r.scheme)?;
    }
    writeln!(out)?;
    for (n, truth) in report.truth.iter().enumerate() {
        write!(out, "{n},{}", *truth as u8)?;
        for r in &report.results {
            write!(out, ",{},{}", r.scores[n], r.decisions[n] as u8)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn run_selftest() -> Result<()> {
    let checks = selftest::run_all();
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        return run_selftest();
    }
    let rc = load(&cli.common)?;
    if let Some(t) = rc.threads {
        if t == 0 {
            bail!("threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Sweep => run_sweep(&rc),
        Command::Bench { reps } => run_bench(&rc, reps),
        Command::Trial {
            value,
            index,
            pilots,
            scene,
            save_pilots,
            save_scene,
        } => run_single(
            &rc,
            TrialArgs {
                value,
                index,
                pilots,
                scene,
                save_pilots,
                save_scene,
            },
        ),
        Command::Selftest => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("actdet: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("actdet: {e:#}");
            ExitCode::FAILURE
        }
    }
}
