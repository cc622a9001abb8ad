//! `sburg`: runs the simulator and its verification suites from a config file.
//!
//! Exit status: 0 when every report passes, 1 when a report fails, 2 on
//! usage, config or regime errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use stochburgers::diagnostics::{
    default_tail_radii, dissipation_report, feller_suite, moment_report, run_default_ensemble, tail_report,
    EnsembleStats, Outcome, DEFAULT_SLACK,
};
use stochburgers::ergodic::{invariant_suite_on, kb_retention};
use stochburgers::heat::kernel_checks;
use stochburgers::integrator::{Retention, RunOptions};
use stochburgers::io::{
    parse_config, regime_warnings, require_invariant_regime, timeseries_csv, write_snapshot, RunDir, RunManifest,
};
use stochburgers::picard::picard_suite;
use stochburgers::{Grid, SimConfig};

#[derive(Parser)]
#[command(name = "sburg", version, about = "Damped stochastic Burgers simulator and verification suites")]
struct Cli {
    /// Root under which each run gets a directory named by its manifest key.
    #[arg(long, default_value = "runs", global = true)]
    out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble and write per-trajectory time series and snapshots.
    Simulate { config: PathBuf },
    /// Moment and dissipation bounds.
    Bounds { config: PathBuf },
    /// Uniform tail estimate.
    Tail {
        config: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Picard residuals and contraction factors on the local horizon.
    Picard {
        config: PathBuf,
        #[arg(long = "N")]
        radius: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        iters: usize,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
    /// Coupled-pair continuity probe along shrinking perturbations.
    Feller {
        config: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 64)]
        pairs: usize,
    },
    /// Time-averaged measures: Cesàro trend, invariance, tightness.
    Invariant {
        config: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Mass and squared L² norm of the heat kernel on the default grid.
    KernelCheck,
}

fn load(path: &Path) -> anyhow::Result<SimConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("parsing {}", path.display()))?;
    for w in regime_warnings(&cfg) {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn opt(name: &str, v: impl ToString) -> (String, String) {
    (name.to_string(), v.to_string())
}

struct Run {
    dir: RunDir,
    passed: bool,
    text: String,
}

impl Run {
    fn new(out: &Path, cfg: &SimConfig, command: &str, options: Vec<(String, String)>) -> anyhow::Result<Self> {
        let dir = RunDir::create(out, RunManifest::new(cfg, command, options))?;
        Ok(Self { dir, passed: true, text: String::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        Ok(self.dir.write(name, bytes.as_ref())?)
    }

    fn report(&mut self, text: &str, outcome: Outcome) {
        self.text.push_str(text);
        if outcome == Outcome::Fail {
            self.passed = false;
        }
    }

    fn finish(mut self) -> anyhow::Result<bool> {
        let text = std::mem::take(&mut self.text);
        self.write("report.txt", &text)?;
        let path = self.dir.commit()?;
        print!("{text}");
        println!("run directory: {}", path.display());
        Ok(self.passed)
    }
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn simulate(out: &Path, cfg_path: &Path) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    let mut run = Run::new(out, &cfg, "simulate", vec![])?;
    let stride = cfg.params().snapshot_stride;
    let retain = if cfg.params().retain_states {
        Retention::Window { from: 0.0, to: f64::INFINITY, every: stride }
    } else {
        Retention::None
    };
    let ens = run_default_ensemble(&cfg, RunOptions { retain, ..RunOptions::default() })?;
    for (i, tr) in ens.trajectories.iter().enumerate() {
        run.write(&format!("traj/{i:04}.csv"), timeseries_csv(&tr.rows))?;
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &tr.final_state, tr.final_time())?;
        run.write(&format!("traj/{i:04}_final.bin"), buf)?;
        for (t, f) in &tr.states {
            let mut buf = Vec::new();
            write_snapshot(&mut buf, f, *t)?;
            let step = (t / cfg.dt()).round() as u64;
            run.write(&format!("traj/{i:04}/{step:08}.bin"), buf)?;
        }
    }
    let stats = EnsembleStats::from_ensemble(&ens);
    let mut csv = String::from(
        "t,l2sq_mean,l2sq_stderr,lpp_mean,lpp_stderr,h1sq_mean,h1sq_stderr,tail_N1_mean,tail_N1_stderr,tail_N2_mean,tail_N2_stderr\n",
    );
    for (i, t) in stats.times.iter().enumerate() {
        let _ = write!(csv, "{t}");
        for s in [&stats.l2sq, &stats.lpp, &stats.h1sq, &stats.tail[0], &stats.tail[1]] {
            let _ = write!(csv, ",{:e},{:e}", s.mean[i], s.stderr[i]);
        }
        csv.push('\n');
    }
    run.write("ensemble.csv", csv)?;
    let text = format!(
        "# simulate members={} steps={} guard_hits={}\n",
        ens.members(),
        cfg.steps(),
        ens.guard_hits()
    );
    run.report(&text, Outcome::Pass);
    run.finish()
}

fn stats_for(cfg: &SimConfig) -> anyhow::Result<EnsembleStats> {
    let opts = RunOptions { tail_radii: default_tail_radii(cfg), ..RunOptions::default() };
    Ok(EnsembleStats::from_ensemble(&run_default_ensemble(cfg, opts)?))
}

fn bounds(out: &Path, cfg_path: &Path) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    let mut run = Run::new(out, &cfg, "bounds", vec![])?;
    let stats = stats_for(&cfg)?;
    let mut reports = moment_report(&stats, cfg.params().p, DEFAULT_SLACK)?;
    reports.extend(dissipation_report(&stats, DEFAULT_SLACK)?);
    for r in &reports {
        run.write(&format!("{}.csv", r.id), r.to_csv())?;
        run.report(&r.to_text(), r.outcome);
    }
    run.finish()
}

fn tail(out: &Path, cfg_path: &Path, eps: f64) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    let mut run = Run::new(out, &cfg, "tail", vec![opt("eps", eps)])?;
    let rep = tail_report(&stats_for(&cfg)?, eps)?;
    run.write("tail.csv", rep.to_csv())?;
    run.report(&rep.to_text(), rep.outcome);
    run.finish()
}

fn picard(out: &Path, cfg_path: &Path, radius: f64, lambda: f64, iters: usize, pairs: usize) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    let options = vec![opt("N", radius), opt("lambda", lambda), opt("iters", iters), opt("pairs", pairs)];
    let mut run = Run::new(out, &cfg, "picard", options)?;
    let suite = picard_suite(&cfg, radius, lambda, iters, pairs)?;
    let mut csv = String::from("pair,factor\n");
    for (i, f) in suite.factors.iter().enumerate() {
        let _ = writeln!(csv, "{i},{f:e}");
    }
    run.write("factors.csv", csv)?;
    run.report(&suite.to_text(), outcome(suite.passed()));
    run.finish()
}

fn feller(out: &Path, cfg_path: &Path, delta: f64, points: usize, pairs: usize) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    let options = vec![opt("delta", delta), opt("points", points), opt("pairs", pairs)];
    let mut run = Run::new(out, &cfg, "feller", options)?;
    let suite = feller_suite(&cfg, delta, points, pairs)?;
    let mut csv = String::from("separation,ratio,stderr\n");
    for p in &suite.points {
        let _ = writeln!(csv, "{:e},{:e},{:e}", p.separation, p.ratio, p.stderr);
    }
    run.write("feller.csv", csv)?;
    run.report(&suite.to_text(), outcome(suite.passed()));
    run.finish()
}

fn invariant(out: &Path, cfg_path: &Path, s: usize, eps: f64, delta: f64) -> anyhow::Result<bool> {
    let cfg = load(cfg_path)?;
    if let Err(e) = require_invariant_regime(&cfg) {
        bail!("refusing to run the invariant-measure suite: {e}");
    }
    if s == 0 || cfg.params().horizon < (2 * s + 1) as f64 {
        bail!("--s {s} needs T >= 2s + 1 = {}, config has T = {}", 2 * s + 1, cfg.params().horizon);
    }
    let options = vec![opt("s", s), opt("eps", eps), opt("delta", delta)];
    let mut run = Run::new(out, &cfg, "invariant", options)?;
    let opts = RunOptions { retain: kb_retention(&cfg, s), tail_radii: default_tail_radii(&cfg), ..RunOptions::default() };
    let ens = run_default_ensemble(&cfg, opts)?;
    let suite = invariant_suite_on(&ens, s, eps, delta, cfg.params().ensemble)?;
    run.write("mu_s.csv", suite.measure.to_csv())?;
    run.write("tightness.csv", suite.tightness.to_csv())?;
    let mut csv = String::from("s,distance\n");
    for (s, d) in &suite.cesaro {
        let _ = writeln!(csv, "{s},{d:e}");
    }
    run.write("cesaro.csv", csv)?;
    run.report(&suite.to_text(), outcome(suite.passed()));
    run.finish()
}

fn kernel_check() -> anyhow::Result<bool> {
    use std::f64::consts::PI;
    let grid = Grid::new(32.0, 2047)?;
    println!("{:>5} {:>18} {:>18} {:>18} {:>18} {:>10}", "t", "mass", "l2sq", "(2pi t)^-1/2", "(8pi t)^-1/2", "ratio");
    let mut ok = true;
    for t in [0.1, 1.0, 4.0] {
        let (mass, l2sq) = kernel_checks(grid, t)?;
        let wide = (2.0 * PI * t).powf(-0.5);
        let exact = (8.0 * PI * t).powf(-0.5);
        ok &= (mass - 1.0).abs() < 1e-6 && (l2sq / exact - 1.0).abs() < 1e-4;
        println!("{t:>5} {mass:>18.12} {l2sq:>18.12} {wide:>18.12} {exact:>18.12} {:>10.6}", l2sq / wide);
    }
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate { config } => simulate(out, &config),
        Command::Bounds { config } => bounds(out, &config),
        Command::Tail { config, eps } => tail(out, &config, eps),
        Command::Picard { config, radius, lambda, iters, pairs } => picard(out, &config, radius, lambda, iters, pairs),
        Command::Feller { config, delta, points, pairs } => feller(out, &config, delta, points, pairs),
        Command::Invariant { config, s, eps, delta } => invariant(out, &config, s, eps, delta),
        Command::KernelCheck => kernel_check(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
