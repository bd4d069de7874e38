use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gevrey_lab::closed_form::{cellular_singularity_radius, cellular_y22_field, g_coefficients_field};
use gevrey_lab::experiments::{run, Experiment, ExperimentConfig, RunManifest};
use gevrey_lab::gevrey::{build_ladder, estimate_radius, gevrey_norm, LadderMode, Verdict};

#[derive(Parser)]
#[command(name = "gevrey-lab", version, about = "Analyticity-radius experiments for incompressible Euler flows")]
struct Cli {
    /// Run on a single thread.
    #[arg(long, global = true)]
    serial: bool,
    /// Output directory (default: results/<experiment>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file.
    Run { config: PathBuf },
    /// Pseudo-spectral solver coupled with the flow map (criteria 7, 8).
    Simulate(Overrides),
    /// Closed-form cellular flow: axis labels and Y22 radius (criteria 1, 2).
    Cellular(Overrides),
    /// Shear flow radius decay and the g-profile Gevrey ladder (criteria 3, 4).
    Shear(Overrides),
    /// Strip datum under rotation (criterion 9).
    Strip(Overrides),
    /// Periodized counterexample profile (criterion 5).
    Phi(Overrides),
    /// Majorant persistence times and inequality checks (criterion 6).
    Majorant(Overrides),
    /// Gevrey verdict for the g profile at one (s, delta).
    Gevrey {
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 60)]
        n_max: usize,
    },
    /// Fitted versus exact radius of the cellular Y22 at time t.
    Radius {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 512)]
        n: usize,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Comma-separated data sizes M (majorant).
    #[arg(long, value_delimiter = ',')]
    m_values: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
}

impl Overrides {
    fn config(self, e: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(e);
        c.n = self.n;
        c.dt = self.dt;
        c.t_final = self.t_final;
        c.times = self.times;
        c.m_values = self.m_values;
        c.trials = self.trials;
        c.n_max = self.n_max;
        c.k_max = self.k_max;
        c
    }
}

fn report(m: &RunManifest) -> ExitCode {
    for c in &m.checks {
        println!(
            "  [{}] {}: {:e} {} {:e} {}",
            c.criterion,
            c.name,
            c.measured,
            c.relation,
            c.tolerance,
            if c.passed {
                "ok"
            } else if c.known_unattainable.is_some() {
                "FAILED (known unattainable)"
            } else {
                "FAILED"
            }
        );
    }
    for v in &m.criteria {
        println!("criterion {}: {}", v.criterion, if v.passed { "PASS" } else { "FAIL" });
    }
    println!("outputs in {}", m.config.out.as_ref().map_or("results".into(), |p| p.display().to_string()));
    if m.passed() {
        ExitCode::SUCCESS
    } else if m.passed_except_unattainable() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run_config(mut c: ExperimentConfig, cli: &Cli) -> Result<ExitCode> {
    c.serial |= cli.serial;
    if let Some(o) = &cli.out {
        c.out = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    let kind = c.kind()?;
    if c.out.is_none() {
        c.out = Some(gevrey_lab::experiments::default_out_dir(kind));
    }
    let m = run(&c).with_context(|| format!("experiment {} failed", kind.name()))?;
    Ok(report(&m))
}

fn main() -> Result<ExitCode> {
    let mut cli = Cli::parse();
    let command = std::mem::replace(&mut cli.command, Command::Radius { t: 1.0, n: 512 });
    match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            run_config(ExperimentConfig::from_json(&text)?, &cli)
        }
        Command::Simulate(o) => run_config(o.config(Experiment::LagrangianPersistence), &cli),
        Command::Cellular(o) => run_config(o.config(Experiment::CellularSingularity), &cli),
        Command::Shear(o) => run_config(o.config(Experiment::EulerianDecay), &cli),
        Command::Strip(o) => run_config(o.config(Experiment::StripRotation), &cli),
        Command::Phi(o) => run_config(o.config(Experiment::PhiConstruction), &cli),
        Command::Majorant(o) => run_config(o.config(Experiment::MajorantTable), &cli),
        Command::Gevrey { s, delta, n_max } => {
            let n = (4 * (n_max + 8)).next_power_of_two().max(256);
            let ladder = build_ladder(&g_coefficients_field(n)?, LadderMode::Axis(0), 2.0, n_max)?;
            let est = gevrey_norm(&ladder, s, delta)?;
            let verdict = match est.verdict {
                Verdict::Convergent { value } => format!("convergent, sum ~ {value:e}"),
                Verdict::Divergent => "divergent".into(),
                Verdict::Inconclusive => "inconclusive".into(),
            };
            println!("g profile, s = {s}, delta = {delta}, orders <= {n_max}: {verdict} (tail ratio {:.4})", est.tail_ratio);
            Ok(ExitCode::SUCCESS)
        }
        Command::Radius { t, n } => {
            let r = estimate_radius(&cellular_y22_field(t, n)?, None)?;
            let exact = cellular_singularity_radius(t)?;
            println!(
                "t = {t}: fitted {:.6}, exact {:.6}, relative error {:.2e}{}",
                r.delta_hat,
                exact,
                r.delta_hat / exact - 1.0,
                if r.reliable { "" } else { " (fit unreliable)" }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
