//! The `psid` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::harness::{
    reproduce_figures, reproduce_table1, run_scenario, RunOptions, Scenario, ScenarioConfig,
};
use crate::io;
use crate::simulator::{simulate_forward, ConstantInput};

#[derive(Debug, Parser)]
#[command(name = "psid", version, about = "Identify abnormal spatio-temporal sources in a 1-D parabolic system")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output directory for CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time step override.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Spatial node count override (odd).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Use the gains stored in this design file instead of solving.
    #[arg(long, global = true)]
    pin_gains: Option<PathBuf>,
    /// Multi-start seed for the gain design.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward-simulate the PDE and write x.csv and y.csv.
    Simulate { config: PathBuf },
    /// Solve or verify the observer gains and print the certificate.
    Design { config: PathBuf },
    /// Run the whole identification pipeline.
    Identify { config: PathBuf },
    /// Rerun the reference experiments.
    Reproduce { which: Experiment },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Figures,
    Table1,
}

impl GlobalArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            dt: self.dt,
            nodes: self.nodes,
            pin_gains: self.pin_gains.clone(),
            seed: self.seed,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 for usage or validation errors, 2 for
/// numerical failures and failed certificates.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_scenario(path: &Path, opts: &RunOptions) -> Result<Scenario> {
    let cfg = ScenarioConfig::load(path)?;
    let mut sc = Scenario::from_config(&cfg)?;
    opts.apply(&mut sc)?;
    sc.validate()?;
    Ok(sc)
}

fn out_dir(sc: &Scenario) -> PathBuf {
    sc.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&sc.name))
}

fn run(cli: Cli) -> Result<i32> {
    let opts = cli.global.options();
    match cli.command {
        Command::Simulate { config } => {
            let sc = load_scenario(&config, &opts)?;
            let res = simulate_forward(&sc.system, &sc.source, &ConstantInput(sc.input.clone()), &sc.sim)?;
            let dir = out_dir(&sc);
            res.write_csv(&dir, sc.field_stride)?;
            println!(
                "simulated {} steps on {} nodes ({}), wrote {}",
                res.scheme.n_steps,
                res.scheme.n_nodes,
                res.scheme.name,
                dir.display()
            );
            Ok(0)
        }
        Command::Design { config } => {
            let sc = load_scenario(&config, &opts)?;
            let (_, red) = sc.reduce()?;
            let (sol, report) = sc.resolve_gains(&red)?;
            println!("{report}");
            if let Some(dir) = &opts.out {
                std::fs::create_dir_all(dir)?;
                sol.save(&dir.join("gains.toml"))?;
            }
            Ok(if report.passed() { 0 } else { 2 })
        }
        Command::Identify { config } => {
            let mut sc = load_scenario(&config, &opts)?;
            sc.out_dir = Some(out_dir(&sc));
            let o = run_scenario(&sc)?;
            let r = &o.report;
            println!("rmse = {}", io::fmt(r.rmse));
            if let Some(i) = r.ideal_rmse {
                println!("ideal_rmse = {}", io::fmt(i));
            }
            println!("lambda_max(Xi) = {:.6e}", r.lambda_max_xi);
            if let Some(b) = r.bound {
                println!("rho = {}", io::fmt(b.rho));
            }
            println!("certified = {}", r.certified);
            println!("wrote {}", sc.out_dir.as_deref().unwrap_or(Path::new(".")).display());
            Ok(0)
        }
        Command::Reproduce { which } => {
            let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            match which {
                Experiment::Figures => {
                    for r in reproduce_figures(&out, &opts)? {
                        println!(
                            "{}: rmse = {:.4} (reference {:.4})",
                            r.name, r.report.rmse, r.reference_rmse
                        );
                    }
                }
                Experiment::Table1 => {
                    if opts.pin_gains.is_some() {
                        return Err(Error::Config("table1 solves its own gains; --pin-gains does not apply".into()));
                    }
                    println!("{:>2} {:>4} {:>6} {:>8} {:>8}  status", "m", "n_y", "gamma", "rmse", "ideal");
                    for r in reproduce_table1(&out, &opts)? {
                        let rmse = r.rmse.map_or("NA".to_string(), |v| format!("{v:.4}"));
                        println!(
                            "{:>2} {:>4} {:>6} {:>8} {:>8.4}  {}",
                            r.m, r.n_y, r.gamma, rmse, r.ideal_rmse, r.status
                        );
                    }
                }
            }
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}
