use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmwave_uplink::scenario::{preset, preset_names, EngineSet, Scenario, SweepSection, Variable};
use mmwave_uplink_cli::{compare, run_sweep, write_csv, Failure, Options, Outcome, Row};

#[derive(Parser)]
#[command(name = "mmwave-uplink", version, about = "Uplink outage of mmWave cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic outage at the scenario's base point, one row per tier.
    Analytic(Common),
    /// Simulated outage at the scenario's base point, one row per tier.
    Simulate(Common),
    /// Runs the scenario's [sweep] for every series.
    Sweep(Common),
    /// Runs an embedded figure preset (fig1..fig9).
    Figure {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Checks analytic against simulated outage on the sweep grid.
    Validate {
        /// Embedded preset to validate instead of --scenario.
        name: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Allowed absolute gap on top of the MC half-width.
        #[arg(long, default_value_t = 0.03)]
        tolerance: f64,
    },
    /// Prints an embedded preset's scenario file.
    Preset { name: Option<String> },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// CSV destination; `-` is stdout.
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Fill the seconds column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Analytic,
    Simulate,
    Dense,
    All,
}

impl Common {
    fn options(&self, forced: Option<&str>) -> Outcome<Options> {
        let name = forced.or(self.engine.map(|e| match e {
            EngineArg::Analytic => "analytic",
            EngineArg::Simulate => "simulate",
            EngineArg::Dense => "dense",
            EngineArg::All => "all",
        }));
        let engines = name
            .map(|n| n.parse::<EngineSet>())
            .transpose()
            .map_err(|e| Failure::Config(e.to_string()))?;
        Ok(Options {
            engines,
            trials: self.trials,
            seed: self.seed,
            timing: self.timing,
        })
    }

    fn load(&self) -> Outcome<Scenario> {
        let path = self
            .scenario
            .as_ref()
            .ok_or_else(|| Failure::Config("--scenario is required".into()))?;
        Scenario::from_file(path).map_err(|e| Failure::Config(e.to_string()))
    }
}

fn unknown_preset(name: &str) -> Failure {
    let known: Vec<_> = preset_names().collect();
    Failure::Config(format!("unknown figure '{name}', expected one of {}", known.join(", ")))
}

fn load_preset(name: &str) -> Outcome<Scenario> {
    preset(name).map_err(|_| unknown_preset(name))
}

fn emit(rows: &[Row], out: &str) -> anyhow::Result<()> {
    if out == "-" {
        let stdout = io::stdout();
        write_csv(rows, stdout.lock())?;
    } else {
        let file = File::create(Path::new(out))?;
        write_csv(rows, io::BufWriter::new(file))?;
    }
    Ok(())
}

// A one-point sweep at the base cutoffs, so `analytic` and `simulate`
// share the sweep code path.
fn base_point(mut s: Scenario) -> Scenario {
    let theta = s.sweep.as_ref().and_then(|w| w.theta_db);
    s.sweep = Some(SweepSection {
        variable: Some(Variable::ThetaDb),
        values: Some(vec![theta.unwrap_or(mmwave_uplink::scenario::DEFAULT_THETA_DB)]),
        ..SweepSection::default()
    });
    s.series.clear();
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analytic(c) => {
            let rows = run_sweep(&base_point(c.load()?), &c.options(Some("analytic"))?)?;
            emit(&rows, &c.out)
        }
        Command::Simulate(c) => {
            let rows = run_sweep(&base_point(c.load()?), &c.options(Some("simulate"))?)?;
            emit(&rows, &c.out)
        }
        Command::Sweep(c) => {
            let rows = run_sweep(&c.load()?, &c.options(None)?)?;
            emit(&rows, &c.out)
        }
        Command::Figure { name, common } => {
            let rows = run_sweep(&load_preset(&name)?, &common.options(None)?)?;
            emit(&rows, &common.out)
        }
        Command::Validate { name, common, tolerance } => {
            if !(tolerance >= 0.0) {
                return Err(Failure::Config("--tolerance must be >= 0".into()).into());
            }
            let scenario = match (&name, &common.scenario) {
                (Some(n), None) => load_preset(n)?,
                (None, Some(_)) => common.load()?,
                _ => return Err(Failure::Config("give either a preset name or --scenario".into()).into()),
            };
            let rows = run_sweep(&scenario, &common.options(Some("analytic,simulate"))?)?;
            if common.out != "-" {
                emit(&rows, &common.out)?;
            }
            let report = compare(&rows, tolerance);
            println!("compared {} points, tolerance {tolerance}", report.compared);
            if let Some(w) = &report.worst {
                println!(
                    "worst: series '{}' variable {} tier {} {}: analytic {:.6} simulated {:.6} \
                     half-width {:.6} gap {:.6}",
                    w.series,
                    w.variable,
                    w.tier,
                    w.quantity,
                    w.analytic,
                    w.simulated,
                    w.half_width,
                    (w.analytic - w.simulated).abs()
                );
            }
            if report.passed() {
                println!("PASS");
                Ok(())
            } else {
                println!("FAIL");
                Err(Failure::Validation("gap exceeds tolerance + half-width".into()).into())
            }
        }
        Command::Preset { name } => {
            match name {
                None => preset_names().for_each(|n| println!("{n}")),
                Some(n) => {
                    let src = mmwave_uplink::scenario::preset_source(&n).ok_or_else(|| unknown_preset(&n))?;
                    io::stdout().write_all(src.as_bytes())?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.downcast_ref::<Failure>().map_or(2, Failure::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
