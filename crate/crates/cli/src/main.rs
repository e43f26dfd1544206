use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use waitdim_core::harness::{self, suite, ExperimentConfig};
use waitdim_core::hitting::{batch_hitting_stream, profile_rows, HitMode, RadiusSchedule, PROFILE_CSV_HEADER};
use waitdim_core::orbit::{generate_orbit, orbit_stream, write_cache};
use waitdim_core::systems::Arithmetic;
use waitdim_core::Exec;

#[derive(Parser)]
#[command(name = "waitdim", version, about = "Waiting times, recurrence indicators and local dimensions")]
struct Cli {
    /// Run on one thread even when built with the parallel feature.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arith {
    FixedPoint,
    Double,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dynamical,
    Sequence,
}

#[derive(clap::Args)]
struct SystemArgs {
    /// rotation, doubling, logistic, cat_map, cantor_shift, constant or square.
    #[arg(long)]
    system: String,
    /// Rotation angle: golden, silver, power:<nu> or terms:<a1>,<a2>,...
    #[arg(long)]
    angle: Option<String>,
    #[arg(long, value_enum)]
    arithmetic: Option<Arith>,
    /// Start point, `x` or `x;y` on the torus.
    #[arg(long)]
    x: String,
    /// Orbit length.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an orbit and store it in the binary cache format.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Waiting times from one start to every target in a file.
    Hit {
        #[command(flatten)]
        sys: SystemArgs,
        /// One target per line; blank lines and lines starting with `#` are skipped.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        kmin: u32,
        #[arg(long)]
        kmax: u32,
        #[arg(long, value_enum, default_value = "dynamical")]
        mode: Mode,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slope and dimension estimates for a config.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full run of a config: CSV and JSON reports plus a manifest.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the acceptance criteria and print a pass/fail table.
    Suite {
        /// Only these criteria (1 to 9); the determinism check needs all.
        #[arg(long = "criterion")]
        criteria: Vec<u32>,
        /// Also print the serialized numbers behind each verdict.
        #[arg(long)]
        details: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn system(args: &SystemArgs) -> anyhow::Result<(waitdim_core::SystemSpec, waitdim_core::Point)> {
    let arith = args.arithmetic.map(|a| match a {
        Arith::FixedPoint => Arithmetic::FixedPoint,
        Arith::Double => Arithmetic::Double,
    });
    let sys = harness::parse_system(&args.system, args.angle.as_deref(), arith)?;
    let x = harness::parse_point(&sys, &args.x)?;
    sys.check_domain(&x)?;
    Ok((sys, x))
}

fn read_targets(sys: &waitdim_core::SystemSpec, path: &Path) -> anyhow::Result<Vec<waitdim_core::Point>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match harness::parse_point(sys, line) {
            Ok(p) => out.push(p),
            // a header row
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e).with_context(|| format!("{}:{}", path.display(), i + 1)),
        }
    }
    if out.is_empty() {
        bail!("{} lists no targets", path.display());
    }
    Ok(out)
}

fn exec(cli_sequential: bool) -> Exec {
    if cli_sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let ex = exec(cli.sequential);
    match cli.command {
        Command::Simulate { sys, out } => {
            let (spec, x) = system(&sys)?;
            let orb = generate_orbit(&spec, &x, sys.burn_in, sys.n)?;
            write_cache(&out, &orb)?;
            if orb.precision_loss {
                eprintln!("warning: double arithmetic ran past its safe length");
            }
            eprintln!("wrote {} points to {}", orb.len(), out.display());
        }
        Command::Hit {
            sys,
            targets,
            kmin,
            kmax,
            mode,
            out,
        } => {
            let (spec, x) = system(&sys)?;
            let sched = RadiusSchedule::new(kmin, kmax)?;
            let ys = read_targets(&spec, &targets)?;
            let mode = match mode {
                Mode::Dynamical => HitMode::Dynamical,
                Mode::Sequence => HitMode::Sequence,
            };
            let it = orbit_stream(&spec, &x, sys.burn_in)?;
            let profiles = batch_hitting_stream(it, sys.n, &x, &ys, &sched, mode);
            let mut body = String::from(PROFILE_CSV_HEADER);
            body.push('\n');
            for p in &profiles {
                for row in profile_rows(spec.name(), p) {
                    body.push_str(&row);
                    body.push('\n');
                }
            }
            match out {
                Some(path) => fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(body.as_bytes())?,
            }
        }
        Command::Estimate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let v = cfg.validate()?;
            let study = waitdim_core::estimators::inequality_study(&v.system, &cfg.params(&v, ex))?;
            fs::create_dir_all(&cfg.output)?;
            fs::write(cfg.output.join("slopes.csv"), harness::slopes_csv(&study))?;
            fs::write(cfg.output.join("inequality.json"), study.report.to_json())?;
            print!("{}", study.report.to_text());
        }
        Command::Report { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = harness::run_experiment(&cfg, &config.display().to_string(), ex)?;
            for (name, sum) in &manifest.files {
                println!("{:<18} {sum}", name);
            }
            println!("outputs in {}", cfg.output.display());
        }
        Command::Suite { criteria, details } => {
            if let Some(bad) = criteria.iter().find(|&&c| !(1..=9).contains(&c)) {
                eprintln!("error: no criterion {bad} (choose 1 to 9)");
                return Ok(ExitCode::from(2));
            }
            let results = if criteria.is_empty() {
                suite::full_suite()
            } else {
                criteria.iter().map(|&c| suite::criterion(c, ex)).collect()
            };
            let mut all = true;
            for r in &results {
                println!("{}", r.line());
                if details && !r.output.is_empty() {
                    println!("{}", r.output);
                }
                all &= r.passed;
            }
            if !all {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
