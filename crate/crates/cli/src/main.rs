use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use enpp_core::suite::decay_checks;
use enpp_core::{cmd_coercivity, cmd_verify, parse_config, run_decay_experiment, Config};

/// Overrides the output directory when `--out` is not given.
const OUT_ENV: &str = "ENPP_OUT_DIR";

#[derive(Parser)]
#[command(name = "enpp", version, about = "Self-similar blow-up laboratory for the axisymmetric Euler–Nernst–Planck–Poisson system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity and convergence suite.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample pairing ratios of the charge operator on random fields.
    Coercivity {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the perturbation flow and write the time series.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<Config> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    Ok(parse_config(&text)?)
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn echo_config(cfg: &Config) {
    for line in cfg.to_string().lines() {
        println!("# {line}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { config, out } => {
            let cfg = load(config.as_deref())?;
            let dir = out_dir(out)?;
            echo_config(&cfg);
            let result = cmd_verify(&cfg)?;
            print!("{}", result.table());
            write(&dir, "verify.csv", &result.csv())?;
            write(&dir, "config.txt", &cfg.to_string())?;
            Ok(result.passed())
        }
        Command::Coercivity { config, samples, out } => {
            let cfg = load(config.as_deref())?;
            let dir = out_dir(out)?;
            echo_config(&cfg);
            let report = cmd_coercivity(&cfg, samples)?;
            println!("samples {}", report.samples.len());
            println!("k0 min {:.6} median {:.6}", report.min_k0(), report.median_k0());
            println!("k1 min {:.6} median {:.6}", report.min_k1(), report.median_k1());
            let rows = report.rows();
            print!("{}", rows.table());
            let mut csv = String::from("sample,k0,k1\n");
            for (i, s) in report.samples.iter().enumerate() {
                csv.push_str(&format!("{i},{:.16e},{:.16e}\n", s.k0, s.k1));
            }
            write(&dir, "coercivity.csv", &csv)?;
            write(&dir, "coercivity_summary.csv", &rows.csv())?;
            write(&dir, "config.txt", &cfg.to_string())?;
            Ok(rows.passed())
        }
        Command::Simulate { config, out } => {
            let cfg = load(Some(&config))?;
            let dir = out_dir(out)?;
            echo_config(&cfg);
            let report = run_decay_experiment(&cfg)?;
            write(&dir, "series.csv", &report.csv())?;
            write(&dir, "config.txt", &cfg.to_string())?;
            println!("status {:?}", report.status);
            if let Some(fit) = report.fit {
                println!("kappa {:.6} fit_residual {:.4} c_meas {:.4} C_meas {:.4}", fit.kappa, fit.residual, fit.c_meas, fit.big_c_meas);
            }
            let checks = decay_checks(&report, cfg.s_max);
            print!("{}", checks.table());
            write(&dir, "checks.csv", &checks.csv())?;
            Ok(checks.passed())
        }
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
