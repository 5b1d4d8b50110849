//! `cva`: correlation sweeps and sensitivity runs written as CSV.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cva_core::config::{parse_config, parse_config_from, RunConfig, KEYS};
use cva_core::sweep::run;
use cva_core::CvaError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cva", version, about = "CVA of a vulnerable call: expansion formulas against Monte Carlo")]
struct Args {
    /// key=value config file; flags override its values
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["sabr", "hw", "heston"])]
    model: Option<String>,
    #[arg(long, value_parser = ["vasicek", "cir"])]
    intensity: Option<String>,
    /// intensity set: name (cir-3 or 3) or inline lambda0,q,mu,sigma
    #[arg(long)]
    set: Option<String>,
    /// maturity in years
    #[arg(long = "T")]
    maturity: Option<String>,
    /// strike level with spot 1
    #[arg(long)]
    strike: Option<String>,
    /// a:b:step or comma list
    #[arg(long = "rho-grid", allow_hyphen_values = true)]
    rho_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<String>,
    /// comma list of mc, first, second
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// trapezoid step of the formula time integrals
    #[arg(long = "dt-quad")]
    dt_quad: Option<String>,
    /// CSV output path (default stdout)
    #[arg(long)]
    out: Option<String>,
    /// any config key, repeatable: -D mc.steps=1000
    #[arg(long = "define", short = 'D', value_name = "KEY=VALUE")]
    define: Vec<String>,
    /// print the resolved config in normal form and exit
    #[arg(long)]
    print_config: bool,
    /// list the accepted config keys and exit
    #[arg(long)]
    list_keys: bool,
}

impl Args {
    fn overrides(&self) -> Result<Vec<(String, String)>, CvaError> {
        let flags = [
            ("model.kind", &self.model),
            ("intensity.kind", &self.intensity),
            ("intensity.set", &self.set),
            ("option.maturity", &self.maturity),
            ("option.strike", &self.strike),
            ("sweep.rho_grid", &self.rho_grid),
            ("sweep.nu", &self.nu),
            ("sweep.methods", &self.methods),
            ("mc.paths", &self.paths),
            ("mc.steps", &self.steps),
            ("mc.seed", &self.seed),
            ("quad.dt", &self.dt_quad),
            ("output.path", &self.out),
        ];
        let mut out = Vec::new();
        for d in &self.define {
            let (k, v) = d
                .split_once('=')
                .ok_or_else(|| CvaError::Config(format!("--define expects KEY=VALUE, got `{d}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        out.extend(flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        Ok(out)
    }
}

fn load(args: &Args) -> Result<RunConfig, CvaError> {
    let overrides = args.overrides()?;
    match &args.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CvaError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config_from(Some(&text), &p.display().to_string(), &overrides)
        }
        None => parse_config(None, &overrides),
    }
}

fn execute(args: &Args) -> Result<(), CvaError> {
    let cfg = load(args)?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    if args.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let output = run(&cfg)?;
    let csv = output.to_csv_string();
    match &cfg.output {
        Some(path) => fs::write(path, csv).map_err(|e| CvaError::Config(format!("cannot write {path}: {e}")))?,
        None => io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CvaError::Config(format!("cannot write to stdout: {e}")))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if args.list_keys {
        for (k, help) in KEYS {
            println!("{k:<22} {help}");
        }
        return ExitCode::SUCCESS;
    }
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_CONFIG } else { EXIT_NUMERICAL })
        }
    }
}
