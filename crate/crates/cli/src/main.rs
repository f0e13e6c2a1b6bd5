use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kwe_cli::{error_json, parse_grid, parse_pair, run, to_json, Command, Kind, RunConfig};
use kwe_core::datum::GeometricGrid;

/// Numerical experiments on the isotropic four-wave kinetic equation.
#[derive(Debug, Parser)]
#[command(name = "kwe", version)]
struct Cli {
    command: Command,
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long = "M", global = true)]
    m: Option<f64>,
    #[arg(long = "A", global = true)]
    a: Option<f64>,
    #[arg(long = "N", global = true)]
    n: Option<f64>,
    /// `min:max:points_per_decade`
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<GeometricGrid>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    omega_max: Option<f64>,
    /// `lo:hi`
    #[arg(long, global = true, value_parser = parse_pair)]
    fit_window: Option<(f64, f64)>,
    #[arg(long, global = true)]
    kind: Option<Kind>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    battery: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Cli {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        cfg.command = self.command;
        if let Some(b) = self.beta {
            cfg.kernel.beta = b;
        }
        if let Some(m) = self.m {
            cfg.kernel.m = m;
        }
        if let Some(a) = self.a {
            cfg.oscillation.a = a;
        }
        if let Some(n) = self.n {
            cfg.oscillation.n = n;
        }
        if let Some(g) = &self.grid {
            cfg.grid = Some(g.clone());
        }
        if let Some(t) = self.tol {
            cfg.quad.rel_tol = t;
        }
        if let Some(w) = self.omega_max {
            cfg.quad.omega_max = Some(w);
        }
        if let Some(w) = self.fit_window {
            cfg.fit_window = w;
        }
        if let Some(k) = self.kind {
            cfg.kind = k;
        }
        if let Some(i) = self.iterations {
            cfg.iterations = i;
        }
        if let Some(b) = &self.battery {
            cfg.battery = b.clone();
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.config().and_then(|cfg| {
        let artifacts = run(&cfg)?;
        artifacts.write(&cfg.output.dir, cfg.command)?;
        Ok(artifacts)
    });
    match result {
        Ok(a) => {
            print!("{}", to_json(&a.summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{}", to_json(&error_json(&e)));
            ExitCode::from(2)
        }
    }
}
