//! Experiment driver behind the `kwe` binary: a [`RunConfig`] read from
//! TOML and overridden by flags is run into a CSV table and a JSON summary.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kwe_core::analysis::{
    cascade_exponents, exponent_fit, operator_samples, picard_solve, threshold_sweep, DatumKind, PicardOptions,
    SweepConfig,
};
use kwe_core::averaging::{averaging_bound_check, averaging_slope, battery};
use kwe_core::collision::{full_collision, full_combined};
use kwe_core::datum::{GeometricGrid, Profile};
use kwe_core::kernel::KernelParams;
use kwe_core::quadrature::QuadConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Collision,
    Scaling,
    Thresholds,
    Picard,
    Averaging,
    Spectra,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Collision => "collision",
            Command::Scaling => "scaling",
            Command::Thresholds => "thresholds",
            Command::Picard => "picard",
            Command::Averaging => "averaging",
            Command::Spectra => "spectra",
        }
    }
}

/// Operator family for `scaling` and `thresholds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[value(alias = "gain_power")]
    Gain,
    #[value(alias = "full_power")]
    Full,
    #[value(alias = "full_oscillatory")]
    Oscillatory,
}

impl From<Kind> for DatumKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gain => DatumKind::GainPower,
            Kind::Full => DatumKind::FullPower,
            Kind::Oscillatory => DatumKind::FullOscillatory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Oscillation {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl Default for Oscillation {
    fn default() -> Self {
        Self { a: 5.0, n: 32.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Directory receiving `<command>.csv` and `<command>.json`.
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Everything a run depends on. Unset optional fields take
/// command-specific defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub kernel: KernelParams,
    /// Datum for `collision` and `picard`; `⟨ω⟩^{-M/2}` when unset.
    pub profile: Option<Profile>,
    /// Grid of `picard` iterates.
    pub grid: Option<GeometricGrid>,
    pub quad: QuadConfig,
    pub oscillation: Oscillation,
    pub kind: Kind,
    pub fit_window: (f64, f64),
    pub n_samples: usize,
    /// β values of `thresholds`; `0, 0.05, …, 1` when unset.
    pub beta_grid: Option<Vec<f64>>,
    pub iterations: usize,
    /// Trilinear constant for `picard`; measured when unset.
    pub c1: Option<f64>,
    pub time_steps: usize,
    pub gain_only: bool,
    /// Battery name for `averaging`.
    pub battery: String,
    pub output: Output,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Spectra,
            kernel: KernelParams { beta: 0.0, m: 8.0 },
            profile: None,
            grid: None,
            quad: QuadConfig::default(),
            oscillation: Oscillation::default(),
            kind: Kind::Gain,
            fit_window: (1e2, 1e5),
            n_samples: 10,
            beta_grid: None,
            iterations: 5,
            c1: None,
            time_steps: 4,
            gain_only: false,
            battery: "default".into(),
            output: Output::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.kernel.validate()?;
        self.quad.validate()?;
        if let Some(p) = &self.profile {
            p.validate()?;
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if self.command == Command::Thresholds || self.command == Command::Scaling {
            if self.kind == Kind::Oscillatory {
                self.kernel.require_oscillatory()?;
                if !(self.oscillation.a > 1.0) || self.oscillation.n.fract() != 0.0 || !(self.oscillation.n >= 1.0) {
                    bail!("oscillatory datum needs A > 1 and a positive integer N");
                }
            }
        }
        let (lo, hi) = self.fit_window;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            bail!("fit window must satisfy 0 < lo < hi, got ({lo}, {hi})");
        }
        if self.command == Command::Averaging && self.battery != "default" && self.battery != "quick" {
            bail!("unknown battery `{}` (expected `default` or `quick`)", self.battery);
        }
        Ok(())
    }

    fn sweep(&self) -> SweepConfig {
        SweepConfig {
            fit_window: self.fit_window,
            n_samples: self.n_samples,
            quad: self.quad.clone(),
            a: self.oscillation.a,
            n: self.oscillation.n,
        }
    }

    fn datum(&self) -> Profile {
        self.profile.clone().unwrap_or_else(|| Profile::power_law(self.kernel.m))
    }
}

/// A finished run: the CSV table and the JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    pub summary: Value,
}

impl Artifacts {
    pub fn write(&self, dir: &Path, command: Command) -> anyhow::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv_path = dir.join(format!("{}.csv", command.name()));
        let json_path = dir.join(format!("{}.json", command.name()));
        std::fs::write(&csv_path, &self.csv)?;
        std::fs::write(&json_path, to_json(&self.summary))?;
        Ok((csv_path, json_path))
    }
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Shortest decimal that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Table {
    out: String,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            out: columns.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.out, "{}", cells.join(","));
    }
}

/// Runs `cfg` and returns its artifacts; nothing is written.
pub fn run(cfg: &RunConfig) -> anyhow::Result<Artifacts> {
    cfg.validate()?;
    let (csv, mut summary) = match cfg.command {
        Command::Collision => collision(cfg)?,
        Command::Scaling => scaling(cfg)?,
        Command::Thresholds => thresholds(cfg)?,
        Command::Picard => picard(cfg)?,
        Command::Averaging => averaging(cfg)?,
        Command::Spectra => spectra(cfg)?,
    };
    summary["command"] = json!(cfg.command.name());
    summary["config"] = serde_json::to_value(cfg)?;
    Ok(Artifacts { csv, summary })
}

/// Columns: `omega1,gain,loss,full,full_combined,err_estimate,tail_bound,resolved,converged`.
fn collision(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let n = cfg.datum();
    let kind = if n.osc_freq() > 0.0 {
        DatumKind::FullOscillatory
    } else {
        DatumKind::FullPower
    };
    let mut sweep = cfg.sweep();
    if n.osc_freq() > 0.0 {
        sweep.n = n.osc_freq();
    }
    let mut t = Table::new(&[
        "omega1",
        "gain",
        "loss",
        "full",
        "full_combined",
        "err_estimate",
        "tail_bound",
        "resolved",
        "converged",
    ]);
    let mut all_converged = true;
    for w in sweep.sample_points(kind) {
        let r = full_collision(&cfg.kernel, &n, w, &cfg.quad)?;
        let c = full_combined(&cfg.kernel, &n, w, &cfg.quad)?;
        all_converged &= r.converged && c.converged;
        t.row(&[
            num(w),
            num(r.gain),
            num(r.loss),
            num(r.full),
            num(c.value),
            num(r.err_estimate),
            num(r.tail_bound),
            r.resolved.to_string(),
            (r.converged && c.converged).to_string(),
        ]);
    }
    if !all_converged {
        bail!(kwe_core::Error::Diagnostic("collision quadrature did not converge".into()));
    }
    Ok((t.out, json!({ "profile": n, "rows": sweep.n_samples })))
}

/// Columns: `omega1,value`.
fn scaling(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let kind: DatumKind = cfg.kind.into();
    let sweep = cfg.sweep();
    let samples = operator_samples(kind, &cfg.kernel, &sweep)?;
    let mut t = Table::new(&["omega1", "value"]);
    for (w, v) in &samples {
        t.row(&[num(*w), num(*v)]);
    }
    let fit = exponent_fit(kind, &cfg.kernel, &sweep)?;
    Ok((t.out, json!({ "kind": kind, "fit": fit })))
}

/// Columns: `beta,exponent,r_squared,max_residual`.
fn thresholds(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let kind: DatumKind = cfg.kind.into();
    let grid = cfg
        .beta_grid
        .clone()
        .unwrap_or_else(|| (0..=20).map(|i| i as f64 / 20.0).collect());
    let mut sweep = cfg.sweep();
    if kind == DatumKind::FullOscillatory && sweep.quad == QuadConfig::default() {
        sweep.quad = SweepConfig::for_kind(kind).quad;
    }
    let r = threshold_sweep(kind, cfg.kernel.m, &grid, &sweep)?;
    let mut t = Table::new(&["beta", "exponent", "r_squared", "max_residual"]);
    for (b, f) in r.beta_grid.iter().zip(&r.fits) {
        t.row(&[num(*b), num(f.exponent), num(f.r_squared), num(f.max_residual)]);
    }
    Ok((
        t.out,
        json!({
            "kind": r.datum_kind,
            "M": r.m,
            "beta_star": r.beta_star,
            "exponent_curve": r.exponent_curve,
        }),
    ))
}

/// Columns: `iteration,norm,difference,contraction_factor`.
fn picard(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let grid = cfg
        .grid
        .clone()
        .unwrap_or(GeometricGrid::new(1e-2, 1e4, 8).expect("valid default grid"));
    let mut quad = cfg.quad.clone();
    if quad == QuadConfig::default() {
        quad = PicardOptions::default().quad;
    }
    let opts = PicardOptions {
        c1: cfg.c1,
        time_steps: cfg.time_steps,
        gain_only: cfg.gain_only,
        quad,
        seed: cfg.seed,
        ..PicardOptions::default()
    };
    let run = picard_solve(&cfg.kernel, &cfg.datum(), &grid, cfg.iterations, &opts)?;
    let mut t = Table::new(&["iteration", "norm", "difference", "contraction_factor"]);
    for (i, norm) in run.iterate_norms.iter().enumerate() {
        let diff = i.checked_sub(1).and_then(|j| run.differences.get(j)).copied();
        let factor = i.checked_sub(2).and_then(|j| run.contraction_factors.get(j)).copied();
        t.row(&[
            i.to_string(),
            num(*norm),
            diff.map(num).unwrap_or_default(),
            factor.map(num).unwrap_or_default(),
        ]);
    }
    let max_factor = run.contraction_factors.iter().copied().fold(0.0, f64::max);
    Ok((
        t.out,
        json!({
            "R": run.r,
            "C1": run.c1,
            "T": run.t,
            "iterate_norms": run.iterate_norms,
            "contraction_factors": run.contraction_factors,
            "max_contraction_factor": max_factor,
            "escaped": run.escaped,
        }),
    ))
}

/// Columns: `k1,k2,angle,E,f_closed,f_quad,f1_quad,rel_dev,weighted`.
fn averaging(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let pairs = match cfg.battery.as_str() {
        "quick" => battery(1, 8, cfg.seed),
        _ => battery(2, 64, cfg.seed),
    };
    let check = averaging_bound_check(&pairs, &cfg.quad)?;
    let slope = averaging_slope(1e2, 1e6, 17, 9)?;
    let mut t = Table::new(&["k1", "k2", "angle", "E", "f_closed", "f_quad", "f1_quad", "rel_dev", "weighted"]);
    for s in &check.samples {
        t.row(&[
            num(s.k1),
            num(s.k2),
            num(s.angle),
            num(s.e),
            num(s.f_closed),
            num(s.f_quad),
            num(s.f1_quad),
            num(s.rel_dev),
            num(s.weighted),
        ]);
    }
    Ok((
        t.out,
        json!({
            "battery": cfg.battery,
            "samples": check.samples.len(),
            "max_rel_dev": check.max_rel_dev,
            "max_symmetry_dev": check.max_symmetry_dev,
            "sup_weighted": check.sup_weighted,
            "weighted_log_slope": slope.exponent,
        }),
    ))
}

/// Columns: `beta,nu,energy_spectrum_exp,inverse_flux_exp,direct_capacity,inverse_threshold_beta`.
fn spectra(cfg: &RunConfig) -> anyhow::Result<(String, Value)> {
    let c = cascade_exponents(cfg.kernel.beta)?;
    let mut t = Table::new(&[
        "beta",
        "nu",
        "energy_spectrum_exp",
        "inverse_flux_exp",
        "direct_capacity",
        "inverse_threshold_beta",
    ]);
    let capacity = serde_json::to_value(c.direct_capacity)?;
    t.row(&[
        num(c.beta),
        num(c.nu),
        num(c.energy_spectrum_exp),
        num(c.inverse_flux_exp),
        capacity.as_str().unwrap_or_default().to_string(),
        num(c.inverse_threshold_beta),
    ]);
    Ok((t.out, json!({ "exponents": c })))
}

/// Machine-readable description of a failed run.
pub fn error_json(e: &anyhow::Error) -> Value {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<kwe_core::Error>())
        .map(|k| k.kind())
        .unwrap_or("config");
    json!({ "error": { "kind": kind, "message": format!("{e:#}") } })
}

/// Parses `lo:hi` into a pair.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

/// Parses `min:max:points_per_decade` into a grid.
pub fn parse_grid(s: &str) -> Result<GeometricGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected min:max:points_per_decade, got `{s}`"));
    };
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    let ppd: u32 = c.trim().parse().map_err(|e| format!("{e}"))?;
    GeometricGrid::new(lo, hi, ppd).map_err(|e| e.to_string())
}
