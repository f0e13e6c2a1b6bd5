//! Scaling fits of operator samples, β-threshold sweeps, the empirical
//! trilinear constant `C₁`, Picard iteration of the Duhamel map and the
//! cascade exponents of constant-flux spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::collision::{collision_piece, full_combined, gain};
use crate::datum::{weight, weighted_sup, GeometricGrid, GriddedProfile, Profile};
use crate::kernel::{ChannelId, KernelParams, PieceId};
use crate::quadrature::QuadConfig;
use crate::{Error, Result};

/// Least-squares power law `v ≈ e^{log_prefactor} ω^{exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    /// Largest `|log v - fit|`.
    pub max_residual: f64,
    pub fit_window: (f64, f64),
    pub n_samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;
pub const MIN_FIT_DECADES: f64 = 2.0;

/// Ordinary least squares of `ln v` against `ln ω`.
pub fn scaling_fit(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples, need at least {MIN_FIT_SAMPLES}",
            samples.len()
        )));
    }
    if let Some((w, v)) = samples.iter().find(|(w, v)| !(*v > 0.0) || !v.is_finite() || !(*w > 0.0)) {
        return Err(Error::Fit(format!("nonpositive sample {v} at ω = {w}")));
    }
    if samples.windows(2).any(|s| !(s[1].0 > s[0].0)) {
        return Err(Error::Fit("ω samples must be strictly increasing".into()));
    }
    let (lo, hi) = (samples[0].0, samples[samples.len() - 1].0);
    // Allow for the rounding of sample points to peaks or grid nodes.
    if (hi / lo).log10() < MIN_FIT_DECADES * (1.0 - 1e-3) {
        return Err(Error::Fit(format!("window [{lo}, {hi}] spans less than {MIN_FIT_DECADES} decades")));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(w, _)| w.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit {
        exponent: slope,
        log_prefactor: intercept,
        r_squared,
        max_residual,
        fit_window: (lo, hi),
        n_samples: samples.len(),
    })
}

/// `n ≥ 2` points from `lo` to `hi`, equally spaced in `ln ω`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    out[n - 1] = hi;
    out
}

/// Peaks `ω = 2πB/N` (`B` integer, so `cos(Nω) = 1`) nearest to `n`
/// log-spaced targets in `[lo, hi]`.
pub fn peak_samples(lo: f64, hi: f64, n: usize, freq: f64) -> Vec<f64> {
    let period = 2.0 * PI / freq;
    let (b_lo, b_hi) = ((lo / period).ceil(), (hi / period).floor());
    let mut out: Vec<f64> = log_spaced(b_lo, b_hi.max(b_lo), n)
        .into_iter()
        .map(|b| b.round().clamp(b_lo, b_hi) * period)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    /// Gain operator on `⟨ω⟩^{-M/2}`.
    GainPower,
    /// Full operator on `⟨ω⟩^{-M/2}`, combined-integrand pass.
    FullPower,
    /// Full operator on `(A + cos Nω)⟨ω⟩^{-M/2}` at its peaks.
    FullOscillatory,
}

impl DatumKind {
    pub fn name(self) -> &'static str {
        match self {
            DatumKind::GainPower => "gain_power",
            DatumKind::FullPower => "full_power",
            DatumKind::FullOscillatory => "full_oscillatory",
        }
    }
}

/// How operator samples for a scaling fit are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub fit_window: (f64, f64),
    pub n_samples: usize,
    pub quad: QuadConfig,
    /// Oscillatory datum `A`.
    pub a: f64,
    /// Oscillatory datum `N`.
    pub n: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fit_window: (1e2, 1e5),
            n_samples: 10,
            quad: QuadConfig::default(),
            a: 5.0,
            n: 32.0,
        }
    }
}

impl SweepConfig {
    /// Defaults for `kind`. The full operator on power data cancels to a
    /// few parts in 10⁵ between pieces, so keeps the tight default; the
    /// oscillatory operator does not cancel and is sampled at `10⁻⁶`.
    pub fn for_kind(kind: DatumKind) -> Self {
        let mut cfg = Self::default();
        if kind == DatumKind::FullOscillatory {
            cfg.quad.rel_tol = 1e-6;
        }
        cfg
    }

    pub fn datum(&self, kind: DatumKind, m: f64) -> Profile {
        match kind {
            DatumKind::GainPower | DatumKind::FullPower => Profile::power_law(m),
            DatumKind::FullOscillatory => Profile::oscillatory(self.a, self.n, m),
        }
    }

    pub fn sample_points(&self, kind: DatumKind) -> Vec<f64> {
        let (lo, hi) = self.fit_window;
        match kind {
            DatumKind::FullOscillatory => peak_samples(lo, hi, self.n_samples, self.n),
            _ => log_spaced(lo, hi, self.n_samples),
        }
    }
}

/// `|operator|` of `kind` at each sample point, evaluated in parallel.
pub fn operator_samples(kind: DatumKind, p: &KernelParams, sweep: &SweepConfig) -> Result<Vec<(f64, f64)>> {
    let datum = sweep.datum(kind, p.m);
    sweep
        .sample_points(kind)
        .into_par_iter()
        .map(|w| {
            let r = match kind {
                DatumKind::GainPower => gain(p, &datum, w, &sweep.quad)?,
                _ => full_combined(p, &datum, w, &sweep.quad)?,
            };
            Ok((w, r.value.abs()))
        })
        .collect()
}

pub fn exponent_fit(kind: DatumKind, p: &KernelParams, sweep: &SweepConfig) -> Result<ScalingFit> {
    scaling_fit(&operator_samples(kind, p, sweep)?)
}

/// Where the fitted exponent crosses `-M/2`, the edge of `⟨ω⟩^{-M/2} L^∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub datum_kind: DatumKind,
    pub m: f64,
    /// `None` when the curve stays on one side of `-M/2` over the grid.
    pub beta_star: Option<f64>,
    pub beta_grid: Vec<f64>,
    pub exponent_curve: Vec<f64>,
    pub fits: Vec<ScalingFit>,
}

pub const MAX_BETA_STEP: f64 = 0.05;

pub fn threshold_sweep(kind: DatumKind, m: f64, beta_grid: &[f64], sweep: &SweepConfig) -> Result<ThresholdResult> {
    if beta_grid.len() < 2 {
        return Err(Error::OutOfRange("β grid needs at least two points".into()));
    }
    if beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::OutOfRange("β grid must lie in [0, 1]".into()));
    }
    if beta_grid
        .windows(2)
        .any(|w| !(w[1] > w[0]) || w[1] - w[0] > MAX_BETA_STEP * (1.0 + 1e-9))
    {
        return Err(Error::OutOfRange(format!(
            "β grid must increase with step at most {MAX_BETA_STEP}"
        )));
    }
    let params: Vec<KernelParams> = beta_grid
        .iter()
        .map(|&b| KernelParams::new(b, m))
        .collect::<Result<_>>()?;
    if kind == DatumKind::FullOscillatory {
        params[0].require_oscillatory()?;
    }
    let fits: Vec<ScalingFit> = params
        .par_iter()
        .map(|p| exponent_fit(kind, p, sweep))
        .collect::<Result<_>>()?;
    let exponent_curve: Vec<f64> = fits.iter().map(|f| f.exponent).collect();
    if let Some(i) = exponent_curve.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Diagnostic(format!(
            "{} exponent curve not increasing between β = {} ({}) and β = {} ({})",
            kind.name(),
            beta_grid[i],
            exponent_curve[i],
            beta_grid[i + 1],
            exponent_curve[i + 1]
        )));
    }
    Ok(ThresholdResult {
        datum_kind: kind,
        m,
        beta_star: crossing(beta_grid, &exponent_curve, -0.5 * m),
        beta_grid: beta_grid.to_vec(),
        exponent_curve,
        fits,
    })
}

/// First `x` where the piecewise linear `(xs, ys)` reaches `level` from below.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    if ys[0] == level {
        return Some(xs[0]);
    }
    (0..xs.len() - 1).find_map(|i| {
        let (d0, d1) = (ys[i] - level, ys[i + 1] - level);
        (d0 < 0.0 && d1 >= 0.0).then(|| xs[i] + (xs[i + 1] - xs[i]) * d0 / (d0 - d1))
    })
}

/// Weighted operator output over weighted inputs for one channel/piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrilinearRatio {
    pub channel: ChannelId,
    pub piece: PieceId,
    pub omega1: f64,
    pub ratio: f64,
}

/// Nodes on which weighted sup norms of inputs are taken: `0` and the
/// default grid.
fn norm_nodes() -> Vec<f64> {
    let mut nodes = vec![0.0];
    nodes.extend(GeometricGrid::default().nodes());
    nodes
}

/// Largest `⟨ω₁⟩^{M/2} |C^j_i[k,l,m](ω₁)| / (‖k‖‖l‖‖m‖)` over the sixteen
/// channel/piece operators at one `ω₁`, with `‖f‖ = sup ⟨ω⟩^{M/2}|f|`.
/// `None` for a zero input.
pub fn trilinear_ratio(
    p: &KernelParams,
    inputs: [&Profile; 3],
    omega1: f64,
    cfg: &QuadConfig,
) -> Result<Option<TrilinearRatio>> {
    let nodes = norm_nodes();
    let norm: f64 = inputs
        .iter()
        .map(|f| weighted_sup(&nodes, |w| f.eval(w), p.m))
        .product();
    if norm == 0.0 {
        return Ok(None);
    }
    let w1 = weight(omega1, p.m);
    let mut best: Option<TrilinearRatio> = None;
    for c in ChannelId::ALL {
        for piece in PieceId::ALL {
            let r = collision_piece(p, c, piece, inputs[0], inputs[1], inputs[2], omega1, cfg)?;
            let ratio = w1 * r.value.abs() / norm;
            if best.map_or(true, |b| ratio > b.ratio) {
                best = Some(TrilinearRatio {
                    channel: c,
                    piece,
                    omega1,
                    ratio,
                });
            }
        }
    }
    Ok(best)
}

/// [`trilinear_ratio`] of the triple `(n, n, n)` along `omegas`; used to
/// watch for growth in `ω₁` (which rules out a finite `C₁`).
pub fn ratio_curve(p: &KernelParams, n: &Profile, omegas: &[f64], cfg: &QuadConfig) -> Result<Vec<(f64, f64)>> {
    omegas
        .par_iter()
        .map(|&w| Ok((w, trilinear_ratio(p, [n, n, n], w, cfg)?.map_or(0.0, |r| r.ratio))))
        .collect()
}

/// Measured trilinear constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Estimate {
    pub c1: f64,
    /// Where the maximum was attained.
    pub argmax: TrilinearRatio,
    pub trials: usize,
    pub omegas: Vec<f64>,
    pub seed: u64,
}

/// `C₁` as the largest [`trilinear_ratio`] over `trials` random triples
/// `c·⟨ω⟩^{-M'/2}` (`M' ∈ [M, M+4]`, `c ∈ [1/2, 2]`; the first triple is
/// `⟨ω⟩^{-M/2}` itself) and the given `ω₁`. Refused for `β > 1/4`, where
/// the ratio grows without bound in `ω₁`.
pub fn estimate_c1(p: &KernelParams, trials: usize, omegas: &[f64], seed: u64, cfg: &QuadConfig) -> Result<C1Estimate> {
    p.validate()?;
    if p.beta > 0.25 {
        return Err(Error::OutOfRange(format!(
            "no finite trilinear constant for β = {} > 1/4",
            p.beta
        )));
    }
    if trials == 0 || omegas.is_empty() {
        return Err(Error::OutOfRange("need at least one trial and one ω₁".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Profile::power_law(p.m + rng.gen_range(0.0..=4.0)).scaled(rng.gen_range(0.5..=2.0));
    let mut triples = vec![[Profile::power_law(p.m), Profile::power_law(p.m), Profile::power_law(p.m)]];
    while triples.len() < trials {
        triples.push([draw(), draw(), draw()]);
    }
    let jobs: Vec<(usize, f64)> = (0..trials).flat_map(|t| omegas.iter().map(move |&w| (t, w))).collect();
    let ratios: Vec<Option<TrilinearRatio>> = jobs
        .par_iter()
        .map(|&(t, w)| {
            let [k, l, m] = &triples[t];
            trilinear_ratio(p, [k, l, m], w, cfg)
        })
        .collect::<Result<_>>()?;
    let argmax = ratios
        .into_iter()
        .flatten()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .ok_or_else(|| Error::Diagnostic("all trial ratios vanished".into()))?;
    Ok(C1Estimate {
        c1: argmax.ratio,
        argmax,
        trials,
        omegas: omegas.to_vec(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardOptions {
    /// Trilinear constant; measured with [`estimate_c1`] when `None`.
    pub c1: Option<f64>,
    /// Left-endpoint steps of the time integral on `[0, T]`.
    pub time_steps: usize,
    /// Iterate the gain-only map instead of the full one.
    pub gain_only: bool,
    pub quad: QuadConfig,
    /// Power-law tail of the gridded iterates beyond the grid; `-M/2` when `None`.
    pub tail_exponent: Option<f64>,
    pub c1_trials: usize,
    pub seed: u64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            c1: None,
            time_steps: 4,
            gain_only: false,
            quad: QuadConfig::default().with_rel_tol(1e-6),
            tail_exponent: None,
            c1_trials: 4,
            seed: 0,
        }
    }
}

/// Picard iteration of `f ↦ n⁰ + ∫₀ᵗ C[f](s) ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRun {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// `sup_t ‖fⁿ(t)‖` for `n = 0..=iterations`.
    pub iterate_norms: Vec<f64>,
    /// `sup_t ‖fⁿ⁺¹ - fⁿ‖ / sup_t ‖fⁿ - fⁿ⁻¹‖`, `0` once differences vanish.
    pub contraction_factors: Vec<f64>,
    /// `sup_t ‖fⁿ⁺¹ - fⁿ‖` for `n = 0..iterations`.
    pub differences: Vec<f64>,
    /// Some iterate left the ball of radius `2R`.
    pub escaped: bool,
    pub time_nodes: Vec<f64>,
    pub nodes: Vec<f64>,
    /// Last iterate at `t = T` on the grid.
    pub final_values: Vec<f64>,
}

/// Runs `iterations` Picard steps on `[0, T]`, `T = 1/(8 C₁ R²)`, with
/// iterates stored on `grid`. `R = 0` gives the zero solution; `T` is then
/// reported for `R = 1`.
pub fn picard_solve(
    p: &KernelParams,
    n0: &Profile,
    grid: &GeometricGrid,
    iterations: usize,
    opts: &PicardOptions,
) -> Result<PicardRun> {
    p.validate()?;
    if p.beta > 0.25 {
        return Err(Error::OutOfRange(format!("Picard scheme needs β ≤ 1/4, got {}", p.beta)));
    }
    n0.validate()?;
    grid.validate()?;
    if !n0.is_nonnegative() {
        return Err(Error::InvalidProfile("Picard datum must be nonnegative".into()));
    }
    if opts.time_steps == 0 {
        return Err(Error::OutOfRange("need at least one time step".into()));
    }
    let nodes = grid.nodes();
    let datum: Vec<f64> = nodes.iter().map(|&w| n0.eval(w)).collect();
    let norm = |v: &[f64]| nodes.iter().zip(v).map(|(&w, x)| weight(w, p.m) * x.abs()).fold(0.0, f64::max);
    let r = norm(&datum);
    if !r.is_finite() {
        return Err(Error::InvalidProfile("datum has no finite weighted norm".into()));
    }
    let c1 = match opts.c1 {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => return Err(Error::OutOfRange(format!("C₁ must be positive, got {c}"))),
        None => estimate_c1(p, opts.c1_trials, &log_spaced(0.1, 100.0, 4), opts.seed, &opts.quad)?.c1,
    };
    let r_eff = if r > 0.0 { r } else { 1.0 };
    let t_final = 1.0 / (8.0 * c1 * r_eff * r_eff);
    let k = opts.time_steps;
    let dt = t_final / k as f64;
    let time_nodes: Vec<f64> = (0..=k).map(|j| dt * j as f64).collect();
    let tail = opts.tail_exponent.unwrap_or(-0.5 * p.m);

    let operator = |values: &[f64]| -> Result<Vec<f64>> {
        if values.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; values.len()]);
        }
        let f = Profile::Gridded(GriddedProfile::new(grid.clone(), values.to_vec(), tail)?);
        nodes
            .par_iter()
            .map(|&w| {
                let q = if opts.gain_only {
                    gain(p, &f, w, &opts.quad)?
                } else {
                    full_combined(p, &f, w, &opts.quad)?
                };
                Ok(q.value)
            })
            .collect()
    };

    // Iterates as values at each time node; fⁿ(t₀) = n⁰ always.
    let mut current: Vec<Vec<f64>> = vec![datum.clone(); k + 1];
    let mut iterate_norms = vec![r];
    let mut differences = Vec::with_capacity(iterations);
    let mut contraction_factors = Vec::new();
    for _ in 0..iterations {
        let mut rates: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            if j > 0 && current[j] == current[j - 1] {
                let again = rates[j - 1].clone();
                rates.push(again);
            } else {
                rates.push(operator(&current[j])?);
            }
        }
        let mut next = Vec::with_capacity(k + 1);
        let mut acc = datum.clone();
        next.push(acc.clone());
        for rate in &rates {
            for (a, c) in acc.iter_mut().zip(rate) {
                *a += dt * c;
            }
            next.push(acc.clone());
        }
        let diff = next
            .iter()
            .zip(&current)
            .map(|(a, b)| {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                norm(&d)
            })
            .fold(0.0, f64::max);
        if let Some(&prev) = differences.last() {
            contraction_factors.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        differences.push(diff);
        iterate_norms.push(next.iter().map(|v| norm(v)).fold(0.0, f64::max));
        current = next;
    }
    let escaped = iterate_norms.iter().any(|&x| x > 2.0 * r * (1.0 + 1e-12));
    Ok(PicardRun {
        r,
        c1,
        t: t_final,
        iterate_norms,
        contraction_factors,
        differences,
        escaped,
        time_nodes,
        nodes,
        final_values: current.pop().unwrap_or_default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Finite,
    Infinite,
}

/// Power laws of the constant-flux spectra `f ∼ k^ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeExponents {
    pub beta: f64,
    pub nu: f64,
    pub energy_spectrum_exp: f64,
    pub inverse_flux_exp: f64,
    pub direct_capacity: Capacity,
    pub inverse_threshold_beta: f64,
}

pub fn cascade_exponents(beta: f64) -> Result<CascadeExponents> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange(format!("β must lie in [0, 1], got {beta}")));
    }
    let shift = 8.0 * beta / 3.0;
    Ok(CascadeExponents {
        beta,
        nu: -3.0 - shift,
        energy_spectrum_exp: 1.0 - shift,
        inverse_flux_exp: -7.0 / 3.0 - shift,
        direct_capacity: if beta < 0.75 {
            Capacity::Finite
        } else {
            Capacity::Infinite
        },
        inverse_threshold_beta: 0.25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let s: Vec<(f64, f64)> = log_spaced(1e2, 1e5, 10).into_iter().map(|w| (w, 7.0 * w.powf(-4.5))).collect();
        let f = scaling_fit(&s).unwrap();
        assert!((f.exponent + 4.5).abs() < 1e-12);
        assert!((f.log_prefactor - 7f64.ln()).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.max_residual < 1e-10);
    }

    #[test]
    fn fit_rejections() {
        let s: Vec<(f64, f64)> = log_spaced(1.0, 10.0, 10).into_iter().map(|w| (w, w)).collect();
        assert!(matches!(scaling_fit(&s), Err(Error::Fit(_))));
        let s: Vec<(f64, f64)> = log_spaced(1.0, 1e3, 5).into_iter().map(|w| (w, w)).collect();
        assert!(scaling_fit(&s).is_err());
        let mut s: Vec<(f64, f64)> = log_spaced(1.0, 1e3, 10).into_iter().map(|w| (w, w)).collect();
        s[3].1 = 0.0;
        assert!(scaling_fit(&s).is_err());
        s[3].1 = -1.0;
        assert!(scaling_fit(&s).is_err());
    }

    #[test]
    fn peaks_are_peaks() {
        let pts = peak_samples(1e2, 1e5, 10, 32.0);
        assert_eq!(pts.len(), 10);
        assert!(pts[0] >= 1e2 && *pts.last().unwrap() <= 1e5);
        for w in pts {
            assert!(((32.0 * w).cos() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn crossing_interpolates() {
        let xs = [0.0, 0.1, 0.2];
        assert!((crossing(&xs, &[-3.0, -1.0, 1.0], 0.0).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(crossing(&xs, &[-3.0, -2.0, -1.0], 0.0), None);
        assert_eq!(crossing(&xs, &[1.0, 2.0, 3.0], 0.0), None);
    }

    #[test]
    fn sweep_grid_validation() {
        let s = SweepConfig::default();
        assert!(threshold_sweep(DatumKind::GainPower, 8.0, &[0.0, 0.1], &s).is_err());
        assert!(threshold_sweep(DatumKind::GainPower, 8.0, &[0.0, 1.5], &s).is_err());
        assert!(threshold_sweep(DatumKind::FullOscillatory, 8.0, &[0.0, 0.05], &s).is_err());
    }

    #[test]
    fn c1_refused_above_quarter() {
        let p = KernelParams::new(0.5, 8.0).unwrap();
        assert!(matches!(
            estimate_c1(&p, 2, &[1.0], 0, &QuadConfig::default()),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn zero_input_has_no_ratio() {
        let p = KernelParams::new(0.0, 8.0).unwrap();
        let z = Profile::zero();
        let n = Profile::power_law(8.0);
        let cfg = QuadConfig::default().with_rel_tol(1e-6);
        assert!(trilinear_ratio(&p, [&n, &z, &n], 1.0, &cfg).unwrap().is_none());
    }

    #[test]
    fn zero_datum_stays_zero() {
        let p = KernelParams::new(0.0, 8.0).unwrap();
        let grid = GeometricGrid::new(1e-2, 1e2, 4).unwrap();
        let opts = PicardOptions {
            c1: Some(1.0),
            ..PicardOptions::default()
        };
        let run = picard_solve(&p, &Profile::zero(), &grid, 3, &opts).unwrap();
        assert_eq!(run.r, 0.0);
        assert!(run.iterate_norms.iter().all(|&x| x == 0.0));
        assert!(run.contraction_factors.iter().all(|&x| x == 0.0));
        assert!(run.t > 0.0);
    }

    #[test]
    fn picard_refuses_large_beta() {
        let p = KernelParams::new(0.5, 8.0).unwrap();
        let grid = GeometricGrid::new(1e-2, 1e2, 4).unwrap();
        assert!(picard_solve(&p, &Profile::power_law(8.0), &grid, 1, &PicardOptions::default()).is_err());
    }

    #[test]
    fn cascade_formulas() {
        let c = cascade_exponents(0.0).unwrap();
        assert_eq!((c.nu, c.energy_spectrum_exp), (-3.0, 1.0));
        assert!((c.inverse_flux_exp + 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.direct_capacity, Capacity::Finite);
        let c = cascade_exponents(0.75).unwrap();
        assert!((c.energy_spectrum_exp + 1.0).abs() < 1e-15);
        assert_eq!(c.direct_capacity, Capacity::Infinite);
        assert!(cascade_exponents(1.5).is_err());
    }
}
