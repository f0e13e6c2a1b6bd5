//! Globally adaptive 7/15-point Gauss–Kronrod quadrature, iterated over the
//! domain pieces of the collision operator.
//!
//! Every rule used here has open nodes, so integrands are never evaluated at
//! panel endpoints. The semi-infinite pieces are truncated at `omega_max` and
//! the discarded mass is estimated from the integrand's decay just beyond the
//! cutoff.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::kernel::{OmegaQuad, PieceId};
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd-indexed Kronrod nodes, center last.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Upper bound on oscillation pre-split panels of one interval.
const MAX_OSC_PANELS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Bisection levels allowed below an initial panel.
    pub max_depth: u32,
    /// Cutoff of semi-infinite pieces; `None` means `max(10⁶, 10³ ω₁)`.
    pub omega_max: Option<f64>,
    /// Oscillation frequency `N` of the integrand, `0` when smooth.
    pub osc_freq: f64,
    /// Length, from the lower end of an interval, over which oscillation
    /// pre-splitting applies; `None` covers the whole interval.
    pub osc_window: Option<f64>,
    /// Cap on live panels of a single 1D integral.
    pub max_panels: usize,
    /// Take `rel_tol` relative to `∫|f|` rather than `|∫f|`, for signed
    /// integrands whose integral may pass through zero.
    pub relative_to_magnitude: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_depth: 40,
            omega_max: None,
            osc_freq: 0.0,
            osc_window: None,
            max_panels: 4000,
            relative_to_magnitude: false,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_omega_max(mut self, omega_max: f64) -> Self {
        self.omega_max = Some(omega_max);
        self
    }

    pub fn with_oscillation(mut self, freq: f64, window: Option<f64>) -> Self {
        self.osc_freq = freq;
        self.osc_window = window;
        self
    }

    pub fn relative_to_magnitude(mut self) -> Self {
        self.relative_to_magnitude = true;
        self
    }

    fn reference(&self) -> Reference {
        if self.relative_to_magnitude {
            Reference::Magnitude
        } else {
            Reference::Value
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidQuadConfig(m));
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return bad(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return bad(format!("abs_tol must be nonnegative, got {}", self.abs_tol));
        }
        if self.max_depth == 0 || self.max_panels < 2 {
            return bad("max_depth and max_panels must allow subdivision".into());
        }
        if !(self.osc_freq >= 0.0) || !self.osc_freq.is_finite() {
            return bad(format!("osc_freq must be nonnegative, got {}", self.osc_freq));
        }
        if let Some(w) = self.omega_max {
            if !(w > 0.0) || !w.is_finite() {
                return bad(format!("omega_max must be positive and finite, got {w}"));
            }
        }
        Ok(())
    }

    /// Cutoff used for semi-infinite pieces at this `ω₁`.
    pub fn omega_max_for(&self, omega1: f64) -> f64 {
        self.omega_max.unwrap_or_else(|| 1e6f64.max(1e3 * omega1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    /// Estimated mass beyond the truncation cutoff.
    pub tail_bound: f64,
    pub evaluations: u64,
    /// False when depth or panel limits were hit before the tolerance.
    pub converged: bool,
    /// False when `tail_bound` exceeds `rel_tol·|value|` (or `abs_tol`).
    pub truncation_ok: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            err_estimate: 0.0,
            tail_bound: 0.0,
            evaluations: 0,
            converged: true,
            truncation_ok: true,
        }
    }

    /// Sum of two results, errors and tails added.
    pub fn add(&self, other: &QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            err_estimate: self.err_estimate + other.err_estimate,
            tail_bound: self.tail_bound + other.tail_bound,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
            truncation_ok: self.truncation_ok && other.truncation_ok,
        }
    }

    pub fn scale(&self, factor: f64) -> QuadResult {
        QuadResult {
            value: factor * self.value,
            err_estimate: factor.abs() * self.err_estimate,
            tail_bound: factor.abs() * self.tail_bound,
            ..*self
        }
    }

    /// Error and tail combined.
    pub fn total_uncertainty(&self) -> f64 {
        self.err_estimate + self.tail_bound
    }
}

/// Integrand output: value, and two auxiliary channels integrated with the
/// same nodes but not driving refinement.
type Triple = [f64; 3];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Triple,
    /// `∫|f|` over the panel.
    abs: f64,
    err: f64,
    floor: f64,
    depth: u32,
    /// Consecutive bisections that failed to reduce the error.
    stalls: u8,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// QUADPACK error rescaling together with the roundoff floor `50ε·resabs`.
fn rescale_error(err: f64, resabs: f64, resasc: f64) -> (f64, f64) {
    let mut scaled = err.abs();
    if resasc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / resasc).powf(1.5);
        scaled = if scale < 1.0 { resasc * scale } else { resasc };
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    (scaled.max(floor), floor)
}

fn gk15<F: Fn(f64) -> Triple>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [fc[0] * WGK[7], fc[1] * WGK[7], fc[2] * WGK[7]];
    let mut gauss = fc[0] * WG[3];
    let mut resabs = fc[0].abs() * WGK[7];
    let mut lower = [0.0; 7];
    let mut upper = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        lower[j] = f1[0];
        upper[j] = f2[0];
        for c in 0..3 {
            kron[c] += WGK[j] * (f1[c] + f2[c]);
        }
        resabs += WGK[j] * (f1[0].abs() + f2[0].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1[0] + f2[0]);
        }
    }
    let mean = 0.5 * kron[0];
    let mut resasc = WGK[7] * (fc[0] - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((lower[j] - mean).abs() + (upper[j] - mean).abs());
    }
    let h = half.abs();
    let value = [kron[0] * half, kron[1] * half, kron[2] * half];
    if !value[0].is_finite() || !value[2].is_finite() {
        return Err(Error::Diagnostic(format!(
            "integrand is not finite on ({a}, {b})"
        )));
    }
    let (err, floor) = rescale_error((kron[0] - gauss) * half, resabs * h, resasc * h);
    Ok(Panel {
        a,
        b,
        value,
        abs: resabs * h,
        err,
        floor,
        depth: 0,
        stalls: 0,
    })
}

struct Adaptive {
    value: Triple,
    /// `∫|f|` of the main channel.
    magnitude: f64,
    err: f64,
    evaluations: u64,
    converged: bool,
}

/// Bisections without error reduction after which a panel counts as
/// limited by rounding.
const MAX_STALLS: u8 = 3;

/// Multiple of the rounding floor below which a stalled panel is taken as
/// noise.
const NOISE_BAND: f64 = 1e4;

/// What `rel_tol` is relative to.
#[derive(Clone, Copy, PartialEq)]
enum Reference {
    /// `|∫f|`
    Value,
    /// `∫|f|`; used for inner integrals, whose accuracy matters relative to
    /// the outer integral rather than to their own possibly vanishing value.
    Magnitude,
}

/// Global adaptive bisection of the initial panels given by `breaks`.
fn adaptive<F: Fn(f64) -> Triple>(f: &F, breaks: &[f64], cfg: &QuadConfig, reference: Reference) -> Result<Adaptive> {
    let mut heap = BinaryHeap::with_capacity(breaks.len() * 2);
    let mut settled: Vec<Panel> = Vec::new();
    let mut evaluations = 0u64;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(f, w[0], w[1])?);
            evaluations += 15;
        }
    }
    let mut converged = true;
    loop {
        let (total, magnitude, err) = heap
            .iter()
            .chain(settled.iter())
            .fold((0.0, 0.0, 0.0), |(v, m, e), p| (v + p.value[0], m + p.abs, e + p.err));
        let size = match reference {
            Reference::Value => total.abs(),
            Reference::Magnitude => magnitude,
        };
        let tol = cfg.abs_tol.max(cfg.rel_tol * size);
        if err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        // Panels at the roundoff floor cannot improve further.
        if worst.err <= worst.floor * (1.0 + 1e-12) {
            settled.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= cfg.max_depth || !(mid > worst.a && mid < worst.b) {
            converged = false;
            settled.push(worst);
            continue;
        }
        if heap.len() + settled.len() + 1 > cfg.max_panels {
            converged = false;
            heap.push(worst);
            break;
        }
        let mut left = gk15(f, worst.a, mid)?;
        let mut right = gk15(f, mid, worst.b)?;
        evaluations += 30;
        // Only errors within a few digits of the rounding floor can be
        // noise; steep but smooth structure also stalls for a few levels.
        let stalls = if left.err + right.err >= 0.99 * worst.err && worst.err <= NOISE_BAND * worst.floor {
            worst.stalls + 1
        } else {
            0
        };
        for child in [&mut left, &mut right] {
            child.depth = worst.depth + 1;
            child.stalls = stalls;
        }
        // Errors that survive repeated bisection are rounding noise.
        if stalls >= MAX_STALLS {
            settled.push(left);
            settled.push(right);
        } else {
            heap.push(left);
            heap.push(right);
        }
    }
    let mut value = [0.0; 3];
    let mut magnitude = 0.0;
    let mut err = 0.0;
    for p in heap.iter().chain(settled.iter()) {
        for c in 0..3 {
            value[c] += p.value[c];
        }
        magnitude += p.abs;
        err += p.err;
    }
    if !converged {
        err *= 10.0;
    }
    Ok(Adaptive {
        value,
        magnitude,
        err,
        evaluations,
        converged,
    })
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidDomain(format!("need finite a < b, got ({a}, {b})")));
    }
    Ok(())
}

/// Adaptive integral of `f` over `(a, b)`. With `cfg.osc_freq = N > 0`
/// the initial panels have width at most `π/(4N)` within `cfg.osc_window`
/// of `a`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], cfg)
}

/// As [`integrate_1d`] with user-supplied initial breakpoints (sorted,
/// first and last being the interval ends).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], cfg: &QuadConfig) -> Result<QuadResult> {
    cfg.validate()?;
    let (a, b) = match (breaks.first(), breaks.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidDomain("no breakpoints".into())),
    };
    check_interval(a, b)?;
    let breaks = with_oscillation_splits(endpoint_graded(breaks), cfg, fine_osc_width(cfg));
    let g = |x: f64| [f(x), 0.0, 0.0];
    let r = adaptive(&g, &breaks, cfg, cfg.reference())?;
    Ok(QuadResult {
        value: r.value[0],
        err_estimate: r.err,
        tail_bound: 0.0,
        evaluations: r.evaluations,
        converged: r.converged,
        truncation_ok: true,
    })
}

/// Integral of a smooth `f` over `breaks` with `rel_tol` taken relative to
/// `∫|f|`, for integrals expected to vanish. Returns the result and `∫|f|`.
pub fn integrate_cancelling<F: Fn(f64) -> f64>(f: F, breaks: &[f64], cfg: &QuadConfig) -> Result<(QuadResult, f64)> {
    cfg.validate()?;
    let (a, b) = match (breaks.first(), breaks.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidDomain("no breakpoints".into())),
    };
    check_interval(a, b)?;
    let g = |x: f64| [f(x), 0.0, 0.0];
    let r = adaptive(&g, breaks, cfg, Reference::Magnitude)?;
    let result = QuadResult {
        value: r.value[0],
        err_estimate: r.err,
        tail_bound: 0.0,
        evaluations: r.evaluations,
        converged: r.converged,
        truncation_ok: true,
    };
    Ok((result, r.magnitude))
}

/// Levels of geometric refinement added toward both interval ends, so that
/// `max_depth` bisections reach `2^{-(max_depth + ENDPOINT_LEVELS)}` of the
/// end panels and integrable endpoint singularities converge.
const ENDPOINT_LEVELS: i32 = 20;

fn endpoint_graded(breaks: &[f64]) -> Vec<f64> {
    let mut out = breaks.to_vec();
    let n = breaks.len();
    let (a, a1) = (breaks[0], breaks[1]);
    let (b0, b) = (breaks[n - 2], breaks[n - 1]);
    for k in 1..=ENDPOINT_LEVELS {
        let s = 0.5f64.powi(k);
        out.push(a + (a1 - a) * s);
        out.push(b - (b - b0) * s);
    }
    out.retain(|x| *x > a && *x < b);
    out.push(a);
    out.push(b);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Breakpoints `a + h, a + 2h, a + 4h, …` toward the midpoint, mirrored from
/// `b` when `grade_upper`; resolves profile structure at scale `h` near the
/// ends of long intervals.
pub fn graded_breaks(a: f64, b: f64, h: f64, grade_upper: bool) -> Vec<f64> {
    let len = b - a;
    let mut lower = vec![a];
    let mut upper = vec![b];
    let reach = if grade_upper { 0.5 * len } else { len };
    let mut d = h;
    while d < 0.75 * reach {
        lower.push(a + d);
        if grade_upper {
            upper.push(b - d);
        }
        d *= 2.0;
    }
    if !grade_upper {
        upper.clear();
        upper.push(b);
    }
    lower.extend(upper.into_iter().rev());
    lower.dedup();
    lower
}

/// Uniform splits of width `width` over `cfg.osc_window` from the lower end,
/// at most [`MAX_OSC_PANELS`] of them.
fn with_oscillation_splits(mut breaks: Vec<f64>, cfg: &QuadConfig, width: f64) -> Vec<f64> {
    if cfg.osc_freq <= 0.0 {
        return breaks;
    }
    let (a, b) = (breaks[0], *breaks.last().unwrap());
    let window = cfg.osc_window.unwrap_or(b - a).min(b - a);
    let n = ((window / width).ceil() as usize).clamp(1, MAX_OSC_PANELS);
    let step = window / n as f64;
    if step > width * (1.0 + 1e-12) {
        // The cap binds; keep the width and shorten the window.
        breaks.extend((1..=n).map(|i| a + width * i as f64));
    } else {
        breaks.extend((1..n).map(|i| a + step * i as f64));
        breaks.push(a + window);
    }
    breaks.retain(|x| *x >= a && *x <= b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// `π/(4N)`: one eighth of the period `2π/N`.
fn fine_osc_width(cfg: &QuadConfig) -> f64 {
    PI / (4.0 * cfg.osc_freq)
}

/// Mass beyond `x` of an integrand decaying like a power: the envelope
/// `max|f|` over `[x, 2x]` and `[2x, 4x]` gives the decay exponent `p` and
/// the tail `g(x)·x/(-p-1)`. Returns `∞` when the decay is not integrable.
fn tail_estimate<F: Fn(f64) -> f64>(f: &F, x: f64) -> (f64, u64) {
    const SAMPLES: usize = 8;
    let envelope = |lo: f64| {
        (0..SAMPLES)
            .map(|i| f(lo * (1.0 + (i as f64 + 0.5) / SAMPLES as f64)).abs())
            .fold(0.0, f64::max)
    };
    let g1 = envelope(x);
    let g2 = envelope(2.0 * x);
    let evals = 2 * SAMPLES as u64;
    if g1 == 0.0 {
        return (0.0, evals);
    }
    if g2 == 0.0 {
        // Faster than any power: bound by the first window alone.
        return (g1 * x, evals);
    }
    let p = (g2 / g1).log2();
    if !(p < -1.0) {
        return (f64::INFINITY, evals);
    }
    (g1 * x / (-p - 1.0), evals)
}

/// Quadruple for a piece at outer `ω₃` and inner variable `t`, together with
/// `ω₄ - ω₁` (which equals `ω₂ - ω₃`). Each parametrization produces `ω₂`
/// and `ω₄ - ω₁` without cancelling differences of large numbers.
#[inline]
fn piece_quad(piece: PieceId, omega1: f64, omega3: f64, t: f64) -> (OmegaQuad, f64) {
    match piece {
        // t = ω₂ ∈ (0, ω₃)
        PieceId::D21 => (
            OmegaQuad {
                omega1,
                omega2: t,
                omega3,
                omega4: omega1 - (omega3 - t),
            },
            t - omega3,
        ),
        // t = ω₄ - ω₃ ∈ (0, ω₁ - ω₃); 2ω₃ - ω₁ is exact for ω₃ ∈ [ω₁/2, ω₁]
        PieceId::D22 => (
            OmegaQuad {
                omega1,
                omega2: (2.0 * omega3 - omega1) + t,
                omega3,
                omega4: omega3 + t,
            },
            t - (omega1 - omega3),
        ),
        // t = ω₄ - ω₁ ∈ (0, ∞)
        PieceId::D3 => (
            OmegaQuad {
                omega1,
                omega2: omega3 + t,
                omega3,
                omega4: omega1 + t,
            },
            t,
        ),
        // t = ω₄ - ω₃ ∈ (0, ∞)
        PieceId::D1 => (
            OmegaQuad {
                omega1,
                omega2: (omega3 - omega1) + omega3 + t,
                omega3,
                omega4: omega3 + t,
            },
            (omega3 - omega1) + t,
        ),
    }
}

/// Inner integration range in the variable used by [`piece_quad`].
fn inner_range(piece: PieceId, omega1: f64, omega3: f64, omega_max: f64) -> (f64, f64) {
    match piece {
        PieceId::D21 => (0.0, omega3),
        PieceId::D22 => (0.0, omega1 - omega3),
        PieceId::D3 => (0.0, omega_max - omega1),
        // Beyond half the cutoff the inner range keeps length ω₃ so the
        // outer tail sees a well-defined integrand.
        PieceId::D1 => (0.0, (omega_max - omega3).max(omega3)),
    }
}

/// Scale of profile structure; sets the geometric grading of breakpoints.
const GRADE_SCALE: f64 = 0.5;

fn breaks_for(lo: f64, hi: f64, semi_infinite: bool, cfg: &QuadConfig) -> Vec<f64> {
    let h = GRADE_SCALE.min(0.25 * (hi - lo));
    let breaks = graded_breaks(lo, hi, h, !semi_infinite);
    // Inside pieces one GK15 panel per period resolves cos(Nω) to well
    // below the tolerances in use.
    with_oscillation_splits(breaks, cfg, 2.0 * PI / cfg.osc_freq.max(f64::MIN_POSITIVE))
}

/// Iterated integral of `integrand` over a piece: outer `ω₃`, inner `ω₄`.
/// D3 and D1 are truncated at `cfg.omega_max_for(ω₁)`; the truncated mass
/// is estimated in `tail_bound` and flagged through `truncation_ok`.
pub fn integrate_piece<F>(piece: PieceId, omega1: f64, integrand: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(&OmegaQuad) -> f64,
{
    integrate_piece_with_offset(piece, omega1, |q, _| integrand(q), cfg)
}

/// As [`integrate_piece`], the integrand also receiving `ω₄ - ω₁`
/// computed without cancellation.
pub fn integrate_piece_with_offset<F>(piece: PieceId, omega1: f64, integrand: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(&OmegaQuad, f64) -> f64,
{
    cfg.validate()?;
    if !(omega1 > 0.0) || !omega1.is_finite() {
        return Err(Error::InvalidDomain(format!("ω₁ must be positive, got {omega1}")));
    }
    let omega_max = cfg.omega_max_for(omega1);
    if piece.is_semi_infinite() && !(omega_max > omega1) {
        return Err(Error::InvalidQuadConfig(format!(
            "omega_max = {omega_max} must exceed ω₁ = {omega1}"
        )));
    }
    let (lo, hi) = piece.outer_bounds(omega1, omega_max);
    let inner_cfg = QuadConfig {
        rel_tol: 0.2 * cfg.rel_tol,
        abs_tol: cfg.abs_tol / (hi - lo),
        ..cfg.clone()
    };
    let evaluations = Cell::new(0u64);
    let inner_converged = Cell::new(true);
    let semi = piece.is_semi_infinite();

    let inner = |omega3: f64| -> Result<QuadResult> {
        let (a, b) = inner_range(piece, omega1, omega3, omega_max);
        if !(b > a) {
            return Ok(QuadResult::zero());
        }
        let g = |t: f64| {
            let (q, offset) = piece_quad(piece, omega1, omega3, t);
            integrand(&q, offset)
        };
        let breaks = breaks_for(a, b, semi, &inner_cfg);
        let h = |t: f64| [g(t), 0.0, 0.0];
        let r = adaptive(&h, &breaks, &inner_cfg, Reference::Magnitude)?;
        let (tail, tail_evals) = if semi { tail_estimate(&g, b) } else { (0.0, 0) };
        Ok(QuadResult {
            value: r.value[0],
            err_estimate: r.err,
            tail_bound: tail,
            evaluations: r.evaluations + tail_evals,
            converged: r.converged,
            truncation_ok: true,
        })
    };

    let failure: Cell<Option<Error>> = Cell::new(None);
    let outer = |omega3: f64| -> Triple {
        match inner(omega3) {
            Ok(r) => {
                evaluations.set(evaluations.get() + r.evaluations);
                if !r.converged {
                    inner_converged.set(false);
                }
                [r.value, r.tail_bound, r.err_estimate]
            }
            Err(e) => {
                failure.set(Some(e));
                [0.0; 3]
            }
        }
    };
    let breaks = breaks_for(lo, hi, piece == PieceId::D1, cfg);
    let r = adaptive(&outer, &breaks, cfg, cfg.reference())?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let mut tail = r.value[1];
    if piece == PieceId::D1 {
        let scalar = |w3: f64| outer(w3)[0];
        let (outer_tail, n) = tail_estimate(&scalar, hi);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        tail += outer_tail;
        evaluations.set(evaluations.get() + n);
    }
    let value = r.value[0];
    let err = r.err + r.value[2].abs();
    let size = match cfg.reference() {
        Reference::Value => value.abs(),
        Reference::Magnitude => r.magnitude,
    };
    let allowed = cfg.abs_tol.max(cfg.rel_tol * size);
    Ok(QuadResult {
        value,
        err_estimate: err,
        tail_bound: tail,
        evaluations: evaluations.get(),
        converged: r.converged && inner_converged.get(),
        truncation_ok: tail <= allowed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn constant_on_unit_interval() {
        let r = integrate_1d(|_| 1.0, 0.0, 1.0, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn inverse_square_root_singularity() {
        let r = integrate_1d(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 2e-9, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn full_periods_of_cosine_vanish() {
        let c = cfg().with_oscillation(100.0, None);
        let r = integrate_1d(|x: f64| (100.0 * x).cos(), 0.0, 2.0 * PI, &c).unwrap();
        assert!(r.value.abs() < 1e-13, "{r:?}");
    }

    #[test]
    fn oscillation_presplit_width() {
        let c = cfg().with_oscillation(32.0, Some(3.0));
        let breaks = with_oscillation_splits(vec![0.0, 10.0, 100.0], &c, fine_osc_width(&c));
        let max_width = PI / (4.0 * 32.0) * (1.0 + 1e-9);
        let inside: Vec<_> = breaks.windows(2).filter(|w| w[1] <= 3.0 + 1e-12).collect();
        assert!(inside.len() >= 30);
        assert!(inside.iter().all(|w| w[1] - w[0] <= max_width));
        assert!(breaks.contains(&10.0) && breaks.contains(&100.0));
    }

    #[test]
    fn depth_exhaustion_is_reported() {
        let c = QuadConfig {
            max_depth: 2,
            ..cfg()
        };
        let r = integrate_1d(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0 - 1e-3, &c).unwrap();
        assert!(!r.converged);
        assert!(r.err_estimate > 0.0);
    }

    #[test]
    fn inverted_interval_rejected() {
        assert!(integrate_1d(|_| 1.0, 1.0, 0.0, &cfg()).is_err());
        assert!(integrate_1d(|_| 1.0, 0.0, 1.0, &cfg().with_rel_tol(0.0)).is_err());
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate_1d(|_| f64::NAN, 0.0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn triangle_areas() {
        let d21 = integrate_piece(PieceId::D21, 2.0, |_| 1.0, &cfg()).unwrap();
        assert!((d21.value - 0.5).abs() < 1e-12);
        let d22 = integrate_piece(PieceId::D22, 2.0, |_| 1.0, &cfg()).unwrap();
        assert!((d22.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separable_exponential_on_d3() {
        let r = integrate_piece(PieceId::D3, 1.0, |q| (-q.omega4).exp(), &cfg()).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-10, "{r:?}");
        assert!(r.truncation_ok);
    }

    #[test]
    fn d1_power_decay_with_tail() {
        // ∫_{1}^∞ ∫_{ω₃}^∞ ω₄^{-4} dω₄ dω₃ = ∫ ω₃^{-3}/3 = 1/6
        let c = cfg().with_omega_max(1e3);
        let r = integrate_piece(PieceId::D1, 1.0, |q| q.omega4.powi(-4), &c).unwrap();
        assert!((r.value - 1.0 / 6.0).abs() < 1e-6, "{r:?}");
        assert!(r.tail_bound > 0.0);
        assert!((r.value + r.tail_bound - 1.0 / 6.0).abs() < (r.tail_bound).max(1e-12));
    }

    #[test]
    fn slow_decay_flags_truncation() {
        let c = cfg().with_omega_max(1e3);
        let r = integrate_piece(PieceId::D3, 1.0, |q| 1.0 / (1.0 + q.omega4), &c).unwrap();
        assert!(r.tail_bound.is_infinite());
        assert!(!r.truncation_ok);
    }

    #[test]
    fn default_cutoff() {
        assert_eq!(cfg().omega_max_for(10.0), 1e6);
        assert_eq!(cfg().omega_max_for(1e4), 1e7);
    }

    #[test]
    fn graded_breaks_are_sorted() {
        let b = graded_breaks(0.0, 1e5, 0.5, true);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 1e5);
        assert!(b.windows(2).all(|w| w[1] > w[0]));
        assert!(b.contains(&0.5) && b.contains(&(1e5 - 0.5)));
        let one_sided = graded_breaks(1.0, 1e6, 0.5, false);
        assert!(one_sided.windows(2).all(|w| w[1] > w[0]));
    }
}
