//! Spectrum profiles `n(ω)`, geometric frequency grids and the weighted
//! sup-norm `sup ⟨ω⟩^{M/2} |n(ω)|`.
//!
//! Frequencies are `ω = |k|²`, so the weight `(1 + |k|⁴)^{M/4}` of the
//! three-dimensional space `⟨k⟩^{-M} L^∞` becomes `⟨ω⟩^{M/2}` with
//! `⟨x⟩ = √(1 + x²)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Japanese bracket `⟨x⟩ = √(1 + x²)`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `⟨ω⟩^{M/2}`, the weight of the space `⟨ω⟩^{-M/2} L^∞`.
#[inline]
pub fn weight(omega: f64, m: f64) -> f64 {
    (1.0 + omega * omega).powf(0.25 * m)
}

/// `⟨ω⟩^{-M/2}`.
#[inline]
fn power_law(omega: f64, m: f64) -> f64 {
    (1.0 + omega * omega).powf(-0.25 * m)
}

/// A spectrum `n(ω)` on `ω ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `⟨ω⟩^{-M/2}`.
    PowerLaw { m: f64 },
    /// `(A + cos(Nω)) ⟨ω⟩^{-M/2}`. Nonnegative only for `A ≥ 1`; `A = 0`
    /// gives the purely oscillating part.
    Oscillatory { a: f64, n: f64, m: f64 },
    /// `1 / (a + bω)`.
    RayleighJeans { a: f64, b: f64 },
    /// Smooth compactly supported bump `amplitude · exp(1 - 1/(1 - x²))`,
    /// `x = (ω - center)/half_width`.
    Bump {
        center: f64,
        half_width: f64,
        amplitude: f64,
    },
    /// `factor · inner(ω)`.
    Scaled { factor: f64, inner: Box<Profile> },
    Gridded(GriddedProfile),
}

impl Profile {
    pub fn power_law(m: f64) -> Self {
        Profile::PowerLaw { m }
    }

    pub fn oscillatory(a: f64, n: f64, m: f64) -> Self {
        Profile::Oscillatory { a, n, m }
    }

    pub fn rayleigh_jeans(a: f64, b: f64) -> Self {
        Profile::RayleighJeans { a, b }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Profile::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn zero() -> Self {
        Profile::power_law(8.0).scaled(0.0)
    }

    /// Checks the parameter constraints of each variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        match self {
            Profile::PowerLaw { m } if !m.is_finite() || *m <= 0.0 => {
                bad(format!("power-law exponent must be positive, got M = {m}"))
            }
            Profile::Oscillatory { a, n, m } => {
                if !a.is_finite() || !n.is_finite() || *n < 0.0 || !m.is_finite() || *m <= 0.0 {
                    bad(format!("bad oscillatory parameters A = {a}, N = {n}, M = {m}"))
                } else {
                    Ok(())
                }
            }
            Profile::RayleighJeans { a, b } if !(*a > 0.0) || !(*b >= 0.0) => {
                bad(format!("Rayleigh–Jeans needs a > 0, b ≥ 0, got a = {a}, b = {b}"))
            }
            Profile::Bump {
                center,
                half_width,
                amplitude,
            } if !(*half_width > 0.0) || !center.is_finite() || !amplitude.is_finite() => bad(
                format!("bad bump center = {center}, half_width = {half_width}, amplitude = {amplitude}"),
            ),
            Profile::Scaled { factor, inner } => {
                if !factor.is_finite() {
                    return bad(format!("non-finite scale factor {factor}"));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    /// Exact evaluation; `Gridded` interpolates log-log inside the grid,
    /// extends as a power law above it and as a constant below it.
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Profile::PowerLaw { m } => power_law(omega, *m),
            Profile::Oscillatory { a, n, m } => (a + (n * omega).cos()) * power_law(omega, *m),
            Profile::RayleighJeans { a, b } => 1.0 / (a + b * omega),
            Profile::Bump {
                center,
                half_width,
                amplitude,
            } => {
                let x = (omega - center) / half_width;
                let s = 1.0 - x * x;
                if s <= 0.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / s).exp()
                }
            }
            Profile::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    0.0
                } else {
                    factor * inner.eval(omega)
                }
            }
            Profile::Gridded(g) => g.eval(omega),
        }
    }

    /// `n(x) - n(y)`, evaluated without catastrophic cancellation where the
    /// closed form allows it.
    pub fn diff(&self, x: f64, y: f64) -> f64 {
        self.diff_exact(x, y, x - y)
    }

    /// As [`Profile::diff`] with the separation `dx = x - y` supplied by the
    /// caller, who may know it more accurately than `x - y` in floating point.
    pub fn diff_exact(&self, x: f64, y: f64, dx: f64) -> f64 {
        match self {
            Profile::PowerLaw { m } => power_law_diff(x, y, dx, *m),
            Profile::Oscillatory { a, n, m } => {
                // cos(Nx) - cos(Ny) = -2 sin(N(x+y)/2) sin(N dx/2)
                let cos_diff = -2.0 * (0.5 * n * (x + y)).sin() * (0.5 * n * dx).sin();
                let w_diff = power_law_diff(x, y, dx, *m);
                a * w_diff + (n * x).cos() * w_diff + power_law(y, *m) * cos_diff
            }
            Profile::RayleighJeans { a, b } => -b * dx / ((a + b * x) * (a + b * y)),
            Profile::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    0.0
                } else {
                    factor * inner.diff_exact(x, y, dx)
                }
            }
            Profile::Gridded(g) => g.diff_exact(x, y, dx),
            _ => self.eval(x) - self.eval(y),
        }
    }

    /// Oscillation frequency `N` of the profile, `0` when smooth.
    pub fn osc_freq(&self) -> f64 {
        match self {
            Profile::Oscillatory { n, .. } => *n,
            Profile::Scaled { inner, .. } => inner.osc_freq(),
            _ => 0.0,
        }
    }

    /// Length `L` such that `|n(ω)| ≤ rel · sup|n|` (up to the oscillation
    /// amplitude) for `ω ≥ L`, when the profile has a decaying envelope.
    pub fn decay_window(&self, rel: f64) -> Option<f64> {
        match self {
            Profile::PowerLaw { m } | Profile::Oscillatory { m, .. } => {
                let w = rel.powf(-2.0 / m);
                Some((w * w - 1.0).max(0.0).sqrt().max(1.0))
            }
            Profile::Bump {
                center, half_width, ..
            } => Some(center + half_width),
            Profile::Scaled { inner, .. } => inner.decay_window(rel),
            _ => None,
        }
    }

    /// Smooth nonnegative majorant: oscillations replaced by their amplitude.
    pub fn envelope(&self) -> Profile {
        match self {
            Profile::Oscillatory { a, m, .. } => Profile::power_law(*m).scaled(a.abs() + 1.0),
            Profile::Bump {
                center,
                half_width,
                amplitude,
            } => Profile::Bump {
                center: *center,
                half_width: *half_width,
                amplitude: amplitude.abs(),
            },
            Profile::Scaled { factor, inner } => inner.envelope().scaled(factor.abs()),
            other => other.clone(),
        }
    }

    /// Whether the profile is pointwise nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Profile::PowerLaw { .. } | Profile::RayleighJeans { .. } => true,
            Profile::Oscillatory { a, .. } => *a >= 1.0,
            Profile::Bump { amplitude, .. } => *amplitude >= 0.0,
            Profile::Scaled { factor, inner } => *factor == 0.0 || (*factor > 0.0 && inner.is_nonnegative()),
            Profile::Gridded(g) => g.values.iter().all(|v| *v >= 0.0),
        }
    }
}

/// `⟨x⟩^{-M/2} - ⟨y⟩^{-M/2}` through `expm1`/`ln_1p`.
/// Only nearby arguments need this; far apart the plain difference is exact
/// enough and avoids overflow of the exponential.
fn power_law_diff(x: f64, y: f64, dx: f64, m: f64) -> f64 {
    let rel = dx * (x + y) / (1.0 + y * y);
    if rel.abs() > 0.5 {
        return power_law(x, m) - power_law(y, m);
    }
    power_law(y, m) * (-0.25 * m * rel.ln_1p()).exp_m1()
}

/// Geometric node set `{ω_min r^i}` ending exactly at `ω_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points_per_decade: u32,
}

impl Default for GeometricGrid {
    fn default() -> Self {
        Self {
            omega_min: 1e-2,
            omega_max: 1e6,
            points_per_decade: 16,
        }
    }
}

impl GeometricGrid {
    pub fn new(omega_min: f64, omega_max: f64, points_per_decade: u32) -> Result<Self> {
        let grid = Self {
            omega_min,
            omega_max,
            points_per_decade,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0) || !(self.omega_max > self.omega_min) || !self.omega_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need 0 < ω_min < ω_max < ∞, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::InvalidGrid("points_per_decade must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of intervals between nodes.
    pub fn intervals(&self) -> usize {
        let decades = (self.omega_max / self.omega_min).log10();
        ((decades * self.points_per_decade as f64) - 1e-9).ceil().max(1.0) as usize
    }

    /// Constant ratio between consecutive nodes.
    pub fn ratio(&self) -> f64 {
        (self.omega_max / self.omega_min).powf(1.0 / self.intervals() as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.intervals();
        let log_ratio = (self.omega_max / self.omega_min).ln() / n as f64;
        let mut nodes: Vec<f64> = (0..=n)
            .map(|i| self.omega_min * (i as f64 * log_ratio).exp())
            .collect();
        nodes[0] = self.omega_min;
        nodes[n] = self.omega_max;
        nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GriddedRepr {
    grid: GeometricGrid,
    values: Vec<f64>,
    tail_exponent: f64,
}

/// Values on a [`GeometricGrid`], interpolated by a cubic spline in
/// `ln ω`, with a power-law tail `n(ω_max) (ω/ω_max)^{tail_exponent}`
/// above the grid and a constant below it. The spline acts on `ln n` when
/// every value is positive and on `n` otherwise; its end slopes match the
/// two extensions, so the interpolant is C¹ everywhere and C² inside.
///
/// Smoothness matters more than it seems: operator quadratures over a
/// merely continuous interpolant refine at every node kink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GriddedRepr", into = "GriddedRepr")]
pub struct GriddedProfile {
    grid: GeometricGrid,
    values: Vec<f64>,
    tail_exponent: f64,
    nodes: Vec<f64>,
    log_min: f64,
    log_ratio: f64,
    log_values: bool,
    /// Spline ordinates (`ln n` or `n`).
    ys: Vec<f64>,
    /// Second derivatives of the spline with respect to `ln ω` at the nodes.
    curvature: Vec<f64>,
}

/// Clamped cubic spline second derivatives on uniform spacing `h`.
fn clamped_spline(ys: &[f64], h: f64, slope_lo: f64, slope_hi: f64) -> Vec<f64> {
    let n = ys.len();
    if n < 2 {
        return vec![0.0; n];
    }
    // Tridiagonal system: sub/super diagonal 1, main 4 inside and 2 at the ends.
    let mut diag = vec![4.0; n];
    diag[0] = 2.0;
    diag[n - 1] = 2.0;
    let mut rhs = vec![0.0; n];
    rhs[0] = 6.0 / h * ((ys[1] - ys[0]) / h - slope_lo);
    rhs[n - 1] = 6.0 / h * (slope_hi - (ys[n - 1] - ys[n - 2]) / h);
    for i in 1..n - 1 {
        rhs[i] = 6.0 / (h * h) * (ys[i + 1] - 2.0 * ys[i] + ys[i - 1]);
    }
    for i in 1..n {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - m[i + 1]) / diag[i];
    }
    m
}

impl TryFrom<GriddedRepr> for GriddedProfile {
    type Error = Error;

    fn try_from(r: GriddedRepr) -> Result<Self> {
        GriddedProfile::new(r.grid, r.values, r.tail_exponent)
    }
}

impl From<GriddedProfile> for GriddedRepr {
    fn from(g: GriddedProfile) -> Self {
        GriddedRepr {
            grid: g.grid,
            values: g.values,
            tail_exponent: g.tail_exponent,
        }
    }
}

impl GriddedProfile {
    pub fn new(grid: GeometricGrid, values: Vec<f64>, tail_exponent: f64) -> Result<Self> {
        grid.validate()?;
        let nodes = grid.nodes();
        if values.len() != nodes.len() {
            return Err(Error::InvalidProfile(format!(
                "grid has {} nodes but {} values were given",
                nodes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || !tail_exponent.is_finite() {
            return Err(Error::InvalidProfile("non-finite gridded data".into()));
        }
        let log_min = grid.omega_min.ln();
        let log_ratio = (grid.omega_max / grid.omega_min).ln() / (nodes.len() - 1) as f64;
        let log_values = values.iter().all(|&v| v > 0.0);
        let (ys, slope_hi): (Vec<f64>, f64) = if log_values {
            (values.iter().map(|v| v.ln()).collect(), tail_exponent)
        } else {
            (values.clone(), tail_exponent * values[values.len() - 1])
        };
        let curvature = clamped_spline(&ys, log_ratio, 0.0, slope_hi);
        Ok(Self {
            grid,
            values,
            tail_exponent,
            nodes,
            log_min,
            log_ratio,
            log_values,
            ys,
            curvature,
        })
    }

    /// Samples `profile` on the grid with an explicit tail exponent.
    pub fn sample(profile: &Profile, grid: &GeometricGrid, tail_exponent: f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&w| profile.eval(w)).collect();
        Self::new(grid.clone(), values, tail_exponent)
    }

    pub fn grid(&self) -> &GeometricGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    /// Spline region of `ω`: `None` below the grid, `Some(last)` above it,
    /// else the segment index.
    fn region(&self, omega: f64) -> Option<usize> {
        let last = self.nodes.len() - 1;
        if omega < self.nodes[0] {
            None
        } else if omega >= self.nodes[last] {
            Some(last)
        } else {
            let pos = (omega.ln() - self.log_min) / self.log_ratio;
            Some((pos.floor().max(0.0) as usize).min(last - 1))
        }
    }

    /// `Y(a) - Y(b)` of the spline ordinate for `a, b` in the closure of
    /// one region, given `ab = a - b`.
    fn region_diff(&self, region: Option<usize>, a: f64, b: f64, ab: f64) -> f64 {
        let last = self.nodes.len() - 1;
        match region {
            None => 0.0,
            Some(i) if i == last => self.tail_exponent * (ab / b).ln_1p(),
            Some(i) => {
                let h2 = self.log_ratio * self.log_ratio / 6.0;
                let (mi, mj) = (self.curvature[i], self.curvature[i + 1]);
                let c1 = (self.ys[i + 1] - self.ys[i]) - h2 * (2.0 * mi + mj);
                let c2 = 3.0 * h2 * mi;
                let c3 = h2 * (mj - mi);
                let ta = (a.ln() - self.log_min) / self.log_ratio - i as f64;
                let tb = (b.ln() - self.log_min) / self.log_ratio - i as f64;
                let dt = (ab / b).ln_1p() / self.log_ratio;
                dt * (c1 + c2 * (ta + tb) + c3 * (ta * ta + ta * tb + tb * tb))
            }
        }
    }

    /// `n(x) - n(y)` given `dx = x - y`, resolving nearby points by
    /// differencing the spline polynomial segment by segment.
    pub fn diff_exact(&self, x: f64, y: f64, dx: f64) -> f64 {
        if dx == 0.0 {
            return 0.0;
        }
        if !self.log_values || dx.abs() > 0.1 * x.min(y) || x.min(y) <= 0.0 {
            return self.eval(x) - self.eval(y);
        }
        let (lo, hi, sign) = if dx > 0.0 { (y, x, 1.0) } else { (x, y, -1.0) };
        let span = dx.abs();
        let mut total = 0.0;
        let mut cur = lo;
        let mut region = self.region(cur);
        let end = self.region(hi);
        while region != end {
            let (boundary, next) = match region {
                None => (self.nodes[0], Some(0)),
                Some(i) => (self.nodes[i + 1], Some(i + 1)),
            };
            total += self.region_diff(region, boundary, cur, boundary - cur);
            cur = boundary;
            region = next;
        }
        let rest = if cur == lo { span } else { hi - cur };
        total += self.region_diff(region, hi, cur, rest);
        let base = if sign > 0.0 { self.eval(y) } else { self.eval(x) };
        sign * base * total.exp_m1()
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let last = self.nodes.len() - 1;
        if omega <= self.nodes[0] {
            return self.values[0];
        }
        if omega >= self.nodes[last] {
            return self.values[last] * (omega / self.nodes[last]).powf(self.tail_exponent);
        }
        let log_omega = omega.ln();
        let pos = (log_omega - self.log_min) / self.log_ratio;
        let i = (pos.floor() as usize).min(last - 1);
        let t = (pos - i as f64).clamp(0.0, 1.0);
        let s = 1.0 - t;
        let h2 = self.log_ratio * self.log_ratio / 6.0;
        let y = s * self.ys[i]
            + t * self.ys[i + 1]
            + h2 * ((s * s * s - s) * self.curvature[i] + (t * t * t - t) * self.curvature[i + 1]);
        if self.log_values {
            y.exp()
        } else {
            y
        }
    }
}

/// `sup` over a node set of `⟨ω⟩^{M/2} |n(ω)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub m: f64,
    pub value: f64,
}

pub fn weighted_sup_norm(profile: &Profile, m: f64, grid: &GeometricGrid) -> WeightedNorm {
    let nodes = grid.nodes();
    WeightedNorm {
        m,
        value: weighted_sup(&nodes, |w| profile.eval(w), m),
    }
}

/// Weighted sup of an arbitrary function over `nodes`.
pub fn weighted_sup(nodes: &[f64], f: impl Fn(f64) -> f64, m: f64) -> f64 {
    nodes
        .iter()
        .map(|&w| weight(w, m) * f(w).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn power_law_at_origin_is_one() {
        assert_eq!(Profile::power_law(8.0).eval(0.0), 1.0);
    }

    #[test]
    fn oscillatory_peaks() {
        let p = Profile::oscillatory(5.0, 32.0, 12.0);
        for b in [1.0, 7.0, 160.0] {
            let w = 2.0 * PI * b / 32.0;
            let expected = 6.0 * bracket(w).powf(-6.0);
            assert!((p.eval(w) / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rayleigh_jeans_value() {
        assert!((Profile::rayleigh_jeans(1.0, 2.0).eval(3.0) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn diff_matches_subtraction_away_from_cancellation() {
        let profiles = [
            Profile::power_law(8.0),
            Profile::oscillatory(5.0, 3.0, 12.0),
            Profile::rayleigh_jeans(1.0, 0.5),
            Profile::power_law(12.0).scaled(3.0),
        ];
        for p in &profiles {
            for (x, y) in [(0.3, 2.0), (5.0, 1.0), (10.0, 10.5)] {
                let d = p.diff(x, y);
                let naive = p.eval(x) - p.eval(y);
                assert!((d - naive).abs() <= 1e-12 * naive.abs().max(1e-300), "{p:?} {x} {y}");
            }
        }
    }

    #[test]
    fn diff_resolves_nearby_points() {
        // n(ω₁ + δ) - n(ω₁) at large ω₁: relative accuracy survives.
        let p = Profile::power_law(12.0);
        // δ = 2⁻¹⁰ keeps ω₁ + δ exact
        let (w, d) = (1e5, 0.0009765625);
        let reference = p.eval(w) * (-3.0 * ((2.0 * w * d + d * d) / (1.0 + w * w)).ln_1p()).exp_m1();
        let got = p.diff(w + d, w);
        assert!((got / reference - 1.0).abs() < 1e-12);
        let naive = p.eval(w + d) - p.eval(w);
        assert!((naive / reference - 1.0).abs() > 1e-10);
    }

    #[test]
    fn weighted_norms() {
        let grid = GeometricGrid::default();
        let pl = weighted_sup_norm(&Profile::power_law(8.0), 8.0, &grid);
        assert!((pl.value - 1.0).abs() < 1e-12);

        // 5 + cos attains close to 6 on a fine grid.
        let fine = GeometricGrid::new(1e-2, 1e2, 2000).unwrap();
        let osc = weighted_sup_norm(&Profile::oscillatory(5.0, 32.0, 12.0), 12.0, &fine);
        assert!(osc.value <= 6.0 + 1e-12 && osc.value > 5.99);

        // Heavier weight on [1, 1e4]: ⟨ω⟩^5 ⟨ω⟩^-4 at the top node.
        let top = GeometricGrid::new(1.0, 1e4, 16).unwrap();
        let heavy = weighted_sup_norm(&Profile::power_law(8.0), 10.0, &top);
        assert!((heavy.value / bracket(1e4) - 1.0).abs() < 1e-12);
        assert!((heavy.value / 1e4 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn grid_nodes_are_geometric() {
        let grid = GeometricGrid::new(1e-2, 1e6, 16).unwrap();
        let nodes = grid.nodes();
        assert_eq!(nodes.len(), 8 * 16 + 1);
        assert_eq!(*nodes.last().unwrap(), 1e6);
        let r = grid.ratio();
        for w in nodes.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] / w[0] / r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gridded_interpolation_tracks_power_law() {
        let m = 8.0;
        let p = Profile::power_law(m);
        for (ppd, tol) in [(8, 1e-2), (16, 1e-3), (64, 1e-5)] {
            let grid = GeometricGrid::new(1e-2, 1e6, ppd).unwrap();
            let g = GriddedProfile::sample(&p, &grid, -m / 2.0).unwrap();
            let mut w = 1.3e-2;
            while w < 1e8 {
                let rel = (g.eval(w) / p.eval(w) - 1.0).abs();
                assert!(rel < tol, "ppd {ppd}, ω = {w}: rel err {rel}");
                w *= 1.037;
            }
            for (x, v) in grid.nodes().iter().zip(g.values()) {
                assert!((g.eval(*x) / v - 1.0).abs() < 1e-13);
            }
            // constant extension below the grid
            assert_eq!(g.eval(1e-5), g.values()[0]);
        }
    }

    #[test]
    fn gridded_signed_values_use_value_space() {
        let grid = GeometricGrid::new(1.0, 100.0, 4).unwrap();
        let values: Vec<f64> = grid.nodes().iter().map(|w| 3.0 - w.ln()).collect();
        let g = GriddedProfile::new(grid.clone(), values.clone(), -1.0).unwrap();
        for (x, v) in grid.nodes().iter().zip(&values) {
            assert!((g.eval(*x) - v).abs() < 1e-12);
        }
        // continuous into the tail
        let top = values[values.len() - 1];
        assert!((g.eval(100.0 * (1.0 + 1e-9)) - top).abs() < 1e-8);
        assert!((g.eval(100.0 * (1.0 - 1e-9)) - top).abs() < 1e-8);
    }

    #[test]
    fn gridded_diff_resolves_nearby_points() {
        let grid = GeometricGrid::new(1e-2, 1e4, 8).unwrap();
        let g = GriddedProfile::sample(&Profile::power_law(8.0), &grid, -4.0).unwrap();
        let mut x = 5e-3;
        while x < 1e5 {
            for rel in [1e-13, 1e-7, -1e-7, 1e-3, -3e-2, 0.05] {
                let dx = rel * x;
                let y = x + dx;
                let d = g.diff_exact(y, x, dx);
                // central-difference oracle on the spline itself
                let e = 1e-6 * x;
                let slope = (g.eval(x + e) - g.eval(x - e)) / (2.0 * e);
                let naive = g.eval(y) - g.eval(x);
                if rel.abs() < 1e-6 {
                    assert!((d - slope * dx).abs() <= 1e-4 * (slope * dx).abs(), "x {x} rel {rel}: {d} vs {}", slope * dx);
                } else {
                    assert!((d - naive).abs() <= 1e-9 * naive.abs() + 1e-14 * g.eval(x), "x {x} rel {rel}");
                }
            }
            x *= 1.618;
        }
        // exactly at nodes, stepping across them
        for &w in grid.nodes().iter().skip(1) {
            for dx in [-1e-9 * w, 1e-9 * w] {
                let d = g.diff_exact(w + dx, w, dx);
                let naive = g.eval(w + 1e-3 * w) - g.eval(w - 1e-3 * w);
                let approx = naive / (2e-3 * w) * dx;
                assert!((d / approx - 1.0).abs() < 1e-2, "node {w}");
            }
        }
    }

    #[test]
    fn gridded_rejects_length_mismatch() {
        let grid = GeometricGrid::new(1.0, 10.0, 4).unwrap();
        assert!(GriddedProfile::new(grid, vec![1.0; 3], -1.0).is_err());
    }

    #[test]
    fn gridded_serde_round_trip() {
        let grid = GeometricGrid::new(1.0, 100.0, 4).unwrap();
        let g = Profile::Gridded(GriddedProfile::sample(&Profile::power_law(8.0), &grid, -4.0).unwrap());
        let s = serde_json::to_string(&g).unwrap();
        let back: Profile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn bump_is_compactly_supported() {
        let b = Profile::Bump {
            center: 2.0,
            half_width: 1.0,
            amplitude: 1.0,
        };
        assert_eq!(b.eval(0.5), 0.0);
        assert_eq!(b.eval(3.0), 0.0);
        assert!((b.eval(2.0) - 1.0).abs() < 1e-15);
    }
}
