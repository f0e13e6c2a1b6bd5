//! Geometry of the collision sphere in 3D: the parametrization
//! `k₁* = V + (|u|/2)σ`, `k₂* = V - (|u|/2)σ` of outgoing momenta, the
//! angular average `F(k₁, k₂) = ∫_{S²} ⟨k₁*⟩⁻³ dσ` and the integral
//! `I(k₁, k₂) = ∫_{S²} |k₁*|^{2β} ⟨k₂*⟩^{2β-M} dσ`.
//!
//! Every integrand depends on `σ` only through `z = V̂·σ`, since
//! `|k₁*|² = E/2 + uV z` and `|k₂*|² = E/2 - uV z`. Sphere integrals are
//! therefore `2π ∫_{-1}^{1} (…) dz`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analysis::{log_spaced, scaling_fit, ScalingFit};
use crate::kernel::KernelParams;
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Reduced variables of an incoming pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub k1: Vec3,
    pub k2: Vec3,
    /// `|k₁|² + |k₂|²`
    pub e: f64,
    /// `(k₁ + k₂)/2`
    pub v: Vec3,
    /// `k₁ - k₂`
    pub u: Vec3,
    /// `|u| |V|`
    pub uv: f64,
}

impl PairGeometry {
    pub fn new(k1: Vec3, k2: Vec3) -> Self {
        let v = 0.5 * (k1 + k2);
        let u = k1 - k2;
        Self {
            k1,
            k2,
            e: k1.norm_squared() + k2.norm_squared(),
            v,
            u,
            uv: u.norm() * v.norm(),
        }
    }

    /// `E/2 - uV = (k₁·k₂)² / (E/2 + uV)`, without cancellation.
    pub fn half_e_minus_uv(&self) -> f64 {
        let s = 0.5 * self.e + self.uv;
        if s == 0.0 {
            0.0
        } else {
            self.k1.dot(&self.k2).powi(2) / s
        }
    }

    /// `z = V̂·σ`; `None` when `V = 0`.
    pub fn z(&self, sigma: &Vec3) -> Option<f64> {
        let n = self.v.norm();
        (n > 0.0).then(|| self.v.dot(sigma) / n)
    }
}

/// Outgoing momenta for a unit vector `σ`; they conserve `k₁ + k₂` and
/// `|k₁|² + |k₂|²`.
pub fn kstar(g: &PairGeometry, sigma: &Vec3) -> (Vec3, Vec3) {
    let half = 0.5 * g.u.norm();
    (g.v + half * sigma, g.v - half * sigma)
}

/// `F` in closed form, `8π / (√a √b (√a + √b))` with `a = 1 + E/2 - uV`
/// and `b = 1 + E/2 + uV`. This equals
/// `(4π/uV)(a^{-1/2} - b^{-1/2})` and tends to `4π (1 + E/2)^{-3/2}` as
/// `uV → 0` with no switch needed.
pub fn f_closed(g: &PairGeometry) -> f64 {
    let a = 1.0 + g.half_e_minus_uv();
    let b = 1.0 + 0.5 * g.e + g.uv;
    let (sa, sb) = (a.sqrt(), b.sqrt());
    8.0 * PI / (sa * sb * (sa + sb))
}

/// Breakpoints on `[-1, 1]` graded toward both ends down to the scale
/// `1/(1 + uV)` of the peaks at `z = ±1`.
fn z_breaks(uv: f64) -> Vec<f64> {
    let mut out = vec![-1.0, 0.0, 1.0];
    let mut d = 0.5;
    let smallest = 0.5 / (1.0 + uv);
    while d > smallest {
        out.push(-1.0 + d);
        out.push(1.0 - d);
        d *= 0.5;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `2π ∫_{-1}^{1} h(z) dz`, or `4π h(0)` when `uV = 0`.
fn sphere_average<H: Fn(f64) -> f64>(g: &PairGeometry, h: H, cfg: &QuadConfig) -> Result<f64> {
    if g.uv == 0.0 {
        return Ok(4.0 * PI * h(0.0));
    }
    let r = integrate_with_breaks(h, &z_breaks(g.uv), &cfg.clone().with_abs_tol(0.0))?;
    if !r.converged {
        return Err(Error::Diagnostic(format!("sphere quadrature did not converge: {r:?}")));
    }
    Ok(2.0 * PI * r.value)
}

/// `|k₁*|² = E/2 + uV z`
fn k1star_sq(g: &PairGeometry, z: f64) -> f64 {
    0.5 * g.e + g.uv * z
}

/// `|k₂*|² = E/2 - uV z`, written as `(E/2 - uV) + uV (1 - z)` so it stays
/// nonnegative and accurate near `z = 1`.
fn k2star_sq(g: &PairGeometry, z: f64) -> f64 {
    g.half_e_minus_uv() + g.uv * (1.0 - z)
}

/// `F = ∫ ⟨k₁*⟩⁻³ dσ` by quadrature in `z`.
pub fn f_quad(g: &PairGeometry, cfg: &QuadConfig) -> Result<f64> {
    sphere_average(g, |z| (1.0 + k1star_sq(g, z)).powf(-1.5), cfg)
}

/// `F₁ = ∫ ⟨k₂*⟩⁻³ dσ` by quadrature in `z`; equal to `F` under `σ → -σ`.
pub fn f1_quad(g: &PairGeometry, cfg: &QuadConfig) -> Result<f64> {
    sphere_average(g, |z| (1.0 + k2star_sq(g, z)).powf(-1.5), cfg)
}

/// `I = 2π ∫_{-1}^{1} (E/2 - uV z)^β (1 + E/2 + uV z)^{β - M/2} dz`.
pub fn pair_integral(g: &PairGeometry, p: &KernelParams, cfg: &QuadConfig) -> Result<f64> {
    p.validate()?;
    if !(0.5 * p.m - p.beta - 1.0 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "need M/2 - β - 1 > 0, got M = {}, β = {}",
            p.m, p.beta
        )));
    }
    let decay = p.beta - 0.5 * p.m;
    sphere_average(
        g,
        |z| k2star_sq(g, z).powf(p.beta) * (1.0 + k1star_sq(g, z)).powf(decay),
        cfg,
    )
}

/// One battery entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingSample {
    pub k1: f64,
    pub k2: f64,
    /// Angle between `k₁` and `k₂`.
    pub angle: f64,
    pub e: f64,
    pub f_closed: f64,
    pub f_quad: f64,
    pub f1_quad: f64,
    pub rel_dev: f64,
    /// `F · (1 + E)`
    pub weighted: f64,
}

/// Summary of [`averaging_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingBound {
    /// `sup F·(1 + |k₁|² + |k₂|²)` over the samples.
    pub sup_weighted: f64,
    pub argmax: usize,
    /// Largest `|F_quad/F_closed - 1|`.
    pub max_rel_dev: f64,
    /// Largest `|F₁/F - 1|`.
    pub max_symmetry_dev: f64,
    pub samples: Vec<AveragingSample>,
}

/// Relative direction of `k₂` to `k₁` in the fixed battery configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    Collinear,
    Orthogonal,
    Antipodal,
}

impl Configuration {
    pub const ALL: [Configuration; 3] = [Configuration::Collinear, Configuration::Orthogonal, Configuration::Antipodal];

    /// Pair with `|k₁| = a` along `x̂` and `|k₂| = b`.
    pub fn pair(self, a: f64, b: f64) -> PairGeometry {
        let k2 = match self {
            Configuration::Collinear => Vec3::new(b, 0.0, 0.0),
            Configuration::Orthogonal => Vec3::new(0.0, b, 0.0),
            Configuration::Antipodal => Vec3::new(-b, 0.0, 0.0),
        };
        PairGeometry::new(Vec3::new(a, 0.0, 0.0), k2)
    }
}

pub fn averaging_bound_check(pairs: &[PairGeometry], cfg: &QuadConfig) -> Result<AveragingBound> {
    if pairs.is_empty() {
        return Err(Error::OutOfRange("empty battery".into()));
    }
    let samples: Vec<AveragingSample> = pairs
        .iter()
        .map(|g| {
            let closed = f_closed(g);
            let quad = f_quad(g, cfg)?;
            let f1 = f1_quad(g, cfg)?;
            let (n1, n2) = (g.k1.norm(), g.k2.norm());
            let angle = if n1 > 0.0 && n2 > 0.0 {
                (g.k1.dot(&g.k2) / (n1 * n2)).clamp(-1.0, 1.0).acos()
            } else {
                0.0
            };
            Ok(AveragingSample {
                k1: n1,
                k2: n2,
                angle,
                e: g.e,
                f_closed: closed,
                f_quad: quad,
                f1_quad: f1,
                rel_dev: (quad / closed - 1.0).abs(),
                weighted: quad * (1.0 + g.e),
            })
        })
        .collect::<Result<_>>()?;
    let (argmax, sup_weighted) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.weighted))
        .fold((0, f64::MIN), |best, x| if x.1 > best.1 { x } else { best });
    Ok(AveragingBound {
        sup_weighted,
        argmax,
        max_rel_dev: samples.iter().map(|s| s.rel_dev).fold(0.0, f64::max),
        max_symmetry_dev: samples.iter().map(|s| (s.f1_quad / s.f_quad - 1.0).abs()).fold(0.0, f64::max),
        samples,
    })
}

/// Pairs with `|k₁|, |k₂| ∈ {0} ∪` log-spaced `[10⁻², 10³]` at
/// `points_per_decade`, in the collinear, orthogonal and antipodal
/// configurations, plus `random` pairs of random direction and log-uniform
/// magnitudes from `seed`.
pub fn battery(points_per_decade: usize, random: usize, seed: u64) -> Vec<PairGeometry> {
    let mut mags = vec![0.0];
    mags.extend(log_spaced(1e-2, 1e3, 5 * points_per_decade + 1));
    let mut out = Vec::new();
    for &a in &mags {
        for &b in &mags {
            for c in Configuration::ALL {
                out.push(c.pair(a, b));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push(PairGeometry::new(random_vector(&mut rng, 1e3), random_vector(&mut rng, 1e3)));
    }
    out
}

/// Uniform direction, magnitude log-uniform in `[10⁻², max]`.
pub fn random_vector<R: Rng>(rng: &mut R, max: f64) -> Vec3 {
    random_unit(rng) * 10f64.powf(rng.gen_range(-2.0..=max.log10()))
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Log-slope of `sup F·(1+E)` against `E` on `[e_lo, e_hi]`, the sup taken
/// over pairs on the energy shell with `|k₂|/|k₁| = tan θ` for `shells`
/// values of `θ ∈ [0, π/2]` and each [`Configuration`].
pub fn averaging_slope(e_lo: f64, e_hi: f64, n: usize, shells: usize) -> Result<ScalingFit> {
    let samples: Vec<(f64, f64)> = log_spaced(e_lo, e_hi, n)
        .into_iter()
        .map(|e| {
            let r = e.sqrt();
            let mut sup = 0.0f64;
            for i in 0..shells {
                let theta = 0.5 * PI * i as f64 / (shells - 1).max(1) as f64;
                for c in Configuration::ALL {
                    let g = c.pair(r * theta.cos(), r * theta.sin());
                    sup = sup.max(f_closed(&g) * (1.0 + g.e));
                }
            }
            (e, sup)
        })
        .collect();
    scaling_fit(&samples)
}

/// `I(k₁, k₂) / |k₁|^{2β-2}` for `|k₁|` in `k1_norms` along `direction`,
/// `k₂` fixed.
pub fn pair_integral_ratio_curve(
    p: &KernelParams,
    k2: Vec3,
    direction: Vec3,
    k1_norms: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<(f64, f64)>> {
    let dir = direction.normalize();
    k1_norms
        .iter()
        .map(|&r| {
            let g = PairGeometry::new(dir * r, k2);
            Ok((r, pair_integral(&g, p, cfg)? / r.powf(2.0 * p.beta - 2.0)))
        })
        .collect()
}
