//! Resonance relation, cross-section, interaction channels and the four
//! integration-domain pieces of the isotropic collision operator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::datum::Profile;
use crate::{Error, Result};

/// `64π³`, the normalization of the isotropic cross-section.
pub const S_NORM: f64 = 64.0 * PI * PI * PI;

/// Interaction exponent `β` and weight exponent `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl KernelParams {
    pub fn new(beta: f64, m: f64) -> Result<Self> {
        let p = Self { beta, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidKernel(format!("β must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.m > 6.0) || !self.m.is_finite() {
            return Err(Error::InvalidKernel(format!("M must exceed 6, got {}", self.m)));
        }
        Ok(())
    }

    /// Oscillatory ill-posedness runs need `M > 10`.
    pub fn require_oscillatory(&self) -> Result<()> {
        self.validate()?;
        if self.m > 10.0 {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!(
                "oscillatory runs need M > 10, got {}",
                self.m
            )))
        }
    }
}

/// Resonant frequency quadruple, `ω₁ + ω₂ = ω₃ + ω₄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaQuad {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub omega4: f64,
}

impl OmegaQuad {
    /// Builds the quadruple with `ω₂ = ω₃ + ω₄ - ω₁`; `None` when that is
    /// negative or any input is.
    pub fn from_resonance(omega1: f64, omega3: f64, omega4: f64) -> Option<Self> {
        if omega1 < 0.0 || omega3 < 0.0 || omega4 < 0.0 {
            return None;
        }
        let omega2 = omega2_of(omega1, omega3, omega4);
        (omega2 >= 0.0).then_some(Self {
            omega1,
            omega2,
            omega3,
            omega4,
        })
    }

    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        match index {
            1 => self.omega1,
            2 => self.omega2,
            3 => self.omega3,
            4 => self.omega4,
            _ => panic!("frequency index {index} out of 1..=4"),
        }
    }
}

/// `ω₃ + ω₄ - ω₁`; negative values lie outside the integration domain.
#[inline]
pub fn omega2_of(omega1: f64, omega3: f64, omega4: f64) -> f64 {
    omega3 + omega4 - omega1
}

/// `64π³ ω₁^{β-1/2} (ω₂ω₃ω₄)^β min{√ω₁, √ω₂, √ω₃}`.
pub fn cross_section(q: &OmegaQuad, p: &KernelParams) -> Result<f64> {
    if q.omega1 == 0.0 && p.beta < 0.5 {
        return Err(Error::SingularPrefactor { beta: p.beta });
    }
    let min = q.omega1.sqrt().min(q.omega2.sqrt()).min(q.omega3.sqrt());
    if min == 0.0 {
        return Ok(0.0);
    }
    Ok(S_NORM
        * q.omega1.powf(p.beta - 0.5)
        * (q.omega2 * q.omega3 * q.omega4).powf(p.beta)
        * min)
}

/// Which triple of the four frequencies a channel multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    C234,
    C134,
    C123,
    C124,
}

impl ChannelId {
    pub const ALL: [ChannelId; 4] = [ChannelId::C234, ChannelId::C134, ChannelId::C123, ChannelId::C124];

    pub fn indices(self) -> [usize; 3] {
        match self {
            ChannelId::C234 => [2, 3, 4],
            ChannelId::C134 => [1, 3, 4],
            ChannelId::C123 => [1, 2, 3],
            ChannelId::C124 => [1, 2, 4],
        }
    }

    /// Gain channels enter the operator with `+`, loss channels with `-`.
    pub fn is_gain(self) -> bool {
        matches!(self, ChannelId::C234 | ChannelId::C134)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::C234 => "C234",
            ChannelId::C134 => "C134",
            ChannelId::C123 => "C123",
            ChannelId::C124 => "C124",
        }
    }
}

/// `k(ω_{j₁}) l(ω_{j₂}) m(ω_{j₃})` for the channel's index triple.
pub fn channel_product(c: ChannelId, k: &Profile, l: &Profile, m: &Profile, q: &OmegaQuad) -> f64 {
    let [i, j, h] = c.indices();
    k.eval(q.get(i)) * l.eval(q.get(j)) * m.eval(q.get(h))
}

/// The four pieces tiling `{0 ≤ ω₃ ≤ ω₄, ω₂ ≥ 0}`.
///
/// | piece | region | `min` factor |
/// |-------|--------|--------------|
/// | D21 | `ω₃ < ω₁/2`, `ω₁ - ω₃ ≤ ω₄ ≤ ω₁` | `√ω₂` |
/// | D22 | `ω₁/2 ≤ ω₃ ≤ ω₄ ≤ ω₁` | `√ω₂` |
/// | D3 | `ω₃ ≤ ω₁ < ω₄` | `√ω₃` |
/// | D1 | `ω₁ < ω₃ ≤ ω₄` | `√ω₁` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PieceId {
    D21,
    D22,
    D3,
    D1,
}

impl PieceId {
    pub const ALL: [PieceId; 4] = [PieceId::D21, PieceId::D22, PieceId::D3, PieceId::D1];

    pub fn name(self) -> &'static str {
        match self {
            PieceId::D21 => "D21",
            PieceId::D22 => "D22",
            PieceId::D3 => "D3",
            PieceId::D1 => "D1",
        }
    }

    /// Index `i` of the `√ω_i` the cross-section contributes on this piece.
    pub fn min_index(self) -> usize {
        match self {
            PieceId::D21 | PieceId::D22 => 2,
            PieceId::D3 => 3,
            PieceId::D1 => 1,
        }
    }

    /// Pieces extending to `ω = ∞`.
    pub fn is_semi_infinite(self) -> bool {
        matches!(self, PieceId::D3 | PieceId::D1)
    }

    /// Half-open classification of `(ω₃, ω₄)`; `None` outside
    /// `{0 ≤ ω₃ ≤ ω₄, ω₂ ≥ 0}`.
    pub fn classify(omega1: f64, omega3: f64, omega4: f64) -> Option<PieceId> {
        if omega3 < 0.0 || omega4 < omega3 || omega2_of(omega1, omega3, omega4) < 0.0 {
            return None;
        }
        Some(if omega3 > omega1 {
            PieceId::D1
        } else if omega4 > omega1 {
            PieceId::D3
        } else if omega3 < 0.5 * omega1 {
            PieceId::D21
        } else {
            PieceId::D22
        })
    }

    /// Range of the outer variable `ω₃`; semi-infinite pieces use `omega_max`.
    pub fn outer_bounds(self, omega1: f64, omega_max: f64) -> (f64, f64) {
        match self {
            PieceId::D21 => (0.0, 0.5 * omega1),
            PieceId::D22 => (0.5 * omega1, omega1),
            PieceId::D3 => (0.0, omega1),
            PieceId::D1 => (omega1, omega_max),
        }
    }

    /// Range of `ω₄` for fixed `ω₃`.
    pub fn inner_bounds(self, omega1: f64, omega3: f64, omega_max: f64) -> (f64, f64) {
        match self {
            PieceId::D21 => (omega1 - omega3, omega1),
            PieceId::D22 => (omega3, omega1),
            PieceId::D3 => (omega1, omega_max),
            PieceId::D1 => (omega3, omega_max),
        }
    }
}

/// Cross-section with the `min` resolved by the piece: `S` on the piece's
/// interior, at the cost of a single square root.
#[inline]
pub fn piece_cross_section(piece: PieceId, q: &OmegaQuad, p: &KernelParams, prefactor: f64) -> f64 {
    let sqrt_factor = q.get(piece.min_index()).sqrt();
    let power = if p.beta == 0.0 {
        1.0
    } else {
        (q.omega2 * q.omega3 * q.omega4).powf(p.beta)
    };
    prefactor * power * sqrt_factor
}

/// `64π³ ω₁^{β-1/2}`.
#[inline]
pub fn prefactor(omega1: f64, p: &KernelParams) -> f64 {
    S_NORM * omega1.powf(p.beta - 0.5)
}
