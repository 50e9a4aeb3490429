//! Entropy and KL-divergence based privacy risk. All quantities are in bits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::Profile;

/// KL divergence of an apparent profile from the population profile, in
/// bits. May be `+inf` when the apparent profile puts mass where the
/// population has none.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct PrivacyRisk(f64);

impl PrivacyRisk {
    pub fn new(bits: f64) -> Result<Self> {
        if bits.is_nan() || bits < 0.0 {
            return Err(Error::Validation(format!("privacy risk must be >= 0, got {}", bits)));
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

/// Shannon entropy with `0 log 0 = 0`.
pub fn entropy(p: &Profile) -> f64 {
    -p.components()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// `D(p || q) = sum_i p_i log2(p_i / q_i)`; terms with `p_i = 0` vanish and a
/// term with `p_i > 0 = q_i` makes the divergence infinite.
pub fn kl_divergence(p: &Profile, q: &Profile) -> Result<f64> {
    p.ensure_compatible(q)?;
    Ok(kl_bits(p.components(), q.components()))
}

pub(crate) fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).log2();
        }
    }
    // rounding can push a near-zero divergence slightly negative
    total.max(0.0)
}

pub fn privacy_risk(apparent: &Profile, population: &Profile) -> Result<PrivacyRisk> {
    kl_divergence(apparent, population).map(PrivacyRisk)
}

/// Fractional reduction `(initial - final) / initial`; negative when the
/// final risk is larger.
pub fn risk_reduction(initial: PrivacyRisk, final_risk: PrivacyRisk) -> Result<f64> {
    if !(initial.0.is_finite() && initial.0 > 0.0) {
        return Err(Error::UndefinedReduction(initial.0));
    }
    Ok((initial.0 - final_risk.0) / initial.0)
}
