//! Classical entropic quantities in bits: Shannon and Rényi entropies,
//! relative entropy, total variation, binary forms, and a grid-search check
//! of the variational characterization of Rényi entropy.
//!
//! All logarithms are base 2 and `0 * log 0` is taken as 0 throughout.

use crate::error::{Error, Result};
use crate::tensor::{Bipartition, MultipartiteState};

/// Weights at or below this threshold are treated as zero when counting
/// support, so floating-point dust cannot inflate max-entropy.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Tolerance for a weight vector to count as normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Finite nonnegative weight vector. Normalization is tracked so that
/// entropy functions can insist on probability distributions while
/// subnormalized vectors remain representable.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
    normalized: bool,
}

impl Distribution {
    /// Builds a probability distribution. The weights must be nonnegative,
    /// finite, and sum to 1 within `NORMALIZATION_TOLERANCE`.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let d = Self::subnormalized_unchecked_sum(weights)?;
        if !d.normalized {
            return Err(Error::NotNormalized(d.sum()));
        }
        Ok(d)
    }

    /// Builds a weight vector whose total mass may fall short of 1
    /// (but not exceed it beyond tolerance).
    pub fn subnormalized(weights: Vec<f64>) -> Result<Self> {
        let d = Self::subnormalized_unchecked_sum(weights)?;
        if d.sum() > 1.0 + NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(d.sum()));
        }
        Ok(d)
    }

    /// Rescales arbitrary nonnegative weights to unit mass. Intended for
    /// spectra that carry rounding dust.
    pub fn renormalized(weights: Vec<f64>) -> Result<Self> {
        let d = Self::subnormalized_unchecked_sum(weights)?;
        let s = d.sum();
        if s <= 0.0 {
            return Err(Error::ZeroVector);
        }
        let weights = d.weights.into_iter().map(|w| w / s).collect();
        Ok(Self {
            weights,
            normalized: true,
        })
    }

    fn subnormalized_unchecked_sum(weights: Vec<f64>) -> Result<Self> {
        for (index, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
        }
        let sum: f64 = weights.iter().sum();
        let normalized = (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE;
        Ok(Self {
            weights,
            normalized,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Number of weights strictly above `SUPPORT_THRESHOLD`.
    pub fn support_size(&self) -> usize {
        self.weights
            .iter()
            .filter(|&&w| w > SUPPORT_THRESHOLD)
            .count()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.sum()))
        }
    }
}

/// Shannon entropy in bits of a probability distribution.
pub fn shannon(p: &Distribution) -> Result<f64> {
    p.require_normalized()?;
    Ok(shannon_raw(p.weights()))
}

fn shannon_raw(weights: &[f64]) -> f64 {
    let mut h = 0.0;
    for &w in weights {
        if w > SUPPORT_THRESHOLD {
            h -= w * w.log2();
        }
    }
    h
}

/// Rényi entropy of order `alpha` in bits.
///
/// `alpha` may be any nonnegative real including infinity. The orders 0, 1,
/// and infinity are dispatched to their exact limits (support counting,
/// Shannon, min-entropy) rather than evaluated through the generic formula.
pub fn renyi(p: &Distribution, alpha: f64) -> Result<f64> {
    p.require_normalized()?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Rényi order must be in [0, inf], got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok((p.support_size() as f64).log2());
    }
    if alpha == 1.0 {
        return Ok(shannon_raw(p.weights()));
    }
    if alpha.is_infinite() {
        return Ok(-p.max_weight().log2());
    }
    let power_sum: f64 = p
        .weights()
        .iter()
        .filter(|&&w| w > SUPPORT_THRESHOLD)
        .map(|&w| w.powf(alpha))
        .sum();
    Ok(power_sum.log2() / (1.0 - alpha))
}

/// Relative entropy D(P‖Q) in bits. Returns +inf when the support of P
/// escapes the support of Q.
pub fn kl(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy needs equal lengths, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_raw(p.weights(), q.weights()))
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pw, &qw) in p.iter().zip(q) {
        if pw > SUPPORT_THRESHOLD {
            if qw <= SUPPORT_THRESHOLD {
                return f64::INFINITY;
            }
            d += pw * (pw / qw).log2();
        }
    }
    d
}

/// Total variation distance ½ Σ |p_i − q_i|.
pub fn tv(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "total variation needs equal lengths, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.weights()
        .iter()
        .zip(q.weights())
        .map(|(pw, qw)| (pw - qw).abs())
        .sum::<f64>()
        / 2.0)
}

/// Binary Shannon entropy h(p) in bits.
pub fn binary_h(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "binary entropy argument must lie in [0,1], got {p}"
        )));
    }
    Ok(shannon_raw(&[p, 1.0 - p]))
}

/// Binary relative entropy d(p‖q) in bits; +inf when p places mass where
/// q has none.
pub fn binary_d(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "binary divergence arguments must lie in [0,1], got {p} and {q}"
        )));
    }
    Ok(kl_raw(&[p, 1.0 - p], &[q, 1.0 - q]))
}

/// Outcome of the variational grid check: `lhs` is the Rényi entropy,
/// `rhs` the grid maximum of H(Q) − (α/(1−α)) D(Q‖P), and
/// `gap = lhs − rhs`. The gap is nonnegative up to rounding because the
/// grid maximum can only undershoot the true supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Grid cap for the variational check, counting candidate distributions.
const VARIATIONAL_GRID_CAP: f64 = 2e7;

/// Checks the variational characterization
/// H_α(P) = max_Q [H(Q) − (α/(1−α)) D(Q‖P)] for α in (0,1) by maximizing
/// over the simplex grid of resolution `grid_resolution` on the support
/// of P. The support may hold at most 4 atoms.
pub fn variational_renyi_check(
    p: &Distribution,
    alpha: f64,
    grid_resolution: f64,
) -> Result<VariationalCheck> {
    p.require_normalized()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variational check needs alpha in (0,1), got {alpha}"
        )));
    }
    if !(grid_resolution > 0.0 && grid_resolution <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must lie in (0,1], got {grid_resolution}"
        )));
    }
    let support: Vec<f64> = p
        .weights()
        .iter()
        .cloned()
        .filter(|&w| w > SUPPORT_THRESHOLD)
        .collect();
    let m = support.len();
    if m == 0 {
        return Err(Error::ZeroVector);
    }
    if m > 4 {
        return Err(Error::SizeLimit(format!(
            "variational grid supports at most 4 atoms, got {m}"
        )));
    }
    let steps = (1.0 / grid_resolution).round() as u64;
    let grid_points = compositions_count(steps, m as u64);
    if grid_points > VARIATIONAL_GRID_CAP {
        return Err(Error::SizeLimit(format!(
            "variational grid would hold {grid_points:.3e} points, cap is {VARIATIONAL_GRID_CAP:.0e}"
        )));
    }

    let lhs = renyi(p, alpha)?;
    let coeff = alpha / (1.0 - alpha);
    let mut rhs = f64::NEG_INFINITY;
    let mut q = vec![0u64; m];
    for_each_composition(steps, m, &mut q, 0, &mut |counts| {
        let mut h = 0.0;
        let mut d = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let qi = c as f64 / steps as f64;
            h -= qi * qi.log2();
            d += qi * (qi / support[i]).log2();
        }
        let value = h - coeff * d;
        if value > rhs {
            rhs = value;
        }
    });
    Ok(VariationalCheck {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// Number of compositions of `n` into `m` nonnegative parts, as a float
/// since it is only compared against the grid cap.
fn compositions_count(n: u64, m: u64) -> f64 {
    // C(n + m - 1, m - 1) accumulated multiplicatively.
    let mut count = 1.0;
    for i in 1..m {
        count *= (n + i) as f64 / i as f64;
    }
    count
}

fn for_each_composition(
    remaining: u64,
    m: usize,
    scratch: &mut [u64],
    index: usize,
    visit: &mut impl FnMut(&[u64]),
) {
    if index == m - 1 {
        scratch[index] = remaining;
        visit(scratch);
        return;
    }
    for value in 0..=remaining {
        scratch[index] = value;
        for_each_composition(remaining - value, m, scratch, index + 1, visit);
    }
}

/// Rényi entropy of order `alpha` of the reduced state of `psi` on the
/// parties in `b`. Requires a unit vector.
pub fn marginal_entropy(psi: &MultipartiteState, b: &Bipartition, alpha: f64) -> Result<f64> {
    psi.require_unit()?;
    let rho = crate::tensor::marginal(psi, b)?;
    let spectrum = Distribution::renormalized(rho.eigenvalues())?;
    renyi(&spectrum, alpha)
}
