//! Weighted-marginal entanglement measures: evaluation, sandwich bounds,
//! the continuity bound, and the checkers for normalization, additivity,
//! the direct-sum identity, and logarithmic boundedness.

use crate::entropy::{binary_h, marginal_entropy, Distribution};
use crate::error::{Error, Result};
use crate::tensor::{direct_sum, tensor_product, Bipartition, MultipartiteState};

/// Which family a measure belongs to. The Rényi kind weights single-party
/// cuts, each with its own order α ∈ [0,1]; the general kind weights
/// arbitrary bipartitions at Shannon order only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    WeightedMarginalRenyi,
    WeightedMarginalShannonGeneral,
}

/// One weighted term: a subset of parties, its weight in θ, and the Rényi
/// order used for that marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTerm {
    pub subset: Vec<usize>,
    pub weight: f64,
    pub alpha: f64,
}

/// A convex combination of marginal Rényi entropies. The weights θ form a
/// probability distribution over the terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    kind: MeasureKind,
    terms: Vec<MeasureTerm>,
}

impl MeasureSpec {
    /// Measure Σ_j θ_j H_{α_j}(Tr over all but party j), specified as
    /// (party, weight, alpha) triples.
    pub fn weighted_marginal_renyi(terms: Vec<(usize, f64, f64)>) -> Result<Self> {
        let terms: Vec<MeasureTerm> = terms
            .into_iter()
            .map(|(party, weight, alpha)| MeasureTerm {
                subset: vec![party],
                weight,
                alpha,
            })
            .collect();
        Self::validated(MeasureKind::WeightedMarginalRenyi, terms)
    }

    /// Measure Σ_b θ_b H(Tr over the complement of b) with general subsets
    /// b, specified as (subset, weight) pairs. Order is fixed at Shannon.
    pub fn weighted_marginal_shannon_general(terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let terms: Vec<MeasureTerm> = terms
            .into_iter()
            .map(|(subset, weight)| MeasureTerm {
                subset,
                weight,
                alpha: 1.0,
            })
            .collect();
        Self::validated(MeasureKind::WeightedMarginalShannonGeneral, terms)
    }

    /// Uniform Shannon weights over the k single-party cuts.
    pub fn uniform_shannon_cuts(k: usize) -> Result<Self> {
        let w = 1.0 / k as f64;
        Self::weighted_marginal_renyi((0..k).map(|j| (j, w, 1.0)).collect())
    }

    fn validated(kind: MeasureKind, terms: Vec<MeasureTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "a measure needs at least one term".into(),
            ));
        }
        for term in &terms {
            if term.subset.is_empty() {
                return Err(Error::InvalidBipartition(
                    "a measure term needs a nonempty subset".into(),
                ));
            }
            let mut sorted = term.subset.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != term.subset.len() {
                return Err(Error::InvalidBipartition(
                    "duplicate party in a measure term".into(),
                ));
            }
            if !(term.alpha >= 0.0 && term.alpha <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Rényi order must lie in [0,1], got {}",
                    term.alpha
                )));
            }
            if kind == MeasureKind::WeightedMarginalRenyi && term.subset.len() != 1 {
                return Err(Error::InvalidBipartition(
                    "the Rényi kind weighs single-party cuts only".into(),
                ));
            }
            if kind == MeasureKind::WeightedMarginalShannonGeneral && term.alpha != 1.0 {
                return Err(Error::InvalidParameter(
                    "the general kind is Shannon only".into(),
                ));
            }
        }
        // θ must be a probability distribution over the terms.
        Distribution::normalized(terms.iter().map(|t| t.weight).collect())?;
        Ok(Self { kind, terms })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn terms(&self) -> &[MeasureTerm] {
        &self.terms
    }

    /// True when every term is at Shannon order.
    pub fn all_shannon(&self) -> bool {
        self.terms.iter().all(|t| t.alpha == 1.0)
    }

    /// Validates the terms against a party count and canonicalizes: for the
    /// general kind a subset not containing party 0 is replaced by its
    /// complement (equal entropy on pure states), and duplicate
    /// (subset, α) pairs merge by adding weights. Deterministic order.
    pub fn canonical_terms(&self, k: usize) -> Result<Vec<(Bipartition, f64, f64)>> {
        let mut canon: Vec<(Bipartition, f64, f64)> = Vec::new();
        for term in &self.terms {
            let b = Bipartition::new(&term.subset, k)?;
            let b = if self.kind == MeasureKind::WeightedMarginalShannonGeneral
                && !b.contains(0)
            {
                b.complement()
            } else {
                b
            };
            canon.push((b, term.weight, term.alpha));
        }
        canon.sort_by(|x, y| {
            (x.0.parties(), x.2.to_bits()).cmp(&(y.0.parties(), y.2.to_bits()))
        });
        let mut merged: Vec<(Bipartition, f64, f64)> = Vec::new();
        for (b, w, a) in canon {
            match merged.last_mut() {
                Some((pb, pw, pa)) if *pb == b && *pa == a => *pw += w,
                _ => merged.push((b, w, a)),
            }
        }
        Ok(merged)
    }
}

/// Evaluates the measure on a nonzero state: Σ θ_b H_{α_b} of the
/// marginals of ψ/‖ψ‖.
pub fn evaluate(spec: &MeasureSpec, psi: &MultipartiteState) -> Result<f64> {
    let unit = psi.normalized()?;
    let mut value = 0.0;
    for (b, weight, alpha) in spec.canonical_terms(psi.num_parties())? {
        value += weight * marginal_entropy(&unit, &b, alpha)?;
    }
    Ok(value)
}

/// Lower and upper bounds sandwiching the whole spectral-point family for
/// the weights θ over single-party cuts: Shannon below, max-entropy above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Computes the sandwich Σθ_j H(Tr_j) ≤ · ≤ Σθ_j H₀(Tr_j) for a unit
/// state; `theta` must hold one weight per party.
pub fn sandwich_bounds(psi: &MultipartiteState, theta: &Distribution) -> Result<SandwichBounds> {
    psi.require_unit()?;
    let k = psi.num_parties();
    if theta.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} weights, state has {k} parties",
            theta.len()
        )));
    }
    if !theta.is_normalized() {
        return Err(Error::NotNormalized(theta.sum()));
    }
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (j, &w) in theta.weights().iter().enumerate() {
        let cut = Bipartition::single(j, k)?;
        lower += w * marginal_entropy(psi, &cut, 1.0)?;
        upper += w * marginal_entropy(psi, &cut, 0.0)?;
    }
    Ok(SandwichBounds { lower, upper })
}

/// The explicit asymptotic-continuity bound coefficients for k parties at
/// trace distance δ: |E(φ) − E(ψ)| ≤ a(δ)·log₂ dim + b(δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityBound {
    pub k: usize,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
}

/// Evaluates the continuity-bound coefficients. Both vanish at δ = 0 and
/// diverge as δ → 1.
pub fn continuity_bound(k: usize, delta: f64) -> Result<ContinuityBound> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one party".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "continuity bound needs delta in [0,1), got {delta}"
        )));
    }
    let e = k as f64 + 1.0;
    let t = delta.powf(2.0 / e);
    let pow = (1.0 + t).powf(e);
    let denom = 1.0 - delta * delta;
    let a = (pow - 1.0 + delta * delta) / denom;
    let b = pow / denom * binary_h(1.0 / (1.0 + t))?;
    Ok(ContinuityBound { k, delta, a, b })
}

/// Residual of the mixing identity
/// E(√p ψ ⊕ √(1−p) φ) = p E(ψ) + (1−p) E(φ) + h(p)
/// for Shannon-order measures; the first argument carries weight p.
pub fn check_direct_sum_identity(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    phi: &MultipartiteState,
    p: f64,
) -> Result<f64> {
    if !spec.all_shannon() {
        return Err(Error::InvalidParameter(
            "the mixing identity holds at Shannon order only".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "mixing weight must lie in [0,1], got {p}"
        )));
    }
    psi.require_unit()?;
    phi.require_unit()?;
    let scaled_psi = psi.scaled(num_complex::Complex64::new(p.sqrt(), 0.0));
    let scaled_phi = phi.scaled(num_complex::Complex64::new((1.0 - p).sqrt(), 0.0));
    let sum = direct_sum(&scaled_psi, &scaled_phi)?;
    let lhs = evaluate(spec, &sum)?;
    let rhs = p * evaluate(spec, psi)? + (1.0 - p) * evaluate(spec, phi)? + binary_h(p)?;
    Ok((lhs - rhs).abs())
}

/// Slack of the logarithmic-boundedness inequality
/// E(⊕_i ψ_i) ≤ max_i E(ψ_i/‖ψ_i‖) + log₂ l
/// for scaled summands with total squared norm 1. Nonnegative up to
/// rounding for every measure of this module.
pub fn check_log_boundedness(
    spec: &MeasureSpec,
    summands: &[MultipartiteState],
) -> Result<f64> {
    if summands.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one summand".into(),
        ));
    }
    let total: f64 = summands.iter().map(|s| s.norm_sq()).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(total));
    }
    let mut sum = summands[0].clone();
    let mut max_term = f64::NEG_INFINITY;
    for (i, s) in summands.iter().enumerate() {
        if s.norm_sq() <= 0.0 {
            return Err(Error::ZeroVector);
        }
        max_term = max_term.max(evaluate(spec, s)?);
        if i > 0 {
            sum = direct_sum(&sum, s)?;
        }
    }
    let bound = max_term + (summands.len() as f64).log2();
    let value = evaluate(spec, &sum)?;
    Ok(bound - value)
}

/// Residual of full additivity |E(ψ⊗φ) − E(ψ) − E(φ)|.
pub fn check_additivity(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    phi: &MultipartiteState,
) -> Result<f64> {
    let prod = tensor_product(psi, phi)?;
    let lhs = evaluate(spec, &prod)?;
    let rhs = evaluate(spec, psi)? + evaluate(spec, phi)?;
    Ok((lhs - rhs).abs())
}
