//! Remembering one-step LOCC channels acting on conditionally pure
//! ensembles: channel application and protocol composition with explicit
//! classical registers, the monotonicity-on-average check, and the three
//! ensemble-distance verifiers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::{evaluate, MeasureSpec};
use crate::random::{haar_isometry, rng_from_seed};
use crate::tensor::{
    apply_on_party, fidelity_sq, inner, trace_distance, DensityMatrix, MultipartiteState,
};

/// Tolerance on the completeness relation Σ K†K ≤ I of a channel block.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-10;

/// Branches with squared norm at or below this are dropped on application.
const BRANCH_DROP_THRESHOLD: f64 = 1e-30;

/// One branch of a conditionally pure ensemble: a weight, the classical
/// register value, and the unit state conditioned on it.
#[derive(Debug, Clone)]
pub struct Branch {
    pub weight: f64,
    pub label: usize,
    pub state: MultipartiteState,
}

/// A classical-quantum state Σ_x P(x) |ψ_x⟩⟨ψ_x| ⊗ |x⟩⟨x| kept as an
/// explicit ensemble. Weights may sum below 1 (trace non-increasing
/// protocols); labels are distinct and branches are held sorted by label.
#[derive(Debug, Clone)]
pub struct ConditionallyPureState {
    branches: Vec<Branch>,
}

impl ConditionallyPureState {
    pub fn new(mut branches: Vec<Branch>) -> Result<Self> {
        let mut total = 0.0;
        for (i, b) in branches.iter().enumerate() {
            if !(b.weight >= 0.0) {
                return Err(Error::NegativeWeight {
                    index: i,
                    weight: b.weight,
                });
            }
            b.state.require_unit()?;
            total += b.weight;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::NotNormalized(total));
        }
        branches.sort_by_key(|b| b.label);
        if branches.windows(2).any(|w| w[0].label == w[1].label) {
            return Err(Error::LabelMismatch(
                "duplicate branch label".into(),
            ));
        }
        Ok(Self { branches })
    }

    /// Single deterministic branch (weight 1, register 0).
    pub fn pure(psi: &MultipartiteState) -> Result<Self> {
        Self::new(vec![Branch {
            weight: 1.0,
            label: 0,
            state: psi.clone(),
        }])
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    fn find(&self, label: usize) -> Option<&Branch> {
        self.branches
            .binary_search_by_key(&label, |b| b.label)
            .ok()
            .map(|i| &self.branches[i])
    }
}

/// A remembering one-step LOCC channel: party i reads the classical
/// register x and applies its instrument; outcome y overwrites the
/// register, with f(y) recording which input symbol produced it. Kraus
/// operators may be rectangular. Per input symbol x the block
/// Σ_{f(y)=x} K_y†K_y is at most the identity (trace non-increasing
/// permitted); the flag records equality on every block.
#[derive(Debug, Clone)]
pub struct OneStepChannel {
    party: usize,
    f: Vec<usize>,
    kraus: Vec<DMatrix<Complex64>>,
    input_alphabet: usize,
    trace_preserving: bool,
}

impl OneStepChannel {
    pub fn new(
        party: usize,
        f: Vec<usize>,
        kraus: Vec<DMatrix<Complex64>>,
        input_alphabet: usize,
    ) -> Result<Self> {
        if kraus.is_empty() || f.len() != kraus.len() {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} outcomes but {} register images",
                kraus.len(),
                f.len()
            )));
        }
        if input_alphabet == 0 {
            return Err(Error::InvalidParameter(
                "input alphabet must be nonempty".into(),
            ));
        }
        if let Some(&bad) = f.iter().find(|&&x| x >= input_alphabet) {
            return Err(Error::LabelMismatch(format!(
                "register image {bad} outside input alphabet of size {input_alphabet}"
            )));
        }
        let in_dim = kraus[0].ncols();
        let out_dim = kraus[0].nrows();
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParameter(
                "Kraus operators need positive dimensions".into(),
            ));
        }
        if kraus
            .iter()
            .any(|k| k.ncols() != in_dim || k.nrows() != out_dim)
        {
            return Err(Error::DimensionMismatch(
                "all Kraus operators must share the same shape".into(),
            ));
        }

        let mut trace_preserving = true;
        for x in 0..input_alphabet {
            let mut block = DMatrix::<Complex64>::zeros(in_dim, in_dim);
            let mut present = false;
            for (y, k) in kraus.iter().enumerate() {
                if f[y] == x {
                    block += k.adjoint() * k;
                    present = true;
                }
            }
            if !present {
                // No outcomes for this symbol: the block is zero, which is
                // fine for a trace non-increasing channel.
                trace_preserving = false;
                continue;
            }
            let eig = SymmetricEigen::new(block.clone());
            let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            if max > 1.0 + COMPLETENESS_TOLERANCE {
                return Err(Error::NotPositive(max));
            }
            let mut dev: f64 = 0.0;
            for r in 0..in_dim {
                for c in 0..in_dim {
                    let want = if r == c {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    dev = dev.max((block[(r, c)] - want).norm());
                }
            }
            if dev > COMPLETENESS_TOLERANCE {
                trace_preserving = false;
            }
        }

        Ok(Self {
            party,
            f,
            kraus,
            input_alphabet,
            trace_preserving,
        })
    }

    pub fn party(&self) -> usize {
        self.party
    }

    pub fn register_map(&self) -> &[usize] {
        &self.f
    }

    pub fn kraus(&self) -> &[DMatrix<Complex64>] {
        &self.kraus
    }

    pub fn input_alphabet(&self) -> usize {
        self.input_alphabet
    }

    pub fn outcomes(&self) -> usize {
        self.f.len()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }
}

/// Applies a one-step channel: branch (P(x), x, ψ_x) spawns, for every
/// outcome y with f(y) = x, the branch (P(x)·‖K_y ψ_x‖², y, K_y ψ_x
/// normalized). Zero-norm branches are dropped.
pub fn apply(
    ch: &OneStepChannel,
    rho: &ConditionallyPureState,
) -> Result<ConditionallyPureState> {
    let mut out = Vec::new();
    for b in rho.branches() {
        if b.label >= ch.input_alphabet {
            return Err(Error::LabelMismatch(format!(
                "branch label {} outside the channel's input alphabet of size {}",
                b.label, ch.input_alphabet
            )));
        }
        for (y, k) in ch.kraus.iter().enumerate() {
            if ch.f[y] != b.label {
                continue;
            }
            let state = apply_on_party(&b.state, ch.party, k)?;
            let norm_sq = state.norm_sq();
            if norm_sq <= BRANCH_DROP_THRESHOLD {
                continue;
            }
            out.push(Branch {
                weight: b.weight * norm_sq,
                label: y,
                state: state.normalized()?,
            });
        }
    }
    ConditionallyPureState::new(out)
}

/// Runs a protocol from the single branch (1, 0, ψ). The final register is
/// kept as branch labels; tracing it out would only merge identical
/// states, and callers that need the merged matrix use `merged_density`.
pub fn compose_and_discard(
    protocol: &[OneStepChannel],
    psi: &MultipartiteState,
) -> Result<ConditionallyPureState> {
    psi.require_unit()?;
    let mut acc = ConditionallyPureState::pure(psi)?;
    for ch in protocol {
        acc = apply(ch, &acc)?;
    }
    Ok(acc)
}

/// Haar-random trace-preserving one-step channel for a fresh register
/// (input alphabet {0}): a Haar isometry from in_dim to out_dim·branches,
/// sliced into `branches` Kraus operators. Deterministic per seed.
pub fn random_one_step(
    party: usize,
    in_dim: usize,
    out_dim: usize,
    branches: usize,
    seed: u64,
) -> Result<OneStepChannel> {
    let mut rng = rng_from_seed(seed);
    random_one_step_with(party, in_dim, out_dim, branches, 1, &mut rng)
}

/// Generalization for mid-protocol steps: one independent Haar isometry
/// slice per input symbol, so the instrument genuinely depends on the
/// register. Outcome y = x·branches + b carries f(y) = x.
pub fn random_one_step_with(
    party: usize,
    in_dim: usize,
    out_dim: usize,
    branches: usize,
    input_alphabet: usize,
    rng: &mut impl Rng,
) -> Result<OneStepChannel> {
    if in_dim == 0 || out_dim == 0 || branches == 0 || input_alphabet == 0 {
        return Err(Error::InvalidParameter(
            "channel dimensions and branch count must be positive".into(),
        ));
    }
    if out_dim * branches < in_dim {
        return Err(Error::DimensionMismatch(format!(
            "need out_dim·branches ≥ in_dim for an isometry, got {}·{} < {}",
            out_dim, branches, in_dim
        )));
    }
    let mut f = Vec::with_capacity(input_alphabet * branches);
    let mut kraus = Vec::with_capacity(input_alphabet * branches);
    for x in 0..input_alphabet {
        let v = haar_isometry(out_dim * branches, in_dim, rng);
        for b in 0..branches {
            let k = DMatrix::from_fn(out_dim, in_dim, |r, c| v[(b * out_dim + r, c)]);
            f.push(x);
            kraus.push(k);
        }
    }
    OneStepChannel::new(party, f, kraus, input_alphabet)
}

/// Random protocol of square trace-preserving steps on a state with the
/// given local dimensions: each step acts on a random party and splits
/// into `branches` outcomes, with its instrument conditioned on the full
/// register so far. Deterministic per seed.
pub fn random_protocol(
    dims: &[usize],
    steps: usize,
    branches: usize,
    seed: u64,
) -> Result<Vec<OneStepChannel>> {
    let mut rng = rng_from_seed(seed);
    let mut protocol = Vec::with_capacity(steps);
    let mut alphabet = 1usize;
    for _ in 0..steps {
        let party = rng.gen_range(0..dims.len());
        let d = dims[party];
        protocol.push(random_one_step_with(
            party, d, d, branches, alphabet, &mut rng,
        )?);
        alphabet *= branches;
    }
    Ok(protocol)
}

/// Monotonicity-on-average slack E(ψ) − Σ_x P(x) E(ψ_x) for the ensemble
/// the protocol produces. Nonnegative (to tolerance) is the expected
/// behavior for the Shannon-order measures; the slack is reported either
/// way.
pub fn monotone_avg_check(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    protocol: &[OneStepChannel],
) -> Result<f64> {
    let before = evaluate(spec, psi)?;
    let ensemble = compose_and_discard(protocol, psi)?;
    let mut after = 0.0;
    for b in ensemble.branches() {
        after += b.weight * evaluate(spec, &b.state)?;
    }
    Ok(before - after)
}

/// Result of the conditionally-pure distance check: the exact trace
/// distance between the labeled ensembles and the two bounds it implies.
#[derive(Debug, Clone, Copy)]
pub struct CondPureDistance {
    /// T(ρ, σ) from the per-label block form.
    pub t: f64,
    /// Total variation between the weight vectors.
    pub tv: f64,
    /// Σ_x P(x) · T(ψ_x, φ_x).
    pub avg_branch: f64,
    /// TV(P, Q) ≤ T within tolerance.
    pub tv_bound_ok: bool,
    /// Σ P(x) T(ψ_x, φ_x) ≤ 2T within tolerance.
    pub avg_branch_bound_ok: bool,
}

/// Exact trace distance between two conditionally pure states over the
/// same label set, block by block: each label contributes
/// ½‖P|ψ⟩⟨ψ| − Q|φ⟩⟨φ|‖₁ = ½√((P−Q)² + 4PQ(1−|⟨ψ|φ⟩|²)), since the
/// difference lives in the two-dimensional span of the branch states.
/// Verifies the two conclusions that distance implies.
pub fn check_cond_pure_distance(
    rho: &ConditionallyPureState,
    sigma: &ConditionallyPureState,
) -> Result<CondPureDistance> {
    if rho.branches().len() != sigma.branches().len()
        || rho
            .branches()
            .iter()
            .zip(sigma.branches())
            .any(|(a, b)| a.label != b.label)
    {
        return Err(Error::LabelMismatch(
            "ensembles must share their label alphabet".into(),
        ));
    }
    let mut t = 0.0;
    let mut tv = 0.0;
    let mut avg_branch = 0.0;
    for (a, b) in rho.branches().iter().zip(sigma.branches()) {
        let p = a.weight;
        let q = b.weight;
        let c_sq = inner(&a.state, &b.state)?.norm_sqr().clamp(0.0, 1.0);
        t += 0.5 * ((p - q).powi(2) + 4.0 * p * q * (1.0 - c_sq)).max(0.0).sqrt();
        tv += 0.5 * (p - q).abs();
        avg_branch += p * (1.0 - c_sq).max(0.0).sqrt();
    }
    Ok(CondPureDistance {
        t,
        tv,
        avg_branch,
        tv_bound_ok: tv <= t + 1e-10,
        avg_branch_bound_ok: avg_branch <= 2.0 * t + 1e-10,
    })
}

/// Result of the surviving-outcome mass check.
#[derive(Debug, Clone, Copy)]
pub struct OutcomeProbLower {
    /// Measured smoothing parameter 1 − |⟨φ|ψ⟩|².
    pub epsilon: f64,
    /// Mass of φ-outcomes whose branch stays ε′-close to the ψ-branch.
    pub mass: f64,
    /// 1 − 2√ε(1 + 1/√ε′).
    pub bound: f64,
    pub ok: bool,
}

/// Runs the protocol on both ψ and a nearby φ and lower-bounds the
/// probability of outcomes where the two conditional states remain close:
/// the mass of labels x with |⟨φ_x|ψ_x⟩|² ≥ 1−ε′ must reach
/// 1 − 2√ε(1 + 1/√ε′), with ε measured from the inputs. Labels produced
/// by φ but dropped for ψ count as overlap zero. A nonpositive bound is
/// vacuously satisfied.
pub fn check_outcome_prob_lower(
    psi: &MultipartiteState,
    phi: &MultipartiteState,
    protocol: &[OneStepChannel],
    eps_prime: f64,
) -> Result<OutcomeProbLower> {
    if !(eps_prime > 0.0 && eps_prime <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need ε′ in (0,1], got {eps_prime}"
        )));
    }
    let epsilon = 1.0 - fidelity_sq(phi, psi)?;
    let ens_psi = compose_and_discard(protocol, psi)?;
    let ens_phi = compose_and_discard(protocol, phi)?;
    let mut mass = 0.0;
    for b in ens_phi.branches() {
        let overlap_sq = match ens_psi.find(b.label) {
            Some(a) => inner(&b.state, &a.state)?.norm_sqr().clamp(0.0, 1.0),
            None => 0.0,
        };
        if overlap_sq >= 1.0 - eps_prime {
            mass += b.weight;
        }
    }
    let bound = 1.0 - 2.0 * epsilon.sqrt() * (1.0 + 1.0 / eps_prime.sqrt());
    Ok(OutcomeProbLower {
        epsilon,
        mass,
        bound,
        ok: bound <= 0.0 || mass >= bound - 1e-9,
    })
}

/// Result of the largest-eigenvalue stability check.
#[derive(Debug, Clone, Copy)]
pub struct MaxEigCheck {
    pub gap: f64,
    pub t: f64,
    pub ok: bool,
}

/// |λ_max(ρ) − λ_max(σ)| ≤ 2·T(ρ, σ), within tolerance.
pub fn check_max_eig(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MaxEigCheck> {
    let gap = (rho.max_eigenvalue() - sigma.max_eigenvalue()).abs();
    let t = trace_distance(rho, sigma)?;
    Ok(MaxEigCheck {
        gap,
        t,
        ok: gap <= 2.0 * t + 1e-10,
    })
}

/// Register-discarded density matrix Σ_x P(x)|ψ_x⟩⟨ψ_x| of an ensemble.
/// All branches must share their dims.
pub fn merged_density(rho: &ConditionallyPureState) -> Result<DensityMatrix> {
    let first = rho
        .branches()
        .first()
        .ok_or(Error::ZeroVector)?;
    let dim = first.state.total_dim();
    if rho
        .branches()
        .iter()
        .any(|b| b.state.dims() != first.state.dims())
    {
        return Err(Error::DimensionMismatch(
            "branches live on different spaces".into(),
        ));
    }
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for b in rho.branches() {
        let amps = b.state.amps();
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] += Complex64::new(b.weight, 0.0) * amps[r] * amps[c].conj();
            }
        }
    }
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_state};
    use crate::smoothing::{smooth_infimum_estimate, OptConfig};
    use crate::tensor::{tensor_product, Bipartition};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn identity_channel(party: usize, dim: usize) -> OneStepChannel {
        OneStepChannel::new(party, vec![0], vec![DMatrix::identity(dim, dim)], 1).unwrap()
    }

    #[test]
    fn identity_channel_is_a_noop() {
        let mut rng = rng_from_seed(201);
        let psi = random_state(&[2, 3], &mut rng);
        let ch = identity_channel(0, 2);
        assert!(ch.is_trace_preserving());
        let out = apply(&ch, &ConditionallyPureState::pure(&psi).unwrap()).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert!((out.branches()[0].weight - 1.0).abs() <= 1e-12);
        for (a, b) in out.branches()[0].state.amps().iter().zip(psi.amps()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn computational_measurement_splits_plus_state() {
        let plus = MultipartiteState::new(
            vec![2],
            vec![c(0.5f64.sqrt(), 0.0), c(0.5f64.sqrt(), 0.0)],
        )
        .unwrap();
        let proj = |i: usize| {
            let mut m = DMatrix::<Complex64>::zeros(2, 2);
            m[(i, i)] = c(1.0, 0.0);
            m
        };
        let ch = OneStepChannel::new(0, vec![0, 0], vec![proj(0), proj(1)], 1).unwrap();
        assert!(ch.is_trace_preserving());
        let out = apply(&ch, &ConditionallyPureState::pure(&plus).unwrap()).unwrap();
        assert_eq!(out.branches().len(), 2);
        for (i, b) in out.branches().iter().enumerate() {
            assert_eq!(b.label, i);
            assert!((b.weight - 0.5).abs() <= 1e-12);
            assert!((b.state.amps()[i].norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_split_conserves_weight() {
        let mut rng = rng_from_seed(203);
        let psi = random_state(&[2, 3], &mut rng);
        let ch = random_one_step(0, 2, 2, 3, 77).unwrap();
        assert!(ch.is_trace_preserving());
        assert_eq!(ch.outcomes(), 3);
        let out = apply(&ch, &ConditionallyPureState::pure(&psi).unwrap()).unwrap();
        assert!((out.total_weight() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn empty_protocol_returns_the_input_branch() {
        let mut rng = rng_from_seed(205);
        let psi = random_state(&[2, 2], &mut rng);
        let out = compose_and_discard(&[], &psi).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert_eq!(out.branches()[0].label, 0);
        assert_eq!(out.branches()[0].weight, 1.0);
        assert_eq!(out.branches()[0].state.amps(), psi.amps());
    }

    #[test]
    fn discard_and_prepare_lands_on_the_product_state() {
        let mut rng = rng_from_seed(207);
        let psi = random_state(&[2, 2], &mut rng);
        // Per party: measure in the computational basis and reset to |0⟩.
        let reset = |party: usize, alphabet: usize| {
            let mut f = Vec::new();
            let mut kraus = Vec::new();
            for x in 0..alphabet {
                for i in 0..2usize {
                    let mut k = DMatrix::<Complex64>::zeros(2, 2);
                    k[(0, i)] = c(1.0, 0.0);
                    f.push(x);
                    kraus.push(k);
                }
            }
            OneStepChannel::new(party, f, kraus, alphabet).unwrap()
        };
        let protocol = vec![reset(0, 1), reset(1, 2)];
        let out = compose_and_discard(&protocol, &psi).unwrap();
        assert!((out.total_weight() - 1.0).abs() <= 1e-10);
        let target = MultipartiteState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        for b in out.branches() {
            // Branch states agree with |00⟩ up to the measured phase.
            assert!((inner(&target, &b.state).unwrap().norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_channels_are_seed_deterministic() {
        let a = random_one_step(1, 3, 3, 2, 99).unwrap();
        let b = random_one_step(1, 3, 3, 2, 99).unwrap();
        let other = random_one_step(1, 3, 3, 2, 100).unwrap();
        for (ka, kb) in a.kraus().iter().zip(b.kraus()) {
            assert_eq!(ka, kb);
        }
        assert!(a
            .kraus()
            .iter()
            .zip(other.kraus())
            .any(|(ka, ko)| ka != ko));
    }

    #[test]
    fn multistep_protocols_conserve_weight() {
        let mut rng = rng_from_seed(209);
        for seed in 0..5u64 {
            let psi = random_state(&[2, 2, 2], &mut rng);
            let protocol = random_protocol(&[2, 2, 2], 3, 2, seed).unwrap();
            assert!(protocol.iter().all(|ch| ch.is_trace_preserving()));
            let out = compose_and_discard(&protocol, &psi).unwrap();
            assert!((out.total_weight() - 1.0).abs() <= 1e-10);
            assert_eq!(out.branches().len(), 8);
        }
    }

    #[test]
    fn monotone_slack_identity_and_discard() {
        let mut rng = rng_from_seed(211);
        let psi = random_state(&[2, 2], &mut rng);
        let spec = MeasureSpec::uniform_shannon_cuts(2).unwrap();
        let slack = monotone_avg_check(&spec, &psi, &[identity_channel(0, 2)]).unwrap();
        assert!(slack.abs() <= 1e-12);

        // Fully measuring one party collapses every branch to a product
        // state, so the average drops to zero and the slack is E(ψ).
        let proj = |i: usize| {
            let mut m = DMatrix::<Complex64>::zeros(2, 2);
            m[(i, i)] = c(1.0, 0.0);
            m
        };
        let measure = OneStepChannel::new(0, vec![0, 0], vec![proj(0), proj(1)], 1).unwrap();
        let slack = monotone_avg_check(&spec, &psi, &[measure]).unwrap();
        let direct = evaluate(&spec, &psi).unwrap();
        assert!((slack - direct).abs() <= 1e-9);
        assert!(slack >= 0.0);
    }

    #[test]
    fn monotone_slack_nonnegative_on_random_shannon_sweep() {
        let mut rng = rng_from_seed(213);
        let spec = MeasureSpec::uniform_shannon_cuts(3).unwrap();
        for seed in 0..20u64 {
            let psi = random_state(&[2, 2, 2], &mut rng);
            let steps = 1 + (seed % 3) as usize;
            let protocol = random_protocol(&[2, 2, 2], steps, 2, 1000 + seed).unwrap();
            let slack = monotone_avg_check(&spec, &psi, &protocol).unwrap();
            assert!(slack >= -1e-9, "seed {seed} slack {slack}");
        }
    }

    #[test]
    fn cond_pure_distance_identical_and_orthogonal() {
        let mut rng = rng_from_seed(215);
        let a = random_state(&[2, 2], &mut rng);
        let rho = ConditionallyPureState::new(vec![
            Branch {
                weight: 0.6,
                label: 0,
                state: a.clone(),
            },
            Branch {
                weight: 0.4,
                label: 1,
                state: random_state(&[2, 2], &mut rng),
            },
        ])
        .unwrap();
        let d = check_cond_pure_distance(&rho, &rho).unwrap();
        // Normalization dust of order 1e-16 enters under a square root, so
        // the self-distance is zero only to about its square root.
        assert!(d.t <= 1e-7);
        assert!(d.tv_bound_ok && d.avg_branch_bound_ok);

        // Same weights, orthogonal branch states: T = Σ P(x) = 1.
        let zero = MultipartiteState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        let one = MultipartiteState::basis_state(vec![2, 2], &[1, 1]).unwrap();
        let flip = MultipartiteState::basis_state(vec![2, 2], &[0, 1]).unwrap();
        let other = MultipartiteState::basis_state(vec![2, 2], &[1, 0]).unwrap();
        let mk = |s1: &MultipartiteState, s2: &MultipartiteState| {
            ConditionallyPureState::new(vec![
                Branch {
                    weight: 0.5,
                    label: 0,
                    state: s1.clone(),
                },
                Branch {
                    weight: 0.5,
                    label: 1,
                    state: s2.clone(),
                },
            ])
            .unwrap()
        };
        let d = check_cond_pure_distance(&mk(&zero, &one), &mk(&flip, &other)).unwrap();
        assert!((d.t - 1.0).abs() <= 1e-12);
        assert!(d.tv_bound_ok && d.avg_branch_bound_ok);

        let mismatched = ConditionallyPureState::new(vec![Branch {
            weight: 1.0,
            label: 7,
            state: zero,
        }])
        .unwrap();
        assert!(matches!(
            check_cond_pure_distance(&rho, &mismatched),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn cond_pure_distance_matches_block_matrix_oracle() {
        // Oracle: embed both ensembles as explicit block-diagonal density
        // matrices (register as a tensor factor) and diagonalize.
        let mut rng = rng_from_seed(217);
        for _ in 0..10 {
            let dims = vec![2, 2];
            let labels = 3usize;
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let raw: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                ConditionallyPureState::new(
                    raw.iter()
                        .enumerate()
                        .map(|(i, w)| Branch {
                            weight: w / total,
                            label: i,
                            state: random_state(&dims, rng),
                        })
                        .collect(),
                )
                .unwrap()
            };
            let rho = mk(&mut rng);
            let sigma = mk(&mut rng);
            let d = check_cond_pure_distance(&rho, &sigma).unwrap();

            let dim = 4 * labels;
            let embed = |ens: &ConditionallyPureState| {
                let mut m = DMatrix::<Complex64>::zeros(dim, dim);
                for b in ens.branches() {
                    let amps = b.state.amps();
                    for r in 0..4 {
                        for cc in 0..4 {
                            m[(b.label * 4 + r, b.label * 4 + cc)] +=
                                Complex64::new(b.weight, 0.0) * amps[r] * amps[cc].conj();
                        }
                    }
                }
                DensityMatrix::new(m).unwrap()
            };
            let oracle = trace_distance(&embed(&rho), &embed(&sigma)).unwrap();
            assert!((d.t - oracle).abs() <= 1e-10, "block {} oracle {}", d.t, oracle);
            assert!(d.tv_bound_ok && d.avg_branch_bound_ok);
        }
    }

    #[test]
    fn outcome_mass_trivial_cases() {
        let mut rng = rng_from_seed(219);
        let psi = random_state(&[2, 2], &mut rng);
        let protocol = random_protocol(&[2, 2], 2, 2, 5).unwrap();
        let r = check_outcome_prob_lower(&psi, &psi, &protocol, 0.1).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!((r.mass - 1.0).abs() <= 1e-10);
        assert!(r.ok);

        let phi = random_state(&[2, 2], &mut rng);
        let r = check_outcome_prob_lower(&psi, &phi, &protocol, 1.0).unwrap();
        assert!((r.mass - 1.0).abs() <= 1e-10, "every branch passes at ε′=1");
        assert!(r.ok);
        assert!(check_outcome_prob_lower(&psi, &phi, &protocol, 0.0).is_err());
    }

    #[test]
    fn outcome_mass_near_pairs_hold_the_bound() {
        let mut rng = rng_from_seed(221);
        let spec_eps: f64 = 1e-4;
        for seed in 0..10u64 {
            let psi = random_state(&[2, 2], &mut rng);
            // Feasible companion at squared overlap 1 − ε.
            let noise = random_state(&[2, 2], &mut rng);
            let ortho_amps: Vec<Complex64> = {
                let c0 = inner(&psi, &noise).unwrap();
                noise
                    .amps()
                    .iter()
                    .zip(psi.amps())
                    .map(|(&n, &p)| n - c0 * p)
                    .collect()
            };
            let ortho = MultipartiteState::new(vec![2, 2], ortho_amps)
                .unwrap()
                .normalized()
                .unwrap();
            let phi_amps: Vec<Complex64> = psi
                .amps()
                .iter()
                .zip(ortho.amps())
                .map(|(&p, &o)| {
                    Complex64::new((1.0 - spec_eps).sqrt(), 0.0) * p
                        + Complex64::new(spec_eps.sqrt(), 0.0) * o
                })
                .collect();
            let phi = MultipartiteState::new(vec![2, 2], phi_amps).unwrap();
            let protocol = random_protocol(&[2, 2], 1 + (seed as usize % 2), 2, 3000 + seed)
                .unwrap();
            let r = check_outcome_prob_lower(&psi, &phi, &protocol, 0.1).unwrap();
            assert!((r.epsilon - spec_eps).abs() <= 1e-9);
            assert!(r.bound > 0.9, "bound {}", r.bound);
            assert!(r.ok, "seed {seed} mass {} bound {}", r.mass, r.bound);
        }
    }

    #[test]
    fn max_eig_gap_is_controlled_by_distance() {
        let mut rng = rng_from_seed(223);
        let rho = random_density(4, &mut rng);
        let r = check_max_eig(&rho, &rho).unwrap();
        assert_eq!(r.gap, 0.0);
        assert!(r.ok);

        let diag = |entries: &[f64]| {
            DensityMatrix::new(DMatrix::from_fn(entries.len(), entries.len(), |i, j| {
                if i == j {
                    c(entries[i], 0.0)
                } else {
                    c(0.0, 0.0)
                }
            }))
            .unwrap()
        };
        let r = check_max_eig(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap();
        assert_eq!(r.gap, 0.0);
        assert!((r.t - 1.0).abs() <= 1e-12);
        assert!(r.ok);

        for _ in 0..50 {
            let a = random_density(6, &mut rng);
            let b = random_density(6, &mut rng);
            let r = check_max_eig(&a, &b).unwrap();
            assert!(r.ok, "gap {} t {}", r.gap, r.t);
        }
    }

    #[test]
    fn protocol_on_tensor_power_factorizes() {
        let mut rng = rng_from_seed(225);
        let psi = random_state(&[2, 2], &mut rng);
        let ch = random_one_step(0, 2, 2, 2, 31).unwrap();
        let single = apply(&ch, &ConditionallyPureState::pure(&psi).unwrap()).unwrap();

        // Lift the channel to act on both factors of the grouped power:
        // Kraus K_{y1} ⊗ K_{y2}, register (y1, y2) encoded as y1·2 + y2.
        let mut f = Vec::new();
        let mut kraus = Vec::new();
        for y1 in 0..2 {
            for y2 in 0..2 {
                f.push(0);
                kraus.push(ch.kraus()[y1].kronecker(&ch.kraus()[y2]));
            }
        }
        let lifted = OneStepChannel::new(0, f, kraus, 1).unwrap();
        let power = psi.tensor_power(2).unwrap();
        let pair = apply(&lifted, &ConditionallyPureState::pure(&power).unwrap()).unwrap();

        assert_eq!(pair.branches().len(), 4);
        for b in pair.branches() {
            let (y1, y2) = (b.label / 2, b.label % 2);
            let s1 = &single.branches()[y1];
            let s2 = &single.branches()[y2];
            assert!((b.weight - s1.weight * s2.weight).abs() <= 1e-10);
            let product = tensor_product(&s1.state, &s2.state).unwrap();
            for (x, y) in b.state.amps().iter().zip(product.amps()) {
                assert!((x - y).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn register_discard_is_data_processing() {
        let mut rng = rng_from_seed(227);
        for seed in 0..10u64 {
            let psi = random_state(&[2, 2], &mut rng);
            let noise = random_state(&[2, 2], &mut rng);
            let mixed: Vec<Complex64> = psi
                .amps()
                .iter()
                .zip(noise.amps())
                .map(|(&p, &n)| {
                    Complex64::new(0.98f64.sqrt(), 0.0) * p
                        + Complex64::new(0.02f64.sqrt(), 0.0) * n
                })
                .collect();
            let phi = MultipartiteState::new(vec![2, 2], mixed)
                .unwrap()
                .normalized()
                .unwrap();
            let protocol = random_protocol(&[2, 2], 2, 2, 4000 + seed).unwrap();
            let rho = compose_and_discard(&protocol, &psi).unwrap();
            let sigma = compose_and_discard(&protocol, &phi).unwrap();
            let labeled = check_cond_pure_distance(&rho, &sigma).unwrap().t;
            let merged = trace_distance(
                &merged_density(&rho).unwrap(),
                &merged_density(&sigma).unwrap(),
            )
            .unwrap();
            assert!(merged <= labeled + 1e-10, "merged {merged} labeled {labeled}");
        }
    }

    #[test]
    fn channel_validation_rejects_bad_input() {
        // Over-complete family.
        let id2 = DMatrix::<Complex64>::identity(2, 2);
        assert!(OneStepChannel::new(0, vec![0, 0], vec![id2.clone(), id2.clone()], 1).is_err());
        // Register image outside the alphabet.
        assert!(OneStepChannel::new(0, vec![1], vec![id2.clone()], 1).is_err());
        // Shape mismatch across outcomes.
        let id3 = DMatrix::<Complex64>::identity(3, 3);
        assert!(OneStepChannel::new(0, vec![0, 0], vec![id2.clone(), id3], 1).is_err());
        // Sub-normalized channels pass but are flagged.
        let half = id2.clone() * c(0.5f64.sqrt(), 0.0);
        let ch = OneStepChannel::new(0, vec![0], vec![half], 1).unwrap();
        assert!(!ch.is_trace_preserving());
        // Alphabet mismatch on application.
        let mut rng = rng_from_seed(229);
        let psi = random_state(&[2, 2], &mut rng);
        let branch = ConditionallyPureState::new(vec![Branch {
            weight: 1.0,
            label: 3,
            state: psi,
        }])
        .unwrap();
        let ch = identity_channel(0, 2);
        assert!(matches!(apply(&ch, &branch), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn filtering_protocols_lose_weight_but_keep_valid_ensembles() {
        let mut rng = rng_from_seed(231);
        let psi = random_state(&[2, 2], &mut rng);
        // Keep only the |0⟩ outcome on party 0.
        let mut k = DMatrix::<Complex64>::zeros(2, 2);
        k[(0, 0)] = c(1.0, 0.0);
        let filter = OneStepChannel::new(0, vec![0], vec![k], 1).unwrap();
        assert!(!filter.is_trace_preserving());
        let out = compose_and_discard(&[filter], &psi).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert!(out.total_weight() < 1.0);
        assert!(out.branches()[0].state.is_unit());
    }

    #[test]
    fn smoothing_interplay_smoke() {
        // The optimizer's achiever is itself a valid protocol input: the
        // ensemble machinery accepts any unit state it produces.
        let mut rng = rng_from_seed(233);
        let psi = random_state(&[2, 2], &mut rng);
        let spec = MeasureSpec::uniform_shannon_cuts(2).unwrap();
        let opt = OptConfig {
            restarts: 2,
            max_iters: 50,
            ..OptConfig::default()
        };
        let smoothed = smooth_infimum_estimate(&spec, &psi, 0.05, &opt).unwrap();
        let achiever = smoothed.achiever.unwrap();
        let protocol = random_protocol(&[2, 2], 1, 2, 17).unwrap();
        let out = compose_and_discard(&protocol, &achiever).unwrap();
        assert!((out.total_weight() - 1.0).abs() <= 1e-10);
        let b = Bipartition::single(0, 2).unwrap();
        for branch in out.branches() {
            assert!(crate::tensor::marginal(&branch.state, &b).is_ok());
        }
    }
}
