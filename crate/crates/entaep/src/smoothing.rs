//! ε-smoothing and regularization over tensor powers: exact type-class
//! spectra of product distributions, greedy max-entropy smoothing, the
//! typical-subspace projector with its fidelity certificate, a
//! projected-gradient optimizer bounding the smoothing infimum from above,
//! and the per-copy estimate table.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{FromPrimitive, ToPrimitive, Zero};

use crate::entropy::{Distribution, SUPPORT_THRESHOLD};
use crate::error::{Error, Result};
use crate::measures::{evaluate, MeasureKind, MeasureSpec};
use crate::random::{random_state, rng_from_seed};
use crate::tensor::{
    inner, marginal, reshape_by_cut, scatter_by_cut, schmidt, Bipartition, MultipartiteState,
    TOTAL_DIM_CAP,
};

/// Caps for type-class enumeration: alphabet size, copy count, and the
/// number of type classes C(n+m-1, m-1).
pub const TYPE_ALPHABET_CAP: usize = 6;
pub const TYPE_COPIES_CAP: usize = 200;
pub const TYPE_ENTRY_CAP: f64 = 5e6;

/// One type class of strings over the support alphabet: its letter
/// frequencies, the shared per-string probability (kept in log2 form since
/// the linear value can underflow), and the exact string count.
#[derive(Debug, Clone)]
pub struct TypeClassEntry {
    pub counts: Vec<u32>,
    pub log2_prob: f64,
    pub prob: f64,
    pub multiplicity: BigUint,
    pub class_mass: f64,
}

/// The exact spectrum of an n-fold product distribution organized by type
/// class, in lexicographic order of the frequency vectors.
#[derive(Debug, Clone)]
pub struct TypeClassSpectrum {
    base: Distribution,
    n: usize,
    entries: Vec<TypeClassEntry>,
}

impl TypeClassSpectrum {
    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn copies(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[TypeClassEntry] {
        &self.entries
    }
}

fn factorial_table(n: usize) -> Vec<BigUint> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(BigUint::from(1u32));
    for i in 1..=n {
        let next = table.last().unwrap() * BigUint::from(i);
        table.push(next);
    }
    table
}

fn composition_count(n: usize, m: usize) -> f64 {
    let mut count = 1.0;
    for i in 1..m {
        count *= (n + i) as f64 / i as f64;
    }
    count
}

fn for_each_composition(
    remaining: u32,
    m: usize,
    scratch: &mut [u32],
    index: usize,
    visit: &mut impl FnMut(&[u32]),
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

/// Enumerates the spectrum of the n-fold product of P by type class.
/// Zero-weight atoms never occur in strings, so the enumeration runs over
/// the support only.
pub fn product_type_spectrum(p: &Distribution, n: usize) -> Result<TypeClassSpectrum> {
    if !p.is_normalized() {
        return Err(Error::NotNormalized(p.sum()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    if n > TYPE_COPIES_CAP {
        return Err(Error::SizeLimit(format!(
            "type enumeration supports n <= {TYPE_COPIES_CAP}, got {n}"
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
    if m > TYPE_ALPHABET_CAP {
        return Err(Error::SizeLimit(format!(
            "type enumeration supports alphabets up to {TYPE_ALPHABET_CAP}, got {m}"
        )));
    }
    let entry_count = composition_count(n, m);
    if entry_count > TYPE_ENTRY_CAP {
        return Err(Error::SizeLimit(format!(
            "type enumeration would hold {entry_count:.3e} classes, cap is {TYPE_ENTRY_CAP:.0e}"
        )));
    }

    let log2_support: Vec<f64> = support.iter().map(|w| w.log2()).collect();
    let factorials = factorial_table(n);
    let mut entries = Vec::with_capacity(entry_count as usize);
    let mut scratch = vec![0u32; m];
    for_each_composition(n as u32, m, &mut scratch, 0, &mut |counts| {
        let mut log2_prob = 0.0;
        let mut denom = BigUint::from(1u32);
        for (i, &t) in counts.iter().enumerate() {
            if t > 0 {
                log2_prob += t as f64 * log2_support[i];
                denom *= &factorials[t as usize];
            }
        }
        let multiplicity = &factorials[n] / denom;
        let log2_mult = multiplicity.to_f64().unwrap_or(f64::INFINITY).log2();
        entries.push(TypeClassEntry {
            counts: counts.to_vec(),
            log2_prob,
            prob: log2_prob.exp2(),
            multiplicity,
            class_mass: (log2_mult + log2_prob).exp2(),
        });
    });

    // Exact string count and total mass are internal consistency checks.
    let total: BigUint = entries.iter().map(|e| &e.multiplicity).sum();
    if total != BigUint::from(m).pow(n as u32) {
        return Err(Error::InvalidParameter(
            "type multiplicities fail to account for every string".into(),
        ));
    }
    let mass: f64 = entries.iter().map(|e| e.class_mass).sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(mass));
    }

    Ok(TypeClassSpectrum {
        base: Distribution::normalized(support).expect("support of a normalized distribution"),
        n,
        entries,
    })
}

/// Minimal support size reachable by removing atoms of smallest weight
/// whose cumulative mass stays at or below ε.
pub fn smooth_support(p: &Distribution, epsilon: f64) -> Result<usize> {
    if !p.is_normalized() {
        return Err(Error::NotNormalized(p.sum()));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs epsilon in [0,1), got {epsilon}"
        )));
    }
    let mut support: Vec<f64> = p
        .weights()
        .iter()
        .cloned()
        .filter(|&w| w > SUPPORT_THRESHOLD)
        .collect();
    support.sort_by(f64::total_cmp);
    let mut removed_mass = 0.0;
    let mut removed = 0;
    for &w in &support {
        if removed_mass + w <= epsilon {
            removed_mass += w;
            removed += 1;
        } else {
            break;
        }
    }
    Ok(support.len() - removed)
}

/// Greedy keep-most-probable sweep over a type-class spectrum: returns the
/// exact number of kept strings and the kept mass, stopping as soon as the
/// kept mass reaches 1 − budget. Ties in per-string probability keep the
/// lexicographically earlier class; a partially kept class keeps the
/// minimal string count that reaches the target.
fn greedy_keep(spectrum: &TypeClassSpectrum, budget: f64) -> (BigUint, f64) {
    let target = 1.0 - budget;
    let mut order: Vec<usize> = (0..spectrum.entries.len()).collect();
    // Stable sort, so equal probabilities stay in lexicographic order.
    order.sort_by(|&i, &j| {
        spectrum.entries[j]
            .log2_prob
            .total_cmp(&spectrum.entries[i].log2_prob)
    });
    let mut kept_mass = 0.0f64;
    let mut count = BigUint::zero();
    for &idx in &order {
        if kept_mass >= target {
            break;
        }
        let e = &spectrum.entries[idx];
        let remaining = target - kept_mass;
        if e.class_mass < remaining || e.prob <= 0.0 {
            kept_mass += e.class_mass;
            count += &e.multiplicity;
            continue;
        }
        // The 1e-12 backoff keeps rounding dust from forcing one extra string.
        let raw = (remaining / e.prob - 1e-12).ceil().max(1.0);
        let take = BigUint::from_f64(raw).unwrap_or_else(|| e.multiplicity.clone());
        if take >= e.multiplicity {
            kept_mass += e.class_mass;
            count += &e.multiplicity;
            continue;
        }
        kept_mass += raw * e.prob;
        count += take;
        break;
    }
    (count, kept_mass)
}

/// Per-copy smoothed max-entropy of the n-fold product of P: sorts the
/// product spectrum descending, keeps the most probable strings until the
/// kept mass reaches 1 − ε, and returns log₂(kept count)/n.
pub fn regularized_smooth_h0(p: &Distribution, epsilon: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs epsilon in [0,1), got {epsilon}"
        )));
    }
    let spectrum = product_type_spectrum(p, n)?;
    let (count, _) = greedy_keep(&spectrum, epsilon);
    Ok(count.to_f64().unwrap_or(f64::INFINITY).log2() / n as f64)
}

/// Outcome of a smoothing construction: the certified value, the smoothing
/// ball radius, the copy count, and the witness. Projector-based results
/// carry per-cut rank bounds and tail masses (and an explicit achiever
/// when the power fits in memory); optimizer results always carry an
/// explicit achiever and leave the per-cut data empty.
#[derive(Debug, Clone)]
pub struct SmoothingResult {
    /// Certified upper bound, in bits (for the projector: Σ_j log₂ r'_j on
    /// the n-copy state; for the optimizer: the measure at the achiever).
    pub value: f64,
    pub epsilon: f64,
    pub n: usize,
    /// Guaranteed squared overlap with the target: union-bound certificate
    /// for the projector, measured overlap for the optimizer. Lies in
    /// [1−ε, 1].
    pub certificate: f64,
    /// Kept-rank bound per single-party cut (empty for optimizer results).
    pub rank_bounds: Vec<BigUint>,
    /// Discarded spectral mass per cut (empty for optimizer results).
    pub tails: Vec<f64>,
    pub achiever: Option<MultipartiteState>,
    /// ‖Pψ^{⊗n}‖² in explicit projector mode, |⟨φ|ψ⟩|² for the optimizer.
    pub measured_fidelity: Option<f64>,
}

/// Builds the typical-subspace data for ψ^{⊗n}: per single-party cut j the
/// minimal kept rank r'_j whose spectral tail is at most ε/k, with the
/// union-bound fidelity certificate 1 − Σ_j tail_j ≥ 1 − ε. When the
/// explicit power fits under the dimension cap, the projected state
/// Pψ^{⊗n}/‖·‖ is returned along with its measured overlap.
pub fn typical_projector(
    psi: &MultipartiteState,
    n: usize,
    epsilon: f64,
) -> Result<SmoothingResult> {
    psi.require_unit()?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs epsilon in [0,1), got {epsilon}"
        )));
    }
    let k = psi.num_parties();
    if k < 2 {
        return Err(Error::InvalidBipartition(
            "typical projector needs at least two parties".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    let budget = epsilon / k as f64;

    let mut rank_bounds = Vec::with_capacity(k);
    let mut tails = Vec::with_capacity(k);
    let mut value = 0.0;
    for j in 0..k {
        let cut = Bipartition::single(j, k)?;
        let coeffs = schmidt(psi, &cut)?.coefficients;
        let spectrum = product_type_spectrum(&coeffs, n)?;
        let (count, kept) = greedy_keep(&spectrum, budget);
        value += count.to_f64().unwrap_or(f64::INFINITY).log2();
        tails.push((1.0 - kept).max(0.0));
        rank_bounds.push(count);
    }
    let certificate = (1.0 - tails.iter().sum::<f64>()).min(1.0);

    // Explicit mode: total dimension of the power within the state cap.
    let mut power_dim: u128 = 1;
    let mut explicit = true;
    for _ in 0..n {
        power_dim = power_dim.saturating_mul(psi.total_dim() as u128);
        if power_dim > TOTAL_DIM_CAP as u128 {
            explicit = false;
            break;
        }
    }

    let (achiever, measured_fidelity) = if explicit {
        let power = psi.tensor_power(n)?;
        let mut projected = power.clone();
        for (j, bound) in rank_bounds.iter().enumerate() {
            let cut = Bipartition::single(j, k)?;
            let s = schmidt(&power, &cut)?;
            let keep = bound
                .to_usize()
                .unwrap_or(usize::MAX)
                .min(s.rank());
            let dim_j = power.dims()[j];
            let basis = DMatrix::from_fn(dim_j, keep, |r, c| s.left[c][r]);
            let compressed = crate::tensor::apply_on_party(&projected, j, &basis.adjoint())?;
            projected = crate::tensor::apply_on_party(&compressed, j, &basis)?;
        }
        let measured = projected.norm_sq().clamp(0.0, 1.0);
        (Some(projected.normalized()?), Some(measured))
    } else {
        (None, None)
    };

    Ok(SmoothingResult {
        value,
        epsilon,
        n,
        certificate,
        rank_bounds,
        tails,
        achiever,
        measured_fidelity,
    })
}

/// Settings for the projected-gradient upper-bound search.
#[derive(Debug, Clone)]
pub struct OptConfig {
    /// Random restarts added on top of the deterministic starting points.
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once the relative improvement of a step falls below this.
    pub rel_improvement: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 5000,
            rel_improvement: 1e-8,
            initial_step: 0.25,
            seed: 0,
        }
    }
}

/// Dimension cap for the explicit optimizer.
pub const OPTIMIZER_DIM_CAP: usize = 1 << 10;

/// Projects a vector onto the feasible set {φ unit : |⟨ψ|φ⟩|² ≥ 1−ε}: the
/// vector is normalized and, if outside the spherical cap about ψ, moved
/// to the nearest cap boundary point (phase-aligned with ψ).
fn cap_project(
    v: &MultipartiteState,
    psi: &MultipartiteState,
    epsilon: f64,
) -> Result<MultipartiteState> {
    let unit = v.normalized()?;
    let c = inner(psi, &unit)?;
    if c.norm_sqr() >= 1.0 - epsilon {
        return Ok(unit);
    }
    let phase = if c.norm() > 0.0 {
        c / c.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    // Orthogonal component of v relative to ψ.
    let mut w: Vec<Complex64> = unit
        .amps()
        .iter()
        .zip(psi.amps())
        .map(|(&a, &p)| a - c * p)
        .collect();
    let wn: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if wn <= 1e-15 {
        return Ok(psi.clone());
    }
    let ca = Complex64::new((1.0 - epsilon).sqrt(), 0.0) * phase;
    let cb = Complex64::new((epsilon.max(0.0)).sqrt() / wn, 0.0);
    for (wi, &pi) in w.iter_mut().zip(psi.amps()) {
        *wi = ca * pi + cb * *wi;
    }
    MultipartiteState::new(psi.dims().to_vec(), w)
}

/// Gradient of the measure with respect to the conjugate amplitudes of a
/// unit state, accumulated over the canonical terms. Zero-order terms are
/// locally constant and contribute nothing.
fn measure_gradient(
    terms: &[(Bipartition, f64, f64)],
    phi: &MultipartiteState,
) -> Result<Vec<Complex64>> {
    const LN2: f64 = std::f64::consts::LN_2;
    let mut grad = vec![Complex64::new(0.0, 0.0); phi.total_dim()];
    for (b, weight, alpha) in terms {
        if *alpha == 0.0 {
            continue;
        }
        let rho = marginal(phi, b)?;
        let (vals, vecs) = rho.eigen_pairs();
        let dim = rho.dim();
        // Scalar derivative of the entropy through the eigenvalues.
        let f: Vec<f64> = if *alpha == 1.0 {
            vals.iter()
                .map(|&l| -(l.max(1e-18).log2() + 1.0 / LN2))
                .collect()
        } else {
            let power_sum: f64 = vals.iter().map(|&l| l.max(0.0).powf(*alpha)).sum();
            let coeff = *alpha / ((1.0 - *alpha) * LN2 * power_sum.max(1e-300));
            vals.iter()
                .map(|&l| coeff * l.max(1e-12).powf(*alpha - 1.0))
                .collect()
        };
        let mut g = DMatrix::<Complex64>::zeros(dim, dim);
        for (i, &fi) in f.iter().enumerate() {
            let col = vecs.column(i);
            for r in 0..dim {
                for c in 0..dim {
                    g[(r, c)] += Complex64::new(fi, 0.0) * col[r] * col[c].conj();
                }
            }
        }
        let (a, _, _) = reshape_by_cut(phi, b)?;
        let contribution = &g * &a;
        let flat = scatter_by_cut(&contribution, phi.dims(), b);
        for (acc, z) in grad.iter_mut().zip(flat) {
            *acc += Complex64::new(*weight, 0.0) * z;
        }
    }
    Ok(grad)
}

/// Upper-bounds the ε-smoothed measure at ψ by projected-gradient descent
/// on the unit sphere intersected with the overlap cap, over the default
/// deterministic starting points plus random restarts. The returned value
/// is E at a feasible point, so it certifies an upper bound; `warm` adds
/// caller-supplied starting points (projected into the cap first).
pub fn smooth_infimum_estimate_seeded(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    epsilon: f64,
    opt: &OptConfig,
    warm: &[MultipartiteState],
) -> Result<SmoothingResult> {
    psi.require_unit()?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs epsilon in [0,1), got {epsilon}"
        )));
    }
    if psi.total_dim() > OPTIMIZER_DIM_CAP {
        return Err(Error::SizeLimit(format!(
            "explicit optimizer supports total dimension up to {OPTIMIZER_DIM_CAP}, got {}",
            psi.total_dim()
        )));
    }
    let k = psi.num_parties();
    let terms = spec.canonical_terms(k)?;
    let value_at = |phi: &MultipartiteState| evaluate(spec, phi);

    let base_value = value_at(psi)?;
    if epsilon == 0.0 {
        return Ok(SmoothingResult {
            value: base_value,
            epsilon,
            n: 1,
            certificate: 1.0,
            rank_bounds: Vec::new(),
            tails: Vec::new(),
            achiever: Some(psi.clone()),
            measured_fidelity: Some(1.0),
        });
    }

    // Deterministic starts: ψ itself, the typical-projector achiever, and
    // the per-cut truncations spending the whole budget on one cut.
    let mut starts: Vec<MultipartiteState> = vec![psi.clone()];
    if let Ok(tp) = typical_projector(psi, 1, epsilon) {
        if let Some(achiever) = tp.achiever {
            starts.push(achiever);
        }
    }
    for j in 0..k {
        let cut = Bipartition::single(j, k)?;
        let s = schmidt(psi, &cut)?;
        let weights = s.coefficients.weights();
        let mut kept = 0.0;
        let mut keep = 0;
        for &w in weights {
            kept += w;
            keep += 1;
            if kept >= 1.0 - epsilon {
                break;
            }
        }
        if keep < s.rank() {
            let (_, dim_b, dim_c) = reshape_by_cut(psi, &cut)?;
            let mut truncated = DMatrix::<Complex64>::zeros(dim_b, dim_c);
            for i in 0..keep {
                let sigma = weights[i].sqrt();
                for x in 0..dim_b {
                    for y in 0..dim_c {
                        truncated[(x, y)] +=
                            Complex64::new(sigma, 0.0) * s.left[i][x] * s.right[i][y];
                    }
                }
            }
            let amps = scatter_by_cut(&truncated, psi.dims(), &cut);
            if let Ok(state) = MultipartiteState::new(psi.dims().to_vec(), amps) {
                if state.norm_sq() > 0.0 {
                    starts.push(state);
                }
            }
        }
    }
    starts.extend_from_slice(warm);
    let mut rng = rng_from_seed(opt.seed);
    for _ in 0..opt.restarts {
        starts.push(random_state(psi.dims(), &mut rng));
    }

    let mut best: Option<(f64, MultipartiteState)> = None;
    for start in &starts {
        let mut phi = cap_project(start, psi, epsilon)?;
        let mut value = value_at(&phi)?;
        if best.as_ref().map_or(true, |(bv, _)| value < *bv) {
            best = Some((value, phi.clone()));
        }
        let mut step = opt.initial_step;
        for _ in 0..opt.max_iters {
            let grad = measure_gradient(&terms, &phi)?;
            let radial = inner(&phi, &MultipartiteState::new(phi.dims().to_vec(), grad.clone())?)?;
            let tangent: Vec<Complex64> = grad
                .iter()
                .zip(phi.amps())
                .map(|(&g, &p)| g - radial * p)
                .collect();
            let tangent_norm_sq: f64 = tangent.iter().map(|z| z.norm_sqr()).sum();
            if tangent_norm_sq < 1e-28 {
                break;
            }
            let stepped: Vec<Complex64> = phi
                .amps()
                .iter()
                .zip(&tangent)
                .map(|(&p, &t)| p - Complex64::new(step, 0.0) * t)
                .collect();
            let candidate = cap_project(
                &MultipartiteState::new(phi.dims().to_vec(), stepped)?,
                psi,
                epsilon,
            )?;
            let cand_value = value_at(&candidate)?;
            if cand_value < value {
                let rel = (value - cand_value) / value.abs().max(1.0);
                phi = candidate;
                value = cand_value;
                step = (step * 1.25).min(1.0);
                if rel < opt.rel_improvement {
                    break;
                }
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        if value < best.as_ref().map_or(f64::INFINITY, |(bv, _)| *bv) {
            best = Some((value, phi));
        }
    }

    let (value, achiever) = best.expect("at least one starting point");
    // Feasibility is re-verified on the returned point, never assumed.
    let overlap = inner(psi, &achiever)?.norm_sqr().clamp(0.0, 1.0);
    if overlap < 1.0 - epsilon - 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "optimizer produced an infeasible point with overlap {overlap}"
        )));
    }
    Ok(SmoothingResult {
        value: value.min(base_value),
        epsilon,
        n: 1,
        certificate: overlap,
        rank_bounds: Vec::new(),
        tails: Vec::new(),
        achiever: Some(achiever),
        measured_fidelity: Some(overlap),
    })
}

/// `smooth_infimum_estimate_seeded` with no extra starting points.
pub fn smooth_infimum_estimate(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    epsilon: f64,
    opt: &OptConfig,
) -> Result<SmoothingResult> {
    smooth_infimum_estimate_seeded(spec, psi, epsilon, opt, &[])
}

/// One row of the per-copy estimate table.
#[derive(Debug, Clone)]
pub struct PhiRow {
    pub n: usize,
    /// Best certified upper bound on (1/n) of the smoothed measure at ψ^{⊗n}.
    pub value: f64,
    /// Squared-overlap guarantee of the winning candidate's witness.
    pub certificate: f64,
    /// value − analytic limit.
    pub gap: f64,
    /// Kept-rank bounds per distinct cut from the spectral candidate
    /// (empty when that candidate was unavailable).
    pub rank_bounds: Vec<BigUint>,
}

/// Per-copy estimate table with the analytic limit Σ θ_b H(Tr_b ψ).
#[derive(Debug, Clone)]
pub struct PhiEstimate {
    pub analytic_limit: f64,
    pub rows: Vec<PhiRow>,
}

/// Estimates (1/n)·(smoothed measure at ψ^{⊗n}) for each n, taking the
/// best of three certified upper bounds: the additivity bound E(ψ) with
/// the power itself as witness; for single-cut measures the typical
/// projector truncation, which bounds every Rényi order by the kept
/// log-rank; and for small powers the explicit optimizer.
pub fn phi_estimate(
    spec: &MeasureSpec,
    psi: &MultipartiteState,
    epsilon: f64,
    n_list: &[usize],
) -> Result<PhiEstimate> {
    psi.require_unit()?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs epsilon in [0,1), got {epsilon}"
        )));
    }
    let k = psi.num_parties();
    let terms = spec.canonical_terms(k)?;
    let mut analytic_limit = 0.0;
    for (b, w, _) in &terms {
        analytic_limit += w * crate::entropy::marginal_entropy(psi, b, 1.0)?;
    }
    let additivity_value = evaluate(spec, psi)?;

    // Distinct cuts and their single-copy Schmidt coefficients, for the
    // spectral candidate (single-party cuts only: their projectors act on
    // disjoint parties, so the product projector is well defined).
    let spectral_cuts: Option<Vec<(Bipartition, Distribution)>> =
        if spec.kind() == MeasureKind::WeightedMarginalRenyi {
            let mut cuts: Vec<(Bipartition, Distribution)> = Vec::new();
            for (b, _, _) in &terms {
                if cuts.iter().all(|(cb, _)| cb != b) {
                    cuts.push((b.clone(), schmidt(psi, b)?.coefficients));
                }
            }
            Some(cuts)
        } else {
            None
        };

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one copy".into()));
        }
        // Candidate 1: additivity, witnessed by ψ^{⊗n} itself.
        let mut value = additivity_value;
        let mut certificate = 1.0;
        let mut rank_bounds: Vec<BigUint> = Vec::new();

        // Candidate 2: per-cut typical truncation with budget ε/#cuts.
        if let Some(cuts) = &spectral_cuts {
            let budget = epsilon / cuts.len() as f64;
            let mut per_cut: Vec<(Bipartition, BigUint, f64)> = Vec::with_capacity(cuts.len());
            let mut ok = true;
            for (b, coeffs) in cuts {
                match product_type_spectrum(coeffs, n) {
                    Ok(spectrum) => {
                        let (count, kept) = greedy_keep(&spectrum, budget);
                        per_cut.push((b.clone(), count, (1.0 - kept).max(0.0)));
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let mut spectral_value = 0.0;
                for (b, w, _) in &terms {
                    let (_, count, _) = per_cut
                        .iter()
                        .find(|(cb, _, _)| cb == b)
                        .expect("every term cut was enumerated");
                    spectral_value +=
                        w * count.to_f64().unwrap_or(f64::INFINITY).log2() / n as f64;
                }
                let spectral_cert =
                    (1.0 - per_cut.iter().map(|(_, _, t)| t).sum::<f64>()).min(1.0);
                if spectral_value < value {
                    value = spectral_value;
                    certificate = spectral_cert;
                }
                rank_bounds = per_cut.into_iter().map(|(_, c, _)| c).collect();
            }
        }

        // Candidate 3: explicit optimizer on the power, when it fits.
        let mut power_dim: u128 = 1;
        let mut fits = true;
        for _ in 0..n {
            power_dim = power_dim.saturating_mul(psi.total_dim() as u128);
            if power_dim > OPTIMIZER_DIM_CAP as u128 {
                fits = false;
                break;
            }
        }
        if fits {
            let power = psi.tensor_power(n)?;
            let result =
                smooth_infimum_estimate(spec, &power, epsilon, &OptConfig::default())?;
            let per_copy = result.value / n as f64;
            if per_copy < value {
                value = per_copy;
                certificate = result.certificate;
            }
        }

        rows.push(PhiRow {
            n,
            value,
            certificate,
            gap: value - analytic_limit,
            rank_bounds,
        });
    }

    Ok(PhiEstimate {
        analytic_limit,
        rows,
    })
}
