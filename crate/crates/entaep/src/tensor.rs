//! Dense k-partite pure states and the exact linear algebra on them:
//! tensor products, direct sums, marginals, Schmidt decompositions, and
//! trace distances.
//!
//! Amplitudes are stored flat in row-major multi-index order: the flat
//! index of the multi-index (x_0, ..., x_{k-1}) is Σ x_i · s_i with
//! strides s_i = Π_{j>i} d_j. Every embedding below is defined against
//! this layout so that examples are bit-for-bit reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::entropy::Distribution;
use crate::error::{Error, Result};

/// Largest total dimension for explicitly stored states. Larger objects
/// exist only through spectral or type-class representations.
pub const TOTAL_DIM_CAP: usize = 1 << 16;

/// Tolerance on |‖ψ‖² − 1| for a state to count as a unit vector.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Tolerance for Hermiticity and positive semidefiniteness checks.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Squared Schmidt coefficients at or below this value are dropped.
pub const SCHMIDT_COEFFICIENT_FLOOR: f64 = 1e-12;

/// A pure state of k parties as a dense amplitude vector with per-party
/// local dimensions. Unnormalized vectors are permitted; operations that
/// need a unit vector say so and check.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipartiteState {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl MultipartiteState {
    /// Builds a state from local dimensions and a flat amplitude vector in
    /// row-major multi-index order.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter(
                "a state needs at least one party".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "every local dimension must be positive".into(),
            ));
        }
        let total = checked_product(&dims)?;
        if amps.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector has length {}, dims require {}",
                amps.len(),
                total
            )));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state |x_0 ... x_{k-1}⟩.
    pub fn basis_state(dims: Vec<usize>, multi: &[usize]) -> Result<Self> {
        let total = checked_product(&dims)?;
        let flat = multi_to_flat(&dims, multi)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        amps[flat] = Complex64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn require_unit(&self) -> Result<()> {
        if self.is_unit() {
            Ok(())
        } else {
            Err(Error::NotUnit(self.norm_sq()))
        }
    }

    /// Scalar multiple of the state.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            dims: self.dims.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Unit vector in the same direction.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    /// n-fold tensor power, n ≥ 1. Since `tensor_product` pairs parties
    /// factor-wise, the power of a k-party state is again a k-party state
    /// with local dimensions d_j^n: party j holds all n copies of the
    /// original party j. Cuts and marginals of powers are defined against
    /// this grouping.
    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "tensor power needs n >= 1".into(),
            ));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = tensor_product(&acc, self)?;
        }
        Ok(acc)
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    let mut total: usize = 1;
    for &d in dims {
        total = total
            .checked_mul(d)
            .ok_or_else(|| Error::SizeLimit("total dimension overflows".into()))?;
        if total > TOTAL_DIM_CAP {
            return Err(Error::SizeLimit(format!(
                "total dimension exceeds the explicit-state cap {TOTAL_DIM_CAP}"
            )));
        }
    }
    Ok(total)
}

/// Row-major strides for the given local dimensions.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat index of a multi-index under row-major layout.
pub fn multi_to_flat(dims: &[usize], multi: &[usize]) -> Result<usize> {
    if multi.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "multi-index has {} coordinates, state has {} parties",
            multi.len(),
            dims.len()
        )));
    }
    let mut flat = 0usize;
    for (i, (&x, &d)) in multi.iter().zip(dims).enumerate() {
        if x >= d {
            return Err(Error::InvalidParameter(format!(
                "coordinate {i} is {x}, local dimension is {d}"
            )));
        }
        flat = flat * d + x;
    }
    Ok(flat)
}

/// Multi-index of a flat index under row-major layout.
pub fn flat_to_multi(dims: &[usize], flat: usize) -> Vec<usize> {
    let mut multi = vec![0usize; dims.len()];
    let mut rest = flat;
    for i in (0..dims.len()).rev() {
        multi[i] = rest % dims[i];
        rest /= dims[i];
    }
    multi
}

/// Inner product ⟨a|b⟩, conjugating the first argument.
pub fn inner(a: &MultipartiteState, b: &MultipartiteState) -> Result<Complex64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!(
            "inner product needs equal dims, got {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Tensor product of two k-partite states. Party i of the result is the
/// pair of party-i spaces, its basis ordered with the first factor as
/// the major index.
pub fn tensor_product(
    a: &MultipartiteState,
    b: &MultipartiteState,
) -> Result<MultipartiteState> {
    if a.num_parties() != b.num_parties() {
        return Err(Error::DimensionMismatch(format!(
            "tensor product needs equal party counts, got {} and {}",
            a.num_parties(),
            b.num_parties()
        )));
    }
    let dims: Vec<usize> = a.dims.iter().zip(&b.dims).map(|(&x, &y)| x * y).collect();
    let total = checked_product(&dims)?;
    let out_strides = strides(&dims);

    // Flat offsets: combined coordinate is z_i = x_i * e_i + y_i, so the
    // flat index splits as off_a[x] + off_b[y].
    let mut off_a = vec![0usize; a.total_dim()];
    for (flat, off) in off_a.iter_mut().enumerate() {
        let multi = flat_to_multi(&a.dims, flat);
        *off = multi
            .iter()
            .enumerate()
            .map(|(i, &x)| x * b.dims[i] * out_strides[i])
            .sum();
    }
    let mut off_b = vec![0usize; b.total_dim()];
    for (flat, off) in off_b.iter_mut().enumerate() {
        let multi = flat_to_multi(&b.dims, flat);
        *off = multi
            .iter()
            .enumerate()
            .map(|(i, &y)| y * out_strides[i])
            .sum();
    }

    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    for (x, &ax) in a.amps.iter().enumerate() {
        for (y, &by) in b.amps.iter().enumerate() {
            amps[off_a[x] + off_b[y]] = ax * by;
        }
    }
    MultipartiteState::new(dims, amps)
}

/// Direct sum of two k-partite states on the enlarged spaces of dimension
/// d_i + e_i per party. The first summand occupies multi-indices with every
/// coordinate below d_i, the second those with every coordinate at or above
/// d_i; all cross blocks are zero. Inputs may carry scaling, so the squared
/// norms add.
pub fn direct_sum(a: &MultipartiteState, b: &MultipartiteState) -> Result<MultipartiteState> {
    if a.num_parties() != b.num_parties() {
        return Err(Error::DimensionMismatch(format!(
            "direct sum needs equal party counts, got {} and {}",
            a.num_parties(),
            b.num_parties()
        )));
    }
    let dims: Vec<usize> = a.dims.iter().zip(&b.dims).map(|(&x, &y)| x + y).collect();
    let total = checked_product(&dims)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    for (flat, &amp) in a.amps.iter().enumerate() {
        let multi = flat_to_multi(&a.dims, flat);
        amps[multi_to_flat(&dims, &multi)?] = amp;
    }
    for (flat, &amp) in b.amps.iter().enumerate() {
        let mut multi = flat_to_multi(&b.dims, flat);
        for (i, x) in multi.iter_mut().enumerate() {
            *x += a.dims[i];
        }
        amps[multi_to_flat(&dims, &multi)?] = amp;
    }
    MultipartiteState::new(dims, amps)
}

/// GHZ state (1/√r) Σ_{i<r} |i⟩^{⊗k} on k parties of local dimension r.
pub fn ghz(k: usize, r: usize) -> Result<MultipartiteState> {
    if k == 0 || r == 0 {
        return Err(Error::InvalidParameter(
            "ghz needs k >= 1 and r >= 1".into(),
        ));
    }
    let dims = vec![r; k];
    let total = checked_product(&dims)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    let weight = Complex64::new(1.0 / (r as f64).sqrt(), 0.0);
    for i in 0..r {
        let multi = vec![i; k];
        amps[multi_to_flat(&dims, &multi)?] = weight;
    }
    MultipartiteState::new(dims, amps)
}

/// Nonempty proper subset of the parties {0, ..., k-1}, held sorted.
/// Party indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bipartition {
    parties: Vec<usize>,
    k: usize,
}

impl Bipartition {
    pub fn new(parties: &[usize], k: usize) -> Result<Self> {
        let mut sorted: Vec<usize> = parties.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != parties.len() {
            return Err(Error::InvalidBipartition(
                "duplicate party index".into(),
            ));
        }
        if sorted.is_empty() || sorted.len() >= k {
            return Err(Error::InvalidBipartition(format!(
                "need a nonempty proper subset of {k} parties, got {} of them",
                sorted.len()
            )));
        }
        if let Some(&max) = sorted.last() {
            if max >= k {
                return Err(Error::InvalidBipartition(format!(
                    "party index {max} out of range for {k} parties"
                )));
            }
        }
        Ok(Self { parties: sorted, k })
    }

    /// The cut separating one party from the rest.
    pub fn single(party: usize, k: usize) -> Result<Self> {
        Self::new(&[party], k)
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn num_parties(&self) -> usize {
        self.k
    }

    pub fn contains(&self, party: usize) -> bool {
        self.parties.binary_search(&party).is_ok()
    }

    pub fn complement(&self) -> Self {
        let parties: Vec<usize> = (0..self.k).filter(|p| !self.contains(*p)).collect();
        Self {
            parties,
            k: self.k,
        }
    }
}

/// Hermitian positive semidefinite matrix with trace at most 1 (plus
/// tolerance) when built through `new`. Marginals of super-normalized
/// states use the internal constructor, which keeps the Hermiticity and
/// positivity checks but lets the trace equal the squared norm.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let dm = Self::from_hermitian(m)?;
        if dm.trace() > 1.0 + HERMITIAN_TOLERANCE {
            return Err(Error::NotPositive(dm.trace()));
        }
        Ok(dm)
    }

    fn from_hermitian(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut dev: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if dev > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian(dev));
        }
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        if let Some(&min) = eigvals.last() {
            if min < -HERMITIAN_TOLERANCE {
                return Err(Error::NotPositive(min));
            }
        }
        let eigvecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        Ok(Self {
            m,
            eigvals,
            eigvecs,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Eigenvalues in descending order, with rounding negatives clamped
    /// to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigvals.iter().map(|&v| v.max(0.0)).collect()
    }

    /// Eigenvalues (descending, clamped) with matching eigenvector columns.
    pub fn eigen_pairs(&self) -> (Vec<f64>, &DMatrix<Complex64>) {
        (self.eigenvalues(), &self.eigvecs)
    }

    /// Largest eigenvalue.
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigvals.first().cloned().unwrap_or(0.0).max(0.0)
    }
}

/// Splits the parties into cut side and complement and reshapes the
/// amplitude vector into a dim_b × dim_c matrix. Rows enumerate the cut's
/// parties in ascending party order, row-major; columns the complement
/// likewise.
pub(crate) fn reshape_by_cut(
    psi: &MultipartiteState,
    b: &Bipartition,
) -> Result<(DMatrix<Complex64>, usize, usize)> {
    if b.num_parties() != psi.num_parties() {
        return Err(Error::InvalidBipartition(format!(
            "bipartition is over {} parties, state has {}",
            b.num_parties(),
            psi.num_parties()
        )));
    }
    let k = psi.num_parties();
    let dims = psi.dims();
    let in_b: Vec<bool> = (0..k).map(|p| b.contains(p)).collect();
    let mut dim_b = 1usize;
    let mut dim_c = 1usize;
    for i in 0..k {
        if in_b[i] {
            dim_b *= dims[i];
        } else {
            dim_c *= dims[i];
        }
    }
    let mut stride_b = vec![0usize; k];
    let mut stride_c = vec![0usize; k];
    let mut sb = 1usize;
    let mut sc = 1usize;
    for i in (0..k).rev() {
        if in_b[i] {
            stride_b[i] = sb;
            sb *= dims[i];
        } else {
            stride_c[i] = sc;
            sc *= dims[i];
        }
    }
    let mut a = DMatrix::<Complex64>::zeros(dim_b, dim_c);
    for (flat, &amp) in psi.amps().iter().enumerate() {
        let multi = flat_to_multi(dims, flat);
        let mut ib = 0usize;
        let mut ic = 0usize;
        for i in 0..k {
            if in_b[i] {
                ib += multi[i] * stride_b[i];
            } else {
                ic += multi[i] * stride_c[i];
            }
        }
        a[(ib, ic)] = amp;
    }
    Ok((a, dim_b, dim_c))
}

/// Inverse of `reshape_by_cut`: scatters a dim_b × dim_c matrix back into
/// a flat amplitude vector for the given dims and cut.
pub(crate) fn scatter_by_cut(
    a: &DMatrix<Complex64>,
    dims: &[usize],
    b: &Bipartition,
) -> Vec<Complex64> {
    let k = dims.len();
    let in_b: Vec<bool> = (0..k).map(|p| b.contains(p)).collect();
    let mut stride_b = vec![0usize; k];
    let mut stride_c = vec![0usize; k];
    let mut sb = 1usize;
    let mut sc = 1usize;
    for i in (0..k).rev() {
        if in_b[i] {
            stride_b[i] = sb;
            sb *= dims[i];
        } else {
            stride_c[i] = sc;
            sc *= dims[i];
        }
    }
    let total: usize = dims.iter().product();
    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    for (flat, amp) in amps.iter_mut().enumerate() {
        let multi = flat_to_multi(dims, flat);
        let mut ib = 0usize;
        let mut ic = 0usize;
        for i in 0..k {
            if in_b[i] {
                ib += multi[i] * stride_b[i];
            } else {
                ic += multi[i] * stride_c[i];
            }
        }
        *amp = a[(ib, ic)];
    }
    amps
}

/// Reduced state on the parties in `b`, tracing out the complement. The
/// trace equals the squared norm of the input. Basis ordering follows
/// `reshape_by_cut`.
pub fn marginal(psi: &MultipartiteState, b: &Bipartition) -> Result<DensityMatrix> {
    let (a, _, _) = reshape_by_cut(psi, b)?;
    let rho = &a * a.adjoint();
    DensityMatrix::from_hermitian(rho)
}

/// Schmidt decomposition across a cut: squared coefficients descending,
/// plus matching orthonormal bases for the cut side (left) and the
/// complement (right). Coefficients at or below the floor are dropped, so
/// the length of `coefficients` is the Schmidt rank.
#[derive(Debug, Clone)]
pub struct SchmidtData {
    pub coefficients: Distribution,
    pub left: Vec<Vec<Complex64>>,
    pub right: Vec<Vec<Complex64>>,
}

impl SchmidtData {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }
}

/// Schmidt decomposition of a unit vector across the cut `b`. The
/// decomposition diagonalizes the smaller marginal and derives the other
/// side's basis by contraction, so the bases are consistent with each
/// other by construction.
pub fn schmidt(psi: &MultipartiteState, b: &Bipartition) -> Result<SchmidtData> {
    psi.require_unit()?;
    let (a, dim_b, dim_c) = reshape_by_cut(psi, b)?;
    let (vals, vecs, left_side) = if dim_b <= dim_c {
        let rho = &a * a.adjoint();
        let dm = DensityMatrix::from_hermitian(rho)?;
        let (vals, vecs) = dm.eigen_pairs();
        (vals, vecs.clone(), true)
    } else {
        // Marginal on the complement is the entrywise conjugate of A†A.
        let rho = (a.adjoint() * &a).conjugate();
        let dm = DensityMatrix::from_hermitian(rho)?;
        let (vals, vecs) = dm.eigen_pairs();
        (vals, vecs.clone(), false)
    };

    let mut coefficients = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, &lambda) in vals.iter().enumerate() {
        if lambda <= SCHMIDT_COEFFICIENT_FLOOR {
            break;
        }
        let sigma = lambda.sqrt();
        let v: DVector<Complex64> = vecs.column(i).clone_owned();
        if left_side {
            // f[c] = (1/σ) Σ_x A[x,c] conj(e[x]) = conj(A† e)[c] / σ
            let f: DVector<Complex64> =
                (a.adjoint() * &v).map(|z| z.conj() / sigma);
            left.push(v.iter().cloned().collect());
            right.push(f.iter().cloned().collect());
        } else {
            // e[x] = (1/σ) Σ_c A[x,c] conj(f[c])
            let e: DVector<Complex64> = (&a * v.map(|z| z.conj())).map(|z| z / sigma);
            left.push(e.iter().cloned().collect());
            right.push(v.iter().cloned().collect());
        }
        coefficients.push(lambda);
    }
    Ok(SchmidtData {
        coefficients: Distribution::renormalized(coefficients)?,
        left,
        right,
    })
}

/// Squared overlap |⟨φ|ψ⟩|² of two unit vectors, clamped to [0,1].
pub fn fidelity_sq(psi: &MultipartiteState, phi: &MultipartiteState) -> Result<f64> {
    psi.require_unit()?;
    phi.require_unit()?;
    let overlap = inner(phi, psi)?;
    Ok(overlap.norm_sqr().clamp(0.0, 1.0))
}

/// Trace distance between two unit vectors, √(1 − |⟨φ|ψ⟩|²).
pub fn trace_distance_pure(psi: &MultipartiteState, phi: &MultipartiteState) -> Result<f64> {
    let f = fidelity_sq(psi, phi)?;
    Ok((1.0 - f).max(0.0).sqrt())
}

/// Trace distance ½ Σ |eig(ρ − σ)| between density matrices.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance needs equal dims, got {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let diff = rho.matrix() - sigma.matrix();
    let eig = SymmetricEigen::new(diff);
    Ok(eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>() / 2.0)
}

/// Applies an operator to one party: the result has that party's local
/// dimension replaced by the operator's row count. The operator may be
/// rectangular (isometries, Kraus operators) and need not preserve norm.
pub fn apply_on_party(
    psi: &MultipartiteState,
    party: usize,
    op: &DMatrix<Complex64>,
) -> Result<MultipartiteState> {
    let k = psi.num_parties();
    if party >= k {
        return Err(Error::InvalidParameter(format!(
            "party index {party} out of range for {k} parties"
        )));
    }
    let d = psi.dims()[party];
    if op.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} columns, party {party} has dimension {d}",
            op.ncols()
        )));
    }
    let m = op.nrows();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "operator must have at least one row".into(),
        ));
    }
    let mut new_dims = psi.dims().to_vec();
    new_dims[party] = m;
    let new_total = checked_product(&new_dims)?;
    let new_strides = strides(&new_dims);
    let old_strides = strides(psi.dims());
    // The party's own stride only involves later dims, so it is unchanged.
    let fiber_stride = old_strides[party];

    let mut out = vec![Complex64::new(0.0, 0.0); new_total];
    for flat in 0..psi.total_dim() {
        let multi = flat_to_multi(psi.dims(), flat);
        if multi[party] != 0 {
            continue;
        }
        let new_base: usize = multi
            .iter()
            .zip(&new_strides)
            .map(|(&x, &s)| x * s)
            .sum();
        for r in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..d {
                acc += op[(r, x)] * psi.amps()[flat + x * fiber_stride];
            }
            out[new_base + r * fiber_stride] = acc;
        }
    }
    MultipartiteState::new(new_dims, out)
}

/// Reorders the parties: party i of the result is party `perm[i]` of the
/// input.
pub fn permute_parties(psi: &MultipartiteState, perm: &[usize]) -> Result<MultipartiteState> {
    let k = psi.num_parties();
    if perm.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "permutation has length {}, state has {k} parties",
            perm.len()
        )));
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::InvalidParameter(
                "not a permutation of the parties".into(),
            ));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| psi.dims()[p]).collect();
    let new_strides = strides(&new_dims);
    let mut out = vec![Complex64::new(0.0, 0.0); psi.total_dim()];
    for (flat, &amp) in psi.amps().iter().enumerate() {
        let multi = flat_to_multi(psi.dims(), flat);
        let new_flat: usize = perm
            .iter()
            .enumerate()
            .map(|(i, &p)| multi[p] * new_strides[i])
            .sum();
        out[new_flat] = amp;
    }
    MultipartiteState::new(new_dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, rng_from_seed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_product_lands_at_expected_flat_index() {
        let a = MultipartiteState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        let b = MultipartiteState::basis_state(vec![2, 2], &[1, 1]).unwrap();
        let prod = tensor_product(&a, &b).unwrap();
        assert_eq!(prod.dims(), &[4, 4]);
        // Combined coordinate per party is 0*2 + 1 = 1, flat index 1*4 + 1.
        let expected = MultipartiteState::basis_state(vec![4, 4], &[1, 1]).unwrap();
        assert_eq!(prod.amps(), expected.amps());
    }

    #[test]
    fn tensor_product_matches_full_basis_enumeration() {
        // Oracle: enumerate every pair of basis products explicitly.
        let mut rng = rng_from_seed(7);
        let a = random_state(&[2, 3], &mut rng);
        let b = random_state(&[2, 2], &mut rng);
        let prod = tensor_product(&a, &b).unwrap();
        for (xa, &va) in a.amps().iter().enumerate() {
            for (xb, &vb) in b.amps().iter().enumerate() {
                let ma = flat_to_multi(a.dims(), xa);
                let mb = flat_to_multi(b.dims(), xb);
                let combined: Vec<usize> = ma
                    .iter()
                    .zip(&mb)
                    .enumerate()
                    .map(|(i, (&x, &y))| x * b.dims()[i] + y)
                    .collect();
                let flat = multi_to_flat(prod.dims(), &combined).unwrap();
                assert!((prod.amps()[flat] - va * vb).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn norm_multiplies_under_tensor_product() {
        let mut rng = rng_from_seed(11);
        let a = random_state(&[3, 2], &mut rng).scaled(c(1.3, 0.0));
        let b = random_state(&[2, 4], &mut rng).scaled(c(0.4, 0.2));
        let prod = tensor_product(&a, &b).unwrap();
        assert!((prod.norm() - a.norm() * b.norm()).abs() <= 1e-12);
    }

    #[test]
    fn direct_sum_embeds_blocks_and_adds_norms() {
        let p: f64 = 0.3;
        let mut rng = rng_from_seed(3);
        let a = random_state(&[2, 2], &mut rng).scaled(c(p.sqrt(), 0.0));
        let b = random_state(&[2, 2], &mut rng).scaled(c((1.0 - p).sqrt(), 0.0));
        let sum = direct_sum(&a, &b).unwrap();
        assert_eq!(sum.dims(), &[4, 4]);
        assert_eq!(sum.amps().len(), 16);
        assert!((sum.norm_sq() - 1.0).abs() <= 1e-12);
        // Cross blocks (one coordinate low, the other high) are zero.
        let mut zero_count = 0;
        for flat in 0..16 {
            let m = flat_to_multi(sum.dims(), flat);
            let low = m.iter().zip(sum.dims()).filter(|(&x, _)| x < 2).count();
            if low != 0 && low != 2 {
                assert_eq!(sum.amps()[flat], c(0.0, 0.0));
                zero_count += 1;
            }
        }
        assert_eq!(zero_count, 8);
        // Embedded entries match the originals.
        for (flat, &amp) in a.amps().iter().enumerate() {
            let m = flat_to_multi(a.dims(), flat);
            assert_eq!(sum.amps()[multi_to_flat(sum.dims(), &m).unwrap()], amp);
        }
        for (flat, &amp) in b.amps().iter().enumerate() {
            let mut m = flat_to_multi(b.dims(), flat);
            m[0] += 2;
            m[1] += 2;
            assert_eq!(sum.amps()[multi_to_flat(sum.dims(), &m).unwrap()], amp);
        }
    }

    #[test]
    fn direct_sum_of_equal_basis_states_has_flat_marginal() {
        let half = c(0.5f64.sqrt(), 0.0);
        let a = MultipartiteState::basis_state(vec![1, 1], &[0, 0])
            .unwrap()
            .scaled(half);
        let b = a.clone();
        let sum = direct_sum(&a, &b).unwrap();
        for p in 0..2 {
            let cut = Bipartition::single(p, 2).unwrap();
            let rho = marginal(&sum, &cut).unwrap();
            let eigs = rho.eigenvalues();
            assert!((eigs[0] - 0.5).abs() <= 1e-12);
            assert!((eigs[1] - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn ghz_marginals_are_maximally_mixed() {
        let g = ghz(3, 2).unwrap();
        assert!(g.is_unit());
        for p in 0..3 {
            let cut = Bipartition::single(p, 3).unwrap();
            let rho = marginal(&g, &cut).unwrap();
            for e in rho.eigenvalues() {
                assert!((e - 0.5).abs() <= 1e-12);
            }
        }
        let trivial = ghz(4, 1).unwrap();
        assert_eq!(trivial.total_dim(), 1);
        let s = schmidt(&ghz(2, 3).unwrap(), &Bipartition::single(0, 2).unwrap()).unwrap();
        assert_eq!(s.rank(), 3);
        for &w in s.coefficients.weights() {
            assert!((w - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn product_state_marginal_is_rank_one() {
        let mut rng = rng_from_seed(21);
        let a = random_state(&[2], &mut rng);
        let b = random_state(&[3], &mut rng);
        let prod = MultipartiteState::new(
            vec![2, 3],
            {
                let mut amps = Vec::new();
                for &x in a.amps() {
                    for &y in b.amps() {
                        amps.push(x * y);
                    }
                }
                amps
            },
        )
        .unwrap();
        let rho = marginal(&prod, &Bipartition::single(0, 2).unwrap()).unwrap();
        let eigs = rho.eigenvalues();
        assert!((eigs[0] - 1.0).abs() <= 1e-12);
        assert!(eigs[1].abs() <= 1e-12);
    }

    #[test]
    fn marginal_spectra_agree_across_complementary_cuts() {
        let mut rng = rng_from_seed(5);
        let psi = random_state(&[2, 3, 2], &mut rng);
        let b = Bipartition::new(&[0, 2], 3).unwrap();
        let lhs = marginal(&psi, &b).unwrap().eigenvalues();
        let rhs = marginal(&psi, &b.complement()).unwrap().eigenvalues();
        for i in 0..rhs.len() {
            assert!((lhs[i] - rhs[i]).abs() <= 1e-10);
        }
        for &v in lhs.iter().skip(rhs.len()) {
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn schmidt_matches_svd_oracle_on_reshaped_amplitudes() {
        let mut rng = rng_from_seed(13);
        let psi = random_state(&[2, 3], &mut rng);
        let cut = Bipartition::single(0, 2).unwrap();
        let s = schmidt(&psi, &cut).unwrap();
        // Independent oracle: singular values of the 2x3 amplitude matrix.
        let a = DMatrix::from_fn(2, 3, |r, cc| psi.amps()[r * 3 + cc]);
        let svd = a.svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().map(|&v| v * v).collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(s.rank(), 2);
        for (got, want) in s.coefficients.weights().iter().zip(&sv) {
            assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn schmidt_reconstructs_the_state() {
        let mut rng = rng_from_seed(17);
        for dims in [vec![2, 2], vec![3, 2, 2], vec![4, 3]] {
            let psi = random_state(&dims, &mut rng);
            let k = dims.len();
            let cut = Bipartition::single(0, k).unwrap();
            let s = schmidt(&psi, &cut).unwrap();
            let (a, dim_b, dim_c) = reshape_by_cut(&psi, &cut).unwrap();
            // Rebuild A from the decomposition.
            let mut rebuilt = DMatrix::<Complex64>::zeros(dim_b, dim_c);
            for i in 0..s.rank() {
                let sigma = s.coefficients.weights()[i].sqrt();
                for x in 0..dim_b {
                    for y in 0..dim_c {
                        rebuilt[(x, y)] += Complex64::new(sigma, 0.0)
                            * s.left[i][x]
                            * s.right[i][y];
                    }
                }
            }
            let err = (&a - &rebuilt).norm();
            assert!(err <= 1e-8, "reconstruction error {err}");
            // Bases are orthonormal.
            for i in 0..s.rank() {
                for j in 0..s.rank() {
                    let gl: Complex64 = (0..dim_b)
                        .map(|x| s.left[i][x].conj() * s.left[j][x])
                        .sum();
                    let gr: Complex64 = (0..dim_c)
                        .map(|y| s.right[i][y].conj() * s.right[j][y])
                        .sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gl - c(want, 0.0)).norm() <= 1e-10);
                    assert!((gr - c(want, 0.0)).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn bell_state_schmidt_coefficients() {
        let bell = MultipartiteState::new(
            vec![2, 2],
            vec![c(0.5f64.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5f64.sqrt(), 0.0)],
        )
        .unwrap();
        let s = schmidt(&bell, &Bipartition::single(0, 2).unwrap()).unwrap();
        assert_eq!(s.rank(), 2);
        assert!((s.coefficients.weights()[0] - 0.5).abs() <= 1e-12);
        let zero = MultipartiteState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        let s0 = schmidt(&zero, &Bipartition::single(0, 2).unwrap()).unwrap();
        assert_eq!(s0.rank(), 1);
        assert!((s0.coefficients.weights()[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pure_distance_matches_projector_trace_distance() {
        let mut rng = rng_from_seed(29);
        let psi = random_state(&[2, 3], &mut rng);
        let phi = random_state(&[2, 3], &mut rng);
        let t_pure = trace_distance_pure(&psi, &phi).unwrap();
        // Oracle: eigenvalue form on the rank-2 difference of projectors.
        let to_projector = |s: &MultipartiteState| {
            let v = DVector::from_iterator(s.total_dim(), s.amps().iter().cloned());
            let m = &v * v.adjoint();
            DensityMatrix::new(m).unwrap()
        };
        let t_general = trace_distance(&to_projector(&psi), &to_projector(&phi)).unwrap();
        assert!((t_pure - t_general).abs() <= 1e-10);
        // Complementary identity with the squared overlap.
        let f = fidelity_sq(&psi, &phi).unwrap();
        assert!((t_pure * t_pure + f - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn fidelity_edge_cases() {
        let psi = MultipartiteState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        let phi = MultipartiteState::basis_state(vec![2, 2], &[1, 1]).unwrap();
        assert_eq!(fidelity_sq(&psi, &psi).unwrap(), 1.0);
        assert_eq!(trace_distance_pure(&psi, &psi).unwrap(), 0.0);
        assert_eq!(fidelity_sq(&psi, &phi).unwrap(), 0.0);
        assert_eq!(trace_distance_pure(&psi, &phi).unwrap(), 1.0);
        let unnorm = psi.scaled(c(2.0, 0.0));
        assert!(matches!(
            fidelity_sq(&unnorm, &phi),
            Err(Error::NotUnit(_))
        ));
    }

    #[test]
    fn trace_distance_on_diagonals_equals_tv() {
        let rho = DensityMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.6, 0.0),
            c(0.4, 0.0),
        ])))
        .unwrap();
        let sigma = DensityMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.3, 0.0),
            c(0.7, 0.0),
        ])))
        .unwrap();
        assert_eq!(trace_distance(&rho, &rho).unwrap(), 0.0);
        let t = trace_distance(&rho, &sigma).unwrap();
        assert!((t - 0.3).abs() <= 1e-12);
    }

    #[test]
    fn trace_distance_contracts_under_partial_trace() {
        let mut rng = rng_from_seed(31);
        let psi = random_state(&[2, 2, 2], &mut rng);
        let phi = random_state(&[2, 2, 2], &mut rng);
        let cut = Bipartition::new(&[0, 1], 3).unwrap();
        let t_local = trace_distance(
            &marginal(&psi, &cut).unwrap(),
            &marginal(&phi, &cut).unwrap(),
        )
        .unwrap();
        let t_global = trace_distance_pure(&psi, &phi).unwrap();
        assert!(t_local <= t_global + 1e-10);
    }

    #[test]
    fn apply_on_party_handles_gates_and_isometries() {
        let psi = MultipartiteState::basis_state(vec![2, 2], &[0, 1]).unwrap();
        let x_gate = DMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(1.0, 0.0),
            c(1.0, 0.0), c(0.0, 0.0),
        ]);
        let flipped = apply_on_party(&psi, 0, &x_gate).unwrap();
        let expected = MultipartiteState::basis_state(vec![2, 2], &[1, 1]).unwrap();
        assert_eq!(flipped.amps(), expected.amps());

        // Embedding a qubit into a qutrit preserves the norm.
        let iso = DMatrix::from_row_slice(3, 2, &[
            c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(1.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0),
        ]);
        let mut rng = rng_from_seed(37);
        let r = random_state(&[2, 2], &mut rng);
        let embedded = apply_on_party(&r, 1, &iso).unwrap();
        assert_eq!(embedded.dims(), &[2, 3]);
        assert!((embedded.norm_sq() - r.norm_sq()).abs() <= 1e-12);
    }

    #[test]
    fn permute_parties_round_trips_and_moves_marginals() {
        let mut rng = rng_from_seed(41);
        let psi = random_state(&[2, 3, 4], &mut rng);
        let perm = [2usize, 0, 1];
        let moved = permute_parties(&psi, &perm).unwrap();
        assert_eq!(moved.dims(), &[4, 2, 3]);
        // Marginal of party 0 of the permuted state is party 2 originally.
        let lhs = marginal(&moved, &Bipartition::single(0, 3).unwrap())
            .unwrap()
            .eigenvalues();
        let rhs = marginal(&psi, &Bipartition::single(2, 3).unwrap())
            .unwrap()
            .eigenvalues();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-12);
        }
        // Inverse permutation restores the amplitudes.
        let mut inv = [0usize; 3];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let back = permute_parties(&moved, &inv).unwrap();
        assert_eq!(back.amps(), psi.amps());
    }

    #[test]
    fn size_caps_and_validation() {
        assert!(matches!(
            MultipartiteState::new(vec![2; 17], vec![]),
            Err(Error::SizeLimit(_))
        ));
        assert!(matches!(
            MultipartiteState::new(vec![2, 2], vec![c(1.0, 0.0); 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(Bipartition::new(&[], 3).is_err());
        assert!(Bipartition::new(&[0, 1, 2], 3).is_err());
        assert!(Bipartition::new(&[3], 3).is_err());
        assert!(Bipartition::new(&[1, 1], 3).is_err());
        let b = Bipartition::new(&[2, 0], 4).unwrap();
        assert_eq!(b.parties(), &[0, 2]);
        assert_eq!(b.complement().parties(), &[1, 3]);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.1, 0.2),
            c(0.1, 0.2), c(0.5, 0.0),
        ]);
        assert!(matches!(
            DensityMatrix::new(bad),
            Err(Error::NotHermitian(_))
        ));
        let negative = DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(-0.5, 0.0),
        ]);
        assert!(matches!(
            DensityMatrix::new(negative),
            Err(Error::NotPositive(_))
        ));
        let overweight = DMatrix::from_row_slice(2, 2, &[
            c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(1.0, 0.0),
        ]);
        assert!(matches!(
            DensityMatrix::new(overweight),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn flat_multi_round_trip() {
        let dims = [2usize, 3, 4];
        for flat in 0..24 {
            let m = flat_to_multi(&dims, flat);
            assert_eq!(multi_to_flat(&dims, &m).unwrap(), flat);
        }
        assert_eq!(strides(&dims), vec![12, 4, 1]);
    }
}
