//! Seeded pseudo-random generators for states, spectra, density matrices,
//! and Haar isometries. Everything here is deterministic given the seed, so
//! sweeps and reports are reproducible byte for byte.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::entropy::Distribution;
use crate::tensor::{DensityMatrix, MultipartiteState};

/// The stream cipher generator used throughout; fixed so that seeds mean
/// the same thing everywhere.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_complex(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Unit vector drawn uniformly from the sphere of the given multipartite
/// space (complex Gaussian amplitudes, normalized).
///
/// Panics if the dims are invalid or exceed the explicit-state cap; the
/// dims here are always chosen by the caller, not by data.
pub fn random_state(dims: &[usize], rng: &mut impl Rng) -> MultipartiteState {
    let total: usize = dims.iter().product();
    let amps: Vec<Complex64> = (0..total).map(|_| gaussian_complex(rng)).collect();
    MultipartiteState::new(dims.to_vec(), amps)
        .expect("valid dims")
        .normalized()
        .expect("Gaussian draw is nonzero")
}

/// Probability distribution drawn uniformly from the simplex on `m` atoms.
pub fn random_distribution(m: usize, rng: &mut impl Rng) -> Distribution {
    assert!(m >= 1, "need at least one atom");
    let weights: Vec<f64> = (0..m)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    Distribution::renormalized(weights).expect("exponential draws are positive")
}

/// Unit-trace density matrix G G† / tr with G square complex Gaussian.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    assert!(dim >= 1, "need a positive dimension");
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let mut rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho /= Complex64::new(tr, 0.0);
    DensityMatrix::new(rho).expect("Gaussian Gram matrix is a valid state")
}

/// Haar-distributed isometry with `rows` ≥ `cols`: the columns are an
/// orthonormal family obtained by modified Gram-Schmidt on a complex
/// Gaussian matrix. The implicit triangular factor has a real positive
/// diagonal, which is the sign convention that makes the factorization
/// (and hence the distribution) unique.
pub fn haar_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    assert!(
        rows >= cols && cols >= 1,
        "isometry needs rows >= cols >= 1"
    );
    let mut q: Vec<DVector<Complex64>> = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut v = DVector::from_fn(rows, |_, _| gaussian_complex(rng));
        // Two orthogonalization passes keep the columns orthonormal to
        // machine precision even for moderately conditioned draws.
        for _ in 0..2 {
            for prev in &q {
                let overlap = prev.dotc(&v);
                v -= prev * overlap;
            }
        }
        let norm = v.norm();
        assert!(norm > 1e-12, "Gaussian column collapsed under projection");
        v /= Complex64::new(norm, 0.0);
        q.push(v);
    }
    DMatrix::from_fn(rows, cols, |r, c| q[c][r])
}

/// Haar-distributed unitary of the given dimension.
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    haar_isometry(dim, dim, rng)
}
