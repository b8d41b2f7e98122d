//! Seeded generation of sensing matrices and row-sparse unknowns.
//!
//! The generator is ChaCha8 (`rand_chacha`), whose output stream is fixed
//! by its seed on every platform. Normal variates come from `rand_distr`'s
//! `StandardNormal` (ziggurat) sampled in `f64` and then converted to the
//! target scalar, so `f32` and `f64` runs see the same underlying draws.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Deterministic random stream. Single owner; derive child seeds with
/// [`derive_seed`] for independent work.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal<T: Real>(&mut self) -> T {
        let x: f64 = StandardNormal.sample(&mut self.inner);
        T::lit(x)
    }

    /// `count` distinct indices from `0..n`, sorted ascending.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        let mut idx = index::sample(&mut self.inner, n, count).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed as a pure function of a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// Matrix of i.i.d. standard normal entries (no `1/sqrt(M)` scaling).
pub fn gaussian_matrix<T: Real>(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    Ok(Matrix::from_fn(rows, cols, |_, _| rng.standard_normal()))
}

/// `n x k` matrix with exactly `s` non-zero Gaussian rows on a uniformly
/// drawn support.
pub fn random_row_sparse<T: Real>(n: usize, k: usize, s: usize, rng: &mut Rng) -> Result<Matrix<T>> {
    if s == 0 || s > n || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "row-sparse draw needs 1 <= s <= n and k >= 1 (n={n}, k={k}, s={s})"
        )));
    }
    let support = rng.sample_indices(n, s);
    let mut x = Matrix::zeros(n, k);
    for &i in &support {
        loop {
            let row = x.row_mut(i);
            for v in row.iter_mut() {
                *v = rng.standard_normal();
            }
            if row.iter().any(|v| *v != T::zero()) {
                break;
            }
        }
    }
    Ok(x)
}

/// A generated joint-sparse instance `Y = A X_true`.
#[derive(Clone, Debug)]
pub struct ProblemInstance<T> {
    pub a: Matrix<T>,
    pub x_true: Matrix<T>,
    pub y: Matrix<T>,
    pub s: usize,
    pub seed: u64,
}

impl<T: Real> ProblemInstance<T> {
    /// Draws `A` (`m x n`) then `X_true` (`n x k`, `s` non-zero rows) from
    /// one stream seeded with `seed`.
    pub fn generate(m: usize, n: usize, k: usize, s: usize, seed: u64) -> Result<Self> {
        let mut rng = Rng::new(seed);
        let a = gaussian_matrix(m, n, &mut rng)?;
        let x_true = random_row_sparse(n, k, s, &mut rng)?;
        let y = a.mm(&x_true);
        Ok(Self { a, x_true, y, s, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::l0_rows;

    #[test]
    fn same_seed_same_stream() {
        let a: Matrix<f64> = gaussian_matrix(1, 1, &mut Rng::new(7)).unwrap();
        let b: Matrix<f64> = gaussian_matrix(1, 1, &mut Rng::new(7)).unwrap();
        assert!(a[(0, 0)].is_finite());
        assert_eq!(a[(0, 0)].to_bits(), b[(0, 0)].to_bits());

        let c: Matrix<f64> = gaussian_matrix(3, 2, &mut Rng::new(5)).unwrap();
        let d: Matrix<f64> = gaussian_matrix(3, 2, &mut Rng::new(5)).unwrap();
        let bits = |m: &Matrix<f64>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&c), bits(&d));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(gaussian_matrix::<f64>(0, 3, &mut Rng::new(1)).is_err());
        assert!(gaussian_matrix::<f64>(3, 0, &mut Rng::new(1)).is_err());
        assert!(random_row_sparse::<f64>(4, 2, 5, &mut Rng::new(1)).is_err());
        assert!(random_row_sparse::<f64>(4, 2, 0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g: Matrix<f64> = gaussian_matrix(1000, 1000, &mut Rng::new(1)).unwrap();
        let n = g.as_slice().len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn row_sparse_support_sizes() {
        let full: Matrix<f64> = random_row_sparse(5, 3, 5, &mut Rng::new(3)).unwrap();
        assert_eq!(l0_rows(&full, 0.0), 5);
        let one: Matrix<f64> = random_row_sparse(4, 2, 1, &mut Rng::new(3)).unwrap();
        assert_eq!(l0_rows(&one, 0.0), 1);
        let big: Matrix<f64> = random_row_sparse(300, 70, 30, &mut Rng::new(11)).unwrap();
        assert_eq!(l0_rows(&big, 1e-8), 30);
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(1, &[0, 0]);
        assert_eq!(a, derive_seed(1, &[0, 0]));
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
    }
}
