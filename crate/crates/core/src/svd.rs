//! Singular values of a dense matrix via cyclic Jacobi rotations of the
//! smaller Gram matrix, plus the explicit symmetric eigen-solver. Only values
//! are produced, never vectors.

use crate::error::{Error, Result};
use crate::image::PatchMatrix;
use crate::scalar::Scalar;

pub const MAX_SWEEPS: usize = 30;
pub const REL_TOL: f64 = 1e-10;

/// Dense symmetric matrix, upper triangle stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<T = f64> {
    n: usize,
    upper: Vec<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    /// Row `i` of the upper triangle starts after `sum_{r<i} (n - r)` entries.
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.upper[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.upper[k] = v;
    }

    /// Gram matrix of the smaller side: `A A^T` when rows <= cols, else `A^T A`.
    pub fn gram(m: &PatchMatrix<T>) -> Self {
        let (r, c) = (m.rows(), m.cols());
        if r <= c {
            let mut g = Self::zeros(r);
            for col in 0..c {
                let v = m.column(col);
                for i in 0..r {
                    let vi = v[i];
                    if vi == T::zero() {
                        continue;
                    }
                    for j in i..r {
                        let k = g.idx(i, j);
                        g.upper[k] += vi * v[j];
                    }
                }
            }
            g
        } else {
            let mut g = Self::zeros(c);
            for i in 0..c {
                for j in i..c {
                    let dot = m.column(i).iter().zip(m.column(j)).map(|(&a, &b)| a * b).sum();
                    g.set(i, j, dot);
                }
            }
            g
        }
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                s += if i == j { v * v } else { T::of(2.0) * v * v };
            }
        }
        s.sqrt()
    }

    fn off_diagonal(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        (T::of(2.0) * s).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen<T = f64> {
    pub values: Vec<T>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
pub fn jacobi_eigenvalues<T: Scalar>(mut a: SymmetricMatrix<T>) -> Eigen<T> {
    let n = a.order();
    let tol = T::of(REL_TOL.max(16.0 * T::epsilon().f64())) * a.frobenius();
    let mut sweeps = 0;
    let mut converged = a.off_diagonal() <= tol;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, T::zero());
            }
        }
        converged = a.off_diagonal() <= tol;
    }
    Eigen {
        values: (0..n).map(|i| a.get(i, i)).collect(),
        sweeps,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularValues<T = f64> {
    /// `min(rows, cols)` values, descending.
    pub values: Vec<T>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Singular values by one-sided Jacobi: the vectors on the smaller side of
/// `m` are rotated pairwise until mutually orthogonal, which applies the
/// Jacobi rotations of the Gram matrix implicitly. Their final norms are the
/// singular values, accurate relative to the largest one even when tiny.
pub fn singular_values<T: Scalar>(m: &PatchMatrix<T>) -> SingularValues<T> {
    let (r, c) = (m.rows(), m.cols());
    let mut v: Vec<Vec<T>> = if r <= c {
        (0..r).map(|i| (0..c).map(|j| m.get(i, j)).collect()).collect()
    } else {
        (0..c).map(|j| m.column(j).to_vec()).collect()
    };
    let n = v.len();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
    let eps = T::of(1e-15_f64.max(8.0 * T::epsilon().f64()));
    let mut norms: Vec<T> = v.iter().map(|x| dot(x, x)).collect();
    let mut sweeps = 0;
    let mut converged = n < 2;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                let gamma = dot(&v[p], &v[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (zeta * zeta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = cs * t;
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = cs * a - sn * b;
                    *y = sn * a + cs * b;
                }
                norms[p] = dot(&v[p], &v[p]);
                norms[q] = dot(&v[q], &v[q]);
            }
        }
        converged = !rotated;
    }
    if !converged {
        log::warn!("jacobi did not converge after {sweeps} sweeps");
    }
    let mut values: Vec<T> = norms.into_iter().map(|x| x.max(T::zero()).sqrt()).collect();
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    SingularValues {
        values,
        sweeps,
        converged,
    }
}

/// Smallest `t` whose leading singular values carry at least `alpha` of the
/// total (values, not squares). An all-zero spectrum counts as `t = 1`.
pub fn partial_energy_count<T: Scalar>(s: &[T], alpha: f64) -> Result<usize> {
    if s.is_empty() {
        return Err(Error::invalid("empty singular value list"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1]")));
    }
    let total: f64 = s.iter().map(|v| v.f64()).sum();
    if total <= 0.0 {
        return Ok(1);
    }
    let target = alpha * total;
    let mut acc = 0.0;
    for (i, v) in s.iter().enumerate() {
        acc += v.f64();
        if acc >= target {
            return Ok(i + 1);
        }
    }
    // round-off can leave the full sum a hair short of alpha = 1
    Ok(s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::rng::stream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> PatchMatrix {
        let mut rng = stream(seed);
        PatchMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric
    /// solution of the characteristic cubic).
    fn eig3(a: [[f64; 3]; 3]) -> [f64; 3] {
        let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
        let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    }

    #[test]
    fn storage_indexing_is_consistent() {
        let mut m = SymmetricMatrix::<f64>::zeros(5);
        for i in 0..5 {
            for j in i..5 {
                m.set(i, j, (10 * i + j) as f64);
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                let (a, b) = (i.min(j), i.max(j));
                assert_eq!(m.get(i, j), (10 * a + b) as f64);
            }
        }
    }

    #[test]
    fn diagonal_closed_form() {
        let m: PatchMatrix = PatchMatrix::from_fn(2, 2, |r, c| if r == c { [3.0, 2.0][r] } else { 0.0 });
        let s = singular_values(&m);
        assert!((s.values[0] - 3.0).abs() < 1e-8 && (s.values[1] - 2.0).abs() < 1e-8);
        assert!(s.converged);
    }

    #[test]
    fn rank_one_closed_form() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [2.0, 1.0, -1.0, 0.25, 4.0, 1.5];
        let m = PatchMatrix::from_fn(4, 6, |r, c| u[r] * v[c]);
        let s = singular_values(&m);
        let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert_eq!(s.values.len(), 4);
        assert!((s.values[0] - norm(&u) * norm(&v)).abs() < 1e-8);
        assert!(s.values[1..].iter().all(|&x| x <= 1e-8));
    }

    #[test]
    fn frobenius_identity_on_random_matrices() {
        for seed in 0..20 {
            let m = random_matrix(10, 25, seed);
            let s = singular_values(&m);
            let sum_sq: f64 = s.values.iter().map(|v| v * v).sum();
            assert!((sum_sq - m.frobenius_sq()).abs() / m.frobenius_sq() < 1e-8);
            assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn three_by_three_matches_cubic_oracle() {
        for seed in 100..120 {
            let m = random_matrix(3, 3 + (seed as usize % 4), seed);
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] = (0..m.cols()).map(|c| m.get(i, c) * m.get(j, c)).sum();
                }
            }
            let mut expected: Vec<f64> = eig3(g).iter().map(|e| e.max(0.0).sqrt()).collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let got = singular_values(&m).values;
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-8, "{got:?} vs {expected:?}");
            }
        }
    }

    #[test]
    fn agrees_with_explicit_gram_eigenvalues() {
        for seed in 0..10 {
            let m = random_matrix(8, 13, seed);
            let eig = jacobi_eigenvalues(SymmetricMatrix::gram(&m));
            assert!(eig.converged);
            let mut expected: Vec<f64> = eig.values.iter().map(|e| e.max(0.0).sqrt()).collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let got = singular_values(&m).values;
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tall_matrices_use_the_column_gram() {
        let m = random_matrix(30, 4, 9);
        let s = singular_values(&m);
        assert_eq!(s.values.len(), 4);
        let sum_sq: f64 = s.values.iter().map(|v| v * v).sum();
        assert!((sum_sq - m.frobenius_sq()).abs() / m.frobenius_sq() < 1e-8);
    }

    #[test]
    fn f32_kernel_agrees_with_f64() {
        let m = random_matrix(6, 9, 3);
        let m32 = PatchMatrix::from_fn(6, 9, |r, c| m.get(r, c) as f32);
        let a = singular_values(&m).values;
        let b = singular_values(&m32).values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn energy_count_cases() {
        assert_eq!(partial_energy_count(&[1.0, 0.0, 0.0], 0.97).unwrap(), 1);
        assert_eq!(partial_energy_count(&[1.0, 1.0], 0.97).unwrap(), 2);
        assert_eq!(partial_energy_count(&[5.0, 3.0, 2.0], 0.79).unwrap(), 2);
        assert_eq!(partial_energy_count(&[0.0, 0.0], 0.5).unwrap(), 1);
        assert!(partial_energy_count::<f64>(&[], 0.5).is_err());
        assert!(partial_energy_count(&[1.0], 0.0).is_err());
        assert!(partial_energy_count(&[1.0], 1.5).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..1000, shift in 1usize..7) {
            let m = random_matrix(7, 11, seed);
            let p = PatchMatrix::from_fn(7, 11, |r, c| m.get((r + shift) % 7, (c * 3 + shift) % 11));
            let a = singular_values(&m).values;
            let b = singular_values(&p).values;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn energy_count_monotone_in_alpha(mut v in proptest::collection::vec(0.0f64..10.0, 1..30), a in 0.01f64..1.0, b in 0.01f64..1.0) {
            v.sort_by(|x, y| y.total_cmp(x));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(partial_energy_count(&v, lo).unwrap() <= partial_energy_count(&v, hi).unwrap());
        }
    }
}
