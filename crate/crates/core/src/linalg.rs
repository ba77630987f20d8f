//! Fixed-size complex linear algebra for the 3×3 Hamiltonian and the 9×9
//! Liouvillian. Everything lives on the stack.

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::math::{abs, sqrt};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense `N × N` complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<const N: usize>(pub [[C64; N]; N]);

pub type Mat3 = Matrix<3>;
pub type Mat9 = Matrix<9>;
pub type Vec9 = [C64; 9];

impl<const N: usize> Default for Matrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Matrix<N> {
    pub const fn zeros() -> Self {
        Matrix([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: [C64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = diag[i];
        }
        m
    }

    /// `|n⟩⟨m|` in 0-based indices.
    pub fn unit(n: usize, m: usize) -> Self {
        let mut out = Self::zeros();
        out.0[n][m] = ONE;
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                t.0[j][i] = self.0[i][j].conj();
            }
        }
        t
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn mul_vec(&self, v: &[C64; N]) -> [C64; N] {
        let mut out = [ZERO; N];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        sqrt(
            self.0
                .iter()
                .flat_map(|r| r.iter())
                .map(|x| x.norm_sqr())
                .sum(),
        )
    }

    /// Max over entries of `|self - selfᴴ|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }
}

impl<const N: usize> Index<(usize, usize)> for Matrix<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Matrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for Matrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Matrix<N> {
    fn add_assign(&mut self, rhs: Self) {
        for (r, s) in self.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in r.iter_mut().zip(s.iter()) {
                *a += b;
            }
        }
    }
}

impl<const N: usize> Sub for Matrix<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (r, s) in self.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in r.iter_mut().zip(s.iter()) {
                *a -= b;
            }
        }
        self
    }
}

impl<const N: usize> Neg for Matrix<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

impl<const N: usize> Mul for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<const N: usize> Mul<C64> for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: C64) -> Self {
        self.scale(rhs)
    }
}

/// Kronecker product `a ⊗ b` of two 3×3 matrices, laid out so that
/// `(a ⊗ b)[3i + k][3j + l] = a[i][j] · b[k][l]`.
pub fn kron3(a: &Mat3, b: &Mat3) -> Mat9 {
    let mut out = Mat9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let aij = a.0[i][j];
            if aij == ZERO {
                continue;
            }
            for k in 0..3 {
                for l in 0..3 {
                    out.0[3 * i + k][3 * j + l] = aij * b.0[k][l];
                }
            }
        }
    }
    out
}

/// Row-major vectorization of a 3×3 matrix.
pub fn vectorize(m: &Mat3) -> Vec9 {
    let mut v = [ZERO; 9];
    for i in 0..3 {
        for j in 0..3 {
            v[3 * i + j] = m.0[i][j];
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Vec9) -> Mat3 {
    let mut m = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] = v[3 * i + j];
        }
    }
    m
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<const N: usize> {
    lu: [[C64; N]; N],
    perm: [usize; N],
    min_pivot: f64,
    max_pivot: f64,
}

impl<const N: usize> Lu<N> {
    /// Factorizes `a`. Returns `None` when a pivot is exactly zero or not finite.
    pub fn factor(a: &Matrix<N>) -> Option<Self> {
        let mut lu = a.0;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..N {
            let mut piv = k;
            let mut best = lu[k][k].norm_sqr();
            for i in (k + 1)..N {
                let v = lu[i][k].norm_sqr();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != k {
                lu.swap(piv, k);
                perm.swap(piv, k);
            }
            let pivot = lu[k][k];
            let mag = sqrt(best);
            min_pivot = min_pivot.min(mag);
            max_pivot = max_pivot.max(mag);
            let inv = pivot.inv();
            for i in (k + 1)..N {
                let f = lu[i][k] * inv;
                if f == ZERO {
                    continue;
                }
                lu[i][k] = f;
                for j in (k + 1)..N {
                    let u = lu[k][j];
                    lu[i][j] -= f * u;
                }
            }
        }
        Some(Lu {
            lu,
            perm,
            min_pivot,
            max_pivot,
        })
    }

    pub fn solve(&self, b: &[C64; N]) -> [C64; N] {
        let mut x = [ZERO; N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in (i + 1)..N {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }

    /// Ratio of the largest to the smallest pivot magnitude. A cheap lower
    /// bound on the condition number.
    pub fn pivot_ratio(&self) -> f64 {
        self.max_pivot / self.min_pivot
    }
}

/// Eigenvalues of a Hermitian 3×3 matrix in ascending order, by cyclic
/// complex Jacobi rotations. Only the Hermitian part of `h` is used.
pub fn hermitian_eigenvalues3(h: &Mat3) -> [f64; 3] {
    let mut a = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = (h.0[i][j] + h.0[j][i].conj()) * 0.5;
        }
    }
    let scale = h.max_abs();
    if scale == 0.0 {
        return [0.0; 3];
    }
    for _sweep in 0..64 {
        let off = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
        if off <= (f64::EPSILON * scale) * (f64::EPSILON * scale) {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            let r = apq.norm();
            if r == 0.0 {
                continue;
            }
            // Phase q so that a[p][q] becomes real and positive.
            let ph = apq / r;
            for k in 0..3 {
                a[k][q] *= ph.conj();
                a[q][k] *= ph;
            }
            let app = a[p][p].re;
            let aqq = a[q][q].re;
            let tau = (aqq - app) / (2.0 * r);
            let t = if tau >= 0.0 {
                1.0 / (tau + sqrt(1.0 + tau * tau))
            } else {
                -1.0 / (-tau + sqrt(1.0 + tau * tau))
            };
            let c = 1.0 / sqrt(1.0 + t * t);
            let s = t * c;
            for row in a.iter_mut() {
                let kp = row[p];
                let kq = row[q];
                row[p] = kp * c - kq * s;
                row[q] = kp * s + kq * c;
            }
            for k in 0..3 {
                let pk = a[p][k];
                let qk = a[q][k];
                a[p][k] = pk * c - qk * s;
                a[q][k] = pk * s + qk * c;
            }
            a[p][q] = ZERO;
            a[q][p] = ZERO;
        }
    }
    let mut ev = [a[0][0].re, a[1][1].re, a[2][2].re];
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    ev
}

/// Smallest pairwise distance between the eigenvalues of a Hermitian 3×3
/// matrix, together with the spectral range `λ_max − λ_min`.
pub fn eigen_gap_and_range(h: &Mat3) -> (f64, f64) {
    let ev = hermitian_eigenvalues3(h);
    let gap = abs(ev[1] - ev[0]).min(abs(ev[2] - ev[1]));
    (gap, ev[2] - ev[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_matches_vectorized_sandwich() {
        // vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ) for row-major stacking
        let a = Matrix([
            [c(1.0, 0.5), c(0.0, -1.0), c(2.0, 0.0)],
            [c(0.3, 0.0), c(-1.0, 0.0), c(0.0, 0.2)],
            [c(0.0, 0.0), c(1.5, 1.0), c(0.7, -0.7)],
        ]);
        let b = Matrix([
            [c(0.2, 0.0), c(1.0, 1.0), c(0.0, 0.0)],
            [c(-0.4, 0.3), c(0.0, 0.0), c(1.0, -2.0)],
            [c(0.9, 0.0), c(0.0, 0.1), c(-1.0, 0.0)],
        ]);
        let rho = Matrix([
            [c(0.5, 0.0), c(0.1, 0.2), c(0.0, -0.1)],
            [c(0.1, -0.2), c(0.3, 0.0), c(0.05, 0.0)],
            [c(0.0, 0.1), c(0.05, 0.0), c(0.2, 0.0)],
        ]);
        let direct = vectorize(&(a * rho * b));
        let via = kron3(&a, &b.transpose()).mul_vec(&vectorize(&rho));
        for k in 0..9 {
            assert_relative_eq!(direct[k].re, via[k].re, epsilon = 1e-14);
            assert_relative_eq!(direct[k].im, via[k].im, epsilon = 1e-14);
        }
        assert_eq!(unvectorize(&vectorize(&rho)), rho);
    }

    #[test]
    fn lu_solves_random_system() {
        let mut a = Mat9::zeros();
        for i in 0..9 {
            for j in 0..9 {
                a.0[i][j] = c(
                    ((i * 7 + j * 3) % 11) as f64 - 5.0,
                    ((i + 2 * j) % 5) as f64 * 0.3,
                );
            }
            a.0[i][i] += c(20.0, 0.0);
        }
        let x: Vec9 = core::array::from_fn(|k| c(k as f64, 1.0 - k as f64));
        let b = a.mul_vec(&x);
        let lu = Lu::factor(&a).unwrap();
        let got = lu.solve(&b);
        for k in 0..9 {
            assert!((got[k] - x[k]).norm() < 1e-12);
        }
        assert!(lu.pivot_ratio() >= 1.0);
    }

    #[test]
    fn lu_rejects_singular() {
        let mut a = Mat3::identity();
        a.0[2][2] = ZERO;
        assert!(Lu::factor(&a).is_none());
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // [[2, i],[−i, 2]] ⊕ [5] has eigenvalues 1, 3, 5
        let h = Matrix([
            [c(2.0, 0.0), c(0.0, 1.0), ZERO],
            [c(0.0, -1.0), c(2.0, 0.0), ZERO],
            [ZERO, ZERO, c(5.0, 0.0)],
        ]);
        let ev = hermitian_eigenvalues3(&h);
        assert_relative_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(ev[2], 5.0, epsilon = 1e-14);
        let (gap, range) = eigen_gap_and_range(&h);
        assert_relative_eq!(gap, 2.0, epsilon = 1e-14);
        assert_relative_eq!(range, 4.0, epsilon = 1e-14);
    }
}
