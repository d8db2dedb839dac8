//! Symmetric tridiagonal eigensolver: Sturm-sequence bisection for the
//! eigenvalues, inverse iteration for the vectors.
//!
//! The generalized problem `A v = λ B v` with `A` symmetric tridiagonal and
//! `B` positive diagonal is reduced to standard form through `B^{-1/2}`.

use crate::scalar::{count, lit, Real};

#[derive(Clone, Debug)]
pub struct SymTridiagonal<T> {
    diag: Vec<T>,
    off: Vec<T>,
}

impl<T: Real> SymTridiagonal<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert!(!diag.is_empty(), "empty matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length");
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: T) -> usize {
        let tiny = T::min_positive_value().sqrt();
        let mut below = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q == T::zero() {
                q = -tiny;
            }
            if q < T::zero() {
                below += 1;
            }
        }
        below
    }

    fn gershgorin(&self) -> (T, T) {
        let n = self.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let mut radius = T::zero();
            if i > 0 {
                radius = radius + self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius = radius + self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> T {
        assert!(k < self.len(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let two = lit::<T>(2.0);
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / two
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y = y + self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y = y + self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    fn norm_inf(&self) -> T {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Unit eigenvector for the eigenvalue `lambda`, orthogonalized against
    /// `previous` (unit vectors of nearby eigenvalues). `None` when inverse
    /// iteration fails to reach a small residual.
    pub fn eigenvector(&self, lambda: T, previous: &[Vec<T>]) -> Option<Vec<T>> {
        let n = self.len();
        let scale = self.norm_inf().max(T::min_positive_value());
        let eps = T::epsilon();
        let mut x: Vec<T> = (0..n)
            .map(|i| T::one() + lit::<T>(0.1) * (count::<T>(i) * lit(0.618_034)).sin())
            .collect();
        normalize(&mut x);
        let tol = count::<T>(n).sqrt() * lit::<T>(64.0) * eps * scale;
        for _ in 0..8 {
            let mut y = solve_shifted(&self.diag, &self.off, lambda, x.clone(), eps * scale);
            for p in previous {
                let d = dot(&y, p);
                for (yi, pi) in y.iter_mut().zip(p) {
                    *yi = *yi - d * *pi;
                }
            }
            if !normalize(&mut y) {
                return None;
            }
            x = y;
            let ax = self.apply(&x);
            let resid = ax
                .iter()
                .zip(&x)
                .map(|(a, v)| (*a - lambda * *v).abs())
                .fold(T::zero(), T::max);
            if resid <= tol {
                return Some(x);
            }
        }
        None
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

fn normalize<T: Real>(x: &mut [T]) -> bool {
    let norm = dot(x, x).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return false;
    }
    for v in x.iter_mut() {
        *v = *v / norm;
    }
    true
}

/// Solves `(T - shift I) x = rhs` by Gaussian elimination with partial
/// pivoting. Exactly singular pivots are replaced by `tiny`, as inverse
/// iteration wants.
fn solve_shifted<T: Real>(diag: &[T], off: &[T], shift: T, mut b: Vec<T>, tiny: T) -> Vec<T> {
    let n = diag.len();
    let mut d: Vec<T> = diag.iter().map(|&v| v - shift).collect();
    if n == 1 {
        if d[0] == T::zero() {
            d[0] = tiny;
        }
        b[0] = b[0] / d[0];
        return b;
    }
    let mut dl: Vec<T> = off.to_vec();
    let mut du: Vec<T> = off.to_vec();
    let mut du2 = vec![T::zero(); n.saturating_sub(2)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == T::zero() {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] = d[i + 1] - fact * du[i];
            b[i + 1] = b[i + 1] - fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
        dl[i] = T::zero();
    }
    if d[n - 1] == T::zero() {
        d[n - 1] = tiny;
    }
    b[n - 1] = b[n - 1] / d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    b
}

/// `A v = λ B v` with `A` symmetric tridiagonal and `B = diag(mass)`, `mass > 0`.
#[derive(Clone, Debug)]
pub struct GeneralizedTridiagonal<T> {
    reduced: SymTridiagonal<T>,
    inv_sqrt_mass: Vec<T>,
}

impl<T: Real> GeneralizedTridiagonal<T> {
    pub fn new(stiffness_diag: Vec<T>, stiffness_off: Vec<T>, mass: Vec<T>) -> Self {
        assert_eq!(stiffness_diag.len(), mass.len());
        let s: Vec<T> = mass.iter().map(|m| m.sqrt().recip()).collect();
        let diag = stiffness_diag.iter().zip(&s).map(|(a, si)| *a * *si * *si).collect();
        let off = stiffness_off
            .iter()
            .enumerate()
            .map(|(i, e)| *e * s[i] * s[i + 1])
            .collect();
        GeneralizedTridiagonal {
            reduced: SymTridiagonal::new(diag, off),
            inv_sqrt_mass: s,
        }
    }

    pub fn len(&self) -> usize {
        self.reduced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reduced.is_empty()
    }

    /// The `k` smallest eigenvalues in ascending order.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<T> {
        (0..k.min(self.len())).map(|i| self.reduced.eigenvalue(i)).collect()
    }

    /// The `k` smallest eigenpairs; vectors are `B`-normalized
    /// (`vᵀ B v = 1`). Fails with the index of the first pair whose inverse
    /// iteration did not converge.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<Vec<(T, Vec<T>)>, usize> {
        let values = self.lowest_eigenvalues(k);
        let mut unit: Vec<Vec<T>> = Vec::with_capacity(values.len());
        for (i, &lambda) in values.iter().enumerate() {
            let w = self.reduced.eigenvector(lambda, &unit).ok_or(i)?;
            unit.push(w);
        }
        Ok(values
            .into_iter()
            .zip(unit)
            .map(|(lambda, w)| {
                let v = w.iter().zip(&self.inv_sqrt_mass).map(|(wi, si)| *wi * *si).collect();
                (lambda, v)
            })
            .collect())
    }
}
