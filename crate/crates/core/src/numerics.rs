//! Dense complex linear algebra and scalar root finding.
//!
//! Vectors and matrices are `nalgebra` dynamic types over `Complex64`. The
//! wrappers here add the checks and orderings the solvers rely on: Hermitian
//! validation, ascending eigenvalues, and a bracketed root finder for strictly
//! monotone functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexVec = DVector<Complex64>;
pub type ComplexMat = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition `A = Q diag(values) Qᴴ` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Real eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are aligned with `values`.
    pub vectors: ComplexMat,
}

impl EigResult {
    pub fn reconstruct(&self) -> ComplexMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let lam = self.values[j];
            scaled.column_mut(j).scale_mut(lam);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// A closed interval `[lo, hi]` that brackets a root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn max_abs(m: &ComplexMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `|A - Aᴴ|`.
pub fn hermitian_defect(a: &ComplexMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(a: &ComplexMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL * max_abs(a).max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Ties keep the order in which the underlying solver produced them.
pub fn hermitian_eig(a: &ComplexMat) -> Result<EigResult> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigResult { values: Vec::new(), vectors: ComplexMat::zeros(0, 0) });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigResult { values, vectors })
}

/// Solves `A x = b` for Hermitian positive-definite `A` by Cholesky factorization.
pub fn solve_hpd(a: &ComplexMat, b: &ComplexVec) -> Result<ComplexVec> {
    check_hermitian(a)?;
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!("matrix is {}x{}, rhs has length {}", a.nrows(), a.ncols(), b.len())));
    }
    let chol = HpdFactor::new(a)?;
    Ok(chol.solve(b))
}

/// Reusable Cholesky factor of a Hermitian positive-definite matrix.
pub struct HpdFactor {
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
}

impl HpdFactor {
    pub fn new(a: &ComplexMat) -> Result<Self> {
        let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let chol = sym.cholesky().ok_or(Error::Singular)?;
        // Reject factors whose pivots collapsed relative to the largest one.
        let l = chol.l_dirty();
        let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lo > 0.0) || lo * lo < 1e-15 * hi * hi {
            return Err(Error::Singular);
        }
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &ComplexVec) -> ComplexVec {
        self.chol.solve(b)
    }
}

/// Bisection for a continuous, strictly monotone `f` whose sign changes on `bracket`.
///
/// Returns `x` with `|f(x)| <= tol` or a final bracket no wider than `tol`.
pub fn find_root_monotone<F>(f: F, bracket: Bracket, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let Bracket { mut lo, mut hi } = bracket;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 || f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi == 0.0 || f_hi.abs() <= tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton iteration safeguarded by bisection: a Newton step that leaves the
/// current bracket is replaced by the midpoint.
///
/// Stops when `|f(x)| <= f_tol` or the bracket is narrower than `x_tol`.
pub fn find_root_safeguarded<F, D>(f: F, df: D, bracket: Bracket, x_tol: f64, f_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let Bracket { mut lo, mut hi } = bracket;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.abs() <= f_tol {
        return Ok(lo);
    }
    if f_hi.abs() <= f_tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    let lo_sign = f_lo.signum();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x);
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= x_tol {
            return Ok(0.5 * (lo + hi));
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if x <= lo || x >= hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMat {
        let x = ComplexMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &x + x.adjoint()
    }

    fn unitarity_defect(q: &ComplexMat) -> f64 {
        let n = q.nrows();
        max_abs(&(q.adjoint() * q - ComplexMat::identity(n, n)))
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = hermitian_eig(&ComplexMat::identity(3, 3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
        assert!(unitarity_defect(&eig.vectors) < 1e-12);
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let a = ComplexMat::from_diagonal(&ComplexVec::from_vec(vec![c(2.0, 0.0), c(-1.0, 0.0)]));
        let eig = hermitian_eig(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 4, 8, 17, 33, 64] {
            let a = random_hermitian(n, &mut rng);
            let eig = hermitian_eig(&a).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            assert!(unitarity_defect(&eig.vectors) <= 1e-9, "n={n}");
            let err = max_abs(&(eig.reconstruct() - &a));
            assert!(err <= 1e-8 * max_abs(&a), "n={n} err={err}");
        }
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        assert!(matches!(hermitian_eig(&ComplexMat::zeros(2, 3)), Err(Error::Dimension(_))));
        let mut a = ComplexMat::identity(2, 2);
        a[(0, 1)] = c(0.0, 1.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn hpd_identity_and_scaling() {
        let b = ComplexVec::from_vec(vec![c(4.0, 1.0), c(6.0, -2.0)]);
        let x = solve_hpd(&ComplexMat::identity(2, 2), &b).unwrap();
        assert!((x - &b).norm() < 1e-15);

        let two = ComplexMat::identity(2, 2) * c(2.0, 0.0);
        let x = solve_hpd(&two, &ComplexVec::from_vec(vec![c(4.0, 0.0), c(6.0, 0.0)])).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hpd_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = ComplexMat::from_fn(5, 5, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let a = &x * x.adjoint() + ComplexMat::identity(5, 5) * c(0.1, 0.0);
            let b = ComplexVec::from_fn(5, |_, _| c(rng.random(), rng.random()));
            let sol = solve_hpd(&a, &b).unwrap();
            assert!((&a * sol - &b).norm() <= 1e-9 * b.norm());
        }
    }

    #[test]
    fn hpd_singular() {
        let v = ComplexVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let a = &v * v.adjoint();
        assert_eq!(solve_hpd(&a, &v).unwrap_err(), Error::Singular);
    }

    #[test]
    fn roots_of_simple_functions() {
        let r = find_root_monotone(|x| x - 1.0, Bracket::new(0.0, 2.0).unwrap(), 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = find_root_monotone(|x| x * x * x - 8.0, Bracket::new(0.0, 3.0).unwrap(), 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r =
            find_root_safeguarded(|x| x * x * x - 8.0, |x| 3.0 * x * x, Bracket::new(0.0, 3.0).unwrap(), 1e-14, 1e-12)
                .unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn root_without_sign_change() {
        let err = find_root_monotone(|x| x + 5.0, Bracket::new(0.0, 1.0).unwrap(), 1e-9).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
        assert!(Bracket::new(1.0, 1.0).is_err());
    }

    #[test]
    fn root_matches_dense_sweep() {
        // Decreasing function with a root at an irrational point.
        let f = |x: f64| (-x).exp() - x / 3.0 - 0.1;
        let n = 200_000;
        let (a, b) = (0.0, 3.0);
        let mut sweep_root = f64::NAN;
        for i in 0..n {
            let x0 = a + (b - a) * i as f64 / n as f64;
            let x1 = a + (b - a) * (i + 1) as f64 / n as f64;
            if f(x0) > 0.0 && f(x1) <= 0.0 {
                sweep_root = 0.5 * (x0 + x1);
                break;
            }
        }
        let r = find_root_monotone(f, Bracket::new(a, b).unwrap(), 1e-12).unwrap();
        assert!((r - sweep_root).abs() <= (b - a) / n as f64);
    }
}
