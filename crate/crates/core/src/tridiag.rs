//! Complex tridiagonal systems solved by Thomas elimination.

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    /// `lower[i]` couples row `i + 1` to column `i`.
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    /// `upper[i]` couples row `i` to column `i + 1`.
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Tridiagonal {
            lower: vec![z; n.saturating_sub(1)],
            diag: vec![z; n],
            upper: vec![z; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Direct solve without pivoting; intended for diagonally dominant or
    /// coercive systems.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::dim("tridiagonal solve", n, rhs.len()));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = self.diag[0];
        if pivot.norm() == 0.0 {
            return Err(Error::SingularSystem(0));
        }
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if pivot.norm() == 0.0 {
                return Err(Error::SingularSystem(i));
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= c[i] * next;
        }
        if d.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("tridiagonal solve".into()));
        }
        Ok(d)
    }

    /// `||A x - b|| / ||b||` in the Euclidean norm.
    pub fn relative_residual(&self, x: &[Complex64], rhs: &[Complex64]) -> f64 {
        let ax = self.apply(x);
        let num: f64 = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_small_complex_system() {
        let a = Tridiagonal {
            lower: vec![c(1.0, 0.5), c(-1.0, 0.0)],
            diag: vec![c(4.0, 1.0), c(5.0, -1.0), c(3.0, 2.0)],
            upper: vec![c(0.5, 0.0), c(1.0, 1.0)],
        };
        let x_true = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 1.0)];
        let b = a.apply(&x_true);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-14);
        }
        assert!(a.relative_residual(&x, &b) < 1e-15);
    }

    #[test]
    fn one_by_one() {
        let a = Tridiagonal {
            lower: vec![],
            diag: vec![c(2.0, 0.0)],
            upper: vec![],
        };
        assert_eq!(a.solve(&[c(3.0, 1.0)]).unwrap(), vec![c(1.5, 0.5)]);
    }

    #[test]
    fn singular_and_mismatched() {
        let a = Tridiagonal::zeros(3);
        assert!(matches!(
            a.solve(&[c(1.0, 0.0); 3]),
            Err(Error::SingularSystem(0))
        ));
        assert!(matches!(
            a.solve(&[c(1.0, 0.0); 2]),
            Err(Error::Dimension { .. })
        ));
    }
}
