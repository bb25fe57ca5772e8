use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SymMatrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralVerdict {
    pub min_eig: f64,
    pub max_eig: f64,
    pub definiteness: Definiteness,
    /// Set when the matrix is both PSD and NSD within `tol`.
    pub both_semidefinite: bool,
    pub tol: f64,
}

impl SpectralVerdict {
    pub fn from_extremes(min_eig: f64, max_eig: f64, tol: f64) -> Self {
        use Definiteness::*;
        let definiteness = if min_eig > tol {
            PositiveDefinite
        } else if max_eig < -tol {
            NegativeDefinite
        } else if min_eig >= -tol {
            PositiveSemidefinite
        } else if max_eig <= tol {
            NegativeSemidefinite
        } else {
            Indefinite
        };
        SpectralVerdict {
            min_eig,
            max_eig,
            definiteness,
            both_semidefinite: min_eig >= -tol && max_eig <= tol,
            tol,
        }
    }

    pub fn is_pd(&self) -> bool {
        self.min_eig > self.tol
    }

    pub fn is_psd(&self) -> bool {
        self.min_eig >= -self.tol
    }

    pub fn is_nd(&self) -> bool {
        self.max_eig < -self.tol
    }

    pub fn is_nsd(&self) -> bool {
        self.max_eig <= self.tol
    }
}

/// Eigenvalues and eigenvectors (columns of `vectors`, row-major) of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues come back in nondecreasing order.
pub fn eigen_sym(m: &SymMatrix) -> Result<Eigen> {
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let target = OFF_DIAGONAL_REL * m.frobenius_norm();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= target;
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    Ok(Eigen { values, vectors })
}

pub fn eigs_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(eigen_sym(m)?.values)
}

pub fn default_psd_tol(m: &SymMatrix) -> f64 {
    1e-9 * (1.0 + m.frobenius_norm())
}

pub fn classify(m: &SymMatrix, tol: f64) -> Result<SpectralVerdict> {
    if !(tol >= 0.0) {
        return Err(Error::Contract(format!("tolerance must be nonnegative, got {tol}")));
    }
    let e = eigs_sym(m)?;
    Ok(SpectralVerdict::from_extremes(e[0], e[e.len() - 1], tol))
}

/// Smallest eigenvalue of `−A/2`.
pub fn mu_first_eigenvalue(a: &SymMatrix) -> Result<f64> {
    let e = eigs_sym(a)?;
    Ok(-0.5 * e[e.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn two_by_two_spectra() {
        let e = eigs_sym(&m(&[vec![2.0, -1.0], vec![-1.0, 1.0]])).unwrap();
        let r5 = 5f64.sqrt();
        assert!((e[0] - (3.0 - r5) / 2.0).abs() < 1e-14);
        assert!((e[1] - (3.0 + r5) / 2.0).abs() < 1e-14);
        let e = eigs_sym(&m(&[vec![-2.0, 4.0], vec![4.0, -2.0]])).unwrap();
        assert!((e[0] + 6.0).abs() < 1e-14 && (e[1] - 2.0).abs() < 1e-14);
        assert_eq!(eigs_sym(&SymMatrix::identity(5)).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn eigenvectors_diagonalise() {
        let a = m(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 0.5, 3.0],
            vec![-2.0, 3.0, -1.0],
        ]);
        let e = eigen_sym(&a).unwrap();
        for c in 0..3 {
            let v: Vec<f64> = (0..3).map(|k| e.vectors[k * 3 + c]).collect();
            let av = a.mul_vec(&v);
            for k in 0..3 {
                assert!((av[k] - e.values[c] * v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classification() {
        let v = classify(&m(&[vec![2.0, -1.0], vec![-1.0, 1.0]]), 1e-9).unwrap();
        assert_eq!(v.definiteness, Definiteness::PositiveDefinite);
        let z = SymMatrix::zeros(3);
        let v = classify(&z, default_psd_tol(&z)).unwrap();
        assert_eq!(v.definiteness, Definiteness::PositiveSemidefinite);
        assert!(v.both_semidefinite && v.is_nsd());
        let v = classify(&m(&[vec![-10.0, 4.0], vec![4.0, -10.0]]), 1e-9).unwrap();
        assert_eq!(v.definiteness, Definiteness::NegativeDefinite);
        let v = classify(&m(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 1e-9).unwrap();
        assert_eq!(v.definiteness, Definiteness::Indefinite);
        let v = classify(&m(&[vec![-1.0, 0.0], vec![0.0, 0.0]]), 1e-9).unwrap();
        assert_eq!(v.definiteness, Definiteness::NegativeSemidefinite);
        assert!(classify(&z, -1.0).is_err());
    }

    #[test]
    fn mu_values() {
        assert_eq!(mu_first_eigenvalue(&m(&[vec![-2.0, 0.0], vec![0.0, -2.0]])).unwrap(), 1.0);
        assert_eq!(mu_first_eigenvalue(&SymMatrix::zeros(2)).unwrap(), 0.0);
        let mu = mu_first_eigenvalue(&m(&[vec![-2.0, 4.0], vec![4.0, -2.0]])).unwrap();
        assert!((mu + 1.0).abs() < 1e-14);
    }
}
