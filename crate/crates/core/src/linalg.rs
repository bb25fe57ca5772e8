//! Small dense helpers shared by the solvers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`. Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve(a: &[f64], b: &[f64], n: usize, pivot_tol: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best <= pivot_tol {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let p = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for k in r + 1..n {
            s -= m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

/// Determinant via LU with partial pivoting.
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap_or(col);
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            sign = -sign;
        }
        let p = m[col * n + col];
        d *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
        }
    }
    sign * d
}

/// Row-reduces `rows` (each `[coeffs..., rhs]`) and returns the independent
/// rows plus the largest residual of the rows found to be dependent.
pub fn independent_rows(rows: &[Vec<f64>], k: usize, tol: f64) -> (Vec<Vec<f64>>, f64) {
    let mut work: Vec<Vec<f64>> = rows.to_vec();
    let mut kept = Vec::new();
    let mut worst = 0.0f64;
    let mut col = 0;
    while !work.is_empty() {
        if col == k {
            for r in &work {
                worst = worst.max(r[k].abs());
            }
            break;
        }
        let (idx, best) = work
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r[col].abs()))
            .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best <= tol {
            col += 1;
            continue;
        }
        let pivot = work.swap_remove(idx);
        for r in work.iter_mut() {
            let f = r[col] / pivot[col];
            for c in col..=k {
                r[c] -= f * pivot[c];
            }
        }
        kept.push(pivot);
        col += 1;
    }
    (kept, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let x = solve(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2, 1e-14).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2, 1e-12).is_none());
    }

    #[test]
    fn det_matches_closed_form() {
        assert!((det(&[2.0, -1.0, -1.0, 1.0], 2) - 1.0).abs() < 1e-14);
        assert!((det(&[0.0, 1.0, 1.0, 0.0], 2) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let rows = vec![vec![1.0, 1.0, 2.0], vec![2.0, 2.0, 4.0], vec![1.0, -1.0, 0.0]];
        let (kept, worst) = independent_rows(&rows, 2, 1e-12);
        assert_eq!(kept.len(), 2);
        assert!(worst < 1e-12);
        let bad = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        let (kept, worst) = independent_rows(&bad, 1, 1e-12);
        assert_eq!(kept.len(), 1);
        assert!((worst - 1.0).abs() < 1e-14);
    }
}
