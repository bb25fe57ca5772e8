use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{self, Provenance};
use crate::linalg::{dot, independent_rows, solve};
use crate::model::Problem;
use crate::Tolerances;

/// Artificial bound on `Σλ` used to detect unbounded regions.
pub const MULTIPLIER_CAP: f64 = 1e6;

/// Points per region dimension used when sweeping.
pub const SWEEP_POINTS: usize = 33;

/// `coeffs · λ ≤ rhs` (or `=` for equalities), over all `m` multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Halfspace {
    fn residual(&self, lambda: &[f64]) -> f64 {
        dot(&self.coeffs, lambda) - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    /// 1-based indices of constraints whose multipliers may be nonzero.
    pub active: Vec<usize>,
    pub inequalities: Vec<Halfspace>,
    pub equalities: Vec<Halfspace>,
    /// Per-multiplier projection `[lo, hi]`; `hi` is infinite when unbounded.
    pub intervals: Vec<(f64, f64)>,
    /// Vertices, lexicographically sorted.
    pub vertices: Vec<Vec<f64>>,
    pub bounded: bool,
    /// Vertex with the smallest total `|∇L_i|` over coordinates at a bound;
    /// ties go to the smaller continuous part.
    pub stationary: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MultiplierRegion {
    Empty,
    Point { lambda: Vec<f64> },
    Polytope(Polytope),
}

impl MultiplierRegion {
    pub fn is_empty(&self) -> bool {
        matches!(self, MultiplierRegion::Empty)
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        match self {
            MultiplierRegion::Empty => None,
            MultiplierRegion::Point { lambda } => Some(lambda),
            MultiplierRegion::Polytope(p) => Some(&p.stationary),
        }
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        match self {
            MultiplierRegion::Empty => Vec::new(),
            MultiplierRegion::Point { lambda } => lambda.iter().map(|v| (*v, *v)).collect(),
            MultiplierRegion::Polytope(p) => p.intervals.clone(),
        }
    }

    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        match self {
            MultiplierRegion::Empty => false,
            MultiplierRegion::Point { lambda: l } => {
                l.len() == lambda.len() && l.iter().zip(lambda).all(|(a, b)| (a - b).abs() <= tol)
            }
            MultiplierRegion::Polytope(p) => p.contains(lambda, tol),
        }
    }

    /// Deterministic sample of the region; see [`Polytope::sweep`].
    pub fn sweep(&self, points: usize) -> Vec<Vec<f64>> {
        match self {
            MultiplierRegion::Empty => Vec::new(),
            MultiplierRegion::Point { lambda } => vec![lambda.clone()],
            MultiplierRegion::Polytope(p) => p.sweep(points),
        }
    }
}

impl Polytope {
    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        let m = self.intervals.len();
        lambda.len() == m
            && lambda.iter().enumerate().all(|(j, l)| {
                *l >= -tol && (self.active.contains(&(j + 1)) || l.abs() <= tol)
            })
            && self.inequalities.iter().all(|h| h.residual(lambda) <= tol)
            && self.equalities.iter().all(|h| h.residual(lambda).abs() <= tol)
    }

    fn dimension(&self) -> usize {
        self.active.len()
    }

    /// Upper end used for sampling an unbounded direction.
    fn sample_extent(&self) -> f64 {
        let top = self
            .vertices
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, v| m.max(*v));
        2.0 * top + 1.0
    }

    /// One active multiplier: `points` evenly spaced values. Two: a
    /// `points × points` grid over the bounding box filtered by membership.
    /// More: vertices, centroid and pairwise midpoints. Vertices and segments
    /// between vertex pairs are always included.
    pub fn sweep(&self, points: usize) -> Vec<Vec<f64>> {
        let m = self.intervals.len();
        let points = points.max(2);
        let ext = self.sample_extent();
        let hi = |j: usize| {
            let h = self.intervals[j].1;
            if h.is_finite() {
                h
            } else {
                ext
            }
        };
        let mut out: Vec<Vec<f64>> = Vec::new();
        let push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| {
            if !out.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12)) {
                out.push(v);
            }
        };
        match self.dimension() {
            0 => push(vec![0.0; m], &mut out),
            1 => {
                let j = self.active[0] - 1;
                let (lo, up) = (self.intervals[j].0, hi(j));
                for k in 0..points {
                    let mut l = vec![0.0; m];
                    l[j] = if k + 1 == points {
                        up
                    } else {
                        lo + (up - lo) * k as f64 / (points - 1) as f64
                    };
                    if self.contains(&l, self.tol) {
                        push(l, &mut out);
                    }
                }
            }
            d => {
                for v in &self.vertices {
                    push(v.clone(), &mut out);
                }
                if d == 2 {
                    let (a, b) = (self.active[0] - 1, self.active[1] - 1);
                    let (la, ua) = (self.intervals[a].0, hi(a));
                    let (lb, ub) = (self.intervals[b].0, hi(b));
                    for p in 0..points {
                        for q in 0..points {
                            let mut l = vec![0.0; m];
                            l[a] = la + (ua - la) * p as f64 / (points - 1) as f64;
                            l[b] = lb + (ub - lb) * q as f64 / (points - 1) as f64;
                            if self.contains(&l, self.tol) {
                                push(l, &mut out);
                            }
                        }
                    }
                    for (u, w) in self.vertices.iter().tuple_combinations() {
                        for k in 1..points - 1 {
                            let t = k as f64 / (points - 1) as f64;
                            push(u.iter().zip(w).map(|(x, y)| x + t * (y - x)).collect(), &mut out);
                        }
                    }
                } else {
                    let nv = self.vertices.len() as f64;
                    let mut c = vec![0.0; m];
                    for v in &self.vertices {
                        for (ci, vi) in c.iter_mut().zip(v) {
                            *ci += vi / nv;
                        }
                    }
                    push(c, &mut out);
                    for (u, w) in self.vertices.iter().tuple_combinations() {
                        push(u.iter().zip(w).map(|(x, y)| 0.5 * (x + y)).collect(), &mut out);
                    }
                }
            }
        }
        out
    }
}

/// The set of `λ ≥ 0` that are complementary to the constraint values at `x`
/// and satisfy the necessary condition: equality at interior continuous
/// coordinates and the sign condition at continuous coordinates on a bound.
pub fn solve_multiplier_region(p: &Problem, x: &[f64], tol: &Tolerances) -> Result<MultiplierRegion> {
    if !p.feasibility_with(x, tol)?.feasible {
        return Err(Error::Contract(format!("candidate {x:?} is not feasible")));
    }
    let m = p.num_constraints();
    let terms = kkt::gradient_terms(p, x)?;
    let active = kkt::active_constraints(p, x, tol)?;
    let prov = kkt::provenance(p.bounds(), x, tol.snap);
    let k = active.len();
    let eps = tol.kkt;

    let full = |local: &[f64]| -> Vec<f64> {
        let mut l = vec![0.0; m];
        for (a, j) in active.iter().enumerate() {
            l[j - 1] = local[a];
        }
        l
    };

    // Rows over the active multipliers: [coeffs..., rhs].
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut ineq_rows: Vec<Vec<f64>> = Vec::new();
    for i in p.bounds().continuous() {
        let mut row: Vec<f64> = active.iter().map(|j| terms[*j][i]).collect();
        match prov[i].sign() {
            None => {
                row.push(-terms[0][i]);
                eq_rows.push(row);
            }
            Some(s) => {
                for v in row.iter_mut() {
                    *v *= s;
                }
                row.push(-s * terms[0][i]);
                ineq_rows.push(row);
            }
        }
    }
    let model_ineqs = ineq_rows.len();
    for a in 0..k {
        let mut row = vec![0.0; k + 1];
        row[a] = -1.0;
        ineq_rows.push(row);
    }
    let mut cap = vec![1.0; k];
    cap.push(MULTIPLIER_CAP);
    ineq_rows.push(cap);
    let cap_index = ineq_rows.len() - 1;

    let (indep, dependent_residual) = independent_rows(&eq_rows, k, 1e-12);
    if dependent_residual > eps {
        return Ok(MultiplierRegion::Empty);
    }
    let r = indep.len();

    let feasible = |l: &[f64]| -> bool {
        ineq_rows.iter().all(|row| dot(&row[..k], l) - row[k] <= eps)
            && eq_rows.iter().all(|row| (dot(&row[..k], l) - row[k]).abs() <= eps)
    };

    let mut vertices: Vec<(Vec<f64>, bool)> = Vec::new();
    for combo in (0..ineq_rows.len()).combinations(k - r) {
        let mut a = Vec::with_capacity(k * k);
        let mut b = Vec::with_capacity(k);
        for row in indep.iter().chain(combo.iter().map(|&c| &ineq_rows[c])) {
            a.extend_from_slice(&row[..k]);
            b.push(row[k]);
        }
        let Some(sol) = solve(&a, &b, k, 1e-12) else {
            continue;
        };
        if !sol.iter().all(|v| v.is_finite()) || !feasible(&sol) {
            continue;
        }
        let sol: Vec<f64> = sol.into_iter().map(|v| if v.abs() <= 1e-14 { 0.0 } else { v }).collect();
        let on_cap = {
            let row = &ineq_rows[cap_index];
            (dot(&row[..k], &sol) - row[k]).abs() <= 1e-6 * MULTIPLIER_CAP
        };
        if !vertices
            .iter()
            .any(|(v, _)| v.iter().zip(&sol).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs())))
        {
            vertices.push((sol, on_cap));
        }
    }
    if vertices.is_empty() {
        return Ok(MultiplierRegion::Empty);
    }

    let bounded = vertices.iter().all(|(_, c)| !c);
    let mut intervals = vec![(0.0, 0.0); m];
    for (a, j) in active.iter().enumerate() {
        let lo = vertices.iter().map(|(v, _)| v[a]).fold(f64::INFINITY, f64::min);
        let hi = vertices
            .iter()
            .map(|(v, c)| if *c && v[a] > 1e-3 * MULTIPLIER_CAP { f64::INFINITY } else { v[a] })
            .fold(f64::NEG_INFINITY, f64::max);
        intervals[j - 1] = (lo.max(0.0), hi);
    }
    let mut finite: Vec<Vec<f64>> = vertices.iter().filter(|(_, c)| !c).map(|(v, _)| full(v)).collect();
    finite.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // Total over bound and discrete coordinates, ties broken by the
    // continuous part alone.
    let residual = |l: &[f64]| -> (f64, f64) {
        let g = kkt_gradient(&terms, l);
        let mut total = 0.0;
        let mut cont = 0.0;
        for i in 0..p.dim() {
            let discrete = p.bounds().domains[i].is_discrete();
            if prov[i] != Provenance::Interior || discrete {
                total += g[i].abs();
                if !discrete {
                    cont += g[i].abs();
                }
            }
        }
        (total, cont)
    };
    let stationary = finite
        .iter()
        .map(|v| (residual(v), v))
        .fold(None::<((f64, f64), &Vec<f64>)>, |best, c| match best {
            Some(b) if b.0 .0 < c.0 .0 - 1e-12 => Some(b),
            Some(b) if (b.0 .0 - c.0 .0).abs() <= 1e-12 && b.0 .1 <= c.0 .1 + 1e-12 => Some(b),
            _ => Some(c),
        })
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| full(&vertices[0].0));

    if bounded && finite.len() == 1 {
        return Ok(MultiplierRegion::Point { lambda: stationary });
    }

    let to_halfspace = |row: &Vec<f64>| Halfspace {
        coeffs: full(&row[..k]),
        rhs: row[k],
    };
    let inequalities = ineq_rows[..model_ineqs].iter().map(to_halfspace).collect();
    let equalities = eq_rows.iter().map(to_halfspace).collect();
    Ok(MultiplierRegion::Polytope(Polytope {
        active,
        inequalities,
        equalities,
        intervals,
        vertices: finite,
        bounded,
        stationary,
        tol: eps,
    }))
}

fn kkt_gradient(terms: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut g = terms[0].clone();
    for (t, l) in terms[1..].iter().zip(lambda) {
        crate::linalg::axpy(&mut g, *l, t);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::model::{MixedBox, Program, QuadraticFunction, SymMatrix, VariableDomain};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn interval(r: &MultiplierRegion) -> (f64, f64) {
        r.intervals()[0]
    }

    #[test]
    fn e1_region_and_stationary_multiplier() {
        let r = solve_multiplier_region(&examples::e1(), &[2.0, 2.0], &tol()).unwrap();
        let (lo, hi) = interval(&r);
        assert!(lo.abs() < 1e-12 && (hi - 2.4).abs() < 1e-12);
        assert!((r.stationary().unwrap()[0] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn e2_regions() {
        let e2 = examples::e2();
        let r = solve_multiplier_region(&e2, &[-1.0, -1.0], &tol()).unwrap();
        let (lo, hi) = interval(&r);
        assert!(lo.abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        let s = r.sweep(SWEEP_POINTS);
        assert_eq!(s.len(), SWEEP_POINTS);
        assert_eq!(s[0], vec![0.0]);
        assert_eq!(s[SWEEP_POINTS - 1], vec![2.0]);

        let r = solve_multiplier_region(&e2, &[1.0, -1.0], &tol()).unwrap();
        assert_eq!(r, MultiplierRegion::Point { lambda: vec![0.0] });
        let r = solve_multiplier_region(&e2, &[0.0, 1.0], &tol()).unwrap();
        assert_eq!(r, MultiplierRegion::Point { lambda: vec![0.0] });
        let (lo, hi) = interval(&solve_multiplier_region(&e2, &[1.0, 1.0], &tol()).unwrap());
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn e3_and_e4_regions() {
        let (lo, hi) = interval(&solve_multiplier_region(&examples::e3(), &[-1.0, -1.0], &tol()).unwrap());
        assert!(lo.abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        let (lo, hi) = interval(&solve_multiplier_region(&examples::e4(), &[-1.0, -1.0], &tol()).unwrap());
        assert!(lo.abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_kkt_point_is_empty_and_infeasible_is_an_error() {
        let e2 = examples::e2();
        assert!(solve_multiplier_region(&e2, &[0.5, 1.0], &tol()).unwrap().is_empty());
        assert!(matches!(
            solve_multiplier_region(&e2, &[0.5, 0.0], &tol()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn unbounded_and_two_dimensional_regions() {
        let b = MixedBox::new(vec![
            VariableDomain::continuous(-1.0, 1.0),
            VariableDomain::continuous(-1.0, 1.0),
        ])
        .unwrap();
        let obj = QuadraticFunction::new(SymMatrix::zeros(2), vec![1.0, 1.0], 0.0).unwrap();
        let c1 = QuadraticFunction::new(SymMatrix::zeros(2), vec![1.0, 0.0], 1.0).unwrap();
        let c2 = QuadraticFunction::new(SymMatrix::zeros(2), vec![0.0, -1.0], -1.0).unwrap();
        let p = Problem::quadratic(b, Program::new(obj, vec![c1, c2])).unwrap();
        let r = solve_multiplier_region(&p, &[-1.0, -1.0], &tol()).unwrap();
        let MultiplierRegion::Polytope(poly) = &r else {
            panic!("expected a polytope, got {r:?}")
        };
        assert!(!poly.bounded);
        assert_eq!(poly.intervals[0].1, f64::INFINITY);
        assert_eq!(poly.intervals[1], (0.0, 1.0));
        assert_eq!(poly.stationary, vec![0.0, 1.0]);
        let s = r.sweep(SWEEP_POINTS);
        assert!(s.len() > 4);
        assert!(s.iter().all(|l| r.contains(l, 1e-8)));
    }
}
