//! Exhaustive desk-scale search over the feasible set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::cmp_point;
use crate::error::{Error, Result};
use crate::grid::{points_for_budget, Lattice};
use crate::kkt::{self, Provenance};
use crate::linalg::{dot, solve};
use crate::model::Problem;
use crate::region::solve_multiplier_region;
use crate::Tolerances;

pub const MAX_DIMENSION: usize = 12;
/// Feasibility tolerance on the coarse grid.
pub const GRID_FEASIBILITY: f64 = 1e-6;
const TOTAL_POINT_CAP: u64 = 40_000_000;
const NEAR_OPTIMAL_KEEP: usize = 64;
const SAMPLE_TARGET: u64 = 200_000;
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub refinement_rounds: usize,
}

impl GridSpec {
    /// 201 points and 3 rounds up to three variables, 41 points up to six,
    /// with the full lattice capped at 4e7 points.
    pub fn default_for(p: &Problem) -> Self {
        let n = p.dim();
        let (ppa, rounds) = if n <= 3 { (201, 3) } else { (41, 3) };
        GridSpec {
            points_per_axis: points_for_budget(p.bounds(), TOTAL_POINT_CAP, ppa),
            refinement_rounds: rounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub sampled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub feasible_count: u64,
    pub grid: GridSpec,
    pub evaluated: u64,
    pub summary: ValueSummary,
    /// Lattice points whose value is within `1e-6·(1 + |best|)` of the best.
    pub near_optimal: Vec<Vec<f64>>,
    /// Largest lattice spacing over the continuous axes.
    pub cell: f64,
}

fn check_size(p: &Problem, ppa: usize) -> Result<()> {
    if p.dim() > MAX_DIMENSION {
        return Err(Error::TooLarge(format!(
            "{} variables (the oracle handles at most {MAX_DIMENSION})",
            p.dim()
        )));
    }
    if ppa < 3 {
        return Err(Error::Contract(format!("need at least 3 points per axis, got {ppa}")));
    }
    Ok(())
}

struct Eval {
    value: f64,
    strict: bool,
}

fn evaluate(p: &Problem, x: &[f64], strict: &Tolerances, relaxed: &Tolerances) -> Option<Eval> {
    let value = p.objective(x).ok()?;
    let mut worst = f64::NEG_INFINITY;
    for j in 1..=p.num_constraints() {
        worst = worst.max(p.slack(j, x).ok()?);
    }
    if worst > relaxed.feasibility {
        return None;
    }
    Some(Eval {
        value,
        strict: worst <= strict.feasibility,
    })
}

#[derive(Default)]
struct ChunkStats {
    strict_best: Option<(f64, Vec<f64>)>,
    relaxed_best: Option<(f64, Vec<f64>)>,
    feasible: u64,
    lowest: Vec<(f64, Vec<f64>)>,
    sample: Vec<f64>,
}

fn keep_min(slot: &mut Option<(f64, Vec<f64>)>, cand: (f64, Vec<f64>)) {
    match slot {
        Some(cur) if cmp_point(cur, &cand).is_le() => {}
        _ => *slot = Some(cand),
    }
}

fn merge(mut a: ChunkStats, b: ChunkStats) -> ChunkStats {
    if let Some(s) = b.strict_best {
        keep_min(&mut a.strict_best, s);
    }
    if let Some(s) = b.relaxed_best {
        keep_min(&mut a.relaxed_best, s);
    }
    a.feasible += b.feasible;
    a.lowest.extend(b.lowest);
    a.lowest.sort_by(cmp_point);
    a.lowest.truncate(NEAR_OPTIMAL_KEEP);
    a.sample.extend(b.sample);
    a
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Enumerates every discrete assignment times a uniform grid on the continuous
/// coordinates, then refines around the best point by halving the spacing
/// `refinement_rounds` times. Grid points count as feasible at `1e-6`; only
/// points feasible at the strict tolerance are reported as best.
pub fn global_search(p: &Problem, points_per_axis: usize, refinement_rounds: usize) -> Result<OracleResult> {
    global_search_with(p, points_per_axis, refinement_rounds, &Tolerances::default())
}

pub fn global_search_with(
    p: &Problem,
    points_per_axis: usize,
    refinement_rounds: usize,
    tol: &Tolerances,
) -> Result<OracleResult> {
    check_size(p, points_per_axis)?;
    let lattice = Lattice::new(p.bounds(), points_per_axis);
    let total = lattice.len();
    if total > 50 * TOTAL_POINT_CAP {
        return Err(Error::TooLarge(format!("{total} grid points")));
    }
    let relaxed = Tolerances {
        feasibility: GRID_FEASIBILITY.max(tol.feasibility),
        ..*tol
    };
    let n = p.dim();
    let stride = (total / SAMPLE_TARGET).max(1);
    let chunks = total.div_ceil(CHUNK);

    let stats = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut st = ChunkStats::default();
            let mut x = vec![0.0; n];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                lattice.point(idx, &mut x);
                let Some(e) = evaluate(p, &x, tol, &relaxed) else {
                    continue;
                };
                st.feasible += 1;
                if idx % stride == 0 {
                    st.sample.push(e.value);
                }
                keep_min(&mut st.relaxed_best, (e.value, x.clone()));
                if e.strict {
                    keep_min(&mut st.strict_best, (e.value, x.clone()));
                    let worst = st.lowest.last().map(|w| w.0).unwrap_or(f64::INFINITY);
                    if st.lowest.len() < NEAR_OPTIMAL_KEEP || e.value < worst {
                        st.lowest.push((e.value, x.clone()));
                        st.lowest.sort_by(cmp_point);
                        st.lowest.truncate(NEAR_OPTIMAL_KEEP);
                    }
                }
            }
            st
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(ChunkStats::default(), merge);

    let cont = p.bounds().continuous();
    let mut spacing: Vec<f64> = p
        .bounds()
        .widths()
        .iter()
        .map(|w| w / (points_per_axis - 1) as f64)
        .collect();
    let cell = cont.iter().map(|&i| spacing[i]).fold(0.0, f64::max);

    let mut best = stats.strict_best.clone();
    if let Some((_, mut center)) = stats.relaxed_best.clone() {
        let local = if cont.len() > 6 { 1 } else { 2 };
        let offsets = (2 * local + 1) as u64;
        let count = offsets.saturating_pow(cont.len() as u32);
        for _ in 0..refinement_rounds {
            for s in spacing.iter_mut() {
                *s *= 0.5;
            }
            let mut round_best: Option<(f64, Vec<f64>)> = None;
            for k in 0..count {
                let mut y = center.clone();
                let mut rest = k;
                for &i in &cont {
                    let off = (rest % offsets) as f64 - local as f64;
                    rest /= offsets;
                    let d = &p.bounds().domains[i];
                    y[i] = (center[i] + off * spacing[i]).clamp(d.lower, d.upper);
                }
                if let Some(e) = evaluate(p, &y, tol, tol) {
                    keep_min(&mut round_best, (e.value, y));
                }
            }
            if let Some(rb) = round_best {
                center = rb.1.clone();
                keep_min(&mut best, rb);
            }
        }
    }

    let Some((_, best_point)) = best else {
        return Err(Error::NoFeasiblePoint);
    };
    let best_value = p.objective(&best_point)?;
    let band = 1e-6 * (1.0 + best_value.abs());
    let near_optimal = stats
        .lowest
        .iter()
        .filter(|(v, _)| *v <= best_value + band)
        .map(|(_, x)| x.clone())
        .collect();

    let mut sample = stats.sample;
    sample.sort_by(f64::total_cmp);
    let summary = if sample.is_empty() {
        ValueSummary {
            min: best_value,
            q1: best_value,
            median: best_value,
            q3: best_value,
            max: best_value,
            sampled: 0,
        }
    } else {
        ValueSummary {
            min: sample[0],
            q1: quantile(&sample, 0.25),
            median: quantile(&sample, 0.5),
            q3: quantile(&sample, 0.75),
            max: sample[sample.len() - 1],
            sampled: sample.len(),
        }
    };

    Ok(OracleResult {
        best_point,
        best_value,
        feasible_count: stats.feasible,
        grid: GridSpec {
            points_per_axis,
            refinement_rounds,
        },
        evaluated: total,
        summary,
        near_optimal,
        cell,
    })
}

/// Projected-gradient violation of the necessary condition at `x`,
/// minimised over `λ ≥ 0` on the constraints in `allowed`.
fn kkt_residual(terms: &[Vec<f64>], prov: &[Provenance], cont: &[usize], allowed: &[usize]) -> (f64, Vec<f64>) {
    let k = allowed.len();
    let violation = |lam: &[f64]| -> Vec<f64> {
        cont.iter()
            .map(|&i| {
                let g = terms[0][i] + allowed.iter().zip(lam).map(|(j, l)| l * terms[*j][i]).sum::<f64>();
                match prov[i].sign() {
                    None => g,
                    Some(s) => (s * g).max(0.0),
                }
            })
            .collect()
    };
    let mut lam = vec![0.0; k];
    if k > 0 {
        let lip: f64 = cont
            .iter()
            .map(|&i| allowed.iter().map(|j| terms[*j][i] * terms[*j][i]).sum::<f64>())
            .sum::<f64>()
            .max(1e-300);
        let step = 0.5 / lip;
        for _ in 0..200 {
            let w = violation(&lam);
            let mut moved = 0.0f64;
            for (a, j) in allowed.iter().enumerate() {
                let grad: f64 = cont
                    .iter()
                    .zip(&w)
                    .map(|(&i, wi)| {
                        let s = prov[i].sign().unwrap_or(1.0);
                        let active = prov[i] == Provenance::Interior || *wi > 0.0;
                        if active {
                            2.0 * wi * s * terms[*j][i]
                        } else {
                            0.0
                        }
                    })
                    .sum();
                let nl = (lam[a] - step * grad).max(0.0);
                moved = moved.max((nl - lam[a]).abs());
                lam[a] = nl;
            }
            if moved < 1e-14 {
                break;
            }
        }
    }
    let w = violation(&lam);
    (dot(&w, &w).sqrt(), lam)
}

/// Damped Gauss-Newton on the face of `x`: interior continuous coordinates
/// and the multipliers of `active` are free, the rest stay fixed.
fn polish(p: &Problem, x: &[f64], active: &[usize], lam0: &[f64], tol: &Tolerances) -> Option<Vec<f64>> {
    let prov = kkt::provenance(p.bounds(), x, tol.snap);
    let free: Vec<usize> = p
        .bounds()
        .continuous()
        .into_iter()
        .filter(|&i| prov[i] == Provenance::Interior)
        .collect();
    let nf = free.len();
    let na = active.len();
    let nz = nf + na;
    let ne = nf + na;
    if nz == 0 {
        return Some(x.to_vec());
    }
    let unpack = |z: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut y = x.to_vec();
        for (k, &i) in free.iter().enumerate() {
            y[i] = z[k];
        }
        (y, z[nf..].to_vec())
    };
    let residual = |z: &[f64]| -> Option<Vec<f64>> {
        let (y, lam) = unpack(z);
        let mut r = Vec::with_capacity(ne);
        let g0 = p.gradient(0, &y).ok()?;
        let mut g = g0;
        for (a, &j) in active.iter().enumerate() {
            let gj = p.gradient(j, &y).ok()?;
            crate::linalg::axpy(&mut g, lam[a], &gj);
        }
        for &i in &free {
            r.push(g[i]);
        }
        for &j in active {
            r.push(p.slack(j, &y).ok()?);
        }
        Some(r)
    };
    let mut z: Vec<f64> = free.iter().map(|&i| x[i]).chain(lam0.iter().cloned()).collect();
    let mut r = residual(&z)?;
    let mut damping = 1e-8;
    for _ in 0..60 {
        let rn = dot(&r, &r).sqrt();
        if rn <= 1e-13 {
            break;
        }
        let mut jac = vec![0.0; ne * nz];
        for c in 0..nz {
            let h = 1e-7 * (1.0 + z[c].abs());
            let mut zp = z.clone();
            zp[c] += h;
            let mut zm = z.clone();
            zm[c] -= h;
            let (rp, rm) = (residual(&zp)?, residual(&zm)?);
            for e in 0..ne {
                jac[e * nz + c] = (rp[e] - rm[e]) / (2.0 * h);
            }
        }
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = vec![0.0; nz * nz];
            let mut b = vec![0.0; nz];
            for i in 0..nz {
                for k in 0..nz {
                    a[i * nz + k] = (0..ne).map(|e| jac[e * nz + i] * jac[e * nz + k]).sum();
                }
                a[i * nz + i] += damping * (1.0 + a[i * nz + i]);
                b[i] = -(0..ne).map(|e| jac[e * nz + i] * r[e]).sum::<f64>();
            }
            let Some(step) = solve(&a, &b, nz, 1e-300) else {
                damping *= 10.0;
                continue;
            };
            let mut zn: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
            for (k, &i) in free.iter().enumerate() {
                let d = &p.bounds().domains[i];
                zn[k] = zn[k].clamp(d.lower, d.upper);
            }
            if let Some(rn_new) = residual(&zn) {
                if dot(&rn_new, &rn_new).sqrt() < rn {
                    z = zn;
                    r = rn_new;
                    damping = (damping * 0.1).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if dot(&r, &r).sqrt() > 1e-9 * scale {
        return None;
    }
    Some(p.bounds().snap(&unpack(&z).0, 1e-9))
}

/// Grid-local minima of the objective plus grid-local minima of the KKT
/// residual, polished onto their face, snapped to the box and deduplicated at
/// resolution 1e-4. Points are ordered by objective value.
pub fn candidate_scan(p: &Problem, points_per_axis: usize) -> Result<Vec<Vec<f64>>> {
    candidate_scan_with(p, points_per_axis, &Tolerances::default())
}

pub fn candidate_scan_with(p: &Problem, points_per_axis: usize, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    check_size(p, points_per_axis)?;
    let lattice = Lattice::new(p.bounds(), points_per_axis);
    let total = lattice.len();
    if total > 4_000_000 {
        return Err(Error::TooLarge(format!("{total} grid points for a candidate scan")));
    }
    let relaxed = Tolerances {
        feasibility: GRID_FEASIBILITY.max(tol.feasibility),
        ..*tol
    };
    let n = p.dim();
    let cont = p.bounds().continuous();
    let cell = cont
        .iter()
        .map(|&i| p.bounds().domains[i].width() / (points_per_axis - 1) as f64)
        .fold(0.0, f64::max);

    let per_point: Vec<Option<(f64, f64, Vec<usize>, Vec<f64>)>> = (0..total as usize)
        .into_par_iter()
        .with_min_len(1024)
        .map(|idx| {
            let mut x = vec![0.0; n];
            lattice.point(idx as u64, &mut x);
            let e = evaluate(p, &x, tol, &relaxed)?;
            let terms = kkt::gradient_terms(p, &x).ok()?;
            let prov = kkt::provenance(p.bounds(), &x, tol.snap);
            let mut near = Vec::new();
            for j in 1..=p.num_constraints() {
                let s = p.slack(j, &x).ok()?;
                let reach = crate::linalg::norm(&terms[j]) * cell + relaxed.feasibility;
                if s.abs() <= reach {
                    near.push(j);
                }
            }
            let (r, lam) = kkt_residual(&terms, &prov, &cont, &near);
            Some((e.value, r, near, lam))
        })
        .collect();

    let mut multi = vec![0usize; n];
    let mut seeds: Vec<(Vec<f64>, bool, Vec<usize>, Vec<f64>)> = Vec::new();
    let axes = lattice.axes();
    for idx in 0..total {
        let Some((v, r, near, lam)) = &per_point[idx as usize] else {
            continue;
        };
        lattice.index_of(idx, &mut multi);
        let mut obj_min = true;
        let mut res_min = true;
        let mut res_spread = 0.0f64;
        for i in 0..n {
            let len = axes[i].len();
            let mut nbrs = Vec::new();
            if p.bounds().domains[i].is_discrete() {
                nbrs.push(1 - multi[i]);
            } else {
                if multi[i] > 0 {
                    nbrs.push(multi[i] - 1);
                }
                if multi[i] + 1 < len {
                    nbrs.push(multi[i] + 1);
                }
            }
            for k in nbrs {
                let mut other = multi.clone();
                other[i] = k;
                let Some((vn, rn, _, _)) = &per_point[lattice.linear(&other) as usize] else {
                    continue;
                };
                if vn < v {
                    obj_min = false;
                }
                if !p.bounds().domains[i].is_discrete() {
                    if rn < r {
                        res_min = false;
                    }
                    res_spread = res_spread.max((rn - r).abs());
                }
            }
        }
        let res_candidate = res_min && *r <= res_spread + 1e-9;
        if obj_min || res_candidate {
            let mut x = vec![0.0; n];
            lattice.point(idx, &mut x);
            seeds.push((x, obj_min, near.clone(), lam.clone()));
        }
    }

    let polished: Vec<Option<(f64, Vec<f64>)>> = seeds
        .par_iter()
        .map(|(x, obj_min, near, lam)| {
            let mut options = Vec::new();
            if let Some(y) = polish(p, x, near, lam, tol) {
                options.push(y);
            }
            if !near.is_empty() {
                if let Some(y) = polish(p, x, &[], &[], tol) {
                    options.push(y);
                }
            }
            for y in options {
                if !p.is_feasible(&y, tol) {
                    continue;
                }
                if let Ok(region) = solve_multiplier_region(p, &y, tol) {
                    if !region.is_empty() {
                        return p.objective(&y).ok().map(|v| (v, y));
                    }
                }
            }
            if *obj_min {
                let y = p.bounds().snap(x, tol.snap);
                return p.objective(&y).ok().map(|v| (v, y));
            }
            None
        })
        .collect();

    let mut found: Vec<(f64, Vec<f64>)> = polished.into_iter().flatten().collect();
    found.sort_by(cmp_point);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (_, x) in found {
        if !out
            .iter()
            .any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-4))
        {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::model::{MixedBox, Program, QuadraticFunction, SymMatrix, VariableDomain};

    fn near(a: &[f64], b: &[f64], t: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= t)
    }

    #[test]
    fn e1_oracle() {
        let r = global_search(&examples::e1(), 201, 3).unwrap();
        assert!(near(&r.best_point, &[2.0, 2.0], 1e-3));
        assert!((r.best_value + 8.0).abs() < 1e-9);
        assert!(r.summary.min <= r.summary.q1 && r.summary.q3 <= r.summary.max);
    }

    #[test]
    fn e4_oracle() {
        let r = global_search(&examples::e4(), 201, 3).unwrap();
        assert!(near(&r.best_point, &[-1.0, -1.0], 1e-3));
        assert!((r.best_value + 2.0).abs() < 1e-6);
    }

    #[test]
    fn convex_interior_minimum() {
        let b = MixedBox::new(vec![VariableDomain::continuous(-1.0, 1.0); 2]).unwrap();
        let f = QuadraticFunction::new(SymMatrix::identity(2), vec![-0.123, 0.456], 0.0).unwrap();
        let p = Problem::quadratic(b, Program::new(f, vec![])).unwrap();
        let r = global_search(&p, 21, 0).unwrap();
        assert!(near(&r.best_point, &[0.123, -0.456], 0.1));
        let refined = global_search(&p, 21, 3).unwrap();
        assert!(refined.best_value <= r.best_value);
    }

    #[test]
    fn deterministic_results() {
        let a = global_search(&examples::e2(), 101, 2).unwrap();
        let b = global_search(&examples::e2(), 101, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn size_limits() {
        let b = MixedBox::new(vec![VariableDomain::continuous(0.0, 1.0); 13]).unwrap();
        let p = Problem::quadratic(b, Program::new(QuadraticFunction::zero(13), vec![])).unwrap();
        assert!(matches!(global_search(&p, 3, 0), Err(Error::TooLarge(_))));
        assert!(matches!(global_search(&examples::e1(), 2, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn infeasible_problem_reports_no_point() {
        let b = MixedBox::new(vec![VariableDomain::continuous(0.0, 1.0)]).unwrap();
        let c = QuadraticFunction::new(SymMatrix::zeros(1), vec![0.0], 1.0).unwrap();
        let p = Problem::quadratic(b, Program::new(QuadraticFunction::zero(1), vec![c])).unwrap();
        assert_eq!(global_search(&p, 11, 1), Err(Error::NoFeasiblePoint));
    }

    #[test]
    fn e2_candidates() {
        let c = candidate_scan(&examples::e2(), 201).unwrap();
        for want in [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]] {
            assert!(c.iter().any(|x| near(x, &want, 1e-4)), "missing {want:?} in {c:?}");
        }
    }

    #[test]
    fn e1_candidates() {
        let c = candidate_scan(&examples::e1(), 201).unwrap();
        assert!(c.iter().any(|x| near(x, &[2.0, 2.0], 1e-4)), "{c:?}");
    }

    #[test]
    fn constant_objective_keeps_every_point() {
        let b = MixedBox::new(vec![VariableDomain::continuous(0.0, 1.0)]).unwrap();
        let p = Problem::quadratic(b, Program::new(QuadraticFunction::zero(1), vec![])).unwrap();
        assert_eq!(candidate_scan(&p, 11).unwrap().len(), 11);
    }
}
