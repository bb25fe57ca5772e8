use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::model::{MixedBox, Problem, ProblemKind, SymMatrix};
use crate::spectral;
use crate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AtLower,
    AtUpper,
    Interior,
}

impl Provenance {
    /// `-1`, `+1`, or `None` for interior coordinates.
    pub fn sign(self) -> Option<f64> {
        match self {
            Provenance::AtLower => Some(-1.0),
            Provenance::AtUpper => Some(1.0),
            Provenance::Interior => None,
        }
    }
}

pub fn provenance(bounds: &MixedBox, x: &[f64], snap: f64) -> Vec<Provenance> {
    x.iter()
        .zip(&bounds.domains)
        .map(|(&v, d)| {
            if (v - d.lower).abs() <= snap {
                Provenance::AtLower
            } else if (v - d.upper).abs() <= snap {
                Provenance::AtUpper
            } else {
                Provenance::Interior
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiVector {
    pub values: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

/// Gradients of functions `0..=m` at `x`: `∇f_j` for quadratic problems,
/// `∇f_j − A_j x` for ρ-convex ones and the quotient-rule gradient of each ratio
/// for fractional ones.
pub fn gradient_terms(p: &Problem, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    (0..=p.num_constraints()).map(|j| p.gradient(j, x)).collect()
}

fn check_lambda(p: &Problem, lambda: &[f64], tol: f64) -> Result<()> {
    if lambda.len() != p.num_constraints() {
        return Err(Error::dim("multipliers", p.num_constraints(), lambda.len()));
    }
    if let Some((j, v)) = lambda.iter().enumerate().find(|(_, v)| !(**v >= -tol)) {
        return Err(Error::Contract(format!(
            "multiplier {} is {v}, multipliers must be nonnegative",
            j + 1
        )));
    }
    Ok(())
}

fn check_feasible(p: &Problem, x: &[f64], tol: &Tolerances) -> Result<()> {
    let r = p.feasibility_with(x, tol)?;
    if !r.feasible {
        return Err(Error::Contract(format!("candidate {x:?} is not feasible")));
    }
    Ok(())
}

fn combine(terms: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut g = terms[0].clone();
    for (t, l) in terms[1..].iter().zip(lambda) {
        axpy(&mut g, *l, t);
    }
    g
}

/// `Σ_j λ_j t_j(x)` with `λ_0 = 1`.
pub fn lagrangian_gradient(p: &Problem, x: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    if lambda.len() != p.num_constraints() {
        return Err(Error::dim("multipliers", p.num_constraints(), lambda.len()));
    }
    Ok(combine(&gradient_terms(p, x)?, lambda))
}

/// Objective denominator at `x` for fractional problems, `1` otherwise.
pub fn chi_scale(p: &Problem, x: &[f64]) -> Result<f64> {
    match p.data() {
        crate::model::ProblemData::Fractional(prog) => prog.objective.denominator(x),
        _ => Ok(1.0),
    }
}

pub fn chi(p: &Problem, x: &[f64], lambda: &[f64]) -> Result<ChiVector> {
    chi_with(p, x, lambda, &Tolerances::default())
}

pub fn chi_with(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<ChiVector> {
    let g = lagrangian_gradient(p, x, lambda)?;
    let c = chi_scale(p, x)?;
    let prov = provenance(p.bounds(), x, tol.snap);
    let values = prov
        .iter()
        .zip(&g)
        .map(|(pr, gi)| pr.sign().unwrap_or(c * gi))
        .collect();
    Ok(ChiVector {
        values,
        provenance: prov,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub index: usize,
    pub provenance: Provenance,
    pub lhs: f64,
    /// `tol − lhs`; negative when violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryVerdict {
    pub holds: bool,
    /// Continuous coordinates; these decide `holds`.
    pub per_coordinate: Vec<CoordinateCheck>,
    /// Discrete coordinates, informational only.
    pub discrete: Vec<CoordinateCheck>,
    pub worst_violation: f64,
}

fn require_kind(p: &Problem, kind: ProblemKind) -> Result<()> {
    if p.kind() != kind {
        return Err(Error::WrongKind {
            expected: kind,
            actual: p.kind(),
        });
    }
    Ok(())
}

fn verdict(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    check_lambda(p, lambda, tol.kkt)?;
    check_feasible(p, x, tol)?;
    let g = lagrangian_gradient(p, x, lambda)?;
    let chi = chi_with(p, x, lambda, tol)?;
    let mut per_coordinate = Vec::new();
    let mut discrete = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..p.dim() {
        let lhs = chi.values[i] * g[i];
        let check = CoordinateCheck {
            index: i,
            provenance: chi.provenance[i],
            lhs,
            margin: tol.kkt - lhs,
        };
        if p.bounds().domains[i].is_discrete() {
            discrete.push(check);
        } else {
            worst = worst.max(lhs);
            per_coordinate.push(check);
        }
    }
    Ok(NecessaryVerdict {
        holds: per_coordinate.iter().all(|c| c.lhs <= tol.kkt),
        per_coordinate,
        discrete,
        worst_violation: worst,
    })
}

/// `χ_i Σ_j λ_j (A_j x̄ + a_j)_i ≤ 0` for continuous `i`.
pub fn necessary_p1(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    require_kind(p, ProblemKind::Quadratic)?;
    verdict(p, x, lambda, tol)
}

/// `χ_i Σ_j λ_j (∇f_j(x̄) − A_j x̄)_i ≤ 0` for continuous `i`.
pub fn necessary_p2(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    require_kind(p, ProblemKind::RhoConvex)?;
    verdict(p, x, lambda, tol)
}

/// `χ̃_i (∇s(x̄) + Σ_j λ_j ∇(f_j/g_j)(x̄))_i ≤ 0` for continuous `i`.
pub fn necessary_p3(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    require_kind(p, ProblemKind::Fractional)?;
    verdict(p, x, lambda, tol)
}

pub fn necessary(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    verdict(p, x, lambda, tol)
}

/// Largest `|λ_j · (value_j − bound_j)|`.
pub fn slackness_residual(p: &Problem, x: &[f64], lambda: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (j, l) in lambda.iter().enumerate() {
        worst = worst.max((l * p.slack(j + 1, x)?).abs());
    }
    Ok(worst)
}

/// Indices (1-based) of constraints with `|slack| ≤ tol.slackness`.
pub fn active_constraints(p: &Problem, x: &[f64], tol: &Tolerances) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for j in 1..=p.num_constraints() {
        if p.slack(j, x)?.abs() <= tol.slackness {
            out.push(j);
        }
    }
    Ok(out)
}

/// Fails with a contract error unless `(x, λ)` is a KKT pair: feasible,
/// nonnegative, complementary and satisfying the necessary condition.
pub fn require_kkt(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<NecessaryVerdict> {
    let v = verdict(p, x, lambda, tol)?;
    if !v.holds {
        return Err(Error::Contract(format!(
            "necessary condition fails at {x:?} with multipliers {lambda:?} (worst lhs {:e})",
            v.worst_violation
        )));
    }
    let s = slackness_residual(p, x, lambda)?;
    if s > tol.slackness {
        return Err(Error::Contract(format!(
            "complementary slackness fails at {x:?} with multipliers {lambda:?} (residual {s:e})"
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LicqReport {
    pub satisfied: bool,
    pub rank: usize,
    pub columns: usize,
    pub singular_values: Vec<f64>,
}

/// Active functional constraint gradients plus the gradients of the active
/// box constraints written as `(x_i − u_i)(x_i − v_i) ≤ 0` (equality for
/// discrete coordinates); satisfied when they are linearly independent.
pub fn licq_check(p: &Problem, x: &[f64], tol: &Tolerances) -> Result<LicqReport> {
    check_feasible(p, x, tol)?;
    let n = p.dim();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in active_constraints(p, x, tol)? {
        cols.push(p.gradient(j, x)?);
    }
    let prov = provenance(p.bounds(), x, tol.snap);
    for (i, d) in p.bounds().domains.iter().enumerate() {
        if d.is_discrete() || prov[i] != Provenance::Interior {
            let mut g = vec![0.0; n];
            g[i] = 2.0 * x[i] - d.lower - d.upper;
            cols.push(g);
        }
    }
    let k = cols.len();
    if k == 0 {
        return Ok(LicqReport {
            satisfied: true,
            rank: 0,
            columns: 0,
            singular_values: Vec::new(),
        });
    }
    let gram = SymMatrix::from_upper(k, |a, b| crate::linalg::dot(&cols[a], &cols[b]));
    let mut sv: Vec<f64> = spectral::eigs_sym(&gram)?
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect();
    sv.reverse();
    let cutoff = 1e-8 * sv[0];
    let rank = sv.iter().filter(|s| **s > cutoff).count();
    Ok(LicqReport {
        satisfied: rank == k && sv[0] > 0.0,
        rank,
        columns: k,
        singular_values: sv,
    })
}
