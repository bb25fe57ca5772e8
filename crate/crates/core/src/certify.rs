use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{points_for_budget, Lattice};
use crate::kkt;
use crate::linalg::{dot, sub};
use crate::model::{Problem, ProblemData, ProblemKind, SymMatrix};
use crate::spectral::{self, SpectralVerdict};
use crate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateKind {
    #[serde(rename = "SCQP")]
    Scqp,
    #[serde(rename = "SC1QP")]
    Sc1qp,
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "SC1RC")]
    Sc1rc,
    #[serde(rename = "SC2RC")]
    Sc2rc,
    #[serde(rename = "GSC")]
    Gsc,
}

impl CertificateKind {
    pub fn label(self) -> &'static str {
        match self {
            CertificateKind::Scqp => "SCQP",
            CertificateKind::Sc1qp => "SC1QP",
            CertificateKind::Sc => "SC",
            CertificateKind::Sc1rc => "SC1RC",
            CertificateKind::Sc2rc => "SC2RC",
            CertificateKind::Gsc => "GSC",
        }
    }

    /// The certificate family, merging the strict variant into its parent.
    pub fn family(self) -> CertificateKind {
        match self {
            CertificateKind::Sc1qp => CertificateKind::Scqp,
            k => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedUnique,
    Certified,
    Inconclusive,
    NotCertified,
}

impl Verdict {
    pub fn fires(self) -> bool {
        matches!(self, Verdict::Certified | Verdict::CertifiedUnique)
    }

    /// Higher is stronger.
    pub fn strength(self) -> u8 {
        match self {
            Verdict::CertifiedUnique => 3,
            Verdict::Certified => 2,
            Verdict::Inconclusive => 1,
            Verdict::NotCertified => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Matrix {
        matrix: SymMatrix,
        eigenvalues: Vec<f64>,
        spectrum: SpectralVerdict,
    },
    Inequality {
        /// `max_i` of the per-coordinate terms.
        lhs: f64,
        rhs: f64,
        /// Plain sum of the per-coordinate terms.
        summed_lhs: f64,
        per_coordinate: Vec<f64>,
        tol: f64,
    },
    Estimate {
        estimate: f64,
        argmin: Option<Vec<f64>>,
        weighted_mu: f64,
        evaluations: u64,
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    pub witness: Witness,
    pub lambda: Vec<f64>,
}

impl CertificateResult {
    pub fn fires(&self) -> bool {
        self.verdict.fires()
    }

    /// Recomputes the verdict from the stored witness alone.
    pub fn recheck(&self) -> Result<Verdict> {
        Ok(match &self.witness {
            Witness::Matrix { matrix, spectrum, .. } => {
                let v = spectral::classify(matrix, spectrum.tol)?;
                matrix_verdict(self.kind, &v)
            }
            Witness::Inequality { lhs, rhs, tol, .. } => {
                if *lhs <= rhs + tol {
                    Verdict::Certified
                } else {
                    Verdict::NotCertified
                }
            }
            Witness::Estimate {
                estimate,
                weighted_mu,
                tol,
                ..
            } => sc_verdict(*weighted_mu, *estimate, *tol),
        })
    }
}

fn matrix_verdict(kind: CertificateKind, v: &SpectralVerdict) -> Verdict {
    match kind {
        CertificateKind::Scqp | CertificateKind::Sc1qp => {
            if v.is_pd() {
                Verdict::CertifiedUnique
            } else if v.is_psd() {
                Verdict::Certified
            } else {
                Verdict::NotCertified
            }
        }
        CertificateKind::Sc2rc => {
            if v.is_nsd() {
                Verdict::Certified
            } else {
                Verdict::NotCertified
            }
        }
        _ => {
            if v.is_psd() {
                Verdict::Certified
            } else {
                Verdict::NotCertified
            }
        }
    }
}

fn sc_verdict(weighted_mu: f64, estimate: f64, tol: f64) -> Verdict {
    if weighted_mu < -estimate - tol {
        Verdict::NotCertified
    } else {
        Verdict::Inconclusive
    }
}

fn matrix_result(kind: CertificateKind, m: SymMatrix, tol: &Tolerances, lambda: &[f64]) -> Result<CertificateResult> {
    let t = tol.psd_tol(&m);
    let eigenvalues = spectral::eigs_sym(&m)?;
    let spectrum = SpectralVerdict::from_extremes(eigenvalues[0], eigenvalues[eigenvalues.len() - 1], t);
    let verdict = matrix_verdict(kind, &spectrum);
    let kind = match (kind, verdict) {
        (CertificateKind::Scqp, Verdict::CertifiedUnique) => CertificateKind::Sc1qp,
        (k, _) => k,
    };
    Ok(CertificateResult {
        kind,
        verdict,
        witness: Witness::Matrix {
            matrix: m,
            eigenvalues,
            spectrum,
        },
        lambda: lambda.to_vec(),
    })
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

/// `Σ_j λ_j [A_j − diag(2 χ_i (A_j x̄ + a_j)_i / (v_i − u_i))]` with `λ_0 = 1`.
pub fn scqp_matrix(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<SymMatrix> {
    let ProblemData::Quadratic(prog) = p.data() else {
        return Err(Error::WrongKind {
            expected: ProblemKind::Quadratic,
            actual: p.kind(),
        });
    };
    let chi = kkt::chi_with(p, x, lambda, tol)?;
    let widths = p.bounds().widths();
    let mut m = SymMatrix::zeros(p.dim());
    for (j, f) in prog.functions().enumerate() {
        let w = if j == 0 { 1.0 } else { lambda[j - 1] };
        let g = f.grad(x)?;
        let mut term = f.matrix.clone();
        let d: Vec<f64> = (0..p.dim())
            .map(|i| -2.0 * chi.values[i] * g[i] / widths[i])
            .collect();
        term.add_diag(&d);
        m.add_scaled(w, &term);
    }
    Ok(m)
}

/// SCQP / SC1QP: certified when the matrix is PSD, uniquely when PD.
pub fn certify_p1(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<CertificateResult> {
    require_kind(p, ProblemKind::Quadratic)?;
    kkt::require_kkt(p, x, lambda, tol)?;
    matrix_result(CertificateKind::Scqp, scqp_matrix(p, x, lambda, tol)?, tol, lambda)
}

fn rho_terms(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<(Vec<f64>, Vec<f64>)> {
    require_kind(p, ProblemKind::RhoConvex)?;
    kkt::require_kkt(p, x, lambda, tol)?;
    let chi = kkt::chi_with(p, x, lambda, tol)?;
    let g = kkt::lagrangian_gradient(p, x, lambda)?;
    Ok((chi.values, g))
}

/// `Σ_j λ_j μ_j` with `λ_0 = 1` and `μ_j` the smallest eigenvalue of `−A_j/2`.
pub fn weighted_mu(p: &Problem, lambda: &[f64]) -> Result<f64> {
    let ProblemData::RhoConvex(prog) = p.data() else {
        return Err(Error::WrongKind {
            expected: ProblemKind::RhoConvex,
            actual: p.kind(),
        });
    };
    let mut s = 0.0;
    for (j, f) in prog.functions().enumerate() {
        let w = if j == 0 { 1.0 } else { lambda[j - 1] };
        if w != 0.0 {
            s += w * spectral::mu_first_eigenvalue(&f.a)?;
        }
    }
    Ok(s)
}

/// SC1RC: `max_i χ_i Σ_j λ_j (∇f_j − A_j x̄)_i / (v_i − u_i) ≤ Σ_j λ_j μ_j`.
pub fn certify_p2_eig(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<CertificateResult> {
    let (chi, g) = rho_terms(p, x, lambda, tol)?;
    let widths = p.bounds().widths();
    let per: Vec<f64> = (0..p.dim()).map(|i| chi[i] * g[i] / widths[i]).collect();
    let lhs = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rhs = weighted_mu(p, lambda)?;
    let t = tol.psd_rel * (1.0 + rhs.abs() + per.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let verdict = if lhs <= rhs + t {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    Ok(CertificateResult {
        kind: CertificateKind::Sc1rc,
        verdict,
        witness: Witness::Inequality {
            lhs,
            rhs,
            summed_lhs: per.iter().sum(),
            per_coordinate: per,
            tol: t,
        },
        lambda: lambda.to_vec(),
    })
}

/// `Σ_j λ_j [A_j + diag(2 χ_i (∇f_j − A_j x̄)_i / (v_i − u_i))]` with `λ_0 = 1`.
pub fn sc2rc_matrix(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<SymMatrix> {
    let ProblemData::RhoConvex(prog) = p.data() else {
        return Err(Error::WrongKind {
            expected: ProblemKind::RhoConvex,
            actual: p.kind(),
        });
    };
    let chi = kkt::chi_with(p, x, lambda, tol)?;
    let widths = p.bounds().widths();
    let mut m = SymMatrix::zeros(p.dim());
    for (j, f) in prog.functions().enumerate() {
        let w = if j == 0 { 1.0 } else { lambda[j - 1] };
        let t = f.grad(x)?;
        let mut term = f.a.clone();
        let d: Vec<f64> = (0..p.dim()).map(|i| 2.0 * chi.values[i] * t[i] / widths[i]).collect();
        term.add_diag(&d);
        m.add_scaled(w, &term);
    }
    Ok(m)
}

/// SC2RC: certified when the matrix is NSD.
pub fn certify_p2_matrix(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<CertificateResult> {
    rho_terms(p, x, lambda, tol)?;
    matrix_result(CertificateKind::Sc2rc, sc2rc_matrix(p, x, lambda, tol)?, tol, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScEstimate {
    pub estimate: f64,
    pub argmin: Option<Vec<f64>>,
    pub evaluations: u64,
}

/// Sampled minimum of `∇L(x̄,λ)ᵀ(x − x̄) / ‖x − x̄‖²` over feasible `x ≠ x̄`.
/// The value is an upper bound on the true infimum.
pub fn estimate_sc_infimum(
    p: &Problem,
    x: &[f64],
    lambda: &[f64],
    budget: u64,
    tol: &Tolerances,
) -> Result<ScEstimate> {
    if !p.feasibility_with(x, tol)?.feasible {
        return Err(Error::Contract(format!("candidate {x:?} is not feasible")));
    }
    let g = kkt::lagrangian_gradient(p, x, lambda)?;
    if g.iter().all(|v| *v == 0.0) {
        return Ok(ScEstimate {
            estimate: 0.0,
            argmin: None,
            evaluations: 0,
        });
    }
    let min_dist = 1e-12 * (1.0 + crate::linalg::norm(x));
    let quotient = |y: &[f64]| -> Option<f64> {
        let d = sub(y, x);
        let nn = dot(&d, &d);
        if nn.sqrt() <= min_dist || !p.is_feasible(y, tol) {
            return None;
        }
        Some(dot(&g, &d) / nn)
    };

    let bounds = p.bounds();
    let ppa = points_for_budget(bounds, (budget / 2).max(1), 201);
    let lattice = Lattice::new(bounds, ppa);
    let n = p.dim();
    let total = lattice.len();
    let best = (0..total as usize)
        .into_par_iter()
        .with_min_len(1024)
        .filter_map(|idx| {
            let mut y = vec![0.0; n];
            lattice.point(idx as u64, &mut y);
            quotient(&y).map(|q| (q, y))
        })
        .min_by(cmp_point);
    let mut evaluations = total;

    let Some((mut best_q, mut best_x)) = best else {
        return Ok(ScEstimate {
            estimate: f64::INFINITY,
            argmin: None,
            evaluations,
        });
    };

    let cont = bounds.continuous();
    let mut step: Vec<f64> = bounds.widths().iter().map(|w| w / (ppa.max(2) - 1) as f64).collect();
    let mut remaining = budget.saturating_sub(evaluations);
    while remaining > 0 && step.iter().any(|s| *s > 1e-9) && !cont.is_empty() {
        let mut improved = false;
        for &i in &cont {
            for dir in [-1.0, 1.0] {
                if remaining == 0 {
                    break;
                }
                let mut y = best_x.clone();
                let d = &bounds.domains[i];
                y[i] = (y[i] + dir * step[i]).clamp(d.lower, d.upper);
                remaining -= 1;
                evaluations += 1;
                if let Some(q) = quotient(&y) {
                    if q < best_q {
                        best_q = q;
                        best_x = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    Ok(ScEstimate {
        estimate: best_q,
        argmin: Some(best_x),
        evaluations,
    })
}

pub(crate) fn cmp_point(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// SC, refutation only: `NotCertified` when `Σλ_jμ_j < −estimate`, else `Inconclusive`.
pub fn certify_p2_sc(
    p: &Problem,
    x: &[f64],
    lambda: &[f64],
    budget: u64,
    tol: &Tolerances,
) -> Result<CertificateResult> {
    require_kind(p, ProblemKind::RhoConvex)?;
    let est = estimate_sc_infimum(p, x, lambda, budget, tol)?;
    let wm = weighted_mu(p, lambda)?;
    let t = tol.psd_rel * (1.0 + wm.abs() + est.estimate.abs().min(1e300));
    Ok(CertificateResult {
        kind: CertificateKind::Sc,
        verdict: sc_verdict(wm, est.estimate, t),
        witness: Witness::Estimate {
            estimate: est.estimate,
            argmin: est.argmin,
            weighted_mu: wm,
            evaluations: est.evaluations,
            tol: t,
        },
        lambda: lambda.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationAudit {
    pub sc: CertificateResult,
    pub sc1rc: CertificateResult,
    pub sc2rc: CertificateResult,
    pub consistent: bool,
}

/// Evaluates SC, SC1RC and SC2RC. SC1RC implies both SC and SC2RC, so a
/// certified SC1RC next to a refuted SC or SC2RC is flagged.
pub fn implication_audit(
    p: &Problem,
    x: &[f64],
    lambda: &[f64],
    budget: u64,
    tol: &Tolerances,
) -> Result<ImplicationAudit> {
    let sc1rc = certify_p2_eig(p, x, lambda, tol)?;
    let sc2rc = certify_p2_matrix(p, x, lambda, tol)?;
    let sc = certify_p2_sc(p, x, lambda, budget, tol)?;
    let consistent = !(sc1rc.fires() && (!sc2rc.fires() || sc.verdict == Verdict::NotCertified));
    Ok(ImplicationAudit {
        sc,
        sc1rc,
        sc2rc,
        consistent,
    })
}
