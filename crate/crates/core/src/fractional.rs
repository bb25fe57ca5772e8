use serde::{Deserialize, Serialize};

use crate::certify::{CertificateKind, CertificateResult, Witness};
use crate::error::{Error, Result};
use crate::grid::{points_for_budget, Lattice};
use crate::kkt;
use crate::model::{
    FractionalFunction, MixedBox, Problem, ProblemData, ProblemKind, Program, QuadraticFunction, SymMatrix,
    DENOMINATOR_TOL,
};
use crate::spectral::{self, SpectralVerdict};
use crate::Tolerances;

/// Points per continuous axis used to check denominator signs.
pub const SIGN_GRID_POINTS: usize = 17;
const SIGN_GRID_BUDGET: u64 = 1 << 20;

/// `ξ_j = ±1` for every denominator, `j = 0..=m`, from the sign of `den_j`
/// on all discrete assignments times a uniform continuous grid.
pub fn xi_signs(prog: &Program<FractionalFunction>, bounds: &MixedBox) -> Result<Vec<f64>> {
    let ppa = points_for_budget(bounds, SIGN_GRID_BUDGET, SIGN_GRID_POINTS);
    let lattice = Lattice::new(bounds, ppa);
    let n = bounds.dim();
    let mut x = vec![0.0; n];
    let mut out = Vec::new();
    for (j, f) in prog.functions().enumerate() {
        let mut first: Option<f64> = None;
        for idx in 0..lattice.len() {
            lattice.point(idx, &mut x);
            let d = f.den.eval(&x)?;
            let s = if d > DENOMINATOR_TOL {
                1.0
            } else if d < -DENOMINATOR_TOL {
                -1.0
            } else {
                0.0
            };
            let bad = s == 0.0 || first.is_some_and(|f| f != s) || (j == 0 && s < 0.0);
            if bad {
                return Err(Error::SignIndefiniteDenominator {
                    index: j,
                    witness: x.clone(),
                    value: d,
                });
            }
            first.get_or_insert(s);
        }
        out.push(first.unwrap_or(1.0));
    }
    Ok(out)
}

pub fn problem_xi(p: &Problem) -> Result<Vec<f64>> {
    match p.data() {
        ProblemData::Fractional(_) => Ok(p.xi().to_vec()),
        _ => Err(Error::WrongKind {
            expected: ProblemKind::Fractional,
            actual: p.kind(),
        }),
    }
}

fn program(p: &Problem) -> Result<&Program<FractionalFunction>> {
    match p.data() {
        ProblemData::Fractional(prog) => Ok(prog),
        _ => Err(Error::WrongKind {
            expected: ProblemKind::Fractional,
            actual: p.kind(),
        }),
    }
}

/// The quadratic surrogate anchored at a candidate: function `j` becomes
/// `ξ_j (num_j − e_j den_j)` with `e_0` the objective ratio at the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateQp {
    pub problem: Problem,
    pub anchor: Vec<f64>,
    pub e0: f64,
    /// Objective denominator at the anchor.
    pub c: f64,
    pub xi: Vec<f64>,
}

pub fn reformulate(p: &Problem, x: &[f64], tol: &Tolerances) -> Result<SurrogateQp> {
    let prog = program(p)?;
    if !p.feasibility_with(x, tol)?.feasible {
        return Err(Error::Contract(format!("candidate {x:?} is not feasible")));
    }
    let xi = p.xi().to_vec();
    let e0 = prog.objective.eval(x)?;
    let c = prog.objective.denominator(x)?;
    let shift = |f: &FractionalFunction, xi: f64, e: f64| f.num.combine(xi, &f.den, -xi * e);
    let objective = shift(&prog.objective, 1.0, e0);
    let constraints: Vec<QuadraticFunction> = prog
        .constraints
        .iter()
        .enumerate()
        .map(|(j, f)| shift(f, xi[j + 1], f.bound))
        .collect();
    let h0 = objective.eval(x)?;
    let scale = 1.0 + prog.objective.num.eval(x)?.abs() + (e0 * c).abs();
    if h0.abs() > 1e-10 * scale {
        return Err(Error::NumericalFailure(format!(
            "surrogate objective is {h0:e} at its anchor"
        )));
    }
    let mut problem = Problem::quadratic(p.bounds().clone(), Program::new(objective, constraints))?;
    problem.name = p.name.as_ref().map(|n| format!("{n} (surrogate)"));
    Ok(SurrogateQp {
        problem,
        anchor: x.to_vec(),
        e0,
        c,
        xi,
    })
}

impl SurrogateQp {
    /// Tolerances scaled by the anchor denominator, which the surrogate's
    /// gradients and slacks carry relative to the fractional ones.
    pub fn tolerances(&self, tol: &Tolerances) -> Tolerances {
        let s = self.c.abs().max(1.0);
        Tolerances {
            kkt: tol.kkt * s,
            slackness: tol.slackness * s,
            ..*tol
        }
    }
}

/// `μ_j = c λ_j / |den_j(x̄)|`, checked to be a valid surrogate multiplier.
pub fn transform_multipliers(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    let prog = program(p)?;
    kkt::require_kkt(p, x, lambda, tol)?;
    let c = prog.objective.denominator(x)?;
    let mut mu = Vec::with_capacity(lambda.len());
    for (f, l) in prog.constraints.iter().zip(lambda) {
        mu.push(c * l / f.denominator(x)?.abs());
    }
    let s = reformulate(p, x, tol)?;
    kkt::require_kkt(&s.problem, x, &mu, &s.tolerances(tol)).map_err(|e| {
        Error::Contract(format!("transformed multipliers are not valid for the surrogate: {e}"))
    })?;
    Ok(mu)
}

/// `Σ_j (λ_j / den_j(x̄)) {[A_j − diag(N_j)] − e_j [B_j − diag(D_j)]}` with
/// `λ_0 = 1`, `e_0 = s(x̄)`, `N_ji = 2χ̃_i(A_j x̄ + a_j)_i/(v_i − u_i)` and `D_j`
/// likewise for the denominator.
pub fn gsc_matrix(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<SymMatrix> {
    let prog = program(p)?;
    let chi = kkt::chi_with(p, x, lambda, tol)?;
    let widths = p.bounds().widths();
    let e0 = prog.objective.eval(x)?;
    let mut m = SymMatrix::zeros(p.dim());
    for (j, f) in prog.functions().enumerate() {
        let l = if j == 0 { 1.0 } else { lambda[j - 1] };
        if l == 0.0 {
            continue;
        }
        let e = if j == 0 { e0 } else { f.bound };
        let weight = l / f.denominator(x)?;
        let gn = f.num.grad(x)?;
        let gd = f.den.grad(x)?;
        let mut term = f.num.matrix.clone();
        term.add_scaled(-e, &f.den.matrix);
        let d: Vec<f64> = (0..p.dim())
            .map(|i| -2.0 * chi.values[i] * (gn[i] - e * gd[i]) / widths[i])
            .collect();
        term.add_diag(&d);
        m.add_scaled(weight, &term);
    }
    Ok(m)
}

/// GSC: certified when the matrix is PSD.
pub fn certify_p3(p: &Problem, x: &[f64], lambda: &[f64], tol: &Tolerances) -> Result<CertificateResult> {
    program(p)?;
    kkt::require_kkt(p, x, lambda, tol)?;
    let m = gsc_matrix(p, x, lambda, tol)?;
    let t = tol.psd_tol(&m);
    let eigenvalues = spectral::eigs_sym(&m)?;
    let spectrum = SpectralVerdict::from_extremes(eigenvalues[0], eigenvalues[eigenvalues.len() - 1], t);
    let verdict = if spectrum.is_psd() {
        crate::certify::Verdict::Certified
    } else {
        crate::certify::Verdict::NotCertified
    };
    Ok(CertificateResult {
        kind: CertificateKind::Gsc,
        verdict,
        witness: Witness::Matrix {
            matrix: m,
            eigenvalues,
            spectrum,
        },
        lambda: lambda.to_vec(),
    })
}

/// Serializable view of a surrogate for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub anchor: Vec<f64>,
    pub e0: f64,
    pub c: f64,
    pub xi: Vec<f64>,
    pub matrices: Vec<SymMatrix>,
    pub linear: Vec<Vec<f64>>,
    pub constants: Vec<f64>,
}

impl From<&SurrogateQp> for SurrogateSummary {
    fn from(s: &SurrogateQp) -> Self {
        let ProblemData::Quadratic(prog) = s.problem.data() else {
            unreachable!("surrogates are quadratic")
        };
        SurrogateSummary {
            anchor: s.anchor.clone(),
            e0: s.e0,
            c: s.c,
            xi: s.xi.clone(),
            matrices: prog.functions().map(|f| f.matrix.clone()).collect(),
            linear: prog.functions().map(|f| f.linear.clone()).collect(),
            constants: prog.functions().map(|f| f.constant).collect(),
        }
    }
}
