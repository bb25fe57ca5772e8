//! End-to-end certification of one candidate point.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::certify::{self, CertificateKind, CertificateResult, Verdict};
use crate::error::{Error, Result};
use crate::fractional;
use crate::kkt::{self, LicqReport, NecessaryVerdict};
use crate::model::{FeasibilityReport, Problem, ProblemKind};
use crate::oracle::{self, GridSpec};
use crate::region::{self, MultiplierRegion, SWEEP_POINTS};
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub tol: Tolerances,
    pub oracle: bool,
    /// Oracle grid; the per-dimension default when `None`.
    pub grid: Option<GridSpec>,
    /// Fixed multipliers; the region is solved and swept when `None`.
    pub lambda: Option<Vec<f64>>,
    pub sweep_points: usize,
    /// Evaluation budget of each SC estimate.
    pub sc_budget: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol: Tolerances::default(),
            oracle: true,
            grid: None,
            lambda: None,
            sweep_points: SWEEP_POINTS,
            sc_budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    CertifiedUniqueGlobal,
    CertifiedGlobal,
    LocalOnly,
    #[serde(rename = "NotKKT")]
    NotKkt,
    Infeasible,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::CertifiedUniqueGlobal => "CertifiedUniqueGlobal",
            Classification::CertifiedGlobal => "CertifiedGlobal",
            Classification::LocalOnly => "LocalOnly",
            Classification::NotKkt => "NotKKT",
            Classification::Infeasible => "Infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub name: Option<String>,
    pub kind: ProblemKind,
    pub variables: usize,
    pub continuous: usize,
    pub discrete: usize,
    pub constraints: usize,
}

impl From<&Problem> for InstanceSummary {
    fn from(p: &Problem) -> Self {
        InstanceSummary {
            name: p.name.clone(),
            kind: p.kind(),
            variables: p.dim(),
            continuous: p.bounds().continuous().len(),
            discrete: p.bounds().discrete().len(),
            constraints: p.num_constraints(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: Vec<f64>,
    pub verdicts: Vec<(CertificateKind, Verdict)>,
    /// Set when this multiplier was rejected by the certificate preconditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl SweepEntry {
    pub fn fires(&self) -> bool {
        self.verdicts.iter().any(|(_, v)| v.fires())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub candidate_value: f64,
    pub feasible_count: u64,
    pub grid: GridSpec,
    /// The oracle found nothing better than the candidate beyond `1e-6·(1 + |f(x̄)|)`.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub instance: InstanceSummary,
    pub candidate: Vec<f64>,
    pub objective: Option<f64>,
    pub feasibility: FeasibilityReport,
    pub region: Option<MultiplierRegion>,
    /// Multiplier used for the necessary check and the headline certificates.
    pub lambda: Option<Vec<f64>>,
    pub necessary: Option<NecessaryVerdict>,
    pub licq: Option<LicqReport>,
    /// Strongest result per certificate family across the sweep.
    pub certificates: Vec<CertificateResult>,
    pub sweep: Vec<SweepEntry>,
    /// Per multiplier component, the runs of swept values at which some
    /// certificate fires.
    pub certified_region: Vec<Vec<(f64, f64)>>,
    /// False when SC1RC fires at a multiplier where SC or SC2RC is refuted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implications_consistent: Option<bool>,
    pub oracle: Option<OracleCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_error: Option<String>,
    pub classification: Classification,
}

impl CertificationReport {
    /// The certificate fired but the oracle found a better feasible point.
    pub fn conflict(&self) -> bool {
        self.certificates.iter().any(|c| c.fires()) && self.oracle.as_ref().is_some_and(|o| !o.agrees)
    }

    /// 0 for a definitive classification, 2 when no certificate fired at a
    /// KKT point, 1 on an oracle conflict.
    pub fn exit_code(&self) -> i32 {
        if self.conflict() {
            1
        } else if self.classification == Classification::LocalOnly {
            2
        } else {
            0
        }
    }

    /// Recomputes the classification from the stored component results.
    pub fn replay(&self) -> Classification {
        classify(
            self.feasibility.feasible,
            self.necessary.as_ref().is_some_and(|n| n.holds),
            &self.sweep,
            self.oracle.as_ref().map(|o| o.agrees),
        )
    }

    pub fn render_text(&self) -> String {
        render(self)
    }
}

/// Final classification from the component verdicts.
pub fn classify(feasible: bool, kkt: bool, sweep: &[SweepEntry], oracle_agrees: Option<bool>) -> Classification {
    if !feasible {
        return Classification::Infeasible;
    }
    if !kkt {
        return Classification::NotKkt;
    }
    let best = sweep
        .iter()
        .flat_map(|e| e.verdicts.iter().map(|(_, v)| *v))
        .max_by_key(|v| v.strength());
    match best {
        Some(v) if v.fires() && oracle_agrees != Some(false) => {
            if v == Verdict::CertifiedUnique {
                Classification::CertifiedUniqueGlobal
            } else {
                Classification::CertifiedGlobal
            }
        }
        _ => Classification::LocalOnly,
    }
}

fn certificates_at(p: &Problem, x: &[f64], lambda: &[f64], opts: &CertifyOptions) -> Result<Vec<CertificateResult>> {
    let tol = &opts.tol;
    Ok(match p.kind() {
        ProblemKind::Quadratic => vec![certify::certify_p1(p, x, lambda, tol)?],
        ProblemKind::RhoConvex => {
            let a = certify::implication_audit(p, x, lambda, opts.sc_budget, tol)?;
            vec![a.sc1rc, a.sc2rc, a.sc]
        }
        ProblemKind::Fractional => vec![fractional::certify_p3(p, x, lambda, tol)?],
    })
}

fn implications_hold(results: &[CertificateResult]) -> bool {
    let find = |k: CertificateKind| results.iter().find(|r| r.kind == k);
    match (find(CertificateKind::Sc1rc), find(CertificateKind::Sc2rc), find(CertificateKind::Sc)) {
        (Some(one), Some(two), Some(sc)) => !(one.fires() && (!two.fires() || sc.verdict == Verdict::NotCertified)),
        _ => true,
    }
}

fn runs(sweep: &[SweepEntry], m: usize) -> Vec<Vec<(f64, f64)>> {
    let ok: Vec<&SweepEntry> = sweep.iter().filter(|e| e.skipped.is_none()).collect();
    (0..m)
        .map(|j| {
            let mut values: Vec<(f64, bool)> = Vec::new();
            for e in &ok {
                let v = e.lambda[j];
                match values.iter_mut().find(|(w, _)| *w == v) {
                    Some(slot) => slot.1 |= e.fires(),
                    None => values.push((v, e.fires())),
                }
            }
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut out: Vec<(f64, f64)> = Vec::new();
            let mut open: Option<(f64, f64)> = None;
            for (v, fires) in values {
                match (fires, open.as_mut()) {
                    (true, Some(run)) => run.1 = v,
                    (true, None) => open = Some((v, v)),
                    (false, _) => out.extend(open.take()),
                }
            }
            out.extend(open);
            out
        })
        .collect()
}

/// Snaps `x` to the box, solves (or takes) the multipliers, evaluates every
/// certificate of the problem's kind over the multiplier sweep and, when
/// enabled, compares against the grid oracle.
pub fn certify_candidate(p: &Problem, x: &[f64], opts: &CertifyOptions) -> Result<CertificationReport> {
    if x.len() != p.dim() {
        return Err(Error::dim("candidate", p.dim(), x.len()));
    }
    let tol = &opts.tol;
    let x = p.bounds().snap(x, tol.snap);
    let feasibility = p.feasibility_with(&x, tol)?;
    let mut report = CertificationReport {
        instance: p.into(),
        candidate: x.clone(),
        objective: p.objective(&x).ok(),
        feasibility,
        region: None,
        lambda: None,
        necessary: None,
        licq: None,
        certificates: Vec::new(),
        sweep: Vec::new(),
        certified_region: Vec::new(),
        implications_consistent: None,
        oracle: None,
        oracle_error: None,
        classification: Classification::Infeasible,
    };
    if !report.feasibility.feasible {
        return Ok(report);
    }
    report.licq = Some(kkt::licq_check(p, &x, tol)?);

    let lambdas: Vec<Vec<f64>> = match &opts.lambda {
        Some(l) => {
            if l.len() != p.num_constraints() {
                return Err(Error::dim("multipliers", p.num_constraints(), l.len()));
            }
            let nec = kkt::necessary(p, &x, l, tol)?;
            let slack = kkt::slackness_residual(p, &x, l)?;
            let ok = nec.holds && slack <= tol.slackness;
            report.lambda = Some(l.clone());
            report.necessary = Some(nec);
            if ok {
                vec![l.clone()]
            } else {
                if let Some(n) = report.necessary.as_mut() {
                    n.holds = false;
                }
                Vec::new()
            }
        }
        None => {
            let region = region::solve_multiplier_region(p, &x, tol)?;
            let lambdas = region.sweep(opts.sweep_points);
            if let Some(s) = region.stationary() {
                report.lambda = Some(s.to_vec());
                report.necessary = Some(kkt::necessary(p, &x, s, tol)?);
            }
            report.region = Some(region);
            lambdas
        }
    };
    if lambdas.is_empty() || !report.necessary.as_ref().is_some_and(|n| n.holds) {
        report.classification = Classification::NotKkt;
        return Ok(report);
    }

    let headline = report.lambda.clone().unwrap_or_else(|| lambdas[0].clone());
    let mut order = vec![headline.clone()];
    order.extend(lambdas.into_iter().filter(|l| *l != headline));

    let mut best: Vec<CertificateResult> = Vec::new();
    let mut consistent = true;
    for lambda in order {
        match certificates_at(p, &x, &lambda, opts) {
            Ok(results) => {
                consistent &= implications_hold(&results);
                report.sweep.push(SweepEntry {
                    lambda: lambda.clone(),
                    verdicts: results.iter().map(|r| (r.kind, r.verdict)).collect(),
                    skipped: None,
                });
                for r in results {
                    match best.iter_mut().find(|b| b.kind.family() == r.kind.family()) {
                        Some(b) if r.verdict.strength() > b.verdict.strength() => *b = r,
                        Some(_) => {}
                        None => best.push(r),
                    }
                }
            }
            Err(Error::Contract(msg)) => report.sweep.push(SweepEntry {
                lambda,
                verdicts: Vec::new(),
                skipped: Some(msg),
            }),
            Err(e) => return Err(e),
        }
    }
    report.certificates = best;
    if p.kind() == ProblemKind::RhoConvex {
        report.implications_consistent = Some(consistent);
    }
    report.certified_region = runs(&report.sweep, p.num_constraints());

    if opts.oracle {
        let grid = opts.grid.unwrap_or_else(|| GridSpec::default_for(p));
        match oracle::global_search_with(p, grid.points_per_axis, grid.refinement_rounds, tol) {
            Ok(o) => {
                let fx = p.objective(&x)?;
                report.oracle = Some(OracleCheck {
                    agrees: o.best_value >= fx - 1e-6 * (1.0 + fx.abs()),
                    best_point: o.best_point,
                    best_value: o.best_value,
                    candidate_value: fx,
                    feasible_count: o.feasible_count,
                    grid,
                });
            }
            Err(e) => report.oracle_error = Some(e.to_string()),
        }
    }
    report.classification = report.replay();
    Ok(report)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{}", round(*x))).collect();
    format!("({})", parts.join(", "))
}

fn round(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x + 0.0;
    }
    let r = (x * 1e10).round() / 1e10;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn render(r: &CertificationReport) -> String {
    let mut s = String::new();
    let name = r.instance.name.as_deref().unwrap_or("problem");
    let _ = writeln!(
        s,
        "{name}: {:?}, {} variables ({} continuous, {} discrete), {} constraints",
        r.instance.kind, r.instance.variables, r.instance.continuous, r.instance.discrete, r.instance.constraints
    );
    let _ = write!(s, "candidate {}", fmt_vec(&r.candidate));
    if let Some(f) = r.objective {
        let _ = write!(s, ", objective {}", round(f));
    }
    let _ = writeln!(s);
    if !r.feasibility.feasible {
        let _ = writeln!(s, "candidate is infeasible: box {:?}, slacks {}", r.feasibility.box_status, fmt_vec(&r.feasibility.slacks));
    }
    match &r.region {
        Some(MultiplierRegion::Empty) => {
            let _ = writeln!(s, "multipliers: none (not a KKT point)");
        }
        Some(MultiplierRegion::Point { lambda }) => {
            let _ = writeln!(s, "multipliers: unique {}", fmt_vec(lambda));
        }
        Some(MultiplierRegion::Polytope(poly)) => {
            let iv: Vec<String> = poly
                .intervals
                .iter()
                .enumerate()
                .map(|(j, (lo, hi))| format!("λ{} ∈ [{}, {}]", j + 1, round(*lo), round(*hi)))
                .collect();
            let _ = writeln!(s, "multipliers: {} ({} vertices)", iv.join(", "), poly.vertices.len());
        }
        None => {}
    }
    if let Some(l) = &r.lambda {
        let _ = writeln!(s, "stationary multiplier {}", fmt_vec(l));
    }
    if let Some(n) = &r.necessary {
        let _ = writeln!(
            s,
            "local necessary condition: {} (worst violation {:e})",
            if n.holds { "holds" } else { "fails" },
            n.worst_violation + 0.0
        );
    }
    if let Some(l) = &r.licq {
        let _ = writeln!(s, "LICQ: {} (rank {} of {})", l.satisfied, l.rank, l.columns);
    }
    for c in &r.certificates {
        let _ = write!(s, "{:<6} {:?} at λ = {}", c.kind.label(), c.verdict, fmt_vec(&c.lambda));
        match &c.witness {
            certify::Witness::Matrix { eigenvalues, .. } => {
                let _ = write!(s, ", eigenvalues {}", fmt_vec(eigenvalues));
            }
            certify::Witness::Inequality { lhs, rhs, .. } => {
                let _ = write!(s, ", {} ≤ {}", round(*lhs), round(*rhs));
            }
            certify::Witness::Estimate { estimate, weighted_mu, .. } => {
                let _ = write!(s, ", estimate {} vs weighted μ {}", round(*estimate), round(*weighted_mu));
            }
        }
        let _ = writeln!(s);
    }
    if r.sweep.len() > 1 {
        let fired = r.sweep.iter().filter(|e| e.fires()).count();
        let _ = writeln!(s, "sweep: {fired} of {} multipliers certified", r.sweep.len());
        for (j, runs) in r.certified_region.iter().enumerate() {
            let iv: Vec<String> = runs.iter().map(|(a, b)| format!("[{}, {}]", round(*a), round(*b))).collect();
            let _ = writeln!(s, "  certified λ{}: {}", j + 1, if iv.is_empty() { "none".into() } else { iv.join(" ∪ ") });
        }
    }
    if let Some(c) = r.implications_consistent {
        if !c {
            let _ = writeln!(s, "warning: SC1RC fired where SC2RC or SC did not");
        }
    }
    if let Some(o) = &r.oracle {
        let _ = writeln!(
            s,
            "oracle: best {} at {} on {} points/axis, {}",
            round(o.best_value),
            fmt_vec(&o.best_point),
            o.grid.points_per_axis,
            if o.agrees { "consistent" } else { "BETTER POINT FOUND" }
        );
    }
    if let Some(e) = &r.oracle_error {
        let _ = writeln!(s, "oracle skipped: {e}");
    }
    let _ = writeln!(s, "classification: {}", r.classification.label());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    fn quick() -> CertifyOptions {
        CertifyOptions {
            grid: Some(GridSpec {
                points_per_axis: 101,
                refinement_rounds: 2,
            }),
            ..CertifyOptions::default()
        }
    }

    #[test]
    fn e1_is_unique_global() {
        let r = certify_candidate(&examples::e1(), &[2.0, 2.0], &quick()).unwrap();
        assert_eq!(r.classification, Classification::CertifiedUniqueGlobal);
        assert!((r.lambda.as_ref().unwrap()[0] - 2.4).abs() <= 1e-8);
        assert_eq!(r.certificates[0].kind, CertificateKind::Sc1qp);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.replay(), r.classification);
    }

    #[test]
    fn e2_other_points_are_local_only() {
        let p = examples::e2();
        let r = certify_candidate(&p, &[0.0, 1.0], &quick()).unwrap();
        assert_eq!(r.classification, Classification::LocalOnly);
        assert_eq!(r.exit_code(), 2);
        let r = certify_candidate(&p, &[-1.0, -1.0], &quick()).unwrap();
        assert_eq!(r.classification, Classification::CertifiedUniqueGlobal);
        assert_eq!(r.certified_region, vec![vec![(0.0, 2.0)]]);
    }

    #[test]
    fn infeasible_and_non_kkt() {
        let p = examples::e2();
        let r = certify_candidate(&p, &[0.5, 0.3], &quick()).unwrap();
        assert_eq!(r.classification, Classification::Infeasible);
        let r = certify_candidate(&p, &[0.5, 1.0], &quick()).unwrap();
        assert_eq!(r.classification, Classification::NotKkt);
        let fixed = CertifyOptions {
            lambda: Some(vec![2.5]),
            ..quick()
        };
        let r = certify_candidate(&p, &[-1.0, -1.0], &fixed).unwrap();
        assert_eq!(r.classification, Classification::NotKkt);
    }

    #[test]
    fn classification_rules() {
        let entry = |v| SweepEntry {
            lambda: vec![0.0],
            verdicts: vec![(CertificateKind::Scqp, v)],
            skipped: None,
        };
        assert_eq!(classify(false, true, &[], None), Classification::Infeasible);
        assert_eq!(classify(true, false, &[], None), Classification::NotKkt);
        assert_eq!(
            classify(true, true, &[entry(Verdict::Certified)], Some(true)),
            Classification::CertifiedGlobal
        );
        assert_eq!(
            classify(true, true, &[entry(Verdict::CertifiedUnique)], Some(false)),
            Classification::LocalOnly
        );
        assert_eq!(
            classify(true, true, &[entry(Verdict::Inconclusive)], None),
            Classification::LocalOnly
        );
    }

    #[test]
    fn report_json_round_trips() {
        let r = certify_candidate(&examples::e4(), &[-1.0, -1.0], &quick()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: CertificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.replay(), r.classification);
        assert!(r.render_text().contains("classification: CertifiedGlobal"));
    }
}
