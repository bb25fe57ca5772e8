//! JSON problem files.
//!
//! ```json
//! {
//!   "kind": "quadratic",
//!   "variables": [{"lower": -1, "upper": 1, "domain": "continuous"}],
//!   "objective": {"A": [[2]], "a": [0], "c": 0},
//!   "constraints": [],
//!   "candidates": [[0.5]]
//! }
//! ```
//!
//! Matrices are lists of full rows and must be symmetric; a list of upper
//! triangle rows (lengths n, n-1, ..., 1) is mirrored instead.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ConvexSmoothFunction, DomainKind, FractionalFunction, MixedBox, PowerTerm, Problem, ProblemData, ProblemKind,
    Program, QuadraticFunction, RhoConvexFunction, SymMatrix, VariableDomain,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub lower: f64,
    pub upper: f64,
    pub domain: DomainKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    #[serde(rename = "A")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "a")]
    pub linear: Vec<f64>,
    #[serde(rename = "c", default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenSpec {
    #[serde(rename = "B")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub linear: Vec<f64>,
    #[serde(rename = "d", default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub w: Vec<f64>,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub coeff: f64,
    pub affine: AffineSpec,
    pub exponent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSpec {
    pub base: QuadSpec,
    #[serde(default)]
    pub power_terms: Vec<PowerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSpec {
    pub f: ConvexSpec,
    #[serde(rename = "A")]
    pub concave: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracSpec {
    pub num: QuadSpec,
    pub den: DenSpec,
    #[serde(default)]
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec<F> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: ProblemKind,
    pub variables: Vec<VariableSpec>,
    pub objective: F,
    #[serde(default = "Vec::new")]
    pub constraints: Vec<F>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct KindProbe {
    kind: ProblemKind,
}

/// A parsed problem together with any candidate points listed in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub description: Option<String>,
    pub candidates: Vec<Vec<f64>>,
}

fn typed<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<SymMatrix> {
    let n = rows.len();
    let triangular = n > 1 && rows.iter().enumerate().all(|(i, r)| r.len() == n - i);
    let m = if triangular {
        Ok(SymMatrix::from_upper(n, |i, j| rows[i][j - i]))
    } else {
        SymMatrix::from_rows(rows)
    };
    m.map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn quad(s: &QuadSpec, what: &str) -> Result<QuadraticFunction> {
    QuadraticFunction::new(matrix(&s.matrix, what)?, s.linear.clone(), s.constant)
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn den(s: &DenSpec, what: &str) -> Result<QuadraticFunction> {
    QuadraticFunction::new(matrix(&s.matrix, what)?, s.linear.clone(), s.constant)
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn convex(s: &ConvexSpec, what: &str) -> Result<ConvexSmoothFunction> {
    let terms = s
        .power_terms
        .iter()
        .map(|t| PowerTerm {
            coeff: t.coeff,
            w: t.affine.w.clone(),
            b: t.affine.b,
            exponent: t.exponent,
        })
        .collect();
    ConvexSmoothFunction::new(quad(&s.base, what)?, terms).map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn rho(s: &RhoSpec, what: &str) -> Result<RhoConvexFunction> {
    RhoConvexFunction::new(convex(&s.f, what)?, matrix(&s.concave, what)?)
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn frac(s: &FracSpec, what: &str) -> Result<FractionalFunction> {
    FractionalFunction::new(quad(&s.num, what)?, den(&s.den, what)?, s.bound)
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

fn label(j: usize) -> String {
    if j == 0 {
        "objective".into()
    } else {
        format!("constraint {j}")
    }
}

fn program<S, F>(spec: &FileSpec<S>, build: impl Fn(&S, &str) -> Result<F>) -> Result<Program<F>> {
    let objective = build(&spec.objective, &label(0))?;
    let constraints = spec
        .constraints
        .iter()
        .enumerate()
        .map(|(j, c)| build(c, &label(j + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Program::new(objective, constraints))
}

fn finish<S>(spec: &FileSpec<S>, data: ProblemData) -> Result<ProblemFile> {
    let domains = spec
        .variables
        .iter()
        .map(|v| VariableDomain {
            lower: v.lower,
            upper: v.upper,
            kind: v.domain,
        })
        .collect();
    let bounds = MixedBox::new(domains)?;
    let n = bounds.dim();
    let mut problem = Problem::new(bounds, data).map_err(|e| match e {
        Error::DimensionMismatch { .. } => Error::Validation(e.to_string()),
        other => other,
    })?;
    problem.name = spec.name.clone();
    for (k, c) in spec.candidates.iter().enumerate() {
        if c.len() != n {
            return Err(Error::Validation(format!(
                "candidate {} has {} coordinates, expected {n}",
                k + 1,
                c.len()
            )));
        }
    }
    Ok(ProblemFile {
        problem,
        description: spec.description.clone(),
        candidates: spec.candidates.clone(),
    })
}

pub fn parse_problem_str(text: &str) -> Result<ProblemFile> {
    let kind = typed::<KindProbe>(text)?.kind;
    match kind {
        ProblemKind::Quadratic => {
            let spec: FileSpec<QuadSpec> = typed(text)?;
            let data = ProblemData::Quadratic(program(&spec, quad)?);
            finish(&spec, data)
        }
        ProblemKind::RhoConvex => {
            let spec: FileSpec<RhoSpec> = typed(text)?;
            let data = ProblemData::RhoConvex(program(&spec, rho)?);
            finish(&spec, data)
        }
        ProblemKind::Fractional => {
            let spec: FileSpec<FracSpec> = typed(text)?;
            let data = ProblemData::Fractional(program(&spec, frac)?);
            finish(&spec, data)
        }
    }
}

pub fn parse_problem_file(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem_str(&text)
}

fn quad_spec(q: &QuadraticFunction) -> QuadSpec {
    QuadSpec {
        matrix: q.matrix.rows(),
        linear: q.linear.clone(),
        constant: q.constant,
    }
}

fn convex_spec(f: &ConvexSmoothFunction) -> ConvexSpec {
    ConvexSpec {
        base: quad_spec(&f.base),
        power_terms: f
            .power_terms
            .iter()
            .map(|t| PowerSpec {
                coeff: t.coeff,
                affine: AffineSpec { w: t.w.clone(), b: t.b },
                exponent: t.exponent,
            })
            .collect(),
    }
}

fn frac_spec(f: &FractionalFunction) -> FracSpec {
    FracSpec {
        num: quad_spec(&f.num),
        den: DenSpec {
            matrix: f.den.matrix.rows(),
            linear: f.den.linear.clone(),
            constant: f.den.constant,
        },
        bound: f.bound,
    }
}

fn file_spec<S>(p: &Problem, objective: S, constraints: Vec<S>, candidates: &[Vec<f64>]) -> FileSpec<S> {
    FileSpec {
        name: p.name.clone(),
        description: None,
        kind: p.kind(),
        variables: p
            .bounds()
            .domains
            .iter()
            .map(|d| VariableSpec {
                lower: d.lower,
                upper: d.upper,
                domain: d.kind,
            })
            .collect(),
        objective,
        constraints,
        candidates: candidates.to_vec(),
    }
}

/// Serializes `p` in the file format accepted by [`parse_problem_str`].
pub fn to_json(p: &Problem, candidates: &[Vec<f64>]) -> String {
    let out = match p.data() {
        ProblemData::Quadratic(prog) => serde_json::to_string_pretty(&file_spec(
            p,
            quad_spec(&prog.objective),
            prog.constraints.iter().map(quad_spec).collect(),
            candidates,
        )),
        ProblemData::RhoConvex(prog) => {
            let spec = |g: &RhoConvexFunction| RhoSpec {
                f: convex_spec(&g.f),
                concave: g.a.rows(),
            };
            serde_json::to_string_pretty(&file_spec(
                p,
                spec(&prog.objective),
                prog.constraints.iter().map(spec).collect(),
                candidates,
            ))
        }
        ProblemData::Fractional(prog) => serde_json::to_string_pretty(&file_spec(
            p,
            frac_spec(&prog.objective),
            prog.constraints.iter().map(frac_spec).collect(),
            candidates,
        )),
    };
    out.expect("problem specs always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn bundled_e1_parses() {
        let f = parse_problem_str(examples::E1_SOURCE).unwrap();
        assert_eq!(f.problem.dim(), 2);
        assert_eq!(f.problem.num_constraints(), 1);
        let kinds: Vec<_> = f.problem.bounds().domains.iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![DomainKind::Continuous, DomainKind::Discrete]);
        assert_eq!(f.candidates, vec![vec![2.0, 2.0]]);
    }

    #[test]
    fn empty_constraint_list() {
        let text = r#"{"kind": "quadratic",
            "variables": [{"lower": 0, "upper": 1, "domain": "continuous"}],
            "objective": {"A": [[1]], "a": [0], "c": 0},
            "constraints": []}"#;
        assert_eq!(parse_problem_str(text).unwrap().problem.num_constraints(), 0);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let text = r#"{"kind": "quadratic",
            "variables": [{"lower": 0, "upper": 1, "domain": "continuous"},
                          {"lower": 0, "upper": 1, "domain": "continuous"}],
            "objective": {"A": [[1, 2], [2.000001, 1]], "a": [0, 0]}}"#;
        assert!(matches!(parse_problem_str(text), Err(Error::Validation(_))));
    }

    #[test]
    fn upper_triangle_is_mirrored() {
        let text = r#"{"kind": "quadratic",
            "variables": [{"lower": 0, "upper": 1, "domain": "continuous"},
                          {"lower": 0, "upper": 1, "domain": "continuous"}],
            "objective": {"A": [[1, 2], [3]], "a": [0, 0]}}"#;
        let p = parse_problem_str(text).unwrap().problem;
        let ProblemData::Quadratic(prog) = p.data() else { panic!() };
        assert_eq!(prog.objective.matrix.get(1, 0), 2.0);
    }

    #[test]
    fn parse_errors_locate_the_field() {
        let text = "{\"kind\": \"quadratic\",\n \"variables\": [{\"lower\": 0, \"upper\": 1, \"domain\": \"integer\"}],\n \"objective\": {\"A\": [[1]], \"a\": [0]}}";
        match parse_problem_str(text) {
            Err(Error::Parse { path, line, .. }) => {
                assert_eq!(path, "variables[0].domain");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"kind": "quadratic", "variables": [], "objective": {"A": [], "a": [], "q": 1}}"#;
        assert!(matches!(parse_problem_str(unknown), Err(Error::Parse { .. })));
        assert!(matches!(parse_problem_str("{\"kind\": \"cubic\"}"), Err(Error::Parse { .. })));
    }

    #[test]
    fn dimension_mismatch_is_a_validation_error() {
        let text = r#"{"kind": "quadratic",
            "variables": [{"lower": 0, "upper": 1, "domain": "continuous"}],
            "objective": {"A": [[1, 0], [0, 1]], "a": [0, 0]}}"#;
        assert!(matches!(parse_problem_str(text), Err(Error::Validation(_))));
    }

    #[test]
    fn bundled_files_round_trip() {
        for (name, src) in examples::ALL {
            let f = parse_problem_str(src).unwrap();
            let again = parse_problem_str(&to_json(&f.problem, &f.candidates)).unwrap();
            assert_eq!(f.problem, again.problem, "{name}");
            assert_eq!(f.candidates, again.candidates);
        }
    }
}
