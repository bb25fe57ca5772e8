use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::spectral;
use crate::Tolerances;

/// Dense symmetric matrix stored in full row-major form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Builds a matrix from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Full rows; the lower triangle must mirror the upper one within 1e-12.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Validation("matrix must have at least one row".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Validation(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite matrix entry {v} in row {i}")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}"
                    )));
                }
            }
        }
        Ok(Self::from_upper(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.n).map(|r| dot(r, x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.data
            .chunks(self.n)
            .zip(x)
            .map(|(r, xi)| xi * dot(r, x))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        assert_eq!(self.n, other.n, "matrix dimensions differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_diag(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            self.data[i * self.n + i] += v;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

/// Anything with an exact value and gradient.
pub trait Smooth {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

fn check_len(what: &'static str, n: usize, x: &[f64]) -> Result<()> {
    if x.len() == n {
        Ok(())
    } else {
        Err(Error::dim(what, n, x.len()))
    }
}

/// `½ xᵀ A x + aᵀ x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFunction {
    pub matrix: SymMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticFunction {
    pub fn new(matrix: SymMatrix, linear: Vec<f64>, constant: f64) -> Result<Self> {
        if matrix.dim() != linear.len() {
            return Err(Error::dim("linear term", matrix.dim(), linear.len()));
        }
        if !constant.is_finite() || linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite coefficient".into()));
        }
        Ok(QuadraticFunction {
            matrix,
            linear,
            constant,
        })
    }

    pub fn zero(n: usize) -> Self {
        QuadraticFunction {
            matrix: SymMatrix::zeros(n),
            linear: vec![0.0; n],
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len("point", self.matrix.dim(), x)?;
        Ok(0.5 * self.matrix.quad_form(x) + dot(&self.linear, x) + self.constant)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("point", self.matrix.dim(), x)?;
        let mut g = self.matrix.mul_vec(x);
        crate::linalg::axpy(&mut g, 1.0, &self.linear);
        Ok(g)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &QuadraticFunction, beta: f64) -> Self {
        let mut m = self.matrix.scaled(alpha);
        m.add_scaled(beta, &other.matrix);
        QuadraticFunction {
            matrix: m,
            linear: self
                .linear
                .iter()
                .zip(&other.linear)
                .map(|(p, q)| alpha * p + beta * q)
                .collect(),
            constant: alpha * self.constant + beta * other.constant,
        }
    }
}

impl Smooth for QuadraticFunction {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad(x)
    }
}

/// `coeff * (wᵀx + b)^exponent` with a nonnegative coefficient and even exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coeff: f64,
    pub w: Vec<f64>,
    pub b: f64,
    pub exponent: u32,
}

impl PowerTerm {
    fn affine(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// PSD quadratic plus nonnegative even powers of affine forms.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSmoothFunction {
    pub base: QuadraticFunction,
    pub power_terms: Vec<PowerTerm>,
}

impl ConvexSmoothFunction {
    pub fn new(base: QuadraticFunction, power_terms: Vec<PowerTerm>) -> Result<Self> {
        let n = base.matrix.dim();
        let v = spectral::classify(&base.matrix, spectral::default_psd_tol(&base.matrix))?;
        if !v.is_psd() {
            return Err(Error::Validation(format!(
                "convex part has an indefinite quadratic matrix (min eigenvalue {:e})",
                v.min_eig
            )));
        }
        for (k, t) in power_terms.iter().enumerate() {
            if t.w.len() != n {
                return Err(Error::dim("power term affine weights", n, t.w.len()));
            }
            if !(t.coeff >= 0.0) || !t.coeff.is_finite() {
                return Err(Error::Validation(format!(
                    "power term {k} has coefficient {} (must be finite and nonnegative)",
                    t.coeff
                )));
            }
            if t.exponent < 2 || t.exponent % 2 != 0 {
                return Err(Error::Validation(format!(
                    "power term {k} has exponent {} (must be even and at least 2)",
                    t.exponent
                )));
            }
        }
        Ok(ConvexSmoothFunction { base, power_terms })
    }

    pub fn from_quadratic(base: QuadraticFunction) -> Result<Self> {
        Self::new(base, Vec::new())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.base.eval(x)?;
        for t in &self.power_terms {
            v += t.coeff * t.affine(x).powi(t.exponent as i32);
        }
        Ok(v)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.base.grad(x)?;
        for t in &self.power_terms {
            let s = t.coeff * t.exponent as f64 * t.affine(x).powi(t.exponent as i32 - 1);
            crate::linalg::axpy(&mut g, s, &t.w);
        }
        Ok(g)
    }
}

/// `g(x) = f(x) − ½ xᵀ A x` with `f` convex.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoConvexFunction {
    pub f: ConvexSmoothFunction,
    pub a: SymMatrix,
}

impl RhoConvexFunction {
    pub fn new(f: ConvexSmoothFunction, a: SymMatrix) -> Result<Self> {
        if f.base.matrix.dim() != a.dim() {
            return Err(Error::dim("concave part", f.base.matrix.dim(), a.dim()));
        }
        Ok(RhoConvexFunction { f, a })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.f.eval(x)? - 0.5 * self.a.quad_form(x))
    }

    /// `∇f(x) − A x`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.f.grad(x)?;
        crate::linalg::axpy(&mut g, -1.0, &self.a.mul_vec(x));
        Ok(g)
    }
}

impl Smooth for RhoConvexFunction {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad(x)
    }
}

/// Denominators with magnitude at or below this are treated as vanishing.
pub const DENOMINATOR_TOL: f64 = 1e-10;

/// `num(x) / den(x) ≤ bound`. For an objective the bound is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalFunction {
    pub num: QuadraticFunction,
    pub den: QuadraticFunction,
    pub bound: f64,
}

impl FractionalFunction {
    pub fn new(num: QuadraticFunction, den: QuadraticFunction, bound: f64) -> Result<Self> {
        if num.matrix.dim() != den.matrix.dim() {
            return Err(Error::dim("denominator", num.matrix.dim(), den.matrix.dim()));
        }
        if !bound.is_finite() {
            return Err(Error::Validation("non-finite ratio bound".into()));
        }
        Ok(FractionalFunction { num, den, bound })
    }

    pub fn denominator(&self, x: &[f64]) -> Result<f64> {
        let d = self.den.eval(x)?;
        if d.abs() <= DENOMINATOR_TOL {
            return Err(Error::DenominatorVanishes { x: x.to_vec() });
        }
        Ok(d)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let d = self.denominator(x)?;
        Ok(self.num.eval(x)? / d)
    }

    /// Quotient rule: `(∇num − r ∇den) / den`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.denominator(x)?;
        let r = self.num.eval(x)? / d;
        let gn = self.num.grad(x)?;
        let gd = self.den.grad(x)?;
        Ok(gn.iter().zip(&gd).map(|(p, q)| (p - r * q) / d).collect())
    }
}

impl Smooth for FractionalFunction {
    fn dim(&self) -> usize {
        self.num.matrix.dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableDomain {
    pub lower: f64,
    pub upper: f64,
    pub kind: DomainKind,
}

impl VariableDomain {
    pub fn continuous(lower: f64, upper: f64) -> Self {
        VariableDomain {
            lower,
            upper,
            kind: DomainKind::Continuous,
        }
    }

    pub fn discrete(lower: f64, upper: f64) -> Self {
        VariableDomain {
            lower,
            upper,
            kind: DomainKind::Discrete,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == DomainKind::Discrete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedBox {
    pub domains: Vec<VariableDomain>,
}

impl MixedBox {
    pub fn new(domains: Vec<VariableDomain>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::Validation("at least one variable is required".into()));
        }
        let min_width = 100.0 * Tolerances::default().snap;
        for (i, d) in domains.iter().enumerate() {
            if !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(Error::Validation(format!("variable {i} has a non-finite bound")));
            }
            if !(d.upper - d.lower > min_width) {
                return Err(Error::Validation(format!(
                    "variable {i} needs lower < upper with a gap above {min_width:e} (got [{}, {}])",
                    d.lower, d.upper
                )));
            }
        }
        Ok(MixedBox { domains })
    }

    pub fn dim(&self) -> usize {
        self.domains.len()
    }

    pub fn continuous(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| !self.domains[i].is_discrete()).collect()
    }

    pub fn discrete(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.domains[i].is_discrete()).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.domains.iter().map(|d| d.width()).collect()
    }

    /// Moves coordinates within `snap` of a bound onto the bound.
    pub fn snap(&self, x: &[f64], snap: f64) -> Vec<f64> {
        x.iter()
            .zip(&self.domains)
            .map(|(&v, d)| {
                if (v - d.lower).abs() <= snap {
                    d.lower
                } else if (v - d.upper).abs() <= snap {
                    d.upper
                } else {
                    v
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    RhoConvex,
    Fractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program<F> {
    pub objective: F,
    pub constraints: Vec<F>,
}

impl<F> Program<F> {
    pub fn new(objective: F, constraints: Vec<F>) -> Self {
        Program {
            objective,
            constraints,
        }
    }

    /// Function `j`, with `0` the objective and `1..=m` the constraints.
    pub fn function(&self, j: usize) -> &F {
        if j == 0 {
            &self.objective
        } else {
            &self.constraints[j - 1]
        }
    }

    pub fn functions(&self) -> impl Iterator<Item = &F> {
        std::iter::once(&self.objective).chain(self.constraints.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemData {
    Quadratic(Program<QuadraticFunction>),
    RhoConvex(Program<RhoConvexFunction>),
    Fractional(Program<FractionalFunction>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: Option<String>,
    data: ProblemData,
    bounds: MixedBox,
    xi: Vec<f64>,
}

impl Problem {
    pub fn quadratic(bounds: MixedBox, program: Program<QuadraticFunction>) -> Result<Self> {
        Self::new(bounds, ProblemData::Quadratic(program))
    }

    pub fn rho_convex(bounds: MixedBox, program: Program<RhoConvexFunction>) -> Result<Self> {
        Self::new(bounds, ProblemData::RhoConvex(program))
    }

    pub fn fractional(bounds: MixedBox, program: Program<FractionalFunction>) -> Result<Self> {
        Self::new(bounds, ProblemData::Fractional(program))
    }

    pub fn new(bounds: MixedBox, data: ProblemData) -> Result<Self> {
        let n = bounds.dim();
        let dims: Vec<usize> = match &data {
            ProblemData::Quadratic(p) => p.functions().map(|f| f.dim()).collect(),
            ProblemData::RhoConvex(p) => p.functions().map(|f| f.dim()).collect(),
            ProblemData::Fractional(p) => p.functions().map(|f| f.dim()).collect(),
        };
        for d in dims {
            if d != n {
                return Err(Error::dim("function dimension", n, d));
            }
        }
        let xi = match &data {
            ProblemData::Fractional(p) => crate::fractional::xi_signs(p, &bounds)?,
            _ => Vec::new(),
        };
        Ok(Problem {
            name: None,
            data,
            bounds,
            xi,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn kind(&self) -> ProblemKind {
        match self.data {
            ProblemData::Quadratic(_) => ProblemKind::Quadratic,
            ProblemData::RhoConvex(_) => ProblemKind::RhoConvex,
            ProblemData::Fractional(_) => ProblemKind::Fractional,
        }
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn bounds(&self) -> &MixedBox {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn num_constraints(&self) -> usize {
        match &self.data {
            ProblemData::Quadratic(p) => p.constraints.len(),
            ProblemData::RhoConvex(p) => p.constraints.len(),
            ProblemData::Fractional(p) => p.constraints.len(),
        }
    }

    /// Denominator signs `ξ_0..ξ_m` for fractional problems, empty otherwise.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    fn smooth(&self, j: usize) -> &dyn Smooth {
        match &self.data {
            ProblemData::Quadratic(p) => p.function(j),
            ProblemData::RhoConvex(p) => p.function(j),
            ProblemData::Fractional(p) => p.function(j),
        }
    }

    /// Value of function `j` (`0` is the objective); ratios for fractional problems.
    pub fn value(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.smooth(j).value(x)
    }

    pub fn gradient(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.smooth(j).gradient(x)
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.value(0, x)
    }

    /// Right-hand side of constraint `j` (1-based): `e_j` for ratios, `0` otherwise.
    pub fn bound(&self, j: usize) -> f64 {
        match &self.data {
            ProblemData::Fractional(p) => p.function(j).bound,
            _ => 0.0,
        }
    }

    /// `value − bound` for constraint `j` (1-based); feasible when `≤ 0`.
    pub fn slack(&self, j: usize, x: &[f64]) -> Result<f64> {
        Ok(self.value(j, x)? - self.bound(j))
    }

    pub fn feasibility(&self, x: &[f64]) -> Result<FeasibilityReport> {
        self.feasibility_with(x, &Tolerances::default())
    }

    pub fn feasibility_with(&self, x: &[f64], tol: &Tolerances) -> Result<FeasibilityReport> {
        check_len("point", self.dim(), x)?;
        let box_status: Vec<BoxStatus> = x
            .iter()
            .zip(&self.bounds.domains)
            .map(|(&v, d)| {
                if d.is_discrete() {
                    if (v - d.lower).abs() <= tol.snap || (v - d.upper).abs() <= tol.snap {
                        BoxStatus::Ok
                    } else {
                        BoxStatus::DiscreteViolation
                    }
                } else if v < d.lower - tol.feasibility {
                    BoxStatus::BelowLower
                } else if v > d.upper + tol.feasibility {
                    BoxStatus::AboveUpper
                } else {
                    BoxStatus::Ok
                }
            })
            .collect();
        let m = self.num_constraints();
        let mut values = Vec::with_capacity(m);
        let mut slacks = Vec::with_capacity(m);
        for j in 1..=m {
            let v = self.value(j, x)?;
            values.push(v);
            slacks.push(v - self.bound(j));
        }
        let in_box = box_status.iter().all(|s| *s == BoxStatus::Ok);
        let feasible = in_box && slacks.iter().all(|s| *s <= tol.feasibility);
        Ok(FeasibilityReport {
            box_status,
            constraint_values: values,
            slacks,
            in_box,
            feasible,
        })
    }

    pub fn is_feasible(&self, x: &[f64], tol: &Tolerances) -> bool {
        self.feasibility_with(x, tol).map(|r| r.feasible).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxStatus {
    Ok,
    BelowLower,
    AboveUpper,
    DiscreteViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub box_status: Vec<BoxStatus>,
    pub constraint_values: Vec<f64>,
    pub slacks: Vec<f64>,
    pub in_box: bool,
    pub feasible: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    fn quad(rows: &[Vec<f64>], a: &[f64], c: f64) -> QuadraticFunction {
        QuadraticFunction::new(SymMatrix::from_rows(rows).unwrap(), a.to_vec(), c).unwrap()
    }

    #[test]
    fn symmetric_rows_are_mirrored() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(m.get(1, 0), 2.0);
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 3.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(SymMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn quadratic_values_and_gradients() {
        let e1 = examples::e1();
        assert_eq!(e1.objective(&[2.0, 2.0]).unwrap(), -8.0);
        assert_eq!(e1.gradient(1, &[2.0, 2.0]).unwrap(), vec![5.0, 5.0]);
        let e2 = examples::e2();
        assert_eq!(e2.objective(&[-1.0, -1.0]).unwrap(), -4.0);
        assert_eq!(e2.gradient(0, &[-1.0, -1.0]).unwrap(), vec![4.0, 3.0]);

        let constant = quad(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[0.0, 0.0], 7.5);
        assert_eq!(constant.eval(&[3.0, -1.0]).unwrap(), 7.5);
        let ident = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], 0.0);
        assert_eq!(ident.grad(&[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
        assert!(matches!(
            ident.eval(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn convex_terms_evaluate_exactly() {
        let e3 = examples::e3();
        let ProblemData::RhoConvex(p) = e3.data() else {
            panic!("wrong kind")
        };
        let x = [-1.0, -1.0];
        assert_eq!(p.objective.f.eval(&x).unwrap(), -12.0);
        assert_eq!(p.objective.f.grad(&x).unwrap(), vec![6.0, 6.0]);
        assert_eq!(p.constraints[0].f.eval(&x).unwrap(), -2.0);
        assert_eq!(p.constraints[0].f.grad(&x).unwrap(), vec![0.0, 0.0]);

        let base = quad(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[1.0, -1.0], 0.5);
        let f = ConvexSmoothFunction::from_quadratic(base.clone()).unwrap();
        let y = [0.7, -0.2];
        assert_eq!(f.eval(&y).unwrap(), base.eval(&y).unwrap());
        assert_eq!(f.grad(&y).unwrap(), base.grad(&y).unwrap());
    }

    #[test]
    fn convex_class_is_validated() {
        let indefinite = quad(&[vec![1.0, 0.0], vec![0.0, -1.0]], &[0.0, 0.0], 0.0);
        assert!(ConvexSmoothFunction::from_quadratic(indefinite).is_err());
        let base = QuadraticFunction::zero(2);
        let odd = PowerTerm {
            coeff: 1.0,
            w: vec![1.0, 0.0],
            b: 0.0,
            exponent: 3,
        };
        assert!(ConvexSmoothFunction::new(base.clone(), vec![odd]).is_err());
        let negative = PowerTerm {
            coeff: -1.0,
            w: vec![1.0, 0.0],
            b: 0.0,
            exponent: 2,
        };
        assert!(ConvexSmoothFunction::new(base, vec![negative]).is_err());
    }

    #[test]
    fn fractional_values() {
        let e4 = examples::e4();
        assert_eq!(e4.objective(&[-1.0, -1.0]).unwrap(), -2.0);
        assert_eq!(e4.value(1, &[-1.0, -1.0]).unwrap(), 1.0);
        let q = quad(&[vec![1.0, 0.0], vec![0.0, 3.0]], &[1.0, 2.0], 4.0);
        let same = FractionalFunction::new(q.clone(), q, 0.0).unwrap();
        assert_eq!(same.eval(&[0.3, 0.9]).unwrap(), 1.0);
        let den = quad(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, 0.0], 0.0);
        let ratio = FractionalFunction::new(QuadraticFunction::zero(2), den, 0.0).unwrap();
        assert!(matches!(
            ratio.eval(&[0.0, 1.0]),
            Err(Error::DenominatorVanishes { .. })
        ));
    }

    #[test]
    fn feasibility_reports() {
        let e1 = examples::e1();
        let r = e1.feasibility(&[2.0, 2.0]).unwrap();
        assert!(r.feasible);
        assert_eq!(r.constraint_values, vec![0.0]);
        let r = e1.feasibility(&[2.0, 0.5]).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.box_status[1], BoxStatus::DiscreteViolation);
        let e4 = examples::e4();
        let r = e4.feasibility(&[1.0, 1.0]).unwrap();
        assert!(r.feasible);
        assert_eq!(r.constraint_values, vec![1.0]);
        assert!(!e1.feasibility(&[2.5, 2.0]).unwrap().in_box);
    }

    #[test]
    fn box_validation() {
        assert!(MixedBox::new(vec![VariableDomain::continuous(1.0, 1.0)]).is_err());
        assert!(MixedBox::new(vec![VariableDomain::discrete(0.0, 1e-8)]).is_err());
        assert!(MixedBox::new(vec![]).is_err());
        let b = MixedBox::new(vec![
            VariableDomain::continuous(-1.0, 1.0),
            VariableDomain::discrete(0.0, 2.0),
        ])
        .unwrap();
        assert_eq!(b.continuous(), vec![0]);
        assert_eq!(b.discrete(), vec![1]);
        assert_eq!(b.snap(&[-1.0 + 1e-10, 1.5], 1e-9), vec![-1.0, 1.5]);
    }
}
