//! Random instances that are KKT points by construction.
#![allow(dead_code)]

use mixcert::kkt;
use mixcert::{
    ConvexSmoothFunction, FractionalFunction, MixedBox, PowerTerm, Problem, ProblemKind, Program, QuadraticFunction,
    RhoConvexFunction, SymMatrix, VariableDomain,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub problem: Problem,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Copy)]
pub struct Shape {
    pub max_n: usize,
    pub max_m: usize,
    /// Probability that each curvature matrix is drawn with a favourable sign.
    pub benign: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_n: 3,
            max_m: 2,
            benign: 0.3,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, -scale, scale)).collect()
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_upper(n, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let g: Vec<Vec<f64>> = (0..n).map(|_| random_vec(rng, n, 1.0)).collect();
    SymMatrix::from_upper(n, |i, j| scale * (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>() / n as f64)
}

pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> MixedBox {
    let continuous_at = rng.gen_range(0..n);
    let domains = (0..n)
        .map(|i| {
            let lo = uniform(rng, -2.0, 0.5);
            let hi = lo + uniform(rng, 0.5, 3.0);
            if i != continuous_at && rng.gen_bool(0.35) {
                VariableDomain::discrete(lo, hi)
            } else {
                VariableDomain::continuous(lo, hi)
            }
        })
        .collect();
    MixedBox::new(domains).unwrap()
}

/// Each continuous coordinate lands on a bound or in the interior with equal
/// odds; discrete coordinates take either bound.
pub fn random_point(rng: &mut ChaCha8Rng, b: &MixedBox) -> Vec<f64> {
    b.domains
        .iter()
        .map(|d| {
            let pick = if d.is_discrete() { rng.gen_range(0..2) } else { rng.gen_range(0..3) };
            match pick {
                0 => d.lower,
                1 => d.upper,
                _ => d.lower + d.width() * uniform(rng, 0.1, 0.9),
            }
        })
        .collect()
}

pub fn random_in_box(rng: &mut ChaCha8Rng, b: &MixedBox) -> Vec<f64> {
    b.domains
        .iter()
        .map(|d| {
            if d.is_discrete() {
                if rng.gen_bool(0.5) {
                    d.lower
                } else {
                    d.upper
                }
            } else {
                uniform(rng, d.lower, d.upper)
            }
        })
        .collect()
}

/// Lagrangian gradient that satisfies the necessary condition at `x`.
fn target_gradient(rng: &mut ChaCha8Rng, b: &MixedBox, x: &[f64]) -> Vec<f64> {
    b.domains
        .iter()
        .zip(x)
        .map(|(d, xi)| {
            let zero = rng.gen_bool(0.2);
            if d.is_discrete() {
                uniform(rng, -2.0, 2.0)
            } else if *xi == d.lower {
                if zero { 0.0 } else { uniform(rng, 0.0, 2.0) }
            } else if *xi == d.upper {
                if zero { 0.0 } else { -uniform(rng, 0.0, 2.0) }
            } else {
                0.0
            }
        })
        .collect()
}

/// Multipliers and, per constraint, the slack it should have at the candidate.
fn random_multipliers(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lambda = Vec::with_capacity(m);
    let mut slack = Vec::with_capacity(m);
    for _ in 0..m {
        if rng.gen_bool(0.7) {
            lambda.push(if rng.gen_bool(0.15) { 0.0 } else { uniform(rng, 0.05, 2.0) });
            slack.push(0.0);
        } else {
            lambda.push(0.0);
            slack.push(-uniform(rng, 0.1, 1.0));
        }
    }
    (lambda, slack)
}

fn sized(rng: &mut ChaCha8Rng, shape: Shape) -> (usize, usize) {
    (rng.gen_range(1..=shape.max_n), rng.gen_range(0..=shape.max_m))
}

fn shift_quadratic(q: &QuadraticFunction, dlinear: &[f64], dconst: f64) -> QuadraticFunction {
    let linear = q.linear.iter().zip(dlinear).map(|(a, d)| a + d).collect();
    QuadraticFunction::new(q.matrix.clone(), linear, q.constant + dconst).unwrap()
}

fn curvature(rng: &mut ChaCha8Rng, n: usize, benign: bool, sign: f64) -> SymMatrix {
    if benign {
        random_psd(rng, n, 2.0).scaled(sign)
    } else {
        random_sym(rng, n, 2.0)
    }
}

pub fn quadratic(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let (n, m) = sized(&mut r, shape);
    let b = random_box(&mut r, n);
    let x = random_point(&mut r, &b);
    let benign = r.gen_bool(shape.benign);
    let (lambda, slack) = random_multipliers(&mut r, m);
    let mut cons = Vec::new();
    for s in &slack {
        let a = curvature(&mut r, n, benign, 1.0);
        let q = QuadraticFunction::new(a, random_vec(&mut r, n, 2.0), 0.0).unwrap();
        let v = q.eval(&x).unwrap();
        cons.push(shift_quadratic(&q, &vec![0.0; n], s - v));
    }
    let a0 = curvature(&mut r, n, benign, 1.0);
    let obj = QuadraticFunction::new(a0, vec![0.0; n], uniform(&mut r, -3.0, 3.0)).unwrap();
    let target = target_gradient(&mut r, &b, &x);
    let p = Problem::quadratic(b.clone(), Program::new(obj.clone(), cons.clone())).unwrap();
    let g = kkt::lagrangian_gradient(&p, &x, &lambda).unwrap();
    let d: Vec<f64> = target.iter().zip(&g).map(|(t, g)| t - g).collect();
    let obj = shift_quadratic(&obj, &d, 0.0);
    let problem = Problem::quadratic(b, Program::new(obj, cons)).unwrap();
    Instance { problem, x, lambda }
}

fn random_convex(rng: &mut ChaCha8Rng, n: usize) -> ConvexSmoothFunction {
    let base = QuadraticFunction::new(random_psd(rng, n, 1.0), random_vec(rng, n, 2.0), 0.0).unwrap();
    let terms = (0..rng.gen_range(0..=2))
        .map(|_| PowerTerm {
            coeff: uniform(rng, 0.0, 0.5),
            w: random_vec(rng, n, 1.0),
            b: uniform(rng, -0.5, 0.5),
            exponent: if rng.gen_bool(0.5) { 2 } else { 4 },
        })
        .collect();
    ConvexSmoothFunction::new(base, terms).unwrap()
}

fn shift_convex(f: &ConvexSmoothFunction, dlinear: &[f64], dconst: f64) -> ConvexSmoothFunction {
    ConvexSmoothFunction::new(shift_quadratic(&f.base, dlinear, dconst), f.power_terms.clone()).unwrap()
}

pub fn rho_convex(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let (n, m) = sized(&mut r, shape);
    let b = random_box(&mut r, n);
    let x = random_point(&mut r, &b);
    let benign = r.gen_bool(shape.benign);
    let (lambda, slack) = random_multipliers(&mut r, m);
    let mut cons = Vec::new();
    for s in &slack {
        let g = RhoConvexFunction::new(random_convex(&mut r, n), curvature(&mut r, n, benign, -1.0)).unwrap();
        let v = g.eval(&x).unwrap();
        cons.push(RhoConvexFunction::new(shift_convex(&g.f, &vec![0.0; n], s - v), g.a.clone()).unwrap());
    }
    let obj = RhoConvexFunction::new(random_convex(&mut r, n), curvature(&mut r, n, benign, -1.0)).unwrap();
    let target = target_gradient(&mut r, &b, &x);
    let p = Problem::rho_convex(b.clone(), Program::new(obj.clone(), cons.clone())).unwrap();
    let g = kkt::lagrangian_gradient(&p, &x, &lambda).unwrap();
    let d: Vec<f64> = target.iter().zip(&g).map(|(t, g)| t - g).collect();
    let obj = RhoConvexFunction::new(shift_convex(&obj.f, &d, 0.0), obj.a.clone()).unwrap();
    let problem = Problem::rho_convex(b, Program::new(obj, cons)).unwrap();
    Instance { problem, x, lambda }
}

/// A denominator bounded away from zero on the box, positive unless `negate`.
fn random_denominator(rng: &mut ChaCha8Rng, b: &MixedBox, negate: bool) -> QuadraticFunction {
    let n = b.dim();
    let bm = random_psd(rng, n, 0.5);
    let lin = random_vec(rng, n, 0.5);
    let radius: f64 = b
        .domains
        .iter()
        .map(|d| d.lower.abs().max(d.upper.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm_b = lin.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = 0.5 + 0.5 * bm.frobenius_norm() * radius * radius + norm_b * radius + uniform(rng, 0.0, 1.0);
    let q = QuadraticFunction::new(bm, lin, d).unwrap();
    if negate {
        q.combine(-1.0, &q, 0.0)
    } else {
        q
    }
}

pub fn fractional(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let (n, m) = sized(&mut r, shape);
    let b = random_box(&mut r, n);
    let x = random_point(&mut r, &b);
    let benign = r.gen_bool(shape.benign);
    let (lambda, slack) = random_multipliers(&mut r, m);
    let mut cons = Vec::new();
    for s in &slack {
        let num = QuadraticFunction::new(curvature(&mut r, n, benign, 1.0), random_vec(&mut r, n, 2.0), 0.0).unwrap();
        let negate = r.gen_bool(0.2);
        let den = random_denominator(&mut r, &b, negate);
        let ratio = num.eval(&x).unwrap() / den.eval(&x).unwrap();
        cons.push(FractionalFunction::new(num, den, ratio - s).unwrap());
    }
    let num0 = QuadraticFunction::new(
        curvature(&mut r, n, benign, 1.0),
        random_vec(&mut r, n, 1.0),
        uniform(&mut r, -2.0, 2.0),
    )
    .unwrap();
    let den0 = random_denominator(&mut r, &b, false);
    let obj = FractionalFunction::new(num0.clone(), den0.clone(), 0.0).unwrap();
    let target = target_gradient(&mut r, &b, &x);
    let p = Problem::fractional(b.clone(), Program::new(obj, cons.clone())).unwrap();
    let g = kkt::lagrangian_gradient(&p, &x, &lambda).unwrap();
    // Shifting the numerator's linear term by δ and its constant by −δᵀx
    // moves the ratio gradient at x by δ / den(x) and leaves the ratio alone.
    let c = den0.eval(&x).unwrap();
    let delta: Vec<f64> = target.iter().zip(&g).map(|(t, g)| c * (t - g)).collect();
    let dx: f64 = delta.iter().zip(&x).map(|(d, xi)| d * xi).sum();
    let obj = FractionalFunction::new(shift_quadratic(&num0, &delta, -dx), den0, 0.0).unwrap();
    let problem = Problem::fractional(b, Program::new(obj, cons)).unwrap();
    Instance { problem, x, lambda }
}

pub fn instance(kind: ProblemKind, seed: u64, shape: Shape) -> Instance {
    match kind {
        ProblemKind::Quadratic => quadratic(seed, shape),
        ProblemKind::RhoConvex => rho_convex(seed, shape),
        ProblemKind::Fractional => fractional(seed, shape),
    }
}

pub const KINDS: [ProblemKind; 3] = [ProblemKind::Quadratic, ProblemKind::RhoConvex, ProblemKind::Fractional];

/// Central difference of function `j` of `p` along each axis.
pub fn finite_difference(p: &Problem, j: usize, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let step = h * (1.0 + x[i].abs());
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += step;
            b[i] -= step;
            (p.value(j, &a).unwrap() - p.value(j, &b).unwrap()) / (2.0 * step)
        })
        .collect()
}
