use crate::model::MixedBox;

/// `k`-th of `count` evenly spaced points on `[lo, hi]`; endpoints are exact.
pub fn grid_value(lo: f64, hi: f64, k: usize, count: usize) -> f64 {
    if k == 0 {
        lo
    } else if k + 1 >= count {
        hi
    } else {
        lo + (hi - lo) * (k as f64 / (count - 1) as f64)
    }
}

/// Cartesian product of per-coordinate value lists: both bounds for discrete
/// coordinates and a uniform grid for continuous ones. The last coordinate
/// varies fastest.
#[derive(Debug, Clone)]
pub struct Lattice {
    axes: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn new(bounds: &MixedBox, points_per_axis: usize) -> Self {
        let axes = bounds
            .domains
            .iter()
            .map(|d| {
                if d.is_discrete() {
                    vec![d.lower, d.upper]
                } else {
                    (0..points_per_axis)
                        .map(|k| grid_value(d.lower, d.upper, k, points_per_axis))
                        .collect()
                }
            })
            .collect();
        Lattice { axes }
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Number of points, saturating at `u64::MAX`.
    pub fn len(&self) -> u64 {
        self.axes
            .iter()
            .fold(1u64, |acc, a| acc.saturating_mul(a.len() as u64))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, mut idx: u64, out: &mut [usize]) {
        for (i, a) in self.axes.iter().enumerate().rev() {
            let len = a.len() as u64;
            out[i] = (idx % len) as usize;
            idx /= len;
        }
    }

    pub fn linear(&self, multi: &[usize]) -> u64 {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0u64, |acc, (k, a)| acc * a.len() as u64 + *k as u64)
    }

    pub fn point(&self, idx: u64, out: &mut [f64]) {
        let mut rest = idx;
        for (i, a) in self.axes.iter().enumerate().rev() {
            let len = a.len() as u64;
            out[i] = a[(rest % len) as usize];
            rest /= len;
        }
    }
}

/// Largest points-per-axis (at least 3, at most `max`) whose full lattice stays
/// within `budget` points.
pub fn points_for_budget(bounds: &MixedBox, budget: u64, max: usize) -> usize {
    let nc = bounds.continuous().len() as u32;
    let nd = bounds.discrete().len() as u32;
    let discrete = 2u64.saturating_pow(nd).max(1);
    let mut k = max.max(3);
    while k > 3 && discrete.saturating_mul((k as u64).saturating_pow(nc)) > budget {
        k -= 1;
    }
    k
}
