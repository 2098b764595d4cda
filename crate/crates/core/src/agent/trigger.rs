use crate::learning::ConfidenceState;
use crate::model::DriftFamily;

/// Lazy update test of an episode. The supremum of the cumulative squared
/// discrepancy over the episode's confidence set is approximated on a
/// finite candidate set: optimism grid points in the set plus the fit and
/// the points where each coordinate axis through the fit leaves the set.
///
/// Each candidate keeps a running sum, updated once per transition.
#[derive(Debug, Clone)]
pub struct LazyTrigger {
    pub candidates: Vec<Vec<f64>>,
    center: Vec<f64>,
    sums: Vec<f64>,
    buf: (Vec<f64>, Vec<f64>),
}

impl LazyTrigger {
    /// Built right after the fit at the episode start.
    pub fn new(conf: &ConfidenceState, theta_grid: &[Vec<f64>]) -> Self {
        let mut candidates: Vec<Vec<f64>> = theta_grid
            .iter()
            .filter(|t| conf.contains(t))
            .cloned()
            .collect();
        candidates.extend(axis_extremes(conf));
        let n = conf.design.len();
        let sums = candidates
            .iter()
            .map(|t| conf.discrepancy_sq_upto(t, &conf.theta_hat, n))
            .collect();
        let d = conf.design.state_dim;
        Self {
            candidates,
            center: conf.theta_hat.clone(),
            sums,
            buf: (vec![0.0; d], vec![0.0; d]),
        }
    }

    pub fn observe(&mut self, family: &DriftFamily, epsilon: f64, x: &[f64], a: &[f64]) {
        let (u, v) = &mut self.buf;
        family.drift_bar_into(&self.center, x, a, v);
        for (t, s) in self.candidates.iter().zip(self.sums.iter_mut()) {
            family.drift_bar_into(t, x, a, u);
            *s += u
                .iter()
                .zip(v.iter())
                .map(|(p, q)| (epsilon * (p - q)).powi(2))
                .sum::<f64>();
        }
    }

    pub fn sup_discrepancy(&self) -> f64 {
        self.sums.iter().copied().fold(0.0, f64::max).sqrt()
    }

    /// Fires when the supremum exceeds `2 β_n`; an empty candidate set
    /// always fires.
    pub fn fires(&self, beta_n: f64) -> bool {
        self.candidates.is_empty() || self.sup_discrepancy() > 2.0 * beta_n
    }
}

/// For each axis and sign, the farthest point of the box along the axis
/// through the fit that stays in the confidence set (bisection).
fn axis_extremes(conf: &ConfidenceState) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let c = &conf.theta_hat;
    for j in 0..c.len() {
        for sign in [-1.0, 1.0] {
            let limit = if sign < 0.0 {
                c[j] - conf.bounds.lo[j]
            } else {
                conf.bounds.hi[j] - c[j]
            };
            if limit <= 0.0 {
                continue;
            }
            let at = |t: f64| {
                let mut p = c.clone();
                p[j] += sign * t;
                p[j] = p[j].clamp(conf.bounds.lo[j], conf.bounds.hi[j]);
                p
            };
            let (mut lo, mut hi) = (0.0, limit);
            if conf.contains(&at(hi)) {
                lo = hi;
            } else {
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if conf.contains(&at(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            if lo > 0.0 {
                out.push(at(lo));
            }
        }
    }
    out
}
