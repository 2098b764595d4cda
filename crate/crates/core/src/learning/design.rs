use crate::model::DriftFamily;
use crate::process::EventLog;
use nalgebra::{DMatrix, DVector};

/// Observed transitions `(X_n, a_n, X_{n+1} - X_n)` in event order.
#[derive(Debug, Clone, Default)]
pub struct DesignLog {
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub increments: Vec<f64>,
}

impl DesignLog {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            ..Default::default()
        }
    }

    /// Every complete transition of an event log.
    pub fn from_event_log(log: &EventLog) -> Self {
        let mut d = Self::new(log.state_dim, log.action_dim);
        let steps = log.n_events().min(log.actions.len() / log.action_dim);
        for n in 0..steps {
            d.push(log.state(n), log.action(n), log.state(n + 1));
        }
        d
    }

    pub fn len(&self) -> usize {
        if self.state_dim == 0 {
            0
        } else {
            self.states.len() / self.state_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, x: &[f64], a: &[f64], x_next: &[f64]) {
        self.states.extend_from_slice(x);
        self.actions.extend_from_slice(a);
        self.increments
            .extend(x_next.iter().zip(x).map(|(u, v)| u - v));
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.state_dim..(i + 1) * self.state_dim]
    }
}

/// Sufficient statistics of a design for a family that is linear in θ:
/// `G = Σ Φᵢᵀ Φᵢ`, `b = Σ Φᵢᵀ Δᵢ`, `c = Σ ‖Δᵢ‖²` with `μ̄_θ(zᵢ) = Φᵢ θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStats {
    pub count: usize,
    pub gram: DMatrix<f64>,
    pub cross: DVector<f64>,
    pub sq: f64,
    phi: Vec<f64>,
}

impl LinearStats {
    pub fn new(theta_dim: usize) -> Self {
        Self {
            count: 0,
            gram: DMatrix::zeros(theta_dim, theta_dim),
            cross: DVector::zeros(theta_dim),
            sq: 0.0,
            phi: Vec::new(),
        }
    }

    pub fn from_design(family: &DriftFamily, design: &DesignLog, upto: usize) -> Self {
        let mut s = Self::new(family.theta_dim());
        for i in 0..upto.min(design.len()) {
            s.push(
                family,
                design.state(i),
                design.action(i),
                design.increment(i),
            );
        }
        s
    }

    /// Accumulate one transition; only valid for linear-in-θ families.
    pub fn push(&mut self, family: &DriftFamily, x: &[f64], a: &[f64], inc: &[f64]) {
        let d = x.len();
        let p = self.gram.nrows();
        self.phi.resize(d * p, 0.0);
        let dummy = vec![0.0; p];
        family.theta_jacobian_into(&dummy, x, a, &mut self.phi);
        for i in 0..d {
            let row = &self.phi[i * p..(i + 1) * p];
            for j in 0..p {
                if row[j] == 0.0 {
                    continue;
                }
                self.cross[j] += row[j] * inc[i];
                for k in 0..p {
                    self.gram[(j, k)] += row[j] * row[k];
                }
            }
            self.sq += inc[i] * inc[i];
        }
        self.count += 1;
    }

    /// Add a single transition's Gram contribution without the response.
    pub fn push_gram(&mut self, family: &DriftFamily, x: &[f64], a: &[f64]) {
        let d = x.len();
        let p = self.gram.nrows();
        self.phi.resize(d * p, 0.0);
        let dummy = vec![0.0; p];
        family.theta_jacobian_into(&dummy, x, a, &mut self.phi);
        for i in 0..d {
            let row = &self.phi[i * p..(i + 1) * p];
            for j in 0..p {
                if row[j] == 0.0 {
                    continue;
                }
                for k in 0..p {
                    self.gram[(j, k)] += row[j] * row[k];
                }
            }
        }
        self.count += 1;
    }

    /// Least-squares objective `Σ ‖Δᵢ - ε Φᵢ θ‖²`.
    pub fn objective(&self, theta: &[f64], epsilon: f64) -> f64 {
        let t = DVector::from_column_slice(theta);
        let quad = (t.transpose() * &self.gram * &t)[0];
        (self.sq - 2.0 * epsilon * self.cross.dot(&t) + epsilon * epsilon * quad).max(0.0)
    }

    /// `Σ ‖μ_θ(zᵢ) - μ_θ'(zᵢ)‖² = ε² (θ-θ')ᵀ G (θ-θ')`.
    pub fn discrepancy_sq(&self, theta: &[f64], other: &[f64], epsilon: f64) -> f64 {
        quad_form(&self.gram, theta, other) * epsilon * epsilon
    }
}

/// `(u - v)ᵀ G (u - v)`.
pub fn quad_form(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let p = u.len();
    let mut s = 0.0;
    for j in 0..p {
        let dj = u[j] - v[j];
        if dj == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for k in 0..p {
            row += g[(j, k)] * (u[k] - v[k]);
        }
        s += dj * row;
    }
    s.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearFamily;

    #[test]
    fn stats_match_direct_sums() {
        let f = DriftFamily::Linear(LinearFamily {
            state_dim: 1,
            action_dim: 1,
        });
        let mut design = DesignLog::new(1, 1);
        let pts = [(0.3, -1.0, 0.1), (-0.7, 0.5, 0.2), (1.1, 0.2, -0.05)];
        for (x, a, inc) in pts {
            design.push(&[x], &[a], &[x + inc]);
        }
        let s = LinearStats::from_design(&f, &design, 3);
        let theta = [-0.8, 1.3];
        let other = [-1.0, 1.0];
        let eps = 0.1;
        let mut direct = 0.0;
        let mut disc = 0.0;
        for (x, a, inc) in pts {
            direct += (inc - eps * (theta[0] * x + theta[1] * a)).powi(2);
            disc += (eps * ((theta[0] - other[0]) * x + (theta[1] - other[1]) * a)).powi(2);
        }
        assert!((s.objective(&theta, eps) - direct).abs() < 1e-12);
        assert!((s.discrepancy_sq(&theta, &other, eps) - disc).abs() < 1e-14);
    }
}
