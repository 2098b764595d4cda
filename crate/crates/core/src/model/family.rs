use super::ParamBox;
use crate::error::{invalid, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// `μ̄_θ(x, a) = A x + B a`, with `θ = (vec A, vec B)` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFamily {
    pub state_dim: usize,
    pub action_dim: usize,
}

/// `μ̄_θ(x, a) = -c x + θ₁ tanh(θ₂ x) + b a` on the real line.
///
/// Contractive whenever `|θ₁ θ₂| < c` on the whole parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhFamily {
    pub c: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum DriftFamily {
    Linear(LinearFamily),
    Tanh(TanhFamily),
}

impl DriftFamily {
    pub fn id(&self) -> &'static str {
        match self {
            DriftFamily::Linear(_) => "linear",
            DriftFamily::Tanh(_) => "tanh",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            DriftFamily::Linear(f) => f.state_dim,
            DriftFamily::Tanh(_) => 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            DriftFamily::Linear(f) => f.action_dim,
            DriftFamily::Tanh(_) => 1,
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self {
            DriftFamily::Linear(f) => f.state_dim * (f.state_dim + f.action_dim),
            DriftFamily::Tanh(_) => 2,
        }
    }

    /// True when `μ̄_θ` is affine in θ, so least squares is a quadratic
    /// problem and the design can be summarized by a Gram matrix.
    pub fn is_linear_in_theta(&self) -> bool {
        matches!(self, DriftFamily::Linear(_))
    }

    #[inline]
    pub fn drift_bar_into(&self, theta: &[f64], x: &[f64], a: &[f64], out: &mut [f64]) {
        match self {
            DriftFamily::Linear(f) => {
                let (d, m) = (f.state_dim, f.action_dim);
                let (amat, bmat) = theta.split_at(d * d);
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..d {
                        s += amat[i * d + j] * x[j];
                    }
                    for k in 0..m {
                        s += bmat[i * m + k] * a[k];
                    }
                    out[i] = s;
                }
            }
            DriftFamily::Tanh(f) => {
                out[0] = -f.c * x[0] + theta[0] * (theta[1] * x[0]).tanh() + f.b * a[0];
            }
        }
    }

    pub fn drift_bar(&self, theta: &[f64], x: &[f64], a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        self.drift_bar_into(theta, x, a, &mut out);
        out
    }

    /// Jacobian `∂μ̄_θ/∂θ` as a row-major `d × dΘ` array.
    pub fn theta_jacobian_into(&self, theta: &[f64], x: &[f64], a: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            DriftFamily::Linear(f) => {
                let (d, m) = (f.state_dim, f.action_dim);
                let p = self.theta_dim();
                for i in 0..d {
                    for j in 0..d {
                        out[i * p + i * d + j] = x[j];
                    }
                    for k in 0..m {
                        out[i * p + d * d + i * m + k] = a[k];
                    }
                }
            }
            DriftFamily::Tanh(_) => {
                let t = (theta[1] * x[0]).tanh();
                out[0] = t;
                out[1] = theta[0] * x[0] * (1.0 - t * t);
            }
        }
    }

    /// Upper bound, uniform over the box, on
    /// `sup_x ‖μ̄(x,a)‖/(1+‖x‖) + Lip_x μ̄`.
    pub fn growth_plus_lipschitz(&self, bounds: &ParamBox, actions: &ParamBox) -> f64 {
        let a_rad = actions.max_norm();
        match self {
            DriftFamily::Linear(f) => {
                let (d, m) = (f.state_dim, f.action_dim);
                let mut a_op = 0.0f64;
                let mut b_op = 0.0f64;
                // Operator norms are convex, so their maxima sit at vertices.
                for v in sub_box(bounds, 0, d * d).vertices() {
                    a_op = a_op.max(DMatrix::from_row_slice(d, d, &v).singular_values().max());
                }
                for v in sub_box(bounds, d * d, d * m).vertices() {
                    b_op = b_op.max(DMatrix::from_row_slice(d, m, &v).singular_values().max());
                }
                a_op.max(b_op * a_rad) + a_op
            }
            DriftFamily::Tanh(f) => {
                let t1 = bounds.lo[0].abs().max(bounds.hi[0].abs());
                let t2 = bounds.lo[1].abs().max(bounds.hi[1].abs());
                f.c.max(t1 + f.b.abs() * a_rad) + f.c + t1 * t2
            }
        }
    }

    pub(crate) fn validate_box(&self, bounds: &ParamBox) -> Result<()> {
        if let DriftFamily::Tanh(f) = self {
            let t1 = bounds.lo[0].abs().max(bounds.hi[0].abs());
            let t2 = bounds.lo[1].abs().max(bounds.hi[1].abs());
            if !(f.c > 0.0) || t1 * t2 >= f.c {
                return invalid("tanh family needs |θ1 θ2| < c on the parameter box");
            }
        }
        if let DriftFamily::Linear(f) = self {
            if f.state_dim == 0 || f.action_dim == 0 || f.state_dim > 2 {
                return invalid("linear family supports state dimension 1 or 2");
            }
        }
        Ok(())
    }

    /// Metric matrix and the set of drift Jacobians (in x) whose convex hull
    /// contains every `∂μ̄_θ/∂x` over the box.
    pub(crate) fn certificate_inputs(
        &self,
        bounds: &ParamBox,
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        match self {
            DriftFamily::Linear(f) => {
                let d = f.state_dim;
                let abox = sub_box(bounds, 0, d * d);
                let center = DMatrix::from_row_slice(d, d, &abox.center());
                let p = super::care::solve_care(&center)?.metric;
                let vertices = abox
                    .vertices()
                    .iter()
                    .map(|v| DMatrix::from_row_slice(d, d, v))
                    .collect();
                Ok((p, vertices))
            }
            DriftFamily::Tanh(f) => {
                self.validate_box(bounds)?;
                let t1 = bounds.lo[0].abs().max(bounds.hi[0].abs());
                let t2 = bounds.lo[1].abs().max(bounds.hi[1].abs());
                let m = t1 * t2;
                if m >= f.c {
                    return Err(Error::NotHurwitz {
                        spectral_abscissa: m - f.c,
                    });
                }
                Ok((
                    DMatrix::from_element(1, 1, 1.0),
                    vec![
                        DMatrix::from_element(1, 1, -f.c - m),
                        DMatrix::from_element(1, 1, -f.c + m),
                    ],
                ))
            }
        }
    }

    /// Constant `L` with `sup_{‖x‖≤R, a} ‖μ̄_θ - μ̄_θ'‖ ≤ L ‖θ - θ'‖_∞`.
    pub fn parameter_lipschitz(
        &self,
        bounds: &ParamBox,
        actions: &ParamBox,
        state_radius: f64,
    ) -> f64 {
        match self {
            DriftFamily::Linear(f) => {
                let d = f.state_dim as f64;
                let m = f.action_dim as f64;
                1.0 + d.sqrt() * (d.sqrt() * state_radius + m.sqrt() * actions.max_norm())
            }
            DriftFamily::Tanh(_) => {
                let t1 = bounds.lo[0].abs().max(bounds.hi[0].abs());
                1.0 + 1.0 + t1 * state_radius
            }
        }
    }
}

fn sub_box(b: &ParamBox, start: usize, len: usize) -> ParamBox {
    ParamBox {
        lo: b.lo[start..start + len].to_vec(),
        hi: b.hi[start..start + len].to_vec(),
    }
}
