use super::ModelSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

/// Quadratic Lyapunov certificate `𝒱(z) = √(zᵀ P z)` with its constants.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSpec {
    #[serde(serialize_with = "ser_matrix")]
    pub metric: DMatrix<f64>,
    /// `ℓ_𝒱 = √λ_min(P)`.
    pub ell_v: f64,
    /// `L_𝒱 = √λ_max(P)`.
    pub l_v: f64,
    /// Gradient bound `λ_max / √λ_min`.
    pub m_v: f64,
    /// Hessian bound. Zero in one dimension; in two dimensions the Hessian
    /// blows up like `1/‖z‖`, so this is the sup over the unit sphere only.
    pub m_v_prime: f64,
    /// True when `m_v_prime` is a unit-sphere probe value rather than a
    /// global bound.
    pub m_v_prime_probe_only: bool,
    /// Contraction rate `𝔠_𝒱`.
    pub c_v: f64,
    /// Continuous-time decay rate `r` with `AᵀP + PA ≼ -2rP` for every
    /// vertex Jacobian; `c_v = r/2`.
    pub decay_rate: f64,
    /// Largest ε in (0, 1] for which the contraction inequality with `c_v`
    /// holds at every vertex.
    pub max_epsilon: f64,
    /// Largest ε in (0, 1] for which the squared chain
    /// `𝒱(ψ)² ≤ (1 - ε r) 𝒱(z)²` holds at every vertex.
    pub chain_max_epsilon: f64,
    /// `‖AᵀP + PA + I‖_op` when the metric came from a single CARE solve.
    pub care_residual: Option<f64>,
}

fn ser_matrix<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    rows.serialize(s)
}

impl LyapunovSpec {
    pub fn value(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += z[i] * self.metric[(i, j)] * z[j];
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn lambda_max(&self) -> f64 {
        self.l_v * self.l_v
    }

    pub fn lambda_min(&self) -> f64 {
        self.ell_v * self.ell_v
    }
}

fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Solve `AᵀX + XA = -Q` for Hurwitz `A` by a Cayley transform followed by
/// Smith's doubling iteration on the resulting Stein equation.
fn lyapunov_doubling(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let shift = (a.norm() / (d as f64).sqrt()).max(1e-12);
    let n = (&eye * shift - a)
        .try_inverse()
        .ok_or_else(|| Error::ModelFault("singular Cayley shift".into()))?;
    let mut c = (&eye * shift + a) * &n;
    let mut x = n.transpose() * q * &n * (2.0 * shift);
    for _ in 0..64 {
        let incr = c.transpose() * &x * &c;
        let done = incr.norm() <= 1e-17 * x.norm();
        x += incr;
        if done {
            break;
        }
        c = &c * &c;
    }
    Ok(x)
}

/// Certificate for the linear drift `μ̄(x, a) = A x + B a` from the CARE
/// `AᵀP + PA = -I`.
pub fn solve_care(a: &DMatrix<f64>) -> Result<LyapunovSpec> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return invalid("CARE needs a nonempty square matrix");
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelFault("non-finite drift matrix".into()));
    }
    let alpha = spectral_abscissa(a);
    if !(alpha < 0.0) {
        return Err(Error::NotHurwitz {
            spectral_abscissa: alpha,
        });
    }
    let d = a.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut p = lyapunov_doubling(a, &eye)?;
    let residual = |p: &DMatrix<f64>| a.transpose() * p + p * a + &eye;
    // A couple of refinement passes on the residual equation.
    for _ in 0..3 {
        let r = residual(&p);
        if op_norm(&r) <= 1e-14 * (1.0 + op_norm(&p)) {
            break;
        }
        p += lyapunov_doubling(a, &r)?;
    }
    p = (&p + p.transpose()) * 0.5;
    let res = op_norm(&residual(&p));
    let mut spec = lyapunov_from_vertices(&p, std::slice::from_ref(a))?;
    spec.care_residual = Some(res);
    Ok(spec)
}

/// Certificate for the metric `P` against every drift Jacobian in the convex
/// hull of `vertices`.
pub fn lyapunov_from_vertices(p: &DMatrix<f64>, vertices: &[DMatrix<f64>]) -> Result<LyapunovSpec> {
    let d = p.nrows();
    if vertices.is_empty() {
        return invalid("need at least one vertex Jacobian");
    }
    let eig = p.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    if !(lmin > 0.0) {
        return invalid("metric matrix must be positive definite");
    }
    let chol = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::ModelFault("metric not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .expect("cholesky factor is invertible");
    let mut rate = f64::INFINITY;
    for a in vertices {
        let s = -(a.transpose() * p + p * a);
        let m = &l_inv * s * l_inv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        rate = rate.min(0.5 * m.symmetric_eigenvalues().min());
    }
    if !(rate > 0.0) {
        return Err(Error::NotHurwitz {
            spectral_abscissa: -rate,
        });
    }
    let c_v = 0.5 * rate;
    let eye = DMatrix::<f64>::identity(d, d);
    let lt = l.transpose();
    let lt_inv = l_inv.transpose();
    // ‖Lᵀ(I + εA)L⁻ᵀ‖ is the 𝒱-operator norm of the one-step map.
    let step_norm = |eps: f64| {
        vertices
            .iter()
            .map(|a| op_norm(&(&lt * (&eye + a * eps) * &lt_inv)))
            .fold(0.0, f64::max)
    };
    let max_epsilon = largest_feasible(|e| step_norm(e) <= 1.0 - e * c_v + 1e-15);
    let chain_max_epsilon = largest_feasible(|e| step_norm(e).powi(2) <= 1.0 - e * rate + 1e-15);

    let (m_v_prime, probe_only) = if d == 1 {
        (0.0, false)
    } else {
        (unit_sphere_hessian(p), true)
    };
    Ok(LyapunovSpec {
        metric: p.clone(),
        ell_v: lmin.sqrt(),
        l_v: lmax.sqrt(),
        m_v: lmax / lmin.sqrt(),
        m_v_prime,
        m_v_prime_probe_only: probe_only,
        c_v,
        decay_rate: rate,
        max_epsilon,
        chain_max_epsilon,
        care_residual: None,
    })
}

/// Largest ε in (0, 1] with `ok(ε)`, for predicates whose feasible set is an
/// interval starting at 0 (both uses are sublevel sets of convex functions).
fn largest_feasible(ok: impl Fn(f64) -> bool) -> f64 {
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn unit_sphere_hessian(p: &DMatrix<f64>) -> f64 {
    let d = p.nrows();
    let mut worst: f64 = 0.0;
    let samples = 4096;
    for k in 0..samples {
        let t = std::f64::consts::TAU * k as f64 / samples as f64;
        let mut z = DMatrix::<f64>::zeros(d, 1);
        z[0] = t.cos();
        z[1] = t.sin();
        let pz = p * &z;
        let v = (z.transpose() * &pz)[0].sqrt();
        let h = p / v - &pz * pz.transpose() / (v * v * v);
        worst = worst.max(op_norm(&h));
    }
    worst
}

/// One test point of the contraction inequality.
#[derive(Debug, Clone)]
pub struct ContractionProbe {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub a: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub probes: usize,
    pub pass_fraction: f64,
    pub violations: Vec<Violation>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `𝒱(x + εμ̄(x,a) - x' - εμ̄(x',a)) ≤ (1 - ε𝔠_𝒱) 𝒱(x - x')` on every probe.
pub fn verify_contraction(
    model: &ModelSpec,
    lyap: &LyapunovSpec,
    probes: &[ContractionProbe],
) -> ContractionReport {
    let d = model.state_dim();
    let mut mu = vec![0.0; d];
    let mut mu_p = vec![0.0; d];
    let mut psi = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut violations = Vec::new();
    for (index, pr) in probes.iter().enumerate() {
        model
            .family
            .drift_bar_into(&pr.theta, &pr.x, &pr.a, &mut mu);
        model
            .family
            .drift_bar_into(&pr.theta, &pr.x_prime, &pr.a, &mut mu_p);
        for i in 0..d {
            z[i] = pr.x[i] - pr.x_prime[i];
            psi[i] = z[i] + pr.epsilon * (mu[i] - mu_p[i]);
        }
        let lhs = lyap.value(&psi);
        let rhs = (1.0 - pr.epsilon * lyap.c_v) * lyap.value(&z);
        if !(lhs <= rhs + 1e-12 * rhs.max(1.0)) {
            violations.push(Violation { index, lhs, rhs });
        }
    }
    let n = probes.len();
    ContractionReport {
        probes: n,
        pass_fraction: if n == 0 {
            1.0
        } else {
            (n - violations.len()) as f64 / n as f64
        },
        violations,
    }
}

/// Random probes: θ uniform on the parameter box, `x` uniform on
/// `[-radius, radius]^d`, `x' = x + s u` with log-uniform separation `s`,
/// actions uniform on the action box and ε uniform on `(0, ε_max]`.
pub fn generate_probes(
    model: &ModelSpec,
    epsilon_max: f64,
    count: usize,
    radius: f64,
    seed: u64,
) -> Vec<ContractionProbe> {
    let mut rng = stream_rng(seed, Stream::Probes);
    let d = model.state_dim();
    let uniform_in = |rng: &mut rand_chacha::ChaCha8Rng, lo: &[f64], hi: &[f64]| -> Vec<f64> {
        lo.iter()
            .zip(hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    };
    (0..count)
        .map(|_| {
            let theta = uniform_in(&mut rng, &model.theta_bounds.lo, &model.theta_bounds.hi);
            let x: Vec<f64> = (0..d)
                .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let mut u: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let un = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let s = radius * 10f64.powf(-6.0 * rng.random::<f64>());
            u.iter_mut().for_each(|v| *v *= s / un);
            let x_prime = x.iter().zip(&u).map(|(a, b)| a + b).collect();
            let a = uniform_in(&mut rng, &model.action_box.lo, &model.action_box.hi);
            let epsilon = epsilon_max * (1.0 - rng.random::<f64>());
            ContractionProbe {
                theta,
                x,
                x_prime,
                a,
                epsilon,
            }
        })
        .collect()
}
