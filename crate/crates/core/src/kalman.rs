//! Constant-acceleration Kalman filter: prediction, measurement update and
//! the Gaussian pairing cost.
//!
//! The state vector is `[x, vx, ax, y, vy, ay]`, held internally in µm, µm/s
//! and µm/s². The pairing cost of a predicted state against an observed
//! position is the reciprocal of the bivariate normal density of the
//! innovation, evaluated in the log domain so extreme densities neither
//! underflow nor overflow.

use nalgebra::{Matrix2, Matrix2x6, Matrix6, Vector2, Vector6};

use crate::error::{Error, Result};
use crate::units;

/// Clamp bounds for the exponentiated cost.
pub const COST_MIN: f64 = 1e-300;
pub const COST_MAX: f64 = 1e300;

/// Innovation covariances with a condition number beyond this are rejected.
pub const COND_LIMIT: f64 = 1e12;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Which kinematic model drives prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    /// Full constant-acceleration model (the proposed motion model).
    ConstantAcceleration,
    /// Constant-velocity reduction: the acceleration rows and columns of the
    /// transition and process-noise matrices are zeroed, which is equivalent
    /// to the 4-state filter with white-acceleration process noise over the
    /// velocity block.
    ConstantVelocity,
}

/// Filter state: 6-vector and 6×6 covariance in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub s: Vector6<f64>,
    pub p: Matrix6<f64>,
}

impl KalmanState {
    pub fn new(s: Vector6<f64>, p: Matrix6<f64>) -> Self {
        KalmanState { s, p }
    }

    /// Position in µm.
    pub fn position_um(&self) -> Vector2<f64> {
        Vector2::new(self.s[0], self.s[3])
    }

    /// Velocity in mm/s.
    pub fn velocity_mm_s(&self) -> Vector2<f64> {
        Vector2::new(
            units::um_s_to_mm_s(self.s[1]),
            units::um_s_to_mm_s(self.s[4]),
        )
    }

    /// Velocity in internal µm/s.
    pub fn velocity_um_s(&self) -> Vector2<f64> {
        Vector2::new(self.s[1], self.s[4])
    }

    /// Acceleration in mm/s².
    pub fn accel_mm_s2(&self) -> Vector2<f64> {
        Vector2::new(
            units::um_s2_to_mm_s2(self.s[2]),
            units::um_s2_to_mm_s2(self.s[5]),
        )
    }
}

/// Discrete-time motion model: transition, process noise and observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub kind: MotionKind,
    /// Frame interval, s.
    pub dt: f64,
    pub f: Matrix6<f64>,
    pub q: Matrix6<f64>,
    pub h: Matrix2x6<f64>,
    pub r: Matrix2<f64>,
}

impl MotionModel {
    /// Builds a model from interface units (σ_a in mm/s², r_std in µm).
    pub fn new(kind: MotionKind, dt: f64, sigma_a_mm_s2: f64, r_std_um: f64) -> Self {
        let sigma = units::mm_s2_to_um_s2(sigma_a_mm_s2);
        let f = transition_matrix(kind, dt);
        let q = process_noise(kind, dt, sigma);
        let mut h = Matrix2x6::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 3)] = 1.0;
        let r = Matrix2::identity() * (r_std_um * r_std_um);
        MotionModel {
            kind,
            dt,
            f,
            q,
            h,
            r,
        }
    }

    /// Weakly informative covariance for a brand-new track:
    /// diag(r², (v_max/3)², σ_a²) per axis, with the acceleration variance
    /// dropped for the constant-velocity reduction.
    pub fn initial_covariance(&self, v_max_mm_s: f64) -> Matrix6<f64> {
        let r_var = self.r[(0, 0)];
        let v = units::mm_s_to_um_s(v_max_mm_s) / 3.0;
        let a_var = match self.kind {
            MotionKind::ConstantAcceleration => self.q[(2, 2)], // σ_a² in µm²/s⁴
            MotionKind::ConstantVelocity => 0.0,
        };
        Matrix6::from_diagonal(&Vector6::new(r_var, v * v, a_var, r_var, v * v, a_var))
    }
}

fn transition_matrix(kind: MotionKind, dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::zeros();
    let half = 0.5 * dt * dt;
    for base in [0, 3] {
        f[(base, base)] = 1.0;
        f[(base, base + 1)] = dt;
        f[(base + 1, base + 1)] = 1.0;
        match kind {
            MotionKind::ConstantAcceleration => {
                f[(base, base + 2)] = half;
                f[(base + 1, base + 2)] = dt;
                f[(base + 2, base + 2)] = 1.0;
            }
            MotionKind::ConstantVelocity => {}
        }
    }
    f
}

fn process_noise(kind: MotionKind, dt: f64, sigma_um_s2: f64) -> Matrix6<f64> {
    let s2 = sigma_um_s2 * sigma_um_s2;
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d3 * dt;
    let mut q = Matrix6::zeros();
    for base in [0, 3] {
        q[(base, base)] = d4 / 4.0;
        q[(base, base + 1)] = d3 / 2.0;
        q[(base + 1, base)] = d3 / 2.0;
        q[(base + 1, base + 1)] = d2;
        if kind == MotionKind::ConstantAcceleration {
            q[(base, base + 2)] = d2 / 2.0;
            q[(base + 2, base)] = d2 / 2.0;
            q[(base + 1, base + 2)] = dt;
            q[(base + 2, base + 1)] = dt;
            q[(base + 2, base + 2)] = 1.0;
        }
    }
    q * s2
}

/// Time propagation: `s' = F·s`, `P' = F·P·Fᵀ + Q`.
pub fn predict(state: &KalmanState, model: &MotionModel) -> KalmanState {
    let s = model.f * state.s;
    let p = model.f * state.p * model.f.transpose() + model.q;
    KalmanState {
        s,
        p: symmetrize(&p),
    }
}

/// Predicted observation mean and innovation covariance.
pub fn innovation(predicted: &KalmanState, model: &MotionModel) -> (Vector2<f64>, Matrix2<f64>) {
    let mu = model.h * predicted.s;
    let sigma = model.h * predicted.p * model.h.transpose() + model.r;
    (mu, sigma)
}

/// Cholesky factor of a symmetric 2×2 matrix; `None` if not positive
/// definite.
fn chol2(m: &Matrix2<f64>) -> Option<(f64, f64, f64)> {
    let a = m[(0, 0)];
    if a <= 0.0 {
        return None;
    }
    let l11 = a.sqrt();
    let l21 = m[(1, 0)] / l11;
    let rest = m[(1, 1)] - l21 * l21;
    if rest <= 0.0 {
        return None;
    }
    Some((l11, l21, rest.sqrt()))
}

fn check_conditioning(sigma: &Matrix2<f64>) -> Result<()> {
    let a = sigma[(0, 0)];
    let b = sigma[(0, 1)];
    let d = sigma[(1, 1)];
    let mean = 0.5 * (a + d);
    let disc = (0.5 * (a - d)).hypot(b);
    let lo = mean - disc;
    let hi = mean + disc;
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::DegenerateCovariance {
            cond,
            limit: COND_LIMIT,
        });
    }
    Ok(())
}

/// Pairing cost of an observed position against a predicted state:
/// the reciprocal Gaussian density `1 / N(z; µ, Σ)` with `µ = H·s'` and
/// `Σ = H·P'·Hᵀ + R`, clamped to `[COST_MIN, COST_MAX]`.
pub fn pair_cost(predicted: &KalmanState, model: &MotionModel, z_um: Vector2<f64>) -> Result<f64> {
    let (mu, sigma) = innovation(predicted, model);
    check_conditioning(&sigma)?;
    let (l11, l21, l22) = chol2(&sigma).ok_or(Error::DegenerateCovariance {
        cond: f64::INFINITY,
        limit: COND_LIMIT,
    })?;
    // Solve L·w = z − µ, then the quadratic form is ‖w‖².
    let d = z_um - mu;
    let w0 = d.x / l11;
    let w1 = (d.y - l21 * w0) / l22;
    let quad = w0 * w0 + w1 * w1;
    let log_p = -TWO_PI.ln() - (l11.ln() + l22.ln()) - 0.5 * quad;
    Ok((-log_p).exp().clamp(COST_MIN, COST_MAX))
}

/// Measurement update with the Joseph-form covariance recursion.
pub fn update(
    predicted: &KalmanState,
    model: &MotionModel,
    z_um: Vector2<f64>,
) -> Result<KalmanState> {
    let (mu, sigma) = innovation(predicted, model);
    check_conditioning(&sigma)?;
    let sigma_inv = sigma.try_inverse().ok_or(Error::DegenerateCovariance {
        cond: f64::INFINITY,
        limit: COND_LIMIT,
    })?;
    let gain = predicted.p * model.h.transpose() * sigma_inv;
    let s = predicted.s + gain * (z_um - mu);
    let ikh = Matrix6::identity() - gain * model.h;
    let p = ikh * predicted.p * ikh.transpose() + gain * model.r * gain.transpose();
    Ok(KalmanState {
        s,
        p: symmetrize(&p),
    })
}

fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}
