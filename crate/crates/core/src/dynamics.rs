//! Planar half-car with heave and pitch, driven by the terrain under each
//! axle, plus a first-order lag from commanded to realized forward speed.
//!
//! Suspension displacements are measured from static equilibrium, so gravity
//! never enters the equations of motion; it only shows up as the constant
//! offset of the simulated IMU channel.
//!
//! The default Table-style parameters are heavily overdamped
//! (`c / k ≈ 4 s`). The pitch mode has a fast eigenvalue near -1340 1/s,
//! which is why [`advance`] splits a control period into RK4 sub-steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terrain::TerrainProfile;
use crate::GRAVITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("pitch {0} rad outside (-pi/2, pi/2)")]
    PitchOutOfRange(f64),
    #[error("invalid vehicle parameter: {0}")]
    InvalidParams(String),
    #[error("time step must be > 0, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Sprung mass (kg).
    pub m: f64,
    /// Pitch moment of inertia (kg·m²).
    pub inertia: f64,
    pub k1: f64,
    pub k2: f64,
    pub c1: f64,
    pub c2: f64,
    /// CG to front axle (m).
    pub l1: f64,
    /// CG to rear axle (m).
    pub l2: f64,
    /// Velocity lag time constant (s).
    pub tau: f64,
    /// Upper bound on the commanded velocity (m/s).
    pub u_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1.391,
            inertia: 0.001897,
            k1: 19.6,
            k2: 19.6,
            c1: 77.6,
            c2: 77.6,
            l1: 0.128,
            l2: 0.128,
            tau: 0.3,
            u_max: 2.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("m", self.m),
            ("inertia", self.inertia),
            ("k1", self.k1),
            ("k2", self.k2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("tau", self.tau),
            ("u_max", self.u_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn clamp_command(&self, u: f64) -> f64 {
        u.clamp(0.0, self.u_max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub x_dot: f64,
    pub z: f64,
    pub z_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl VehicleState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn to_array(self) -> [f64; 6] {
        [self.x, self.x_dot, self.z, self.z_dot, self.theta, self.theta_dot]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self { x: a[0], x_dot: a[1], z: a[2], z_dot: a[3], theta: a[4], theta_dot: a[5] }
    }

    fn check(&self) -> Result<(), DynamicsError> {
        if !self.is_finite() {
            return Err(DynamicsError::NonFinite("state"));
        }
        if self.theta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(DynamicsError::PitchOutOfRange(self.theta));
        }
        Ok(())
    }
}

/// Time derivative of every [`VehicleState`] field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateDerivative {
    pub x_dot: f64,
    pub x_ddot: f64,
    pub z_dot: f64,
    pub z_ddot: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

impl StateDerivative {
    fn to_array(self) -> [f64; 6] {
        [self.x_dot, self.x_ddot, self.z_dot, self.z_ddot, self.theta_dot, self.theta_ddot]
    }
}

/// Axle positions along the track and chassis heave at each axle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleKinematics {
    pub x1: f64,
    pub x2: f64,
    pub z1: f64,
    pub z2: f64,
}

/// Front (1) and rear (2) axle coordinates. Longitudinal positions use the
/// projected arm `L cos θ`; heave at each axle uses the vertical arm `L sin θ`
/// with the sign that makes the pitch moment restoring.
pub fn axle_kinematics(state: &VehicleState, params: &VehicleParams) -> AxleKinematics {
    let (s, c) = state.theta.sin_cos();
    AxleKinematics {
        x1: state.x + params.l1 * c,
        x2: state.x - params.l2 * c,
        z1: state.z + params.l1 * s,
        z2: state.z - params.l2 * s,
    }
}

pub fn derivatives(
    state: &VehicleState,
    u_x: f64,
    params: &VehicleParams,
    terrain: &TerrainProfile,
) -> Result<StateDerivative, DynamicsError> {
    state.check()?;
    if !u_x.is_finite() {
        return Err(DynamicsError::NonFinite("command"));
    }
    let axles = axle_kinematics(state, params);
    let cos_t = state.theta.cos();

    // wheels follow the ground: z_h = g(x_i), ż_h = g'(x_i)·ẋ
    let zh1 = terrain.height(axles.x1);
    let zh2 = terrain.height(axles.x2);
    let zh1_dot = terrain.slope(axles.x1) * state.x_dot;
    let zh2_dot = terrain.slope(axles.x2) * state.x_dot;

    let z1_dot = state.z_dot + params.l1 * cos_t * state.theta_dot;
    let z2_dot = state.z_dot - params.l2 * cos_t * state.theta_dot;

    let f1 = params.k1 * (axles.z1 - zh1) + params.c1 * (z1_dot - zh1_dot);
    let f2 = params.k2 * (axles.z2 - zh2) + params.c2 * (z2_dot - zh2_dot);

    let d = StateDerivative {
        x_dot: state.x_dot,
        x_ddot: (u_x - state.x_dot) / params.tau,
        z_dot: state.z_dot,
        z_ddot: (-f1 - f2) / params.m,
        theta_dot: state.theta_dot,
        theta_ddot: (-f1 * params.l1 + f2 * params.l2) / params.inertia,
    };
    if d.to_array().iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(DynamicsError::NonFinite("derivative"))
    }
}

/// One classical RK4 step of size `dt` with the command held constant.
pub fn step_rk4(
    state: &VehicleState,
    u_x: f64,
    params: &VehicleParams,
    terrain: &TerrainProfile,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let y0 = state.to_array();
    let offset = |k: &[f64; 6], h: f64| {
        let mut y = y0;
        for (yi, ki) in y.iter_mut().zip(k) {
            *yi += h * ki;
        }
        VehicleState::from_array(y)
    };
    let k1 = derivatives(state, u_x, params, terrain)?.to_array();
    let k2 = derivatives(&offset(&k1, dt / 2.0), u_x, params, terrain)?.to_array();
    let k3 = derivatives(&offset(&k2, dt / 2.0), u_x, params, terrain)?.to_array();
    let k4 = derivatives(&offset(&k3, dt), u_x, params, terrain)?.to_array();
    let mut y = y0;
    for i in 0..6 {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = VehicleState::from_array(y);
    next.check()?;
    Ok(next)
}

/// Advances one control period of length `dt` using `substeps` equal RK4
/// steps under a zero-order hold on the command.
pub fn advance(
    state: &VehicleState,
    u_x: f64,
    params: &VehicleParams,
    terrain: &TerrainProfile,
    dt: f64,
    substeps: usize,
) -> Result<VehicleState, DynamicsError> {
    let n = substeps.max(1);
    let h = dt / n as f64;
    let mut s = *state;
    for _ in 0..n {
        s = step_rk4(&s, u_x, params, terrain, h)?;
    }
    Ok(s)
}

/// Simulated IMU vertical channel: model heave acceleration plus gravity.
pub fn measured_vertical_acceleration(
    state: &VehicleState,
    u_x: f64,
    params: &VehicleParams,
    terrain: &TerrainProfile,
) -> Result<f64, DynamicsError> {
    Ok(derivatives(state, u_x, params, terrain)?.z_ddot + GRAVITY)
}

/// Kinetic plus spring energy of the body relative to flat ground.
pub fn mechanical_energy(state: &VehicleState, params: &VehicleParams) -> f64 {
    let a = axle_kinematics(state, params);
    0.5 * params.m * state.z_dot * state.z_dot
        + 0.5 * params.inertia * state.theta_dot * state.theta_dot
        + 0.5 * params.k1 * a.z1 * a.z1
        + 0.5 * params.k2 * a.z2 * a.z2
}

/// Empirical convergence order of [`step_rk4`] from Richardson differences of
/// runs with `n`, `2n` and `4n` steps over `duration`.
pub fn observed_order(
    s0: &VehicleState,
    u: f64,
    params: &VehicleParams,
    terrain: &TerrainProfile,
    duration: f64,
    n: usize,
) -> Result<f64, DynamicsError> {
    let run = |steps: usize| -> Result<[f64; 6], DynamicsError> {
        let h = duration / steps as f64;
        let mut s = *s0;
        for _ in 0..steps {
            s = step_rk4(&s, u, params, terrain, h)?;
        }
        Ok([s.x, s.x_dot, s.z, s.z_dot, s.theta, s.theta_dot])
    };
    let (a, b, c) = (run(n)?, run(2 * n)?, run(4 * n)?);
    let dist = |p: &[f64; 6], q: &[f64; 6]| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok((dist(&a, &b) / dist(&b, &c)).log2())
}
