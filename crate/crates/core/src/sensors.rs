//! Synthetic observation channels: encoder speed, IMU vertical acceleration
//! and the camera's bump-preview ratio.
//!
//! The preview ratio stands in for the fraction of image pixels classified as
//! bump. Each bump ahead of the front axle contributes in inverse proportion
//! to its distance, saturating once it is closer than `lookahead_min`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{axle_kinematics, measured_vertical_acceleration, DynamicsError, VehicleParams, VehicleState};
use crate::terrain::TerrainProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSpec {
    /// Farthest distance at which a bump is visible (m).
    pub lookahead_max: f64,
    /// Distance inside which a bump fills its maximal share of the image (m).
    pub lookahead_min: f64,
    pub gain: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self { lookahead_max: 2.0, lookahead_min: 0.2, gain: 0.3 }
    }
}

impl CameraSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lookahead_min > 0.0 && self.lookahead_min < self.lookahead_max && self.lookahead_max.is_finite()) {
            return Err(format!(
                "camera needs 0 < lookahead_min < lookahead_max, got {} and {}",
                self.lookahead_min, self.lookahead_max
            ));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(format!("camera gain must be > 0, got {}", self.gain));
        }
        Ok(())
    }
}

/// Standard deviations of additive Gaussian noise. Zero disables a channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorNoise {
    pub velocity_std: f64,
    pub acceleration_std: f64,
}

impl SensorNoise {
    pub fn is_off(&self) -> bool {
        self.velocity_std == 0.0 && self.acceleration_std == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x_dot: f64,
    pub z_ddot_meas: f64,
    pub p: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; 3] {
        [self.x_dot, self.z_ddot_meas, self.p]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Preview ratio in `[0, 1]` seen from the front axle.
pub fn preview(state: &VehicleState, terrain: &TerrainProfile, cam: &CameraSpec, params: &VehicleParams) -> f64 {
    let h_max = terrain.max_bump_height();
    if h_max <= 0.0 {
        return 0.0;
    }
    let x1 = axle_kinematics(state, params).x1;
    let total: f64 = terrain
        .bumps
        .iter()
        .filter_map(|b| {
            let d = b.center - x1;
            (d > 0.0 && d <= cam.lookahead_max)
                .then(|| cam.gain * (b.height / h_max) * (cam.lookahead_min / d.max(cam.lookahead_min)))
        })
        .sum();
    total.min(1.0)
}

/// Assembles the observation for the current state. `action` is the command
/// in force, which sets the velocity-lag term inside the IMU reading.
pub fn observe<R: Rng + ?Sized>(
    state: &VehicleState,
    action: f64,
    terrain: &TerrainProfile,
    cam: &CameraSpec,
    params: &VehicleParams,
    noise: &SensorNoise,
    rng: &mut R,
) -> Result<Observation, DynamicsError> {
    let mut obs = Observation {
        x_dot: state.x_dot,
        z_ddot_meas: measured_vertical_acceleration(state, action, params, terrain)?,
        p: preview(state, terrain, cam, params),
    };
    if noise.velocity_std > 0.0 {
        obs.x_dot += sample(noise.velocity_std, rng);
    }
    if noise.acceleration_std > 0.0 {
        obs.z_ddot_meas += sample(noise.acceleration_std, rng);
    }
    Ok(obs)
}

fn sample<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    Normal::new(0.0, std).map(|n| n.sample(rng)).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::Bump;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Places the front axle `d` meters before a single bump at x = 5.
    fn state_at_distance(d: f64) -> VehicleState {
        VehicleState { x: 5.0 - d - VehicleParams::default().l1, ..Default::default() }
    }

    fn one_bump() -> TerrainProfile {
        TerrainProfile::single_bump(10.0, 5.0, 0.05).unwrap()
    }

    #[test]
    fn nothing_visible_gives_zero() {
        let p = VehicleParams::default();
        let cam = CameraSpec::default();
        assert_eq!(preview(&state_at_distance(3.0), &one_bump(), &cam, &p), 0.0);
        assert_eq!(preview(&state_at_distance(-0.1), &one_bump(), &cam, &p), 0.0);
        assert_eq!(preview(&state_at_distance(1.0), &TerrainProfile::flat(10.0), &cam, &p), 0.0);
    }

    #[test]
    fn saturated_distance_gives_gain() {
        let p = VehicleParams::default();
        let cam = CameraSpec::default();
        assert_abs_diff_eq!(preview(&state_at_distance(0.2), &one_bump(), &cam, &p), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn inverse_distance_law() {
        let p = VehicleParams::default();
        let cam = CameraSpec::default();
        let far = preview(&state_at_distance(0.4), &one_bump(), &cam, &p);
        let near = preview(&state_at_distance(0.2), &one_bump(), &cam, &p);
        assert_abs_diff_eq!(far, 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(near, 2.0 * far, epsilon = 1e-12);
    }

    #[test]
    fn preview_monotone_while_approaching() {
        let p = VehicleParams::default();
        let cam = CameraSpec::default();
        let mut last = 0.0;
        let mut d = 2.0;
        while d > 0.001 {
            let v = preview(&state_at_distance(d), &one_bump(), &cam, &p);
            assert!(v >= last);
            if d > cam.lookahead_min + 1e-9 {
                assert!(v > last);
            }
            last = v;
            d -= 0.01;
        }
    }

    #[test]
    fn preview_clamped_to_one() {
        let p = VehicleParams::default();
        let cam = CameraSpec { gain: 0.9, ..Default::default() };
        let bumps = (0..3).map(|j| Bump::new(0.008, 5.0 + 0.01 * j as f64, 0.05).unwrap()).collect();
        let t = TerrainProfile::new(bumps, 10.0).unwrap();
        assert_eq!(preview(&state_at_distance(0.1), &t, &cam, &p), 1.0);
    }

    #[test]
    fn noiseless_observation_is_pass_through() {
        let p = VehicleParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let flat = TerrainProfile::flat(10.0);
        let o = observe(&VehicleState::at_rest(), 0.0, &flat, &CameraSpec::default(), &p, &SensorNoise::default(), &mut rng)
            .unwrap();
        assert_eq!(o, Observation { x_dot: 0.0, z_ddot_meas: 9.8, p: 0.0 });

        let s = VehicleState { x: 3.9, x_dot: 0.7, z: 0.002, z_dot: -0.01, theta: 0.01, theta_dot: 0.1 };
        let o = observe(&s, 0.9, &one_bump(), &CameraSpec::default(), &p, &SensorNoise::default(), &mut rng).unwrap();
        assert_eq!(o.x_dot, 0.7);
        assert_eq!(o.z_ddot_meas, measured_vertical_acceleration(&s, 0.9, &p, &one_bump()).unwrap());
        assert_eq!(o.p, preview(&s, &one_bump(), &CameraSpec::default(), &p));
    }

    #[test]
    fn acceleration_noise_is_zero_mean() {
        let p = VehicleParams::default();
        let noise = SensorNoise { velocity_std: 0.0, acceleration_std: 0.05 };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = VehicleState { x: 4.5, x_dot: 1.0, ..Default::default() };
        let t = one_bump();
        let clean = observe(&s, 1.0, &t, &CameraSpec::default(), &p, &SensorNoise::default(), &mut rng).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let o = observe(&s, 1.0, &t, &CameraSpec::default(), &p, &noise, &mut rng).unwrap();
            assert_eq!(o.p, clean.p);
            assert_eq!(o.x_dot, clean.x_dot);
            sum += o.z_ddot_meas;
        }
        let mean = sum / n as f64;
        assert!((mean - clean.z_ddot_meas).abs() < 3.0 * 0.05 / (n as f64).sqrt());
    }
}
