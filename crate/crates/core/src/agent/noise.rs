use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Ornstein–Uhlenbeck exploration noise whose variance decays
/// multiplicatively after every sample, down to a floor.
///
/// One draw advances `x ← x − θ·x·Δ + √variance·√Δ·ξ` with `ξ ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseState {
    pub value: f64,
    pub variance: f64,
    pub initial_variance: f64,
    pub decay_rate: f64,
    pub variance_floor: f64,
    pub mean_reversion: f64,
    pub sample_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub initial_variance: f64,
    pub decay_rate: f64,
    pub variance_floor: f64,
    pub mean_reversion: f64,
    /// Δ in the update; the control period by default, so exploration is
    /// correlated across steps. 1 gives the per-step discrete form.
    pub sample_time: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { initial_variance: 0.8, decay_rate: 1e-4, variance_floor: 0.01, mean_reversion: 0.15, sample_time: 1.0 / 120.0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.initial_variance >= 0.0 && self.variance_floor >= 0.0 && self.variance_floor <= self.initial_variance) {
            return Err("noise needs 0 <= variance_floor <= initial_variance".into());
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return Err(format!("noise decay_rate must lie in [0, 1), got {}", self.decay_rate));
        }
        if !(self.mean_reversion >= 0.0 && self.sample_time > 0.0) {
            return Err("noise needs mean_reversion >= 0 and sample_time > 0".into());
        }
        Ok(())
    }
}

impl NoiseState {
    pub fn new(cfg: &NoiseConfig) -> Self {
        Self {
            value: 0.0,
            variance: cfg.initial_variance,
            initial_variance: cfg.initial_variance,
            decay_rate: cfg.decay_rate,
            variance_floor: cfg.variance_floor,
            mean_reversion: cfg.mean_reversion,
            sample_time: cfg.sample_time,
        }
    }

    /// Advances the process and returns the new value. Variance decays afterwards.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        let dt = self.sample_time;
        self.value += -self.mean_reversion * self.value * dt + self.variance.sqrt() * dt.sqrt() * xi;
        self.decay();
        self.value
    }

    pub fn decay(&mut self) {
        self.variance = (self.variance * (1.0 - self.decay_rate)).max(self.variance_floor.min(self.variance));
    }

    pub fn reset_value(&mut self) {
        self.value = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_decay() {
        let cfg = NoiseConfig { variance_floor: 0.0, ..Default::default() };
        let mut n = NoiseState::new(&cfg);
        for _ in 0..10_000 {
            n.decay();
        }
        let expected = 0.8 * (1.0f64 - 1e-4).powi(10_000);
        assert!((n.variance - expected).abs() < 1e-12);
        assert!((n.variance - 0.8 * (-1.0f64).exp()).abs() < 1e-4);
        assert!((n.variance - 0.2943).abs() < 1e-4);
    }

    #[test]
    fn variance_never_increases_nor_drops_below_floor() {
        let cfg = NoiseConfig { decay_rate: 0.01, ..Default::default() };
        let mut n = NoiseState::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut last = n.variance;
        for _ in 0..2000 {
            n.sample(&mut rng);
            assert!(n.variance <= last && n.variance >= 0.01);
            last = n.variance;
        }
        assert_eq!(n.variance, 0.01);
    }

    #[test]
    fn zero_variance_is_silent() {
        let cfg = NoiseConfig { initial_variance: 0.0, variance_floor: 0.0, ..Default::default() };
        let mut n = NoiseState::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(n.sample(&mut rng), 0.0);
        }
    }
}
