//! Terrain as a sum of Gaussian bumps along a single track line.
//!
//! Both axles ride the same profile, so a bump is crossed first by the
//! front wheel and then by the rear wheel one wheelbase later.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Peak height of every generated bump, in meters.
pub const DEFAULT_BUMP_HEIGHT: f64 = 0.008;

#[derive(Debug, Error, PartialEq)]
pub enum TerrainError {
    #[error("infeasible track spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid bump: {0}")]
    InvalidBump(String),
}

/// One Gaussian bump: `height * exp(-(x - center)^2 / (2 spread^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    #[serde(rename = "H")]
    pub height: f64,
    #[serde(rename = "mu")]
    pub center: f64,
    #[serde(rename = "sigma")]
    pub spread: f64,
}

impl Bump {
    pub fn new(height: f64, center: f64, spread: f64) -> Result<Self, TerrainError> {
        if !(height > 0.0 && height.is_finite()) {
            return Err(TerrainError::InvalidBump(format!("height must be > 0, got {height}")));
        }
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(TerrainError::InvalidBump(format!("spread must be > 0, got {spread}")));
        }
        if !center.is_finite() {
            return Err(TerrainError::InvalidBump("center must be finite".into()));
        }
        Ok(Self { height, center, spread })
    }

    #[inline]
    fn envelope(&self, x: f64) -> f64 {
        let d = x - self.center;
        (-(d * d) / (2.0 * self.spread * self.spread)).exp()
    }

    #[inline]
    pub fn height_at(&self, x: f64) -> f64 {
        self.height * self.envelope(x)
    }

    #[inline]
    pub fn slope_at(&self, x: f64) -> f64 {
        -self.height * (x - self.center) / (self.spread * self.spread) * self.envelope(x)
    }
}

/// Ordered list of bumps plus the track length. An empty list is flat ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainProfile {
    pub bumps: Vec<Bump>,
    pub track_length: f64,
}

impl TerrainProfile {
    pub fn flat(track_length: f64) -> Self {
        Self { bumps: Vec::new(), track_length }
    }

    /// Builds a profile, sorting bumps by center and checking that every
    /// center lies on the track.
    pub fn new(mut bumps: Vec<Bump>, track_length: f64) -> Result<Self, TerrainError> {
        if !(track_length > 0.0 && track_length.is_finite()) {
            return Err(TerrainError::InvalidBump(format!(
                "track length must be > 0, got {track_length}"
            )));
        }
        for b in &bumps {
            Bump::new(b.height, b.center, b.spread)?;
            if b.center < 0.0 || b.center > track_length {
                return Err(TerrainError::InvalidBump(format!(
                    "center {} outside [0, {track_length}]",
                    b.center
                )));
            }
        }
        bumps.sort_by(|a, b| a.center.total_cmp(&b.center));
        Ok(Self { bumps, track_length })
    }

    pub fn single_bump(track_length: f64, center: f64, spread: f64) -> Result<Self, TerrainError> {
        Self::new(vec![Bump::new(DEFAULT_BUMP_HEIGHT, center, spread)?], track_length)
    }

    /// g(x)
    pub fn height(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.height_at(x)).sum()
    }

    /// g'(x), analytic.
    pub fn slope(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.slope_at(x)).sum()
    }

    pub fn max_bump_height(&self) -> f64 {
        self.bumps.iter().map(|b| b.height).fold(0.0, f64::max)
    }
}

/// Parameters for randomized track generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSpec {
    pub track_length: f64,
    pub n_bumps: usize,
    pub sigma_range: (f64, f64),
    pub min_spacing: f64,
    pub placement_range: (f64, f64),
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self {
            track_length: 10.0,
            n_bumps: 3,
            sigma_range: (0.03, 0.08),
            min_spacing: 1.0,
            placement_range: (2.0, 9.0),
        }
    }
}

impl TrackSpec {
    pub fn validate(&self) -> Result<(), TerrainError> {
        let (lo, hi) = self.placement_range;
        let (s_lo, s_hi) = self.sigma_range;
        if !(self.track_length > 0.0 && self.track_length.is_finite()) {
            return Err(TerrainError::InfeasibleSpec("track_length must be > 0".into()));
        }
        if !(s_lo > 0.0 && s_lo <= s_hi && s_hi.is_finite()) {
            return Err(TerrainError::InfeasibleSpec(format!(
                "sigma_range must satisfy 0 < lo <= hi, got ({s_lo}, {s_hi})"
            )));
        }
        if !(self.min_spacing >= 0.0 && self.min_spacing.is_finite()) {
            return Err(TerrainError::InfeasibleSpec("min_spacing must be >= 0".into()));
        }
        if self.n_bumps == 0 {
            return Ok(());
        }
        if !(lo >= 0.0 && lo <= hi && hi <= self.track_length) {
            return Err(TerrainError::InfeasibleSpec(format!(
                "placement_range ({lo}, {hi}) must lie within [0, {}]",
                self.track_length
            )));
        }
        let needed = self.min_spacing * (self.n_bumps - 1) as f64;
        if needed > hi - lo {
            return Err(TerrainError::InfeasibleSpec(format!(
                "{} bumps at spacing {} need {needed} m but placement window is {} m",
                self.n_bumps,
                self.min_spacing,
                hi - lo
            )));
        }
        Ok(())
    }
}

/// Generates a track deterministically from `seed`.
///
/// Centers are drawn by sampling `n` sorted points in the window shrunk by the
/// total mandatory spacing, then re-inserting the spacing. This is uniform over
/// the feasible configurations and never rejects.
pub fn random_track(seed: u64, spec: &TrackSpec) -> Result<TerrainProfile, TerrainError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_bumps;
    let (lo, hi) = spec.placement_range;
    let slack = (hi - lo) - spec.min_spacing * n.saturating_sub(1) as f64;
    let mut offsets: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * slack).collect();
    offsets.sort_by(f64::total_cmp);
    let (s_lo, s_hi) = spec.sigma_range;
    let bumps = offsets
        .iter()
        .enumerate()
        .map(|(j, off)| {
            let spread = if s_hi > s_lo { rng.gen_range(s_lo..=s_hi) } else { s_lo };
            let center = (lo + off + spec.min_spacing * j as f64).min(hi);
            Bump { height: DEFAULT_BUMP_HEIGHT, center, spread }
        })
        .collect();
    TerrainProfile::new(bumps, spec.track_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_bump() -> TerrainProfile {
        TerrainProfile::single_bump(10.0, 5.0, 0.05).unwrap()
    }

    #[test]
    fn peak_height_is_bump_height() {
        assert_eq!(one_bump().height(5.0), 0.008);
    }

    #[test]
    fn height_at_three_sigma() {
        assert_abs_diff_eq!(one_bump().height(5.15), 0.008 * (-4.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(one_bump().height(5.15), 8.8872e-5, epsilon = 1e-8);
    }

    #[test]
    fn flat_profile_is_zero() {
        let flat = TerrainProfile::flat(10.0);
        for x in [-3.0, 0.0, 1.5, 1e6] {
            assert_eq!(flat.height(x), 0.0);
            assert_eq!(flat.slope(x), 0.0);
        }
    }

    #[test]
    fn slope_zero_at_center_and_known_at_one_sigma() {
        let t = one_bump();
        assert_eq!(t.slope(5.0), 0.0);
        assert_abs_diff_eq!(t.slope(5.05), -(0.008 / 0.05) * (-0.5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(t.slope(5.05), -0.0970449, epsilon = 1e-7);
    }

    #[test]
    fn same_seed_same_track() {
        let spec = TrackSpec::default();
        assert_eq!(random_track(7, &spec).unwrap(), random_track(7, &spec).unwrap());
        assert_ne!(random_track(7, &spec).unwrap(), random_track(8, &spec).unwrap());
    }

    #[test]
    fn zero_bumps_is_flat() {
        let spec = TrackSpec { n_bumps: 0, ..TrackSpec::default() };
        assert!(random_track(1, &spec).unwrap().bumps.is_empty());
    }

    #[test]
    fn infeasible_spacing_rejected() {
        let spec = TrackSpec { n_bumps: 9, ..TrackSpec::default() };
        assert!(matches!(random_track(1, &spec), Err(TerrainError::InfeasibleSpec(_))));
    }

    #[test]
    fn default_spec_invariants_over_1000_seeds() {
        let spec = TrackSpec::default();
        for seed in 0..1000 {
            let t = random_track(seed, &spec).unwrap();
            assert_eq!(t.bumps.len(), 3);
            for w in t.bumps.windows(2) {
                assert!(w[1].center - w[0].center >= 1.0 - 1e-12);
            }
            for b in &t.bumps {
                assert!((2.0..=9.0).contains(&b.center));
                assert!((0.03..=0.08).contains(&b.spread));
                assert_eq!(b.height, DEFAULT_BUMP_HEIGHT);
            }
        }
    }

    #[test]
    fn json_field_names() {
        let json = serde_json::to_value(one_bump()).unwrap();
        assert_eq!(json["bumps"][0]["H"], 0.008);
        assert_eq!(json["bumps"][0]["mu"], 5.0);
        assert_eq!(json["track_length"], 10.0);
    }

    proptest! {
        #[test]
        fn slope_matches_central_difference(seed in 0u64..500, x in 0.0f64..10.0) {
            let t = random_track(seed, &TrackSpec::default()).unwrap();
            let h = 1e-6;
            let fd = (t.height(x + h) - t.height(x - h)) / (2.0 * h);
            prop_assert!((fd - t.slope(x)).abs() < 1e-6);
        }

        #[test]
        fn height_bounded(seed in 0u64..500, x in -5.0f64..15.0) {
            let t = random_track(seed, &TrackSpec::default()).unwrap();
            let total: f64 = t.bumps.iter().map(|b| b.height).sum();
            let g = t.height(x);
            prop_assert!(g >= 0.0 && g <= total);
        }
    }
}
