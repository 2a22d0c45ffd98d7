use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clock::deserialize_clock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    #[serde(deserialize_with = "deserialize_clock")]
    pub t: f64,
    pub multiplier: f64,
}

/// Global load multiplier over simulated time: linear between breakpoints,
/// flat beyond the ends, optionally perturbed by seeded Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LoadProfile {
    pub points: Vec<ProfilePoint>,
    /// Relative standard deviation of per-step noise; 0 disables it.
    #[serde(default)]
    pub noise: f64,
}

impl LoadProfile {
    pub fn flat() -> Self {
        LoadProfile::default()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.points.windows(2).any(|w| w[1].t < w[0].t) {
            return Err("load profile breakpoints must be sorted by time".into());
        }
        if self.points.iter().any(|p| !(p.multiplier > 0.0 && p.multiplier.is_finite())) {
            return Err("load profile multipliers must be positive".into());
        }
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return Err("load profile noise must be in [0, 0.5)".into());
        }
        Ok(())
    }

    /// Noise-free multiplier at `t`.
    pub fn base(&self, t: f64) -> f64 {
        let p = &self.points;
        match p.len() {
            0 => 1.0,
            _ if t <= p[0].t => p[0].multiplier,
            _ if t >= p[p.len() - 1].t => p[p.len() - 1].multiplier,
            _ => {
                let k = p.partition_point(|q| q.t <= t);
                let (a, b) = (p[k - 1], p[k]);
                if b.t == a.t {
                    return b.multiplier;
                }
                a.multiplier + (t - a.t) / (b.t - a.t) * (b.multiplier - a.multiplier)
            }
        }
    }

    /// Multiplier for step `step_index` at `t`; noise draws depend only on
    /// `(seed, step_index)`.
    pub fn multiplier(&self, t: f64, step_index: u64, seed: u64) -> f64 {
        let base = self.base(t);
        if self.noise == 0.0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let z: f64 = Normal::new(0.0, self.noise).unwrap().sample(&mut rng);
        (base * (1.0 + z)).max(0.01)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> LoadProfile {
        LoadProfile { points: vec![ProfilePoint { t: 0.0, multiplier: 1.0 }, ProfilePoint { t: 100.0, multiplier: 2.0 }], noise: 0.0 }
    }

    #[test]
    fn interpolates_and_holds() {
        let p = profile();
        assert_eq!(p.base(-5.0), 1.0);
        assert_eq!(p.base(50.0), 1.5);
        assert_eq!(p.base(100.0), 2.0);
        assert_eq!(p.base(500.0), 2.0);
        assert_eq!(LoadProfile::flat().base(123.0), 1.0);
    }

    #[test]
    fn noise_is_seeded() {
        let p = LoadProfile { noise: 0.01, ..profile() };
        assert_eq!(p.multiplier(10.0, 3, 42), p.multiplier(10.0, 3, 42));
        assert_ne!(p.multiplier(10.0, 3, 42), p.multiplier(10.0, 4, 42));
    }

    #[test]
    fn clock_strings_accepted() {
        let p: ProfilePoint = serde_json::from_str(r#"{"t": "10:00:00", "multiplier": 1.0}"#).unwrap();
        assert_eq!(p.t, 36000.0);
    }
}
