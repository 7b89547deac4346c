use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Stationary generator: level + sinusoid + Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricProfile {
    pub level: f64,
    pub noise_std: f64,
    pub amplitude: f64,
    pub period_minutes: f64,
    pub phase: f64,
}

impl MetricProfile {
    pub fn draw<R: Rng + ?Sized>(noise_std: f64, seasonal_amplitude: f64, rng: &mut R) -> Self {
        let noise = noise_std * rng.random_range(0.5..1.5);
        Self {
            level: rng.random_range(10.0..100.0),
            noise_std: noise,
            amplitude: seasonal_amplitude * noise,
            period_minutes: rng.random_range(60.0..360.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    /// Noise-free value at `minute` since the simulation start.
    pub fn mean_at(&self, minute: f64) -> f64 {
        self.level + self.amplitude * (std::f64::consts::TAU * minute / self.period_minutes + self.phase).sin()
    }

    pub fn sample<R: Rng + ?Sized>(&self, minute: f64, rng: &mut R) -> f64 {
        let noise = if self.noise_std > 0.0 {
            Normal::new(0.0, self.noise_std).expect("positive std").sample(rng)
        } else {
            0.0
        };
        self.mean_at(minute) + noise
    }
}
