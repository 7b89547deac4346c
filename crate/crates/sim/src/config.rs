use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Which component tier a failure class lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Service,
    Container,
    Host,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Service => "service",
            Tier::Container => "container",
            Tier::Host => "host",
        }
    }
}

/// Shape of the injected anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Level shift from the onset to the failure time.
    Shift,
    /// Short burst of a few samples starting at the onset.
    Spike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub id: String,
    pub tier: Tier,
    pub metrics: Vec<String>,
    pub pattern: Pattern,
}

impl ClassTemplate {
    fn new(id: &str, tier: Tier, metrics: &[&str], pattern: Pattern) -> Self {
        Self { id: id.into(), tier, metrics: metrics.iter().map(|m| m.to_string()).collect(), pattern }
    }
}

pub fn default_classes() -> Vec<ClassTemplate> {
    use Pattern::*;
    use Tier::*;
    vec![
        ClassTemplate::new("service_requests", Service, &["latency", "error_rate", "throughput"], Shift),
        ClassTemplate::new("docker_cpu", Container, &["cpu_usage"], Shift),
        ClassTemplate::new("docker_memory", Container, &["memory_usage"], Shift),
        ClassTemplate::new("docker_thread", Container, &["thread_count", "process_count"], Shift),
        ClassTemplate::new("os_load", Host, &["load_1m", "load_5m"], Shift),
        ClassTemplate::new("os_memory", Host, &["memory_used", "swap_used"], Shift),
        ClassTemplate::new("os_network", Host, &["bytes_in", "bytes_out"], Spike),
        ClassTemplate::new("os_disk", Host, &["disk_read", "disk_write"], Shift),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub n_services: usize,
    pub n_containers: usize,
    pub n_hosts: usize,
    pub classes: Vec<ClassTemplate>,
    pub n_failures: usize,
    /// Fault size in multiples of the metric's noise standard deviation.
    pub magnitude: f64,
    /// Relative spread of the fault size, drawn uniformly in `1 +- jitter`.
    pub magnitude_jitter: f64,
    /// Per-hop attenuation of propagated symptoms.
    pub decay: f64,
    pub hops: usize,
    /// Mean noise standard deviation; each metric draws its own around it.
    pub noise_std: f64,
    /// Seasonal amplitude relative to the metric's noise level.
    pub seasonal_amplitude: f64,
    /// Unrelated anomalies per failure that do not propagate.
    pub distractors: usize,
    /// Probability that a failure has a second faulty unit.
    pub multi_fault_probability: f64,
    /// Probability that a sample is missing from the exported series.
    pub missing_rate: f64,
    pub step_seconds: i64,
    pub window: usize,
    pub baseline: usize,
    pub spacing_minutes: i64,
    pub start_time: i64,
    /// Fraction of each class's units that never fail before the test
    /// period.
    pub unseen_fraction: f64,
    /// Share of test-period failures placed on held-out units.
    pub unseen_test_share: f64,
    /// Consecutive failures come in pairs with the same class and size at
    /// different units.
    pub paired: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_services: 8,
            n_containers: 12,
            n_hosts: 10,
            classes: default_classes(),
            n_failures: 200,
            magnitude: 6.0,
            magnitude_jitter: 0.3,
            decay: 0.5,
            hops: 2,
            noise_std: 1.0,
            seasonal_amplitude: 1.0,
            distractors: 2,
            multi_fault_probability: 0.05,
            missing_rate: 0.002,
            step_seconds: 60,
            window: 20,
            baseline: 60,
            spacing_minutes: 120,
            start_time: 1_700_000_000,
            unseen_fraction: 0.0,
            unseen_test_share: 0.5,
            paired: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.n_services == 0 || self.n_containers == 0 || self.n_hosts == 0 {
            return bad("component counts must be positive".into());
        }
        if self.classes.is_empty() || self.classes.iter().any(|c| c.metrics.is_empty()) {
            return bad("every failure class needs at least one metric".into());
        }
        if !(self.decay >= 0.0 && self.decay < 1.0) {
            return bad(format!("decay {} not in [0, 1)", self.decay));
        }
        if self.magnitude.is_nan() || self.magnitude <= 0.0 || !(0.0..1.0).contains(&self.magnitude_jitter) {
            return bad("magnitude must be positive and jitter in [0, 1)".into());
        }
        if self.noise_std < 0.0 || self.seasonal_amplitude < 0.0 {
            return bad("noise and seasonal amplitude must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.missing_rate) || !(0.0..=1.0).contains(&self.multi_fault_probability) {
            return bad("missing rate and multi-fault probability must be probabilities".into());
        }
        if !(0.0..1.0).contains(&self.unseen_fraction) || !(0.0..=1.0).contains(&self.unseen_test_share) {
            return bad("unseen fraction must be in [0, 1), test share in [0, 1]".into());
        }
        if self.window == 0 || self.baseline == 0 || self.step_seconds <= 0 {
            return bad("window, baseline and step must be positive".into());
        }
        let span_minutes = (self.window + self.baseline) as i64 * self.step_seconds / 60;
        if self.spacing_minutes * 60 < 3 * self.window as i64 * self.step_seconds || self.spacing_minutes <= span_minutes {
            return Err(SimError::InsufficientDuration(format!(
                "failures {} min apart cannot hold {} min of history each",
                self.spacing_minutes, span_minutes
            )));
        }
        Ok(())
    }

    /// Samples needed before and including each failure time.
    pub fn segment_len(&self) -> usize {
        self.window + self.baseline
    }
}
