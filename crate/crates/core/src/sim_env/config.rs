use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct JamEvent {
    pub start_step: usize,
    /// Inclusive.
    pub end_step: usize,
    pub center: [f64; 2],
    pub radius_km: f64,
    /// Subtracted from the quality of every link with an endpoint in the disc.
    pub loss_boost: f64,
}

impl JamEvent {
    pub fn is_active(&self, step: usize) -> bool {
        self.start_step <= step && step <= self.end_step
    }

    pub fn covers(&self, point: [f64; 2]) -> bool {
        let dx = point[0] - self.center[0];
        let dy = point[1] - self.center[1];
        dx * dx + dy * dy <= self.radius_km * self.radius_km
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_step > self.end_step {
            return Err(Error::config("jam_event.start_step", "must not exceed end_step"));
        }
        if !(self.radius_km > 0.0) {
            return Err(Error::config("jam_event.radius_km", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.loss_boost) {
            return Err(Error::config("jam_event.loss_boost", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub n_agents: usize,
    pub area_km: f64,
    pub episode_len: usize,
    pub step_seconds: f64,
    pub n_gateways: usize,
    /// Mean packets generated per non-gateway node per step.
    pub traffic_rate: f64,
    pub link_range_km: f64,
    /// Packets a single link carries per step.
    pub base_capacity: usize,
    pub mobility_speed_kmps: f64,
    pub queue_capacity: usize,
    /// Battery consumed per packet sent at full power.
    pub battery_drain: f64,
    pub jam_schedule: Vec<JamEvent>,
    pub seed: u64,
}

impl Default for EnvConfig {
    /// Twenty mobile nodes in a 5 km square for 100 steps.
    fn default() -> Self {
        Self {
            n_agents: 20,
            area_km: 5.0,
            episode_len: 100,
            step_seconds: 0.1,
            n_gateways: 2,
            traffic_rate: 0.3,
            link_range_km: 2.0,
            base_capacity: 4,
            mobility_speed_kmps: 0.02,
            queue_capacity: 20,
            battery_drain: 0.002,
            jam_schedule: Vec::new(),
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::config("env.n_agents", "must be >= 2"));
        }
        if self.episode_len < 1 {
            return Err(Error::config("env.episode_len", "must be >= 1"));
        }
        if !(self.area_km > 0.0 && self.area_km.is_finite()) {
            return Err(Error::config("env.area_km", "must be > 0"));
        }
        if !(self.link_range_km > 0.0 && self.link_range_km.is_finite()) {
            return Err(Error::config("env.link_range_km", "must be > 0"));
        }
        if self.n_gateways < 1 {
            return Err(Error::config("env.n_gateways", "must be >= 1"));
        }
        if self.n_gateways >= self.n_agents {
            return Err(Error::config(
                "env.n_gateways",
                "must leave at least one non-gateway node",
            ));
        }
        if !(self.step_seconds > 0.0 && self.step_seconds.is_finite()) {
            return Err(Error::config("env.step_seconds", "must be > 0"));
        }
        if !(self.traffic_rate >= 0.0 && self.traffic_rate.is_finite()) {
            return Err(Error::config("env.traffic_rate", "must be >= 0"));
        }
        if !(self.mobility_speed_kmps >= 0.0 && self.mobility_speed_kmps.is_finite()) {
            return Err(Error::config("env.mobility_speed_kmps", "must be >= 0"));
        }
        if self.queue_capacity < 1 {
            return Err(Error::config("env.queue_capacity", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.battery_drain) {
            return Err(Error::config("env.battery_drain", "must lie in [0, 1]"));
        }
        for event in &self.jam_schedule {
            event.validate()?;
        }
        Ok(())
    }
}
