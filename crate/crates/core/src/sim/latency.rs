use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::LatencyBreakdown;

/// Timing of the perception and actuation chain, in milliseconds.
///
/// With `double_processing` the camera loop is sequential: a frame is
/// captured, processed, and only then is the next one captured, so a
/// trigger right after a capture waits for two full passes. Without it
/// frames stream at the capture period and are processed in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineLatencyModel {
    pub capture_period_ms: f64,
    pub t_cap_ms: f64,
    pub t_alg_ms: f64,
    pub t_3d_ms: f64,
    pub relay_ms: f64,
    pub t_adj_ms: f64,
    pub double_processing: bool,
}

/// Latency model quantized to simulation ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickSchedule {
    pub period: u64,
    pub first_sample: u64,
    /// Sample to delivery at the regulator.
    pub processing: u64,
    /// Decision to effect at the robot.
    pub actuation: u64,
}

impl TickSchedule {
    pub fn worst_case_ticks(&self) -> u64 {
        self.period + self.processing + self.actuation
    }
}

fn ticks(ms: f64, dt_ms: f64) -> u64 {
    (ms / dt_ms - 1e-9).ceil().max(0.0) as u64
}

impl PipelineLatencyModel {
    pub fn from_breakdown(b: &LatencyBreakdown, capture_period_ms: f64, double_processing: bool) -> Self {
        Self {
            capture_period_ms,
            t_cap_ms: b.t_cap_ms,
            t_alg_ms: b.t_alg1_ms.max(b.t_alg2_ms),
            t_3d_ms: b.t_3d1_ms.max(b.t_3d2_ms),
            relay_ms: b.t_relay_ms,
            t_adj_ms: b.t_adj_ms,
            double_processing,
        }
    }

    fn processing_ms(&self) -> f64 {
        self.t_alg_ms + self.t_3d_ms
    }

    pub fn period_ms(&self) -> f64 {
        if self.double_processing {
            self.capture_period_ms.max(self.t_cap_ms + self.processing_ms())
        } else {
            self.capture_period_ms
        }
    }

    /// Longest time from an event in the scene to its effect at the robot.
    pub fn worst_case_ms(&self) -> f64 {
        let delivery = if self.double_processing { self.processing_ms() } else { self.t_cap_ms + self.processing_ms() };
        self.period_ms() + delivery + self.relay_ms + self.t_adj_ms
    }

    pub fn schedule(&self, dt_ms: f64) -> TickSchedule {
        let (first_sample, processing) = if self.double_processing {
            (ticks(self.t_cap_ms, dt_ms), ticks(self.processing_ms(), dt_ms))
        } else {
            (0, ticks(self.t_cap_ms + self.processing_ms(), dt_ms))
        };
        TickSchedule {
            period: ticks(self.period_ms(), dt_ms).max(1),
            first_sample,
            processing,
            actuation: ticks(self.relay_ms + self.t_adj_ms, dt_ms),
        }
    }

    pub fn validate(&self, t_lat_max_ms: f64, dt_ms: f64) -> Result<()> {
        let parts = [
            ("capture_period_ms", self.capture_period_ms),
            ("t_cap_ms", self.t_cap_ms),
            ("t_alg_ms", self.t_alg_ms),
            ("t_3d_ms", self.t_3d_ms),
            ("relay_ms", self.relay_ms),
            ("t_adj_ms", self.t_adj_ms),
        ];
        for (name, v) in parts {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("latency {name} must be >= 0, got {v}")));
            }
        }
        if self.capture_period_ms <= 0.0 {
            return Err(Error::Config("latency capture_period_ms must be > 0".into()));
        }
        let worst = self.schedule(dt_ms).worst_case_ticks() as f64 * dt_ms;
        if worst > t_lat_max_ms + 1e-9 {
            return Err(Error::Config(format!(
                "pipeline worst case {worst} ms exceeds the profile's t_lat_max_ms {t_lat_max_ms}"
            )));
        }
        Ok(())
    }
}
