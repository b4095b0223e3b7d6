//! Batch scenario runs. Each scenario is an independent closed loop sharing
//! nothing mutable, so a sweep parallelizes one scenario per task.

use crate::controllers::BodyrateGains;
use crate::par;
use crate::riccati::LqrWeights;
use crate::simulation::{compute_metrics, run_closed_loop, CareStats, SimConfig, SimFailure, SimLog, TrackingMetrics};
use crate::trajectory::TrajectorySpec;
use crate::vehicle::VehicleParams;

/// Everything needed to simulate and score one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub trajectory: TrajectorySpec,
    pub sim: SimConfig,
    pub weights: LqrWeights,
    pub gains: BodyrateGains,
    pub params: VehicleParams,
    pub settle_threshold: f64,
    pub window_start: f64,
}

impl Scenario {
    pub fn simulate(&self) -> Result<SimLog, SimFailure> {
        run_closed_loop(&self.sim, &self.trajectory, &self.weights, &self.gains, &self.params)
    }

    pub fn metrics(&self, log: &SimLog) -> crate::Result<TrackingMetrics> {
        compute_metrics(log, self.settle_threshold, self.window_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    /// Metrics, or the failure message when the run or the scoring failed.
    pub metrics: Result<TrackingMetrics, String>,
    pub care: CareStats,
    pub saturated_rows: usize,
}

pub fn run_scenario(s: &Scenario) -> ScenarioOutcome {
    match s.simulate() {
        Ok(log) => ScenarioOutcome {
            name: s.name.clone(),
            metrics: s.metrics(&log).map_err(|e| e.to_string()),
            care: log.care,
            saturated_rows: log.saturation_count(),
        },
        Err(f) => ScenarioOutcome {
            name: s.name.clone(),
            metrics: Err(f.to_string()),
            care: f.log.care,
            saturated_rows: f.log.saturation_count(),
        },
    }
}

/// Runs all scenarios, in parallel when the `parallel` feature is enabled. Output order follows input order.
pub fn run_sweep(scenarios: &[Scenario]) -> Vec<ScenarioOutcome> {
    par::map(scenarios, run_scenario)
}

pub fn run_sweep_sequential(scenarios: &[Scenario]) -> Vec<ScenarioOutcome> {
    par::map_sequential(scenarios, run_scenario)
}
