//! Report structures emitted by the command layer.
//!
//! Reports serialize to JSON (round-tripping every float bit-exactly) and
//! render as aligned human-readable tables. Every number in a report is
//! the output of exactly one library operation.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const REPORT_SCHEMA: &str = "renvnet-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controls: Option<ControlsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modified_routing: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalizers: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmf_samples: Option<Vec<PmfSample>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<ResidualEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    /// Extended traffic solution, index 0 is the total arrival rate.
    pub eta: Vec<f64>,
    /// Node utilizations `eta_j / mu_j(1)`.
    pub utilization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlsReport {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub blocked_nodes: Vec<usize>,
    pub effective_arrival_rate: f64,
    /// Set when every node is blocked.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub all_blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfSample {
    pub state: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentReport {
    pub q_red: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    /// Per-status `(beta, alpha)` controls.
    pub per_status: Vec<StatusReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub status: usize,
    pub alpha: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub events: usize,
    pub simulated_time: f64,
    /// Named total-variation comparisons against analytic laws.
    pub tv_comparisons: Vec<TvEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvEntry {
    pub name: String,
    pub total_variation: f64,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            command: command.to_string(),
            traffic: None,
            controls: None,
            modified_routing: None,
            normalizers: None,
            pmf_samples: None,
            environment: None,
            residuals: None,
            simulation: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// True iff every recorded residual is below its threshold.
    pub fn all_residuals_pass(&self) -> bool {
        self.residuals
            .as_ref()
            .map(|rs| rs.iter().all(|r| r.pass))
            .unwrap_or(true)
    }

    /// Aligned human-readable rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        if let Some(t) = &self.traffic {
            let _ = writeln!(out, "\ntraffic solution (eta, index 0 = exterior):");
            for (ix, e) in t.eta.iter().enumerate() {
                let _ = writeln!(out, "  eta[{ix}] = {e:.12}");
            }
            let _ = writeln!(out, "utilization per node:");
            for (ix, u) in t.utilization.iter().enumerate() {
                let _ = writeln!(out, "  node {} : {u:.12}", ix + 1);
            }
        }
        if let Some(c) = &self.controls {
            let _ = writeln!(out, "\ncontrols:");
            let _ = writeln!(out, "  alpha = {:?}", c.alpha);
            let _ = writeln!(out, "  beta  = {}", c.beta);
            let _ = writeln!(out, "  blocked nodes = {:?}", c.blocked_nodes);
            let _ = writeln!(out, "  effective arrival rate = {:.12}", c.effective_arrival_rate);
            if c.all_blocked {
                let _ = writeln!(out, "  warning: all nodes blocked");
            }
        }
        if let Some(m) = &self.modified_routing {
            let _ = writeln!(out, "\nmodified routing matrix:");
            for row in m {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>10.6}")).collect();
                let _ = writeln!(out, "  [{}]", cells.join(", "));
            }
        }
        if let Some(n) = &self.normalizers {
            let _ = writeln!(out, "\nnormalizing constants:");
            for (ix, c) in n.iter().enumerate() {
                let _ = writeln!(out, "  C({}) = {c:.12}", ix + 1);
            }
        }
        if let Some(samples) = &self.pmf_samples {
            let _ = writeln!(out, "\nstationary pmf samples:");
            for s in samples {
                let _ = writeln!(out, "  xi{:?} = {:.12e}", s.state, s.probability);
            }
        }
        if let Some(env) = &self.environment {
            let _ = writeln!(out, "\nreduced generator Q_red:");
            for row in &env.q_red {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.8}")).collect();
                let _ = writeln!(out, "  [{}]", cells.join(", "));
            }
            let _ = writeln!(out, "theta:");
            for (k, t) in env.theta.iter().enumerate() {
                let _ = writeln!(out, "  theta[{k}] = {t:.12}");
            }
            for sc in &env.per_status {
                let _ = writeln!(
                    out,
                    "  status {}: beta = {}, alpha = {:?}",
                    sc.status, sc.beta, sc.alpha
                );
            }
        }
        if let Some(rs) = &self.residuals {
            let _ = writeln!(out, "\nresiduals:");
            let width = rs.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in rs {
                let _ = writeln!(
                    out,
                    "  {:width$}  {:>12.6e}  (<= {:.1e})  {}",
                    r.name,
                    r.value,
                    r.threshold,
                    if r.pass { "pass" } else { "FAIL" },
                );
            }
        }
        if let Some(sim) = &self.simulation {
            let _ = writeln!(
                out,
                "\nsimulation: {} events, seed {}, simulated time {:.6}",
                sim.events, sim.seed, sim.simulated_time
            );
            for tv in &sim.tv_comparisons {
                let _ = writeln!(out, "  TV[{}] = {:.6}", tv.name, tv.total_variation);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut report = Report::new("verify");
        report.traffic = Some(TrafficReport {
            eta: vec![1.0, 0.1 + 0.2, 1.0 / 3.0],
            utilization: vec![f64::MIN_POSITIVE, 0.123456789012345678],
        });
        report.residuals = Some(vec![ResidualEntry {
            name: "traffic_solve".into(),
            value: 3.14e-17,
            threshold: 1e-10,
            pass: true,
        }]);
        let json = report.to_json();
        let parsed: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
        // Bit-exact floats survive a second round trip.
        assert_eq!(parsed.to_json(), json);
        let t = parsed.traffic.unwrap();
        assert_eq!(t.eta[1].to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(t.eta[2].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn render_mentions_failures() {
        let mut report = Report::new("verify");
        report.residuals = Some(vec![ResidualEntry {
            name: "coupled_balance".into(),
            value: 1.0,
            threshold: 1e-8,
            pass: false,
        }]);
        assert!(report.render().contains("FAIL"));
        assert!(!report.all_residuals_pass());
    }
}
