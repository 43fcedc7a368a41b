//! Spec-file parsing and validation.
//!
//! Spec files are versioned JSON documents (`"schema": "renvnet-spec/1"`)
//! describing a network, optional capacity factors, an optional
//! environment, and optional simulation settings. Every module-level
//! validator runs at load time and failures carry the path of the
//! offending field. The JSON schema is documented in `docs/schema.md`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::capacity::CapacityFactors;
use crate::chain::RoutingMatrix;
use crate::environment::{EnvRouting, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::jackson::{NetworkSpec, ServiceRateFunction};
use crate::randomization::RerouteMode;
use crate::simulate::Budget;

pub const SPEC_SCHEMA: &str = "renvnet-spec/1";

/// Fully validated spec document.
#[derive(Debug, Clone)]
pub struct SpecDocument {
    pub network: NetworkSpec,
    pub capacity: Option<CapacityFactors>,
    pub environment: Option<EnvironmentSpec>,
    pub mode: RerouteMode,
    pub simulation: Option<SimulationSettings>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationSettings {
    pub budget: Budget,
    pub seed: u64,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawSpec {
    schema: String,
    network: RawNetwork,
    #[serde(default)]
    capacity: Option<RawCapacity>,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    environment: Option<RawEnvironment>,
    #[serde(default)]
    simulation: Option<RawSimulation>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawNetwork {
    lambda: Vec<f64>,
    routing: Vec<Vec<f64>>,
    service_rates: Vec<RawServiceRate>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawServiceRate {
    Constant { constant: f64 },
    Table { table: Vec<f64>, tail: f64 },
}

#[derive(Debug, Deserialize, Serialize)]
struct RawCapacity {
    gamma: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawEnvironment {
    generator: Vec<Vec<f64>>,
    /// Departure-triggered jump matrices per node; identity when omitted.
    #[serde(default)]
    jump: Option<Vec<Vec<Vec<f64>>>>,
    gamma: Vec<Vec<f64>>,
    #[serde(default)]
    mode: Option<String>,
    /// Rerouting kernels per status, required for `user_supplied` mode.
    #[serde(default)]
    kernels: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawSimulation {
    #[serde(default)]
    events: Option<usize>,
    #[serde(default)]
    time: Option<f64>,
    #[serde(default)]
    seed: u64,
}

fn at(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |err| match err {
        Error::Schema { .. } => err,
        Error::RowSum { row, sum, tol } => Error::Schema {
            path: format!("{path}[{row}]"),
            message: format!("row sums to {sum}, expected 1 within {tol}"),
        },
        other => Error::Schema {
            path,
            message: other.to_string(),
        },
    }
}

fn square_matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let dim = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Schema {
                path: format!("{path}[{i}]"),
                message: format!("matrix is not square: row length {} != {dim}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Parses and validates a spec document from a JSON string.
pub fn parse_spec_str(json: &str) -> Result<SpecDocument> {
    let raw: RawSpec = serde_json::from_str(json)?;
    if raw.schema != SPEC_SCHEMA {
        return Err(Error::Schema {
            path: "schema".into(),
            message: format!("unsupported schema {:?}, expected {SPEC_SCHEMA:?}", raw.schema),
        });
    }

    let routing = RoutingMatrix::from_rows(&raw.network.routing).map_err(at("network.routing"))?;
    let mut services = Vec::with_capacity(raw.network.service_rates.len());
    for (ix, rate) in raw.network.service_rates.iter().enumerate() {
        let service = match rate {
            RawServiceRate::Constant { constant } => ServiceRateFunction::constant(*constant),
            RawServiceRate::Table { table, tail } => {
                ServiceRateFunction::new(table.clone(), *tail)
            }
        }
        .map_err(at(format!("network.service_rates[{ix}]")))?;
        services.push(service);
    }
    let network = NetworkSpec::new(raw.network.lambda.clone(), routing, services)
        .map_err(at("network"))?;

    let capacity = raw
        .capacity
        .as_ref()
        .map(|c| CapacityFactors::new(c.gamma.clone()).map_err(at("capacity.gamma")))
        .transpose()?;
    if let Some(c) = &capacity {
        if c.len() != network.node_count() {
            return Err(Error::Schema {
                path: "capacity.gamma".into(),
                message: format!(
                    "expected {} factors, found {}",
                    network.node_count(),
                    c.len()
                ),
            });
        }
    }

    let mode = parse_mode(raw.mode.as_deref().unwrap_or("skipping"), "mode")?;

    let environment = raw
        .environment
        .as_ref()
        .map(|e| build_environment(e, &network, mode))
        .transpose()?;

    let simulation = raw
        .simulation
        .as_ref()
        .map(|s| {
            let budget = match (s.events, s.time) {
                (Some(events), None) => Budget::Events(events),
                (None, Some(time)) if time > 0.0 => Budget::Time(time),
                _ => {
                    return Err(Error::Schema {
                        path: "simulation".into(),
                        message: "exactly one of `events` or positive `time` is required".into(),
                    })
                }
            };
            Ok(SimulationSettings {
                budget,
                seed: s.seed,
            })
        })
        .transpose()?;

    Ok(SpecDocument {
        network,
        capacity,
        environment,
        mode,
        simulation,
    })
}

/// Reads, parses and validates a spec file.
pub fn parse_spec(path: &Path) -> Result<SpecDocument> {
    let json = fs::read_to_string(path)?;
    parse_spec_str(&json)
}

fn parse_mode(text: &str, path: &str) -> Result<RerouteMode> {
    match text {
        "skipping" => Ok(RerouteMode::Skipping),
        "reflection" => Ok(RerouteMode::Reflection),
        other => Err(Error::Schema {
            path: path.into(),
            message: format!("unknown mode {other:?}, expected skipping or reflection"),
        }),
    }
}

fn build_environment(
    raw: &RawEnvironment,
    network: &NetworkSpec,
    document_mode: RerouteMode,
) -> Result<EnvironmentSpec> {
    let v = square_matrix(&raw.generator, "environment.generator")?;
    let statuses = v.nrows();
    let nodes = network.node_count();

    let jump = match &raw.jump {
        Some(list) => {
            if list.len() != nodes {
                return Err(Error::Schema {
                    path: "environment.jump".into(),
                    message: format!("expected {nodes} jump matrices, found {}", list.len()),
                });
            }
            list.iter()
                .enumerate()
                .map(|(j, rows)| {
                    RoutingMatrix::from_rows(rows).map_err(at(format!("environment.jump[{j}]")))
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let identity: Vec<Vec<f64>> = (0..statuses)
                .map(|k| (0..statuses).map(|m| if k == m { 1.0 } else { 0.0 }).collect())
                .collect();
            let identity = RoutingMatrix::from_rows(&identity).expect("identity is stochastic");
            vec![identity; nodes]
        }
    };

    if raw.gamma.len() != statuses {
        return Err(Error::Schema {
            path: "environment.gamma".into(),
            message: format!("expected {statuses} factor vectors, found {}", raw.gamma.len()),
        });
    }
    let gamma_of = raw
        .gamma
        .iter()
        .enumerate()
        .map(|(k, g)| CapacityFactors::new(g.clone()).map_err(at(format!("environment.gamma[{k}]"))))
        .collect::<Result<Vec<_>>>()?;

    let mode = match raw.mode.as_deref() {
        None => match document_mode {
            RerouteMode::Skipping => EnvRouting::Skipping,
            RerouteMode::Reflection => EnvRouting::Reflection,
        },
        Some("skipping") => EnvRouting::Skipping,
        Some("reflection") => EnvRouting::Reflection,
        Some("user_supplied") => {
            let kernels = raw.kernels.as_ref().ok_or_else(|| Error::Schema {
                path: "environment.kernels".into(),
                message: "user_supplied mode requires per-status kernels".into(),
            })?;
            let kernels = kernels
                .iter()
                .enumerate()
                .map(|(k, rows)| {
                    RoutingMatrix::from_rows(rows)
                        .map_err(at(format!("environment.kernels[{k}]")))
                })
                .collect::<Result<Vec<_>>>()?;
            EnvRouting::UserSupplied(kernels)
        }
        Some(other) => {
            return Err(Error::Schema {
                path: "environment.mode".into(),
                message: format!("unknown mode {other:?}"),
            })
        }
    };

    EnvironmentSpec::new(v, jump, gamma_of, mode).map_err(at("environment"))
}
