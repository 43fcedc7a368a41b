//! Classical Jackson networks: traffic equations, product-form stationary
//! distribution, and the queue-length generator.
//!
//! Nodes are numbered `1..=J` in the extended routing matrix, whose index
//! `0` is the network exterior (source and sink). Per-node arrays and
//! queue-length vectors are 0-based, so node `j` of the routing matrix owns
//! array slot `j - 1`.

use nalgebra::{DMatrix, DVector};

use crate::chain::{check_irreducible, RoutingMatrix, VALIDATION_TOL};
use crate::error::{Error, Result};
use crate::generator::{Generator, InflowEnumeration};

/// State-dependent service intensity of one node: an explicit table for
/// occupancies `1..=N` and a constant tail rate for every higher occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRateFunction {
    table: Vec<f64>,
    tail: f64,
}

impl ServiceRateFunction {
    pub fn new(table: Vec<f64>, tail: f64) -> Result<Self> {
        for (i, &r) in table.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::EntryRange {
                    row: 0,
                    col: i,
                    value: r,
                    lo: f64::MIN_POSITIVE,
                    hi: f64::INFINITY,
                });
            }
        }
        if !tail.is_finite() || tail <= 0.0 {
            return Err(Error::EntryRange {
                row: 0,
                col: table.len(),
                value: tail,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { table, tail })
    }

    /// Constant rate for every occupancy.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), rate)
    }

    /// Service intensity with `n >= 1` customers present.
    pub fn rate(&self, n: usize) -> f64 {
        assert!(n >= 1, "service rate is defined for occupancy >= 1");
        if n <= self.table.len() {
            self.table[n - 1]
        } else {
            self.tail
        }
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }
}

/// An open network: external arrival rates, an irreducible extended routing
/// matrix on `{0..=J}`, and per-node service-rate functions.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    lambda: Vec<f64>,
    routing: RoutingMatrix,
    mu: Vec<ServiceRateFunction>,
}

impl NetworkSpec {
    pub fn new(
        lambda: Vec<f64>,
        routing: RoutingMatrix,
        mu: Vec<ServiceRateFunction>,
    ) -> Result<Self> {
        let nodes = lambda.len();
        if routing.dim() != nodes + 1 {
            return Err(Error::DimensionMismatch {
                expected: nodes + 1,
                found: routing.dim(),
            });
        }
        if mu.len() != nodes {
            return Err(Error::DimensionMismatch {
                expected: nodes,
                found: mu.len(),
            });
        }
        let total: f64 = lambda.iter().sum();
        for (ix, &l) in lambda.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::EntryRange {
                    row: 0,
                    col: ix,
                    value: l,
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        if total <= 0.0 {
            return Err(Error::Schema {
                path: "network.lambda".into(),
                message: "total external arrival rate must be positive".into(),
            });
        }
        // The exterior row must encode the arrival split: r(0,j) = lambda_j / lambda.
        if routing.get(0, 0) != 0.0 {
            return Err(Error::Schema {
                path: "network.routing[0][0]".into(),
                message: "exterior self-entry must be zero".into(),
            });
        }
        for ix in 0..nodes {
            let expected = lambda[ix] / total;
            if (routing.get(0, ix + 1) - expected).abs() > VALIDATION_TOL {
                return Err(Error::Schema {
                    path: format!("network.routing[0][{}]", ix + 1),
                    message: format!(
                        "entry {} inconsistent with lambda: expected {expected}",
                        routing.get(0, ix + 1)
                    ),
                });
            }
        }
        let decomp = check_irreducible(&routing);
        if !decomp.is_irreducible() {
            return Err(Error::NotIrreducible {
                closed_classes: decomp.closed_classes(),
            });
        }
        Ok(Self {
            lambda,
            routing,
            mu,
        })
    }

    pub fn node_count(&self) -> usize {
        self.lambda.len()
    }

    /// Total external arrival rate, always derived as `sum(lambda)`.
    pub fn total_arrival_rate(&self) -> f64 {
        self.lambda.iter().sum()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    /// Service-rate function of the node in array slot `ix` (0-based).
    pub fn service(&self, ix: usize) -> &ServiceRateFunction {
        &self.mu[ix]
    }

    pub fn services(&self) -> &[ServiceRateFunction] {
        &self.mu
    }
}

/// Extended traffic solution: `eta[0]` is the total arrival rate, `eta[j]`
/// the total flow through node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSolution {
    eta: Vec<f64>,
}

impl TrafficSolution {
    /// Entries over the extended index set `{0..=J}`.
    pub fn extended(&self) -> &[f64] {
        &self.eta
    }

    /// Flow through the node in array slot `ix` (0-based).
    pub fn node_rate(&self, ix: usize) -> f64 {
        self.eta[ix + 1]
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.eta[0]
    }
}

/// Solves the traffic equations
/// `eta_j = lambda_j + sum_i eta_i r(i,j)` for `j = 1..=J`.
pub fn solve_traffic(spec: &NetworkSpec) -> Result<TrafficSolution> {
    let nodes = spec.node_count();
    let r = spec.routing();
    // (I - R_inner^T) eta = lambda, with R_inner the node-to-node block.
    let mut a = DMatrix::<f64>::identity(nodes, nodes);
    for i in 0..nodes {
        for j in 0..nodes {
            a[(j, i)] -= r.get(i + 1, j + 1);
        }
    }
    let b = DVector::from_fn(nodes, |j, _| spec.lambda()[j]);
    let inner = a.lu().solve(&b).ok_or(Error::SingularTraffic)?;

    let mut eta = Vec::with_capacity(nodes + 1);
    eta.push(spec.total_arrival_rate());
    eta.extend(inner.iter());

    // Positivity and the extended steady-state equation both follow from
    // irreducibility; check them to catch numerical trouble early.
    let mut worst = 0.0f64;
    for j in 0..=nodes {
        let mut flow = 0.0;
        for i in 0..=nodes {
            flow += eta[i] * r.get(i, j);
        }
        worst = worst.max((flow - eta[j]).abs());
    }
    let scale = eta[0].max(1.0);
    if worst > VALIDATION_TOL * scale {
        return Err(Error::SingularTraffic);
    }
    if eta.iter().skip(1).any(|&e| e <= 0.0) {
        return Err(Error::SingularTraffic);
    }
    Ok(TrafficSolution { eta })
}

/// Normalizing constant `C(j) = 1 + sum_{n>=1} prod_{k<=n} eta_j / mu_j(k)`,
/// summed exactly over the table range and in closed geometric form over
/// the constant tail.
pub fn node_normalizer(eta_j: f64, mu: &ServiceRateFunction) -> Result<f64> {
    let rho_tail = eta_j / mu.tail();
    if rho_tail >= 1.0 {
        return Err(Error::NotErgodic {
            node: 0,
            eta: eta_j,
            tail: mu.tail(),
        });
    }
    let mut c = 1.0;
    let mut product = 1.0;
    for n in 1..=mu.table().len() {
        product *= eta_j / mu.rate(n);
        c += product;
    }
    // Geometric tail: product * sum_{m>=1} rho_tail^m.
    c += product * rho_tail / (1.0 - rho_tail);
    Ok(c)
}

/// Product-form stationary distribution
/// `xi(n) = prod_j [prod_{k<=n_j} eta_j/mu_j(k)] / C(j)`.
#[derive(Debug, Clone)]
pub struct ProductFormDistribution {
    eta: TrafficSolution,
    mu: Vec<ServiceRateFunction>,
    normalizers: Vec<f64>,
}

impl ProductFormDistribution {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let eta = solve_traffic(spec)?;
        Self::from_parts(eta, spec.services().to_vec())
    }

    pub fn from_parts(eta: TrafficSolution, mu: Vec<ServiceRateFunction>) -> Result<Self> {
        let mut normalizers = Vec::with_capacity(mu.len());
        for (ix, m) in mu.iter().enumerate() {
            let c = node_normalizer(eta.node_rate(ix), m).map_err(|e| match e {
                Error::NotErgodic { eta, tail, .. } => Error::NotErgodic {
                    node: ix,
                    eta,
                    tail,
                },
                other => other,
            })?;
            normalizers.push(c);
        }
        Ok(Self {
            eta,
            mu,
            normalizers,
        })
    }

    pub fn traffic(&self) -> &TrafficSolution {
        &self.eta
    }

    pub fn normalizers(&self) -> &[f64] {
        &self.normalizers
    }

    pub fn node_count(&self) -> usize {
        self.mu.len()
    }

    /// Unnormalized node weight `prod_{k<=count} eta_j / mu_j(k)`.
    pub fn node_weight(&self, ix: usize, count: usize) -> f64 {
        let eta_j = self.eta.node_rate(ix);
        let mut product = 1.0;
        for k in 1..=count {
            product *= eta_j / self.mu[ix].rate(k);
        }
        product
    }

    /// Stationary marginal probability of `count` customers at one node.
    pub fn marginal_pmf(&self, ix: usize, count: usize) -> f64 {
        self.node_weight(ix, count) / self.normalizers[ix]
    }

    /// Joint stationary probability of the queue-length vector.
    pub fn pmf(&self, n: &[usize]) -> f64 {
        assert_eq!(n.len(), self.mu.len(), "state dimension mismatch");
        n.iter()
            .enumerate()
            .map(|(ix, &count)| self.marginal_pmf(ix, count))
            .product()
    }
}

/// Queue-length generator of the unmodified network.
#[derive(Debug, Clone)]
pub struct JacksonGenerator {
    lambda_total: f64,
    routing: RoutingMatrix,
    mu: Vec<ServiceRateFunction>,
}

/// Builds the generator view of a network's queue-length process.
pub fn jackson_generator(spec: &NetworkSpec) -> JacksonGenerator {
    JacksonGenerator {
        lambda_total: spec.total_arrival_rate(),
        routing: spec.routing().clone(),
        mu: spec.services().to_vec(),
    }
}

impl JacksonGenerator {
    fn nodes(&self) -> usize {
        self.mu.len()
    }
}

impl Generator for JacksonGenerator {
    type State = Vec<usize>;

    fn outgoing(&self, n: &Vec<usize>) -> Vec<(Vec<usize>, f64)> {
        let nodes = self.nodes();
        debug_assert_eq!(n.len(), nodes);
        let mut out = Vec::new();
        // Arrivals: n + e_i at rate lambda * r(0, i).
        for i in 0..nodes {
            let rate = self.lambda_total * self.routing.get(0, i + 1);
            if rate > 0.0 {
                let mut target = n.clone();
                target[i] += 1;
                out.push((target, rate));
            }
        }
        for j in 0..nodes {
            if n[j] == 0 {
                continue;
            }
            let service = self.mu[j].rate(n[j]);
            // Transfers: n - e_j + e_i at rate mu_j(n_j) r(j, i).
            for i in 0..nodes {
                if i == j {
                    continue;
                }
                let rate = service * self.routing.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut target = n.clone();
                    target[j] -= 1;
                    target[i] += 1;
                    out.push((target, rate));
                }
            }
            // Departures: n - e_j at rate mu_j(n_j) r(j, 0).
            let rate = service * self.routing.get(j + 1, 0);
            if rate > 0.0 {
                let mut target = n.clone();
                target[j] -= 1;
                out.push((target, rate));
            }
        }
        out
    }
}

impl InflowEnumeration for JacksonGenerator {
    fn incoming(&self, n: &Vec<usize>) -> Vec<(Vec<usize>, f64)> {
        let nodes = self.nodes();
        debug_assert_eq!(n.len(), nodes);
        let mut inflows = Vec::new();
        // Arrival into i came from n - e_i.
        for i in 0..nodes {
            if n[i] == 0 {
                continue;
            }
            let rate = self.lambda_total * self.routing.get(0, i + 1);
            if rate > 0.0 {
                let mut source = n.clone();
                source[i] -= 1;
                inflows.push((source, rate));
            }
        }
        for j in 0..nodes {
            // Transfer j -> i landed here from n + e_j - e_i.
            for i in 0..nodes {
                if i == j || n[i] == 0 {
                    continue;
                }
                let rate = self.mu[j].rate(n[j] + 1) * self.routing.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut source = n.clone();
                    source[j] += 1;
                    source[i] -= 1;
                    inflows.push((source, rate));
                }
            }
            // Departure from j landed here from n + e_j.
            let rate = self.mu[j].rate(n[j] + 1) * self.routing.get(j + 1, 0);
            if rate > 0.0 {
                let mut source = n.clone();
                source[j] += 1;
                inflows.push((source, rate));
            }
        }
        inflows
    }
}
