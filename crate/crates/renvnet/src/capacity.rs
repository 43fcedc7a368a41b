//! Capacity rescaling with adapted routing.
//!
//! Service intensities are multiplied by per-node factors `gamma_j` in
//! `[0, infinity)`. The control pair `(alpha, beta)` with
//! `alpha_j * beta = gamma_j` rescales continuation routing and total
//! network input so that every node keeps its original utilization
//! `eta_j / mu_j(n_j)`: degrading factors reject part of the traffic via
//! the randomized transforms, upgrading factors inflate the input by
//! `beta = max_j gamma_j` instead.

use crate::chain::{check_reversible, ProbabilityVector, RoutingMatrix, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::generator::{Generator, InflowEnumeration};
use crate::jackson::{solve_traffic, NetworkSpec, ProductFormDistribution, ServiceRateFunction};
use crate::randomization::{modify, AcceptanceVector, RerouteMode};

/// Division with the convention `0/0 = 0`.
pub fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-node service capacity factors `gamma_j in [0, infinity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityFactors {
    gamma: Vec<f64>,
}

impl CapacityFactors {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        for (ix, &g) in gamma.iter().enumerate() {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::EntryRange {
                    row: 0,
                    col: ix,
                    value: g,
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        Ok(Self { gamma })
    }

    pub fn unchanged(nodes: usize) -> Self {
        Self {
            gamma: vec![1.0; nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn get(&self, ix: usize) -> f64 {
        self.gamma[ix]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn max_factor(&self) -> f64 {
        self.gamma.iter().cloned().fold(0.0, f64::max)
    }
}

/// Acceptance vector on the extended index set (with `alpha_0 = 1`)
/// plus the input inflation factor `beta >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    alpha: AcceptanceVector,
    beta: f64,
}

impl ControlPair {
    pub fn alpha(&self) -> &AcceptanceVector {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when every node is blocked (`alpha` accepts only the exterior).
    pub fn all_blocked(&self) -> bool {
        self.alpha.alphas().iter().skip(1).all(|&a| a == 0.0)
    }
}

/// Derives the control pair from capacity factors:
/// `alpha_j = gamma_j, beta = 1` while no factor exceeds one, else
/// `alpha_j = gamma_j / max_gamma, beta = max_gamma`.
pub fn derive_controls(gamma: &CapacityFactors) -> ControlPair {
    let max = gamma.max_factor();
    let (scale, beta) = if max <= 1.0 { (1.0, 1.0) } else { (max, max) };
    let mut alphas = Vec::with_capacity(gamma.len() + 1);
    alphas.push(1.0);
    for &g in gamma.as_slice() {
        alphas.push(g / scale);
    }
    let alpha = AcceptanceVector::new(alphas).expect("alpha_0 = 1 is never all-rejecting");
    ControlPair { alpha, beta }
}

/// Blocked (`gamma_j = 0`) and working (`gamma_j > 0`) nodes, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePartition {
    pub blocked: Vec<usize>,
    pub working: Vec<usize>,
}

pub fn partition_nodes(gamma: &CapacityFactors) -> NodePartition {
    let mut blocked = Vec::new();
    let mut working = Vec::new();
    for (ix, &g) in gamma.as_slice().iter().enumerate() {
        if g == 0.0 {
            blocked.push(ix);
        } else {
            working.push(ix);
        }
    }
    NodePartition { blocked, working }
}

/// Queue-length generator of the capacity-modified network: arrivals at
/// `beta * lambda * r_alpha(0,i)`, service events at
/// `gamma_j * mu_j(n_j) * r_alpha(j, .)`.
#[derive(Debug, Clone)]
pub struct ModifiedGenerator {
    lambda_total: f64,
    beta: f64,
    kernel: RoutingMatrix,
    gamma: CapacityFactors,
    mu: Vec<ServiceRateFunction>,
}

impl ModifiedGenerator {
    pub fn kernel(&self) -> &RoutingMatrix {
        &self.kernel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn nodes(&self) -> usize {
        self.mu.len()
    }
}

/// Builds the modified generator for the given mode. Reflection mode
/// requires the extended routing matrix to be reversible with respect to
/// the traffic solution.
pub fn modified_generator(
    spec: &NetworkSpec,
    gamma: &CapacityFactors,
    mode: RerouteMode,
) -> Result<ModifiedGenerator> {
    if gamma.len() != spec.node_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.node_count(),
            found: gamma.len(),
        });
    }
    if mode == RerouteMode::Reflection {
        check_routing_reversible(spec)?;
    }
    let controls = derive_controls(gamma);
    let modified = modify(spec.routing(), controls.alpha(), mode)?;
    Ok(ModifiedGenerator {
        lambda_total: spec.total_arrival_rate(),
        beta: controls.beta(),
        kernel: modified.kernel().clone(),
        gamma: gamma.clone(),
        mu: spec.services().to_vec(),
    })
}

/// Builds the modified generator from an externally supplied rerouting
/// kernel and input factor. The product-form result holds when the kernel
/// has invariant measure `(alpha_j eta_j)`; that hypothesis is the
/// caller's responsibility here.
pub fn modified_generator_with_kernel(
    spec: &NetworkSpec,
    gamma: &CapacityFactors,
    beta: f64,
    kernel: RoutingMatrix,
) -> Result<ModifiedGenerator> {
    if gamma.len() != spec.node_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.node_count(),
            found: gamma.len(),
        });
    }
    if kernel.dim() != spec.routing().dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.routing().dim(),
            found: kernel.dim(),
        });
    }
    Ok(ModifiedGenerator {
        lambda_total: spec.total_arrival_rate(),
        beta,
        kernel,
        gamma: gamma.clone(),
        mu: spec.services().to_vec(),
    })
}

/// Detailed balance of the extended routing matrix with respect to the
/// normalized traffic solution (detailed balance is scale invariant).
pub fn check_routing_reversible(spec: &NetworkSpec) -> Result<()> {
    let eta = solve_traffic(spec)?;
    let total: f64 = eta.extended().iter().sum();
    let pi = ProbabilityVector::new(eta.extended().iter().map(|&e| e / total).collect())?;
    if !check_reversible(spec.routing(), &pi, DEFAULT_TOL) {
        let mut worst = 0.0f64;
        for i in 0..spec.routing().dim() {
            for j in 0..spec.routing().dim() {
                let flow =
                    pi.get(i) * spec.routing().get(i, j) - pi.get(j) * spec.routing().get(j, i);
                worst = worst.max(flow.abs());
            }
        }
        return Err(Error::NotReversible {
            max_violation: worst,
        });
    }
    Ok(())
}

impl Generator for ModifiedGenerator {
    type State = Vec<usize>;

    fn outgoing(&self, n: &Vec<usize>) -> Vec<(Vec<usize>, f64)> {
        let nodes = self.nodes();
        debug_assert_eq!(n.len(), nodes);
        let mut out = Vec::new();
        for i in 0..nodes {
            let rate = self.beta * self.lambda_total * self.kernel.get(0, i + 1);
            if rate > 0.0 {
                let mut target = n.clone();
                target[i] += 1;
                out.push((target, rate));
            }
        }
        for j in 0..nodes {
            if n[j] == 0 || self.gamma.get(j) == 0.0 {
                continue;
            }
            let service = self.gamma.get(j) * self.mu[j].rate(n[j]);
            for i in 0..nodes {
                if i == j {
                    continue;
                }
                let rate = service * self.kernel.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut target = n.clone();
                    target[j] -= 1;
                    target[i] += 1;
                    out.push((target, rate));
                }
            }
            let rate = service * self.kernel.get(j + 1, 0);
            if rate > 0.0 {
                let mut target = n.clone();
                target[j] -= 1;
                out.push((target, rate));
            }
        }
        out
    }
}

impl InflowEnumeration for ModifiedGenerator {
    fn incoming(&self, n: &Vec<usize>) -> Vec<(Vec<usize>, f64)> {
        let nodes = self.nodes();
        debug_assert_eq!(n.len(), nodes);
        let mut inflows = Vec::new();
        for i in 0..nodes {
            if n[i] == 0 {
                continue;
            }
            let rate = self.beta * self.lambda_total * self.kernel.get(0, i + 1);
            if rate > 0.0 {
                let mut source = n.clone();
                source[i] -= 1;
                inflows.push((source, rate));
            }
        }
        for j in 0..nodes {
            if self.gamma.get(j) == 0.0 {
                continue;
            }
            for i in 0..nodes {
                if i == j || n[i] == 0 {
                    continue;
                }
                let rate =
                    self.gamma.get(j) * self.mu[j].rate(n[j] + 1) * self.kernel.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut source = n.clone();
                    source[j] += 1;
                    source[i] -= 1;
                    inflows.push((source, rate));
                }
            }
            let rate = self.gamma.get(j) * self.mu[j].rate(n[j] + 1) * self.kernel.get(j + 1, 0);
            if rate > 0.0 {
                let mut source = n.clone();
                source[j] += 1;
                inflows.push((source, rate));
            }
        }
        inflows
    }
}

/// Probability mass over the blocked coordinates, either finitely
/// supported or the unmodified network's own product marginal.
#[derive(Debug, Clone)]
pub enum FrozenLaw {
    /// Explicit support: pairs of (blocked coordinates, probability).
    Finite(Vec<(Vec<usize>, f64)>),
    /// The original stationary marginal on the blocked nodes; selecting it
    /// reproduces the unmodified product form pointwise.
    ProductMarginal,
}

impl FrozenLaw {
    /// Point mass at the given blocked coordinates.
    pub fn point_mass(coords: Vec<usize>) -> Self {
        FrozenLaw::Finite(vec![(coords, 1.0)])
    }

    /// Finitely supported law; masses must sum to one.
    pub fn finite(support: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 || support.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::InvalidFrozenLaw { total });
        }
        Ok(FrozenLaw::Finite(support))
    }
}

/// The stationary family `xi^gamma_phi`: product form over the working
/// nodes times a frozen law over the blocked coordinates.
#[derive(Debug, Clone)]
pub struct StationaryFamily {
    dist: ProductFormDistribution,
    partition: NodePartition,
    phi: FrozenLaw,
}

/// Builds the stationary family for the capacity-modified network.
/// Requires the unmodified network to be ergodic; `phi` lives on the
/// blocked coordinates in increasing node order.
pub fn stationary_family(
    spec: &NetworkSpec,
    gamma: &CapacityFactors,
    phi: FrozenLaw,
) -> Result<StationaryFamily> {
    if gamma.len() != spec.node_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.node_count(),
            found: gamma.len(),
        });
    }
    let dist = ProductFormDistribution::new(spec)?;
    let partition = partition_nodes(gamma);
    if let FrozenLaw::Finite(support) = &phi {
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidFrozenLaw { total });
        }
        for (coords, _) in support {
            if coords.len() != partition.blocked.len() {
                return Err(Error::DimensionMismatch {
                    expected: partition.blocked.len(),
                    found: coords.len(),
                });
            }
        }
    }
    Ok(StationaryFamily {
        dist,
        partition,
        phi,
    })
}

impl StationaryFamily {
    pub fn partition(&self) -> &NodePartition {
        &self.partition
    }

    pub fn distribution(&self) -> &ProductFormDistribution {
        &self.dist
    }

    /// Evaluates `xi^gamma_phi` at a queue-length vector.
    pub fn pmf(&self, n: &[usize]) -> f64 {
        let working_part: f64 = self
            .partition
            .working
            .iter()
            .map(|&ix| self.dist.marginal_pmf(ix, n[ix]))
            .product();
        let blocked_coords: Vec<usize> =
            self.partition.blocked.iter().map(|&ix| n[ix]).collect();
        let frozen: f64 = match &self.phi {
            FrozenLaw::Finite(support) => support
                .iter()
                .filter(|(coords, _)| coords == &blocked_coords)
                .map(|(_, p)| *p)
                .sum(),
            FrozenLaw::ProductMarginal => self
                .partition
                .blocked
                .iter()
                .map(|&ix| self.dist.marginal_pmf(ix, n[ix]))
                .product(),
        };
        working_part * frozen
    }
}

/// Effective arrival rate after modification,
/// `beta * lambda * (1 - r_alpha(0,0))`.
pub fn effective_arrival_rate(lambda: f64, beta: f64, r_alpha: &RoutingMatrix) -> f64 {
    beta * lambda * (1.0 - r_alpha.get(0, 0))
}
