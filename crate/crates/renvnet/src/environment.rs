//! Jackson networks coupled to a random environment.
//!
//! A finite status set `K` modulates the network: status `k` rescales the
//! service capacities by `gamma(k)` and the routing adapts through the
//! per-status controls `(alpha(k), beta(k))`. The interaction is two-way:
//! the environment moves on its own with generator `V`, and every customer
//! leaving the network from node `j` triggers an immediate status jump
//! drawn from the stochastic matrix `R_j`. A departure and its triggered
//! jump form a single atomic transition.
//!
//! The coupled process has the product-form stationary law
//! `pi(n, k) = xi(n) theta(k)`, where `theta` solves `theta * Q_red = 0`
//! for the reduced K x K generator built here.

use nalgebra::{DMatrix, DVector};

use crate::capacity::{derive_controls, CapacityFactors, ControlPair};
use crate::chain::{
    check_irreducible, invariant_residual, ClassDecomposition, ProbabilityVector, RoutingMatrix,
    DEFAULT_TOL, VALIDATION_TOL,
};
use crate::error::{Error, Result};
use crate::generator::{Generator, InflowEnumeration};
use crate::jackson::{solve_traffic, NetworkSpec, ProductFormDistribution, TrafficSolution};
use crate::randomization::{modify, RerouteMode};

/// How routing reacts to the environment's capacity factors.
#[derive(Debug, Clone)]
pub enum EnvRouting {
    Skipping,
    Reflection,
    /// Externally supplied rerouting kernels, one per status. The
    /// product-form theorem requires each kernel to leave
    /// `(alpha_j(k) eta_j)` invariant; that is checked at verification
    /// time, not here.
    UserSupplied(Vec<RoutingMatrix>),
}

impl EnvRouting {
    pub fn name(&self) -> &'static str {
        match self {
            EnvRouting::Skipping => "skipping",
            EnvRouting::Reflection => "reflection",
            EnvRouting::UserSupplied(_) => "user_supplied",
        }
    }
}

/// Environment description: status generator `V`, departure-triggered jump
/// matrices `R_j`, per-status capacity factors, and the rerouting mode.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    v: DMatrix<f64>,
    jump: Vec<RoutingMatrix>,
    gamma_of: Vec<CapacityFactors>,
    mode: EnvRouting,
}

impl EnvironmentSpec {
    pub fn new(
        v: DMatrix<f64>,
        jump: Vec<RoutingMatrix>,
        gamma_of: Vec<CapacityFactors>,
        mode: EnvRouting,
    ) -> Result<Self> {
        let statuses = v.nrows();
        if v.ncols() != statuses || statuses == 0 {
            return Err(Error::DimensionMismatch {
                expected: statuses.max(1),
                found: v.ncols(),
            });
        }
        for k in 0..statuses {
            let mut row_sum = 0.0;
            for m in 0..statuses {
                let rate = v[(k, m)];
                if !rate.is_finite() {
                    return Err(Error::NotAGenerator {
                        row: k,
                        defect: f64::NAN,
                    });
                }
                if k != m && rate < 0.0 {
                    return Err(Error::NotAGenerator {
                        row: k,
                        defect: rate,
                    });
                }
                row_sum += rate;
            }
            if row_sum.abs() > VALIDATION_TOL {
                return Err(Error::NotAGenerator {
                    row: k,
                    defect: row_sum,
                });
            }
        }
        for r in &jump {
            if r.dim() != statuses {
                return Err(Error::DimensionMismatch {
                    expected: statuses,
                    found: r.dim(),
                });
            }
        }
        if gamma_of.len() != statuses {
            return Err(Error::DimensionMismatch {
                expected: statuses,
                found: gamma_of.len(),
            });
        }
        let nodes = jump.len();
        for g in &gamma_of {
            if g.len() != nodes {
                return Err(Error::DimensionMismatch {
                    expected: nodes,
                    found: g.len(),
                });
            }
        }
        if let EnvRouting::UserSupplied(kernels) = &mode {
            if kernels.len() != statuses {
                return Err(Error::DimensionMismatch {
                    expected: statuses,
                    found: kernels.len(),
                });
            }
        }
        Ok(Self {
            v,
            jump,
            gamma_of,
            mode,
        })
    }

    pub fn status_count(&self) -> usize {
        self.v.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.jump.len()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn jump(&self, node_ix: usize) -> &RoutingMatrix {
        &self.jump[node_ix]
    }

    pub fn gamma(&self, status: usize) -> &CapacityFactors {
        &self.gamma_of[status]
    }

    pub fn mode(&self) -> &EnvRouting {
        &self.mode
    }
}

/// Joint state of the coupled process: queue-length vector plus status.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoupledState {
    pub queues: Vec<usize>,
    pub status: usize,
}

impl CoupledState {
    pub fn new(queues: Vec<usize>, status: usize) -> Self {
        Self { queues, status }
    }
}

/// Controls and rerouting kernel cached for one environment status.
#[derive(Debug, Clone)]
pub struct StatusControls {
    pub controls: ControlPair,
    pub kernel: RoutingMatrix,
}

/// A network coupled to its environment, with all per-status kernels
/// built eagerly so later queries are read-only.
#[derive(Debug, Clone)]
pub struct CoupledModel {
    network: NetworkSpec,
    env: EnvironmentSpec,
    traffic: TrafficSolution,
    per_status: Vec<StatusControls>,
}

impl CoupledModel {
    pub fn new(network: NetworkSpec, env: EnvironmentSpec) -> Result<Self> {
        if env.node_count() != network.node_count() {
            return Err(Error::DimensionMismatch {
                expected: network.node_count(),
                found: env.node_count(),
            });
        }
        let traffic = solve_traffic(&network)?;
        let mut per_status = Vec::with_capacity(env.status_count());
        for k in 0..env.status_count() {
            per_status.push(build_status_controls(&network, &env, k)?);
        }
        Ok(Self {
            network,
            env,
            traffic,
            per_status,
        })
    }

    pub fn network(&self) -> &NetworkSpec {
        &self.network
    }

    pub fn environment(&self) -> &EnvironmentSpec {
        &self.env
    }

    pub fn traffic(&self) -> &TrafficSolution {
        &self.traffic
    }

    /// Cached `(alpha(k), beta(k))` and rerouting kernel for one status.
    pub fn per_status_controls(&self, status: usize) -> &StatusControls {
        &self.per_status[status]
    }

    pub fn coupled_generator(&self) -> CoupledGenerator<'_> {
        CoupledGenerator { model: self }
    }

    /// Reduced K x K generator
    /// `Q_red = V + sum_j eta_j I_(gamma_j . r_alpha(.)(j,0)) (R_j - I)`.
    pub fn reduced_generator(&self) -> Result<ReducedGenerator> {
        let statuses = self.env.status_count();
        let nodes = self.network.node_count();
        let mut q = self.env.v().clone();
        for j in 0..nodes {
            let eta_j = self.traffic.node_rate(j);
            let r_j = self.env.jump(j);
            for k in 0..statuses {
                let sc = &self.per_status[k];
                let weight =
                    eta_j * self.env.gamma(k).get(j) * sc.kernel.get(j + 1, 0);
                if weight == 0.0 {
                    continue;
                }
                for m in 0..statuses {
                    let delta = if k == m { 1.0 } else { 0.0 };
                    q[(k, m)] += weight * (r_j.get(k, m) - delta);
                }
            }
        }
        ReducedGenerator::new(q)
    }

    /// Mode-specific hypothesis of the product-form theorem: reflection
    /// needs a reversible routing matrix, user-supplied kernels must leave
    /// `(alpha_j(k) eta_j)` invariant. Skipping needs nothing extra.
    pub fn check_product_form_hypothesis(&self) -> Result<()> {
        match self.env.mode() {
            EnvRouting::Skipping => Ok(()),
            EnvRouting::Reflection => {
                crate::capacity::check_routing_reversible(&self.network).map_err(|e| match e {
                    Error::NotReversible { max_violation } => Error::HypothesisViolated(format!(
                        "reflection rerouting requires a reversible routing matrix \
                         (detailed-balance violation {max_violation})"
                    )),
                    other => other,
                })
            }
            EnvRouting::UserSupplied(_) => {
                for (k, sc) in self.per_status.iter().enumerate() {
                    let invariant: Vec<f64> = (0..self.network.node_count() + 1)
                        .map(|ix| sc.controls.alpha().get(ix) * self.traffic.extended()[ix])
                        .collect();
                    let residual = invariant_residual(&invariant, &sc.kernel);
                    let scale = self.traffic.total_arrival_rate().max(1.0);
                    if residual > DEFAULT_TOL * scale {
                        return Err(Error::HypothesisViolated(format!(
                            "user-supplied kernel for status {k} does not leave \
                             (alpha_j eta_j) invariant: residual {residual}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn build_status_controls(
    network: &NetworkSpec,
    env: &EnvironmentSpec,
    status: usize,
) -> Result<StatusControls> {
    let controls = derive_controls(env.gamma(status));
    let kernel = match env.mode() {
        EnvRouting::Skipping => modify(network.routing(), controls.alpha(), RerouteMode::Skipping)?
            .kernel()
            .clone(),
        EnvRouting::Reflection => {
            modify(network.routing(), controls.alpha(), RerouteMode::Reflection)?
                .kernel()
                .clone()
        }
        EnvRouting::UserSupplied(kernels) => {
            let kernel = &kernels[status];
            if kernel.dim() != network.routing().dim() {
                return Err(Error::DimensionMismatch {
                    expected: network.routing().dim(),
                    found: kernel.dim(),
                });
            }
            kernel.clone()
        }
    };
    Ok(StatusControls { controls, kernel })
}

/// Reduced environment generator with validated generator property.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGenerator {
    matrix: DMatrix<f64>,
}

impl ReducedGenerator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let statuses = matrix.nrows();
        for k in 0..statuses {
            let mut row_sum = 0.0;
            for m in 0..statuses {
                let q = matrix[(k, m)];
                if k != m && q < -DEFAULT_TOL {
                    return Err(Error::NotAGenerator { row: k, defect: q });
                }
                row_sum += q;
            }
            if row_sum.abs() > DEFAULT_TOL {
                return Err(Error::NotAGenerator {
                    row: k,
                    defect: row_sum,
                });
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn status_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// Communicating classes of the embedded jump structure.
    pub fn classes(&self) -> ClassDecomposition {
        let statuses = self.status_count();
        // Reuse the chain decomposition on the uniformized jump pattern.
        let mut rows = vec![vec![0.0; statuses]; statuses];
        for k in 0..statuses {
            let mut off = 0.0;
            for m in 0..statuses {
                if m != k && self.matrix[(k, m)] > 0.0 {
                    rows[k][m] = 1.0;
                    off += 1.0;
                }
            }
            if off == 0.0 {
                rows[k][k] = 1.0;
            } else {
                for value in rows[k].iter_mut() {
                    *value /= off;
                }
            }
        }
        let pattern = RoutingMatrix::from_rows(&rows).expect("pattern matrix is stochastic");
        check_irreducible(&pattern)
    }
}

/// Unique stochastic solution of `theta * Q_red = 0`.
pub fn solve_theta(qred: &ReducedGenerator) -> Result<ProbabilityVector> {
    let decomp = qred.classes();
    let closed = decomp.closed_classes();
    if closed.len() != 1 {
        return Err(Error::NotIrreducible {
            closed_classes: closed,
        });
    }
    let statuses = qred.status_count();
    let mut a = qred.matrix().transpose();
    for j in 0..statuses {
        a[(statuses - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(statuses);
    b[statuses - 1] = 1.0;
    let theta = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem("solving the reduced generator equation"))?;
    let entries: Vec<f64> = theta.iter().map(|&v| v.max(0.0)).collect();
    let theta = ProbabilityVector::new(entries)?;
    // Residual ||theta Q_red||_inf.
    let mut worst = 0.0f64;
    for m in 0..statuses {
        let mut acc = 0.0;
        for k in 0..statuses {
            acc += theta.get(k) * qred.matrix()[(k, m)];
        }
        worst = worst.max(acc.abs());
    }
    let scale = qred
        .matrix()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    if worst > VALIDATION_TOL * scale {
        return Err(Error::SingularSystem("reduced-equation residual above tolerance"));
    }
    Ok(theta)
}

/// Literal product `pi(n, k) = xi(n) theta(k)`.
pub fn coupled_product_pmf(
    xi: &ProductFormDistribution,
    theta: &ProbabilityVector,
    state: &CoupledState,
) -> f64 {
    xi.pmf(&state.queues) * theta.get(state.status)
}

/// Generator of the coupled process.
#[derive(Debug, Clone)]
pub struct CoupledGenerator<'a> {
    model: &'a CoupledModel,
}

impl CoupledGenerator<'_> {
    fn nodes(&self) -> usize {
        self.model.network.node_count()
    }

    fn statuses(&self) -> usize {
        self.model.env.status_count()
    }
}

impl Generator for CoupledGenerator<'_> {
    type State = CoupledState;

    fn outgoing(&self, state: &CoupledState) -> Vec<(CoupledState, f64)> {
        let nodes = self.nodes();
        let statuses = self.statuses();
        debug_assert_eq!(state.queues.len(), nodes);
        let model = self.model;
        let k = state.status;
        let sc = &model.per_status[k];
        let lambda = model.network.total_arrival_rate();
        let mut out = Vec::new();

        // Arrivals keep the status.
        for i in 0..nodes {
            let rate = sc.controls.beta() * lambda * sc.kernel.get(0, i + 1);
            if rate > 0.0 {
                let mut queues = state.queues.clone();
                queues[i] += 1;
                out.push((CoupledState::new(queues, k), rate));
            }
        }
        for j in 0..nodes {
            if state.queues[j] == 0 {
                continue;
            }
            let gamma_j = model.env.gamma(k).get(j);
            if gamma_j == 0.0 {
                continue;
            }
            let service = gamma_j * model.network.service(j).rate(state.queues[j]);
            // Internal transfers keep the status.
            for i in 0..nodes {
                if i == j {
                    continue;
                }
                let rate = service * sc.kernel.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut queues = state.queues.clone();
                    queues[j] -= 1;
                    queues[i] += 1;
                    out.push((CoupledState::new(queues, k), rate));
                }
            }
            // Departures trigger a status jump atomically.
            let departure = service * sc.kernel.get(j + 1, 0);
            if departure > 0.0 {
                for m in 0..statuses {
                    let rate = departure * model.env.jump(j).get(k, m);
                    if rate > 0.0 {
                        let mut queues = state.queues.clone();
                        queues[j] -= 1;
                        out.push((CoupledState::new(queues, m), rate));
                    }
                }
            }
        }
        // Spontaneous environment moves.
        for m in 0..statuses {
            if m != k {
                let rate = model.env.v()[(k, m)];
                if rate > 0.0 {
                    out.push((CoupledState::new(state.queues.clone(), m), rate));
                }
            }
        }
        out
    }
}

impl InflowEnumeration for CoupledGenerator<'_> {
    fn incoming(&self, state: &CoupledState) -> Vec<(CoupledState, f64)> {
        let nodes = self.nodes();
        let statuses = self.statuses();
        debug_assert_eq!(state.queues.len(), nodes);
        let model = self.model;
        let k = state.status;
        let sc = &model.per_status[k];
        let lambda = model.network.total_arrival_rate();
        let mut inflows = Vec::new();

        // An arrival into i left from (n - e_i, k).
        for i in 0..nodes {
            if state.queues[i] == 0 {
                continue;
            }
            let rate = sc.controls.beta() * lambda * sc.kernel.get(0, i + 1);
            if rate > 0.0 {
                let mut queues = state.queues.clone();
                queues[i] -= 1;
                inflows.push((CoupledState::new(queues, k), rate));
            }
        }
        // A transfer j -> i left from (n + e_j - e_i, k).
        for j in 0..nodes {
            let gamma_j = model.env.gamma(k).get(j);
            if gamma_j == 0.0 {
                continue;
            }
            for i in 0..nodes {
                if i == j || state.queues[i] == 0 {
                    continue;
                }
                let service = gamma_j * model.network.service(j).rate(state.queues[j] + 1);
                let rate = service * sc.kernel.get(j + 1, i + 1);
                if rate > 0.0 {
                    let mut queues = state.queues.clone();
                    queues[j] += 1;
                    queues[i] -= 1;
                    inflows.push((CoupledState::new(queues, k), rate));
                }
            }
        }
        // A departure from j in status m landed here via R_j(m, k).
        for j in 0..nodes {
            for m in 0..statuses {
                let gamma_j = model.env.gamma(m).get(j);
                if gamma_j == 0.0 {
                    continue;
                }
                let sc_m = &model.per_status[m];
                let service = gamma_j * model.network.service(j).rate(state.queues[j] + 1);
                let rate =
                    service * sc_m.kernel.get(j + 1, 0) * model.env.jump(j).get(m, k);
                if rate > 0.0 {
                    let mut queues = state.queues.clone();
                    queues[j] += 1;
                    inflows.push((CoupledState::new(queues, m), rate));
                }
            }
        }
        // A spontaneous environment move from (n, m).
        for m in 0..statuses {
            if m != k {
                let rate = model.env.v()[(m, k)];
                if rate > 0.0 {
                    inflows.push((CoupledState::new(state.queues.clone(), m), rate));
                }
            }
        }
        inflows
    }
}

/// Max global-balance residual of `pi = xi (x) theta` over the probe
/// states, after checking the mode-specific hypothesis.
pub fn verify_coupled_balance(
    model: &CoupledModel,
    theta: &ProbabilityVector,
    probes: &[CoupledState],
) -> Result<f64> {
    model.check_product_form_hypothesis()?;
    if theta.len() != model.env.status_count() {
        return Err(Error::DimensionMismatch {
            expected: model.env.status_count(),
            found: theta.len(),
        });
    }
    let xi = ProductFormDistribution::new(&model.network)?;
    let gen = model.coupled_generator();
    let mut worst = 0.0f64;
    for state in probes {
        let outflow = coupled_product_pmf(&xi, theta, state) * gen.exit_rate(state);
        let inflow: f64 = gen
            .incoming(state)
            .iter()
            .map(|(source, rate)| coupled_product_pmf(&xi, theta, source) * rate)
            .sum();
        worst = worst.max((outflow - inflow).abs());
    }
    Ok(worst)
}

/// All coupled states over a queue box `{0..=bound}^nodes` times `K`.
pub fn coupled_state_box(nodes: usize, bound: usize, statuses: usize) -> Vec<CoupledState> {
    crate::generator::state_box(nodes, bound)
        .into_iter()
        .flat_map(|queues| {
            (0..statuses).map(move |k| CoupledState::new(queues.clone(), k))
        })
        .collect()
}
