//! Command dispatch: every CLI subcommand is a pure function from a parsed
//! spec document to a [`Report`].

use crate::capacity::{
    derive_controls, effective_arrival_rate, modified_generator, partition_nodes, ratio_or_zero,
    FrozenLaw, StationaryFamily,
};
use crate::chain::invariant_residual;
use crate::environment::{
    coupled_product_pmf, coupled_state_box, solve_theta, CoupledModel, CoupledState,
};
use crate::error::{Error, Result};
use crate::generator::{state_box, verify_global_balance};
use crate::jackson::{jackson_generator, ProductFormDistribution};
use crate::randomization::{modify, RerouteMode};
use crate::report::{
    ControlsReport, EnvironmentReport, PmfSample, Report, ResidualEntry, SimulationReport,
    StatusReport, TrafficReport, TvEntry,
};
use crate::simulate::{simulate_ctmc, Budget, OccupationMeasure};
use crate::spec::SpecDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Modify,
    Env,
    Simulate,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Modify => "modify",
            Command::Env => "env",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Threshold for coupled-balance residuals.
    pub tol_balance: f64,
    /// Threshold for linear-solve and uncoupled balance residuals.
    pub tol_solve: f64,
    pub seed: Option<u64>,
    pub events: Option<usize>,
    /// Overrides the document's rerouting mode.
    pub mode: Option<RerouteMode>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol_balance: 1e-8,
            tol_solve: 1e-10,
            seed: None,
            events: None,
            mode: None,
        }
    }
}

/// Largest probe-box bound with at most ~5000 states per status, capped.
fn probe_bound(nodes: usize, cap: usize) -> usize {
    let mut bound = cap;
    while bound > 1 && (bound + 1).pow(nodes as u32) > 5000 {
        bound -= 1;
    }
    bound
}

/// Runs one command against a validated document.
pub fn run(command: Command, doc: &SpecDocument, opts: &RunOptions) -> Result<Report> {
    match command {
        Command::Analyze => analyze(doc),
        Command::Modify => modify_cmd(doc, opts),
        Command::Env => env_cmd(doc, opts),
        Command::Simulate => simulate_cmd(doc, opts),
        Command::Verify => verify_cmd(doc, opts),
    }
}

fn traffic_report(dist: &ProductFormDistribution) -> TrafficReport {
    let eta = dist.traffic().extended().to_vec();
    let utilization = (0..dist.node_count())
        .map(|ix| ratio_or_zero(dist.traffic().node_rate(ix), dist_mu1(dist, ix)))
        .collect();
    TrafficReport { eta, utilization }
}

fn dist_mu1(dist: &ProductFormDistribution, ix: usize) -> f64 {
    // mu_j(1) recovered from the node weight at occupancy one.
    dist.traffic().node_rate(ix) / dist.node_weight(ix, 1)
}

fn sample_states(nodes: usize) -> Vec<Vec<usize>> {
    let mut states = vec![vec![0; nodes]];
    for i in 0..nodes {
        let mut s = vec![0; nodes];
        s[i] = 1;
        states.push(s);
    }
    states.push(vec![1; nodes]);
    states.dedup();
    states
}

fn analyze(doc: &SpecDocument) -> Result<Report> {
    let dist = ProductFormDistribution::new(&doc.network)?;
    let mut report = Report::new("analyze");
    report.traffic = Some(traffic_report(&dist));
    report.normalizers = Some(dist.normalizers().to_vec());
    report.pmf_samples = Some(
        sample_states(doc.network.node_count())
            .into_iter()
            .map(|state| PmfSample {
                probability: dist.pmf(&state),
                state,
            })
            .collect(),
    );
    Ok(report)
}

fn controls_report(doc: &SpecDocument, mode: RerouteMode) -> Result<(ControlsReport, Vec<Vec<f64>>)> {
    let gamma = doc.capacity.as_ref().ok_or_else(|| Error::Schema {
        path: "capacity".into(),
        message: "this command needs a capacity section".into(),
    })?;
    let controls = derive_controls(gamma);
    let modified = modify(doc.network.routing(), controls.alpha(), mode)?;
    let partition = partition_nodes(gamma);
    let rate = effective_arrival_rate(
        doc.network.total_arrival_rate(),
        controls.beta(),
        modified.kernel(),
    );
    let kernel_rows: Vec<Vec<f64>> = (0..modified.kernel().dim())
        .map(|i| modified.kernel().row(i))
        .collect();
    Ok((
        ControlsReport {
            alpha: controls.alpha().alphas().to_vec(),
            beta: controls.beta(),
            blocked_nodes: partition.blocked.clone(),
            effective_arrival_rate: rate,
            all_blocked: controls.all_blocked(),
        },
        kernel_rows,
    ))
}

/// The pmf the modified network is stationary for: the plain product form
/// when no node is blocked, else the family member freezing the blocked
/// coordinates at zero.
fn modified_reference_pmf(doc: &SpecDocument) -> Result<StationaryFamily> {
    let gamma = doc.capacity.as_ref().ok_or_else(|| Error::Schema {
        path: "capacity".into(),
        message: "this command needs a capacity section".into(),
    })?;
    let blocked = partition_nodes(gamma).blocked;
    let phi = FrozenLaw::point_mass(vec![0; blocked.len()]);
    crate::capacity::stationary_family(&doc.network, gamma, phi)
}

fn modify_cmd(doc: &SpecDocument, opts: &RunOptions) -> Result<Report> {
    let mode = opts.mode.unwrap_or(doc.mode);
    let (controls, kernel_rows) = controls_report(doc, mode)?;
    let gamma = doc.capacity.as_ref().expect("checked by controls_report");
    let gen = modified_generator(&doc.network, gamma, mode)?;
    let family = modified_reference_pmf(doc)?;
    let bound = probe_bound(doc.network.node_count(), 6);
    let probes = state_box(doc.network.node_count(), bound);
    let residual = verify_global_balance(|n| family.pmf(n), &gen, &probes);

    let dist = ProductFormDistribution::new(&doc.network)?;
    let mut report = Report::new("modify");
    report.traffic = Some(traffic_report(&dist));
    report.controls = Some(controls);
    report.modified_routing = Some(kernel_rows);
    report.residuals = Some(vec![ResidualEntry {
        name: format!("modified_balance(box {bound})"),
        value: residual,
        threshold: opts.tol_solve,
        pass: residual <= opts.tol_solve,
    }]);
    Ok(report)
}

fn build_model(doc: &SpecDocument) -> Result<CoupledModel> {
    let env = doc.environment.clone().ok_or_else(|| Error::Schema {
        path: "environment".into(),
        message: "this command needs an environment section".into(),
    })?;
    CoupledModel::new(doc.network.clone(), env)
}

fn env_cmd(doc: &SpecDocument, opts: &RunOptions) -> Result<Report> {
    let model = build_model(doc)?;
    let qred = model.reduced_generator()?;
    let theta = solve_theta(&qred)?;
    let statuses = model.environment().status_count();
    let bound = probe_bound(doc.network.node_count(), 5);
    let probes = coupled_state_box(doc.network.node_count(), bound, statuses);
    let residual = verify_coupled(&model, &theta, &probes)?;

    let dist = ProductFormDistribution::new(&doc.network)?;
    let mut report = Report::new("env");
    report.traffic = Some(traffic_report(&dist));
    report.environment = Some(EnvironmentReport {
        q_red: (0..statuses)
            .map(|k| (0..statuses).map(|m| qred.matrix()[(k, m)]).collect())
            .collect(),
        theta: theta.entries().to_vec(),
        per_status: (0..statuses)
            .map(|k| {
                let sc = model.per_status_controls(k);
                StatusReport {
                    status: k,
                    alpha: sc.controls.alpha().alphas().to_vec(),
                    beta: sc.controls.beta(),
                }
            })
            .collect(),
    });
    report.residuals = Some(vec![ResidualEntry {
        name: format!("coupled_balance(box {bound})"),
        value: residual,
        threshold: opts.tol_balance,
        pass: residual <= opts.tol_balance,
    }]);
    Ok(report)
}

fn verify_coupled(
    model: &CoupledModel,
    theta: &crate::chain::ProbabilityVector,
    probes: &[CoupledState],
) -> Result<f64> {
    crate::environment::verify_coupled_balance(model, theta, probes)
}

fn simulate_cmd(doc: &SpecDocument, opts: &RunOptions) -> Result<Report> {
    let settings = doc.simulation;
    let budget = match (opts.events, settings) {
        (Some(events), _) => Budget::Events(events),
        (None, Some(s)) => s.budget,
        (None, None) => Budget::Events(100_000),
    };
    let seed = opts
        .seed
        .or(settings.map(|s| s.seed))
        .unwrap_or(0);
    let nodes = doc.network.node_count();

    let mut report = Report::new("simulate");
    let mut comparisons = Vec::new();
    let (events, simulated_time);

    if doc.environment.is_some() {
        let model = build_model(doc)?;
        let theta = solve_theta(&model.reduced_generator()?)?;
        let xi = ProductFormDistribution::new(&doc.network)?;
        let gen = model.coupled_generator();
        let init = CoupledState::new(vec![0; nodes], 0);
        let trajectory = simulate_ctmc(&gen, init, budget, seed);
        events = trajectory.events.len();
        simulated_time = trajectory.total_time;
        let occ = OccupationMeasure::from_trajectory(&trajectory);
        let bound = probe_bound(nodes, 8);
        let probes = coupled_state_box(nodes, bound, theta.len());
        comparisons.push(TvEntry {
            name: "joint(queues,status) vs xi*theta".into(),
            total_variation: crate::simulate::empirical_compare(
                &occ,
                |s| coupled_product_pmf(&xi, &theta, s),
                &probes,
            ),
        });
        // Factorization of (queue at node 1, status).
        let joint = project_occupation(&occ, |s: &CoupledState| (s.queues[0], s.status));
        let pairs: Vec<(usize, usize)> = (0..=30)
            .flat_map(|n| (0..theta.len()).map(move |k| (n, k)))
            .collect();
        comparisons.push(TvEntry {
            name: "joint(queue1,status) vs marginal product".into(),
            total_variation: tv_over(
                &joint,
                |&(n, k)| xi.marginal_pmf(0, n) * theta.get(k),
                &pairs,
            ),
        });
    } else if doc.capacity.is_some() {
        let mode = opts.mode.unwrap_or(doc.mode);
        let gamma = doc.capacity.as_ref().unwrap();
        let gen = modified_generator(&doc.network, gamma, mode)?;
        let family = modified_reference_pmf(doc)?;
        let trajectory = simulate_ctmc(&gen, vec![0; nodes], budget, seed);
        events = trajectory.events.len();
        simulated_time = trajectory.total_time;
        let occ = OccupationMeasure::from_trajectory(&trajectory);
        let probes = state_box(nodes, probe_bound(nodes, 8));
        comparisons.push(TvEntry {
            name: "queues vs stationary family".into(),
            total_variation: crate::simulate::empirical_compare(
                &occ,
                |n| family.pmf(n),
                &probes,
            ),
        });
    } else {
        let dist = ProductFormDistribution::new(&doc.network)?;
        let gen = jackson_generator(&doc.network);
        let trajectory = simulate_ctmc(&gen, vec![0; nodes], budget, seed);
        events = trajectory.events.len();
        simulated_time = trajectory.total_time;
        let occ = OccupationMeasure::from_trajectory(&trajectory);
        let probes = state_box(nodes, probe_bound(nodes, 8));
        comparisons.push(TvEntry {
            name: "queues vs product form".into(),
            total_variation: crate::simulate::empirical_compare(&occ, |n| dist.pmf(n), &probes),
        });
    }

    report.simulation = Some(SimulationReport {
        seed,
        events,
        simulated_time,
        tv_comparisons: comparisons,
    });
    Ok(report)
}

fn project_occupation<S, K, F>(occ: &OccupationMeasure<S>, f: F) -> std::collections::BTreeMap<K, f64>
where
    S: Clone + Ord,
    K: Ord,
    F: Fn(&S) -> K,
{
    let mut out = std::collections::BTreeMap::new();
    for (s, mass) in occ.support() {
        *out.entry(f(s)).or_insert(0.0) += mass;
    }
    out
}

fn tv_over<K, F>(emp: &std::collections::BTreeMap<K, f64>, pmf: F, support: &[K]) -> f64
where
    K: Ord,
    F: Fn(&K) -> f64,
{
    let mut half_sum = 0.0;
    let mut emp_on = 0.0;
    let mut pmf_on = 0.0;
    for key in support {
        let e = emp.get(key).copied().unwrap_or(0.0);
        let p = pmf(key);
        half_sum += (e - p).abs();
        emp_on += e;
        pmf_on += p;
    }
    let emp_total: f64 = emp.values().sum();
    0.5 * (half_sum + (emp_total - emp_on).max(0.0) + (1.0 - pmf_on).max(0.0))
}

fn verify_cmd(doc: &SpecDocument, opts: &RunOptions) -> Result<Report> {
    let mut residuals = Vec::new();
    let mut push = |name: String, value: f64, threshold: f64| {
        residuals.push(ResidualEntry {
            name,
            value,
            threshold,
            pass: value <= threshold,
        });
    };

    let dist = ProductFormDistribution::new(&doc.network)?;
    let eta = dist.traffic();
    let scale = eta.total_arrival_rate().max(1.0);
    push(
        "traffic_solve".into(),
        invariant_residual(eta.extended(), doc.network.routing()) / scale,
        opts.tol_solve,
    );

    let nodes = doc.network.node_count();
    let bound = probe_bound(nodes, 6);
    let gen = jackson_generator(&doc.network);
    let probes = state_box(nodes, bound);
    push(
        format!("jackson_balance(box {bound})"),
        verify_global_balance(|n| dist.pmf(n), &gen, &probes),
        opts.tol_solve,
    );

    if let Some(gamma) = &doc.capacity {
        let mode = opts.mode.unwrap_or(doc.mode);
        let controls = derive_controls(gamma);
        let modified = modify(doc.network.routing(), controls.alpha(), mode)?;
        let weighted: Vec<f64> = (0..=nodes)
            .map(|ix| controls.alpha().get(ix) * eta.extended()[ix])
            .collect();
        push(
            "routing_invariance".into(),
            invariant_residual(&weighted, modified.kernel()) / scale,
            opts.tol_solve,
        );

        let mgen = modified_generator(&doc.network, gamma, mode)?;
        let blocked = partition_nodes(gamma).blocked;
        if blocked.is_empty() {
            push(
                format!("modified_balance(box {bound})"),
                verify_global_balance(|n| dist.pmf(n), &mgen, &probes),
                opts.tol_solve,
            );
        } else {
            // Two distinct frozen laws over the blocked coordinates.
            let laws = [
                ("phi=delta_0", FrozenLaw::point_mass(vec![0; blocked.len()])),
                ("phi=delta_2", FrozenLaw::point_mass(vec![2; blocked.len()])),
            ];
            for (tag, phi) in laws {
                let family = crate::capacity::stationary_family(&doc.network, gamma, phi)?;
                push(
                    format!("modified_balance[{tag}](box {bound})"),
                    verify_global_balance(|n| family.pmf(n), &mgen, &probes),
                    opts.tol_solve,
                );
            }
        }
    }

    if doc.environment.is_some() {
        let model = build_model(doc)?;
        let qred = model.reduced_generator()?;
        let theta = solve_theta(&qred)?;
        let mut worst = 0.0f64;
        for m in 0..theta.len() {
            let mut acc = 0.0;
            for k in 0..theta.len() {
                acc += theta.get(k) * qred.matrix()[(k, m)];
            }
            worst = worst.max(acc.abs());
        }
        push("theta_solve".into(), worst, opts.tol_solve);

        let cbound = probe_bound(nodes, 5);
        let probes = coupled_state_box(nodes, cbound, theta.len());
        push(
            format!("coupled_balance(box {cbound})"),
            verify_coupled(&model, &theta, &probes)?,
            opts.tol_balance,
        );
    }

    let mut report = Report::new("verify");
    report.traffic = Some(traffic_report(&dist));
    report.residuals = Some(residuals);
    Ok(report)
}
