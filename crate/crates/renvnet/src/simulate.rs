//! Event-driven CTMC simulation and regenerative estimation.
//!
//! Trajectories are exponential races over a [`Generator`]: each step
//! samples a holding time from the total exit rate by inverse transform
//! and the target proportionally to its rate. All randomness comes from a
//! counter-based generator (`ChaCha8`), with one substream per replication
//! so results do not depend on how work is batched.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::RoutingMatrix;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::randomization::{modify, sample_row, AcceptanceVector, RerouteMode};

/// Simulation budget: a fixed number of transitions or a time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Events(usize),
    Time(f64),
}

/// One simulated path: initial state, `(time, target)` event log, and the
/// total simulated time.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub initial: S,
    pub events: Vec<(f64, S)>,
    pub total_time: f64,
    /// Set when an absorbing state ended the run before the budget.
    pub absorbed: bool,
}

/// Simulates the generator from `init` until the budget is exhausted.
/// Identical inputs and seed produce identical trajectories.
pub fn simulate_ctmc<G>(gen: &G, init: G::State, budget: Budget, seed: u64) -> Trajectory<G::State>
where
    G: Generator,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = init.clone();
    let mut events = Vec::new();
    let mut clock = 0.0f64;
    let mut absorbed = false;
    loop {
        match budget {
            Budget::Events(n) if events.len() >= n => break,
            Budget::Time(t) if clock >= t => {
                clock = t;
                break;
            }
            _ => {}
        }
        let outgoing = gen.outgoing(&state);
        let total: f64 = outgoing.iter().map(|(_, rate)| rate).sum();
        if outgoing.is_empty() || total <= 0.0 {
            absorbed = true;
            break;
        }
        // Inverse-transform exponential holding time.
        let u: f64 = rng.random();
        let hold = -(1.0 - u).ln() / total;
        let next_clock = clock + hold;
        if let Budget::Time(t) = budget {
            if next_clock > t {
                clock = t;
                break;
            }
        }
        clock = next_clock;
        // Proportional target selection.
        let mut draw: f64 = rng.random::<f64>() * total;
        let mut chosen = outgoing.len() - 1;
        for (ix, (_, rate)) in outgoing.iter().enumerate() {
            draw -= rate;
            if draw < 0.0 {
                chosen = ix;
                break;
            }
        }
        state = outgoing[chosen].0.clone();
        events.push((clock, state.clone()));
    }
    Trajectory {
        initial: init,
        events,
        total_time: clock,
        absorbed,
    }
}

/// Fraction of simulated time spent in each visited state. Stored in a
/// sorted map so iteration (and therefore float accumulation) order is
/// deterministic.
#[derive(Debug, Clone)]
pub struct OccupationMeasure<S> {
    fractions: BTreeMap<S, f64>,
}

impl<S: Clone + Ord> OccupationMeasure<S> {
    pub fn from_trajectory(trajectory: &Trajectory<S>) -> Self {
        let mut time_in: BTreeMap<S, f64> = BTreeMap::new();
        assert!(
            trajectory.total_time > 0.0,
            "occupation measure needs positive simulated time"
        );
        let mut current = trajectory.initial.clone();
        let mut last = 0.0;
        for (time, target) in &trajectory.events {
            *time_in.entry(current).or_insert(0.0) += time - last;
            current = target.clone();
            last = *time;
        }
        *time_in.entry(current).or_insert(0.0) += trajectory.total_time - last;
        let total = trajectory.total_time;
        let fractions = time_in
            .into_iter()
            .map(|(s, t)| (s, t / total))
            .collect();
        Self { fractions }
    }

    pub fn fraction(&self, state: &S) -> f64 {
        self.fractions.get(state).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&S, f64)> {
        self.fractions.iter().map(|(s, &f)| (s, f))
    }

    pub fn total_mass(&self) -> f64 {
        self.fractions.values().sum()
    }
}

/// Total-variation distance between an occupation measure and a pmf over a
/// finite probe support, with the off-support mass of both sides accounted
/// for.
pub fn empirical_compare<S, F>(occ: &OccupationMeasure<S>, pmf: F, support: &[S]) -> f64
where
    S: Clone + Ord,
    F: Fn(&S) -> f64,
{
    let mut half_sum = 0.0;
    let mut occ_on = 0.0;
    let mut pmf_on = 0.0;
    for s in support {
        let o = occ.fraction(s);
        let p = pmf(s);
        half_sum += (o - p).abs();
        occ_on += o;
        pmf_on += p;
    }
    0.5 * (half_sum + (occ.total_mass() - occ_on).max(0.0) + (1.0 - pmf_on).max(0.0))
}

/// Ratio estimate with a delta-method standard error over regeneration
/// cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegenerativeEstimate {
    pub point: f64,
    pub standard_error: f64,
    pub replications: usize,
}

fn ratio_with_se(cycle_sums: &[(f64, f64)]) -> RegenerativeEstimate {
    let k = cycle_sums.len();
    assert!(k >= 2, "standard error needs at least two cycles");
    let mean_a: f64 = cycle_sums.iter().map(|(a, _)| a).sum::<f64>() / k as f64;
    let mean_b: f64 = cycle_sums.iter().map(|(_, b)| b).sum::<f64>() / k as f64;
    let point = mean_a / mean_b;
    let mut s_aa = 0.0;
    let mut s_ab = 0.0;
    let mut s_bb = 0.0;
    for (a, b) in cycle_sums {
        let da = a - mean_a;
        let db = b - mean_b;
        s_aa += da * da;
        s_ab += da * db;
        s_bb += db * db;
    }
    let denom = (k - 1) as f64;
    s_aa /= denom;
    s_ab /= denom;
    s_bb /= denom;
    let variance =
        ((s_aa - 2.0 * point * s_ab + point * point * s_bb) / (mean_b * mean_b) / k as f64)
            .max(0.0);
    RegenerativeEstimate {
        point,
        standard_error: variance.sqrt(),
        replications: k,
    }
}

/// Estimates `sum_x f(x) eta_x` for the *original* chain by simulating the
/// modified chain and weighting every visit by `1/alpha`: the ratio of
/// cycle-sum means over returns to the anchor state.
///
/// Requires `alpha_j > 0` everywhere; cycle `c` uses RNG substream `c`.
pub fn regenerative_estimate<F>(
    r: &RoutingMatrix,
    alpha: &AcceptanceVector,
    mode: RerouteMode,
    f: F,
    anchor: usize,
    cycles: usize,
    seed: u64,
) -> Result<RegenerativeEstimate>
where
    F: Fn(usize) -> f64,
{
    if let Some(state) = (0..alpha.len()).find(|&j| alpha.get(j) == 0.0) {
        return Err(Error::ZeroAcceptance { state });
    }
    let kernel = modify(r, alpha, mode)?.kernel().clone();
    let mut cycle_sums = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut state = anchor;
        let mut sum_f = 0.0;
        let mut sum_w = 0.0;
        loop {
            sum_f += f(state) / alpha.get(state);
            sum_w += 1.0 / alpha.get(state);
            state = sample_row(&kernel, state, &mut rng);
            if state == anchor {
                break;
            }
        }
        cycle_sums.push((sum_f, sum_w));
    }
    Ok(ratio_with_se(&cycle_sums))
}

/// Same target as [`regenerative_estimate`], but simulating the augmented
/// candidate chain `(X, Y)` in which `Y` marks acceptance instead of the
/// modified chain itself. Only accepted slots contribute to the sums, so
/// `alpha_j = 0` is permitted away from the anchor.
pub fn simulate_augmented_chain<F>(
    r: &RoutingMatrix,
    alpha: &AcceptanceVector,
    anchor: usize,
    cycles: usize,
    seed: u64,
    f: F,
) -> Result<RegenerativeEstimate>
where
    F: Fn(usize) -> f64,
{
    if alpha.get(anchor) == 0.0 {
        return Err(Error::ZeroAcceptance { state: anchor });
    }
    let mut cycle_sums = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        // Regeneration state is (anchor, accepted).
        let mut state = anchor;
        let mut accepted = true;
        let mut sum_f = 0.0;
        let mut sum_w = 0.0;
        loop {
            if accepted {
                sum_f += f(state) / alpha.get(state);
                sum_w += 1.0 / alpha.get(state);
            }
            state = sample_row(r, state, &mut rng);
            accepted = rng.random::<f64>() < alpha.get(state);
            if state == anchor && accepted {
                break;
            }
        }
        cycle_sums.push((sum_f, sum_w));
    }
    Ok(ratio_with_se(&cycle_sums))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary_distribution;
    use crate::generator::Generator;
    use crate::jackson::{jackson_generator, NetworkSpec, ProductFormDistribution, ServiceRateFunction};

    struct FlipGenerator;

    impl Generator for FlipGenerator {
        type State = usize;

        fn outgoing(&self, s: &usize) -> Vec<(usize, f64)> {
            vec![(1 - *s, 1.0)]
        }
    }

    fn five_state_example() -> RoutingMatrix {
        RoutingMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.6, 0.4],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn flip_generator_occupation_is_half_half() {
        let traj = simulate_ctmc(&FlipGenerator, 0, Budget::Events(100_000), 42);
        let occ = OccupationMeasure::from_trajectory(&traj);
        // Mean holding 1, so SE of the time fraction is ~ 1/sqrt(2n).
        let se = 3.0 / (2.0 * 100_000.0f64).sqrt();
        assert!((occ.fraction(&0) - 0.5).abs() < se);
        assert!((occ.fraction(&1) - 0.5).abs() < se);
        assert!((occ.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_gives_identical_trajectories() {
        let a = simulate_ctmc(&FlipGenerator, 0, Budget::Events(1000), 9);
        let b = simulate_ctmc(&FlipGenerator, 0, Budget::Events(1000), 9);
        assert_eq!(a.events, b.events);
        let c = simulate_ctmc(&FlipGenerator, 0, Budget::Events(1000), 10);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn time_budget_truncates_cleanly() {
        let traj = simulate_ctmc(&FlipGenerator, 0, Budget::Time(250.0), 5);
        assert_eq!(traj.total_time, 250.0);
        assert!(!traj.absorbed);
        let occ = OccupationMeasure::from_trajectory(&traj);
        assert!((occ.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn absorbing_state_ends_run() {
        struct Sink;
        impl Generator for Sink {
            type State = usize;
            fn outgoing(&self, s: &usize) -> Vec<(usize, f64)> {
                if *s == 0 {
                    vec![(1, 1.0)]
                } else {
                    vec![]
                }
            }
        }
        let traj = simulate_ctmc(&Sink, 0, Budget::Events(100), 1);
        assert!(traj.absorbed);
        assert_eq!(traj.events.len(), 1);
    }

    #[test]
    fn mm1_occupation_close_to_geometric() {
        let routing = RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let spec = NetworkSpec::new(
            vec![1.0],
            routing,
            vec![ServiceRateFunction::constant(2.0).unwrap()],
        )
        .unwrap();
        let gen = jackson_generator(&spec);
        let dist = ProductFormDistribution::new(&spec).unwrap();
        let traj = simulate_ctmc(&gen, vec![0], Budget::Events(1_000_000), 2024);
        let occ = OccupationMeasure::from_trajectory(&traj);
        let support: Vec<Vec<usize>> = (0..40).map(|v| vec![v]).collect();
        let tv = empirical_compare(&occ, |n| dist.pmf(n), &support);
        assert!(tv <= 0.02, "tv = {tv}");
    }

    #[test]
    fn empirical_compare_extremes() {
        let traj = simulate_ctmc(&FlipGenerator, 0, Budget::Events(500), 3);
        let occ = OccupationMeasure::from_trajectory(&traj);
        let support = vec![0usize, 1];
        let zero = empirical_compare(&occ, |s| occ.fraction(s), &support);
        assert!(zero < 1e-12);
        // Disjoint support: pmf mass entirely on states never visited.
        let disjoint = empirical_compare(&occ, |s| if *s >= 2 { 0.5 } else { 0.0 }, &[2, 3]);
        assert!((disjoint - 1.0).abs() < 1e-9);
    }

    #[test]
    fn regenerative_estimates_stationary_probability() {
        let r = five_state_example();
        let alpha = AcceptanceVector::all_ones(5);
        let eta = stationary_distribution(&r).unwrap();
        for target in [0usize, 2, 4] {
            let est = regenerative_estimate(
                &r,
                &alpha,
                RerouteMode::Skipping,
                |x| if x == target { 1.0 } else { 0.0 },
                0,
                10_000,
                17,
            )
            .unwrap();
            let err = (est.point - eta.get(target)).abs();
            assert!(
                err <= 3.0 * est.standard_error,
                "state {target}: err {err} > 3se {}",
                3.0 * est.standard_error
            );
        }
    }

    #[test]
    fn constant_function_estimates_one_exactly() {
        let r = five_state_example();
        let alpha = AcceptanceVector::new(vec![1.0, 1.0, 0.5, 1.0, 1.0]).unwrap();
        let est = regenerative_estimate(
            &r,
            &alpha,
            RerouteMode::Skipping,
            |_| 1.0,
            0,
            50,
            3,
        )
        .unwrap();
        assert_eq!(est.point, 1.0);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn weighted_estimator_recovers_unweighted_target() {
        let r = five_state_example();
        let alpha = AcceptanceVector::new(vec![1.0, 1.0, 0.5, 1.0, 1.0]).unwrap();
        let est = regenerative_estimate(
            &r,
            &alpha,
            RerouteMode::Skipping,
            |x| if x == 2 { 1.0 } else { 0.0 },
            0,
            10_000,
            23,
        )
        .unwrap();
        let truth = 5.0 / 22.0;
        assert!(
            (est.point - truth).abs() <= 3.0 * est.standard_error,
            "point {} truth {truth} se {}",
            est.point,
            est.standard_error
        );
    }

    #[test]
    fn zero_acceptance_rejected_by_plain_estimator() {
        let r = five_state_example();
        let alpha = AcceptanceVector::deterministic(5, &[2]).unwrap();
        match regenerative_estimate(&r, &alpha, RerouteMode::Skipping, |_| 1.0, 0, 10, 1) {
            Err(Error::ZeroAcceptance { state: 2 }) => {}
            other => panic!("expected ZeroAcceptance, got {other:?}"),
        }
    }

    #[test]
    fn augmented_chain_agrees_with_plain_estimator() {
        let r = five_state_example();
        let alpha = AcceptanceVector::new(vec![1.0, 1.0, 0.5, 1.0, 1.0]).unwrap();
        let f = |x: usize| if x == 2 { 1.0 } else { 0.0 };
        let plain =
            regenerative_estimate(&r, &alpha, RerouteMode::Skipping, f, 0, 10_000, 29).unwrap();
        let augmented = simulate_augmented_chain(&r, &alpha, 0, 10_000, 31, f).unwrap();
        let combined =
            (plain.standard_error.powi(2) + augmented.standard_error.powi(2)).sqrt();
        assert!(
            (plain.point - augmented.point).abs() <= 3.0 * combined,
            "plain {} augmented {} combined se {}",
            plain.point,
            augmented.point,
            combined
        );
    }

    #[test]
    fn augmented_chain_with_full_acceptance_is_plain_regeneration() {
        let r = five_state_example();
        let alpha = AcceptanceVector::all_ones(5);
        let est = simulate_augmented_chain(&r, &alpha, 0, 5_000, 37, |x| {
            if x == 4 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let eta = stationary_distribution(&r).unwrap();
        assert!((est.point - eta.get(4)).abs() <= 3.0 * est.standard_error);
    }

    #[test]
    fn augmented_chain_taboo_indicator_estimates_zero() {
        let r = five_state_example();
        let alpha = AcceptanceVector::deterministic(5, &[2]).unwrap();
        let est = simulate_augmented_chain(&r, &alpha, 0, 2_000, 41, |x| {
            if x == 2 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert_eq!(est.point, 0.0);
    }

    #[test]
    fn standard_error_shrinks_like_sqrt_cycles() {
        let r = five_state_example();
        let alpha = AcceptanceVector::new(vec![1.0, 1.0, 0.5, 1.0, 1.0]).unwrap();
        let f = |x: usize| if x == 3 { 1.0 } else { 0.0 };
        let mut ses = Vec::new();
        for &k in &[100usize, 1_000, 10_000] {
            let est =
                regenerative_estimate(&r, &alpha, RerouteMode::Skipping, f, 0, k, 53).unwrap();
            ses.push(est.standard_error);
        }
        // One decade of cycles shrinks the SE by about sqrt(10).
        for w in ses.windows(2) {
            let shrink = w[0] / w[1];
            assert!(shrink > 2.0 && shrink < 5.0, "shrink {shrink}");
        }
    }
}
