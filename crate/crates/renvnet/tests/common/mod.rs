//! Shared corpus and random-instance builders for the integration suites.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use renvnet::capacity::CapacityFactors;
use renvnet::chain::{ProbabilityVector, RoutingMatrix};
use renvnet::environment::{EnvRouting, EnvironmentSpec};
use renvnet::jackson::{NetworkSpec, ServiceRateFunction};
use renvnet::randomization::AcceptanceVector;

pub fn five_state_routing() -> RoutingMatrix {
    RoutingMatrix::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.6, 0.4],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0, 0.0],
    ])
    .unwrap()
}

pub fn half_alpha() -> AcceptanceVector {
    AcceptanceVector::new(vec![1.0, 1.0, 0.5, 1.0, 1.0]).unwrap()
}

fn constant_rates(rates: &[f64]) -> Vec<ServiceRateFunction> {
    rates
        .iter()
        .map(|&r| ServiceRateFunction::constant(r).unwrap())
        .collect()
}

/// Ten ergodic networks with one to four nodes, including load-dependent
/// service rates. Utilizations stay below 0.8.
pub fn network_corpus() -> Vec<(&'static str, NetworkSpec)> {
    let mut corpus = Vec::new();

    corpus.push((
        "mm1",
        NetworkSpec::new(
            vec![1.0],
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            constant_rates(&[2.0]),
        )
        .unwrap(),
    ));

    corpus.push((
        "mm1_feedback",
        NetworkSpec::new(
            vec![1.0],
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap(),
            constant_rates(&[4.0]),
        )
        .unwrap(),
    ));

    corpus.push((
        "single_multiserver",
        NetworkSpec::new(
            vec![1.5],
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![ServiceRateFunction::new(vec![1.0, 2.0, 3.0], 3.0).unwrap()],
        )
        .unwrap(),
    ));

    corpus.push((
        "tandem2",
        NetworkSpec::new(
            vec![1.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ])
            .unwrap(),
            constant_rates(&[2.0, 4.0]),
        )
        .unwrap(),
    ));

    corpus.push((
        "two_node_cross",
        NetworkSpec::new(
            vec![0.6, 0.4],
            RoutingMatrix::from_rows(&[
                vec![0.0, 0.6, 0.4],
                vec![0.3, 0.1, 0.6],
                vec![0.5, 0.3, 0.2],
            ])
            .unwrap(),
            constant_rates(&[3.0, 3.5]),
        )
        .unwrap(),
    ));

    corpus.push((
        "reversible_line2",
        NetworkSpec::new(
            vec![1.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap(),
            constant_rates(&[4.0, 2.0]),
        )
        .unwrap(),
    ));

    corpus.push((
        "cycle3",
        NetworkSpec::new(
            vec![1.0, 0.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.8, 0.2],
                vec![0.1, 0.0, 0.0, 0.9],
                vec![0.7, 0.2, 0.1, 0.0],
            ])
            .unwrap(),
            constant_rates(&[3.0, 3.0, 3.0]),
        )
        .unwrap(),
    ));

    corpus.push((
        "load_dependent3",
        NetworkSpec::new(
            vec![0.5, 0.5, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 0.5, 0.5, 0.0],
                vec![0.2, 0.0, 0.4, 0.4],
                vec![0.4, 0.3, 0.0, 0.3],
                vec![1.0, 0.0, 0.0, 0.0],
            ])
            .unwrap(),
            vec![
                ServiceRateFunction::new(vec![2.0, 4.0], 4.0).unwrap(),
                ServiceRateFunction::new(vec![1.8, 3.6, 5.4], 5.4).unwrap(),
                ServiceRateFunction::constant(3.0).unwrap(),
            ],
        )
        .unwrap(),
    ));

    corpus.push((
        "four_node_line",
        NetworkSpec::new(
            vec![1.0, 0.0, 0.0, 0.0],
            five_state_routing(),
            constant_rates(&[2.5, 2.5, 2.5, 2.5]),
        )
        .unwrap(),
    ));

    corpus.push((
        "four_node_mesh",
        NetworkSpec::new(
            vec![0.4, 0.3, 0.2, 0.1],
            RoutingMatrix::from_rows(&[
                vec![0.0, 0.4, 0.3, 0.2, 0.1],
                vec![0.2, 0.0, 0.3, 0.3, 0.2],
                vec![0.3, 0.2, 0.0, 0.3, 0.2],
                vec![0.4, 0.2, 0.2, 0.0, 0.2],
                vec![0.5, 0.2, 0.2, 0.1, 0.0],
            ])
            .unwrap(),
            constant_rates(&[4.0, 4.0, 4.0, 4.0]),
        )
        .unwrap(),
    ));

    corpus
}

/// Corpus entries whose extended routing matrix is reversible.
pub fn reversible_network_corpus() -> Vec<(&'static str, NetworkSpec)> {
    vec![
        (
            "reversible_line2",
            NetworkSpec::new(
                vec![1.0, 0.0],
                RoutingMatrix::from_rows(&[
                    vec![0.0, 1.0, 0.0],
                    vec![0.5, 0.0, 0.5],
                    vec![0.0, 1.0, 0.0],
                ])
                .unwrap(),
                constant_rates(&[4.0, 2.0]),
            )
            .unwrap(),
        ),
        (
            "reversible_line3",
            NetworkSpec::new(
                vec![1.0, 0.0, 0.0],
                RoutingMatrix::from_rows(&[
                    vec![0.0, 1.0, 0.0, 0.0],
                    vec![0.5, 0.0, 0.5, 0.0],
                    vec![0.0, 0.5, 0.0, 0.5],
                    vec![0.0, 0.0, 1.0, 0.0],
                ])
                .unwrap(),
                constant_rates(&[4.0, 4.0, 2.0]),
            )
            .unwrap(),
        ),
    ]
}

/// Random row-stochastic matrix made irreducible by mixing in a cycle.
pub fn random_irreducible(dim: usize, rng: &mut ChaCha8Rng) -> RoutingMatrix {
    let mut rows = vec![vec![0.0f64; dim]; dim];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (j, cell) in row.iter_mut().enumerate() {
            let keep = rng.random::<f64>() > 0.35;
            let mass = if keep { rng.random::<f64>() } else { 0.0 };
            *cell = mass;
            let _ = j;
            sum += mass;
        }
        if sum == 0.0 {
            row[(i + 1) % dim] = 1.0;
            sum = 1.0;
        }
        for cell in row.iter_mut() {
            *cell = 0.85 * *cell / sum;
        }
        row[(i + 1) % dim] += 0.15;
    }
    RoutingMatrix::from_rows(&rows).unwrap()
}

/// Sup norm of the k-th power of the rejection matrix `r I_{1-alpha}`;
/// an a-priori bound on the truncation error of the skipping series.
pub fn rejection_power_norm(r: &RoutingMatrix, alpha: &AcceptanceVector, k: usize) -> f64 {
    let dim = r.dim();
    let m = DMatrix::from_fn(dim, dim, |i, j| r.get(i, j) * (1.0 - alpha.get(j)));
    let mut power = m.clone();
    for _ in 1..k {
        power = &power * &m;
    }
    power.amax()
}

/// Random (chain, alpha) pair for which the 200-term skipping series is
/// a-priori convergent, so closed form and series are comparable at 1e-10.
pub fn random_convergent_pair(
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> (RoutingMatrix, AcceptanceVector) {
    loop {
        let r = random_irreducible(dim, rng);
        let alpha = random_alpha(dim, rng);
        if rejection_power_norm(&r, &alpha, 200) <= 1e-13 {
            return (r, alpha);
        }
    }
}

/// Random acceptance vector with exact zeros sprinkled in.
pub fn random_alpha(dim: usize, rng: &mut ChaCha8Rng) -> AcceptanceVector {
    loop {
        let alphas: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    0.05 + 0.95 * rng.random::<f64>()
                }
            })
            .collect();
        if alphas.iter().any(|&a| a > 0.0) {
            return AcceptanceVector::new(alphas).unwrap();
        }
    }
}

/// Random reversible chain from symmetric positive edge weights, together
/// with its stationary distribution.
pub fn random_reversible(dim: usize, rng: &mut ChaCha8Rng) -> (RoutingMatrix, ProbabilityVector) {
    let mut weights = vec![vec![0.0f64; dim]; dim];
    for i in 0..dim {
        weights[i][i] = 0.2 * rng.random::<f64>();
        for j in (i + 1)..dim {
            let w = 0.1 + rng.random::<f64>();
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    let strengths: Vec<f64> = weights.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = strengths.iter().sum();
    let rows: Vec<Vec<f64>> = weights
        .iter()
        .zip(&strengths)
        .map(|(row, &s)| row.iter().map(|w| w / s).collect())
        .collect();
    let pi = ProbabilityVector::new(strengths.iter().map(|&s| s / total).collect()).unwrap();
    (RoutingMatrix::from_rows(&rows).unwrap(), pi)
}

pub fn identity_jump(statuses: usize) -> RoutingMatrix {
    let rows: Vec<Vec<f64>> = (0..statuses)
        .map(|k| {
            (0..statuses)
                .map(|m| if k == m { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    RoutingMatrix::from_rows(&rows).unwrap()
}

/// Coupled instances for the environment suite: all have some `R_j != I`
/// (two-way interaction) and at most three nodes / four statuses.
pub fn coupled_instances() -> Vec<(&'static str, NetworkSpec, EnvironmentSpec)> {
    let mut instances = Vec::new();

    // Tandem, two statuses, departures from node 2 toggle the environment.
    {
        let network = NetworkSpec::new(
            vec![1.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ])
            .unwrap(),
            constant_rates(&[3.0, 3.0]),
        )
        .unwrap();
        let env = EnvironmentSpec::new(
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.8, -0.8]),
            vec![
                identity_jump(2),
                RoutingMatrix::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap(),
            ],
            vec![
                CapacityFactors::new(vec![1.0, 1.0]).unwrap(),
                CapacityFactors::new(vec![0.8, 0.5]).unwrap(),
            ],
            EnvRouting::Skipping,
        )
        .unwrap();
        instances.push(("tandem_2status", network, env));
    }

    // Single node, three statuses, cyclic trigger, one upgrading status.
    {
        let network = NetworkSpec::new(
            vec![1.0],
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            constant_rates(&[2.5]),
        )
        .unwrap();
        let cyclic = RoutingMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let env = EnvironmentSpec::new(
            DMatrix::from_row_slice(3, 3, &[-0.4, 0.2, 0.2, 0.3, -0.6, 0.3, 0.1, 0.1, -0.2]),
            vec![cyclic],
            vec![
                CapacityFactors::new(vec![1.0]).unwrap(),
                CapacityFactors::new(vec![2.0]).unwrap(),
                CapacityFactors::new(vec![0.5]).unwrap(),
            ],
            EnvRouting::Skipping,
        )
        .unwrap();
        instances.push(("single_3status_upgrade", network, env));
    }

    // Three nodes, two statuses, node 1 fully blocked in the bad status.
    {
        let network = NetworkSpec::new(
            vec![1.0, 0.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.8, 0.2],
                vec![0.1, 0.0, 0.0, 0.9],
                vec![0.7, 0.2, 0.1, 0.0],
            ])
            .unwrap(),
            constant_rates(&[3.0, 3.0, 3.0]),
        )
        .unwrap();
        let env = EnvironmentSpec::new(
            DMatrix::from_row_slice(2, 2, &[-0.3, 0.3, 0.6, -0.6]),
            vec![
                identity_jump(2),
                identity_jump(2),
                RoutingMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
            ],
            vec![
                CapacityFactors::new(vec![1.0, 1.0, 1.0]).unwrap(),
                CapacityFactors::new(vec![0.0, 1.0, 0.7]).unwrap(),
            ],
            EnvRouting::Skipping,
        )
        .unwrap();
        instances.push(("three_node_blocking_status", network, env));
    }

    // Two nodes, four statuses, both jump matrices non-identity.
    {
        let network = NetworkSpec::new(
            vec![0.6, 0.4],
            RoutingMatrix::from_rows(&[
                vec![0.0, 0.6, 0.4],
                vec![0.3, 0.1, 0.6],
                vec![0.5, 0.3, 0.2],
            ])
            .unwrap(),
            constant_rates(&[3.0, 3.5]),
        )
        .unwrap();
        let shift = RoutingMatrix::from_rows(&[
            vec![0.2, 0.8, 0.0, 0.0],
            vec![0.0, 0.2, 0.8, 0.0],
            vec![0.0, 0.0, 0.2, 0.8],
            vec![0.8, 0.0, 0.0, 0.2],
        ])
        .unwrap();
        let blend = RoutingMatrix::from_rows(&[
            vec![0.4, 0.2, 0.2, 0.2],
            vec![0.2, 0.4, 0.2, 0.2],
            vec![0.2, 0.2, 0.4, 0.2],
            vec![0.2, 0.2, 0.2, 0.4],
        ])
        .unwrap();
        let mut v = DMatrix::zeros(4, 4);
        for k in 0..4 {
            for m in 0..4 {
                if k != m {
                    v[(k, m)] = 0.1 + 0.05 * ((k + 2 * m) % 3) as f64;
                }
            }
            let off: f64 = (0..4).filter(|&m| m != k).map(|m| v[(k, m)]).sum();
            v[(k, k)] = -off;
        }
        let env = EnvironmentSpec::new(
            v,
            vec![shift, blend],
            vec![
                CapacityFactors::new(vec![1.0, 1.0]).unwrap(),
                CapacityFactors::new(vec![1.5, 0.75]).unwrap(),
                CapacityFactors::new(vec![0.6, 1.2]).unwrap(),
                CapacityFactors::new(vec![2.0, 2.0]).unwrap(),
            ],
            EnvRouting::Skipping,
        )
        .unwrap();
        instances.push(("two_node_4status", network, env));
    }

    // Reversible network with reflection rerouting, two statuses.
    {
        let network = NetworkSpec::new(
            vec![1.0, 0.0],
            RoutingMatrix::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap(),
            constant_rates(&[4.0, 2.0]),
        )
        .unwrap();
        let env = EnvironmentSpec::new(
            DMatrix::from_row_slice(2, 2, &[-0.4, 0.4, 0.2, -0.2]),
            vec![
                RoutingMatrix::from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap(),
                identity_jump(2),
            ],
            vec![
                CapacityFactors::new(vec![1.0, 0.5]).unwrap(),
                CapacityFactors::new(vec![1.25, 1.0]).unwrap(),
            ],
            EnvRouting::Reflection,
        )
        .unwrap();
        instances.push(("reversible_reflection_2status", network, env));
    }

    instances
}
