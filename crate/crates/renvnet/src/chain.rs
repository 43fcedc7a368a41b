//! Finite discrete-time Markov chain algebra.
//!
//! Row-stochastic matrices, communicating-class decomposition, stationary
//! distributions by dense linear solve, and detailed-balance checks. All
//! types are immutable after construction and every operation is pure.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Tolerance used when validating stochastic-matrix and probability-vector
/// invariants at construction.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Default tolerance for numerical comparisons (detailed balance, residual
/// thresholds) where the caller does not supply one.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Row-stochastic transition matrix on a finite index set.
///
/// Every row must sum to one within [`VALIDATION_TOL`] and every entry must
/// lie in `[0, 1]`. Invalid input is rejected, never repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    data: DMatrix<f64>,
}

impl RoutingMatrix {
    /// Validates and wraps a square matrix given as rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            let _ = i;
        }
        let data = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::from_matrix(data)
    }

    /// Validates and wraps an owned square matrix.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: data.nrows().max(1),
                found: data.ncols(),
            });
        }
        for i in 0..data.nrows() {
            let mut sum = 0.0;
            for j in 0..data.ncols() {
                let v = data[(i, j)];
                if !v.is_finite() || !(-VALIDATION_TOL..=1.0 + VALIDATION_TOL).contains(&v) {
                    return Err(Error::EntryRange {
                        row: i,
                        col: j,
                        value: v,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::RowSum {
                    row: i,
                    sum,
                    tol: VALIDATION_TOL,
                });
            }
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Copies row `i` into a plain vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|j| self.data[(i, j)]).collect()
    }
}

/// Probability vector over a finite index set: nonnegative entries summing
/// to one within [`VALIDATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < -VALIDATION_TOL {
                return Err(Error::EntryRange {
                    row: 0,
                    col: i,
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::RowSum {
                row: 0,
                sum,
                tol: VALIDATION_TOL,
            });
        }
        // Clamp roundoff-level negatives so downstream code sees a clean law.
        let entries = entries.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.entries
            .iter()
            .zip(other)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Partition of the index set into communicating classes, each flagged as
/// closed (no edge leaves the class) or not.
#[derive(Debug, Clone)]
pub struct ClassDecomposition {
    classes: Vec<Vec<usize>>,
    closed_flags: Vec<bool>,
}

impl ClassDecomposition {
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn closed_flags(&self) -> &[bool] {
        &self.closed_flags
    }

    /// Exactly one class containing every state.
    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1
    }

    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        self.classes
            .iter()
            .zip(&self.closed_flags)
            .filter(|(_, &closed)| closed)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// A chain owning these classes has a unique stationary distribution
    /// iff there is exactly one closed class.
    pub fn unique_stationary(&self) -> bool {
        self.closed_flags.iter().filter(|&&c| c).count() == 1
    }
}

/// Strongly-connected-component decomposition of the directed graph
/// `{(i,j) : P(i,j) > 0}`.
pub fn check_irreducible(p: &RoutingMatrix) -> ClassDecomposition {
    let dim = p.dim();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..dim).map(|_| graph.add_node(())).collect();
    for i in 0..dim {
        for j in 0..dim {
            if p.get(i, j) > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|scc| {
            let mut c: Vec<usize> = scc.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    classes.sort();

    let mut membership = vec![0usize; dim];
    for (ci, class) in classes.iter().enumerate() {
        for &s in class {
            membership[s] = ci;
        }
    }
    let mut closed_flags = vec![true; classes.len()];
    for i in 0..dim {
        for j in 0..dim {
            if p.get(i, j) > 0.0 && membership[i] != membership[j] {
                closed_flags[membership[i]] = false;
            }
        }
    }
    ClassDecomposition {
        classes,
        closed_flags,
    }
}

/// Solves `pi * P = pi`, `sum(pi) = 1` by replacing one balance equation
/// with the normalization constraint and solving the dense system.
///
/// Requires a unique closed class; chains whose only deviation from
/// irreducibility is a set of inessential states are accepted (the
/// stationary distribution then vanishes there).
pub fn stationary_distribution(p: &RoutingMatrix) -> Result<ProbabilityVector> {
    let decomp = check_irreducible(p);
    let closed = decomp.closed_classes();
    if closed.len() != 1 {
        return Err(Error::NotIrreducible {
            closed_classes: closed,
        });
    }
    let dim = p.dim();
    // A = P^T - I with the last balance equation replaced by normalization.
    let mut a = p.matrix().transpose();
    for i in 0..dim {
        a[(i, i)] -= 1.0;
    }
    for j in 0..dim {
        a[(dim - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(dim);
    b[dim - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem("solving stationary distribution"))?;
    let entries: Vec<f64> = solution.iter().map(|&v| v.max(0.0)).collect();
    let pi = ProbabilityVector::new(entries)?;
    let residual = invariant_residual(pi.entries(), p);
    if residual > VALIDATION_TOL {
        return Err(Error::SingularSystem("stationary residual above tolerance"));
    }
    Ok(pi)
}

/// True iff `|pi_i P(i,j) - pi_j P(j,i)| <= tol` for all pairs.
pub fn check_reversible(p: &RoutingMatrix, pi: &ProbabilityVector, tol: f64) -> bool {
    let dim = p.dim();
    if pi.len() != dim {
        return false;
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let flow = pi.get(i) * p.get(i, j) - pi.get(j) * p.get(j, i);
            if flow.abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Sup-norm residual of the invariance equation, `||x P - x||_inf`.
pub fn invariant_residual(x: &[f64], p: &RoutingMatrix) -> f64 {
    let dim = p.dim();
    assert_eq!(x.len(), dim, "vector/matrix dimension mismatch");
    let mut worst = 0.0f64;
    for j in 0..dim {
        let mut xp = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            xp += xi * p.get(i, j);
        }
        worst = worst.max((xp - x[j]).abs());
    }
    worst
}
