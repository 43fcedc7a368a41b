//! Kernel modification by randomized skipping and randomized reflection.
//!
//! Given a routing chain with kernel `r` and per-state acceptance
//! probabilities `alpha`, both transforms draw a candidate from `r` and
//! accept it with probability `alpha_j`. They differ in what happens on
//! rejection: skipping transits through the rejected state instantaneously
//! and redraws from its row, reflection leaves the walker at its current
//! state for another slot. Both admit closed-form kernels and an explicit
//! stationary-measure transform `eta_j -> eta_j alpha_j / <eta, alpha>`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{check_irreducible, ProbabilityVector, RoutingMatrix};
use crate::error::{Error, Result};

/// Per-state acceptance probabilities in `[0,1]`, not identically zero.
///
/// The taboo set `B(alpha) = {j : alpha_j = 0}` collects the states a
/// modified walker never settles in.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceVector {
    alphas: Vec<f64>,
}

impl AcceptanceVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        for (j, &a) in alphas.iter().enumerate() {
            if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                return Err(Error::EntryRange {
                    row: 0,
                    col: j,
                    value: a,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        if alphas.iter().all(|&a| a == 0.0) {
            return Err(Error::AllRejecting);
        }
        Ok(Self { alphas })
    }

    /// Indicator vector of the complement of `taboo`: classical skipping or
    /// reflection over a fixed taboo set.
    pub fn deterministic(dim: usize, taboo: &[usize]) -> Result<Self> {
        let mut alphas = vec![1.0; dim];
        for &j in taboo {
            alphas[j] = 0.0;
        }
        Self::new(alphas)
    }

    pub fn all_ones(dim: usize) -> Self {
        Self {
            alphas: vec![1.0; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.alphas[j]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Taboo set `B(alpha) = {j : alpha_j = 0}` (exact zeros).
    pub fn taboo(&self) -> Vec<usize> {
        self.alphas
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Which rejection rule produced a modified kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RerouteMode {
    Skipping,
    Reflection,
}

impl std::fmt::Display for RerouteMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RerouteMode::Skipping => write!(f, "skipping"),
            RerouteMode::Reflection => write!(f, "reflection"),
        }
    }
}

/// A modified chain together with its provenance.
#[derive(Debug, Clone)]
pub struct ModifiedChain {
    kernel: RoutingMatrix,
    mode: RerouteMode,
    taboo: Vec<usize>,
    source_kernel: RoutingMatrix,
    source_alpha: AcceptanceVector,
}

impl ModifiedChain {
    pub fn kernel(&self) -> &RoutingMatrix {
        &self.kernel
    }

    pub fn mode(&self) -> RerouteMode {
        self.mode
    }

    pub fn taboo(&self) -> &[usize] {
        &self.taboo
    }

    pub fn source_kernel(&self) -> &RoutingMatrix {
        &self.source_kernel
    }

    pub fn source_alpha(&self) -> &AcceptanceVector {
        &self.source_alpha
    }
}

fn check_dims(r: &RoutingMatrix, alpha: &AcceptanceVector) -> Result<()> {
    if alpha.len() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: alpha.len(),
        });
    }
    Ok(())
}

/// Modified kernel under randomized skipping,
/// `r_alpha = (I - r I_{1-alpha})^{-1} r I_alpha`,
/// computed by one dense linear solve per column.
///
/// Columns indexed by the taboo set come out identically zero: taboo
/// states stay in the index set as inessential states so downstream
/// network code can keep a fixed indexing.
pub fn skip_modify(r: &RoutingMatrix, alpha: &AcceptanceVector) -> Result<ModifiedChain> {
    check_dims(r, alpha)?;
    let decomp = check_irreducible(r);
    if !decomp.is_irreducible() {
        return Err(Error::NotIrreducible {
            closed_classes: decomp.closed_classes(),
        });
    }
    let dim = r.dim();
    // M = I - r I_{1-alpha}
    let mut m = DMatrix::<f64>::identity(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] -= r.get(i, j) * (1.0 - alpha.get(j));
        }
    }
    let lu = m.lu();
    let mut kernel = DMatrix::<f64>::zeros(dim, dim);
    let taboo = alpha.taboo();
    for j in 0..dim {
        if alpha.get(j) == 0.0 {
            continue;
        }
        // Column j of r I_alpha.
        let mut col = DVector::<f64>::zeros(dim);
        for i in 0..dim {
            col[i] = r.get(i, j) * alpha.get(j);
        }
        let x = lu
            .solve(&col)
            .ok_or(Error::SingularSystem("inverting the skipping resolvent"))?;
        for i in 0..dim {
            kernel[(i, j)] = x[i].max(0.0);
        }
    }
    let kernel = RoutingMatrix::from_matrix(kernel)?;
    Ok(ModifiedChain {
        kernel,
        mode: RerouteMode::Skipping,
        taboo,
        source_kernel: r.clone(),
        source_alpha: alpha.clone(),
    })
}

/// Truncated series form of the skipping kernel,
/// `sum_{k=0}^{terms-1} (r I_{1-alpha})^k r I_alpha`.
///
/// Independent oracle for [`skip_modify`]; converges geometrically.
pub fn skip_oracle(r: &RoutingMatrix, alpha: &AcceptanceVector, terms: usize) -> DMatrix<f64> {
    assert!(terms >= 1, "series needs at least one term");
    assert_eq!(r.dim(), alpha.len(), "dimension mismatch");
    let dim = r.dim();
    let reject = DMatrix::from_fn(dim, dim, |i, j| r.get(i, j) * (1.0 - alpha.get(j)));
    let accept = DMatrix::from_fn(dim, dim, |i, j| r.get(i, j) * alpha.get(j));
    let mut partial = accept.clone();
    let mut power = accept;
    for _ in 1..terms {
        power = &reject * power;
        partial += &power;
    }
    partial
}

/// Monte-Carlo estimate of one row of the skipping kernel via the auxiliary
/// absorbing chain: track the candidate walk from `start` until a candidate
/// is accepted, and record the absorption state.
///
/// Sample `s` draws from substream `s` of a counter-based generator, so the
/// result is reproducible and independent of any batching.
pub fn skip_absorbing_oracle(
    r: &RoutingMatrix,
    alpha: &AcceptanceVector,
    start: usize,
    seed: u64,
    samples: usize,
) -> Vec<f64> {
    assert_eq!(r.dim(), alpha.len(), "dimension mismatch");
    let dim = r.dim();
    let mut counts = vec![0u64; dim];
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let mut state = start;
        loop {
            let candidate = sample_row(r, state, &mut rng);
            if rng.random::<f64>() < alpha.get(candidate) {
                counts[candidate] += 1;
                break;
            }
            state = candidate;
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect()
}

pub(crate) fn sample_row<R: Rng>(r: &RoutingMatrix, i: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for j in 0..r.dim() {
        acc += r.get(i, j);
        if u < acc {
            return j;
        }
    }
    // Roundoff pushed the cumulative sum below u; return the last
    // positive-probability state.
    (0..r.dim()).rev().find(|&j| r.get(i, j) > 0.0).unwrap()
}

/// Modified kernel under randomized reflection:
/// off-diagonal `r(i,j) alpha_j`, with the rejected mass
/// `sum_k r(i,k)(1 - alpha_k)` folded onto the diagonal.
pub fn reflect_modify(r: &RoutingMatrix, alpha: &AcceptanceVector) -> Result<ModifiedChain> {
    check_dims(r, alpha)?;
    let dim = r.dim();
    let mut kernel = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let mut off_diagonal = 0.0;
        for j in 0..dim {
            if j != i {
                let v = r.get(i, j) * alpha.get(j);
                kernel[(i, j)] = v;
                off_diagonal += v;
            }
        }
        // Diagonal as the row-sum complement, which equals
        // r(i,i) + sum_k r(i,k)(1-alpha_k) and is stochastic by construction.
        kernel[(i, i)] = (1.0 - off_diagonal).max(0.0);
    }
    let kernel = RoutingMatrix::from_matrix(kernel)?;
    Ok(ModifiedChain {
        kernel,
        mode: RerouteMode::Reflection,
        taboo: alpha.taboo(),
        source_kernel: r.clone(),
        source_alpha: alpha.clone(),
    })
}

/// Dispatch on [`RerouteMode`].
pub fn modify(r: &RoutingMatrix, alpha: &AcceptanceVector, mode: RerouteMode) -> Result<ModifiedChain> {
    match mode {
        RerouteMode::Skipping => skip_modify(r, alpha),
        RerouteMode::Reflection => reflect_modify(r, alpha),
    }
}

/// Stationary distribution of the modified chain,
/// `eta_j alpha_j / <eta, alpha>`, supported on the complement of the
/// taboo set.
pub fn modified_stationary(
    eta: &ProbabilityVector,
    alpha: &AcceptanceVector,
) -> Result<ProbabilityVector> {
    if eta.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: eta.len(),
            found: alpha.len(),
        });
    }
    let normalizer = eta.dot(alpha.alphas());
    if normalizer <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    let entries = (0..eta.len())
        .map(|j| eta.get(j) * alpha.get(j) / normalizer)
        .collect();
    ProbabilityVector::new(entries)
}

/// Result of an elementwise off-diagonal kernel comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeskunRelation {
    /// First kernel is strictly below the second off-diagonally.
    Less,
    /// First kernel is strictly above the second off-diagonally.
    Greater,
    /// Off-diagonals coincide.
    Equal,
    Incomparable,
}

/// Verdict of [`peskun_compare`], with a witness pair on incomparability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeskunVerdict {
    pub relation: PeskunRelation,
    /// An off-diagonal position violating `first <= second`, when one exists.
    pub witness: Option<(usize, usize)>,
}

/// Compares two kernels in the Peskun order: `A` is below `B` when every
/// off-diagonal entry of `A` is at most the matching entry of `B`.
///
/// The shared-stationary-vector hypothesis under which the order has its
/// usual interpretation is the caller's responsibility.
pub fn peskun_compare(a: &RoutingMatrix, b: &RoutingMatrix) -> Result<PeskunVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut strictly_below = false;
    let mut strictly_above = false;
    let mut witness = None;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            if i == j {
                continue;
            }
            let (x, y) = (a.get(i, j), b.get(i, j));
            if x < y {
                strictly_below = true;
            } else if x > y {
                strictly_above = true;
                if witness.is_none() {
                    witness = Some((i, j));
                }
            }
        }
    }
    let relation = match (strictly_below, strictly_above) {
        (false, false) => PeskunRelation::Equal,
        (true, false) => PeskunRelation::Less,
        (false, true) => PeskunRelation::Greater,
        (true, true) => PeskunRelation::Incomparable,
    };
    Ok(PeskunVerdict {
        relation,
        witness: if relation == PeskunRelation::Less || relation == PeskunRelation::Equal {
            None
        } else {
            witness
        },
    })
}

/// Max absolute difference between a modified kernel and a plain matrix.
pub fn max_abs_diff(kernel: &RoutingMatrix, other: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..kernel.dim() {
        for j in 0..kernel.dim() {
            worst = worst.max((kernel.get(i, j) - other[(i, j)]).abs());
        }
    }
    worst
}
