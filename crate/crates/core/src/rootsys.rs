//! Root systems for the classical families `A/B/C/D` (and `G2`), in the
//! simple-root numbering used throughout this crate: `alpha_1` sits at the
//! long end of the diagram for `B` and `C`, and removing the first `k-1`
//! nodes leaves the diagram of the same family at lower rank (for `C` it
//! leaves `A_{N-1}`).
//!
//! Positive roots are produced already ordered: first all of `R_1`, then
//! `R_2`, and so on, where `R_k` collects the roots whose first nonzero
//! simple-root coefficient sits at position `k`, each `R_k` sorted by
//! non-increasing height. That order is what makes the Wei-Norman system
//! separate into a staged hierarchy downstream.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// The supported algebra families.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Family {
    A,
    B,
    C,
    D,
    G2,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
            Family::G2 => "G2",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Short algebra name like `B3`; `G2` carries no separate rank suffix.
pub fn algebra_name(family: Family, rank: usize) -> String {
    match family {
        Family::G2 => "G2".to_string(),
        _ => format!("{}{}", family.label(), rank),
    }
}

/// Configuration errors shared by every constructor taking `(family, rank)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    UnsupportedRank { family: Family, rank: usize, min: usize },
    G2RankFixed { rank: usize },
    NotClassical { family: Family },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnsupportedRank { family, rank, min } => {
                write!(f, "family {} requires rank >= {}, got {}", family, min, rank)
            }
            ConfigError::G2RankFixed { rank } => {
                write!(f, "G2 has fixed rank 2, got {}", rank)
            }
            ConfigError::NotClassical { family } => {
                write!(f, "operation requires a classical family, got {}", family)
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn check_family_rank(family: Family, rank: usize) -> Result<(), ConfigError> {
    let min = match family {
        Family::A => 1,
        Family::B | Family::C => 2,
        Family::D => 3,
        Family::G2 => {
            if rank != 2 {
                return Err(ConfigError::G2RankFixed { rank });
            }
            return Ok(());
        }
    };
    if rank < min {
        return Err(ConfigError::UnsupportedRank { family, rank, min });
    }
    Ok(())
}

/// A root expressed over the simple roots; positive iff all coefficients
/// are nonnegative.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Root {
    pub coeffs: Vec<i32>,
}

impl Root {
    pub fn new(coeffs: Vec<i32>) -> Self {
        Root { coeffs }
    }

    pub fn height(&self) -> i32 {
        self.coeffs.iter().sum()
    }

    pub fn is_positive(&self) -> bool {
        self.coeffs.iter().all(|&c| c >= 0) && self.coeffs.iter().any(|&c| c != 0)
    }

    pub fn negated(&self) -> Root {
        Root { coeffs: self.coeffs.iter().map(|&c| -c).collect() }
    }

    /// Index of the first nonzero coefficient (0-based), if any.
    pub fn first_support(&self) -> Option<usize> {
        self.coeffs.iter().position(|&c| c != 0)
    }

    pub fn add(&self, other: &Root) -> Root {
        Root {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, ")")
    }
}

/// Geometric realization of a root as an integer vector over the weight
/// coordinates `eps_i` of the defining representation. Used by `liealg` to
/// build the matrices; `G2` carries none (its matrices are fixed data).
pub type EpsVec = Vec<i32>;

/// A root system with ordered positive roots and the `R_k` partition.
#[derive(Clone, Debug)]
pub struct RootSystem {
    pub family: Family,
    pub rank: usize,
    /// Positive roots in hierarchy order: `R_1` first, reverse height
    /// within each `R_k`.
    pub positive_roots: Vec<Root>,
    /// Index ranges into `positive_roots`, one per `R_k`, `k = 1..=rank`.
    pub partition: Vec<std::ops::Range<usize>>,
    /// Simple roots in eps coordinates (empty for `G2`).
    pub(crate) simple_eps: Vec<EpsVec>,
    /// eps realization of each positive root, aligned with `positive_roots`
    /// (empty for `G2`).
    pub(crate) positive_eps: Vec<EpsVec>,
}

/// Whether the partition satisfies the form every classical family does:
/// each root of `R_k` has `n_i = 0` below `k` and `n_k = 1` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionForm {
    pub holds: bool,
    /// A witness root violating `n_k = 1`, if any.
    pub witness: Option<Root>,
}

impl RootSystem {
    /// Ordered sets `R_k` as slices of the positive roots.
    pub fn blocks(&self) -> Vec<&[Root]> {
        self.partition
            .iter()
            .map(|r| &self.positive_roots[r.clone()])
            .collect()
    }

    /// The unique maximal root: the head of `R_1`.
    pub fn max_root(&self) -> &Root {
        &self.positive_roots[0]
    }

    /// Cumulative unions `R~_k = R_k ∪ R_{k+1} ∪ …` as an index range.
    pub fn cumulative(&self, k: usize) -> std::ops::Range<usize> {
        self.partition[k - 1].start..self.positive_roots.len()
    }

    pub fn num_positive(&self) -> usize {
        self.positive_roots.len()
    }

    /// Dimension of the full algebra: `rank + 2 |Phi+|`.
    pub fn algebra_dim(&self) -> usize {
        self.rank + 2 * self.positive_roots.len()
    }

    /// Check the `(0,…,0,1,n_{k+1},…)` form of every block.
    ///
    /// Classical families always satisfy it; for `G2` the check fails for
    /// both candidate numberings of the simple roots, which is precisely why
    /// the commuting-subalgebra decomposition does not exist there.
    pub fn partition_form(&self) -> PartitionForm {
        for (k, range) in self.partition.iter().enumerate() {
            for root in &self.positive_roots[range.clone()] {
                let lead_ok = root.coeffs[..k].iter().all(|&c| c == 0) && root.coeffs[k] == 1;
                if !lead_ok {
                    return PartitionForm { holds: false, witness: Some(root.clone()) };
                }
            }
        }
        PartitionForm { holds: true, witness: None }
    }

}

/// `dim a_1` by the closed-form family table.
///
/// `A: N`, `B: 2N-1`, `C: N(N+1)/2`, `D: 2N-2`. This is independent of the
/// enumerators, so tests can pit it against `|R_1|`.
pub fn dim_a1(family: Family, rank: usize) -> Result<usize, ConfigError> {
    check_family_rank(family, rank)?;
    Ok(match family {
        Family::A => rank,
        Family::B => 2 * rank - 1,
        Family::C => rank * (rank + 1) / 2,
        Family::D => 2 * rank - 2,
        Family::G2 => return Err(ConfigError::NotClassical { family }),
    })
}

/// Closed-form maximal root, straight from the family formulas.
pub fn max_root_formula(family: Family, rank: usize) -> Result<Root, ConfigError> {
    check_family_rank(family, rank)?;
    let n = rank;
    let coeffs = match family {
        Family::A => vec![1; n],
        Family::B | Family::C => {
            let mut c = vec![2; n];
            c[0] = 1;
            c
        }
        Family::D => {
            let mut c = vec![2; n];
            c[0] = 1;
            c[n - 1] = 1;
            c[n - 2] = 1;
            c
        }
        Family::G2 => Root::new(vec![2, 3]).coeffs,
    };
    Ok(Root::new(coeffs))
}

/// Build the full root system for `(family, rank)`.
pub fn build_root_system(family: Family, rank: usize) -> Result<RootSystem, ConfigError> {
    check_family_rank(family, rank)?;
    let (simple_eps, blocks_eps): (Vec<EpsVec>, Vec<Vec<EpsVec>>) = match family {
        Family::A => enumerate_a(rank),
        Family::B => enumerate_b(rank),
        Family::C => enumerate_c(rank),
        Family::D if rank == 4 => enumerate_d4(),
        Family::D => enumerate_d(rank),
        Family::G2 => return Ok(g2_system()),
    };

    let mut positive_roots = Vec::new();
    let mut positive_eps = Vec::new();
    let mut partition = Vec::new();
    for block in blocks_eps {
        let start = positive_roots.len();
        for eps in block {
            let coeffs = express_in_simple(&eps, &simple_eps);
            positive_roots.push(Root::new(coeffs));
            positive_eps.push(eps);
        }
        partition.push(start..positive_roots.len());
    }

    let rs = RootSystem { family, rank, positive_roots, partition, simple_eps, positive_eps };
    debug_assert!(rs.partition_form().holds);
    debug_assert!(heights_non_increasing(&rs));
    Ok(rs)
}

fn heights_non_increasing(rs: &RootSystem) -> bool {
    rs.partition.iter().all(|range| {
        rs.positive_roots[range.clone()]
            .windows(2)
            .all(|w| w[0].height() >= w[1].height())
    })
}

fn eps(dim: usize, entries: &[(usize, i32)]) -> EpsVec {
    let mut v = vec![0; dim];
    for &(i, c) in entries {
        v[i] += c;
    }
    v
}

/// `A_N`: weights `eps_1..eps_{N+1}`, simple roots `eps_k - eps_{k+1}`.
/// `R_k = [eps_k - eps_{N+1}, …, eps_k - eps_{k+1}]`.
fn enumerate_a(n: usize) -> (Vec<EpsVec>, Vec<Vec<EpsVec>>) {
    let d = n + 1;
    let simple = (0..n).map(|k| eps(d, &[(k, 1), (k + 1, -1)])).collect();
    let blocks = (0..n)
        .map(|k| {
            (k + 1..d)
                .rev()
                .map(|j| eps(d, &[(k, 1), (j, -1)]))
                .collect()
        })
        .collect();
    (simple, blocks)
}

/// `B_N`: the defining representation has weights `0, ±eps_i`. With the
/// relabeling `eta_1 = eps_1`, `eta_j = -eps_j (j >= 2)` the simple roots are
/// `alpha_k = eta_k - eta_{k+1}` and `alpha_N = eta_N`, and
/// `R_k = [eta_k + eta_{k+1}, …, eta_k + eta_N, eta_k, eta_k - eta_N, …,
/// eta_k - eta_{k+1}]`, which runs through strictly decreasing heights.
fn enumerate_b(n: usize) -> (Vec<EpsVec>, Vec<Vec<EpsVec>>) {
    let sign = |j: usize| if j == 0 { 1 } else { -1 };
    let eta = |j: usize, c: i32| (j, c * sign(j));
    let mut simple: Vec<EpsVec> = (0..n - 1)
        .map(|k| eps(n, &[eta(k, 1), eta(k + 1, -1)]))
        .collect();
    simple.push(eps(n, &[eta(n - 1, 1)]));
    let blocks = (0..n)
        .map(|k| {
            let mut block = Vec::new();
            for j in k + 1..n {
                block.push(eps(n, &[eta(k, 1), eta(j, 1)]));
            }
            block.push(eps(n, &[eta(k, 1)]));
            for j in (k + 1..n).rev() {
                block.push(eps(n, &[eta(k, 1), eta(j, -1)]));
            }
            block
        })
        .collect();
    (simple, blocks)
}

/// `C_N`: simple roots `alpha_1 = 2 eps_1`, `alpha_k = eps_k - eps_{k-1}`.
/// `R_1` holds every sum `eps_i + eps_j (i <= j)`; heights there are
/// `i + j - 1`, so whole anti-diagonals `i + j = const` are height ties.
/// The order runs anti-diagonals from the top and alternates the traversal
/// direction with the parity of `i + j` (ascending `i` when even), which is
/// the order the printed low-rank systems follow.
/// `R_k (k >= 2) = [eps_N - eps_{k-1}, …, eps_k - eps_{k-1}]`.
fn enumerate_c(n: usize) -> (Vec<EpsVec>, Vec<Vec<EpsVec>>) {
    let mut simple: Vec<EpsVec> = vec![eps(n, &[(0, 2)])];
    for k in 1..n {
        simple.push(eps(n, &[(k, 1), (k - 1, -1)]));
    }
    let mut blocks = Vec::new();
    let mut r1 = Vec::new();
    for d in (2..=2 * n).rev() {
        let lo = if d > n { d - n } else { 1 };
        let hi = d / 2;
        let run: Vec<usize> = if d % 2 == 0 {
            (lo..=hi).collect()
        } else {
            (lo..=hi).rev().collect()
        };
        for i in run {
            r1.push(eps(n, &[(i - 1, 1), (d - i - 1, 1)]));
        }
    }
    blocks.push(r1);
    for k in 2..=n {
        blocks.push(
            (k..=n)
                .rev()
                .map(|j| eps(n, &[(j - 1, 1), (k - 2, -1)]))
                .collect(),
        );
    }
    (simple, blocks)
}

/// Generic `D_N` (`N != 4`): simple roots `alpha_k = eps_k - eps_{k+1}`,
/// `alpha_N = eps_{N-1} + eps_N`. Within `R_k` the sums come before the
/// differences; the single height tie `eps_k ± eps_N` resolves sum-first.
fn enumerate_d(n: usize) -> (Vec<EpsVec>, Vec<Vec<EpsVec>>) {
    let mut simple: Vec<EpsVec> = (0..n - 1)
        .map(|k| eps(n, &[(k, 1), (k + 1, -1)]))
        .collect();
    simple.push(eps(n, &[(n - 2, 1), (n - 1, 1)]));
    let mut blocks: Vec<Vec<EpsVec>> = Vec::new();
    for k in 0..n - 2 {
        let mut block = Vec::new();
        for j in k + 1..n {
            block.push(eps(n, &[(k, 1), (j, 1)]));
        }
        for j in (k + 1..n).rev() {
            block.push(eps(n, &[(k, 1), (j, -1)]));
        }
        blocks.push(block);
    }
    blocks.push(vec![eps(n, &[(n - 2, 1), (n - 1, -1)])]);
    blocks.push(vec![eps(n, &[(n - 2, 1), (n - 1, 1)])]);
    (simple, blocks)
}

/// `D_4` uses the simple system `{eps_1+eps_2, eps_3-eps_2, eps_4-eps_3,
/// eps_2-eps_1}`, under which `R_1` consists of all six sums. This is the
/// realization the reference parametrization of `so(8)` is written in; it is
/// genuinely triality-twisted, so it does not extend to other ranks.
fn enumerate_d4() -> (Vec<EpsVec>, Vec<Vec<EpsVec>>) {
    let n = 4;
    let simple = vec![
        eps(n, &[(0, 1), (1, 1)]),
        eps(n, &[(2, 1), (1, -1)]),
        eps(n, &[(3, 1), (2, -1)]),
        eps(n, &[(1, 1), (0, -1)]),
    ];
    let blocks = vec![
        vec![
            eps(n, &[(2, 1), (3, 1)]),
            eps(n, &[(1, 1), (3, 1)]),
            eps(n, &[(1, 1), (2, 1)]),
            eps(n, &[(0, 1), (3, 1)]),
            eps(n, &[(0, 1), (2, 1)]),
            eps(n, &[(0, 1), (1, 1)]),
        ],
        vec![
            eps(n, &[(3, 1), (0, -1)]),
            eps(n, &[(2, 1), (0, -1)]),
            eps(n, &[(3, 1), (1, -1)]),
            eps(n, &[(2, 1), (1, -1)]),
        ],
        vec![eps(n, &[(3, 1), (2, -1)])],
        vec![eps(n, &[(1, 1), (0, -1)])],
    ];
    (simple, blocks)
}

/// `G2`: twelve roots, hardcoded over `alpha_1` (long) and `alpha_2` (short).
/// The positive order matches the fixed matrix realization in `liealg`.
fn g2_system() -> RootSystem {
    let coeffs = [[2, 3], [1, 0], [1, 1], [1, 3], [1, 2], [0, 1]];
    let positive_roots: Vec<Root> = coeffs.iter().map(|c| Root::new(c.to_vec())).collect();
    // No honest R_k split exists; record the first-support grouping anyway
    // so reports can show what fails. In the numbering with the long root
    // first, every positive root except alpha_2 has first support 1.
    let partition = vec![0..5, 5..6];
    RootSystem {
        family: Family::G2,
        rank: 2,
        positive_roots,
        partition,
        simple_eps: Vec::new(),
        positive_eps: Vec::new(),
    }
}

/// Express `target` over the simple roots, panicking if the expansion is not
/// integral (which would mean an enumerator bug).
fn express_in_simple(target: &EpsVec, simple: &[EpsVec]) -> Vec<i32> {
    let n = simple.len();
    let dim = target.len();
    // Least-squares-free exact solve: the simple roots are independent, so
    // Gaussian elimination on the (dim x n) system has a unique solution.
    let mut aug: Vec<Vec<BigRational>> = (0..dim)
        .map(|r| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|c| BigRational::from_integer(BigInt::from(simple[c][r])))
                .collect();
            row.push(BigRational::from_integer(BigInt::from(target[r])));
            row
        })
        .collect();
    let mut pivot_rows = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..dim).find(|&r| !aug[r][col].is_zero()) else {
            panic!("simple roots not independent");
        };
        aug.swap(row, p);
        let inv = aug[row][col].clone();
        for c in col..=n {
            aug[row][c] = &aug[row][c] / &inv;
        }
        for r in 0..dim {
            if r != row && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in col..=n {
                    aug[r][c] = &aug[r][c] - &f * &aug[row][c];
                }
            }
        }
        pivot_rows.push(row);
        row += 1;
    }
    for r in row..dim {
        assert!(aug[r][n].is_zero(), "root outside span of simple roots");
    }
    pivot_rows
        .iter()
        .enumerate()
        .map(|(col, &r)| {
            let v = &aug[r][n];
            let _ = col;
            assert!(v.denom().is_one(), "non-integral root coefficient");
            let num = v.numer();
            assert!(num.abs() <= BigInt::from(i32::MAX));
            i32::try_from(num).expect("coefficient fits i32")
        })
        .collect()
}

/// Root-shape test in eps coordinates, independent of the stored root list.
/// Used by consistency tests for closure under addition.
pub fn is_root_eps(family: Family, v: &EpsVec) -> bool {
    let nonzero: Vec<(usize, i32)> = v
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect();
    match family {
        Family::A => {
            nonzero.len() == 2 && nonzero[0].1 + nonzero[1].1 == 0 && nonzero[0].1.abs() == 1
        }
        Family::B => match nonzero.len() {
            1 => nonzero[0].1.abs() == 1,
            2 => nonzero[0].1.abs() == 1 && nonzero[1].1.abs() == 1,
            _ => false,
        },
        Family::C => match nonzero.len() {
            1 => nonzero[0].1.abs() == 2,
            2 => nonzero[0].1.abs() == 1 && nonzero[1].1.abs() == 1,
            _ => false,
        },
        Family::D => {
            nonzero.len() == 2 && nonzero[0].1.abs() == 1 && nonzero[1].1.abs() == 1
        }
        Family::G2 => false,
    }
}
