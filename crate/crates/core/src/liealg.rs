//! Defining-representation matrices for the classical algebras (and `G2`),
//! organized into the ordered basis that drives the Wei-Norman hierarchy:
//! positive root vectors block by block (reverse height inside each block),
//! then the Cartan generators, then the negative root vectors in the order
//! reverse to the positive ones.
//!
//! Conventions: `A_N` is `sl(N+1)`. `B_N`, `C_N`, `D_N` are realized as the
//! traceless matrices `X` with `X^T S + S X = 0` for the bilinear forms
//! `S = 1 ⊕ [[0,I],[I,0]]`, `[[0,I],[-I,0]]` and `[[0,I],[I,0]]`
//! respectively. Cartan generator `k` is the coroot of the `k`-th simple
//! root, which keeps the Cartan quadrature equations in the shape the
//! low-rank reference systems print.

use crate::rootsys::{
    build_root_system, check_family_rank, ConfigError, EpsVec, Family, Root, RootSystem,
};
use crate::scalars::Scalar;
use std::fmt;
use std::ops::Range;

/// Dense matrix over the exact scalar field.
#[derive(Clone, PartialEq, Eq)]
pub struct ScalarMat {
    n: usize,
    data: Vec<Scalar>,
}

impl ScalarMat {
    pub fn zeros(n: usize) -> Self {
        ScalarMat { n, data: vec![Scalar::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ScalarMat::zeros(n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_entries(n: usize, entries: &[(usize, usize, Scalar)]) -> Self {
        let mut m = ScalarMat::zeros(n);
        for (r, c, v) in entries {
            let cur = m.get(*r, *c).clone();
            m.set(*r, *c, &cur + v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.n + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    pub fn trace(&self) -> Scalar {
        let mut t = Scalar::zero();
        for i in 0..self.n {
            t = &t + self.get(i, i);
        }
        t
    }

    pub fn transpose(&self) -> ScalarMat {
        let mut m = ScalarMat::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                m.set(c, r, self.get(r, c).clone());
            }
        }
        m
    }

    pub fn add(&self, rhs: &ScalarMat) -> ScalarMat {
        assert_eq!(self.n, rhs.n);
        ScalarMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &ScalarMat) -> ScalarMat {
        assert_eq!(self.n, rhs.n);
        ScalarMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> ScalarMat {
        ScalarMat { n: self.n, data: self.data.iter().map(|a| -a).collect() }
    }

    pub fn scale(&self, s: &Scalar) -> ScalarMat {
        ScalarMat { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, rhs: &ScalarMat) -> ScalarMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = ScalarMat::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..n {
                    let b = rhs.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(r, c).clone();
                    out.set(r, c, &cur + &(a * b));
                }
            }
        }
        out
    }

    /// `[A, B] = AB - BA`, exact.
    pub fn commutator(&self, rhs: &ScalarMat) -> ScalarMat {
        self.mul(rhs).sub(&rhs.mul(self))
    }

    /// Smallest `m >= 1` with `M^m = 0`, or `None` if not nilpotent
    /// (checked up to `M^dim`).
    pub fn nilpotency_order(&self) -> Option<usize> {
        if self.is_zero() {
            return Some(1);
        }
        let mut p = self.clone();
        for m in 1..=self.n {
            if p.is_zero() {
                return Some(m);
            }
            p = p.mul(self);
        }
        if p.is_zero() {
            return Some(self.n + 1);
        }
        None
    }

    pub fn nonzero_entries(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(move |(i, v)| (i / n, i % n, v))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(Scalar::to_f64).collect()
    }
}

impl fmt::Debug for ScalarMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            for c in 0..self.n {
                if c > 0 {
                    write!(f, "\t")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Which block of the ordered basis a generator belongs to; `k` is 1-based.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum GeneratorTag {
    Plus(usize),
    Cartan(usize),
    Minus(usize),
}

/// Identity of one commuting block in stage order.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum BlockId {
    Plus(usize),
    Cartan,
    Minus(usize),
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockId::Plus(k) => write!(f, "a{}+", k),
            BlockId::Cartan => write!(f, "h"),
            BlockId::Minus(k) => write!(f, "a{}-", k),
        }
    }
}

/// One basis element: its representation matrix, block tag, and root.
#[derive(Clone, Debug)]
pub struct Generator {
    pub index: usize,
    pub matrix: ScalarMat,
    pub tag: GeneratorTag,
    pub root: Option<Root>,
}

/// A contiguous run of the ordered basis spanning one commuting subalgebra
/// (for `G2`, the coarse `n+ / h / n-` split, whose outer blocks are not
/// commutative).
#[derive(Clone, Debug)]
pub struct Block {
    pub id: BlockId,
    pub range: Range<usize>,
}

/// The ordered basis of the algebra together with its block structure.
#[derive(Clone, Debug)]
pub struct OrderedBasis {
    pub family: Family,
    pub rank: usize,
    pub root_system: RootSystem,
    pub rep_dim: usize,
    pub generators: Vec<Generator>,
    pub blocks: Vec<Block>,
}

impl OrderedBasis {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn num_positive(&self) -> usize {
        self.root_system.num_positive()
    }

    /// Range of the Cartan generators in the ordered basis.
    pub fn cartan_range(&self) -> Range<usize> {
        let p = self.num_positive();
        p..p + self.rank
    }

    pub fn block_of(&self, index: usize) -> &Block {
        self.blocks
            .iter()
            .find(|b| b.range.contains(&index))
            .expect("index within basis")
    }

    /// `sum_i coeffs[i] * X_i` in the defining representation.
    pub fn element(&self, coeffs: &[Scalar]) -> ScalarMat {
        assert_eq!(coeffs.len(), self.dim());
        let mut m = ScalarMat::zeros(self.rep_dim);
        for (c, g) in coeffs.iter().zip(&self.generators) {
            if !c.is_zero() {
                m = m.add(&g.matrix.scale(c));
            }
        }
        m
    }

    /// The invariant bilinear form preserved by the representation, if the
    /// family is defined by one (`B`, `C`, `D`, and the `so(7)` form for
    /// `G2`); `None` for `A`.
    pub fn form_matrix(&self) -> Option<ScalarMat> {
        form_matrix(self.family, self.rank)
    }

    /// Exact expansion of arbitrary representation matrices over this basis.
    pub fn expander(&self) -> BasisExpander {
        BasisExpander::new(self)
    }
}

pub fn form_matrix(family: Family, rank: usize) -> Option<ScalarMat> {
    let one = Scalar::one;
    match family {
        Family::A => None,
        Family::B => {
            let n = rank;
            let mut entries = vec![(0, 0, one())];
            for i in 0..n {
                entries.push((1 + i, 1 + n + i, one()));
                entries.push((1 + n + i, 1 + i, one()));
            }
            Some(ScalarMat::from_entries(2 * n + 1, &entries))
        }
        Family::C => {
            let n = rank;
            let mut entries = Vec::new();
            for i in 0..n {
                entries.push((i, n + i, one()));
                entries.push((n + i, i, -one()));
            }
            Some(ScalarMat::from_entries(2 * n, &entries))
        }
        Family::D => {
            let n = rank;
            let mut entries = Vec::new();
            for i in 0..n {
                entries.push((i, n + i, one()));
                entries.push((n + i, i, one()));
            }
            Some(ScalarMat::from_entries(2 * n, &entries))
        }
        Family::G2 => {
            // G2 sits inside so(7) in the same convention as B_3.
            form_matrix(Family::B, 3)
        }
    }
}

/// Representation dimension of the defining representation.
pub fn rep_dim(family: Family, rank: usize) -> usize {
    match family {
        Family::A => rank + 1,
        Family::B => 2 * rank + 1,
        Family::C | Family::D => 2 * rank,
        Family::G2 => 7,
    }
}

/// Build the ordered basis with explicit matrices.
pub fn build_matrix_basis(family: Family, rank: usize) -> Result<OrderedBasis, ConfigError> {
    check_family_rank(family, rank)?;
    if family == Family::G2 {
        return Ok(g2_basis());
    }
    let rs = build_root_system(family, rank)?;
    let d = rep_dim(family, rank);
    let num_pos = rs.num_positive();
    let mut generators = Vec::with_capacity(2 * num_pos + rank);

    let block_of_pos = |i: usize| -> usize {
        rs.partition
            .iter()
            .position(|r| r.contains(&i))
            .expect("partition covers positives")
            + 1
    };

    for i in 0..num_pos {
        generators.push(Generator {
            index: i,
            matrix: root_vector_matrix(family, rank, &rs.positive_eps[i]),
            tag: GeneratorTag::Plus(block_of_pos(i)),
            root: Some(rs.positive_roots[i].clone()),
        });
    }
    for k in 0..rank {
        generators.push(Generator {
            index: num_pos + k,
            matrix: cartan_matrix(family, rank, &coroot_weights(family, rank, k, &rs)),
            tag: GeneratorTag::Cartan(k + 1),
            root: None,
        });
    }
    for i in (0..num_pos).rev() {
        let neg_eps: EpsVec = rs.positive_eps[i].iter().map(|c| -c).collect();
        generators.push(Generator {
            index: 2 * num_pos + rank - 1 - i,
            matrix: root_vector_matrix(family, rank, &neg_eps),
            tag: GeneratorTag::Minus(block_of_pos(i)),
            root: Some(rs.positive_roots[i].negated()),
        });
    }

    let mut blocks = Vec::new();
    for (k, range) in rs.partition.iter().enumerate() {
        blocks.push(Block { id: BlockId::Plus(k + 1), range: range.clone() });
    }
    blocks.push(Block { id: BlockId::Cartan, range: num_pos..num_pos + rank });
    let total = 2 * num_pos + rank;
    for (k, range) in rs.partition.iter().enumerate().rev() {
        blocks.push(Block {
            id: BlockId::Minus(k + 1),
            range: total - range.end..total - range.start,
        });
    }

    Ok(OrderedBasis { family, rank, root_system: rs, rep_dim: d, generators, blocks })
}

/// Matrix of the root vector for the given eps-realization, in the fixed
/// sign convention the reference parametrizations use.
fn root_vector_matrix(family: Family, rank: usize, eps: &EpsVec) -> ScalarMat {
    let one = Scalar::one;
    let nz: Vec<(usize, i32)> = eps
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect();
    match family {
        Family::A => {
            let d = rank + 1;
            let a = nz.iter().find(|&&(_, c)| c == 1).expect("A root shape").0;
            let b = nz.iter().find(|&&(_, c)| c == -1).expect("A root shape").0;
            ScalarMat::from_entries(d, &[(a, b, one())])
        }
        Family::B => {
            let n = rank;
            let d = 2 * n + 1;
            let v = |i: usize| 1 + i;
            let w = |i: usize| 1 + n + i;
            let entries: Vec<(usize, usize, Scalar)> = match nz.as_slice() {
                // eps_j: the first-row/column sector, positive orientation.
                [(j, 1)] => vec![(0, w(*j), one()), (v(*j), 0, -one())],
                // -eps_j: same sector, normalized with a leading minus.
                [(j, -1)] => vec![(0, v(*j), -one()), (w(*j), 0, one())],
                [(i, 1), (j, -1)] => vec![(v(*i), v(*j), one()), (w(*j), w(*i), -one())],
                [(i, -1), (j, 1)] => vec![(v(*j), v(*i), one()), (w(*i), w(*j), -one())],
                [(i, 1), (j, 1)] => vec![(v(*i), w(*j), one()), (v(*j), w(*i), -one())],
                [(i, -1), (j, -1)] => vec![(w(*i), v(*j), -one()), (w(*j), v(*i), one())],
                _ => panic!("not a B root: {:?}", eps),
            };
            ScalarMat::from_entries(d, &entries)
        }
        Family::C => {
            let n = rank;
            let d = 2 * n;
            let entries: Vec<(usize, usize, Scalar)> = match nz.as_slice() {
                [(i, 2)] => vec![(*i, n + *i, one())],
                [(i, -2)] => vec![(n + *i, *i, one())],
                [(i, 1), (j, -1)] => vec![(*i, *j, one()), (n + *j, n + *i, -one())],
                [(i, -1), (j, 1)] => vec![(*j, *i, one()), (n + *i, n + *j, -one())],
                [(i, 1), (j, 1)] => vec![(*i, n + *j, one()), (*j, n + *i, one())],
                [(i, -1), (j, -1)] => vec![(n + *i, *j, one()), (n + *j, *i, one())],
                _ => panic!("not a C root: {:?}", eps),
            };
            ScalarMat::from_entries(d, &entries)
        }
        Family::D => {
            let n = rank;
            let d = 2 * n;
            let entries: Vec<(usize, usize, Scalar)> = match nz.as_slice() {
                [(i, 1), (j, -1)] => vec![(*i, *j, one()), (n + *j, n + *i, -one())],
                [(i, -1), (j, 1)] => vec![(*j, *i, one()), (n + *i, n + *j, -one())],
                [(i, 1), (j, 1)] => vec![(*i, n + *j, one()), (*j, n + *i, -one())],
                [(i, -1), (j, -1)] => vec![(n + *i, *j, -one()), (n + *j, *i, one())],
                _ => panic!("not a D root: {:?}", eps),
            };
            ScalarMat::from_entries(d, &entries)
        }
        Family::G2 => unreachable!("G2 matrices are fixed data"),
    }
}

/// eps-weight vector of the coroot of the `k`-th simple root (0-based `k`).
fn coroot_weights(family: Family, rank: usize, k: usize, rs: &RootSystem) -> Vec<i32> {
    let alpha = &rs.simple_eps[k];
    match family {
        // B: the last simple root is short (|alpha|^2 = 1), coroot = 2 alpha.
        Family::B if k == rank - 1 => alpha.iter().map(|c| 2 * c).collect(),
        // C: the first simple root is long (|alpha|^2 = 4), coroot = alpha/2.
        Family::C if k == 0 => alpha.iter().map(|c| c / 2).collect(),
        _ => alpha.clone(),
    }
}

/// Diagonal Cartan matrix realizing the given eps weights.
fn cartan_matrix(family: Family, rank: usize, weights: &[i32]) -> ScalarMat {
    match family {
        Family::A => {
            let d = rank + 1;
            let mut m = ScalarMat::zeros(d);
            for (i, &wi) in weights.iter().enumerate() {
                m.set(i, i, Scalar::from_int(wi as i64));
            }
            m
        }
        Family::B => {
            let n = rank;
            let mut m = ScalarMat::zeros(2 * n + 1);
            for (i, &wi) in weights.iter().enumerate() {
                m.set(1 + i, 1 + i, Scalar::from_int(wi as i64));
                m.set(1 + n + i, 1 + n + i, Scalar::from_int(-(wi as i64)));
            }
            m
        }
        Family::C | Family::D => {
            let n = rank;
            let mut m = ScalarMat::zeros(2 * n);
            for (i, &wi) in weights.iter().enumerate() {
                m.set(i, i, Scalar::from_int(wi as i64));
                m.set(n + i, n + i, Scalar::from_int(-(wi as i64)));
            }
            m
        }
        Family::G2 => unreachable!(),
    }
}

/// The fixed 7-dimensional `G2` basis. Entries carry `sqrt 2`; the positive
/// simple root vectors are `X_2` (long) and `X_6` (short).
fn g2_basis() -> OrderedBasis {
    let rs = build_root_system(Family::G2, 2).expect("fixed G2 system");
    let s2 = Scalar::sqrt2;
    let one = Scalar::one;
    let int = Scalar::from_int;
    // 1-based (row, col, value) entry lists, straight from the reference
    // parametrization of the 7-dimensional representation.
    #[allow(clippy::type_complexity)]
    let gens: Vec<Vec<(usize, usize, Scalar)>> = vec![
        vec![(2, 4, one()), (7, 5, -one())],
        vec![(3, 4, one()), (7, 6, -one())],
        vec![(1, 4, s2()), (2, 6, -one()), (3, 5, one()), (7, 1, -s2())],
        vec![(2, 3, one()), (6, 5, -one())],
        vec![(1, 5, -s2()), (2, 1, s2()), (6, 4, one()), (7, 3, -one())],
        vec![(1, 3, s2()), (2, 7, one()), (4, 5, -one()), (6, 1, -s2())],
        vec![(2, 2, one()), (3, 3, -one()), (5, 5, -one()), (6, 6, one())],
        vec![(3, 3, one()), (4, 4, -one()), (6, 6, -one()), (7, 7, one())],
        vec![(1, 6, s2()), (3, 1, -s2()), (5, 4, one()), (7, 2, -one())],
        vec![(1, 2, -s2()), (3, 7, one()), (4, 6, -one()), (5, 1, s2())],
        vec![(3, 2, -one()), (5, 6, one())],
        vec![(1, 7, -s2()), (4, 1, s2()), (5, 3, one()), (6, 2, -one())],
        vec![(4, 3, one()), (6, 7, -one())],
        vec![(4, 2, one()), (5, 7, -one())],
    ];
    let _ = int;
    let generators: Vec<Generator> = gens
        .into_iter()
        .enumerate()
        .map(|(i, entries)| {
            let entries0: Vec<(usize, usize, Scalar)> =
                entries.into_iter().map(|(r, c, v)| (r - 1, c - 1, v)).collect();
            let tag = if i < 6 {
                GeneratorTag::Plus(1)
            } else if i < 8 {
                GeneratorTag::Cartan(i - 5)
            } else {
                GeneratorTag::Minus(1)
            };
            let root = match i {
                0..=5 => Some(rs.positive_roots[i].clone()),
                8..=13 => Some(rs.positive_roots[13 - i].negated()),
                _ => None,
            };
            Generator { index: i, matrix: ScalarMat::from_entries(7, &entries0), tag, root }
        })
        .collect();
    let blocks = vec![
        Block { id: BlockId::Plus(1), range: 0..6 },
        Block { id: BlockId::Cartan, range: 6..8 },
        Block { id: BlockId::Minus(1), range: 8..14 },
    ];
    OrderedBasis { family: Family::G2, rank: 2, root_system: rs, rep_dim: 7, generators, blocks }
}

/// `[X, Y]` for representation matrices.
pub fn commutator(x: &ScalarMat, y: &ScalarMat) -> ScalarMat {
    x.commutator(y)
}

/// Expand representation matrices exactly over the basis.
///
/// Built once per basis via Gaussian elimination on the flattened generator
/// matrices; each later expansion replays the recorded row operations on the
/// target, skipping the ones whose pivot entry is zero. An inconsistent
/// target (a matrix outside the span) is reported, never mis-expanded.
pub struct BasisExpander {
    dim: usize,
    rep_dim: usize,
    ops: Vec<RowOp>,
    /// `pivot_row[j]` = row holding the unit pivot of basis column `j`.
    pivot_row: Vec<usize>,
}

enum RowOp {
    Swap(usize, usize),
    Scale(usize, Scalar),
    /// `row[target] -= factor * row[pivot]`
    Eliminate { target: usize, pivot: usize, factor: Scalar },
}

impl BasisExpander {
    fn new(basis: &OrderedBasis) -> Self {
        let n = basis.dim();
        let d = basis.rep_dim;
        let rows = d * d;
        // Column j of the system = flattened matrix of generator j.
        let mut m: Vec<Vec<Scalar>> = vec![vec![Scalar::zero(); n]; rows];
        for (j, g) in basis.generators.iter().enumerate() {
            for (r, c, v) in g.matrix.nonzero_entries() {
                m[r * d + c][j] = v.clone();
            }
        }
        let mut ops = Vec::new();
        let mut pivot_row = Vec::with_capacity(n);
        let mut next_row = 0;
        for col in 0..n {
            let p = (next_row..rows)
                .find(|&r| !m[r][col].is_zero())
                .expect("generators linearly independent");
            if p != next_row {
                m.swap(p, next_row);
                ops.push(RowOp::Swap(p, next_row));
            }
            let inv = m[next_row][col].try_inv().expect("pivot nonzero");
            if !inv.is_one() {
                for c in col..n {
                    m[next_row][c] = &m[next_row][c] * &inv;
                }
                ops.push(RowOp::Scale(next_row, inv));
            }
            for r in 0..rows {
                if r != next_row && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in col..n {
                        let delta = &f * &m[next_row][c];
                        m[r][c] = &m[r][c] - &delta;
                    }
                    ops.push(RowOp::Eliminate { target: r, pivot: next_row, factor: f });
                }
            }
            pivot_row.push(next_row);
            next_row += 1;
        }
        BasisExpander { dim: n, rep_dim: d, ops, pivot_row }
    }

    /// Coefficients `c` with `target = sum_j c_j X_j`.
    ///
    /// Panics if the target lies outside the span; with a valid Lie algebra
    /// basis and bracket inputs this is an internal consistency error.
    pub fn expand(&self, target: &ScalarMat) -> Vec<Scalar> {
        assert_eq!(target.dim(), self.rep_dim);
        let d = self.rep_dim;
        let mut rhs = vec![Scalar::zero(); d * d];
        for (r, c, v) in target.nonzero_entries() {
            rhs[r * d + c] = v.clone();
        }
        for op in &self.ops {
            match op {
                RowOp::Swap(a, b) => rhs.swap(*a, *b),
                RowOp::Scale(r, f) => {
                    if !rhs[*r].is_zero() {
                        rhs[*r] = &rhs[*r] * f;
                    }
                }
                RowOp::Eliminate { target, pivot, factor } => {
                    if !rhs[*pivot].is_zero() {
                        let delta = factor * &rhs[*pivot];
                        rhs[*target] = &rhs[*target] - &delta;
                    }
                }
            }
        }
        let coeffs: Vec<Scalar> =
            self.pivot_row.iter().map(|&r| std::mem::replace(&mut rhs[r], Scalar::zero())).collect();
        for (r, v) in rhs.iter().enumerate() {
            assert!(
                v.is_zero(),
                "bracket expansion inconsistent at flattened row {}: residue {}",
                r,
                v
            );
        }
        coeffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Result of one block-structure check.
#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub description: String,
    pub passed: bool,
    /// Generator index pair witnessing a failure.
    pub witness: Option<(usize, usize)>,
}

/// Structural verification of the 2N+1 block decomposition.
#[derive(Clone, Debug)]
pub struct BlockStructureReport {
    pub checks: Vec<BlockCheck>,
}

impl BlockStructureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Check commutativity of every block and the ideal property
/// `[a_k±, b_k±] ⊆ a_k±` in the defining representation.
///
/// For classical families every check passes; for `G2` the coarse `n±`
/// blocks fail commutativity, which the report records rather than erroring.
pub fn verify_block_structure(basis: &OrderedBasis) -> BlockStructureReport {
    let expander = basis.expander();
    let mut checks = Vec::new();

    for block in &basis.blocks {
        let mut passed = true;
        let mut witness = None;
        'outer: for i in block.range.clone() {
            for j in block.range.clone() {
                if i < j {
                    let br = basis.generators[i].matrix.commutator(&basis.generators[j].matrix);
                    if !br.is_zero() {
                        passed = false;
                        witness = Some((i, j));
                        break 'outer;
                    }
                }
            }
        }
        checks.push(BlockCheck {
            description: format!("block {} commutative", block.id),
            passed,
            witness,
        });
    }

    // Ideal property: for X in a_k±, Y in b_k± = a_k± ⊕ a_{k+1}± ⊕ …,
    // [X, Y] stays inside a_k±.
    for block in &basis.blocks {
        let k = match block.id {
            BlockId::Plus(k) | BlockId::Minus(k) => k,
            BlockId::Cartan => continue,
        };
        let cumulative: Vec<usize> = basis
            .blocks
            .iter()
            .filter(|b| match (block.id, b.id) {
                (BlockId::Plus(_), BlockId::Plus(l)) => l >= k,
                (BlockId::Minus(_), BlockId::Minus(l)) => l >= k,
                _ => false,
            })
            .flat_map(|b| b.range.clone())
            .collect();
        let mut passed = true;
        let mut witness = None;
        'ideal: for i in block.range.clone() {
            for &j in &cumulative {
                let br = basis.generators[i].matrix.commutator(&basis.generators[j].matrix);
                if br.is_zero() {
                    continue;
                }
                let coeffs = expander.expand(&br);
                for (idx, c) in coeffs.iter().enumerate() {
                    if !c.is_zero() && !block.range.contains(&idx) {
                        passed = false;
                        witness = Some((i, j));
                        break 'ideal;
                    }
                }
            }
        }
        checks.push(BlockCheck {
            description: format!("{} ideal in b{}{}", block.id, k, plus_minus(block.id)),
            passed,
            witness,
        });
    }

    BlockStructureReport { checks }
}

fn plus_minus(id: BlockId) -> &'static str {
    match id {
        BlockId::Plus(_) => "+",
        BlockId::Minus(_) => "-",
        BlockId::Cartan => "",
    }
}

/// The candidate fine split of the `G2` positive sector,
/// `n+ = span{X_1,X_2,X_3} ⊕ span{X_4,X_5,X_6}`: the first factor is
/// commutative, the second is not, and the first is not an ideal in `n+`.
#[derive(Clone, Debug)]
pub struct G2SplitReport {
    pub first_commutative: bool,
    pub second_commutative: bool,
    pub first_ideal_in_nplus: bool,
}

pub fn g2_split_report(basis: &OrderedBasis) -> G2SplitReport {
    assert_eq!(basis.family, Family::G2);
    let expander = basis.expander();
    let commutative = |range: Range<usize>| -> bool {
        let idx: Vec<usize> = range.collect();
        idx.iter().all(|&i| {
            idx.iter().all(|&j| {
                i >= j
                    || basis.generators[i]
                        .matrix
                        .commutator(&basis.generators[j].matrix)
                        .is_zero()
            })
        })
    };
    let first_commutative = commutative(0..3);
    let second_commutative = commutative(3..6);
    let mut first_ideal = true;
    'ideal: for i in 0..3 {
        for j in 0..6 {
            let br = basis.generators[i].matrix.commutator(&basis.generators[j].matrix);
            if br.is_zero() {
                continue;
            }
            let coeffs = expander.expand(&br);
            if coeffs.iter().enumerate().any(|(idx, c)| !c.is_zero() && idx >= 3) {
                first_ideal = false;
                break 'ideal;
            }
        }
    }
    G2SplitReport {
        first_commutative,
        second_commutative,
        first_ideal_in_nplus: first_ideal,
    }
}
