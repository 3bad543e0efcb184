//! Adjoint operators in the ordered basis: exact matrices, triangularity
//! and nilpotency checks, invariance reports, and the closed-form
//! exponentials that make the Wei-Norman coefficient matrix polynomial.
//!
//! For a root vector of a classical algebra the adjoint matrix is strictly
//! triangular and cubes to zero, so `exp(u ad X)` is the exact quadratic
//! `I + u ad X + u^2 (ad X)^2 / 2`. `G2` root strings of length four push
//! the order to 4 for some root vectors, which is where the Riccati bound
//! breaks.

use crate::liealg::{BasisExpander, BlockId, GeneratorTag, OrderedBasis, ScalarMat};
use crate::rootsys::Family;
use crate::scalars::{ExpPoly, Scalar};
use std::ops::Range;

/// Where an adjoint operator came from.
#[derive(Clone, Debug)]
pub enum AdjointSource {
    /// `ad X_i` for a single basis generator.
    Generator(usize),
    /// `ad X` for `X = sum coeffs_i X_i` supported on one block.
    BlockCombination { block: BlockId, coeffs: Vec<Scalar> },
}

/// Exact matrix of `ad X` acting on the ordered basis.
#[derive(Clone, Debug)]
pub struct AdjointOperator {
    pub matrix: ScalarMat,
    pub source: AdjointSource,
}

impl AdjointOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_strictly_upper_triangular(&self) -> bool {
        self.matrix.nonzero_entries().all(|(r, c, _)| r < c)
    }

    pub fn is_strictly_lower_triangular(&self) -> bool {
        self.matrix.nonzero_entries().all(|(r, c, _)| r > c)
    }
}

/// `ad X_i` expanded exactly over the ordered basis: column `j` holds the
/// coefficients of `[X_i, X_j]`.
pub fn adjoint_matrix(basis: &OrderedBasis, expander: &BasisExpander, i: usize) -> AdjointOperator {
    let combo = single_coeff(basis.dim(), i);
    let matrix = adjoint_of_element(basis, expander, &combo);
    AdjointOperator { matrix, source: AdjointSource::Generator(i) }
}

/// `ad X` for `X = sum coeffs_j X_j` (full-length coefficient vector).
pub fn adjoint_of_combination(
    basis: &OrderedBasis,
    expander: &BasisExpander,
    block: BlockId,
    coeffs: &[Scalar],
) -> AdjointOperator {
    let matrix = adjoint_of_element(basis, expander, coeffs);
    AdjointOperator {
        matrix,
        source: AdjointSource::BlockCombination { block, coeffs: coeffs.to_vec() },
    }
}

fn single_coeff(n: usize, i: usize) -> Vec<Scalar> {
    let mut v = vec![Scalar::zero(); n];
    v[i] = Scalar::one();
    v
}

fn adjoint_of_element(
    basis: &OrderedBasis,
    expander: &BasisExpander,
    coeffs: &[Scalar],
) -> ScalarMat {
    let n = basis.dim();
    let x = basis.element(coeffs);
    let mut m = ScalarMat::zeros(n);
    for j in 0..n {
        let br = x.commutator(&basis.generators[j].matrix);
        if br.is_zero() {
            continue;
        }
        for (r, c) in expander.expand(&br).into_iter().enumerate() {
            if !c.is_zero() {
                m.set(r, j, c);
            }
        }
    }
    m
}

/// All `ad X_i`, sharing one expander.
pub fn all_adjoints(basis: &OrderedBasis) -> Vec<AdjointOperator> {
    let expander = basis.expander();
    (0..basis.dim()).map(|i| adjoint_matrix(basis, &expander, i)).collect()
}

/// Smallest `m` with `(ad X)^m = 0`, or `None` when the operator is not
/// nilpotent (Cartan directions).
pub fn nilpotency_order(op: &AdjointOperator) -> Option<usize> {
    op.matrix.nilpotency_order()
}

/// `exp(sum_{i in block} u_i ad X_i)` as an exact `ExpPoly` matrix, using
/// the terminating series of the nilpotent block sum. The `u` variable index
/// of each generator is its position in the ordered basis.
///
/// Rejects `G2`, whose positive/negative sectors are not commutative: there
/// the factored product [`exp_ad_general`] per generator must be used.
pub fn exp_ad(
    basis: &OrderedBasis,
    adjoints: &[AdjointOperator],
    block_id: BlockId,
) -> Result<Vec<Vec<ExpPoly>>, String> {
    if basis.family == Family::G2 {
        return Err("G2 blocks are not commutative; use exp_ad_general per generator".into());
    }
    let block = basis
        .blocks
        .iter()
        .find(|b| b.id == block_id)
        .ok_or_else(|| format!("no block {:?}", block_id))?;
    if block_id == BlockId::Cartan {
        return Err("Cartan exponentials are diagonal; use exp_ad_general".into());
    }
    let n = basis.dim();
    // The block sum ad X is nilpotent of order <= 3, so the series stops.
    let mut out = identity_exp(n);
    let mut current = out.clone();
    let mut factorial = 1u64;
    for step in 1..=n {
        current = apply_block_ad(basis, adjoints, block.range.clone(), &current);
        if current.iter().all(|row| row.iter().all(ExpPoly::is_zero)) {
            break;
        }
        factorial *= step as u64;
        let inv_fact = Scalar::from_ratio(1, factorial as i64);
        for (r, row) in current.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    let scaled = v.scale(&inv_fact);
                    out[r][c] = &out[r][c] + &scaled;
                }
            }
        }
        assert!(step <= 4, "block exponential failed to terminate");
    }
    Ok(out)
}

fn identity_exp(n: usize) -> Vec<Vec<ExpPoly>> {
    (0..n)
        .map(|r| (0..n).map(|c| if r == c { ExpPoly::one() } else { ExpPoly::zero() }).collect())
        .collect()
}

/// One application of `sum_{i in range} u_i ad X_i` to an ExpPoly matrix.
fn apply_block_ad(
    basis: &OrderedBasis,
    adjoints: &[AdjointOperator],
    range: Range<usize>,
    m: &[Vec<ExpPoly>],
) -> Vec<Vec<ExpPoly>> {
    let n = basis.dim();
    let mut out: Vec<Vec<ExpPoly>> = vec![vec![ExpPoly::zero(); n]; n];
    for i in range {
        let u = ExpPoly::var(i);
        for (dst, src, s) in adjoints[i].matrix.nonzero_entries() {
            let factor = u.scale(s);
            for c in 0..n {
                if !m[src][c].is_zero() {
                    let add = &factor * &m[src][c];
                    out[dst][c] = &out[dst][c] + &add;
                }
            }
        }
    }
    out
}

/// `exp(u ad X_i)` for a single generator: the terminating series for
/// nilpotent `ad X_i`, or the diagonal of exponentials `e^{c u}` for a
/// Cartan generator (the `c` are the integer root values).
pub fn exp_ad_general(
    basis: &OrderedBasis,
    adjoints: &[AdjointOperator],
    i: usize,
    var: usize,
) -> Vec<Vec<ExpPoly>> {
    let n = basis.dim();
    if matches!(basis.generators[i].tag, GeneratorTag::Cartan(_)) {
        let mut out = identity_exp(n);
        for (r, c, v) in adjoints[i].matrix.nonzero_entries() {
            assert_eq!(r, c, "Cartan adjoint must be diagonal");
            assert!(v.is_rational());
            let coeff = rational_to_i64(v);
            out[r][r] = ExpPoly::exponential(&[(var, coeff)]);
        }
        return out;
    }
    let mut out = identity_exp(n);
    let mut current = identity_exp(n);
    let mut factorial: i64 = 1;
    for step in 1..=n {
        current = mul_ad(&adjoints[i].matrix, &current);
        if current.iter().all(|row| row.iter().all(ExpPoly::is_zero)) {
            break;
        }
        factorial *= step as i64;
        let u_pow = ExpPoly::term(Scalar::from_ratio(1, factorial), &[(var, step as u32)], &[]);
        for (r, row) in current.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    let add = &u_pow * v;
                    out[r][c] = &out[r][c] + &add;
                }
            }
        }
        assert!(step <= 6, "nilpotent exponential failed to terminate");
    }
    out
}

fn mul_ad(ad: &ScalarMat, m: &[Vec<ExpPoly>]) -> Vec<Vec<ExpPoly>> {
    let n = ad.dim();
    let mut out: Vec<Vec<ExpPoly>> = vec![vec![ExpPoly::zero(); n]; n];
    for (dst, src, s) in ad.nonzero_entries() {
        for c in 0..n {
            if !m[src][c].is_zero() {
                let add = m[src][c].scale(s);
                out[dst][c] = &out[dst][c] + &add;
            }
        }
    }
    out
}

pub(crate) fn rational_to_i64(v: &Scalar) -> i64 {
    use num_traits::ToPrimitive;
    assert!(v.is_rational());
    let r = v.rat_part();
    assert!(num_traits::One::is_one(r.denom()));
    r.numer().to_i64().expect("root value fits i64")
}

/// Invariance report for `ad X`, `X` in `a_k±`: each earlier `a_l±`
/// (`l < k`) and the middle block `b_k+ ⊕ h ⊕ b_k-` must map into itself.
#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub checks: Vec<(String, bool)>,
    /// `(row, col)` of an offending matrix entry, if any.
    pub witness: Option<(usize, usize)>,
}

impl InvarianceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

pub fn verify_invariance(basis: &OrderedBasis, op: &AdjointOperator, k: usize) -> InvarianceReport {
    let mut subspaces: Vec<(String, Vec<usize>)> = Vec::new();
    for block in &basis.blocks {
        match block.id {
            BlockId::Plus(l) | BlockId::Minus(l) if l < k => {
                subspaces.push((format!("{}", block.id), block.range.clone().collect()));
            }
            _ => {}
        }
    }
    let middle: Vec<usize> = basis
        .blocks
        .iter()
        .filter(|b| match b.id {
            BlockId::Plus(l) | BlockId::Minus(l) => l >= k,
            BlockId::Cartan => true,
        })
        .flat_map(|b| b.range.clone())
        .collect();
    subspaces.push((format!("b{}+ + h + b{}-", k, k), middle));

    let mut checks = Vec::new();
    let mut witness = None;
    for (name, indices) in subspaces {
        let inside = |i: usize| indices.contains(&i);
        let mut ok = true;
        for &col in &indices {
            for (r, c, _v) in op.matrix.nonzero_entries() {
                if c == col && !inside(r) {
                    ok = false;
                    if witness.is_none() {
                        witness = Some((r, c));
                    }
                }
            }
        }
        checks.push((format!("{} invariant", name), ok));
    }
    InvarianceReport { checks, witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::build_matrix_basis;

    fn basis_and_ads(family: Family, rank: usize) -> (OrderedBasis, Vec<AdjointOperator>) {
        let basis = build_matrix_basis(family, rank).unwrap();
        let ads = all_adjoints(&basis);
        (basis, ads)
    }

    #[test]
    fn cartan_adjoints_are_diagonal() {
        let (basis, ads) = basis_and_ads(Family::B, 2);
        for i in basis.cartan_range() {
            for (r, c, _) in ads[i].matrix.nonzero_entries() {
                assert_eq!(r, c);
            }
            // Zero on the Cartan block itself.
            for j in basis.cartan_range() {
                assert!(ads[i].matrix.get(j, j).is_zero());
            }
        }
    }

    #[test]
    fn b2_triangularity() {
        let (basis, ads) = basis_and_ads(Family::B, 2);
        // X_1 positive root vector, X_8 negative.
        assert!(ads[0].is_strictly_upper_triangular());
        assert!(ads[7].is_strictly_lower_triangular());
        let _ = basis;
    }

    #[test]
    fn classical_root_vectors_cube_to_zero() {
        for (family, rank) in [(Family::A, 2), (Family::B, 3), (Family::C, 3), (Family::D, 4)] {
            let (basis, ads) = basis_and_ads(family, rank);
            for g in &basis.generators {
                if g.root.is_some() {
                    let ord = nilpotency_order(&ads[g.index]).unwrap();
                    assert!(ord <= 3, "{}{} X{}: order {}", family, rank, g.index + 1, ord);
                }
            }
        }
    }

    #[test]
    fn g2_x3_has_order_four() {
        let (_basis, ads) = basis_and_ads(Family::G2, 2);
        assert_eq!(nilpotency_order(&ads[2]), Some(4));
        // Cartan adjoints are not nilpotent.
        assert_eq!(nilpotency_order(&ads[6]), None);
    }

    #[test]
    fn exp_ad_zero_coeffs_is_identity() {
        let (basis, ads) = basis_and_ads(Family::B, 2);
        let m = exp_ad(&basis, &ads, BlockId::Plus(2)).unwrap();
        // Substituting u = 0 into every entry leaves the identity.
        let n = basis.dim();
        for (r, row) in m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let at_zero = v.eval(&vec![0.0; n]);
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_eq!(at_zero, expect);
            }
        }
    }

    #[test]
    fn exp_ad_single_variable_is_quadratic() {
        let (basis, ads) = basis_and_ads(Family::B, 2);
        let m = exp_ad(&basis, &ads, BlockId::Plus(2)).unwrap();
        for row in &m {
            for v in row {
                assert!(v.total_degree().unwrap_or(0) <= 2);
                assert!(v.degree_in(3) <= 2);
            }
        }
    }

    #[test]
    fn one_parameter_group_property() {
        // exp_ad over a commutative block at u, then at v, equals exp at u+v:
        // check numerically on the evaluated matrices.
        let (basis, ads) = basis_and_ads(Family::B, 2);
        let m = exp_ad(&basis, &ads, BlockId::Plus(1)).unwrap();
        let n = basis.dim();
        let eval = |pt: &[f64]| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(|p| p.eval(pt)).collect()).collect()
        };
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        for (idx, (a, b)) in [(0.3, -0.2), (-0.1, 0.4), (0.25, 0.5)].iter().enumerate() {
            u[idx] = *a;
            v[idx] = *b;
            w[idx] = a + b;
        }
        let mu = eval(&u);
        let mv = eval(&v);
        let mw = eval(&w);
        for r in 0..n {
            for c in 0..n {
                let mut prod = 0.0;
                for k in 0..n {
                    prod += mu[r][k] * mv[k][c];
                }
                assert!((prod - mw[r][c]).abs() < 1e-12, "({},{})", r, c);
            }
        }
    }

    #[test]
    fn cartan_exponential_is_diagonal_with_root_values() {
        // exp(u5 ad H1) on B2: diagonal entries e^{c u5} with c = alpha(H1).
        let (basis, ads) = basis_and_ads(Family::B, 2);
        let h1 = basis.cartan_range().start;
        let m = exp_ad_general(&basis, &ads, h1, h1);
        let mut seen = std::collections::BTreeSet::new();
        for (r, row) in m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if r != c {
                    assert!(v.is_zero());
                    continue;
                }
                let vars = v.exponential_vars();
                if vars.is_empty() {
                    seen.insert(0i64);
                } else {
                    let (key, coeff) = v.terms().next().unwrap();
                    assert!(coeff.is_one());
                    assert_eq!(key.exponent.len(), 1);
                    assert_eq!(key.exponent[0].0, h1);
                    seen.insert(key.exponent[0].1);
                }
            }
        }
        // Root values of H1 on the B2 roots: 0 on the Cartan, ±1, ±2 on the
        // root vectors.
        let want: std::collections::BTreeSet<i64> = [-2, -1, 0, 1, 2].into_iter().collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn exp_ad_matches_dense_matrix_exponential() {
        use crate::integrate::{expm, Mat64};
        let (basis, ads) = basis_and_ads(Family::C, 3);
        let n = basis.dim();
        let expander = basis.expander();
        for block in &basis.blocks {
            if block.id == BlockId::Cartan {
                continue;
            }
            let sym = exp_ad(&basis, &ads, block.id).unwrap();
            // Random evaluation point on the block.
            let mut u = vec![0.0; n];
            let mut coeffs = vec![Scalar::zero(); n];
            for (j, i) in block.range.clone().enumerate() {
                let v = 0.3 - 0.07 * j as f64;
                u[i] = v;
                coeffs[i] = Scalar::from_ratio((v * 100.0).round() as i64, 100);
                u[i] = coeffs[i].to_f64();
            }
            let op = adjoint_of_combination(&basis, &expander, block.id, &coeffs);
            let dense = expm(&Mat64 { n, data: op.matrix.to_f64() });
            for r in 0..n {
                for c in 0..n {
                    let got = sym[r][c].eval(&u);
                    assert!(
                        (got - dense.get(r, c)).abs() < 1e-12,
                        "block {} entry ({},{}): {} vs {}",
                        block.id,
                        r,
                        c,
                        got,
                        dense.get(r, c)
                    );
                }
            }
        }
    }

    #[test]
    fn invariance_b3() {
        let (basis, ads) = basis_and_ads(Family::B, 3);
        // X in a_2+ leaves a_1+, a_1- and the middle block invariant.
        let block = basis.blocks.iter().find(|b| b.id == BlockId::Plus(2)).unwrap();
        for i in block.range.clone() {
            let report = verify_invariance(&basis, &ads[i], 2);
            assert!(report.all_passed(), "X{}: {:?}", i + 1, report);
        }
    }

    #[test]
    fn g2_invariance_of_candidate_split_fails() {
        let (basis, ads) = basis_and_ads(Family::G2, 2);
        // Some generator of the candidate second factor span{X_4,X_5,X_6}
        // maps the first factor span{X_1,X_2,X_3} outside itself, so the
        // candidate split lacks the invariance the hierarchy needs.
        // Concretely [X_6, X_3] is proportional to X_5.
        let leaks = (3..6).any(|i| {
            ads[i]
                .matrix
                .nonzero_entries()
                .any(|(r, c, _)| (0..3).contains(&c) && (3..6).contains(&r))
        });
        assert!(leaks, "expected some ad X (X in c_b) to push c_a into c_b");
        assert!(!ads[5].matrix.get(4, 2).is_zero(), "[X6, X3] should hit X5");
        let _ = basis;
    }
}
