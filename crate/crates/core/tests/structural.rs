//! Structural suite across the supported classical algebras: commutative
//! ideal blocks, strict triangularity of root-vector adjoints, cubic
//! nilpotency (for root vectors and for random block elements), and the
//! quadratic block-diagonal exponentials. All checks are exact.

mod common;

use common::SplitMix;
use weinorman::adjoint::{
    adjoint_of_combination, all_adjoints, nilpotency_order, verify_invariance,
};
use weinorman::liealg::{build_matrix_basis, BlockId, GeneratorTag, OrderedBasis, ScalarMat};
use weinorman::rootsys::Family;
use weinorman::scalars::Scalar;

const SUITE: &[(Family, usize)] = &[
    (Family::A, 1),
    (Family::A, 2),
    (Family::A, 3),
    (Family::A, 4),
    (Family::B, 2),
    (Family::B, 3),
    (Family::B, 4),
    (Family::C, 3),
    (Family::C, 4),
    (Family::D, 4),
];

#[test]
fn blocks_are_commutative_ideals() {
    for &(family, rank) in SUITE {
        let basis = build_matrix_basis(family, rank).unwrap();
        let report = weinorman::liealg::verify_block_structure(&basis);
        assert!(report.all_passed(), "{}{}: {:#?}", family, rank, report.checks);
        assert_eq!(basis.blocks.len(), 2 * rank + 1);
    }
}

#[test]
fn root_vector_adjoints_strictly_triangular() {
    for &(family, rank) in SUITE {
        let basis = build_matrix_basis(family, rank).unwrap();
        let ads = all_adjoints(&basis);
        for g in &basis.generators {
            match g.tag {
                GeneratorTag::Plus(_) => assert!(
                    ads[g.index].is_strictly_upper_triangular(),
                    "{}{} ad X{} not strictly upper",
                    family,
                    rank,
                    g.index + 1
                ),
                GeneratorTag::Minus(_) => assert!(
                    ads[g.index].is_strictly_lower_triangular(),
                    "{}{} ad X{} not strictly lower",
                    family,
                    rank,
                    g.index + 1
                ),
                GeneratorTag::Cartan(_) => {}
            }
        }
    }
}

#[test]
fn root_vector_adjoints_cube_to_zero() {
    for &(family, rank) in SUITE {
        let basis = build_matrix_basis(family, rank).unwrap();
        let ads = all_adjoints(&basis);
        for g in &basis.generators {
            if g.root.is_some() {
                let ord = nilpotency_order(&ads[g.index]).expect("nilpotent");
                assert!(ord <= 3, "{}{} ad X{}: order {}", family, rank, g.index + 1, ord);
            }
        }
    }
}

fn random_block_combination(
    basis: &OrderedBasis,
    block: &weinorman::liealg::Block,
    rng: &mut SplitMix,
) -> Vec<Scalar> {
    let mut coeffs = vec![Scalar::zero(); basis.dim()];
    for i in block.range.clone() {
        let (p, q) = rng.small_rational();
        coeffs[i] = Scalar::from_ratio(p, q);
    }
    coeffs
}

#[test]
fn random_block_elements_cube_to_zero() {
    let mut rng = SplitMix(7);
    for &(family, rank) in SUITE {
        let basis = build_matrix_basis(family, rank).unwrap();
        let expander = basis.expander();
        let mut done = 0;
        'outer: loop {
            for block in &basis.blocks {
                if block.id == BlockId::Cartan {
                    continue;
                }
                let coeffs = random_block_combination(&basis, block, &mut rng);
                let op = adjoint_of_combination(&basis, &expander, block.id, &coeffs);
                let ord = nilpotency_order(&op).expect("nilpotent");
                assert!(ord <= 3, "{}{} block {}: order {}", family, rank, block.id, ord);
                done += 1;
                if done >= 20 {
                    break 'outer;
                }
            }
        }
    }
}

/// Membership pattern for the block-diagonal decomposition around level `k`:
/// `a_1± ⊕ … ⊕ a_{k-1}± ⊕ (b_k+ ⊕ h ⊕ b_k-) ⊕ …`.
fn same_cell(basis: &OrderedBasis, k: usize, r: usize, c: usize) -> bool {
    let cell = |i: usize| -> (u8, usize) {
        match basis.generators[i].tag {
            GeneratorTag::Plus(l) if l < k => (0, l),
            GeneratorTag::Minus(l) if l < k => (1, l),
            _ => (2, 0), // the middle block
        }
    };
    cell(r) == cell(c)
}

#[test]
fn block_exponentials_quadratic_and_block_diagonal() {
    let mut rng = SplitMix(11);
    for &(family, rank) in SUITE {
        let basis = build_matrix_basis(family, rank).unwrap();
        let expander = basis.expander();
        for block in &basis.blocks {
            let k = match block.id {
                BlockId::Plus(k) | BlockId::Minus(k) => k,
                BlockId::Cartan => continue,
            };
            let coeffs = random_block_combination(&basis, block, &mut rng);
            let op = adjoint_of_combination(&basis, &expander, block.id, &coeffs);
            // (ad X)^3 = 0, so the exponential is the exact quadratic.
            let ad = &op.matrix;
            let ad2 = ad.mul(ad);
            assert!(ad2.mul(ad).is_zero(), "{}{} block {}", family, rank, block.id);
            let mut exp = ScalarMat::identity(basis.dim());
            exp = exp.add(ad);
            exp = exp.add(&ad2.scale(&Scalar::from_ratio(1, 2)));
            // Block diagonality with respect to the level-k decomposition.
            for (r, c, v) in exp.nonzero_entries() {
                assert!(
                    same_cell(&basis, k, r, c),
                    "{}{} block {}: exp entry ({},{}) = {} crosses cells",
                    family,
                    rank,
                    block.id,
                    r + 1,
                    c + 1,
                    v
                );
            }
            // Triangularity of the exponential.
            match block.id {
                BlockId::Plus(_) => {
                    assert!(exp.nonzero_entries().all(|(r, c, _)| r <= c));
                }
                BlockId::Minus(_) => {
                    assert!(exp.nonzero_entries().all(|(r, c, _)| r >= c));
                }
                BlockId::Cartan => unreachable!(),
            }
            // Invariance report agrees.
            let inv = verify_invariance(&basis, &op, k);
            assert!(inv.all_passed(), "{}{} block {}: {:?}", family, rank, block.id, inv);
        }
    }
}

#[test]
fn g2_negative_suite() {
    let basis = build_matrix_basis(Family::G2, 2).unwrap();
    let ads = all_adjoints(&basis);
    // Some root vector reaches nilpotency order exactly 4.
    let max_ord = basis
        .generators
        .iter()
        .filter(|g| g.root.is_some())
        .map(|g| nilpotency_order(&ads[g.index]).expect("nilpotent"))
        .max()
        .unwrap();
    assert_eq!(max_ord, 4);
    // The candidate fine split fails in all three required ways.
    let split = weinorman::liealg::g2_split_report(&basis);
    assert!(split.first_commutative);
    assert!(!split.second_commutative);
    assert!(!split.first_ideal_in_nplus);
}
