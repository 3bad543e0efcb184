//! The extracted hierarchy must reproduce the reference printed systems
//! exactly, coefficient by coefficient: all ten `B_2` equations, the
//! positive-sector blocks of `B_3` and `C_3`, and the degree-4 positive
//! sector of `G2`.
//!
//! Expected right-hand sides are written in the machine grammar and expanded
//! through the same exact parser the machine format uses, so the comparison
//! is over `Q`-coefficient maps, not strings.

use weinorman::liealg::build_matrix_basis;
use weinorman::rootsys::Family;
use weinorman::wn::{build_system, parse_machine_rhs, Rhs, WnSystem};

fn system(family: Family, rank: usize) -> WnSystem {
    build_system(build_matrix_basis(family, rank).unwrap())
}

fn rhs_of(sys: &WnSystem, var_1based: usize) -> &Rhs {
    let var = var_1based - 1;
    let stage = sys.stages.iter().find(|s| s.range.contains(&var)).unwrap();
    &stage.rhs[var - stage.range.start]
}

fn check(sys: &WnSystem, expected: &[&str]) {
    for (i, src) in expected.iter().enumerate() {
        if src.is_empty() {
            continue;
        }
        let want = parse_machine_rhs(src).unwrap_or_else(|e| panic!("u{}': {}", i + 1, e));
        let got = rhs_of(sys, i + 1);
        assert_eq!(
            got,
            &want,
            "{}{} u{}' mismatch:\n got: {:?}\nwant: {:?}",
            sys.basis.family,
            sys.basis.rank,
            i + 1,
            got,
            want
        );
    }
}

#[test]
fn b2_full_system() {
    let sys = system(Family::B, 2);
    check(
        &sys,
        &[
            "-a10*u1^2 + 1/2*a8*u2^2 - a9*u1*u2 - a4*u2 + 2*a6*u1 + a1",
            "-1/2*a9*u2^2 - a10*u1*u2 - a8*u2*u3 + a9*u1*u3 + a4*u3 + a5*u2 - a7*u1 + a2",
            "1/2*a10*u2^2 - a8*u3^2 - a9*u2*u3 + a7*u2 + (2*a5 - 2*a6)*u3 + a3",
            "1/2*(a9*u3 - a10*u2 - a7)*u4^2 + (a8*u3 - a10*u1 - a5 + 2*a6)*u4 - a8*u2 + a9*u1 + a4",
            "-a8*u3 - a9*u2 - a10*u1 + a5",
            "1/2*a9*u3*u4 - 1/2*a10*u2*u4 - 1/2*a7*u4 - 1/2*a9*u2 - a10*u1 + a6",
            "-(a9*u3 - a10*u2 - a7)*exp(-u5 + 2*u6)",
            "(-1/2*a10*u4^2 + a9*u4 + a8)*exp(2*u5 - 2*u6)",
            "1/2*(-a10*u4^2 + 2*a9*u4 + 2*a8)*u7*exp(2*u5 - 2*u6) + (-a10*u4 + a9)*exp(u5)",
            "-1/4*(-a10*u4^2 + 2*a9*u4 + 2*a8)*u7^2*exp(2*u5 - 2*u6) + a10*exp(2*u6) \
             - (-a10*u4 + a9)*u7*exp(u5)",
        ],
    );
}

#[test]
fn b3_positive_sector() {
    let sys = system(Family::B, 3);
    check(
        &sys,
        &[
            "a17*u2*u4 + 1/2*a17*u3^2 - a18*u1*u4 - a19*u1*u3 - a20*u1*u2 - a21*u1^2 \
             - a6*u4 - a7*u3 - a8*u2 + a11*u1 + a1",
            "-a17*u2*u5 + a18*u1*u5 + 1/2*a18*u3^2 - a19*u2*u3 - a20*u2^2 - a21*u1*u2 \
             + a6*u5 - a9*u3 - a14*u1 + (a10 - a11 + 2*a12)*u2 + a2",
            "-a17*u3*u5 - a18*u3*u4 + a19*u1*u5 + a19*u2*u4 - 1/2*a19*u3^2 - a20*u2*u3 \
             - a21*u1*u3 + a7*u5 + a9*u4 + a10*u3 - a13*u2 - a15*u1 + a3",
            "1/2*u3^2*a20 - a19*u3*u4 - a18*u4^2 + a20*u5*u1 - a21*u1*u4 - a17*u5*u4 \
             + u3*a13 - a16*u1 + a8*u5 - (2*a12 - a10 - a11)*u4 + a4",
            "-a17*u5^2 - a18*u4*u5 - a19*u3*u5 - a20*u2*u5 + a21*u2*u4 + 1/2*a21*u3^2 \
             + a14*u4 + a15*u3 + a16*u2 + (2*a10 - a11)*u5 + a5",
            "(a20*u5 - a21*u4 - a16)*u6^2 + (a19*u5 - a21*u3 - a15)*u6*u7 \
             + 1/2*(-a18*u5 + a21*u2 + a14)*u7^2 + (a18*u3 - a19*u2 - a9)*u7 \
             + (a17*u5 + a18*u4 - a20*u2 - a21*u1 - a10 + 2*a12)*u6 - a17*u2 + a18*u1 + a6",
            "(a20*u5 - a21*u4 - a16)*u6*u7 + (u3*a21 - a19*u5 + a15)*u6*u8 \
             - 1/2*(u3*a21 - a19*u5 + a15)*u7^2 - (u2*a21 - a18*u5 + a14)*u7*u8 \
             - (u3*a20 - a19*u4 + a13)*u6 - (a21*u1 - a17*u5 + a10 - a11)*u7 \
             - (u3*a18 - u2*a19 - a9)*u8 - u3*a17 + a19*u1 + a7",
            "-1/2*(a20*u5 - a21*u4 - a16)*u7^2 - (u3*a21 - a19*u5 + a15)*u7*u8 \
             - (u2*a21 - a18*u5 + a14)*u8^2 + (u3*a20 - a19*u4 + a13)*u7 \
             + (u2*a20 - a18*u4 - a21*u1 + a17*u5 - 2*a12 - a10 + 2*a11)*u8 \
             + a20*u1 - a17*u4 + a8",
            "-1/2*(-u3*a21*u8 + a19*u5*u8 - a20*u5*u7 + a21*u7*u4 + a20*u3 - a19*u4 \
             - a15*u8 + a16*u7 + a13)*u9^2 \
             - (a18*u5*u8 - a21*u2*u8 - a20*u6*u5 + a21*u6*u4 + u2*a20 - a18*u4 \
             - a14*u8 + a16*u6 - 2*a12 + a11)*u9 \
             + a21*u3*u6 - a21*u2*u7 + a18*u5*u7 - a19*u6*u5 - a18*u3 + a19*u2 \
             - a14*u7 + a15*u6 + a9",
        ],
    );
}

#[test]
fn c3_positive_sector() {
    let sys = system(Family::C, 3);
    check(
        &sys,
        &[
            "-a16*u3^2 - 2*a17*u2*u3 - a18*u2^2 - 2*a19*u1*u3 - 2*a20*u1*u2 - a21*u1^2 \
             + 2*a7*u3 + 2*a9*u2 + 2*a12*u1 + a1",
            "-a16*u3*u5 - a17*u2*u5 - a17*u3*u4 - a18*u2*u4 - a19*u1*u5 - a19*u2*u3 \
             - a20*u1*u4 - a20*u2^2 - a21*u1*u2 + a7*u5 + a8*u3 + a9*u4 + a11*u2 \
             + a13*u1 + a2",
            "-a16*u3*u6 - a17*u2*u6 - a17*u3*u5 - a18*u2*u5 - a19*u1*u6 - a19*u3^2 \
             - a20*u1*u5 - a20*u2*u3 - a21*u1*u3 + a7*u6 + a9*u5 + a14*u2 + a15*u1 \
             + (a10 - a11 + a12)*u3 + a3",
            "-a16*u5^2 - 2*a17*u4*u5 - a18*u4^2 - 2*a19*u2*u5 - 2*a20*u2*u4 - a21*u2^2 \
             + 2*a8*u5 + 2*a13*u2 + (2*a11 - 2*a12)*u4 + a4",
            "-a16*u5*u6 - a17*u4*u6 - a17*u5^2 - a18*u4*u5 - a19*u2*u6 - a19*u3*u5 \
             - a20*u2*u5 - a20*u3*u4 - a21*u2*u3 + a8*u6 + a13*u3 + a14*u4 + a15*u2 \
             + (a10 - a12)*u5 + a5",
            "-a16*u6^2 - 2*a17*u5*u6 - a18*u5^2 - 2*a19*u3*u6 - 2*a20*u3*u5 - a21*u3^2 \
             + 2*a14*u5 + 2*a15*u3 + (2*a10 - 2*a11)*u6 + a6",
            "(a19*u6 + a20*u5 + a21*u3 - a15)*u7^2 + (a17*u6 + a18*u5 + a20*u3 - a14)*u7*u8 \
             + (a16*u6 + a17*u5 - a20*u2 - a21*u1 - a10 + a11 + a12)*u7 \
             + (-a17*u3 - a18*u2 - a20*u1 + a9)*u8 - a16*u3 - a17*u2 - a19*u1 + a7",
            "(a19*u6 + a20*u5 + a21*u3 - a15)*u7*u8 + (a17*u6 + a18*u5 + a20*u3 - a14)*u8^2 \
             + (a16*u6 - a18*u4 + a19*u3 - a20*u2 - a10 + 2*a11 - a12)*u8 \
             + (-a19*u5 - a20*u4 - a21*u2 + a13)*u7 - a16*u5 - a17*u4 - a19*u2 + a8",
            "(-a19*u6*u8 - a20*u5*u8 - a21*u3*u8 + a15*u8 + a19*u5 + a20*u4 + a21*u2 \
             - a13)*u9^2 \
             + (-a17*u6*u8 - a18*u5*u8 + a19*u6*u7 - a20*u3*u8 + a20*u5*u7 + a21*u3*u7 \
             + a14*u8 - a15*u7 + a17*u5 + a18*u4 - a19*u3 - a21*u1 - a11 + 2*a12)*u9 \
             + a17*u6*u7 + a18*u5*u7 + a20*u3*u7 - a14*u7 - a17*u3 - a18*u2 - a20*u1 + a9",
        ],
    );
}

#[test]
fn g2_positive_sector() {
    let sys = system(Family::G2, 2);
    check(
        &sys,
        &[
            "2*a14*u2*u5^3 + 3*a14*u3^2*u5^2 + 6*a10*u3*u5^2 + 2*a11*u5^3 + 3*a12*u2*u5^2 \
             + a13*u3^3 - 3*a6*u3^2 + 3*a9*u5^2 - 3*a12*u1*u3 - a13*u1*u2 - a14*u1^2 \
             + a4*u2 + 3*a5*u3 + (a7 + a8)*u1 + a1",
            "-a14*u3^3 - 3*a10*u3^2 - 3*a12*u2*u3 - a13*u2^2 - a14*u1*u2 - 3*a9*u3 \
             - a11*u1 + (-a7 + 2*a8)*u2 + a2",
            "a14*u2*u5^2 + 2*a14*u3^2*u5 + 4*a10*u3*u5 + a11*u5^2 + 2*a12*u2*u5 \
             - a12*u3^2 - a13*u2*u3 - a14*u1*u3 + a6*u2 + a8*u3 + 2*a9*u5 - a10*u1 + a3",
            "a14*u2*u4^2 + 3*a14*u3*u4*u5 - a14*u5^3 + 3*a10*u4*u5 + a11*u4^2 - 3*a12*u5^2 \
             + a13*u2*u4 + 3*a13*u3*u5 - a14*u1*u4 - 3*a6*u5 - a13*u1 + (2*a7 - a8)*u4 + a4",
            "a14*u2*u4*u5 + a14*u3^2*u4 + a14*u3*u5^2 + 2*a10*u3*u4 + a10*u5^2 \
             + a11*u4*u5 + a12*u2*u4 - a12*u3*u5 + a13*u3^2 - a14*u1*u5 - 2*a6*u3 \
             + a7*u5 + a9*u4 - a12*u1 + a5",
            "a14*u2*u5*u6^2 + a14*u3^2*u6^2 + 2*a10*u3*u6^2 + a11*u5*u6^2 + a12*u2*u6^2 \
             + a14*u2*u4*u6 + a14*u3*u5*u6 + a9*u6^2 + a10*u5*u6 + a11*u4*u6 \
             + a12*u3*u6 + a13*u2*u6 - a14*u3*u4 + a14*u5^2 - a10*u4 + 2*a12*u5 \
             - a13*u3 + (a7 - a8)*u6 + a6",
        ],
    );
}

#[test]
fn b2_u1_rhs_at_origin_with_unit_a1_is_one() {
    // The constant term of the first equation is a1.
    let sys = system(Family::B, 2);
    let rhs = rhs_of(&sys, 1);
    let u = vec![0.0; sys.dim()];
    let mut a = vec![0.0; sys.dim()];
    a[0] = 1.0;
    let mut value = 0.0;
    for (&j, poly) in rhs {
        value += a[j] * poly.eval(&u);
    }
    assert_eq!(value, 1.0);
}

#[test]
fn b2_emission_is_stable() {
    // Byte-identical plain emission across two independent builds.
    let first = weinorman::wn::emit_equations(
        &system(Family::B, 2),
        weinorman::wn::EmitFormat::Plain,
    );
    let second = weinorman::wn::emit_equations(
        &system(Family::B, 2),
        weinorman::wn::EmitFormat::Plain,
    );
    assert_eq!(first, second);
    assert!(first.contains("exp(-u5 + 2*u6)"));
    assert!(first.contains("exp(2*u5 - 2*u6)"));
    assert!(first.contains("exp(2*u6)"));
    assert!(first.contains("exp(u5)"));
}
