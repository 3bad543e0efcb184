//! The map `(a_1,…,a_n) -> sum a_i X_i` must reproduce the reference
//! parametrization matrices entry for entry at the printed ranks.
//!
//! Each golden table lists the matrix entries as linear expressions in the
//! `a_i` (with `s2` standing for `sqrt 2`), e.g. `a5-2*a6` or `-s2*a10`.

use std::collections::BTreeMap;
use weinorman::liealg::build_matrix_basis;
use weinorman::rootsys::Family;
use weinorman::scalars::Scalar;

/// Parse an entry like `-a9`, `a5-2*a6`, `s2*a10`, `2*a6-a5`, `0` into a
/// map generator-index (1-based) -> coefficient.
fn parse_entry(src: &str) -> BTreeMap<usize, Scalar> {
    let mut out: BTreeMap<usize, Scalar> = BTreeMap::new();
    let compact: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "0" {
        return out;
    }
    let mut terms: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, ch) in compact.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    for term in terms {
        let (sign, body) = match term.strip_prefix('-') {
            Some(rest) => (Scalar::from_int(-1), rest.to_string()),
            None => (Scalar::from_int(1), term.trim_start_matches('+').to_string()),
        };
        let mut coeff = sign;
        let mut gen = None;
        for factor in body.split('*') {
            if factor == "s2" {
                coeff = &coeff * &Scalar::sqrt2();
            } else if let Some(idx) = factor.strip_prefix('a') {
                gen = Some(idx.parse::<usize>().expect("generator index"));
            } else {
                let k: i64 = factor.parse().expect("integer coefficient");
                coeff = &coeff * &Scalar::from_int(k);
            }
        }
        let gen = gen.expect("every term names a generator");
        let entry = out.entry(gen).or_insert_with(Scalar::zero);
        *entry = &*entry + &coeff;
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn check_parametrization(family: Family, rank: usize, golden: &[&str]) {
    let basis = build_matrix_basis(family, rank).unwrap();
    let d = basis.rep_dim;
    assert_eq!(golden.len(), d, "{}{}: row count", family, rank);
    for (r, row_src) in golden.iter().enumerate() {
        let cells: Vec<&str> = row_src.split(',').map(str::trim).collect();
        assert_eq!(cells.len(), d, "{}{}: row {} length", family, rank, r + 1);
        for (c, cell) in cells.iter().enumerate() {
            let want = parse_entry(cell);
            let mut got: BTreeMap<usize, Scalar> = BTreeMap::new();
            for g in &basis.generators {
                let v = g.matrix.get(r, c);
                if !v.is_zero() {
                    got.insert(g.index + 1, v.clone());
                }
            }
            assert_eq!(
                got,
                want,
                "{}{} entry ({},{}): got {:?}, want {} ",
                family,
                rank,
                r + 1,
                c + 1,
                got,
                cell
            );
        }
    }
}

#[test]
fn b2_matrix() {
    check_parametrization(
        Family::B,
        2,
        &[
            "0, -a9, -a4, a2, a7",
            "-a2, a5, a1, 0, a3",
            "-a7, a10, a5-2*a6, -a3, 0",
            "a9, 0, -a8, -a5, -a10",
            "a4, a8, 0, -a1, 2*a6-a5",
        ],
    );
}

#[test]
fn b3_matrix() {
    check_parametrization(
        Family::B,
        3,
        &[
            "0, -a19, -a7, -a9, a3, a15, a13",
            "-a3, a10, a1, a2, 0, a5, a4",
            "-a15, a21, a10-a11, a14, -a5, 0, a16",
            "-a13, a20, a8, a11-2*a12, -a4, -a16, 0",
            "a19, 0, -a17, -a18, -a10, -a21, -a20",
            "a7, a17, 0, -a6, -a1, -a10+a11, -a8",
            "a9, a18, a6, 0, -a2, -a14, -a11+2*a12",
        ],
    );
}

#[test]
fn c3_matrix() {
    check_parametrization(
        Family::C,
        3,
        &[
            "a10-a11, a14, a15, a6, a5, a3",
            "a8, a11-a12, a13, a5, a4, a2",
            "a7, a9, a12, a3, a2, a1",
            "a16, a17, a19, -a10+a11, -a8, -a7",
            "a17, a18, a20, -a14, a12-a11, -a9",
            "a19, a20, a21, -a15, -a13, -a12",
        ],
    );
}

#[test]
fn a4_matrix() {
    check_parametrization(
        Family::A,
        4,
        &[
            "a11, a4, a3, a2, a1",
            "a21, -a11+a12, a7, a6, a5",
            "a22, a18, -a12+a13, a9, a8",
            "a23, a19, a16, -a13+a14, a10",
            "a24, a20, a17, a15, -a14",
        ],
    );
}

#[test]
fn b4_matrix() {
    check_parametrization(
        Family::B,
        4,
        &[
            "0, -a33, -a10, -a14, -a16, a4, a27, a23, a21",
            "-a4, a17, a1, a2, a3, 0, a7, a6, a5",
            "-a27, a36, a17-a18, a25, a26, -a7, 0, a29, a28",
            "-a23, a35, a12, a18-a19, a22, -a6, -a29, 0, a24",
            "-a21, a34, a11, a15, a19-2*a20, -a5, -a28, -a24, 0",
            "a33, 0, -a30, -a31, -a32, -a17, -a36, -a35, -a34",
            "a10, a30, 0, -a8, -a9, -a1, -a17+a18, -a12, -a11",
            "a14, a31, a8, 0, -a13, -a2, -a25, -a18+a19, -a15",
            "a16, a32, a9, a13, 0, -a3, -a26, -a22, -a19+2*a20",
        ],
    );
}

#[test]
fn c4_matrix() {
    check_parametrization(
        Family::C,
        4,
        &[
            "a17-a18, a24, a25, a26, a10, a9, a7, a6",
            "a13, -a19+a18, a22, a23, a9, a8, a5, a3",
            "a12, a15, a19-a20, a21, a7, a5, a4, a2",
            "a11, a14, a16, a20, a6, a3, a2, a1",
            "a27, a28, a30, a31, -a17+a18, -a13, -a12, -a11",
            "a28, a29, a32, a34, -a24, a19-a18, -a15, -a14",
            "a30, a32, a33, a35, -a25, -a22, -a19+a20, -a16",
            "a31, a34, a35, a36, -a26, -a23, -a21, -a20",
        ],
    );
}

#[test]
fn d4_matrix() {
    check_parametrization(
        Family::D,
        4,
        &[
            "a13-a16, a17, a21, a22, 0, a6, a5, a4",
            "a12, a13-a14+a16, a19, a20, -a6, 0, a3, a2",
            "a8, a10, a14-a15, a18, -a5, -a3, 0, a1",
            "a7, a9, a11, a15, -a4, -a2, -a1, 0",
            "0, -a23, -a24, -a25, -a13+a16, -a12, -a8, -a7",
            "a23, 0, -a26, -a27, -a17, -a13+a14-a16, -a10, -a9",
            "a24, a26, 0, -a28, -a21, -a19, -a14+a15, -a11",
            "a25, a27, a28, 0, -a22, -a20, -a18, -a15",
        ],
    );
}

#[test]
fn g2_matrix() {
    check_parametrization(
        Family::G2,
        2,
        &[
            "0, -s2*a10, s2*a6, s2*a3, -s2*a5, s2*a9, -s2*a12",
            "s2*a5, a7, a4, a1, 0, -a3, a6",
            "-s2*a9, -a11, -a7+a8, a2, a3, 0, a10",
            "s2*a12, a14, a13, -a8, -a6, -a10, 0",
            "s2*a10, 0, a12, a9, -a7, a11, -a14",
            "-s2*a6, -a12, 0, a5, -a4, a7-a8, -a13",
            "-s2*a3, -a9, -a5, 0, -a1, -a2, a8",
        ],
    );
}

#[test]
fn block_spans_match_reference() {
    // Block sizes as listed alongside the printed parametrizations.
    let cases: Vec<(Family, usize, Vec<usize>)> = vec![
        (Family::B, 2, vec![3, 1, 2, 1, 3]),
        (Family::B, 3, vec![5, 3, 1, 3, 1, 3, 5]),
        (Family::C, 3, vec![6, 2, 1, 3, 1, 2, 6]),
        (Family::A, 4, vec![4, 3, 2, 1, 4, 1, 2, 3, 4]),
        (Family::B, 4, vec![7, 5, 3, 1, 4, 1, 3, 5, 7]),
        (Family::C, 4, vec![10, 3, 2, 1, 4, 1, 2, 3, 10]),
        (Family::D, 4, vec![6, 4, 1, 1, 4, 1, 1, 4, 6]),
    ];
    for (family, rank, sizes) in cases {
        let basis = build_matrix_basis(family, rank).unwrap();
        let got: Vec<usize> = basis.blocks.iter().map(|b| b.range.len()).collect();
        assert_eq!(got, sizes, "{}{}", family, rank);
    }
}
