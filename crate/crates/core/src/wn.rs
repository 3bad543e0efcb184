//! Assembly of the Wei-Norman coefficient matrix `A(u)` and symbolic
//! extraction of the staged hierarchy.
//!
//! With the ordered basis, the `l`-th column of `A` equals the `l`-th column
//! of `prod_{k<l} exp(u_k ad X_k)`. Because each block of the basis spans a
//! commutative subalgebra (classically), the partial products inside a block
//! act trivially on their own block, and the equation `a = A u'` peels off
//! block by block: multiply the running right-hand side by the inverse of
//! the current block exponential, read off the block's `u'`, zero those rows,
//! and continue. Every inverse is a terminating series (nilpotent blocks) or
//! a diagonal of reciprocal exponentials (Cartan), so no denominators ever
//! appear and the stages come out as polynomials times exponentials, linear
//! in the `a_j`.
//!
//! For `G2` only the coarse `n+ / h / n-` split survives. Its outer blocks
//! are not commutative, so the within-block partial products contribute a
//! unipotent correction `G` solved by a terminating Neumann series; the
//! positive stage then exceeds the Riccati degree bound, reaching total
//! degree 4.

use crate::adjoint::{all_adjoints, AdjointOperator};
use crate::exprdsl::{self, Func, RawExpr};
use crate::liealg::{BlockId, OrderedBasis};
use crate::rootsys::Family;
use crate::scalars::{ExpPoly, Scalar};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

/// Dense matrix of exact polynomial/exponential entries.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    pub n: usize,
    pub rows: Vec<Vec<ExpPoly>>,
}

impl PolyMatrix {
    pub fn identity(n: usize) -> Self {
        PolyMatrix {
            n,
            rows: (0..n)
                .map(|r| {
                    (0..n)
                        .map(|c| if r == c { ExpPoly::one() } else { ExpPoly::zero() })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> &ExpPoly {
        &self.rows[r][c]
    }

    /// Numeric evaluation at a `u` point.
    pub fn eval(&self, point: &[f64]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|p| p.eval(point)).collect())
            .collect()
    }
}

/// Hierarchy stage kinds: quadratic stages for the plus blocks, plain
/// integrations for the Cartan and minus blocks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StageKind {
    Riccati,
    Quadrature,
}

/// Right-hand side of one `u_l'`: the coefficient polynomial of each `a_j`
/// (0-based `j`); the dependence on `a` is exactly linear.
pub type Rhs = BTreeMap<usize, ExpPoly>;

/// One stage of the hierarchy.
#[derive(Clone, Debug)]
pub struct Stage {
    pub kind: StageKind,
    pub block: BlockId,
    /// Variable indices this stage solves for.
    pub range: Range<usize>,
    /// One entry per variable in `range`.
    pub rhs: Vec<Rhs>,
    /// Highest total degree counting only this stage's own variables.
    pub max_own_degree: u32,
    /// Set when a nominal Riccati stage exceeds degree 2 in its own
    /// variables (happens exactly for the `G2` positive sector).
    pub exceeds_riccati_degree: bool,
}

impl Stage {
    /// Evaluate all equations of this stage at numeric `u` (full-length)
    /// and `a`, writing `u'` into `out` (length = `range.len()`).
    pub fn eval_rhs(&self, u: &[f64], a: &[f64], out: &mut [f64]) {
        for (slot, rhs) in out.iter_mut().zip(&self.rhs) {
            let mut acc = 0.0;
            for (&j, poly) in rhs {
                if a[j] != 0.0 {
                    acc += a[j] * poly.eval(u);
                }
            }
            *slot = acc;
        }
    }
}

/// The assembled Wei-Norman system.
///
/// The symbolic `A(u)` is optional: the hierarchy is extracted through the
/// factored block structure and never materializes `A`, whose explicit
/// polynomial form grows combinatorially with rank. [`build_system`]
/// assembles it; [`build_system_hierarchy_only`] skips it, which is what the
/// high-rank feasibility path uses.
#[derive(Clone, Debug)]
pub struct WnSystem {
    pub basis: OrderedBasis,
    pub adjoints: Vec<AdjointOperator>,
    pub a_matrix: Option<PolyMatrix>,
    pub stages: Vec<Stage>,
}

impl WnSystem {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// The solved `u' = A^{-1} a` as a matrix of `ExpPoly`: row `l`, column
    /// `j` is the coefficient of `a_j` in `u_l'`.
    pub fn inverse_rows(&self) -> PolyMatrix {
        let n = self.dim();
        let mut rows = vec![vec![ExpPoly::zero(); n]; n];
        for stage in &self.stages {
            for (offset, rhs) in stage.rhs.iter().enumerate() {
                let l = stage.range.start + offset;
                for (&j, poly) in rhs {
                    rows[l][j] = poly.clone();
                }
            }
        }
        PolyMatrix { n, rows }
    }

    /// Evaluate the full hierarchy right-hand side at numeric `u`, `a`.
    pub fn eval_all(&self, u: &[f64], a: &[f64], out: &mut [f64]) {
        for stage in &self.stages {
            let range = stage.range.clone();
            stage.eval_rhs(u, a, &mut out[range]);
        }
    }
}

/// Build adjoints, assemble `A`, and extract the hierarchy in one call.
pub fn build_system(basis: OrderedBasis) -> WnSystem {
    let adjoints = all_adjoints(&basis);
    let a_matrix = Some(assemble_a(&basis, &adjoints));
    let stages = extract_hierarchy(&basis, &adjoints);
    WnSystem { basis, adjoints, a_matrix, stages }
}

/// Build the hierarchy without materializing the symbolic `A(u)`.
pub fn build_system_hierarchy_only(basis: OrderedBasis) -> WnSystem {
    let adjoints = all_adjoints(&basis);
    let stages = extract_hierarchy(&basis, &adjoints);
    WnSystem { basis, adjoints, a_matrix: None, stages }
}

/// Sparse view of `ad X_i` used by symbolic applications.
struct SparseAd {
    entries: Vec<(usize, usize, Scalar)>,
    diagonal: bool,
}

fn sparse_ads(adjoints: &[AdjointOperator]) -> Vec<SparseAd> {
    adjoints
        .iter()
        .map(|op| {
            let entries: Vec<(usize, usize, Scalar)> = op
                .matrix
                .nonzero_entries()
                .map(|(r, c, v)| (r, c, v.clone()))
                .collect();
            let diagonal = entries.iter().all(|&(r, c, _)| r == c);
            SparseAd { entries, diagonal }
        })
        .collect()
}

/// Apply `exp(sign * u_i ad X_i)` to a vector of ExpPoly, in place.
fn apply_exp_single(ad: &SparseAd, i: usize, sign: i64, v: &mut Vec<ExpPoly>) {
    if ad.diagonal {
        for &(r, _, ref s) in &ad.entries {
            if !v[r].is_zero() {
                let c = sign * crate::adjoint::rational_to_i64(s);
                let e = ExpPoly::exponential(&[(i, c)]);
                v[r] = &v[r] * &e;
            }
        }
        return;
    }
    let n = v.len();
    let mut term: Vec<ExpPoly> = v.clone();
    let mut factorial: i64 = 1;
    for step in 1..=n {
        // term <- (sign * u_i ad) term
        let mut next = vec![ExpPoly::zero(); n];
        let mut any = false;
        for &(dst, src, ref s) in &ad.entries {
            if term[src].is_zero() {
                continue;
            }
            let u_s = ExpPoly::term(
                if sign >= 0 { s.clone() } else { -s },
                &[(i, 1)],
                &[],
            );
            let add = &u_s * &term[src];
            if !add.is_zero() {
                next[dst] = &next[dst] + &add;
                any = true;
            }
        }
        term = next;
        if !any {
            break;
        }
        factorial *= step as i64;
        let inv = Scalar::from_ratio(1, factorial);
        for (slot, t) in v.iter_mut().zip(&term) {
            if !t.is_zero() {
                let scaled = t.scale(&inv);
                *slot = &*slot + &scaled;
            }
        }
        assert!(step <= 6, "adjoint exponential did not terminate");
    }
}

/// Assemble `A(u)`: column `l` is `prod_{k<l} exp(u_k ad X_k) e_l`,
/// factors applied right to left.
pub fn assemble_a(basis: &OrderedBasis, adjoints: &[AdjointOperator]) -> PolyMatrix {
    let n = basis.dim();
    let ads = sparse_ads(adjoints);
    let mut m = PolyMatrix::identity(n);
    for l in 0..n {
        let mut v: Vec<ExpPoly> = (0..n)
            .map(|r| if r == l { ExpPoly::one() } else { ExpPoly::zero() })
            .collect();
        for k in (0..l).rev() {
            apply_exp_single(&ads[k], k, 1, &mut v);
        }
        for (r, entry) in v.into_iter().enumerate() {
            m.rows[r][l] = entry;
        }
    }
    m
}

/// A vector of a-linear symbolic values, one per basis direction.
type RhsVec = Vec<Rhs>;

fn rhs_zero(n: usize) -> RhsVec {
    vec![Rhs::new(); n]
}

fn rhs_is_zero(r: &Rhs) -> bool {
    r.values().all(ExpPoly::is_zero)
}

fn rhs_add_assign(dst: &mut Rhs, src: &Rhs, factor: &ExpPoly) {
    for (&j, poly) in src {
        if poly.is_zero() {
            continue;
        }
        let add = factor * poly;
        let slot = dst.entry(j).or_insert_with(ExpPoly::zero);
        *slot = &*slot + &add;
        if slot.is_zero() {
            dst.remove(&j);
        }
    }
}

fn rhs_scale(r: &Rhs, s: &Scalar) -> Rhs {
    r.iter()
        .filter_map(|(&j, p)| {
            let scaled = p.scale(s);
            if scaled.is_zero() {
                None
            } else {
                Some((j, scaled))
            }
        })
        .collect()
}

fn rhs_mul_poly(r: &Rhs, factor: &ExpPoly) -> Rhs {
    r.iter()
        .filter_map(|(&j, p)| {
            let m = factor * p;
            if m.is_zero() {
                None
            } else {
                Some((j, m))
            }
        })
        .collect()
}

/// `exp(-u_i ad X_i)` applied to an a-linear vector, in place.
fn apply_exp_neg_single_rhs(ad: &SparseAd, i: usize, v: &mut RhsVec) {
    if ad.diagonal {
        for &(r, _, ref s) in &ad.entries {
            if !rhs_is_zero(&v[r]) {
                let c = -crate::adjoint::rational_to_i64(s);
                let e = ExpPoly::exponential(&[(i, c)]);
                v[r] = rhs_mul_poly(&v[r], &e);
            }
        }
        return;
    }
    let n = v.len();
    let mut term = v.clone();
    let mut factorial: i64 = 1;
    for step in 1..=n {
        let mut next = rhs_zero(n);
        let mut any = false;
        for &(dst, src, ref s) in &ad.entries {
            if rhs_is_zero(&term[src]) {
                continue;
            }
            let factor = ExpPoly::term(-s, &[(i, 1)], &[]);
            rhs_add_assign(&mut next[dst], &term[src], &factor);
            any = true;
        }
        term = next;
        if !any {
            break;
        }
        factorial *= step as i64;
        let inv = Scalar::from_ratio(1, factorial);
        for (slot, t) in v.iter_mut().zip(&term) {
            if !rhs_is_zero(t) {
                let scaled = rhs_scale(t, &inv);
                for (j, p) in scaled {
                    let cell = slot.entry(j).or_insert_with(ExpPoly::zero);
                    *cell = &*cell + &p;
                    if cell.is_zero() {
                        slot.remove(&j);
                    }
                }
            }
        }
        assert!(step <= 6, "adjoint exponential did not terminate");
    }
}

/// `exp(-sum_{i in range} u_i ad X_i)` applied to an a-linear vector:
/// terminating series of the nilpotent block sum (commutative blocks only).
fn apply_exp_neg_block_rhs(ads: &[SparseAd], range: Range<usize>, v: &mut RhsVec) {
    let n = v.len();
    let mut term = v.clone();
    let mut factorial: i64 = 1;
    for step in 1..=n {
        let mut next = rhs_zero(n);
        let mut any = false;
        for i in range.clone() {
            for &(dst, src, ref s) in &ads[i].entries {
                if rhs_is_zero(&term[src]) {
                    continue;
                }
                let factor = ExpPoly::term(-s, &[(i, 1)], &[]);
                rhs_add_assign(&mut next[dst], &term[src], &factor);
                any = true;
            }
        }
        term = next;
        if !any {
            break;
        }
        factorial *= step as i64;
        let inv = Scalar::from_ratio(1, factorial);
        for (slot, t) in v.iter_mut().zip(&term) {
            if !rhs_is_zero(t) {
                for (j, p) in rhs_scale(t, &inv) {
                    let cell = slot.entry(j).or_insert_with(ExpPoly::zero);
                    *cell = &*cell + &p;
                    if cell.is_zero() {
                        slot.remove(&j);
                    }
                }
            }
        }
        assert!(step <= 6, "block exponential did not terminate");
    }
}

/// Cartan factor inverse: multiply row `r` by `exp(-sum_i c_{i,r} u_i)`.
fn apply_cartan_inverse_rhs(ads: &[SparseAd], range: Range<usize>, v: &mut RhsVec) {
    let n = v.len();
    for (r, slot) in v.iter_mut().enumerate().take(n) {
        if rhs_is_zero(slot) {
            continue;
        }
        let mut form: Vec<(usize, i64)> = Vec::new();
        for i in range.clone() {
            for &(rr, cc, ref s) in &ads[i].entries {
                if rr == r && cc == r {
                    form.push((i, -crate::adjoint::rational_to_i64(s)));
                }
            }
        }
        if !form.is_empty() {
            let e = ExpPoly::exponential(&form);
            *slot = rhs_mul_poly(slot, &e);
        }
    }
}

/// Extract the staged hierarchy by peeling block inverses off `a = A u'`.
pub fn extract_hierarchy(basis: &OrderedBasis, adjoints: &[AdjointOperator]) -> Vec<Stage> {
    let n = basis.dim();
    let ads = sparse_ads(adjoints);
    let noncommutative = basis.family == Family::G2;

    // r starts as the formal vector a.
    let mut r: RhsVec = (0..n)
        .map(|j| {
            let mut m = Rhs::new();
            m.insert(j, ExpPoly::one());
            m
        })
        .collect();

    let mut stages = Vec::new();
    for block in &basis.blocks {
        let range = block.range.clone();
        // Apply U_block^{-1}.
        match block.id {
            BlockId::Cartan => apply_cartan_inverse_rhs(&ads, range.clone(), &mut r),
            BlockId::Plus(_) | BlockId::Minus(_) => {
                if noncommutative {
                    // Ordered product: (exp(u_s ad_s)…exp(u_e ad_e))^{-1}
                    // applies exp(-u_i ad_i) for ascending i.
                    for i in range.clone() {
                        apply_exp_neg_single_rhs(&ads[i], i, &mut r);
                    }
                } else {
                    apply_exp_neg_block_rhs(&ads, range.clone(), &mut r);
                }
            }
        }

        // Solve for this block's u'.
        let mut rhs: Vec<Rhs> = range.clone().map(|l| r[l].clone()).collect();
        if noncommutative && block.id != BlockId::Cartan {
            rhs = solve_block_correction(&ads, range.clone(), rhs);
        }

        for l in range.clone() {
            r[l].clear();
        }

        let own_degree = max_own_degree(&rhs, &range);
        let kind = match block.id {
            BlockId::Plus(_) => StageKind::Riccati,
            _ => StageKind::Quadrature,
        };
        stages.push(Stage {
            kind,
            block: block.id,
            range,
            max_own_degree: own_degree,
            exceeds_riccati_degree: kind == StageKind::Riccati && own_degree > 2,
            rhs,
        });
    }
    stages
}

/// For a non-commutative block, the partial products inside the block leave
/// a unipotent factor `G`: `(U^{-1} r)|_B = G u'|_B` with
/// `G e_l = (exp(-u_e ad_e) … exp(-u_l ad_l) e_l)|_B`. Solve through the
/// terminating Neumann series of `I - G`.
fn solve_block_correction(ads: &[SparseAd], range: Range<usize>, rhs: Vec<Rhs>) -> Vec<Rhs> {
    let width = range.len();
    let n = ads.len();
    // Columns of G restricted to the block.
    let mut g_cols: Vec<Vec<ExpPoly>> = Vec::with_capacity(width);
    for l in range.clone() {
        let mut v: Vec<ExpPoly> = (0..n)
            .map(|r| if r == l { ExpPoly::one() } else { ExpPoly::zero() })
            .collect();
        for i in l..range.end {
            apply_exp_single(&ads[i], i, -1, &mut v);
        }
        // The block is a subalgebra, so the vector stays inside it.
        for (idx, entry) in v.iter().enumerate() {
            assert!(
                range.contains(&idx) || entry.is_zero(),
                "suffix product escaped its block"
            );
        }
        g_cols.push(range.clone().map(|r| v[r].clone()).collect());
    }
    // M = I - G (entrywise), strictly "unipotent-off-diagonal".
    let mut m_entries: Vec<(usize, usize, ExpPoly)> = Vec::new();
    for (c, col) in g_cols.iter().enumerate() {
        for (r, entry) in col.iter().enumerate() {
            let want = if r == c { ExpPoly::one() } else { ExpPoly::zero() };
            let diff = &want - entry;
            if !diff.is_zero() {
                m_entries.push((r, c, diff));
            }
        }
    }
    // w = sum_k M^k rhs, terminating because the dependency graph of M is
    // acyclic for these blocks.
    let mut acc = rhs.clone();
    let mut term = rhs;
    for iteration in 0..=width {
        let mut next: Vec<Rhs> = vec![Rhs::new(); width];
        let mut any = false;
        for &(r, c, ref poly) in &m_entries {
            if rhs_is_zero(&term[c]) {
                continue;
            }
            rhs_add_assign(&mut next[r], &term[c], poly);
            any = true;
        }
        term = next;
        if !any {
            return acc;
        }
        for (slot, t) in acc.iter_mut().zip(&term) {
            for (&j, p) in t {
                let cell = slot.entry(j).or_insert_with(ExpPoly::zero);
                *cell = &*cell + p;
                if cell.is_zero() {
                    slot.remove(&j);
                }
            }
        }
        assert!(iteration < width, "block correction did not terminate");
    }
    acc
}

fn max_own_degree(rhs: &[Rhs], range: &Range<usize>) -> u32 {
    let mut max = 0;
    for r in rhs {
        for poly in r.values() {
            for (key, _) in poly.terms() {
                let own: u32 = key
                    .monomial
                    .iter()
                    .filter(|&&(v, _)| range.contains(&v))
                    .map(|&(_, p)| p)
                    .sum();
                max = max.max(own);
            }
        }
    }
    max
}

/// Per-stage degree summary.
#[derive(Clone, Debug)]
pub struct StageDegrees {
    pub block: BlockId,
    pub kind: StageKind,
    /// Max total monomial degree over all terms (all variables).
    pub max_total_degree: u32,
    /// Max total degree counting only the stage's own variables.
    pub max_own_degree: u32,
    /// Max power of any single variable.
    pub max_single_variable_degree: u32,
}

/// Degree report across the hierarchy.
pub fn degree_report(sys: &WnSystem) -> Vec<StageDegrees> {
    sys.stages
        .iter()
        .map(|stage| {
            let mut total = 0;
            let mut single = 0;
            for r in &stage.rhs {
                for poly in r.values() {
                    for (key, _) in poly.terms() {
                        total = total.max(key.total_degree());
                        for &(_, p) in &key.monomial {
                            single = single.max(p);
                        }
                    }
                }
            }
            StageDegrees {
                block: stage.block,
                kind: stage.kind,
                max_total_degree: total,
                max_own_degree: stage.max_own_degree,
                max_single_variable_degree: single,
            }
        })
        .collect()
}

/// Variable-dependence scan: for each stage, the set of `u` variables its
/// right-hand sides mention (monomials and exponentials).
pub fn dependence_report(sys: &WnSystem) -> Vec<(BlockId, Vec<usize>)> {
    sys.stages
        .iter()
        .map(|stage| {
            let mut vars: Vec<usize> = Vec::new();
            for r in &stage.rhs {
                for poly in r.values() {
                    vars.extend(poly.monomial_vars());
                    vars.extend(poly.exponential_vars());
                }
            }
            vars.sort_unstable();
            vars.dedup();
            (stage.block, vars)
        })
        .collect()
}

/// Output formats for the emitted equations.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EmitFormat {
    Plain,
    Latex,
    Machine,
}

/// Render the hierarchy. Plain and machine output use the shared expression
/// grammar (`u1`, `a3`, `exp(...)`, `^`); machine output round-trips through
/// [`parse_machine_rhs`].
pub fn emit_equations(sys: &WnSystem, format: EmitFormat) -> String {
    let mut out = String::new();
    let family = sys.basis.family;
    let rank = sys.basis.rank;
    match format {
        EmitFormat::Machine => {
            out.push_str(&format!(
                "# wn-machine v1 algebra={} rank={} dim={}\n",
                family.label(),
                rank,
                sys.dim()
            ));
        }
        EmitFormat::Plain => {
            out.push_str(&format!(
                "# Wei-Norman hierarchy for {}: {} equations in {} stages\n",
                crate::rootsys::algebra_name(family, rank),
                sys.dim(),
                sys.stages.len()
            ));
        }
        EmitFormat::Latex => {
            out.push_str(&format!(
                "%% Wei-Norman hierarchy for {}\n",
                crate::rootsys::algebra_name(family, rank)
            ));
        }
    }
    for (idx, stage) in sys.stages.iter().enumerate() {
        let kind = match stage.kind {
            StageKind::Riccati => "Riccati",
            StageKind::Quadrature => "quadrature",
        };
        let header = format!(
            "stage {} [{}] block {} (u{}..u{})",
            idx + 1,
            kind,
            stage.block,
            stage.range.start + 1,
            stage.range.end
        );
        match format {
            EmitFormat::Latex => {
                out.push_str(&format!("%% {}\n\\begin{{align*}}\n", header));
                for (offset, rhs) in stage.rhs.iter().enumerate() {
                    let l = stage.range.start + offset;
                    out.push_str(&format!(
                        "u_{{{}}}' &= {} \\\\\n",
                        l + 1,
                        render_rhs_latex(rhs)
                    ));
                }
                out.push_str("\\end{align*}\n");
            }
            _ => {
                out.push_str(&format!("# {}\n", header));
                for (offset, rhs) in stage.rhs.iter().enumerate() {
                    let l = stage.range.start + offset;
                    out.push_str(&format!("u{}' = {}\n", l + 1, render_rhs(rhs)));
                }
            }
        }
    }
    out
}

/// Flattened display term: one `(monomial/exponential key, a index)` pair.
fn rhs_display_terms(rhs: &Rhs) -> Vec<(crate::scalars::TermKey, usize, Scalar)> {
    let mut terms: Vec<(crate::scalars::TermKey, usize, Scalar)> = Vec::new();
    for (&j, poly) in rhs {
        for (key, coeff) in poly.terms() {
            terms.push((key.clone(), j, coeff.clone()));
        }
    }
    // Graded-lex descending on the monomial key, then ascending a index.
    terms.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    terms
}

fn render_rhs(rhs: &Rhs) -> String {
    let terms = rhs_display_terms(rhs);
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (key, j, coeff)) in terms.iter().enumerate() {
        let mono_poly = ExpPoly::term(coeff.clone(), &key.monomial, &key.exponent);
        // Reuse the canonical single-term rendering, splicing in `aJ`.
        let rendered = render_single_term(&mono_poly, *j);
        if i == 0 {
            out.push_str(&rendered);
        } else if let Some(stripped) = rendered.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(stripped);
        } else {
            out.push_str(" + ");
            out.push_str(&rendered);
        }
    }
    out
}

fn render_single_term(term_poly: &ExpPoly, a_index: usize) -> String {
    let (key, coeff) = term_poly.terms().next().expect("single term");
    let mut factors: Vec<String> = Vec::new();
    let coeff_str = coeff.to_string();
    let negated = coeff_str.starts_with('-');
    let mag = if negated { coeff_str[1..].to_string() } else { coeff_str.clone() };
    if mag != "1" {
        if mag.contains(' ') {
            factors.push(format!("({})", mag));
        } else {
            factors.push(mag);
        }
    }
    factors.push(format!("a{}", a_index + 1));
    for &(v, p) in &key.monomial {
        if p == 1 {
            factors.push(format!("u{}", v + 1));
        } else {
            factors.push(format!("u{}^{}", v + 1, p));
        }
    }
    if !key.exponent.is_empty() {
        factors.push(format!("exp({})", crate::scalars::format_linform(&key.exponent, "u")));
    }
    let joined = factors.join("*");
    if negated {
        format!("-{}", joined)
    } else {
        joined
    }
}

fn render_rhs_latex(rhs: &Rhs) -> String {
    let terms = rhs_display_terms(rhs);
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (key, j, coeff)) in terms.iter().enumerate() {
        let coeff_str = latex_scalar(coeff);
        let negated = coeff_str.starts_with('-');
        let mag = if negated { coeff_str[1..].to_string() } else { coeff_str };
        let mut piece = String::new();
        if mag != "1" {
            piece.push_str(&mag);
            piece.push_str("\\,");
        }
        piece.push_str(&format!("a_{{{}}}", j + 1));
        for &(v, p) in &key.monomial {
            if p == 1 {
                piece.push_str(&format!(" u_{{{}}}", v + 1));
            } else {
                piece.push_str(&format!(" u_{{{}}}^{{{}}}", v + 1, p));
            }
        }
        if !key.exponent.is_empty() {
            piece.push_str(&format!(
                " e^{{{}}}",
                latex_linform(&key.exponent)
            ));
        }
        if i == 0 {
            if negated {
                out.push('-');
            }
        } else if negated {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&piece);
    }
    out
}

fn latex_scalar(s: &Scalar) -> String {
    use num_traits::One;
    if s.is_rational() {
        let r = s.rat_part();
        if r.denom().is_one() {
            format!("{}", r.numer())
        } else {
            let neg = r.numer().sign() == num_bigint::Sign::Minus;
            let num = r.numer().magnitude();
            format!("{}\\tfrac{{{}}}{{{}}}", if neg { "-" } else { "" }, num, r.denom())
        }
    } else {
        // sqrt2 coefficients do not occur in emitted equations, but render
        // something sensible anyway.
        format!("({})", s)
    }
}

fn latex_linform(form: &[(usize, i64)]) -> String {
    let mut out = String::new();
    for (i, &(v, c)) in form.iter().enumerate() {
        let mag = c.abs();
        if i == 0 {
            if c < 0 {
                out.push('-');
            }
        } else if c < 0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if mag != 1 {
            out.push_str(&format!("{}\\,", mag));
        }
        out.push_str(&format!("u_{{{}}}", v + 1));
    }
    out
}

/// Errors converting a parsed machine expression back to an exact `Rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineFormatError(pub String);

impl fmt::Display for MachineFormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "machine format error: {}", self.0)
    }
}

impl std::error::Error for MachineFormatError {}

/// Parse one machine-format right-hand side back into an exact `Rhs`.
pub fn parse_machine_rhs(src: &str) -> Result<Rhs, MachineFormatError> {
    let raw = exprdsl::parse_raw(src).map_err(|e| MachineFormatError(e.to_string()))?;
    let val = expand_machine(&raw)?;
    if !val.scalar_part.is_zero() {
        return Err(MachineFormatError("constant term without an a factor".into()));
    }
    Ok(val.a_linear)
}

/// Parse the full machine emission: lines `uK' = expr`, `#` comments.
pub fn parse_machine(src: &str) -> Result<Vec<(usize, Rhs)>, MachineFormatError> {
    let mut out = Vec::new();
    for line in src.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| MachineFormatError(format!("no `=` in line `{}`", line)))?;
        let lhs = lhs.trim();
        let var: usize = lhs
            .strip_prefix('u')
            .and_then(|s| s.strip_suffix('\''))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MachineFormatError(format!("bad left-hand side `{}`", lhs)))?;
        out.push((var - 1, parse_machine_rhs(rhs.trim())?));
    }
    Ok(out)
}

/// Symbolic value during machine re-expansion: a pure ExpPoly part plus an
/// a-linear part. Products of two a-linear parts are rejected.
struct MachineVal {
    scalar_part: ExpPoly,
    a_linear: Rhs,
}

impl MachineVal {
    fn from_poly(p: ExpPoly) -> Self {
        MachineVal { scalar_part: p, a_linear: Rhs::new() }
    }
}

fn expand_machine(expr: &RawExpr) -> Result<MachineVal, MachineFormatError> {
    match expr {
        RawExpr::Number(v) => Ok(MachineVal::from_poly(ExpPoly::constant(f64_to_scalar(*v)?))),
        RawExpr::Ident(name) => {
            if let Some(k) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
                return Ok(MachineVal::from_poly(ExpPoly::var(k - 1)));
            }
            if let Some(k) = name.strip_prefix('a').and_then(|s| s.parse::<usize>().ok()) {
                let mut a = Rhs::new();
                a.insert(k - 1, ExpPoly::one());
                return Ok(MachineVal { scalar_part: ExpPoly::zero(), a_linear: a });
            }
            Err(MachineFormatError(format!("unknown identifier `{}`", name)))
        }
        RawExpr::Unary(e) => {
            let v = expand_machine(e)?;
            Ok(MachineVal {
                scalar_part: -&v.scalar_part,
                a_linear: v.a_linear.iter().map(|(&j, p)| (j, -p)).collect(),
            })
        }
        RawExpr::Add(a, b) | RawExpr::Sub(a, b) => {
            let sub = matches!(expr, RawExpr::Sub(..));
            let x = expand_machine(a)?;
            let mut y = expand_machine(b)?;
            if sub {
                y = MachineVal {
                    scalar_part: -&y.scalar_part,
                    a_linear: y.a_linear.iter().map(|(&j, p)| (j, -p)).collect(),
                };
            }
            let mut a_linear = x.a_linear;
            for (j, p) in y.a_linear {
                let cell = a_linear.entry(j).or_insert_with(ExpPoly::zero);
                *cell = &*cell + &p;
                if cell.is_zero() {
                    a_linear.remove(&j);
                }
            }
            Ok(MachineVal { scalar_part: &x.scalar_part + &y.scalar_part, a_linear })
        }
        RawExpr::Mul(a, b) => {
            let x = expand_machine(a)?;
            let y = expand_machine(b)?;
            if !x.a_linear.is_empty() && !y.a_linear.is_empty() {
                return Err(MachineFormatError("product of two a-linear factors".into()));
            }
            let mut a_linear = Rhs::new();
            for (&j, p) in &x.a_linear {
                let m = p * &y.scalar_part;
                if !m.is_zero() {
                    a_linear.insert(j, m);
                }
            }
            for (&j, p) in &y.a_linear {
                let m = p * &x.scalar_part;
                if !m.is_zero() {
                    a_linear.insert(j, m);
                }
            }
            Ok(MachineVal { scalar_part: &x.scalar_part * &y.scalar_part, a_linear })
        }
        RawExpr::Div(a, b) => {
            let x = expand_machine(a)?;
            let y = expand_machine(b)?;
            if !y.a_linear.is_empty() {
                return Err(MachineFormatError("division by an a-linear value".into()));
            }
            let c = y.scalar_part.constant_term();
            if !y.scalar_part.is_zero()
                && y.scalar_part.num_terms() == 1
                && !c.is_zero()
            {
                let inv = c.try_inv().map_err(|e| MachineFormatError(e.to_string()))?;
                Ok(MachineVal {
                    scalar_part: x.scalar_part.scale(&inv),
                    a_linear: x.a_linear.iter().map(|(&j, p)| (j, p.scale(&inv))).collect(),
                })
            } else {
                Err(MachineFormatError("division only by nonzero constants".into()))
            }
        }
        RawExpr::Pow(e, p) => {
            let v = expand_machine(e)?;
            if !v.a_linear.is_empty() {
                return Err(MachineFormatError("power of an a-linear value".into()));
            }
            let mut acc = ExpPoly::one();
            for _ in 0..*p {
                acc = &acc * &v.scalar_part;
            }
            Ok(MachineVal::from_poly(acc))
        }
        RawExpr::Call(Func::Exp, arg) => {
            let v = expand_machine(arg)?;
            if !v.a_linear.is_empty() {
                return Err(MachineFormatError("exp of an a-linear value".into()));
            }
            let form = poly_as_integer_linform(&v.scalar_part)
                .ok_or_else(|| MachineFormatError("exp argument must be an integer linear form".into()))?;
            Ok(MachineVal::from_poly(ExpPoly::exponential(&form)))
        }
        RawExpr::Call(f, _) => Err(MachineFormatError(format!(
            "function {:?} not allowed in machine equations",
            f
        ))),
    }
}

fn f64_to_scalar(v: f64) -> Result<Scalar, MachineFormatError> {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        Ok(Scalar::from_int(v as i64))
    } else {
        // Decimal literals never appear in emitted machine output; reject
        // them rather than approximate.
        Err(MachineFormatError(format!("non-integer literal {}", v)))
    }
}

fn poly_as_integer_linform(p: &ExpPoly) -> Option<Vec<(usize, i64)>> {
    use num_traits::{One, ToPrimitive};
    let mut form = Vec::new();
    for (key, coeff) in p.terms() {
        if !key.exponent.is_empty() || key.monomial.len() != 1 || key.monomial[0].1 != 1 {
            return None;
        }
        if !coeff.is_rational() || !coeff.rat_part().denom().is_one() {
            return None;
        }
        form.push((key.monomial[0].0, coeff.rat_part().numer().to_i64()?));
    }
    Some(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::build_matrix_basis;

    fn system(family: Family, rank: usize) -> WnSystem {
        build_system(build_matrix_basis(family, rank).unwrap())
    }

    #[test]
    fn a_matrix_is_identity_at_zero() {
        for (family, rank) in [(Family::A, 2), (Family::B, 2), (Family::G2, 2)] {
            let sys = system(family, rank);
            let n = sys.dim();
            let at_zero = sys.a_matrix.as_ref().unwrap().eval(&vec![0.0; n]);
            for (r, row) in at_zero.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert_eq!(*v, expect, "{}{} ({},{})", family, rank, r, c);
                }
            }
        }
    }

    #[test]
    fn column_l_depends_only_on_earlier_variables() {
        for (family, rank) in [(Family::B, 2), (Family::C, 3), (Family::G2, 2)] {
            let sys = system(family, rank);
            let n = sys.dim();
            for c in 0..n {
                for r in 0..n {
                    let p = sys.a_matrix.as_ref().unwrap().get(r, c);
                    for v in p.monomial_vars().into_iter().chain(p.exponential_vars()) {
                        assert!(v < c, "{}{}: A[{}][{}] depends on u{}", family, rank, r, c, v + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn first_column_is_e1() {
        let sys = system(Family::C, 3);
        for r in 0..sys.dim() {
            let want = if r == 0 { ExpPoly::one() } else { ExpPoly::zero() };
            assert_eq!(sys.a_matrix.as_ref().unwrap().get(r, 0), &want);
        }
    }

    #[test]
    fn a1_hierarchy_matches_sl2_expansion() {
        let sys = system(Family::A, 1);
        assert_eq!(sys.stages.len(), 3);
        // u1' = a1 + 2 a2 u1 - a3 u1^2
        let rhs = &sys.stages[0].rhs[0];
        assert_eq!(rhs[&0], ExpPoly::one());
        assert_eq!(rhs[&1], ExpPoly::term(Scalar::from_int(2), &[(0, 1)], &[]));
        assert_eq!(rhs[&2], ExpPoly::term(Scalar::from_int(-1), &[(0, 2)], &[]));
        // u2' = a2 - a3 u1
        let rhs = &sys.stages[1].rhs[0];
        assert_eq!(rhs[&1], ExpPoly::one());
        assert_eq!(rhs[&2], ExpPoly::term(Scalar::from_int(-1), &[(0, 1)], &[]));
        assert!(!rhs.contains_key(&0));
        // u3' = a3 exp(2 u2)
        let rhs = &sys.stages[2].rhs[0];
        assert_eq!(rhs.len(), 1);
        assert_eq!(rhs[&2], ExpPoly::exponential(&[(1, 2)]));
    }

    #[test]
    fn stage_count_and_sizes() {
        let sys = system(Family::B, 3);
        assert_eq!(sys.stages.len(), 7);
        let sizes: Vec<usize> = sys.stages.iter().map(|s| s.range.len()).collect();
        assert_eq!(sizes, vec![5, 3, 1, 3, 1, 3, 5]);
        let kinds: Vec<StageKind> = sys.stages.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                StageKind::Riccati,
                StageKind::Riccati,
                StageKind::Riccati,
                StageKind::Quadrature,
                StageKind::Quadrature,
                StageKind::Quadrature,
                StageKind::Quadrature,
            ]
        );
    }

    #[test]
    fn classical_riccati_degree_bound() {
        for (family, rank) in [(Family::A, 3), (Family::B, 3), (Family::C, 3), (Family::D, 4)] {
            let sys = system(family, rank);
            for stage in &sys.stages {
                match stage.kind {
                    StageKind::Riccati => {
                        assert!(stage.max_own_degree <= 2, "{}{} {:?}", family, rank, stage.block);
                        assert!(!stage.exceeds_riccati_degree);
                    }
                    StageKind::Quadrature => {
                        assert_eq!(stage.max_own_degree, 0, "{}{} {:?}", family, rank, stage.block);
                    }
                }
            }
        }
    }

    #[test]
    fn hierarchy_dependence_is_staged() {
        for (family, rank) in [(Family::B, 2), (Family::C, 3), (Family::A, 4), (Family::G2, 2)] {
            let sys = system(family, rank);
            for (idx, stage) in sys.stages.iter().enumerate() {
                let allowed_end = stage.range.end;
                for r in &stage.rhs {
                    for poly in r.values() {
                        for v in poly.monomial_vars().into_iter().chain(poly.exponential_vars()) {
                            assert!(
                                v < allowed_end,
                                "{}{} stage {}: depends on u{}",
                                family,
                                rank,
                                idx + 1,
                                v + 1
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_rows_invert_a_numerically() {
        let mut rng = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for (family, rank) in [(Family::B, 2), (Family::A, 2), (Family::C, 3), (Family::G2, 2)] {
            let sys = system(family, rank);
            let n = sys.dim();
            let inv = sys.inverse_rows();
            for _trial in 0..20 {
                let u: Vec<f64> = (0..n).map(|_| next()).collect();
                let a_num = sys.a_matrix.as_ref().unwrap().eval(&u);
                let inv_num = inv.eval(&u);
                for r in 0..n {
                    for c in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += a_num[r][k] * inv_num[k][c];
                        }
                        let expect = if r == c { 1.0 } else { 0.0 };
                        assert!(
                            (acc - expect).abs() < 1e-10,
                            "{}{}: (A A^-1)[{}][{}] = {}",
                            family,
                            rank,
                            r,
                            c,
                            acc
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn g2_positive_stage_reaches_degree_four() {
        let sys = system(Family::G2, 2);
        assert_eq!(sys.stages.len(), 3);
        let nplus = &sys.stages[0];
        assert_eq!(nplus.kind, StageKind::Riccati);
        assert!(nplus.exceeds_riccati_degree);
        assert_eq!(nplus.max_own_degree, 4);
        let report = degree_report(&sys);
        assert_eq!(report[0].max_total_degree, 4);
        assert_eq!(report[0].max_single_variable_degree, 3);
    }

    #[test]
    fn machine_round_trip() {
        for (family, rank) in [(Family::B, 2), (Family::A, 2), (Family::G2, 2)] {
            let sys = system(family, rank);
            let emitted = emit_equations(&sys, EmitFormat::Machine);
            let parsed = parse_machine(&emitted).unwrap();
            assert_eq!(parsed.len(), sys.dim());
            for (var, rhs) in parsed {
                let stage = sys
                    .stages
                    .iter()
                    .find(|s| s.range.contains(&var))
                    .expect("stage for variable");
                let expect = &stage.rhs[var - stage.range.start];
                assert_eq!(&rhs, expect, "{}{} u{}'", family, rank, var + 1);
            }
        }
    }

    #[test]
    fn emit_plain_b2_shape() {
        let sys = system(Family::B, 2);
        let text = emit_equations(&sys, EmitFormat::Plain);
        let eq_lines = text.lines().filter(|l| l.contains("' = ")).count();
        let stage_lines = text.lines().filter(|l| l.starts_with("# stage")).count();
        assert_eq!(eq_lines, 10);
        assert_eq!(stage_lines, 5);
    }
}
