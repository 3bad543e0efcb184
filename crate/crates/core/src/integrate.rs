//! Numerical solution of the hierarchy and an independent reference
//! integrator for `K'(t) = M(t) K(t)`.
//!
//! The Wei-Norman solve comes in two modes. Staged mode integrates the
//! hierarchy stage by stage, feeding each stage the dense interpolants of the
//! earlier ones. Monolithic mode integrates the full `u' = A(u)^{-1} a(t)`,
//! evaluating `A` numerically and solving the linear system at every
//! right-hand-side call. Both start from `u = 0`, so `K(t_0) = I`.
//!
//! The reference path integrates the matrix equation directly with the same
//! embedded adaptive method at a tighter tolerance and never touches the
//! Wei-Norman machinery; it is the oracle the product of exponentials is
//! judged against.
//!
//! The group chart can die in finite time (Riccati blow-up, or `A(u)` losing
//! conditioning) even when `K(t)` itself is perfectly regular. With
//! re-anchoring enabled the solver restarts the chart at the failure time and
//! folds the group element reached so far into an accumulated product.

use crate::exprdsl::{CoeffExpr, EvalError};
use crate::liealg::{GeneratorTag, OrderedBasis};
use crate::wn::WnSystem;
use std::fmt;

/// Coefficient functions `a_k(t)`, one per basis generator.
#[derive(Clone, Debug)]
pub struct CoeffVector {
    pub exprs: Vec<CoeffExpr>,
}

impl CoeffVector {
    pub fn zeros(n: usize) -> Self {
        CoeffVector { exprs: vec![CoeffExpr::zero(); n] }
    }

    pub fn from_exprs(exprs: Vec<CoeffExpr>) -> Self {
        CoeffVector { exprs }
    }

    /// Constant coefficients.
    pub fn constants(values: &[f64]) -> Self {
        CoeffVector { exprs: values.iter().map(|&v| CoeffExpr::constant(v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        for (slot, e) in out.iter_mut().zip(&self.exprs) {
            *slot = e.eval(t)?;
        }
        Ok(())
    }
}

/// Small dense f64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat64 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat64 {
    pub fn zeros(n: usize) -> Self {
        Mat64 { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat64::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn matmul(&self, rhs: &Mat64) -> Mat64 {
        let n = self.n;
        let mut out = Mat64::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat64 {
        let n = self.n;
        let mut out = Mat64::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat64) -> Mat64 {
        Mat64 {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let mut lu = self.data.clone();
        let n = self.n;
        let mut det = 1.0;
        for col in 0..n {
            let mut p = col;
            for r in col + 1..n {
                if lu[r * n + col].abs() > lu[p * n + col].abs() {
                    p = r;
                }
            }
            if lu[p * n + col] == 0.0 {
                return 0.0;
            }
            if p != col {
                for c in 0..n {
                    lu.swap(p * n + c, col * n + c);
                }
                det = -det;
            }
            let piv = lu[col * n + col];
            det *= piv;
            for r in col + 1..n {
                let f = lu[r * n + col] / piv;
                if f != 0.0 {
                    for c in col..n {
                        lu[r * n + c] -= f * lu[col * n + c];
                    }
                }
            }
        }
        det
    }
}

/// Errors from the numeric layer.
#[derive(Debug, Clone)]
pub enum SolveError {
    /// Integration could not continue (step-size underflow or an
    /// ill-conditioned `A(u)`); carries the time reached.
    Numerical { t_reached: f64, detail: String },
    /// A coefficient expression failed to evaluate.
    Coefficient(EvalError),
    Config(String),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Numerical { t_reached, detail } => {
                write!(f, "numerical failure at t = {}: {}", t_reached, detail)
            }
            SolveError::Coefficient(e) => write!(f, "{}", e),
            SolveError::Config(msg) => write!(f, "{}", msg),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<EvalError> for SolveError {
    fn from(e: EvalError) -> Self {
        SolveError::Coefficient(e)
    }
}

// ---------------------------------------------------------------------------
// Embedded adaptive Runge-Kutta (Dormand-Prince 5(4)) with dense output.
// ---------------------------------------------------------------------------

/// Accepted-step knots `(t, y, y')` interpolated with cubic Hermite.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty solution")
    }

    pub fn final_value(&self) -> &[f64] {
        self.values.last().expect("nonempty solution")
    }

    /// Cubic Hermite evaluation; clamps outside the covered span.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let m = self.times.len();
        if t <= self.times[0] {
            out.copy_from_slice(&self.values[0]);
            return;
        }
        if t >= self.times[m - 1] {
            out.copy_from_slice(&self.values[m - 1]);
            return;
        }
        let mut hi = self.times.partition_point(|&x| x <= t);
        if hi >= m {
            hi = m - 1;
        }
        let lo = hi - 1;
        let h = self.times[hi] - self.times[lo];
        let s = (t - self.times[lo]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for i in 0..out.len() {
            out[i] = h00 * self.values[lo][i]
                + h10 * h * self.derivs[lo][i]
                + h01 * self.values[hi][i]
                + h11 * h * self.derivs[hi][i];
        }
    }
}

struct DormandPrince;

impl DormandPrince {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // 5th-order weights (row 6 of A, FSAL) and embedded 4th-order weights.
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
}

/// Integrate `y' = f(t, y)` over `[t0, t1]` (forward), storing every
/// accepted step for dense output.
pub fn integrate_adaptive<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
    max_step: Option<f64>,
) -> Result<DenseSolution, SolveError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolveError>,
{
    let n = y0.len();
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(SolveError::Config("t1 must exceed t0".into()));
    }
    let h_max = max_step.unwrap_or(span).min(span);
    let mut h = (span / 100.0).min(h_max);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut dy = vec![0.0; n];
    f(t, &y, &mut dy)?;

    let mut out = DenseSolution {
        times: vec![t],
        values: vec![y.clone()],
        derivs: vec![dy.clone()],
        steps_accepted: 0,
        steps_rejected: 0,
    };

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0].copy_from_slice(&dy);
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut last_f_error: Option<String> = None;

    // Residual gaps at roundoff scale count as arrival; a step that small is
    // neither integrable nor needed.
    let tiny = t1.abs().max(1.0) * 5e-15;
    while t1 - t > tiny {
        if t + h > t1 {
            h = t1 - t;
        }
        if !(h > tiny) {
            let mut detail = "step size underflow".to_string();
            if let Some(err) = last_f_error {
                detail.push_str(&format!(" ({})", err));
            }
            return Err(SolveError::Numerical { t_reached: t, detail });
        }
        // Stages 2..7 (k[0] is FSAL from the previous step).
        let mut failed = false;
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    let a = DormandPrince::A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let ts = t + DormandPrince::C[s] * h;
            let (head, tail) = k.split_at_mut(s + 1);
            let _ = head;
            if let Err(e) = f(ts, &y_stage, &mut tail[0]) {
                last_f_error = Some(e.to_string());
                failed = true;
                break;
            }
            if tail[0].iter().any(|v| !v.is_finite()) {
                failed = true;
                break;
            }
        }
        let mut err_norm = f64::INFINITY;
        if !failed {
            for i in 0..n {
                let mut acc5 = 0.0;
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc5 += DormandPrince::B5[j] * kj[i];
                    acc4 += DormandPrince::B4[j] * kj[i];
                }
                y_new[i] = y[i] + h * acc5;
                let err = h * (acc5 - acc4);
                let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
                let e = err / scale;
                if i == 0 {
                    err_norm = 0.0;
                }
                err_norm += e * e;
            }
            err_norm = (err_norm / n as f64).sqrt();
            if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                failed = true;
            }
        }

        if !failed && err_norm <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, 6); // FSAL: k7 = f(t+h, y_new)
            out.times.push(t);
            out.values.push(y.clone());
            out.derivs.push(k[0].clone());
            out.steps_accepted += 1;
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(h_max);
        } else {
            out.steps_rejected += 1;
            let factor = if err_norm.is_finite() && err_norm > 0.0 {
                (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            h *= factor;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Numeric views of the representation and the adjoint operators.
// ---------------------------------------------------------------------------

enum GenKind {
    /// Nilpotent: terminating exponential series up to the stored order.
    Nilpotent(usize),
    /// Diagonal (Cartan): exponential of the diagonal.
    Diagonal,
}

struct NumericGen {
    entries: Vec<(usize, usize, f64)>,
    kind: GenKind,
}

fn numeric_gen(entries: Vec<(usize, usize, f64)>, dim: usize) -> NumericGen {
    let diagonal = entries.iter().all(|&(r, c, _)| r == c);
    if diagonal {
        return NumericGen { entries, kind: GenKind::Diagonal };
    }
    // Nilpotency order via sparse powers.
    let mut dense = vec![0.0; dim * dim];
    for &(r, c, v) in &entries {
        dense[r * dim + c] = v;
    }
    let mut p = dense.clone();
    let mut order = dim + 1;
    for m in 1..=dim {
        if p.iter().all(|&v| v == 0.0) {
            order = m;
            break;
        }
        let mut next = vec![0.0; dim * dim];
        for r in 0..dim {
            for k in 0..dim {
                let a = p[r * dim + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    next[r * dim + c] += a * dense[k * dim + c];
                }
            }
        }
        p = next;
    }
    assert!(order <= dim, "generator neither diagonal nor nilpotent");
    NumericGen { entries, kind: GenKind::Nilpotent(order) }
}

/// Apply `exp(c * G)` to vector `v` for one numeric generator.
fn apply_exp_gen(gen: &NumericGen, c: f64, v: &mut [f64], scratch: &mut [f64]) {
    match gen.kind {
        GenKind::Diagonal => {
            for &(r, _, d) in &gen.entries {
                v[r] *= (c * d).exp();
            }
        }
        GenKind::Nilpotent(order) => {
            // v += sum_{m=1}^{order-1} (c G)^m v / m!
            scratch.copy_from_slice(v);
            let n = v.len();
            let mut term = scratch.to_vec();
            let mut next = vec![0.0; n];
            let mut factorial = 1.0;
            for m in 1..order {
                next.iter_mut().for_each(|x| *x = 0.0);
                for &(r, cc, g) in &gen.entries {
                    if term[cc] != 0.0 {
                        next[r] += c * g * term[cc];
                    }
                }
                std::mem::swap(&mut term, &mut next);
                factorial *= m as f64;
                let inv = 1.0 / factorial;
                for i in 0..n {
                    v[i] += term[i] * inv;
                }
            }
        }
    }
}

/// Precomputed numeric context for one system: f64 adjoints and
/// representation generators.
pub struct NumericContext {
    pub n: usize,
    pub rep_dim: usize,
    ads: Vec<NumericGen>,
    reps: Vec<NumericGen>,
}

impl NumericContext {
    pub fn new(sys: &WnSystem) -> Self {
        NumericContext::from_parts(&sys.basis, sys.adjoints.iter().map(|op| &op.matrix))
    }

    fn from_parts<'a>(
        basis: &OrderedBasis,
        adjoints: impl Iterator<Item = &'a crate::liealg::ScalarMat>,
    ) -> Self {
        let n = basis.dim();
        let d = basis.rep_dim;
        let ads = adjoints
            .map(|m| {
                let entries: Vec<(usize, usize, f64)> =
                    m.nonzero_entries().map(|(r, c, v)| (r, c, v.to_f64())).collect();
                numeric_gen(entries, n)
            })
            .collect();
        let reps = basis
            .generators
            .iter()
            .map(|g| {
                let entries: Vec<(usize, usize, f64)> = g
                    .matrix
                    .nonzero_entries()
                    .map(|(r, c, v)| (r, c, v.to_f64()))
                    .collect();
                let is_cartan = matches!(g.tag, GeneratorTag::Cartan(_));
                if is_cartan {
                    NumericGen { entries, kind: GenKind::Diagonal }
                } else {
                    numeric_gen(entries, d)
                }
            })
            .collect();
        NumericContext { n, rep_dim: d, ads, reps }
    }

    /// Build `A(u)` numerically: column `l` of `prod_{k<l} exp(u_k ad X_k)`.
    pub fn numeric_a(&self, u: &[f64]) -> Mat64 {
        let n = self.n;
        let mut a = Mat64::zeros(n);
        let mut v = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for l in 0..n {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[l] = 1.0;
            for k in (0..l).rev() {
                if u[k] != 0.0 {
                    apply_exp_gen(&self.ads[k], u[k], &mut v, &mut scratch);
                }
            }
            for r in 0..n {
                a.data[r * n + l] = v[r];
            }
        }
        a
    }

    /// `prod_k exp(u_k X_k)` in the defining representation, factors in
    /// basis order. Applied column by column to the identity.
    pub fn reconstruct_k(&self, u: &[f64]) -> Mat64 {
        let d = self.rep_dim;
        let mut k = Mat64::identity(d);
        let mut col = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        // K = exp(u_1 X_1) … exp(u_n X_n): apply to each basis column of the
        // identity from the innermost factor outward.
        for c in 0..d {
            for (i, x) in col.iter_mut().enumerate() {
                *x = if i == c { 1.0 } else { 0.0 };
            }
            for gi in (0..self.n).rev() {
                if u[gi] != 0.0 {
                    apply_exp_gen(&self.reps[gi], u[gi], &mut col, &mut scratch);
                }
            }
            for r in 0..d {
                k.data[r * d + c] = col[r];
            }
        }
        k
    }

    /// `M(t) = sum a_k X_k` in the representation.
    pub fn m_of(&self, a: &[f64]) -> Mat64 {
        let d = self.rep_dim;
        let mut m = Mat64::zeros(d);
        for (gen, &coeff) in self.reps.iter().zip(a) {
            if coeff != 0.0 {
                for &(r, c, v) in &gen.entries {
                    m.data[r * d + c] += coeff * v;
                }
            }
        }
        m
    }
}

/// Convenience wrapper for contexts built straight from a basis.
pub fn numeric_context_for_basis(basis: &OrderedBasis) -> NumericContext {
    let ads = crate::adjoint::all_adjoints(basis);
    NumericContext::from_parts(basis, ads.iter().map(|op| &op.matrix))
}

// ---------------------------------------------------------------------------
// LU solve + one-norm condition estimate.
// ---------------------------------------------------------------------------

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

fn lu_factor(a: &Mat64) -> Option<Lu> {
    let n = a.n;
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut p = col;
        for r in col + 1..n {
            if lu[r * n + col].abs() > lu[p * n + col].abs() {
                p = r;
            }
        }
        if lu[p * n + col] == 0.0 {
            return None;
        }
        if p != col {
            for c in 0..n {
                lu.swap(p * n + c, col * n + c);
            }
            perm.swap(p, col);
        }
        let piv = lu[col * n + col];
        for r in col + 1..n {
            let f = lu[r * n + col] / piv;
            lu[r * n + col] = f;
            if f != 0.0 {
                for c in col + 1..n {
                    lu[r * n + c] -= f * lu[col * n + c];
                }
            }
        }
    }
    Some(Lu { n, lu, perm })
}

impl Lu {
    fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
    }

    /// Solve `A^T x = b` (for the condition estimator).
    fn solve_transpose_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y = b.to_vec();
        // U^T y' = b (forward), then L^T z = y' (backward), then un-permute.
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[j * n + i] * y[j];
            }
            y[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[j * n + i] * y[j];
            }
        }
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
    }
}

fn norm1(a: &Mat64) -> f64 {
    let n = a.n;
    (0..n)
        .map(|c| (0..n).map(|r| a.data[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager-style estimate of `cond_1(A) = |A|_1 |A^{-1}|_1`.
fn condition_estimate(a: &Mat64, lu: &Lu) -> f64 {
    let n = a.n;
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut est: f64 = 0.0;
    for _ in 0..5 {
        lu.solve_into(&x, &mut y);
        let norm_y: f64 = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        lu.solve_transpose_into(&xi, &mut z);
        let (mut best, mut best_j) = (0.0, 0);
        for (j, v) in z.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                best_j = j;
            }
        }
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        est = est.max(norm_y);
        if best <= zx.abs() {
            break;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        x[best_j] = 1.0;
    }
    norm1(a) * est
}

// ---------------------------------------------------------------------------
// Wei-Norman solve.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveMode {
    Staged,
    Monolithic,
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveMode::Staged => write!(f, "staged"),
            SolveMode::Monolithic => write!(f, "monolithic"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub mode: SolveMode,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    /// Restart the chart at a failure time, folding the reached group
    /// element into an accumulated product.
    pub reanchor: bool,
    /// Condition-estimate threshold treated as "A(u) numerically singular"
    /// in monolithic mode.
    pub cond_threshold: f64,
    /// With re-anchoring enabled, restart proactively once any |u_k|
    /// exceeds this bound instead of riding the chart to its breakdown,
    /// where the exponential factors cancel catastrophically.
    pub chart_guard: Option<f64>,
    /// Store reconstructed `K(t)` along the trajectory.
    pub store_k: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: SolveMode::Staged,
            rtol: 1e-9,
            atol: 1e-9,
            max_step: None,
            reanchor: false,
            cond_threshold: 1e12,
            chart_guard: None,
            store_k: true,
        }
    }
}

/// Solution samples plus diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `u(t)` per time point; with re-anchoring these are chart-local
    /// (reset to zero at each anchor).
    pub u: Vec<Vec<f64>>,
    /// Reconstructed `K(t)` (anchor products folded in).
    pub k: Option<Vec<Mat64>>,
    pub anchors: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub mode: Option<SolveMode>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub reanchor_events: Vec<f64>,
    pub condition_peak: Option<f64>,
    pub failure: Option<String>,
}

pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub report: SolveReport,
}

/// Solve the hierarchy for `u(t)` on `tspan`, starting from `u = 0`.
pub fn solve_wn(
    sys: &WnSystem,
    coeffs: &CoeffVector,
    tspan: (f64, f64),
    options: &SolveOptions,
) -> Result<SolveOutcome, SolveError> {
    let n = sys.dim();
    if coeffs.len() != n {
        return Err(SolveError::Config(format!(
            "coefficient vector has length {}, algebra dimension is {}",
            coeffs.len(),
            n
        )));
    }
    let (t0, t1) = tspan;
    if !(t1 > t0) {
        return Err(SolveError::Config("t1 must exceed t0".into()));
    }
    let ctx = NumericContext::new(sys);
    let mut report = SolveReport { mode: Some(options.mode), ..SolveReport::default() };
    // Cubic Hermite interpolation between accepted steps feeds later stages
    // and the output grid; keep steps short enough that its error stays far
    // below the integration tolerance.
    let options = &SolveOptions {
        max_step: Some(options.max_step.unwrap_or((t1 - t0) / 100.0)),
        ..options.clone()
    };

    let mut segments: Vec<(f64, SegmentSolution)> = Vec::new();
    let mut t_start = t0;
    let max_anchors = 64;
    loop {
        let attempt = solve_segment(sys, &ctx, coeffs, (t_start, t1), options, &mut report);
        match attempt {
            Ok(seg) => {
                segments.push((t_start, seg));
                break;
            }
            Err((t_reached, detail)) => {
                if !options.reanchor {
                    report.failure = Some(detail.clone());
                    return Err(SolveError::Numerical { t_reached, detail });
                }
                if report.reanchor_events.len() >= max_anchors {
                    report.failure = Some(format!("too many re-anchor events: {}", detail));
                    return Err(SolveError::Numerical { t_reached, detail });
                }
                // The chart dies at t_reached; anchor strictly before it so
                // the partial segment is integrable.
                let mut anchored = None;
                for frac in [0.95, 0.8, 0.5, 0.25] {
                    let t_anchor = t_start + frac * (t_reached - t_start);
                    if !(t_anchor > t_start + (t1 - t0) * 1e-12) {
                        break;
                    }
                    if let Ok(seg) =
                        solve_segment(sys, &ctx, coeffs, (t_start, t_anchor), options, &mut report)
                    {
                        anchored = Some((t_anchor, seg));
                        break;
                    }
                }
                match anchored {
                    Some((t_anchor, seg)) => {
                        report.reanchor_events.push(t_anchor);
                        segments.push((t_start, seg));
                        t_start = t_anchor;
                    }
                    None => {
                        report.failure = Some(format!("re-anchoring stalled: {}", detail));
                        return Err(SolveError::Numerical { t_reached, detail });
                    }
                }
            }
        }
    }

    // Assemble the output trajectory, folding anchor products.
    let mut times = Vec::new();
    let mut u_out = Vec::new();
    let mut k_out = if options.store_k { Some(Vec::new()) } else { None };
    let mut acc = Mat64::identity(ctx.rep_dim);
    for (si, (seg_t0, seg)) in segments.iter().enumerate() {
        let grid = seg.grid();
        let mut u = vec![0.0; n];
        for (gi, &t) in grid.iter().enumerate() {
            if si > 0 && gi == 0 {
                continue; // anchor point already emitted by previous segment
            }
            seg.eval_into(t, &mut u);
            times.push(t);
            u_out.push(u.clone());
            if let Some(ks) = k_out.as_mut() {
                let k_seg = ctx.reconstruct_k(&u);
                ks.push(k_seg.matmul(&acc));
            }
        }
        // Fold this segment's endpoint into the accumulated product.
        let t_end = seg.t_end();
        seg.eval_into(t_end, &mut u);
        let k_end = ctx.reconstruct_k(&u);
        acc = k_end.matmul(&acc);
        let _ = seg_t0;
    }
    let trajectory =
        Trajectory { times, u: u_out, k: k_out, anchors: report.reanchor_events.clone() };
    Ok(SolveOutcome { trajectory, report })
}

/// One chart segment: staged solutions per stage, or a single monolithic one.
enum SegmentSolution {
    Staged(Vec<(std::ops::Range<usize>, DenseSolution)>),
    Monolithic(DenseSolution),
}

impl SegmentSolution {
    fn t_end(&self) -> f64 {
        match self {
            SegmentSolution::Staged(stages) => stages
                .iter()
                .map(|(_, d)| d.t_end())
                .fold(f64::INFINITY, f64::min),
            SegmentSolution::Monolithic(d) => d.t_end(),
        }
    }

    fn grid(&self) -> Vec<f64> {
        match self {
            SegmentSolution::Monolithic(d) => d.times.clone(),
            SegmentSolution::Staged(stages) => {
                let t_end = self.t_end();
                let mut grid: Vec<f64> = stages
                    .iter()
                    .flat_map(|(_, d)| d.times.iter().copied())
                    .filter(|&t| t <= t_end)
                    .collect();
                grid.push(t_end);
                grid.sort_by(f64::total_cmp);
                // Different stages accept nearly identical times; collapse
                // anything closer than roundoff scale.
                let tol = 1e-12 * (1.0 + t_end.abs());
                grid.dedup_by(|a, b| (*a - *b).abs() < tol);
                grid
            }
        }
    }

    fn eval_into(&self, t: f64, u: &mut [f64]) {
        match self {
            SegmentSolution::Monolithic(d) => d.eval_into(t, u),
            SegmentSolution::Staged(stages) => {
                for (range, d) in stages {
                    d.eval_into(t, &mut u[range.clone()]);
                }
            }
        }
    }
}

type SegmentError = (f64, String);

fn solve_segment(
    sys: &WnSystem,
    ctx: &NumericContext,
    coeffs: &CoeffVector,
    (t0, t1): (f64, f64),
    options: &SolveOptions,
    report: &mut SolveReport,
) -> Result<SegmentSolution, SegmentError> {
    let n = sys.dim();
    match options.mode {
        SolveMode::Staged => {
            let mut solved: Vec<(std::ops::Range<usize>, DenseSolution)> = Vec::new();
            for stage in &sys.stages {
                let width = stage.range.len();
                let earlier = solved.clone();
                let range = stage.range.clone();
                let mut u_full = vec![0.0; n];
                let mut a_buf = vec![0.0; n];
                let guard = if options.reanchor { options.chart_guard } else { None };
                let f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SolveError> {
                    if let Some(g) = guard {
                        if y.iter().any(|v| v.abs() > g) {
                            return Err(SolveError::Numerical {
                                t_reached: t,
                                detail: format!("chart guard |u| > {} tripped", g),
                            });
                        }
                    }
                    coeffs.eval_into(t, &mut a_buf)?;
                    u_full.iter_mut().for_each(|v| *v = 0.0);
                    for (r, d) in &earlier {
                        d.eval_into(t, &mut u_full[r.clone()]);
                    }
                    u_full[range.clone()].copy_from_slice(y);
                    stage.eval_rhs(&u_full, &a_buf, dy);
                    Ok(())
                };
                match integrate_adaptive(
                    f,
                    t0,
                    t1,
                    &vec![0.0; width],
                    options.rtol,
                    options.atol,
                    options.max_step,
                ) {
                    Ok(dense) => {
                        report.steps_accepted += dense.steps_accepted;
                        report.steps_rejected += dense.steps_rejected;
                        solved.push((stage.range.clone(), dense));
                    }
                    Err(SolveError::Numerical { t_reached, detail }) => {
                        return Err((t_reached, detail));
                    }
                    Err(other) => return Err((t0, other.to_string())),
                }
            }
            Ok(SegmentSolution::Staged(solved))
        }
        SolveMode::Monolithic => {
            let mut a_buf = vec![0.0; n];
            let mut cond_peak: f64 = report.condition_peak.unwrap_or(0.0);
            let guard = if options.reanchor { options.chart_guard } else { None };
            let f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SolveError> {
                if let Some(g) = guard {
                    if y.iter().any(|v| v.abs() > g) {
                        return Err(SolveError::Numerical {
                            t_reached: t,
                            detail: format!("chart guard |u| > {} tripped", g),
                        });
                    }
                }
                coeffs.eval_into(t, &mut a_buf)?;
                let a_mat = ctx.numeric_a(y);
                let Some(lu) = lu_factor(&a_mat) else {
                    let detail = format!("A(u) exactly singular at t = {}", t);
                    return Err(SolveError::Numerical { t_reached: t, detail });
                };
                let cond = condition_estimate(&a_mat, &lu);
                cond_peak = cond_peak.max(cond);
                if cond > options.cond_threshold {
                    let detail =
                        format!("condition estimate {:.3e} exceeds threshold at t = {}", cond, t);
                    return Err(SolveError::Numerical { t_reached: t, detail });
                }
                lu.solve_into(&a_buf, dy);
                Ok(())
            };
            let result = integrate_adaptive(
                f,
                t0,
                t1,
                &vec![0.0; n],
                options.rtol,
                options.atol,
                options.max_step,
            );
            report.condition_peak = Some(cond_peak);
            match result {
                Ok(dense) => {
                    report.steps_accepted += dense.steps_accepted;
                    report.steps_rejected += dense.steps_rejected;
                    Ok(SegmentSolution::Monolithic(dense))
                }
                Err(SolveError::Numerical { t_reached, detail }) => Err((t_reached, detail)),
                Err(other) => Err((t0, other.to_string())),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reference oracle.
// ---------------------------------------------------------------------------

/// Direct integration of `K' = M(t) K`, `K(t0) = I`, at tolerance `tol`.
/// Never touches the Wei-Norman machinery.
pub fn reference_solution(
    basis: &OrderedBasis,
    coeffs: &CoeffVector,
    tspan: (f64, f64),
    tol: f64,
) -> Result<DenseSolution, SolveError> {
    let ctx = numeric_context_for_basis(basis);
    reference_solution_ctx(&ctx, coeffs, tspan, tol)
}

pub fn reference_solution_ctx(
    ctx: &NumericContext,
    coeffs: &CoeffVector,
    tspan: (f64, f64),
    tol: f64,
) -> Result<DenseSolution, SolveError> {
    let d = ctx.rep_dim;
    let n = ctx.n;
    if coeffs.len() != n {
        return Err(SolveError::Config("coefficient vector length mismatch".into()));
    }
    let mut a_buf = vec![0.0; n];
    let mut y0 = vec![0.0; d * d];
    for i in 0..d {
        y0[i * d + i] = 1.0;
    }
    let f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SolveError> {
        coeffs.eval_into(t, &mut a_buf)?;
        let m = ctx.m_of(&a_buf);
        // dy = M * Y (Y row-major d x d)
        for r in 0..d {
            for c in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    let mv = m.data[r * d + k];
                    if mv != 0.0 {
                        acc += mv * y[k * d + c];
                    }
                }
                dy[r * d + c] = acc;
            }
        }
        Ok(())
    };
    integrate_adaptive(f, tspan.0, tspan.1, &y0, tol, tol, None)
}

/// Reference `K(t)` evaluated exactly at the given grid points: the
/// integrator is stepped from point to point, so no interpolation error
/// enters the comparison.
pub fn reference_on_grid(
    basis: &OrderedBasis,
    coeffs: &CoeffVector,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<Mat64>, SolveError> {
    let ctx = numeric_context_for_basis(basis);
    reference_on_grid_ctx(&ctx, coeffs, grid, tol)
}

pub fn reference_on_grid_ctx(
    ctx: &NumericContext,
    coeffs: &CoeffVector,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<Mat64>, SolveError> {
    let d = ctx.rep_dim;
    let n = ctx.n;
    if coeffs.len() != n {
        return Err(SolveError::Config("coefficient vector length mismatch".into()));
    }
    let mut a_buf = vec![0.0; n];
    let mut out = Vec::with_capacity(grid.len());
    let mut y = vec![0.0; d * d];
    for i in 0..d {
        y[i * d + i] = 1.0;
    }
    out.push(Mat64 { n: d, data: y.clone() });
    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        // Intervals at roundoff scale carry no dynamics worth stepping.
        if tb > ta + 1e-13 * (1.0 + tb.abs()) {
            let f = |t: f64, yy: &[f64], dy: &mut [f64]| -> Result<(), SolveError> {
                coeffs.eval_into(t, &mut a_buf)?;
                let m = ctx.m_of(&a_buf);
                for r in 0..d {
                    for c in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            let mv = m.data[r * d + k];
                            if mv != 0.0 {
                                acc += mv * yy[k * d + c];
                            }
                        }
                        dy[r * d + c] = acc;
                    }
                }
                Ok(())
            };
            let dense = integrate_adaptive(f, ta, tb, &y, tol, tol, None)?;
            y.copy_from_slice(dense.final_value());
        }
        out.push(Mat64 { n: d, data: y.clone() });
    }
    Ok(out)
}

/// Comparison of a Wei-Norman trajectory against the reference oracle.
#[derive(Clone, Debug)]
pub struct CompareReport {
    /// Max over the grid of `|K_wn - K_ref|_F / |K_ref|_F`.
    pub max_rel_error: f64,
    /// Max `|K^T S K - S|_F` (families with an invariant form).
    pub max_form_residual: Option<f64>,
    /// Max `|det K - 1|`.
    pub max_det_drift: f64,
    pub points: usize,
}

/// Compare a trajectory with reference values aligned to its grid
/// (see [`reference_on_grid`]).
pub fn compare_with_reference(
    basis: &OrderedBasis,
    traj: &Trajectory,
    k_ref: &[Mat64],
) -> CompareReport {
    let d = basis.rep_dim;
    let ks = traj.k.as_ref().expect("trajectory stored K matrices");
    assert_eq!(ks.len(), k_ref.len(), "grids must match");
    let form = basis.form_matrix().map(|s| Mat64 { n: d, data: s.to_f64() });
    let mut max_rel = 0.0f64;
    let mut max_form = 0.0f64;
    let mut max_det = 0.0f64;
    for (k_wn, k_r) in ks.iter().zip(k_ref) {
        let rel = k_wn.sub(k_r).frobenius() / k_r.frobenius();
        max_rel = max_rel.max(rel);
        if let Some(s) = &form {
            let resid = k_wn.transpose().matmul(s).matmul(k_wn).sub(s).frobenius();
            max_form = max_form.max(resid);
        }
        max_det = max_det.max((k_wn.det() - 1.0).abs());
    }
    CompareReport {
        max_rel_error: max_rel,
        max_form_residual: form.map(|_| max_form),
        max_det_drift: max_det,
        points: traj.times.len(),
    }
}

/// Dense matrix exponential by scaling and squaring with a diagonal Padé
/// approximant. Test-grade: used for cross-checks against the integrators.
pub fn expm(a: &Mat64) -> Mat64 {
    let n = a.n;
    let norm = norm1(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b = Mat64 { n, data: a.data.iter().map(|v| v * scale).collect() };
    // Padé [6/6]: c_{k+1} = c_k (p-k) / ((2p-k)(k+1)) with p = 6.
    let mut c = vec![1.0f64; 7];
    for k in 0..6 {
        c[k + 1] = c[k] * (6.0 - k as f64) / ((12.0 - k as f64) * (k as f64 + 1.0));
    }
    let mut num = Mat64::identity(n);
    let mut den = Mat64::identity(n);
    let mut pow = Mat64::identity(n);
    for (k, &ck) in c.iter().enumerate().skip(1) {
        pow = pow.matmul(&b);
        for i in 0..n * n {
            num.data[i] += ck * pow.data[i];
            den.data[i] += if k % 2 == 0 { ck * pow.data[i] } else { -ck * pow.data[i] };
        }
    }
    let lu = lu_factor(&den).expect("Padé denominator invertible");
    let mut x = Mat64::zeros(n);
    let mut col = vec![0.0; n];
    let mut sol = vec![0.0; n];
    for cidx in 0..n {
        for r in 0..n {
            col[r] = num.data[r * n + cidx];
        }
        lu.solve_into(&col, &mut sol);
        for r in 0..n {
            x.data[r * n + cidx] = sol[r];
        }
    }
    for _ in 0..s {
        x = x.matmul(&x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::build_matrix_basis;
    use crate::rootsys::Family;
    use crate::wn::build_system;

    fn sys(family: Family, rank: usize) -> WnSystem {
        build_system(build_matrix_basis(family, rank).unwrap())
    }

    #[test]
    fn zero_coefficients_give_identity() {
        let sys = sys(Family::B, 2);
        let coeffs = CoeffVector::zeros(sys.dim());
        let out = solve_wn(&sys, &coeffs, (0.0, 1.0), &SolveOptions::default()).unwrap();
        for u in &out.trajectory.u {
            assert!(u.iter().all(|&v| v == 0.0));
        }
        for k in out.trajectory.k.as_ref().unwrap() {
            assert_eq!(k, &Mat64::identity(5));
        }
    }

    #[test]
    fn single_first_coefficient_moves_u1_linearly() {
        let sys = sys(Family::C, 3);
        let n = sys.dim();
        let mut vals = vec![0.0; n];
        vals[0] = 1.0;
        let coeffs = CoeffVector::constants(&vals);
        let out = solve_wn(&sys, &coeffs, (0.0, 1.0), &SolveOptions::default()).unwrap();
        for (t, u) in out.trajectory.times.iter().zip(&out.trajectory.u) {
            assert!((u[0] - t).abs() < 1e-9, "u1({}) = {}", t, u[0]);
            assert!(u[1..].iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn reference_matches_expm_for_constant_m() {
        let basis = build_matrix_basis(Family::B, 2).unwrap();
        let ctx = numeric_context_for_basis(&basis);
        let n = basis.dim();
        let mut vals = vec![0.0; n];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = 0.3 * ((i * 7 % 5) as f64 - 2.0) / 2.0;
        }
        let coeffs = CoeffVector::constants(&vals);
        let dense = reference_solution(&basis, &coeffs, (0.0, 1.0), 1e-12).unwrap();
        let m = ctx.m_of(&vals);
        let k_exp = expm(&m);
        let k_ode = Mat64 { n: basis.rep_dim, data: dense.final_value().to_vec() };
        let err = k_exp.sub(&k_ode).frobenius() / k_exp.frobenius();
        assert!(err < 1e-10, "expm vs ODE: {}", err);
    }

    #[test]
    fn staged_solve_matches_reference_b2() {
        let sys = sys(Family::B, 2);
        let n = sys.dim();
        let exprs: Vec<CoeffExpr> = (0..n)
            .map(|i| {
                crate::exprdsl::parse_expr(&format!(
                    "0.3*sin({}*t) + {}",
                    1 + (i % 3),
                    0.1 * ((i % 5) as f64 - 2.0)
                ))
                .unwrap()
            })
            .collect();
        let coeffs = CoeffVector::from_exprs(exprs);
        let out = solve_wn(&sys, &coeffs, (0.0, 1.0), &SolveOptions::default()).unwrap();
        let k_ref =
            reference_on_grid(&sys.basis, &coeffs, &out.trajectory.times, 1e-11).unwrap();
        let report = compare_with_reference(&sys.basis, &out.trajectory, &k_ref);
        assert!(report.max_rel_error < 1e-6, "rel err {}", report.max_rel_error);
        assert!(report.max_form_residual.unwrap() < 1e-8);
        assert!(report.max_det_drift < 1e-8);
    }

    #[test]
    fn monolithic_agrees_with_staged() {
        let sys = sys(Family::B, 2);
        let n = sys.dim();
        let vals: Vec<f64> = (0..n).map(|i| 0.2 * (((i * 3) % 7) as f64 - 3.0) / 3.0).collect();
        let coeffs = CoeffVector::constants(&vals);
        let staged = solve_wn(&sys, &coeffs, (0.0, 1.0), &SolveOptions::default()).unwrap();
        let mono = solve_wn(
            &sys,
            &coeffs,
            (0.0, 1.0),
            &SolveOptions { mode: SolveMode::Monolithic, ..SolveOptions::default() },
        )
        .unwrap();
        // Compare final K.
        let k_s = staged.trajectory.k.as_ref().unwrap().last().unwrap().clone();
        let k_m = mono.trajectory.k.as_ref().unwrap().last().unwrap().clone();
        let err = k_s.sub(&k_m).frobenius() / k_s.frobenius();
        assert!(err < 1e-6, "staged vs monolithic: {}", err);
    }

    #[test]
    fn rotation_chart_breaks_and_reanchoring_recovers() {
        // sl2 with M = [[0, 1], [-1, 0]]: u1' = 1 + u1^2 blows up at pi/2,
        // while K(t) is a plain rotation. Without re-anchoring the solve
        // fails near pi/2; with it, the full span works and matches the
        // reference.
        let sys = sys(Family::A, 1);
        let coeffs = CoeffVector::constants(&[1.0, 0.0, -1.0]);
        let span = (0.0, 3.0);
        let plain = solve_wn(&sys, &coeffs, span, &SolveOptions::default());
        match plain {
            Err(SolveError::Numerical { t_reached, .. }) => {
                assert!((t_reached - std::f64::consts::FRAC_PI_2).abs() < 0.2, "t* = {}", t_reached);
            }
            other => panic!("expected chart failure, got {:?}", other.is_ok()),
        }
        let opts = SolveOptions {
            reanchor: true,
            chart_guard: Some(1.5),
            ..SolveOptions::default()
        };
        let out = solve_wn(&sys, &coeffs, span, &opts).unwrap();
        assert!(!out.report.reanchor_events.is_empty());
        let k_ref =
            reference_on_grid(&sys.basis, &coeffs, &out.trajectory.times, 1e-11).unwrap();
        let report = compare_with_reference(&sys.basis, &out.trajectory, &k_ref);
        assert!(report.max_rel_error < 1e-6, "rel err {}", report.max_rel_error);
    }

    #[test]
    fn tolerance_halving_reduces_error() {
        let sys = sys(Family::A, 2);
        let n = sys.dim();
        let vals: Vec<f64> = (0..n).map(|i| 0.4 * ((i % 3) as f64 - 1.0)).collect();
        let coeffs = CoeffVector::constants(&vals);
        let mut last = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8] {
            let opts = SolveOptions { rtol: tol, atol: tol, ..SolveOptions::default() };
            let out = solve_wn(&sys, &coeffs, (0.0, 1.0), &opts).unwrap();
            let k_ref =
                reference_on_grid(&sys.basis, &coeffs, &out.trajectory.times, 1e-12).unwrap();
            let rep = compare_with_reference(&sys.basis, &out.trajectory, &k_ref);
            assert!(
                rep.max_rel_error <= last * 1.5,
                "tol {}: {} after {}",
                tol,
                rep.max_rel_error,
                last
            );
            last = rep.max_rel_error;
        }
        assert!(last < 1e-7);
    }

    #[test]
    fn reconstruct_preserves_the_form() {
        let basis = build_matrix_basis(Family::B, 3).unwrap();
        let ctx = numeric_context_for_basis(&basis);
        let n = basis.dim();
        let u: Vec<f64> = (0..n).map(|i| 0.17 * (((i * 5) % 11) as f64 - 5.0) / 5.0).collect();
        let k = ctx.reconstruct_k(&u);
        let s = Mat64 { n: basis.rep_dim, data: basis.form_matrix().unwrap().to_f64() };
        let resid = k.transpose().matmul(&s).matmul(&k).sub(&s).frobenius();
        assert!(resid < 1e-10, "form residual {}", resid);
        assert!((k.det() - 1.0).abs() < 1e-10);
    }
}
