//! Distributional verification of constructed measures.
//!
//! Every check pairs a measure against smooth compactly supported test
//! fields by tensor Gauss–Legendre quadrature on the slab sub-boxes of the
//! construction (cells cut by every `δ`-plane, then split uniformly down to
//! a fraction of the test-function radius), where the constructed function
//! is affine. Faces are cut along the same lattice and integrated as
//! `(N−1)`-boxes, so the only quadrature error comes from the test field.
//!
//! The adjoint convention is `⟨𝒜u, φ⟩ = −∫ Σ_i ⟨u, A_iᵀ ∂_i φ⟩ dx`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{sorted_svd, OperatorSpec, RANK_TOL};
use crate::construct::{AffineValue, Grid, JumpFace, MeasureDecomposition, SbvFunction};
use crate::exterior::{blade_basis, MultiVector};
use crate::quadrature::UnitRule;
use crate::{Error, Result};

/// Pass threshold for relative pairing errors.
pub const PASS_TOL: f64 = 1e-6;

/// Default Gauss order per axis.
pub const DEFAULT_QUAD_ORDER: usize = 5;

/// Quadrature boxes per test-function length scale. The bump profile has an
/// essential singularity at the edge of its support, so Gauss rules only
/// converge quickly once boxes are well below the support radius.
pub const PIECES_PER_SCALE: f64 = 12.0;

/// A smooth compactly supported test field `ℝ^N → ℝ^d`.
pub trait TestField: Sync {
    fn space_dim(&self) -> usize;

    fn codomain_dim(&self) -> usize;

    /// Axis-aligned box containing the support.
    fn support(&self) -> (Vec<f64>, Vec<f64>);

    /// Length over which the field varies, used to size quadrature boxes.
    fn length_scale(&self) -> f64;

    /// True only if the field vanishes on the whole box.
    fn vanishes_on(&self, _lower: &[f64], _upper: &[f64]) -> bool {
        false
    }

    /// Writes `φ(x)` and the column-major `d × N` Jacobian (column `i` is
    /// `∂_i φ`). Returns `false`, leaving the buffers untouched, where both
    /// vanish.
    fn eval_into(&self, x: &[f64], value: &mut [f64], jacobian: &mut [f64]) -> bool;

    fn value(&self, x: &[f64]) -> DVector<f64> {
        let mut value = DVector::zeros(self.codomain_dim());
        let mut jac = vec![0.0; self.codomain_dim() * self.space_dim()];
        self.eval_into(x, value.as_mut_slice(), &mut jac);
        value
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut value = vec![0.0; self.codomain_dim()];
        let mut jac = DMatrix::zeros(self.codomain_dim(), self.space_dim());
        self.eval_into(x, &mut value, jac.as_mut_slice());
        jac
    }
}

/// `φ(x) = p(y) · β(|y|²) · v` with `y = (x − c)/ρ`, the bump
/// `β(τ) = exp(1 − 1/(1 − τ))` for `τ < 1` (zero otherwise), the even
/// polynomial `p(y) = 1 + yᵀQy`, and a constant codomain vector `v`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Symmetric `N × N` matrix `Q`, row-major.
    pub quadratic: Vec<f64>,
    pub direction: Vec<f64>,
}

impl TestFunction {
    fn y(&self, x: &[f64], i: usize) -> f64 {
        (x[i] - self.center[i]) / self.radius
    }

    fn qy(&self, x: &[f64], i: usize) -> f64 {
        let n = x.len();
        (0..n)
            .map(|j| self.quadratic[i * n + j] * self.y(x, j))
            .sum()
    }

    /// Scalar profile at `x`, writing its gradient into `grad`; `None`
    /// outside the support.
    fn profile(&self, x: &[f64], mut grad: impl FnMut(usize, f64)) -> Option<f64> {
        let n = x.len();
        let tau: f64 = (0..n).map(|i| self.y(x, i).powi(2)).sum();
        if tau >= 1.0 {
            return None;
        }
        let bump = (1.0 - 1.0 / (1.0 - tau)).exp();
        let dbump = -bump / ((1.0 - tau) * (1.0 - tau));
        let p = 1.0 + (0..n).map(|i| self.y(x, i) * self.qy(x, i)).sum::<f64>();
        for i in 0..n {
            grad(
                i,
                (2.0 * self.qy(x, i) * bump + 2.0 * p * dbump * self.y(x, i)) / self.radius,
            );
        }
        Some(p * bump)
    }

    /// The scalar profile `p(y)·β(|y|²)`.
    pub fn scalar(&self, x: &[f64]) -> f64 {
        self.profile(x, |_, _| {}).unwrap_or(0.0)
    }

    pub fn scalar_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.profile(x, |i, v| g[i] = v);
        g
    }
}

impl TestField for TestFunction {
    fn space_dim(&self) -> usize {
        self.center.len()
    }

    fn codomain_dim(&self) -> usize {
        self.direction.len()
    }

    fn support(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }

    fn length_scale(&self) -> f64 {
        self.radius
    }

    fn vanishes_on(&self, lower: &[f64], upper: &[f64]) -> bool {
        let dist2: f64 = self
            .center
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&c, (&a, &b))| (a - c).max(0.0).max(c - b).powi(2))
            .sum();
        dist2 >= self.radius * self.radius
    }

    fn eval_into(&self, x: &[f64], value: &mut [f64], jacobian: &mut [f64]) -> bool {
        let d = self.direction.len();
        let dir = &self.direction;
        let Some(s) = self.profile(x, |i, g| {
            for a in 0..d {
                jacobian[i * d + a] = dir[a] * g;
            }
        }) else {
            return false;
        };
        for (v, &a) in value.iter_mut().zip(dir) {
            *v = a * s;
        }
        true
    }
}

/// A finite linear combination of test functions.
#[derive(Clone, Debug)]
pub struct Combination {
    pub terms: Vec<(f64, TestFunction)>,
}

impl TestField for Combination {
    fn space_dim(&self) -> usize {
        self.terms[0].1.space_dim()
    }

    fn codomain_dim(&self) -> usize {
        self.terms[0].1.codomain_dim()
    }

    fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.space_dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for (_, t) in &self.terms {
            let (a, b) = t.support();
            for i in 0..n {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(b[i]);
            }
        }
        (lo, hi)
    }

    fn length_scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, t)| t.radius)
            .fold(f64::INFINITY, f64::min)
    }

    fn vanishes_on(&self, lower: &[f64], upper: &[f64]) -> bool {
        self.terms.iter().all(|(_, t)| t.vanishes_on(lower, upper))
    }

    fn eval_into(&self, x: &[f64], value: &mut [f64], jacobian: &mut [f64]) -> bool {
        let mut v = vec![0.0; value.len()];
        let mut j = vec![0.0; jacobian.len()];
        value.iter_mut().for_each(|a| *a = 0.0);
        jacobian.iter_mut().for_each(|a| *a = 0.0);
        let mut any = false;
        for (c, t) in &self.terms {
            if t.eval_into(x, &mut v, &mut j) {
                any = true;
                value.iter_mut().zip(&v).for_each(|(a, b)| *a += c * b);
                jacobian.iter_mut().zip(&j).for_each(|(a, b)| *a += c * b);
            }
        }
        any
    }
}

/// Deterministic suite of `count` test functions. Member 0 is radially
/// symmetric; the others are modulated by a seeded even quadratic. Every
/// support is a ball strictly inside the unit cube.
pub fn make_test_suite(
    space_dim: usize,
    seed: u64,
    count: usize,
    codomain_dim: usize,
) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let center: Vec<f64> = (0..space_dim).map(|_| rng.gen_range(0.35..0.65)).collect();
            let dist = center
                .iter()
                .map(|&c| c.min(1.0 - c))
                .fold(f64::INFINITY, f64::min);
            let radius = rng.gen_range(0.55..0.95) * dist;
            let mut quadratic = vec![0.0; space_dim * space_dim];
            if j > 0 {
                for a in 0..space_dim {
                    for b in a..space_dim {
                        let v = rng.gen_range(-1.0..1.0);
                        quadratic[a * space_dim + b] = v;
                        quadratic[b * space_dim + a] = v;
                    }
                }
            }
            let mut direction: Vec<f64> = (0..codomain_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-3 {
                direction.iter_mut().for_each(|v| *v /= norm);
            } else if let Some(first) = direction.first_mut() {
                *first = 1.0;
            }
            TestFunction {
                center,
                radius,
                quadratic,
                direction,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairingRecord {
    pub seed_index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub check: String,
    pub max_rel_error: f64,
    pub quad_order: usize,
    pub per_function: Vec<PairingRecord>,
}

impl VerificationReport {
    fn from_records(check: &str, quad_order: usize, per_function: Vec<PairingRecord>) -> Self {
        Self {
            check: check.to_string(),
            max_rel_error: per_function.iter().map(|r| r.rel_error).fold(0.0, f64::max),
            quad_order,
            per_function,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error <= PASS_TOL
    }
}

/// Slab sub-boxes of a grid, each split uniformly into `s^N` quadrature
/// boxes so that no box is wider than `length_scale / PIECES_PER_SCALE`.
struct Lattice {
    grid: Grid,
    per_cell: usize,
    total: usize,
    delta: f64,
}

impl Lattice {
    fn new(grid: Grid, slab_count: usize, length_scale: f64) -> Self {
        let slab = grid.h() / slab_count as f64;
        let split = (slab * PIECES_PER_SCALE / length_scale).ceil().max(1.0) as usize;
        let per_cell = slab_count * split;
        let total = grid.cells_per_axis() * per_cell;
        Self {
            grid,
            per_cell,
            total,
            delta: 1.0 / total as f64,
        }
    }

    /// `(cell, lower corner)` of every box on which `phi` may be nonzero.
    fn boxes_for(&self, phi: &dyn TestField) -> Vec<(usize, Vec<f64>)> {
        let (lo, hi) = phi.support();
        self.boxes_in(&lo, &hi)
            .into_iter()
            .filter(|(_, lower)| {
                let upper: Vec<f64> = lower.iter().map(|l| l + self.delta).collect();
                !phi.vanishes_on(lower, &upper)
            })
            .collect()
    }

    /// `(cell, lower corner)` of every box meeting `[lo, hi]`.
    fn boxes_in(&self, lo: &[f64], hi: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let t = self.total as f64;
        let ranges: Vec<(usize, usize)> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                let first = (a * t).floor().max(0.0) as usize;
                let last = ((b * t).ceil().max(0.0) as usize).min(self.total);
                (first.min(self.total), last)
            })
            .collect();
        if ranges.iter().any(|(a, b)| a >= b) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let coords: Vec<usize> = idx.iter().map(|k| k / self.per_cell).collect();
            let lower = idx.iter().map(|&k| k as f64 / t).collect();
            out.push((self.grid.cell_index(&coords), lower));
            let mut axis = idx.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < ranges[axis].1 {
                    break;
                }
                idx[axis] = ranges[axis].0;
            }
        }
    }
}

/// `∫_face g dH^{N−1}` split along the quadrature lattice, so every piece
/// is a face of a quadrature box; pieces where `phi` vanishes are skipped.
fn face_integral(
    face: &JumpFace,
    delta: f64,
    unit: &UnitRule,
    phi: &dyn TestField,
    mut g: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let (lo, hi) = phi.support();
    let axes: Vec<usize> = (0..face.lower.len()).filter(|&i| i != face.axis).collect();
    let pieces: Vec<Vec<(f64, f64)>> = axes
        .iter()
        .map(|&i| {
            let first = (face.lower[i] / delta).round() as i64;
            let last = (face.upper[i] / delta).round() as i64;
            (first..last)
                .map(|k| (k as f64 * delta, (k + 1) as f64 * delta))
                .map(|(p, q)| (p.max(face.lower[i]), q.min(face.upper[i])))
                .filter(|&(p, q)| q > lo[i] && p < hi[i])
                .collect()
        })
        .collect();
    if pieces.iter().any(Vec::is_empty) {
        return 0.0;
    }
    let mut total = 0.0;
    let mut y = face.lower.clone();
    let mut piece_lo = face.lower.clone();
    let mut piece_hi = face.upper.clone();
    let mut idx = vec![0usize; axes.len()];
    loop {
        for (j, &axis) in axes.iter().enumerate() {
            (piece_lo[axis], piece_hi[axis]) = pieces[j][idx[j]];
        }
        if !phi.vanishes_on(&piece_lo, &piece_hi) {
            let extent: f64 = axes.iter().map(|&a| piece_hi[a] - piece_lo[a]).product();
            for (pt, w) in unit.points.iter().zip(&unit.weights) {
                for (j, &axis) in axes.iter().enumerate() {
                    y[axis] = piece_lo[axis] + (piece_hi[axis] - piece_lo[axis]) * pt[j];
                }
                total += w * extent * g(&y);
            }
        }
        let mut j = axes.len();
        loop {
            if j == 0 {
                return total;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < pieces[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// `⟨g(y), w⟩` for an affine face value, without allocating.
fn affine_dot(g: &AffineValue, centroid: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut out = g
        .value
        .as_slice()
        .iter()
        .zip(w)
        .map(|(a, b)| a * b)
        .sum::<f64>();
    for (j, (&c, &yj)) in centroid.iter().zip(y).enumerate() {
        let d = yj - c;
        if d != 0.0 {
            out += d * g
                .slopes
                .column(j)
                .iter()
                .zip(w)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
    out
}

fn check_suite(suite_dim: usize, space_dim: usize, codomain: usize, expected: usize) -> Result<()> {
    if suite_dim != space_dim || codomain != expected {
        return Err(Error::InvalidDimension(format!(
            "test field (N = {suite_dim}, codomain {codomain}) does not match (N = {space_dim}, codomain {expected})"
        )));
    }
    Ok(())
}

/// `⟨𝒜u, φ⟩` two ways: `lhs = −∫ Σ_i ⟨u, A_iᵀ∂_iφ⟩` and
/// `rhs = Σ_q ∫_q ⟨f_q, φ⟩ + Σ_faces ∫ ⟨𝔸(ν)[u⁺−u⁻], φ⟩ d𝓗^{N−1}`.
pub fn distributional_pairing(
    u: &SbvFunction,
    op: &OperatorSpec,
    med: &MeasureDecomposition,
    phi: &dyn TestField,
    quad_order: usize,
) -> Result<(f64, f64)> {
    let n = u.grid().space_dim();
    let d = op.dim_f();
    check_suite(phi.space_dim(), n, phi.codomain_dim(), d)?;
    // [A_1ᵀ | … | A_Nᵀ], so that Σ_i A_iᵀ ∂_iφ = adjoint · vec(Dφ).
    let blocks = op.axis_blocks()?;
    let mut adjoint = DMatrix::zeros(op.dim_e(), d * n);
    for (i, b) in blocks.iter().enumerate() {
        adjoint.columns_mut(i * d, d).copy_from(&b.transpose());
    }
    let lattice = Lattice::new(*u.grid(), u.slab_count(), phi.length_scale());
    let unit = UnitRule::new(n, quad_order)?;
    let face_unit = UnitRule::new(n - 1, quad_order)?;
    let scale = lattice.delta.powi(n as i32);

    let mut value = vec![0.0; d];
    let mut jac = DVector::zeros(d * n);
    let mut pulled = DVector::zeros(op.dim_e());
    let mut x = vec![0.0; n];
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (cell, lower) in lattice.boxes_for(phi) {
        let f = med.ac_density[cell].as_slice();
        for (p, w) in unit.points.iter().zip(&unit.weights) {
            for i in 0..n {
                x[i] = lower[i] + lattice.delta * p[i];
            }
            if !phi.eval_into(&x, &mut value, jac.as_mut_slice()) {
                continue;
            }
            let ux = u
                .evaluate(&x)
                .map_err(|e| Error::QuadratureError(e.to_string()))?;
            pulled.gemv(1.0, &adjoint, &jac, 0.0);
            let weight = w * scale;
            lhs -= weight * ux.dot(&pulled);
            rhs += weight * f.iter().zip(&value).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let mut face_value = vec![0.0; d];
    let mut face_jac = vec![0.0; d * n];
    for (face, g) in med.faces.iter().zip(&med.jump_density) {
        let centroid = face.centroid();
        rhs += face_integral(face, lattice.delta, &face_unit, phi, |y| {
            if phi.eval_into(y, &mut face_value, &mut face_jac) {
                affine_dot(g, &centroid, y, &face_value)
            } else {
                0.0
            }
        });
    }
    Ok((lhs, rhs))
}

/// Checks `𝒜u = f·𝓛_N + 𝔸(ν)[u⁺ − u⁻]·𝓗_{N−1}` against every member of
/// `suite`; the relative error is `|lhs − rhs| / (1 + |rhs|)`.
pub fn distributional_check(
    u: &SbvFunction,
    op: &OperatorSpec,
    med: &MeasureDecomposition,
    suite: &[TestFunction],
    quad_order: usize,
) -> Result<VerificationReport> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    let records = suite
        .par_iter()
        .enumerate()
        .map(|(idx, phi)| {
            let (lhs, rhs) = distributional_pairing(u, op, med, phi, quad_order)?;
            Ok(PairingRecord {
                seed_index: idx,
                lhs,
                rhs,
                rel_error: (lhs - rhs).abs() / (1.0 + rhs.abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::from_records(
        "distributional",
        quad_order,
        records,
    ))
}

/// `⟨μ, Σ_j W_j ∂_j φ⟩` for the measure `μ` of `med`, together with the sup
/// of `|Σ_j W_j ∂_j φ|` over the quadrature points.
pub fn derivative_pairing(
    med: &MeasureDecomposition,
    weights: &[DMatrix<f64>],
    phi: &dyn TestField,
    quad_order: usize,
) -> Result<(f64, f64)> {
    let n = med.grid.space_dim();
    let d = phi.codomain_dim();
    if weights.len() != n || weights.iter().any(|w| w.shape() != (med.dim_f, d)) {
        return Err(Error::InvalidDimension(
            "pairing weights must be N matrices of shape dimF × codomain".into(),
        ));
    }
    // [W_1 | … | W_N], so that Σ_j W_j ∂_jφ = stacked · vec(Dφ).
    let mut stacked = DMatrix::zeros(med.dim_f, d * n);
    for (j, w) in weights.iter().enumerate() {
        stacked.columns_mut(j * d, d).copy_from(w);
    }
    let lattice = Lattice::new(med.grid, med.slab_count, phi.length_scale());
    let unit = UnitRule::new(n, quad_order)?;
    let face_unit = UnitRule::new(n - 1, quad_order)?;
    let scale = lattice.delta.powi(n as i32);

    let mut value = vec![0.0; d];
    let mut jac = DVector::zeros(d * n);
    let mut field = DVector::zeros(med.dim_f);
    let mut x = vec![0.0; n];
    let (mut pairing, mut sup) = (0.0f64, 0.0f64);
    for (cell, lower) in lattice.boxes_for(phi) {
        let f = &med.ac_density[cell];
        for (p, w) in unit.points.iter().zip(&unit.weights) {
            for i in 0..n {
                x[i] = lower[i] + lattice.delta * p[i];
            }
            if !phi.eval_into(&x, &mut value, jac.as_mut_slice()) {
                continue;
            }
            field.gemv(1.0, &stacked, &jac, 0.0);
            sup = sup.max(field.norm());
            pairing += w * scale * f.dot(&field);
        }
    }
    for (face, g) in med.faces.iter().zip(&med.jump_density) {
        let centroid = face.centroid();
        pairing += face_integral(face, lattice.delta, &face_unit, phi, |y| {
            if phi.eval_into(y, &mut value, jac.as_mut_slice()) {
                field.gemv(1.0, &stacked, &jac, 0.0);
                affine_dot(g, &centroid, y, field.as_slice())
            } else {
                0.0
            }
        });
    }
    Ok((pairing, sup))
}

fn vanishing_check(
    name: &str,
    med: &MeasureDecomposition,
    weights: &[DMatrix<f64>],
    suite: &[TestFunction],
    quad_order: usize,
) -> Result<VerificationReport> {
    let records = suite
        .par_iter()
        .enumerate()
        .map(|(idx, phi)| {
            let (pairing, sup) = derivative_pairing(med, weights, phi, quad_order)?;
            Ok(PairingRecord {
                seed_index: idx,
                lhs: pairing,
                rhs: 0.0,
                rel_error: pairing.abs() / (1.0 + sup),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::from_records(name, quad_order, records))
}

/// `⟨μ, ∇φ⟩ = 0` for scalar test functions: `μ` is divergence-free. The
/// relative error is `|⟨μ, ∇φ⟩| / (1 + ‖∇φ‖_∞)`.
pub fn divergence_check(
    med: &MeasureDecomposition,
    suite: &[TestFunction],
    quad_order: usize,
) -> Result<VerificationReport> {
    let n = med.grid.space_dim();
    if med.dim_f != n {
        return Err(Error::InvalidDimension(format!(
            "divergence check needs an ℝ^N-valued measure, got dimF = {}",
            med.dim_f
        )));
    }
    if let Some(phi) = suite.first() {
        check_suite(phi.space_dim(), n, phi.codomain_dim(), 1)?;
    }
    let weights: Vec<DMatrix<f64>> = (0..n)
        .map(|j| DMatrix::from_fn(n, 1, |i, _| if i == j { 1.0 } else { 0.0 }))
        .collect();
    vanishing_check("divergence", med, &weights, suite, quad_order)
}

/// `⟨∂T, dψ⟩ = 0` for `(m−1)`-vector test fields `ψ`, where `med` is the
/// decomposition of the `m`-current `∂T`. The relative error is
/// `|⟨∂T, dψ⟩| / (1 + ‖dψ‖_∞)`.
pub fn boundary_squared_check(
    med: &MeasureDecomposition,
    degree: usize,
    suite: &[TestFunction],
    quad_order: usize,
) -> Result<VerificationReport> {
    let n = med.grid.space_dim();
    if degree == 0 || degree > n {
        return Err(Error::InvalidDegree {
            degree,
            space_dim: n,
        });
    }
    let source = blade_basis(n, degree - 1).len();
    if med.dim_f != blade_basis(n, degree).len() {
        return Err(Error::InvalidDimension(format!(
            "measure has dimF = {}, expected Λ^{degree} of dimension {}",
            med.dim_f,
            blade_basis(n, degree).len()
        )));
    }
    if let Some(phi) = suite.first() {
        check_suite(phi.space_dim(), n, phi.codomain_dim(), source)?;
    }
    // W_j[v] = v ∧ e_j, the symbol of d in direction e_j.
    let weights = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let e = MultiVector::vector(&e)?;
            let mut w = DMatrix::zeros(med.dim_f, source);
            for col in 0..source {
                let mut coeffs = vec![0.0; source];
                coeffs[col] = 1.0;
                let image = MultiVector::new(n, degree - 1, coeffs)?.wedge(&e)?;
                w.column_mut(col).copy_from_slice(image.coeffs());
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    vanishing_check("boundary-squared", med, &weights, suite, quad_order)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConeReport {
    pub max_residual: f64,
    pub faces_checked: usize,
}

/// Least-squares residual of every jump density (value and slopes) against
/// the columns of `𝔸(ν)`.
pub fn cone_consistency_check(med: &MeasureDecomposition, op: &OperatorSpec) -> Result<ConeReport> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    let n = op.space_dim();
    let scale = sorted_svd(&op.stacked_blocks()).singular_values[0];
    let projectors: Vec<DMatrix<f64>> = (0..n)
        .map(|axis| {
            let mut nu = vec![0.0; n];
            nu[axis] = 1.0;
            let svd = sorted_svd(&op.symbol(&nu)?);
            let rank = svd
                .singular_values
                .iter()
                .filter(|&&s| s > RANK_TOL * scale)
                .count();
            let basis = svd.u.columns(0, rank);
            Ok(basis * basis.transpose())
        })
        .collect::<Result<_>>()?;
    let mut max_residual = 0.0f64;
    for (face, g) in med.faces.iter().zip(&med.jump_density) {
        let proj = &projectors[face.axis];
        max_residual = max_residual.max((&g.value - proj * &g.value).norm());
        for col in g.slopes.column_iter() {
            max_residual = max_residual.max((col - proj * col).norm());
        }
    }
    Ok(ConeReport {
        max_residual,
        faces_checked: med.faces.len(),
    })
}

/// For the gradient operator (`F = E ⊗ ℝ^N`, column-major), the largest
/// second singular value of any face density, sampled at each face's
/// centroid and lower corner.
pub fn rank_one_check(med: &MeasureDecomposition, dim_e: usize) -> Result<f64> {
    let n = med.grid.space_dim();
    if med.dim_f != dim_e * n {
        return Err(Error::InvalidDimension(format!(
            "dimF = {} is not dimE · N = {}",
            med.dim_f,
            dim_e * n
        )));
    }
    let mut worst = 0.0f64;
    for (face, g) in med.faces.iter().zip(&med.jump_density) {
        let centroid = face.centroid();
        for y in [&centroid, &face.lower] {
            let density = g.at(&centroid, y);
            let matrix = DMatrix::from_column_slice(dim_e, n, density.as_slice());
            let second = sorted_svd(&matrix)
                .singular_values
                .get(1)
                .copied()
                .unwrap_or(0.0);
            worst = worst.max(second);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn suite_is_deterministic_and_interior() {
        let a = make_test_suite(3, 0, 5, 2);
        let b = make_test_suite(3, 0, 5, 2);
        assert_eq!(a, b);
        for phi in &a {
            let (lo, hi) = phi.support();
            assert!(lo.iter().all(|&v| v > 0.0) && hi.iter().all(|&v| v < 1.0));
        }
        assert!(a[0].quadratic.iter().all(|&q| q == 0.0));
        assert!(a[1].quadratic.iter().any(|&q| q != 0.0));
    }

    #[test]
    fn outside_support_is_exactly_zero_and_centre_is_critical() {
        for phi in make_test_suite(2, 3, 6, 1) {
            let mut far = phi.center.clone();
            far[0] += phi.radius * 1.0001;
            assert_eq!(phi.scalar(&far), 0.0);
            assert!(phi.scalar_gradient(&far).iter().all(|&g| g == 0.0));
            let g = phi.scalar_gradient(&phi.center);
            assert!(g.iter().all(|&v| v == 0.0));
            assert_eq!(phi.scalar(&phi.center), 1.0);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for phi in make_test_suite(3, 11, 4, 1) {
            let x: Vec<f64> = phi.center.iter().map(|c| c + 0.3 * phi.radius).collect();
            let g = phi.scalar_gradient(&x);
            for i in 0..3 {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (phi.scalar(&a) - phi.scalar(&b)) / (2.0 * h);
                assert_abs_diff_eq!(g[i], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lattice_boxes_cover_support() {
        let lattice = Lattice::new(Grid::new(2, 2).unwrap(), 2, f64::INFINITY);
        let boxes = lattice.boxes_in(&[0.1, 0.3], &[0.6, 0.4]);
        // slabs of width 1/4: x ∈ {0, 1, 2}, y ∈ {1}
        assert_eq!(boxes.len(), 3);
        assert_eq!(boxes[0], (0, vec![0.0, 0.25]));
        assert_eq!(boxes[2], (2, vec![0.5, 0.25]));

        // radius 1/6 forces each slab into ceil(12 · (1/4) · 6) = 18 pieces
        let fine = Lattice::new(Grid::new(1, 2).unwrap(), 2, 1.0 / 6.0);
        assert_eq!(fine.per_cell, 36);
        let boxes = fine.boxes_in(&[0.49], &[0.51]);
        assert_eq!(boxes.first().unwrap().0, 0);
        assert_eq!(boxes.last().unwrap().0, 1);
    }
}
