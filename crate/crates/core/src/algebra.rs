//! Constant-coefficient homogeneous operators and their linear algebra.
//!
//! An operator `𝒜u = Σ_{|α|=k} A_α ∂^α u` is stored as its coefficient
//! matrices `A_α : E → F`. Everything else in the crate works with three
//! derived objects:
//!
//! - the principal symbol `𝔸(ξ) = Σ A_α ξ^α`,
//! - the essential range `𝐅 = span{𝔸(ξ)e}`,
//! - the lifted map `A : E ⊗ Sym^k(ℝ^N) → F` with `A[e ⊗ ξ^{⊗k}] = 𝔸(ξ)e`,
//!   together with its Moore–Penrose pseudoinverse.
//!
//! Tensor coordinates on `E ⊗ Sym^k(ℝ^N)` use the orthonormal symmetric basis
//! `M_α` (so norms are Frobenius norms). The flat index of `e_a ⊗ M_s` is
//! `s · dimE + a`; for `k = 1` this is the column-major layout of a
//! `dimE × N` matrix, and the lifted map is the block row `[A_1 | … | A_N]`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Relative singular-value threshold for every rank decision.
pub const RANK_TOL: f64 = 1e-10;

/// Seed used by [`lifted_map`] when sampling decomposables for `k ≥ 2`.
pub const DEFAULT_LIFT_SEED: u64 = 0x5eed_11f7;

/// A multi-index `α ∈ ℕ₀^N`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    /// The unit multi-index selecting `∂_axis`.
    pub fn unit(space_dim: usize, axis: usize) -> Self {
        let mut alpha = vec![0; space_dim];
        alpha[axis] = 1;
        MultiIndex(alpha)
    }

    pub fn modulus(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(xi)
            .map(|(&p, &x)| x.powi(p as i32))
            .product()
    }

    /// `k! / α!`, the number of index sequences with multiset `α`.
    pub fn multinomial(&self) -> f64 {
        let k = self.modulus();
        let mut value = factorial(k);
        for &p in &self.0 {
            value /= factorial(p);
        }
        value
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// All multi-indices of modulus `k` in `N` variables, ordered so that for
/// `k = 1` the `i`-th entry is `e_i` and for `N = 2, k = 2` the order is
/// `(2,0), (1,1), (0,2)`.
pub fn symmetric_basis(space_dim: usize, order: usize) -> Vec<MultiIndex> {
    fn recurse(
        prefix: &mut Vec<usize>,
        remaining_dims: usize,
        left: usize,
        out: &mut Vec<MultiIndex>,
    ) {
        if remaining_dims == 1 {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for p in (0..=left).rev() {
            prefix.push(p);
            recurse(prefix, remaining_dims - 1, left - p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if space_dim == 0 {
        return out;
    }
    recurse(
        &mut Vec::with_capacity(space_dim),
        space_dim,
        order,
        &mut out,
    );
    out
}

/// `C(N + k − 1, k)`.
pub fn symmetric_dim(space_dim: usize, order: usize) -> usize {
    binomial(space_dim + order - 1, order)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Coordinates of `e ⊗ ξ^{⊗k}` in the orthonormal basis of `E ⊗ Sym^k`.
pub fn lift_decomposable(e: &DVector<f64>, xi: &[f64], order: usize) -> DVector<f64> {
    let basis = symmetric_basis(xi.len(), order);
    let dim_e = e.len();
    let mut out = DVector::zeros(dim_e * basis.len());
    for (s, alpha) in basis.iter().enumerate() {
        let c = alpha.multinomial().sqrt() * alpha.monomial(xi);
        for a in 0..dim_e {
            out[s * dim_e + a] = c * e[a];
        }
    }
    out
}

/// A homogeneous constant-coefficient operator `Σ_{|α|=k} A_α ∂^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    space_dim: usize,
    dim_e: usize,
    dim_f: usize,
    order: usize,
    coeffs: Vec<(MultiIndex, DMatrix<f64>)>,
}

impl OperatorSpec {
    pub fn new(
        space_dim: usize,
        dim_e: usize,
        dim_f: usize,
        order: usize,
        coeffs: Vec<(MultiIndex, DMatrix<f64>)>,
    ) -> Result<Self> {
        if space_dim == 0 || dim_e == 0 || dim_f == 0 || order == 0 {
            return Err(Error::InvalidOperator(format!(
                "dimensions must be positive (N={space_dim}, dimE={dim_e}, dimF={dim_f}, k={order})"
            )));
        }
        let mut seen = BTreeSet::new();
        for (alpha, matrix) in &coeffs {
            if alpha.0.len() != space_dim {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has length {}, expected {space_dim}",
                    alpha.0,
                    alpha.0.len()
                )));
            }
            if alpha.modulus() != order {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has modulus {}, expected {order}",
                    alpha.0,
                    alpha.modulus()
                )));
            }
            if matrix.shape() != (dim_f, dim_e) {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} has shape {:?}, expected ({dim_f}, {dim_e})",
                    alpha.0,
                    matrix.shape()
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} has non-finite entries",
                    alpha.0
                )));
            }
            if !seen.insert(alpha.clone()) {
                return Err(Error::InvalidOperator(format!(
                    "duplicate multi-index {:?}",
                    alpha.0
                )));
            }
        }
        if coeffs.iter().all(|(_, m)| m.iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidOperator(
                "all coefficient matrices are zero".into(),
            ));
        }
        Ok(Self {
            space_dim,
            dim_e,
            dim_f,
            order,
            coeffs,
        })
    }

    /// First-order operator `Σ_i A_i ∂_i` from one block per axis.
    pub fn first_order(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let space_dim = blocks.len();
        let (dim_f, dim_e) = blocks
            .first()
            .map(|b| b.shape())
            .ok_or_else(|| Error::InvalidOperator("no coefficient blocks".into()))?;
        let coeffs = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| (MultiIndex::unit(space_dim, i), b))
            .collect();
        Self::new(space_dim, dim_e, dim_f, 1, coeffs)
    }

    /// The gradient of `ℝ^{dimE}`-valued maps, `F = E ⊗ ℝ^N` with
    /// `F`-index `i · dimE + a` (column-major `dimE × N` matrices).
    pub fn gradient(space_dim: usize, dim_e: usize) -> Result<Self> {
        let dim_f = dim_e * space_dim;
        let blocks = (0..space_dim)
            .map(|i| {
                let mut b = DMatrix::zeros(dim_f, dim_e);
                for a in 0..dim_e {
                    b[(i * dim_e + a, a)] = 1.0;
                }
                b
            })
            .collect();
        Self::first_order(blocks)
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn dim_f(&self) -> usize {
        self.dim_f
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[(MultiIndex, DMatrix<f64>)] {
        &self.coeffs
    }

    /// The principal symbol `𝔸(ξ) = Σ_α A_α ξ^α`.
    pub fn symbol(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        if xi.len() != self.space_dim {
            return Err(Error::InvalidDimension(format!(
                "frequency has length {}, expected {}",
                xi.len(),
                self.space_dim
            )));
        }
        let mut out = DMatrix::zeros(self.dim_f, self.dim_e);
        for (alpha, matrix) in &self.coeffs {
            out += matrix * alpha.monomial(xi);
        }
        Ok(out)
    }

    /// Coefficient blocks `A_1, …, A_N` of a first-order operator, with zero
    /// blocks for axes that carry no coefficient.
    pub fn axis_blocks(&self) -> Result<Vec<DMatrix<f64>>> {
        if self.order != 1 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let mut blocks = vec![DMatrix::zeros(self.dim_f, self.dim_e); self.space_dim];
        for (alpha, matrix) in &self.coeffs {
            let axis = alpha.0.iter().position(|&p| p == 1).expect("modulus one");
            blocks[axis] = matrix.clone();
        }
        Ok(blocks)
    }

    /// The horizontally stacked block `[A_α]_α`.
    pub fn stacked_blocks(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim_f, self.dim_e * self.coeffs.len());
        for (j, (_, matrix)) in self.coeffs.iter().enumerate() {
            out.view_mut((0, j * self.dim_e), (self.dim_f, self.dim_e))
                .copy_from(matrix);
        }
        out
    }
}

/// Singular value decomposition with singular values sorted descending.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    SortedSvd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]),
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v_t: DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]),
    }
}

impl SortedSvd {
    fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    fn rank(&self, scale: f64) -> usize {
        let cutoff = RANK_TOL * scale;
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }
}

/// Numerical rank with threshold `RANK_TOL · scale`; `scale` defaults to the
/// largest singular value of `a`.
pub fn numerical_rank(a: &DMatrix<f64>, scale: Option<f64>) -> usize {
    let svd = sorted_svd(a);
    let scale = scale.unwrap_or_else(|| svd.max());
    if scale == 0.0 {
        return 0;
    }
    svd.rank(scale)
}

/// Orthonormal basis of the column space of `a` (columns of the result).
pub fn column_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = sorted_svd(a);
    let rank = if svd.max() == 0.0 {
        0
    } else {
        svd.rank(svd.max())
    };
    svd.u.columns(0, rank).into_owned()
}

/// Orthonormal basis of the essential range, from the stacked coefficient
/// blocks.
pub fn essential_range(op: &OperatorSpec) -> DMatrix<f64> {
    column_space(&op.stacked_blocks())
}

/// Moore–Penrose pseudoinverse together with the spectral data reported
/// alongside it.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    /// Orthonormal basis of the column space of the inverted matrix.
    pub range_basis: DMatrix<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<PseudoInverse> {
    let svd = sorted_svd(a);
    let sigma_max = svd.max();
    if !sigma_max.is_finite() || sigma_max <= f64::MIN_POSITIVE {
        return Err(Error::ZeroOperator);
    }
    let rank = svd.rank(sigma_max);
    let mut matrix = DMatrix::zeros(a.ncols(), a.nrows());
    for j in 0..rank {
        let v = svd.v_t.row(j).transpose();
        let u = svd.u.column(j);
        matrix += (v * u.transpose()) / svd.singular_values[j];
    }
    // Restore structural zeros lost to roundoff so sparse operators lift to
    // sparse tensors and produce no spurious zero-jump faces.
    let floor = 4.0 * f64::EPSILON * matrix.amax();
    matrix
        .iter_mut()
        .filter(|v| v.abs() <= floor)
        .for_each(|v| *v = 0.0);
    Ok(PseudoInverse {
        matrix,
        range_basis: svd.u.columns(0, rank).into_owned(),
        sigma_min: svd.singular_values[rank - 1],
        sigma_max,
    })
}

/// The lifted map `A` with `A[e ⊗ ξ^{⊗k}] = 𝔸(ξ)e` and its pseudoinverse.
#[derive(Clone, Debug)]
pub struct LiftedMap {
    pub space_dim: usize,
    pub dim_e: usize,
    pub order: usize,
    pub matrix_a: DMatrix<f64>,
    pub pseudo_inverse: DMatrix<f64>,
    /// Orthonormal columns spanning `im A = 𝐅`.
    pub range_basis: DMatrix<f64>,
    /// Smallest nonzero singular value of `matrix_a`.
    pub sigma_min: f64,
    /// Spectral norm of `matrix_a`.
    pub op_norm: f64,
}

impl LiftedMap {
    pub fn dim_f(&self) -> usize {
        self.matrix_a.nrows()
    }

    pub fn range_dim(&self) -> usize {
        self.range_basis.ncols()
    }

    /// Spectral norm of the pseudoinverse, measured directly.
    pub fn pinv_norm(&self) -> f64 {
        sorted_svd(&self.pseudo_inverse).max()
    }

    /// Orthogonal projection onto `𝐅`.
    pub fn project(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.range_basis * (self.range_basis.transpose() * w)
    }

    pub fn distance_to_range(&self, w: &DVector<f64>) -> f64 {
        (w - self.project(w)).norm()
    }

    /// `A†w`.
    pub fn lift(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.pseudo_inverse * w
    }

    /// `A[P]` for a flat tensor `P`.
    pub fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.matrix_a * p
    }
}

/// Builds the lifted map. For `k = 1` this is the block row `[A_1 | … | A_N]`;
/// for `k ≥ 2` the map is recovered by least squares from sampled
/// decomposables (seeded by [`DEFAULT_LIFT_SEED`]).
pub fn lifted_map(op: &OperatorSpec) -> Result<LiftedMap> {
    lifted_map_seeded(op, DEFAULT_LIFT_SEED)
}

pub fn lifted_map_seeded(op: &OperatorSpec, seed: u64) -> Result<LiftedMap> {
    let matrix_a = if op.order() == 1 {
        let blocks = op.axis_blocks()?;
        let mut a = DMatrix::zeros(op.dim_f(), op.dim_e() * op.space_dim());
        for (i, b) in blocks.iter().enumerate() {
            a.view_mut((0, i * op.dim_e()), (op.dim_f(), op.dim_e()))
                .copy_from(b);
        }
        a
    } else {
        lift_by_sampling(op, seed)?
    };
    let pinv = pseudo_inverse(&matrix_a)?;
    Ok(LiftedMap {
        space_dim: op.space_dim(),
        dim_e: op.dim_e(),
        order: op.order(),
        matrix_a,
        pseudo_inverse: pinv.matrix,
        range_basis: pinv.range_basis,
        sigma_min: pinv.sigma_min,
        op_norm: pinv.sigma_max,
    })
}

pub(crate) fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn lift_by_sampling(op: &OperatorSpec, seed: u64) -> Result<DMatrix<f64>> {
    let (n, k, dim_e, dim_f) = (op.space_dim(), op.order(), op.dim_e(), op.dim_f());
    let basis = symmetric_basis(n, k);
    let dim_sym = basis.len();
    let samples = dim_sym + 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..samples).map(|_| random_unit(&mut rng, n)).collect();
    let symbols = dirs
        .iter()
        .map(|xi| op.symbol(xi))
        .collect::<Result<Vec<_>>>()?;

    let design = DMatrix::from_fn(samples, dim_sym, |j, s| {
        basis[s].multinomial().sqrt() * basis[s].monomial(&dirs[j])
    });
    let svd = sorted_svd(&design);
    let smallest = *svd.singular_values.last().unwrap_or(&0.0);
    if svd.singular_values.len() < dim_sym || smallest <= RANK_TOL * svd.max() {
        return Err(Error::LiftConstructionFailed(format!(
            "sampled design matrix is rank deficient (σ_min/σ_max = {:e})",
            smallest / svd.max()
        )));
    }
    let design_pinv = pseudo_inverse(&design)?.matrix;

    let mut a = DMatrix::zeros(dim_f, dim_e * dim_sym);
    for e_idx in 0..dim_e {
        let rhs = DMatrix::from_fn(samples, dim_f, |j, row| symbols[j][(row, e_idx)]);
        let solved = &design_pinv * rhs;
        for s in 0..dim_sym {
            a.column_mut(s * dim_e + e_idx)
                .copy_from(&solved.row(s).transpose());
        }
    }

    // Fresh samples: the identity must hold on decomposables never used above.
    for _ in 0..10 {
        let xi = random_unit(&mut rng, n);
        let e = DVector::from_fn(dim_e, |_, _| rng.gen_range(-1.0..1.0));
        let expected = op.symbol(&xi)? * &e;
        let got = &a * lift_decomposable(&e, &xi, k);
        if (&got - &expected).norm() > 1e-10 * (1.0 + expected.norm()) {
            return Err(Error::LiftConstructionFailed(format!(
                "identity fails on a fresh sample by {:e}",
                (&got - &expected).norm()
            )));
        }
    }
    Ok(a)
}

/// An element of `E ⊗ (ℝ^N)^{⊗k}` stored densely with flat index
/// `a · N^k + (i_1 · N^{k−1} + … + i_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullTensor {
    pub dim_e: usize,
    pub space_dim: usize,
    pub order: usize,
    pub data: Vec<f64>,
}

impl FullTensor {
    pub fn zeros(dim_e: usize, space_dim: usize, order: usize) -> Self {
        Self {
            dim_e,
            space_dim,
            order,
            data: vec![0.0; dim_e * space_dim.pow(order as u32)],
        }
    }

    /// `e ⊗ ξ^{⊗k}`.
    pub fn decomposable(e: &[f64], xi: &[f64], order: usize) -> Self {
        let n = xi.len();
        let mut t = Self::zeros(e.len(), n, order);
        let slots = n.pow(order as u32);
        for (a, &ea) in e.iter().enumerate() {
            for flat in 0..slots {
                let mut rest = flat;
                let mut prod = ea;
                for _ in 0..order {
                    prod *= xi[rest % n];
                    rest /= n;
                }
                t.data[a * slots + flat] = prod;
            }
        }
        t
    }
}

/// `P • v`: contracts the last `k − 1` slots of `P` with copies of `v`,
/// returning a `dimE × N` matrix. For `k = 1` this is `P` itself.
pub fn bullet_product(p: &FullTensor, v: &[f64], order: usize) -> Result<DMatrix<f64>> {
    let n = p.space_dim;
    if order == 0 || order != p.order || v.len() != n {
        return Err(Error::InvalidDimension(format!(
            "bullet product of order-{} tensor with order {order} and vector of length {} (N = {n})",
            p.order,
            v.len()
        )));
    }
    if p.data.len() != p.dim_e * n.pow(order as u32) {
        return Err(Error::InvalidDimension(format!(
            "tensor has {} entries, expected {}",
            p.data.len(),
            p.dim_e * n.pow(order as u32)
        )));
    }
    let tail = n.pow(order as u32 - 1);
    let mut out = DMatrix::zeros(p.dim_e, n);
    for a in 0..p.dim_e {
        for i in 0..n {
            let base = a * n * tail + i * tail;
            let mut acc = 0.0;
            for rest in 0..tail {
                let mut r = rest;
                let mut weight = 1.0;
                for _ in 1..order {
                    weight *= v[r % n];
                    r /= n;
                }
                acc += p.data[base + rest] * weight;
            }
            out[(a, i)] = acc;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstantRankReport {
    /// Sampled evidence only: true iff a single rank was observed.
    pub is_constant_rank: bool,
    pub observed_ranks: BTreeSet<usize>,
    pub samples: usize,
}

/// Ranks of `𝔸(ζ)` on the coordinate directions `±e_i`, the diagonals
/// `(e_i ± e_j)/√2`, and `sample_count` seeded random unit vectors.
pub fn constant_rank_report(
    op: &OperatorSpec,
    sample_count: usize,
    seed: u64,
) -> ConstantRankReport {
    let n = op.space_dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            dirs.push(d);
        }
        for j in i + 1..n {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[i] = std::f64::consts::FRAC_1_SQRT_2;
                d[j] = sign * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(d);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dirs.extend((0..sample_count).map(|_| random_unit(&mut rng, n)));

    let scale = sorted_svd(&op.stacked_blocks()).max();
    let observed_ranks: BTreeSet<usize> = dirs
        .iter()
        .map(|d| numerical_rank(&op.symbol(d).expect("direction has length N"), Some(scale)))
        .collect();
    ConstantRankReport {
        is_constant_rank: observed_ranks.len() == 1,
        observed_ranks,
        samples: dirs.len(),
    }
}

fn distance_to_image(op: &OperatorSpec, w: &DVector<f64>, zeta: &[f64], scale: f64) -> f64 {
    let symbol = op.symbol(zeta).expect("direction has length N");
    let svd = sorted_svd(&symbol);
    let rank = svd.rank(scale);
    let basis = svd.u.columns(0, rank);
    (w - basis * (basis.transpose() * w)).norm()
}

fn from_angles(angles: &[f64]) -> Vec<f64> {
    let n = angles.len() + 1;
    let mut x = vec![0.0; n];
    let mut sin_prod = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        x[i] = sin_prod * a.cos();
        sin_prod *= a.sin();
    }
    x[n - 1] = sin_prod;
    x
}

fn to_angles(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut angles = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let tail: f64 = x[i + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        angles[i] = tail.atan2(x[i]);
    }
    if n >= 2 && x[n - 1] < 0.0 {
        angles[n - 2] = 2.0 * PI - angles[n - 2];
    }
    angles
}

fn golden_section(mut lo: f64, mut hi: f64, iterations: usize, mut f: impl FnMut(f64) -> f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
}

/// Approximate distance from `w` to the image cone `⋃_{|ζ|=1} im 𝔸(ζ)`.
///
/// Diagnostic only: evaluates at least `64 · sphere_grid_size` directions
/// (plus coordinate axes) and refines the best one by golden-section search
/// along each hyperspherical angle. The returned value is attained at an
/// evaluated direction, so it is an upper bound on the true distance.
pub fn image_cone_distance(
    op: &OperatorSpec,
    w: &DVector<f64>,
    sphere_grid_size: usize,
) -> Result<f64> {
    if w.len() != op.dim_f() {
        return Err(Error::InvalidDimension(format!(
            "vector has length {}, expected dimF = {}",
            w.len(),
            op.dim_f()
        )));
    }
    let n = op.space_dim();
    let scale = sorted_svd(&op.stacked_blocks()).max();
    let count = 64 * sphere_grid_size.max(1);
    let dist = |zeta: &[f64]| distance_to_image(op, w, zeta, scale);

    if n == 1 {
        return Ok(dist(&[1.0]).min(dist(&[-1.0])));
    }

    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(count + 2 * n);
    if n == 2 {
        dirs.extend((0..count).map(|j| {
            let t = 2.0 * PI * j as f64 / count as f64;
            vec![t.cos(), t.sin()]
        }));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        dirs.extend((0..count).map(|_| random_unit(&mut rng, n)));
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            dirs.push(d);
        }
    }

    let (mut best, mut best_dir) = (f64::INFINITY, dirs[0].clone());
    for d in &dirs {
        let v = dist(d);
        if v < best {
            best = v;
            best_dir = d.clone();
        }
    }
    if best == 0.0 {
        return Ok(0.0);
    }

    let bracket = 2.0 * PI / (count as f64).powf(1.0 / (n as f64 - 1.0));
    let mut angles = to_angles(&best_dir);
    for _sweep in 0..3 {
        for a in 0..angles.len() {
            let centre = angles[a];
            let mut local_best = (best, centre);
            golden_section(centre - bracket, centre + bracket, 60, |t| {
                let mut trial = angles.clone();
                trial[a] = t;
                let v = dist(&from_angles(&trial));
                if v < local_best.0 {
                    local_best = (v, t);
                }
                v
            });
            best = local_best.0;
            angles[a] = local_best.1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn axis_only_op() -> OperatorSpec {
        // A₁ = (1,0)ᵀ, A₂ = 0, E = ℝ, F = ℝ².
        OperatorSpec::first_order(vec![
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::zeros(2, 1),
        ])
        .unwrap()
    }

    fn curl_star_2d() -> OperatorSpec {
        OperatorSpec::first_order(vec![
            DMatrix::from_column_slice(2, 1, &[0.0, -1.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        ])
        .unwrap()
    }

    fn laplacian_symbol_2d() -> OperatorSpec {
        OperatorSpec::new(
            2,
            1,
            1,
            2,
            vec![
                (MultiIndex(vec![2, 0]), DMatrix::from_element(1, 1, 1.0)),
                (MultiIndex(vec![0, 2]), DMatrix::from_element(1, 1, 1.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_malformed_specs() {
        let bad_shape = OperatorSpec::new(
            1,
            1,
            1,
            1,
            vec![(MultiIndex(vec![1]), DMatrix::zeros(2, 1))],
        );
        assert!(matches!(bad_shape, Err(Error::InvalidOperator(_))));
        let bad_modulus = OperatorSpec::new(
            2,
            1,
            1,
            1,
            vec![(MultiIndex(vec![1, 1]), DMatrix::from_element(1, 1, 1.0))],
        );
        assert!(matches!(bad_modulus, Err(Error::InvalidOperator(_))));
        let all_zero = OperatorSpec::first_order(vec![DMatrix::zeros(1, 1)]);
        assert!(matches!(all_zero, Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn symbol_examples() {
        let grad = OperatorSpec::gradient(2, 1).unwrap();
        assert_eq!(grad.symbol(&[3.0, 4.0]).unwrap().as_slice(), &[3.0, 4.0]);
        assert_eq!(
            curl_star_2d().symbol(&[1.0, 0.0]).unwrap().as_slice(),
            &[0.0, -1.0]
        );
        assert_eq!(
            laplacian_symbol_2d().symbol(&[3.0, 4.0]).unwrap()[(0, 0)],
            25.0
        );
        assert!(matches!(
            grad.symbol(&[1.0]),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn essential_range_of_axis_operator_is_one_dimensional() {
        let basis = essential_range(&axis_only_op());
        assert_eq!(basis.ncols(), 1);
        assert_abs_diff_eq!(basis[(0, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(basis[(1, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lifted_map_examples() {
        let grad = lifted_map(&OperatorSpec::gradient(2, 1).unwrap()).unwrap();
        assert_eq!(grad.matrix_a, DMatrix::identity(2, 2));
        assert_abs_diff_eq!(grad.sigma_min, 1.0, epsilon = 1e-15);

        let div = OperatorSpec::first_order(vec![
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        ])
        .unwrap();
        let lm = lifted_map(&div).unwrap();
        assert_eq!(lm.matrix_a.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let expected = [0.5, 0.0, 0.0, 0.5];
        for (got, want) in lm.pseudo_inverse.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        let curl = lifted_map(&curl_star_2d()).unwrap();
        assert_eq!(
            curl.matrix_a,
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        );
        let want = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((&curl.pseudo_inverse - want).norm() < 1e-15);
    }

    #[test]
    fn second_order_lift_matches_hand_solution() {
        let lm = lifted_map(&laplacian_symbol_2d()).unwrap();
        let want = [1.0, 0.0, 1.0];
        for (got, w) in lm.matrix_a.iter().zip(want) {
            assert_abs_diff_eq!(*got, w, epsilon = 1e-12);
        }
        // fresh decomposable
        let xi = [0.3, -1.7];
        let got = &lm.matrix_a * lift_decomposable(&DVector::from_element(1, 2.0), &xi, 2);
        assert_abs_diff_eq!(got[0], 2.0 * (0.09 + 2.89), epsilon = 1e-12);
    }

    #[test]
    fn second_order_lift_agrees_with_stacked_blocks() {
        // In the orthonormal symmetric basis the lifted map column for α is
        // A_α / sqrt(k!/α!), so the sampled solve has a closed-form oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let basis = symmetric_basis(3, 2);
        let coeffs: Vec<_> = basis
            .iter()
            .map(|a| {
                (
                    a.clone(),
                    DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let op = OperatorSpec::new(3, 2, 2, 2, coeffs.clone()).unwrap();
        let lm = lifted_map(&op).unwrap();
        for (s, (alpha, block)) in coeffs.iter().enumerate() {
            let want = block / alpha.multinomial().sqrt();
            let got = lm.matrix_a.view((0, 2 * s), (2, 2));
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn pseudo_inverse_of_zero_is_an_error() {
        assert!(matches!(
            pseudo_inverse(&DMatrix::zeros(2, 3)),
            Err(Error::ZeroOperator)
        ));
    }

    #[test]
    fn bullet_product_examples() {
        let p = FullTensor::decomposable(&[1.0], &[1.0, 2.0], 2);
        let got = bullet_product(&p, &[1.0, 0.0], 2).unwrap();
        assert_eq!(got.as_slice(), &[1.0, 2.0]);
        let zero = bullet_product(&p, &[0.0, 0.0], 2).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let first = FullTensor {
            dim_e: 2,
            space_dim: 2,
            order: 1,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let got = bullet_product(&first, &[9.0, -9.0], 1).unwrap();
        assert_eq!(got, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(bullet_product(&first, &[1.0], 1).is_err());
    }

    #[test]
    fn constant_rank_examples() {
        let grad = constant_rank_report(&OperatorSpec::gradient(2, 1).unwrap(), 20, 1);
        assert!(grad.is_constant_rank);
        assert_eq!(grad.observed_ranks, BTreeSet::from([1]));

        let degenerate = constant_rank_report(&axis_only_op(), 20, 1);
        assert!(!degenerate.is_constant_rank);
        assert_eq!(degenerate.observed_ranks, BTreeSet::from([0, 1]));

        let curl = constant_rank_report(&curl_star_2d(), 20, 1);
        assert_eq!(curl.observed_ranks, BTreeSet::from([1]));
    }

    #[test]
    fn image_cone_distance_examples() {
        let grad = OperatorSpec::gradient(2, 1).unwrap();
        let w = DVector::from_vec(vec![0.3, -2.0]);
        assert_abs_diff_eq!(
            image_cone_distance(&grad, &w, 1).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let op = axis_only_op();
        let off = DVector::from_vec(vec![0.0, 1.0]);
        assert_abs_diff_eq!(
            image_cone_distance(&op, &off, 1).unwrap(),
            1.0,
            epsilon = 1e-6
        );
        let on = DVector::from_vec(vec![2.0, 0.0]);
        assert_abs_diff_eq!(
            image_cone_distance(&op, &on, 1).unwrap(),
            0.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn cone_refinement_finds_off_grid_minimum() {
        // 𝔸(ζ) = ζ (as a column), F = ℝ², w = (cos t, sin t)·2 for t off the grid:
        // the cone is all lines through 0, distance 0 needs refinement.
        let op = OperatorSpec::gradient(2, 1).unwrap();
        let t = 0.123_456_789f64;
        let w = DVector::from_vec(vec![2.0 * t.cos(), 2.0 * t.sin()]);
        assert!(image_cone_distance(&op, &w, 1).unwrap() < 1e-6);

        // Non-surjective rank-one symbol in N = 3: 𝔸(ζ) = (ζ₁, ζ₂, 0)ᵀ ⊂ ℝ³.
        let op3 = OperatorSpec::first_order(vec![
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
            DMatrix::zeros(3, 1),
        ])
        .unwrap();
        let w = DVector::from_vec(vec![0.6, 0.8, 0.5]);
        assert_abs_diff_eq!(
            image_cone_distance(&op3, &w, 2).unwrap(),
            0.5,
            epsilon = 1e-6
        );
    }

    #[test]
    fn angle_round_trip() {
        let x = [0.2, -0.5, 0.1, -0.3];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let back = from_angles(&to_angles(&x));
        for (a, b) in x.iter().zip(back) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }
}
