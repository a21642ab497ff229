//! The sawtooth construction.
//!
//! On the unit cube split into `r^N` cells of side `h = 1/r`, a cellwise
//! lifted gradient `P_q` (a `dimE × N` matrix) is realized by
//!
//! ```text
//! u(x) = b_q + Σ_i P_q[:, i] · ((x_i − origin_i) mod δ),   δ = h / m,
//! ```
//!
//! i.e. one sawtooth per axis, each with `m` teeth per cell. The weak gradient
//! of `u` off its jump set is exactly `P_q`, and every jump face is an
//! axis-aligned box, so the jump part of `Du` is known in closed form:
//!
//! - internal slab faces carry the constant jump `−δ · P_q[:, i]`;
//! - faces between neighbouring cells carry a jump that is affine on each
//!   `δ`-sub-box of the face (the tangential sawtooth slopes of the two cells
//!   differ), so these faces are split into sub-faces and the jump is stored
//!   as an [`AffineValue`].
//!
//! Faces with identically zero jump are not recorded. Faces on `∂Ω` are
//! excluded since all measures live on the open cube.

mod multilevel;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{LiftedMap, OperatorSpec};
use crate::quadrature::BoxRule;
use crate::{Error, Result};

pub use multilevel::{multilevel_construct, FieldSampler, FnSampler, Multilevel};

/// Default slab count per cell.
pub const DEFAULT_SLAB_COUNT: usize = 4;

/// Relative tolerance for essential-range membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Points within this distance of a lattice plane count as on the plane.
pub const PLANE_TOL: f64 = 1e-12;

/// Gauss order used for the mass of faces whose jump is not constant.
const FACE_MASS_ORDER: usize = 8;

/// Uniform grid of the open unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    space_dim: usize,
    cells_per_axis: usize,
}

impl Grid {
    pub fn new(space_dim: usize, cells_per_axis: usize) -> Result<Self> {
        if space_dim == 0 || cells_per_axis == 0 {
            return Err(Error::InvalidDimension(format!(
                "grid needs N ≥ 1 and r ≥ 1 (got N = {space_dim}, r = {cells_per_axis})"
            )));
        }
        Ok(Self {
            space_dim,
            cells_per_axis,
        })
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.space_dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.space_dim as i32)
    }

    /// Row-major cell coordinates (axis 0 varies slowest).
    pub fn cell_coords(&self, cell: usize) -> Vec<usize> {
        let r = self.cells_per_axis;
        let mut coords = vec![0; self.space_dim];
        let mut rest = cell;
        for axis in (0..self.space_dim).rev() {
            coords[axis] = rest % r;
            rest /= r;
        }
        coords
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.cells_per_axis + c)
    }

    pub fn cell_origin(&self, cell: usize) -> Vec<f64> {
        let r = self.cells_per_axis as f64;
        self.cell_coords(cell)
            .into_iter()
            .map(|c| c as f64 / r)
            .collect()
    }
}

/// `Σ_q h^N |f_q|`.
pub fn field_l1_norm(grid: &Grid, field: &[DVector<f64>]) -> f64 {
    grid.cell_volume() * field.iter().map(|f| f.norm()).sum::<f64>()
}

/// A vector-valued affine function on a face: `value` at the face centroid
/// and one slope column per axis (the normal column is zero).
#[derive(Clone, Debug, PartialEq)]
pub struct AffineValue {
    pub value: DVector<f64>,
    pub slopes: DMatrix<f64>,
}

impl AffineValue {
    pub fn constant(value: DVector<f64>, space_dim: usize) -> Self {
        let dim = value.len();
        Self {
            value,
            slopes: DMatrix::zeros(dim, space_dim),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.slopes.iter().all(|&s| s == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.is_constant() && self.value.iter().all(|&v| v == 0.0)
    }

    pub fn at(&self, centroid: &[f64], y: &[f64]) -> DVector<f64> {
        let mut out = self.value.clone();
        for (j, (&c, &yj)) in centroid.iter().zip(y).enumerate() {
            let d = yj - c;
            if d != 0.0 {
                out.axpy(d, &self.slopes.column(j), 1.0);
            }
        }
        out
    }

    /// Image under a linear map.
    pub fn mapped(&self, map: &DMatrix<f64>) -> Self {
        Self {
            value: map * &self.value,
            slopes: map * &self.slopes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FaceKind {
    /// Slab interface inside a cell.
    Internal,
    /// Interface between two neighbouring cells.
    CellBoundary,
}

impl FaceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaceKind::Internal => "Internal",
            FaceKind::CellBoundary => "CellBoundary",
        }
    }
}

/// One axis-aligned jump face with normal `+e_axis`. The jump is
/// `u⁺ − u⁻`, with `u⁺` the trace from the side of larger `x_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpFace {
    pub cell_index: usize,
    pub axis: usize,
    pub plane_offset: f64,
    /// Lower corner; `lower[axis] == plane_offset`.
    pub lower: Vec<f64>,
    /// Upper corner; `upper[axis] == plane_offset`.
    pub upper: Vec<f64>,
    /// `(N−1)`-volume of the face.
    pub area: f64,
    pub kind: FaceKind,
    pub jump: AffineValue,
}

impl JumpFace {
    pub fn centroid(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn normal(&self) -> Vec<f64> {
        let mut nu = vec![0.0; self.lower.len()];
        nu[self.axis] = 1.0;
        nu
    }

    pub fn jump_at(&self, y: &[f64]) -> DVector<f64> {
        self.jump.at(&self.centroid(), y)
    }

    /// `∫_face |g| d𝓗^{N−1}` for an affine density `g` living on this face.
    pub fn integrate_norm(&self, density: &AffineValue) -> f64 {
        if density.is_constant() {
            return self.area * density.value.norm();
        }
        let centroid = self.centroid();
        BoxRule::new(&self.lower, &self.upper, FACE_MASS_ORDER)
            .expect("valid face box")
            .integrate(|y| density.at(&centroid, y).norm())
    }

    /// `∫_face |u⁺ − u⁻| d𝓗^{N−1}`.
    pub fn mass(&self) -> f64 {
        self.integrate_norm(&self.jump)
    }
}

/// Per-cell data of the sawtooth.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Weak gradient off the jump set, `dimE × N`.
    pub gradient: DMatrix<f64>,
    /// Value at the lower corner of every slab box.
    pub offset: DVector<f64>,
    pub origin: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Trace from the side of larger coordinates.
    Plus,
    /// Trace from the side of smaller coordinates.
    Minus,
}

#[derive(Clone, Copy)]
enum AxisPos {
    Inside { slab: usize, t: f64 },
    OnPlane(usize),
}

/// A piecewise-affine special BV function built from per-cell gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct SbvFunction {
    grid: Grid,
    dim_e: usize,
    slab_count: usize,
    cells: Vec<Cell>,
}

impl SbvFunction {
    /// General constructor: per-cell gradients and offsets.
    pub fn from_parts(
        grid: Grid,
        slab_count: usize,
        gradients: Vec<DMatrix<f64>>,
        offsets: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if slab_count == 0 {
            return Err(Error::InvalidDimension(
                "slab count must be at least 1".into(),
            ));
        }
        if gradients.len() != grid.cell_count() || offsets.len() != grid.cell_count() {
            return Err(Error::InvalidDimension(format!(
                "{} gradients and {} offsets for {} cells",
                gradients.len(),
                offsets.len(),
                grid.cell_count()
            )));
        }
        let dim_e = gradients.first().map_or(0, |g| g.nrows());
        for (g, b) in gradients.iter().zip(&offsets) {
            if g.shape() != (dim_e, grid.space_dim()) || b.len() != dim_e {
                return Err(Error::InvalidDimension(format!(
                    "cell gradient {:?} / offset {} inconsistent with dimE = {dim_e}, N = {}",
                    g.shape(),
                    b.len(),
                    grid.space_dim()
                )));
            }
        }
        let cells = gradients
            .into_iter()
            .zip(offsets)
            .enumerate()
            .map(|(q, (gradient, offset))| Cell {
                gradient,
                offset,
                origin: grid.cell_origin(q),
            })
            .collect();
        Ok(Self {
            grid,
            dim_e,
            slab_count,
            cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn slab_count(&self) -> usize {
        self.slab_count
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Slab width `δ = h / m`.
    pub fn delta(&self) -> f64 {
        self.grid.h() / self.slab_count as f64
    }

    fn total_slabs(&self) -> usize {
        self.grid.cells_per_axis() * self.slab_count
    }

    /// `δ·√N·max_q ‖P_q‖_F + max_q |b_q|`.
    pub fn sup_bound(&self) -> f64 {
        let grad = self
            .cells
            .iter()
            .map(|c| c.gradient.norm())
            .fold(0.0, f64::max);
        let offset = self
            .cells
            .iter()
            .map(|c| c.offset.norm())
            .fold(0.0, f64::max);
        self.delta() * (self.grid.space_dim() as f64).sqrt() * grad + offset
    }

    fn locate(&self, x: f64) -> AxisPos {
        let total = self.total_slabs();
        let scaled = x * total as f64;
        let nearest = scaled.round();
        if (x - nearest / total as f64).abs() <= PLANE_TOL {
            return AxisPos::OnPlane(nearest as usize);
        }
        let slab = (scaled.floor().max(0.0) as usize).min(total - 1);
        AxisPos::Inside {
            slab,
            t: x - slab as f64 / total as f64,
        }
    }

    fn resolve(&self, pos: AxisPos, side: Side) -> (usize, f64) {
        match pos {
            AxisPos::Inside { slab, t } => (slab, t),
            AxisPos::OnPlane(k) => {
                let total = self.total_slabs();
                let plus = k < total && (side == Side::Plus || k == 0);
                if plus {
                    (k, 0.0)
                } else {
                    (k - 1, self.delta())
                }
            }
        }
    }

    fn value_at(&self, slabs: &[(usize, f64)]) -> DVector<f64> {
        let coords: Vec<usize> = slabs.iter().map(|(s, _)| s / self.slab_count).collect();
        let cell = &self.cells[self.grid.cell_index(&coords)];
        let mut out = cell.offset.clone();
        for (i, &(_, t)) in slabs.iter().enumerate() {
            out.axpy(t, &cell.gradient.column(i), 1.0);
        }
        out
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.space_dim() {
            return Err(Error::InvalidDimension(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.grid.space_dim()
            )));
        }
        if x.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }

    /// Closed-form value of `u` at `x`. Points on a lattice plane where the
    /// two one-sided traces differ are rejected with [`Error::OnJumpSet`].
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let positions: Vec<AxisPos> = x.iter().map(|&c| self.locate(c)).collect();
        let minus: Vec<(usize, f64)> = positions
            .iter()
            .map(|&p| self.resolve(p, Side::Minus))
            .collect();
        let value = self.value_at(&minus);
        for (axis, &pos) in positions.iter().enumerate() {
            if let AxisPos::OnPlane(_) = pos {
                let mut flipped = minus.clone();
                flipped[axis] = self.resolve(pos, Side::Plus);
                if self.value_at(&flipped) != value {
                    return Err(Error::OnJumpSet {
                        axis,
                        coordinate: x[axis],
                    });
                }
            }
        }
        Ok(value)
    }

    /// One-sided trace: on every lattice plane through `x`, the limit from
    /// the given side; off the planes this is [`evaluate`](Self::evaluate).
    pub fn evaluate_trace(&self, x: &[f64], side: Side) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let slabs: Vec<(usize, f64)> = x
            .iter()
            .map(|&c| self.resolve(self.locate(c), side))
            .collect();
        Ok(self.value_at(&slabs))
    }

    /// The exact jump set, in canonical order: cell-major, axis-minor; within
    /// a (cell, axis) pair, internal faces by offset, then the sub-faces of
    /// the upper cell boundary in row-major tangential order.
    pub fn jump_ledger(&self) -> Vec<JumpFace> {
        let n = self.grid.space_dim();
        let r = self.grid.cells_per_axis();
        let m = self.slab_count;
        let total = self.total_slabs() as f64;
        let h = self.grid.h();
        let delta = self.delta();
        let mut faces = Vec::new();

        for (q, cell) in self.cells.iter().enumerate() {
            let coords = self.grid.cell_coords(q);
            let upper_corner: Vec<f64> =
                coords.iter().map(|&c| (c + 1) as f64 / r as f64).collect();
            for axis in 0..n {
                let column = cell.gradient.column(axis);
                if column.iter().any(|&v| v != 0.0) {
                    let jump = AffineValue::constant(-delta * column.into_owned(), n);
                    for s in 1..m {
                        let plane = (coords[axis] * m + s) as f64 / total;
                        let mut lower = cell.origin.clone();
                        let mut upper = upper_corner.clone();
                        lower[axis] = plane;
                        upper[axis] = plane;
                        faces.push(JumpFace {
                            cell_index: q,
                            axis,
                            plane_offset: plane,
                            lower,
                            upper,
                            area: h.powi(n as i32 - 1),
                            kind: FaceKind::Internal,
                            jump: jump.clone(),
                        });
                    }
                }

                if coords[axis] + 1 < r {
                    self.push_cell_boundary(q, axis, &coords, &upper_corner, &mut faces);
                }
            }
        }
        faces
    }

    fn push_cell_boundary(
        &self,
        q: usize,
        axis: usize,
        coords: &[usize],
        upper_corner: &[f64],
        faces: &mut Vec<JumpFace>,
    ) {
        let n = self.grid.space_dim();
        let m = self.slab_count;
        let delta = self.delta();
        let cell = &self.cells[q];
        let mut neighbour_coords = coords.to_vec();
        neighbour_coords[axis] += 1;
        let neighbour = &self.cells[self.grid.cell_index(&neighbour_coords)];
        let plane = upper_corner[axis];

        // jump(y) = (b' − b) − δ P[:, axis] + Σ_{j≠axis} (P' − P)[:, j] t_j(y)
        let mut slopes = &neighbour.gradient - &cell.gradient;
        slopes.column_mut(axis).fill(0.0);
        let base = &neighbour.offset - &cell.offset - delta * cell.gradient.column(axis);

        if slopes.iter().all(|&v| v == 0.0) {
            if base.iter().all(|&v| v == 0.0) {
                return;
            }
            let mut lower = cell.origin.clone();
            let mut upper = upper_corner.to_vec();
            lower[axis] = plane;
            upper[axis] = plane;
            faces.push(JumpFace {
                cell_index: q,
                axis,
                plane_offset: plane,
                lower,
                upper,
                area: self.grid.h().powi(n as i32 - 1),
                kind: FaceKind::CellBoundary,
                jump: AffineValue::constant(base, n),
            });
            return;
        }

        let tangential: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
        let value = &base + &slopes * DVector::from_element(n, 0.5 * delta);
        let total = self.total_slabs() as f64;
        let sub_faces = m.pow(tangential.len() as u32);
        for flat in 0..sub_faces {
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            lower[axis] = plane;
            upper[axis] = plane;
            let mut rest = flat;
            for &j in tangential.iter().rev() {
                let s = rest % m;
                rest /= m;
                let k = coords[j] * m + s;
                lower[j] = k as f64 / total;
                upper[j] = (k + 1) as f64 / total;
            }
            faces.push(JumpFace {
                cell_index: q,
                axis,
                plane_offset: plane,
                lower,
                upper,
                area: delta.powi(tangential.len() as i32),
                kind: FaceKind::CellBoundary,
                jump: AffineValue {
                    value: value.clone(),
                    slopes: slopes.clone(),
                },
            });
        }
    }
}

/// Lifts a cellwise field through `A†`, returning one `dimE × N` matrix per
/// cell. Values farther than `tol·(1 + |f_q|)` from `𝐅` are an error unless
/// `project` is set, in which case they are orthogonally projected first.
pub fn validate_and_lift(
    field: &[DVector<f64>],
    lifted: &LiftedMap,
    tol: f64,
    project: bool,
) -> Result<Vec<DMatrix<f64>>> {
    if lifted.order != 1 {
        return Err(Error::UnsupportedOrder(lifted.order));
    }
    let mut worst: Option<(usize, f64, f64)> = None;
    let mut violations = 0;
    let mut out = Vec::with_capacity(field.len());
    for (q, f) in field.iter().enumerate() {
        if f.len() != lifted.dim_f() {
            return Err(Error::InvalidDimension(format!(
                "cell {q} has {} components, expected dimF = {}",
                f.len(),
                lifted.dim_f()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension(format!(
                "cell {q} has non-finite values"
            )));
        }
        let projected = lifted.project(f);
        let distance = (f - &projected).norm();
        let relative = distance / (1.0 + f.norm());
        let source = if relative > tol {
            violations += 1;
            if worst.is_none_or(|(_, _, r)| relative > r) {
                worst = Some((q, distance, relative));
            }
            &projected
        } else {
            f
        };
        let p = lifted.lift(source);
        out.push(DMatrix::from_column_slice(
            lifted.dim_e,
            lifted.space_dim,
            p.as_slice(),
        ));
    }
    match worst {
        Some((cell, distance, _)) if !project => Err(Error::FieldNotInEssentialRange {
            cell,
            distance,
            violations,
        }),
        _ => Ok(out),
    }
}

/// The sawtooth realizing the lifted field `P` on `grid` with `m` slabs per
/// cell (zero offsets).
pub fn build_sawtooth(
    lifted_field: Vec<DMatrix<f64>>,
    grid: Grid,
    slab_count: usize,
) -> Result<SbvFunction> {
    let dim_e = lifted_field.first().map_or(0, |p| p.nrows());
    let offsets = vec![DVector::zeros(dim_e); lifted_field.len()];
    SbvFunction::from_parts(grid, slab_count, lifted_field, offsets)
}

/// The measure `𝒜u = (ac density)·𝓛_N + (jump density)·𝓗_{N−1}` of a
/// sawtooth, face by face.
#[derive(Clone, Debug)]
pub struct MeasureDecomposition {
    pub grid: Grid,
    pub slab_count: usize,
    pub dim_f: usize,
    /// `A[P_q]` per cell.
    pub ac_density: Vec<DVector<f64>>,
    pub faces: Vec<JumpFace>,
    /// `𝔸(ν)[u⁺ − u⁻]` per face (affine along the face).
    pub jump_density: Vec<AffineValue>,
    /// `Σ_q h^N ‖P_q‖_F`.
    pub ac_mass: f64,
    /// `Σ_faces ∫ |u⁺ − u⁻| d𝓗^{N−1}`.
    pub jump_mass: f64,
    pub total_variation_du: f64,
}

impl MeasureDecomposition {
    /// `Σ_faces ∫ |𝔸(ν)[u⁺ − u⁻]| d𝓗^{N−1}`.
    pub fn jump_density_mass(&self) -> f64 {
        self.faces
            .iter()
            .zip(&self.jump_density)
            .map(|(face, g)| face.integrate_norm(g))
            .sum()
    }
}

pub fn measure_decomposition(
    u: &SbvFunction,
    op: &OperatorSpec,
    lifted: &LiftedMap,
) -> Result<MeasureDecomposition> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    let n = u.grid().space_dim();
    if op.space_dim() != n || op.dim_e() != u.dim_e() || lifted.matrix_a.ncols() != u.dim_e() * n {
        return Err(Error::InvalidDimension(format!(
            "operator (N = {}, dimE = {}) does not match the function (N = {n}, dimE = {})",
            op.space_dim(),
            op.dim_e(),
            u.dim_e()
        )));
    }
    let blocks = op.axis_blocks()?;
    let ac_density = u
        .cells()
        .iter()
        .map(|c| lifted.apply(&DVector::from_column_slice(c.gradient.as_slice())))
        .collect();
    let faces = u.jump_ledger();
    let jump_density = faces
        .iter()
        .map(|face| face.jump.mapped(&blocks[face.axis]))
        .collect();
    let tv = total_variation_from_parts(u, &faces);
    Ok(MeasureDecomposition {
        grid: *u.grid(),
        slab_count: u.slab_count(),
        dim_f: op.dim_f(),
        ac_density,
        faces,
        jump_density,
        ac_mass: tv.ac_mass,
        jump_mass: tv.jump_mass,
        total_variation_du: tv.tv_du,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TotalVariation {
    pub tv_du: f64,
    pub ac_mass: f64,
    pub jump_mass: f64,
    /// `‖A†‖₂ · (1 + √N + 4N√N/m)`.
    pub bound_constant: f64,
}

fn total_variation_from_parts(u: &SbvFunction, faces: &[JumpFace]) -> TotalVariation {
    let ac_mass = u.grid().cell_volume() * u.cells().iter().map(|c| c.gradient.norm()).sum::<f64>();
    let jump_mass: f64 = faces.iter().map(JumpFace::mass).sum();
    TotalVariation {
        tv_du: ac_mass + jump_mass,
        ac_mass,
        jump_mass,
        bound_constant: f64::NAN,
    }
}

/// `C(N, m) = 1 + √N + 4N√N/m`, the grid part of the total-variation constant.
pub fn tv_grid_factor(space_dim: usize, slab_count: usize) -> f64 {
    let n = space_dim as f64;
    1.0 + n.sqrt() + 4.0 * n * n.sqrt() / slab_count as f64
}

pub fn total_variation(u: &SbvFunction, lifted: &LiftedMap) -> TotalVariation {
    let mut tv = total_variation_from_parts(u, &u.jump_ledger());
    tv.bound_constant = lifted.pinv_norm() * tv_grid_factor(u.grid().space_dim(), u.slab_count());
    tv
}

/// Everything produced by one run of the pipeline.
#[derive(Clone, Debug)]
pub struct Realization {
    pub lifted: LiftedMap,
    pub u: SbvFunction,
    pub decomposition: MeasureDecomposition,
    pub total_variation: TotalVariation,
    pub field_l1: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RealizeOptions {
    pub slab_count: usize,
    pub tol: f64,
    pub project: bool,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self {
            slab_count: DEFAULT_SLAB_COUNT,
            tol: MEMBERSHIP_TOL,
            project: false,
        }
    }
}

/// Lift, construct and decompose in one go.
pub fn realize(
    op: &OperatorSpec,
    field: &[DVector<f64>],
    grid: Grid,
    options: RealizeOptions,
) -> Result<Realization> {
    if op.space_dim() != grid.space_dim() {
        return Err(Error::InvalidDimension(format!(
            "operator acts on N = {}, grid has N = {}",
            op.space_dim(),
            grid.space_dim()
        )));
    }
    if field.len() != grid.cell_count() {
        return Err(Error::InvalidDimension(format!(
            "field has {} cells, grid has {}",
            field.len(),
            grid.cell_count()
        )));
    }
    let lifted = crate::algebra::lifted_map(op)?;
    let lifted_field = validate_and_lift(field, &lifted, options.tol, options.project)?;
    let u = build_sawtooth(lifted_field, grid, options.slab_count)?;
    let decomposition = measure_decomposition(&u, op, &lifted)?;
    let total_variation = TotalVariation {
        tv_du: decomposition.total_variation_du,
        ac_mass: decomposition.ac_mass,
        jump_mass: decomposition.jump_mass,
        bound_constant: lifted.pinv_norm() * tv_grid_factor(grid.space_dim(), options.slab_count),
    };
    Ok(Realization {
        field_l1: field_l1_norm(&grid, field),
        lifted,
        u,
        decomposition,
        total_variation,
    })
}
