//! Boundary completion of normal currents and solenoidal completion of
//! vector fields, both as instances of the generic pipeline.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{binomial, OperatorSpec};
use crate::construct::{
    realize, AffineValue, Grid, JumpFace, MeasureDecomposition, Realization, RealizeOptions,
    SbvFunction, MEMBERSHIP_TOL,
};
use crate::exterior::{boundary_operator_spec, MultiVector};
use crate::quadrature::UnitRule;
use crate::verify::{
    boundary_squared_check, distributional_check, divergence_check, make_test_suite,
    VerificationReport,
};
use crate::{Error, Result};

/// Gauss order per slab sub-box for `L¹` norms of piecewise-affine fields.
pub const MASS_QUAD_ORDER: usize = 8;

/// Index pairs `(a, b)`, `a < b`, of the skew basis `E_ab − E_ba` in
/// lexicographic order.
pub fn skew_pairs(space_dim: usize) -> Vec<(usize, usize)> {
    (0..space_dim)
        .flat_map(|a| (a + 1..space_dim).map(move |b| (a, b)))
        .collect()
}

/// The skew matrix with the given coordinates in the [`skew_pairs`] basis.
pub fn skew_matrix(space_dim: usize, coords: &[f64]) -> Result<DMatrix<f64>> {
    let pairs = skew_pairs(space_dim);
    if coords.len() != pairs.len() {
        return Err(Error::InvalidDimension(format!(
            "{} skew coordinates for N = {space_dim}, expected {}",
            coords.len(),
            pairs.len()
        )));
    }
    let mut v = DMatrix::zeros(space_dim, space_dim);
    for (&(a, b), &c) in pairs.iter().zip(coords) {
        v[(a, b)] = c;
        v[(b, a)] = -c;
    }
    Ok(v)
}

/// Row divergence `(curl* V)_i = Σ_j ∂_j V_ij` on skew matrix fields, in the
/// [`skew_pairs`] coordinates. Its symbol is `V ↦ Vξ`.
pub fn curl_star_spec(space_dim: usize) -> Result<OperatorSpec> {
    if space_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "curl* needs N ≥ 2, got N = {space_dim}"
        )));
    }
    let pairs = skew_pairs(space_dim);
    let blocks = (0..space_dim)
        .map(|j| {
            let mut block = DMatrix::zeros(space_dim, pairs.len());
            for (col, &(a, b)) in pairs.iter().enumerate() {
                if j == b {
                    block[(a, col)] += 1.0;
                }
                if j == a {
                    block[(b, col)] -= 1.0;
                }
            }
            block
        })
        .collect();
    OperatorSpec::first_order(blocks)
}

/// `∫_Ω |u| dx` by Gauss quadrature on every slab sub-box.
pub fn function_l1_norm(u: &SbvFunction) -> Result<f64> {
    let n = u.grid().space_dim();
    let m = u.slab_count();
    let delta = u.delta();
    let unit = UnitRule::new(n, MASS_QUAD_ORDER)?;
    let scale = delta.powi(n as i32);
    let sub_boxes = m.pow(n as u32);
    // Every slab box of a cell carries the same values b + P·t, t ∈ [0, δ]^N.
    let mut total = 0.0;
    for cell in u.cells() {
        if cell.gradient.iter().all(|&v| v == 0.0) && cell.offset.iter().all(|&v| v == 0.0) {
            continue;
        }
        let per_box: f64 = unit
            .points
            .iter()
            .zip(&unit.weights)
            .map(|(p, w)| {
                let mut value = cell.offset.clone();
                for (i, &t) in p.iter().enumerate() {
                    value.axpy(delta * t, &cell.gradient.column(i), 1.0);
                }
                w * value.norm()
            })
            .sum();
        total += per_box * scale * sub_boxes as f64;
    }
    Ok(total)
}

/// An `(m+1)`-current `T` with `𝓛_N`-density given by a multivector BV field,
/// built so that the absolutely continuous part of `∂T` is a prescribed `S`.
#[derive(Clone, Debug)]
pub struct CurrentField {
    /// Degree `m` of the prescribed field `S`; `T` has degree `m + 1`.
    pub boundary_degree: usize,
    pub operator: OperatorSpec,
    pub realization: Realization,
    /// `M(T) = ∫ |T| dx`.
    pub mass: f64,
    /// `‖A†‖₂·√N`; bounds `M(T) ≤ mass_constant · ‖S‖_{L¹}`.
    pub mass_constant: f64,
}

impl CurrentField {
    pub fn degree(&self) -> usize {
        self.boundary_degree + 1
    }

    pub fn grid(&self) -> &Grid {
        self.realization.u.grid()
    }

    /// `T` at `x` as an `(m+1)`-vector.
    pub fn value(&self, x: &[f64]) -> Result<MultiVector> {
        let v = self.realization.u.evaluate(x)?;
        MultiVector::new(
            self.grid().space_dim(),
            self.degree(),
            v.as_slice().to_vec(),
        )
    }

    /// The measure `∂T`.
    pub fn boundary(&self) -> &MeasureDecomposition {
        &self.realization.decomposition
    }

    pub fn ledger(&self) -> &[JumpFace] {
        &self.realization.decomposition.faces
    }
}

/// Completes a cellwise `m`-vector field `S` to an `(m+1)`-current `T` with
/// `∂T = S·𝓛_N + (T⁺ − T⁻)⌟ν·𝓗_{N−1}`.
pub fn complete_current(
    s: &[MultiVector],
    grid: Grid,
    degree: usize,
    slab_count: usize,
) -> Result<CurrentField> {
    let n = grid.space_dim();
    let operator = boundary_operator_spec(n, degree)?;
    let field = s
        .iter()
        .enumerate()
        .map(|(q, mv)| {
            if mv.space_dim() != n || mv.degree() != degree {
                return Err(Error::InvalidDimension(format!(
                    "cell {q} holds a degree-{} multivector in N = {}, expected degree {degree} in N = {n}",
                    mv.degree(),
                    mv.space_dim()
                )));
            }
            Ok(DVector::from_column_slice(mv.coeffs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let realization = realize(
        &operator,
        &field,
        grid,
        RealizeOptions {
            slab_count,
            tol: MEMBERSHIP_TOL,
            project: false,
        },
    )?;
    let mass = function_l1_norm(&realization.u)?;
    let mass_constant = realization.lifted.pinv_norm() * (n as f64).sqrt();
    Ok(CurrentField {
        boundary_degree: degree,
        operator,
        realization,
        mass,
        mass_constant,
    })
}

/// `M(T)` for a current with `L¹` density.
pub fn current_mass(cf: &CurrentField) -> f64 {
    cf.mass
}

/// Rectifiable part of `∂T`: faces `J`, normals (the face axes) and the
/// densities `g = (T⁺ − T⁻)⌟ν`, with the distributional check that
/// certifies them.
#[derive(Clone, Debug)]
pub struct RectifiableClosure {
    pub faces: Vec<JumpFace>,
    pub densities: Vec<AffineValue>,
    pub check: VerificationReport,
}

/// For `m ≥ 1` the check is that `∂T` has vanishing boundary; for `m = 0`
/// (where that is vacuous) it is the full identity for `∂T`.
pub fn rectifiable_closure(
    cf: &CurrentField,
    seed: u64,
    count: usize,
    quad_order: usize,
) -> Result<RectifiableClosure> {
    let n = cf.grid().space_dim();
    let m = cf.boundary_degree;
    let med = cf.boundary();
    let check = if m >= 1 {
        let suite = make_test_suite(n, seed, count, binomial(n, m - 1));
        boundary_squared_check(med, m, &suite, quad_order)?
    } else {
        let suite = make_test_suite(n, seed, count, 1);
        distributional_check(&cf.realization.u, &cf.operator, med, &suite, quad_order)?
    };
    Ok(RectifiableClosure {
        faces: med.faces.clone(),
        densities: med.jump_density.clone(),
        check,
    })
}

/// A skew BV field `V` whose row divergence has absolutely continuous part
/// `f`, with the tangential jump density `g` on the rectifiable set `R`.
#[derive(Clone, Debug)]
pub struct SolenoidalCompletion {
    pub operator: OperatorSpec,
    pub realization: Realization,
    /// `max |g·ν|` over all faces (value and slopes).
    pub tangency_residual: f64,
    /// `Σ_faces ∫ |g| d𝓗^{N−1}`.
    pub jump_density_mass: f64,
    /// `‖A†‖₂·(1 + √N + 4N√N/m)·‖f‖_{L¹}`.
    pub jump_mass_bound: f64,
}

impl SolenoidalCompletion {
    /// `V(x)` as an `N × N` skew matrix.
    pub fn skew_field(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let coords = self.realization.u.evaluate(x)?;
        skew_matrix(self.operator.space_dim(), coords.as_slice())
    }

    /// The faces making up `R`.
    pub fn rectifiable_set(&self) -> &[JumpFace] {
        &self.realization.decomposition.faces
    }

    /// The density `g` per face.
    pub fn tangential_density(&self) -> &[AffineValue] {
        &self.realization.decomposition.jump_density
    }

    pub fn divergence_check(
        &self,
        seed: u64,
        count: usize,
        quad_order: usize,
    ) -> Result<VerificationReport> {
        let suite = make_test_suite(self.operator.space_dim(), seed, count, 1);
        divergence_check(&self.realization.decomposition, &suite, quad_order)
    }
}

pub fn solenoidal_completion(
    f: &[DVector<f64>],
    grid: Grid,
    slab_count: usize,
) -> Result<SolenoidalCompletion> {
    let operator = curl_star_spec(grid.space_dim())?;
    let realization = realize(
        &operator,
        f,
        grid,
        RealizeOptions {
            slab_count,
            tol: MEMBERSHIP_TOL,
            project: false,
        },
    )?;
    let med = &realization.decomposition;
    let tangency_residual = med
        .faces
        .iter()
        .zip(&med.jump_density)
        .map(|(face, g)| {
            let slope = g.slopes.row(face.axis).amax();
            g.value[face.axis].abs().max(slope)
        })
        .fold(0.0, f64::max);
    let jump_density_mass = med.jump_density_mass();
    let jump_mass_bound = realization.total_variation.bound_constant * realization.field_l1;
    Ok(SolenoidalCompletion {
        operator,
        realization,
        tangency_residual,
        jump_density_mass,
        jump_mass_bound,
    })
}

/// Summary of an application run, for reports.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AppSummary {
    pub face_count: usize,
    pub field_l1: f64,
    pub tv_du: f64,
    pub tv_bound: f64,
}

impl From<&Realization> for AppSummary {
    fn from(r: &Realization) -> Self {
        Self {
            face_count: r.decomposition.faces.len(),
            field_l1: r.field_l1,
            tv_du: r.total_variation.tv_du,
            tv_bound: r.total_variation.bound_constant * r.field_l1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn skew_pairs_are_lexicographic() {
        assert_eq!(skew_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        let v = skew_matrix(3, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v, -v.transpose());
        assert_eq!(v[(1, 2)], 3.0);
    }

    #[test]
    fn curl_star_symbol_is_v_xi() {
        for n in 2..=4 {
            let op = curl_star_spec(n).unwrap();
            let coords: Vec<f64> = (0..n * (n - 1) / 2).map(|i| i as f64 + 0.5).collect();
            let v = skew_matrix(n, &coords).unwrap();
            let xi: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
            let got = op.symbol(&xi).unwrap() * DVector::from_vec(coords.clone());
            let want = &v * DVector::from_vec(xi);
            assert!((got - want).norm() < 1e-14);
        }
        assert!(matches!(curl_star_spec(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn solenoidal_hand_case() {
        let grid = Grid::new(2, 1).unwrap();
        let f = vec![DVector::from_vec(vec![1.0, 0.0])];
        let sc = solenoidal_completion(&f, grid, 4).unwrap();
        let p = &sc.realization.u.cells()[0].gradient;
        assert_abs_diff_eq!(p[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[(0, 1)], 1.0, epsilon = 1e-15);
        for (face, g) in sc.rectifiable_set().iter().zip(sc.tangential_density()) {
            assert_eq!(face.axis, 1);
            assert_abs_diff_eq!(g.value[0], -0.25, epsilon = 1e-15);
            assert_eq!(g.value[1], 0.0);
        }
        assert_eq!(sc.tangency_residual, 0.0);
    }

    #[test]
    fn zero_field_gives_empty_set() {
        let grid = Grid::new(2, 2).unwrap();
        let sc = solenoidal_completion(&vec![DVector::zeros(2); 4], grid, 4).unwrap();
        assert!(sc.rectifiable_set().is_empty());
        let s = vec![MultiVector::zero(2, 1).unwrap(); 4];
        let cf = complete_current(&s, grid, 1, 4).unwrap();
        assert_eq!(current_mass(&cf), 0.0);
        assert!(cf.ledger().is_empty());
    }

    #[test]
    fn divergence_completion_1d_mass() {
        // N = 1, m = 0: ∂ on 1-vectors is d/dx, T is the sawtooth with slope S.
        let grid = Grid::new(1, 2).unwrap();
        let s = vec![
            MultiVector::scalar(1, 1.0).unwrap(),
            MultiVector::scalar(1, -2.0).unwrap(),
        ];
        let cf = complete_current(&s, grid, 0, 4).unwrap();
        // each slab has width 1/8 and |T| rises linearly to |S|/8
        let want = 0.5 * (1.0 / 8.0) * 0.5 + 0.5 * (2.0 / 8.0) * 0.5;
        assert_abs_diff_eq!(cf.mass, want, epsilon = 1e-14);
        assert!(cf.mass <= cf.mass_constant * 1.5);
    }

    #[test]
    fn constant_offset_has_unit_mass() {
        let grid = Grid::new(2, 2).unwrap();
        let u = SbvFunction::from_parts(
            grid,
            3,
            vec![DMatrix::zeros(2, 2); 4],
            vec![DVector::from_vec(vec![0.6, 0.8]); 4],
        )
        .unwrap();
        assert_abs_diff_eq!(function_l1_norm(&u).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn current_rejects_bad_degree() {
        let grid = Grid::new(2, 1).unwrap();
        let s = vec![MultiVector::zero(2, 2).unwrap()];
        assert!(matches!(
            complete_current(&s, grid, 2, 4),
            Err(Error::InvalidDegree { .. })
        ));
        let s = vec![MultiVector::zero(2, 0).unwrap()];
        assert!(matches!(
            complete_current(&s, grid, 1, 4),
            Err(Error::InvalidDimension(_))
        ));
    }
}
