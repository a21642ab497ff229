//! Exterior algebra over ℝ^N with a dense coefficient representation.
//!
//! Basis blades of degree `m` are the strictly increasing index tuples in
//! lexicographic order, e.g. `e₁₂, e₁₃, e₂₃` for `N = 3, m = 2`. Internally a
//! blade is a bitmask; signs come from the parity of the sorting permutation.

use nalgebra::DMatrix;

use crate::algebra::{binomial, OperatorSpec};
use crate::{Error, Result};

/// Largest supported space dimension (`C(8,4) = 70` coefficients).
pub const MAX_SPACE_DIM: usize = 8;

/// Bitmasks of the degree-`m` basis blades in lexicographic order.
pub fn blade_basis(space_dim: usize, degree: usize) -> Vec<u32> {
    fn recurse(start: usize, n: usize, left: usize, mask: u32, out: &mut Vec<u32>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for i in start..=n - left {
            recurse(i + 1, n, left - 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::with_capacity(binomial(space_dim, degree));
    if degree <= space_dim {
        recurse(0, space_dim, degree, 0, &mut out);
    }
    out
}

fn blade_position(basis: &[u32], mask: u32) -> usize {
    basis
        .iter()
        .position(|&b| b == mask)
        .expect("blade present in basis")
}

/// Sign of `e_I ∧ e_J` relative to the sorted blade `e_{I∪J}`.
fn wedge_sign(left: u32, right: u32) -> f64 {
    let mut swaps = 0;
    let mut r = right;
    while r != 0 {
        let j = r.trailing_zeros();
        // indices of `left` strictly above j
        swaps += (left >> (j + 1)).count_ones();
        r &= r - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_space_dim(space_dim: usize) -> Result<()> {
    if space_dim == 0 || space_dim > MAX_SPACE_DIM {
        return Err(Error::InvalidDimension(format!(
            "space dimension {space_dim} outside 1..={MAX_SPACE_DIM}"
        )));
    }
    Ok(())
}

/// An `m`-vector in `Λ^m ℝ^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiVector {
    space_dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl MultiVector {
    pub fn new(space_dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_space_dim(space_dim)?;
        if degree > space_dim {
            return Err(Error::InvalidDegree { degree, space_dim });
        }
        let expected = binomial(space_dim, degree);
        if coeffs.len() != expected {
            return Err(Error::InvalidDimension(format!(
                "{} coefficients for a degree-{degree} multivector in N = {space_dim}, expected {expected}",
                coeffs.len()
            )));
        }
        Ok(Self {
            space_dim,
            degree,
            coeffs,
        })
    }

    pub fn zero(space_dim: usize, degree: usize) -> Result<Self> {
        Self::new(space_dim, degree, vec![0.0; binomial(space_dim, degree)])
    }

    /// The basis blade `e_{i₁} ∧ … ∧ e_{iₘ}` (0-based, any order; the sign
    /// of the permutation is applied).
    pub fn blade(space_dim: usize, indices: &[usize]) -> Result<Self> {
        let mut out = Self::scalar(space_dim, 1.0)?;
        for &i in indices {
            if i >= space_dim {
                return Err(Error::InvalidDimension(format!(
                    "index {i} out of range for N = {space_dim}"
                )));
            }
            out = out.wedge(&Self::vector(&unit(space_dim, i))?)?;
        }
        Ok(out)
    }

    pub fn scalar(space_dim: usize, value: f64) -> Result<Self> {
        Self::new(space_dim, 0, vec![value])
    }

    pub fn vector(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space_dim != other.space_dim || self.degree != other.degree {
            return Err(Error::InvalidDimension(
                "adding multivectors of different shape".into(),
            ));
        }
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
            ..self.clone()
        })
    }

    /// `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.space_dim != other.space_dim {
            return Err(Error::InvalidDimension(format!(
                "wedge of multivectors in N = {} and N = {}",
                self.space_dim, other.space_dim
            )));
        }
        let n = self.space_dim;
        let degree = self.degree + other.degree;
        if degree > n {
            return Err(Error::DegreeOverflow(degree, n));
        }
        let left = blade_basis(n, self.degree);
        let right = blade_basis(n, other.degree);
        let target = blade_basis(n, degree);
        let mut coeffs = vec![0.0; target.len()];
        for (&lm, &lc) in left.iter().zip(&self.coeffs) {
            if lc == 0.0 {
                continue;
            }
            for (&rm, &rc) in right.iter().zip(&other.coeffs) {
                if rc == 0.0 || lm & rm != 0 {
                    continue;
                }
                coeffs[blade_position(&target, lm | rm)] += wedge_sign(lm, rm) * lc * rc;
            }
        }
        Ok(Self {
            space_dim: n,
            degree,
            coeffs,
        })
    }

    /// `ω ⌟ v`, the adjoint of right-wedging by `v`:
    /// `⟨ω ⌟ v, η⟩ = ⟨ω, η ∧ v⟩`.
    pub fn interior(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.space_dim {
            return Err(Error::InvalidDimension(format!(
                "vector of length {} for N = {}",
                v.len(),
                self.space_dim
            )));
        }
        if self.degree == 0 {
            return Err(Error::DegreeUnderflow);
        }
        let n = self.space_dim;
        let source = blade_basis(n, self.degree);
        let target = blade_basis(n, self.degree - 1);
        let mut coeffs = vec![0.0; target.len()];
        for (t, &eta) in target.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                let bit = 1u32 << j;
                if vj == 0.0 || eta & bit != 0 {
                    continue;
                }
                let omega = self.coeffs[blade_position(&source, eta | bit)];
                coeffs[t] += wedge_sign(eta, bit) * vj * omega;
            }
        }
        Ok(Self {
            space_dim: n,
            degree: self.degree - 1,
            coeffs,
        })
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn check_degree(space_dim: usize, degree: usize) -> Result<()> {
    check_space_dim(space_dim)?;
    if degree >= space_dim {
        return Err(Error::InvalidDegree { degree, space_dim });
    }
    Ok(())
}

/// Matrix of a linear map between multivector spaces, built column by column
/// from basis blades.
fn blade_matrix(
    space_dim: usize,
    source_degree: usize,
    target_degree: usize,
    map: impl Fn(&MultiVector) -> MultiVector,
) -> DMatrix<f64> {
    let source = blade_basis(space_dim, source_degree);
    let mut out = DMatrix::zeros(binomial(space_dim, target_degree), source.len());
    for col in 0..source.len() {
        let mut coeffs = vec![0.0; source.len()];
        coeffs[col] = 1.0;
        let image = map(&MultiVector {
            space_dim,
            degree: source_degree,
            coeffs,
        });
        out.column_mut(col).copy_from_slice(&image.coeffs);
    }
    out
}

/// The boundary operator on `(m+1)`-vectors: `E = Λ^{m+1}`, `F = Λ^m`,
/// `A_i[ω] = ω ⌟ e_i`.
pub fn boundary_operator_spec(space_dim: usize, degree: usize) -> Result<OperatorSpec> {
    check_degree(space_dim, degree)?;
    let blocks = (0..space_dim)
        .map(|i| {
            let e = unit(space_dim, i);
            blade_matrix(space_dim, degree + 1, degree, |w| {
                w.interior(&e).expect("degree at least one")
            })
        })
        .collect();
    OperatorSpec::first_order(blocks)
}

/// The exterior derivative on `m`-vectors: `E = Λ^m`, `F = Λ^{m+1}`,
/// symbol `d(ξ)a = a ∧ ξ`.
pub fn derivative_operator_spec(space_dim: usize, degree: usize) -> Result<OperatorSpec> {
    check_degree(space_dim, degree)?;
    let blocks = (0..space_dim)
        .map(|i| {
            let e = MultiVector::vector(&unit(space_dim, i)).expect("valid dimension");
            blade_matrix(space_dim, degree, degree + 1, |a| {
                a.wedge(&e).expect("degree below N")
            })
        })
        .collect();
    OperatorSpec::first_order(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, idx: &[usize]) -> MultiVector {
        MultiVector::blade(n, idx).unwrap()
    }

    #[test]
    fn basis_is_lexicographic() {
        assert_eq!(blade_basis(3, 2), vec![0b011, 0b101, 0b110]);
        assert_eq!(blade_basis(4, 0), vec![0]);
        assert_eq!(blade_basis(4, 4), vec![0b1111]);
        assert_eq!(blade_basis(8, 4).len(), 70);
    }

    #[test]
    fn wedge_examples() {
        let n = 3;
        let zero = e(n, &[0]).wedge(&e(n, &[0])).unwrap();
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));
        assert_eq!(
            e(n, &[1]).wedge(&e(n, &[0])).unwrap(),
            e(n, &[0, 1]).scaled(-1.0)
        );
        let sum = e(n, &[0]).add(&e(n, &[1])).unwrap();
        let got = sum.wedge(&e(n, &[2])).unwrap();
        assert_eq!(got, e(n, &[0, 2]).add(&e(n, &[1, 2])).unwrap());
        assert_eq!(
            e(n, &[0, 1]).wedge(&e(n, &[1, 2])),
            Err(Error::DegreeOverflow(4, 3))
        );
    }

    #[test]
    fn interior_examples() {
        assert_eq!(e(2, &[0, 1]).interior(&[0.0, 1.0]).unwrap(), e(2, &[0]));
        let none = e(3, &[0, 1]).interior(&[0.0, 0.0, 1.0]).unwrap();
        assert!(none.coeffs().iter().all(|&c| c == 0.0));
        assert_eq!(
            e(3, &[0, 1, 2]).interior(&[1.0, 0.0, 0.0]).unwrap(),
            e(3, &[1, 2])
        );
        assert_eq!(
            MultiVector::scalar(3, 1.0)
                .unwrap()
                .interior(&[1.0, 0.0, 0.0]),
            Err(Error::DegreeUnderflow)
        );
    }

    #[test]
    fn boundary_in_two_dimensions_is_divergence() {
        let op = boundary_operator_spec(2, 0).unwrap();
        let blocks = op.axis_blocks().unwrap();
        assert_eq!(blocks[0], DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert_eq!(blocks[1], DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
    }

    #[test]
    fn boundary_symbol_on_e13() {
        let op = boundary_operator_spec(3, 1).unwrap();
        let symbol = op.symbol(&[0.0, 0.0, 1.0]).unwrap();
        // e₁₃ is the second blade of Λ², e₁ the first of Λ¹
        let image = symbol.column(1);
        assert_eq!(image.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn derivative_on_scalars_is_gradient() {
        let op = derivative_operator_spec(2, 0).unwrap();
        let symbol = op.symbol(&[0.3, -0.7]).unwrap();
        assert_eq!(symbol.as_slice(), &[0.3, -0.7]);
    }

    #[test]
    fn degree_out_of_range() {
        assert_eq!(
            boundary_operator_spec(2, 2),
            Err(Error::InvalidDegree {
                degree: 2,
                space_dim: 2
            })
        );
        assert!(derivative_operator_spec(9, 0).is_err());
    }

    #[test]
    fn derivative_is_nilpotent_and_adjoint_to_boundary() {
        let xi = [0.4, -1.1, 0.25];
        let d0 = derivative_operator_spec(3, 0).unwrap().symbol(&xi).unwrap();
        let d1 = derivative_operator_spec(3, 1).unwrap().symbol(&xi).unwrap();
        assert!((&d1 * &d0).iter().all(|v| v.abs() < 1e-15));
        let b1 = boundary_operator_spec(3, 1).unwrap().symbol(&xi).unwrap();
        assert_abs_diff_eq!((b1 - d1.transpose()).norm(), 0.0, epsilon = 1e-15);
    }
}
