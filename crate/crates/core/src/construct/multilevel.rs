//! Dyadic multilevel construction for fields that are not cellwise constant.
//!
//! Level `ℓ` (grid of `2^ℓ` cells per axis) realizes the correction
//! `avg_ℓ f − avg_{ℓ−1} f`, i.e. the level-`ℓ` averages of the residual left
//! by the coarser levels. After level `ℓ` the remaining field is
//! `f − avg_ℓ f`, whose `L¹` norm is reported.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{build_sawtooth, validate_and_lift, Grid, SbvFunction, MEMBERSHIP_TOL};
use crate::algebra::LiftedMap;
use crate::quadrature::{BoxRule, UnitRule};
use crate::{Error, Result};

const AVERAGE_ORDER: usize = 6;
const RESIDUAL_ORDER: usize = 4;

/// Source of a field on the unit cube: pointwise values plus exact (or
/// accurate) cell averages at any dyadic level.
pub trait FieldSampler: Sync {
    fn space_dim(&self) -> usize;

    fn dim_f(&self) -> usize;

    fn value(&self, x: &[f64]) -> DVector<f64>;

    /// Average over `cell` of `grid`; defaults to Gauss quadrature.
    fn cell_average(&self, grid: &Grid, cell: usize) -> DVector<f64> {
        let lower = grid.cell_origin(cell);
        let upper: Vec<f64> = lower.iter().map(|c| c + grid.h()).collect();
        let rule = BoxRule::new(&lower, &upper, AVERAGE_ORDER).expect("valid cell box");
        let mut acc = DVector::zeros(self.dim_f());
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            acc.axpy(*w, &self.value(p), 1.0);
        }
        acc / grid.cell_volume()
    }
}

/// A [`FieldSampler`] backed by a closure.
pub struct FnSampler<F> {
    space_dim: usize,
    dim_f: usize,
    f: F,
}

impl<F> FnSampler<F>
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    pub fn new(space_dim: usize, dim_f: usize, f: F) -> Self {
        Self {
            space_dim,
            dim_f,
            f,
        }
    }
}

impl<F> FieldSampler for FnSampler<F>
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    fn space_dim(&self) -> usize {
        self.space_dim
    }

    fn dim_f(&self) -> usize {
        self.dim_f
    }

    fn value(&self, x: &[f64]) -> DVector<f64> {
        (self.f)(x)
    }
}

#[derive(Clone, Debug)]
pub struct Multilevel {
    /// One sawtooth per level; `levels[ℓ−1]` lives on the `2^ℓ` grid.
    pub levels: Vec<SbvFunction>,
    /// The cellwise field realized at each level.
    pub corrections: Vec<Vec<DVector<f64>>>,
    /// `‖f − avg_ℓ f‖_{L¹}` after each level.
    pub residual_per_level: Vec<f64>,
}

pub fn multilevel_construct(
    sampler: &dyn FieldSampler,
    max_levels: usize,
    slab_count: usize,
    lifted: &LiftedMap,
) -> Result<Multilevel> {
    if max_levels == 0 {
        return Err(Error::InvalidDimension(
            "max_levels must be at least 1".into(),
        ));
    }
    let n = sampler.space_dim();
    if n != lifted.space_dim || sampler.dim_f() != lifted.dim_f() {
        return Err(Error::InvalidDimension(format!(
            "sampler (N = {n}, dimF = {}) does not match the operator (N = {}, dimF = {})",
            sampler.dim_f(),
            lifted.space_dim,
            lifted.dim_f()
        )));
    }

    let averages: Vec<Vec<DVector<f64>>> = (1..=max_levels)
        .map(|level| {
            let grid = Grid::new(n, 1 << level)?;
            Ok((0..grid.cell_count())
                .into_par_iter()
                .map(|q| sampler.cell_average(&grid, q))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut levels = Vec::with_capacity(max_levels);
    let mut corrections = Vec::with_capacity(max_levels);
    for level in 1..=max_levels {
        let grid = Grid::new(n, 1 << level)?;
        let current = &averages[level - 1];
        let correction: Vec<DVector<f64>> = (0..grid.cell_count())
            .map(|q| {
                if level == 1 {
                    return current[q].clone();
                }
                let parent_grid = Grid::new(n, 1 << (level - 1)).expect("valid grid");
                let parent: Vec<usize> = grid.cell_coords(q).iter().map(|c| c / 2).collect();
                &current[q] - &averages[level - 2][parent_grid.cell_index(&parent)]
            })
            .collect();
        let lifted_field = validate_and_lift(&correction, lifted, MEMBERSHIP_TOL, false)?;
        levels.push(build_sawtooth(lifted_field, grid, slab_count)?);
        corrections.push(correction);
    }

    let residual_per_level = residual_norms(sampler, &averages, max_levels + 1)?;
    Ok(Multilevel {
        levels,
        corrections,
        residual_per_level,
    })
}

/// `‖f − avg_ℓ f‖_{L¹}` for every level, integrated on the dyadic grid of
/// `fine_level` so the level-`ℓ` average is constant on each fine cell.
fn residual_norms(
    sampler: &dyn FieldSampler,
    averages: &[Vec<DVector<f64>>],
    fine_level: usize,
) -> Result<Vec<f64>> {
    let n = sampler.space_dim();
    let fine = Grid::new(n, 1 << fine_level)?;
    let unit = UnitRule::new(n, RESIDUAL_ORDER)?;
    let h = fine.h();
    let volume = fine.cell_volume();

    let per_cell: Vec<Vec<f64>> = (0..fine.cell_count())
        .into_par_iter()
        .map(|q| {
            let origin = fine.cell_origin(q);
            let coords = fine.cell_coords(q);
            let values: Vec<DVector<f64>> = unit
                .points
                .iter()
                .map(|p| {
                    let x: Vec<f64> = origin.iter().zip(p).map(|(o, t)| o + h * t).collect();
                    sampler.value(&x)
                })
                .collect();
            averages
                .iter()
                .enumerate()
                .map(|(idx, avg)| {
                    let level = idx + 1;
                    let grid = Grid::new(n, 1 << level).expect("valid grid");
                    let shift = fine_level - level;
                    let parent: Vec<usize> = coords.iter().map(|c| c >> shift).collect();
                    let a = &avg[grid.cell_index(&parent)];
                    values
                        .iter()
                        .zip(&unit.weights)
                        .map(|(v, w)| w * (v - a).norm())
                        .sum::<f64>()
                        * volume
                })
                .collect()
        })
        .collect();

    Ok((0..averages.len())
        .map(|level| per_cell.iter().map(|c| c[level]).sum())
        .collect())
}
