//! Seeded fixtures shared by the benchmarks.

use lusin_core::algebra::essential_range;
use lusin_core::{DMatrix, DVector, Grid, OperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random first-order operator with `N` blocks of shape `dimF × dimE`.
pub fn random_operator(seed: u64, space_dim: usize, dim_e: usize, dim_f: usize) -> OperatorSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..space_dim)
        .map(|_| DMatrix::from_fn(dim_f, dim_e, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    OperatorSpec::first_order(blocks).expect("random blocks are nonzero")
}

/// A cellwise field with values in the essential range of `op`.
pub fn range_field(op: &OperatorSpec, grid: &Grid, seed: u64) -> Vec<DVector<f64>> {
    let basis = essential_range(op);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.cell_count())
        .map(|_| &basis * DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}
