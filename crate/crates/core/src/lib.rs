//! Constructive realization of the absolutely continuous part of first-order
//! constant-coefficient operators.
//!
//! Given a homogeneous operator `𝒜u = Σ A_i ∂_i u` and a cellwise field `f`
//! valued in the operator's essential range, the crate lifts `f` through the
//! Moore–Penrose pseudoinverse of the lifted map, builds an explicit
//! piecewise-affine sawtooth `u` whose weak gradient off its jump set is the
//! lifted field, and records the polyhedral jump set exactly. The resulting
//! measure `𝒜u = f·𝓛 + 𝔸(ν)[u⁺ − u⁻]·𝓗` is then checked distributionally by
//! Gauss quadrature against smooth bump test functions.
//!
//! Modules:
//! - [`algebra`]: operators, symbols, essential range, lifted map, pseudoinverse.
//! - [`exterior`]: multivectors, wedge and interior products, boundary operators.
//! - [`construct`]: grid, sawtooth construction, jump ledger, measure bookkeeping.
//! - [`verify`]: test functions, quadrature and distributional checks.
//! - [`apps`]: boundary completion of currents and solenoidal completion.
//! - [`io`]: operator, field and ledger file formats.

pub mod algebra;
pub mod apps;
pub mod construct;
mod error;
pub mod exterior;
pub mod io;
pub mod quadrature;
pub mod verify;

pub use algebra::{LiftedMap, OperatorSpec};
pub use construct::{Grid, JumpFace, MeasureDecomposition, SbvFunction};
pub use error::{Error, Result};
pub use exterior::MultiVector;

pub use nalgebra::{DMatrix, DVector};
