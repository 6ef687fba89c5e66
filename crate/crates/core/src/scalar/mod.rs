//! The classical active real type and its elemental operators.

mod active;
pub mod expr;
pub(crate) mod shape;

pub use active::ActiveScalar;
pub use expr::{cos, exp, log, pow, powf, powi, sin, sqrt, Ex, IntoExpr, ScalarExpr};
pub use shape::ScalarOp;
