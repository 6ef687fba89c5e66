// @generated by dslgen. Do not edit.

/// Real type of the tape the generated types record on.
pub type Real = f64;

/// Expressions with a `Real` value.
pub trait RealExpr: ::dslad::DslExpr<Value = Real> {}

impl RealExpr for &::dslad::ActiveScalar<'_, Real> {}

include!("Matrix.gen.rs");
include!("Vector.gen.rs");
include!("ops_mult.gen.rs");

/// Registers all structures and operations with `tape`.
pub fn register(tape: &::dslad::Tape<Real>) -> Result<(), ::dslad::TapeError> {
    tape.register_type::<Matrix>()?;
    tape.register_type::<Vector>()?;
    tape.register_op::<Op_mult>()?;
    Ok(())
}
