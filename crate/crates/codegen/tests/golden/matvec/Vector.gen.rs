// @generated by dslgen. Do not edit.

/// Active `Vector`: the value plus an identifier from the `Vector` index manager.
pub type ActiveVector<'t> = ::dslad::ActiveObject<'t, Real, Vector>;

/// Expressions with a `Vector` value.
pub trait VectorExpr: ::dslad::DslExpr<Value = Vector> {}

impl VectorExpr for &ActiveVector<'_> {}
