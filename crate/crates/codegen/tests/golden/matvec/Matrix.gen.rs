// @generated by dslgen. Do not edit.

/// Active `Matrix`: the value plus an identifier from the `Matrix` index manager.
pub type ActiveMatrix<'t> = ::dslad::ActiveObject<'t, Real, Matrix>;

/// Expressions with a `Matrix` value.
pub trait MatrixExpr: ::dslad::DslExpr<Value = Matrix> {}

impl MatrixExpr for &ActiveMatrix<'_> {}
