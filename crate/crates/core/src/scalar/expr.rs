//! Statement-level expression composition for [`ActiveScalar`].
//!
//! Operators build a lazy tree; nothing touches the tape until the tree is
//! assigned, at which point the whole right hand side becomes one
//! statement.

use std::marker::PhantomData;
use std::ops::{Add, Div, Mul, Neg, Sub};
use num_traits::{Float, Zero};

use super::active::ActiveScalar;
use super::shape::ScalarOp;
use crate::index::Identifier;
use crate::Real;

/// Collects the postfix form, active identifiers and constants of an
/// expression, leaves in left-to-right order.
#[derive(Debug, Clone, Default)]
pub struct ShapeBuilder<R> {
    pub(crate) ops: Vec<ScalarOp>,
    pub(crate) ids: Vec<Identifier>,
    pub(crate) consts: Vec<R>,
    pub(crate) tape_addr: usize,
    pub(crate) epoch: u32,
    pub(crate) foreign: bool,
}

impl<R: Real> ShapeBuilder<R> {
    pub(crate) fn reset(&mut self, tape_addr: usize, epoch: u32) {
        self.ops.clear();
        self.ids.clear();
        self.consts.clear();
        self.tape_addr = tape_addr;
        self.epoch = epoch;
        self.foreign = false;
    }

    #[inline]
    pub(crate) fn push_const(&mut self, v: R) {
        self.ops.push(ScalarOp::Const);
        self.consts.push(v);
    }

    #[inline]
    pub(crate) fn push_leaf(&mut self, leaf: &ActiveScalar<'_, R>) {
        if leaf.tape_addr() != self.tape_addr {
            self.foreign = true;
        }
        let id = leaf.id_in_epoch(self.epoch);
        if id.is_passive() {
            self.push_const(leaf.value());
        } else {
            self.ops.push(ScalarOp::Var);
            self.ids.push(id);
        }
    }
}

/// A scalar expression that can be evaluated and recorded.
pub trait ScalarExpr {
    type Real: Real;

    fn value(&self) -> Self::Real;
    fn encode(&self, b: &mut ShapeBuilder<Self::Real>);
}

/// Wrapper carrying the operator overloads for expression nodes.
#[derive(Debug, Clone, Copy)]
pub struct Ex<E>(pub E);

impl<E: ScalarExpr> Ex<E> {
    pub fn value(&self) -> E::Real {
        self.0.value()
    }
}

impl<E: ScalarExpr> ScalarExpr for Ex<E> {
    type Real = E::Real;
    #[inline]
    fn value(&self) -> E::Real {
        self.0.value()
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<E::Real>) {
        self.0.encode(b)
    }
}

/// Leaf referring to an active scalar. The value and identifier are read
/// when the expression is assigned, not when it is built.
#[derive(Debug, Clone, Copy)]
pub struct Leaf<'a, 't, R: Real>(pub(crate) &'a ActiveScalar<'t, R>);

impl<R: Real> ScalarExpr for Leaf<'_, '_, R> {
    type Real = R;
    #[inline]
    fn value(&self) -> R {
        self.0.value()
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<R>) {
        b.push_leaf(self.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant<R>(pub R);

impl<R: Real> ScalarExpr for Constant<R> {
    type Real = R;
    #[inline]
    fn value(&self) -> R {
        self.0
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<R>) {
        b.push_const(self.0)
    }
}

/// Static description of a unary or binary elemental operator.
pub trait OpKind: Copy {
    const OP: ScalarOp;
}

macro_rules! op_kinds {
    ($($name:ident => $op:expr),* $(,)?) => {
        $(
            #[derive(Debug, Clone, Copy)]
            pub struct $name;
            impl OpKind for $name {
                const OP: ScalarOp = $op;
            }
        )*
    };
}

op_kinds! {
    AddOp => ScalarOp::Add,
    SubOp => ScalarOp::Sub,
    MulOp => ScalarOp::Mul,
    DivOp => ScalarOp::Div,
    PowOp => ScalarOp::Pow,
    NegOp => ScalarOp::Neg,
    SinOp => ScalarOp::Sin,
    CosOp => ScalarOp::Cos,
    ExpOp => ScalarOp::Exp,
    LogOp => ScalarOp::Log,
    SqrtOp => ScalarOp::Sqrt,
}

#[derive(Debug, Clone, Copy)]
pub struct Binary<O, A, B> {
    a: A,
    b: B,
    _op: PhantomData<O>,
}

impl<O: OpKind, A: ScalarExpr, B: ScalarExpr<Real = A::Real>> ScalarExpr for Binary<O, A, B> {
    type Real = A::Real;
    #[inline]
    fn value(&self) -> A::Real {
        O::OP.eval(self.a.value(), self.b.value())
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<A::Real>) {
        self.a.encode(b);
        self.b.encode(b);
        b.ops.push(O::OP);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Unary<O, A> {
    a: A,
    _op: PhantomData<O>,
}

impl<O: OpKind, A: ScalarExpr> ScalarExpr for Unary<O, A> {
    type Real = A::Real;
    #[inline]
    fn value(&self) -> A::Real {
        O::OP.eval(self.a.value(), A::Real::zero())
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<A::Real>) {
        self.a.encode(b);
        b.ops.push(O::OP);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowI<A> {
    a: A,
    n: i32,
}

impl<A: ScalarExpr> ScalarExpr for PowI<A> {
    type Real = A::Real;
    #[inline]
    fn value(&self) -> A::Real {
        self.a.value().powi(self.n)
    }
    #[inline]
    fn encode(&self, b: &mut ShapeBuilder<A::Real>) {
        self.a.encode(b);
        b.ops.push(ScalarOp::PowI(self.n));
    }
}

/// Anything usable as an operand: expressions and active scalars.
pub trait IntoExpr {
    type Expr: ScalarExpr;
    fn into_expr(self) -> Ex<Self::Expr>;
}

impl<E: ScalarExpr> IntoExpr for Ex<E> {
    type Expr = E;
    #[inline]
    fn into_expr(self) -> Ex<E> {
        self
    }
}

impl<'a, 't, R: Real> IntoExpr for &'a ActiveScalar<'t, R> {
    type Expr = Leaf<'a, 't, R>;
    #[inline]
    fn into_expr(self) -> Ex<Leaf<'a, 't, R>> {
        Ex(Leaf(self))
    }
}

type RealOf<X> = <<X as IntoExpr>::Expr as ScalarExpr>::Real;

fn binary<O, A: IntoExpr, B: IntoExpr>(a: A, b: B) -> Ex<Binary<O, A::Expr, B::Expr>> {
    Ex(Binary {
        a: a.into_expr().0,
        b: b.into_expr().0,
        _op: PhantomData,
    })
}

fn unary<O, A: IntoExpr>(a: A) -> Ex<Unary<O, A::Expr>> {
    Ex(Unary {
        a: a.into_expr().0,
        _op: PhantomData,
    })
}

pub fn sin<X: IntoExpr>(x: X) -> Ex<Unary<SinOp, X::Expr>> {
    unary(x)
}
pub fn cos<X: IntoExpr>(x: X) -> Ex<Unary<CosOp, X::Expr>> {
    unary(x)
}
pub fn exp<X: IntoExpr>(x: X) -> Ex<Unary<ExpOp, X::Expr>> {
    unary(x)
}
pub fn log<X: IntoExpr>(x: X) -> Ex<Unary<LogOp, X::Expr>> {
    unary(x)
}
pub fn sqrt<X: IntoExpr>(x: X) -> Ex<Unary<SqrtOp, X::Expr>> {
    unary(x)
}
pub fn powi<X: IntoExpr>(x: X, n: i32) -> Ex<PowI<X::Expr>> {
    Ex(PowI {
        a: x.into_expr().0,
        n,
    })
}
/// `x^c` for a constant exponent.
pub fn powf<X: IntoExpr>(x: X, c: RealOf<X>) -> Ex<Binary<PowOp, X::Expr, Constant<RealOf<X>>>> {
    binary(x, Ex(Constant(c)))
}
/// `b^e` with an active exponent, recorded as `exp(e * log(b))`.
#[allow(clippy::type_complexity)]
pub fn pow<B: IntoExpr, E: IntoExpr>(
    b: B,
    e: E,
) -> Ex<Unary<ExpOp, Binary<MulOp, E::Expr, Unary<LogOp, B::Expr>>>>
where
    E::Expr: ScalarExpr<Real = RealOf<B>>,
{
    exp(binary::<MulOp, _, _>(e, log(b)))
}

macro_rules! unary_methods {
    () => {
        pub fn sin(self) -> Ex<Unary<SinOp, <Self as IntoExpr>::Expr>> {
            sin(self)
        }
        pub fn cos(self) -> Ex<Unary<CosOp, <Self as IntoExpr>::Expr>> {
            cos(self)
        }
        pub fn exp(self) -> Ex<Unary<ExpOp, <Self as IntoExpr>::Expr>> {
            exp(self)
        }
        pub fn ln(self) -> Ex<Unary<LogOp, <Self as IntoExpr>::Expr>> {
            log(self)
        }
        pub fn sqrt(self) -> Ex<Unary<SqrtOp, <Self as IntoExpr>::Expr>> {
            sqrt(self)
        }
        pub fn powi(self, n: i32) -> Ex<PowI<<Self as IntoExpr>::Expr>> {
            powi(self, n)
        }
    };
}

impl<E: ScalarExpr> Ex<E> {
    unary_methods!();

    pub fn powf(self, c: E::Real) -> Ex<Binary<PowOp, E, Constant<E::Real>>> {
        powf(self, c)
    }
}

impl<'a, 't, R: Real> ActiveScalar<'t, R> {
    pub fn expr(&'a self) -> Ex<Leaf<'a, 't, R>> {
        Ex(Leaf(self))
    }
}

impl<'t, R: Real> ActiveScalar<'t, R> {
    pub fn sin(&self) -> Ex<Unary<SinOp, Leaf<'_, 't, R>>> {
        sin(self)
    }
    pub fn cos(&self) -> Ex<Unary<CosOp, Leaf<'_, 't, R>>> {
        cos(self)
    }
    pub fn exp(&self) -> Ex<Unary<ExpOp, Leaf<'_, 't, R>>> {
        exp(self)
    }
    pub fn ln(&self) -> Ex<Unary<LogOp, Leaf<'_, 't, R>>> {
        log(self)
    }
    pub fn sqrt(&self) -> Ex<Unary<SqrtOp, Leaf<'_, 't, R>>> {
        sqrt(self)
    }
    pub fn powi(&self, n: i32) -> Ex<PowI<Leaf<'_, 't, R>>> {
        powi(self, n)
    }
    pub fn powf(&self, c: R) -> Ex<Binary<PowOp, Leaf<'_, 't, R>, Constant<R>>> {
        powf(self, c)
    }
}

impl<E: ScalarExpr> Neg for Ex<E> {
    type Output = Ex<Unary<NegOp, E>>;
    fn neg(self) -> Self::Output {
        unary(self)
    }
}

impl<'a, 't, R: Real> Neg for &'a ActiveScalar<'t, R> {
    type Output = Ex<Unary<NegOp, Leaf<'a, 't, R>>>;
    fn neg(self) -> Self::Output {
        unary(self)
    }
}

macro_rules! binary_ops {
    ($($trait:ident $method:ident $kind:ident),*) => {$(
        impl<E: ScalarExpr, X: IntoExpr> $trait<X> for Ex<E>
        where
            X::Expr: ScalarExpr<Real = E::Real>,
        {
            type Output = Ex<Binary<$kind, E, X::Expr>>;
            #[inline]
            fn $method(self, rhs: X) -> Self::Output {
                binary(self, rhs)
            }
        }

        impl<'a, 't, R: Real, X: IntoExpr> $trait<X> for &'a ActiveScalar<'t, R>
        where
            X::Expr: ScalarExpr<Real = R>,
        {
            type Output = Ex<Binary<$kind, Leaf<'a, 't, R>, X::Expr>>;
            #[inline]
            fn $method(self, rhs: X) -> Self::Output {
                binary(self, rhs)
            }
        }

        binary_ops!(@float f64, $trait $method $kind);
        binary_ops!(@float f32, $trait $method $kind);
    )*};
    (@float $f:ty, $trait:ident $method:ident $kind:ident) => {
        impl<E: ScalarExpr<Real = $f>> $trait<$f> for Ex<E> {
            type Output = Ex<Binary<$kind, E, Constant<$f>>>;
            #[inline]
            fn $method(self, rhs: $f) -> Self::Output {
                binary(self, Ex(Constant(rhs)))
            }
        }

        impl<'a, 't> $trait<$f> for &'a ActiveScalar<'t, $f> {
            type Output = Ex<Binary<$kind, Leaf<'a, 't, $f>, Constant<$f>>>;
            #[inline]
            fn $method(self, rhs: $f) -> Self::Output {
                binary(self, Ex(Constant(rhs)))
            }
        }

        impl<E: ScalarExpr<Real = $f>> $trait<Ex<E>> for $f {
            type Output = Ex<Binary<$kind, Constant<$f>, E>>;
            #[inline]
            fn $method(self, rhs: Ex<E>) -> Self::Output {
                binary(Ex(Constant(self)), rhs)
            }
        }

        impl<'a, 't> $trait<&'a ActiveScalar<'t, $f>> for $f {
            type Output = Ex<Binary<$kind, Constant<$f>, Leaf<'a, 't, $f>>>;
            #[inline]
            fn $method(self, rhs: &'a ActiveScalar<'t, $f>) -> Self::Output {
                binary(Ex(Constant(self)), rhs)
            }
        }
    };
}

binary_ops!(Add add AddOp, Sub sub SubOp, Mul mul MulOp, Div div DivOp);
