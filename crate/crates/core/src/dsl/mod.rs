//! DSL types and operations as first-class tape elementals.
//!
//! Every registered value type owns its primal/adjoint vectors and index
//! manager, while all statements share the tape's streams. An operation is
//! described by a [`DslOpDescriptor`]: its primal routine and, for every
//! differentiable argument `u_i`, a routine computing `(do/du_i)^T * w_b`
//! that returns a value of `u_i`'s type.

use std::any::{Any, TypeId};
use std::fmt;

use crate::codec::DslType;

mod expr;
mod object;

pub use expr::{DslExpr, ExprRecorder, Mark, Recorded};
pub(crate) use expr::{DslNode, DslShape, PendingStatement};
pub use object::ActiveObject;

/// Dense id of a registered operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpId(pub u32);

/// `o(u_1, .., u_l)` over type-erased arguments.
pub type PrimalFn = fn(args: &[&dyn Any]) -> Box<dyn Any>;
/// `(do/du_i)^T * r_b`, given all primal arguments, the primal result `r`
/// and the result adjoint `r_b`.
pub type ReverseFn = fn(args: &[&dyn Any], r: &dyn Any, r_b: &dyn Any) -> Box<dyn Any>;

#[derive(Clone)]
pub struct DslArg {
    pub name: &'static str,
    pub type_id: TypeId,
    pub type_name: &'static str,
    /// `None` for arguments that are never differentiated.
    pub reverse: Option<ReverseFn>,
}

#[derive(Clone)]
pub struct DslOpDescriptor {
    pub name: &'static str,
    pub result_type: TypeId,
    pub result_name: &'static str,
    pub args: Vec<DslArg>,
    pub primal: PrimalFn,
}

impl DslOpDescriptor {
    pub fn new<T: DslType>(name: &'static str, primal: PrimalFn) -> Self {
        Self {
            name,
            result_type: TypeId::of::<T>(),
            result_name: T::NAME,
            args: Vec::new(),
            primal,
        }
    }

    pub fn arg<T: DslType>(mut self, name: &'static str, reverse: Option<ReverseFn>) -> Self {
        self.args.push(DslArg {
            name,
            type_id: TypeId::of::<T>(),
            type_name: T::NAME,
            reverse,
        });
        self
    }
}

impl fmt::Debug for DslOpDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DslOpDescriptor")
            .field("name", &self.name)
            .field("result", &self.result_name)
            .field(
                "args",
                &self
                    .args
                    .iter()
                    .map(|a| (a.name, a.type_name, a.reverse.is_some()))
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// Static handle for an operation; implemented by generated code.
pub trait DslOpDef: 'static {
    fn descriptor() -> DslOpDescriptor;
}

/// Downcasts argument `i` of a type-erased argument list.
///
/// # Panics
///
/// If the argument has a different type, which means the operation was
/// registered with a wrong descriptor.
#[inline]
pub fn arg<'a, T: 'static>(args: &[&'a dyn Any], i: usize) -> &'a T {
    args[i].downcast_ref::<T>().unwrap_or_else(|| {
        panic!(
            "argument {i} is not a `{}`",
            std::any::type_name::<T>()
        )
    })
}

/// Downcasts a result or adjoint passed to a reverse routine.
#[inline]
pub fn value<T: 'static>(v: &dyn Any) -> &T {
    v.downcast_ref::<T>()
        .unwrap_or_else(|| panic!("value is not a `{}`", std::any::type_name::<T>()))
}
