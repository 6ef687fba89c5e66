use std::cell::Cell;
use std::fmt;

use super::expr::{IntoExpr, ScalarExpr};
use crate::index::Identifier;
use crate::tape::Tape;
use crate::{Real, TapeError};

/// Active real value: primal plus identifier into the tape's vectors.
///
/// Fields are cells so that `w.assign(&w * &a)` can read and overwrite the
/// same variable in one statement. The identifier is only meaningful in
/// the tape epoch it was acquired in; after [`Tape::reset`] the value is
/// passive.
pub struct ActiveScalar<'t, R: Real> {
    value: Cell<R>,
    id: Cell<Identifier>,
    epoch: Cell<u32>,
    tape: &'t Tape<R>,
}

impl<'t, R: Real> ActiveScalar<'t, R> {
    pub(crate) fn from_parts(tape: &'t Tape<R>, value: R, id: Identifier) -> Self {
        Self {
            value: Cell::new(value),
            id: Cell::new(id),
            epoch: Cell::new(tape.epoch()),
            tape,
        }
    }

    /// Passive value bound to `tape`.
    pub fn passive(tape: &'t Tape<R>, value: R) -> Self {
        Self::from_parts(tape, value, Identifier::PASSIVE)
    }

    #[inline]
    pub fn value(&self) -> R {
        self.value.get()
    }

    #[inline]
    pub fn tape(&self) -> &'t Tape<R> {
        self.tape
    }

    #[inline]
    pub(crate) fn tape_addr(&self) -> usize {
        self.tape as *const Tape<R> as usize
    }

    #[inline]
    pub(crate) fn id_in_epoch(&self, epoch: u32) -> Identifier {
        if self.epoch.get() == epoch {
            self.id.get()
        } else {
            Identifier::PASSIVE
        }
    }

    #[inline]
    pub fn id(&self) -> Identifier {
        self.id_in_epoch(self.tape.epoch())
    }

    #[inline]
    pub fn is_active(&self) -> bool {
        !self.id().is_passive()
    }

    /// Sets a passive value, releasing the identifier.
    pub fn set_value(&self, value: R) {
        self.deactivate();
        self.value.set(value);
    }

    pub(crate) fn deactivate(&self) {
        let id = self.id();
        if !id.is_passive() {
            self.tape.release_scalar(id);
        }
        self.id.set(Identifier::PASSIVE);
    }

    pub(crate) fn set_state(&self, value: R, id: Identifier) {
        self.value.set(value);
        self.id.set(id);
        self.epoch.set(self.tape.epoch());
    }

    /// Records `self = rhs` as one statement.
    ///
    /// # Panics
    ///
    /// If `rhs` contains active values of another tape.
    pub fn assign<X: IntoExpr>(&self, rhs: X)
    where
        X::Expr: ScalarExpr<Real = R>,
    {
        self.tape.assign_scalar(self, &rhs.into_expr().0);
    }

    /// Adjoint of this value; zero when passive.
    pub fn gradient(&self) -> R {
        self.tape.gradient(self.id()).unwrap_or_else(|_| R::zero())
    }

    pub fn set_gradient(&self, v: R) -> Result<(), TapeError> {
        let id = self.id();
        if id.is_passive() {
            return Err(TapeError::PassiveAdjoint);
        }
        self.tape.set_gradient(id, v)
    }
}

impl<R: Real> Clone for ActiveScalar<'_, R> {
    /// Copies by recording `copy = self`, so the copy has its own
    /// identifier.
    fn clone(&self) -> Self {
        let copy = Self::passive(self.tape, self.value());
        copy.assign(self);
        copy
    }
}

impl<R: Real> Drop for ActiveScalar<'_, R> {
    fn drop(&mut self) {
        let id = self.id();
        if !id.is_passive() {
            self.tape.release_scalar(id);
        }
    }
}

impl<R: Real> fmt::Debug for ActiveScalar<'_, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActiveScalar")
            .field("value", &self.value())
            .field("id", &self.id().0)
            .finish()
    }
}

impl<X: IntoExpr, R: Real> std::ops::AddAssign<X> for ActiveScalar<'_, R>
where
    X::Expr: ScalarExpr<Real = R>,
{
    fn add_assign(&mut self, rhs: X) {
        let e = &*self + rhs;
        self.tape.assign_scalar(self, &e.0);
    }
}

impl<X: IntoExpr, R: Real> std::ops::SubAssign<X> for ActiveScalar<'_, R>
where
    X::Expr: ScalarExpr<Real = R>,
{
    fn sub_assign(&mut self, rhs: X) {
        let e = &*self - rhs;
        self.tape.assign_scalar(self, &e.0);
    }
}
