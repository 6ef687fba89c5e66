use std::cell::{Cell, Ref, RefCell};
use std::fmt;

use super::expr::{DslExpr, ExprRecorder, Recorded};
use crate::codec::DslType;
use crate::index::Identifier;
use crate::scalar::ActiveScalar;
use crate::tape::Tape;
use crate::{Real, TapeError};

/// A DSL value wrapped with an identifier from its type's index manager.
pub struct ActiveObject<'t, R: Real, T: DslType> {
    value: RefCell<T>,
    id: Cell<Identifier>,
    epoch: Cell<u32>,
    tape: &'t Tape<R>,
}

impl<'t, R: Real, T: DslType> ActiveObject<'t, R, T> {
    pub(crate) fn from_parts(tape: &'t Tape<R>, value: T, id: Identifier) -> Self {
        Self {
            value: RefCell::new(value),
            id: Cell::new(id),
            epoch: Cell::new(tape.epoch()),
            tape,
        }
    }

    pub fn passive(tape: &'t Tape<R>, value: T) -> Self {
        Self::from_parts(tape, value, Identifier::PASSIVE)
    }

    pub fn value(&self) -> Ref<'_, T> {
        self.value.borrow()
    }

    pub fn tape(&self) -> &'t Tape<R> {
        self.tape
    }

    pub fn id(&self) -> Identifier {
        if self.epoch.get() == self.tape.epoch() {
            self.id.get()
        } else {
            Identifier::PASSIVE
        }
    }

    pub fn is_active(&self) -> bool {
        !self.id().is_passive()
    }

    /// Sets a passive value, releasing the identifier.
    pub fn set_value(&self, value: T) -> Result<(), TapeError> {
        self.deactivate()?;
        *self.value.borrow_mut() = value;
        Ok(())
    }

    fn deactivate(&self) -> Result<(), TapeError> {
        let id = self.id();
        if !id.is_passive() {
            self.tape.release_object::<T>(id)?;
        }
        self.id.set(Identifier::PASSIVE);
        Ok(())
    }

    /// Records `self = rhs` as one statement, however many DSL operations
    /// `rhs` contains.
    pub fn assign<E: DslExpr<Value = T>>(&self, rhs: E) -> Result<(), TapeError> {
        let current = self.id();
        let (value, id) = self.tape.assign_dsl(current, &rhs)?;
        if id.is_passive() && !current.is_passive() {
            self.tape.release_object::<T>(current)?;
        }
        *self.value.borrow_mut() = value;
        self.id.set(id);
        self.epoch.set(self.tape.epoch());
        Ok(())
    }

    /// Adjoint of this value. Passive values have a zero adjoint.
    pub fn adjoint(&self) -> Result<T, TapeError> {
        let id = self.id();
        if id.is_passive() {
            return Ok(self.value.borrow().zero_like());
        }
        let adj = self.tape.object_adjoint::<T>(id)?;
        Ok(adj.unwrap_or_else(|| self.value.borrow().zero_like()))
    }

    pub fn set_adjoint(&self, value: T) -> Result<(), TapeError> {
        let id = self.id();
        if id.is_passive() {
            return Err(TapeError::PassiveAdjoint);
        }
        self.tape.set_object_adjoint(id, value)
    }
}

impl<R: Real, T: DslType> Drop for ActiveObject<'_, R, T> {
    fn drop(&mut self) {
        let id = self.id();
        if !id.is_passive() {
            let _ = self.tape.release_object::<T>(id);
        }
    }
}

impl<R: Real, T: DslType + fmt::Debug> fmt::Debug for ActiveObject<'_, R, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActiveObject")
            .field("value", &*self.value.borrow())
            .field("id", &self.id().0)
            .finish()
    }
}

impl<R: Real, T: DslType> DslExpr for &ActiveObject<'_, R, T> {
    type Value = T;

    fn value(&self) -> T {
        self.value.borrow().clone()
    }

    fn record(&self, rec: &mut ExprRecorder<'_>) -> Result<Recorded<T>, TapeError> {
        let value = self.value.borrow().clone();
        let active = rec.leaf(
            self.tape as *const Tape<R> as usize,
            self.epoch.get(),
            self.id.get(),
            &value,
        )?;
        Ok(Recorded { value, active })
    }
}

impl<'t, R: Real> DslExpr for &ActiveScalar<'t, R> {
    type Value = R;

    fn value(&self) -> R {
        ActiveScalar::value(self)
    }

    fn record(&self, rec: &mut ExprRecorder<'_>) -> Result<Recorded<R>, TapeError> {
        let value = ActiveScalar::value(self);
        let active = rec.leaf(self.tape_addr(), self.tape().epoch(), self.id(), &value)?;
        Ok(Recorded { value, active })
    }
}
