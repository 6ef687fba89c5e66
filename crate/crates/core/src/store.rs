//! Per-type primal/adjoint vectors with their index managers.

use std::any::Any;
use std::mem::{align_of, size_of};

use crate::codec::{CodecError, DslType};
use crate::index::{Identifier, IndexManager};
use crate::Real;

/// Type-erased access to one type's vectors, used by the reverse sweep
/// and by recording code that only knows a type tag.
pub(crate) trait ErasedStore {
    fn name(&self) -> &'static str;
    fn alignment(&self) -> usize;
    fn manager(&self) -> &IndexManager;

    fn acquire(&mut self) -> Identifier;
    fn release(&mut self, id: Identifier);

    /// Encoded size of a lhs-old-data entry when constant.
    fn old_entry_size(&self) -> Option<usize>;
    fn encode_old(&self, id: Identifier, out: &mut Vec<u8>);
    fn restore_old(&mut self, id: Identifier, bytes: &[u8]) -> Result<(), CodecError>;

    fn set_primal_any(&mut self, id: Identifier, value: &dyn Any);
    fn clone_primal_any(&self, id: Identifier) -> Option<Box<dyn Any>>;
    fn take_adjoint_any(&mut self, id: Identifier) -> Option<Box<dyn Any>>;
    fn accumulate_adjoint_any(&mut self, id: Identifier, add: &dyn Any);
    fn accumulate_boxed(&self, target: &mut Box<dyn Any>, add: &dyn Any);

    fn decode_any(&self, bytes: &[u8]) -> Result<(Box<dyn Any>, usize), CodecError>;

    fn primal_bytes(&self) -> usize;
    fn adjoint_bytes(&self) -> usize;
    fn primal_fingerprint(&self, out: &mut Vec<u8>);
    fn clear_adjoints(&mut self);
    fn reset(&mut self);

    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

fn downcast<'a, T: 'static>(v: &'a dyn Any, store: &'static str) -> &'a T {
    v.downcast_ref::<T>()
        .unwrap_or_else(|| panic!("value passed to store `{store}` has the wrong type"))
}

/// Dense storage for the tape's own real type. Slot 0 is the zero sink.
#[derive(Debug, Clone)]
pub(crate) struct ScalarStore<R> {
    pub primal: Vec<R>,
    pub adjoint: Vec<R>,
    pub manager: IndexManager,
}

impl<R: Real> ScalarStore<R> {
    pub fn new() -> Self {
        Self {
            primal: vec![R::zero()],
            adjoint: vec![R::zero()],
            manager: IndexManager::new(),
        }
    }

    #[inline]
    pub fn acquire_slot(&mut self) -> Identifier {
        let id = self.manager.acquire();
        if id.index() >= self.primal.len() {
            self.primal.resize(id.index() + 1, R::zero());
            self.adjoint.resize(id.index() + 1, R::zero());
        }
        id
    }

    #[inline]
    pub fn release_slot(&mut self, id: Identifier) {
        if self.manager.release(id) {
            self.adjoint[id.index()] = R::zero();
        }
    }
}

impl<R: Real> ErasedStore for ScalarStore<R> {
    fn name(&self) -> &'static str {
        R::NAME
    }
    fn alignment(&self) -> usize {
        align_of::<R>()
    }
    fn manager(&self) -> &IndexManager {
        &self.manager
    }
    fn acquire(&mut self) -> Identifier {
        self.acquire_slot()
    }
    fn release(&mut self, id: Identifier) {
        self.release_slot(id)
    }
    fn old_entry_size(&self) -> Option<usize> {
        Some(size_of::<R>())
    }
    fn encode_old(&self, id: Identifier, out: &mut Vec<u8>) {
        self.primal[id.index()].encode(out);
    }
    fn restore_old(&mut self, id: Identifier, bytes: &[u8]) -> Result<(), CodecError> {
        self.primal[id.index()] = R::decode(bytes)?.0;
        Ok(())
    }
    fn set_primal_any(&mut self, id: Identifier, value: &dyn Any) {
        self.primal[id.index()] = *downcast::<R>(value, R::NAME);
    }
    fn clone_primal_any(&self, id: Identifier) -> Option<Box<dyn Any>> {
        self.primal.get(id.index()).map(|v| Box::new(*v) as Box<dyn Any>)
    }
    fn take_adjoint_any(&mut self, id: Identifier) -> Option<Box<dyn Any>> {
        let slot = &mut self.adjoint[id.index()];
        let v = std::mem::replace(slot, R::zero());
        Some(Box::new(v))
    }
    fn accumulate_adjoint_any(&mut self, id: Identifier, add: &dyn Any) {
        let add = *downcast::<R>(add, R::NAME);
        self.adjoint[id.index()] = self.adjoint[id.index()] + add;
    }
    fn accumulate_boxed(&self, target: &mut Box<dyn Any>, add: &dyn Any) {
        let t = target.downcast_mut::<R>().expect("scalar adjoint type");
        *t = *t + *downcast::<R>(add, R::NAME);
    }
    fn decode_any(&self, bytes: &[u8]) -> Result<(Box<dyn Any>, usize), CodecError> {
        let (v, used) = R::decode(bytes)?;
        Ok((Box::new(v), used))
    }
    fn primal_bytes(&self) -> usize {
        self.primal.len() * size_of::<R>()
    }
    fn adjoint_bytes(&self) -> usize {
        self.adjoint.len() * size_of::<R>()
    }
    fn primal_fingerprint(&self, out: &mut Vec<u8>) {
        for v in &self.primal {
            v.encode(out);
        }
    }
    fn clear_adjoints(&mut self) {
        self.adjoint.iter_mut().for_each(|a| *a = R::zero());
    }
    fn reset(&mut self) {
        *self = Self::new();
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Storage for a registered DSL type. Slots never written hold `None`;
/// a `None` adjoint is a zero adjoint of the primal's shape.
#[derive(Debug, Clone)]
pub(crate) struct ObjectStore<T> {
    pub primal: Vec<Option<T>>,
    pub adjoint: Vec<Option<T>>,
    pub manager: IndexManager,
}

impl<T: DslType> ObjectStore<T> {
    pub fn new() -> Self {
        Self {
            primal: vec![None],
            adjoint: vec![None],
            manager: IndexManager::new(),
        }
    }

    pub fn adjoint_of(&self, id: Identifier) -> Option<T> {
        match (&self.adjoint[id.index()], &self.primal[id.index()]) {
            (Some(a), _) => Some(a.clone()),
            (None, Some(p)) => Some(p.zero_like()),
            (None, None) => None,
        }
    }

    pub fn set_adjoint(&mut self, id: Identifier, value: T) {
        self.adjoint[id.index()] = Some(value);
    }

}

impl<T: DslType> ErasedStore for ObjectStore<T> {
    fn name(&self) -> &'static str {
        T::NAME
    }
    fn alignment(&self) -> usize {
        align_of::<T>()
    }
    fn manager(&self) -> &IndexManager {
        &self.manager
    }
    fn acquire(&mut self) -> Identifier {
        let id = self.manager.acquire();
        if id.index() >= self.primal.len() {
            self.primal.resize(id.index() + 1, None);
            self.adjoint.resize(id.index() + 1, None);
        }
        id
    }
    fn release(&mut self, id: Identifier) {
        if self.manager.release(id) {
            self.adjoint[id.index()] = None;
        }
    }
    fn old_entry_size(&self) -> Option<usize> {
        T::FIXED_SIZE.map(|n| n + 1)
    }
    fn encode_old(&self, id: Identifier, out: &mut Vec<u8>) {
        match &self.primal[id.index()] {
            Some(v) => {
                out.push(1);
                v.encode(out);
            }
            None => {
                out.push(0);
                if let Some(n) = T::FIXED_SIZE {
                    out.resize(out.len() + n, 0);
                }
            }
        }
    }
    fn restore_old(&mut self, id: Identifier, bytes: &[u8]) -> Result<(), CodecError> {
        crate::codec::need(T::NAME, bytes, 1)?;
        self.primal[id.index()] = if bytes[0] == 1 {
            Some(T::decode(&bytes[1..])?.0)
        } else {
            None
        };
        Ok(())
    }
    fn set_primal_any(&mut self, id: Identifier, value: &dyn Any) {
        self.primal[id.index()] = Some(downcast::<T>(value, T::NAME).clone());
    }
    fn clone_primal_any(&self, id: Identifier) -> Option<Box<dyn Any>> {
        self.primal
            .get(id.index())
            .and_then(|v| v.clone())
            .map(|v| Box::new(v) as Box<dyn Any>)
    }
    fn take_adjoint_any(&mut self, id: Identifier) -> Option<Box<dyn Any>> {
        self.adjoint[id.index()]
            .take()
            .map(|v| Box::new(v) as Box<dyn Any>)
    }
    fn accumulate_adjoint_any(&mut self, id: Identifier, add: &dyn Any) {
        let add = downcast::<T>(add, T::NAME);
        match &mut self.adjoint[id.index()] {
            Some(a) => a.accumulate(add),
            slot @ None => *slot = Some(add.clone()),
        }
    }
    fn accumulate_boxed(&self, target: &mut Box<dyn Any>, add: &dyn Any) {
        target
            .downcast_mut::<T>()
            .expect("adjoint type")
            .accumulate(downcast::<T>(add, T::NAME));
    }
    fn decode_any(&self, bytes: &[u8]) -> Result<(Box<dyn Any>, usize), CodecError> {
        let (v, used) = T::decode(bytes)?;
        Ok((Box::new(v), used))
    }
    fn primal_bytes(&self) -> usize {
        self.primal.len() * size_of::<Option<T>>()
            + self.primal.iter().flatten().map(|v| v.heap_bytes()).sum::<usize>()
    }
    fn adjoint_bytes(&self) -> usize {
        self.adjoint.len() * size_of::<Option<T>>()
            + self.adjoint.iter().flatten().map(|v| v.heap_bytes()).sum::<usize>()
    }
    fn primal_fingerprint(&self, out: &mut Vec<u8>) {
        for v in &self.primal {
            match v {
                Some(v) => {
                    out.push(1);
                    v.encode(out);
                }
                None => out.push(0),
            }
        }
    }
    fn clear_adjoints(&mut self) {
        self.adjoint.iter_mut().for_each(|a| *a = None);
    }
    fn reset(&mut self) {
        *self = Self::new();
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
