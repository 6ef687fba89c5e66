use std::any::{Any, TypeId};
use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::mem::size_of;

use crate::codec::{get_u32, put_u32, DslType};
use crate::dsl::{
    ActiveObject, DslExpr, DslNode, DslOpDef, DslOpDescriptor, DslShape, ExprRecorder, OpId,
    PendingStatement,
};
use crate::index::Identifier;
use crate::memory::MemoryReport;
use crate::scalar::expr::ShapeBuilder;
use crate::scalar::shape::{ReverseScratch, ScalarShape};
use crate::scalar::{ActiveScalar, IntoExpr, ScalarExpr, ScalarOp};
use crate::store::{ErasedStore, ObjectStore, ScalarStore};
use crate::stream::ChunkedStream;
use crate::{Real, TapeError};

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

/// Tag of a registered type; identifiers are unique per tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TypeTag(pub u16);

/// The tape's own real type.
pub const SCALAR_TAG: TypeTag = TypeTag(0);

/// Function handle stored per statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HandleId(pub u32);

impl fmt::Display for HandleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Type-scoped identifier as stored in the lhs and rhs streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(C)]
pub struct Slot {
    pub tag: TypeTag,
    pub id: Identifier,
}

/// Statement passed to the observer of a reverse sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatementInfo {
    pub position: usize,
    pub handle: HandleId,
    pub lhs: Slot,
    pub n_args: usize,
}

pub(crate) enum Handle {
    Scalar(ScalarShape),
    Dsl(DslShape),
}

pub(crate) struct RegisteredOp {
    pub desc: DslOpDescriptor,
    pub arg_tags: Vec<TypeTag>,
    pub result_tag: TypeTag,
}

/// Types, operations and function handles known to a tape.
pub(crate) struct Registry {
    pub type_tags: HashMap<TypeId, TypeTag>,
    pub type_names: Vec<&'static str>,
    pub const_size: Vec<Option<usize>>,
    pub ops: Vec<RegisteredOp>,
    pub op_ids: HashMap<TypeId, OpId>,
    pub handles: Vec<Handle>,
    scalar_shapes: HashMap<Box<[ScalarOp]>, HandleId>,
    dsl_shapes: HashMap<Box<[DslNode]>, HandleId>,
}

impl Registry {
    fn new<R: Real>() -> Self {
        let mut type_tags = HashMap::new();
        type_tags.insert(TypeId::of::<R>(), SCALAR_TAG);
        Self {
            type_tags,
            type_names: vec![R::NAME],
            const_size: vec![R::FIXED_SIZE],
            ops: Vec::new(),
            op_ids: HashMap::new(),
            handles: Vec::new(),
            scalar_shapes: HashMap::new(),
            dsl_shapes: HashMap::new(),
        }
    }

    pub fn check_tag(&self, tag: TypeTag) -> Result<(), TapeError> {
        if (tag.0 as usize) < self.type_names.len() {
            Ok(())
        } else {
            Err(TapeError::MalformedShape(format!("unknown type tag {}", tag.0)))
        }
    }

    fn push_handle(&mut self, h: Handle) -> HandleId {
        let id = HandleId(self.handles.len() as u32);
        self.handles.push(h);
        id
    }

    fn intern_scalar(&mut self, ops: &[ScalarOp]) -> Result<HandleId, TapeError> {
        if let Some(&h) = self.scalar_shapes.get(ops) {
            return Ok(h);
        }
        let shape = ScalarShape::new(ops)?;
        let h = self.push_handle(Handle::Scalar(shape));
        self.scalar_shapes.insert(ops.into(), h);
        Ok(h)
    }

    fn intern_dsl(&mut self, nodes: &[DslNode]) -> Result<HandleId, TapeError> {
        if let Some(&h) = self.dsl_shapes.get(nodes) {
            return Ok(h);
        }
        let shape = DslShape::new(nodes, self)?;
        let h = self.push_handle(Handle::Dsl(shape));
        self.dsl_shapes.insert(nodes.into(), h);
        Ok(h)
    }
}

pub(crate) struct Stores<R> {
    pub scalar: ScalarStore<R>,
    pub objects: Vec<Box<dyn ErasedStore + Send>>,
}

impl<R: Real> Stores<R> {
    pub fn get(&self, tag: TypeTag) -> &dyn ErasedStore {
        if tag == SCALAR_TAG {
            &self.scalar
        } else {
            &*self.objects[tag.0 as usize - 1]
        }
    }

    pub fn get_mut(&mut self, tag: TypeTag) -> &mut dyn ErasedStore {
        if tag == SCALAR_TAG {
            &mut self.scalar
        } else {
            &mut *self.objects[tag.0 as usize - 1]
        }
    }

    fn iter(&self) -> impl Iterator<Item = &dyn ErasedStore> + '_ {
        std::iter::once(&self.scalar as &dyn ErasedStore)
            .chain(self.objects.iter().map(|s| &**s as &dyn ErasedStore))
    }
}

/// The six tape streams.
struct Streams {
    lhs: ChunkedStream<Slot>,
    old: ChunkedStream<u8>,
    handles: ChunkedStream<HandleId>,
    nargs: ChunkedStream<u16>,
    rhs: ChunkedStream<Slot>,
    consts: ChunkedStream<u8>,
    n_consts: usize,
}

impl Streams {
    fn new(chunk: usize) -> Self {
        Self {
            lhs: ChunkedStream::new(chunk),
            old: ChunkedStream::new(chunk),
            handles: ChunkedStream::new(chunk),
            nargs: ChunkedStream::new(chunk),
            rhs: ChunkedStream::new(chunk),
            consts: ChunkedStream::new(chunk),
            n_consts: 0,
        }
    }

    fn clear(&mut self) {
        self.lhs.clear();
        self.old.clear();
        self.handles.clear();
        self.nargs.clear();
        self.rhs.clear();
        self.consts.clear();
        self.n_consts = 0;
    }

    fn push_header(&mut self, lhs: Slot, old: &[u8], handle: HandleId, rhs: &[Slot]) {
        let n = u16::try_from(rhs.len()).expect("more than 65535 active arguments in one statement");
        self.lhs.push(lhs);
        self.old.push_slice(old);
        self.handles.push(handle);
        self.nargs.push(n);
        self.rhs.push_slice(rhs);
    }
}

fn pop_bytes(
    stream: &mut ChunkedStream<u8>,
    n: usize,
    out: &mut Vec<u8>,
    name: &'static str,
    position: usize,
) -> Result<(), TapeError> {
    out.clear();
    if stream.pop_slice_into(n, out) {
        Ok(())
    } else {
        Err(TapeError::StreamUnderflow {
            stream: name,
            position,
        })
    }
}

fn pop_sized(
    stream: &mut ChunkedStream<u8>,
    fixed: Option<usize>,
    out: &mut Vec<u8>,
    name: &'static str,
    position: usize,
) -> Result<(), TapeError> {
    let n = match fixed {
        Some(n) => n,
        None => {
            pop_bytes(stream, 4, out, name, position)?;
            get_u32("length", out).map_err(|source| TapeError::Codec { position, source })?
                as usize
        }
    };
    pop_bytes(stream, n, out, name, position)
}

struct TapeData<R: Real> {
    registry: Registry,
    stores: Stores<R>,
    streams: Streams,
    scratch: ShapeBuilder<R>,
    rev_scratch: ReverseScratch<R>,
    bytes: Vec<u8>,
    slots: Vec<Slot>,
    ids: Vec<Identifier>,
    reals: Vec<R>,
}

/// Primal value tape with index reuse.
///
/// A tape is used from one thread at a time; active values borrow it.
pub struct Tape<R: Real> {
    data: RefCell<TapeData<R>>,
    epoch: Cell<u32>,
    recording: Cell<bool>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> fmt::Debug for Tape<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("recording", &self.recording.get())
            .field("memory", &self.memory_report())
            .finish()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Self::with_chunk_size(DEFAULT_CHUNK_SIZE)
    }

    /// Tape whose streams allocate `chunk` entries at a time.
    pub fn with_chunk_size(chunk: usize) -> Self {
        Self {
            data: RefCell::new(TapeData {
                registry: Registry::new::<R>(),
                stores: Stores {
                    scalar: ScalarStore::new(),
                    objects: Vec::new(),
                },
                streams: Streams::new(chunk),
                scratch: ShapeBuilder::default(),
                rev_scratch: ReverseScratch::default(),
                bytes: Vec::new(),
                slots: Vec::new(),
                ids: Vec::new(),
                reals: Vec::new(),
            }),
            epoch: Cell::new(0),
            recording: Cell::new(false),
        }
    }

    #[inline]
    pub(crate) fn epoch(&self) -> u32 {
        self.epoch.get()
    }

    #[inline]
    fn addr(&self) -> usize {
        self as *const Self as usize
    }

    pub fn start_recording(&self) {
        self.recording.set(true);
    }

    pub fn stop_recording(&self) {
        self.recording.set(false);
    }

    #[inline]
    pub fn is_recording(&self) -> bool {
        self.recording.get()
    }

    /// New independent variable with its own identifier.
    pub fn register_input(&self, value: R) -> ActiveScalar<'_, R> {
        let mut data = self.data.borrow_mut();
        let id = data.stores.scalar.acquire_slot();
        data.stores.scalar.primal[id.index()] = value;
        ActiveScalar::from_parts(self, value, id)
    }

    /// Passive variable bound to this tape.
    pub fn var(&self, value: R) -> ActiveScalar<'_, R> {
        ActiveScalar::passive(self, value)
    }

    /// Assigns an expression to a fresh variable.
    pub fn eval<X: IntoExpr>(&self, rhs: X) -> ActiveScalar<'_, R>
    where
        X::Expr: ScalarExpr<Real = R>,
    {
        let v = self.var(R::zero());
        v.assign(rhs);
        v
    }

    pub(crate) fn release_scalar(&self, id: Identifier) {
        if let Ok(mut data) = self.data.try_borrow_mut() {
            data.stores.scalar.release_slot(id);
        }
    }

    pub(crate) fn assign_scalar<E: ScalarExpr<Real = R>>(&self, lhs: &ActiveScalar<'_, R>, rhs: &E) {
        let value = rhs.value();
        if !self.recording.get() {
            lhs.set_value(value);
            return;
        }
        let mut guard = self.data.borrow_mut();
        let data = &mut *guard;
        data.scratch.reset(self.addr(), self.epoch());
        rhs.encode(&mut data.scratch);
        assert!(
            !data.scratch.foreign,
            "expression mixes active values of different tapes"
        );
        if data.scratch.ids.is_empty() {
            drop(guard);
            lhs.set_value(value);
            return;
        }
        let mut id = lhs.id();
        if id.is_passive() {
            id = data.stores.scalar.acquire_slot();
        }
        let handle = data
            .registry
            .intern_scalar(&data.scratch.ops)
            .expect("expression templates emit well-formed postfix");
        let TapeData {
            streams,
            stores,
            scratch,
            bytes,
            slots,
            ..
        } = data;
        push_scalar(streams, stores, bytes, slots, id, handle, &scratch.ids, &scratch.consts, value);
        drop(guard);
        lhs.set_state(value, id);
    }

    /// Interns an expression shape and returns its function handle.
    pub fn intern_shape(&self, ops: &[ScalarOp]) -> Result<HandleId, TapeError> {
        self.data.borrow_mut().registry.intern_scalar(ops)
    }

    /// Low-level recording of one scalar statement.
    ///
    /// Returns `Ok(false)` without storing anything when the tape is not
    /// recording.
    pub fn record_statement(
        &self,
        lhs: Identifier,
        handle: HandleId,
        args: &[Identifier],
        constants: &[R],
        new_primal: R,
    ) -> Result<bool, TapeError> {
        if !self.recording.get() {
            return Ok(false);
        }
        let mut guard = self.data.borrow_mut();
        let data = &mut *guard;
        if lhs.is_passive() {
            return Err(TapeError::InvalidStatement("passive lhs".into()));
        }
        let hw = data.stores.scalar.manager.high_water();
        for &id in std::iter::once(&lhs).chain(args) {
            if id.0 > hw {
                return Err(TapeError::IdentifierOutOfRange {
                    type_name: R::NAME.into(),
                    id: id.0,
                    high_water: hw,
                });
            }
        }
        match data.registry.handles.get(handle.0 as usize) {
            Some(Handle::Scalar(shape)) => {
                if shape.n_vars != args.len() || shape.n_consts != constants.len() {
                    return Err(TapeError::InvalidStatement(format!(
                        "handle {handle} takes {} arguments and {} constants",
                        shape.n_vars, shape.n_consts
                    )));
                }
            }
            Some(Handle::Dsl(_)) => {
                return Err(TapeError::InvalidStatement(format!(
                    "handle {handle} is a DSL handle"
                )))
            }
            None => {
                return Err(TapeError::UnregisteredHandle {
                    handle,
                    position: data.streams.handles.len(),
                })
            }
        }
        let TapeData {
            streams,
            stores,
            bytes,
            slots,
            ..
        } = data;
        push_scalar(streams, stores, bytes, slots, lhs, handle, args, constants, new_primal);
        Ok(true)
    }

    fn check_id(&self, tag: TypeTag, id: Identifier) -> Result<(), TapeError> {
        let data = self.data.borrow();
        let store = data.stores.get(tag);
        let hw = store.manager().high_water();
        if id.0 > hw {
            return Err(TapeError::IdentifierOutOfRange {
                type_name: store.name().into(),
                id: id.0,
                high_water: hw,
            });
        }
        Ok(())
    }

    pub fn set_gradient(&self, id: Identifier, value: R) -> Result<(), TapeError> {
        if id.is_passive() {
            return Err(TapeError::PassiveAdjoint);
        }
        self.check_id(SCALAR_TAG, id)?;
        self.data.borrow_mut().stores.scalar.adjoint[id.index()] = value;
        Ok(())
    }

    /// Adjoint at `id`; the passive identifier always reads zero.
    pub fn gradient(&self, id: Identifier) -> Result<R, TapeError> {
        self.check_id(SCALAR_TAG, id)?;
        Ok(self.data.borrow().stores.scalar.adjoint[id.index()])
    }

    // ---- DSL types and operations ----

    /// Gives type `T` its own primal/adjoint vectors and index manager.
    pub fn register_type<T: DslType + Send>(&self) -> Result<TypeTag, TapeError> {
        let mut data = self.data.borrow_mut();
        if data.registry.type_tags.contains_key(&TypeId::of::<T>()) {
            return Err(TapeError::DuplicateType(T::NAME));
        }
        let tag = TypeTag(u16::try_from(data.registry.type_names.len()).expect("too many types"));
        data.registry.type_tags.insert(TypeId::of::<T>(), tag);
        data.registry.type_names.push(T::NAME);
        data.registry.const_size.push(T::FIXED_SIZE);
        data.stores.objects.push(Box::new(ObjectStore::<T>::new()));
        Ok(tag)
    }

    pub fn type_tag<T: 'static>(&self) -> Option<TypeTag> {
        self.data.borrow().registry.type_tags.get(&TypeId::of::<T>()).copied()
    }

    fn require_tag<T: DslType>(&self) -> Result<TypeTag, TapeError> {
        self.type_tag::<T>().ok_or(TapeError::UnregisteredType(T::NAME))
    }

    /// Registers operation `O`; its argument and result types must be
    /// registered first. Registering twice returns the existing id.
    pub fn register_op<O: DslOpDef>(&self) -> Result<OpId, TapeError> {
        let mut data = self.data.borrow_mut();
        if let Some(&id) = data.registry.op_ids.get(&TypeId::of::<O>()) {
            return Ok(id);
        }
        let desc = O::descriptor();
        let lookup = |t: TypeId, name: &'static str| {
            data.registry
                .type_tags
                .get(&t)
                .copied()
                .ok_or(TapeError::UnregisteredType(name))
        };
        let arg_tags = desc
            .args
            .iter()
            .map(|a| lookup(a.type_id, a.type_name))
            .collect::<Result<Vec<_>, _>>()?;
        let result_tag = lookup(desc.result_type, desc.result_name)?;
        if arg_tags.len() > 32 {
            return Err(TapeError::InvalidStatement(format!(
                "operation `{}` has more than 32 arguments",
                desc.name
            )));
        }
        let id = OpId(data.registry.ops.len() as u32);
        data.registry.ops.push(crate::tape::RegisteredOp {
            desc,
            arg_tags,
            result_tag,
        });
        data.registry.op_ids.insert(TypeId::of::<O>(), id);
        Ok(id)
    }

    /// Passive DSL value bound to this tape.
    pub fn object<T: DslType>(&self, value: T) -> ActiveObject<'_, R, T> {
        ActiveObject::passive(self, value)
    }

    /// New independent DSL variable.
    pub fn register_object_input<T: DslType>(
        &self,
        value: T,
    ) -> Result<ActiveObject<'_, R, T>, TapeError> {
        let tag = self.require_tag::<T>()?;
        let mut data = self.data.borrow_mut();
        let store = data.stores.get_mut(tag);
        let id = store.acquire();
        store.set_primal_any(id, &value);
        drop(data);
        Ok(ActiveObject::from_parts(self, value, id))
    }

    /// Assigns a DSL expression to a fresh object.
    pub fn eval_dsl<E: DslExpr>(&self, rhs: E) -> Result<ActiveObject<'_, R, E::Value>, TapeError> {
        let (value, id) = self.assign_dsl(Identifier::PASSIVE, &rhs)?;
        Ok(ActiveObject::from_parts(self, value, id))
    }

    pub(crate) fn release_object<T: DslType>(&self, id: Identifier) -> Result<(), TapeError> {
        let tag = self.require_tag::<T>()?;
        if let Ok(mut data) = self.data.try_borrow_mut() {
            data.stores.get_mut(tag).release(id);
        }
        Ok(())
    }

    pub(crate) fn object_adjoint<T: DslType>(&self, id: Identifier) -> Result<Option<T>, TapeError> {
        let tag = self.require_tag::<T>()?;
        self.check_id(tag, id)?;
        let data = self.data.borrow();
        if tag == SCALAR_TAG {
            let v = data.stores.scalar.adjoint[id.index()];
            return Ok((&v as &dyn Any).downcast_ref::<T>().cloned());
        }
        let store = data.stores.get(tag).as_any().downcast_ref::<ObjectStore<T>>().unwrap();
        Ok(store.adjoint_of(id))
    }

    pub(crate) fn set_object_adjoint<T: DslType>(&self, id: Identifier, value: T) -> Result<(), TapeError> {
        let tag = self.require_tag::<T>()?;
        self.check_id(tag, id)?;
        let mut data = self.data.borrow_mut();
        if tag == SCALAR_TAG {
            data.stores.scalar.adjoint[id.index()] = *(&value as &dyn Any).downcast_ref::<R>().unwrap();
            return Ok(());
        }
        let store = data
            .stores
            .get_mut(tag)
            .as_any_mut()
            .downcast_mut::<ObjectStore<T>>()
            .unwrap();
        store.set_adjoint(id, value);
        Ok(())
    }

    /// Records `lhs = rhs` for a DSL expression. Returns the new value and
    /// the identifier the lhs must carry (passive when nothing was
    /// recorded; the caller releases its old identifier in that case).
    pub(crate) fn assign_dsl<E: DslExpr>(
        &self,
        current: Identifier,
        rhs: &E,
    ) -> Result<(E::Value, Identifier), TapeError> {
        if !self.recording.get() {
            return Ok((rhs.value(), Identifier::PASSIVE));
        }
        let tag = self.require_tag::<E::Value>()?;
        let (pending, rec) = {
            let data = self.data.borrow();
            let mut recorder = ExprRecorder::new(&data.registry, self.addr(), self.epoch());
            let rec = rhs.record(&mut recorder)?;
            assert!(
                !recorder.is_foreign(),
                "expression mixes active values of different tapes"
            );
            (recorder.finish(), rec)
        };
        if !rec.active {
            return Ok((rec.value, Identifier::PASSIVE));
        }
        let mut guard = self.data.borrow_mut();
        let data = &mut *guard;
        let handle = data.registry.intern_dsl(&pending.nodes)?;
        let Handle::Dsl(shape) = &data.registry.handles[handle.0 as usize] else {
            unreachable!()
        };
        if shape.result_tag != tag {
            return Err(TapeError::MalformedShape(format!(
                "statement result is `{}`, lhs is `{}`",
                data.registry.type_names[shape.result_tag.0 as usize],
                E::Value::NAME
            )));
        }
        let id = if current.is_passive() {
            data.stores.get_mut(tag).acquire()
        } else {
            current
        };
        push_dsl(data, Slot { tag, id }, handle, pending, &rec.value);
        Ok((rec.value, id))
    }

    // ---- reverse evaluation ----

    pub fn evaluate_reverse(&self) -> Result<(), TapeError> {
        self.evaluate_reverse_with(|_| {})
    }

    /// Reverse sweep that reports every statement before evaluating it.
    ///
    /// For each statement, last to first: the lhs adjoint is read and
    /// zeroed, the lhs primal is restored to its value before the
    /// statement, then the handle accumulates the argument adjoints. The
    /// streams are consumed.
    pub fn evaluate_reverse_with<F: FnMut(StatementInfo)>(&self, mut observe: F) -> Result<(), TapeError> {
        if self.recording.get() {
            return Err(TapeError::StillRecording);
        }
        let mut guard = self.data.borrow_mut();
        let TapeData {
            registry,
            stores,
            streams,
            rev_scratch,
            bytes,
            slots,
            ids,
            reals,
            ..
        } = &mut *guard;
        let underflow = |stream, position| TapeError::StreamUnderflow { stream, position };
        let mut position = streams.handles.len();
        while let Some(handle) = streams.handles.pop() {
            position -= 1;
            let lhs = streams.lhs.pop().ok_or(underflow("lhsIds", position))?;
            let n_args = streams.nargs.pop().ok_or(underflow("activeArgs", position))? as usize;
            slots.clear();
            if !streams.rhs.pop_slice_into(n_args, slots) {
                return Err(underflow("rhsIds", position));
            }
            let h = registry
                .handles
                .get(handle.0 as usize)
                .ok_or(TapeError::UnregisteredHandle { handle, position })?;
            observe(StatementInfo {
                position,
                handle,
                lhs,
                n_args,
            });
            let codec = |source| TapeError::Codec { position, source };

            if lhs.tag == SCALAR_TAG {
                let idx = lhs.id.index();
                if idx >= stores.scalar.adjoint.len() {
                    return Err(TapeError::IdentifierOutOfRange {
                        type_name: R::NAME.into(),
                        id: lhs.id.0,
                        high_water: stores.scalar.manager.high_water(),
                    });
                }
                let seed = std::mem::replace(&mut stores.scalar.adjoint[idx], R::zero());
                pop_bytes(&mut streams.old, size_of::<R>(), bytes, "lhsOldData", position)?;
                stores.scalar.primal[idx] = R::decode(bytes).map_err(codec)?.0;
                match h {
                    Handle::Scalar(shape) => {
                        let n = shape.n_consts;
                        pop_bytes(&mut streams.consts, n * size_of::<R>(), bytes, "constants", position)?;
                        streams.n_consts -= n;
                        if seed == R::zero() {
                            continue;
                        }
                        reals.clear();
                        for chunk in bytes.chunks_exact(size_of::<R>()) {
                            reals.push(R::decode(chunk).map_err(codec)?.0);
                        }
                        ids.clear();
                        ids.extend(slots.iter().map(|s| s.id));
                        let ScalarStore {
                            primal, adjoint, ..
                        } = &mut stores.scalar;
                        shape.reverse(ids, reals, primal, adjoint, seed, rev_scratch);
                    }
                    Handle::Dsl(shape) => {
                        pop_sized(&mut streams.consts, shape.const_bytes, bytes, "constants", position)?;
                        streams.n_consts -= shape.n_consts;
                        if seed != R::zero() {
                            shape
                                .reverse(registry, stores, slots, bytes, Box::new(seed))
                                .map_err(codec)?;
                        }
                    }
                }
            } else {
                let store = stores.get_mut(lhs.tag);
                if lhs.id.0 > store.manager().high_water() {
                    return Err(TapeError::IdentifierOutOfRange {
                        type_name: store.name().into(),
                        id: lhs.id.0,
                        high_water: store.manager().high_water(),
                    });
                }
                let seed = store.take_adjoint_any(lhs.id);
                let fixed = store.old_entry_size();
                pop_sized(&mut streams.old, fixed, bytes, "lhsOldData", position)?;
                stores.get_mut(lhs.tag).restore_old(lhs.id, bytes).map_err(codec)?;
                let Handle::Dsl(shape) = h else {
                    return Err(TapeError::InvalidStatement(format!(
                        "scalar handle {handle} with a DSL lhs at statement {position}"
                    )));
                };
                pop_sized(&mut streams.consts, shape.const_bytes, bytes, "constants", position)?;
                streams.n_consts -= shape.n_consts;
                if let Some(seed) = seed {
                    shape
                        .reverse(registry, stores, slots, bytes, seed)
                        .map_err(codec)?;
                }
            }
        }
        if !streams.lhs.is_empty() || !streams.rhs.is_empty() || !streams.consts.is_empty() {
            return Err(underflow("handles", 0));
        }
        Ok(())
    }

    /// Handles of all recorded statements in recording order.
    pub fn statement_handles(&self) -> Vec<HandleId> {
        self.data.borrow().streams.handles.iter().copied().collect()
    }

    /// Zeroes every adjoint of every type.
    pub fn clear_adjoints(&self) {
        let mut data = self.data.borrow_mut();
        data.stores.scalar.adjoint.iter_mut().for_each(|a| *a = R::zero());
        for s in &mut data.stores.objects {
            s.clear_adjoints();
        }
    }

    /// Clears the streams, all adjoints and all index managers. Active
    /// values created before the reset become passive. Registered types,
    /// operations and handles are kept.
    pub fn reset(&self) {
        let mut data = self.data.borrow_mut();
        data.streams.clear();
        data.stores.scalar.reset();
        for s in &mut data.stores.objects {
            s.reset();
        }
        self.epoch.set(self.epoch.get().wrapping_add(1));
    }

    /// Encoded primal vectors of every type, trailing unused slots
    /// excluded. Used to check that a reverse sweep restores all primals.
    pub fn primal_snapshot(&self) -> Vec<Vec<u8>> {
        let data = self.data.borrow();
        let mut out = Vec::new();
        let zero = {
            let mut z = Vec::new();
            R::zero().encode(&mut z);
            z
        };
        let mut scalar = Vec::new();
        data.stores.scalar.primal_fingerprint(&mut scalar);
        while scalar.len() >= zero.len() && scalar.ends_with(&zero) {
            scalar.truncate(scalar.len() - zero.len());
        }
        out.push(scalar);
        for s in &data.stores.objects {
            let mut bytes = Vec::new();
            s.primal_fingerprint(&mut bytes);
            while bytes.last() == Some(&0) && bytes.len() > 1 {
                bytes.pop();
            }
            out.push(bytes);
        }
        out
    }

    /// Highest identifier handed out for `tag` and the number of live ones.
    pub fn index_stats(&self, tag: TypeTag) -> Option<(u32, usize)> {
        let data = self.data.borrow();
        if tag.0 as usize >= data.registry.type_names.len() {
            return None;
        }
        let m = data.stores.get(tag).manager();
        Some((m.high_water(), m.live_count()))
    }

    /// Alignment of `tag`'s vector elements.
    pub fn alignment(&self, tag: TypeTag) -> Option<usize> {
        let data = self.data.borrow();
        (usize::from(tag.0) < data.registry.type_names.len()).then(|| data.stores.get(tag).alignment())
    }

    /// Postfix operations of a scalar handle.
    pub fn scalar_shape(&self, handle: HandleId) -> Option<Vec<ScalarOp>> {
        match self.data.borrow().registry.handles.get(handle.0 as usize)? {
            Handle::Scalar(s) => Some(s.ops().to_vec()),
            Handle::Dsl(_) => None,
        }
    }

    pub fn handle_count(&self) -> usize {
        self.data.borrow().registry.handles.len()
    }

    pub fn memory_report(&self) -> MemoryReport {
        let data = self.data.borrow();
        let s = &data.streams;
        let mut bytes = std::collections::BTreeMap::new();
        let entries = [
            ("lhsIds", s.lhs.used_bytes()),
            ("lhsOldData", s.old.used_bytes()),
            ("handles", s.handles.used_bytes()),
            ("activeArgs", s.nargs.used_bytes()),
            ("rhsIds", s.rhs.used_bytes()),
            ("constants", s.consts.used_bytes()),
        ];
        let stmt: usize = entries[..4].iter().map(|e| e.1).sum();
        let tape: usize = entries.iter().map(|e| e.1).sum();
        for (k, v) in entries {
            bytes.insert(k.to_string(), v);
        }
        bytes.insert("stmtStream".into(), stmt);
        bytes.insert("tape".into(), tape);
        bytes.insert(
            "allocated".into(),
            s.lhs.allocated_bytes()
                + s.old.allocated_bytes()
                + s.handles.allocated_bytes()
                + s.nargs.allocated_bytes()
                + s.rhs.allocated_bytes()
                + s.consts.allocated_bytes(),
        );
        for store in data.stores.iter() {
            bytes.insert(format!("primal:{}", store.name()), store.primal_bytes());
            bytes.insert(format!("adjoint:{}", store.name()), store.adjoint_bytes());
        }
        MemoryReport {
            statements: s.handles.len(),
            rhs_ids: s.rhs.len(),
            constants: s.n_consts,
            bytes,
        }
    }
}

impl<'t, R: Real> ActiveScalar<'t, R> {
    /// Records `self = rhs` for a DSL expression with a real result.
    pub fn assign_dsl<E: DslExpr<Value = R>>(&self, rhs: E) -> Result<(), TapeError> {
        let current = self.id();
        let (value, id) = self.tape().assign_dsl(current, &rhs)?;
        if id.is_passive() {
            self.set_value(value);
        } else {
            self.set_state(value, id);
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn push_scalar<R: Real>(
    streams: &mut Streams,
    stores: &mut Stores<R>,
    bytes: &mut Vec<u8>,
    slots: &mut Vec<Slot>,
    lhs: Identifier,
    handle: HandleId,
    args: &[Identifier],
    constants: &[R],
    value: R,
) {
    bytes.clear();
    stores.scalar.primal[lhs.index()].encode(bytes);
    slots.clear();
    slots.extend(args.iter().map(|&id| Slot { tag: SCALAR_TAG, id }));
    streams.push_header(Slot { tag: SCALAR_TAG, id: lhs }, bytes, handle, slots);
    bytes.clear();
    for c in constants {
        c.encode(bytes);
    }
    streams.consts.push_slice(bytes);
    streams.n_consts += constants.len();
    stores.scalar.primal[lhs.index()] = value;
}

fn push_dsl<R: Real>(
    data: &mut TapeData<R>,
    lhs: Slot,
    handle: HandleId,
    pending: PendingStatement,
    value: &dyn Any,
) {
    let TapeData {
        streams,
        stores,
        bytes,
        ..
    } = data;
    let store = stores.get_mut(lhs.tag);
    bytes.clear();
    store.encode_old(lhs.id, bytes);
    if store.old_entry_size().is_none() {
        let len = bytes.len() as u32;
        put_u32(bytes, len);
    }
    streams.push_header(lhs, bytes, handle, &pending.leaves);
    streams.consts.push_slice(&pending.consts);
    streams.n_consts += pending.n_consts;
    store.set_primal_any(lhs.id, value);
}
