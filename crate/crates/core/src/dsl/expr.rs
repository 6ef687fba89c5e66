use std::any::{Any, TypeId};

use smallvec::SmallVec;

use super::{DslOpDef, OpId};
use crate::codec::{put_u32, CodecError, DslType};
use crate::index::Identifier;
use crate::tape::{Registry, Slot, Stores, TypeTag};
use crate::{Real, TapeError};

/// Value of a sub-expression together with its activity.
#[derive(Debug, Clone)]
pub struct Recorded<T> {
    pub value: T,
    pub active: bool,
}

/// A DSL expression: evaluates its primal value and, when recorded, emits
/// its node structure, active leaves and constants.
pub trait DslExpr {
    type Value: DslType;

    fn value(&self) -> Self::Value;
    fn record(&self, rec: &mut ExprRecorder<'_>) -> Result<Recorded<Self::Value>, TapeError>;
}

/// Postfix node of a DSL statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum DslNode {
    Leaf(TypeTag),
    Const(TypeTag),
    /// Bit `i` of `pattern` is set when argument `i` is active.
    Op { op: OpId, pattern: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct Mark {
    nodes: usize,
    leaves: usize,
    consts: usize,
    n_consts: usize,
    variable: bool,
}

/// Collects one DSL statement while its expression tree is walked.
pub struct ExprRecorder<'a> {
    registry: &'a Registry,
    tape_addr: usize,
    epoch: u32,
    nodes: Vec<DslNode>,
    leaves: Vec<Slot>,
    consts: Vec<u8>,
    n_consts: usize,
    variable: bool,
    foreign: bool,
}

pub(crate) struct PendingStatement {
    pub nodes: Vec<DslNode>,
    pub leaves: Vec<Slot>,
    /// Constant payload including the length trailer when needed.
    pub consts: Vec<u8>,
    pub n_consts: usize,
}

impl<'a> ExprRecorder<'a> {
    pub(crate) fn new(registry: &'a Registry, tape_addr: usize, epoch: u32) -> Self {
        Self {
            registry,
            tape_addr,
            epoch,
            nodes: Vec::new(),
            leaves: Vec::new(),
            consts: Vec::new(),
            n_consts: 0,
            variable: false,
            foreign: false,
        }
    }

    fn tag_of<T: DslType>(&self) -> Result<TypeTag, TapeError> {
        self.registry
            .type_tags
            .get(&TypeId::of::<T>())
            .copied()
            .ok_or(TapeError::UnregisteredType(T::NAME))
    }

    pub fn mark(&self) -> Mark {
        Mark {
            nodes: self.nodes.len(),
            leaves: self.leaves.len(),
            consts: self.consts.len(),
            n_consts: self.n_consts,
            variable: self.variable,
        }
    }

    fn rollback(&mut self, m: Mark) {
        self.nodes.truncate(m.nodes);
        self.leaves.truncate(m.leaves);
        self.consts.truncate(m.consts);
        self.n_consts = m.n_consts;
        self.variable = m.variable;
    }

    /// Emits a constant argument whose value goes to the constant stream.
    pub fn constant<T: DslType>(&mut self, value: &T) -> Result<(), TapeError> {
        let tag = self.tag_of::<T>()?;
        self.nodes.push(DslNode::Const(tag));
        value.encode(&mut self.consts);
        self.n_consts += 1;
        self.variable |= T::FIXED_SIZE.is_none();
        Ok(())
    }

    /// Emits a passive argument and hands its value back.
    pub fn passive<T: DslType>(&mut self, value: T) -> Result<Recorded<T>, TapeError> {
        self.constant(&value)?;
        Ok(Recorded {
            value,
            active: false,
        })
    }

    /// Emits a value stored in a tape vector. Passive or stale identifiers
    /// become constants.
    pub(crate) fn leaf<T: DslType>(
        &mut self,
        tape_addr: usize,
        epoch: u32,
        id: Identifier,
        value: &T,
    ) -> Result<bool, TapeError> {
        if tape_addr != self.tape_addr {
            self.foreign = true;
        }
        if id.is_passive() || epoch != self.epoch {
            self.constant(value)?;
            return Ok(false);
        }
        let tag = self.tag_of::<T>()?;
        self.nodes.push(DslNode::Leaf(tag));
        self.leaves.push(Slot { tag, id });
        Ok(true)
    }

    /// Emits operation `O` over the arguments recorded since `mark`.
    ///
    /// When no argument is active the arguments are dropped again and the
    /// result is stored as a single constant. Returns the activity of the
    /// result.
    pub fn op<O: DslOpDef, T: DslType>(
        &mut self,
        mark: Mark,
        active: &[bool],
        result: &T,
    ) -> Result<bool, TapeError> {
        let pattern = active
            .iter()
            .enumerate()
            .fold(0u32, |p, (i, &a)| if a { p | (1 << i) } else { p });
        if pattern == 0 {
            self.rollback(mark);
            self.constant(result)?;
            return Ok(false);
        }
        let op = self
            .registry
            .op_ids
            .get(&TypeId::of::<O>())
            .copied()
            .ok_or_else(|| TapeError::UnregisteredOp(O::descriptor().name))?;
        self.nodes.push(DslNode::Op { op, pattern });
        Ok(true)
    }

    pub(crate) fn is_foreign(&self) -> bool {
        self.foreign
    }

    pub(crate) fn finish(mut self) -> PendingStatement {
        if self.variable {
            let len = self.consts.len() as u32;
            put_u32(&mut self.consts, len);
        }
        PendingStatement {
            nodes: self.nodes,
            leaves: self.leaves,
            consts: self.consts,
            n_consts: self.n_consts,
        }
    }
}

/// Validated DSL statement structure, the target of a function handle.
#[derive(Debug, Clone)]
pub(crate) struct DslShape {
    nodes: Box<[DslNode]>,
    tags: Vec<TypeTag>,
    children: Vec<SmallVec<[u32; 4]>>,
    leaf: Vec<u32>,
    pub n_consts: usize,
    /// Total constant payload size when every constant has a fixed size.
    pub const_bytes: Option<usize>,
    pub result_tag: TypeTag,
}

impl DslShape {
    pub fn new(nodes: &[DslNode], registry: &Registry) -> Result<Self, TapeError> {
        let mut stack: Vec<u32> = Vec::new();
        let mut tags = Vec::with_capacity(nodes.len());
        let mut children = Vec::with_capacity(nodes.len());
        let mut leaf = Vec::with_capacity(nodes.len());
        let (mut n_leaves, mut n_consts) = (0usize, 0usize);
        let mut const_bytes = Some(0usize);
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                DslNode::Leaf(tag) => {
                    registry.check_tag(tag)?;
                    tags.push(tag);
                    children.push(SmallVec::new());
                    leaf.push(n_leaves as u32);
                    n_leaves += 1;
                }
                DslNode::Const(tag) => {
                    registry.check_tag(tag)?;
                    tags.push(tag);
                    children.push(SmallVec::new());
                    leaf.push(n_consts as u32);
                    n_consts += 1;
                    const_bytes = match (const_bytes, registry.const_size[tag.0 as usize]) {
                        (Some(total), Some(n)) => Some(total + n),
                        _ => None,
                    };
                }
                DslNode::Op { op, pattern } => {
                    let reg = registry.ops.get(op.0 as usize).ok_or_else(|| {
                        TapeError::MalformedShape(format!("unknown operation id {}", op.0))
                    })?;
                    let arity = reg.arg_tags.len();
                    if stack.len() < arity {
                        return Err(TapeError::MalformedShape(format!(
                            "node {i}: `{}` needs {arity} arguments",
                            reg.desc.name
                        )));
                    }
                    let ch: SmallVec<[u32; 4]> = stack.drain(stack.len() - arity..).collect();
                    for (k, &c) in ch.iter().enumerate() {
                        if tags[c as usize] != reg.arg_tags[k] {
                            return Err(TapeError::MalformedShape(format!(
                                "node {i}: argument `{}` of `{}` has the wrong type",
                                reg.desc.args[k].name, reg.desc.name
                            )));
                        }
                        let is_active = pattern & (1 << k) != 0;
                        if is_active && reg.desc.args[k].reverse.is_none() {
                            return Err(TapeError::MalformedShape(format!(
                                "argument `{}` of `{}` is not differentiable",
                                reg.desc.args[k].name, reg.desc.name
                            )));
                        }
                    }
                    if pattern >> arity != 0 || pattern == 0 {
                        return Err(TapeError::MalformedShape(format!(
                            "invalid activity pattern {pattern:#b} for `{}`",
                            reg.desc.name
                        )));
                    }
                    tags.push(reg.result_tag);
                    children.push(ch);
                    leaf.push(u32::MAX);
                }
            }
            stack.push(i as u32);
        }
        if stack.len() != 1 {
            return Err(TapeError::MalformedShape(format!(
                "statement leaves {} values",
                stack.len()
            )));
        }
        Ok(Self {
            nodes: nodes.into(),
            result_tag: *tags.last().unwrap(),
            tags,
            children,
            leaf,
            n_consts,
            const_bytes,
        })
    }

    /// Applies `leaf_i_b += (d stmt / d leaf_i)^T * seed` for every active
    /// leaf, re-evaluating intermediate results from the stored primals.
    pub fn reverse<R: Real>(
        &self,
        registry: &Registry,
        stores: &mut Stores<R>,
        leaves: &[Slot],
        consts: &[u8],
        seed: Box<dyn Any>,
    ) -> Result<(), CodecError> {
        let mut vals: Vec<Box<dyn Any>> = Vec::with_capacity(self.nodes.len());
        let mut cursor = 0usize;
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match *node {
                DslNode::Leaf(tag) => {
                    let slot = leaves[self.leaf[i] as usize];
                    stores
                        .get(tag)
                        .clone_primal_any(slot.id)
                        .expect("active leaf without primal value")
                }
                DslNode::Const(tag) => {
                    let (v, used) = stores.get(tag).decode_any(&consts[cursor..])?;
                    cursor += used;
                    v
                }
                DslNode::Op { op, .. } => {
                    let args: SmallVec<[&dyn Any; 4]> =
                        self.children[i].iter().map(|&c| &*vals[c as usize]).collect();
                    (registry.ops[op.0 as usize].desc.primal)(&args)
                }
            };
            vals.push(v);
        }

        let mut adj: Vec<Option<Box<dyn Any>>> = (0..self.nodes.len()).map(|_| None).collect();
        *adj.last_mut().unwrap() = Some(seed);
        for i in (0..self.nodes.len()).rev() {
            let Some(a) = adj[i].take() else { continue };
            match self.nodes[i] {
                DslNode::Leaf(tag) => {
                    let slot = leaves[self.leaf[i] as usize];
                    stores.get_mut(tag).accumulate_adjoint_any(slot.id, &*a);
                }
                DslNode::Const(_) => {}
                DslNode::Op { op, pattern } => {
                    let desc = &registry.ops[op.0 as usize].desc;
                    let args: SmallVec<[&dyn Any; 4]> =
                        self.children[i].iter().map(|&c| &*vals[c as usize]).collect();
                    for (k, &c) in self.children[i].iter().enumerate() {
                        if pattern & (1 << k) == 0 {
                            continue;
                        }
                        let rev = desc.args[k].reverse.expect("validated at interning");
                        let g = rev(&args, &*vals[i], &*a);
                        match &mut adj[c as usize] {
                            Some(t) => stores.get(self.tags[c as usize]).accumulate_boxed(t, &*g),
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
