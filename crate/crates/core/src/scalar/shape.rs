use crate::index::Identifier;
use crate::{Real, TapeError};

/// One node of a scalar expression in postfix order.
///
/// A statement's function handle identifies the whole postfix sequence, so
/// the reverse sweep can re-evaluate the expression from the argument
/// primals and constants alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarOp {
    /// Active argument, read from the rhs-identifier stream.
    Var,
    /// Constant argument, read from the constant stream.
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    /// Integer power with the exponent fixed in the expression.
    PowI(i32),
    /// Real power `a^b`; `b` is a constant in practice.
    Pow,
}

impl ScalarOp {
    pub fn arity(self) -> usize {
        use ScalarOp::*;
        match self {
            Var | Const => 0,
            Neg | Sin | Cos | Exp | Log | Sqrt | PowI(_) => 1,
            Add | Sub | Mul | Div | Pow => 2,
        }
    }

    #[inline]
    pub(crate) fn eval<R: Real>(self, a: R, b: R) -> R {
        use ScalarOp::*;
        match self {
            Add => a + b,
            Sub => a - b,
            Mul => a * b,
            Div => a / b,
            Neg => -a,
            Sin => a.sin(),
            Cos => a.cos(),
            Exp => a.exp(),
            Log => a.ln(),
            Sqrt => a.sqrt(),
            PowI(n) => a.powi(n),
            Pow => a.powf(b),
            Var | Const => unreachable!("leaves are not evaluated"),
        }
    }
}

/// A validated postfix expression with precomputed child links.
#[derive(Debug, Clone)]
pub(crate) struct ScalarShape {
    ops: Box<[ScalarOp]>,
    children: Vec<[u32; 2]>,
    /// Leaf number for `Var`/`Const` nodes.
    leaf: Vec<u32>,
    /// Node depends on at least one `Var`.
    active: Vec<bool>,
    pub n_vars: usize,
    pub n_consts: usize,
}

impl ScalarShape {
    pub fn new(ops: &[ScalarOp]) -> Result<Self, TapeError> {
        let mut stack: Vec<u32> = Vec::new();
        let mut children = Vec::with_capacity(ops.len());
        let mut leaf = Vec::with_capacity(ops.len());
        let mut active = Vec::with_capacity(ops.len());
        let (mut n_vars, mut n_consts) = (0usize, 0usize);
        for (i, op) in ops.iter().enumerate() {
            let arity = op.arity();
            if stack.len() < arity {
                return Err(TapeError::MalformedShape(format!(
                    "node {i} ({op:?}) needs {arity} operands"
                )));
            }
            let mut ch = [u32::MAX; 2];
            for k in (0..arity).rev() {
                ch[k] = stack.pop().unwrap();
            }
            let (leaf_no, is_active) = match op {
                ScalarOp::Var => {
                    n_vars += 1;
                    ((n_vars - 1) as u32, true)
                }
                ScalarOp::Const => {
                    n_consts += 1;
                    ((n_consts - 1) as u32, false)
                }
                _ => (
                    u32::MAX,
                    ch[..arity].iter().any(|&c| active[c as usize]),
                ),
            };
            children.push(ch);
            leaf.push(leaf_no);
            active.push(is_active);
            stack.push(i as u32);
        }
        if stack.len() != 1 {
            return Err(TapeError::MalformedShape(format!(
                "expression leaves {} values on the stack",
                stack.len()
            )));
        }
        Ok(Self {
            ops: ops.into(),
            children,
            leaf,
            active,
            n_vars,
            n_consts,
        })
    }

    pub fn ops(&self) -> &[ScalarOp] {
        &self.ops
    }

    /// Forward value of the expression for the given leaves.
    pub fn evaluate<R: Real>(&self, args: &[R], consts: &[R], vals: &mut Vec<R>) -> R {
        vals.clear();
        for (i, op) in self.ops.iter().enumerate() {
            let v = match op {
                ScalarOp::Var => args[self.leaf[i] as usize],
                ScalarOp::Const => consts[self.leaf[i] as usize],
                _ => {
                    let [a, b] = self.children[i];
                    let a = vals[a as usize];
                    let b = if op.arity() == 2 {
                        vals[b as usize]
                    } else {
                        R::zero()
                    };
                    op.eval(a, b)
                }
            };
            vals.push(v);
        }
        *vals.last().unwrap()
    }

    /// Accumulates `(d expr / d arg)^T * seed` into `adjoint[ids[k]]`.
    pub fn reverse<R: Real>(
        &self,
        ids: &[Identifier],
        consts: &[R],
        primal: &[R],
        adjoint: &mut [R],
        seed: R,
        scratch: &mut ReverseScratch<R>,
    ) {
        let ReverseScratch { args, vals, adj } = scratch;
        args.clear();
        args.extend(ids.iter().map(|id| primal[id.index()]));
        self.evaluate(args, consts, vals);
        adj.clear();
        adj.resize(self.ops.len(), R::zero());
        *adj.last_mut().unwrap() = seed;

        for i in (0..self.ops.len()).rev() {
            if !self.active[i] {
                continue;
            }
            let a = adj[i];
            let op = self.ops[i];
            if op == ScalarOp::Var {
                let id = ids[self.leaf[i] as usize].index();
                adjoint[id] = adjoint[id] + a;
                continue;
            }
            let [c0, c1] = self.children[i];
            let x = vals[c0 as usize];
            let two = R::one() + R::one();
            let (d0, d1) = match op {
                ScalarOp::Add => (a, a),
                ScalarOp::Sub => (a, -a),
                ScalarOp::Mul => (a * vals[c1 as usize], a * x),
                ScalarOp::Div => {
                    let y = vals[c1 as usize];
                    (a / y, -a * x / (y * y))
                }
                ScalarOp::Neg => (-a, R::zero()),
                ScalarOp::Sin => (a * x.cos(), R::zero()),
                ScalarOp::Cos => (-a * x.sin(), R::zero()),
                ScalarOp::Exp => (a * vals[i], R::zero()),
                ScalarOp::Log => (a / x, R::zero()),
                ScalarOp::Sqrt => (a / (two * vals[i]), R::zero()),
                ScalarOp::PowI(n) => {
                    let d = if n == 0 {
                        R::zero()
                    } else {
                        R::from_f64(n as f64) * x.powi(n - 1)
                    };
                    (a * d, R::zero())
                }
                ScalarOp::Pow => {
                    let y = vals[c1 as usize];
                    let d1 = if self.active[c1 as usize] {
                        a * vals[i] * x.ln()
                    } else {
                        R::zero()
                    };
                    (a * y * x.powf(y - R::one()), d1)
                }
                ScalarOp::Var | ScalarOp::Const => unreachable!(),
            };
            if self.active[c0 as usize] {
                adj[c0 as usize] = adj[c0 as usize] + d0;
            }
            if op.arity() == 2 && self.active[c1 as usize] {
                adj[c1 as usize] = adj[c1 as usize] + d1;
            }
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct ReverseScratch<R> {
    args: Vec<R>,
    vals: Vec<R>,
    adj: Vec<R>,
}
