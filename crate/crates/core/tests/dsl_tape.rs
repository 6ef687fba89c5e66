use std::any::Any;

use dslad::dsl::{arg, value};
use dslad::{
    fd, ActiveObject, DslExpr, DslOpDef, DslOpDescriptor, DslType, ExprRecorder, Recorded, Tape,
    TapeError,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M = DMatrix<f64>;
type V = DVector<f64>;

// ---- hand-written operations ----

struct MatVec;
impl DslOpDef for MatVec {
    fn descriptor() -> DslOpDescriptor {
        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {
            Box::new(arg::<M>(a, 0) * arg::<V>(a, 1))
        }
        fn rev_m(a: &[&dyn Any], _r: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(value::<V>(rb) * arg::<V>(a, 1).transpose())
        }
        fn rev_v(a: &[&dyn Any], _r: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(arg::<M>(a, 0).transpose() * value::<V>(rb))
        }
        DslOpDescriptor::new::<V>("mult", primal)
            .arg::<M>("m", Some(rev_m))
            .arg::<V>("v", Some(rev_v))
    }
}

struct VecSub;
impl DslOpDef for VecSub {
    fn descriptor() -> DslOpDescriptor {
        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {
            Box::new(arg::<V>(a, 0) - arg::<V>(a, 1))
        }
        fn rev_a(_: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(value::<V>(rb).clone())
        }
        fn rev_b(_: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(-value::<V>(rb))
        }
        DslOpDescriptor::new::<V>("sub", primal)
            .arg::<V>("a", Some(rev_a))
            .arg::<V>("b", Some(rev_b))
    }
}

/// r = M^{-1} (v2 - v1) + v1
struct Solve;
impl DslOpDef for Solve {
    fn descriptor() -> DslOpDescriptor {
        fn inner(a: &[&dyn Any]) -> V {
            let m = arg::<M>(a, 0);
            m.clone().lu().solve(&(arg::<V>(a, 2) - arg::<V>(a, 1))).unwrap()
        }
        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {
            Box::new(inner(a) + arg::<V>(a, 1))
        }
        fn s_bar(a: &[&dyn Any], rb: &dyn Any) -> V {
            arg::<M>(a, 0).transpose().lu().solve(value::<V>(rb)).unwrap()
        }
        fn rev_m(a: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(-(s_bar(a, rb) * inner(a).transpose()))
        }
        fn rev_v1(a: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(value::<V>(rb) - s_bar(a, rb))
        }
        fn rev_v2(a: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(s_bar(a, rb))
        }
        DslOpDescriptor::new::<V>("solve", primal)
            .arg::<M>("m", Some(rev_m))
            .arg::<V>("v1", Some(rev_v1))
            .arg::<V>("v2", Some(rev_v2))
    }
}

/// Scalar valued dot product.
struct Dot;
impl DslOpDef for Dot {
    fn descriptor() -> DslOpDescriptor {
        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {
            Box::new(arg::<V>(a, 0).dot(arg::<V>(a, 1)))
        }
        fn rev_a(a: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(arg::<V>(a, 1) * *value::<f64>(rb))
        }
        fn rev_b(a: &[&dyn Any], _: &dyn Any, rb: &dyn Any) -> Box<dyn Any> {
            Box::new(arg::<V>(a, 0) * *value::<f64>(rb))
        }
        DslOpDescriptor::new::<f64>("dot", primal)
            .arg::<V>("a", Some(rev_a))
            .arg::<V>("b", Some(rev_b))
    }
}

// ---- expression nodes ----

struct P<T>(T);
impl<T: DslType> DslExpr for P<T> {
    type Value = T;
    fn value(&self) -> T {
        self.0.clone()
    }
    fn record(&self, rec: &mut ExprRecorder<'_>) -> Result<Recorded<T>, TapeError> {
        rec.passive(self.0.clone())
    }
}

macro_rules! op_expr {
    ($name:ident, $op:ty, $out:ty, $($f:ident : $t:ty),+) => {
        #[allow(non_camel_case_types)]
        struct $name<$($f),+>($($f),+);
        impl<$($f: DslExpr<Value = $t>),+> DslExpr for $name<$($f),+> {
            type Value = $out;
            fn value(&self) -> $out {
                #[allow(non_snake_case)]
                let $name($($f),+) = self;
                let vals = ($($f.value(),)+);
                compute::<$op, $out>(&vals)
            }
            fn record(&self, rec: &mut ExprRecorder<'_>) -> Result<Recorded<$out>, TapeError> {
                #[allow(non_snake_case)]
                let $name($($f),+) = self;
                let mark = rec.mark();
                let recs = ($($f.record(rec)?,)+);
                let (vals, active) = split(recs);
                let value: $out = compute::<$op, $out>(&vals);
                let active = rec.op::<$op, $out>(mark, &active, &value)?;
                Ok(Recorded { value, active })
            }
        }
    };
}

trait Args {
    type Vals;
    fn split(self) -> (Self::Vals, Vec<bool>);
}
impl<A, B> Args for (Recorded<A>, Recorded<B>) {
    type Vals = (A, B);
    fn split(self) -> ((A, B), Vec<bool>) {
        ((self.0.value, self.1.value), vec![self.0.active, self.1.active])
    }
}
impl<A, B, C> Args for (Recorded<A>, Recorded<B>, Recorded<C>) {
    type Vals = (A, B, C);
    fn split(self) -> ((A, B, C), Vec<bool>) {
        (
            (self.0.value, self.1.value, self.2.value),
            vec![self.0.active, self.1.active, self.2.active],
        )
    }
}
fn split<X: Args>(x: X) -> (X::Vals, Vec<bool>) {
    x.split()
}

trait Tuple {
    fn refs(&self) -> Vec<&dyn Any>;
}
impl<A: 'static, B: 'static> Tuple for (A, B) {
    fn refs(&self) -> Vec<&dyn Any> {
        vec![&self.0, &self.1]
    }
}
impl<A: 'static, B: 'static, C: 'static> Tuple for (A, B, C) {
    fn refs(&self) -> Vec<&dyn Any> {
        vec![&self.0, &self.1, &self.2]
    }
}
fn compute<O: DslOpDef, T: 'static>(vals: &dyn Tuple) -> T {
    *((O::descriptor().primal)(&vals.refs())).downcast::<T>().unwrap()
}

op_expr!(Mul, MatVec, V, A: M, B: V);
op_expr!(Sub, VecSub, V, A: V, B: V);
op_expr!(Slv, Solve, V, A: M, B: V, C: V);
op_expr!(DotE, Dot, f64, A: V, B: V);

fn setup() -> Tape<f64> {
    let tape = Tape::<f64>::new();
    tape.register_type::<M>().unwrap();
    tape.register_type::<V>().unwrap();
    tape.register_op::<MatVec>().unwrap();
    tape.register_op::<VecSub>().unwrap();
    tape.register_op::<Solve>().unwrap();
    tape.register_op::<Dot>().unwrap();
    tape
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> M {
    // diagonally dominant, hence well conditioned
    M::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { n as f64 } else { 0.0 })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> V {
    V::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn types_have_independent_index_managers() {
    let tape = setup();
    let mt = tape.type_tag::<M>().unwrap();
    let vt = tape.type_tag::<V>().unwrap();
    let ms: Vec<_> = (0..3).map(|_| tape.register_object_input(M::zeros(2, 2)).unwrap()).collect();
    assert_eq!(tape.index_stats(mt), Some((3, 3)));
    assert_eq!(tape.index_stats(vt), Some((0, 0)));
    let v = tape.register_object_input(V::zeros(2)).unwrap();
    assert_eq!(v.id().0, 1);
    assert_eq!(tape.index_stats(dslad::SCALAR_TAG), Some((0, 0)));
    drop(ms);
    assert_eq!(tape.index_stats(mt), Some((3, 0)));
}

#[test]
fn interleaved_acquires_per_type() {
    let tape = Tape::<f64>::new();
    let tags = [
        tape.register_type::<M>().unwrap(),
        tape.register_type::<V>().unwrap(),
        tape.register_type::<f32>().unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut keep_m = Vec::new();
    let mut keep_v = Vec::new();
    let mut keep_f = Vec::new();
    let mut counts = [0u32; 3];
    for _ in 0..300 {
        let k = rng.gen_range(0..3);
        counts[k] += 1;
        match k {
            0 => keep_m.push(tape.register_object_input(M::zeros(1, 1)).unwrap()),
            1 => keep_v.push(tape.register_object_input(V::zeros(1)).unwrap()),
            _ => keep_f.push(tape.register_object_input(0.5f32).unwrap()),
        }
    }
    for (t, c) in tags.iter().zip(counts) {
        assert_eq!(tape.index_stats(*t), Some((c, c as usize)));
    }
}

#[test]
fn registration_errors() {
    let tape = Tape::<f64>::new();
    assert!(matches!(tape.register_op::<MatVec>(), Err(TapeError::UnregisteredType(_))));
    tape.register_type::<M>().unwrap();
    assert!(matches!(tape.register_type::<M>(), Err(TapeError::DuplicateType(_))));
    assert!(matches!(tape.register_type::<f64>(), Err(TapeError::DuplicateType(_))));
    tape.register_type::<V>().unwrap();
    let v = tape.register_object_input(V::zeros(2)).unwrap();
    let m = tape.object(M::identity(2, 2));
    tape.start_recording();
    let err = tape.eval_dsl(Mul(&m, &v)).unwrap_err();
    assert!(matches!(err, TapeError::UnregisteredOp("mult")));
    assert!(matches!(
        tape.register_object_input(Bytes(vec![1u8])).map(|_| ()),
        Err(TapeError::UnregisteredType(_))
    ));
}

#[derive(Clone)]
struct Bytes(Vec<u8>);
impl DslType for Bytes {
    const NAME: &'static str = "bytes";
    const FIXED_SIZE: Option<usize> = None;
    fn zero_like(&self) -> Self {
        Bytes(vec![0; self.0.len()])
    }
    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = a.wrapping_add(*b);
        }
    }
    fn encode(&self, out: &mut Vec<u8>) {
        dslad::codec::put_u32(out, self.0.len() as u32);
        out.extend_from_slice(&self.0);
    }
    fn decode(bytes: &[u8]) -> Result<(Self, usize), dslad::CodecError> {
        let n = dslad::codec::get_u32("bytes", bytes)? as usize;
        Ok((Bytes(bytes[4..4 + n].to_vec()), 4 + n))
    }
}

#[test]
fn mult_adjoints() {
    let tape = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m0 = random_matrix(&mut rng, 4);
    let v0 = random_vector(&mut rng, 4);
    let seed = random_vector(&mut rng, 4);
    let m = tape.register_object_input(m0.clone()).unwrap();
    let v = tape.register_object_input(v0.clone()).unwrap();
    assert_eq!(v.adjoint().unwrap(), V::zeros(4));
    tape.start_recording();
    let w = tape.eval_dsl(Mul(&m, &v)).unwrap();
    tape.stop_recording();
    let rep = tape.memory_report();
    assert_eq!((rep.statements, rep.rhs_ids, rep.constants), (1, 2, 0));
    w.set_adjoint(seed.clone()).unwrap();
    assert_eq!(w.adjoint().unwrap(), seed);
    tape.evaluate_reverse().unwrap();
    assert_eq!(v.adjoint().unwrap(), m0.transpose() * &seed);
    assert_eq!(m.adjoint().unwrap(), &seed * v0.transpose());
    assert_eq!(w.adjoint().unwrap(), V::zeros(4));
}

#[test]
fn activity_patterns_get_distinct_handles() {
    let tape = setup();
    let m = tape.register_object_input(M::identity(3, 3)).unwrap();
    let v = tape.register_object_input(V::from_element(3, 1.0)).unwrap();
    let pm = tape.object(M::identity(3, 3) * 2.0);
    let pv = tape.object(V::from_element(3, 2.0));
    tape.start_recording();
    let aa = tape.eval_dsl(Mul(&m, &v)).unwrap();
    let ap = tape.eval_dsl(Mul(&m, &pv)).unwrap();
    let pa = tape.eval_dsl(Mul(&pm, &v)).unwrap();
    let pp = tape.eval_dsl(Mul(&pm, &pv)).unwrap();
    let again = tape.eval_dsl(Mul(&m, P(V::zeros(3)))).unwrap();
    tape.stop_recording();
    assert!(aa.is_active() && ap.is_active() && pa.is_active());
    assert!(!pp.is_active());
    assert_eq!(*pp.value(), V::from_element(3, 4.0));
    let h = tape.statement_handles();
    assert_eq!(h.len(), 4);
    assert!(h[0] != h[1] && h[1] != h[2] && h[0] != h[2]);
    assert_eq!(h[1], h[3]);
    let rep = tape.memory_report();
    assert_eq!(rep.rhs_ids, 2 + 1 + 1 + 1);
    assert_eq!(rep.constants, 3);
    drop(again);
}

/// Flattened central FD of `f` with respect to all components of `x`.
fn fd_flat(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    fd::gradient(f, x)
}

#[test]
fn linear_solve_single_statement_matches_fd() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m0 = random_matrix(&mut rng, n);
    let a0 = random_vector(&mut rng, n);
    let b0 = random_vector(&mut rng, n);
    let seed = random_vector(&mut rng, n);

    let tape = setup();
    let m = tape.register_object_input(m0.clone()).unwrap();
    let v1 = tape.register_object_input(a0.clone()).unwrap();
    let v2 = tape.register_object_input(b0.clone()).unwrap();
    tape.start_recording();
    let r = tape.eval_dsl(Slv(&m, &v1, &v2)).unwrap();
    tape.stop_recording();
    assert_eq!(tape.memory_report().statements, 1);
    r.set_adjoint(seed.clone()).unwrap();
    tape.evaluate_reverse().unwrap();

    let mut ad: Vec<f64> = m.adjoint().unwrap().iter().copied().collect();
    ad.extend(v1.adjoint().unwrap().iter());
    ad.extend(v2.adjoint().unwrap().iter());
    let mut x: Vec<f64> = m0.iter().copied().collect();
    x.extend(a0.iter());
    x.extend(b0.iter());
    let f = |x: &[f64]| {
        let m = M::from_column_slice(n, n, &x[..n * n]);
        let a = V::from_column_slice(&x[n * n..n * n + n]);
        let b = V::from_column_slice(&x[n * n + n..]);
        let r = m.lu().solve(&(b - &a)).unwrap() + a;
        r.dot(&seed)
    };
    let (err, at) = fd::max_rel_err(&ad, &fd_flat(f, &x));
    assert!(err < 1e-6, "max rel err {err} at {at}");
}

#[test]
fn nested_expression_and_mixed_streams() {
    // s = dot(M (a - b), a); y = s * s + x
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m0 = random_matrix(&mut rng, 3);
    let a0 = random_vector(&mut rng, 3);
    let b0 = random_vector(&mut rng, 3);
    let tape = setup();
    let m = tape.register_object_input(m0.clone()).unwrap();
    let a = tape.register_object_input(a0.clone()).unwrap();
    let b = tape.register_object_input(b0.clone()).unwrap();
    let x = tape.register_input(0.75);
    tape.start_recording();
    let s = tape.var(0.0);
    s.assign_dsl(DotE(Mul(&m, Sub(&a, &b)), &a)).unwrap();
    let y = tape.eval(&s * &s + &x);
    tape.stop_recording();
    assert_eq!(tape.memory_report().statements, 2);
    y.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();

    let mut ad: Vec<f64> = m.adjoint().unwrap().iter().copied().collect();
    ad.extend(a.adjoint().unwrap().iter());
    ad.extend(b.adjoint().unwrap().iter());
    ad.push(x.gradient());
    let mut p: Vec<f64> = m0.iter().copied().collect();
    p.extend(a0.iter());
    p.extend(b0.iter());
    p.push(0.75);
    let f = |p: &[f64]| {
        let m = M::from_column_slice(3, 3, &p[..9]);
        let a = V::from_column_slice(&p[9..12]);
        let b = V::from_column_slice(&p[12..15]);
        let s = (m * (&a - b)).dot(&a);
        s * s + p[15]
    };
    let (err, _) = fd::max_rel_err(&ad, &fd_flat(f, &p));
    assert!(err < 1e-6, "{err}");
}

#[test]
fn aliased_object_assignment_restores_primal() {
    let tape = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m0 = random_matrix(&mut rng, 3);
    let v0 = random_vector(&mut rng, 3);
    let m = tape.register_object_input(m0.clone()).unwrap();
    let v = tape.register_object_input(v0.clone()).unwrap();
    let before = tape.primal_snapshot();
    tape.start_recording();
    v.assign(Mul(&m, &v)).unwrap();
    v.assign(Mul(&m, &v)).unwrap();
    tape.stop_recording();
    let seed = V::from_element(3, 1.0);
    v.set_adjoint(seed.clone()).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(tape.primal_snapshot(), before);
    let expect = m0.transpose() * (m0.transpose() * seed);
    assert!((v.adjoint().unwrap() - expect).amax() < 1e-14);
}

#[test]
fn zero_seed_changes_nothing() {
    let tape = setup();
    let m = tape.register_object_input(M::identity(2, 2)).unwrap();
    let v = tape.register_object_input(V::from_element(2, 3.0)).unwrap();
    tape.start_recording();
    let _w = tape.eval_dsl(Mul(&m, &v)).unwrap();
    tape.stop_recording();
    tape.evaluate_reverse().unwrap();
    assert_eq!(m.adjoint().unwrap(), M::zeros(2, 2));
    assert_eq!(v.adjoint().unwrap(), V::zeros(2));
}

#[test]
fn passive_object_adjoint_rules() {
    let tape = setup();
    let p = tape.object(V::from_element(2, 1.0));
    assert_eq!(p.adjoint().unwrap(), V::zeros(2));
    assert!(matches!(p.set_adjoint(V::zeros(2)), Err(TapeError::PassiveAdjoint)));
}

#[test]
fn reset_clears_object_state() {
    let tape = setup();
    let m = tape.register_object_input(M::identity(2, 2)).unwrap();
    let v = tape.register_object_input(V::from_element(2, 3.0)).unwrap();
    tape.start_recording();
    let w = tape.eval_dsl(Mul(&m, &v)).unwrap();
    tape.stop_recording();
    assert!(tape.memory_report().tape_bytes() > 0);
    tape.reset();
    assert_eq!(tape.memory_report().tape_bytes(), 0);
    assert!(!w.is_active() && !m.is_active());
    assert_eq!(tape.index_stats(tape.type_tag::<M>().unwrap()), Some((0, 0)));
}

#[test]
fn variable_sized_old_data_round_trips() {
    // vectors of different sizes assigned to the same lhs
    let tape = setup();
    let m2 = tape.register_object_input(M::identity(2, 2) * 2.0).unwrap();
    let m3 = tape.register_object_input(M::identity(3, 3) * 3.0).unwrap();
    let v = tape.register_object_input(V::from_element(3, 1.0)).unwrap();
    let before = tape.primal_snapshot();
    tape.start_recording();
    v.assign(Mul(&m3, &v)).unwrap();
    v.assign(Mul(&m2, P(V::from_element(2, 1.0)))).unwrap();
    v.assign(Mul(&m3, P(V::from_element(3, 1.0)))).unwrap();
    tape.stop_recording();
    v.set_adjoint(V::from_element(3, 1.0)).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(tape.primal_snapshot(), before);
    assert_eq!(v.adjoint().unwrap(), V::zeros(3));
    assert_eq!(m3.adjoint().unwrap(), M::from_element(3, 3, 1.0));
    assert_eq!(m2.adjoint().unwrap(), M::zeros(2, 2));
}

#[allow(dead_code)]
fn keep<'t>(_: &ActiveObject<'t, f64, V>) {}
