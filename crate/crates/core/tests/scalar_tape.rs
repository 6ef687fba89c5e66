use dslad::fd;
use dslad::scalar::expr::{cos, exp, log, pow, sin, sqrt};
use dslad::{ActiveScalar, Identifier, ScalarOp, Tape, TapeError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn product_adjoint_is_exact() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let a = tape.register_input(0.1);
    let b = tape.register_input(-7.3e-5);
    let w = tape.eval(&a * &b);
    tape.stop_recording();
    w.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(a.gradient().to_bits(), 7.3e-5f64.to_bits() ^ (1 << 63));
    assert_eq!(b.gradient(), 0.1);
}

#[test]
fn distance_statement_layout() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let a = tape.register_input(2.0);
    let b = tape.register_input(1.0);
    let c = tape.register_input(3.0);
    let d = tape.register_input(1.0);
    let w = tape.eval(sqrt((&a - &b).powi(2) + (&c - &d).powi(2) - 1.0));
    tape.stop_recording();

    let rep = tape.memory_report();
    assert_eq!((rep.statements, rep.rhs_ids, rep.constants), (1, 4, 1));
    assert_eq!(w.value(), 2.0);
    let h = tape.statement_handles()[0];
    let shape = tape.scalar_shape(h).unwrap();
    assert_eq!(shape.iter().filter(|op| **op == ScalarOp::Var).count(), 4);
    assert_eq!(shape.iter().filter(|op| **op == ScalarOp::Const).count(), 1);

    w.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    let ad = [a.gradient(), b.gradient(), c.gradient(), d.gradient()];
    let f = |x: &[f64]| ((x[0] - x[1]).powi(2) + (x[2] - x[3]).powi(2) - 1.0).sqrt();
    let fdg = fd::gradient(f, &[2.0, 1.0, 3.0, 1.0]);
    assert!(fd::max_rel_err(&ad, &fdg).0 < 1e-8);
}

#[test]
fn passive_rhs_deactivates_lhs() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let a = tape.register_input(2.0);
    let p = tape.var(3.0);
    let w = tape.eval(&a * 2.0);
    assert!(w.is_active());
    w.assign(&p * 4.0 + 1.0);
    assert!(!w.is_active());
    assert_eq!(w.value(), 13.0);
    assert_eq!(tape.memory_report().statements, 1);
    assert_eq!(tape.index_stats(dslad::SCALAR_TAG).unwrap().1, 1);
}

#[test]
fn not_recording_is_value_only() {
    let tape = Tape::<f64>::new();
    let a = tape.register_input(2.0);
    let w = tape.eval(&a * &a);
    assert_eq!(w.value(), 4.0);
    assert!(!w.is_active());
    assert_eq!(tape.memory_report().statements, 0);
    assert!(!tape.record_statement(a.id(), dslad::HandleId(0), &[], &[], 1.0).unwrap());
}

#[test]
fn aliased_assignment() {
    // w = w * a
    let run = |w0: f64, a0: f64, seed: f64| {
        let tape = Tape::<f64>::new();
        tape.start_recording();
        let w = tape.register_input(w0);
        let a = tape.register_input(a0);
        let w_in = w.id();
        let before = tape.primal_snapshot();
        w.assign(&w * &a);
        assert_eq!(w.id(), w_in);
        tape.stop_recording();
        w.set_gradient(seed).unwrap();
        tape.evaluate_reverse().unwrap();
        assert_eq!(tape.primal_snapshot(), before, "primal restored");
        (w.gradient(), a.gradient())
    };
    let (wb, ab) = run(1.7, -0.6, 2.0);
    assert_eq!(wb, -0.6 * 2.0);
    assert_eq!(ab, 1.7 * 2.0);
    let fdg = fd::gradient(|x| x[0] * x[1], &[1.7, -0.6]);
    assert!(fd::max_rel_err(&[wb / 2.0, ab / 2.0], &fdg).0 < 1e-9);
}

#[test]
fn reverse_visits_statements_backwards() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let x = tape.register_input(0.5);
    let y = tape.eval(x.sin());
    let z = tape.eval(&y * &x + 1.0);
    let u = tape.eval(exp(&z) / &y);
    let v = tape.eval(&u - &x);
    tape.stop_recording();
    let recorded = tape.statement_handles();
    assert_eq!(recorded.len(), 4);
    v.set_gradient(1.0).unwrap();
    let mut seen = Vec::new();
    let mut positions = Vec::new();
    tape.evaluate_reverse_with(|s| {
        seen.push(s.handle);
        positions.push(s.position);
    })
    .unwrap();
    seen.reverse();
    assert_eq!(seen, recorded);
    assert_eq!(positions, vec![3, 2, 1, 0]);
    let rep = tape.memory_report();
    assert_eq!((rep.statements, rep.rhs_ids, rep.constants, rep.tape_bytes()), (0, 0, 0, 0));
}

#[test]
fn gradient_access_rules() {
    let tape = Tape::<f64>::new();
    let x = tape.register_input(1.0);
    assert_eq!(tape.gradient(Identifier::PASSIVE).unwrap(), 0.0);
    assert!(matches!(tape.set_gradient(Identifier::PASSIVE, 1.0), Err(TapeError::PassiveAdjoint)));
    tape.set_gradient(x.id(), 0.25).unwrap();
    assert_eq!(tape.gradient(x.id()).unwrap(), 0.25);
    assert!(matches!(
        tape.gradient(Identifier(99)),
        Err(TapeError::IdentifierOutOfRange { id: 99, .. })
    ));
}

#[test]
fn square_gradient() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let x = tape.register_input(3.0);
    let y = tape.eval(&x * &x);
    tape.stop_recording();
    y.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(x.gradient(), 6.0);
}

#[test]
fn reverse_while_recording_fails() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    assert!(matches!(tape.evaluate_reverse(), Err(TapeError::StillRecording)));
}

#[test]
fn unknown_handle_is_rejected() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let x = tape.register_input(1.0);
    let err = tape.record_statement(x.id(), dslad::HandleId(7), &[], &[], 0.0).unwrap_err();
    assert!(matches!(err, TapeError::UnregisteredHandle { .. }));
    let h = tape.intern_shape(&[ScalarOp::Var, ScalarOp::Const, ScalarOp::Mul]).unwrap();
    assert!(tape.record_statement(x.id(), h, &[x.id()], &[], 0.0).is_err());
    assert!(tape.record_statement(x.id(), h, &[x.id()], &[3.0], 3.0).unwrap());
    tape.stop_recording();
    x.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(x.gradient(), 3.0);
    assert_eq!(x.value(), 1.0);
}

#[test]
fn chain_counts_one_statement_per_assignment() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let x = tape.register_input(0.3);
    let y = tape.var(0.0);
    y.assign(&x * 1.0);
    for k in 0..25 {
        y.assign(sin(&y) * cos(&x) + (&y * &y + k as f64).sqrt() / 3.0);
    }
    assert_eq!(tape.memory_report().statements, 26);
}

#[test]
fn reset_is_deterministic_and_bounded() {
    let tape = Tape::<f64>::with_chunk_size(64);
    let program = |tape: &Tape<f64>| {
        tape.start_recording();
        let x = tape.register_input(1.25);
        let mut y = tape.eval(&x * 2.0);
        for _ in 0..100 {
            y = tape.eval(sin(&y) + &x);
        }
        tape.stop_recording();
        y.set_gradient(1.0).unwrap();
        let handles = tape.statement_handles();
        let rep = tape.memory_report();
        tape.evaluate_reverse().unwrap();
        (handles, rep, x.gradient())
    };
    let first = program(&tape);
    tape.reset();
    let empty = tape.memory_report();
    assert_eq!(empty.tape_bytes(), 0);
    let peak = first.1.bytes["allocated"];
    for _ in 0..100 {
        let again = program(&tape);
        assert_eq!(again.0, first.0);
        assert_eq!(again.1, first.1);
        assert_eq!(again.2.to_bits(), first.2.to_bits());
        tape.reset();
        assert_eq!(tape.memory_report().bytes["allocated"], peak);
    }
}

#[test]
fn stale_values_are_passive_after_reset() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let old = tape.register_input(2.0);
    tape.reset();
    tape.start_recording();
    let x = tape.register_input(3.0);
    let y = tape.eval(&old * &x);
    assert!(!old.is_active());
    assert_eq!(tape.memory_report().rhs_ids, 1);
    assert_eq!(tape.memory_report().constants, 1);
    drop(old);
    assert_eq!(tape.index_stats(dslad::SCALAR_TAG).unwrap(), (2, 2));
    drop(y);
}

#[test]
fn memory_report_json() {
    let tape = Tape::<f64>::new();
    let json = serde_json::to_value(tape.memory_report()).unwrap();
    assert_eq!(json["statements"], 0);
    assert_eq!(json["rhsIds"], 0);
    assert_eq!(json["bytes"]["stmtStream"], 0);
}

#[test]
fn active_exponent_power() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let b = tape.register_input(1.3);
    let e = tape.register_input(0.7);
    let w = tape.eval(pow(&b, &e) + log(&b));
    tape.stop_recording();
    w.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    let fdg = fd::gradient(|x| x[0].powf(x[1]) + x[0].ln(), &[1.3, 0.7]);
    assert!(fd::max_rel_err(&[b.gradient(), e.gradient()], &fdg).0 < 1e-8);
}

// ---- random programs ----

/// Random straight-line program over `n_in` inputs whose values live in a
/// pool of variables, some assignments aliasing their own lhs.
#[derive(Debug, Clone)]
enum Step {
    Mul(usize, usize, usize),
    Add(usize, usize, f64, usize),
    Sin(usize, usize),
    Square(usize, usize),
}

fn random_program(rng: &mut ChaCha8Rng, pool: usize, len: usize) -> Vec<Step> {
    (0..len)
        .map(|_| {
            let (l, a, b) = (rng.gen_range(0..pool), rng.gen_range(0..pool), rng.gen_range(0..pool));
            match rng.gen_range(0..4) {
                0 => Step::Mul(l, a, b),
                1 => Step::Add(l, a, rng.gen_range(-1.0..1.0), b),
                2 => Step::Sin(l, a),
                _ => Step::Square(l, a),
            }
        })
        .collect()
}

fn run_plain(steps: &[Step], vars: &mut [f64]) {
    for s in steps {
        match *s {
            Step::Mul(l, a, b) => vars[l] = vars[a] * vars[b],
            Step::Add(l, a, c, b) => vars[l] = vars[a] + c * vars[b],
            Step::Sin(l, a) => vars[l] = vars[a].sin(),
            Step::Square(l, a) => vars[l] = vars[a] * vars[a] - 0.5,
        }
    }
}

fn run_active(steps: &[Step], vars: &[ActiveScalar<'_, f64>]) {
    for s in steps {
        match *s {
            Step::Mul(l, a, b) => vars[l].assign(&vars[a] * &vars[b]),
            Step::Add(l, a, c, b) => vars[l].assign(&vars[a] + c * &vars[b]),
            Step::Sin(l, a) => vars[l].assign(vars[a].sin()),
            Step::Square(l, a) => vars[l].assign(vars[a].powi(2) - 0.5),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primals_restored_after_reverse(seed in any::<u64>(), len in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_program(&mut rng, 5, len);
        let tape = Tape::<f64>::with_chunk_size(16);
        let vars: Vec<_> = (0..5).map(|_| tape.register_input(rng.gen_range(-1.0..1.0))).collect();
        let before = tape.primal_snapshot();
        tape.start_recording();
        run_active(&steps, &vars);
        // temporaries that die during recording and hand their ids on
        for k in 0..3 {
            let t = tape.eval(&vars[k] * 3.0);
            vars[k].assign(&t + &vars[k + 1]);
        }
        tape.stop_recording();
        for v in &vars {
            if v.is_active() {
                v.set_gradient(1.0).unwrap();
            }
        }
        tape.evaluate_reverse().unwrap();
        prop_assert_eq!(tape.primal_snapshot(), before);
    }

    #[test]
    fn reverse_is_linear_in_the_seed(seed in any::<u64>(), k in -8i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_program(&mut rng, 4, 30);
        let init: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = 2f64.powi(k);
        let grads = |scale: f64| {
            let tape = Tape::<f64>::new();
            let vars: Vec<_> = init.iter().map(|&v| tape.register_input(v)).collect();
            let ids: Vec<_> = vars.iter().map(|v| v.id()).collect();
            tape.start_recording();
            run_active(&steps, &vars);
            tape.stop_recording();
            let out = &vars[0];
            if out.is_active() {
                out.set_gradient(scale * 0.37).unwrap();
            }
            tape.evaluate_reverse().unwrap();
            ids.iter().map(|&id| tape.gradient(id).unwrap()).collect::<Vec<_>>()
        };
        let base = grads(1.0);
        let scaled = grads(alpha);
        for (b, s) in base.iter().zip(&scaled) {
            prop_assert_eq!((b * alpha).to_bits(), s.to_bits());
        }
    }

    #[test]
    fn streams_balance(seed in any::<u64>(), len in 0usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_program(&mut rng, 6, len);
        let tape = Tape::<f64>::with_chunk_size(8);
        let vars: Vec<_> = (0..6).map(|_| tape.register_input(rng.gen_range(-1.0..1.0))).collect();
        tape.start_recording();
        run_active(&steps, &vars);
        tape.stop_recording();
        let rep = tape.memory_report();
        // oracle: counts from the program text
        let mut active = [true; 6];
        let (mut stmts, mut rhs, mut consts) = (0, 0, 0);
        for s in &steps {
            let (l, args, c): (usize, Vec<usize>, usize) = match *s {
                Step::Mul(l, a, b) => (l, vec![a, b], 0),
                Step::Add(l, a, _, b) => (l, vec![a, b], 1),
                Step::Sin(l, a) => (l, vec![a], 0),
                Step::Square(l, a) => (l, vec![a], 1),
            };
            let n = args.iter().filter(|&&a| active[a]).count();
            if n > 0 {
                stmts += 1;
                rhs += n;
                consts += c + args.len() - n;
            }
            active[l] = n > 0;
        }
        prop_assert_eq!((rep.statements, rep.rhs_ids, rep.constants), (stmts, rhs, consts));
        prop_assert_eq!(rep.stream_bytes("rhsIds"), rhs * std::mem::size_of::<dslad::Slot>());
        prop_assert_eq!(rep.stream_bytes("constants"), consts * 8);
        prop_assert_eq!(rep.stream_bytes("lhsOldData"), stmts * 8);
    }

    #[test]
    fn recording_matches_plain_evaluation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_program(&mut rng, 4, 40);
        let mut plain: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tape = Tape::<f64>::new();
        let vars: Vec<_> = plain.iter().map(|&v| tape.register_input(v)).collect();
        tape.start_recording();
        run_active(&steps, &vars);
        run_plain(&steps, &mut plain);
        for (v, p) in vars.iter().zip(&plain) {
            prop_assert_eq!(v.value().to_bits(), p.to_bits());
        }
    }
}

// ---- elemental operators against finite differences ----

fn check_unary(f_ad: impl Fn(&ActiveScalar<'_, f64>) -> f64, f: impl Fn(f64) -> f64, lo: f64, hi: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let x0 = rng.gen_range(lo..hi);
        let tape = Tape::<f64>::new();
        tape.start_recording();
        let x = tape.register_input(x0);
        let primal = f_ad(&x);
        assert!((primal - f(x0)).abs() <= 1e-14 * f(x0).abs().max(1.0));
        let fdv = fd::partial(|v| f(v[0]), &[x0], 0);
        assert!(
            fd::rel_err(x.gradient(), fdv) < 1e-8,
            "x = {x0}: ad {} fd {fdv}",
            x.gradient()
        );
    }
}

macro_rules! unary_case {
    ($name:ident, |$x:ident| $ad:expr, $f:expr, $lo:expr, $hi:expr) => {
        #[test]
        fn $name() {
            check_unary(
                |$x: &ActiveScalar<'_, f64>| {
                    let tape = $x.tape();
                    let y = tape.eval($ad);
                    tape.stop_recording();
                    y.set_gradient(1.0).unwrap();
                    tape.evaluate_reverse().unwrap();
                    y.value()
                },
                $f,
                $lo,
                $hi,
            )
        }
    };
}

unary_case!(op_add, |x| x + 0.0, |x| x + 0.0, -3.0, 3.0);
unary_case!(op_sub, |x| 2.5 - x, |x| 2.5 - x, -3.0, 3.0);
unary_case!(op_mul, |x| x * x * 1.5, |x| x * x * 1.5, -3.0, 3.0);
unary_case!(op_div, |x| 1.0 / x + x / 3.0, |x| 1.0 / x + x / 3.0, 0.2, 3.0);
unary_case!(op_neg, |x| -(x * 2.0), |x| -(x * 2.0), -3.0, 3.0);
unary_case!(op_sin, |x| x.sin(), f64::sin, -3.0, 3.0);
unary_case!(op_cos, |x| cos(x), f64::cos, -3.0, 3.0);
unary_case!(op_exp, |x| exp(x), f64::exp, -3.0, 3.0);
unary_case!(op_log, |x| x.ln(), f64::ln, 0.1, 5.0);
unary_case!(op_sqrt, |x| x.sqrt(), f64::sqrt, 0.1, 5.0);
unary_case!(op_powf, |x| x.powf(2.5), |x: f64| x.powf(2.5), 0.1, 3.0);
unary_case!(op_powi, |x| x.powi(3), |x: f64| x.powi(3), -3.0, 3.0);
unary_case!(op_pow, |x| pow(x, x), |x: f64| x.powf(x), 0.2, 3.0);

#[test]
fn repeated_leaf_accumulates() {
    let tape = Tape::<f64>::new();
    tape.start_recording();
    let x = tape.register_input(1.5);
    let y = tape.eval(&x * &x + &x);
    tape.stop_recording();
    assert_eq!(tape.memory_report().rhs_ids, 3);
    y.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(x.gradient(), 4.0);
}

#[test]
fn single_precision_tape() {
    let tape = Tape::<f32>::new();
    tape.start_recording();
    let x = tape.register_input(2.0f32);
    let y = tape.eval(&x * &x * 0.5f32 + 1.0f32);
    tape.stop_recording();
    assert_eq!(tape.memory_report().stream_bytes("lhsOldData"), 4);
    y.set_gradient(1.0).unwrap();
    tape.evaluate_reverse().unwrap();
    assert_eq!(x.gradient(), 2.0f32);
}
