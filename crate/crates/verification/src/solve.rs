//! `r = M^-1 (v2 - v1) + v1` recorded two ways: element by element with
//! active scalars (Gauss-Jordan inversion, then a matrix-vector product),
//! and as one statement of generated matrix/vector operators.

use std::time::Instant;

use dslad::{ActiveScalar, MemoryReport, Tape};
use dslad_linalg::dense::{self, add, matrix_solve, sub, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::report::{GradCheck, Times};

/// Problems with a larger condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular or ill-conditioned (condition estimate {0:e})")]
    Singular(f64),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolveConfig {
    pub n: usize,
    pub seed: u64,
}

/// 2-norm condition number from the singular values.
pub fn condition_estimate(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone)]
pub struct SolveProblem {
    pub m: Matrix,
    pub v1: Vector,
    pub v2: Vector,
    /// Adjoint seed on `r`.
    pub r_bar: Vector,
}

impl SolveProblem {
    pub fn new(m: Matrix, v1: Vector, v2: Vector, r_bar: Vector) -> Result<Self, SolveError> {
        let n = m.nrows();
        if m.ncols() != n || v1.len() != n || v2.len() != n || r_bar.len() != n {
            return Err(SolveError::Shape(format!("M is {}x{}, vectors {} {} {}", n, m.ncols(), v1.len(), v2.len(), r_bar.len())));
        }
        let cond = condition_estimate(&m);
        if !(cond <= MAX_CONDITION) {
            return Err(SolveError::Singular(cond));
        }
        Ok(Self { m, v1, v2, r_bar })
    }

    /// Diagonally dominant random matrix and random vectors.
    pub fn random(cfg: &SolveConfig) -> Result<Self, SolveError> {
        let n = cfg.n;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut r = || rng.gen_range(-1.0..1.0);
        let m = Matrix::from_fn(n, n, |i, j| if i == j { n as f64 + r() } else { r() });
        let v1 = Vector::from_fn(n, |_, _| r());
        let v2 = Vector::from_fn(n, |_, _| r());
        let r_bar = Vector::from_fn(n, |_, _| r());
        Self::new(m, v1, v2, r_bar)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn value(&self) -> Vector {
        self.m.clone().lu().solve(&(&self.v2 - &self.v1)).expect("checked regular") + &self.v1
    }

    /// Inputs in gradient order: `M` column-major, then `v1`, then `v2`.
    pub fn inputs(&self) -> Vec<f64> {
        self.m.iter().chain(self.v1.iter()).chain(self.v2.iter()).copied().collect()
    }

    fn unpack(&self, x: &[f64]) -> (Matrix, Vector, Vector) {
        let n = self.n();
        (
            Matrix::from_column_slice(n, n, &x[..n * n]),
            Vector::from_column_slice(&x[n * n..n * n + n]),
            Vector::from_column_slice(&x[n * n + n..]),
        )
    }

    /// Central differences of `r_bar . r`.
    pub fn fd_gradient(&self) -> Vec<f64> {
        dslad::fd::gradient(
            |x| {
                let (m, v1, v2) = self.unpack(x);
                self.r_bar.dot(&(m.lu().solve(&(v2 - &v1)).expect("regular") + v1))
            },
            &self.inputs(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub value: Vector,
    pub gradient: Vec<f64>,
    pub memory: MemoryReport,
    pub times: Times,
}

impl SolveRun {
    pub fn check(&self, fd: &[f64], tolerance: f64) -> GradCheck {
        GradCheck::new(dslad::fd::max_rel_err(&self.gradient, fd).0, tolerance)
    }
}

/// The whole expression as one statement.
pub fn run_dsl(p: &SolveProblem) -> SolveRun {
    let tape = Tape::<f64>::new();
    dense::register(&tape).expect("operators register");
    let start = Instant::now();
    tape.start_recording();
    let m = tape.register_object_input(p.m.clone()).expect("registered");
    let v1 = tape.register_object_input(p.v1.clone()).expect("registered");
    let v2 = tape.register_object_input(p.v2.clone()).expect("registered");
    let r = tape.eval_dsl(add(matrix_solve(&m, sub(&v2, &v1)), &v1)).expect("solve statement");
    tape.stop_recording();
    let record_s = start.elapsed().as_secs_f64();
    let memory = tape.memory_report();

    let start = Instant::now();
    r.set_adjoint(p.r_bar.clone()).expect("active");
    tape.evaluate_reverse().expect("reverse sweep");
    let reverse_s = start.elapsed().as_secs_f64();
    let mut gradient: Vec<f64> = m.adjoint().expect("active").iter().copied().collect();
    gradient.extend(v1.adjoint().expect("active").iter());
    gradient.extend(v2.adjoint().expect("active").iter());
    let value = r.value().clone();
    SolveRun { value, gradient, memory, times: Times { record_s, reverse_s } }
}

/// Entry of the augmented matrix: an untouched input or an intermediate.
enum Entry<'t> {
    Input(usize),
    Var(ActiveScalar<'t, f64>),
}

impl<'t> Entry<'t> {
    fn get<'a>(&'a self, inputs: &'a [ActiveScalar<'t, f64>]) -> &'a ActiveScalar<'t, f64> {
        match self {
            Entry::Input(k) => &inputs[*k],
            Entry::Var(v) => v,
        }
    }
}

/// Gauss-Jordan elimination with partial pivoting on `[M | I]`, then the
/// product with `v2 - v1`, one statement per active assignment.
pub fn run_scalar(p: &SolveProblem) -> SolveRun {
    let n = p.n();
    let tape = Tape::<f64>::new();
    let start = Instant::now();
    tape.start_recording();
    let m: Vec<_> = p.m.iter().map(|&x| tape.register_input(x)).collect();
    let v1: Vec<_> = p.v1.iter().map(|&x| tape.register_input(x)).collect();
    let v2: Vec<_> = p.v2.iter().map(|&x| tape.register_input(x)).collect();

    let mut rows: Vec<Vec<Entry>> = (0..n)
        .map(|i| {
            (0..2 * n)
                .map(|j| match j < n {
                    true => Entry::Input(j * n + i),
                    false => Entry::Var(tape.var(if j - n == i { 1.0 } else { 0.0 })),
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&a, &b| rows[a][k].get(&m).value().abs().total_cmp(&rows[b][k].get(&m).value().abs()))
            .expect("nonempty");
        rows.swap(k, pivot);
        let inv = tape.eval(1.0 / rows[k][k].get(&m));
        for j in k + 1..2 * n {
            let v = tape.eval(rows[k][j].get(&m) * &inv);
            rows[k][j] = Entry::Var(v);
        }
        let (above, rest) = rows.split_at_mut(k);
        let (pivot_row, below) = rest.split_first_mut().expect("row k");
        for row in above.iter_mut().chain(below.iter_mut()) {
            let (left, right) = row.split_at_mut(k + 1);
            let f = left[k].get(&m);
            for (j, e) in right.iter_mut().enumerate() {
                let v = tape.eval(e.get(&m) - f * pivot_row[k + 1 + j].get(&m));
                *e = Entry::Var(v);
            }
        }
    }

    let s: Vec<_> = (0..n).map(|i| tape.eval(&v2[i] - &v1[i])).collect();
    let r: Vec<_> = (0..n)
        .map(|i| {
            let acc = tape.eval(rows[i][n].get(&m) * &s[0]);
            for j in 1..n {
                acc.assign(&acc + rows[i][n + j].get(&m) * &s[j]);
            }
            tape.eval(&acc + &v1[i])
        })
        .collect();
    tape.stop_recording();
    let record_s = start.elapsed().as_secs_f64();
    let memory = tape.memory_report();

    let start = Instant::now();
    for (ri, &b) in r.iter().zip(p.r_bar.iter()) {
        ri.set_gradient(b).expect("active");
    }
    tape.evaluate_reverse().expect("reverse sweep");
    let reverse_s = start.elapsed().as_secs_f64();
    let gradient = m.iter().chain(&v1).chain(&v2).map(|x| x.gradient()).collect();
    let value = Vector::from_iterator(n, r.iter().map(|x| x.value()));
    SolveRun { value, gradient, memory, times: Times { record_s, reverse_s } }
}
