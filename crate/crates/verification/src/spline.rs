//! Bicubic Catmull-Rom interpolation of 3-D points over `[-1, 1]^2`.
//!
//! The square is split into `N x N` regions; node `(i, j)` sits at
//! `(-1 + (i - 1) 2/N, -1 + (j - 1) 2/N)` so every region sees a full
//! 4 x 4 stencil. Each node is a point in three dimensions, stored as an
//! [`F32x4`] with lane 3 zero. The scalar path records every component
//! separately; the vectorized path records one pack statement where the
//! scalar path needs three.

use std::time::Instant;

use dslad::{ActiveScalar, MemoryReport, Tape};
use dslad_linalg::simd::{self, pack_add, pack_scale};
use dslad_linalg::F32x4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::report::{accumulate, empty_memory, GradCheck, Times};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplineConfig {
    pub regions: usize,
    pub samples: usize,
    pub seed: u64,
    /// Samples per tape; the tape is reversed and reset after each batch.
    pub batch: usize,
}

impl SplineConfig {
    pub fn new(regions: usize, samples: usize, seed: u64) -> Self {
        Self { regions, samples, seed, batch: 10_000 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.regions == 0 {
            return Err("regions must be positive".into());
        }
        if self.batch == 0 {
            return Err("batch must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scalar,
    Vectorized,
}

/// Node grid and sample points drawn from the configured seed.
#[derive(Debug, Clone)]
pub struct SplineData {
    pub regions: usize,
    pub nodes: Vec<F32x4>,
    pub points: Vec<(f32, f32)>,
}

impl SplineData {
    pub fn generate(cfg: &SplineConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let side = cfg.regions + 3;
        let nodes = (0..side * side)
            .map(|_| F32x4([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]))
            .collect();
        let points = (0..cfg.samples)
            .map(|_| (rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0)))
            .collect();
        Self { regions: cfg.regions, nodes, points }
    }

    fn node(&self, i: usize, j: usize) -> F32x4 {
        self.nodes[j * (self.regions + 3) + i]
    }

    /// Region index and the scale from `x` to region coordinates.
    fn cell(&self, x: f64) -> (usize, f64) {
        let half = self.regions as f64 / 2.0;
        let c = (((x + 1.0) * half).floor().max(0.0) as usize).min(self.regions - 1);
        (c, half)
    }

    /// Reference evaluation in double precision.
    pub fn eval_f64(&self, x: f64, y: f64) -> [f64; 3] {
        let (cx, half) = self.cell(x);
        let (cy, _) = self.cell(y);
        let wx = weights_f64((x + 1.0) * half - cx as f64);
        let wy = weights_f64((y + 1.0) * half - cy as f64);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                let q: f64 = (0..4).map(|m| wx[m] * self.node(cx + m, cy + j).0[c] as f64).sum();
                *o += wy[j] * q;
            }
        }
        out
    }
}

fn weights_f64(t: f64) -> [f64; 4] {
    [
        ((-0.5 * t + 1.0) * t - 0.5) * t,
        (1.5 * t - 2.5) * t * t + 1.0,
        ((-1.5 * t + 2.0) * t + 0.5) * t,
        (0.5 * t - 0.5) * t * t,
    ]
}

/// Local coordinate and the four weights, five statements per axis.
fn weights<'t>(tape: &'t Tape<f32>, x: &ActiveScalar<'t, f32>, cell: usize, half: f32) -> [ActiveScalar<'t, f32>; 4] {
    let t = tape.eval((x + 1.0f32) * half - cell as f32);
    [
        tape.eval(((&t * -0.5f32 + 1.0f32) * &t - 0.5f32) * &t),
        tape.eval((&t * 1.5f32 - 2.5f32) * &t * &t + 1.0f32),
        tape.eval(((&t * -1.5f32 + 2.0f32) * &t + 0.5f32) * &t),
        tape.eval((&t * 0.5f32 - 0.5f32) * &t * &t),
    ]
}

/// Values, gradients and tape statistics of one study.
#[derive(Debug, Clone)]
pub struct SplineRun {
    pub mode: Mode,
    pub values: Vec<[f32; 3]>,
    /// Derivative of the component sum with respect to `(x, y)`.
    pub gradients: Vec<[f32; 2]>,
    pub memory: MemoryReport,
    pub times: Times,
}

pub fn run(cfg: &SplineConfig, data: &SplineData, mode: Mode) -> SplineRun {
    cfg.validate().expect("invalid spline configuration");
    let tape = Tape::<f32>::new();
    if mode == Mode::Vectorized {
        simd::register(&tape).expect("pack operators register");
    }
    let mut values = Vec::with_capacity(data.points.len());
    let mut gradients = Vec::with_capacity(data.points.len());
    let mut memory = empty_memory();
    let mut times = Times::default();
    for batch in data.points.chunks(cfg.batch) {
        let start = Instant::now();
        tape.start_recording();
        let inputs: Vec<_> = batch.iter().map(|&(x, y)| (tape.register_input(x), tape.register_input(y))).collect();
        match mode {
            Mode::Scalar => {
                let outs: Vec<_> = inputs.iter().map(|(x, y)| record_scalar(&tape, data, x, y)).collect();
                tape.stop_recording();
                times.record_s += start.elapsed().as_secs_f64();
                accumulate(&mut memory, &tape.memory_report());
                let start = Instant::now();
                for out in &outs {
                    values.push([out[0].value(), out[1].value(), out[2].value()]);
                    for o in out {
                        o.set_gradient(1.0).expect("outputs are active");
                    }
                }
                tape.evaluate_reverse().expect("reverse sweep");
                times.reverse_s += start.elapsed().as_secs_f64();
            }
            Mode::Vectorized => {
                let outs: Vec<_> = inputs.iter().map(|(x, y)| record_vectorized(&tape, data, x, y)).collect();
                tape.stop_recording();
                times.record_s += start.elapsed().as_secs_f64();
                accumulate(&mut memory, &tape.memory_report());
                let start = Instant::now();
                for out in &outs {
                    let v = out.value();
                    values.push([v.0[0], v.0[1], v.0[2]]);
                    out.set_adjoint(F32x4([1.0, 1.0, 1.0, 0.0])).expect("outputs are active");
                }
                tape.evaluate_reverse().expect("reverse sweep");
                times.reverse_s += start.elapsed().as_secs_f64();
            }
        }
        gradients.extend(inputs.iter().map(|(x, y)| [x.gradient(), y.gradient()]));
        drop(inputs);
        tape.reset();
    }
    SplineRun { mode, values, gradients, memory, times }
}

fn record_scalar<'t>(tape: &'t Tape<f32>, data: &SplineData, x: &ActiveScalar<'t, f32>, y: &ActiveScalar<'t, f32>) -> [ActiveScalar<'t, f32>; 3] {
    let (cx, half) = data.cell(x.value() as f64);
    let (cy, _) = data.cell(y.value() as f64);
    let wx = weights(tape, x, cx, half as f32);
    let wy = weights(tape, y, cy, half as f32);
    std::array::from_fn(|c| {
        let q: [_; 4] = std::array::from_fn(|j| {
            let p = |m: usize| data.node(cx + m, cy + j).0[c];
            tape.eval(((&wx[0] * p(0) + &wx[1] * p(1)) + &wx[2] * p(2)) + &wx[3] * p(3))
        });
        tape.eval(((&wy[0] * &q[0] + &wy[1] * &q[1]) + &wy[2] * &q[2]) + &wy[3] * &q[3])
    })
}

fn record_vectorized<'t>(
    tape: &'t Tape<f32>,
    data: &SplineData,
    x: &ActiveScalar<'t, f32>,
    y: &ActiveScalar<'t, f32>,
) -> dslad::ActiveObject<'t, f32, F32x4> {
    let (cx, half) = data.cell(x.value() as f64);
    let (cy, _) = data.cell(y.value() as f64);
    let wx = weights(tape, x, cx, half as f32);
    let wy = weights(tape, y, cy, half as f32);
    let q: [_; 4] = std::array::from_fn(|j| {
        let p = |m: usize| data.node(cx + m, cy + j);
        tape.eval_dsl(pack_add(
            pack_add(pack_add(pack_scale(p(0), &wx[0]), pack_scale(p(1), &wx[1])), pack_scale(p(2), &wx[2])),
            pack_scale(p(3), &wx[3]),
        ))
        .expect("pack statement")
    });
    tape.eval_dsl(pack_add(
        pack_add(pack_add(pack_scale(&q[0], &wy[0]), pack_scale(&q[1], &wy[1])), pack_scale(&q[2], &wy[2])),
        pack_scale(&q[3], &wy[3]),
    ))
    .expect("pack statement")
}

/// Distance in representable `f32` values.
pub fn ulp_distance(a: f32, b: f32) -> u64 {
    fn key(x: f32) -> i64 {
        let b = x.to_bits() as i32;
        (if b < 0 { i32::MIN - b } else { b }) as i64
    }
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    (key(a) - key(b)).unsigned_abs()
}

/// Largest per-component ulp distance between two runs.
pub fn max_ulp(a: &SplineRun, b: &SplineRun) -> u64 {
    a.values
        .iter()
        .zip(&b.values)
        .flat_map(|(p, q)| (0..3).map(move |c| ulp_distance(p[c], q[c])))
        .max()
        .unwrap_or(0)
}

/// Compares the recorded gradients at `count` samples with central
/// differences of [`SplineData::eval_f64`].
pub fn check_gradient(data: &SplineData, run: &SplineRun, count: usize, seed: u64, tolerance: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.points.len();
    let mut ad = Vec::new();
    let mut fd = Vec::new();
    for i in rand::seq::index::sample(&mut rng, n, count.min(n)).iter() {
        let (x, y) = data.points[i];
        let p = [x as f64, y as f64];
        let f = |p: &[f64]| data.eval_f64(p[0], p[1]).iter().sum::<f64>();
        fd.extend(dslad::fd::gradient(f, &p));
        ad.extend(run.gradients[i].iter().map(|&g| g as f64));
    }
    GradCheck::new(dslad::fd::max_rel_err(&ad, &fd).0, tolerance)
}
