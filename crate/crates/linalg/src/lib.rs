//! Operators for the `dslad` tape generated from `specs/*.xml` at build
//! time.
//!
//! [`dense`] wraps nalgebra's `DMatrix<f64>`/`DVector<f64>`; [`simd`] wraps
//! the 16-byte aligned [`F32x4`] pack for single precision tapes. Call the
//! module's `register` once per tape before recording.

mod pack;

pub use pack::F32x4;

/// Matrix/vector operators on `f64` tapes.
#[allow(clippy::all)]
pub mod dense {
    include!(concat!(env!("OUT_DIR"), "/linalg/dsl.gen.rs"));
}

/// 4-lane pack operators on `f32` tapes.
#[allow(clippy::all)]
pub mod simd {
    pub use crate::pack::F32x4;

    include!(concat!(env!("OUT_DIR"), "/simd/dsl.gen.rs"));
}
