//! Reverse-mode algorithmic differentiation with primal value taping and
//! index reuse.
//!
//! Besides the classical active scalar ([`ActiveScalar`]) the tape treats
//! whole operations of a domain specific language as elemental operators:
//! a type such as a dense matrix or a SIMD pack gets its own primal/adjoint
//! vectors and index manager, and an operation such as a linear solve is a
//! single statement whose reverse routine is supplied by the DSL author as
//! a transposed Jacobian product.
//!
//! ```
//! use dslad::Tape;
//!
//! let tape = Tape::<f64>::new();
//! tape.start_recording();
//! let a = tape.register_input(3.0);
//! let b = tape.register_input(4.0);
//! let w = tape.eval(&a * &b);
//! tape.stop_recording();
//!
//! w.set_gradient(1.0).unwrap();
//! tape.evaluate_reverse().unwrap();
//! assert_eq!(a.gradient(), 4.0);
//! assert_eq!(b.gradient(), 3.0);
//! ```

pub mod codec;
pub mod dsl;
mod error;
pub mod fd;
mod index;
mod memory;
mod real;
pub mod scalar;
mod store;
mod stream;
mod tape;

pub use codec::{CodecError, DslType};
pub use dsl::{ActiveObject, DslExpr, DslOpDef, DslOpDescriptor, ExprRecorder, OpId, Recorded};
pub use error::TapeError;
pub use index::{Identifier, IndexManager};
pub use memory::MemoryReport;
pub use real::Real;
pub use scalar::{ActiveScalar, Ex, IntoExpr, ScalarExpr, ScalarOp};
pub use stream::ChunkedStream;
pub use tape::{HandleId, Slot, StatementInfo, Tape, TypeTag, DEFAULT_CHUNK_SIZE, SCALAR_TAG};
