//! Code generator for DSL operators recorded by the `dslad` tape.
//!
//! Input is an XML language description:
//!
//! ```xml
//! <language real="f64">
//!   <structure name="Matrix" valueType="nalgebra::DMatrix<f64>"/>
//!   <structure name="Vector" valueType="nalgebra::DVector<f64>"/>
//!   <function name="mult" rType="Vector">
//!     <arg input="1" type="Matrix" name="m">
//!       <reverse> return r_b * v.transpose(); </reverse>
//!     </arg>
//!     <arg input="1" type="Vector" name="v">
//!       <reverse> return m.transpose() * r_b; </reverse>
//!     </arg>
//!     <primal> return m * v; </primal>
//!   </function>
//! </language>
//! ```
//!
//! A `<function>` nested in a `<structure>` is a member function whose
//! receiver is the argument `t`; a `<reverse>` directly inside such a
//! function makes `t` differentiable. The type `Real` is the tape's own
//! scalar. Output is one file per structure, one per function and a root
//! file `dsl.gen.rs` to be pulled in with `include!`.

mod emit;
mod generate;
mod patterns;
mod spec;

pub use emit::{emit, EmitError};
pub use generate::{generate, generate_with, Artifact, Backend, GeneratedFile, RustBackend};
pub use patterns::{enumerate as enumerate_activity_patterns, ActivityPattern};
pub use spec::{
    parse_spec, Arg, Diagnostic, Function, LanguageSpec, Location, ParseOptions, SpecError,
    Structure, REAL, RESERVED,
};
