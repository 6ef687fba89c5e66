use thiserror::Error;

use crate::codec::CodecError;
use crate::tape::HandleId;

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("identifier {id} is beyond the high-water mark {high_water} of type `{type_name}`")]
    IdentifierOutOfRange {
        type_name: String,
        id: u32,
        high_water: u32,
    },
    #[error("handle {handle} at statement {position} is not registered")]
    UnregisteredHandle { handle: HandleId, position: usize },
    #[error("tape stream `{stream}` underflow at statement {position}")]
    StreamUnderflow {
        stream: &'static str,
        position: usize,
    },
    #[error("type `{0}` is not registered with this tape")]
    UnregisteredType(&'static str),
    #[error("type `{0}` is already registered with this tape")]
    DuplicateType(&'static str),
    #[error("operation `{0}` is not registered with this tape")]
    UnregisteredOp(&'static str),
    #[error("invalid statement: {0}")]
    InvalidStatement(String),
    #[error("malformed expression shape: {0}")]
    MalformedShape(String),
    #[error("reverse evaluation requested while the tape is recording")]
    StillRecording,
    #[error("cannot set the adjoint of a passive value")]
    PassiveAdjoint,
    #[error("corrupt constant data at statement {position}: {source}")]
    Codec {
        position: usize,
        #[source]
        source: CodecError,
    },
}
