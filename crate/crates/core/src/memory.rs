use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Entry counts and byte totals of a tape.
///
/// `bytes` holds one entry per stream (`lhsIds`, `lhsOldData`, `handles`,
/// `activeArgs`, `rhsIds`, `constants`), their sums `stmtStream` (the four
/// per-statement streams) and `tape` (all streams), the chunk memory
/// reserved by all streams (`allocated`), and `primal:<type>` /
/// `adjoint:<type>` for every type's vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemoryReport {
    pub statements: usize,
    pub rhs_ids: usize,
    pub constants: usize,
    pub bytes: BTreeMap<String, usize>,
}

impl MemoryReport {
    /// Bytes held by the recorded streams.
    pub fn tape_bytes(&self) -> usize {
        self.bytes.get("tape").copied().unwrap_or(0)
    }

    pub fn stream_bytes(&self, name: &str) -> usize {
        self.bytes.get(name).copied().unwrap_or(0)
    }
}
