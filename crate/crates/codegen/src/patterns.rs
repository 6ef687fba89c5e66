//! Activity patterns: which differentiable arguments of an operation are
//! active in a given expression variant.

/// Bitmask over a function's arguments; bit `i` set means argument `i` is
/// active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActivityPattern(pub u32);

impl ActivityPattern {
    pub fn is_active(self, arg: usize) -> bool {
        self.0 & (1 << arg) != 0
    }

    /// `A`/`P` per argument, e.g. `AP`.
    pub fn label(self, n_args: usize) -> String {
        (0..n_args)
            .map(|i| if self.is_active(i) { 'A' } else { 'P' })
            .collect()
    }
}

/// All nonempty subsets of the argument positions in `inputs`, with more
/// active arguments first and, for equal counts, subsets activating
/// earlier arguments first.
pub fn enumerate(inputs: &[usize]) -> Vec<ActivityPattern> {
    let d = inputs.len();
    assert!(d <= 32, "more than 32 differentiable arguments");
    let mut subsets: Vec<Vec<usize>> = (1..(1u64 << d))
        .map(|bits| inputs.iter().enumerate().filter(|(k, _)| bits & (1 << k) != 0).map(|(_, &i)| i).collect())
        .collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|s| ActivityPattern(s.iter().fold(0, |m, &i| m | (1 << i))))
        .collect()
}
