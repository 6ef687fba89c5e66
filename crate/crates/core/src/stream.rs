use std::mem::size_of;

/// Append-only storage made of fixed-capacity chunks.
///
/// A slice pushed with [`push_slice`](Self::push_slice) never spans two
/// chunks, so [`pop_slice`](Self::pop_slice) of the same length returns it
/// contiguously. Popping keeps allocated chunks for the next recording.
#[derive(Debug, Clone)]
pub struct ChunkedStream<T> {
    chunks: Vec<Vec<T>>,
    current: usize,
    chunk_size: usize,
    len: usize,
}

impl<T: Copy> ChunkedStream<T> {
    pub fn new(chunk_size: usize) -> Self {
        assert!(chunk_size > 0, "chunk size must be positive");
        Self {
            chunks: vec![Vec::new()],
            current: 0,
            chunk_size,
            len: 0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bytes occupied by stored entries.
    pub fn used_bytes(&self) -> usize {
        self.len * size_of::<T>()
    }

    /// Bytes reserved by all chunks, including unused capacity.
    pub fn allocated_bytes(&self) -> usize {
        self.chunks.iter().map(|c| c.capacity()).sum::<usize>() * size_of::<T>()
    }

    fn reserve_for(&mut self, n: usize) {
        let chunk = &self.chunks[self.current];
        let fits = chunk.len() + n <= chunk.capacity().max(self.chunk_size);
        if !fits && !chunk.is_empty() {
            self.current += 1;
            if self.current == self.chunks.len() {
                self.chunks.push(Vec::new());
            }
        }
        let chunk = &mut self.chunks[self.current];
        if chunk.capacity() < n.max(self.chunk_size) {
            chunk.reserve_exact(n.max(self.chunk_size) - chunk.len());
        }
    }

    #[inline]
    pub fn push(&mut self, v: T) {
        let chunk = &self.chunks[self.current];
        if chunk.len() == chunk.capacity() {
            self.reserve_for(1);
        }
        self.chunks[self.current].push(v);
        self.len += 1;
    }

    pub fn push_slice(&mut self, vs: &[T]) {
        if vs.is_empty() {
            return;
        }
        self.reserve_for(vs.len());
        self.chunks[self.current].extend_from_slice(vs);
        self.len += vs.len();
    }

    fn settle(&mut self) {
        while self.chunks[self.current].is_empty() && self.current > 0 {
            self.current -= 1;
        }
    }

    #[inline]
    pub fn pop(&mut self) -> Option<T> {
        self.settle();
        let v = self.chunks[self.current].pop()?;
        self.len -= 1;
        Some(v)
    }

    /// Removes the last `n` entries, which must have been pushed as one
    /// slice, and appends them to `out` in push order. Returns `false` if the
    /// current chunk holds fewer than `n` entries.
    pub fn pop_slice_into(&mut self, n: usize, out: &mut Vec<T>) -> bool {
        if n == 0 {
            return true;
        }
        self.settle();
        let chunk = &mut self.chunks[self.current];
        if chunk.len() < n {
            return false;
        }
        let start = chunk.len() - n;
        out.extend_from_slice(&chunk[start..]);
        chunk.truncate(start);
        self.len -= n;
        true
    }

    /// Drops all entries but keeps the chunk allocations.
    pub fn clear(&mut self) {
        for c in &mut self.chunks {
            c.clear();
        }
        self.current = 0;
        self.len = 0;
    }

    /// Iterates entries in push order.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.chunks.iter().flat_map(|c| c.iter())
    }
}
