use serde::{Deserialize, Serialize};

/// Handle into the primal/adjoint vectors of one type. `0` is passive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Identifier(pub u32);

impl Identifier {
    pub const PASSIVE: Identifier = Identifier(0);

    #[inline]
    pub fn is_passive(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index manager with reuse: released identifiers go to a LIFO free pool.
#[derive(Debug, Clone, Default)]
pub struct IndexManager {
    free: Vec<u32>,
    next_unused: u32,
    live: Vec<bool>,
}

impl IndexManager {
    pub fn new() -> Self {
        Self {
            free: Vec::new(),
            next_unused: 1,
            live: vec![false],
        }
    }

    /// Never returns the passive identifier.
    #[inline]
    pub fn acquire(&mut self) -> Identifier {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                let id = self.next_unused;
                self.next_unused += 1;
                self.live.push(false);
                id
            }
        };
        self.live[id as usize] = true;
        Identifier(id)
    }

    /// Returns `true` if the identifier was live and entered the pool.
    /// Releasing the passive identifier is a no-op.
    #[inline]
    pub fn release(&mut self, id: Identifier) -> bool {
        if id.is_passive() {
            return false;
        }
        let live = self.live.get(id.index()).copied().unwrap_or(false);
        debug_assert!(live, "double release of identifier {}", id.0);
        if !live {
            return false;
        }
        self.live[id.index()] = false;
        self.free.push(id.0);
        true
    }

    #[inline]
    pub fn is_live(&self, id: Identifier) -> bool {
        self.live.get(id.index()).copied().unwrap_or(false)
    }

    /// Largest identifier ever handed out.
    #[inline]
    pub fn high_water(&self) -> u32 {
        self.next_unused - 1
    }

    pub fn free_pool_len(&self) -> usize {
        self.free.len()
    }

    pub fn live_count(&self) -> usize {
        self.high_water() as usize - self.free.len()
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }
}
