use std::collections::{BTreeSet, HashMap};

use super::degree::Degree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssocEntry {
    pub assoc_key: u64,
    pub degree: Degree,
    /// Insertion sequence number within the container.
    pub seq: u64,
}

/// Bounded set of associations ordered by degree, with key lookup.
///
/// On overflow the entry with the smallest degree is dropped. Among equal
/// degrees the oldest insertion goes first.
#[derive(Debug, Clone)]
pub struct AssocContainer {
    capacity: usize,
    by_key: HashMap<u64, (Degree, u64)>,
    // (degree, seq, key): first element is the next to evict
    order: BTreeSet<(Degree, u64, u64)>,
    next_seq: u64,
}

impl AssocContainer {
    /// # Panics
    ///
    /// Panics if `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "container capacity must be positive");
        Self {
            capacity,
            by_key: HashMap::new(),
            order: BTreeSet::new(),
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.by_key.contains_key(&key)
    }

    pub fn degree_of(&self, key: u64) -> Option<Degree> {
        self.by_key.get(&key).map(|&(d, _)| d)
    }

    /// Inserts or re-inserts `key`. Zero degrees are ignored.
    pub fn insert(&mut self, key: u64, degree: Degree) {
        if degree.is_zero() {
            return;
        }
        if let Some((old_degree, old_seq)) = self.by_key.remove(&key) {
            self.order.remove(&(old_degree, old_seq, key));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.by_key.insert(key, (degree, seq));
        self.order.insert((degree, seq, key));
        if self.by_key.len() > self.capacity {
            if let Some((_, _, victim)) = self.order.pop_first() {
                self.by_key.remove(&victim);
            }
        }
    }

    pub fn min_degree(&self) -> Option<AssocEntry> {
        self.order
            .first()
            .map(|&(degree, seq, assoc_key)| AssocEntry {
                assoc_key,
                degree,
                seq,
            })
    }

    /// Entries from highest to lowest degree; newer first among ties.
    pub fn entries(&self) -> Vec<AssocEntry> {
        self.order
            .iter()
            .rev()
            .map(|&(degree, seq, assoc_key)| AssocEntry {
                assoc_key,
                degree,
                seq,
            })
            .collect()
    }
}
