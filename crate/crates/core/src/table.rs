//! Bounded hash table threaded with a doubly-linked list.
//!
//! Rows are kept in a slab and linked front (oldest) to back (newest). The
//! hash index gives O(1) lookup, and the links give O(1) removal and
//! move-to-back from anywhere in the list. Whether "oldest" means least
//! recently inserted or least recently used is up to the caller: `get_mut`
//! never reorders, `touch` does.

use std::collections::HashMap;
use std::hash::Hash;

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node<K, V> {
    key: K,
    value: V,
    prev: usize,
    next: usize,
}

#[derive(Debug, Clone)]
pub struct LinkedTable<K, V> {
    capacity: usize,
    index: HashMap<K, usize>,
    slots: Vec<Option<Node<K, V>>>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
}

impl<K: Hash + Eq + Clone, V> LinkedTable<K, V> {
    /// Creates an empty table holding at most `capacity` rows.
    ///
    /// # Panics
    ///
    /// Panics if `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "table capacity must be positive");
        Self {
            capacity,
            index: HashMap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn contains(&self, key: &K) -> bool {
        self.index.contains_key(key)
    }

    pub fn get(&self, key: &K) -> Option<&V> {
        let slot = *self.index.get(key)?;
        Some(&self.node(slot).value)
    }

    /// Mutable access without changing the row's position.
    pub fn get_mut(&mut self, key: &K) -> Option<&mut V> {
        let slot = *self.index.get(key)?;
        Some(&mut self.node_mut(slot).value)
    }

    /// Moves the row to the back. Returns false if the key is absent.
    pub fn touch(&mut self, key: &K) -> bool {
        match self.index.get(key) {
            Some(&slot) => {
                self.unlink(slot);
                self.link_back(slot);
                true
            }
            None => false,
        }
    }

    /// Inserts at the back.
    ///
    /// An existing row with the same key is replaced and moved to the back.
    /// Otherwise, if the table is full, the front row is evicted first and
    /// returned.
    pub fn insert(&mut self, key: K, value: V) -> Option<(K, V)> {
        if let Some(&slot) = self.index.get(&key) {
            self.node_mut(slot).value = value;
            self.unlink(slot);
            self.link_back(slot);
            return None;
        }
        let evicted = if self.is_full() {
            self.pop_front()
        } else {
            None
        };
        let node = Node {
            key: key.clone(),
            value,
            prev: NIL,
            next: NIL,
        };
        let slot = match self.free.pop() {
            Some(slot) => {
                self.slots[slot] = Some(node);
                slot
            }
            None => {
                self.slots.push(Some(node));
                self.slots.len() - 1
            }
        };
        self.index.insert(key, slot);
        self.link_back(slot);
        evicted
    }

    pub fn remove(&mut self, key: &K) -> Option<V> {
        let slot = self.index.remove(key)?;
        Some(self.release(slot).1)
    }

    pub fn pop_front(&mut self) -> Option<(K, V)> {
        if self.head == NIL {
            return None;
        }
        let slot = self.head;
        let (key, value) = self.release(slot);
        self.index.remove(&key);
        Some((key, value))
    }

    pub fn front(&self) -> Option<(&K, &V)> {
        (self.head != NIL).then(|| {
            let node = self.node(self.head);
            (&node.key, &node.value)
        })
    }

    pub fn back(&self) -> Option<(&K, &V)> {
        (self.tail != NIL).then(|| {
            let node = self.node(self.tail);
            (&node.key, &node.value)
        })
    }

    pub fn clear(&mut self) {
        self.index.clear();
        self.slots.clear();
        self.free.clear();
        self.head = NIL;
        self.tail = NIL;
    }

    /// Iterates rows front to back.
    pub fn iter(&self) -> Iter<'_, K, V> {
        Iter {
            table: self,
            cursor: self.head,
            remaining: self.len(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.iter().map(|(k, _)| k)
    }

    fn node(&self, slot: usize) -> &Node<K, V> {
        self.slots[slot].as_ref().expect("live slot")
    }

    fn node_mut(&mut self, slot: usize) -> &mut Node<K, V> {
        self.slots[slot].as_mut().expect("live slot")
    }

    fn release(&mut self, slot: usize) -> (K, V) {
        self.unlink(slot);
        let node = self.slots[slot].take().expect("live slot");
        self.free.push(slot);
        (node.key, node.value)
    }

    fn unlink(&mut self, slot: usize) {
        let (prev, next) = {
            let node = self.node(slot);
            (node.prev, node.next)
        };
        if prev == NIL {
            self.head = next;
        } else {
            self.node_mut(prev).next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.node_mut(next).prev = prev;
        }
        let node = self.node_mut(slot);
        node.prev = NIL;
        node.next = NIL;
    }

    fn link_back(&mut self, slot: usize) {
        let tail = self.tail;
        {
            let node = self.node_mut(slot);
            node.prev = tail;
            node.next = NIL;
        }
        if tail == NIL {
            self.head = slot;
        } else {
            self.node_mut(tail).next = slot;
        }
        self.tail = slot;
    }
}

pub struct Iter<'a, K, V> {
    table: &'a LinkedTable<K, V>,
    cursor: usize,
    remaining: usize,
}

impl<'a, K: Hash + Eq + Clone, V> Iterator for Iter<'a, K, V> {
    type Item = (&'a K, &'a V);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor == NIL {
            return None;
        }
        let node = self.table.node(self.cursor);
        self.cursor = node.next;
        self.remaining -= 1;
        Some((&node.key, &node.value))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl<K: Hash + Eq + Clone, V> ExactSizeIterator for Iter<'_, K, V> {}
