//! Time-ordered event queue with integer-microsecond timestamps.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub const MICROS_PER_SECOND: f64 = 1_000_000.0;

pub fn seconds_to_micros(s: f64) -> u64 {
    (s * MICROS_PER_SECOND).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Seals the block of `interval`. Ordered before claims at the same instant.
    IntervalClose { interval: u64 },
    /// The prover broadcasts claim number `index` (0-based).
    Claim { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time_us: u64,
    pub kind: EventKind,
    /// Insertion order; breaks remaining ties.
    pub seq: u64,
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time_us: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time_us, kind, seq }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
