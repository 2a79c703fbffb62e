//! Deterministic event queue and clock.
//!
//! Events are ordered by `(fire_time, kind priority, sequence)`. Kind
//! priority follows the declaration order of [`EventKind`], and the
//! sequence number is issued at scheduling time, so simultaneous events of
//! one kind fire first-in first-out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::hash::{Hash, Hasher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Device(usize),
    Server(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkEvent {
    /// Periodic update round.
    Tick,
    /// Predicted end of a transmission; stale if `generation` moved on.
    TransferDone { transfer: u64, generation: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TaskGeneration { device: usize },
    PriceUpdate { agent: usize },
    MobilityEnergyUpdate,
    NetworkUpdate(NetworkEvent),
    TaskArrivedAtNode { task: u64, server: usize },
    ExecutionFinished { node: NodeRef, task: u64 },
    ResultDelivered { task: u64 },
    SimulationEnd,
}

impl EventKind {
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::TaskGeneration { .. } => 0,
            EventKind::PriceUpdate { .. } => 1,
            EventKind::MobilityEnergyUpdate => 2,
            EventKind::NetworkUpdate(_) => 3,
            EventKind::TaskArrivedAtNode { .. } => 4,
            EventKind::ExecutionFinished { .. } => 5,
            EventKind::ResultDelivered { .. } => 6,
            EventKind::SimulationEnd => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub fire_time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.fire_time, self.kind.priority(), self.sequence)
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        // reversed: BinaryHeap is a max-heap
        tb.total_cmp(&ta)
            .then_with(|| pb.cmp(&pa))
            .then_with(|| sb.cmp(&sa))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clock {
    now: f64,
    episode_length: f64,
}

impl Clock {
    pub fn new(episode_length: f64) -> Self {
        Self {
            now: 0.0,
            episode_length,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn episode_length(&self) -> f64 {
        self.episode_length
    }
}

#[derive(Debug)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    clock: Clock,
    next_sequence: u64,
    fired: u64,
    trace: std::collections::hash_map::DefaultHasher,
}

impl EventQueue {
    pub fn new(episode_length: f64) -> Self {
        Self {
            heap: BinaryHeap::new(),
            clock: Clock::new(episode_length),
            next_sequence: 0,
            fired: 0,
            trace: Default::default(),
        }
    }

    pub fn now(&self) -> f64 {
        self.clock.now
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    /// Schedules `kind` at absolute time `at`.
    ///
    /// Panics when `at` lies in the past: that is an engine bug, not a
    /// recoverable condition.
    pub fn schedule(&mut self, at: f64, kind: EventKind) -> u64 {
        assert!(
            at >= self.clock.now && at.is_finite(),
            "event {kind:?} scheduled at {at} but clock is at {}",
            self.clock.now
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event {
            fire_time: at,
            sequence,
            kind,
        });
        sequence
    }

    pub fn schedule_in(&mut self, delay: f64, kind: EventKind) -> u64 {
        self.schedule(self.clock.now + delay, kind)
    }

    /// Pops the next event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        debug_assert!(ev.fire_time >= self.clock.now);
        self.clock.now = ev.fire_time;
        self.fired += 1;
        ev.fire_time.to_bits().hash(&mut self.trace);
        ev.kind.hash(&mut self.trace);
        Some(ev)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn fired(&self) -> u64 {
        self.fired
    }

    /// Hash over every fired `(time, kind)` so far.
    pub fn trace_hash(&self) -> u64 {
        self.trace.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_within_same_time_and_kind() {
        let mut q = EventQueue::new(10.0);
        let a = q.schedule(5.0, EventKind::TaskGeneration { device: 1 });
        let b = q.schedule(5.0, EventKind::TaskGeneration { device: 2 });
        assert_eq!(q.pop().unwrap().sequence, a);
        assert_eq!(q.pop().unwrap().sequence, b);
    }

    #[test]
    fn kind_priority_breaks_time_ties() {
        let mut q = EventQueue::new(10.0);
        q.schedule(5.0, EventKind::PriceUpdate { agent: 0 });
        q.schedule(5.0, EventKind::TaskGeneration { device: 0 });
        q.schedule(5.0, EventKind::SimulationEnd);
        q.schedule(4.0, EventKind::SimulationEnd);
        assert_eq!(q.pop().unwrap().kind, EventKind::SimulationEnd);
        assert!(matches!(q.pop().unwrap().kind, EventKind::TaskGeneration { .. }));
        assert!(matches!(q.pop().unwrap().kind, EventKind::PriceUpdate { .. }));
        assert_eq!(q.pop().unwrap().kind, EventKind::SimulationEnd);
        assert!(q.pop().is_none());
    }

    #[test]
    #[should_panic(expected = "scheduled at")]
    fn scheduling_into_the_past_aborts() {
        let mut q = EventQueue::new(10.0);
        q.schedule(3.0, EventKind::MobilityEnergyUpdate);
        q.pop();
        q.schedule(2.0, EventKind::MobilityEnergyUpdate);
    }

    #[test]
    fn fired_times_are_non_decreasing() {
        use rand::Rng;
        let mut rng = crate::seed::SeedManager::new(1).derive_stream("q", 0);
        let mut q = EventQueue::new(100.0);
        for _ in 0..1000 {
            let t: f64 = rng.random_range(0.0..100.0);
            q.schedule(t, EventKind::MobilityEnergyUpdate);
        }
        let mut last = 0.0;
        let mut n = 0;
        while let Some(ev) = q.pop() {
            assert!(ev.fire_time >= last);
            last = ev.fire_time;
            if n % 3 == 0 {
                q.schedule(last + rng.random_range(0.0..1.0), EventKind::SimulationEnd);
            }
            n += 1;
            if n > 5000 {
                break;
            }
        }
    }
}
