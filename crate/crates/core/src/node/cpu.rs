//! FIFO multi-core CPU: one task per core, run to completion.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Running {
    task: u64,
    length: f64,
    start: f64,
    finish: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Started {
    pub task: u64,
    pub core: usize,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone)]
pub struct CpuState {
    mips_per_core: f64,
    cores: Vec<Option<Running>>,
    queue: VecDeque<(u64, f64)>,
    /// Sum of lengths of waiting tasks.
    queued_len: f64,
    busy_since: f64,
    busy_core_seconds: f64,
    total_busy_core_seconds: f64,
}

impl CpuState {
    pub fn new(cores: u32, mips_per_core: f64) -> Self {
        assert!(cores >= 1 && mips_per_core > 0.0);
        Self {
            mips_per_core,
            cores: vec![None; cores as usize],
            queue: VecDeque::new(),
            queued_len: 0.0,
            busy_since: 0.0,
            busy_core_seconds: 0.0,
            total_busy_core_seconds: 0.0,
        }
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }

    pub fn mips_per_core(&self) -> f64 {
        self.mips_per_core
    }

    pub fn busy_cores(&self) -> usize {
        self.cores.iter().filter(|c| c.is_some()).count()
    }

    /// Tasks waiting plus tasks executing.
    pub fn task_count(&self) -> usize {
        self.queue.len() + self.busy_cores()
    }

    pub fn waiting(&self) -> usize {
        self.queue.len()
    }

    fn account(&mut self, now: f64) {
        let dt = now - self.busy_since;
        if dt > 0.0 {
            let b = self.busy_cores() as f64 * dt;
            self.busy_core_seconds += b;
            self.total_busy_core_seconds += b;
        }
        self.busy_since = self.busy_since.max(now);
    }

    fn start_on(&mut self, core: usize, task: u64, length: f64, now: f64) -> Started {
        let finish = now + length / self.mips_per_core;
        self.cores[core] = Some(Running {
            task,
            length,
            start: now,
            finish,
        });
        Started {
            task,
            core,
            start: now,
            finish,
        }
    }

    /// Runs the task on the first free core, otherwise queues it.
    pub fn submit(&mut self, now: f64, task: u64, length: f64) -> Option<Started> {
        self.account(now);
        match self.cores.iter().position(|c| c.is_none()) {
            Some(core) => Some(self.start_on(core, task, length, now)),
            None => {
                self.queue.push_back((task, length));
                self.queued_len += length;
                None
            }
        }
    }

    /// Frees the core running `task` and starts the head of the queue.
    /// The flag is false when `task` is not running here (stale event).
    pub fn finish(&mut self, now: f64, task: u64) -> (bool, Option<Started>) {
        self.account(now);
        let Some(core) = self
            .cores
            .iter()
            .position(|c| c.is_some_and(|r| r.task == task))
        else {
            return (false, None);
        };
        self.cores[core] = None;
        let next = self.queue.pop_front().map(|(t, len)| {
            self.queued_len -= len;
            if self.queue.is_empty() {
                self.queued_len = 0.0;
            }
            self.start_on(core, t, len, now)
        });
        self.check_bookkeeping();
        (true, next)
    }

    /// Drops every task; returns their ids (running first, then queued).
    pub fn clear(&mut self, now: f64) -> Vec<u64> {
        self.account(now);
        let mut out: Vec<u64> = self.cores.iter_mut().filter_map(|c| c.take().map(|r| r.task)).collect();
        out.extend(self.queue.drain(..).map(|(t, _)| t));
        self.queued_len = 0.0;
        out
    }

    /// `Q^MI`: waiting lengths plus remaining MIs of executing tasks.
    pub fn queued_mi(&self, now: f64) -> f64 {
        self.queued_len
            + self
                .cores
                .iter()
                .flatten()
                .map(|r| ((r.finish - now) * self.mips_per_core).clamp(0.0, r.length))
                .sum::<f64>()
    }

    /// Busy core-seconds since the previous call.
    pub fn take_busy_core_seconds(&mut self, now: f64) -> f64 {
        self.account(now);
        std::mem::take(&mut self.busy_core_seconds)
    }

    pub fn total_busy_core_seconds(&mut self, now: f64) -> f64 {
        self.account(now);
        self.total_busy_core_seconds
    }

    fn check_bookkeeping(&self) {
        if cfg!(debug_assertions) {
            let recomputed: f64 = self.queue.iter().map(|&(_, l)| l).sum();
            debug_assert!(
                (recomputed - self.queued_len).abs() <= 1e-6 * recomputed.max(1.0),
                "queued MI drifted: {} vs {}",
                self.queued_len,
                recomputed
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedManager;
    use rand::Rng;

    #[test]
    fn empty_node_runs_task_in_length_over_mips() {
        let mut cpu = CpuState::new(15, 20_000.0);
        let s = cpu.submit(3.0, 1, 2000.0).unwrap();
        assert!((s.finish - 3.1).abs() < 1e-12);
    }

    #[test]
    fn third_task_waits_for_first_core() {
        let mut cpu = CpuState::new(2, 1000.0);
        let a = cpu.submit(0.0, 1, 1000.0).unwrap();
        let b = cpu.submit(0.0, 2, 1000.0).unwrap();
        assert!(cpu.submit(0.0, 3, 1000.0).is_none());
        assert_eq!(cpu.task_count(), 3);
        assert_eq!((a.core, b.core), (0, 1));
        let (found, next) = cpu.finish(a.finish, 1);
        assert!(found);
        let c = next.unwrap();
        assert_eq!((c.task, c.core, c.start), (3, 0, 1.0));
        assert_eq!(c.finish, 2.0);
    }

    #[test]
    fn queued_mi_counts_remaining_work() {
        let mut cpu = CpuState::new(1, 1000.0);
        cpu.submit(0.0, 1, 1000.0);
        cpu.submit(0.0, 2, 500.0);
        assert!((cpu.queued_mi(0.0) - 1500.0).abs() < 1e-9);
        assert!((cpu.queued_mi(0.5) - 1000.0).abs() < 1e-9);
        assert_eq!(CpuState::new(4, 10.0).queued_mi(0.0), 0.0);
    }

    #[test]
    fn utilization_integrates_busy_cores() {
        let mut cpu = CpuState::new(2, 1000.0);
        cpu.submit(0.0, 1, 1000.0);
        cpu.submit(0.5, 2, 1000.0);
        // core 0 busy [0, 1], core 1 busy [0.5, 1.5]
        assert!((cpu.take_busy_core_seconds(1.0) - 1.5).abs() < 1e-12);
        cpu.finish(1.0, 1);
        cpu.finish(1.5, 2);
        assert!((cpu.take_busy_core_seconds(2.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fuzzed_arrivals_respect_cores_and_fifo() {
        let mut rng = SeedManager::new(8).derive_stream("cpu", 0);
        let mut cpu = CpuState::new(3, 1000.0);
        let mut running: Vec<Started> = Vec::new();
        let mut started_order = Vec::new();
        let mut now = 0.0;
        let mut next_id = 0u64;
        for _ in 0..100_000 {
            let arrive = rng.random::<f64>() < 0.5 || running.is_empty();
            if arrive {
                now += rng.random::<f64>() * 0.2;
                // finish everything due before this arrival
                running.sort_by(|a, b| a.finish.total_cmp(&b.finish).then(a.core.cmp(&b.core)));
                while let Some(r) = running.first().copied().filter(|r| r.finish <= now) {
                    running.remove(0);
                    if let (_, Some(s)) = cpu.finish(r.finish, r.task) {
                        started_order.push(s.task);
                        running.push(s);
                    }
                }
                if let Some(s) = cpu.submit(now, next_id, 100.0) {
                    started_order.push(s.task);
                    running.push(s);
                }
                next_id += 1;
            } else {
                running.sort_by(|a, b| a.finish.total_cmp(&b.finish).then(a.core.cmp(&b.core)));
                let r = running.remove(0);
                now = now.max(r.finish);
                if let (_, Some(s)) = cpu.finish(r.finish, r.task) {
                    started_order.push(s.task);
                    running.push(s);
                }
            }
            assert!(cpu.busy_cores() <= cpu.core_count());
            assert!(cpu.queued_mi(now) >= 0.0);
        }
        // equal-length tasks start in arrival order
        assert!(started_order.windows(2).all(|w| w[0] < w[1]));
    }
}
