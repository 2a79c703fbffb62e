//! Energy accounting and the closed-form estimates used in decisions.

/// Idle draw plus the busy share of the dynamic range over `dt`.
pub fn tick_energy(idle_power: f64, max_power: f64, busy_core_seconds: f64, cores: u32, dt: f64) -> f64 {
    idle_power * dt + (max_power - idle_power) * busy_core_seconds / f64::from(cores)
}

/// Device radio energy for sending `d_in` and receiving `d_out` bits.
pub fn tx_rx_energy(tx_power: f64, rx_power: f64, d_in: f64, d_out: f64, r_up: f64, r_down: f64) -> f64 {
    let up = if d_in == 0.0 { 0.0 } else { tx_power * d_in / r_up };
    let down = if d_out == 0.0 { 0.0 } else { rx_power * d_out / r_down };
    up + down
}

/// Energy to run `length` MIs at full device capacity and maximum power.
pub fn local_exec_energy(max_power: f64, length: f64, cores: u32, mips_per_core: f64) -> f64 {
    max_power * length / (f64::from(cores) * mips_per_core)
}

/// Published queueing estimate of one server.
pub fn estimate_queue_time_server(queued_mi: f64, cores: u32, mips_per_core: f64) -> f64 {
    queued_mi / (f64::from(cores) * mips_per_core)
}

/// Published queueing estimate of a cluster of `members` identical servers.
pub fn estimate_queue_time_cluster(total_queued_mi: f64, members: usize, cores: u32, mips_per_core: f64) -> f64 {
    total_queued_mi / (members as f64 * f64::from(cores) * mips_per_core)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    pub capacity: f64,
    pub remaining: f64,
}

impl Battery {
    pub fn new(capacity_j: f64, initial_percent: f64) -> Self {
        Self {
            capacity: capacity_j,
            remaining: capacity_j * initial_percent / 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyState {
    pub consumed_total: f64,
    pub battery: Option<Battery>,
}

impl EnergyState {
    pub fn mains() -> Self {
        Self::default()
    }

    pub fn battery(capacity_j: f64, initial_percent: f64) -> Self {
        Self {
            consumed_total: 0.0,
            battery: Some(Battery::new(capacity_j, initial_percent)),
        }
    }

    /// Energy available for decisions; mains-powered nodes report infinity.
    pub fn available(&self) -> f64 {
        self.battery.map_or(f64::INFINITY, |b| b.remaining)
    }

    /// Draws `joules`. Returns `false` when the battery could not cover it,
    /// in which case it is left empty.
    pub fn draw(&mut self, joules: f64) -> bool {
        debug_assert!(joules >= 0.0);
        match &mut self.battery {
            None => {
                self.consumed_total += joules;
                true
            }
            Some(b) => {
                let taken = joules.min(b.remaining);
                b.remaining -= taken;
                self.consumed_total += taken;
                taken == joules
            }
        }
    }
}
