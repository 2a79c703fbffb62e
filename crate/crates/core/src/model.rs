//! Core records and stochastic generators: tasks, application profiles,
//! device and server specifications, and device preference weights.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits in one kilobyte (decimal, matching Mbps link rates).
pub const BITS_PER_KB: f64 = 8000.0;
/// Joules per watt-hour.
pub const J_PER_WH: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn inside_square(&self, side: f64) -> bool {
        (0.0..=side).contains(&self.x) && (0.0..=side).contains(&self.y)
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }

    pub fn is_zero(&self) -> bool {
        self.min == 0.0 && self.max == 0.0
    }

    /// Uniform draw; a degenerate range returns `min` exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.min == self.max {
            self.min
        } else {
            self.min + (self.max - self.min) * u
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationProfile {
    pub name: String,
    /// Expected arrivals per second.
    pub poisson_rate: f64,
    /// Latency constraint `D_max`, seconds.
    pub latency_constraint: f64,
    /// kB
    pub input_range: Range,
    /// kB; `(0, 0)` means the container follows the input size.
    pub container_range: Range,
    pub output_ratio_range: Range,
    /// Mean task length in MIs.
    pub expected_length: f64,
    /// Percent of task-generating devices using this profile.
    pub device_share: f64,
}

impl ApplicationProfile {
    pub fn container_follows_input(&self) -> bool {
        self.container_range.is_zero()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, r) in [
            ("input size", &self.input_range),
            ("container size", &self.container_range),
            ("output ratio", &self.output_ratio_range),
        ] {
            if !r.is_valid() {
                return Err(format!("{name} range min > max"));
            }
            if r.min < 0.0 {
                return Err(format!("{name} range is negative"));
            }
        }
        if !(self.poisson_rate > 0.0) {
            return Err("rate must be > 0".into());
        }
        if !(self.latency_constraint > 0.0) {
            return Err("latency must be > 0".into());
        }
        if !(self.expected_length > 0.0) {
            return Err("task length must be > 0".into());
        }
        if !(0.0..=100.0).contains(&self.device_share) {
            return Err("usage percentage outside [0, 100]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskStatus {
    Created,
    Queued,
    Executing,
    DoneSuccess,
    FailedLatency,
    FailedEnergy,
    FailedDeviceDead,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskStatus::DoneSuccess
                | TaskStatus::FailedLatency
                | TaskStatus::FailedEnergy
                | TaskStatus::FailedDeviceDead
        )
    }

    fn stage(self) -> u8 {
        match self {
            TaskStatus::Created => 0,
            TaskStatus::Queued => 1,
            TaskStatus::Executing => 2,
            _ => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Created => "created",
            TaskStatus::Queued => "queued",
            TaskStatus::Executing => "executing",
            TaskStatus::DoneSuccess => "done-success",
            TaskStatus::FailedLatency => "failed-latency",
            TaskStatus::FailedEnergy => "failed-energy",
            TaskStatus::FailedDeviceDead => "failed-device-dead",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "created" => TaskStatus::Created,
            "queued" => TaskStatus::Queued,
            "executing" => TaskStatus::Executing,
            "done-success" => TaskStatus::DoneSuccess,
            "failed-latency" => TaskStatus::FailedLatency,
            "failed-energy" => TaskStatus::FailedEnergy,
            "failed-device-dead" => TaskStatus::FailedDeviceDead,
            _ => return None,
        })
    }
}

/// Where a task is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    Local,
    /// Index into the scenario's server list.
    Server(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    /// Computational demand `c`, MIs.
    pub length: f64,
    pub input_bits: f64,
    pub output_bits: f64,
    pub container_bits: f64,
    /// `D_max`, seconds.
    pub deadline: f64,
    pub origin_device: usize,
    pub creation_time: f64,
    pub status: TaskStatus,
    pub destination: Destination,
    /// Pricing agent credited with the offload, if any.
    pub agent: Option<usize>,
    pub price: f64,
    pub upload_start: Option<f64>,
    pub upload_end: Option<f64>,
    pub arrival: Option<f64>,
    pub exec_start: Option<f64>,
    pub exec_end: Option<f64>,
    pub download_start: Option<f64>,
    pub download_end: Option<f64>,
    pub delivered: Option<f64>,
    /// Rejected by the server for lack of RAM or storage.
    pub rejected: bool,
}

impl Task {
    /// Moves the task forward in its lifecycle. Going backwards is a bug.
    pub fn set_status(&mut self, next: TaskStatus) {
        assert!(
            next.stage() >= self.status.stage() && !self.status.is_terminal(),
            "task {}: illegal transition {:?} -> {:?}",
            self.id,
            self.status,
            next
        );
        self.status = next;
    }

    pub fn is_offloaded(&self) -> bool {
        matches!(self.destination, Destination::Server(_))
    }

    /// Time from creation to the given instant.
    pub fn elapsed(&self, at: f64) -> f64 {
        at - self.creation_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTypeSpec {
    pub share: f64,
    pub mobile: bool,
    /// m/s
    pub speed: f64,
    pub pause_range: Range,
    pub mobility_range: Range,
    pub battery_powered: bool,
    /// Wh
    pub battery_capacity: f64,
    /// Percent of capacity at start.
    pub initial_battery: f64,
    pub idle_power: f64,
    pub max_power: f64,
    pub cores: u32,
    pub mips_per_core: f64,
    pub ram: f64,
    pub storage: f64,
    pub tx_power: f64,
    pub rx_power: f64,
    pub connectivity: String,
    pub generates_tasks: bool,
    pub can_orchestrate: bool,
}

impl DeviceTypeSpec {
    pub const DEFAULT_TX_POWER: f64 = 1.3;
    pub const DEFAULT_RX_POWER: f64 = 1.0;

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0 <= self.idle_power && self.idle_power <= self.max_power) {
            return Err("need 0 <= idleConsumption <= maxConsumption".into());
        }
        if self.cores < 1 {
            return Err("cores must be >= 1".into());
        }
        if !(self.mips_per_core > 0.0) {
            return Err("mips must be > 0".into());
        }
        if !(self.speed >= 0.0) {
            return Err("speed must be >= 0".into());
        }
        if !self.pause_range.is_valid() || !self.mobility_range.is_valid() {
            return Err("pause/mobility duration min > max".into());
        }
        if self.battery_powered && !(self.battery_capacity > 0.0) {
            return Err("battery capacity must be > 0".into());
        }
        if !(0.0..=100.0).contains(&self.initial_battery) {
            return Err("initial battery level outside [0, 100]".into());
        }
        if !(0.0..=100.0).contains(&self.share) {
            return Err("percentage outside [0, 100]".into());
        }
        Ok(())
    }

    pub fn capacity_mips(&self) -> f64 {
        f64::from(self.cores) * self.mips_per_core
    }

    pub fn battery_joules(&self) -> f64 {
        self.battery_capacity * J_PER_WH
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub idle_power: f64,
    pub max_power: f64,
    pub cores: u32,
    pub mips_per_core: f64,
    pub ram: f64,
    pub storage: f64,
}

impl ServerSpec {
    /// 20 high-capacity servers scenario.
    pub const HIGH_CAPACITY: ServerSpec = ServerSpec {
        idle_power: 105.0,
        max_power: 185.0,
        cores: 15,
        mips_per_core: 20_000.0,
        ram: 80_000.0,
        storage: 1_280_000.0,
    };

    /// 100 low-capacity servers scenario.
    pub const LOW_CAPACITY: ServerSpec = ServerSpec {
        idle_power: 45.0,
        max_power: 95.0,
        cores: 6,
        mips_per_core: 10_000.0,
        ram: 16_000.0,
        storage: 256_000.0,
    };

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0 <= self.idle_power && self.idle_power <= self.max_power) {
            return Err("need 0 <= idleConsumption <= maxConsumption".into());
        }
        if self.cores < 1 {
            return Err("cores must be >= 1".into());
        }
        if !(self.mips_per_core > 0.0) {
            return Err("mips must be > 0".into());
        }
        Ok(())
    }

    /// Total capacity `n^c f` in MIPS.
    pub fn capacity_mips(&self) -> f64 {
        f64::from(self.cores) * self.mips_per_core
    }
}

/// Device importance weights for delay, energy and price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    pub delay: f64,
    pub energy: f64,
    pub price: f64,
}

impl ImportanceWeights {
    pub fn new(delay: f64, energy: f64, price: f64) -> Result<Self> {
        let w = Self {
            delay,
            energy,
            price,
        };
        if delay < 0.0 || energy < 0.0 || price < 0.0 || (w.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::Param(format!(
                "importance weights must be >= 0 and sum to 1, got ({delay}, {energy}, {price})"
            )));
        }
        Ok(w)
    }

    pub fn sum(&self) -> f64 {
        self.delay + self.energy + self.price
    }
}

/// Draws a task from `profile` for `device` at time `now`.
pub fn sample_task<R: Rng + ?Sized>(
    id: u64,
    profile: &ApplicationProfile,
    device: usize,
    now: f64,
    rng: &mut R,
) -> Task {
    let input_bits = profile.input_range.sample(rng) * BITS_PER_KB;
    let ratio = profile.output_ratio_range.sample(rng);
    // inverse CDF on the open interval keeps c > 0
    let u: f64 = rng.sample(Open01);
    let length = -profile.expected_length * u.ln();
    let container_bits = if profile.container_follows_input() {
        input_bits
    } else {
        profile.container_range.sample(rng) * BITS_PER_KB
    };
    Task {
        id,
        length,
        input_bits,
        output_bits: ratio * input_bits,
        container_bits,
        deadline: profile.latency_constraint,
        origin_device: device,
        creation_time: now,
        status: TaskStatus::Created,
        destination: Destination::Local,
        agent: None,
        price: 0.0,
        upload_start: None,
        upload_end: None,
        arrival: None,
        exec_start: None,
        exec_end: None,
        download_start: None,
        download_end: None,
        delivered: None,
        rejected: false,
    }
}

/// Uniform point on the 2-simplex by sorting two uniforms and taking gaps.
pub fn generate_weights<R: Rng + ?Sized>(rng: &mut R) -> ImportanceWeights {
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let delay = lo;
    let energy = hi - lo;
    // closes the sum exactly in floating point
    let price = 1.0 - delay - energy;
    ImportanceWeights {
        delay,
        energy,
        price: price.max(0.0),
    }
}

/// Lazily generated Poisson arrival times on `(0, horizon]`.
#[derive(Debug, Clone)]
pub struct PoissonArrivals<R> {
    rng: R,
    rate: f64,
    horizon: f64,
    now: f64,
}

impl<R: Rng> PoissonArrivals<R> {
    pub fn new(rate: f64, horizon: f64, rng: R) -> Self {
        Self {
            rng,
            rate,
            horizon,
            now: 0.0,
        }
    }
}

impl<R: Rng> Iterator for PoissonArrivals<R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if !(self.rate > 0.0) || self.now >= self.horizon {
            return None;
        }
        let u: f64 = self.rng.sample(Open01);
        self.now += -u.ln() / self.rate;
        if self.now > self.horizon {
            self.now = self.horizon;
            return None;
        }
        Some(self.now)
    }
}

pub fn poisson_arrivals<R: Rng>(rate: f64, horizon: f64, rng: R) -> Vec<f64> {
    PoissonArrivals::new(rate, horizon, rng).collect()
}
