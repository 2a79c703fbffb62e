//! Random-waypoint style move/pause cycles inside the simulation square.

use rand::Rng;

use crate::model::{DeviceTypeSpec, Location, Range};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub speed: f64,
    pub pause_range: Range,
    pub mobility_range: Range,
    pub side: f64,
}

impl MobilityParams {
    pub fn from_spec(spec: &DeviceTypeSpec, side: f64) -> Self {
        Self {
            speed: if spec.mobile { spec.speed } else { 0.0 },
            pause_range: spec.pause_range,
            mobility_range: spec.mobility_range,
            side,
        }
    }

    pub fn is_static(&self) -> bool {
        self.speed <= 0.0 || self.mobility_range.max <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Moving,
    Paused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub location: Location,
    pub phase: Phase,
    pub phase_end: f64,
    pub waypoint: Location,
}

fn random_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Location {
    Location::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

impl MobilityState {
    /// Uniform initial position; mobile devices start with a pause.
    pub fn new<R: Rng + ?Sized>(params: &MobilityParams, rng: &mut R) -> Self {
        let location = random_point(params.side, rng);
        let mut s = Self {
            location,
            phase: Phase::Paused,
            phase_end: f64::INFINITY,
            waypoint: location,
        };
        if !params.is_static() {
            s.enter(Phase::Paused, 0.0, params, rng);
        }
        s
    }

    fn enter<R: Rng + ?Sized>(&mut self, phase: Phase, at: f64, p: &MobilityParams, rng: &mut R) {
        let range = match phase {
            Phase::Moving => p.mobility_range,
            Phase::Paused => p.pause_range,
        };
        if range.max <= 0.0 {
            // a zero-length phase is skipped; the other one lasts forever
            let other = match phase {
                Phase::Moving => Phase::Paused,
                Phase::Paused => Phase::Moving,
            };
            self.phase = other;
            self.phase_end = f64::INFINITY;
        } else {
            self.phase = phase;
            self.phase_end = at + range.sample(rng);
        }
        if self.phase == Phase::Moving {
            self.waypoint = random_point(p.side, rng);
        }
    }

    /// Advances the interval `(now - dt, now]` and returns the new location.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        dt: f64,
        p: &MobilityParams,
        rng: &mut R,
    ) -> Location {
        if p.is_static() {
            return self.location;
        }
        let mut t = now - dt;
        while t < now {
            let until = self.phase_end.min(now);
            if self.phase == Phase::Moving {
                self.walk(p.speed * (until - t), p, rng);
            }
            t = until;
            if t >= self.phase_end {
                let next = match self.phase {
                    Phase::Moving => Phase::Paused,
                    Phase::Paused => Phase::Moving,
                };
                self.enter(next, t, p, rng);
            }
        }
        self.location
    }

    fn walk<R: Rng + ?Sized>(&mut self, mut budget: f64, p: &MobilityParams, rng: &mut R) {
        while budget > 0.0 {
            let d = self.location.distance(&self.waypoint);
            if d <= budget {
                self.location = self.waypoint;
                budget -= d;
                self.waypoint = random_point(p.side, rng);
            } else {
                let f = budget / d;
                self.location = Location::new(
                    self.location.x + (self.waypoint.x - self.location.x) * f,
                    self.location.y + (self.waypoint.y - self.location.y) * f,
                );
                budget = 0.0;
            }
        }
        self.location.x = self.location.x.clamp(0.0, p.side);
        self.location.y = self.location.y.clamp(0.0, p.side);
    }
}
