//! Engagement scenario definitions: initial-condition ranges, desired impact
//! time policy and seeded per-run random streams.

use libm::round;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{Simulator, VehicleState};
use crate::error::{Error, Result};

/// Open interval `(lo, hi)` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "{name}: interval ({}, {}) must be finite and ordered",
                self.lo,
                self.hi
            )))
        }
    }
}

/// Launch-state ranges. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialRanges {
    pub x0: Interval,
    pub y0: Interval,
    pub v0: Interval,
    pub gamma0: Interval,
}

impl Default for InitialRanges {
    fn default() -> Self {
        Self {
            x0: Interval::new(-30_000.0, -10_000.0),
            y0: Interval::new(10_000.0, 30_000.0),
            v0: Interval::new(200.0, 300.0),
            gamma0: Interval::new(0.0, 45f64.to_radians()),
        }
    }
}

impl InitialRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VehicleState {
        VehicleState {
            time: 0.0,
            x: self.x0.sample(rng),
            y: self.y0.sample(rng),
            speed: self.v0.sample(rng),
            gamma: self.gamma0.sample(rng),
        }
    }

    pub fn contains(&self, s: &VehicleState) -> bool {
        self.x0.contains(s.x)
            && self.y0.contains(s.y)
            && self.v0.contains(s.speed)
            && self.gamma0.contains(s.gamma)
    }
}

/// How the desired impact time of an engagement is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesiredTime {
    Fixed(f64),
    /// Uniform multiple of the predicted PNG time-to-go at launch.
    RatioBand(Interval),
}

impl Default for DesiredTime {
    fn default() -> Self {
        DesiredTime::RatioBand(Interval::new(1.1, 1.2))
    }
}

impl DesiredTime {
    pub fn sample<R: Rng + ?Sized>(&self, tgo_at_launch: f64, rng: &mut R) -> f64 {
        match self {
            DesiredTime::Fixed(t) => *t,
            DesiredTime::RatioBand(band) => band.sample(rng) * tgo_at_launch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngagementConfig {
    pub ranges: InitialRanges,
    pub simulator: Simulator,
    pub desired_time: DesiredTime,
}

impl EngagementConfig {
    pub fn validate(&self) -> Result<()> {
        self.ranges.x0.validate("x0")?;
        self.ranges.y0.validate("y0")?;
        self.ranges.v0.validate("v0")?;
        self.ranges.gamma0.validate("gamma0")?;
        if self.ranges.v0.lo <= 0.0 {
            return Err(Error::Config("v0 must be positive".into()));
        }
        self.simulator.airframe.validate()?;
        self.simulator.config.substeps()?;
        let sim = &self.simulator.config;
        if !(sim.capture_radius > 0.0) || !(sim.t_max >= 0.0) {
            return Err(Error::Config(
                "capture radius must be positive and t_max non-negative".into(),
            ));
        }
        match self.desired_time {
            DesiredTime::Fixed(t) if !(t > 0.0) => Err(Error::Config(
                "fixed desired impact time must be positive".into(),
            )),
            DesiredTime::RatioBand(band) => {
                band.validate("desired-time ratio band")?;
                if band.lo <= 1.0 || band.hi >= 2.0 {
                    return Err(Error::Config(
                        "desired-time ratio band must lie inside (1, 2)".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Launch state of the reference engagement: 20 km downrange, 20 km up, level at 200 m/s.
pub fn fixed_scenario() -> VehicleState {
    VehicleState {
        time: 0.0,
        x: -20_000.0,
        y: 20_000.0,
        speed: 200.0,
        gamma: 0.0,
    }
}

/// Independent random stream `index` of the master seed.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Independent seed for pipeline stage `tag` of `master_seed`.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    stream_rng(master_seed, tag).next_u64()
}

/// Number of guidance steps covering `duration` seconds.
pub fn steps_for(duration: f64, dt_guidance: f64) -> usize {
    round(duration / dt_guidance) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_stay_inside_ranges() {
        let ranges = InitialRanges::default();
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            assert!(ranges.contains(&ranges.sample(&mut rng)));
        }
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: f64 = stream_rng(5, 0).random();
        let b: f64 = stream_rng(5, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(5, 0).random::<f64>());
    }

    #[test]
    fn desired_time_policies() {
        let mut rng = stream_rng(2, 0);
        assert_eq!(DesiredTime::Fixed(120.0).sample(90.0, &mut rng), 120.0);
        for _ in 0..100 {
            let td = DesiredTime::default().sample(100.0, &mut rng);
            assert!((110.0..=120.0).contains(&td));
        }
    }

    #[test]
    fn validation() {
        assert!(EngagementConfig::default().validate().is_ok());
        let mut c = EngagementConfig::default();
        c.ranges.x0 = Interval::new(-10.0, -30.0);
        assert!(c.validate().is_err());
        for desired_time in [
            DesiredTime::RatioBand(Interval::new(0.9, 1.2)),
            DesiredTime::Fixed(-1.0),
        ] {
            let c = EngagementConfig {
                desired_time,
                ..Default::default()
            };
            assert!(c.validate().is_err());
        }
    }
}
