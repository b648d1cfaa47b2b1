//! Planar point-mass interceptor: engagement geometry, PNG baseline command and
//! fixed-step RK4 trajectory integration.

use alloc::vec::Vec;
use libm::{atan2, cos, hypot, sin};

use crate::aero::{AeroTable, Airframe, FlightCondition};
use crate::atmosphere::flight_atmosphere;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// s
    pub time: f64,
    /// m, downrange
    pub x: f64,
    /// m, altitude
    pub y: f64,
    /// m/s
    pub speed: f64,
    /// Flight-path angle above horizontal, rad.
    pub gamma: f64,
}

/// Stationary target position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Engagement {
    pub target_x: f64,
    pub target_y: f64,
}

impl Default for Engagement {
    fn default() -> Self {
        Self {
            target_x: 0.0,
            target_y: 0.0,
        }
    }
}

/// Composite command `total = baseline + bias`, all in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GuidanceCommand {
    pub baseline: f64,
    pub bias: f64,
    pub total: f64,
}

impl GuidanceCommand {
    pub fn new(baseline: f64, bias: f64) -> Self {
        Self {
            baseline,
            bias,
            total: baseline + bias,
        }
    }

    /// Analytic laws that produce a single total command report it all as baseline.
    pub fn unbiased(baseline: f64) -> Self {
        Self::new(baseline, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Hit,
    Ground,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Hit => "hit",
            Outcome::Ground => "ground",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationRecord {
    pub outcome: Outcome,
    pub final_time: f64,
    /// Minimum range over the final guidance interval, m.
    pub miss_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosGeometry {
    pub range: f64,
    pub los_angle: f64,
    pub los_rate: f64,
    pub closing_speed: f64,
}

/// Line-of-sight geometry for a stationary target.
pub fn los_geometry(state: &VehicleState, engagement: &Engagement) -> Result<LosGeometry> {
    let dx = engagement.target_x - state.x;
    let dy = engagement.target_y - state.y;
    let range = hypot(dx, dy);
    if !(range > 0.0) {
        return Err(Error::SingularGeometry);
    }
    let los_angle = atan2(dy, dx);
    let heading_error = state.gamma - los_angle;
    Ok(LosGeometry {
        range,
        los_angle,
        los_rate: -state.speed * sin(heading_error) / range,
        closing_speed: state.speed * cos(heading_error),
    })
}

/// Gravity-compensated energy-optimal PNG: `3 v λ̇ + g cos γ`.
pub fn png_baseline(state: &VehicleState, engagement: &Engagement, gravity: f64) -> Result<f64> {
    let los = los_geometry(state, engagement)?;
    Ok(3.0 * state.speed * los.los_rate + gravity * cos(state.gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt_sim: f64,
    /// Guidance (zero-order hold) period, s. Integer multiple of `dt_sim`.
    pub dt_guidance: f64,
    pub capture_radius: f64,
    pub t_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_sim: 0.05,
            dt_guidance: 0.5,
            capture_radius: 50.0,
            t_max: 200.0,
        }
    }
}

impl SimConfig {
    /// Number of integration steps per guidance period.
    pub fn substeps(&self) -> Result<usize> {
        let ratio = self.dt_guidance / self.dt_sim;
        let n = libm::round(ratio);
        if !(self.dt_sim > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * n {
            return Err(Error::Config(alloc::format!(
                "dt_guidance {} must be a positive integer multiple of dt_sim {}",
                self.dt_guidance,
                self.dt_sim
            )));
        }
        Ok(n as usize)
    }
}

/// Airframe, aerodynamic data, target and integration settings of one engagement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Simulator {
    pub airframe: Airframe,
    pub table: AeroTable,
    pub engagement: Engagement,
    pub config: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub state: VehicleState,
    pub command: GuidanceCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// One entry per guidance step: the state at which the command was issued.
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_state: VehicleState,
    pub termination: TerminationRecord,
}

impl Simulator {
    /// `(v̇, γ̇, ẋ, ẏ)` with the angle of attack chosen to realise `a_total`.
    fn derivatives(&self, s: &VehicleState, a_total: f64) -> [f64; 4] {
        let af = &self.airframe;
        let atmosphere = flight_atmosphere(s.y);
        let condition = FlightCondition::new(s.speed, &atmosphere, &self.table);
        let alpha = condition.alpha_for(a_total, af);
        let f = condition.forces(alpha, af);
        let (sg, cg) = (sin(s.gamma), cos(s.gamma));
        [
            (-f.drag - f.weight * sg) / af.mass,
            (f.lift - f.weight * cg) / (af.mass * s.speed),
            s.speed * cg,
            s.speed * sg,
        ]
    }

    /// One classical RK4 step of length `dt` under a held acceleration command.
    pub fn step(&self, state: &VehicleState, a_total: f64, dt: f64) -> Result<VehicleState> {
        if !(dt > 0.0) {
            return Err(Error::Domain {
                quantity: "dt",
                value: dt,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if !(state.speed > 0.0) {
            return Err(Error::Stall {
                time: state.time,
                speed: state.speed,
            });
        }
        let offset = |base: &VehicleState, k: &[f64; 4], h: f64| VehicleState {
            time: base.time + h,
            speed: base.speed + h * k[0],
            gamma: base.gamma + h * k[1],
            x: base.x + h * k[2],
            y: base.y + h * k[3],
        };
        let k1 = self.derivatives(state, a_total);
        let s2 = offset(state, &k1, 0.5 * dt);
        if !(s2.speed > 0.0) {
            return Err(Error::Stall {
                time: s2.time,
                speed: s2.speed,
            });
        }
        let k2 = self.derivatives(&s2, a_total);
        let s3 = offset(state, &k2, 0.5 * dt);
        if !(s3.speed > 0.0) {
            return Err(Error::Stall {
                time: s3.time,
                speed: s3.speed,
            });
        }
        let k3 = self.derivatives(&s3, a_total);
        let s4 = offset(state, &k3, dt);
        if !(s4.speed > 0.0) {
            return Err(Error::Stall {
                time: s4.time,
                speed: s4.speed,
            });
        }
        let k4 = self.derivatives(&s4, a_total);
        let mut k = [0.0; 4];
        for i in 0..4 {
            k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        let next = offset(state, &k, dt);
        if !(next.speed > 0.0) {
            return Err(Error::Stall {
                time: next.time,
                speed: next.speed,
            });
        }
        Ok(next)
    }

    pub fn range(&self, state: &VehicleState) -> f64 {
        hypot(
            self.engagement.target_x - state.x,
            self.engagement.target_y - state.y,
        )
    }

    /// Starts a step-wise flight from `initial`.
    pub fn flight(&self, initial: VehicleState) -> Result<Flight<'_>> {
        let substeps = self.config.substeps()?;
        let mut flight = Flight {
            sim: self,
            start_time: initial.time,
            state: initial,
            sim_steps: 0,
            substeps,
            termination: None,
        };
        let r = self.range(&initial);
        flight.termination = flight.check(r, r);
        Ok(flight)
    }

    /// PNG baseline for `state` with this simulator's gravity and target.
    pub fn png(&self, state: &VehicleState) -> Result<f64> {
        png_baseline(state, &self.engagement, self.airframe.gravity)
    }

    /// Integrates from `initial` until Hit, Ground or Timeout, calling
    /// `controller` once per guidance period.
    pub fn rollout<C>(&self, initial: VehicleState, mut controller: C) -> Result<Rollout>
    where
        C: FnMut(&VehicleState) -> Result<GuidanceCommand>,
    {
        let mut flight = self.flight(initial)?;
        let mut trajectory = Vec::new();
        let termination = loop {
            if let Some(t) = flight.termination() {
                break t;
            }
            let state = *flight.state();
            let command = controller(&state)?;
            trajectory.push(TrajectoryPoint { state, command });
            flight.advance(command.total)?;
        };
        Ok(Rollout {
            trajectory,
            final_state: *flight.state(),
            termination,
        })
    }
}

/// Step-wise engagement driver holding one command per guidance period.
#[derive(Debug, Clone)]
pub struct Flight<'a> {
    sim: &'a Simulator,
    start_time: f64,
    state: VehicleState,
    sim_steps: u64,
    substeps: usize,
    termination: Option<TerminationRecord>,
}

impl<'a> Flight<'a> {
    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn termination(&self) -> Option<TerminationRecord> {
        self.termination
    }

    pub fn simulator(&self) -> &'a Simulator {
        self.sim
    }

    fn check(&self, range: f64, min_range: f64) -> Option<TerminationRecord> {
        let cfg = &self.sim.config;
        let outcome = if range <= cfg.capture_radius {
            Outcome::Hit
        } else if self.state.y <= 0.0 {
            Outcome::Ground
        } else if self.state.time >= cfg.t_max - 1e-9 {
            Outcome::Timeout
        } else {
            return None;
        };
        Some(TerminationRecord {
            outcome,
            final_time: self.state.time,
            miss_distance: min_range,
        })
    }

    /// Holds `a_total` for one guidance period, stopping early on termination.
    /// Returns the termination record once the engagement has ended.
    pub fn advance(&mut self, a_total: f64) -> Result<Option<TerminationRecord>> {
        if self.termination.is_some() {
            return Ok(self.termination);
        }
        if !a_total.is_finite() {
            return Err(Error::NonFinite("guidance command"));
        }
        let dt = self.sim.config.dt_sim;
        let mut min_range = self.sim.range(&self.state);
        for _ in 0..self.substeps {
            match self.sim.step(&self.state, a_total, dt) {
                Ok(mut next) => {
                    self.sim_steps += 1;
                    // time is an exact multiple of dt_sim from the start
                    next.time = self.start_time + self.sim_steps as f64 * dt;
                    self.state = next;
                }
                Err(Error::Stall { .. }) => {
                    self.termination = Some(TerminationRecord {
                        outcome: Outcome::Timeout,
                        final_time: self.state.time,
                        miss_distance: min_range,
                    });
                    return Ok(self.termination);
                }
                Err(e) => return Err(e),
            }
            let r = self.sim.range(&self.state);
            min_range = min_range.min(r);
            if let Some(t) = self.check(r, min_range) {
                self.termination = Some(t);
                return Ok(self.termination);
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    const G: f64 = 9.81;

    fn state(x: f64, y: f64, speed: f64, gamma: f64) -> VehicleState {
        VehicleState {
            time: 0.0,
            x,
            y,
            speed,
            gamma,
        }
    }

    #[test]
    fn collinear_geometry() {
        let los = los_geometry(&state(-20_000.0, 0.0, 200.0, 0.0), &Engagement::default()).unwrap();
        assert_eq!(los.los_angle, 0.0);
        assert_eq!(los.los_rate, 0.0);
        assert_eq!(los.range, 20_000.0);
        assert_eq!(los.closing_speed, 200.0);
    }

    #[test]
    fn overhead_geometry() {
        let los = los_geometry(&state(0.0, 20_000.0, 200.0, 0.0), &Engagement::default()).unwrap();
        assert!((los.los_angle + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn singular_geometry() {
        assert_eq!(
            los_geometry(&state(0.0, 0.0, 200.0, 0.0), &Engagement::default()),
            Err(Error::SingularGeometry)
        );
    }

    #[test]
    fn los_rate_matches_finite_difference() {
        let sim = Simulator::default();
        let s0 = state(-20_000.0, 20_000.0, 200.0, 0.0);
        let h = 1e-5;
        let s1 = sim.step(&s0, 0.0, h).unwrap();
        let e = Engagement::default();
        let fd = (los_geometry(&s1, &e).unwrap().los_angle
            - los_geometry(&s0, &e).unwrap().los_angle)
            / h;
        let analytic = los_geometry(&s0, &e).unwrap().los_rate;
        // -200 sin(pi/4) / 28284.27
        assert!((analytic + 200.0 * FRAC_PI_4.sin() / 28_284.271_247).abs() < 1e-9);
        assert!(
            (fd - analytic).abs() < 1e-5 * analytic.abs(),
            "{fd} vs {analytic}"
        );
    }

    #[test]
    fn png_limits() {
        let e = Engagement::default();
        let vertical = state(0.0, 20_000.0, 200.0, -FRAC_PI_2);
        assert!(png_baseline(&vertical, &e, G).unwrap().abs() < 1e-12);
        let level = state(-20_000.0, 0.0, 200.0, 0.0);
        assert_eq!(png_baseline(&level, &e, G).unwrap(), G);
    }

    #[test]
    fn png_fixed_scenario_initial_command() {
        // x0 = -20 km, y0 = 20 km, v0 = 200, gamma0 = 0: lambda = -pi/4,
        // lambda_dot = -200 sin(pi/4) / 28284.27 = -0.005 rad/s, a0 = 3*200*(-0.005) + 9.81 = 6.81
        let a0 = png_baseline(
            &state(-20_000.0, 20_000.0, 200.0, 0.0),
            &Engagement::default(),
            G,
        )
        .unwrap();
        assert!((a0 - 6.81).abs() < 1e-9, "{a0}");
    }

    #[test]
    fn gravity_cancelling_command_holds_heading() {
        let sim = Simulator::default();
        let s0 = state(-20_000.0, 5_000.0, 250.0, 0.3);
        let s1 = sim.step(&s0, G * s0.gamma.cos(), 0.05).unwrap();
        assert!((s1.gamma - s0.gamma).abs() < 1e-6);
    }

    #[test]
    fn level_straight_flight_keeps_altitude() {
        let sim = Simulator::default();
        let s0 = state(-20_000.0, 3_000.0, 250.0, 0.0);
        let s1 = sim.step(&s0, G, 0.05).unwrap();
        assert!((s1.y - s0.y).abs() < 1e-9);
        let dx = s1.x - s0.x;
        assert!(dx < s0.speed * 0.05 && dx > s1.speed * 0.05);
    }

    #[test]
    fn single_step_matches_substeps() {
        let sim = Simulator::default();
        let s0 = state(-15_000.0, 6_000.0, 240.0, 0.1);
        let one = sim.step(&s0, 4.0, 0.05).unwrap();
        let mut fine = s0;
        for _ in 0..10 {
            fine = sim.step(&fine, 4.0, 0.005).unwrap();
        }
        for (a, b) in [
            (one.x, fine.x),
            (one.y, fine.y),
            (one.speed, fine.speed),
            (one.gamma, fine.gamma),
        ] {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let sim = Simulator::default();
        assert!(sim.step(&state(0.0, 100.0, 200.0, 0.0), 0.0, 0.0).is_err());
        assert!(matches!(
            sim.step(&state(0.0, 100.0, 0.0, 0.0), 0.0, 0.05),
            Err(Error::Stall { .. })
        ));
    }

    #[test]
    fn degenerate_rollouts() {
        let mut sim = Simulator::default();
        let png = |s: &VehicleState| -> Result<GuidanceCommand> {
            Ok(GuidanceCommand::unbiased(png_baseline(
                s,
                &Engagement::default(),
                G,
            )?))
        };
        let below = sim
            .rollout(state(-20_000.0, -1.0, 200.0, 0.0), png)
            .unwrap();
        assert_eq!(below.termination.outcome, Outcome::Ground);
        assert!(below.trajectory.is_empty());
        sim.config.t_max = 0.0;
        let r = sim
            .rollout(state(-20_000.0, 20_000.0, 200.0, 0.0), png)
            .unwrap();
        assert_eq!(r.termination.outcome, Outcome::Timeout);
        assert!(r.trajectory.is_empty());
    }

    #[test]
    fn rejects_non_multiple_guidance_period() {
        let mut sim = Simulator::default();
        sim.config.dt_guidance = 0.125;
        sim.config.dt_sim = 0.05;
        assert!(sim.flight(state(-1.0, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn png_rollout_hits_fixed_scenario() {
        let sim = Simulator::default();
        let r = sim
            .rollout(state(-20_000.0, 20_000.0, 200.0, 0.0), |s| {
                Ok(GuidanceCommand::unbiased(sim.png(s)?))
            })
            .unwrap();
        assert_eq!(r.termination.outcome, Outcome::Hit);
        assert!(r.termination.miss_distance <= 50.0);
        for w in r.trajectory.windows(2) {
            assert!((w[1].state.time - w[0].state.time - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn controller_errors_propagate() {
        let sim = Simulator::default();
        let r = sim.rollout(state(-20_000.0, 20_000.0, 200.0, 0.0), |_| {
            Err(Error::NonFinite("test"))
        });
        assert_eq!(r, Err(Error::NonFinite("test")));
    }
}
