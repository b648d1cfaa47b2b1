//! ISA troposphere with an isothermal layer above the tropopause.

use libm::{exp, pow, sqrt};

use crate::error::{Error, Result};

pub const SEA_LEVEL_DENSITY: f64 = 1.225;
pub const SEA_LEVEL_TEMPERATURE: f64 = 288.15;
pub const LAPSE_RATE: f64 = 0.0065;
pub const GAS_CONSTANT: f64 = 287.05;
pub const HEAT_CAPACITY_RATIO: f64 = 1.4;
pub const STANDARD_GRAVITY: f64 = 9.80665;
pub const TROPOPAUSE_ALTITUDE: f64 = 11_000.0;
pub const MAX_ALTITUDE: f64 = 30_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereSample {
    pub altitude: f64,
    pub air_density: f64,
    pub speed_of_sound: f64,
}

/// Atmosphere at `altitude` metres, valid on `[0, 30 km]`.
pub fn standard_atmosphere(altitude: f64) -> Result<AtmosphereSample> {
    if !(0.0..=MAX_ALTITUDE).contains(&altitude) {
        return Err(Error::Domain {
            quantity: "altitude",
            value: altitude,
            min: 0.0,
            max: MAX_ALTITUDE,
        });
    }
    Ok(evaluate(altitude))
}

/// Atmosphere used inside the integrator.
///
/// Negative altitudes (intermediate RK stages of the final step) read sea-level
/// values and altitudes above 30 km continue the isothermal decay, so apogees of
/// climbing launches stay well defined.
pub fn flight_atmosphere(altitude: f64) -> AtmosphereSample {
    evaluate(altitude.max(0.0))
}

fn evaluate(altitude: f64) -> AtmosphereSample {
    let exponent = STANDARD_GRAVITY / (LAPSE_RATE * GAS_CONSTANT) - 1.0;
    let (temperature, air_density) = if altitude <= TROPOPAUSE_ALTITUDE {
        let t = SEA_LEVEL_TEMPERATURE - LAPSE_RATE * altitude;
        (
            t,
            SEA_LEVEL_DENSITY * pow(t / SEA_LEVEL_TEMPERATURE, exponent),
        )
    } else {
        let t = SEA_LEVEL_TEMPERATURE - LAPSE_RATE * TROPOPAUSE_ALTITUDE;
        let rho_tropopause = SEA_LEVEL_DENSITY * pow(t / SEA_LEVEL_TEMPERATURE, exponent);
        let scale_height = GAS_CONSTANT * t / STANDARD_GRAVITY;
        (
            t,
            rho_tropopause * exp(-(altitude - TROPOPAUSE_ALTITUDE) / scale_height),
        )
    };
    AtmosphereSample {
        altitude,
        air_density,
        speed_of_sound: sqrt(HEAT_CAPACITY_RATIO * GAS_CONSTANT * temperature),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sea_level() {
        let s = standard_atmosphere(0.0).unwrap();
        assert_eq!(s.air_density, 1.225);
        // sqrt(1.4 * 287.05 * 288.15) = 340.2941...
        assert!((s.speed_of_sound - 340.29).abs() < 0.1);
    }

    #[test]
    fn tropopause_density() {
        // 1.225 * (216.65 / 288.15)^(9.80665 / (0.0065 * 287.05) - 1), evaluated by hand: 0.3639
        let s = standard_atmosphere(11_000.0).unwrap();
        assert!((s.air_density - 0.364).abs() < 0.005, "{}", s.air_density);
    }

    #[test]
    fn continuous_across_tropopause() {
        let below = standard_atmosphere(TROPOPAUSE_ALTITUDE - 1e-6).unwrap();
        let above = standard_atmosphere(TROPOPAUSE_ALTITUDE + 1e-6).unwrap();
        assert!((below.air_density - above.air_density).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            standard_atmosphere(-1.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            standard_atmosphere(30_001.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn density_monotone_on_metre_grid() {
        let mut previous = f64::INFINITY;
        for metre in 0..=30_000 {
            let s = standard_atmosphere(metre as f64).unwrap();
            assert!(s.air_density > 0.0 && s.speed_of_sound > 0.0);
            assert!(s.air_density <= previous, "density rose at {metre} m");
            previous = s.air_density;
        }
    }

    #[test]
    fn flight_atmosphere_extends_range() {
        assert_eq!(flight_atmosphere(-5.0), standard_atmosphere(0.0).unwrap());
        let high = flight_atmosphere(33_000.0);
        assert!(
            high.air_density > 0.0 && high.air_density < flight_atmosphere(30_000.0).air_density
        );
    }
}
