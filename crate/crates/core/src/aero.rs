//! Mach-indexed aerodynamic coefficients and the resulting forces on the airframe.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::atmosphere::{flight_atmosphere, standard_atmosphere, AtmosphereSample};
use crate::error::{Error, Result};

/// One row of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroRow {
    pub mach: f64,
    /// Lift-curve slope, 1/rad.
    pub cl_alpha: f64,
    /// Parasite drag coefficient.
    pub cd0: f64,
    /// Induced drag coefficient, 1/rad².
    pub cd_alpha2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoefficients {
    pub cl_alpha: f64,
    pub cd0: f64,
    pub cd_alpha2: f64,
}

/// Coefficient rows sorted strictly ascending in Mach.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroTable {
    rows: Vec<AeroRow>,
}

const fn row(mach: f64, cl_alpha: f64, cd0: f64, cd_alpha2: f64) -> AeroRow {
    AeroRow {
        mach,
        cl_alpha,
        cd0,
        cd_alpha2,
    }
}

/// Wind-tunnel data of the reference interceptor airframe.
pub const DEFAULT_ROWS: [AeroRow; 4] = [
    row(0.4, 39.056, 0.4604, 39.072),
    row(0.6, 40.801, 0.4682, 39.735),
    row(0.8, 41.372, 0.4635, 39.242),
    row(0.9, 42.468, 0.4776, 40.531),
];

impl Default for AeroTable {
    fn default() -> Self {
        Self {
            rows: DEFAULT_ROWS.to_vec(),
        }
    }
}

impl AeroTable {
    pub fn new(rows: Vec<AeroRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::AeroTable(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            let finite = [r.mach, r.cl_alpha, r.cd0, r.cd_alpha2]
                .iter()
                .all(|v| v.is_finite());
            if !finite || r.mach < 0.0 || r.cl_alpha <= 0.0 || r.cd0 <= 0.0 || r.cd_alpha2 <= 0.0 {
                return Err(Error::AeroTable(format!(
                    "row {i}: coefficients must be finite and positive"
                )));
            }
        }
        if rows.windows(2).any(|w| w[1].mach <= w[0].mach) {
            return Err(Error::AeroTable(
                "Mach column must be strictly ascending".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[AeroRow] {
        &self.rows
    }

    /// Parses the plain-text table format: `#`-prefixed header/comment lines,
    /// then one row per Mach number with four whitespace-separated columns
    /// `mach cl_alpha cd0 cd_alpha2`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>())
                .collect::<core::result::Result<_, _>>()
                .map_err(|e| Error::AeroTable(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 4 {
                return Err(Error::AeroTable(format!(
                    "line {}: expected 4 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            rows.push(row(cols[0], cols[1], cols[2], cols[3]));
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# mach cl_alpha[1/rad] cd0 cd_alpha2[1/rad^2]\n");
        for r in &self.rows {
            let _ = writeln!(out, "{} {} {} {}", r.mach, r.cl_alpha, r.cd0, r.cd_alpha2);
        }
        out
    }

    /// Piecewise-linear interpolation in Mach, clamped to the end rows.
    pub fn interp_coeffs(&self, mach: f64) -> AeroCoefficients {
        let rows = &self.rows;
        let first = rows[0];
        let last = rows[rows.len() - 1];
        if mach <= first.mach {
            return first.coefficients();
        }
        if mach >= last.mach {
            return last.coefficients();
        }
        // first index whose Mach exceeds the query; always in 1..len
        let hi = rows.partition_point(|r| r.mach <= mach);
        let (a, b) = (rows[hi - 1], rows[hi]);
        let w = (mach - a.mach) / (b.mach - a.mach);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        AeroCoefficients {
            cl_alpha: lerp(a.cl_alpha, b.cl_alpha),
            cd0: lerp(a.cd0, b.cd0),
            cd_alpha2: lerp(a.cd_alpha2, b.cd_alpha2),
        }
    }
}

impl AeroRow {
    fn coefficients(&self) -> AeroCoefficients {
        AeroCoefficients {
            cl_alpha: self.cl_alpha,
            cd0: self.cd0,
            cd_alpha2: self.cd_alpha2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airframe {
    /// kg
    pub mass: f64,
    /// m²
    pub ref_area: f64,
    /// Angle-of-attack limit, rad.
    pub alpha_max: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for Airframe {
    fn default() -> Self {
        Self {
            mass: 200.0,
            ref_area: 0.057_255_6,
            alpha_max: 15f64.to_radians(),
            gravity: 9.81,
        }
    }
}

impl Airframe {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.mass, self.ref_area, self.alpha_max, self.gravity]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "airframe mass, reference area, alpha limit and gravity must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forces {
    pub lift: f64,
    pub drag: f64,
    pub weight: f64,
}

/// Dynamic pressure and Mach-interpolated coefficients at one flight condition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FlightCondition {
    pub dynamic_pressure: f64,
    pub coeffs: AeroCoefficients,
}

impl FlightCondition {
    pub fn new(speed: f64, atmosphere: &AtmosphereSample, table: &AeroTable) -> Self {
        Self {
            dynamic_pressure: 0.5 * atmosphere.air_density * speed * speed,
            coeffs: table.interp_coeffs(speed / atmosphere.speed_of_sound),
        }
    }

    pub fn forces(&self, alpha: f64, airframe: &Airframe) -> Forces {
        let qs = self.dynamic_pressure * airframe.ref_area;
        let c = self.coeffs;
        Forces {
            lift: c.cl_alpha * alpha * qs,
            drag: (c.cd0 + c.cd_alpha2 * alpha * alpha) * qs,
            weight: airframe.mass * airframe.gravity,
        }
    }

    /// Angle of attack producing lateral acceleration `a_cmd`, saturated at ±alpha_max.
    pub fn alpha_for(&self, a_cmd: f64, airframe: &Airframe) -> f64 {
        let raw = airframe.mass * a_cmd
            / (self.coeffs.cl_alpha * self.dynamic_pressure * airframe.ref_area);
        raw.clamp(-airframe.alpha_max, airframe.alpha_max)
    }
}

/// Lift, drag and weight at the given speed, altitude and angle of attack.
pub fn forces(
    speed: f64,
    altitude: f64,
    alpha: f64,
    airframe: &Airframe,
    table: &AeroTable,
) -> Result<Forces> {
    if !(speed > 0.0) {
        return Err(Error::Domain {
            quantity: "speed",
            value: speed,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if !(alpha.abs() <= airframe.alpha_max) {
        return Err(Error::Domain {
            quantity: "alpha",
            value: alpha,
            min: -airframe.alpha_max,
            max: airframe.alpha_max,
        });
    }
    let atmosphere = standard_atmosphere(altitude)?;
    Ok(FlightCondition::new(speed, &atmosphere, table).forces(alpha, airframe))
}

/// Angle of attack that realises the lateral acceleration command, clamped to the AoA limit.
pub fn alpha_from_accel(
    a_cmd: f64,
    speed: f64,
    altitude: f64,
    airframe: &Airframe,
    table: &AeroTable,
) -> f64 {
    let atmosphere = flight_atmosphere(altitude);
    FlightCondition::new(speed, &atmosphere, table).alpha_for(a_cmd, airframe)
}
