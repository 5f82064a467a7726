//! Conversions between the logarithmic units used at I/O boundaries and the
//! linear units used internally (THz, km, W, Napierian 1/km).

use std::f64::consts::LN_10;

use crate::error::{Error, Result};

/// Napierian 1/km per dB/km.
pub const DB_PER_KM_TO_NEPER: f64 = LN_10 / 10.0;

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    DbPerKm,
    PerKm,
    Dbm,
    Watt,
    Db,
    Linear,
}

impl Unit {
    fn name(self) -> &'static str {
        match self {
            Unit::DbPerKm => "dB/km",
            Unit::PerKm => "1/km",
            Unit::Dbm => "dBm",
            Unit::Watt => "W",
            Unit::Db => "dB",
            Unit::Linear => "linear",
        }
    }
}

/// Convert `value` between two units of the same physical quantity.
pub fn convert_units(value: f64, from: Unit, to: Unit) -> Result<f64> {
    use Unit::*;
    match (from, to) {
        (a, b) if a == b => Ok(value),
        (DbPerKm, PerKm) => Ok(db_per_km_to_per_km(value)),
        (PerKm, DbPerKm) => Ok(per_km_to_db_per_km(value)),
        (Dbm, Watt) => Ok(dbm_to_watt(value)),
        (Watt, Dbm) => Ok(watt_to_dbm(value)),
        (Db, Linear) => Ok(db_to_linear(value)),
        (Linear, Db) => Ok(linear_to_db(value)),
        _ => Err(Error::UnsupportedConversion {
            from: from.name(),
            to: to.name(),
        }),
    }
}

pub fn db_per_km_to_per_km(db: f64) -> f64 {
    db * DB_PER_KM_TO_NEPER
}

pub fn per_km_to_db_per_km(neper: f64) -> f64 {
    neper / DB_PER_KM_TO_NEPER
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt * 1e3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn documented_values() {
        assert_relative_eq!(
            convert_units(0.2, Unit::DbPerKm, Unit::PerKm).unwrap(),
            0.2 * LN_10 / 10.0
        );
        assert_relative_eq!(
            convert_units(0.2, Unit::DbPerKm, Unit::PerKm).unwrap(),
            0.046052,
            max_relative = 1e-5
        );
        assert_relative_eq!(
            convert_units(-1.0, Unit::Dbm, Unit::Watt).unwrap(),
            7.943e-4,
            max_relative = 1e-4
        );
        assert_eq!(convert_units(0.0, Unit::Db, Unit::Linear).unwrap(), 1.0);
    }

    #[test]
    fn unsupported_pair() {
        let err = convert_units(1.0, Unit::Dbm, Unit::PerKm).unwrap_err();
        assert!(matches!(err, Error::UnsupportedConversion { .. }));
    }

    proptest! {
        #[test]
        fn round_trips(v in -60.0f64..60.0) {
            for (a, b) in [(Unit::DbPerKm, Unit::PerKm), (Unit::Dbm, Unit::Watt), (Unit::Db, Unit::Linear)] {
                let there = convert_units(v, a, b).unwrap();
                let back = convert_units(there, b, a).unwrap();
                prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
