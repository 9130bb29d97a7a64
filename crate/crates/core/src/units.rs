//! Angle and decibel conversions used at I/O boundaries.

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Power ratio in dB to linear.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB. Zero maps to `-inf`.
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn watts_to_dbm(w: f64) -> f64 {
    lin_to_db(w) + 30.0
}

/// Finite values pass through; infinities and NaN become `None` (JSON null).
pub fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn db_round_trip(db in -200.0f64..200.0) {
            let back = lin_to_db(db_to_lin(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn lin_round_trip(exp in -20.0f64..20.0) {
            let lin = 10f64.powf(exp);
            let back = db_to_lin(lin_to_db(lin));
            prop_assert!((back - lin).abs() <= 1e-12 * lin);
        }
    }

    #[test]
    fn zero_power_is_minus_infinity() {
        assert_eq!(lin_to_db(0.0), f64::NEG_INFINITY);
        assert_eq!(finite_or_none(f64::NEG_INFINITY), None);
    }
}
