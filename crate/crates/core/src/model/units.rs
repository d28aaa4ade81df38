//! Fixed-point quantities.
//!
//! Weights, distances and costs are integer milli-units so that capacity
//! checks, optimality proofs and gap computations never depend on float
//! comparison. Time is whole minutes since the Unix epoch.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MILLI: i64 = 1000;

/// Rounds a unit-valued float to milli-units.
pub fn to_milli(units: f64) -> i64 {
    (units * MILLI as f64).round() as i64
}

pub fn from_milli(milli: i64) -> f64 {
    milli as f64 / MILLI as f64
}

macro_rules! milli_quantity {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub i64);

        impl $name {
            pub const ZERO: $name = $name(0);

            pub fn from_units(units: f64) -> Self {
                $name(to_milli(units))
            }

            pub fn milli(self) -> i64 {
                self.0
            }

            pub fn units(self) -> f64 {
                from_milli(self.0)
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                self.0 += rhs.0;
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name(self.0 - rhs.0)
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: $name) {
                self.0 -= rhs.0;
            }
        }

        impl Sum for $name {
            fn sum<I: Iterator<Item = $name>>(iter: I) -> $name {
                $name(iter.map(|q| q.0).sum())
            }
        }

        impl<'a> Sum<&'a $name> for $name {
            fn sum<I: Iterator<Item = &'a $name>>(iter: I) -> $name {
                $name(iter.map(|q| q.0).sum())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let sign = if self.0 < 0 { "-" } else { "" };
                let abs = self.0.unsigned_abs();
                write!(f, "{}{}.{:03}", sign, abs / 1000, abs % 1000)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.units())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let v = f64::deserialize(d)?;
                if !v.is_finite() {
                    return Err(serde::de::Error::custom("quantity must be finite"));
                }
                Ok($name::from_units(v))
            }
        }
    };
}

milli_quantity!(
    /// Order or capacity weight in the instance's weight unit.
    Weight
);
milli_quantity!(
    /// Distance in the instance's (unit-agnostic) distance unit.
    Distance
);
milli_quantity!(
    /// Monetary cost.
    Cost
);

/// A duration in whole minutes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Minutes(pub i64);

impl Minutes {
    pub fn hours(h: f64) -> Minutes {
        Minutes((h * 60.0).round() as i64)
    }

    pub fn as_hours(self) -> f64 {
        self.0 as f64 / 60.0
    }
}

impl Add for Minutes {
    type Output = Minutes;
    fn add(self, rhs: Minutes) -> Minutes {
        Minutes(self.0 + rhs.0)
    }
}

impl Sub for Minutes {
    type Output = Minutes;
    fn sub(self, rhs: Minutes) -> Minutes {
        Minutes(self.0 - rhs.0)
    }
}

/// An instant, in minutes since 1970-01-01T00:00Z. Serialized as ISO-8601.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn plus(self, d: Minutes) -> Timestamp {
        Timestamp(self.0 + d.0)
    }

    pub fn since(self, earlier: Timestamp) -> Minutes {
        Minutes(self.0 - earlier.0)
    }

    pub fn to_iso(self) -> String {
        match DateTime::<Utc>::from_timestamp(self.0 * 60, 0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            None => format!("@{}min", self.0),
        }
    }

    pub fn parse_iso(s: &str) -> Result<Timestamp, String> {
        let secs = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            dt.timestamp()
        } else {
            let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
                .map_err(|e| format!("invalid ISO-8601 timestamp {s:?}: {e}"))?;
            naive.and_utc().timestamp()
        };
        if secs.rem_euclid(60) != 0 {
            return Err(format!("timestamp {s:?} is not on a whole minute"));
        }
        Ok(Timestamp(secs.div_euclid(60)))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter: durations written as fractional hours.
pub mod hours {
    use super::Minutes;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Minutes, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(m.as_hours())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Minutes, D::Error> {
        let h = f64::deserialize(d)?;
        Ok(Minutes::hours(h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_milli() {
        assert_eq!(Cost(200_000).to_string(), "200.000");
        assert_eq!(Cost(-1_500).to_string(), "-1.500");
        assert_eq!(Distance::from_units(33.3333).milli(), 33_333);
    }

    #[test]
    fn timestamp_iso_round_trip() {
        let t = Timestamp::parse_iso("2024-03-01T08:30:00Z").unwrap();
        assert_eq!(Timestamp::parse_iso(&t.to_iso()).unwrap(), t);
        assert_eq!(Timestamp::parse_iso("2024-03-01T08:30").unwrap(), t);
        assert!(Timestamp::parse_iso("2024-03-01T08:30:15Z").is_err());
        // pre-epoch instants show up in mirrored instances
        let neg = Timestamp(-12_345);
        assert_eq!(Timestamp::parse_iso(&neg.to_iso()).unwrap(), neg);
    }
}
