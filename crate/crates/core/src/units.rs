//! Physical quantities as they appear in scenario sources.
//!
//! Every value is stored in a canonical unit per dimension: length in cm,
//! time in s, temperature in °C, mass in g and heating rate in °C/s.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Length,
    Time,
    Temperature,
    Mass,
    HeatRate,
    Dimensionless,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Temperature => "temperature",
            Dimension::Mass => "mass",
            Dimension::HeatRate => "heat_rate",
            Dimension::Dimensionless => "dimensionless",
        }
    }

    /// Unit symbol of the canonical representation, empty for dimensionless.
    pub fn canonical_symbol(self) -> &'static str {
        match self {
            Dimension::Length => "cm",
            Dimension::Time => "s",
            Dimension::Temperature => "C",
            Dimension::Mass => "g",
            Dimension::HeatRate => "C/s",
            Dimension::Dimensionless => "",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Millimeter,
    Centimeter,
    Meter,
    Second,
    Minute,
    Celsius,
    Gram,
    Kilogram,
    CelsiusPerSecond,
    CelsiusPerMinute,
}

impl Unit {
    pub const ALL: [Unit; 10] = [
        Unit::Millimeter,
        Unit::Centimeter,
        Unit::Meter,
        Unit::Second,
        Unit::Minute,
        Unit::Celsius,
        Unit::Gram,
        Unit::Kilogram,
        Unit::CelsiusPerSecond,
        Unit::CelsiusPerMinute,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Millimeter => "mm",
            Unit::Centimeter => "cm",
            Unit::Meter => "m",
            Unit::Second => "s",
            Unit::Minute => "min",
            Unit::Celsius => "C",
            Unit::Gram => "g",
            Unit::Kilogram => "kg",
            Unit::CelsiusPerSecond => "C/s",
            Unit::CelsiusPerMinute => "C/min",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Unit> {
        Unit::ALL.into_iter().find(|u| u.symbol() == symbol)
    }

    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Millimeter | Unit::Centimeter | Unit::Meter => Dimension::Length,
            Unit::Second | Unit::Minute => Dimension::Time,
            Unit::Celsius => Dimension::Temperature,
            Unit::Gram | Unit::Kilogram => Dimension::Mass,
            Unit::CelsiusPerSecond | Unit::CelsiusPerMinute => Dimension::HeatRate,
        }
    }

    /// Converts a magnitude in this unit to the canonical unit of its dimension.
    pub fn to_canonical(self, magnitude: f64) -> f64 {
        match self {
            Unit::Millimeter => magnitude / 10.0,
            Unit::Centimeter | Unit::Second | Unit::Celsius | Unit::Gram => magnitude,
            Unit::CelsiusPerSecond => magnitude,
            Unit::Meter => magnitude * 100.0,
            Unit::Minute => magnitude * 60.0,
            Unit::Kilogram => magnitude * 1000.0,
            Unit::CelsiusPerMinute => magnitude / 60.0,
        }
    }
}

impl FromStr for Unit {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::from_symbol(s).ok_or(())
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A literal magnitude with an optional unit; a bare number is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub magnitude: f64,
    pub unit: Option<Unit>,
}

impl Quantity {
    pub fn new(magnitude: f64, unit: Unit) -> Self {
        Quantity { magnitude, unit: Some(unit) }
    }

    pub fn scalar(magnitude: f64) -> Self {
        Quantity { magnitude, unit: None }
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.map_or(Dimension::Dimensionless, Unit::dimension)
    }

    pub fn canonical(&self) -> f64 {
        self.unit.map_or(self.magnitude, |u| u.to_canonical(self.magnitude))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            Some(unit) => write!(f, "{} {}", self.magnitude, unit),
            None => write!(f, "{}", self.magnitude),
        }
    }
}
