//! Quantities with optional unit suffixes as they appear in config files,
//! e.g. `"20 dBm"`, `"100 mW"`, `"45 deg"`, `"1 dB"`. Bare numbers take the
//! field's default unit.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units::dbm_to_mw;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

fn split(field: &str, text: &str) -> Result<(f64, String)> {
    let text = text.trim();
    let end = text
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .or_else(|| text.find(char::is_whitespace))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(end);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{field}: cannot parse number in {text:?}")))?;
    Ok((value, unit.trim().to_ascii_lowercase()))
}

impl Quantity {
    fn parts(&self, field: &str) -> Result<(f64, String)> {
        let (v, unit) = match self {
            Quantity::Number(v) => (*v, String::new()),
            Quantity::Text(t) => split(field, t)?,
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("{field}: value must be finite")));
        }
        Ok((v, unit))
    }

    /// Power in milliwatts. Accepts dBm (default), dBW, mW and W.
    pub fn power_mw(&self, field: &str) -> Result<f64> {
        let (v, unit) = self.parts(field)?;
        match unit.as_str() {
            "" | "dbm" => Ok(dbm_to_mw(v)),
            "dbw" => Ok(dbm_to_mw(v + 30.0)),
            "mw" => Ok(v),
            "w" => Ok(v * 1e3),
            other => Err(Error::Config(format!("{field}: unknown power unit {other:?}"))),
        }
    }

    /// Angle in radians. Accepts rad (default) and deg.
    pub fn radians(&self, field: &str) -> Result<f64> {
        let (v, unit) = self.parts(field)?;
        match unit.as_str() {
            "" | "rad" => Ok(v),
            "deg" | "°" => Ok(v.to_radians()),
            other => Err(Error::Config(format!("{field}: unknown angle unit {other:?}"))),
        }
    }

    /// Gain in dB. Accepts dB (default) and `lin` for a linear ratio.
    pub fn decibels(&self, field: &str) -> Result<f64> {
        let (v, unit) = self.parts(field)?;
        match unit.as_str() {
            "" | "db" => Ok(v),
            "lin" if v > 0.0 => Ok(10.0 * v.log10()),
            other => Err(Error::Config(format!("{field}: unknown gain unit {other:?}"))),
        }
    }

    /// Length in meters. Accepts m (default) and km.
    pub fn meters(&self, field: &str) -> Result<f64> {
        let (v, unit) = self.parts(field)?;
        match unit.as_str() {
            "" | "m" => Ok(v),
            "km" => Ok(v * 1e3),
            other => Err(Error::Config(format!("{field}: unknown length unit {other:?}"))),
        }
    }
}
