use std::fmt;
use std::str::FromStr;

use lindblad_green::panels::{linear_grid, log_grid};
use serde::Serialize;

/// `min:max:count`, with an optional `:log` suffix for logarithmic spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl Span {
    pub fn points(&self) -> Vec<f64> {
        if self.log {
            log_grid(self.min, self.max, self.count)
        } else {
            linear_grid(self.min, self.max, self.count)
        }
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            4 => return Err(format!("unknown spacing '{}', expected 'log'", parts[3])),
            _ => return Err(format!("expected min:max:count[:log], got '{s}'")),
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad bound '{x}': {e}"));
        let (min, max) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|e| format!("bad count '{}': {e}", parts[2]))?;
        if !min.is_finite() || !max.is_finite() {
            return Err("grid bounds must be finite".into());
        }
        if count == 0 {
            return Err("grid count must be positive".into());
        }
        if count > 1 && !(max > min) {
            return Err(format!("grid must be strictly increasing, got {min} to {max}"));
        }
        if log && !(min > 0.0) {
            return Err("logarithmic grid needs a positive lower bound".into());
        }
        Ok(Self { min, max, count, log })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{:?}:{}", self.min, self.max, self.count)?;
        if self.log {
            write!(f, ":log")?;
        }
        Ok(())
    }
}

/// Comma-separated ensemble sizes; accepts `1e3`-style integers.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok.parse().map_err(|e| format!("bad size '{tok}': {e}"))?;
            if !(v >= 1.0) || v.fract() != 0.0 || v > 1e12 {
                return Err(format!("size '{tok}' is not a positive integer"));
            }
            Ok(v as usize)
        })
        .collect()
}
