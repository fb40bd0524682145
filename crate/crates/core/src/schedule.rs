//! Closed-form real sequences `n -> a_n` (n >= 1) carrying analytic metadata.
//!
//! Convergence hypotheses such as `alpha_n -> 0`, `sum alpha_n = inf`,
//! `inf r_n > 0` or `0 < liminf beta_n <= limsup beta_n < 1` are read off the
//! closed form, then the leading indices are scanned numerically as a second
//! check.

use std::fmt;

use serde::Deserialize;

use crate::tolerances::SCHEDULE_SCAN;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `offset + scale * (n + shift)^(-exponent)`.
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        shift: u32,
    },
    /// Repeats `values` periodically, starting with `values[0]` at `n = 1`.
    Cycle {
        values: Vec<f64>,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    /// `scale * n^(-exponent)`.
    pub fn power(scale: f64, exponent: f64) -> Self {
        Schedule::Power {
            scale,
            exponent,
            offset: 0.0,
            shift: 0,
        }
    }

    pub fn offset_power(offset: f64, scale: f64, exponent: f64) -> Self {
        Schedule::Power {
            scale,
            exponent,
            offset,
            shift: 0,
        }
    }

    /// `scale * (n + shift)^(-exponent)`.
    pub fn shifted_power(scale: f64, exponent: f64, shift: u32) -> Self {
        Schedule::Power {
            scale,
            exponent,
            offset: 0.0,
            shift,
        }
    }

    /// `1 / n`.
    pub fn harmonic() -> Self {
        Self::power(1.0, 1.0)
    }

    /// `r_n = scale * n`.
    pub fn linear(scale: f64) -> Self {
        Self::power(scale, -1.0)
    }

    pub fn cycle(values: Vec<f64>) -> Self {
        Schedule::Cycle { values }
    }

    /// The `n`-th term, `n >= 1`.
    pub fn value(&self, n: usize) -> f64 {
        debug_assert!(n >= 1, "schedules are indexed from 1");
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Power {
                scale,
                exponent,
                offset,
                shift,
            } => {
                let nf = (n + *shift as usize) as f64;
                let t = if *exponent == 1.0 {
                    1.0 / nf
                } else if *exponent == -1.0 {
                    nf
                } else {
                    nf.powf(-exponent)
                };
                offset + scale * t
            }
            Schedule::Cycle { values } => values[(n - 1) % values.len()],
        }
    }

    fn well_formed(&self) -> Option<String> {
        match self {
            Schedule::Constant { value } if !value.is_finite() => Some("value must be finite".into()),
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } if !(scale.is_finite() && exponent.is_finite() && offset.is_finite()) => {
                Some("parameters must be finite".into())
            }
            Schedule::Cycle { values } if values.is_empty() => Some("cycle needs at least one value".into()),
            Schedule::Cycle { values } if values.iter().any(|v| !v.is_finite()) => {
                Some("cycle values must be finite".into())
            }
            _ => None,
        }
    }

    /// `inf_n a_n` over all `n >= 1`.
    pub fn infimum(&self) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } => {
                let first = self.value(1);
                if *scale == 0.0 || *exponent == 0.0 {
                    first
                } else if *exponent > 0.0 {
                    first.min(*offset)
                } else if *scale > 0.0 {
                    first
                } else {
                    f64::NEG_INFINITY
                }
            }
            Schedule::Cycle { values } => values.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// `sup_n a_n` over all `n >= 1`.
    pub fn supremum(&self) -> f64 {
        match self {
            Schedule::Cycle { values } => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Schedule::Power {
                scale,
                exponent,
                offset,
                shift,
            } => -Schedule::Power {
                scale: -scale,
                exponent: *exponent,
                offset: -offset,
                shift: *shift,
            }
            .infimum(),
            Schedule::Constant { value } => *value,
        }
    }

    pub fn liminf(&self) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } => {
                if *scale == 0.0 || *exponent == 0.0 {
                    offset + scale
                } else if *exponent > 0.0 {
                    *offset
                } else if *scale > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            Schedule::Cycle { .. } => self.infimum(),
        }
    }

    pub fn limsup(&self) -> f64 {
        match self {
            Schedule::Cycle { .. } => self.supremum(),
            _ => self.liminf(),
        }
    }

    /// Whether `sum_n a_n = +inf` for a nonnegative sequence.
    pub fn sum_diverges(&self) -> bool {
        match self {
            Schedule::Constant { value } => *value > 0.0,
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } => {
                let lim = self.liminf();
                lim > 0.0 || (*offset == 0.0 && *scale > 0.0 && *exponent <= 1.0)
            }
            Schedule::Cycle { values } => values.iter().any(|&v| v > 0.0),
        }
    }

    /// Hypotheses on the anchor weights: `alpha_n` in `(0, 1]`,
    /// `alpha_n -> 0` and `sum alpha_n = inf`.
    pub fn check_anchor_weights(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let label = "alpha schedule";
        if let Some(e) = self.well_formed() {
            issues.push(format!("{label}: {e}"));
            return issues;
        }
        if self.supremum() > 1.0 || self.infimum() < 0.0 {
            issues.push(format!("{label}: alpha_n in (0, 1] violated"));
        } else if let Some(n) = self.scan_first(|a| !(a > 0.0 && a <= 1.0)) {
            issues.push(format!("{label}: alpha_n > 0 violated at n = {n}"));
        }
        if self.liminf() != 0.0 || self.limsup() != 0.0 {
            issues.push(format!("{label}: alpha_n -> 0 violated"));
        }
        if !self.sum_diverges() {
            issues.push(format!("{label}: sum of alpha_n = infinity violated"));
        }
        issues
    }

    /// Resolvent parameters: `r_n > 0` and `inf_n r_n > 0`.
    pub fn check_resolvent_parameters(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let label = "r schedule";
        if let Some(e) = self.well_formed() {
            issues.push(format!("{label}: {e}"));
            return issues;
        }
        if !(self.infimum() > 0.0) {
            issues.push(format!("{label}: inf r_n > 0 violated"));
        } else if let Some(n) = self.scan_first(|r| !(r > 0.0 && r.is_finite())) {
            issues.push(format!("{label}: r_n > 0 violated at n = {n}"));
        }
        issues
    }

    /// Blend weights: `beta_n` in `[0, 1]` and
    /// `0 < liminf beta_n <= limsup beta_n < 1`.
    pub fn check_blend_weights(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let label = "beta schedule";
        if let Some(e) = self.well_formed() {
            issues.push(format!("{label}: {e}"));
            return issues;
        }
        if self.infimum() < 0.0 || self.supremum() > 1.0 {
            issues.push(format!("{label}: beta_n in [0, 1] violated"));
        } else if let Some(n) = self.scan_first(|b| !(0.0..=1.0).contains(&b)) {
            issues.push(format!("{label}: beta_n in [0, 1] violated at n = {n}"));
        }
        if !(self.liminf() > 0.0) {
            issues.push(format!("{label}: liminf beta_n > 0 violated"));
        }
        if !(self.limsup() < 1.0) {
            issues.push(format!("{label}: limsup beta_n < 1 violated"));
        }
        issues
    }

    fn scan_first(&self, bad: impl Fn(f64) -> bool) -> Option<usize> {
        (1..=SCHEDULE_SCAN).find(|&n| bad(self.value(n)))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant { value } => write!(f, "{value}"),
            Schedule::Power {
                scale,
                exponent,
                offset,
                shift,
            } => {
                if *offset != 0.0 {
                    write!(f, "{offset} + ")?;
                }
                if *shift == 0 {
                    write!(f, "{scale}*n^{}", -exponent)
                } else {
                    write!(f, "{scale}*(n+{shift})^{}", -exponent)
                }
            }
            Schedule::Cycle { values } => write!(f, "cycle{values:?}"),
        }
    }
}
