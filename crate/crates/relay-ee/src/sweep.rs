//! Sweep axes and study kinds.

use crate::config::KEYS;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: Scale,
}

impl Axis {
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: &str| Err(CliError::Config(format!("axis {}: {m}", self.name)));
        if !KEYS.contains(&self.name.as_str()) {
            return err("not a configurable parameter");
        }
        if self.points < 2 {
            return err("needs at least 2 points");
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return err("needs finite min < max");
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return err("log scale needs min > 0");
        }
        Ok(())
    }

    /// Grid values, endpoints exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == n {
                    return self.max;
                }
                let f = i as f64 / n as f64;
                match self.scale {
                    Scale::Linear => self.min + f * (self.max - self.min),
                    Scale::Log => {
                        let (a, b) = (self.min.log10(), self.max.log10());
                        10f64.powf(a + f * (b - a))
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Cdf,
    EeSurface,
    Threshold,
}

impl StudyKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Cdf => "cdf",
            Self::EeSurface => "ee-surface",
            Self::Threshold => "threshold",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(min: f64, max: f64, points: usize, scale: Scale) -> Axis {
        Axis {
            name: "lambda_nc".into(),
            min,
            max,
            points,
            scale,
        }
    }

    #[test]
    fn log_axis_hits_decades() {
        let v = axis(1e-7, 1.0, 15, Scale::Log).values();
        assert_eq!(v.len(), 15);
        assert_eq!(v[0], 1e-7);
        assert_eq!(v[14], 1.0);
        assert!((v[2] / 1e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_axis() {
        let v = axis(0.5, 1.5, 41, Scale::Linear).values();
        assert!((v[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn invalid_axes() {
        assert!(axis(1.0, 2.0, 1, Scale::Linear).validate().is_err());
        assert!(axis(0.0, 2.0, 3, Scale::Log).validate().is_err());
        assert!(axis(2.0, 1.0, 3, Scale::Linear).validate().is_err());
        let mut a = axis(1.0, 2.0, 3, Scale::Linear);
        a.name = "nope".into();
        assert!(a.validate().is_err());
    }
}
