//! Parameter grids over `(θ, θ₁)`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Logarithmic,
}

/// One axis: `points` samples of `[min, max]`.
///
/// With `centers` the samples are midpoints of `points` equal cells, which
/// lets an axis cover an open interval such as `(0, 7)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
    pub centers: bool,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, points: usize, spacing: Spacing, centers: bool) -> Result<Self> {
        let axis = GridAxis {
            min,
            max,
            points,
            spacing,
            centers,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidParameter {
                name: "points",
                value: self.points as f64,
                reason: "grid axes need at least 2 points",
            });
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidParameter {
                name: "max",
                value: self.max,
                reason: "axis range must be finite with max > min",
            });
        }
        let positive = match (self.spacing, self.centers) {
            (Spacing::Linear, true) => self.min >= 0.0,
            _ => self.min > 0.0,
        };
        if !positive {
            return Err(Error::InvalidParameter {
                name: "min",
                value: self.min,
                reason: "grid values must be positive",
            });
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        let t = if self.centers {
            (i as f64 + 0.5) / self.points as f64
        } else {
            i as f64 / (self.points - 1) as f64
        };
        match self.spacing {
            Spacing::Linear => {
                if !self.centers && i == self.points - 1 {
                    self.max
                } else {
                    self.min + t * (self.max - self.min)
                }
            }
            Spacing::Logarithmic => {
                let (lo, hi) = (self.min.ln(), self.max.ln());
                if !self.centers && i == 0 {
                    self.min
                } else if !self.centers && i == self.points - 1 {
                    self.max
                } else {
                    (lo + t * (hi - lo)).exp()
                }
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

/// Product grid; cells are ordered row-major with `θ` outer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta: GridAxis,
    pub theta1: GridAxis,
}

impl GridSpec {
    pub fn new(theta: GridAxis, theta1: GridAxis) -> Result<Self> {
        theta.validate()?;
        theta1.validate()?;
        Ok(GridSpec { theta, theta1 })
    }

    pub fn cell_count(&self) -> usize {
        self.theta.points * self.theta1.points
    }

    /// `(θ, θ₁)` of every cell in row-major order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let ts = self.theta.values();
        let t1s = self.theta1.values();
        ts.iter().flat_map(|&t| t1s.iter().map(move |&t1| (t, t1))).collect()
    }
}

/// Parsed form of `tmin:tmax:n,t1min:t1max:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRanges {
    pub theta: (f64, f64, usize),
    pub theta1: (f64, f64, usize),
}

impl GridRanges {
    pub fn to_spec(&self, spacing: Spacing, centers: bool) -> Result<GridSpec> {
        GridSpec::new(
            GridAxis::new(self.theta.0, self.theta.1, self.theta.2, spacing, centers)?,
            GridAxis::new(self.theta1.0, self.theta1.1, self.theta1.2, spacing, centers)?,
        )
    }
}

impl FromStr for GridRanges {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse(s.to_string());
        let axis = |part: &str| -> Result<(f64, f64, usize)> {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(err());
            }
            Ok((
                fields[0].trim().parse().map_err(|_| err())?,
                fields[1].trim().parse().map_err(|_| err())?,
                fields[2].trim().parse().map_err(|_| err())?,
            ))
        };
        let (a, b) = s.split_once(',').ok_or_else(err)?;
        Ok(GridRanges {
            theta: axis(a)?,
            theta1: axis(b)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_axis_hits_endpoints() {
        let a = GridAxis::new(0.1, 1.0, 10, Spacing::Linear, false).unwrap();
        let v = a.values();
        assert_eq!(v[0], 0.1);
        assert_eq!(v[9], 1.0);
        assert!((v[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn log_axis_is_geometric() {
        let a = GridAxis::new(1e-3, 1e3, 7, Spacing::Logarithmic, false).unwrap();
        let v = a.values();
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[6], 1e3);
        assert!((v[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn centered_axis_covers_open_interval() {
        let a = GridAxis::new(0.0, 7.0, 500, Spacing::Linear, true).unwrap();
        let v = a.values();
        assert!(v[0] > 0.0 && v[499] < 7.0);
        assert!(GridAxis::new(0.0, 7.0, 500, Spacing::Linear, false).is_err());
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(GridAxis::new(1.0, 2.0, 1, Spacing::Linear, false).is_err());
        assert!(GridAxis::new(2.0, 1.0, 5, Spacing::Linear, false).is_err());
        assert!(GridAxis::new(0.0, 1.0, 5, Spacing::Logarithmic, true).is_err());
    }

    #[test]
    fn parses_ranges() {
        let r: GridRanges = "0.1:1:10,1e-3:0.2:5".parse().unwrap();
        assert_eq!(r.theta, (0.1, 1.0, 10));
        assert_eq!(r.theta1, (1e-3, 0.2, 5));
        assert!("0.1:1,2:3:4".parse::<GridRanges>().is_err());
        let spec = r.to_spec(Spacing::Linear, false).unwrap();
        assert_eq!(spec.cell_count(), 50);
        assert_eq!(spec.cells()[1], (0.1, spec.theta1.value(1)));
    }
}
