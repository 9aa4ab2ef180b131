//! Point sets and the four supported metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric used to turn a pair of points into a distance.
///
/// Canberra is a metric on the nonnegative orthant. A coordinate pair
/// `(0, 0)` contributes nothing to the sum. Inputs with mixed signs are
/// accepted but may violate the triangle inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[serde(rename = "l1")]
    Manhattan,
    #[serde(rename = "l2")]
    Euclidean,
    #[serde(rename = "linf")]
    Chebyshev,
    Canberra,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Manhattan,
        MetricKind::Euclidean,
        MetricKind::Chebyshev,
        MetricKind::Canberra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Manhattan => "l1",
            MetricKind::Euclidean => "l2",
            MetricKind::Chebyshev => "linf",
            MetricKind::Canberra => "canberra",
        }
    }

    /// Distance between two equal-length, finite coordinate slices. No validation.
    #[inline]
    pub fn eval(self, p: &[f64], q: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), q.len());
        let pairs = p.iter().zip(q);
        match self {
            MetricKind::Manhattan => pairs.map(|(a, b)| (a - b).abs()).sum(),
            MetricKind::Euclidean => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            MetricKind::Chebyshev => pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            MetricKind::Canberra => pairs
                .map(|(a, b)| {
                    let den = a.abs() + b.abs();
                    if den == 0.0 {
                        0.0
                    } else {
                        (a - b).abs() / den
                    }
                })
                .sum(),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(MetricKind::Manhattan),
            "l2" | "euclidean" => Ok(MetricKind::Euclidean),
            "linf" | "chebyshev" => Ok(MetricKind::Chebyshev),
            "canberra" => Ok(MetricKind::Canberra),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// Checked distance: validates dimensions and finiteness first.
pub fn distance(metric: MetricKind, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if let Some(pos) = p.iter().chain(q).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: format!("coordinate {pos}") });
    }
    Ok(metric.eval(p, q))
}

/// A finite set of points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("point set"))?.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: format!("point {i}") });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim)
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("points must have at least one coordinate"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("point set"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} coordinates do not divide into dimension {dim}", coords.len())));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("point {}", pos / dim) });
        }
        Ok(Self { coords, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Points `range` as a new set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.count() {
            return Err(Error::invalid(format!("bad point range {range:?} of {}", self.count())));
        }
        Self::from_flat(self.coords[range.start * self.dim..range.end * self.dim].to_vec(), self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(distance(MetricKind::Euclidean, &[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(distance(MetricKind::Manhattan, &[0.0, 0.0], &[1.0, 3.0]).unwrap(), 4.0);
        assert_eq!(distance(MetricKind::Canberra, &[1.0, 2.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(distance(MetricKind::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(distance(MetricKind::Chebyshev, &[0.0, 0.0], &[1.0, -3.0]).unwrap(), 3.0);
    }

    #[test]
    fn canberra_zero_pairs_contribute_nothing() {
        assert_eq!(MetricKind::Canberra.eval(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(MetricKind::Canberra.eval(&[0.0, 1.0], &[0.0, 3.0]), 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            distance(MetricKind::Manhattan, &[0.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            distance(MetricKind::Euclidean, &[f64::NAN], &[1.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(PointSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PointSet::new(vec![]).is_err());
        assert!(PointSet::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn parse_names() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
        assert!("cosine".parse::<MetricKind>().is_err());
    }
}
