//! Dense points in R^d.
//!
//! `Point` is the vector type shared by every module: solver iterates, bifunction
//! arguments, halfspace normals. Coordinates are finite by construction; arithmetic
//! on finite points stays finite at the scales this crate targets.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A point of R^d with finite coordinates, d >= 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Validating constructor. Rejects empty coordinate lists and non-finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch("point must have dimension >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim >= 1);
        Self { coords: vec![0.0; dim] }
    }

    // Internal constructor for arithmetic results; skips the finite scan in release builds.
    pub(crate) fn raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        debug_assert!(coords.iter().all(|c| c.is_finite()), "non-finite arithmetic result");
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.coords.iter()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Point {
        Point::raw(self.coords.iter().map(|c| c * s).collect())
    }

    /// self + s * other
    pub fn add_scaled(&self, s: f64, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point::raw(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        self.add_scaled(-1.0, rhs)
    }
}

impl Add<&Point> for Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub<&Point> for Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<f64> for &Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        self.scale(s)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![0.0]).is_ok());
    }

    #[test]
    fn basic_arithmetic() {
        let a = Point::new(vec![1.0, 2.0]).unwrap();
        let b = Point::new(vec![3.0, -1.0]).unwrap();
        assert_eq!((&a + &b).coords(), &[4.0, 1.0]);
        assert_eq!((&a - &b).coords(), &[-2.0, 3.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(a.norm_sq(), 5.0);
        assert_eq!(b.add_scaled(2.0, &a).coords(), &[5.0, 3.0]);
    }

    #[test]
    fn serde_is_a_bare_array() {
        let p = Point::new(vec![0.5, -2.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.5,-2.0]");
        let q: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
