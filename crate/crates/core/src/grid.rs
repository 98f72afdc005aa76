use crate::error::{Error, Result};
use crate::scalar::{self, Rational};

/// Discretized type space `0 = t₁ < t₂ < … < tₙ = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGrid {
    points: Vec<Rational>,
}

impl TypeGrid {
    pub fn new(points: Vec<Rational>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("grid", "type grid needs at least two points"));
        }
        if points[0] != scalar::zero() || points[points.len() - 1] != scalar::one() {
            return Err(Error::validation("grid", "type grid must start at 0 and end at 1"));
        }
        if let Some(k) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::validation(
                format!("grid[{}]", k + 1),
                "type grid must be strictly increasing",
            ));
        }
        Ok(TypeGrid { points })
    }

    /// `n` equally spaced points on `[0,1]`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("grid", "type grid needs at least two points"));
        }
        let d = (n - 1) as i64;
        TypeGrid::new((0..n as i64).map(|k| scalar::rat(k, d)).collect())
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> &Rational {
        &self.points[k]
    }

    /// Largest gap between neighbouring grid points.
    pub fn max_step(&self) -> Rational {
        self.points
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .max()
            .expect("grid has at least two points")
    }
}
