//! Uniform discretization of the body interval.

use crate::error::{Error, Result};

/// Uniform grid over the closure of the body interval, with `n_nodes`
/// nodes `x_i = x_min + i * spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyGrid {
    x_min: f64,
    x_max: f64,
    n_nodes: usize,
    spacing: f64,
}

impl BodyGrid {
    pub fn new(x_min: f64, x_max: f64, n_nodes: usize) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::NonFiniteBound {
                field: "x_min",
                value: x_min,
            });
        }
        if !x_max.is_finite() {
            return Err(Error::NonFiniteBound {
                field: "x_max",
                value: x_max,
            });
        }
        if n_nodes < 3 {
            return Err(Error::TooFewNodes { n_nodes });
        }
        if x_max <= x_min {
            return Err(Error::EmptyInterval { x_min, x_max });
        }
        let spacing = (x_max - x_min) / (n_nodes - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_nodes,
            spacing,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.node(i))
    }

    /// Grid with the same interval and `2n - 1` nodes, i.e. spacing halved.
    /// Every original node is retained.
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n_nodes - 1)
            .expect("refining a valid grid cannot fail")
    }
}
