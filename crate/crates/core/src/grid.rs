//! Regular lattice geometry and dense row-major images on it.
//!
//! Row index `i` runs along y, column index `j` along x, and a cell is
//! flattened as `r = i * width + j`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How stencil taps that leave the grid are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Outside taps are dropped (zero-Dirichlet analogue).
    #[default]
    Truncate,
    /// x wraps modulo the width; y still truncates.
    PeriodicX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl GridGeometry {
    pub fn new(height: usize, width: usize, boundary: Boundary) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "grid must be at least 1x1, got {height}x{width}"
            )));
        }
        Ok(Self {
            height,
            width,
            boundary,
        })
    }

    pub fn truncated(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, Boundary::Truncate)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    /// Flat index of `(i + di, j + dj)` under the boundary rule, if it exists.
    #[inline]
    pub fn neighbor(&self, i: usize, j: usize, di: i64, dj: i64) -> Option<usize> {
        let ii = i as i64 + di;
        if ii < 0 || ii >= self.height as i64 {
            return None;
        }
        let mut jj = j as i64 + dj;
        match self.boundary {
            Boundary::Truncate => {
                if jj < 0 || jj >= self.width as i64 {
                    return None;
                }
            }
            Boundary::PeriodicX => jj = jj.rem_euclid(self.width as i64),
        }
        Some(self.index(ii as usize, jj as usize))
    }

    /// Normalized coordinates `(s_x, s_y)` in `[-1, 1]^2` for cell `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        fn unit(k: usize, len: usize) -> f64 {
            if len <= 1 {
                0.0
            } else {
                -1.0 + 2.0 * k as f64 / (len - 1) as f64
            }
        }
        (unit(j, self.width), unit(i, self.height))
    }
}

/// A dense `height x width` image stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "field of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn check_shape(&self, height: usize, width: usize, what: &str) -> Result<()> {
        if self.shape() != (height, width) {
            return Err(Error::Dimension(format!(
                "{what} is {}x{}, expected {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}
