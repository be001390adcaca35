use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{mismatch, Result};
use crate::geometry::FrameGeometry;
use crate::C64;

/// Which plane a grid's samples live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    DelayDoppler,
    TimeFrequency,
    TimeDelay,
}

/// An `M×N` complex sample matrix tagged with its domain.
///
/// Storage is column-major so that one column (one OFDM symbol, or one
/// Doppler tap) is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Grid {
    pub fn zeros(domain: Domain, rows: usize, cols: usize) -> Self {
        Self {
            domain,
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn zeros_for(domain: Domain, geom: &FrameGeometry) -> Self {
        Self::zeros(domain, geom.m(), geom.n())
    }

    /// Build a grid from `f(row, col)`.
    pub fn from_fn(
        domain: Domain,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> C64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for k in 0..cols {
            for l in 0..rows {
                data.push(f(l, k));
            }
        }
        Self {
            domain,
            rows,
            cols,
            data,
        }
    }

    /// Wrap column-major samples.
    pub fn from_columns(domain: Domain, rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(mismatch(format!("{} samples", rows * cols), format!("{}", data.len())));
        }
        Ok(Self {
            domain,
            rows,
            cols,
            data,
        })
    }

    pub(crate) fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Column-major samples.
    pub fn samples(&self) -> &[C64] {
        &self.data
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn column(&self, col: usize) -> &[C64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub(crate) fn column_mut(&mut self, col: usize) -> &mut [C64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<C64> {
        (0..self.cols).map(|k| self.get(row, k)).collect()
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Mean power per element.
    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.energy() / self.data.len() as f64
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        self.like(self.data.iter().map(|x| x * factor).collect())
    }

    /// Elementwise product; fails if the shapes differ.
    pub fn hadamard(&self, other: &Grid) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect()))
    }

    /// Elementwise sum; fails if the shapes differ.
    pub fn add(&self, other: &Grid) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect()))
    }

    /// Largest elementwise distance to another grid of the same shape.
    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(mismatch(
                format!("{rows}x{cols} grid"),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }

    pub fn check_geometry(&self, geom: &FrameGeometry) -> Result<()> {
        self.check_shape(geom.m(), geom.n())
    }

    pub fn check_same_shape(&self, other: &Grid) -> Result<()> {
        self.check_shape(other.rows, other.cols)
    }

    fn like(&self, data: Vec<C64>) -> Self {
        Self {
            domain: self.domain,
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

impl Index<(usize, usize)> for Grid {
    type Output = C64;

    fn index(&self, (row, col): (usize, usize)) -> &C64 {
        &self.data[col * self.rows + row]
    }
}
