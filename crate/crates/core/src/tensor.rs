//! Dense tensors of manifold points and of real values, shape (c, h, w).
//!
//! 1-D signals use height 1. Layout is row-major over (channel, row, column).

use crate::error::{Error, Result};
use crate::manifold::PolarComplex;

/// Shape of a (channels, height, width) tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        assert!(
            channels > 0 && height > 0 && width > 0,
            "shape components must be positive, got ({channels}, {height}, {width})"
        );
        Shape {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{},{}]", self.channels, self.height, self.width)
    }
}

/// Dense array of manifold points.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Shape,
    data: Vec<PolarComplex>,
}

impl ComplexTensor {
    pub fn new(shape: Shape, data: Vec<PolarComplex>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(ComplexTensor { shape, data })
    }

    pub fn constant(shape: Shape, value: PolarComplex) -> Self {
        ComplexTensor {
            data: vec![value; shape.len()],
            shape,
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> PolarComplex) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    data.push(f(c, y, x));
                }
            }
        }
        ComplexTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> PolarComplex {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: PolarComplex) {
        self.data[(c * self.shape.height + y) * self.shape.width + x] = v;
    }

    pub fn data(&self) -> &[PolarComplex] {
        &self.data
    }

    /// Chart-coordinate planes (log r, theta), same layout as the data.
    pub fn to_chart(&self) -> (Vec<f64>, Vec<f64>) {
        let logr = self.data.iter().map(|p| p.magnitude().ln()).collect();
        let theta = self.data.iter().map(|p| p.phase()).collect();
        (logr, theta)
    }

    pub fn from_chart(shape: Shape, logr: &[f64], theta: &[f64]) -> Result<Self> {
        if logr.len() != shape.len() || theta.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                got: logr.len(),
            });
        }
        let data = logr
            .iter()
            .zip(theta)
            .map(|(&lr, &th)| PolarComplex::from_log_polar(lr, th))
            .collect();
        Ok(ComplexTensor { shape, data })
    }
}

/// Dense array of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl RealTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(RealTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        RealTensor {
            data: vec![0.0; shape.len()],
            shape,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.shape.height + y) * self.shape.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_row_major_over_channel_row_column() {
        let t = ComplexTensor::from_fn(Shape::new(2, 2, 3), |c, y, x| {
            PolarComplex::new(1.0 + (c * 6 + y * 3 + x) as f64, 0.0)
        });
        assert_eq!(t.get(0, 0, 0).magnitude(), 1.0);
        assert_eq!(t.get(0, 0, 2).magnitude(), 3.0);
        assert_eq!(t.get(0, 1, 0).magnitude(), 4.0);
        assert_eq!(t.get(1, 0, 0).magnitude(), 7.0);
        assert_eq!(t.data()[11].magnitude(), 12.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(ComplexTensor::new(Shape::new(1, 2, 2), vec![PolarComplex::new(1.0, 0.0); 3]).is_err());
        assert!(RealTensor::new(Shape::new(1, 1, 3), vec![0.0; 2]).is_err());
    }

    #[test]
    fn chart_round_trip() {
        let t = ComplexTensor::from_fn(Shape::new(1, 2, 2), |c, y, x| {
            PolarComplex::new(0.5 + (c + y + x) as f64, 0.3 * (x as f64) - 0.2)
        });
        let (logr, theta) = t.to_chart();
        let back = ComplexTensor::from_chart(t.shape(), &logr, &theta).unwrap();
        for (a, b) in t.data().iter().zip(back.data()) {
            assert!((a.magnitude() - b.magnitude()).abs() < 1e-12);
            assert_eq!(a.phase(), b.phase());
        }
    }
}
