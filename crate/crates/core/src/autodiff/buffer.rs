//! Batched value buffers flowing through the tape.

use crate::error::{Error, Result};
use crate::manifold::PolarComplex;
use crate::tensor::{ComplexTensor, RealTensor, Shape};

/// Batch of manifold-valued feature maps in chart coordinates (log r, theta),
/// one contiguous plane pair per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBuf {
    pub n: usize,
    pub shape: Shape,
    pub logr: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ChartBuf {
    pub fn zeros(n: usize, shape: Shape) -> Self {
        ChartBuf {
            n,
            shape,
            logr: vec![0.0; n * shape.len()],
            theta: vec![0.0; n * shape.len()],
        }
    }

    pub fn sample_len(&self) -> usize {
        self.shape.len()
    }

    pub fn from_tensors(tensors: &[ComplexTensor]) -> Result<Self> {
        let shape = tensors
            .first()
            .ok_or_else(|| Error::Invalid("empty batch".into()))?
            .shape();
        let mut buf = ChartBuf::zeros(tensors.len(), shape);
        let len = shape.len();
        for (i, t) in tensors.iter().enumerate() {
            if t.shape() != shape {
                return Err(Error::shape(
                    "input batch",
                    format!("sample 0 has shape {shape}, sample {i} has {}", t.shape()),
                ));
            }
            for (j, p) in t.data().iter().enumerate() {
                buf.logr[i * len + j] = p.magnitude().ln();
                buf.theta[i * len + j] = p.phase();
            }
        }
        Ok(buf)
    }

    pub fn to_tensor(&self, sample: usize) -> ComplexTensor {
        let len = self.sample_len();
        let data = (0..len)
            .map(|j| {
                PolarComplex::from_log_polar(
                    self.logr[sample * len + j],
                    self.theta[sample * len + j],
                )
            })
            .collect();
        ComplexTensor::new(self.shape, data).expect("sizes agree")
    }
}

/// Batch of real-valued feature maps, one contiguous plane per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RealBuf {
    pub n: usize,
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl RealBuf {
    pub fn zeros(n: usize, shape: Shape) -> Self {
        RealBuf {
            n,
            shape,
            data: vec![0.0; n * shape.len()],
        }
    }

    pub fn sample_len(&self) -> usize {
        self.shape.len()
    }

    pub fn from_tensors(tensors: &[RealTensor]) -> Result<Self> {
        let shape = tensors
            .first()
            .ok_or_else(|| Error::Invalid("empty batch".into()))?
            .shape();
        let mut buf = RealBuf::zeros(tensors.len(), shape);
        let len = shape.len();
        for (i, t) in tensors.iter().enumerate() {
            if t.shape() != shape {
                return Err(Error::shape(
                    "input batch",
                    format!("sample 0 has shape {shape}, sample {i} has {}", t.shape()),
                ));
            }
            buf.data[i * len..(i + 1) * len].copy_from_slice(t.data());
        }
        Ok(buf)
    }
}

/// A node's value (or adjoint) buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Buffer {
    Chart(ChartBuf),
    Real(RealBuf),
}

impl Buffer {
    pub fn batch(&self) -> usize {
        match self {
            Buffer::Chart(b) => b.n,
            Buffer::Real(b) => b.n,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Buffer::Chart(b) => b.shape,
            Buffer::Real(b) => b.shape,
        }
    }

    pub fn as_chart(&self) -> &ChartBuf {
        match self {
            Buffer::Chart(b) => b,
            Buffer::Real(_) => panic!("expected chart buffer"),
        }
    }

    pub fn as_real(&self) -> &RealBuf {
        match self {
            Buffer::Real(b) => b,
            Buffer::Chart(_) => panic!("expected real buffer"),
        }
    }

    pub fn as_chart_mut(&mut self) -> &mut ChartBuf {
        match self {
            Buffer::Chart(b) => b,
            Buffer::Real(_) => panic!("expected chart buffer"),
        }
    }

    pub fn as_real_mut(&mut self) -> &mut RealBuf {
        match self {
            Buffer::Real(b) => b,
            Buffer::Chart(_) => panic!("expected real buffer"),
        }
    }

    /// Zeroed buffer of the same kind, batch, and shape.
    pub fn zeros_like(&self) -> Buffer {
        match self {
            Buffer::Chart(b) => Buffer::Chart(ChartBuf::zeros(b.n, b.shape)),
            Buffer::Real(b) => Buffer::Real(RealBuf::zeros(b.n, b.shape)),
        }
    }

    pub fn has_non_finite(&self) -> bool {
        match self {
            Buffer::Chart(b) => {
                b.logr.iter().any(|v| !v.is_finite()) || b.theta.iter().any(|v| !v.is_finite())
            }
            Buffer::Real(b) => b.data.iter().any(|v| !v.is_finite()),
        }
    }
}

/// Model input: a batch of complex samples (in chart form) or real samples.
#[derive(Debug, Clone)]
pub enum InputBatch {
    Complex(ChartBuf),
    Real(RealBuf),
}

impl InputBatch {
    pub fn batch(&self) -> usize {
        match self {
            InputBatch::Complex(b) => b.n,
            InputBatch::Real(b) => b.n,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            InputBatch::Complex(b) => b.shape,
            InputBatch::Real(b) => b.shape,
        }
    }
}
