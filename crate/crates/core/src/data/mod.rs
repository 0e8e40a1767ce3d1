//! Synthetic complex-valued datasets, scaling augmentation, and the CVDS
//! on-disk format.
//!
//! Samples are stored the way they would be acquired: interleaved (re, im)
//! f32 pairs. Conversion to manifold points (f64, polar, eps-clamped)
//! happens when data is fed to a network, so the f32 payload round-trips
//! through disk bit-for-bit.

pub mod augment;
pub mod blobs;
pub mod cvds;
pub mod modulation;

pub use augment::{augment_scale, write_augment_log, AugmentSpec};
pub use blobs::{gen_blobs, BlobSpec};
pub use cvds::{read_cvds, write_cvds};
pub use modulation::{gen_modulation, ModClass, ModulationSpec};

use crate::error::{Error, Result};
use crate::manifold::to_polar;
use crate::manifold::CartesianComplex;
use crate::tensor::{ComplexTensor, RealTensor, Shape};

/// A labeled complex-valued dataset with uniform sample shape.
/// `data` holds n * channels*height*width interleaved (re, im) f32 pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    pub class_count: u32,
    pub labels: Vec<u32>,
    pub data: Vec<f32>,
}

impl Dataset {
    pub fn new(
        channels: u32,
        height: u32,
        width: u32,
        class_count: u32,
        labels: Vec<u32>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Invalid("zero-sized sample shape".into()));
        }
        let per = 2 * (channels as usize) * (height as usize) * (width as usize);
        if data.len() != labels.len() * per {
            return Err(Error::LengthMismatch {
                expected: labels.len() * per,
                got: data.len(),
            });
        }
        for &l in &labels {
            if l >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    classes: class_count,
                });
            }
        }
        Ok(Dataset {
            channels,
            height,
            width,
            class_count,
            labels,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(
            self.channels as usize,
            self.height as usize,
            self.width as usize,
        )
    }

    /// Values of one sample as interleaved (re, im) pairs.
    pub fn sample(&self, idx: usize) -> &[f32] {
        let per = 2 * self.shape().len();
        &self.data[idx * per..(idx + 1) * per]
    }

    /// Manifold view of one sample (f64 polar with the given zero clamp).
    pub fn to_complex_tensor(&self, idx: usize, eps: f64) -> Result<ComplexTensor> {
        let shape = self.shape();
        let raw = self.sample(idx);
        let mut points = Vec::with_capacity(shape.len());
        for pair in raw.chunks_exact(2) {
            points.push(to_polar(
                CartesianComplex::new(pair[0] as f64, pair[1] as f64),
                eps,
            )?);
        }
        ComplexTensor::new(shape, points)
    }

    /// Two-channel real view of one sample: complex channel c becomes real
    /// channels (2c, 2c + 1) holding the re and im planes.
    pub fn to_real_tensor(&self, idx: usize) -> RealTensor {
        let shape = self.shape();
        let plane = shape.height * shape.width;
        let raw = self.sample(idx);
        let out_shape = Shape::new(2 * shape.channels, shape.height, shape.width);
        let mut data = vec![0.0; out_shape.len()];
        for c in 0..shape.channels {
            for j in 0..plane {
                let pair = &raw[2 * (c * plane + j)..2 * (c * plane + j) + 2];
                data[(2 * c) * plane + j] = pair[0] as f64;
                data[(2 * c + 1) * plane + j] = pair[1] as f64;
            }
        }
        RealTensor::new(out_shape, data).expect("sizes agree")
    }

    /// Per-class sample counts.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.class_count as usize];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}
