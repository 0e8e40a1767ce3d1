//! Nonlinear activations on manifold-valued features.

use crate::error::{Error, Result};
use crate::manifold::{act, wrap_phase, GroupElement, PolarComplex};
use crate::tensor::ComplexTensor;

/// Tangent-space ReLU: rectifies the log-magnitude at 0 and the principal
/// phase at 0, i.e. (r, theta) -> (max(r, 1), max(theta, 0)).
///
/// This is the composition log map -> ReLU -> exp map written in closed form.
/// It partitions the plane into four regions split by r = 1 and theta = 0.
pub fn trelu(input: &ComplexTensor) -> ComplexTensor {
    let data = input
        .data()
        .iter()
        .map(|p| PolarComplex::new(p.magnitude().max(1.0), p.phase().max(0.0)))
        .collect();
    ComplexTensor::new(input.shape(), data).expect("shape preserved")
}

/// Per-channel group transport parameters, stored unconstrained as
/// (log_scale, angle) so any real pair is a valid group element.
#[derive(Debug, Clone, PartialEq)]
pub struct GTransportSpec {
    log_scale: Vec<f64>,
    angle: Vec<f64>,
}

impl GTransportSpec {
    /// Identity transport for every channel.
    pub fn identity(channels: usize) -> Self {
        GTransportSpec {
            log_scale: vec![0.0; channels],
            angle: vec![0.0; channels],
        }
    }

    pub fn new(log_scale: Vec<f64>, angle: Vec<f64>) -> Result<Self> {
        if log_scale.len() != angle.len() {
            return Err(Error::LengthMismatch {
                expected: log_scale.len(),
                got: angle.len(),
            });
        }
        Ok(GTransportSpec { log_scale, angle })
    }

    pub fn channels(&self) -> usize {
        self.log_scale.len()
    }

    pub fn log_scale(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn angle(&self) -> &[f64] {
        &self.angle
    }

    pub fn element(&self, channel: usize) -> GroupElement {
        GroupElement::new(
            self.log_scale[channel].exp(),
            wrap_phase(self.angle[channel]),
        )
    }
}

/// Transport every value of channel c by that channel's group element.
pub fn g_transport(input: &ComplexTensor, spec: &GTransportSpec) -> Result<ComplexTensor> {
    if input.shape().channels != spec.channels() {
        return Err(Error::shape(
            "g_transport",
            format!(
                "input shape {} has {} channels, spec has {}",
                input.shape(),
                input.shape().channels,
                spec.channels()
            ),
        ));
    }
    let elements: Vec<GroupElement> = (0..spec.channels()).map(|c| spec.element(c)).collect();
    Ok(ComplexTensor::from_fn(input.shape(), |c, y, x| {
        act(elements[c], input.get(c, y, x))
    }))
}
