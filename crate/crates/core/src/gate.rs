//! Signature of non-smooth branch decisions taken during a forward pass.
//!
//! Rectifier gates, pooling argmaxes, distance ties, and shortest-arc phase
//! choices near the branch cut are folded into a single hash. The gradient
//! checker compares the signatures of the two perturbed forward passes and
//! discards parameters whose central-difference interval crosses a kink.

/// FNV-1a style accumulator over gate events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateHash(u64);

/// Phase differences this close to +-pi are treated as sitting on the cut.
pub const CUT_MARGIN: f64 = 1e-2;

impl GateHash {
    pub fn new() -> Self {
        GateHash(0xcbf29ce484222325)
    }

    #[inline]
    pub fn push(&mut self, v: u64) {
        self.0 = (self.0 ^ v).wrapping_mul(0x100000001b3);
    }

    #[inline]
    pub fn push_bool(&mut self, b: bool) {
        self.push(b as u64 + 1);
    }

    /// Record a shortest-arc decision when the wrapped difference sits in the
    /// margin around the cut. The sign of the wrapped value is hashed, so a
    /// crossing (which flips the sign of a near-pi difference) changes the
    /// signature, while benign representative shifts do not.
    #[inline]
    pub fn near_cut(&mut self, wrapped_delta: f64) {
        if std::f64::consts::PI - wrapped_delta.abs() < CUT_MARGIN {
            self.push_bool(wrapped_delta >= 0.0);
        }
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}
