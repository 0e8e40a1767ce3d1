//! Deep learning for complex-valued data on the scaling-rotation manifold.
//!
//! Nonzero complex numbers are treated as points on the product manifold of
//! positive magnitudes and planar rotations. Convolution is a learned
//! weighted Frechet mean (equivariant to complex scaling), activations act in
//! the tangent space or transport whole channels, and the distance transform
//! produces scale-invariant real features that feed an ordinary CNN tail.
//! Training runs on a small reverse-mode tape with SGD/Adam.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gate;
pub mod layers;
pub mod manifold;
pub mod model;
pub mod tensor;
pub mod train;
pub mod verify;
pub mod wfm;

pub use error::{Error, Result};

/// Cap rayon's global pool from the SURREAL_THREADS environment variable.
/// A no-op when the variable is unset, unparsable, or the pool exists.
pub fn init_threads_from_env() {
    if let Ok(v) = std::env::var("SURREAL_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
pub use manifold::{
    act, distance, exp_map, from_polar, geodesic_interpolate, log_map, to_polar, transporter,
    wrap_phase, CartesianComplex, GroupElement, PolarComplex, TangentVector, DEFAULT_EPS,
};
pub use tensor::{ComplexTensor, RealTensor, Shape};
pub use wfm::{
    wfm_bruteforce, wfm_fixed_point, wfm_incremental, PointSet, WeightVector, WfmFixedPoint,
};
