//! Tensor-ring factorization of dense weight tensors.
//!
//! A c-mode tensor W of size n1 x ... x nc is represented by c cores T_k of
//! shape (b, n_k, b); an entry is the trace of the ordered product of the
//! selected core slices. Parameter count drops from prod(n_k) to
//! b^2 * sum(n_k), which pays off only when the ranks is small relative to
//! the mode sizes.

use crate::error::{Error, Result};

/// Cores of a tensor-ring decomposition. Core k is stored row-major with
/// shape (rank, mode_sizes[k], rank).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRingSpec {
    mode_sizes: Vec<usize>,
    rank: usize,
    cores: Vec<Vec<f64>>,
}

impl TensorRingSpec {
    pub fn new(mode_sizes: Vec<usize>, rank: usize, cores: Vec<Vec<f64>>) -> Result<Self> {
        if mode_sizes.is_empty() || rank == 0 {
            return Err(Error::Invalid("tensor ring needs modes and rank >= 1".into()));
        }
        if cores.len() != mode_sizes.len() {
            return Err(Error::LengthMismatch {
                expected: mode_sizes.len(),
                got: cores.len(),
            });
        }
        for (k, core) in cores.iter().enumerate() {
            let expected = rank * mode_sizes[k] * rank;
            if core.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    got: core.len(),
                });
            }
        }
        Ok(TensorRingSpec {
            mode_sizes,
            rank,
            cores,
        })
    }

    pub fn zeros(mode_sizes: Vec<usize>, rank: usize) -> Result<Self> {
        let cores = mode_sizes
            .iter()
            .map(|&n| vec![0.0; rank * n * rank])
            .collect();
        TensorRingSpec::new(mode_sizes, rank, cores)
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cores(&self) -> &[Vec<f64>] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.cores
    }

    /// b x b slice of core k at mode index i, as a dense matrix.
    fn slice(&self, k: usize, i: usize) -> Vec<f64> {
        let b = self.rank;
        let core = &self.cores[k];
        let mut m = vec![0.0; b * b];
        for r in 0..b {
            for c in 0..b {
                m[r * b + c] = core[(r * self.mode_sizes[k] + i) * b + c];
            }
        }
        m
    }

    pub fn param_count(&self) -> usize {
        tensor_ring_param_count(&self.mode_sizes, self.rank)
    }

    pub fn dense_len(&self) -> usize {
        self.mode_sizes.iter().product()
    }

    /// Dense tensor, row-major over the mode indices:
    /// W(k1..kc) = trace(T1(:,k1,:) * ... * Tc(:,kc,:)).
    pub fn reconstruct(&self) -> Vec<f64> {
        let b = self.rank;
        let total = self.dense_len();
        let c = self.mode_sizes.len();
        let mut out = vec![0.0; total];
        let mut index = vec![0usize; c];
        for entry in out.iter_mut() {
            let mut acc = self.slice(0, index[0]);
            for (k, &i) in index.iter().enumerate().skip(1) {
                let s = self.slice(k, i);
                let mut next = vec![0.0; b * b];
                for r in 0..b {
                    for cc in 0..b {
                        let mut v = 0.0;
                        for m in 0..b {
                            v += acc[r * b + m] * s[m * b + cc];
                        }
                        next[r * b + cc] = v;
                    }
                }
                acc = next;
            }
            *entry = (0..b).map(|r| acc[r * b + r]).sum();
            // Advance the row-major multi-index.
            for k in (0..c).rev() {
                index[k] += 1;
                if index[k] < self.mode_sizes[k] {
                    break;
                }
                index[k] = 0;
            }
        }
        out
    }
}

/// Parameters needed by a rank-b ring over the given mode sizes.
pub fn tensor_ring_param_count(mode_sizes: &[usize], rank: usize) -> usize {
    rank * rank * mode_sizes.iter().sum::<usize>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(mode_sizes: Vec<usize>, rank: usize, seed: u64) -> TensorRingSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = mode_sizes
            .iter()
            .map(|&n| {
                (0..rank * n * rank)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        TensorRingSpec::new(mode_sizes, rank, cores).unwrap()
    }

    #[test]
    fn single_mode_rank_one_is_the_core_itself() {
        let spec = TensorRingSpec::new(vec![4], 1, vec![vec![1.0, -2.0, 3.0, 0.5]]).unwrap();
        assert_eq!(spec.reconstruct(), vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn param_count_formula() {
        // n = (5,5,10), b = 4: 16 * 20 = 320 (vs a dense 250 -- the ring only
        // pays off when b^2 * sum(n) < prod(n)).
        assert_eq!(tensor_ring_param_count(&[5, 5, 10], 4), 320);
        assert_eq!(5 * 5 * 10, 250);
        let spec = TensorRingSpec::zeros(vec![5, 5, 10], 4).unwrap();
        assert_eq!(spec.param_count(), 320);
        assert_eq!(
            spec.cores().iter().map(|c| c.len()).sum::<usize>(),
            spec.param_count()
        );
    }

    #[test]
    fn reconstruction_matches_direct_trace_product() {
        let spec = random_spec(vec![2, 3, 2], 2, 139);
        let w = spec.reconstruct();
        assert_eq!(w.len(), 12);
        // Check one entry by hand: W(1, 2, 0).
        let b = 2;
        let s1 = spec.slice(0, 1);
        let s2 = spec.slice(1, 2);
        let s3 = spec.slice(2, 0);
        let mut m = vec![0.0; 4];
        for r in 0..b {
            for c in 0..b {
                m[r * b + c] = (0..b).map(|k| s1[r * b + k] * s2[k * b + c]).sum();
            }
        }
        // trace(m * s3)
        let mut t = 0.0;
        for r in 0..b {
            for c in 0..b {
                t += m[r * b + c] * s3[c * b + r];
            }
        }
        let idx = (1 * 3 + 2) * 2;
        assert!((w[idx] - t).abs() < 1e-12);
    }

    /// Round-trip oracle: reconstruct a random ring, then refit fresh cores
    /// to the reconstruction by gradient descent; the target is exactly
    /// representable, so the fit must reach it elementwise.
    #[test]
    fn gradient_refit_recovers_reconstruction() {
        let truth = random_spec(vec![2, 2, 2], 2, 149);
        let target = truth.reconstruct();

        let mut rng = ChaCha8Rng::seed_from_u64(151);
        let mut fit = {
            let cores = truth
                .mode_sizes()
                .iter()
                .map(|&n| {
                    (0..2 * n * 2)
                        .map(|_| rng.random_range(-0.5..0.5))
                        .collect()
                })
                .collect();
            TensorRingSpec::new(truth.mode_sizes().to_vec(), 2, cores).unwrap()
        };

        // Adam on the squared reconstruction error, gradients by central
        // differences over the 24 core parameters (test-only cost).
        let n_params: usize = fit.cores().iter().map(|c| c.len()).sum();
        let mut m = vec![0.0; n_params];
        let mut v = vec![0.0; n_params];
        let loss = |spec: &TensorRingSpec| -> f64 {
            spec.reconstruct()
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let h = 1e-5;
        for step in 1..=4000 {
            let mut grads = vec![0.0; n_params];
            let mut flat_idx = 0;
            for k in 0..fit.cores().len() {
                for j in 0..fit.cores()[k].len() {
                    let orig = fit.cores()[k][j];
                    fit.cores_mut()[k][j] = orig + h;
                    let lp = loss(&fit);
                    fit.cores_mut()[k][j] = orig - h;
                    let lm = loss(&fit);
                    fit.cores_mut()[k][j] = orig;
                    grads[flat_idx] = (lp - lm) / (2.0 * h);
                    flat_idx += 1;
                }
            }
            let lr = 0.02;
            let (b1, b2, eps) = (0.9, 0.999, 1e-8);
            let mut flat_idx = 0;
            for k in 0..fit.cores().len() {
                for j in 0..fit.cores()[k].len() {
                    m[flat_idx] = b1 * m[flat_idx] + (1.0 - b1) * grads[flat_idx];
                    v[flat_idx] = b2 * v[flat_idx] + (1.0 - b2) * grads[flat_idx] * grads[flat_idx];
                    let mh = m[flat_idx] / (1.0 - b1_pow(b1, step));
                    let vh = v[flat_idx] / (1.0 - b1_pow(b2, step));
                    fit.cores_mut()[k][j] -= lr * mh / (vh.sqrt() + eps);
                    flat_idx += 1;
                }
            }
            if loss(&fit) < 1e-16 {
                break;
            }
        }
        let refit = fit.reconstruct();
        for (a, b) in refit.iter().zip(&target) {
            assert!(
                (a - b).abs() < 1e-6,
                "refit {a} vs target {b}, loss {}",
                loss(&fit)
            );
        }
    }

    fn b1_pow(b: f64, step: usize) -> f64 {
        b.powi(step as i32)
    }
}
