//! Exact sampling from a finite determinantal point process.
//!
//! Spectral algorithm: eigendecompose `K`, keep eigenvector `v_j` with
//! probability `lambda_j`, then draw points one at a time from the projection
//! kernel spanned by the kept vectors, deflating the span after each draw.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::kernel::{KernelRole, Subset, SymmetricKernel};
use crate::error::{Error, Result};
use crate::linalg;

/// Selection weights below this are treated as an exhausted projection.
const WEIGHT_FLOOR: f64 = 1e-14;

/// Reusable sampler holding the eigendecomposition of a marginal kernel.
#[derive(Debug, Clone)]
pub struct DppSampler {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DppSampler {
    pub fn new(k: &SymmetricKernel) -> Result<Self> {
        k.expect_role(KernelRole::MarginalK, "DppSampler::new")?;
        let eig = linalg::sym_eigen(k.matrix()).map_err(|e| {
            Error::NumericFailure(format!("sampler eigendecomposition of {0}x{0} kernel: {e}", k.dim()))
        })?;
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Expected cardinality `tr K`.
    pub fn expected_size(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Subset> {
        let n = self.dim();
        let chosen: Vec<usize> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(_, &lam)| rng.random::<f64>() < lam)
            .map(|(j, _)| j)
            .collect();
        if chosen.is_empty() {
            return Ok(Subset::empty());
        }
        let mut basis: Vec<DVector<f64>> =
            chosen.iter().map(|&j| self.eigenvectors.column(j).into_owned()).collect();
        let mut picked = Vec::with_capacity(basis.len());

        while !basis.is_empty() {
            let weights: Vec<f64> =
                (0..n).map(|i| basis.iter().map(|v| v[i] * v[i]).sum::<f64>()).collect();
            if weights.iter().all(|&w| w < WEIGHT_FLOOR) {
                return Err(Error::NumericFailure(format!(
                    "projection exhausted with {} basis vector(s) left after picking {:?}",
                    basis.len(),
                    picked
                )));
            }
            let total: f64 = weights.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut item = n - 1;
            for (i, &w) in weights.iter().enumerate() {
                if target < w {
                    item = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding landing on a zero-weight tail item
            while weights[item] < WEIGHT_FLOOR {
                item -= 1;
            }
            picked.push(item);

            // Eliminate coordinate `item` from the span using the vector with the
            // largest component there, then drop that vector.
            let pivot = (0..basis.len())
                .max_by(|&a, &b| basis[a][item].abs().total_cmp(&basis[b][item].abs()))
                .expect("basis is non-empty");
            let pv = basis.swap_remove(pivot);
            let pvi = pv[item];
            for v in basis.iter_mut() {
                let c = v[item] / pvi;
                v.axpy(-c, &pv, 1.0);
                v[item] = 0.0;
            }
            orthonormalize(&mut basis)?;
        }
        picked.sort_unstable();
        Ok(Subset::from_sorted_unchecked(picked))
    }
}

/// Modified Gram-Schmidt in place.
fn orthonormalize(basis: &mut [DVector<f64>]) -> Result<()> {
    for a in 0..basis.len() {
        let (done, rest) = basis.split_at_mut(a);
        let v = &mut rest[0];
        for u in done.iter() {
            let c = u.dot(v);
            v.axpy(-c, u, 1.0);
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::NumericFailure(format!(
                "projection basis lost rank during deflation (norm {norm:e})"
            )));
        }
        *v /= norm;
    }
    Ok(())
}

/// One exact draw from the DPP with marginal kernel `k`.
pub fn sample<R: Rng + ?Sized>(k: &SymmetricKernel, rng: &mut R) -> Result<Subset> {
    DppSampler::new(k)?.sample(rng)
}
