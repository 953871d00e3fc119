//! Symmetric kernels of finite determinantal point processes.
//!
//! Three roles share one representation: marginal kernels `K` (eigenvalues in
//! `[0, 1]`), L-ensemble matrices `L`, and similarity matrices `S` (both PSD).
//! Validation tolerates eigenvalues up to `1e-9` outside the admissible range;
//! such values are clamped wherever eigenvalues are consumed.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::geometry::Network;
use crate::linalg::{self, EIGEN_TOL};

/// Entries may differ from their transpose by at most this much.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `[K]_zz` at or below this value means the point is never selected.
pub const PALM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelRole {
    MarginalK,
    EnsembleL,
    SimilarityS,
}

impl KernelRole {
    pub fn tag(self) -> &'static str {
        match self {
            KernelRole::MarginalK => "K",
            KernelRole::EnsembleL => "L",
            KernelRole::SimilarityS => "S",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "K" => Some(KernelRole::MarginalK),
            "L" => Some(KernelRole::EnsembleL),
            "S" => Some(KernelRole::SimilarityS),
            _ => None,
        }
    }
}

impl fmt::Display for KernelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Square symmetric matrix indexed by transmitters, tagged with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    matrix: DMatrix<f64>,
    role: KernelRole,
}

impl SymmetricKernel {
    /// Validates and symmetrizes `matrix` for the given role.
    pub fn new(matrix: DMatrix<f64>, role: KernelRole) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidKernel(format!(
                "kernel must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("kernel has a non-finite entry".into()));
        }
        let asym = linalg::max_asymmetry(&matrix);
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidKernel(format!(
                "kernel is not symmetric: max |A - A^T| = {asym:e}"
            )));
        }
        let matrix = linalg::symmetrize(&matrix);
        let values = linalg::sym_eigenvalues(&matrix)?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !values.is_empty() && lo < -EIGEN_TOL {
            return Err(Error::InvalidKernel(format!(
                "{role} kernel is not positive semi-definite: smallest eigenvalue {lo:e}"
            )));
        }
        if role == KernelRole::MarginalK && !values.is_empty() && hi > 1.0 + EIGEN_TOL {
            return Err(Error::InvalidKernel(format!(
                "marginal kernel eigenvalue {hi} exceeds 1"
            )));
        }
        Ok(Self { matrix, role })
    }

    pub fn marginal(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, KernelRole::MarginalK)
    }

    pub fn ensemble(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, KernelRole::EnsembleL)
    }

    pub fn similarity(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, KernelRole::SimilarityS)
    }

    /// Diagonal marginal kernel `diag(p)`, i.e. independent Bernoulli selection.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        for (i, &pi) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                return Err(invalid(format!("probability p[{i}] = {pi} is outside [0, 1]")));
            }
        }
        Ok(Self::trusted(DMatrix::from_diagonal(&DVector::from_column_slice(p)), KernelRole::MarginalK))
    }

    pub fn identity(n: usize, role: KernelRole) -> Self {
        Self::trusted(DMatrix::identity(n, n), role)
    }

    /// Skips validation; callers guarantee symmetry and the spectral constraints.
    pub(crate) fn trusted(matrix: DMatrix<f64>, role: KernelRole) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix, role }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn role(&self) -> KernelRole {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = linalg::sym_eigenvalues(&self.matrix)?.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub(crate) fn expect_role(&self, role: KernelRole, op: &str) -> Result<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(invalid(format!("{op} expects a {role} kernel, got {}", self.role)))
        }
    }

    /// Debug dump: header `# role=<K|L|S> n=<n>` then row-major entries with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = format!("# role={} n={}\n", self.role.tag(), n);
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:.16e}", self.matrix[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty kernel file"))?;
        let mut role = None;
        let mut n = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(r) = tok.strip_prefix("role=") {
                role = KernelRole::from_tag(r);
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            }
        }
        let (role, n) = match (role, n) {
            (Some(r), Some(n)) => (r, n),
            _ => return Err(invalid(format!("bad kernel header {header:?}"))),
        };
        let mut entries = Vec::with_capacity(n * n);
        for (row, line) in lines.enumerate() {
            let values: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid(format!("kernel row {row}: {e}")))?;
            if values.len() != n {
                return Err(invalid(format!("kernel row {row} has {} entries, expected {n}", values.len())));
            }
            entries.extend(values);
        }
        if entries.len() != n * n {
            return Err(invalid(format!("kernel file has {} rows, expected {n}", entries.len() / n.max(1))));
        }
        Self::new(DMatrix::from_row_slice(n, n, &entries), role)
    }
}

/// Per-node quality weights `q >= 0`, optionally carrying the log-parameter `w`
/// with `q = exp(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityVector {
    q: Vec<f64>,
    w: Option<Vec<f64>>,
}

impl QualityVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        for (i, &v) in q.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("quality q[{i}] = {v} must be finite and >= 0")));
            }
        }
        Ok(Self { q, w: None })
    }

    pub fn from_log(w: Vec<f64>) -> Result<Self> {
        let q: Vec<f64> = w.iter().map(|v| v.exp()).collect();
        for (i, (&wi, &qi)) in w.iter().zip(&q).enumerate() {
            if !wi.is_finite() || !qi.is_finite() {
                return Err(invalid(format!("log-quality w[{i}] = {wi} gives a non-finite quality")));
            }
        }
        Ok(Self { q, w: Some(w) })
    }

    pub fn ones(n: usize) -> Self {
        Self { q: vec![1.0; n], w: Some(vec![0.0; n]) }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn log_params(&self) -> Option<&[f64]> {
        self.w.as_deref()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Bernoulli probabilities `q^2 / (1 + q^2)` of the L(I, q) ensemble.
    pub fn independent_probabilities(&self) -> Vec<f64> {
        self.q.iter().map(|&q| {
            let q2 = q * q;
            q2 / (1.0 + q2)
        }).collect()
    }
}

/// Sorted set of distinct transmitter indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Subset(Vec<usize>);

impl Subset {
    /// Builds a subset of `{0, .., n-1}`; input order is irrelevant.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(invalid(format!("index {} repeated in subset", w[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(invalid(format!("subset index {last} out of range for n = {n}")));
            }
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Subset encoded by the low `n` bits of `mask`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_superset_of(&self, other: &Subset) -> bool {
        other.0.iter().all(|&i| self.contains(i))
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    fn check_within(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n => {
                Err(invalid(format!("subset index {last} out of range for kernel of size {n}")))
            }
            _ => Ok(()),
        }
    }
}

/// Gaussian similarity `[S]_ij = exp(-|x_i - x_j|^2 / sigma^2)` over the
/// transmitters.
pub fn gaussian_similarity(net: &Network, sigma: f64) -> Result<SymmetricKernel> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let x = net.transmitters();
    let n = x.len();
    let s2 = sigma * sigma;
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-x[i].distance_squared(&x[j]) / s2).exp()
        }
    });
    SymmetricKernel::similarity(m)
}

/// `[L]_ij = q_i [S]_ij q_j`.
pub fn build_l(s: &SymmetricKernel, q: &QualityVector) -> Result<SymmetricKernel> {
    s.expect_role(KernelRole::SimilarityS, "build_l")?;
    if s.dim() != q.len() {
        return Err(invalid(format!("similarity is {0}x{0} but quality has length {1}", s.dim(), q.len())));
    }
    let q = q.as_slice();
    let n = q.len();
    let m = DMatrix::from_fn(n, n, |i, j| q[i] * s.get(i, j) * q[j]);
    Ok(SymmetricKernel::trusted(m, KernelRole::EnsembleL))
}

/// Marginal kernel `K = L (L + I)^-1`, formed spectrally: same eigenvectors as
/// `L`, eigenvalues `l / (1 + l)`.
pub fn marginal_from_l(l: &SymmetricKernel) -> Result<SymmetricKernel> {
    l.expect_role(KernelRole::EnsembleL, "marginal_from_l")?;
    let eig = linalg::sym_eigen(l.matrix())?;
    // Rounding in L = diag(q) S diag(q) grows with |L|, so the PSD tolerance is
    // taken relative to the largest eigenvalue.
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut mapped = eig.eigenvalues.clone();
    for v in mapped.iter_mut() {
        if *v < -EIGEN_TOL * scale {
            return Err(Error::InvalidKernel(format!(
                "L-ensemble matrix is not positive semi-definite: eigenvalue {v:e}"
            )));
        }
        let lam = v.max(0.0);
        *v = lam / (1.0 + lam);
    }
    Ok(SymmetricKernel::trusted(
        linalg::reconstruct(&eig.eigenvectors, &mapped),
        KernelRole::MarginalK,
    ))
}

/// Inverse map `L = (I - K)^-1 - I`; defined when every eigenvalue of `K` is
/// strictly below one.
pub fn ensemble_from_marginal(k: &SymmetricKernel) -> Result<SymmetricKernel> {
    k.expect_role(KernelRole::MarginalK, "ensemble_from_marginal")?;
    let eig = linalg::sym_eigen(k.matrix())?;
    let mut mapped = eig.eigenvalues.clone();
    for v in mapped.iter_mut() {
        let lam = v.clamp(0.0, 1.0);
        if lam >= 1.0 - 1e-12 {
            return Err(Error::InvalidKernel(format!(
                "marginal kernel has eigenvalue {v} at 1; it is not an L-ensemble"
            )));
        }
        *v = lam / (1.0 - lam);
    }
    Ok(SymmetricKernel::trusted(
        linalg::reconstruct(&eig.eigenvectors, &mapped),
        KernelRole::EnsembleL,
    ))
}

/// `P(Psi ⊇ psi) = det(K_psi)`.
pub fn subset_prob_inclusion(k: &SymmetricKernel, psi: &Subset) -> Result<f64> {
    k.expect_role(KernelRole::MarginalK, "subset_prob_inclusion")?;
    psi.check_within(k.dim())?;
    let det = linalg::psd_det(&linalg::principal_submatrix(k.matrix(), psi.as_slice()))?;
    Ok(clamp_probability(det))
}

/// `det(L + I)`, the normalizing constant of an L-ensemble.
pub fn ensemble_normalizer(l: &SymmetricKernel) -> Result<f64> {
    l.expect_role(KernelRole::EnsembleL, "ensemble_normalizer")?;
    let values = linalg::sym_eigenvalues(l.matrix())?;
    Ok(values.iter().map(|&v| 1.0 + v.max(0.0)).product())
}

/// `P(Psi = psi) = det(L_psi) / det(L + I)`.
pub fn subset_prob_exact(l: &SymmetricKernel, psi: &Subset) -> Result<f64> {
    psi.check_within(l.dim())?;
    let norm = ensemble_normalizer(l)?;
    let det = linalg::psd_det(&linalg::principal_submatrix(l.matrix(), psi.as_slice()))?;
    Ok(clamp_probability(det / norm))
}

/// Quality/diversity form `prod_{i in psi} q_i^2 * det(S_psi) / det(L + I)`.
pub fn factorized_prob(s: &SymmetricKernel, q: &QualityVector, psi: &Subset) -> Result<f64> {
    let l = build_l(s, q)?;
    psi.check_within(s.dim())?;
    let quality: f64 = psi.as_slice().iter().map(|&i| q.as_slice()[i].powi(2)).product();
    let diversity = linalg::psd_det(&linalg::principal_submatrix(s.matrix(), psi.as_slice()))?;
    Ok(clamp_probability(quality * diversity / ensemble_normalizer(&l)?))
}

/// Kernel of the reduced Palm process given `z` is selected, indexed by the
/// remaining points in increasing order:
/// `[K_z]_ij = K_ij - K_iz K_jz / K_zz`.
pub fn palm_reduce(k: &SymmetricKernel, z: usize) -> Result<SymmetricKernel> {
    k.expect_role(KernelRole::MarginalK, "palm_reduce")?;
    if z >= k.dim() {
        return Err(invalid(format!("Palm point {z} out of range for kernel of size {}", k.dim())));
    }
    let reduced = palm_matrix(k.matrix(), z)?;
    SymmetricKernel::marginal(reduced)
}

pub(crate) fn palm_matrix(k: &DMatrix<f64>, z: usize) -> Result<DMatrix<f64>> {
    let kzz = k[(z, z)];
    if kzz <= PALM_TOL {
        return Err(Error::PalmUndefined { index: z, value: kzz });
    }
    let n = k.nrows();
    let rest: Vec<usize> = (0..n).filter(|&j| j != z).collect();
    let m = DMatrix::from_fn(n - 1, n - 1, |a, b| {
        let (i, j) = (rest[a], rest[b]);
        k[(i, j)] - k[(i, z)] * k[(j, z)] / kzz
    });
    Ok(linalg::symmetrize(&m))
}

/// `[K{f}]_ij = sqrt(1 - f_i) K_ij sqrt(1 - f_j)`; the role is preserved.
pub fn scale_kernel(k: &SymmetricKernel, f: &[f64]) -> Result<SymmetricKernel> {
    if f.len() != k.dim() {
        return Err(invalid(format!("scale vector has length {}, kernel size {}", f.len(), k.dim())));
    }
    let m = scaled_matrix(k.matrix(), f)?;
    Ok(SymmetricKernel::trusted(m, k.role()))
}

pub(crate) fn scaled_matrix(k: &DMatrix<f64>, f: &[f64]) -> Result<DMatrix<f64>> {
    let mut d = Vec::with_capacity(f.len());
    for (i, &fi) in f.iter().enumerate() {
        if !(fi >= -1e-12 && fi <= 1.0 + 1e-12) {
            return Err(invalid(format!("scale factor f[{i}] = {fi} is outside [0, 1]")));
        }
        d.push((1.0 - fi.clamp(0.0, 1.0)).sqrt());
    }
    let n = f.len();
    Ok(DMatrix::from_fn(n, n, |i, j| d[i] * k[(i, j)] * d[j]))
}

pub(crate) fn clamp_probability(p: f64) -> f64 {
    if p < 0.0 && p > -1e-12 {
        0.0
    } else if p > 1.0 && p < 1.0 + 1e-12 {
        1.0
    } else {
        p
    }
}
