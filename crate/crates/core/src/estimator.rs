//! Whitened multi-kernel eigenanalysis.
//!
//! With `X̃` the centred observations and `Σ̂ = n⁻¹ Σ X̃X̃ᵀ`, each ring kernel
//! gives a normalised local covariance
//! `M̂(f_h) = Σ̂^{−1/2} · n⁻¹ Σ_{i,j} f_h(s_i−s_j) X̃(s_i)X̃(s_j)ᵀ · Σ̂^{−1/2}`.
//! The eigenvectors `Û_W` of `Ŵ = k⁻¹ Σ_h M̂(f_h)²` rotate the whitened data
//! onto the latent fields, so `Ω̂ = Σ̂^{1/2} Û_W` and `Γ̂ = Û_Wᵀ Σ̂^{−1/2}`.

use crate::error::{Error, Result};
use crate::kernels::{KernelBank, LocationSet};
use crate::linalg::{gram_sqrt_pair, sym_eigen, Matrix, SymMatrix};

/// Observations `X(s_i)` at a set of sites; row `i` belongs to site `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    locs: LocationSet,
    values: Matrix,
}

impl FieldSample {
    pub fn new(locs: LocationSet, values: Matrix) -> Result<Self> {
        if values.rows() != locs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} value rows for {} sites",
                values.rows(),
                locs.len()
            )));
        }
        if values.cols() == 0 {
            return Err(Error::InvalidInput("at least one variable is required".into()));
        }
        if let Some(k) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                k / values.cols() + 1,
                k % values.cols() + 1
            )));
        }
        Ok(Self { locs, values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn locs(&self) -> &LocationSet {
        &self.locs
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let mut mean = vec![0.0; self.p()];
        for i in 0..self.n() {
            for (m, v) in mean.iter_mut().zip(self.values.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub(crate) fn with_values(&self, values: Matrix) -> Result<Self> {
        Self::new(self.locs.clone(), values)
    }
}

/// Which kernel a local covariance uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelChoice {
    /// `f₀(s) = 1(s = 0)`: only the diagonal `i = j` terms.
    Identity,
    /// Ring `h` (1-based) of the bank.
    Ring(usize),
}

/// Subtracts column means.
pub fn center(data: &FieldSample) -> FieldSample {
    let mean = data.column_means();
    let mut v = data.values.clone();
    for i in 0..v.rows() {
        for (x, m) in v.row_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    FieldSample {
        locs: data.locs.clone(),
        values: v,
    }
}

/// `Σ̂ = n⁻¹ Σ_j X̃(s_j)X̃(s_j)ᵀ` (input assumed centred).
pub fn sample_cov(centered: &FieldSample) -> SymMatrix {
    let (n, p) = (centered.n(), centered.p());
    let mut s = Matrix::zeros(p, p);
    for i in 0..n {
        let x = centered.values.row(i);
        for a in 0..p {
            for b in 0..=a {
                s[(a, b)] += x[a] * x[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..p {
        for b in 0..=a {
            let v = s[(a, b)] * inv_n;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    SymMatrix::new(s).expect("mirrored construction is symmetric")
}

/// Unnormalised local covariances `M̃(f_h)` for every ring of `bank`,
/// in one sweep over site pairs.
///
/// For each site `i` the neighbours `j > i` are summed per ring first, so the
/// work is `O(n²p + nkp²)`. The summation order is fixed by site order alone.
pub fn local_covs(centered: &FieldSample, bank: &KernelBank) -> Vec<SymMatrix> {
    let (n, p, k) = (centered.n(), centered.p(), bank.k());
    let locs = &centered.locs;
    let x = &centered.values;
    let mut acc = vec![Matrix::zeros(p, p); k];
    let mut ring_sums = vec![0.0; k * p];
    let mut touched = vec![false; k];
    for i in 0..n {
        ring_sums.iter_mut().for_each(|v| *v = 0.0);
        touched.iter_mut().for_each(|t| *t = false);
        for j in i + 1..n {
            if let Some(h) = bank.ring_of(locs.distance(i, j)) {
                let h = h - 1;
                touched[h] = true;
                for (s, v) in ring_sums[h * p..(h + 1) * p].iter_mut().zip(x.row(j)) {
                    *s += v;
                }
            }
        }
        let xi = x.row(i);
        for h in 0..k {
            if !touched[h] {
                continue;
            }
            let y = &ring_sums[h * p..(h + 1) * p];
            let m = &mut acc[h];
            for a in 0..p {
                for b in 0..p {
                    m[(a, b)] += xi[a] * y[b];
                }
            }
        }
    }
    // each unordered pair contributes x_i x_jᵀ + x_j x_iᵀ
    let inv_n = 1.0 / n as f64;
    acc.into_iter()
        .map(|s| {
            let mut m = Matrix::zeros(p, p);
            for a in 0..p {
                for b in 0..=a {
                    let v = (s[(a, b)] + s[(b, a)]) * inv_n;
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
            SymMatrix::new(m).expect("mirrored construction is symmetric")
        })
        .collect()
}

/// `M̃(f) = n⁻¹ Σ_{i,j} f(s_i−s_j) X̃(s_i)X̃(s_j)ᵀ`.
pub fn local_cov(centered: &FieldSample, bank: &KernelBank, kernel: KernelChoice) -> Result<SymMatrix> {
    match kernel {
        KernelChoice::Identity => Ok(sample_cov(centered)),
        KernelChoice::Ring(h) => {
            let ring = bank.single(h)?;
            Ok(local_covs(centered, &ring).pop().expect("one ring"))
        }
    }
}

/// `(Σ̂^{1/2}, Σ̂^{−1/2})` of centred data, from the SVD of `X̃` so that
/// ill-conditioned covariances keep their accuracy.
pub fn whitening(centered: &FieldSample) -> Result<(SymMatrix, SymMatrix)> {
    gram_sqrt_pair(&centered.values).map_err(|e| match e {
        Error::NotPositiveDefinite { eigenvalue, .. } => Error::Singular(format!(
            "sample covariance has eigenvalue {eigenvalue:e}; variables are (nearly) collinear"
        )),
        other => other,
    })
}

/// Rows `Σ̂^{−1/2} X̃(s_i)`.
pub fn whiten(centered: &FieldSample, sigma_inv_sqrt: &SymMatrix) -> Result<FieldSample> {
    if sigma_inv_sqrt.order() != centered.p() {
        return Err(Error::DimensionMismatch(format!(
            "whitening matrix of order {} for {} variables",
            sigma_inv_sqrt.order(),
            centered.p()
        )));
    }
    Ok(FieldSample {
        locs: centered.locs.clone(),
        values: centered.values.matmul(sigma_inv_sqrt),
    })
}

/// `M̂(f_h) = Σ̂^{−1/2} M̃(f_h) Σ̂^{−1/2}`, evaluated as the local covariance
/// of the whitened data.
pub fn normalized_local_cov(
    centered: &FieldSample,
    sigma_inv_sqrt: &SymMatrix,
    bank: &KernelBank,
    kernel: KernelChoice,
) -> Result<SymMatrix> {
    local_cov(&whiten(centered, sigma_inv_sqrt)?, bank, kernel)
}

/// `Ŵ = k⁻¹ Σ_h M̂_h M̂_hᵀ`.
pub fn build_w(m_hats: &[SymMatrix]) -> Result<SymMatrix> {
    let first = m_hats
        .first()
        .ok_or_else(|| Error::InvalidInput("at least one kernel matrix is required".into()))?;
    let p = first.order();
    let mut w = Matrix::zeros(p, p);
    for (h, m) in m_hats.iter().enumerate() {
        if m.order() != p {
            return Err(Error::DimensionMismatch(format!(
                "kernel matrix {} has order {}, expected {p}",
                h + 1,
                m.order()
            )));
        }
        w = w.add(&m.matmul_t(m));
    }
    SymMatrix::symmetrize(w.scale(1.0 / m_hats.len() as f64))
}

/// Result of [`estimate`].
#[derive(Clone, Debug)]
pub struct BssEstimate {
    pub sigma_hat: SymMatrix,
    /// Eigenvectors of `Ŵ`, columns ordered by descending eigenvalue.
    pub u_w: Matrix,
    /// Eigenvalues of `Ŵ`, descending.
    pub lambda_hat: Vec<f64>,
    /// Estimated mixing matrix `Σ̂^{1/2} Û_W`.
    pub omega_hat: Matrix,
    /// Estimated unmixing matrix `Û_Wᵀ Σ̂^{−1/2} = Ω̂⁻¹`.
    pub gamma_hat: Matrix,
    pub w_hat: SymMatrix,
    /// Rings of the bank that entered `Ŵ`.
    pub kernel_bank: KernelBank,
    /// Some eigenvalues of `Ŵ` are (nearly) tied, so the matching columns of
    /// `Ω̂` are not individually identified.
    pub degenerate: bool,
}

impl BssEstimate {
    pub fn p(&self) -> usize {
        self.lambda_hat.len()
    }
}

/// Everything `Ŵ` is assembled from: whitening factors plus one normalised
/// local covariance per ring. Building this once lets several kernel subsets
/// share the `O(n²)` pair sweep.
#[derive(Clone, Debug)]
pub struct LocalCovariances {
    pub sigma_hat: SymMatrix,
    pub sigma_sqrt: SymMatrix,
    pub sigma_inv_sqrt: SymMatrix,
    pub bank: KernelBank,
    /// `M̂(f_h)` for `h = 1..=k`.
    pub m_hats: Vec<SymMatrix>,
}

impl LocalCovariances {
    pub fn compute(data: &FieldSample, bank: &KernelBank) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        if n <= p {
            return Err(Error::UnderDetermined { n, p });
        }
        let centered = center(data);
        let sigma_hat = sample_cov(&centered);
        let (sigma_sqrt, sigma_inv_sqrt) = whitening(&centered)?;
        let m_hats = local_covs(&whiten(&centered, &sigma_inv_sqrt)?, bank);
        Ok(Self {
            sigma_hat,
            sigma_sqrt,
            sigma_inv_sqrt,
            bank: bank.clone(),
            m_hats,
        })
    }

    /// Estimate from all rings.
    pub fn estimate(&self) -> Result<BssEstimate> {
        let all: Vec<usize> = (1..=self.bank.k()).collect();
        self.estimate_with(&all)
    }

    /// Estimate from the listed rings (1-based).
    pub fn estimate_with(&self, kernels: &[usize]) -> Result<BssEstimate> {
        let mut selected = Vec::with_capacity(kernels.len());
        for &h in kernels {
            if h == 0 || h > self.bank.k() {
                return Err(Error::IndexOutOfRange {
                    index: h,
                    len: self.bank.k(),
                });
            }
            selected.push(self.m_hats[h - 1].clone());
        }
        // a single ring is recorded as its own bank; any other subset keeps
        // the parent bank for reference
        let kernel_bank = match kernels {
            [h] => self.bank.single(*h)?,
            _ => self.bank.clone(),
        };
        let w_hat = build_w(&selected)?;
        let eig = sym_eigen(&w_hat)?;
        let omega_hat = self.sigma_sqrt.matmul(&eig.vectors);
        let gamma_hat = eig.vectors.t_matmul(&self.sigma_inv_sqrt);
        Ok(BssEstimate {
            sigma_hat: self.sigma_hat.clone(),
            u_w: eig.vectors,
            lambda_hat: eig.values,
            omega_hat,
            gamma_hat,
            w_hat,
            kernel_bank,
            degenerate: eig.degenerate,
        })
    }
}

/// Full pipeline with every ring of `bank`. A one-ring bank gives the
/// single-kernel estimator.
pub fn estimate(data: &FieldSample, bank: &KernelBank) -> Result<BssEstimate> {
    LocalCovariances::compute(data, bank)?.estimate()
}

/// Estimated latent values `Ẑ(s_i) = Γ̂ X̃(s_i)`, one row per site.
pub fn ic_scores(est: &BssEstimate, data: &FieldSample) -> Result<Matrix> {
    if data.p() != est.p() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} components, data has {} variables",
            est.p(),
            data.p()
        )));
    }
    Ok(center(data).values.matmul_t(&est.gamma_hat))
}
