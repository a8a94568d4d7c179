//! Spectral efficiency of a designed link.
//!
//! With unit noise power, `W = W_RF W_BB`, `F = F_RF F_BB`,
//! `R_n = W^H W` and `G = W^H H F`,
//!
//! ```text
//! R = log2 det(I + (ρ/Ns) R_n^{-1} G G^H)
//!   = [ln det(R_n + (ρ/Ns) G G^H) - ln det(R_n)] / ln 2
//! ```
//!
//! When `R_n` is numerically singular it is loaded with `εI`,
//! `ε = 1e-12 tr(R_n)/Ns`, and the result is flagged. The determinant is
//! evaluated in the whitened form `det(I + (ρ/Ns) M M^H)` built from the SVD
//! of `W`, which equals the ratio above without its cancellation.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_logdet, thin_svd};
use crate::precoding_full::PrecoderSet;
use crate::{CMatrix, C64};

/// Eigenvalue spread of `R_n` (squared singular-value spread of `W`) beyond
/// which it is treated as singular.
const SINGULAR_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit SNR `ρ/σ²` in dB.
    pub snr_db: f64,
    pub n_s: usize,
}

impl LinkBudget {
    pub fn new(snr_db: f64, n_s: usize) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::invalid_arg("link budget needs at least one stream"));
        }
        if snr_db.is_nan() {
            return Err(Error::invalid_arg("SNR must not be NaN"));
        }
        Ok(LinkBudget { snr_db, n_s })
    }

    /// Linear SNR.
    pub fn rho(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEfficiency {
    pub bits_per_hz: f64,
    /// The noise covariance after combining was singular and was loaded
    /// with a small multiple of the identity.
    pub regularized: bool,
}

pub fn spectral_efficiency(h: &CMatrix, precoders: &PrecoderSet, budget: LinkBudget) -> Result<f64> {
    spectral_efficiency_detailed(h, precoders, budget).map(|s| s.bits_per_hz)
}

pub fn spectral_efficiency_detailed(
    h: &CMatrix,
    precoders: &PrecoderSet,
    budget: LinkBudget,
) -> Result<SpectralEfficiency> {
    let f = precoders.precoder();
    let w = precoders.combiner();
    spectral_efficiency_raw(h, &f, &w, budget)
}

/// Same as [`spectral_efficiency_detailed`] on explicit `F` and `W`.
pub fn spectral_efficiency_raw(
    h: &CMatrix,
    f: &CMatrix,
    w: &CMatrix,
    budget: LinkBudget,
) -> Result<SpectralEfficiency> {
    if f.nrows() != h.ncols() || w.nrows() != h.nrows() {
        return Err(Error::invalid_arg(format!(
            "channel is {}x{}, precoder has {} rows, combiner has {} rows",
            h.nrows(),
            h.ncols(),
            f.nrows(),
            w.nrows()
        )));
    }
    let n_s = budget.n_s;
    if f.ncols() != n_s || w.ncols() != n_s {
        return Err(Error::invalid_arg(format!(
            "precoder and combiner must have {n_s} columns, got {} and {}",
            f.ncols(),
            w.ncols()
        )));
    }
    let rho = budget.rho();
    if rho == 0.0 {
        return Ok(SpectralEfficiency {
            bits_per_hz: 0.0,
            regularized: false,
        });
    }

    // W = U diag(σ) V^H. In the basis V, R_n = diag(σ²) and G = diag(σ) U^H H F,
    // so with whitening D = diag(σ / sqrt(σ² + ε)) the rate becomes
    // log2 det(I + (ρ/Ns) M M^H), M = D U^H H F. The loaded matrix is never
    // formed, which keeps the rate accurate even when ε dominates some σ².
    let svd = thin_svd(w);
    let sigma = &svd.singular_values;
    let trace: f64 = sigma.iter().map(|s| s * s).sum();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Numerical("combiner has zero energy".into()));
    }
    let smax2 = sigma.max().powi(2);
    // W has fewer rows than streams: the missing singular values are zero
    let rank_short = sigma.len() < n_s;
    let regularized = rank_short || sigma.iter().any(|s| s * s <= SINGULAR_RTOL * smax2);
    let eps = if regularized { 1e-12 * trace / n_s as f64 } else { 0.0 };

    let mut m = svd.u.ad_mul(&(h * f));
    for (i, &s) in sigma.iter().enumerate() {
        let d = s / (s * s + eps).sqrt();
        m.row_mut(i).scale_mut(d);
    }
    let k = m.nrows();
    let signal = CMatrix::identity(k, k) + (&m * m.adjoint()) * C64::from(rho / n_s as f64);
    let total = hermitian_logdet(&hermitian_part(&signal))
        .ok_or_else(|| Error::Numerical("signal covariance is not positive definite".into()))?;
    let bits = total / std::f64::consts::LN_2;
    Ok(SpectralEfficiency {
        bits_per_hz: bits.max(0.0),
        regularized,
    })
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::from(0.5)
}

pub fn relative_efficiency(test: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::invalid_arg(format!(
            "reference efficiency must be positive, got {reference}"
        )));
    }
    Ok(test / reference)
}
