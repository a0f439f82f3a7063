//! Upstream receive-side crosstalk cancellation.
//!
//! All SNR functions take the per-user transmit power `px` and the
//! per-line noise power `noise` (same units) and return linear per-user
//! post-processing SNRs in natural user order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::Direction;
use crate::error::{Result, SimError};
use crate::linalg::{
    checked_inverse, col_energy, ensure_nonsingular, identity_ordering, permute_columns,
    qr_positive, row_energy, validate_permutation, CMatrix, CVector,
};
use crate::qam::Qam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CancelerMethod {
    None,
    Zf,
    Mmse,
    Azf,
    ZfGdfe,
}

impl CancelerMethod {
    pub const ALL: [CancelerMethod; 5] = [
        CancelerMethod::None,
        CancelerMethod::Zf,
        CancelerMethod::Mmse,
        CancelerMethod::Azf,
        CancelerMethod::ZfGdfe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CancelerMethod::None => "none",
            CancelerMethod::Zf => "zf",
            CancelerMethod::Mmse => "mmse",
            CancelerMethod::Azf => "azf",
            CancelerMethod::ZfGdfe => "zf_gdfe",
        }
    }
}

impl fmt::Display for CancelerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CancelerMethod {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        CancelerMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| SimError::UnknownMethod(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CancelerSpec {
    pub method: CancelerMethod,
    /// Column order for ZF-GDFE; natural order when `None`.
    pub ordering: Option<Vec<usize>>,
}

impl CancelerSpec {
    pub fn new(method: CancelerMethod) -> Self {
        CancelerSpec {
            method,
            ordering: None,
        }
    }

    /// Per-user SNR of this canceler on one tone.
    pub fn snr(&self, h: &CMatrix, px: f64, noise: f64) -> Result<Vec<f64>> {
        match self.method {
            CancelerMethod::None => Ok(no_cancellation_snr(h, px, noise)),
            CancelerMethod::Zf => zf_snr(h, px, noise),
            CancelerMethod::Mmse => mmse_snr(h, px, noise),
            CancelerMethod::Azf => azf_snr(h, px, noise),
            CancelerMethod::ZfGdfe => {
                let ordering = match &self.ordering {
                    Some(o) => o.clone(),
                    None => identity_ordering(h.nrows()),
                };
                gdfe_snr(h, &ordering, px, noise)
            }
        }
    }
}

/// Per-tone, per-user post-processing SNR for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerReport {
    pub method: CancelerMethod,
    pub tones: Vec<usize>,
    /// `snr[t][u]`: linear SNR of user `u` on stored tone `t`.
    pub snr: Vec<Vec<f64>>,
}

impl EqualizerReport {
    pub fn compute(
        spec: &CancelerSpec,
        tones: &[usize],
        matrices: &[CMatrix],
        px: &[f64],
        noise: f64,
    ) -> Result<Self> {
        let snr = matrices
            .iter()
            .zip(px)
            .map(|(h, &p)| spec.snr(h, p, noise))
            .collect::<Result<_>>()?;
        Ok(EqualizerReport {
            method: spec.method,
            tones: tones.to_vec(),
            snr,
        })
    }
}

pub fn zf_canceler(h: &CMatrix) -> Result<CMatrix> {
    checked_inverse(h)
}

/// SNR_i = P / (σ² Σ_j |[H⁻¹]_ij|²).
pub fn zf_snr(h: &CMatrix, px: f64, noise: f64) -> Result<Vec<f64>> {
    let inv = zf_canceler(h)?;
    Ok((0..h.nrows())
        .map(|i| px / (noise * row_energy(&inv, i)))
        .collect())
}

/// (HᴴH + (σ²/P)·I)⁻¹Hᴴ
pub fn mmse_canceler(h: &CMatrix, noise_to_signal: f64) -> Result<CMatrix> {
    if !(noise_to_signal > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "noise-to-signal ratio must be > 0, got {noise_to_signal}"
        )));
    }
    let n = h.ncols();
    let hh = h.adjoint();
    let gram = &hh * h + CMatrix::identity(n, n).scale(noise_to_signal);
    let inv = gram
        .try_inverse()
        .ok_or_else(|| SimError::InvalidInput("regularized Gram matrix not invertible".into()))?;
    Ok(inv * hh)
}

/// Unbiased MMSE SINR: 1/[(I + (P/σ²)HᴴH)⁻¹]_ii − 1.
pub fn mmse_snr(h: &CMatrix, px: f64, noise: f64) -> Result<Vec<f64>> {
    if !(noise > 0.0) || !(px > 0.0) {
        if px == 0.0 {
            return Ok(vec![0.0; h.ncols()]);
        }
        return Err(SimError::InvalidInput(format!(
            "mmse needs noise > 0 and px >= 0 (got {noise}, {px})"
        )));
    }
    let n = h.ncols();
    let rho = px / noise;
    let m = CMatrix::identity(n, n) + (h.adjoint() * h).scale(rho);
    let inv = m
        .try_inverse()
        .ok_or_else(|| SimError::InvalidInput("MMSE error covariance not invertible".into()))?;
    Ok((0..n)
        .map(|i| (1.0 / inv[(i, i)].re - 1.0).max(0.0))
        .collect())
}

fn check_diagonal(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(SimError::InvalidInput("expected a square matrix".into()));
    }
    match (0..h.nrows()).find(|&i| h[(i, i)].norm() == 0.0) {
        Some(index) => Err(SimError::SingularDiagonal { index }),
        None => Ok(()),
    }
}

/// First-order inverse (I − D⁻¹E)·D⁻¹ with D = diag(H), E = H − D.
pub fn azf_canceler(h: &CMatrix) -> Result<CMatrix> {
    check_diagonal(h)?;
    let n = h.nrows();
    let d_inv = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            h[(i, i)].inv()
        } else {
            Complex64::default()
        }
    });
    let mut e = h.clone();
    e.fill_diagonal(Complex64::default());
    Ok((CMatrix::identity(n, n) - &d_inv * e) * d_inv)
}

/// SINR of a linear canceler `f` with its residual crosstalk treated as noise.
pub fn linear_sinr(f: &CMatrix, h: &CMatrix, px: f64, noise: f64) -> Vec<f64> {
    let fh = f * h;
    (0..fh.nrows())
        .map(|i| {
            let signal = px * fh[(i, i)].norm_sqr();
            let interference: f64 = (0..fh.ncols())
                .filter(|&j| j != i)
                .map(|j| px * fh[(i, j)].norm_sqr())
                .sum();
            let denom = interference + noise * row_energy(f, i);
            if signal == 0.0 {
                0.0
            } else {
                signal / denom
            }
        })
        .collect()
}

pub fn azf_snr(h: &CMatrix, px: f64, noise: f64) -> Result<Vec<f64>> {
    let f = azf_canceler(h)?;
    Ok(linear_sinr(&f, h, px, noise))
}

/// QR factorization of the column-permuted channel used by ZF-GDFE.
#[derive(Debug, Clone, PartialEq)]
pub struct GdfeFactor {
    pub q: CMatrix,
    pub r: CMatrix,
    /// Column `m` of `q·r` is column `ordering[m]` of H. Detection runs from
    /// `m = N−1` down to 0, so `ordering[0]` is detected last.
    pub ordering: Vec<usize>,
}

pub fn gdfe_decompose(h: &CMatrix, ordering: &[usize]) -> Result<GdfeFactor> {
    validate_permutation(ordering, h.ncols())?;
    ensure_nonsingular(h)?;
    let (q, r) = qr_positive(&permute_columns(h, ordering));
    Ok(GdfeFactor {
        q,
        r,
        ordering: ordering.to_vec(),
    })
}

impl GdfeFactor {
    /// Per-user SNR P|R_mm|²/σ², returned in natural user order.
    pub fn snr(&self, px: f64, noise: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ordering.len()];
        for (m, &user) in self.ordering.iter().enumerate() {
            out[user] = px * self.r[(m, m)].norm_sqr() / noise;
        }
        out
    }

    /// Successive detection with hard decisions fed back. Returns symbols in
    /// natural user order.
    pub fn detect(&self, y: &CVector, qam: &Qam) -> CVector {
        self.back_substitute(y, qam, None)
    }

    /// Successive detection that feeds back the true symbols `x` instead of
    /// decisions, removing error propagation. Still reports the decisions.
    pub fn detect_genie(&self, y: &CVector, qam: &Qam, x: &CVector) -> CVector {
        let truth: Vec<Complex64> = self.ordering.iter().map(|&u| x[u]).collect();
        self.back_substitute(y, qam, Some(&truth))
    }

    fn back_substitute(&self, y: &CVector, qam: &Qam, feedback: Option<&[Complex64]>) -> CVector {
        let n = self.ordering.len();
        let z = self.q.adjoint() * y;
        let mut decided = vec![Complex64::default(); n];
        let mut fed = vec![Complex64::default(); n];
        for m in (0..n).rev() {
            let rmm = self.r[(m, m)];
            let mut acc = z[m] / rmm;
            for i in m + 1..n {
                acc -= self.r[(m, i)] / rmm * fed[i];
            }
            decided[m] = qam.slice(acc);
            fed[m] = feedback.map_or(decided[m], |t| t[m]);
        }
        let mut out = CVector::zeros(n);
        for (m, &user) in self.ordering.iter().enumerate() {
            out[user] = decided[m];
        }
        out
    }
}

pub fn gdfe_snr(h: &CMatrix, ordering: &[usize], px: f64, noise: f64) -> Result<Vec<f64>> {
    Ok(gdfe_decompose(h, ordering)?.snr(px, noise))
}

/// ZF-GDFE hard-decision detection of one received vector.
pub fn dfe_detect(h: &CMatrix, y: &CVector, qam: &Qam, ordering: &[usize]) -> Result<CVector> {
    if y.len() != h.nrows() {
        return Err(SimError::InvalidInput(format!(
            "received vector has {} entries, channel has {} rows",
            y.len(),
            h.nrows()
        )));
    }
    Ok(gdfe_decompose(h, ordering)?.detect(y, qam))
}

/// Single-wire performance: P|H_ii|²/σ².
pub fn swp_snr(h: &CMatrix, i: usize, px: f64, noise: f64) -> f64 {
    px * h[(i, i)].norm_sqr() / noise
}

/// Matched-filter bound: P‖h_i‖²/σ² with `h_i` the column (upstream) or
/// row (downstream) of user `i`.
pub fn mfb_snr(h: &CMatrix, i: usize, px: f64, noise: f64, direction: Direction) -> f64 {
    let energy = match direction {
        Direction::Upstream => col_energy(h, i),
        Direction::Downstream => row_energy(h, i),
    };
    px * energy / noise
}

/// SINR with crosstalk treated as Gaussian noise.
pub fn no_cancellation_snr(h: &CMatrix, px: f64, noise: f64) -> Vec<f64> {
    (0..h.nrows())
        .map(|i| {
            let xt: f64 = (0..h.ncols())
                .filter(|&j| j != i)
                .map(|j| h[(i, j)].norm_sqr())
                .sum();
            let signal = px * h[(i, i)].norm_sqr();
            if signal == 0.0 {
                0.0
            } else {
                signal / (noise + px * xt)
            }
        })
        .collect()
}
