//! Downstream transmit-side crosstalk pre-compensation.
//!
//! Symbols are taken at unit power; the tone power P_k is applied outside
//! the precoder, so the per-line PSD constraint reduces to every row of the
//! precoding matrix having 2-norm at most 1.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::linalg::{
    checked_inverse, diag_matrix, ensure_nonsingular, identity_ordering, permute_rows, qr_positive,
    row_energy, validate_permutation, CMatrix, CVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderMethod {
    None,
    ZfLinear,
    Thp,
}

impl PrecoderMethod {
    pub const ALL: [PrecoderMethod; 3] = [
        PrecoderMethod::None,
        PrecoderMethod::ZfLinear,
        PrecoderMethod::Thp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderMethod::None => "none",
            PrecoderMethod::ZfLinear => "zf_linear",
            PrecoderMethod::Thp => "thp",
        }
    }
}

impl fmt::Display for PrecoderMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecoderMethod {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        PrecoderMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| SimError::UnknownMethod(s.trim().to_string()))
    }
}

/// Gain normalization of the linear ZF precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scaling {
    /// 1 / max row 2-norm of H⁻¹·diag(H).
    #[default]
    RowNorm,
    /// 1 / √(max row energy) of H⁻¹·diag(H).
    Global,
}

impl Scaling {
    pub fn as_str(self) -> &'static str {
        match self {
            Scaling::RowNorm => "row_norm",
            Scaling::Global => "global",
        }
    }
}

impl FromStr for Scaling {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "row_norm" => Ok(Scaling::RowNorm),
            "global" => Ok(Scaling::Global),
            other => Err(SimError::InvalidInput(format!(
                "unknown scaling '{other}' (expected row_norm or global)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSpec {
    pub method: PrecoderMethod,
    pub scaling: Scaling,
    /// Precoding order for THP (`ordering[0]` is precoded first).
    pub ordering: Option<Vec<usize>>,
    /// Fixed penalty subtracted from THP SNRs, dB. Zero by default.
    pub shaping_loss_db: f64,
}

impl PrecoderSpec {
    pub fn new(method: PrecoderMethod) -> Self {
        PrecoderSpec {
            method,
            scaling: Scaling::RowNorm,
            ordering: None,
            shaping_loss_db: 0.0,
        }
    }

    pub fn snr(&self, h: &CMatrix, px: f64, noise: f64) -> Result<Vec<f64>> {
        match self.method {
            PrecoderMethod::None => Ok(crate::canceler::no_cancellation_snr(h, px, noise)),
            PrecoderMethod::ZfLinear => zf_precoder_snr(h, self.scaling, px, noise),
            PrecoderMethod::Thp => {
                let ordering = match &self.ordering {
                    Some(o) => o.clone(),
                    None => identity_ordering(h.nrows()),
                };
                let penalty = 10f64.powf(-self.shaping_loss_db / 10.0);
                Ok(thp_snr(h, &ordering, px, noise)?
                    .into_iter()
                    .map(|s| s * penalty)
                    .collect())
            }
        }
    }
}

/// Gain-scaled linear ZF precoder `F = H⁻¹·diag(H)·G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    pub f: CMatrix,
    /// Diagonal of G.
    pub gains: Vec<f64>,
}

pub fn zf_precoder(h: &CMatrix, scaling: Scaling) -> Result<ZfPrecoder> {
    if let Some(index) = (0..h.nrows().min(h.ncols())).find(|&i| h[(i, i)].norm() == 0.0) {
        return Err(SimError::SingularDiagonal { index });
    }
    let raw = checked_inverse(h)? * diag_matrix(h);
    let n = raw.nrows();
    let g = match scaling {
        Scaling::RowNorm => {
            let max_norm = (0..n)
                .map(|i| row_energy(&raw, i).sqrt())
                .fold(0.0, f64::max);
            1.0 / max_norm
        }
        Scaling::Global => {
            let beta_max = (0..n).map(|i| row_energy(&raw, i)).fold(0.0, f64::max);
            1.0 / beta_max.sqrt()
        }
    };
    Ok(ZfPrecoder {
        f: raw.scale(g),
        gains: vec![g; n],
    })
}

/// SNR_i = P|G_ii H_ii|²/σ²; the precoded channel H·F is diagonal.
pub fn zf_precoder_snr(h: &CMatrix, scaling: Scaling, px: f64, noise: f64) -> Result<Vec<f64>> {
    let p = zf_precoder(h, scaling)?;
    Ok((0..h.nrows())
        .map(|i| px * (p.gains[i] * h[(i, i)].norm()).powi(2) / noise)
        .collect())
}

/// Folds each real dimension into [−A, A).
pub fn modulo_2a(z: Complex64, a: f64) -> Complex64 {
    let fold = |v: f64| v - 2.0 * a * ((v + a) / (2.0 * a)).floor();
    Complex64::new(fold(z.re), fold(z.im))
}

/// Tomlinson-Harashima precoder built from the QR factorization of the
/// conjugate transpose of the user-permuted channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Thp {
    pub q: CMatrix,
    pub r: CMatrix,
    pub ordering: Vec<usize>,
}

impl Thp {
    pub fn new(h: &CMatrix, ordering: &[usize]) -> Result<Self> {
        validate_permutation(ordering, h.nrows())?;
        ensure_nonsingular(h)?;
        let (q, r) = qr_positive(&permute_rows(h, ordering).adjoint());
        Ok(Thp {
            q,
            r,
            ordering: ordering.to_vec(),
        })
    }

    /// R_mm for the user precoded at position `m`.
    pub fn gain(&self, m: usize) -> f64 {
        self.r[(m, m)].re
    }

    /// R diagonal indexed by user.
    pub fn user_gains(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ordering.len()];
        for (m, &u) in self.ordering.iter().enumerate() {
            out[u] = self.gain(m);
        }
        out
    }

    /// Successive pre-cancellation with modulo folding; returns x̃ in
    /// precoding order.
    pub fn precancel(&self, x: &CVector, a: f64) -> Result<CVector> {
        let n = self.ordering.len();
        if x.len() != n {
            return Err(SimError::InvalidInput(format!(
                "symbol vector has {} entries, expected {n}",
                x.len()
            )));
        }
        if !(a > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "modulo half-edge must be > 0, got {a}"
            )));
        }
        let mut xt = CVector::zeros(n);
        for m in 0..n {
            let sym = x[self.ordering[m]];
            if sym.re.abs() > a || sym.im.abs() > a {
                return Err(SimError::InvalidInput(format!(
                    "symbol {sym} of user {} lies outside the modulo region",
                    self.ordering[m]
                )));
            }
            let rmm = self.r[(m, m)];
            // [Rᴴ]_{m,i} = conj(R_{i,m})
            let mut v = sym;
            for i in 0..m {
                v -= self.r[(i, m)].conj() / rmm * xt[i];
            }
            xt[m] = modulo_2a(v, a);
        }
        Ok(xt)
    }

    /// Transmit vector Q·x̃ (indexed by line).
    pub fn precode(&self, x: &CVector, a: f64) -> Result<CVector> {
        Ok(&self.q * self.precancel(x, a)?)
    }

    /// Receiver-side estimates for every user from the received vector.
    pub fn receive_all(&self, y: &CVector, a: f64) -> Result<CVector> {
        let mut out = CVector::zeros(y.len());
        for (m, &u) in self.ordering.iter().enumerate() {
            out[u] = thp_receive(y[u], self.gain(m), a)?;
        }
        Ok(out)
    }
}

pub fn thp_precode(h: &CMatrix, x: &CVector, a: f64, ordering: &[usize]) -> Result<CVector> {
    Thp::new(h, ordering)?.precode(x, a)
}

/// X̂ = (Y / R_mm) mod 2A.
pub fn thp_receive(y: Complex64, r_mm: f64, a: f64) -> Result<Complex64> {
    if r_mm == 0.0 || !r_mm.is_finite() {
        return Err(SimError::DegenerateChannel);
    }
    Ok(modulo_2a(y / r_mm, a))
}

/// SNR_m = P|R_mm|²/σ² (modulo loss neglected), natural user order.
pub fn thp_snr(h: &CMatrix, ordering: &[usize], px: f64, noise: f64) -> Result<Vec<f64>> {
    let thp = Thp::new(h, ordering)?;
    Ok(thp
        .user_gains()
        .into_iter()
        .map(|g| px * g * g / noise)
        .collect())
}
