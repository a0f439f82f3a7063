//! Bit loading, per-user rates and performance bounds.

use std::fmt;
use std::str::FromStr;

use log::warn;
use num_complex::Complex64;

use crate::canceler::{mfb_snr, swp_snr, CancelerMethod, CancelerSpec};
use crate::channel::{diag_dominance, ChannelTensor, Direction};
use crate::error::{Result, SimError};
use crate::linalg::{log2_det_hpd, CMatrix};
use crate::precoder::PrecoderSpec;
use crate::profile::{ProfileId, SystemProfile};

/// min(log2(1 + snr/Γ), cap).
pub fn bits_per_tone(snr: f64, gap_db: f64, bit_cap: u32) -> f64 {
    let gamma = 10f64.powf(gap_db / 10.0);
    let bits = (1.0 + snr.max(0.0) / gamma).log2();
    bits.min(bit_cap as f64)
}

pub fn user_rate(bits: &[f64], symbol_rate: f64) -> f64 {
    symbol_rate * bits.iter().sum::<f64>()
}

/// Lower bound factor max{0, 1 − 2β − β²} on the ZF noise enhancement.
pub fn zf_bound_factor(beta: f64) -> f64 {
    (1.0 - 2.0 * beta - beta * beta).max(0.0)
}

/// (lower, upper) bits of the ZF canceler from diagonal dominance alone.
pub fn zf_rate_bounds(h_ii: Complex64, beta: f64, px: f64, noise: f64, gap_db: f64) -> (f64, f64) {
    let base = px * h_ii.norm_sqr() / (noise * 10f64.powf(gap_db / 10.0));
    let lower = (1.0 + base * zf_bound_factor(beta)).log2();
    let upper = (1.0 + base * (1.0 + beta)).log2();
    (lower, upper)
}

/// log2 det(I + H·S·Hᴴ/σ²) with S = diag(powers).
pub fn mac_sum_capacity(h: &CMatrix, powers: &[f64], noise: f64) -> Result<f64> {
    let n = h.nrows();
    if powers.len() != h.ncols() || powers.iter().any(|&p| !(p >= 0.0)) {
        return Err(SimError::InvalidInput(
            "power vector must match H and be >= 0".into(),
        ));
    }
    if !(noise > 0.0) {
        return Err(SimError::InvalidInput("noise must be > 0".into()));
    }
    let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        powers.len(),
        powers.iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    let m = CMatrix::identity(n, n) + (h * s * h.adjoint()).scale(1.0 / noise);
    log2_det_hpd(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundId {
    Swp,
    Mfb,
    ZfLower,
    ZfUpper,
    MacSum,
}

impl BoundId {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::Swp => "swp",
            BoundId::Mfb => "mfb",
            BoundId::ZfLower => "zf_lower",
            BoundId::ZfUpper => "zf_upper",
            BoundId::MacSum => "mac_sum",
        }
    }
}

/// Anything that turns a tone matrix into per-user bits.
#[derive(Debug, Clone, PartialEq)]
pub enum RateMethod {
    Canceler(CancelerSpec),
    Precoder(PrecoderSpec),
    Bound(BoundId),
}

impl RateMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RateMethod::Canceler(s) => s.method.as_str(),
            RateMethod::Precoder(s) => s.method.as_str(),
            RateMethod::Bound(b) => b.as_str(),
        }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, RateMethod::Bound(BoundId::MacSum))
    }

    /// Expands a canonical method name. `zf_bounds` yields both bounds.
    pub fn parse_list(name: &str) -> Result<Vec<RateMethod>> {
        let name = name.trim();
        let bound = |b| Ok(vec![RateMethod::Bound(b)]);
        match name {
            "swp" => bound(BoundId::Swp),
            "mfb" => bound(BoundId::Mfb),
            "mac_sum" => bound(BoundId::MacSum),
            "zf_bounds" => Ok(vec![
                RateMethod::Bound(BoundId::ZfLower),
                RateMethod::Bound(BoundId::ZfUpper),
            ]),
            "zf_linear" | "thp" => Ok(vec![RateMethod::Precoder(PrecoderSpec::new(name.parse()?))]),
            _ => Ok(vec![RateMethod::Canceler(CancelerSpec::new(
                name.parse::<CancelerMethod>()?,
            ))]),
        }
    }

    /// Effective per-user SNR on one tone (bounds are expressed as the SNR
    /// whose log gives the bound). Not defined for `mac_sum`.
    pub fn tone_snr(
        &self,
        h: &CMatrix,
        px: f64,
        noise: f64,
        direction: Direction,
    ) -> Result<Vec<f64>> {
        let n = h.nrows();
        match self {
            RateMethod::Canceler(spec) => spec.snr(h, px, noise),
            RateMethod::Precoder(spec) => spec.snr(h, px, noise),
            RateMethod::Bound(BoundId::Swp) => {
                Ok((0..n).map(|i| swp_snr(h, i, px, noise)).collect())
            }
            RateMethod::Bound(BoundId::Mfb) => Ok((0..n)
                .map(|i| mfb_snr(h, i, px, noise, direction))
                .collect()),
            RateMethod::Bound(b @ (BoundId::ZfLower | BoundId::ZfUpper)) => {
                let beta = diag_dominance(h)?.beta;
                let factor = if *b == BoundId::ZfLower {
                    zf_bound_factor(beta)
                } else {
                    1.0 + beta
                };
                Ok((0..n).map(|i| swp_snr(h, i, px, noise) * factor).collect())
            }
            RateMethod::Bound(BoundId::MacSum) => {
                Err(SimError::InvalidInput("mac_sum has no per-user SNR".into()))
            }
        }
    }
}

impl fmt::Display for RateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RateMethod {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = RateMethod::parse_list(s)?;
        if v.len() != 1 {
            return Err(SimError::UnknownMethod(s.to_string()));
        }
        Ok(v.remove(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RateOptions {
    /// Floor bits to integers.
    pub integer_bits: bool,
    /// Load zero bits on tones where the method reports a singular channel
    /// instead of failing.
    pub skip_singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub label: String,
    pub profile: ProfileId,
    pub tones: Vec<usize>,
    /// `bits[u][t]`; a single aggregate row for `mac_sum`.
    pub bits: Vec<Vec<f64>>,
    /// symbol_rate · Σ bits (scaled by the tone weight when decimated).
    pub rate_bps: Vec<f64>,
    /// Δf · Σ bits, the convention without cyclic-prefix overhead.
    pub rate_df_bps: Vec<f64>,
    pub aggregate: bool,
    pub skipped_tones: Vec<usize>,
}

impl RateReport {
    pub fn total_bps(&self) -> f64 {
        self.rate_bps.iter().sum()
    }
}

fn is_singular(e: &SimError) -> bool {
    matches!(
        e,
        SimError::SingularChannel { .. }
            | SimError::SingularDiagonal { .. }
            | SimError::DegenerateChannel
    )
}

/// Per-tone bits and aggregate rates of one method over a channel tensor.
pub fn method_rate(
    channel: &ChannelTensor,
    profile: &SystemProfile,
    method: &RateMethod,
    opts: RateOptions,
) -> Result<RateReport> {
    let n = channel.line_count();
    let powers = profile.tone_powers();
    let noise = profile.noise_power();
    let cap = profile.bit_cap;
    let rows = if method.is_aggregate() { 1 } else { n };
    let mut bits = vec![Vec::with_capacity(channel.len()); rows];
    let mut skipped = Vec::new();
    let gamma = profile.snr_gap();

    for ((h, &k), _) in channel
        .matrices
        .iter()
        .zip(&channel.tones)
        .zip(&channel.freqs)
    {
        let px = powers[k];
        let tone_bits: Result<Vec<f64>> = if method.is_aggregate() {
            mac_sum_capacity(h, &vec![px / gamma; n], noise)
                .map(|b| vec![b.min((n as u32 * cap) as f64)])
        } else {
            method.tone_snr(h, px, noise, channel.direction).map(|snr| {
                snr.iter()
                    .map(|&s| bits_per_tone(s, profile.snr_gap_db, cap))
                    .collect()
            })
        };
        let tone_bits = match tone_bits {
            Ok(b) => b,
            Err(e) if opts.skip_singular && is_singular(&e) => {
                warn!(
                    "{}: tone {k} skipped ({e}); zero bits loaded",
                    method.label()
                );
                skipped.push(k);
                vec![0.0; rows]
            }
            Err(e) => return Err(e),
        };
        for (row, b) in bits.iter_mut().zip(tone_bits) {
            row.push(if opts.integer_bits { b.floor() } else { b });
        }
    }

    let w = channel.tone_weight;
    let rate_bps = bits
        .iter()
        .map(|b| w * user_rate(b, profile.symbol_rate))
        .collect();
    let rate_df_bps = bits
        .iter()
        .map(|b| w * user_rate(b, profile.tone_width))
        .collect();
    Ok(RateReport {
        label: method.label().to_string(),
        profile: profile.id,
        tones: channel.tones.clone(),
        bits,
        rate_bps,
        rate_df_bps,
        aggregate: method.is_aggregate(),
        skipped_tones: skipped,
    })
}
