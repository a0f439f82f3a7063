//! Stochastic binder channel generation.
//!
//! Each active tone gets an N×N complex matrix. The diagonal holds the
//! deterministic insertion-loss gain of each pair; off-diagonal entries are
//! FEXT couplings with log-normal magnitude around the mean power
//! `chi · f_eff² · d_ij · |H_jj|²` and uniformly distributed phase.
//!
//! Random draws come from substreams keyed by `(seed, stream)` so any tone
//! can be generated in isolation and in any order with identical results.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::linalg::{c, CMatrix};
use crate::profile::SystemProfile;

/// Propagation speed used for the linear-phase direct path, m/s.
pub const PROPAGATION_SPEED: f64 = 2e8;

/// Reference point used to express FEXT strength in dB.
pub const FEXT_REF_FREQ: f64 = 30e6;
pub const FEXT_REF_LENGTH: f64 = 100.0;

/// Default FEXT level at the reference point, dB relative to the disturber's
/// direct power.
pub const DEFAULT_FEXT_REF_DB: f64 = -28.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CableModel {
    pub name: String,
    /// Insertion loss per 100 m: constant term, dB.
    pub il_a0: f64,
    /// Insertion loss per 100 m per √MHz.
    pub il_a1: f64,
    /// Insertion loss per 100 m per MHz.
    pub il_a2: f64,
    /// FEXT coupling constant, linear power per Hz² per m.
    pub chi_fext: f64,
    pub fext_breakpoint: f64,
    pub fext_slope_hi: f64,
    pub sigma_fext_db: f64,
}

impl CableModel {
    pub fn cat5() -> Self {
        CableModel {
            name: "cat5".into(),
            il_a0: 1.0,
            il_a1: 3.0,
            il_a2: 0.04,
            chi_fext: chi_from_ref_db(DEFAULT_FEXT_REF_DB),
            fext_breakpoint: 75e6,
            fext_slope_hi: 1.2,
            sigma_fext_db: 4.0,
        }
    }

    pub fn cad55() -> Self {
        CableModel {
            name: "cad55".into(),
            il_a1: 3.8,
            il_a2: 0.06,
            ..Self::cat5()
        }
    }

    /// Same defaults as CAT5, labelled for user-supplied overrides.
    pub fn generic() -> Self {
        CableModel {
            name: "generic".into(),
            ..Self::cat5()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.trim() {
            "cat5" => Ok(Self::cat5()),
            "cad55" => Ok(Self::cad55()),
            "generic" => Ok(Self::generic()),
            other => Err(SimError::InvalidInput(format!(
                "unknown cable '{other}' (expected cat5, cad55, generic)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(SimError::InvalidInput(format!(
                "cable {}: {what}",
                self.name
            )))
        };
        if !(self.il_a0 >= 0.0 && self.il_a1 >= 0.0 && self.il_a2 >= 0.0) {
            return bad("insertion-loss coefficients must be >= 0");
        }
        if !(self.chi_fext > 0.0 && self.chi_fext.is_finite()) {
            return bad("chi_fext must be > 0");
        }
        if !(self.sigma_fext_db >= 0.0) {
            return bad("sigma_fext_db must be >= 0");
        }
        if !(self.fext_slope_hi >= 1.0) {
            return bad("fext_slope_hi must be >= 1");
        }
        if !(self.fext_breakpoint > 0.0) {
            return bad("fext_breakpoint must be > 0");
        }
        Ok(())
    }

    /// FEXT level at the reference point (30 MHz, 100 m) in dB.
    pub fn fext_ref_db(&self) -> f64 {
        10.0 * (self.chi_fext * FEXT_REF_FREQ * FEXT_REF_FREQ * FEXT_REF_LENGTH).log10()
    }
}

/// Coupling constant giving `ref_db` of FEXT at 30 MHz over 100 m.
pub fn chi_from_ref_db(ref_db: f64) -> f64 {
    10f64.powf(ref_db / 10.0) / (FEXT_REF_FREQ * FEXT_REF_FREQ * FEXT_REF_LENGTH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinderTopology {
    pub lengths: Vec<f64>,
    pub cable: CableModel,
}

impl BinderTopology {
    pub fn new(lengths: Vec<f64>, cable: CableModel) -> Result<Self> {
        if lengths.is_empty() {
            return Err(SimError::InvalidInput(
                "binder needs at least one line".into(),
            ));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(SimError::InvalidInput(format!(
                "line length {l} must be > 0"
            )));
        }
        cable.validate()?;
        Ok(BinderTopology { lengths, cable })
    }

    pub fn equal(n: usize, length: f64, cable: CableModel) -> Result<Self> {
        Self::new(vec![length; n], cable)
    }

    pub fn line_count(&self) -> usize {
        self.lengths.len()
    }

    /// Shared run between pairs `i` and `j` from the distribution point.
    pub fn coupling_length(&self, i: usize, j: usize) -> f64 {
        self.lengths[i].min(self.lengths[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Upstream,
    Downstream,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upstream => "up",
            Direction::Downstream => "down",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "up" | "upstream" => Ok(Direction::Upstream),
            "down" | "downstream" => Ok(Direction::Downstream),
            other => Err(SimError::InvalidInput(format!(
                "unknown direction '{other}'"
            ))),
        }
    }
}

/// Per-tone channel matrices for one binder realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub tones: Vec<usize>,
    pub freqs: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub seed: u64,
    pub direction: Direction,
    /// Number of grid tones each stored tone stands for (1 unless decimated).
    pub tone_weight: f64,
}

impl ChannelTensor {
    pub fn line_count(&self) -> usize {
        self.matrices.first().map_or(0, |h| h.nrows())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn transposed(&self) -> ChannelTensor {
        ChannelTensor {
            matrices: self.matrices.iter().map(|h| h.transpose()).collect(),
            direction: match self.direction {
                Direction::Upstream => Direction::Downstream,
                Direction::Downstream => Direction::Upstream,
            },
            ..self.clone()
        }
    }
}

/// Insertion-loss gain of a single pair.
pub fn direct_gain(cable: &CableModel, f: f64, l: f64) -> Result<Complex64> {
    if !(f > 0.0) || !(l >= 0.0) {
        return Err(SimError::InvalidInput(format!(
            "direct_gain needs f > 0 and l >= 0 (got f = {f}, l = {l})"
        )));
    }
    let mhz = f / 1e6;
    let il_db = (l / 100.0) * (cable.il_a0 + cable.il_a1 * mhz.sqrt() + cable.il_a2 * mhz);
    let mag = 10f64.powf(-il_db / 20.0);
    let phase = -2.0 * PI * f * l / PROPAGATION_SPEED;
    Ok(Complex64::from_polar(mag, phase))
}

/// Frequency entering the f² FEXT law; steeper above the breakpoint and
/// continuous at it.
pub fn fext_effective_freq(cable: &CableModel, f: f64) -> f64 {
    if f <= cable.fext_breakpoint {
        f
    } else {
        cable.fext_breakpoint * (f / cable.fext_breakpoint).powf(cable.fext_slope_hi)
    }
}

/// Mean FEXT power E[|H_ij|²] for coupling length `d` and disturber direct
/// power `direct_power`.
pub fn fext_coupling_std(cable: &CableModel, f: f64, d: f64, direct_power: f64) -> Result<f64> {
    if !(f > 0.0) || !(d >= 0.0) || !(direct_power >= 0.0) {
        return Err(SimError::InvalidInput(format!(
            "fext_coupling_std needs f > 0, d >= 0, power >= 0 (got {f}, {d}, {direct_power})"
        )));
    }
    let fe = fext_effective_freq(cable, f);
    Ok(cable.chi_fext * fe * fe * d * direct_power)
}

// Substream tags.
const STREAM_PAIR_OFFSETS: u64 = 0x5041_4952;
const STREAM_TONE_PHASE: u64 = 0x544f_4e45;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn substream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index);
    ChaCha8Rng::seed_from_u64(key)
}

/// Per-pair log-normal offsets in dB for an N-line binder, indexed `[i*N + j]`
/// (upstream orientation: victim `i`, disturber `j`). The offsets are shifted
/// so that `E[10^(offset/10)] = 1`, which keeps the mean FEXT power on the
/// coupling law.
pub fn pair_offsets_db(n: usize, sigma_db: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, STREAM_PAIR_OFFSETS, n as u64);
    let ln10_10 = std::f64::consts::LN_10 / 10.0;
    let bias = ln10_10 * sigma_db * sigma_db / 2.0;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let z: f64 = rng.sample(StandardNormal);
                out[i * n + j] = sigma_db * z - bias;
            }
        }
    }
    out
}

/// Upstream-oriented channel matrix for a single tone.
fn upstream_tone(
    topology: &BinderTopology,
    offsets_db: &[f64],
    k: usize,
    f: f64,
    seed: u64,
) -> Result<CMatrix> {
    let n = topology.line_count();
    let cable = &topology.cable;
    let direct: Vec<Complex64> = topology
        .lengths
        .iter()
        .map(|&l| direct_gain(cable, f, l))
        .collect::<Result<_>>()?;
    let mut h = CMatrix::zeros(n, n);
    let mut rng = substream(seed, STREAM_TONE_PHASE, k as u64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                h[(i, i)] = direct[i];
                continue;
            }
            let phase = rng.gen_range(0.0..2.0 * PI);
            let mean = fext_coupling_std(
                cable,
                f,
                topology.coupling_length(i, j),
                direct[j].norm_sqr(),
            )?;
            let power = mean * 10f64.powf(offsets_db[i * n + j] / 10.0);
            h[(i, j)] = Complex64::from_polar(power.sqrt(), phase);
        }
    }
    Ok(h)
}

/// Generates the channel on every active tone of `profile`.
pub fn generate_channel(
    topology: &BinderTopology,
    profile: &SystemProfile,
    seed: u64,
    direction: Direction,
) -> Result<ChannelTensor> {
    generate_channel_decimated(topology, profile, seed, direction, 1)
}

/// Generates the channel on every `step`-th active tone. Each kept tone is
/// weighted by `step` when rates are aggregated.
pub fn generate_channel_decimated(
    topology: &BinderTopology,
    profile: &SystemProfile,
    seed: u64,
    direction: Direction,
    step: usize,
) -> Result<ChannelTensor> {
    if step == 0 {
        return Err(SimError::InvalidInput("tone step must be >= 1".into()));
    }
    let tones: Vec<usize> = profile.active_tones().into_iter().step_by(step).collect();
    let mut t = generate_channel_tones(topology, profile, seed, direction, &tones)?;
    t.tone_weight = step as f64;
    Ok(t)
}

/// Generates the channel on an explicit list of grid tones.
pub fn generate_channel_tones(
    topology: &BinderTopology,
    profile: &SystemProfile,
    seed: u64,
    direction: Direction,
    tones: &[usize],
) -> Result<ChannelTensor> {
    let n = topology.line_count();
    let offsets = pair_offsets_db(n, topology.cable.sigma_fext_db, seed);
    let mut freqs = Vec::with_capacity(tones.len());
    let mut matrices = Vec::with_capacity(tones.len());
    for &k in tones {
        let tone = profile.tone_frequency(k)?;
        if !(tone.freq > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "tone {k} has zero frequency"
            )));
        }
        let h = upstream_tone(topology, &offsets, k, tone.freq, seed)?;
        freqs.push(tone.freq);
        matrices.push(match direction {
            Direction::Upstream => h,
            Direction::Downstream => h.transpose(),
        });
    }
    Ok(ChannelTensor {
        tones: tones.to_vec(),
        freqs,
        matrices,
        seed,
        direction,
        tone_weight: 1.0,
    })
}

/// Row-wise, column-wise and overall diagonal-dominance measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagDominance {
    pub row: f64,
    pub col: f64,
    pub beta: f64,
}

pub fn diag_dominance(h: &CMatrix) -> Result<DiagDominance> {
    let n = h.nrows();
    if !h.is_square() {
        return Err(SimError::InvalidInput(
            "diag_dominance needs a square matrix".into(),
        ));
    }
    let diag: Vec<f64> = (0..n).map(|i| h[(i, i)].norm()).collect();
    if let Some(index) = diag.iter().position(|&d| d == 0.0) {
        return Err(SimError::SingularDiagonal { index });
    }
    let mut row: f64 = 0.0;
    let mut col: f64 = 0.0;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| h[(i, j)].norm()).sum();
        let cs: f64 = (0..n).filter(|&j| j != i).map(|j| h[(j, i)].norm()).sum();
        row = row.max(r / diag[i]);
        col = col.max(cs / diag[i]);
    }
    Ok(DiagDominance {
        row,
        col,
        beta: row.max(col),
    })
}

/// `h_d` times the symmetric matrix with unit diagonal and `alpha` elsewhere.
pub fn symmetric_channel(n: usize, alpha: f64, h_d: f64) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c(h_d, 0.0)
        } else {
            c(h_d * alpha, 0.0)
        }
    })
}

/// Random complex channel `I + E` whose off-diagonal part is rescaled so the
/// diagonal-dominance measure equals `beta` exactly.
pub fn random_dd_channel<R: Rng>(n: usize, beta: f64, rng: &mut R) -> CMatrix {
    let mut h = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c(1.0, 0.0)
        } else {
            let mag: f64 = rng.gen_range(0.2..1.0);
            Complex64::from_polar(mag, rng.gen_range(0.0..2.0 * PI))
        }
    });
    if n > 1 {
        let current = diag_dominance(&h).expect("unit diagonal").beta;
        let s = beta / current;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    h[(i, j)] *= s;
                }
            }
        }
    }
    h
}
