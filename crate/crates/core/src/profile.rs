//! Standard-defined system constants: tone grid, PSD masks, noise floor,
//! SNR gap and bit cap for the G.fast 106/212 MHz profiles plus a VDSL
//! 17 MHz comparison profile.
//!
//! Powers are carried in milliwatts throughout; PSDs in dBm/Hz.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileId {
    Gfast106,
    Gfast212,
    Vdsl17,
}

impl ProfileId {
    pub const ALL: [ProfileId; 3] = [ProfileId::Gfast106, ProfileId::Gfast212, ProfileId::Vdsl17];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileId::Gfast106 => "gfast106",
            ProfileId::Gfast212 => "gfast212",
            ProfileId::Vdsl17 => "vdsl17",
        }
    }
}

impl fmt::Display for ProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gfast106" => Ok(ProfileId::Gfast106),
            "gfast212" => Ok(ProfileId::Gfast212),
            "vdsl17" => Ok(ProfileId::Vdsl17),
            other => Err(SimError::UnknownProfile(other.to_string())),
        }
    }
}

/// Constants describing one DMT system profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemProfile {
    pub id: ProfileId,
    /// Number of tones K on the grid (tone k sits at k·Δf).
    pub tone_count: usize,
    /// Tone spacing Δf in Hz.
    pub tone_width: f64,
    pub start_freq: f64,
    pub stop_freq: f64,
    /// DMT symbols per second (includes the cyclic-prefix overhead).
    pub symbol_rate: f64,
    /// Cyclic prefix length in samples. Informational only.
    pub cp_len: usize,
    /// Background noise PSD in dBm/Hz.
    pub noise_psd: f64,
    pub snr_gap_db: f64,
    pub bit_cap: u32,
    pub total_power_dbm: f64,
}

/// Frequency of a grid tone and whether it lies inside the active band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub index: usize,
    pub freq: f64,
    pub active: bool,
}

const GFAST_TONE_WIDTH: f64 = 51_750.0;
const GFAST_SYMBOL_RATE: f64 = 48_000.0;
const GFAST_START: f64 = 2.2e6;

/// Builds the profile for a canonical profile name.
pub fn make_profile(name: &str) -> Result<SystemProfile> {
    Ok(SystemProfile::new(name.parse()?))
}

impl SystemProfile {
    pub fn new(id: ProfileId) -> Self {
        match id {
            ProfileId::Gfast106 => SystemProfile {
                id,
                tone_count: 2048,
                tone_width: GFAST_TONE_WIDTH,
                start_freq: GFAST_START,
                stop_freq: 106e6,
                symbol_rate: GFAST_SYMBOL_RATE,
                cp_len: 320,
                noise_psd: -140.0,
                snr_gap_db: 10.75,
                bit_cap: 12,
                total_power_dbm: 4.0,
            },
            ProfileId::Gfast212 => SystemProfile {
                id,
                tone_count: 4096,
                tone_width: GFAST_TONE_WIDTH,
                start_freq: GFAST_START,
                stop_freq: 212e6,
                symbol_rate: GFAST_SYMBOL_RATE,
                cp_len: 320,
                noise_psd: -140.0,
                snr_gap_db: 10.75,
                bit_cap: 12,
                total_power_dbm: 4.0,
            },
            ProfileId::Vdsl17 => SystemProfile {
                id,
                tone_count: 4096,
                tone_width: 4_312.5,
                start_freq: 138e3,
                stop_freq: 17.664e6,
                symbol_rate: 4_000.0,
                cp_len: 640,
                noise_psd: -140.0,
                snr_gap_db: 10.75,
                bit_cap: 15,
                total_power_dbm: 14.5,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        self.id.as_str()
    }

    pub fn tone_frequency(&self, k: usize) -> Result<Tone> {
        if k >= self.tone_count {
            return Err(SimError::InvalidInput(format!(
                "tone index {k} out of range for {} (K = {})",
                self.name(),
                self.tone_count
            )));
        }
        let freq = k as f64 * self.tone_width;
        Ok(Tone {
            index: k,
            freq,
            active: freq >= self.start_freq && freq <= self.stop_freq,
        })
    }

    /// Indices of every active tone, ascending.
    pub fn active_tones(&self) -> Vec<usize> {
        (0..self.tone_count)
            .filter(|&k| self.is_active_freq(k as f64 * self.tone_width))
            .collect()
    }

    fn is_active_freq(&self, f: f64) -> bool {
        f >= self.start_freq && f <= self.stop_freq
    }

    /// Transmit PSD ceiling in dBm/Hz.
    pub fn psd_mask(&self, f: f64) -> Result<f64> {
        if !f.is_finite() || !self.is_active_freq(f) {
            return Err(SimError::InvalidInput(format!(
                "frequency {f} Hz outside the {} band [{}, {}]",
                self.name(),
                self.start_freq,
                self.stop_freq
            )));
        }
        Ok(mask_step(f))
    }

    /// Mask-limited power of tone `k` in mW, before the total-power cap.
    pub fn mask_tone_power(&self, k: usize) -> Result<f64> {
        let tone = self.tone_frequency(k)?;
        if !tone.active {
            return Ok(0.0);
        }
        Ok(dbm_to_mw(self.psd_mask(tone.freq)?) * self.tone_width)
    }

    /// Uniform factor (≤ 1) applied to every mask-limited tone power so the
    /// sum over active tones meets the total-power cap.
    pub fn power_scale(&self) -> f64 {
        let total: f64 = self
            .active_tones()
            .into_iter()
            .map(|k| dbm_to_mw(mask_step(k as f64 * self.tone_width)) * self.tone_width)
            .sum();
        let cap = dbm_to_mw(self.total_power_dbm);
        if total > cap {
            cap / total
        } else {
            1.0
        }
    }

    /// Transmit power of tone `k` in mW (zero for inactive tones).
    pub fn tone_tx_power(&self, k: usize) -> Result<f64> {
        Ok(self.mask_tone_power(k)? * self.power_scale())
    }

    /// Transmit power for all K tones, indexed by tone.
    pub fn tone_powers(&self) -> Vec<f64> {
        let scale = self.power_scale();
        (0..self.tone_count)
            .map(|k| {
                let f = k as f64 * self.tone_width;
                if self.is_active_freq(f) {
                    dbm_to_mw(mask_step(f)) * self.tone_width * scale
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Noise power per tone in mW.
    pub fn noise_power(&self) -> f64 {
        dbm_to_mw(self.noise_psd) * self.tone_width
    }

    /// Linear SNR gap Γ.
    pub fn snr_gap(&self) -> f64 {
        db_to_lin(self.snr_gap_db)
    }
}

fn mask_step(f: f64) -> f64 {
    if f <= 30e6 {
        -65.0
    } else if f <= 106e6 {
        -76.0
    } else {
        -79.0
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gfast_constants() {
        let p = make_profile("gfast106").unwrap();
        assert_eq!(p.tone_count, 2048);
        assert_eq!(p.tone_width, 51_750.0);
        assert_eq!(p.stop_freq, 106e6);
        assert_eq!(p.snr_gap_db, 10.75);
        assert_eq!(p.noise_psd, -140.0);
        assert_eq!(p.bit_cap, 12);
        assert_eq!(p.symbol_rate, 48_000.0);
        assert_eq!(p.total_power_dbm, 4.0);

        let p = make_profile("gfast212").unwrap();
        assert_eq!(p.tone_count, 4096);
        assert_eq!(p.stop_freq, 212e6);
        assert_eq!(p.bit_cap, 12);
    }

    #[test]
    fn grid_covers_band() {
        for id in ProfileId::ALL {
            let p = SystemProfile::new(id);
            // the grid reaches the band edge to within one tone
            assert!(
                p.tone_count as f64 * p.tone_width + p.tone_width >= p.stop_freq,
                "{id}"
            );
            assert!(p.tone_frequency(p.tone_count - 1).unwrap().active, "{id}");
        }
    }

    #[test]
    fn unknown_profile_rejected() {
        assert!(matches!(
            make_profile("adsl2"),
            Err(SimError::UnknownProfile(_))
        ));
    }

    #[test]
    fn mask_steps() {
        let p = make_profile("gfast212").unwrap();
        assert_eq!(p.psd_mask(10e6).unwrap(), -65.0);
        assert_eq!(p.psd_mask(30e6).unwrap(), -65.0);
        assert_eq!(p.psd_mask(50e6).unwrap(), -76.0);
        assert_eq!(p.psd_mask(106e6).unwrap(), -76.0);
        assert_eq!(p.psd_mask(150e6).unwrap(), -79.0);
        assert!(p.psd_mask(1e6).is_err());
        assert!(p.psd_mask(250e6).is_err());
        let p106 = make_profile("gfast106").unwrap();
        assert!(p106.psd_mask(150e6).is_err());
    }

    #[test]
    fn tone_frequencies() {
        let p = make_profile("gfast106").unwrap();
        let t = p.tone_frequency(0).unwrap();
        assert_eq!(t.freq, 0.0);
        assert!(!t.active);
        assert!(!p.tone_frequency(42).unwrap().active);
        let t = p.tone_frequency(43).unwrap();
        assert!((t.freq - 2.22525e6).abs() < 1e-6);
        assert!(t.active);
        let t = p.tone_frequency(2047).unwrap();
        assert!((t.freq - 105_932_250.0).abs() < 1e-6);
        assert!(t.active);
        assert!(p.tone_frequency(2048).is_err());
        assert_eq!(p.active_tones().first(), Some(&43));
        assert_eq!(p.active_tones().len(), 2048 - 43);
    }

    #[test]
    fn mask_power_before_scaling() {
        let p = make_profile("gfast106").unwrap();
        let k = (10e6 / p.tone_width).round() as usize;
        let expected = 10f64.powf(-6.5) * 51_750.0;
        assert!((p.mask_tone_power(k).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.016365).abs() < 1e-5);
        assert_eq!(p.mask_tone_power(0).unwrap(), 0.0);
        assert_eq!(p.tone_tx_power(0).unwrap(), 0.0);
    }

    #[test]
    fn total_power_cap_holds() {
        for id in ProfileId::ALL {
            let p = SystemProfile::new(id);
            let total: f64 = p.tone_powers().iter().sum();
            let cap = dbm_to_mw(p.total_power_dbm);
            assert!(total <= cap * (1.0 + 1e-9), "{id}: {total} > {cap}");
        }
        let p = make_profile("gfast106").unwrap();
        let total: f64 = p.tone_powers().iter().sum();
        assert!(
            (total - 2.511886).abs() < 1e-5,
            "cap binds for gfast106: {total}"
        );
    }

    #[test]
    fn tone_powers_agree_with_single_tone_query() {
        let p = make_profile("gfast212").unwrap();
        let all = p.tone_powers();
        for k in [0, 43, 500, 1000, 3000, 4095] {
            assert!((all[k] - p.tone_tx_power(k).unwrap()).abs() < 1e-18);
        }
    }

    #[test]
    fn mask_is_monotone_non_increasing() {
        let p = make_profile("gfast212").unwrap();
        let mut prev = f64::INFINITY;
        for k in p.active_tones() {
            let m = p.psd_mask(k as f64 * p.tone_width).unwrap();
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn make_profile_is_pure() {
        assert_eq!(
            make_profile("vdsl17").unwrap(),
            make_profile("vdsl17").unwrap()
        );
    }
}
