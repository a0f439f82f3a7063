//! Square QAM constellations with unit average energy.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qam {
    bits: u32,
    /// Points per real dimension.
    side: u32,
    /// Half the distance between neighbouring levels.
    scale: f64,
}

impl Qam {
    /// `bits` must be even and at least 2.
    pub fn new(bits: u32) -> Result<Self> {
        if bits < 2 || bits % 2 != 0 || bits > 30 {
            return Err(SimError::InvalidInput(format!(
                "square QAM needs an even bit count in 2..=30, got {bits}"
            )));
        }
        let side = 1u32 << (bits / 2);
        let m = (side as f64) * (side as f64);
        let scale = (3.0 / (2.0 * (m - 1.0))).sqrt();
        Ok(Qam { bits, side, scale })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn size(&self) -> usize {
        (self.side as usize) * (self.side as usize)
    }

    /// Half-edge of the square that bounds the constellation region; the
    /// modulo region used by THP.
    pub fn half_edge(&self) -> f64 {
        self.side as f64 * self.scale
    }

    /// Minimum distance between points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    fn level(&self, idx: u32) -> f64 {
        (2.0 * idx as f64 - (self.side as f64 - 1.0)) * self.scale
    }

    fn slice_axis(&self, v: f64) -> f64 {
        let idx = ((v / self.scale + (self.side as f64 - 1.0)) / 2.0).round();
        let idx = idx.clamp(0.0, (self.side - 1) as f64) as u32;
        self.level(idx)
    }

    pub fn point(&self, index: usize) -> Complex64 {
        let side = self.side as usize;
        Complex64::new(
            self.level((index % side) as u32),
            self.level((index / side) as u32),
        )
    }

    /// Nearest constellation point.
    pub fn slice(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.slice_axis(z.re), self.slice_axis(z.im))
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> Complex64 {
        self.point(rng.gen_range(0..self.size()))
    }

    /// Average symbol energy (1 up to rounding).
    pub fn energy(&self) -> f64 {
        (0..self.size())
            .map(|i| self.point(i).norm_sqr())
            .sum::<f64>()
            / self.size() as f64
    }
}
