//! Data-aided adaptive upstream crosstalk cancellation.
//!
//! The canceler output is `z = Fᴴ·y_in` with `y_in = F_p·y` (`F_p = I` for
//! plain LMS). The update `F ← F + 2μ·y_in·eᴴ`, `e = x − z`, is the
//! stochastic gradient step on E‖x − Fᴴy_in‖²; in the scalar case it gives
//! `1 − F ← (1 − 2μ|y|²)(1 − F)`.
//!
//! The two-stage variant periodically folds the learned canceler into the
//! preprocessing matrix (`F_p ← Fᴴ·F_p`, `F ← I`), which whitens the LMS
//! input and speeds up convergence on badly conditioned channels.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::linalg::{c, frobenius_sqr, hermitian_condition, CMatrix, CVector};
use crate::qam::Qam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LmsMode {
    Lms,
    TwoStage,
}

impl LmsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LmsMode::Lms => "lms",
            LmsMode::TwoStage => "two_stage",
        }
    }
}

impl fmt::Display for LmsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LmsMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lms" => Ok(LmsMode::Lms),
            "two_stage" => Ok(LmsMode::TwoStage),
            other => Err(SimError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsState {
    pub mode: LmsMode,
    /// Canceler matrix; column `u` is the canceler vector of user `u`.
    pub f: CMatrix,
    /// Preprocessing matrix (identity for plain LMS until an update).
    pub f_p: CMatrix,
    pub mu: f64,
    pub t: usize,
    /// ‖e‖²/N per iteration.
    pub mse_curve: Vec<f64>,
}

impl LmsState {
    pub fn new(mode: LmsMode, f: CMatrix, mu: f64) -> Result<Self> {
        if !f.is_square() {
            return Err(SimError::InvalidInput(
                "canceler matrix must be square".into(),
            ));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "step size must be >= 0, got {mu}"
            )));
        }
        let n = f.nrows();
        Ok(LmsState {
            mode,
            f,
            f_p: CMatrix::identity(n, n),
            mu,
            t: 0,
            mse_curve: Vec::new(),
        })
    }

    pub fn line_count(&self) -> usize {
        self.f.nrows()
    }

    /// End-to-end linear map G with z = G·y.
    pub fn combined(&self) -> CMatrix {
        self.f.adjoint() * &self.f_p
    }

    pub fn output(&self, y: &CVector) -> CVector {
        self.f.adjoint() * (&self.f_p * y)
    }

    /// One LMS iteration with known training symbols `x`.
    pub fn lms_step(&mut self, y: &CVector, x: &CVector) -> Result<()> {
        let n = self.line_count();
        if y.len() != n || x.len() != n {
            return Err(SimError::InvalidInput(format!(
                "lms_step expects vectors of length {n}, got y: {}, x: {}",
                y.len(),
                x.len()
            )));
        }
        let y_in = &self.f_p * y;
        let z = self.f.adjoint() * &y_in;
        let e = x - z;
        self.f += (&y_in * e.adjoint()).scale(2.0 * self.mu);
        self.t += 1;
        self.mse_curve.push(e.norm_squared() / n as f64);
        Ok(())
    }

    /// Folds the current canceler into the preprocessing stage. The
    /// end-to-end map `Fᴴ·F_p` is unchanged.
    pub fn two_stage_update(&mut self) {
        let n = self.line_count();
        self.f_p = self.combined();
        self.f = CMatrix::identity(n, n);
    }

    /// E[y_in·y_inᴴ] for y = H·x + w with E[xxᴴ] = P·I, E[wwᴴ] = σ²·I.
    pub fn input_correlation(&self, h: &CMatrix, px: f64, noise: f64) -> CMatrix {
        let n = h.nrows();
        let ryy = (h * h.adjoint()).scale(px) + CMatrix::identity(n, n).scale(noise);
        &self.f_p * ryy * self.f_p.adjoint()
    }

    /// Expected ‖x − z‖²/N under the current map.
    pub fn expected_mse(&self, h: &CMatrix, px: f64, noise: f64) -> f64 {
        let n = h.nrows();
        let g = self.combined();
        let residual = CMatrix::identity(n, n) - &g * h;
        (px * frobenius_sqr(&residual) + noise * frobenius_sqr(&g)) / n as f64
    }
}

/// Schedule of one adaptation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub mode: LmsMode,
    /// Normalized step μ̂ = μ·trace(E[y_in·y_inᴴ]).
    pub mu_normalized: f64,
    pub iterations: usize,
    /// Iteration counts after which the two-stage update is applied.
    pub update_instants: Vec<usize>,
    pub seed: u64,
}

impl Schedule {
    pub fn new(mode: LmsMode, mu_normalized: f64, iterations: usize, seed: u64) -> Self {
        Schedule {
            mode,
            mu_normalized,
            iterations,
            update_instants: default_update_instants(iterations),
            seed,
        }
    }
}

/// {100, 300, 1000, 3000, …} below `iterations`.
pub fn default_update_instants(iterations: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut base = 100usize;
    while base < iterations {
        out.push(base);
        if 3 * base < iterations {
            out.push(3 * base);
        }
        base *= 10;
    }
    out
}

/// Condition number of the LMS-input correlation around one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub iteration: usize,
    pub condition_before: f64,
    pub condition_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationRun {
    pub state: LmsState,
    /// Instantaneous ‖e‖²/N per iteration (same as `state.mse_curve`).
    pub mse_curve: Vec<f64>,
    /// Expected MSE of the map in force before iteration `t`, for
    /// `t = 0..=iterations`.
    pub expected_mse: Vec<f64>,
    pub updates: Vec<UpdateRecord>,
}

impl AdaptationRun {
    /// First iteration at which the expected MSE is `drop_db` below its
    /// initial value.
    pub fn iterations_to(&self, drop_db: f64) -> Option<usize> {
        let target = self.expected_mse.first()? * 10f64.powf(-drop_db / 10.0);
        self.expected_mse.iter().position(|&m| m <= target)
    }

    pub fn relative_mse_db(&self) -> Vec<f64> {
        let m0 = self.expected_mse[0];
        self.expected_mse
            .iter()
            .map(|m| 10.0 * (m / m0).log10())
            .collect()
    }
}

fn step_size(state: &LmsState, h: &CMatrix, px: f64, noise: f64, mu_normalized: f64) -> f64 {
    let trace: f64 = state
        .input_correlation(h, px, noise)
        .diagonal()
        .iter()
        .map(|z| z.re)
        .sum();
    if trace > 0.0 {
        mu_normalized / trace
    } else {
        0.0
    }
}

/// Runs training-based adaptation on `y = H·x + w` with i.i.d. QPSK symbols
/// of power `px` and complex Gaussian noise of variance `noise`. The
/// canceler starts from the single-line equalizer (z = diag(H)⁻¹·y).
pub fn run_adaptation(
    h: &CMatrix,
    px: f64,
    noise: f64,
    schedule: &Schedule,
) -> Result<AdaptationRun> {
    let n = h.nrows();
    if !h.is_square() || n == 0 {
        return Err(SimError::InvalidInput(
            "adaptation needs a square, non-empty channel".into(),
        ));
    }
    if !(schedule.mu_normalized >= 0.0) || !(px > 0.0) || !(noise >= 0.0) {
        return Err(SimError::InvalidInput(
            "invalid step size, power or noise".into(),
        ));
    }
    if let Some(index) = (0..n).find(|&i| h[(i, i)].norm() == 0.0) {
        return Err(SimError::SingularDiagonal { index });
    }
    let f0 = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            h[(i, i)].inv().conj()
        } else {
            c(0.0, 0.0)
        }
    });
    let mut state = LmsState::new(schedule.mode, f0, 0.0)?;
    state.mu = step_size(&state, h, px, noise, schedule.mu_normalized);

    let qpsk = Qam::new(2)?;
    let amp = px.sqrt();
    let sigma = (noise / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut expected = Vec::with_capacity(schedule.iterations + 1);
    let mut updates = Vec::new();
    expected.push(state.expected_mse(h, px, noise));
    for t in 0..schedule.iterations {
        let x = CVector::from_fn(n, |_, _| qpsk.random(&mut rng) * amp);
        let w = CVector::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re * sigma, im * sigma)
        });
        let y = h * &x + w;
        state.lms_step(&y, &x)?;
        if schedule.mode == LmsMode::TwoStage && schedule.update_instants.contains(&(t + 1)) {
            let before = hermitian_condition(&state.input_correlation(h, px, noise));
            state.two_stage_update();
            let after = hermitian_condition(&state.input_correlation(h, px, noise));
            updates.push(UpdateRecord {
                iteration: t + 1,
                condition_before: before,
                condition_after: after,
            });
            state.mu = step_size(&state, h, px, noise, schedule.mu_normalized);
        }
        expected.push(state.expected_mse(h, px, noise));
    }
    Ok(AdaptationRun {
        mse_curve: state.mse_curve.clone(),
        state,
        expected_mse: expected,
        updates,
    })
}
