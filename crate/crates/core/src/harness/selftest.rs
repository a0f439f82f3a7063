//! Closed-form oracle checks for the canceler, precoder and bound code.
//!
//! Each check reports pass/fail with a one-line detail. The CLI `selftest`
//! verb prints them and exits nonzero on any failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canceler::{
    azf_snr, gdfe_decompose, mfb_snr, mmse_snr, no_cancellation_snr, swp_snr, zf_snr,
};
use crate::channel::{diag_dominance, random_dd_channel, symmetric_channel, Direction};
use crate::linalg::{c, identity_ordering, CMatrix, CVector};
use crate::precoder::{zf_precoder, zf_precoder_snr, Scaling, Thp};
use crate::qam::Qam;
use crate::rate::{mac_sum_capacity, zf_rate_bounds};

/// Gap of the bound-ordering ensemble (dB).
pub const ORDERING_GAP_DB: f64 = 10.75;
/// Per-tone SNR range of the bound-ordering ensemble (dB).
pub const ORDERING_SNR_DB: (f64, f64) = (20.0, 60.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}. {}: {}", self.id, self.name, self.detail)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Tracks the worst relative error and any evaluation failures.
#[derive(Default)]
struct Worst {
    err: f64,
    failures: usize,
}

impl Worst {
    fn rel(&mut self, a: f64, b: f64) {
        let e = rel_err(a, b);
        if e.is_nan() {
            self.failures += 1;
        } else {
            self.err = self.err.max(e);
        }
    }

    fn ok<T, E>(&mut self, r: Result<T, E>) -> Option<T> {
        if r.is_err() {
            self.failures += 1;
        }
        r.ok()
    }
}

/// Two-user symmetric channel: zf, mmse, swp and mfb against their closed
/// forms.
pub fn two_user_cancelers() -> Check {
    let start = Instant::now();
    let mut w = Worst::default();
    for alpha in [0.0, 0.1, 0.3, 0.5, 0.7] {
        let a2: f64 = alpha * alpha;
        let h = symmetric_channel(2, alpha, 1.0);
        for snr_db in [10.0, 20.0] {
            let snr = db(snr_db);
            if let Some(zf) = w.ok(zf_snr(&h, snr, 1.0)) {
                for v in zf {
                    w.rel(v, snr * (1.0 - a2).powi(2) / (1.0 + a2));
                }
            }
            let a = 1.0 + a2 + 1.0 / snr;
            if let Some(mmse) = w.ok(mmse_snr(&h, snr, 1.0)) {
                for v in mmse {
                    w.rel(1.0 + v, snr * (a * a - 4.0 * a2) / a);
                }
            }
            // High-SNR limit: mmse approaches the zf closed form.
            let big = snr * 1e12;
            if let Some(mmse) = w.ok(mmse_snr(&h, big, 1.0)) {
                for v in mmse {
                    w.rel(v, big * (1.0 - a2).powi(2) / (1.0 + a2));
                }
            }
            for i in 0..2 {
                w.rel(swp_snr(&h, i, snr, 1.0), snr);
                w.rel(
                    mfb_snr(&h, i, snr, 1.0, Direction::Upstream),
                    snr * (1.0 + a2),
                );
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Check {
        id: 1,
        name: "two-user canceler closed forms",
        passed: w.failures == 0 && w.err <= 1e-9 && secs < 1.0,
        detail: format!(
            "max rel err {:.2e} (tol 1e-9), {} errors, {secs:.3} s",
            w.err, w.failures
        ),
    }
}

/// Three-user approximate ZF against its closed form, plus the rate gap to
/// exact ZF at α = 0.1, 40 dB.
pub fn three_user_azf() -> Check {
    let start = Instant::now();
    let mut w = Worst::default();
    for alpha in [0.0, 0.05, 0.1, 0.2] {
        let a2: f64 = alpha * alpha;
        let h = symmetric_channel(3, alpha, 1.0);
        for snr_db in [20.0, 40.0] {
            let snr = db(snr_db);
            if let Some(s) = w.ok(azf_snr(&h, snr, 1.0)) {
                let closed =
                    snr * (1.0 - 2.0 * a2).powi(2) / (2.0 * a2 * a2 * snr + 2.0 * a2 + 1.0);
                for v in s {
                    w.rel(v, closed);
                }
            }
        }
    }
    let h = symmetric_channel(3, 0.1, 1.0);
    let snr = db(40.0);
    let gap = match (zf_snr(&h, snr, 1.0), azf_snr(&h, snr, 1.0)) {
        (Ok(zf), Ok(azf)) => (1.0 + zf[0]).log2() - (1.0 + azf[0]).log2(),
        _ => f64::NAN,
    };
    let secs = start.elapsed().as_secs_f64();
    Check {
        id: 2,
        name: "three-user approximate ZF closed form",
        passed: w.failures == 0 && w.err <= 1e-9 && gap > 0.5 && secs < 1.0,
        detail: format!(
            "max rel err {:.2e} (tol 1e-9), zf-azf gap {gap:.3} bit at alpha 0.1/40 dB (need > 0.5), {secs:.3} s",
            w.err
        ),
    }
}

fn gaussian_channel<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        c(re, im) / std::f64::consts::SQRT_2
    })
}

/// Noiseless THP round trip on random complex channels.
pub fn thp_round_trip() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7470);
    let qam = Qam::new(4).expect("16-QAM");
    let a = qam.half_edge();
    let (mut max_err, mut max_mag, mut failures, mut trials) = (0.0f64, 0.0f64, 0usize, 0usize);
    for t in 0..1000 {
        let n = [2, 4, 8][t % 3];
        let h = gaussian_channel(n, &mut rng);
        let mut ordering = identity_ordering(n);
        ordering.rotate_left(t % n);
        let thp = match Thp::new(&h, &ordering) {
            Ok(p) => p,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let x = CVector::from_fn(n, |_, _| qam.random(&mut rng));
        let (xt, xhat) = match thp.precancel(&x, a).and_then(|xt| {
            let y = &h * (&thp.q * &xt);
            thp.receive_all(&y, a).map(|xhat| (xt, xhat))
        }) {
            Ok(v) => v,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        trials += 1;
        max_err = max_err.max((xhat - &x).iter().map(|z| z.norm()).fold(0.0, f64::max));
        max_mag = max_mag.max(
            xt.iter()
                .map(|z| z.re.abs().max(z.im.abs()))
                .fold(0.0, f64::max),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    Check {
        id: 3,
        name: "THP noiseless round trip",
        passed: failures == 0 && max_err <= 1e-8 && max_mag <= a && secs < 10.0,
        detail: format!(
            "{trials} channels, max symbol err {max_err:.2e} (tol 1e-8), max |component| {max_mag:.4} <= A = {a:.4}, {failures} errors, {secs:.3} s"
        ),
    }
}

/// Linear ZF precoder gains and SNR on the symmetric channel; row budget on
/// random channels.
pub fn linear_precoder() -> Check {
    let mut gain_err = 0.0f64;
    let mut w = Worst::default();
    for alpha in [0.0, 0.1, 0.3, 0.5, 0.7] {
        let a2: f64 = alpha * alpha;
        let h = symmetric_channel(2, alpha, 1.0);
        if let Some(p) = w.ok(zf_precoder(&h, Scaling::RowNorm)) {
            for g in &p.gains {
                gain_err = gain_err.max((g - (1.0 - a2) / (1.0 + a2).sqrt()).abs());
            }
        }
        for snr_db in [10.0, 20.0, 40.0] {
            let snr = db(snr_db);
            if let Some(s) = w.ok(zf_precoder_snr(&h, Scaling::RowNorm, snr, 1.0)) {
                for v in s {
                    w.rel(v, snr * (1.0 - a2).powi(2) / (1.0 + a2));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4);
    let mut max_row = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=8);
        let beta = rng.gen_range(0.0..1.5);
        let h = random_dd_channel(n, beta, &mut rng);
        for scaling in [Scaling::RowNorm, Scaling::Global] {
            if let Some(p) = w.ok(zf_precoder(&h, scaling)) {
                for row in p.f.row_iter() {
                    max_row = max_row.max(row.norm());
                }
            }
        }
    }
    Check {
        id: 4,
        name: "linear ZF precoder",
        passed: w.failures == 0 && gain_err <= 1e-12 && w.err <= 1e-9 && max_row <= 1.0 + 1e-12,
        detail: format!(
            "gain err {gain_err:.2e} (tol 1e-12), snr rel err {:.2e} (tol 1e-9), max row norm {max_row:.15} (<= 1), {} errors",
            w.err, w.failures
        ),
    }
}

/// One draw of the bound-ordering ensemble.
pub fn ordering_draw<R: Rng>(rng: &mut R) -> (CMatrix, f64, f64) {
    let n = rng.gen_range(2..=8);
    let beta = rng.gen_range(0.0..1.5);
    let h = random_dd_channel(n, beta, rng);
    let snr_db = rng.gen_range(ORDERING_SNR_DB.0..ORDERING_SNR_DB.1);
    (h, beta, db(snr_db))
}

/// Per-user bits with the ensemble gap, uncapped.
fn gap_bits(snr: &[f64]) -> Vec<f64> {
    let gamma = db(ORDERING_GAP_DB);
    snr.iter()
        .map(|&s| (1.0 + s.max(0.0) / gamma).log2())
        .collect()
}

/// Counts violations of the bound ordering over `draws` random channels.
pub fn bound_ordering_violations(draws: usize, seed: u64) -> (usize, usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut bounded = 0;
    let mut notes = Vec::new();
    let tol = 1e-9;
    let flag = |what: String, notes: &mut Vec<String>| {
        if notes.len() < 5 {
            notes.push(what);
        }
    };
    for d in 0..draws {
        let (h, beta, px) = ordering_draw(&mut rng);
        let n = h.nrows();
        let noise = 1.0;
        let (zf, mmse) = match (zf_snr(&h, px, noise), mmse_snr(&h, px, noise)) {
            (Ok(z), Ok(m)) => (z, m),
            _ => {
                violations += 1;
                flag(format!("draw {d}: zf/mmse failed"), &mut notes);
                continue;
            }
        };
        let none = no_cancellation_snr(&h, px, noise);
        let mfb: Vec<f64> = (0..n)
            .map(|i| mfb_snr(&h, i, px, noise, Direction::Upstream))
            .collect();
        let (b_none, b_zf, b_mmse, b_mfb) = (
            gap_bits(&none),
            gap_bits(&zf),
            gap_bits(&mmse),
            gap_bits(&mfb),
        );
        for i in 0..n {
            let chain = [b_none[i], b_zf[i], b_mmse[i], b_mfb[i]];
            if chain
                .windows(2)
                .any(|p| p[0] > p[1] + tol * p[1].abs().max(1.0))
            {
                violations += 1;
                flag(
                    format!("draw {d} user {i}: none/zf/mmse/mfb bits {chain:?}"),
                    &mut notes,
                );
            }
        }

        let ordering = identity_ordering(n);
        match gdfe_decompose(&h, &ordering) {
            Ok(g) => {
                let s = g.snr(px, noise);
                let last = ordering[0];
                if rel_err(s[last], mfb[last]) > tol {
                    violations += 1;
                    flag(
                        format!("draw {d}: gdfe last {} vs mfb {}", s[last], mfb[last]),
                        &mut notes,
                    );
                }
                let gdfe_sum: f64 = s.iter().map(|v| (1.0 + v).log2()).sum();
                match mac_sum_capacity(&h, &vec![px; n], noise) {
                    Ok(cap) if gdfe_sum <= cap * (1.0 + tol) => {}
                    other => {
                        violations += 1;
                        flag(
                            format!("draw {d}: gdfe sum {gdfe_sum} vs mac {other:?}"),
                            &mut notes,
                        );
                    }
                }
            }
            Err(e) => {
                violations += 1;
                flag(format!("draw {d}: gdfe failed ({e})"), &mut notes);
            }
        }

        if beta < 0.41 {
            bounded += 1;
            let measured = diag_dominance(&h).map(|d| d.beta).unwrap_or(f64::NAN);
            for i in 0..n {
                let (lo, hi) = zf_rate_bounds(h[(i, i)], measured, px, noise, ORDERING_GAP_DB);
                let r = b_zf[i];
                if r < lo - tol * lo.abs().max(1.0) || r > hi + tol * hi.abs().max(1.0) {
                    violations += 1;
                    flag(
                        format!(
                            "draw {d} user {i}: zf {r} outside [{lo}, {hi}] at beta {measured}"
                        ),
                        &mut notes,
                    );
                }
            }
        }
    }
    (violations, bounded, notes)
}

pub fn bound_ordering() -> Check {
    let (violations, bounded, notes) = bound_ordering_violations(1000, 0xb0);
    let mut detail = format!("1000 channels ({bounded} with beta < 0.41), {violations} violations");
    if let Some(first) = notes.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Check {
        id: 5,
        name: "bound ordering",
        passed: violations == 0,
        detail,
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        two_user_cancelers(),
        three_user_azf(),
        thp_round_trip(),
        linear_precoder(),
        bound_ordering(),
    ]
}
