//! Scenario execution. Work items run on a rayon pool and are written back
//! in canonical (sweep point, seed, method) order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use rayon::prelude::*;

use super::config::{spaced, Scenario, Sweep, TopologySpec};
use crate::adaptive::{run_adaptation, Schedule};
use crate::channel::{
    diag_dominance, generate_channel_decimated, generate_channel_tones, symmetric_channel,
    ChannelTensor, Direction,
};
use crate::error::{Result, SimError};
use crate::profile::{lin_to_db, SystemProfile};
use crate::rate::{mac_sum_capacity, method_rate, RateReport};

pub const RATES_HEADER: &str = "length_m,method,seed,user,rate_mbps,rate_df_mbps";
pub const TONES_HEADER: &str = "length_m,seed,method,user,tone,freq_mhz,bits";
pub const DOMINANCE_HEADER: &str = "length_m,seed,tone,freq_mhz,beta_row,beta_col,beta";
pub const ALPHA_HEADER: &str = "alpha,snr_db,method,user,bits";
pub const LEARNING_HEADER: &str = "seed,mode,iteration,mse_db";

/// CSV bodies produced by one scenario. Absent tables are not written.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultTables {
    pub rates: Option<String>,
    pub tones: Option<String>,
    pub dominance: Option<String>,
    pub alpha: Option<String>,
    pub learning: Option<String>,
}

impl ResultTables {
    fn entries(&self) -> [(&'static str, &Option<String>); 5] {
        [
            ("rates.csv", &self.rates),
            ("tones.csv", &self.tones),
            ("dominance.csv", &self.dominance),
            ("alpha.csv", &self.alpha),
            ("learning.csv", &self.learning),
        ]
    }

    /// Writes every present table into `dir` and returns the file names.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<&'static str>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, body) in self.entries() {
            if let Some(body) = body {
                fs::write(dir.join(name), body)?;
                written.push(name);
            }
        }
        Ok(written)
    }
}

struct PointOutput {
    rates: String,
    tones: String,
    dominance: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every (sweep point, seed) of `s` with up to `jobs` worker threads
/// (0 picks the rayon default). Output is independent of `jobs`.
pub fn run_scenario(s: &Scenario, jobs: usize) -> Result<ResultTables> {
    let profile = SystemProfile::new(s.profile);
    let mut tables = ResultTables::default();

    if let Sweep::Alpha {
        min,
        max,
        step,
        snr_db,
    } = s.sweep
    {
        tables.alpha = Some(alpha_table(s, min, max, step, snr_db)?);
    } else {
        let points = s.sweep_points();
        let items: Vec<(usize, u64)> = (0..points.len())
            .flat_map(|p| s.seeds.iter().map(move |&seed| (p, seed)))
            .collect();
        info!(
            "{} work items, {} methods each",
            items.len(),
            s.methods.len()
        );
        let outputs = with_pool(jobs, || {
            items
                .par_iter()
                .map(|&(p, seed)| run_point(s, &profile, &points[p], seed))
                .collect::<Result<Vec<_>>>()
        })??;

        let mut rates = format!("{RATES_HEADER}\n");
        let mut tones = format!("{TONES_HEADER}\n");
        let mut dominance = format!("{DOMINANCE_HEADER}\n");
        for out in &outputs {
            rates.push_str(&out.rates);
            tones.push_str(&out.tones);
            dominance.push_str(&out.dominance);
        }
        tables.rates = Some(rates);
        let per_tone = s.write_tones || s.sweep == Sweep::Frequency;
        if per_tone {
            tables.tones = Some(tones);
        }
        if s.sweep == Sweep::Frequency {
            tables.dominance = Some(dominance);
        }
    }

    if s.adaptive.is_some() {
        tables.learning = Some(learning_table(s, &profile, jobs)?);
    }
    Ok(tables)
}

fn run_point(
    s: &Scenario,
    profile: &SystemProfile,
    point: &TopologySpec,
    seed: u64,
) -> Result<PointOutput> {
    let topology = s.build_topology(point)?;
    let channel = generate_channel_decimated(&topology, profile, seed, s.direction, s.tone_step)?;
    let lengths = &topology.lengths;
    let per_tone = s.write_tones || s.sweep == Sweep::Frequency;
    let mut out = PointOutput {
        rates: String::new(),
        tones: String::new(),
        dominance: String::new(),
    };

    for method in &s.methods {
        let report = method_rate(&channel, profile, method, s.rate_options)?;
        write_rates(&mut out.rates, &report, lengths, seed);
        if per_tone {
            write_tones(&mut out.tones, &report, &channel, lengths, seed);
        }
    }
    if s.sweep == Sweep::Frequency {
        write_dominance(&mut out.dominance, &channel, lengths, seed)?;
    }
    Ok(out)
}

fn row_length(report: &RateReport, lengths: &[f64], user: usize) -> f64 {
    if report.aggregate {
        mean(lengths)
    } else {
        lengths[user]
    }
}

fn user_label(report: &RateReport, user: usize) -> String {
    if report.aggregate {
        "sum".to_string()
    } else {
        user.to_string()
    }
}

fn write_rates(buf: &mut String, report: &RateReport, lengths: &[f64], seed: u64) {
    for (u, (r, r_df)) in report.rate_bps.iter().zip(&report.rate_df_bps).enumerate() {
        let _ = writeln!(
            buf,
            "{:.3},{},{},{},{:.6},{:.6}",
            row_length(report, lengths, u),
            report.label,
            seed,
            user_label(report, u),
            r / 1e6,
            r_df / 1e6
        );
    }
}

fn write_tones(
    buf: &mut String,
    report: &RateReport,
    channel: &ChannelTensor,
    lengths: &[f64],
    seed: u64,
) {
    for (u, bits) in report.bits.iter().enumerate() {
        for ((k, f), b) in channel.tones.iter().zip(&channel.freqs).zip(bits) {
            let _ = writeln!(
                buf,
                "{:.3},{},{},{},{},{:.6},{:.6}",
                row_length(report, lengths, u),
                seed,
                report.label,
                user_label(report, u),
                k,
                f / 1e6,
                b
            );
        }
    }
}

fn write_dominance(
    buf: &mut String,
    channel: &ChannelTensor,
    lengths: &[f64],
    seed: u64,
) -> Result<()> {
    let l = mean(lengths);
    for ((k, f), h) in channel
        .tones
        .iter()
        .zip(&channel.freqs)
        .zip(&channel.matrices)
    {
        let d = diag_dominance(h)?;
        let _ = writeln!(
            buf,
            "{l:.3},{seed},{k},{:.6},{:.6},{:.6},{:.6}",
            f / 1e6,
            d.row,
            d.col,
            d.beta
        );
    }
    Ok(())
}

/// Symmetric synthetic channel (unit direct gain, coupling α) at a fixed
/// per-user SNR, unit gap and no bit cap.
fn alpha_table(s: &Scenario, min: f64, max: f64, step: f64, snr_db: f64) -> Result<String> {
    let noise = 10f64.powf(-snr_db / 10.0);
    let mut buf = format!("{ALPHA_HEADER}\n");
    for alpha in spaced(min, max, step) {
        let h = symmetric_channel(s.lines, alpha, 1.0);
        for method in &s.methods {
            let bits: Vec<f64> = if method.is_aggregate() {
                vec![mac_sum_capacity(&h, &vec![1.0; s.lines], noise)?]
            } else {
                match method.tone_snr(&h, 1.0, noise, s.direction) {
                    Ok(snr) => snr.iter().map(|&x| (1.0 + x.max(0.0)).log2()).collect(),
                    Err(e @ (SimError::SingularChannel { .. } | SimError::DegenerateChannel)) => {
                        log::warn!("alpha {alpha}: {} skipped ({e})", method.label());
                        vec![0.0; s.lines]
                    }
                    Err(e) => return Err(e),
                }
            };
            for (u, b) in bits.iter().enumerate() {
                let user = if method.is_aggregate() {
                    "sum".to_string()
                } else {
                    u.to_string()
                };
                let _ = writeln!(
                    buf,
                    "{alpha:.6},{snr_db:.3},{},{user},{b:.9}",
                    method.label()
                );
            }
        }
    }
    Ok(buf)
}

/// Adaptation on the grid tone nearest `adapt_tone_mhz` of the first sweep
/// point. MSE is reported relative to its initial (single-line equalizer)
/// value.
fn learning_table(s: &Scenario, profile: &SystemProfile, jobs: usize) -> Result<String> {
    let spec = s.adaptive.as_ref().expect("adaptive spec present");
    let topology = s.build_topology(&s.sweep_points()[0])?;
    let active = profile.active_tones();
    let target = spec.tone_mhz * 1e6;
    let k = *active
        .iter()
        .min_by(|&&a, &&b| {
            let fa = (a as f64 * profile.tone_width - target).abs();
            let fb = (b as f64 * profile.tone_width - target).abs();
            fa.total_cmp(&fb)
        })
        .ok_or_else(|| SimError::Config("profile has no active tones".into()))?;
    let px = profile.tone_tx_power(k)?;
    let noise = profile.noise_power();

    let items: Vec<(u64, usize)> = s
        .seeds
        .iter()
        .flat_map(|&seed| (0..spec.modes.len()).map(move |m| (seed, m)))
        .collect();
    let curves = with_pool(jobs, || {
        items
            .par_iter()
            .map(|&(seed, m)| {
                let ch =
                    generate_channel_tones(&topology, profile, seed, Direction::Upstream, &[k])?;
                let schedule =
                    Schedule::new(spec.modes[m], spec.mu_normalized, spec.iterations, seed);
                run_adaptation(&ch.matrices[0], px, noise, &schedule)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut buf = format!("{LEARNING_HEADER}\n");
    for (&(seed, m), run) in items.iter().zip(&curves) {
        let m0 = run.expected_mse[0];
        for (t, mse) in run.expected_mse.iter().enumerate() {
            let _ = writeln!(
                buf,
                "{seed},{},{t},{:.6}",
                spec.modes[m],
                lin_to_db(mse / m0)
            );
        }
    }
    Ok(buf)
}
