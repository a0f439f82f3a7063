//! Flat `key=value` scenario files.
//!
//! ```text
//! # rate-reach, 10 equal lines
//! profile=gfast106
//! lines=10
//! sweep=length
//! length_min_m=50
//! length_max_m=500
//! length_step_m=50
//! methods=none,zf,mmse,zf_gdfe,mfb
//! seeds=1..20
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::adaptive::LmsMode;
use crate::channel::{chi_from_ref_db, BinderTopology, CableModel, Direction};
use crate::error::{Result, SimError};
use crate::linalg::validate_permutation;
use crate::precoder::Scaling;
use crate::profile::ProfileId;
use crate::rate::{BoundId, RateMethod, RateOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    /// `lines` pairs of the same length.
    Equal(f64),
    /// One pair per length in `min, min+step, …, ≤ max`.
    Spaced { min: f64, max: f64, step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    /// Equal-length binders at each length.
    Length {
        min: f64,
        max: f64,
        step: f64,
    },
    /// Per-tone SNR/bit tables plus diagonal dominance per tone.
    Frequency,
    /// Symmetric synthetic channel with crosstalk coefficient α.
    Alpha {
        min: f64,
        max: f64,
        step: f64,
        snr_db: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSpec {
    pub modes: Vec<LmsMode>,
    pub mu_normalized: f64,
    pub iterations: usize,
    pub tone_mhz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub profile: ProfileId,
    pub lines: usize,
    pub topology: TopologySpec,
    pub cable: CableModel,
    pub methods: Vec<RateMethod>,
    pub direction: Direction,
    pub seeds: Vec<u64>,
    pub sweep: Sweep,
    pub out_dir: PathBuf,
    /// Keep every `tone_step`-th active tone.
    pub tone_step: usize,
    pub write_tones: bool,
    pub rate_options: RateOptions,
    pub adaptive: Option<AdaptiveSpec>,
}

impl Scenario {
    /// Length points of the sweep (a single point when not sweeping length).
    pub fn sweep_points(&self) -> Vec<TopologySpec> {
        match &self.sweep {
            Sweep::Length { min, max, step } => spaced(*min, *max, *step)
                .into_iter()
                .map(TopologySpec::Equal)
                .collect(),
            _ => vec![self.topology.clone()],
        }
    }

    pub fn build_topology(&self, spec: &TopologySpec) -> Result<BinderTopology> {
        match spec {
            TopologySpec::Equal(l) => BinderTopology::equal(self.lines, *l, self.cable.clone()),
            TopologySpec::Spaced { min, max, step } => {
                BinderTopology::new(spaced(*min, *max, *step), self.cable.clone())
            }
        }
    }
}

pub(crate) fn spaced(min: f64, max: f64, step: f64) -> Vec<f64> {
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| min + step * i as f64).collect()
}

const KNOWN_KEYS: &[&str] = &[
    "profile",
    "lines",
    "length_m",
    "length_min_m",
    "length_max_m",
    "length_step_m",
    "cable",
    "methods",
    "direction",
    "seeds",
    "sweep",
    "out_dir",
    "il_a0",
    "il_a1",
    "il_a2",
    "chi_fext_db",
    "sigma_fext_db",
    "fext_breakpoint_mhz",
    "fext_slope_hi",
    "tone_step",
    "tones",
    "integer_bits",
    "scaling",
    "ordering",
    "shaping_loss_db",
    "alpha_min",
    "alpha_max",
    "alpha_step",
    "snr_db",
    "adapt_modes",
    "adapt_mu",
    "adapt_iterations",
    "adapt_tone_mhz",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn invalid(&self, key: &str, msg: impl std::fmt::Display) -> SimError {
        match self.map.get(key) {
            Some((line, v)) => SimError::ConfigSyntax {
                line: *line,
                msg: format!("{key}={v}: {msg}"),
            },
            None => SimError::Config(format!("{key}: {msg}")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| self.invalid(key, e)),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.parse::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(self.invalid(key, "must be > 0")),
            other => Ok(other),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(_) => Err(self.invalid(key, "expected true or false")),
        }
    }
}

fn parse_seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = tok.split_once("..") {
            let a: u64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range '{tok}'"))?;
            let b: u64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range '{tok}'"))?;
            if b < a {
                return Err(format!("empty seed range '{tok}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(tok.parse().map_err(|_| format!("bad seed '{tok}'"))?);
        }
    }
    Ok(out)
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|t| !t.is_empty())
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| SimError::ConfigSyntax {
            line: line_no,
            msg: format!("expected key=value, got '{line}'"),
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(SimError::ConfigSyntax {
                line: line_no,
                msg: format!("unknown key '{key}'"),
            });
        }
        if map
            .insert(key.to_string(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(SimError::ConfigSyntax {
                line: line_no,
                msg: format!("duplicate key '{key}'"),
            });
        }
    }
    let e = Entries { map };

    let sweep_kind = e.get("sweep").unwrap_or("none");
    let is_alpha = sweep_kind == "alpha";
    let has_range = ["length_min_m", "length_max_m", "length_step_m"]
        .iter()
        .any(|k| e.has(k));

    let mut missing = Vec::new();
    if !e.has("methods") {
        missing.push("methods");
    }
    if !e.has("seeds") && !is_alpha {
        missing.push("seeds");
    }
    if !is_alpha && !e.has("length_m") && !has_range {
        missing.push("length_m (or length_min_m/length_max_m/length_step_m)");
    }
    if !missing.is_empty() {
        return Err(SimError::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let profile = match e.get("profile") {
        None => ProfileId::Gfast106,
        Some(v) => v
            .parse()
            .map_err(|err: SimError| e.invalid("profile", err))?,
    };
    let direction: Direction = e.parse("direction")?.unwrap_or(Direction::Upstream);

    let mut cable = match e.get("cable") {
        None => CableModel::cat5(),
        Some(v) => CableModel::by_name(v).map_err(|err| e.invalid("cable", err))?,
    };
    for (key, slot) in [
        ("il_a0", &mut cable.il_a0),
        ("il_a1", &mut cable.il_a1),
        ("il_a2", &mut cable.il_a2),
    ] {
        if let Some(v) = e.parse::<f64>(key)? {
            if !(v >= 0.0) {
                return Err(e.invalid(key, "must be >= 0"));
            }
            *slot = v;
        }
    }
    if let Some(v) = e.parse::<f64>("chi_fext_db")? {
        cable.chi_fext = chi_from_ref_db(v);
    }
    if let Some(v) = e.parse::<f64>("sigma_fext_db")? {
        cable.sigma_fext_db = v;
    }
    if let Some(v) = e.positive("fext_breakpoint_mhz")? {
        cable.fext_breakpoint = v * 1e6;
    }
    if let Some(v) = e.parse::<f64>("fext_slope_hi")? {
        cable.fext_slope_hi = v;
    }
    cable
        .validate()
        .map_err(|err| SimError::Config(err.to_string()))?;

    let range = |e: &Entries| -> Result<(f64, f64, f64)> {
        let min = e
            .positive("length_min_m")?
            .ok_or_else(|| e.invalid("length_min_m", "required"))?;
        let max = e
            .positive("length_max_m")?
            .ok_or_else(|| e.invalid("length_max_m", "required"))?;
        let step = e
            .positive("length_step_m")?
            .ok_or_else(|| e.invalid("length_step_m", "required"))?;
        if max < min {
            return Err(e.invalid("length_max_m", "must be >= length_min_m"));
        }
        Ok((min, max, step))
    };

    let lines_given: Option<usize> = e.parse("lines")?;
    if lines_given == Some(0) {
        return Err(e.invalid("lines", "must be >= 1"));
    }

    let (topology, sweep, lines) = match sweep_kind {
        "none" | "frequency" => {
            let topo = if let Some(l) = e.positive("length_m")? {
                if has_range {
                    return Err(SimError::Config(
                        "give either length_m or a length range, not both".into(),
                    ));
                }
                TopologySpec::Equal(l)
            } else {
                let (min, max, step) = range(&e)?;
                TopologySpec::Spaced { min, max, step }
            };
            let lines = match &topo {
                TopologySpec::Equal(_) => lines_given.unwrap_or(10),
                TopologySpec::Spaced { min, max, step } => {
                    let count = spaced(*min, *max, *step).len();
                    if let Some(n) = lines_given.filter(|&n| n != count) {
                        return Err(e.invalid(
                            "lines",
                            format!("length range gives {count} lines, not {n}"),
                        ));
                    }
                    count
                }
            };
            let sweep = if sweep_kind == "frequency" {
                Sweep::Frequency
            } else {
                Sweep::None
            };
            (topo, sweep, lines)
        }
        "length" => {
            if e.has("length_m") {
                return Err(e.invalid("length_m", "not used with sweep=length"));
            }
            let (min, max, step) = range(&e)?;
            (
                TopologySpec::Equal(min),
                Sweep::Length { min, max, step },
                lines_given.unwrap_or(10),
            )
        }
        "alpha" => {
            let min = e.parse::<f64>("alpha_min")?.unwrap_or(0.0);
            let max = e.parse::<f64>("alpha_max")?.unwrap_or(0.9);
            let step = e.positive("alpha_step")?.unwrap_or(0.05);
            let snr_db = e.parse::<f64>("snr_db")?.unwrap_or(20.0);
            if !(min >= 0.0 && max >= min) {
                return Err(e.invalid("alpha_max", "need 0 <= alpha_min <= alpha_max"));
            }
            let lines = lines_given.unwrap_or(2);
            (
                TopologySpec::Equal(1.0),
                Sweep::Alpha {
                    min,
                    max,
                    step,
                    snr_db,
                },
                lines,
            )
        }
        other => {
            return Err(e.invalid(
                "sweep",
                format!("unknown sweep '{other}' (none, length, frequency, alpha)"),
            ))
        }
    };

    let scaling: Scaling = e.parse("scaling")?.unwrap_or_default();
    let ordering = match e.get("ordering") {
        None => None,
        Some(v) => {
            let o: Vec<usize> = split_list(v)
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|err| e.invalid("ordering", err))?;
            validate_permutation(&o, lines).map_err(|err| e.invalid("ordering", err))?;
            Some(o)
        }
    };
    let shaping_loss_db = e.parse::<f64>("shaping_loss_db")?.unwrap_or(0.0);

    let mut methods = Vec::new();
    for tok in split_list(e.get("methods").unwrap_or("")) {
        let parsed = RateMethod::parse_list(tok).map_err(|err| e.invalid("methods", err))?;
        for mut m in parsed {
            let ok = match (&m, direction) {
                (RateMethod::Canceler(s), Direction::Downstream) => s.method.as_str() == "none",
                (RateMethod::Precoder(_), Direction::Upstream) => false,
                (RateMethod::Bound(BoundId::MacSum), Direction::Downstream) => false,
                _ => true,
            };
            if !ok {
                return Err(e.invalid(
                    "methods",
                    format!("method '{tok}' is not available for direction {direction}"),
                ));
            }
            match &mut m {
                RateMethod::Canceler(s) => s.ordering = ordering.clone(),
                RateMethod::Precoder(s) => {
                    s.ordering = ordering.clone();
                    s.scaling = scaling;
                    s.shaping_loss_db = shaping_loss_db;
                }
                RateMethod::Bound(_) => {}
            }
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
    }
    if methods.is_empty() {
        return Err(e.invalid("methods", "no methods given"));
    }

    let seeds = match e.get("seeds") {
        None => vec![0],
        Some(v) => parse_seeds(v).map_err(|err| e.invalid("seeds", err))?,
    };
    if seeds.is_empty() {
        return Err(e.invalid("seeds", "no seeds given"));
    }

    let tone_step: usize = e.parse("tone_step")?.unwrap_or(1);
    if tone_step == 0 {
        return Err(e.invalid("tone_step", "must be >= 1"));
    }

    let adaptive = match e.get("adapt_modes") {
        None => None,
        Some(v) => {
            let modes = split_list(v)
                .map(|t| t.parse::<LmsMode>())
                .collect::<Result<Vec<_>>>()
                .map_err(|err| e.invalid("adapt_modes", err))?;
            let mu_normalized = e.positive("adapt_mu")?.unwrap_or(0.1);
            let iterations: usize = e.parse("adapt_iterations")?.unwrap_or(10_000);
            let tone_mhz = e.positive("adapt_tone_mhz")?.unwrap_or(100.0);
            if direction != Direction::Upstream {
                return Err(e.invalid("adapt_modes", "adaptive cancellation is upstream only"));
            }
            Some(AdaptiveSpec {
                modes,
                mu_normalized,
                iterations,
                tone_mhz,
            })
        }
    };

    Ok(Scenario {
        profile,
        lines,
        topology,
        cable,
        methods,
        direction,
        seeds,
        sweep,
        out_dir: PathBuf::from(e.get("out_dir").unwrap_or("out")),
        tone_step,
        write_tones: e.flag("tones")?,
        rate_options: RateOptions {
            integer_bits: e.flag("integer_bits")?,
            skip_singular: true,
        },
        adaptive,
    })
}
