//! Monte Carlo scenarios.
//!
//! Every trial draws a fresh lobe profile (random offset) and one channel
//! from its own ChaCha8 stream, and all configured schemes are evaluated on
//! that same draw. Trials run in parallel but are reduced in index order, so
//! results do not depend on the number of worker threads.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{generate_channel, sample_lobe_profile, ChannelRealization, SpatialLobeProfile};
use crate::codebooks::{
    build_nuq_codebook_full, build_nuq_codebook_sub, build_uq_codebook, nuq_lobe_grids, Codebook,
    MAX_BITS,
};
use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::metrics::{spectral_efficiency, LinkBudget};
use crate::precoding_full::{fully_digital_from_svd, nuq_hyp_full, uq_omp_hybrid_from_svd, PrecoderSet};
use crate::precoding_sub::{nuq_hyp_sub, SubArrayLayout};

pub const CSV_HEADER: [&str; 7] = [
    "scheme",
    "snr_db",
    "mean_se",
    "stderr_se",
    "trials",
    "feedback_bits",
    "config_digest",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "NUQ_FULL")]
    NuqFull,
    #[serde(rename = "UQ_OMP")]
    UqOmp,
    #[serde(rename = "FULLY_DIGITAL")]
    FullyDigital,
    #[serde(rename = "NUQ_SUB")]
    NuqSub,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::NuqFull,
        Scheme::UqOmp,
        Scheme::FullyDigital,
        Scheme::NuqSub,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::NuqFull => "NUQ_FULL",
            Scheme::UqOmp => "UQ_OMP",
            Scheme::FullyDigital => "FULLY_DIGITAL",
            Scheme::NuqSub => "NUQ_SUB",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.label() == wanted)
            .ok_or_else(|| {
                Error::invalid_arg(format!(
                    "unknown scheme '{s}' (expected NUQ_FULL, UQ_OMP, FULLY_DIGITAL or NUQ_SUB)"
                ))
            })
    }
}

/// How wide each lobe's quantized coverage is.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantRangePolicy {
    /// Quantized range equal to the lobe's angle spread.
    #[default]
    HalfRange,
    /// Explicit per-lobe ranges in radians.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf_t: usize,
    pub n_rf_r: usize,
    pub p: usize,
    pub q: usize,
    pub b: u32,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub quant_range_policy: QuantRangePolicy,
}

/// -10 dB to 10 dB in 2 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (-5..=5).map(|k| 2.0 * k as f64).collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_t: 144,
            n_r: 36,
            n_rf_t: 8,
            n_rf_r: 8,
            p: 2,
            q: 2,
            b: 8,
            snr_grid_db: default_snr_grid(),
            trials: 200,
            seed: 20170,
            schemes: vec![Scheme::NuqFull, Scheme::UqOmp, Scheme::FullyDigital],
            quant_range_policy: QuantRangePolicy::HalfRange,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Streams per link, one per path.
    pub fn n_s(&self) -> usize {
        self.p * self.q
    }

    /// Short hex digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hex::encode(&hash[..8])
    }

    /// Applies a `key=value` style override. The value is read as JSON when
    /// it parses, otherwise as a bare string; list fields also take
    /// comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self)?;
        let map = doc.as_object_mut().expect("config is an object");
        if !map.contains_key(key) {
            let keys: Vec<&String> = map.keys().collect();
            return Err(Error::invalid_arg(format!(
                "unknown config key '{key}' (valid keys: {keys:?})"
            )));
        }
        let parse = |v: &str| -> serde_json::Value {
            serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.trim().to_string()))
        };
        let mut parsed = parse(value);
        if matches!(key, "snr_grid_db" | "schemes") && !parsed.is_array() {
            parsed = serde_json::Value::Array(value.split(',').map(parse).collect());
        }
        if key == "schemes" {
            if let serde_json::Value::Array(items) = &mut parsed {
                for item in items.iter_mut() {
                    if let serde_json::Value::String(s) = item {
                        *s = s.to_ascii_uppercase().replace('-', "_");
                    }
                }
            }
        }
        map.insert(key.to_string(), parsed);
        *self = serde_json::from_value(doc)
            .map_err(|e| Error::invalid_arg(format!("bad value for '{key}': {e}")))?;
        Ok(())
    }

    fn reference_profile(&self) -> Result<SpatialLobeProfile> {
        let base = SpatialLobeProfile::with_offset(self.p, self.q, 0.0)?;
        match &self.quant_range_policy {
            QuantRangePolicy::HalfRange => Ok(base),
            QuantRangePolicy::Custom(r) => base.with_quant_ranges(r.clone()),
        }
    }

    /// Checks every precondition the configured schemes will meet, so a run
    /// fails before any trial starts.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid_config("trials must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid_config("no schemes selected"));
        }
        let distinct: BTreeSet<Scheme> = self.schemes.iter().copied().collect();
        if distinct.len() != self.schemes.len() {
            return Err(Error::invalid_config("schemes are listed more than once"));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid_config("SNR grid must be non-empty and finite"));
        }
        if self.n_t == 0 || self.n_r == 0 || self.n_rf_t == 0 || self.n_rf_r == 0 {
            return Err(Error::invalid_config("antenna and RF chain counts must be positive"));
        }
        if self.b == 0 || self.b > MAX_BITS {
            return Err(Error::invalid_config(format!(
                "b must be in 1..={MAX_BITS}, got {}",
                self.b
            )));
        }
        let profile = self.reference_profile()?;
        let n_s = self.n_s();
        if n_s > self.n_t.min(self.n_r) {
            return Err(Error::invalid_config(format!(
                "P*Q = {n_s} streams exceed the smaller array ({} antennas)",
                self.n_t.min(self.n_r)
            )));
        }
        for scheme in &self.schemes {
            match scheme {
                Scheme::NuqFull => {
                    if n_s > self.n_rf_t.min(self.n_rf_r) {
                        return Err(Error::invalid_config(format!(
                            "NUQ_FULL needs P*Q = {n_s} RF chains at each end"
                        )));
                    }
                    for g in nuq_lobe_grids(self.b, &profile)? {
                        if g.len() < self.q {
                            return Err(Error::invalid_config(format!(
                                "lobe {} gets {} codewords at b = {}, fewer than Q = {}",
                                g.lobe_index,
                                g.len(),
                                self.b,
                                self.q
                            )));
                        }
                    }
                }
                Scheme::UqOmp => {
                    let m = 1usize << self.b;
                    for (side, n_rf, n) in [("transmit", self.n_rf_t, self.n_t), ("receive", self.n_rf_r, self.n_r)] {
                        if n_rf < n_s || n_rf > m.min(n) {
                            return Err(Error::invalid_config(format!(
                                "UQ_OMP {side} RF chains must lie in {n_s}..={}, got {n_rf}",
                                m.min(n)
                            )));
                        }
                    }
                }
                Scheme::NuqSub => {
                    if self.n_rf_t != self.n_rf_r {
                        return Err(Error::invalid_config(
                            "NUQ_SUB needs equal RF chain counts at both ends",
                        ));
                    }
                    build_nuq_codebook_sub(self.n_t, self.n_r, self.n_rf_t, self.b, &profile)?;
                }
                Scheme::FullyDigital => {}
            }
        }
        Ok(())
    }
}

/// Aggregated spectral efficiency of one scheme at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub mean_se: f64,
    pub stderr_se: f64,
    pub trials: usize,
    pub feedback_bits: u64,
    pub config_digest: String,
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

/// Per-run shared state built once from a validated config.
struct Plan {
    uq: Option<(Codebook, Codebook)>,
    layout: Option<SubArrayLayout>,
    feedback: Vec<u64>,
}

impl Plan {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let wants = |s| cfg.schemes.contains(&s);
        let uq = if wants(Scheme::UqOmp) {
            Some((build_uq_codebook(cfg.n_t, cfg.b)?, build_uq_codebook(cfg.n_r, cfg.b)?))
        } else {
            None
        };
        let layout = if wants(Scheme::NuqSub) {
            Some(SubArrayLayout::new(cfg.n_t, cfg.n_r, cfg.n_rf_t)?)
        } else {
            None
        };
        let profile = cfg.reference_profile()?;
        let n_s = cfg.n_s() as u64;
        let mut feedback = Vec::with_capacity(cfg.schemes.len());
        for s in &cfg.schemes {
            let bits = match s {
                Scheme::NuqFull => {
                    let (t, _) = build_nuq_codebook_full(cfg.n_t, cfg.n_r, cfg.b, &profile)?;
                    n_s * t.bits_per_index() as u64
                }
                Scheme::NuqSub => {
                    let (t, _) =
                        build_nuq_codebook_sub(cfg.n_t, cfg.n_r, cfg.n_rf_t, cfg.b, &profile)?;
                    n_s * t.bits_per_index() as u64
                }
                Scheme::UqOmp => {
                    let (t, _) = uq.as_ref().expect("built above");
                    cfg.n_rf_t as u64 * t.bits_per_index() as u64
                }
                Scheme::FullyDigital => 0,
            };
            feedback.push(bits);
        }
        Ok(Plan {
            uq,
            layout,
            feedback,
        })
    }
}

/// RNG for trial `index`: the root seed picks the key, the trial index
/// picks the ChaCha stream.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Lobe profile and channel seen by every scheme in trial `index`.
pub fn draw_realization(
    cfg: &ScenarioConfig,
    index: usize,
) -> Result<(SpatialLobeProfile, ChannelRealization)> {
    let mut rng = trial_rng(cfg.seed, index);
    let mut profile = sample_lobe_profile(cfg.p, cfg.q, &mut rng)?;
    if let QuantRangePolicy::Custom(r) = &cfg.quant_range_policy {
        profile = profile.with_quant_ranges(r.clone())?;
    }
    let ch = generate_channel(&profile, cfg.n_t, cfg.n_r, &mut rng)?;
    Ok((profile, ch))
}

/// Spectral efficiency of every scheme (outer) at every SNR point (inner)
/// for one trial.
fn run_trial(cfg: &ScenarioConfig, plan: &Plan, index: usize) -> Result<Vec<Vec<f64>>> {
    let (profile, ch) = draw_realization(cfg, index)?;
    let n_s = cfg.n_s();
    let svd = cfg
        .schemes
        .iter()
        .any(|s| matches!(s, Scheme::FullyDigital | Scheme::UqOmp))
        .then(|| thin_svd(&ch.h));

    let mut out = Vec::with_capacity(cfg.schemes.len());
    for scheme in &cfg.schemes {
        let set: PrecoderSet = match scheme {
            Scheme::FullyDigital => fully_digital_from_svd(svd.as_ref().expect("svd computed"), n_s),
            Scheme::UqOmp => {
                let (t, r) = plan.uq.as_ref().expect("uq codebooks built");
                uq_omp_hybrid_from_svd(svd.as_ref().expect("svd computed"), t, r, cfg.n_rf_t, cfg.n_rf_r, n_s)?
            }
            Scheme::NuqFull => {
                let (t, r) = build_nuq_codebook_full(cfg.n_t, cfg.n_r, cfg.b, &profile)?;
                nuq_hyp_full(&ch, &t, &r, cfg.n_rf_t, cfg.n_rf_r)?
            }
            Scheme::NuqSub => {
                let layout = plan.layout.as_ref().expect("layout built");
                let (t, r) = build_nuq_codebook_sub(cfg.n_t, cfg.n_r, layout.n_rf(), cfg.b, &profile)?;
                nuq_hyp_sub(&ch, &t, &r, layout)?
            }
        };
        let row = cfg
            .snr_grid_db
            .iter()
            .map(|&snr_db| spectral_efficiency(&ch.h, &set, LinkBudget { snr_db, n_s }))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Raw per-trial spectral efficiencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTable {
    pub schemes: Vec<Scheme>,
    pub snr_grid_db: Vec<f64>,
    /// `values[trial][scheme][snr]`, schemes in config order.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl TrialTable {
    /// Per-trial values of one scheme at one SNR index.
    pub fn series(&self, scheme: Scheme, snr_index: usize) -> Option<Vec<f64>> {
        let s = self.schemes.iter().position(|&x| x == scheme)?;
        Some(self.values.iter().map(|t| t[s][snr_index]).collect())
    }
}

/// Runs every trial of a validated config, keeping all values.
pub fn run_trials(config: &ScenarioConfig) -> Result<TrialTable> {
    config.validate()?;
    let plan = Plan::new(config)?;
    trials_with_plan(config, &plan)
}

fn trials_with_plan(config: &ScenarioConfig, plan: &Plan) -> Result<TrialTable> {
    let per_trial: Vec<Result<Vec<Vec<f64>>>> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, plan, i))
        .collect();
    let values = per_trial
        .into_iter()
        .enumerate()
        .map(|(index, t)| {
            t.map_err(|e| Error::Trial {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialTable {
        schemes: config.schemes.clone(),
        snr_grid_db: config.snr_grid_db.clone(),
        values,
    })
}

/// Runs all trials and returns one record per (scheme, SNR point), sorted
/// by scheme label and SNR.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let plan = Plan::new(config)?;
    let table = trials_with_plan(config, &plan)?;

    let mut acc = vec![vec![Running::default(); config.snr_grid_db.len()]; config.schemes.len()];
    for trial in &table.values {
        for (s, row) in trial.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                acc[s][k].push(v);
            }
        }
    }

    let digest = config.digest();
    let mut records = Vec::with_capacity(config.schemes.len() * config.snr_grid_db.len());
    for (s, scheme) in config.schemes.iter().enumerate() {
        for (k, &snr_db) in config.snr_grid_db.iter().enumerate() {
            records.push(ResultRecord {
                scheme: *scheme,
                snr_db,
                mean_se: acc[s][k].mean,
                stderr_se: acc[s][k].stderr(),
                trials: acc[s][k].n,
                feedback_bits: plan.feedback[s],
                config_digest: digest.clone(),
            });
        }
    }
    sort_records(&mut records);
    Ok(records)
}

/// [`run_scenario`] on a dedicated pool of `threads` workers.
pub fn run_scenario_with_threads(config: &ScenarioConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_scenario(config))
}

fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| {
        a.scheme
            .label()
            .cmp(b.scheme.label())
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepAxis {
    Snr,
    Bits,
    RfChains,
    TxAntennas,
    /// Scales both arrays together, keeping the configured `n_r / n_t`
    /// ratio; the axis value is `n_t`.
    BothAntennas,
    Lobes,
    Subpaths,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Snr => "SNR",
            SweepAxis::Bits => "BITS",
            SweepAxis::RfChains => "RF_CHAINS",
            SweepAxis::TxAntennas => "TX_ANTENNAS",
            SweepAxis::BothAntennas => "BOTH_ANTENNAS",
            SweepAxis::Lobes => "LOBES",
            SweepAxis::Subpaths => "SUBPATHS",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        [
            SweepAxis::Snr,
            SweepAxis::Bits,
            SweepAxis::RfChains,
            SweepAxis::TxAntennas,
            SweepAxis::BothAntennas,
            SweepAxis::Lobes,
            SweepAxis::Subpaths,
        ]
        .into_iter()
        .find(|a| a.label() == wanted)
        .ok_or_else(|| Error::invalid_arg(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub record: ResultRecord,
}

/// Root seed of the sweep cell at `value`.
pub fn cell_seed(root: u64, value: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(value.to_bits().to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

fn positive_integer(axis: SweepAxis, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || !v.is_finite() {
        return Err(Error::invalid_arg(format!(
            "{axis} values must be positive integers, got {v}"
        )));
    }
    Ok(v as usize)
}

fn cell_config(config: &ScenarioConfig, axis: SweepAxis, v: f64) -> Result<ScenarioConfig> {
    let mut cell = config.clone();
    match axis {
        SweepAxis::Snr => unreachable!("SNR sweeps run as one scenario"),
        SweepAxis::Bits => {
            let b = positive_integer(axis, v)?;
            cell.b = u32::try_from(b).map_err(|_| Error::invalid_arg("bit count too large"))?;
        }
        SweepAxis::RfChains => {
            let n = positive_integer(axis, v)?;
            cell.n_rf_t = n;
            cell.n_rf_r = n;
        }
        SweepAxis::TxAntennas => cell.n_t = positive_integer(axis, v)?,
        SweepAxis::BothAntennas => {
            let n_t = positive_integer(axis, v)?;
            if !(n_t * config.n_r).is_multiple_of(config.n_t) {
                return Err(Error::invalid_arg(format!(
                    "n_t = {n_t} does not keep the {}:{} array ratio",
                    config.n_t, config.n_r
                )));
            }
            cell.n_r = n_t * config.n_r / config.n_t;
            cell.n_t = n_t;
        }
        SweepAxis::Lobes => cell.p = positive_integer(axis, v)?,
        SweepAxis::Subpaths => cell.q = positive_integer(axis, v)?,
    }
    cell.seed = cell_seed(config.seed, v);
    Ok(cell)
}

/// Validated scenario of every cell of a non-SNR sweep, with its seed
/// derived from the root seed and the axis value.
pub fn sweep_cells(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(f64, ScenarioConfig)>> {
    if axis == SweepAxis::Snr {
        let mut cfg = config.clone();
        cfg.snr_grid_db = values.to_vec();
        cfg.validate()?;
        return Ok(vec![(f64::NAN, cfg)]);
    }
    values
        .iter()
        .map(|&v| {
            let cell = cell_config(config, axis, v)?;
            cell.validate()?;
            Ok((v, cell))
        })
        .collect()
}

/// Runs one scenario per axis value. SNR sweeps replace the SNR grid and
/// share channel draws across SNR points; other axes give each value its own
/// derived seed. Every cell is validated before any of them runs.
pub fn sweep(config: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRecord>> {
    if values.is_empty() {
        return Err(Error::invalid_arg("sweep needs at least one axis value"));
    }
    if axis == SweepAxis::Snr {
        let mut cfg = config.clone();
        cfg.snr_grid_db = values.to_vec();
        return Ok(run_scenario(&cfg)?
            .into_iter()
            .map(|record| SweepRecord {
                axis,
                axis_value: record.snr_db,
                record,
            })
            .collect());
    }
    let cells = sweep_cells(config, axis, values)?;
    let mut out = Vec::new();
    for (v, cell) in cells {
        out.extend(run_scenario(&cell)?.into_iter().map(|record| SweepRecord {
            axis,
            axis_value: v,
            record,
        }));
    }
    out.sort_by(|a, b| {
        a.axis_value
            .total_cmp(&b.axis_value)
            .then(a.record.scheme.label().cmp(b.record.scheme.label()))
            .then(a.record.snr_db.total_cmp(&b.record.snr_db))
    });
    Ok(out)
}

/// Decimal rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn record_fields(r: &ResultRecord) -> [String; 7] {
    [
        r.scheme.label().to_string(),
        format_sig6(r.snr_db),
        format_sig6(r.mean_se),
        format_sig6(r.stderr_se),
        r.trials.to_string(),
        r.feedback_bits.to_string(),
        r.config_digest.clone(),
    ]
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes records as CSV sorted by (scheme, snr_db).
pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv_writer(path)?;
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for r in &sorted {
        w.write_record(record_fields(r)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<ResultRecord>, _>>()
        .map_err(csv_err(path))
}

/// Sweep table: the result columns preceded by `axis,axis_value`.
pub fn write_sweep_results(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["axis", "axis_value"];
    header.extend(CSV_HEADER);
    w.write_record(&header).map_err(csv_err(path))?;
    for r in records {
        let mut row = vec![r.axis.label().to_string(), format_sig6(r.axis_value)];
        row.extend(record_fields(&r.record));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// JSON array mirror of the CSV output.
pub fn write_results_json<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), records)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_t: 16,
            n_r: 8,
            n_rf_t: 4,
            n_rf_r: 4,
            p: 2,
            q: 2,
            b: 5,
            snr_grid_db: vec![-10.0, 0.0, 10.0],
            trials: 6,
            seed: 3,
            schemes: Scheme::ALL.to_vec(),
            quant_range_policy: QuantRangePolicy::HalfRange,
        }
    }

    #[test]
    fn records_cover_schemes_and_snr_points() {
        let recs = run_scenario(&small()).unwrap();
        assert_eq!(recs.len(), 12);
        assert_eq!(recs[0].scheme, Scheme::FullyDigital);
        assert!(recs.iter().all(|r| r.trials == 6 && r.stderr_se >= 0.0));
        let fb = |s| recs.iter().find(|r| r.scheme == s).unwrap().feedback_bits;
        assert_eq!(fb(Scheme::NuqFull), 20);
        assert_eq!(fb(Scheme::UqOmp), 20);
        assert_eq!(fb(Scheme::FullyDigital), 0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = run_scenario_with_threads(&small(), 1).unwrap();
        let b = run_scenario_with_threads(&small(), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [3.0, 1.5, 9.25, -2.0, 4.0];
        let mut r = Running::default();
        xs.iter().for_each(|&x| r.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((r.mean - mean).abs() < 1e-12);
        assert!((r.stderr() - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overrides() {
        let mut c = ScenarioConfig::default();
        c.set("b", "6").unwrap();
        c.set("snr_grid_db", "-4,0,4").unwrap();
        c.set("schemes", "nuq_full,FULLY_DIGITAL").unwrap();
        assert_eq!(c.b, 6);
        assert_eq!(c.snr_grid_db, vec![-4.0, 0.0, 4.0]);
        assert_eq!(c.schemes, vec![Scheme::NuqFull, Scheme::FullyDigital]);
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("trials", "many").is_err());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = small();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.n_rf_t = 3;
        assert!(matches!(c.validate(), Err(Error::InvalidConfiguration(_))));
        let mut c = small();
        c.schemes = vec![Scheme::NuqSub];
        c.n_t = 18;
        assert!(c.validate().is_err());
        let mut c = small();
        c.quant_range_policy = QuantRangePolicy::Custom(vec![0.1, 0.1]);
        assert!(matches!(c.validate(), Err(Error::InvalidProfile { .. })));
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(12.3456789), "12.3457");
        assert_eq!(format_sig6(-10.0), "-10.0000");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(0.0), "0.00000");
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(1, 4.0), cell_seed(1, 5.0));
        assert_eq!(cell_seed(9, 4.0), cell_seed(9, 4.0));
    }
}
