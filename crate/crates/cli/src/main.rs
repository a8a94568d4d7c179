mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmw_core::codebooks::{nuq_lobe_grids, CodebookDocument};
use mmw_core::harness::{draw_realization, sweep_cells, write_results_json, write_sweep_results};
use mmw_core::metrics::{spectral_efficiency, LinkBudget};
use mmw_core::precoding_full::uq_omp_hybrid;
use mmw_core::{
    build_nuq_codebook_full, build_nuq_codebook_sub, build_uq_codebook, equivalent_bits,
    feedback_bits, nuq_hyp_full, nuq_hyp_sub, run_scenario, sweep, write_results, Error,
    ScenarioConfig, SpatialLobeProfile, SubArrayLayout, SweepAxis,
};

use presets::Figure;

/// Non-uniform quantization codebooks and hybrid precoding for mmWave MIMO.
#[derive(Parser)]
#[command(name = "mmw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a NUQ codebook pair and write it as JSON.
    Codebook(CodebookArgs),
    /// Design precoders for one seeded channel draw and report them.
    Design(DesignArgs),
    /// Run a scenario across one parameter axis.
    Sweep(SweepArgs),
    /// Regenerate the data behind one figure preset.
    ///
    /// SNR-axis figures use -10..10 dB in 2 dB steps unless overridden;
    /// RF-chain, antenna and bit sweeps are evaluated at 0 dB.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Structure {
    Full,
    Sub,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long, value_enum)]
    structure: Structure,
    #[arg(long)]
    bits: u32,
    #[arg(long)]
    lobes: usize,
    #[arg(long)]
    subpaths: usize,
    #[arg(long)]
    nt: usize,
    #[arg(long)]
    nr: usize,
    /// RF chains per end (sub-connected only).
    #[arg(long)]
    nrf: Option<usize>,
    /// Offset of the first lobe in radians.
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Per-lobe quantized ranges in radians; defaults to the lobe spreads.
    #[arg(long, value_delimiter = ',')]
    ranges: Option<Vec<f64>>,
    /// Where to write the transmitter codebook; the receiver one goes next
    /// to it with an `.rx.json` suffix.
    #[arg(long)]
    out: PathBuf,
}

/// Scenario options shared by `design`, `sweep` and `reproduce`.
#[derive(Args)]
struct ScenarioArgs {
    /// JSON scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a scenario key, e.g. `--set b=7 --set snr_grid_db=-4,0,4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, env = "MMW_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), Error> {
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override '{o}' is not KEY=VALUE")))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        Ok(())
    }

    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::from_path(p)?,
            None => ScenarioConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignScheme {
    Full,
    Sub,
    Omp,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, value_enum, default_value = "full")]
    structure: DesignScheme,
    /// SNR for the reported spectral efficiency.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Which trial's draw to use.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// snr, bits, rf-chains, tx-antennas, both-antennas, lobes or subpaths.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the records as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, env = "MMW_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

/// Failure split by exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) if inner.is_config_error() => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Codebook(a) => cmd_codebook(a),
        Command::Design(a) => cmd_design(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_json(path: &Path, value: &CodebookDocument) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_codebook(a: CodebookArgs) -> Result<(), Failure> {
    let mut profile = SpatialLobeProfile::with_offset(a.lobes, a.subpaths, a.offset)?;
    if let Some(r) = a.ranges {
        profile = profile.with_quant_ranges(r)?;
    }
    let (tx, rx) = match a.structure {
        Structure::Full => build_nuq_codebook_full(a.nt, a.nr, a.bits, &profile)?,
        Structure::Sub => {
            let nrf = a
                .nrf
                .ok_or_else(|| Error::InvalidArgument("--nrf is required for --structure sub".into()))?;
            build_nuq_codebook_sub(a.nt, a.nr, nrf, a.bits, &profile)?
        }
    };
    let b_hat = equivalent_bits(a.bits, profile.quant_ranges())?;
    write_json(&a.out, &tx.to_document())?;
    let rx_path = a.out.with_extension("rx.json");
    write_json(&rx_path, &rx.to_document())?;
    let per_lobe: Vec<usize> = nuq_lobe_grids(a.bits, &profile)?.iter().map(|g| g.len()).collect();
    println!("total_codewords: {}", tx.len());
    println!("codewords_per_lobe: {per_lobe:?}");
    println!("bits_per_index: {}", tx.bits_per_index());
    println!("equivalent_bits: {b_hat:.4}");
    println!("wrote {} and {}", a.out.display(), rx_path.display());
    Ok(())
}

fn cmd_design(a: DesignArgs) -> Result<(), Failure> {
    let cfg = a.scenario.load()?;
    let (profile, ch) = draw_realization(&cfg, a.trial)?;
    let n_s = cfg.n_s();
    let (set, bits) = match a.structure {
        DesignScheme::Full => {
            let (t, r) = build_nuq_codebook_full(cfg.n_t, cfg.n_r, cfg.b, &profile)?;
            (nuq_hyp_full(&ch, &t, &r, cfg.n_rf_t, cfg.n_rf_r)?, feedback_bits(&t, n_s)?)
        }
        DesignScheme::Sub => {
            if cfg.n_rf_t != cfg.n_rf_r {
                return Err(Error::InvalidConfiguration(
                    "sub-connected design needs n_rf_t == n_rf_r".into(),
                )
                .into());
            }
            let layout = SubArrayLayout::new(cfg.n_t, cfg.n_r, cfg.n_rf_t)?;
            let (t, r) = build_nuq_codebook_sub(cfg.n_t, cfg.n_r, cfg.n_rf_t, cfg.b, &profile)?;
            (nuq_hyp_sub(&ch, &t, &r, &layout)?, feedback_bits(&t, n_s)?)
        }
        DesignScheme::Omp => {
            let t = build_uq_codebook(cfg.n_t, cfg.b)?;
            let r = build_uq_codebook(cfg.n_r, cfg.b)?;
            (
                uq_omp_hybrid(&ch.h, &t, &r, cfg.n_rf_t, cfg.n_rf_r, n_s)?,
                feedback_bits(&t, cfg.n_rf_t)?,
            )
        }
    };
    let se = spectral_efficiency(&ch.h, &set, LinkBudget::new(a.snr_db, n_s)?)?;
    println!("seed: {}", cfg.seed);
    println!("trial: {}", a.trial);
    println!("lobe_offset_rad: {:.6}", profile.offset());
    println!("selected_tx: {:?}", set.selected_tx);
    println!("selected_rx: {:?}", set.selected_rx);
    println!("feedback_bits: {bits}");
    println!("n_s: {n_s}");
    println!("transmit_power: {:.9}", set.transmit_power());
    println!("rank_deficient: {}", set.rank_deficient);
    println!("spectral_efficiency: {se:.6} bits/s/Hz at {} dB", a.snr_db);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let axis: SweepAxis = a.axis.parse()?;
    let cfg = a.scenario.load()?;
    let records = sweep(&cfg, axis, &a.values)?;
    write_sweep_results(&records, &a.out)?;
    if let Some(j) = &a.json {
        write_results_json(&records, j)?;
    }
    println!("wrote {} rows to {}", records.len(), a.out.display());
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<(), Failure> {
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let scenario = ScenarioArgs {
        config: None,
        overrides: a.overrides,
        seed: a.seed,
        trials: a.trials,
    };
    let mut curves = presets::curves(a.figure);
    // apply overrides and validate everything before the first run
    for c in &mut curves {
        scenario.apply(&mut c.config)?;
        match &c.sweep {
            None => c.config.validate()?,
            Some((axis, values)) => {
                sweep_cells(&c.config, *axis, values)?;
            }
        }
    }
    for c in &curves {
        let path = a.out_dir.join(format!("{}.csv", c.name));
        match &c.sweep {
            None => write_results(&run_scenario(&c.config)?, &path)?,
            Some((axis, values)) => write_sweep_results(&sweep(&c.config, *axis, values)?, &path)?,
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}
