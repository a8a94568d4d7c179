//! Figure presets for `mmw reproduce`.
//!
//! Each curve is its own scenario with a single scheme. Curves of one figure
//! share the root seed, so a given trial index sees the same channel in
//! every curve whose array and lobe settings agree.

use clap::ValueEnum;
use mmw_core::{ScenarioConfig, Scheme, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

/// One output file.
pub struct Curve {
    pub name: String,
    pub config: ScenarioConfig,
    /// `None` runs the config over its SNR grid.
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
}

const FULL_SCHEMES: [Scheme; 3] = [Scheme::NuqFull, Scheme::UqOmp, Scheme::FullyDigital];
const SUB_SCHEMES: [Scheme; 3] = [Scheme::NuqSub, Scheme::UqOmp, Scheme::FullyDigital];

fn base(p: usize, q: usize, n_rf: usize, b: u32) -> ScenarioConfig {
    ScenarioConfig {
        p,
        q,
        n_rf_t: n_rf,
        n_rf_r: n_rf,
        b,
        ..ScenarioConfig::default()
    }
}

fn single(mut cfg: ScenarioConfig, scheme: Scheme) -> ScenarioConfig {
    cfg.schemes = vec![scheme];
    cfg
}

fn snr_curves(out: &mut Vec<Curve>, prefix: &str, cfg: &ScenarioConfig, schemes: &[Scheme]) {
    for &s in schemes {
        out.push(Curve {
            name: format!("{prefix}_{s}"),
            config: single(cfg.clone(), s),
            sweep: None,
        });
    }
}

fn axis_curves(
    out: &mut Vec<Curve>,
    prefix: &str,
    cfg: &ScenarioConfig,
    schemes: &[Scheme],
    axis: SweepAxis,
    values: &[f64],
) {
    for &s in schemes {
        let mut c = single(cfg.clone(), s);
        c.snr_grid_db = vec![0.0];
        out.push(Curve {
            name: format!("{prefix}_{s}"),
            config: c,
            sweep: Some((axis, values.to_vec())),
        });
    }
}

pub fn curves(fig: Figure) -> Vec<Curve> {
    let mut out = Vec::new();
    match fig {
        Figure::Fig4 => {
            for p in [2, 3, 4] {
                snr_curves(&mut out, &format!("fig4_P{p}"), &base(p, 2, 8, 8), &FULL_SCHEMES);
            }
        }
        Figure::Fig5 => {
            for q in [2, 3, 4] {
                snr_curves(&mut out, &format!("fig5_Q{q}"), &base(2, q, 8, 8), &FULL_SCHEMES);
            }
        }
        Figure::Fig6 => {
            for b in [6, 7, 8] {
                snr_curves(&mut out, &format!("fig6_b{b}"), &base(2, 2, 4, b), &[Scheme::NuqFull]);
            }
            for b in [7, 8, 9] {
                snr_curves(&mut out, &format!("fig6_b{b}"), &base(2, 2, 4, b), &[Scheme::UqOmp]);
            }
            snr_curves(&mut out, "fig6", &base(2, 2, 4, 8), &[Scheme::FullyDigital]);
        }
        Figure::Fig7 => {
            for p in [1, 2, 3] {
                let n_s = 2 * p;
                let values: Vec<f64> = (n_s..=8).map(|n| n as f64).collect();
                axis_curves(
                    &mut out,
                    &format!("fig7_P{p}"),
                    &base(p, 2, 8, 8),
                    &FULL_SCHEMES,
                    SweepAxis::RfChains,
                    &values,
                );
            }
        }
        Figure::Fig8 => {
            let cfg = base(2, 2, 4, 8);
            axis_curves(
                &mut out,
                "fig8_tx",
                &cfg,
                &FULL_SCHEMES,
                SweepAxis::TxAntennas,
                &[36.0, 64.0, 100.0, 144.0, 196.0, 256.0],
            );
            axis_curves(
                &mut out,
                "fig8_both",
                &cfg,
                &FULL_SCHEMES,
                SweepAxis::BothAntennas,
                &[64.0, 100.0, 144.0, 196.0, 256.0],
            );
        }
        Figure::Fig9 => {
            for p in [2, 3] {
                snr_curves(&mut out, &format!("fig9_P{p}"), &base(p, 1, p, 6), &SUB_SCHEMES);
            }
        }
        Figure::Fig10 => {
            for q in [1, 2] {
                snr_curves(&mut out, &format!("fig10_Q{q}"), &base(2, q, 2 * q, 6), &SUB_SCHEMES);
            }
        }
        Figure::Fig11 => {
            let values: Vec<f64> = (2..=10).map(f64::from).collect();
            axis_curves(&mut out, "fig11", &base(3, 1, 3, 6), &SUB_SCHEMES, SweepAxis::Bits, &values);
        }
    }
    out
}
