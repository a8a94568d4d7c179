//! Hybrid precoding for the sub-connected structure, where RF chain `k`
//! drives only antennas `k·N/N_RF .. (k+1)·N/N_RF`.

use std::ops::Range;

use crate::channel::ChannelRealization;
use crate::codebooks::{Codebook, CodebookStructure};
use crate::error::{Error, Result};
use crate::precoding_full::{check_codebook, digital_stage, gather_columns, PrecoderSet, PrecoderStructure};
use crate::CMatrix;

/// Partition of both arrays into `n_rf` equal contiguous windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubArrayLayout {
    n_rf: usize,
    n_t_sub: usize,
    n_r_sub: usize,
    tx_windows: Vec<Range<usize>>,
    rx_windows: Vec<Range<usize>>,
}

impl SubArrayLayout {
    pub fn new(n_t: usize, n_r: usize, n_rf: usize) -> Result<Self> {
        if n_rf == 0 {
            return Err(Error::invalid_config("sub-connected layout needs at least one RF chain"));
        }
        for (side, n) in [("transmit", n_t), ("receive", n_r)] {
            if n == 0 || n % n_rf != 0 {
                return Err(Error::invalid_config(format!(
                    "{side} array of {n} antennas cannot be split into {n_rf} equal sub-arrays"
                )));
            }
        }
        let windows = |n: usize| (0..n_rf).map(|k| k * n / n_rf..(k + 1) * n / n_rf).collect();
        Ok(SubArrayLayout {
            n_rf,
            n_t_sub: n_t / n_rf,
            n_r_sub: n_r / n_rf,
            tx_windows: windows(n_t),
            rx_windows: windows(n_r),
        })
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    pub fn n_t_sub(&self) -> usize {
        self.n_t_sub
    }

    pub fn n_r_sub(&self) -> usize {
        self.n_r_sub
    }

    pub fn n_t(&self) -> usize {
        self.n_t_sub * self.n_rf
    }

    pub fn n_r(&self) -> usize {
        self.n_r_sub * self.n_rf
    }

    pub fn tx_windows(&self) -> &[Range<usize>] {
        &self.tx_windows
    }

    pub fn rx_windows(&self) -> &[Range<usize>] {
        &self.rx_windows
    }
}

/// Best codeword of slot `(lobe, subpath)` against the full-array response
/// `reference`. Candidates vanish outside their window, so only the window
/// rows enter the projection.
fn select_in_slot(
    cb: &Codebook,
    lobe: usize,
    subpath: usize,
    window: &Range<usize>,
    reference: &CMatrix,
    column: usize,
) -> Result<usize> {
    let block = cb.slot_block(lobe, subpath).ok_or_else(|| {
        Error::invalid_config(format!("codebook has no block for lobe {lobe}, subpath {subpath}"))
    })?;
    if block.window() != *window {
        return Err(Error::invalid_config(format!(
            "codebook block for lobe {lobe}, subpath {subpath} covers antennas {:?}, layout expects {window:?}",
            block.window()
        )));
    }
    let seg = reference.view((window.start, column), (window.len(), 1));
    let cols = cb
        .codewords()
        .view((window.start, block.first_column), (window.len(), block.columns));
    let scores = cols.ad_mul(&seg);
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (m, z) in scores.iter().enumerate() {
        let s = z.norm_sqr();
        if s > best_score {
            best = m;
            best_score = s;
        }
    }
    Ok(block.first_column + best)
}

/// NUQ hybrid precoder and combiner for the sub-connected structure.
///
/// Subpath `q` of lobe `i` is served by RF chain `i·Q + q`. The result keeps
/// all `n_rf` analog columns; chains past `P·Q` carry zero columns and the
/// matching rows of `F_BB`/`W_BB` are zero.
pub fn nuq_hyp_sub(
    channel: &ChannelRealization,
    cb_t: &Codebook,
    cb_r: &Codebook,
    layout: &SubArrayLayout,
) -> Result<PrecoderSet> {
    let (p, q) = (channel.lobes(), channel.subpaths());
    if layout.n_t() != channel.n_t() || layout.n_r() != channel.n_r() {
        return Err(Error::invalid_config(format!(
            "layout is for {}x{} arrays, channel is {}x{}",
            layout.n_t(),
            layout.n_r(),
            channel.n_t(),
            channel.n_r()
        )));
    }
    let paths = p * q;
    if paths > layout.n_rf() {
        return Err(Error::invalid_config(format!(
            "P*Q = {paths} paths exceed {} RF chains",
            layout.n_rf()
        )));
    }
    for (cb, n, side) in [(cb_t, channel.n_t(), "transmit"), (cb_r, channel.n_r(), "receive")] {
        check_codebook(cb, n, p, CodebookStructure::SubArrayBlock, side)
            .map_err(|e| Error::invalid_config(e.to_string()))?;
    }

    let mut selected_tx = Vec::with_capacity(paths);
    let mut selected_rx = Vec::with_capacity(paths);
    let mut f_blocks = Vec::with_capacity(p);
    let mut w_blocks = Vec::with_capacity(p);
    for lobe in 0..p {
        let mut st = Vec::with_capacity(q);
        let mut sr = Vec::with_capacity(q);
        for sub in 0..q {
            let k = lobe * q + sub;
            st.push(select_in_slot(cb_t, lobe, sub, &layout.tx_windows()[k], &channel.a_t, k)?);
            sr.push(select_in_slot(cb_r, lobe, sub, &layout.rx_windows()[k], &channel.a_r, k)?);
        }
        f_blocks.push(gather_columns(cb_t, &st));
        w_blocks.push(gather_columns(cb_r, &sr));
        selected_tx.extend(st);
        selected_rx.extend(sr);
    }
    let d = digital_stage(&channel.h, &f_blocks, &w_blocks)?;
    let n_rf = layout.n_rf();
    Ok(PrecoderSet {
        f_rf: pad_columns(d.f_rf, n_rf),
        f_bb: pad_rows(d.f_bb, n_rf),
        w_rf: pad_columns(d.w_rf, n_rf),
        w_bb: pad_rows(d.w_bb, n_rf),
        selected_tx,
        selected_rx,
        structure: PrecoderStructure::SubArrayBlock,
        rank_deficient: false,
    })
}

fn pad_columns(m: CMatrix, cols: usize) -> CMatrix {
    let extra = cols - m.ncols();
    let at = m.ncols();
    m.insert_columns(at, extra, crate::C64::new(0.0, 0.0))
}

fn pad_rows(m: CMatrix, rows: usize) -> CMatrix {
    let extra = rows - m.nrows();
    let at = m.nrows();
    m.insert_rows(at, extra, crate::C64::new(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, sample_lobe_profile, SpatialLobeProfile};
    use crate::codebooks::{build_nuq_codebook_full, build_nuq_codebook_sub};
    use crate::precoding_full::nuq_hyp_full;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_windows() {
        let l = SubArrayLayout::new(144, 36, 6).unwrap();
        assert_eq!(l.n_t_sub(), 24);
        assert_eq!(l.n_r_sub(), 6);
        assert_eq!(l.tx_windows()[5], 120..144);
        assert!(SubArrayLayout::new(144, 36, 5).is_err());
        assert!(SubArrayLayout::new(144, 36, 0).is_err());
    }

    #[test]
    fn one_window_matches_full_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let profile = SpatialLobeProfile::with_offset(1, 1, 4.0).unwrap();
        let ch = generate_channel(&profile, 16, 8, &mut rng).unwrap();
        let (st, sr) = build_nuq_codebook_sub(16, 8, 1, 5, &profile).unwrap();
        let (ft, fr) = build_nuq_codebook_full(16, 8, 5, &profile).unwrap();
        let sub = nuq_hyp_sub(&ch, &st, &sr, &SubArrayLayout::new(16, 8, 1).unwrap()).unwrap();
        let full = nuq_hyp_full(&ch, &ft, &fr, 1, 1).unwrap();
        assert_eq!(sub.selected_tx, full.selected_tx);
        assert_eq!(sub.selected_rx, full.selected_rx);
    }

    #[test]
    fn unused_chains_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let profile = sample_lobe_profile(2, 1, &mut rng).unwrap();
        let ch = generate_channel(&profile, 32, 8, &mut rng).unwrap();
        let layout = SubArrayLayout::new(32, 8, 4).unwrap();
        let (cb_t, cb_r) = build_nuq_codebook_sub(32, 8, 4, 5, &profile).unwrap();
        let set = nuq_hyp_sub(&ch, &cb_t, &cb_r, &layout).unwrap();
        assert_eq!(set.f_rf.shape(), (32, 4));
        assert_eq!(set.f_bb.shape(), (4, 2));
        for k in 2..4 {
            assert_eq!(set.f_rf.column(k).norm(), 0.0);
            assert_eq!(set.w_rf.column(k).norm(), 0.0);
            assert_eq!(set.f_bb.row(k).norm(), 0.0);
        }
        assert!((set.transmit_power() - 2.0).abs() < 1e-9);
        for k in 0..2 {
            for (r, z) in set.f_rf.column(k).iter().enumerate() {
                if layout.tx_windows()[k].contains(&r) {
                    assert!((z.norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
                } else {
                    assert_eq!(z.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_too_many_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let profile = sample_lobe_profile(2, 2, &mut rng).unwrap();
        let ch = generate_channel(&profile, 8, 8, &mut rng).unwrap();
        let (cb_t, cb_r) = build_nuq_codebook_sub(8, 8, 4, 3, &profile).unwrap();
        let small = SubArrayLayout::new(8, 8, 2).unwrap();
        assert!(matches!(
            nuq_hyp_sub(&ch, &cb_t, &cb_r, &small),
            Err(Error::InvalidConfiguration(_))
        ));
    }
}
