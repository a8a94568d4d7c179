//! Hybrid precoding for the full-connected structure.
//!
//! [`nuq_hyp_full`] picks, for every lobe, one codeword of the lobe's NUQ
//! sub-codebook per subpath and then diagonalizes each lobe's effective
//! channel digitally. [`uq_omp`] is the orthogonal-matching-pursuit baseline
//! over a uniform codebook and [`fully_digital`] is the unconstrained SVD
//! reference.

use nalgebra::DMatrix;

use crate::channel::ChannelRealization;
use crate::codebooks::{Codebook, CodebookStructure};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, frobenius_sq, hstack, least_squares, row_energy, thin_svd, ThinSvd};
use crate::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderStructure {
    FullArray,
    SubArrayBlock,
    /// Fully digital: `f_rf`/`w_rf` hold the complete precoder and combiner
    /// and the baseband stages are identities.
    Unconstrained,
}

/// Analog and digital stages at both ends of the link.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub f_rf: CMatrix,
    pub f_bb: CMatrix,
    pub w_rf: CMatrix,
    pub w_bb: CMatrix,
    /// Codebook column behind each nonzero column of `f_rf`, in order.
    pub selected_tx: Vec<usize>,
    pub selected_rx: Vec<usize>,
    pub structure: PrecoderStructure,
    /// Set when a least-squares step met dependent analog columns.
    pub rank_deficient: bool,
}

impl PrecoderSet {
    pub fn n_s(&self) -> usize {
        self.f_bb.ncols()
    }

    /// `F = F_RF F_BB`.
    pub fn precoder(&self) -> CMatrix {
        &self.f_rf * &self.f_bb
    }

    /// `W = W_RF W_BB`.
    pub fn combiner(&self) -> CMatrix {
        &self.w_rf * &self.w_bb
    }

    /// `‖F_RF F_BB‖_F²`.
    pub fn transmit_power(&self) -> f64 {
        frobenius_sq(&self.precoder())
    }
}

pub fn fully_digital(h: &CMatrix, n_s: usize) -> Result<PrecoderSet> {
    check_streams(h, n_s)?;
    Ok(fully_digital_from_svd(&thin_svd(h), n_s))
}

fn check_streams(h: &CMatrix, n_s: usize) -> Result<()> {
    let max = h.nrows().min(h.ncols());
    if n_s == 0 || n_s > max {
        return Err(Error::invalid_arg(format!(
            "number of streams must be in 1..={max}, got {n_s}"
        )));
    }
    Ok(())
}

pub(crate) fn fully_digital_from_svd(svd: &ThinSvd, n_s: usize) -> PrecoderSet {
    PrecoderSet {
        f_rf: svd.v.columns(0, n_s).into_owned(),
        f_bb: CMatrix::identity(n_s, n_s),
        w_rf: svd.u.columns(0, n_s).into_owned(),
        w_bb: CMatrix::identity(n_s, n_s),
        selected_tx: Vec::new(),
        selected_rx: Vec::new(),
        structure: PrecoderStructure::Unconstrained,
        rank_deficient: false,
    }
}

pub(crate) fn check_codebook(
    cb: &Codebook,
    n_antennas: usize,
    lobes: usize,
    structure: CodebookStructure,
    side: &str,
) -> Result<()> {
    if cb.structure() != structure {
        return Err(Error::invalid_arg(format!(
            "{side} codebook has structure {:?}, expected {structure:?}",
            cb.structure()
        )));
    }
    if cb.n_antennas() != n_antennas {
        return Err(Error::invalid_arg(format!(
            "{side} codebook is for {} antennas, channel has {n_antennas}",
            cb.n_antennas()
        )));
    }
    if cb.lobes().len() != lobes {
        return Err(Error::invalid_arg(format!(
            "{side} codebook has {} lobes, channel has {lobes}",
            cb.lobes().len()
        )));
    }
    Ok(())
}

/// Baseband stage shared by both NUQ designs. Each lobe's effective channel
/// `W_i^H H F_i` is SVD-factored; `F_BB` and `W_BB` collect the right and
/// left singular vectors block-diagonally and `F_BB` is scaled so the total
/// transmit power equals the number of streams.
pub(crate) struct DigitalStage {
    pub f_rf: CMatrix,
    pub f_bb: CMatrix,
    pub w_rf: CMatrix,
    pub w_bb: CMatrix,
}

pub(crate) fn digital_stage(
    h: &CMatrix,
    f_blocks: &[CMatrix],
    w_blocks: &[CMatrix],
) -> Result<DigitalStage> {
    let mut f_bb = Vec::with_capacity(f_blocks.len());
    let mut w_bb = Vec::with_capacity(w_blocks.len());
    for (f, w) in f_blocks.iter().zip(w_blocks) {
        let h_eq = w.ad_mul(&(h * f));
        let svd = thin_svd(&h_eq);
        f_bb.push(svd.v);
        w_bb.push(svd.u);
    }
    let f_rf = hstack(f_blocks, h.ncols());
    let w_rf = hstack(w_blocks, h.nrows());
    let mut f_bb = block_diag(&f_bb);
    let w_bb = block_diag(&w_bb);
    let norm = (&f_rf * &f_bb).norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numerical(format!(
            "cannot normalize hybrid precoder with norm {norm}"
        )));
    }
    f_bb *= crate::C64::from((f_bb.ncols() as f64).sqrt() / norm);
    Ok(DigitalStage {
        f_rf,
        f_bb,
        w_rf,
        w_bb,
    })
}

/// Injective map from subpaths (columns of `scores`) to candidates (rows)
/// maximizing the total score, with ties resolved toward the
/// lexicographically smallest index tuple.
///
/// Only the `Q` best candidates of each subpath can appear in an optimal
/// assignment: a subpath whose pick lies outside its own top `Q` always has
/// a free top-`Q` candidate at least as good. That caps the search at `Q^Q`
/// tuples regardless of the codebook size.
pub(crate) fn best_assignment(scores: &DMatrix<f64>) -> Option<Vec<usize>> {
    let (m, q) = scores.shape();
    if q == 0 || m < q {
        return None;
    }
    let candidates: Vec<Vec<usize>> = (0..q)
        .map(|col| {
            let mut rows: Vec<usize> = (0..m).collect();
            rows.sort_by(|&a, &b| {
                scores[(b, col)]
                    .partial_cmp(&scores[(a, col)])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            rows.truncate(q);
            rows
        })
        .collect();

    struct Search<'a> {
        scores: &'a DMatrix<f64>,
        candidates: &'a [Vec<usize>],
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn descend(&mut self, col: usize, acc: f64) {
            if col == self.candidates.len() {
                let better = match &self.best {
                    None => true,
                    Some((s, t)) => acc > *s || (acc == *s && self.current < *t),
                };
                if better {
                    self.best = Some((acc, self.current.clone()));
                }
                return;
            }
            for k in 0..self.candidates[col].len() {
                let row = self.candidates[col][k];
                if self.current.contains(&row) {
                    continue;
                }
                self.current.push(row);
                self.descend(col + 1, acc + self.scores[(row, col)]);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        scores,
        candidates: &candidates,
        current: Vec::with_capacity(q),
        best: None,
    };
    search.descend(0, 0.0);
    search.best.map(|(_, t)| t)
}

/// Picks lobe `lobe`'s codewords for the subpath responses in `refs`.
/// Returns global codebook column indices in subpath order.
fn select_in_lobe(cb: &Codebook, lobe: usize, refs: &CMatrix) -> Result<Vec<usize>> {
    let block = cb
        .lobe_block(lobe)
        .ok_or_else(|| Error::invalid_arg(format!("codebook has no grid for lobe {lobe}")))?;
    let q = refs.ncols();
    if block.columns < q {
        return Err(Error::invalid_config(format!(
            "lobe {lobe} has {} codewords, fewer than Q = {q}",
            block.columns
        )));
    }
    let cols = cb.codewords().columns(block.first_column, block.columns);
    let scores = cols.ad_mul(refs).map(|z| z.norm_sqr());
    let local = best_assignment(&scores).expect("enough candidates checked above");
    Ok(local.into_iter().map(|m| block.first_column + m).collect())
}

pub(crate) fn gather_columns(cb: &Codebook, indices: &[usize]) -> CMatrix {
    CMatrix::from_fn(cb.n_antennas(), indices.len(), |r, c| cb.codewords()[(r, indices[c])])
}

/// NUQ hybrid precoder and combiner for the full-connected structure.
///
/// Exactly `P·Q` RF chains are driven at each end; chains beyond that stay
/// idle and are not represented in the result.
pub fn nuq_hyp_full(
    channel: &ChannelRealization,
    cb_t: &Codebook,
    cb_r: &Codebook,
    n_rf_t: usize,
    n_rf_r: usize,
) -> Result<PrecoderSet> {
    let (p, q) = (channel.lobes(), channel.subpaths());
    check_codebook(cb_t, channel.n_t(), p, CodebookStructure::FullArray, "transmit")?;
    check_codebook(cb_r, channel.n_r(), p, CodebookStructure::FullArray, "receive")?;
    let paths = p * q;
    if paths > n_rf_t.min(n_rf_r) {
        return Err(Error::invalid_config(format!(
            "P*Q = {paths} exceeds the RF chain budget ({n_rf_t} transmit, {n_rf_r} receive)"
        )));
    }
    let mut selected_tx = Vec::with_capacity(paths);
    let mut selected_rx = Vec::with_capacity(paths);
    let mut f_blocks = Vec::with_capacity(p);
    let mut w_blocks = Vec::with_capacity(p);
    for lobe in 0..p {
        let st = select_in_lobe(cb_t, lobe, &channel.tx_lobe(lobe))?;
        let sr = select_in_lobe(cb_r, lobe, &channel.rx_lobe(lobe))?;
        f_blocks.push(gather_columns(cb_t, &st));
        w_blocks.push(gather_columns(cb_r, &sr));
        selected_tx.extend(st);
        selected_rx.extend(sr);
    }
    let d = digital_stage(&channel.h, &f_blocks, &w_blocks)?;
    Ok(PrecoderSet {
        f_rf: d.f_rf,
        f_bb: d.f_bb,
        w_rf: d.w_rf,
        w_bb: d.w_bb,
        selected_tx,
        selected_rx,
        structure: PrecoderStructure::FullArray,
        rank_deficient: false,
    })
}

/// Output of one OMP run.
#[derive(Debug, Clone)]
pub struct OmpResult {
    pub f_rf: CMatrix,
    pub f_bb: CMatrix,
    /// Dictionary columns in the order they were picked.
    pub selected: Vec<usize>,
    pub rank_deficient: bool,
}

/// OMP approximation of `f_opt` by `n_rf` codebook columns, with the
/// result scaled to `‖F_RF F_BB‖_F² = Ns`.
pub fn uq_omp(f_opt: &CMatrix, dictionary: &Codebook, n_rf: usize) -> Result<OmpResult> {
    omp(f_opt, dictionary.codewords(), n_rf, true)
}

/// Greedy OMP over the columns of `dictionary`. Each step adds the column
/// with the largest correlation energy against the current residual, then
/// re-solves the least-squares baseband stage against `f_opt`.
pub fn omp(
    f_opt: &CMatrix,
    dictionary: &CMatrix,
    n_rf: usize,
    normalize_power: bool,
) -> Result<OmpResult> {
    if dictionary.nrows() != f_opt.nrows() {
        return Err(Error::invalid_arg(format!(
            "dictionary has {} rows, reference has {}",
            dictionary.nrows(),
            f_opt.nrows()
        )));
    }
    if n_rf == 0 || n_rf > dictionary.ncols() {
        return Err(Error::invalid_arg(format!(
            "OMP needs 1..={} RF chains, got {n_rf}",
            dictionary.ncols()
        )));
    }
    let mut residual = f_opt.clone();
    let mut selected = Vec::with_capacity(n_rf);
    let mut rank_deficient = false;
    let mut f_rf = CMatrix::zeros(f_opt.nrows(), 0);
    let mut f_bb = CMatrix::zeros(0, f_opt.ncols());
    for _ in 0..n_rf {
        let energy = row_energy(&dictionary.ad_mul(&residual));
        let mut k = 0;
        for (j, &e) in energy.iter().enumerate() {
            if e > energy[k] {
                k = j;
            }
        }
        selected.push(k);
        f_rf = CMatrix::from_fn(f_opt.nrows(), selected.len(), |r, c| dictionary[(r, selected[c])]);
        let (x, flagged) = least_squares(&f_rf, f_opt);
        rank_deficient |= flagged;
        f_bb = x;
        residual = f_opt - &f_rf * &f_bb;
        let n = residual.norm();
        if n > 0.0 {
            residual /= crate::C64::from(n);
        }
    }
    if normalize_power {
        let norm = (&f_rf * &f_bb).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical(format!(
                "cannot normalize OMP precoder with norm {norm}"
            )));
        }
        f_bb *= crate::C64::from((f_opt.ncols() as f64).sqrt() / norm);
    }
    Ok(OmpResult {
        f_rf,
        f_bb,
        selected,
        rank_deficient,
    })
}

/// UQ-OMP hybrid design: OMP against the first `n_s` right singular vectors
/// of `h` at the transmitter (power-normalized) and the first `n_s` left
/// singular vectors at the receiver (not normalized).
pub fn uq_omp_hybrid(
    h: &CMatrix,
    cb_t: &Codebook,
    cb_r: &Codebook,
    n_rf_t: usize,
    n_rf_r: usize,
    n_s: usize,
) -> Result<PrecoderSet> {
    check_streams(h, n_s)?;
    uq_omp_hybrid_from_svd(&thin_svd(h), cb_t, cb_r, n_rf_t, n_rf_r, n_s)
}

pub(crate) fn uq_omp_hybrid_from_svd(
    svd: &ThinSvd,
    cb_t: &Codebook,
    cb_r: &Codebook,
    n_rf_t: usize,
    n_rf_r: usize,
    n_s: usize,
) -> Result<PrecoderSet> {
    let f_opt = svd.v.columns(0, n_s).into_owned();
    let w_opt = svd.u.columns(0, n_s).into_owned();
    let tx = omp(&f_opt, cb_t.codewords(), n_rf_t, true)?;
    let rx = omp(&w_opt, cb_r.codewords(), n_rf_r, false)?;
    Ok(PrecoderSet {
        f_rf: tx.f_rf,
        f_bb: tx.f_bb,
        w_rf: rx.f_rf,
        w_bb: rx.f_bb,
        selected_tx: tx.selected,
        selected_rx: rx.selected,
        structure: PrecoderStructure::FullArray,
        rank_deficient: tx.rank_deficient || rx.rank_deficient,
    })
}
