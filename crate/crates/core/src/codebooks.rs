//! Beamsteering codebooks.
//!
//! A uniform (UQ) codebook spreads `2^b` steering angles over the whole
//! circle. A non-uniform (NUQ) codebook spends the same `2^b` codewords only
//! on the lobes' quantized coverages, so each lobe is sampled more finely:
//! with total quantized range `S` the grid step is `S / 2^b`, which is the
//! step a uniform codebook would need `b - log2(S / 2π)` bits to reach.
//!
//! Codewords are apportioned to lobes in proportion to their quantized range
//! (largest remainder, ties to the lower lobe index) and sit at the centres
//! of equal cells tiling each coverage interval.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channel::{wrap_angle, windowed_response, SpatialLobeProfile, TWO_PI};
use crate::error::{CoverageConstraint, Error, Result};
use crate::precoding_sub::SubArrayLayout;
use crate::{CMatrix, CVector};

/// Largest supported number of quantization bits.
pub const MAX_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookStructure {
    /// Every codeword drives the whole array.
    FullArray,
    /// Every codeword is supported on one sub-array window only.
    SubArrayBlock,
}

/// Quantized angles of one lobe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeGrid {
    pub lobe_index: usize,
    pub angles: Vec<f64>,
    /// Spacing between neighbouring angles.
    pub delta: f64,
}

impl LobeGrid {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// A contiguous run of codebook columns sharing one lobe grid and one
/// antenna window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBlock {
    pub lobe: usize,
    /// Subpath slot inside the lobe; only set for sub-array codebooks.
    pub subpath: Option<usize>,
    pub window_start: usize,
    pub window_len: usize,
    pub first_column: usize,
    pub columns: usize,
}

impl ColumnBlock {
    pub fn column_range(&self) -> Range<usize> {
        self.first_column..self.first_column + self.columns
    }

    pub fn window(&self) -> Range<usize> {
        self.window_start..self.window_start + self.window_len
    }
}

#[derive(Debug, Clone)]
pub struct Codebook {
    structure: CodebookStructure,
    n_antennas: usize,
    lobes: Vec<LobeGrid>,
    blocks: Vec<ColumnBlock>,
    codewords: CMatrix,
    bits_per_index: u32,
}

impl Codebook {
    fn assemble(
        structure: CodebookStructure,
        n_antennas: usize,
        lobes: Vec<LobeGrid>,
        blocks: Vec<ColumnBlock>,
    ) -> Self {
        let total: usize = blocks.iter().map(|b| b.columns).sum();
        // the window of a sub-array column is fixed by its RF chain, so an
        // index only has to name one of the distinct grid angles
        let distinct: usize = lobes.iter().map(|g| g.len()).sum();
        let mut codewords = CMatrix::zeros(n_antennas, total);
        for block in &blocks {
            let grid = &lobes[block.lobe];
            for (m, &angle) in grid.angles.iter().enumerate() {
                let segment =
                    windowed_response(angle, block.window_start, block.window_len, block.window_len);
                codewords
                    .view_mut((block.window_start, block.first_column + m), (block.window_len, 1))
                    .copy_from(&segment);
            }
        }
        Codebook {
            structure,
            n_antennas,
            lobes,
            blocks,
            codewords,
            bits_per_index: index_bits(distinct),
        }
    }

    pub fn structure(&self) -> CodebookStructure {
        self.structure
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn lobes(&self) -> &[LobeGrid] {
        &self.lobes
    }

    pub fn blocks(&self) -> &[ColumnBlock] {
        &self.blocks
    }

    /// N x M matrix of unit-norm codewords.
    pub fn codewords(&self) -> &CMatrix {
        &self.codewords
    }

    pub fn len(&self) -> usize {
        self.codewords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.ncols() == 0
    }

    /// Bits of one fed-back codeword index: `ceil(log2)` of the number of
    /// distinct grid angles.
    pub fn bits_per_index(&self) -> u32 {
        self.bits_per_index
    }

    pub fn column(&self, j: usize) -> CVector {
        self.codewords.column(j).into_owned()
    }

    /// Steering angle behind column `j`.
    pub fn angle_of(&self, j: usize) -> f64 {
        let block = self
            .blocks
            .iter()
            .find(|b| b.column_range().contains(&j))
            .expect("column index within codebook");
        self.lobes[block.lobe].angles[j - block.first_column]
    }

    /// Columns built from lobe `i`'s grid on the full array.
    pub fn lobe_block(&self, lobe: usize) -> Option<&ColumnBlock> {
        self.blocks
            .iter()
            .find(|b| b.lobe == lobe && b.subpath.is_none())
    }

    /// Columns for subpath slot `(lobe, subpath)` of a sub-array codebook.
    pub fn slot_block(&self, lobe: usize, subpath: usize) -> Option<&ColumnBlock> {
        self.blocks
            .iter()
            .find(|b| b.lobe == lobe && b.subpath == Some(subpath))
    }

    pub fn to_document(&self) -> CodebookDocument {
        let codewords = (0..self.len())
            .map(|j| self.codewords.column(j).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        CodebookDocument {
            structure: self.structure,
            n_antennas: self.n_antennas,
            total_codewords: self.len(),
            bits_per_index: self.bits_per_index,
            lobes: self.lobes.clone(),
            blocks: self.blocks.clone(),
            codewords,
        }
    }
}

/// JSON layout of a codebook. `codewords[j]` holds column `j` as
/// `[re, im]` pairs, one per antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub structure: CodebookStructure,
    pub n_antennas: usize,
    pub total_codewords: usize,
    pub bits_per_index: u32,
    pub lobes: Vec<LobeGrid>,
    pub blocks: Vec<ColumnBlock>,
    pub codewords: Vec<Vec<[f64; 2]>>,
}

/// Bits needed for a flat index over `m` codewords.
pub fn index_bits(m: usize) -> u32 {
    if m <= 1 {
        0
    } else {
        usize::BITS - (m - 1).leading_zeros()
    }
}

fn check_bits(b: u32) -> Result<()> {
    if b == 0 || b > MAX_BITS {
        return Err(Error::invalid_arg(format!(
            "quantization bits must be in 1..={MAX_BITS}, got {b}"
        )));
    }
    Ok(())
}

/// Uniform grid angles `2π·i / 2^b`, `i = 0..2^b`.
pub fn uq_angles(b: u32) -> Result<Vec<f64>> {
    check_bits(b)?;
    let m = 1usize << b;
    Ok((0..m).map(|i| TWO_PI * i as f64 / m as f64).collect())
}

pub fn build_uq_codebook(n_antennas: usize, b: u32) -> Result<Codebook> {
    if n_antennas == 0 {
        return Err(Error::invalid_arg("codebook needs at least one antenna"));
    }
    let angles = uq_angles(b)?;
    let m = angles.len();
    let grid = LobeGrid {
        lobe_index: 0,
        angles,
        delta: TWO_PI / m as f64,
    };
    let block = ColumnBlock {
        lobe: 0,
        subpath: None,
        window_start: 0,
        window_len: n_antennas,
        first_column: 0,
        columns: m,
    };
    Ok(Codebook::assemble(
        CodebookStructure::FullArray,
        n_antennas,
        vec![grid],
        vec![block],
    ))
}

/// Splits `total` codewords over the lobes in proportion to their ranges.
fn apportion(total: usize, ranges: &[f64]) -> Vec<usize> {
    let sum: f64 = ranges.iter().sum();
    let quotas: Vec<f64> = ranges.iter().map(|r| r / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ranges.len()).collect();
    // stable sort keeps the lower lobe first on equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Per-lobe quantized angles for `b` bits over the profile's coverages.
pub fn nuq_lobe_grids(b: u32, profile: &SpatialLobeProfile) -> Result<Vec<LobeGrid>> {
    check_bits(b)?;
    profile.validate()?;
    let total = 1usize << b;
    let p = profile.lobes();
    if total < p {
        return Err(Error::invalid_config(format!(
            "2^b = {total} codewords cannot cover {p} lobes"
        )));
    }
    let counts = apportion(total, profile.quant_ranges());
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (lo, _) = profile.quant_coverage(i);
            let delta = profile.quant_ranges()[i] / n as f64;
            let angles = (0..n)
                .map(|m| wrap_angle(lo + (m as f64 + 0.5) * delta))
                .collect();
            LobeGrid {
                lobe_index: i,
                angles,
                delta,
            }
        })
        .collect())
}

fn full_from_grids(n_antennas: usize, grids: Vec<LobeGrid>) -> Codebook {
    let mut blocks = Vec::with_capacity(grids.len());
    let mut next = 0;
    for g in &grids {
        blocks.push(ColumnBlock {
            lobe: g.lobe_index,
            subpath: None,
            window_start: 0,
            window_len: n_antennas,
            first_column: next,
            columns: g.len(),
        });
        next += g.len();
    }
    Codebook::assemble(CodebookStructure::FullArray, n_antennas, grids, blocks)
}

/// Transmitter and receiver NUQ codebooks for the full-connected structure.
/// Columns are the concatenation of the lobes' grids in lobe order.
pub fn build_nuq_codebook_full(
    n_t: usize,
    n_r: usize,
    b: u32,
    profile: &SpatialLobeProfile,
) -> Result<(Codebook, Codebook)> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::invalid_arg("codebook needs at least one antenna"));
    }
    let grids = nuq_lobe_grids(b, profile)?;
    Ok((full_from_grids(n_t, grids.clone()), full_from_grids(n_r, grids)))
}

fn sub_from_grids(
    n_antennas: usize,
    windows: &[Range<usize>],
    subpaths: usize,
    grids: Vec<LobeGrid>,
) -> Codebook {
    let mut blocks = Vec::new();
    let mut next = 0;
    for g in &grids {
        for q in 0..subpaths {
            let w = &windows[g.lobe_index * subpaths + q];
            blocks.push(ColumnBlock {
                lobe: g.lobe_index,
                subpath: Some(q),
                window_start: w.start,
                window_len: w.len(),
                first_column: next,
                columns: g.len(),
            });
            next += g.len();
        }
    }
    Codebook::assemble(CodebookStructure::SubArrayBlock, n_antennas, grids, blocks)
}

/// Transmitter and receiver NUQ codebooks for the sub-connected structure.
///
/// Subpath slot `(i, q)` owns sub-array window `i·Q + q`; its block of
/// columns is lobe `i`'s grid steered on that window only. Windows beyond
/// `P·Q` get no columns.
pub fn build_nuq_codebook_sub(
    n_t: usize,
    n_r: usize,
    n_rf: usize,
    b: u32,
    profile: &SpatialLobeProfile,
) -> Result<(Codebook, Codebook)> {
    let layout = SubArrayLayout::new(n_t, n_r, n_rf)?;
    let paths = profile.lobes() * profile.subpaths();
    if paths > n_rf {
        return Err(Error::invalid_config(format!(
            "P*Q = {paths} paths exceed {n_rf} RF chains"
        )));
    }
    let grids = nuq_lobe_grids(b, profile)?;
    let q = profile.subpaths();
    Ok((
        sub_from_grids(n_t, layout.tx_windows(), q, grids.clone()),
        sub_from_grids(n_r, layout.rx_windows(), q, grids),
    ))
}

/// Bits a uniform codebook would need to match the NUQ grid density:
/// `b - log2(Σ ranges / 2π)`.
pub fn equivalent_bits(b: u32, quant_ranges: &[f64]) -> Result<f64> {
    let total: f64 = quant_ranges.iter().sum();
    if quant_ranges.iter().any(|r| !r.is_finite()) || !(total > 0.0) {
        return Err(Error::invalid_arg(
            "quantized ranges must be finite with a positive sum",
        ));
    }
    if total > TWO_PI * (1.0 + 1e-12) {
        return Err(Error::InvalidProfile {
            constraint: CoverageConstraint::CoverageWithinCircle,
            detail: format!("quantized ranges sum to {total:.6} rad"),
        });
    }
    Ok(b as f64 - (total / TWO_PI).log2())
}

/// Bits fed back to report `n_selected_columns` codeword indices.
pub fn feedback_bits(codebook: &Codebook, n_selected_columns: usize) -> Result<u64> {
    if n_selected_columns == 0 {
        return Err(Error::invalid_arg("at least one selected column is required"));
    }
    Ok(n_selected_columns as u64 * codebook.bits_per_index() as u64)
}
