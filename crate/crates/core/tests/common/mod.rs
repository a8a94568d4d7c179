//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls the crate's selection or least-squares code; steering
//! vectors are rebuilt from the grid angles.

#![allow(dead_code)]

use std::f64::consts::PI;

use mmw_core::codebooks::Codebook;
use mmw_core::precoding_full::omp;
use mmw_core::{
    build_nuq_codebook_full, build_nuq_codebook_sub, build_uq_codebook, generate_channel,
    nuq_hyp_full, nuq_hyp_sub, sample_lobe_profile, CMatrix, SubArrayLayout, C64,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Entries `start..start+len` of a ULA response toward `angle`, scaled by
/// `1/sqrt(len)`.
pub fn steer(angle: f64, start: usize, len: usize) -> Vec<C64> {
    let s = angle.sin();
    (start..start + len)
        .map(|n| C64::from_polar(1.0 / (len as f64).sqrt(), PI * n as f64 * s))
        .collect()
}

pub fn proj_sq(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

fn column(m: &CMatrix, j: usize) -> Vec<C64> {
    m.column(j).iter().copied().collect()
}

/// Relative slack under which two objective values count as a tie.
pub const TIE_TOL: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleTally {
    pub instances: usize,
    pub checks: usize,
    /// Choices differing from the oracle's index but equal in objective.
    pub ties: usize,
    pub mismatches: usize,
}

impl OracleTally {
    fn record(&mut self, same_index: bool, same_value: bool) {
        self.checks += 1;
        if !same_index {
            if same_value {
                self.ties += 1;
            } else {
                self.mismatches += 1;
            }
        }
    }
}

/// Every injective assignment of `q` subpaths to `m` grid points, scored by
/// the total squared projection. Returns the lexicographically first best
/// tuple and its score.
pub fn exhaustive_assignment(scores: &[Vec<f64>], m: usize, q: usize) -> (Vec<usize>, f64) {
    fn rec(
        scores: &[Vec<f64>],
        m: usize,
        cur: &mut Vec<usize>,
        acc: f64,
        best: &mut (Vec<usize>, f64),
    ) {
        let col = cur.len();
        if col == scores.len() {
            if best.0.is_empty() || acc > best.1 {
                *best = (cur.clone(), acc);
            }
            return;
        }
        for row in 0..m {
            if cur.contains(&row) {
                continue;
            }
            cur.push(row);
            rec(scores, m, cur, acc + scores[col][row], best);
            cur.pop();
        }
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    rec(scores, m, &mut Vec::with_capacity(q), 0.0, &mut best);
    best
}

/// Checks the selection of one end of a full-connected design against the
/// exhaustive assignment search, lobe by lobe.
fn check_full_side(
    cb: &Codebook,
    refs: &CMatrix,
    selected: &[usize],
    p: usize,
    q: usize,
    tally: &mut OracleTally,
) {
    let n = refs.nrows();
    let mut offset = 0;
    for lobe in 0..p {
        let angles = &cb.lobes()[lobe].angles;
        let words: Vec<Vec<C64>> = angles.iter().map(|&a| steer(a, 0, n)).collect();
        // scores[subpath][grid point]
        let scores: Vec<Vec<f64>> = (0..q)
            .map(|s| {
                let r = column(refs, lobe * q + s);
                words.iter().map(|w| proj_sq(w, &r)).collect()
            })
            .collect();
        let (best, best_score) = exhaustive_assignment(&scores, angles.len(), q);
        let got: Vec<usize> = selected[lobe * q..(lobe + 1) * q]
            .iter()
            .map(|&j| j.wrapping_sub(offset))
            .collect();
        let in_lobe = got.iter().all(|&g| g < angles.len());
        let got_score = if in_lobe {
            got.iter().enumerate().map(|(s, &g)| scores[s][g]).sum()
        } else {
            f64::NEG_INFINITY
        };
        tally.record(got == best, in_lobe && tied(got_score, best_score));
        offset += angles.len();
    }
}

/// Random tiny full-connected instances (Nt <= 8, Nr <= 4, b <= 4).
pub fn full_selection_oracle(rng: &mut ChaCha8Rng, instances: usize) -> OracleTally {
    let mut tally = OracleTally::default();
    while tally.instances < instances {
        let n_t = rng.random_range(2..=8);
        let n_r = rng.random_range(1..=4);
        let p = rng.random_range(1..=2);
        let q = rng.random_range(1..=3);
        let b = rng.random_range(1..=4u32);
        if (1usize << b) / p < q {
            continue;
        }
        let profile = sample_lobe_profile(p, q, rng).unwrap();
        let ch = generate_channel(&profile, n_t, n_r, rng).unwrap();
        let (cb_t, cb_r) = build_nuq_codebook_full(n_t, n_r, b, &profile).unwrap();
        let set = nuq_hyp_full(&ch, &cb_t, &cb_r, p * q, p * q).unwrap();
        check_full_side(&cb_t, &ch.a_t, &set.selected_tx, p, q, &mut tally);
        check_full_side(&cb_r, &ch.a_r, &set.selected_rx, p, q, &mut tally);
        tally.instances += 1;
    }
    tally
}

fn check_sub_side(
    cb: &Codebook,
    refs: &CMatrix,
    selected: &[usize],
    n_sub: usize,
    p: usize,
    q: usize,
    tally: &mut OracleTally,
) {
    let mut offset = 0;
    for lobe in 0..p {
        let angles = &cb.lobes()[lobe].angles;
        for s in 0..q {
            let k = lobe * q + s;
            let start = k * n_sub;
            let r: Vec<C64> = (start..start + n_sub).map(|i| refs[(i, k)]).collect();
            let scores: Vec<f64> = angles
                .iter()
                .map(|&a| proj_sq(&steer(a, start, n_sub), &r))
                .collect();
            let mut best = 0;
            for (m, &v) in scores.iter().enumerate() {
                if v > scores[best] {
                    best = m;
                }
            }
            let got = selected[k].wrapping_sub(offset);
            let ok_range = got < angles.len();
            tally.record(got == best, ok_range && tied(scores[got.min(angles.len() - 1)], scores[best]));
            offset += angles.len();
        }
    }
}

/// Random tiny sub-connected instances (Nt <= 8, Nr <= 4, b <= 4).
pub fn sub_selection_oracle(rng: &mut ChaCha8Rng, instances: usize) -> OracleTally {
    let mut tally = OracleTally::default();
    while tally.instances < instances {
        let n_rf = [1usize, 2, 4][rng.random_range(0..3)];
        let n_t = n_rf * rng.random_range(1..=8 / n_rf);
        let n_r = n_rf * rng.random_range(1..=4 / n_rf);
        let p = rng.random_range(1..=n_rf);
        let q = rng.random_range(1..=n_rf / p);
        let b = rng.random_range(1..=4u32);
        if (1usize << b) < p {
            continue;
        }
        let profile = sample_lobe_profile(p, q, rng).unwrap();
        let ch = generate_channel(&profile, n_t, n_r, rng).unwrap();
        let layout = SubArrayLayout::new(n_t, n_r, n_rf).unwrap();
        let (cb_t, cb_r) = build_nuq_codebook_sub(n_t, n_r, n_rf, b, &profile).unwrap();
        let set = nuq_hyp_sub(&ch, &cb_t, &cb_r, &layout).unwrap();
        check_sub_side(&cb_t, &ch.a_t, &set.selected_tx, n_t / n_rf, p, q, &mut tally);
        check_sub_side(&cb_r, &ch.a_r, &set.selected_rx, n_r / n_rf, p, q, &mut tally);
        tally.instances += 1;
    }
    tally
}

fn frob_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Replays each greedy OMP step: given the atoms already chosen, the next
/// atom must minimize `‖R - a a^H R‖_F` over the whole dictionary, where
/// `R` is the least-squares residual of the target.
pub fn replay_omp(target: &CMatrix, angles: &[f64], trace: &[usize], tally: &mut OracleTally) {
    let n = target.nrows();
    let atoms: Vec<CMatrix> = angles
        .iter()
        .map(|&a| CMatrix::from_vec(n, 1, steer(a, 0, n)))
        .collect();
    for step in 0..trace.len() {
        let residual = if step == 0 {
            target.clone()
        } else {
            let mut chosen = CMatrix::zeros(n, step);
            for (c, &j) in trace[..step].iter().enumerate() {
                chosen.set_column(c, &atoms[j].column(0));
            }
            // chosen atoms are distinct grid points, hence independent
            let q = chosen.qr().q();
            target - &q * (q.adjoint() * target)
        };
        let cost: Vec<f64> = atoms
            .iter()
            .map(|a| frob_sq(&(&residual - a * (a.adjoint() * &residual))))
            .collect();
        let mut best = 0;
        for (k, &c) in cost.iter().enumerate() {
            if c < cost[best] {
                best = k;
            }
        }
        let got = trace[step];
        tally.record(got == best, tied(cost[got], cost[best]));
    }
}

/// Random OMP instances over uniform dictionaries (N <= 8, b <= 4).
pub fn omp_oracle(rng: &mut ChaCha8Rng, instances: usize) -> OracleTally {
    let mut tally = OracleTally::default();
    while tally.instances < instances {
        let n = rng.random_range(2..=8);
        let b = rng.random_range(1..=4u32);
        let m = 1usize << b;
        let n_s = rng.random_range(1..=3usize.min(n));
        if n_s > m {
            continue;
        }
        let n_rf = rng.random_range(n_s..=4usize.min(m));
        let target = CMatrix::from_fn(n, n_s, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let cb = build_uq_codebook(n, b).unwrap();
        let normalize = rng.random::<bool>();
        let out = omp(&target, cb.codewords(), n_rf, normalize).unwrap();
        replay_omp(&target, &cb.lobes()[0].angles, &out.selected, &mut tally);
        tally.instances += 1;
    }
    tally
}
