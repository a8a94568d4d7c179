//! ULA steering vectors, spatial-lobe geometry and channel realizations.
//!
//! Angles are radians and are stored wrapped to `[0, 2π)`. Arrays use
//! half-wavelength spacing, so element `k` of a steering vector toward `θ`
//! is `exp(j·π·k·sin θ) / √N`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoverageConstraint, Error, Result};
use crate::{CMatrix, CVector, C64};

pub const TWO_PI: f64 = 2.0 * PI;

/// Slack used by the coverage checks.
const COVERAGE_TOL: f64 = 1e-9;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Shortest distance between two angles on the circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Unit-norm ULA array response toward one angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    entries: CVector,
    angle: f64,
}

impl SteeringVector {
    pub fn entries(&self) -> &CVector {
        &self.entries
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> CVector {
        self.entries
    }
}

pub fn array_response(angle: f64, n_antennas: usize) -> Result<SteeringVector> {
    if n_antennas == 0 {
        return Err(Error::invalid_arg("array_response needs at least one antenna"));
    }
    if !angle.is_finite() {
        return Err(Error::invalid_arg(format!("angle must be finite, got {angle}")));
    }
    let angle = wrap_angle(angle);
    Ok(SteeringVector {
        entries: windowed_response(angle, 0, n_antennas, n_antennas),
        angle,
    })
}

/// Phase progression of antennas `start..start + len` toward `angle`, scaled
/// by `1/√norm_len`. Antenna indices are absolute, so a window of a larger
/// array keeps the phases it has inside the full array.
pub(crate) fn windowed_response(angle: f64, start: usize, len: usize, norm_len: usize) -> CVector {
    let scale = 1.0 / (norm_len as f64).sqrt();
    let phase = PI * angle.sin();
    DVector::from_iterator(
        len,
        (start..start + len).map(|k| C64::from_polar(scale, phase * k as f64)),
    )
}

/// Matrix whose columns are the steering vectors for `angles`.
pub fn steering_matrix(angles: &[f64], n_antennas: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n_antennas, angles.len());
    for (j, &a) in angles.iter().enumerate() {
        m.set_column(j, &windowed_response(a, 0, n_antennas, n_antennas));
    }
    m
}

/// Angular layout of the spatial lobes shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLobeProfile {
    subpaths: usize,
    mean_angles: Vec<f64>,
    spreads: Vec<f64>,
    quant_ranges: Vec<f64>,
    offset: f64,
}

impl SpatialLobeProfile {
    /// Builds and validates an explicit profile.
    pub fn new(
        subpaths: usize,
        mean_angles: Vec<f64>,
        spreads: Vec<f64>,
        quant_ranges: Vec<f64>,
        offset: f64,
    ) -> Result<Self> {
        let profile = Self {
            subpaths,
            mean_angles: mean_angles.into_iter().map(wrap_angle).collect(),
            spreads,
            quant_ranges,
            offset: wrap_angle(offset),
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Evenly spaced lobes starting at `offset`, each with spread `π/P` and
    /// a quantized range equal to the spread.
    pub fn with_offset(lobes: usize, subpaths: usize, offset: f64) -> Result<Self> {
        if lobes == 0 || subpaths == 0 {
            return Err(Error::invalid_arg(format!(
                "lobe profile needs P >= 1 and Q >= 1, got P={lobes}, Q={subpaths}"
            )));
        }
        if !offset.is_finite() {
            return Err(Error::invalid_arg("lobe offset must be finite"));
        }
        let p = lobes as f64;
        let mean_angles = (0..lobes).map(|i| offset + TWO_PI * i as f64 / p).collect();
        let spread = PI / p;
        Self::new(
            subpaths,
            mean_angles,
            vec![spread; lobes],
            vec![spread; lobes],
            offset,
        )
    }

    /// Same lobes with different quantized ranges.
    pub fn with_quant_ranges(&self, ranges: Vec<f64>) -> Result<Self> {
        if ranges.len() != self.lobes() {
            return Err(Error::invalid_arg(format!(
                "expected {} quantized ranges, got {}",
                self.lobes(),
                ranges.len()
            )));
        }
        let profile = Self {
            quant_ranges: ranges,
            ..self.clone()
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn lobes(&self) -> usize {
        self.mean_angles.len()
    }

    pub fn subpaths(&self) -> usize {
        self.subpaths
    }

    pub fn mean_angles(&self) -> &[f64] {
        &self.mean_angles
    }

    pub fn spreads(&self) -> &[f64] {
        &self.spreads
    }

    pub fn quant_ranges(&self) -> &[f64] {
        &self.quant_ranges
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn total_quant_range(&self) -> f64 {
        self.quant_ranges.iter().sum()
    }

    /// Quantized coverage of lobe `i` as an unwrapped interval.
    pub fn quant_coverage(&self, i: usize) -> (f64, f64) {
        let half = self.quant_ranges[i] / 2.0;
        (self.mean_angles[i] - half, self.mean_angles[i] + half)
    }

    /// Beam coverage (mean ± spread/2) of lobe `i` as an unwrapped interval.
    pub fn lobe_coverage(&self, i: usize) -> (f64, f64) {
        let half = self.spreads[i] / 2.0;
        (self.mean_angles[i] - half, self.mean_angles[i] + half)
    }

    /// Whether `angle` lies in lobe `i`'s beam coverage, modulo 2π.
    pub fn in_lobe(&self, i: usize, angle: f64) -> bool {
        circular_distance(angle, self.mean_angles[i]) <= self.spreads[i] / 2.0 + COVERAGE_TOL
    }

    /// Whether `angle` lies in lobe `i`'s quantized coverage, modulo 2π.
    pub fn in_quant_coverage(&self, i: usize, angle: f64) -> bool {
        circular_distance(angle, self.mean_angles[i]) <= self.quant_ranges[i] / 2.0 + COVERAGE_TOL
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.mean_angles.len();
        if p == 0 || self.subpaths == 0 {
            return Err(Error::invalid_arg("lobe profile needs P >= 1 and Q >= 1"));
        }
        if self.spreads.len() != p || self.quant_ranges.len() != p {
            return Err(Error::invalid_arg(format!(
                "profile has {p} lobes but {} spreads and {} quantized ranges",
                self.spreads.len(),
                self.quant_ranges.len()
            )));
        }
        let all = self.mean_angles.iter().chain(&self.spreads).chain(&self.quant_ranges);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::invalid_arg("profile angles must be finite"));
        }
        for i in 0..p {
            if self.spreads[i] < 0.0 || self.quant_ranges[i] <= 0.0 {
                return Err(Error::invalid_arg(format!(
                    "lobe {i}: spread must be >= 0 and quantized range > 0"
                )));
            }
            if self.spreads[i] > self.quant_ranges[i] + COVERAGE_TOL {
                return Err(Error::InvalidProfile {
                    constraint: CoverageConstraint::SpreadWithinRange,
                    detail: format!(
                        "lobe {i}: spread {:.6} exceeds quantized range {:.6}",
                        self.spreads[i], self.quant_ranges[i]
                    ),
                });
            }
        }
        let total = self.total_quant_range();
        if total > TWO_PI + COVERAGE_TOL {
            return Err(Error::InvalidProfile {
                constraint: CoverageConstraint::CoverageWithinCircle,
                detail: format!("quantized ranges sum to {total:.6} rad"),
            });
        }
        for i in 0..p {
            for j in i + 1..p {
                let gap = circular_distance(self.mean_angles[i], self.mean_angles[j]);
                let reach = (self.quant_ranges[i] + self.quant_ranges[j]) / 2.0;
                if gap < reach - COVERAGE_TOL {
                    return Err(Error::InvalidProfile {
                        constraint: CoverageConstraint::DisjointCoverage,
                        detail: format!("lobes {i} and {j} overlap by {:.6} rad", reach - gap),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Default lobe geometry with a uniformly drawn offset in `[0, 2π)`.
pub fn sample_lobe_profile<R: Rng + ?Sized>(
    lobes: usize,
    subpaths: usize,
    rng: &mut R,
) -> Result<SpatialLobeProfile> {
    let offset = rng.random::<f64>() * TWO_PI;
    SpatialLobeProfile::with_offset(lobes, subpaths, offset)
}

/// One narrowband channel draw together with the geometry that produced it.
///
/// Paths are ordered lobe-major: path `p * Q + q` is subpath `q` of lobe `p`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMatrix,
    /// Unscaled complex path gains, one per path.
    pub gains: CVector,
    /// Common gain factor `√(Nt·Nr / (P·Q))`.
    pub gain_scale: f64,
    pub aoas: Vec<f64>,
    pub aods: Vec<f64>,
    /// Receive array responses, Nr x PQ.
    pub a_r: CMatrix,
    /// Transmit array responses, Nt x PQ.
    pub a_t: CMatrix,
    lobes: usize,
    subpaths: usize,
}

impl ChannelRealization {
    pub fn n_t(&self) -> usize {
        self.a_t.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.a_r.nrows()
    }

    pub fn lobes(&self) -> usize {
        self.lobes
    }

    pub fn subpaths(&self) -> usize {
        self.subpaths
    }

    pub fn paths(&self) -> usize {
        self.lobes * self.subpaths
    }

    pub fn scaled_gains(&self) -> CVector {
        self.gains.scale(self.gain_scale)
    }

    /// `A_r · diag(scaled gains) · A_t^H`.
    pub fn compact_form(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&self.scaled_gains());
        &self.a_r * d * self.a_t.adjoint()
    }

    /// Transmit responses of lobe `i`'s subpaths (Nt x Q).
    pub fn tx_lobe(&self, i: usize) -> CMatrix {
        self.a_t.columns(i * self.subpaths, self.subpaths).into_owned()
    }

    /// Receive responses of lobe `i`'s subpaths (Nr x Q).
    pub fn rx_lobe(&self, i: usize) -> CMatrix {
        self.a_r.columns(i * self.subpaths, self.subpaths).into_owned()
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn assemble(
    aoas: Vec<f64>,
    aods: Vec<f64>,
    gains: Vec<C64>,
    lobes: usize,
    subpaths: usize,
    n_t: usize,
    n_r: usize,
) -> ChannelRealization {
    let paths = gains.len();
    let gain_scale = ((n_t * n_r) as f64 / paths as f64).sqrt();
    let a_t = steering_matrix(&aods, n_t);
    let a_r = steering_matrix(&aoas, n_r);
    // explicit sum of rank-one path contributions
    let mut h = CMatrix::zeros(n_r, n_t);
    for (l, g) in gains.iter().enumerate() {
        let coef = g * gain_scale;
        for c in 0..n_t {
            let t = a_t[(c, l)].conj() * coef;
            for r in 0..n_r {
                h[(r, c)] += a_r[(r, l)] * t;
            }
        }
    }
    ChannelRealization {
        h,
        gains: DVector::from_vec(gains),
        gain_scale,
        aoas,
        aods,
        a_r,
        a_t,
        lobes,
        subpaths,
    }
}

/// Spatial-lobe channel: each subpath's AoA and AoD are drawn independently
/// and uniformly within its lobe's coverage; gains are i.i.d. CN(0, 1).
pub fn generate_channel<R: Rng + ?Sized>(
    profile: &SpatialLobeProfile,
    n_t: usize,
    n_r: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    profile.validate()?;
    if n_t == 0 || n_r == 0 {
        return Err(Error::invalid_arg("channel needs at least one antenna at each end"));
    }
    let (p, q) = (profile.lobes(), profile.subpaths());
    let mut aoas = Vec::with_capacity(p * q);
    let mut aods = Vec::with_capacity(p * q);
    let mut gains = Vec::with_capacity(p * q);
    for lobe in 0..p {
        let (mean, spread) = (profile.mean_angles[lobe], profile.spreads[lobe]);
        for _ in 0..q {
            let u_t: f64 = rng.random();
            let u_r: f64 = rng.random();
            aods.push(wrap_angle(mean + spread * (u_t - 0.5)));
            aoas.push(wrap_angle(mean + spread * (u_r - 0.5)));
            gains.push(complex_gaussian(rng));
        }
    }
    Ok(assemble(aoas, aods, gains, p, q, n_t, n_r))
}

/// Clustered Saleh-Valenzuela channel with AoAs/AoDs uniform on `[0, 2π)`.
pub fn generate_channel_clustered<R: Rng + ?Sized>(
    n_cl: usize,
    n_ray: usize,
    n_t: usize,
    n_r: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if n_cl == 0 || n_ray == 0 {
        return Err(Error::invalid_arg("clustered channel needs n_cl >= 1 and n_ray >= 1"));
    }
    if n_t == 0 || n_r == 0 {
        return Err(Error::invalid_arg("channel needs at least one antenna at each end"));
    }
    let paths = n_cl * n_ray;
    let mut aoas = Vec::with_capacity(paths);
    let mut aods = Vec::with_capacity(paths);
    let mut gains = Vec::with_capacity(paths);
    for _ in 0..paths {
        aods.push(rng.random::<f64>() * TWO_PI);
        aoas.push(rng.random::<f64>() * TWO_PI);
        gains.push(complex_gaussian(rng));
    }
    Ok(assemble(aoas, aods, gains, n_cl, n_ray, n_t, n_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn broadside_response_is_flat() {
        let v = array_response(0.0, 4).unwrap();
        for z in v.entries().iter() {
            assert!(close(*z, C64::new(0.5, 0.0), 1e-15));
        }
    }

    #[test]
    fn endfire_response_alternates() {
        let v = array_response(PI / 2.0, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(v.entries()[0], C64::new(s, 0.0), 1e-15));
        assert!(close(v.entries()[1], C64::new(-s, 0.0), 1e-15));
    }

    #[test]
    fn thirty_degrees_gives_quarter_turns() {
        let v = array_response(PI / 6.0, 3).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let want = [C64::new(s, 0.0), C64::new(0.0, s), C64::new(-s, 0.0)];
        for (z, w) in v.entries().iter().zip(want) {
            assert!(close(*z, w, 1e-12));
        }
    }

    #[test]
    fn zero_antennas_rejected() {
        assert!(matches!(array_response(0.3, 0), Err(Error::InvalidArgument(_))));
        assert!(array_response(f64::NAN, 3).is_err());
    }

    #[test]
    fn angle_is_wrapped() {
        let v = array_response(-PI / 2.0, 3).unwrap();
        assert!((v.angle() - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn two_lobe_default_geometry() {
        let p = SpatialLobeProfile::with_offset(2, 2, 0.0).unwrap();
        assert!((p.mean_angles()[0]).abs() < 1e-15);
        assert!((p.mean_angles()[1] - PI).abs() < 1e-15);
        assert_eq!(p.spreads(), &[PI / 2.0, PI / 2.0]);
        assert_eq!(p.quant_ranges(), p.spreads());
    }

    #[test]
    fn single_lobe_default_geometry() {
        let p = SpatialLobeProfile::with_offset(1, 1, 1.0).unwrap();
        assert_eq!(p.mean_angles(), &[1.0]);
        assert_eq!(p.spreads(), &[PI]);
    }

    #[test]
    fn four_lobe_coverages_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = sample_lobe_profile(4, 1, &mut rng).unwrap();
            // interval arithmetic on the unwrapped coverages, shifted by 2π
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    let (a0, a1) = p.quant_coverage(i);
                    let (b0, b1) = p.quant_coverage(j);
                    for shift in [-TWO_PI, 0.0, TWO_PI] {
                        let lo = a0.max(b0 + shift);
                        let hi = a1.min(b1 + shift);
                        assert!(hi - lo <= 1e-9, "lobes {i},{j} overlap");
                    }
                }
            }
        }
    }

    #[test]
    fn coverage_violations_name_the_constraint() {
        let base = SpatialLobeProfile::with_offset(2, 1, 0.0).unwrap();
        let e = base.with_quant_ranges(vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(
            e,
            Error::InvalidProfile { constraint: CoverageConstraint::SpreadWithinRange, .. }
        ));
        let e = base.with_quant_ranges(vec![3.5, 3.5]).unwrap_err();
        assert!(matches!(
            e,
            Error::InvalidProfile { constraint: CoverageConstraint::CoverageWithinCircle, .. }
        ));
        let crowded = SpatialLobeProfile::new(1, vec![0.0, 1.0], vec![0.5, 0.5], vec![1.5, 1.5], 0.0)
            .unwrap_err();
        assert!(matches!(
            crowded,
            Error::InvalidProfile { constraint: CoverageConstraint::DisjointCoverage, .. }
        ));
    }

    #[test]
    fn touching_coverages_are_allowed() {
        let p = SpatialLobeProfile::with_offset(2, 1, 0.3).unwrap();
        assert!(p.with_quant_ranges(vec![PI, PI]).is_ok());
    }

    #[test]
    fn single_path_channel_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let profile = SpatialLobeProfile::with_offset(1, 1, 0.4).unwrap();
        let ch = generate_channel(&profile, 8, 4, &mut rng).unwrap();
        let s = crate::linalg::thin_svd(&ch.h).singular_values;
        assert!(s[1] < 1e-10 * s[0]);
        let want = (32f64).sqrt() * ch.gains[0].norm();
        assert!((ch.h.norm() - want).abs() < 1e-10);
    }

    #[test]
    fn compact_form_matches_path_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let profile = sample_lobe_profile(3, 2, &mut rng).unwrap();
        let ch = generate_channel(&profile, 16, 8, &mut rng).unwrap();
        assert!((ch.compact_form() - &ch.h).norm() < 1e-10);
    }

    #[test]
    fn subpath_angles_stay_in_their_lobe() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in 1..=4 {
            let profile = sample_lobe_profile(p, 3, &mut rng).unwrap();
            let ch = generate_channel(&profile, 4, 4, &mut rng).unwrap();
            for lobe in 0..p {
                for q in 0..3 {
                    let l = lobe * 3 + q;
                    assert!(profile.in_lobe(lobe, ch.aods[l]));
                    assert!(profile.in_lobe(lobe, ch.aoas[l]));
                    assert!((0.0..TWO_PI).contains(&ch.aods[l]));
                }
            }
        }
    }

    #[test]
    fn clustered_rank_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ch = generate_channel_clustered(1, 1, 6, 6, &mut rng).unwrap();
        let s = crate::linalg::thin_svd(&ch.h).singular_values;
        assert!(s[1] < 1e-10 * s[0]);
        let ch = generate_channel_clustered(2, 3, 16, 12, &mut rng).unwrap();
        let s = crate::linalg::thin_svd(&ch.h).singular_values;
        assert!(s[6] < 1e-9 * s[0]);
        assert!((ch.compact_form() - &ch.h).norm() < 1e-10);
    }
}
