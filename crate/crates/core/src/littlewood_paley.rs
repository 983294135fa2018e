//! Anisotropic Littlewood-Paley decomposition.
//!
//! The cut-off `psi_0` is `g(zeta_k)`, where `zeta_k(xi, tau) = (sum xi_i^{2k} + tau^k)^{1/(2k)}`
//! is a smooth quasi-distance with the same parabolic homogeneity as
//! `max(|xi_i|, |tau|^{1/2})`, and `g` is the exp(-1/t) splice from 1 on `[0, 1]`
//! to 0 on `[2, inf)`. Band `j >= 1` uses `psi_0(2^{-j a} .) - psi_0(2^{-(j-1) a} .)`,
//! which reduces to `g(zeta / 2^j) - g(zeta / 2^{j-1})`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{parabolic_distance, AnisotropicGrid, SampledField};
use crate::spectral::{angular_frequencies, forward_transform, inverse_transform_unchecked};

/// Identifies the transition function; bump bit-patterns depend only on it and `k`.
pub const PROFILE_VERSION: &str = "exp-splice-v1";

fn splice_weight(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth monotone step: 1 for `r <= 1`, 0 for `r >= 2`.
pub fn transition(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let s = r - 1.0;
        let a = splice_weight(1.0 - s);
        let b = splice_weight(s);
        a / (a + b)
    }
}

/// Exponent `k` of the smooth quasi-distance (even, at least 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub smoothing_order: u32,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self { smoothing_order: 4 }
    }
}

impl BumpProfile {
    pub fn new(smoothing_order: u32) -> Result<Self> {
        if smoothing_order < 2 || !smoothing_order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "smoothing order must be even and >= 2, got {smoothing_order}"
            )));
        }
        Ok(Self { smoothing_order })
    }

    /// `zeta_k(z)` for a point with the time coordinate last.
    pub fn quasi_distance(&self, z: &[f64]) -> f64 {
        let (t, x) = z.split_last().expect("point needs a time coordinate");
        let scale = parabolic_distance(z);
        if scale == 0.0 {
            return 0.0;
        }
        let k = self.smoothing_order as i32;
        let mut acc = (t.abs() / (scale * scale)).powi(k);
        for xi in x {
            acc += (xi / scale).powi(2 * k);
        }
        scale * acc.powf(1.0 / (2 * k) as f64)
    }

    pub fn psi0(&self, z: &[f64]) -> f64 {
        transition(self.quasi_distance(z))
    }
}

/// Sampled multipliers `psi_0 .. psi_J` on a grid's dual lattice.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    grid: AnisotropicGrid,
    profile: BumpProfile,
    max_band: usize,
    zeta: Vec<f64>,
    multipliers: Vec<Vec<f64>>,
}

/// Quasi-distance of every lattice frequency of `grid`.
pub fn lattice_quasi_distance(grid: &AnisotropicGrid, profile: &BumpProfile) -> Vec<f64> {
    let freqs: Vec<Vec<f64>> = (0..grid.ndim())
        .map(|a| angular_frequencies(grid, a))
        .collect();
    let mut point = vec![0.0; grid.ndim()];
    (0..grid.len())
        .map(|flat| {
            let idx = grid.multi_index(flat);
            for a in 0..grid.ndim() {
                point[a] = freqs[a][idx[a]];
            }
            profile.quasi_distance(&point)
        })
        .collect()
}

pub fn build_partition(grid: &AnisotropicGrid, profile: BumpProfile) -> Result<DyadicPartition> {
    BumpProfile::new(profile.smoothing_order)?;
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid(
            "dyadic bands need a periodic grid; localize a bounded field first".into(),
        ));
    }
    let zeta = lattice_quasi_distance(grid, &profile);
    let zmax = zeta.iter().cloned().fold(0.0, f64::max);
    let mut max_band = 0usize;
    while 2f64.powi(max_band as i32) < zmax {
        max_band += 1;
    }
    if max_band < 2 {
        return Err(Error::InsufficientResolution(format!(
            "grid resolves frequencies only up to {zmax:.3}; at least three bands are needed"
        )));
    }
    let multipliers = (0..=max_band)
        .map(|j| {
            zeta.iter()
                .map(|&z| {
                    if j == 0 {
                        transition(z)
                    } else {
                        transition(z / 2f64.powi(j as i32))
                            - transition(z / 2f64.powi(j as i32 - 1))
                    }
                })
                .collect()
        })
        .collect();
    Ok(DyadicPartition {
        grid: grid.clone(),
        profile,
        max_band,
        zeta,
        multipliers,
    })
}

impl DyadicPartition {
    pub fn grid(&self) -> &AnisotropicGrid {
        &self.grid
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    /// Highest band index `J`.
    pub fn max_band(&self) -> usize {
        self.max_band
    }

    pub fn band_count(&self) -> usize {
        self.max_band + 1
    }

    pub fn multiplier(&self, j: usize) -> Result<&[f64]> {
        self.multipliers
            .get(j)
            .map(|m| m.as_slice())
            .ok_or(Error::BandOutOfRange {
                index: j,
                max: self.max_band,
            })
    }

    pub fn lattice_zeta(&self) -> &[f64] {
        &self.zeta
    }

    /// Bands whose whole annulus `[2^{j-1}, 2^{j+1}]` lies below the Nyquist
    /// frequency of every axis, measured in quasi-distance units.
    pub fn resolved_bands(&self) -> std::ops::RangeInclusive<usize> {
        let g = &self.grid;
        let nyquist = (0..g.ndim())
            .map(|a| {
                let w = std::f64::consts::PI / g.spacing(a);
                if a == g.time_axis() {
                    w.sqrt()
                } else {
                    w
                }
            })
            .fold(f64::INFINITY, f64::min);
        let mut top = 0;
        while top < self.max_band && 2f64.powi(top as i32 + 2) <= nyquist {
            top += 1;
        }
        1..=top
    }

    fn check_grid(&self, u: &SampledField) -> Result<()> {
        if u.grid().same_lattice(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "partition was built on another grid".into(),
            ))
        }
    }
}

/// The pieces `phi_j * u`, `j = 0..=J`.
#[derive(Debug, Clone)]
pub struct BandStack {
    bands: Vec<SampledField>,
}

impl BandStack {
    pub fn new(bands: Vec<SampledField>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidParameter(
                "band stack needs at least one band".into(),
            ));
        }
        for b in &bands[1..] {
            bands[0].check_same_grid(b)?;
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[SampledField] {
        &self.bands
    }

    pub fn band(&self, j: usize) -> &SampledField {
        &self.bands[j]
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// `||phi_j * u||_{L^inf}` for every band.
    pub fn sup_norms(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.max_abs()).collect()
    }

    /// `||phi_j * u||_{L^2}^2` for every band.
    pub fn energies(&self) -> Vec<f64> {
        self.bands
            .iter()
            .map(|b| lp_full(b, Exponent::Finite(2.0)).powi(2))
            .collect()
    }
}

pub fn band_filter(
    u: &SampledField,
    partition: &DyadicPartition,
    j: usize,
) -> Result<SampledField> {
    partition.check_grid(u)?;
    let m = partition.multiplier(j)?;
    Ok(inverse_transform_unchecked(
        &forward_transform(u).apply_real(m),
    ))
}

/// All bands of `u`; the multipliers are real and even, so each band is real.
pub fn decompose(u: &SampledField, partition: &DyadicPartition) -> Result<BandStack> {
    partition.check_grid(u)?;
    let spec = forward_transform(u);
    let bands = partition
        .multipliers
        .par_iter()
        .map(|m| inverse_transform_unchecked(&spec.apply_real(m)))
        .collect();
    BandStack::new(bands)
}

pub fn reconstruct(stack: &BandStack) -> Result<SampledField> {
    let first = &stack.bands[0];
    let mut acc = first.values().to_vec();
    for b in &stack.bands[1..] {
        first.check_same_grid(b)?;
        for (a, v) in acc.iter_mut().zip(b.values()) {
            *a += v;
        }
    }
    SampledField::new(first.grid().clone(), acc)
}

/// Integrability exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::Infinite)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Self::Finite(p))
        } else {
            Err(Error::InvalidParameter(format!(
                "exponent must lie in [1, inf], got {p}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(p) => p,
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infty" | "infinity" | "∞" => Ok(Self::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad exponent {other:?}")))
                .and_then(Self::new),
        }
    }
}

/// Riemann cell-sum `L^p` norm over the whole grid.
pub(crate) fn lp_full(u: &SampledField, p: Exponent) -> f64 {
    lp_of_values(u.values(), u.grid().cell_volume(), p)
}

pub(crate) fn lp_of_values(values: &[f64], cell: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Infinite => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(1.0) => values.iter().map(|v| v.abs()).sum::<f64>() * cell,
        Exponent::Finite(2.0) => (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt(),
        Exponent::Finite(p) => {
            (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
        }
    }
}

fn lq_combine(terms: impl Iterator<Item = f64>, q: Exponent) -> f64 {
    match q {
        Exponent::Infinite => terms.fold(0.0, f64::max),
        Exponent::Finite(1.0) => terms.sum(),
        Exponent::Finite(q) => terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q),
    }
}

/// Besov quasi-norm from precomputed bands.
pub fn besov_norm_of(stack: &BandStack, s: f64, p: Exponent, q: Exponent) -> f64 {
    let terms = stack
        .bands
        .iter()
        .enumerate()
        .map(|(j, b)| 2f64.powf(s * j as f64) * lp_full(b, p));
    lq_combine(terms, q)
}

pub fn besov_norm(
    u: &SampledField,
    partition: &DyadicPartition,
    s: f64,
    p: Exponent,
    q: Exponent,
) -> Result<f64> {
    Ok(besov_norm_of(&decompose(u, partition)?, s, p, q))
}

/// Lizorkin-Triebel quasi-norm from precomputed bands; `truncated` drops band 0.
pub fn lizorkin_triebel_norm_of(
    stack: &BandStack,
    s: f64,
    p: Exponent,
    q: Exponent,
    truncated: bool,
) -> f64 {
    let first = usize::from(truncated);
    let grid = stack.bands[0].grid();
    let weights: Vec<f64> = (0..stack.len()).map(|j| 2f64.powf(s * j as f64)).collect();
    let pointwise: Vec<f64> = (0..grid.len())
        .map(|i| {
            let terms = (first..stack.len()).map(|j| weights[j] * stack.bands[j].values()[i].abs());
            lq_combine(terms, q)
        })
        .collect();
    lp_of_values(&pointwise, grid.cell_volume(), p)
}

pub fn lizorkin_triebel_norm(
    u: &SampledField,
    partition: &DyadicPartition,
    s: f64,
    p: Exponent,
    q: Exponent,
    truncated: bool,
) -> Result<f64> {
    Ok(lizorkin_triebel_norm_of(
        &decompose(u, partition)?,
        s,
        p,
        q,
        truncated,
    ))
}

/// Shell-wise decay of the physical kernel `phi_1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub decay_exponent: u32,
    /// `(R, sup_{R <= ||z|| < sqrt(2) R} |phi_1(z)| ||z||^m)` per shell.
    pub shells: Vec<(f64, f64)>,
    pub constant: f64,
    pub bounded: bool,
    /// Riemann sum of `phi_1` over the box.
    pub integral: f64,
    pub sup_abs: f64,
}

/// Periodic kernel of band `j` at every lattice offset (same layout as fields).
pub fn band_kernel(partition: &DyadicPartition, j: usize) -> Result<SampledField> {
    let g = partition.grid();
    let m = partition.multiplier(j)?;
    // Unnormalised inverse DFT of the multiplier divided by the box volume.
    let mut delta = vec![0.0; g.len()];
    delta[0] = 1.0;
    let spec = forward_transform(&SampledField::new(g.clone(), delta)?).apply_real(m);
    let raw = inverse_transform_unchecked(&spec);
    let scale = 1.0 / g.cell_volume();
    raw.map(|v| v * scale)
}

pub fn kernel_decay_check(partition: &DyadicPartition, decay_exponent: u32) -> Result<DecayReport> {
    let k = partition.profile().smoothing_order;
    if decay_exponent == 0 || decay_exponent > 2 * k - 2 {
        return Err(Error::InvalidParameter(format!(
            "decay exponent must lie in 1..={} for smoothing order {k}",
            2 * k - 2
        )));
    }
    let g = partition.grid();
    let kernel = band_kernel(partition, 1)?;
    let t_axis = g.time_axis();
    let reach = (0..g.ndim())
        .map(|a| {
            let half = g.axis_len(a) / 2.0;
            if a == t_axis {
                half.sqrt()
            } else {
                half
            }
        })
        .fold(f64::INFINITY, f64::min);
    let mut shells = Vec::new();
    let mut r = 1.0;
    while r * std::f64::consts::SQRT_2 <= reach {
        shells.push((r, 0.0f64));
        r *= std::f64::consts::SQRT_2;
    }
    if shells.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "box reaches parabolic distance {reach:.3}; need at least 2"
        )));
    }
    let mut offset = vec![0.0; g.ndim()];
    for flat in 0..g.len() {
        let idx = g.multi_index(flat);
        for a in 0..g.ndim() {
            offset[a] = crate::spectral::signed_index(idx[a], g.shape()[a]) as f64 * g.spacing(a);
        }
        let d = parabolic_distance(&offset);
        if d < 1.0 {
            continue;
        }
        let shell = ((d.ln() / std::f64::consts::SQRT_2.ln()).floor()) as usize;
        if let Some(slot) = shells.get_mut(shell) {
            slot.1 = slot
                .1
                .max(kernel.values()[flat].abs() * d.powi(decay_exponent as i32));
        }
    }
    let constant = shells.iter().map(|s| s.1).fold(0.0, f64::max);
    let split = (2 * shells.len()).div_ceil(3);
    let inner = shells[..split].iter().map(|s| s.1).fold(0.0, f64::max);
    let outer = shells[split..].iter().map(|s| s.1).fold(0.0, f64::max);
    let integral = kernel.values().iter().sum::<f64>() * g.cell_volume();
    Ok(DecayReport {
        decay_exponent,
        shells,
        constant,
        bounded: outer <= inner,
        integral,
        sup_abs: kernel.max_abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AnisotropicGrid {
        AnisotropicGrid::new(1, vec![4.0], 4.0, vec![64, 64]).unwrap()
    }

    #[test]
    fn transition_shape() {
        assert_eq!(transition(0.3), 1.0);
        assert_eq!(transition(1.0), 1.0);
        assert_eq!(transition(2.0), 0.0);
        assert!((transition(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = transition(1.0 + i as f64 / 1000.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn quasi_distance_is_homogeneous() {
        let p = BumpProfile::default();
        let z = [0.3, -1.7];
        let d = crate::grid::anisotropic_dilate(&z, 2.5).unwrap();
        assert!((p.quasi_distance(&d) - 2.5 * p.quasi_distance(&z)).abs() < 1e-13);
        assert_eq!(p.quasi_distance(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn profile_rejects_odd_order() {
        assert!(BumpProfile::new(3).is_err());
        assert!(BumpProfile::new(0).is_err());
        assert!(build_partition(&grid(), BumpProfile { smoothing_order: 5 }).is_err());
    }

    #[test]
    fn zero_frequency_lives_in_band_zero() {
        let p = build_partition(&grid(), BumpProfile::default()).unwrap();
        assert_eq!(p.multiplier(0).unwrap()[0], 1.0);
        for j in 1..=p.max_band() {
            assert_eq!(p.multiplier(j).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = AnisotropicGrid::new(1, vec![8.0], 64.0, vec![4, 4]).unwrap();
        assert!(matches!(
            build_partition(&g, BumpProfile::default()),
            Err(Error::InsufficientResolution(_))
        ));
    }

    #[test]
    fn band_three_vanishes_at_unit_distance() {
        // box length 2 pi puts the first spatial frequency at exactly 1
        let g =
            AnisotropicGrid::new(1, vec![2.0 * std::f64::consts::PI], 1.0, vec![64, 16]).unwrap();
        let p = build_partition(&g, BumpProfile::default()).unwrap();
        let at = g.flat_index(&[1, 0]);
        assert!((p.lattice_zeta()[at] - 1.0).abs() < 1e-12);
        assert_eq!(p.multiplier(3).unwrap()[at], 0.0);
    }

    #[test]
    fn constant_field_bands() {
        let g = grid();
        let p = build_partition(&g, BumpProfile::default()).unwrap();
        let u = SampledField::constant(g, 2.5);
        let b0 = band_filter(&u, &p, 0).unwrap();
        let b1 = band_filter(&u, &p, 1).unwrap();
        assert!(b0.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!(b1.max_abs() < 1e-12);
        assert!(matches!(
            band_filter(&u, &p, p.max_band() + 1),
            Err(Error::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinite);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
    }

    #[test]
    fn truncated_norm_of_constant_is_zero() {
        let g = grid();
        let p = build_partition(&g, BumpProfile::default()).unwrap();
        let u = SampledField::constant(g, -3.0);
        let t = lizorkin_triebel_norm(&u, &p, 0.0, Exponent::Infinite, Exponent::Finite(1.0), true)
            .unwrap();
        assert!(t < 1e-12);
    }
}
