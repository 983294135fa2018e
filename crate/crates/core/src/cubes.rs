//! Parabolic cubes and the parabolic BMO norm.
//!
//! A cube of radius `r` is the box `(x0 - r, x0 + r)^n x (t0 - r^2, t0 + r^2)`.
//! Means over a cube weight every touched cell by its overlap fraction on each
//! axis, so they are exact for constants at every radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField, SpaceTimeBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCube {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ParabolicCube {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cube radius must be positive, got {radius}"
            )));
        }
        if center.len() < 2 {
            return Err(Error::InvalidParameter(
                "cube centre needs space and time coordinates".into(),
            ));
        }
        Ok(Self { center, radius })
    }

    pub fn n(&self) -> usize {
        self.center.len() - 1
    }

    pub fn as_box(&self) -> SpaceTimeBox {
        let last = self.center.len() - 1;
        let half = |a: usize| {
            if a == last {
                self.radius * self.radius
            } else {
                self.radius
            }
        };
        SpaceTimeBox {
            lo: self
                .center
                .iter()
                .enumerate()
                .map(|(a, c)| c - half(a))
                .collect(),
            hi: self
                .center
                .iter()
                .enumerate()
                .map(|(a, c)| c + half(a))
                .collect(),
        }
    }

    /// `(2r)^n * 2r^2`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.radius).powi(self.n() as i32) * 2.0 * self.radius * self.radius
    }

    pub fn contains(&self, other: &ParabolicCube) -> bool {
        self.as_box()
            .contains_box(&other.as_box(), 1e-12 * self.radius.max(1.0))
    }
}

/// Cell-weighted samples of a field inside a box.
pub(crate) fn weighted_samples(
    u: &SampledField,
    b: &SpaceTimeBox,
    out: &mut Vec<(f64, f64)>,
) -> bool {
    out.clear();
    let g = u.grid();
    let Some(fracs) = g.overlap_fractions(b) else {
        return false;
    };
    let strides = g.strides();
    let values = u.values();
    let ndim = g.ndim();
    let mut counter = vec![0usize; ndim];
    loop {
        let mut w = 1.0;
        let mut flat = 0;
        for a in 0..ndim {
            let (first, ref f) = fracs[a];
            w *= f[counter[a]];
            flat += (first + counter[a]) * strides[a];
        }
        if w > 0.0 {
            out.push((values[flat], w));
        }
        let mut a = ndim;
        loop {
            if a == 0 {
                return !out.is_empty();
            }
            a -= 1;
            counter[a] += 1;
            if counter[a] < fracs[a].1.len() {
                break;
            }
            counter[a] = 0;
        }
    }
}

fn weighted_mean(samples: &[(f64, f64)]) -> f64 {
    let (s, w) = samples
        .iter()
        .fold((0.0, 0.0), |(s, w), &(v, wt)| (s + v * wt, w + wt));
    s / w
}

fn mean_deviation(samples: &[(f64, f64)], c: f64) -> f64 {
    let (s, w) = samples.iter().fold((0.0, 0.0), |(s, w), &(v, wt)| {
        (s + (v - c).abs() * wt, w + wt)
    });
    s / w
}

/// Lower weighted median; sorts `samples` in place.
fn weighted_median(samples: &mut [(f64, f64)]) -> f64 {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    for &(v, w) in samples.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    samples.last().map(|s| s.0).unwrap_or(0.0)
}

fn samples_of(u: &SampledField, q: &ParabolicCube) -> Result<Vec<(f64, f64)>> {
    let mut buf = Vec::new();
    if weighted_samples(u, &q.as_box(), &mut buf) {
        Ok(buf)
    } else {
        Err(Error::EmptyCube)
    }
}

/// Cell-weighted volume of the part of `q` covered by the grid.
pub fn discrete_volume(grid: &AnisotropicGrid, q: &ParabolicCube) -> f64 {
    let probe = SampledField::zeros(grid.clone());
    let mut buf = Vec::new();
    weighted_samples(&probe, &q.as_box(), &mut buf);
    buf.iter().map(|s| s.1).sum::<f64>() * grid.cell_volume()
}

pub fn cube_mean(u: &SampledField, q: &ParabolicCube) -> Result<f64> {
    Ok(weighted_mean(&samples_of(u, q)?))
}

/// Mean absolute deviation from the cube mean.
pub fn oscillation(u: &SampledField, q: &ParabolicCube) -> Result<f64> {
    let s = samples_of(u, q)?;
    Ok(mean_deviation(&s, weighted_mean(&s)))
}

/// `inf_c` of the mean absolute deviation from `c`, with the minimising `c`.
pub fn inf_oscillation(u: &SampledField, q: &ParabolicCube) -> Result<(f64, f64)> {
    let mut s = samples_of(u, q)?;
    let c = weighted_median(&mut s);
    Ok((mean_deviation(&s, c), c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BmoForm {
    Oscillation,
    Inf,
}

impl std::str::FromStr for BmoForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscillation" | "osc" => Ok(Self::Oscillation),
            "inf" => Ok(Self::Inf),
            other => Err(Error::InvalidParameter(format!(
                "unknown BMO form {other:?}"
            ))),
        }
    }
}

/// Which cubes the BMO supremum runs over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSearchPolicy {
    /// Explicit radii; when absent, a dyadic ladder from the largest admissible radius.
    pub radii: Option<Vec<f64>>,
    /// Smallest cube side, in grid cells along each spatial axis.
    pub min_cells: f64,
    /// Centre spacing as a fraction of `r` in space and of `r^2` in time.
    pub stride: f64,
}

impl Default for CubeSearchPolicy {
    fn default() -> Self {
        Self {
            radii: None,
            min_cells: 3.0,
            stride: 0.5,
        }
    }
}

impl CubeSearchPolicy {
    pub fn with_stride(mut self, stride: f64) -> Self {
        self.stride = stride;
        self
    }

    /// Radii the policy visits on `domain` sampled by `grid`.
    pub fn radii_for(&self, grid: &AnisotropicGrid, domain: &SpaceTimeBox) -> Vec<f64> {
        let n = grid.n();
        let floor = 0.5 * self.min_cells * (0..n).map(|a| grid.spacing(a)).fold(0.0, f64::max);
        let r_max = (0..n)
            .map(|a| domain.len(a) / 2.0)
            .fold((domain.len(n) / 2.0).sqrt(), f64::min);
        let mut radii: Vec<f64> = match &self.radii {
            Some(list) => list
                .iter()
                .copied()
                .filter(|&r| r <= r_max * (1.0 + 1e-12))
                .collect(),
            None => {
                let mut v = Vec::new();
                let mut r = r_max;
                while r >= floor * (1.0 - 1e-12) {
                    v.push(r);
                    r *= 0.5;
                }
                v
            }
        };
        radii.retain(|&r| r >= floor * (1.0 - 1e-12));
        radii
    }

    /// The deterministic cube family inside `domain`.
    pub fn family(&self, grid: &AnisotropicGrid, domain: &SpaceTimeBox) -> Vec<ParabolicCube> {
        let n = grid.n();
        let mut cubes = Vec::new();
        for r in self.radii_for(grid, domain) {
            let halves: Vec<f64> = (0..=n).map(|a| if a == n { r * r } else { r }).collect();
            let positions: Vec<Vec<f64>> = (0..=n)
                .map(|a| {
                    let step = self.stride * halves[a];
                    let lo = domain.lo[a] + halves[a];
                    let span = domain.len(a) - 2.0 * halves[a];
                    let count = ((span / step) * (1.0 + 1e-12)).floor().max(0.0) as usize + 1;
                    // centre the lattice of positions inside the admissible span
                    let pad = 0.5 * (span - (count - 1) as f64 * step).max(0.0);
                    (0..count).map(|i| lo + pad + i as f64 * step).collect()
                })
                .collect();
            let mut counter = vec![0usize; n + 1];
            'outer: loop {
                let center = (0..=n).map(|a| positions[a][counter[a]]).collect();
                cubes.push(ParabolicCube { center, radius: r });
                let mut a = n + 1;
                loop {
                    if a == 0 {
                        break 'outer;
                    }
                    a -= 1;
                    counter[a] += 1;
                    if counter[a] < positions[a].len() {
                        break;
                    }
                    counter[a] = 0;
                }
            }
        }
        cubes
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BmoResult {
    pub value: f64,
    pub argmax_cube: ParabolicCube,
    pub form: BmoForm,
    pub cubes_evaluated: usize,
    pub radii: Vec<f64>,
    pub policy: CubeSearchPolicy,
}

fn cube_functional(
    u: &SampledField,
    q: &ParabolicCube,
    form: BmoForm,
    buf: &mut Vec<(f64, f64)>,
) -> f64 {
    if !weighted_samples(u, &q.as_box(), buf) {
        return 0.0;
    }
    match form {
        BmoForm::Oscillation => mean_deviation(buf, weighted_mean(buf)),
        BmoForm::Inf => {
            let c = weighted_median(buf);
            mean_deviation(buf, c)
        }
    }
}

/// Supremum of the per-cube functional over the policy's family in `domain`.
pub fn bmo_norm(
    u: &SampledField,
    domain: &SpaceTimeBox,
    policy: &CubeSearchPolicy,
    form: BmoForm,
) -> Result<BmoResult> {
    let g = u.grid();
    let tol = 1e-9 * (0..g.ndim()).map(|a| g.axis_len(a)).fold(1.0, f64::max);
    if !g.extent().contains_box(domain, tol) {
        return Err(Error::InvalidParameter(
            "domain is not inside the grid".into(),
        ));
    }
    let family = policy.family(g, domain);
    if family.is_empty() {
        return Err(Error::EmptyFamily(format!(
            "no admissible cube of at least {} cells fits in the domain",
            policy.min_cells
        )));
    }
    let (value, arg) = family
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |buf, (i, q)| {
            (cube_functional(u, q, form, buf), i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(BmoResult {
        value: value.max(0.0),
        argmax_cube: family[arg].clone(),
        form,
        cubes_evaluated: family.len(),
        radii: policy.radii_for(g, domain),
        policy: policy.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlineBmo {
    pub bmo: f64,
    pub l1: f64,
    pub value: f64,
}

/// Inf-form BMO plus the `L^1` norm over `domain`.
pub fn overline_bmo_norm(
    u: &SampledField,
    domain: &SpaceTimeBox,
    policy: &CubeSearchPolicy,
) -> Result<OverlineBmo> {
    let bmo = bmo_norm(u, domain, policy, BmoForm::Inf)?.value;
    let l1 = crate::norms::lp_norm(u, crate::Exponent::Finite(1.0), domain)?;
    Ok(OverlineBmo {
        bmo,
        l1,
        value: bmo + l1,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanEstimateReport {
    pub difference: f64,
    pub steps: u32,
    pub bmo: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Relative slack granted to the mean estimate for grid effects.
pub const MEAN_ESTIMATE_SLACK: f64 = 0.02;

/// `|u_outer - u_inner| <= i (1 + 2^{n+2}) bmo` for radii in ratio `2^i`.
pub fn mean_estimate_check(
    u: &SampledField,
    inner: &ParabolicCube,
    outer: &ParabolicCube,
    bmo: f64,
) -> Result<MeanEstimateReport> {
    if !outer.contains(inner) {
        return Err(Error::NotNested);
    }
    let ratio = outer.radius / inner.radius;
    let steps = ratio.log2().round();
    if steps < 1.0 || (2f64.powf(steps) - ratio).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter(format!(
            "radius ratio {ratio} is not a power 2^i with i >= 1"
        )));
    }
    let n = inner.n() as i32;
    let difference = (cube_mean(u, outer)? - cube_mean(u, inner)?).abs();
    let bound = steps * (1.0 + 2f64.powi(n + 2)) * bmo;
    let slack = MEAN_ESTIMATE_SLACK * bound;
    Ok(MeanEstimateReport {
        difference,
        steps: steps as u32,
        bmo,
        bound,
        slack,
        holds: difference <= bound + slack + 1e-12,
    })
}
