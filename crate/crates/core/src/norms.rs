//! `L^p` norms, spectral derivatives and the parabolic Sobolev norm `W_2^{2m,m}`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cubes::weighted_samples;
use crate::error::{Error, Result};
use crate::grid::{SampledField, SpaceTimeBox};
use crate::littlewood_paley::Exponent;
use crate::spectral::{
    angular_frequencies, forward_transform, inverse_transform_unchecked, SpectralField,
};

/// Cell-sum `L^p` norm over `domain`, partial cells weighted by overlap.
pub fn lp_norm(u: &SampledField, p: Exponent, domain: &SpaceTimeBox) -> Result<f64> {
    let mut buf = Vec::new();
    if !weighted_samples(u, domain, &mut buf) {
        return Err(Error::InvalidParameter(
            "domain does not meet the grid".into(),
        ));
    }
    let cell = u.grid().cell_volume();
    Ok(match p {
        Exponent::Infinite => buf.iter().fold(0.0, |m, (v, _)| m.max(v.abs())),
        Exponent::Finite(p) => {
            (buf.iter().map(|(v, w)| w * v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
        }
    })
}

/// The index set `{(r, s) : 2r + s <= 2m}` of the parabolic Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SobolevOrder {
    pub m: u32,
}

impl SobolevOrder {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "Sobolev order m must be positive".into(),
            ));
        }
        Ok(Self { m })
    }

    /// Pairs `(r, s)`: time order `r`, total spatial order `s`.
    pub fn index_set(&self) -> Vec<(u32, u32)> {
        let top = 2 * self.m;
        let mut out = Vec::new();
        for r in 0..=self.m {
            for s in 0..=(top - 2 * r) {
                out.push((r, s));
            }
        }
        out.sort_by_key(|&(r, s)| (2 * r + s, r));
        out
    }

    /// Every `(r, alpha)` with `alpha` a spatial multi-index, `2r + |alpha| <= 2m`.
    pub fn derivatives(&self, n: usize) -> Vec<(u32, Vec<u32>)> {
        self.index_set()
            .into_iter()
            .flat_map(|(r, s)| multi_indices(n, s).into_iter().map(move |a| (r, a)))
            .collect()
    }

    /// `m > (n + 2) / 4`, the embedding hypothesis.
    pub fn embeds_in_sup(&self, n: usize) -> bool {
        4 * self.m as usize > n + 2
    }
}

/// All multi-indices of length `n` with total order `s`.
pub fn multi_indices(n: usize, s: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![s]];
    }
    (0..=s)
        .rev()
        .flat_map(|first| {
            multi_indices(n - 1, s - first)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `(i tau)^r prod (i xi_a)^{alpha_a}` on the lattice. Odd powers vanish at the
/// Nyquist index so the output stays real.
pub(crate) fn derivative_multiplier(
    grid: &crate::grid::AnisotropicGrid,
    time_order: u32,
    alpha: &[u32],
) -> Vec<Complex64> {
    let n = grid.n();
    let orders: Vec<u32> = alpha
        .iter()
        .copied()
        .chain(std::iter::once(time_order))
        .collect();
    let per_axis: Vec<Vec<f64>> = (0..=n)
        .map(|a| {
            let w = angular_frequencies(grid, a);
            let s = grid.shape()[a];
            w.iter()
                .enumerate()
                .map(|(i, &om)| {
                    if orders[a] % 2 == 1 && i == s / 2 {
                        0.0
                    } else {
                        om.powi(orders[a] as i32)
                    }
                })
                .collect()
        })
        .collect();
    let phase = i_pow(orders.iter().sum());
    (0..grid.len())
        .map(|flat| {
            let idx = grid.multi_index(flat);
            let mag: f64 = (0..=n).map(|a| per_axis[a][idx[a]]).product();
            phase * mag
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SpectralDerivative {
    pub field: SampledField,
    /// Set when the input carries energy near the Nyquist frequency of a differentiated axis.
    pub under_resolved: bool,
}

/// Fraction of spectral energy in the outer quarter of a differentiated axis above which
/// a derivative is flagged as under-resolved.
pub const BANDWIDTH_WARNING_FRACTION: f64 = 1e-6;

fn outer_band_fraction(spec: &SpectralField, axes: &[usize]) -> f64 {
    let g = spec.grid();
    let total: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = (0..g.len())
        .filter(|&flat| {
            let idx = g.multi_index(flat);
            axes.iter().any(|&a| {
                let s = g.shape()[a];
                crate::spectral::signed_index(idx[a], s).unsigned_abs() as usize * 4 > 3 * (s / 2)
            })
        })
        .map(|flat| spec.coeffs()[flat].norm_sqr())
        .sum();
    outer / total
}

pub fn spectral_derivative(
    u: &SampledField,
    time_order: u32,
    alpha: &[u32],
) -> Result<SpectralDerivative> {
    let g = u.grid();
    if alpha.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "spatial multi-index needs {} entries",
            g.n()
        )));
    }
    if !g.is_periodic() {
        return Err(Error::InvalidParameter(
            "spectral derivatives need a periodic grid; extend and localize first".into(),
        ));
    }
    let spec = forward_transform(u);
    let axes: Vec<usize> = alpha
        .iter()
        .enumerate()
        .filter(|(_, &o)| o > 0)
        .map(|(a, _)| a)
        .chain((time_order > 0).then_some(g.time_axis()))
        .collect();
    let under_resolved =
        !axes.is_empty() && outer_band_fraction(&spec, &axes) > BANDWIDTH_WARNING_FRACTION;
    let field = inverse_transform_unchecked(
        &spec.apply_complex(&derivative_multiplier(g, time_order, alpha)),
    );
    Ok(SpectralDerivative {
        field,
        under_resolved,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolevReport {
    pub value: f64,
    /// `(r, alpha, ||D_t^r D_x^alpha u||_{L^2})` per term.
    pub terms: Vec<(u32, Vec<u32>, f64)>,
    pub under_resolved: bool,
}

/// Sum of `||D_t^r D_x^alpha u||_{L^2(domain)}` over `2r + |alpha| <= 2m`, for a
/// field on a periodic grid.
pub fn sobolev_on_periodic(
    u: &SampledField,
    order: SobolevOrder,
    domain: &SpaceTimeBox,
) -> Result<SobolevReport> {
    let g = u.grid();
    if !g.is_periodic() {
        return Err(Error::InvalidParameter("periodic grid required".into()));
    }
    let spec = forward_transform(u);
    let derivs = order.derivatives(g.n());
    let terms: Vec<Result<(u32, Vec<u32>, f64)>> = derivs
        .par_iter()
        .map(|(r, alpha)| {
            let d = inverse_transform_unchecked(
                &spec.apply_complex(&derivative_multiplier(g, *r, alpha)),
            );
            Ok((
                *r,
                alpha.clone(),
                lp_norm(&d, Exponent::Finite(2.0), domain)?,
            ))
        })
        .collect();
    let terms: Vec<(u32, Vec<u32>, f64)> = terms.into_iter().collect::<Result<_>>()?;
    let all_axes: Vec<usize> = (0..g.ndim()).collect();
    Ok(SobolevReport {
        value: terms.iter().map(|t| t.2).sum(),
        terms,
        under_resolved: outer_band_fraction(&spec, &all_axes) > BANDWIDTH_WARNING_FRACTION,
    })
}

/// Parabolic Sobolev norm over `domain`. Periodic fields are differentiated
/// directly; bounded fields are extended, cut off and localized first, and the
/// derivatives are then restricted back to `domain`.
pub fn parabolic_sobolev_norm(
    u: &SampledField,
    order: SobolevOrder,
    domain: &SpaceTimeBox,
) -> Result<SobolevReport> {
    if u.grid().is_periodic() {
        return sobolev_on_periodic(u, order, domain);
    }
    let localized = crate::extension::extend_and_localize(u, order.m, None)?;
    sobolev_on_periodic(&localized, order, domain)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub sup_norm: f64,
    pub sobolev_norm: f64,
    pub ratio: f64,
}

/// `||u||_inf / ||u||_{W_2^{2m,m}}` over the whole grid.
pub fn sobolev_embedding_check(u: &SampledField, order: SobolevOrder) -> Result<EmbeddingReport> {
    let n = u.grid().n();
    if !order.embeds_in_sup(n) {
        return Err(Error::InvalidParameter(format!(
            "embedding into L^inf needs m > (n+2)/4; m = {} is too small for n = {n}",
            order.m
        )));
    }
    let domain = u.grid().extent();
    let sobolev_norm = parabolic_sobolev_norm(u, order, &domain)?.value;
    let sup_norm = u.max_abs();
    let ratio = if sobolev_norm > 0.0 {
        sup_norm / sobolev_norm
    } else {
        0.0
    };
    Ok(EmbeddingReport {
        sup_norm,
        sobolev_norm,
        ratio,
    })
}
