//! Higher-order reflection across the faces of a space-time box, the smooth
//! cut-off, and localization of the extended field onto a periodic box.
//!
//! Along one axis with the box `[a, b]` of length `l`, the extension is
//! `sum_j c_j u(a + lambda_j (a - s))` left of `a` and
//! `sum_j c_j u(b - lambda_j (s - b))` right of `b`, with `lambda_j = 2^-j`.
//! The coefficients solve `sum_j c_j (-lambda_j)^k = 1` for `k < L`, which makes
//! the first `L - 1` derivatives continuous across the faces.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField, SpaceTimeBox};
use crate::littlewood_paley::transition;

pub const MAX_TERMS: usize = 8;
pub const CUTOFF_VERSION: &str = "box-splice-v1";
pub const DEFAULT_BOX_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionScheme {
    coeffs: Vec<f64>,
    nodes: Vec<f64>,
}

impl ExtensionScheme {
    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Compression factors `2^-j`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `sum_j c_j (-lambda_j)^k - 1` for `k = 0..L-1`. Each product is exact
    /// (the nodes are powers of two), so a compensated sum isolates the
    /// rounding of the coefficients themselves.
    pub fn residuals(&self) -> Vec<f64> {
        (0..self.terms())
            .map(|k| {
                let terms = self
                    .coeffs
                    .iter()
                    .zip(&self.nodes)
                    .map(|(c, l)| c * (-l).powi(k as i32))
                    .chain(std::iter::once(-1.0));
                compensated_sum(terms)
            })
            .collect()
    }

    /// `sum_j |c_j| / lambda_j`: bound on the `L^1` mass of one reflected strip
    /// relative to the source.
    pub fn strip_mass_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.nodes)
            .map(|(c, l)| c.abs() / l)
            .sum()
    }

    /// Lagrange degree used for off-lattice reflected points.
    pub fn interpolation_degree(&self) -> usize {
        (2 * self.terms() - 1).max(3)
    }
}

/// Neumaier summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Exact solution of the matching system, rounded once to `f64`.
pub fn exact_coeffs(terms: usize) -> Result<Vec<BigRational>> {
    if !(1..=MAX_TERMS).contains(&terms) {
        return Err(Error::InvalidParameter(format!(
            "extension needs 1..={MAX_TERMS} terms, got {terms}"
        )));
    }
    let node = |j: usize| -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(2u32).pow(j as u32))
    };
    // rows k, columns j: (-lambda_j)^k, augmented with 1
    let mut a: Vec<Vec<BigRational>> = (0..terms)
        .map(|k| {
            let mut row: Vec<BigRational> = (0..terms)
                .map(|j| {
                    let mut v = BigRational::one();
                    let neg = -node(j);
                    for _ in 0..k {
                        v *= &neg;
                    }
                    v
                })
                .collect();
            row.push(BigRational::one());
            row
        })
        .collect();
    for col in 0..terms {
        let pivot = (col..terms)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::InvalidParameter("singular matching system".into()))?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &p;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= &f * pv;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[terms].clone()).collect())
}

pub fn vandermonde_coeffs(terms: usize) -> Result<ExtensionScheme> {
    let exact = exact_coeffs(terms)?;
    let coeffs = exact
        .iter()
        .map(|c| c.to_f64().expect("rational coefficient fits in f64"))
        .collect();
    let nodes = (0..terms).map(|j| 0.5f64.powi(j as i32)).collect();
    Ok(ExtensionScheme { coeffs, nodes })
}

/// Lagrange weights of the `degree + 1` nodes nearest to fractional index `q`,
/// clamped to `0..len`.
fn lagrange_stencil(q: f64, len: usize, degree: usize) -> (usize, Vec<f64>) {
    let width = degree + 1;
    let start =
        (q.floor() as isize - (degree as isize - 1) / 2).clamp(0, (len - width) as isize) as usize;
    let weights = (0..width)
        .map(|i| {
            let xi = (start + i) as f64;
            (0..width)
                .filter(|&k| k != i)
                .map(|k| {
                    let xk = (start + k) as f64;
                    (q - xk) / (xi - xk)
                })
                .product()
        })
        .collect();
    (start, weights)
}

/// Reflected source position, in fractional cell index, of output cell `i` for node `lam`.
fn reflected_index(i: usize, len: usize, lam: f64) -> f64 {
    // local coordinate in cells with the source box at [0, len]
    let s = i as f64 + 0.5 - len as f64;
    let p = if s < 0.0 {
        -lam * s
    } else {
        len as f64 - lam * (s - len as f64)
    };
    p - 0.5
}

/// Worst first-order rounding amplification of the extension along an axis of
/// `len` cells: max over output cells of `sum_j |c_j| * sum_k |w_jk|`. Times
/// `eps * max|u|` it bounds the error from rounding the inputs, coefficients and weights.
pub fn rounding_amplification(scheme: &ExtensionScheme, len: usize) -> Result<f64> {
    let degree = scheme.interpolation_degree();
    if len < degree + 1 {
        return Err(Error::InsufficientResolution(format!(
            "{len} cells cannot carry a degree-{degree} stencil"
        )));
    }
    let amp = (0..3 * len)
        .filter(|i| !(len..2 * len).contains(i))
        .map(|i| {
            scheme
                .coeffs
                .iter()
                .zip(&scheme.nodes)
                .map(|(c, &lam)| {
                    let (_, w) = lagrange_stencil(reflected_index(i, len, lam), len, degree);
                    c.abs() * w.iter().map(|v| v.abs()).sum::<f64>()
                })
                .sum::<f64>()
        })
        .fold(1.0, f64::max);
    Ok(amp)
}

/// One output index along the active axis as a sparse combination of source indices.
type AxisRow = Vec<(usize, f64)>;

fn extension_rows(len: usize, scheme: &ExtensionScheme) -> Vec<AxisRow> {
    let degree = scheme.interpolation_degree();
    let mut rows = Vec::with_capacity(3 * len);
    for i in 0..3 * len {
        if (len..2 * len).contains(&i) {
            rows.push(vec![(i - len, 1.0)]);
            continue;
        }
        let mut row: AxisRow = Vec::new();
        for (c, &lam) in scheme.coeffs.iter().zip(&scheme.nodes) {
            let (start, w) = lagrange_stencil(reflected_index(i, len, lam), len, degree);
            for (k, wk) in w.into_iter().enumerate() {
                let idx = start + k;
                match row.iter_mut().find(|(j, _)| *j == idx) {
                    Some(e) => e.1 += c * wk,
                    None => row.push((idx, c * wk)),
                }
            }
        }
        rows.push(row);
    }
    rows
}

/// Applies a per-axis linear map to every line of `u` along `axis`.
fn map_axis(
    u: &SampledField,
    axis: usize,
    out_grid: AnisotropicGrid,
    rows: &[AxisRow],
) -> Result<SampledField> {
    let g = u.grid();
    let stride = g.strides()[axis];
    let s_in = g.shape()[axis];
    let s_out = rows.len();
    let src = u.values();
    let mut out = vec![0.0; out_grid.len()];
    out.par_chunks_mut(s_out * stride)
        .enumerate()
        .for_each(|(o, block)| {
            let base = o * s_in * stride;
            for (i, row) in rows.iter().enumerate() {
                let dst = &mut block[i * stride..(i + 1) * stride];
                for &(j, w) in row {
                    let line = &src[base + j * stride..base + (j + 1) * stride];
                    for (d, v) in dst.iter_mut().zip(line) {
                        *d += w * v;
                    }
                }
            }
        });
    SampledField::new(out_grid, out)
}

/// Extends `u` by one box length on both sides of `axis`; the result lives on a bounded grid.
pub fn extend_axis(
    u: &SampledField,
    axis: usize,
    scheme: &ExtensionScheme,
) -> Result<SampledField> {
    let g = u.grid();
    if axis >= g.ndim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let len = g.shape()[axis];
    let degree = scheme.interpolation_degree();
    if len < degree + 1 {
        return Err(Error::InsufficientResolution(format!(
            "degree-{degree} interpolation needs {} samples along axis {axis}, found {len}",
            degree + 1
        )));
    }
    let mut box_len = g.box_len().to_vec();
    let mut time_len = g.time_len();
    let mut shape = g.shape().to_vec();
    let mut origin = g.origin().to_vec();
    if axis == g.time_axis() {
        time_len *= 3.0;
    } else {
        box_len[axis] *= 3.0;
    }
    shape[axis] *= 3;
    origin[axis] -= g.axis_len(axis);
    let out_grid = AnisotropicGrid::with_origin(g.n(), box_len, time_len, shape, origin)?.bounded();
    map_axis(u, axis, out_grid, &extension_rows(len, scheme))
}

/// Terms used on `axis`: `2m` in space, `m` in time.
pub fn terms_for_axis(grid: &AnisotropicGrid, axis: usize, m: u32) -> usize {
    if axis == grid.time_axis() {
        m as usize
    } else {
        2 * m as usize
    }
}

/// Successive extension along `x_1, ..., x_n`, then `t`, onto the tripled box.
pub fn extend_full(u: &SampledField, m: u32) -> Result<SampledField> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let mut cur = u.clone();
    for axis in 0..u.grid().ndim() {
        let scheme = vandermonde_coeffs(terms_for_axis(u.grid(), axis, m))?;
        cur = extend_axis(&cur, axis, &scheme)?;
    }
    Ok(cur)
}

/// Cut-off equal to one on the box grown by a quarter length per side and
/// vanishing outside the box grown by three quarters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub domain: SpaceTimeBox,
}

impl CutoffSpec {
    pub fn new(domain: SpaceTimeBox) -> Self {
        Self { domain }
    }

    fn grown(&self, frac: f64) -> SpaceTimeBox {
        let d = &self.domain;
        SpaceTimeBox {
            lo: (0..d.ndim()).map(|a| d.lo[a] - frac * d.len(a)).collect(),
            hi: (0..d.ndim()).map(|a| d.hi[a] + frac * d.len(a)).collect(),
        }
    }

    pub fn inner(&self) -> SpaceTimeBox {
        self.grown(0.25)
    }

    pub fn outer(&self) -> SpaceTimeBox {
        self.grown(0.75)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let inner = self.inner();
        (0..self.domain.ndim())
            .map(|a| {
                let d = (inner.lo[a] - z[a]).max(z[a] - inner.hi[a]).max(0.0);
                transition(1.0 + d / (0.5 * self.domain.len(a)))
            })
            .product()
    }
}

pub fn build_cutoff(spec: &CutoffSpec, grid: &AnisotropicGrid) -> Result<SampledField> {
    let tol = 1e-12 * spec.domain.len(0).max(1.0);
    if !grid.extent().contains_box(&spec.outer(), tol) {
        return Err(Error::InvalidParameter(
            "grid box does not contain the cut-off support".into(),
        ));
    }
    SampledField::from_fn(grid.clone(), |z| spec.value(z))
}

/// Periodic grid `factor` times the size of `domain_grid` on every axis,
/// centred on it, with the same spacing and node alignment.
pub fn periodic_target(domain_grid: &AnisotropicGrid, factor: f64) -> Result<AnisotropicGrid> {
    if !(factor >= 3.0) {
        return Err(Error::InvalidParameter(format!(
            "box factor must be at least 3, got {factor}"
        )));
    }
    let g = domain_grid;
    let mut shape = Vec::with_capacity(g.ndim());
    let mut origin = Vec::with_capacity(g.ndim());
    for a in 0..g.ndim() {
        let s = g.shape()[a] as f64;
        let total = factor * s;
        let offset = 0.5 * (factor - 1.0) * s;
        if total.fract() != 0.0 || offset.fract() != 0.0 || !(total as usize).is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "box factor {factor} does not align with {} samples on axis {a}",
                g.shape()[a]
            )));
        }
        shape.push(total as usize);
        origin.push(g.origin()[a] - offset * g.spacing(a));
    }
    let lens: Vec<f64> = (0..g.ndim()).map(|a| factor * g.axis_len(a)).collect();
    AnisotropicGrid::with_origin(g.n(), lens[..g.n()].to_vec(), lens[g.n()], shape, origin)
}

/// Integer cell offset of `inner`'s origin within `outer`, per axis, when the lattices align.
fn cell_offsets(inner: &AnisotropicGrid, outer: &AnisotropicGrid) -> Result<Vec<isize>> {
    (0..inner.ndim())
        .map(|a| {
            let h = inner.spacing(a);
            if (h - outer.spacing(a)).abs() > 1e-9 * h {
                return Err(Error::GridMismatch(format!("spacing differs on axis {a}")));
            }
            let off = (inner.origin()[a] - outer.origin()[a]) / h;
            if (off - off.round()).abs() > 1e-6 {
                return Err(Error::GridMismatch(format!("nodes misaligned on axis {a}")));
            }
            Ok(off.round() as isize)
        })
        .collect()
}

/// `psi * ut` zero-padded into the periodic `target`. The support of `psi` must
/// sit inside `target` with a margin of one smallest search cube.
pub fn localize(
    ut: &SampledField,
    psi: &SampledField,
    target: &AnisotropicGrid,
) -> Result<SampledField> {
    ut.check_same_grid(psi)?;
    let g = ut.grid();
    let offs = cell_offsets(g, target)?;
    let hmax = (0..g.n()).map(|a| g.spacing(a)).fold(0.0, f64::max);
    let r = 1.5 * hmax;
    let mut support: Option<(Vec<usize>, Vec<usize>)> = None;
    for (flat, &p) in psi.values().iter().enumerate() {
        if p != 0.0 {
            let idx = g.multi_index(flat);
            let s = support.get_or_insert_with(|| (idx.clone(), idx.clone()));
            for (a, &i) in idx.iter().enumerate() {
                s.0[a] = s.0[a].min(i);
                s.1[a] = s.1[a].max(i);
            }
        }
    }
    if let Some((lo, hi)) = &support {
        for a in 0..g.ndim() {
            let margin = if a == g.time_axis() { r * r } else { r };
            let cells = (margin / g.spacing(a)).ceil() as isize;
            let first = lo[a] as isize + offs[a];
            let last = hi[a] as isize + offs[a];
            if first - cells < 0 || last + cells >= target.shape()[a] as isize {
                return Err(Error::InvalidParameter(format!(
                    "cut-off support leaves no margin inside the target box on axis {a}"
                )));
            }
        }
    }
    let product = ut.zip_with(psi, |a, b| a * b)?;
    let mut out = vec![0.0; target.len()];
    for (flat, &v) in product.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = g.multi_index(flat);
        let tidx: Vec<isize> = idx
            .iter()
            .zip(&offs)
            .map(|(&i, &o)| i as isize + o)
            .collect();
        if tidx
            .iter()
            .zip(target.shape())
            .any(|(&i, &s)| i < 0 || i >= s as isize)
        {
            return Err(Error::InvalidParameter(
                "localized field leaves the target box".into(),
            ));
        }
        let t: Vec<usize> = tidx.iter().map(|&i| i as usize).collect();
        out[target.flat_index(&t)] = v;
    }
    SampledField::new(target.clone(), out)
}

/// Nodes of `u` whose centres lie inside `domain`, as a bounded field.
pub fn restrict_to_box(u: &SampledField, domain: &SpaceTimeBox) -> Result<SampledField> {
    let g = u.grid();
    let ranges: Vec<(usize, usize)> = (0..g.ndim())
        .map(|a| {
            let h = g.spacing(a);
            let lo = ((domain.lo[a] - g.origin()[a]) / h - 0.5).ceil().max(0.0) as usize;
            let hi = (((domain.hi[a] - g.origin()[a]) / h - 0.5).floor() + 1.0).max(0.0) as usize;
            (lo, hi.min(g.shape()[a]))
        })
        .collect();
    u.restrict_indices(&ranges)
}

/// The whole pipeline: extend, cut off, localize onto a periodic box `factor` times `u`'s box.
pub fn extend_and_localize(
    u: &SampledField,
    m: u32,
    box_factor: Option<f64>,
) -> Result<SampledField> {
    let ut = extend_full(u, m)?;
    let psi = build_cutoff(&CutoffSpec::new(u.grid().extent()), ut.grid())?;
    let target = periodic_target(u.grid(), box_factor.unwrap_or(DEFAULT_BOX_FACTOR))?;
    localize(&ut, &psi, &target)
}

/// Finite-difference weights for derivatives `0..=order` at `z` from nodes `x` (Fornberg).
pub fn fd_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeamMismatch {
    pub axis: usize,
    pub side: String,
    pub order: usize,
    /// Largest one-sided derivative disagreement over all lines crossing the seam.
    pub abs_mismatch: f64,
    /// Largest one-sided derivative magnitude at the seam.
    pub scale: f64,
    pub rel_mismatch: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeamReport {
    pub m: u32,
    pub mismatches: Vec<SeamMismatch>,
}

impl SeamReport {
    pub fn worst_relative(&self) -> f64 {
        self.mismatches
            .iter()
            .fold(0.0, |m, s| m.max(s.rel_mismatch))
    }

    /// Worst absolute mismatch at a given axis and derivative order.
    pub fn worst_at(&self, axis: usize, order: usize) -> f64 {
        self.mismatches
            .iter()
            .filter(|s| s.axis == axis && s.order == order)
            .fold(0.0, |m, s| m.max(s.abs_mismatch))
    }
}

/// Extends `u` along each axis on its own and compares one-sided polynomial-fit
/// derivatives of orders `0..L` on both sides of both faces.
pub fn seam_report(u: &SampledField, m: u32) -> Result<SeamReport> {
    let g = u.grid();
    let mut mismatches = Vec::new();
    for axis in 0..g.ndim() {
        let terms = terms_for_axis(g, axis, m);
        let scheme = vandermonde_coeffs(terms)?;
        let ext = extend_axis(u, axis, &scheme)?;
        let eg = ext.grid();
        let len = g.shape()[axis];
        let fit = (2 * terms).min(len);
        let h = g.spacing(axis);
        let nodes: Vec<f64> = (0..fit).map(|i| (i as f64 + 0.5) * h).collect();
        let neg: Vec<f64> = nodes.iter().map(|x| -x).collect();
        let w_in = fd_weights(0.0, &nodes, terms - 1);
        let w_out = fd_weights(0.0, &neg, terms - 1);
        let stride = eg.strides()[axis];
        let s_out = eg.shape()[axis];
        let lines: Vec<usize> = (0..eg.len() / s_out)
            .map(|l| (l / stride) * s_out * stride + l % stride)
            .collect();
        for (side, seam) in [("low", len), ("high", 2 * len)] {
            for k in 0..terms {
                let mut worst: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for &base in &lines {
                    let at = |i: usize| ext.values()[base + i * stride];
                    // "inside" the source box is above the low seam and below the high seam
                    let (above, below): (f64, f64) = (
                        (0..fit).map(|i| w_in[k][i] * at(seam + i)).sum(),
                        (0..fit).map(|i| w_out[k][i] * at(seam - 1 - i)).sum(),
                    );
                    worst = worst.max((above - below).abs());
                    scale = scale.max(above.abs()).max(below.abs());
                }
                mismatches.push(SeamMismatch {
                    axis,
                    side: side.to_string(),
                    order: k,
                    abs_mismatch: worst,
                    scale,
                    rel_mismatch: worst / scale.max(1e-12),
                });
            }
        }
    }
    Ok(SeamReport { m, mismatches })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassReport {
    pub source_l1: f64,
    pub extended_l1: f64,
    pub ratio: f64,
    /// `prod_axes (1 + 2 * strip bound)`.
    pub bound: f64,
}

/// `L^1` mass of the full extension against that of the source.
pub fn extension_mass_report(u: &SampledField, m: u32) -> Result<MassReport> {
    let ut = extend_full(u, m)?;
    let l1 =
        |f: &SampledField| f.values().iter().map(|v| v.abs()).sum::<f64>() * f.grid().cell_volume();
    let source_l1 = l1(u);
    let extended_l1 = l1(&ut);
    let bound = (0..u.grid().ndim())
        .map(|a| {
            vandermonde_coeffs(terms_for_axis(u.grid(), a, m))
                .map(|s| 1.0 + 2.0 * s.strip_mass_bound())
        })
        .product::<Result<f64>>()?;
    Ok(MassReport {
        source_l1,
        extended_l1,
        ratio: if source_l1 > 0.0 {
            extended_l1 / source_l1
        } else {
            0.0
        },
        bound,
    })
}
