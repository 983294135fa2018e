//! Anisotropic space-time grids and the fields sampled on them.
//!
//! A point is `z = (x_1, ..., x_n, t)`: spatial coordinates first, time last.
//! Nodes sit at cell centres, `origin + (i + 1/2) * spacing` on every axis, and
//! field values are stored row-major with the time axis varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max(|x_1|, ..., |x_n|, |t|^{1/2})`. The last coordinate is time.
pub fn parabolic_distance(z: &[f64]) -> f64 {
    let (t, x) = z.split_last().expect("point needs a time coordinate");
    x.iter().fold(t.abs().sqrt(), |acc, xi| acc.max(xi.abs()))
}

/// The dilation `(eta x, eta^2 t)`; `parabolic_distance` is homogeneous of degree one under it.
pub fn anisotropic_dilate(z: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive, got {eta}"
        )));
    }
    let last = z.len() - 1;
    Ok(z.iter()
        .enumerate()
        .map(|(i, &c)| if i == last { eta * eta * c } else { eta * c })
        .collect())
}

/// A uniform cell-centred grid over `n` spatial axes and one time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicGrid {
    n: usize,
    box_len: Vec<f64>,
    time_len: f64,
    shape: Vec<usize>,
    origin: Vec<f64>,
    periodic: bool,
}

impl AnisotropicGrid {
    /// Periodic grid with its lower corner at the origin.
    pub fn new(n: usize, box_len: Vec<f64>, time_len: f64, shape: Vec<usize>) -> Result<Self> {
        let origin = vec![0.0; n + 1];
        Self::with_origin(n, box_len, time_len, shape, origin)
    }

    pub fn with_origin(
        n: usize,
        box_len: Vec<f64>,
        time_len: f64,
        shape: Vec<usize>,
        origin: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension {n} not in {{1, 2}}"
            )));
        }
        if box_len.len() != n {
            return Err(Error::InvalidGrid(format!(
                "expected {n} spatial lengths, got {}",
                box_len.len()
            )));
        }
        if shape.len() != n + 1 || origin.len() != n + 1 {
            return Err(Error::InvalidGrid(format!(
                "shape and origin need {} entries (spatial axes then time)",
                n + 1
            )));
        }
        for &s in &shape {
            if s < 4 || s % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "every axis needs an even sample count >= 4, got {s}"
                )));
            }
        }
        for &l in box_len.iter().chain(std::iter::once(&time_len)) {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis length must be positive, got {l}"
                )));
            }
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            n,
            box_len,
            time_len,
            shape,
            origin,
            periodic: true,
        })
    }

    /// Same grid flagged as a bounded (non-periodic) domain.
    pub fn bounded(mut self) -> Self {
        self.periodic = false;
        self
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ndim(&self) -> usize {
        self.n + 1
    }

    pub fn time_axis(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> &[f64] {
        &self.box_len
    }

    pub fn time_len(&self) -> f64 {
        self.time_len
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Physical extent of `axis` (time is the last axis).
    pub fn axis_len(&self, axis: usize) -> f64 {
        if axis == self.n {
            self.time_len
        } else {
            self.box_len[axis]
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axis_len(axis) / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.axis_len(a)).product()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides, time axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.ndim()];
        for a in (0..self.ndim() - 1).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    pub fn node_coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    /// Physical coordinates of every node along `axis`.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis])
            .map(|i| self.node_coord(axis, i))
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.node_coord(a, i))
            .collect()
    }

    /// The whole grid as a box.
    pub fn extent(&self) -> SpaceTimeBox {
        let hi = (0..self.ndim())
            .map(|a| self.origin[a] + self.axis_len(a))
            .collect();
        SpaceTimeBox {
            lo: self.origin.clone(),
            hi,
        }
    }

    /// Same geometry, different samples per axis.
    pub fn resampled(&self, shape: Vec<usize>) -> Result<Self> {
        let g = Self::with_origin(
            self.n,
            self.box_len.clone(),
            self.time_len,
            shape,
            self.origin.clone(),
        )?;
        Ok(if self.periodic { g } else { g.bounded() })
    }

    /// Grid refined by `factor` on every axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        self.resampled(self.shape.iter().map(|s| s * factor).collect())
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        const TOL: f64 = 1e-12;
        self.n == other.n
            && self.shape == other.shape
            && (0..self.ndim()).all(|a| {
                (self.axis_len(a) - other.axis_len(a)).abs() <= TOL * self.axis_len(a)
                    && (self.origin[a] - other.origin[a]).abs() <= TOL * self.axis_len(a).max(1.0)
            })
    }

    /// Per-axis cell overlap with `[lo, hi]`: first cell index and the overlap
    /// fraction of each touched cell. `None` when the box misses the grid.
    pub fn overlap_fractions(&self, b: &SpaceTimeBox) -> Option<Vec<(usize, Vec<f64>)>> {
        let mut out = Vec::with_capacity(self.ndim());
        for a in 0..self.ndim() {
            let h = self.spacing(a);
            let lo = (b.lo[a] - self.origin[a]) / h;
            let hi = (b.hi[a] - self.origin[a]) / h;
            let lo = lo.max(0.0);
            let hi = hi.min(self.shape[a] as f64);
            if !(hi > lo) {
                return None;
            }
            let first = lo.floor() as usize;
            let last = ((hi.ceil() as usize).max(first + 1)).min(self.shape[a]);
            let fracs: Vec<f64> = (first..last)
                .map(|i| {
                    let c0 = i as f64;
                    (hi.min(c0 + 1.0) - lo.max(c0)).clamp(0.0, 1.0)
                })
                .collect();
            if fracs.iter().all(|&f| f == 0.0) {
                return None;
            }
            out.push((first, fracs));
        }
        Some(out)
    }
}

/// Axis-aligned box `[lo_a, hi_a]` per axis, time last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SpaceTimeBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() < 2 {
            return Err(Error::InvalidParameter(
                "box corners must have equal length >= 2".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidParameter(format!(
                "degenerate box {lo:?}..{hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `(0,1)^n x (0,T)`.
    pub fn unit_cylinder(n: usize, time_len: f64) -> Self {
        let mut hi = vec![1.0; n + 1];
        hi[n] = time_len;
        Self {
            lo: vec![0.0; n + 1],
            hi,
        }
    }

    pub fn ndim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.len(a)).product()
    }

    pub fn contains_box(&self, other: &SpaceTimeBox, tol: f64) -> bool {
        (0..self.ndim()).all(|a| other.lo[a] >= self.lo[a] - tol && other.hi[a] <= self.hi[a] + tol)
    }

    pub fn contains_point(&self, z: &[f64]) -> bool {
        (0..self.ndim()).all(|a| z[a] > self.lo[a] && z[a] < self.hi[a])
    }
}

/// Real samples on an [`AnisotropicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: AnisotropicGrid,
    values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: AnisotropicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: AnisotropicGrid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: AnisotropicGrid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: AnisotropicGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &AnisotropicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_lattice(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// Values of the nodes lying in `[lo_a, hi_a)` index ranges, as a field on the sub-grid.
    pub fn restrict_indices(&self, ranges: &[(usize, usize)]) -> Result<Self> {
        let g = &self.grid;
        if ranges.len() != g.ndim() {
            return Err(Error::InvalidParameter(
                "one index range per axis required".into(),
            ));
        }
        let mut shape = Vec::with_capacity(g.ndim());
        let mut origin = Vec::with_capacity(g.ndim());
        for (a, &(lo, hi)) in ranges.iter().enumerate() {
            if hi > g.shape()[a] || hi <= lo {
                return Err(Error::InvalidParameter(format!(
                    "bad index range {lo}..{hi} on axis {a}"
                )));
            }
            shape.push(hi - lo);
            origin.push(g.origin()[a] + lo as f64 * g.spacing(a));
        }
        let lens: Vec<f64> = (0..g.ndim())
            .map(|a| shape[a] as f64 * g.spacing(a))
            .collect();
        let sub = AnisotropicGrid::with_origin(
            g.n(),
            lens[..g.n()].to_vec(),
            lens[g.n()],
            shape.clone(),
            origin,
        )?
        .bounded();
        let strides = g.strides();
        let mut values = Vec::with_capacity(sub.len());
        for flat in 0..sub.len() {
            let idx = sub.multi_index(flat);
            let src: usize = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| (i + ranges[a].0) * strides[a])
                .sum();
            values.push(self.values[src]);
        }
        Self::new(sub, values)
    }

    /// Replaces the grid metadata (same shape) without touching the samples.
    pub fn with_grid(self, grid: AnisotropicGrid) -> Result<Self> {
        if grid.shape() != self.grid.shape() {
            return Err(Error::GridMismatch("shape differs".into()));
        }
        Ok(Self {
            grid,
            values: self.values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(parabolic_distance(&[0.5, 0.16]), 0.5);
        assert_eq!(parabolic_distance(&[0.0, 0.0]), 0.0);
        assert_eq!(parabolic_distance(&[0.3, -0.25]), 0.5);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(
            anisotropic_dilate(&[1.0, 1.0], 2.0).unwrap(),
            vec![2.0, 4.0]
        );
        let d = anisotropic_dilate(&[0.5, 0.16], 2.0).unwrap();
        assert!((parabolic_distance(&d) - 1.0).abs() < 1e-15);
        assert_eq!(
            anisotropic_dilate(&[0.3, -0.7], 1.0).unwrap(),
            vec![0.3, -0.7]
        );
        assert!(anisotropic_dilate(&[1.0, 1.0], 0.0).is_err());
        assert!(anisotropic_dilate(&[1.0, 1.0], -2.0).is_err());
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(AnisotropicGrid::new(1, vec![1.0], 1.0, vec![5, 8]).is_err());
        assert!(AnisotropicGrid::new(1, vec![1.0], 1.0, vec![2, 8]).is_err());
        assert!(AnisotropicGrid::new(3, vec![1.0; 3], 1.0, vec![4; 4]).is_err());
        assert!(AnisotropicGrid::new(1, vec![0.0], 1.0, vec![4, 4]).is_err());
        assert!(AnisotropicGrid::new(2, vec![1.0, 2.0], 1.0, vec![4, 6, 8]).is_ok());
    }

    #[test]
    fn index_roundtrip() {
        let g = AnisotropicGrid::new(2, vec![1.0, 2.0], 3.0, vec![4, 6, 8]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.strides(), vec![48, 8, 1]);
        assert!((g.cell_volume() * g.len() as f64 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![4, 4]).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(SampledField::new(g.clone(), v).is_err());
        assert!(SampledField::new(g, vec![0.0; 15]).is_err());
    }

    #[test]
    fn overlap_fractions_cover_partial_cells() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![4, 4]).unwrap();
        let b = SpaceTimeBox::new(vec![0.125, 0.0], vec![0.5, 1.0]).unwrap();
        let f = g.overlap_fractions(&b).unwrap();
        assert_eq!(f[0].0, 0);
        assert_eq!(f[0].1, vec![0.5, 1.0]);
        assert_eq!(f[1].1, vec![1.0; 4]);
        let outside = SpaceTimeBox::new(vec![2.0, 0.0], vec![3.0, 1.0]).unwrap();
        assert!(g.overlap_fractions(&outside).is_none());
    }

    #[test]
    fn restrict_keeps_values_and_positions() {
        let g = AnisotropicGrid::new(1, vec![2.0], 2.0, vec![8, 8]).unwrap();
        let f = SampledField::from_fn(g, |z| z[0] + 10.0 * z[1]).unwrap();
        let r = f.restrict_indices(&[(2, 6), (4, 8)]).unwrap();
        let rg = r.grid().clone();
        for i in 0..rg.len() {
            let z = rg.coords(i);
            assert!((r.values()[i] - (z[0] + 10.0 * z[1])).abs() < 1e-12);
        }
    }
}
