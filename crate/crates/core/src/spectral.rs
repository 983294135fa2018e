//! Discrete Fourier transform on anisotropic grids.
//!
//! Normalisation is unitary: both directions carry `1/sqrt(N)` with `N` the
//! total node count, so `sum |u|^2 = sum |U|^2` and applying a multiplier in
//! frequency space is a periodic convolution with its discrete kernel. Any
//! `(2 pi)` factors of the continuum transform are absorbed; a multiplier that
//! is identically one reproduces the field exactly.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField};

/// Fourier coefficients of a real field, same row-major layout as the field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: AnisotropicGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: AnisotropicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &AnisotropicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `sum |U|^2 * cell volume`; equals the field's L2 energy.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Multiplies every coefficient by a real multiplier sampled on the lattice.
    pub fn apply_real(&self, multiplier: &[f64]) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(multiplier)
            .map(|(c, m)| c * m)
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn apply_complex(&self, multiplier: &[Complex64]) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(multiplier)
            .map(|(c, m)| c * m)
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Largest `|U(k) - conj(U(-k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        let mut mirror = vec![0usize; g.ndim()];
        for flat in 0..g.len() {
            let idx = g.multi_index(flat);
            for a in 0..g.ndim() {
                let s = g.shape()[a];
                mirror[a] = (s - idx[a]) % s;
            }
            let m = g.flat_index(&mirror);
            worst = worst.max((self.coeffs[flat] - self.coeffs[m].conj()).norm());
        }
        worst
    }
}

/// Signed integer wavenumber of FFT index `i` on an axis of `s` samples; the
/// Nyquist index maps to `+s/2`.
pub fn signed_index(i: usize, s: usize) -> i64 {
    if i <= s / 2 {
        i as i64
    } else {
        i as i64 - s as i64
    }
}

/// Angular frequencies `2 pi k / L` of every FFT index along `axis`.
pub fn angular_frequencies(grid: &AnisotropicGrid, axis: usize) -> Vec<f64> {
    let s = grid.shape()[axis];
    let l = grid.axis_len(axis);
    (0..s)
        .map(|i| 2.0 * std::f64::consts::PI * signed_index(i, s) as f64 / l)
        .collect()
}

fn fft_all_axes(grid: &AnisotropicGrid, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let shape = grid.shape();
    let strides = grid.strides();
    let total = grid.len();
    for axis in 0..grid.ndim() {
        let len = shape[axis];
        let stride = strides[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let outer = total / (len * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * len * stride + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
    let norm = 1.0 / (total as f64).sqrt();
    for v in data.iter_mut() {
        *v *= norm;
    }
}

pub fn forward_transform(f: &SampledField) -> SpectralField {
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_all_axes(f.grid(), &mut data, false);
    SpectralField {
        grid: f.grid().clone(),
        coeffs: data,
    }
}

/// Relative Hermitian defect tolerated by [`inverse_transform`].
pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn inverse_transform(spec: &SpectralField) -> Result<SampledField> {
    let scale = spec.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let defect = spec.hermitian_defect();
    if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
        return Err(Error::NonHermitian(defect));
    }
    Ok(inverse_transform_unchecked(spec))
}

/// Inverse transform keeping only the real part; callers guarantee symmetry.
pub(crate) fn inverse_transform_unchecked(spec: &SpectralField) -> SampledField {
    let mut data = spec.coeffs.clone();
    fft_all_axes(&spec.grid, &mut data, true);
    let values: Vec<f64> = data.iter().map(|c| c.re).collect();
    SampledField::new(spec.grid.clone(), values).expect("finite coefficients give finite samples")
}

/// `sum u^2 * cell volume`.
pub fn physical_energy(f: &SampledField) -> f64 {
    f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> AnisotropicGrid {
        AnisotropicGrid::new(1, vec![1.0], 2.0, vec![16, 8]).unwrap()
    }

    #[test]
    fn constant_goes_to_zero_mode() {
        let g = grid2();
        let f = SampledField::constant(g.clone(), 3.0);
        let s = forward_transform(&f);
        let expected = 3.0 * (g.len() as f64).sqrt();
        assert!((s.coeffs()[0].re - expected).abs() < 1e-12);
        for c in &s.coeffs()[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn cosine_has_two_conjugate_coefficients() {
        let g = grid2();
        let f = SampledField::from_fn(g.clone(), |z| (2.0 * PI * 3.0 * z[0]).cos()).unwrap();
        let s = forward_transform(&f);
        let nonzero: Vec<usize> = (0..g.len())
            .filter(|&i| s.coeffs()[i].norm() > 1e-10)
            .collect();
        assert_eq!(nonzero.len(), 2);
        let a = s.coeffs()[nonzero[0]];
        let b = s.coeffs()[nonzero[1]];
        assert!((a - b.conj()).norm() < 1e-12);
    }

    #[test]
    fn zero_spectrum_gives_zero_field() {
        let g = grid2();
        let s = SpectralField::new(g.clone(), vec![Complex64::new(0.0, 0.0); g.len()]).unwrap();
        let f = inverse_transform(&s).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_hermitian_rejected() {
        let g = grid2();
        let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
        c[1] = Complex64::new(1.0, 0.0);
        let s = SpectralField::new(g, c).unwrap();
        assert!(matches!(inverse_transform(&s), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn gaussian_roundtrip() {
        let g = AnisotropicGrid::with_origin(1, vec![8.0], 8.0, vec![32, 64], vec![-4.0, -4.0])
            .unwrap();
        let f = SampledField::from_fn(g, |z| (-(z[0] * z[0] + z[1] * z[1])).exp()).unwrap();
        let back = inverse_transform(&forward_transform(&f)).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn signed_indices() {
        let s = 8;
        let got: Vec<i64> = (0..s).map(|i| signed_index(i, s)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }
}
