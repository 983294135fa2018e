//! Deterministic field generators used by the harness and the CLI.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField};
use crate::littlewood_paley::BumpProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FieldFamily {
    /// `max(0, min(M, log(radius / zeta_k(z - center))))`.
    LogSpike {
        amplitude: f64,
        radius: f64,
        /// Snapped to the nearest node; the grid centre when absent.
        center: Option<Vec<f64>>,
    },
    /// Random trigonometric polynomial with integer wavenumbers up to `max_mode`
    /// per axis (periodic on the grid box).
    Random {
        seed: u64,
        max_mode: u32,
        terms: u32,
    },
    /// Gaussian envelope times a spatial cosine of `frequency` cycles per unit length.
    Packet {
        frequency: f64,
        width: f64,
    },
    Constant {
        value: f64,
    },
}

impl FieldFamily {
    pub fn name(&self) -> String {
        match self {
            Self::LogSpike {
                amplitude, radius, ..
            } => format!("logspike(M={amplitude},rho={radius})"),
            Self::Random {
                seed,
                max_mode,
                terms,
            } => {
                format!("random(seed={seed},modes={max_mode},terms={terms})")
            }
            Self::Packet { frequency, width } => format!("packet(f={frequency},w={width})"),
            Self::Constant { value } => format!("const({value})"),
        }
    }

    pub fn sample(&self, grid: &AnisotropicGrid) -> Result<SampledField> {
        match self {
            Self::LogSpike {
                amplitude,
                radius,
                center,
            } => log_spike(grid, *amplitude, *radius, center.as_deref()),
            Self::Random {
                seed,
                max_mode,
                terms,
            } => random_trig(grid, *seed, *max_mode, *terms),
            Self::Packet { frequency, width } => packet(grid, *frequency, *width),
            Self::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("constant must be finite".into()));
                }
                Ok(SampledField::constant(grid.clone(), *value))
            }
        }
    }
}

/// Nearest node to `z`.
pub fn snap_to_node(grid: &AnisotropicGrid, z: &[f64]) -> Vec<f64> {
    (0..grid.ndim())
        .map(|a| {
            let h = grid.spacing(a);
            let i = ((z[a] - grid.origin()[a]) / h - 0.5)
                .round()
                .clamp(0.0, grid.shape()[a] as f64 - 1.0);
            grid.node_coord(a, i as usize)
        })
        .collect()
}

pub fn log_spike(
    grid: &AnisotropicGrid,
    amplitude: f64,
    radius: f64,
    center: Option<&[f64]>,
) -> Result<SampledField> {
    if !(amplitude > 0.0) || !(radius > 0.0) || !amplitude.is_finite() || !radius.is_finite() {
        return Err(Error::InvalidParameter(
            "spike amplitude and radius must be positive".into(),
        ));
    }
    let ext = grid.extent();
    let mid: Vec<f64> = (0..grid.ndim())
        .map(|a| 0.5 * (ext.lo[a] + ext.hi[a]))
        .collect();
    let c = snap_to_node(grid, center.unwrap_or(&mid));
    let profile = BumpProfile::default();
    SampledField::from_fn(grid.clone(), |z| {
        let d: Vec<f64> = z.iter().zip(&c).map(|(a, b)| a - b).collect();
        let zeta = profile.quasi_distance(&d);
        if zeta == 0.0 {
            amplitude
        } else {
            (radius / zeta).ln().clamp(0.0, amplitude)
        }
    })
}

pub fn random_trig(
    grid: &AnisotropicGrid,
    seed: u64,
    max_mode: u32,
    terms: u32,
) -> Result<SampledField> {
    if max_mode == 0 || terms == 0 {
        return Err(Error::InvalidParameter(
            "random family needs modes and terms".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let k: Vec<f64> = (0..grid.ndim())
                .map(|a| {
                    let w = rng.random_range(-(max_mode as i64)..=max_mode as i64) as f64;
                    2.0 * std::f64::consts::PI * w / grid.axis_len(a)
                })
                .collect();
            let amp = rng.random_range(-1.0..1.0) / terms as f64;
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            (k, amp, phase)
        })
        .collect();
    let origin = grid.origin().to_vec();
    SampledField::from_fn(grid.clone(), |z| {
        modes
            .iter()
            .map(|(k, amp, phase)| {
                let arg: f64 = k
                    .iter()
                    .zip(z)
                    .zip(&origin)
                    .map(|((w, x), o)| w * (x - o))
                    .sum();
                amp * (arg + phase).cos()
            })
            .sum()
    })
}

pub fn packet(grid: &AnisotropicGrid, frequency: f64, width: f64) -> Result<SampledField> {
    if !(width > 0.0) || !frequency.is_finite() {
        return Err(Error::InvalidParameter(
            "packet needs a positive width".into(),
        ));
    }
    let ext = grid.extent();
    let mid: Vec<f64> = (0..grid.ndim())
        .map(|a| 0.5 * (ext.lo[a] + ext.hi[a]))
        .collect();
    let n = grid.n();
    SampledField::from_fn(grid.clone(), |z| {
        let r2: f64 = (0..n).map(|a| (z[a] - mid[a]).powi(2)).sum::<f64>() / (width * width)
            + ((z[n] - mid[n]) / (width * width)).powi(2);
        (-r2).exp() * (2.0 * std::f64::consts::PI * frequency * (z[0] - mid[0])).cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AnisotropicGrid {
        AnisotropicGrid::new(1, vec![1.0], 1.0, vec![16, 16]).unwrap()
    }

    #[test]
    fn spike_peaks_at_amplitude() {
        for m in [2.0, 4.0, 8.0] {
            let u = log_spike(&grid(), m, 1.0, None).unwrap();
            assert_eq!(u.max_abs(), m);
            assert!(u.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn random_is_seeded() {
        let a = random_trig(&grid(), 7, 3, 5).unwrap();
        let b = random_trig(&grid(), 7, 3, 5).unwrap();
        let c = random_trig(&grid(), 8, 3, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_family() {
        let u = FieldFamily::Constant { value: 5.0 }
            .sample(&grid())
            .unwrap();
        assert!(u.values().iter().all(|&v| v == 5.0));
    }
}
