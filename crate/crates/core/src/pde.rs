//! Pseudo-spectral solver for `u_t - u_xx = sin(u_x(x) u_x(x + a)) + sin(log u_x(x))`
//! with `u(x + 1, t) = u(x, t) + 1`, written as `u = x + p` with `p` periodic.
//!
//! Diffusion is integrated exactly per mode and the forcing is explicit:
//! `p^ <- exp(-kappa^2 dt) (p^ + dt F^)`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cubes::{overline_bmo_norm, CubeSearchPolicy};
use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField};
use crate::harness::{verify_theorem2, HarnessConfig, InequalityReport};
use crate::norms::{parabolic_sobolev_norm, SobolevOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialGradient {
    /// `v_0 = 1`.
    Constant,
    /// `v_0 = 1 + amplitude sin(2 pi x)`.
    Sine { amplitude: f64 },
}

impl InitialGradient {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Sine { amplitude } => 1.0 + amplitude * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    /// Periodic part of `u_0 = x + p_0`, zero mean.
    fn perturbation(&self, x: f64) -> f64 {
        match self {
            Self::Constant => 0.0,
            Self::Sine { amplitude } => {
                -amplitude * (2.0 * std::f64::consts::PI * x).cos() / (2.0 * std::f64::consts::PI)
            }
        }
    }
}

impl std::str::FromStr for InitialGradient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "const" => Ok(Self::Constant),
            Some(("sine", amp)) => amp
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(|amplitude| Self::Sine { amplitude })
                .ok_or_else(|| Error::InvalidParameter(format!("bad sine amplitude {amp:?}"))),
            _ => Err(Error::InvalidParameter(format!(
                "initial gradient must be const or sine:<amp>, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    /// Spatial modes (grid points on the unit period).
    pub modes: usize,
    pub dt: f64,
    /// Shift `a` of the nonlocal term.
    pub shift: f64,
    pub t_end: f64,
    /// Lower bound the initial gradient must respect.
    pub delta0: f64,
    pub v0: InitialGradient,
    /// Disabling the forcing leaves the plain heat flow.
    pub forcing: bool,
    /// Snapshots of `v` kept over `[0, t_end]`, evenly spaced.
    pub snapshots: usize,
    /// Spatial samples of the space-time diagnostic fields.
    pub diag_space: usize,
    /// Time cells per unit time in the space-time diagnostic fields.
    pub diag_time_density: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            modes: 256,
            dt: 1e-4,
            shift: 0.5,
            t_end: 1.0,
            delta0: 0.1,
            v0: InitialGradient::Sine { amplitude: 0.5 },
            forcing: true,
            snapshots: 200,
            diag_space: 64,
            diag_time_density: 128,
        }
    }
}

impl PdeConfig {
    /// Bound on the growth rate of the explicit part, from a Lipschitz estimate of
    /// the forcing in `v`; the step must keep `dt * rate <= 1`.
    pub fn stability_bound(&self) -> f64 {
        let vmax = (0..self.modes)
            .map(|i| self.v0.value(i as f64 / self.modes as f64).abs())
            .fold(1.0, f64::max);
        let lip = 2.0 * vmax + 1.0 / self.delta0;
        4.0 / (lip * lip)
    }

    pub fn step_count(&self) -> Result<usize> {
        let steps = self.t_end / self.dt;
        let rounded = steps.round();
        if !(rounded >= 1.0) || (steps - rounded).abs() > 1e-6 * rounded {
            return Err(Error::InvalidParameter(format!(
                "t_end / dt = {steps} must be a positive integer"
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 8 || !self.modes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "modes must be even and at least 8".into(),
            ));
        }
        if !(self.shift > 0.0 && self.shift < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shift must lie in (0, 1), got {}",
                self.shift
            )));
        }
        if !(self.delta0 > 0.0) {
            return Err(Error::InvalidParameter(
                "gradient floor must be positive".into(),
            ));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter(
                "dt and t_end must be positive".into(),
            ));
        }
        if self.dt > self.stability_bound() {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the stability bound {}",
                self.dt,
                self.stability_bound()
            )));
        }
        let steps = self.step_count()?;
        if self.snapshots == 0 || steps % self.snapshots != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} snapshots do not divide {steps} steps",
                self.snapshots
            )));
        }
        if self.diag_space < 4
            || !self.diag_space.is_multiple_of(2)
            || !self.modes.is_multiple_of(self.diag_space)
        {
            return Err(Error::InvalidParameter(
                "diag_space must be even and divide modes".into(),
            ));
        }
        let min_v0 = (0..self.modes)
            .map(|i| self.v0.value(i as f64 / self.modes as f64))
            .fold(f64::INFINITY, f64::min);
        if min_v0 < self.delta0 {
            return Err(Error::InvalidParameter(format!(
                "initial gradient dips to {min_v0}, below the floor {}",
                self.delta0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    /// Unnormalised DFT of `p` on the nodes `i / N`.
    p_hat: Vec<Complex64>,
    pub time: f64,
    pub steps: usize,
}

/// FFT plans and per-mode factors for one configuration.
pub struct Stepper {
    cfg: PdeConfig,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kappa: Vec<f64>,
    decay: Vec<f64>,
    shift_phase: Vec<Complex64>,
}

impl Stepper {
    pub fn new(cfg: &PdeConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.modes;
        let mut planner = FftPlanner::new();
        let kappa: Vec<f64> = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * crate::spectral::signed_index(k, n) as f64)
            .collect();
        let decay = kappa.iter().map(|k| (-k * k * cfg.dt).exp()).collect();
        let shift_phase = kappa
            .iter()
            .enumerate()
            .map(|(k, w)| {
                if k == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, w * cfg.shift)
                }
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            kappa,
            decay,
            shift_phase,
        })
    }

    pub fn config(&self) -> &PdeConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> PdeState {
        let n = self.cfg.modes;
        let mut p: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(self.cfg.v0.perturbation(i as f64 / n as f64), 0.0))
            .collect();
        self.fwd.process(&mut p);
        PdeState {
            p_hat: p,
            time: 0.0,
            steps: 0,
        }
    }

    fn to_physical(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut spec);
        let n = self.cfg.modes as f64;
        spec.iter().map(|c| c.re / n).collect()
    }

    fn derivative_hat(&self, hat: &[Complex64]) -> Vec<Complex64> {
        let n = self.cfg.modes;
        hat.iter()
            .zip(&self.kappa)
            .enumerate()
            .map(|(k, (c, w))| {
                if k == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, *w)
                }
            })
            .collect()
    }

    /// `p` on the nodes `i / N`.
    pub fn perturbation(&self, s: &PdeState) -> Vec<f64> {
        self.to_physical(s.p_hat.clone())
    }

    /// Spectrum of `v = 1 + p_x`.
    fn v_hat(&self, s: &PdeState) -> Vec<Complex64> {
        let mut v = self.derivative_hat(&s.p_hat);
        v[0] += Complex64::new(self.cfg.modes as f64, 0.0);
        v
    }

    pub fn gradient(&self, s: &PdeState) -> Vec<f64> {
        self.to_physical(self.v_hat(s))
    }

    /// `v_x` on the nodes.
    pub fn curvature(&self, s: &PdeState) -> Vec<f64> {
        self.to_physical(self.derivative_hat(&self.v_hat(s)))
    }

    pub fn step(&self, s: &mut PdeState) -> Result<()> {
        let dt = self.cfg.dt;
        let mut forcing_hat = vec![Complex64::new(0.0, 0.0); self.cfg.modes];
        if self.cfg.forcing {
            let v_hat = self.v_hat(s);
            let shifted: Vec<Complex64> = v_hat
                .iter()
                .zip(&self.shift_phase)
                .map(|(c, p)| c * p)
                .collect();
            let v = self.to_physical(v_hat);
            let v_shift = self.to_physical(shifted);
            let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min_v > 0.0) {
                return Err(Error::GradientFloorBreached {
                    time: s.time,
                    min_v,
                });
            }
            for (f, (a, b)) in forcing_hat.iter_mut().zip(v.iter().zip(&v_shift)) {
                *f = Complex64::new((a * b).sin() + a.ln().sin(), 0.0);
            }
            self.fwd.process(&mut forcing_hat);
        }
        for ((p, f), d) in s.p_hat.iter_mut().zip(&forcing_hat).zip(&self.decay) {
            *p = (*p + f * dt) * d;
        }
        s.steps += 1;
        s.time = s.steps as f64 * dt;
        Ok(())
    }
}

/// One step from `state` under `cfg`.
pub fn step(state: &PdeState, cfg: &PdeConfig) -> Result<PdeState> {
    let stepper = Stepper::new(cfg)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagSample {
    pub t: f64,
    /// `min_x v`.
    pub m: f64,
    /// `max_x |v_x|`.
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    /// Inf-form BMO plus `L^1` of `v_x` on `(0,1) x (0,t)`.
    pub bmo: f64,
    /// `W_2^{2,1}` norm of `v_x` on the same box.
    pub sobolev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub samples: Vec<DiagSample>,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `v` on the nodes `i / N` at each snapshot time.
    pub gradient: Vec<Vec<f64>>,
    pub curvature: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub config: PdeConfig,
    pub trajectory: Trajectory,
    pub diagnostics: Diagnostics,
    /// `p` on the nodes at the final time.
    pub final_perturbation: Vec<f64>,
}

/// Which snapshot series a space-time field is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Gradient,
    Curvature,
}

impl PdeRun {
    /// `v` or `v_x` on `(0,1) x (0,t_hi)`, cell centred: spatially by a spectral
    /// half-cell shift and subsampling, in time by linear interpolation between snapshots.
    pub fn space_time_field(&self, series: Series, t_hi: f64) -> Result<SampledField> {
        let cfg = &self.config;
        let tr = &self.trajectory;
        let last = *tr
            .times
            .last()
            .expect("trajectory has the initial snapshot");
        if !(t_hi > 0.0) || t_hi > last * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "t = {t_hi} outside the run (0, {last}]"
            )));
        }
        let cells_t = ((cfg.diag_time_density as f64 * t_hi).round() as usize).max(4);
        let cells_t = cells_t + cells_t % 2;
        let m = cfg.diag_space;
        let data = match series {
            Series::Gradient => &tr.gradient,
            Series::Curvature => &tr.curvature,
        };
        let shifted: Vec<Vec<f64>> = data.iter().map(|row| half_cell_subsample(row, m)).collect();
        let dt_snap = tr.times[1] - tr.times[0];
        let grid = AnisotropicGrid::new(1, vec![1.0], t_hi, vec![m, cells_t])?.bounded();
        let k = t_hi / cells_t as f64;
        let mut values = vec![0.0; grid.len()];
        for j in 0..cells_t {
            let t = (j as f64 + 0.5) * k;
            let pos = t / dt_snap;
            let i0 = (pos.floor() as usize).min(shifted.len() - 2);
            let w = pos - i0 as f64;
            for i in 0..m {
                values[i * cells_t + j] = (1.0 - w) * shifted[i0][i] + w * shifted[i0 + 1][i];
            }
        }
        SampledField::new(grid, values)
    }
}

/// Values at `(i + 1/2) / m` of the periodic samples `row` on `k / N`.
fn half_cell_subsample(row: &[f64], m: usize) -> Vec<f64> {
    let n = row.len();
    let mut planner = FftPlanner::new();
    let mut spec: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);
    let shift = 0.5 / m as f64;
    for (k, c) in spec.iter_mut().enumerate() {
        if k == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            let w = 2.0 * std::f64::consts::PI * crate::spectral::signed_index(k, n) as f64;
            *c *= Complex64::from_polar(1.0, w * shift);
        }
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    (0..m).map(|i| spec[i * n / m].re / n as f64).collect()
}

fn sample_of(stepper: &Stepper, s: &PdeState) -> (DiagSample, Vec<f64>, Vec<f64>) {
    let v = stepper.gradient(s);
    let vx = stepper.curvature(s);
    let m = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let g = vx.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    (DiagSample { t: s.time, m, g }, v, vx)
}

/// Integrates to `t_end`, keeping snapshots and diagnostics; space-time
/// norms of `v_x` are evaluated at `checkpoints` afterwards.
pub fn run(cfg: &PdeConfig, checkpoints: &[f64]) -> Result<PdeRun> {
    let stepper = Stepper::new(cfg)?;
    let steps = cfg.step_count()?;
    let every = steps / cfg.snapshots;
    let mut state = stepper.initial_state();
    let mut samples = Vec::with_capacity(cfg.snapshots + 1);
    let mut tr = Trajectory {
        times: Vec::new(),
        gradient: Vec::new(),
        curvature: Vec::new(),
    };
    let record = |s: &PdeState, samples: &mut Vec<DiagSample>, tr: &mut Trajectory| {
        let (d, v, vx) = sample_of(&stepper, s);
        samples.push(d);
        tr.times.push(s.time);
        tr.gradient.push(v);
        tr.curvature.push(vx);
    };
    record(&state, &mut samples, &mut tr);
    for k in 1..=steps {
        stepper.step(&mut state)?;
        if k % every == 0 {
            record(&state, &mut samples, &mut tr);
            let last = samples.last().expect("just recorded");
            if !(last.m > 0.0) {
                return Err(Error::GradientFloorBreached {
                    time: last.t,
                    min_v: last.m,
                });
            }
        }
    }
    let mut out = PdeRun {
        config: cfg.clone(),
        trajectory: tr,
        diagnostics: Diagnostics {
            samples,
            checkpoints: Vec::new(),
        },
        final_perturbation: stepper.perturbation(&state),
    };
    let policy = CubeSearchPolicy::default();
    let order = SobolevOrder::new(1)?;
    for &t in checkpoints {
        let f = out.space_time_field(Series::Curvature, t)?;
        let domain = f.grid().extent();
        let bmo = overline_bmo_norm(&f, &domain, &policy)?.value;
        let sobolev = parabolic_sobolev_norm(&f, order, &domain)?.value;
        out.diagnostics
            .checkpoints
            .push(Checkpoint { t, bmo, sobolev });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub samples: usize,
    /// Smallest `C_1 >= 0` with `m_t >= -C_1 m (|log m| + 1)`.
    pub c1: f64,
    /// `min_t m_t / (m (|log m| + 1))`, signed; `c1 = max(0, -min_rate)`.
    pub min_rate: f64,
    /// Smallest `C_2` with `G <= C_2 (1 + |log m|)`.
    pub c2: f64,
    /// Interior samples where `m_t < -m G - slack`.
    pub step1_violations: usize,
    pub slack: f64,
    pub worst_step1_excess: f64,
}

pub fn check_apriori(diag: &Diagnostics, dt: f64) -> Result<AprioriReport> {
    let s = &diag.samples;
    if s.len() < 10 || s.iter().any(|d| !(d.m > 0.0)) {
        return Err(Error::InvalidParameter(
            "a priori fit needs at least 10 samples with positive gradient minimum".into(),
        ));
    }
    let mt: Vec<f64> = (1..s.len() - 1)
        .map(|i| (s[i + 1].m - s[i - 1].m) / (s[i + 1].t - s[i - 1].t))
        .collect();
    let lip = mt
        .windows(2)
        .zip(s[1..].windows(2))
        .map(|(w, d)| (w[1] - w[0]).abs() / (d[1].t - d[0].t))
        .fold(0.0, f64::max);
    let slack = 2.0 * dt * lip;
    let mut min_rate = f64::INFINITY;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (i, &d) in mt.iter().enumerate() {
        let p = s[i + 1];
        let scale = p.m * (p.m.ln().abs() + 1.0);
        min_rate = min_rate.min(d / scale);
        let excess = -p.m * p.g - slack - d;
        if excess > 0.0 {
            violations += 1;
            worst = worst.max(excess);
        }
    }
    let c2 = s
        .iter()
        .map(|d| d.g / (1.0 + d.m.ln().abs()))
        .fold(0.0, f64::max);
    Ok(AprioriReport {
        samples: s.len(),
        c1: (-min_rate).max(0.0),
        min_rate,
        c2,
        step1_violations: violations,
        slack,
        worst_step1_excess: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtClosureReport {
    pub t: f64,
    /// `G(t)`.
    pub g: f64,
    /// The bounded-domain inequality for `v_x` on `(0,1) x (0,t)`.
    pub report: InequalityReport,
    /// `G(t)` over the right side of that inequality.
    pub g_ratio: f64,
}

/// Feeds `v_x` on `(0,1) x (0,t)` through the bounded-domain inequality with `m = 1`.
pub fn kt_closure_check(run: &PdeRun, t: f64, cfg: &HarnessConfig) -> Result<KtClosureReport> {
    let f = run.space_time_field(Series::Curvature, t)?;
    let cfg = HarnessConfig {
        m: 1,
        ..cfg.clone()
    };
    let report = verify_theorem2(&f, &format!("curvature(t={t})"), &cfg)?;
    let g = run
        .diagnostics
        .samples
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
        .map(|d| d.g)
        .unwrap_or(0.0);
    let g_ratio = if report.degenerate {
        0.0
    } else {
        g / report.rhs
    };
    Ok(KtClosureReport {
        t,
        g,
        report,
        g_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v0: InitialGradient) -> PdeConfig {
        PdeConfig {
            modes: 32,
            dt: 1e-3,
            t_end: 0.1,
            snapshots: 10,
            diag_space: 16,
            v0,
            ..Default::default()
        }
    }

    #[test]
    fn constant_gradient_is_exact() {
        let c = cfg(InitialGradient::Constant);
        let st = Stepper::new(&c).unwrap();
        let mut s = st.initial_state();
        for _ in 0..100 {
            st.step(&mut s).unwrap();
        }
        let expected = 1f64.sin() * s.time;
        assert!(st
            .perturbation(&s)
            .iter()
            .all(|p| (p - expected).abs() < 1e-12));
        assert!(st.gradient(&s).iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn heat_mode_decays_exactly() {
        let c = PdeConfig {
            forcing: false,
            ..cfg(InitialGradient::Sine { amplitude: 0.5 })
        };
        let st = Stepper::new(&c).unwrap();
        let mut s = st.initial_state();
        let before = st.perturbation(&s);
        st.step(&mut s).unwrap();
        let after = st.perturbation(&s);
        let f = (-4.0 * std::f64::consts::PI.powi(2) * c.dt).exp();
        for (a, b) in before.iter().zip(&after) {
            assert!((a * f - b).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_violation_rejected() {
        let c = PdeConfig {
            delta0: 0.6,
            ..cfg(InitialGradient::Sine { amplitude: 0.5 })
        };
        assert!(Stepper::new(&c).is_err());
    }

    #[test]
    fn parse_initial_gradient() {
        assert_eq!(
            "const".parse::<InitialGradient>().unwrap(),
            InitialGradient::Constant
        );
        assert_eq!(
            "sine:0.5".parse::<InitialGradient>().unwrap(),
            InitialGradient::Sine { amplitude: 0.5 }
        );
        assert!("cos:1".parse::<InitialGradient>().is_err());
    }

    #[test]
    fn half_cell_shift_of_a_mode() {
        let n = 32;
        let row: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let out = half_cell_subsample(&row, 8);
        for (i, v) in out.iter().enumerate() {
            let x = (i as f64 + 0.5) / 8.0;
            assert!((v - (2.0 * std::f64::consts::PI * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn breach_is_reported_with_time() {
        let c = cfg(InitialGradient::Constant);
        let st = Stepper::new(&c).unwrap();
        let mut s = st.initial_state();
        s.p_hat[1] = Complex64::new(0.0, -40.0);
        s.p_hat[31] = Complex64::new(0.0, 40.0);
        match st.step(&mut s) {
            Err(Error::GradientFloorBreached { time, .. }) => assert_eq!(time, 0.0),
            other => panic!("expected breach, got {other:?}"),
        }
    }
}
