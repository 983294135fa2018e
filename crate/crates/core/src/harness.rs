//! Inequality instances: each check measures the two sides of one estimate on
//! one field and reports `lhs / rhs` with every constant set to one.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::{bmo_norm, overline_bmo_norm, BmoForm, CubeSearchPolicy};
use crate::error::{Error, Result};
use crate::extension::{self, CutoffSpec, DEFAULT_BOX_FACTOR};
use crate::grid::{AnisotropicGrid, SampledField, SpaceTimeBox};
use crate::littlewood_paley::{
    build_partition, decompose, lizorkin_triebel_norm_of, BumpProfile, Exponent,
};
use crate::norms::{parabolic_sobolev_norm, sobolev_on_periodic, SobolevOrder};

/// `max(log x, 0)`.
pub fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Theorem1,
    Theorem2,
    Basic,
    Interp,
    BandSup,
    LowBand,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Theorem1,
        Check::Theorem2,
        Check::Basic,
        Check::Interp,
        Check::BandSup,
        Check::LowBand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Theorem1 => "theorem1",
            Check::Theorem2 => "theorem2",
            Check::Basic => "basic",
            Check::Interp => "interp",
            Check::BandSup => "bandsup",
            Check::LowBand => "lowband",
        }
    }
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown check {s:?}")))
    }
}

/// Shared knobs of every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub m: u32,
    pub policy: CubeSearchPolicy,
    pub profile: BumpProfile,
    pub box_factor: f64,
    /// Also measure the cut-off field against the source in `theorem2`.
    pub propagation: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            m: 1,
            policy: CubeSearchPolicy::default(),
            profile: BumpProfile::default(),
            box_factor: DEFAULT_BOX_FACTOR,
            propagation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub n: usize,
    pub shape: Vec<usize>,
    pub box_len: Vec<f64>,
    pub time_len: f64,
    pub origin: Vec<f64>,
    pub periodic: bool,
}

impl GridDescriptor {
    pub fn of(g: &AnisotropicGrid) -> Self {
        Self {
            n: g.n(),
            shape: g.shape().to_vec(),
            box_len: g.box_len().to_vec(),
            time_len: g.time_len(),
            origin: g.origin().to_vec(),
            periodic: g.is_periodic(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check: Check,
    pub field: String,
    pub lhs: f64,
    pub bmo: Option<f64>,
    pub l1: Option<f64>,
    pub sobolev: Option<f64>,
    pub log_plus: Option<f64>,
    /// Named auxiliary quantities (band norms, per-band ratios, extension ratios).
    pub details: BTreeMap<String, f64>,
    /// Right side with every constant equal to one.
    pub rhs: f64,
    pub implied_constant: f64,
    /// Set when `rhs` vanishes and the ratio carries no information.
    pub degenerate: bool,
    pub grid: GridDescriptor,
    pub policy: CubeSearchPolicy,
    pub m: u32,
}

impl InequalityReport {
    fn new(
        check: Check,
        field: &str,
        u: &SampledField,
        cfg: &HarnessConfig,
        lhs: f64,
        rhs: f64,
    ) -> Self {
        let degenerate = !(rhs > 0.0);
        Self {
            check,
            field: field.to_string(),
            lhs,
            bmo: None,
            l1: None,
            sobolev: None,
            log_plus: None,
            details: BTreeMap::new(),
            rhs,
            implied_constant: if degenerate { 0.0 } else { lhs / rhs },
            degenerate,
            grid: GridDescriptor::of(u.grid()),
            policy: cfg.policy.clone(),
            m: cfg.m,
        }
    }
}

fn order_for(u: &SampledField, m: u32) -> Result<SobolevOrder> {
    let order = SobolevOrder::new(m)?;
    if !order.embeds_in_sup(u.grid().n()) {
        return Err(Error::InvalidParameter(format!(
            "the inequality needs m > (n+2)/4; m = {m} is too small for n = {}",
            u.grid().n()
        )));
    }
    Ok(order)
}

/// The field as a compactly supported periodic field: periodic input is used
/// as is, bounded input goes through extension, cut-off and localization.
pub fn localized(u: &SampledField, cfg: &HarnessConfig) -> Result<SampledField> {
    if u.grid().is_periodic() {
        Ok(u.clone())
    } else {
        extension::extend_and_localize(u, cfg.m, Some(cfg.box_factor))
    }
}

fn whole(u: &SampledField) -> SpaceTimeBox {
    u.grid().extent()
}

fn bmo_whole(u: &SampledField, cfg: &HarnessConfig) -> Result<f64> {
    Ok(bmo_norm(u, &whole(u), &cfg.policy, BmoForm::Oscillation)?.value)
}

fn sobolev_whole(u: &SampledField, cfg: &HarnessConfig) -> Result<f64> {
    Ok(sobolev_on_periodic(u, order_for(u, cfg.m)?, &whole(u))?.value)
}

/// `||u||_inf <= C (1 + ||u||_BMO (1 + log+ ||u||_W))` on the periodic box.
pub fn verify_theorem1(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    let u = localized(u, cfg)?;
    let lhs = u.max_abs();
    let b = bmo_whole(&u, cfg)?;
    let w = sobolev_whole(&u, cfg)?;
    let lp = log_plus(w);
    let mut r = InequalityReport::new(Check::Theorem1, field, &u, cfg, lhs, 1.0 + b * (1.0 + lp));
    r.bmo = Some(b);
    r.sobolev = Some(w);
    r.log_plus = Some(lp);
    Ok(r)
}

/// The bounded-domain form: BMO (inf form) plus `L^1` on the source box, the
/// Sobolev norm through extension and restriction.
pub fn verify_theorem2(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    if u.grid().is_periodic() {
        return Err(Error::InvalidParameter(
            "the bounded-domain check takes a field on a bounded grid".into(),
        ));
    }
    let domain = whole(u);
    let order = order_for(u, cfg.m)?;
    let lhs = u.max_abs();
    let ob = overline_bmo_norm(u, &domain, &cfg.policy)?;
    let loc = extension::extend_and_localize(u, cfg.m, Some(cfg.box_factor))?;
    let w = sobolev_on_periodic(&loc, order, &domain)?.value;
    let lp = log_plus(w);
    let mut r = InequalityReport::new(
        Check::Theorem2,
        field,
        u,
        cfg,
        lhs,
        1.0 + ob.value * (1.0 + lp),
    );
    r.bmo = Some(ob.bmo);
    r.l1 = Some(ob.l1);
    r.sobolev = Some(w);
    r.log_plus = Some(lp);
    r.details.insert("overline_bmo".into(), ob.value);
    if cfg.propagation {
        let p = propagation(u, &loc, w, ob.value, cfg)?;
        r.details.extend(p);
    }
    Ok(r)
}

fn propagation(
    u: &SampledField,
    loc: &SampledField,
    w_domain: f64,
    overline: f64,
    cfg: &HarnessConfig,
) -> Result<BTreeMap<String, f64>> {
    let order = order_for(u, cfg.m)?;
    let w_big = sobolev_on_periodic(loc, order, &whole(loc))?.value;
    let b_big = bmo_whole(loc, cfg)?;
    let mut d = BTreeMap::new();
    d.insert("localized_sobolev".into(), w_big);
    d.insert("localized_bmo".into(), b_big);
    d.insert(
        "sobolev_ratio".into(),
        if w_domain > 0.0 {
            w_big / w_domain
        } else {
            0.0
        },
    );
    d.insert(
        "bmo_ratio".into(),
        if overline > 0.0 {
            b_big / overline
        } else {
            0.0
        },
    );
    d.insert("localized_sup".into(), loc.max_abs());
    Ok(d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationReport {
    pub sobolev_domain: f64,
    pub sobolev_localized: f64,
    pub sobolev_ratio: f64,
    pub overline_bmo: f64,
    pub bmo_localized: f64,
    pub bmo_ratio: f64,
}

/// How the extension and cut-off change the Sobolev and BMO norms.
pub fn propagation_report(u: &SampledField, cfg: &HarnessConfig) -> Result<PropagationReport> {
    let domain = whole(u);
    let order = order_for(u, cfg.m)?;
    let ob = overline_bmo_norm(u, &domain, &cfg.policy)?;
    let loc = extension::extend_and_localize(u, cfg.m, Some(cfg.box_factor))?;
    let w = sobolev_on_periodic(&loc, order, &domain)?.value;
    let d = propagation(u, &loc, w, ob.value, cfg)?;
    Ok(PropagationReport {
        sobolev_domain: w,
        sobolev_localized: d["localized_sobolev"],
        sobolev_ratio: d["sobolev_ratio"],
        overline_bmo: ob.value,
        bmo_localized: d["localized_bmo"],
        bmo_ratio: d["bmo_ratio"],
    })
}

/// `F~0_{inf,1} <= C (1 + F~0_{inf,2} (1 + sqrt(log+ ||u||_W)))`.
pub fn basic_log_sobolev_check(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    let u = localized(u, cfg)?;
    let stack = decompose(&u, &build_partition(u.grid(), cfg.profile)?)?;
    let f1 = lizorkin_triebel_norm_of(&stack, 0.0, Exponent::Infinite, Exponent::Finite(1.0), true);
    let f2 = lizorkin_triebel_norm_of(&stack, 0.0, Exponent::Infinite, Exponent::Finite(2.0), true);
    let w = sobolev_whole(&u, cfg)?;
    let lp = log_plus(w);
    let mut r = InequalityReport::new(
        Check::Basic,
        field,
        &u,
        cfg,
        f1,
        1.0 + f2 * (1.0 + lp.sqrt()),
    );
    r.sobolev = Some(w);
    r.log_plus = Some(lp);
    r.details.insert("lt_inf_1".into(), f1);
    r.details.insert("lt_inf_2".into(), f2);
    Ok(r)
}

/// `F~0_{inf,2} <= C ||u||_BMO^{1/2} F~0_{inf,1}^{1/2}`.
pub fn interpolation_check(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    let u = localized(u, cfg)?;
    let stack = decompose(&u, &build_partition(u.grid(), cfg.profile)?)?;
    let f1 = lizorkin_triebel_norm_of(&stack, 0.0, Exponent::Infinite, Exponent::Finite(1.0), true);
    let f2 = lizorkin_triebel_norm_of(&stack, 0.0, Exponent::Infinite, Exponent::Finite(2.0), true);
    let b = bmo_whole(&u, cfg)?;
    let mut r = InequalityReport::new(Check::Interp, field, &u, cfg, f2, (b * f1).sqrt());
    r.bmo = Some(b);
    r.details.insert("lt_inf_1".into(), f1);
    r.details.insert("lt_inf_2".into(), f2);
    Ok(r)
}

/// `||band_j||_inf <= C ||u||_BMO` for every resolved `j >= 1`.
pub fn band_sup_check(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    let u = localized(u, cfg)?;
    let partition = build_partition(u.grid(), cfg.profile)?;
    let stack = decompose(&u, &partition)?;
    let sups = stack.sup_norms();
    let b = bmo_whole(&u, cfg)?;
    let resolved: Vec<usize> = partition.resolved_bands().collect();
    let top = resolved.iter().map(|&j| sups[j]).fold(0.0, f64::max);
    let scale = u.max_abs().max(f64::MIN_POSITIVE);
    if b == 0.0 && top > 1e-12 * scale {
        return Err(Error::InsufficientResolution(
            "bands are nonzero but every searched cube has zero oscillation; refine the cube family".into(),
        ));
    }
    let mut r = InequalityReport::new(Check::BandSup, field, &u, cfg, top, b);
    r.bmo = Some(b);
    let ratios: Vec<f64> = resolved
        .iter()
        .map(|&j| if b > 0.0 { sups[j] / b } else { 0.0 })
        .collect();
    for (&j, &q) in resolved.iter().zip(&ratios) {
        r.details.insert(format!("band_{j:02}_sup"), sups[j]);
        r.details.insert(format!("ratio_{j:02}"), q);
    }
    let positive: Vec<f64> = ratios.iter().copied().filter(|&q| q > 0.0).collect();
    let flatness = if positive.is_empty() {
        1.0
    } else {
        positive.iter().cloned().fold(0.0, f64::max)
            / positive.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    r.details.insert("flatness".into(), flatness);
    Ok(r)
}

/// `||band_0||_inf <= C (1 + ||u||_BMO (1 + log+ ||u||_W))`.
pub fn low_band_check(
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    let u = localized(u, cfg)?;
    let partition = build_partition(u.grid(), cfg.profile)?;
    let low = crate::littlewood_paley::band_filter(&u, &partition, 0)?.max_abs();
    let b = bmo_whole(&u, cfg)?;
    let w = sobolev_whole(&u, cfg)?;
    let lp = log_plus(w);
    let mut r = InequalityReport::new(Check::LowBand, field, &u, cfg, low, 1.0 + b * (1.0 + lp));
    r.bmo = Some(b);
    r.sobolev = Some(w);
    r.log_plus = Some(lp);
    Ok(r)
}

pub fn run_check(
    check: Check,
    u: &SampledField,
    field: &str,
    cfg: &HarnessConfig,
) -> Result<InequalityReport> {
    match check {
        Check::Theorem1 => verify_theorem1(u, field, cfg),
        Check::Theorem2 => verify_theorem2(u, field, cfg),
        Check::Basic => basic_log_sobolev_check(u, field, cfg),
        Check::Interp => interpolation_check(u, field, cfg),
        Check::BandSup => band_sup_check(u, field, cfg),
        Check::LowBand => low_band_check(u, field, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub check: Check,
    pub count: usize,
    pub degenerate: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<InequalityReport>,
    pub summary: Vec<SweepSummary>,
}

/// Runs every check on every named field; rows keep input order (fields outer, checks inner).
pub fn constant_sweep(
    fields: &[(String, SampledField)],
    checks: &[Check],
    cfg: &HarnessConfig,
) -> Result<SweepTable> {
    let jobs: Vec<(usize, Check)> = (0..fields.len())
        .flat_map(|i| checks.iter().map(move |&c| (i, c)))
        .collect();
    let rows: Vec<InequalityReport> = jobs
        .par_iter()
        .map(|&(i, c)| run_check(c, &fields[i].1, &fields[i].0, cfg))
        .collect::<Result<_>>()?;
    let summary = checks
        .iter()
        .map(|&c| {
            let mut vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.check == c && !r.degenerate)
                .map(|r| r.implied_constant)
                .collect();
            vals.sort_by(f64::total_cmp);
            let degenerate = rows.iter().filter(|r| r.check == c && r.degenerate).count();
            let median = match vals.len() {
                0 => 0.0,
                k if k % 2 == 1 => vals[k / 2],
                k => 0.5 * (vals[k / 2 - 1] + vals[k / 2]),
            };
            SweepSummary {
                check: c,
                count: vals.len() + degenerate,
                degenerate,
                min: vals.first().copied().unwrap_or(0.0),
                median,
                max: vals.last().copied().unwrap_or(0.0),
            }
        })
        .collect();
    Ok(SweepTable { rows, summary })
}

pub const CSV_HEADER: [&str; 13] = [
    "check",
    "field",
    "lhs",
    "bmo",
    "l1",
    "sobolev",
    "log_plus",
    "rhs",
    "implied_constant",
    "degenerate",
    "shape",
    "m",
    "details",
];

impl SweepTable {
    /// One CSV record per report; `details` is a `key=value;...` cell.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let map_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(CSV_HEADER).map_err(map_err)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let shape = r
                .grid
                .shape
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("x");
            let details = r
                .details
                .iter()
                .map(|(k, v)| format!("{k}={v:e}"))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.check.name().to_string(),
                r.field.clone(),
                format!("{:e}", r.lhs),
                opt(r.bmo),
                opt(r.l1),
                opt(r.sobolev),
                opt(r.log_plus),
                format!("{:e}", r.rhs),
                format!("{:e}", r.implied_constant),
                r.degenerate.to_string(),
                shape,
                r.m.to_string(),
                details,
            ])
            .map_err(map_err)?;
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }
}

/// The cut-off of `domain` sampled on its own localized periodic box.
pub fn cutoff_on_box(domain_grid: &AnisotropicGrid, cfg: &HarnessConfig) -> Result<SampledField> {
    let target = extension::periodic_target(domain_grid, cfg.box_factor)?;
    crate::extension::build_cutoff(&CutoffSpec::new(domain_grid.extent()), &target)
}

/// Sobolev norm of a bounded field over its own box.
pub fn domain_sobolev(u: &SampledField, m: u32) -> Result<f64> {
    Ok(parabolic_sobolev_norm(u, SobolevOrder::new(m)?, &whole(u))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(nx: usize, nt: usize) -> AnisotropicGrid {
        AnisotropicGrid::new(1, vec![1.0], 1.0, vec![nx, nt])
            .unwrap()
            .bounded()
    }

    #[test]
    fn log_plus_values() {
        assert_eq!(log_plus(0.5), 0.0);
        assert_eq!(log_plus(1.0), 0.0);
        assert!((log_plus(std::f64::consts::E) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_theorem1() {
        let g = AnisotropicGrid::new(1, vec![4.0], 4.0, vec![32, 32]).unwrap();
        let r =
            verify_theorem1(&SampledField::zeros(g), "zero", &HarnessConfig::default()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.bmo, Some(0.0));
        assert_eq!(r.implied_constant, 0.0);
    }

    #[test]
    fn constant_theorem2() {
        let u = SampledField::constant(omega(16, 16), 5.0);
        let r = verify_theorem2(&u, "const", &HarnessConfig::default()).unwrap();
        assert_eq!(r.lhs, 5.0);
        assert!(r.bmo.unwrap().abs() < 1e-12);
        assert!((r.l1.unwrap() - 5.0).abs() < 1e-12);
        let w = r.sobolev.unwrap();
        let expected = 5.0 / (1.0 + (r.bmo.unwrap() + 5.0) * (1.0 + log_plus(w)));
        assert!((r.implied_constant - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_theorem2() {
        let r = verify_theorem2(
            &SampledField::zeros(omega(16, 16)),
            "zero",
            &HarnessConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (r.lhs, r.bmo, r.l1, r.sobolev),
            (0.0, Some(0.0), Some(0.0), Some(0.0))
        );
        assert_eq!(r.implied_constant, 0.0);
    }

    #[test]
    fn interp_zero_is_degenerate() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![32, 32]).unwrap();
        let r = interpolation_check(&SampledField::zeros(g), "zero", &HarnessConfig::default())
            .unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn constant_bands_vanish() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![32, 32]).unwrap();
        let u = SampledField::constant(g, 3.0);
        let cfg = HarnessConfig::default();
        let r = band_sup_check(&u, "const", &cfg).unwrap();
        assert_eq!(r.implied_constant, 0.0);
        let b = basic_log_sobolev_check(&u, "const", &cfg).unwrap();
        assert!(b.details["lt_inf_1"] < 1e-12 && b.details["lt_inf_2"] < 1e-12);
    }

    #[test]
    fn empty_sweep() {
        let t = constant_sweep(&[], &[Check::Theorem1], &HarnessConfig::default()).unwrap();
        assert!(t.rows.is_empty());
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![16, 16]).unwrap();
        let t = constant_sweep(
            &[("c".into(), SampledField::constant(g, 1.0))],
            &[],
            &HarnessConfig::default(),
        )
        .unwrap();
        assert!(t.rows.is_empty() && t.summary.is_empty());
    }

    #[test]
    fn check_names_roundtrip() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert!("theorem3".parse::<Check>().is_err());
    }
}
