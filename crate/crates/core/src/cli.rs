//! Command-line front end. Every artifact carries a manifest of the command and
//! its parameters, and is written through a temporary file and an atomic rename.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cubes::{bmo_norm, overline_bmo_norm, BmoForm, CubeSearchPolicy};
use crate::error::{Error, Result};
use crate::extension;
use crate::families::FieldFamily;
use crate::grid::{AnisotropicGrid, SampledField, SpaceTimeBox};
use crate::harness::{constant_sweep, Check, HarnessConfig};
use crate::io::{read_field, write_atomic, write_field};
use crate::littlewood_paley::{self as lp, build_partition, decompose, BumpProfile, Exponent};
use crate::norms::{self, SobolevOrder};
use crate::pde::{self, InitialGradient, PdeConfig, Series};

pub const THREADS_ENV: &str = "PARABOLIC_LS_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "parabolic-ls",
    version,
    about = "Parabolic BMO, Sobolev and Lizorkin-Triebel norms with inequality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Sample a field family on a grid.
    Gen(GenArgs),
    /// Split a field into its dyadic bands.
    Decompose(DecomposeArgs),
    /// Lp, Sobolev, Besov or Lizorkin-Triebel norm of a field.
    Norm(NormArgs),
    /// BMO norm over a cube family.
    Bmo(BmoArgs),
    /// Extend a field on a box to the tripled box.
    Extend(ExtendArgs),
    /// Run one inequality check over a field family.
    Verify(VerifyArgs),
    /// Integrate the nonlocal gradient model.
    PdeRun(PdeArgs),
    /// Run several checks over a family and summarise the implied constants.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
struct GridArgs {
    /// Spatial dimension.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Samples per axis, spatial axes then time.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 64])]
    shape: Vec<usize>,
    /// Spatial box length(s); one value is repeated over all axes.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    box_len: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    time_len: f64,
    /// Lower corner, spatial axes then time.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Option<Vec<f64>>,
    /// Periodic box instead of a bounded domain.
    #[arg(long)]
    periodic: bool,
}

impl GridArgs {
    fn grid(&self) -> Result<AnisotropicGrid> {
        let box_len = if self.box_len.len() == 1 {
            vec![self.box_len[0]; self.n]
        } else {
            self.box_len.clone()
        };
        let origin = self.origin.clone().unwrap_or_else(|| vec![0.0; self.n + 1]);
        let g = AnisotropicGrid::with_origin(
            self.n,
            box_len,
            self.time_len,
            self.shape.clone(),
            origin,
        )?;
        Ok(if self.periodic { g } else { g.bounded() })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FamilyKind {
    Const,
    Logspike,
    Random,
    Packet,
}

#[derive(Debug, Args, Serialize, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyKind,
    /// Constant value(s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0f64])]
    value: Vec<f64>,
    /// Log-spike amplitude(s).
    #[arg(long = "M", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [4.0f64])]
    amplitude: Vec<f64>,
    /// Log-spike support radius.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    rho: f64,
    /// Log-spike centre (snapped to a node); the grid centre when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Seeds of the random family: a list `1,2,3` or a range `0..50`.
    #[arg(long, default_value = "0")]
    seed: String,
    /// Largest integer wavenumber of the random family.
    #[arg(long, default_value_t = 4)]
    modes: u32,
    #[arg(long, default_value_t = 8)]
    terms: u32,
    #[arg(long, default_value_t = 4.0)]
    freq: f64,
    #[arg(long, default_value_t = 0.15)]
    width: f64,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("bad seed list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

impl FamilyArgs {
    fn members(&self) -> Result<Vec<FieldFamily>> {
        Ok(match self.family {
            FamilyKind::Const => self
                .value
                .iter()
                .map(|&value| FieldFamily::Constant { value })
                .collect(),
            FamilyKind::Logspike => self
                .amplitude
                .iter()
                .map(|&amplitude| FieldFamily::LogSpike {
                    amplitude,
                    radius: self.rho,
                    center: self.center.clone(),
                })
                .collect(),
            FamilyKind::Random => parse_seeds(&self.seed)?
                .into_iter()
                .map(|seed| FieldFamily::Random {
                    seed,
                    max_mode: self.modes,
                    terms: self.terms,
                })
                .collect(),
            FamilyKind::Packet => vec![FieldFamily::Packet {
                frequency: self.freq,
                width: self.width,
            }],
        })
    }

    fn seeds(&self) -> Vec<u64> {
        match self.family {
            FamilyKind::Random => parse_seeds(&self.seed).unwrap_or_default(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Args, Serialize, Clone)]
struct HarnessArgs {
    /// Sobolev order m.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Centre spacing of the cube family, as a fraction of the radius.
    #[arg(long, default_value_t = 0.5)]
    stride: f64,
    /// Smallest cube side in cells.
    #[arg(long, default_value_t = 3.0)]
    min_cells: f64,
    /// Explicit cube radii.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Smoothing order of the bump quasi-distance.
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Size of the periodic box relative to the source box.
    #[arg(long, default_value_t = extension::DEFAULT_BOX_FACTOR)]
    box_factor: f64,
    /// Also compare the localized field with the source (bounded-domain check).
    #[arg(long)]
    propagation: bool,
}

impl HarnessArgs {
    fn policy(&self) -> Result<CubeSearchPolicy> {
        if !(self.stride > 0.0) || !(self.min_cells > 0.0) {
            return Err(Error::InvalidParameter(
                "stride and min-cells must be positive".into(),
            ));
        }
        Ok(CubeSearchPolicy {
            radii: self.radii.clone(),
            min_cells: self.min_cells,
            stride: self.stride,
        })
    }

    fn config(&self) -> Result<HarnessConfig> {
        Ok(HarnessConfig {
            m: self.m,
            policy: self.policy()?,
            profile: BumpProfile::new(self.k)?,
            box_factor: self.box_factor,
            propagation: self.propagation,
        })
    }
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Directory receiving one field file per band.
    #[arg(long)]
    bands_dir: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Space {
    Lp,
    Sobolev,
    Besov,
    Lt,
}

#[derive(Debug, Args, Serialize)]
struct NormArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    space: Space,
    /// Integrability exponent (`inf` allowed).
    #[arg(long, default_value = "2")]
    p: String,
    #[arg(long, default_value = "2")]
    q: String,
    /// Smoothness index of Besov and Lizorkin-Triebel norms.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    s: f64,
    /// Sobolev order.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Drop band 0 of the Lizorkin-Triebel norm.
    #[arg(long)]
    truncated: bool,
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Domain lower corner; the whole grid when absent.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "hi"
    )]
    lo: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "lo"
    )]
    hi: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormArg {
    Osc,
    Inf,
}

#[derive(Debug, Args, Serialize)]
struct BmoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "osc")]
    form: FormArg,
    /// Inf-form BMO plus the L1 norm.
    #[arg(long)]
    overline: bool,
    #[arg(long, default_value_t = 0.5)]
    stride: f64,
    #[arg(long, default_value_t = 3.0)]
    min_cells: f64,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "hi"
    )]
    lo: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "lo"
    )]
    hi: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExtendArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Extended field on the tripled box.
    #[arg(long)]
    out: PathBuf,
    /// JSON report of one-sided derivative mismatches across each face.
    #[arg(long)]
    emit_seam_report: Option<PathBuf>,
    /// Cut-off field localized onto the periodic box.
    #[arg(long)]
    localized: Option<PathBuf>,
    #[arg(long, default_value_t = extension::DEFAULT_BOX_FACTOR)]
    box_factor: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Emit {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_check)]
    check: Check,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    harness: HarnessArgs,
    #[arg(long, value_enum, default_value = "csv")]
    emit: Emit,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_check, required = true)]
    checks: Vec<Check>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    harness: HarnessArgs,
    /// CSV of every report.
    #[arg(long)]
    out: PathBuf,
    /// JSON of the per-check summary.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_check(s: &str) -> std::result::Result<Check, String> {
    s.parse::<Check>().map_err(|e| e.to_string())
}

#[derive(Debug, Args, Serialize)]
struct PdeArgs {
    /// Spatial modes.
    #[arg(long = "N", default_value_t = 256)]
    modes: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Shift of the nonlocal term.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    t_end: f64,
    /// `const` or `sine:<amplitude>`.
    #[arg(long, default_value = "sine:0.5")]
    v0: String,
    #[arg(long, default_value_t = 0.1)]
    delta0: f64,
    #[arg(long, default_value_t = 200)]
    snapshots: usize,
    /// Times at which space-time diagnostics and the closure check run.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5f64, 1.0])]
    checkpoints: Vec<f64>,
    /// Plain heat flow, for testing.
    #[arg(long)]
    no_forcing: bool,
    /// Directory receiving trajectory.field, diagnostics.csv and fit.json.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Provenance embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub params: Value,
    pub seeds: Vec<u64>,
    pub bump_profile: &'static str,
    pub cutoff_profile: &'static str,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(
        command: &str,
        params: &impl Serialize,
        seeds: Vec<u64>,
        outputs: &[&Path],
    ) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            params: serde_json::to_value(params)?,
            seeds,
            bump_profile: lp::PROFILE_VERSION,
            cutoff_profile: extension::CUTOFF_VERSION,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        })
    }

    fn value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

fn json_bytes(report: Value, manifest: &RunManifest) -> Result<Vec<u8>> {
    let mut v = report;
    if let Value::Object(map) = &mut v {
        map.insert("manifest".into(), manifest.value());
    }
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes the JSON report to `path`, or prints it.
fn emit_json(path: Option<&Path>, report: Value, manifest: &RunManifest) -> Result<()> {
    let bytes = json_bytes(report, manifest)?;
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// CSV with the manifest on a leading `#` comment line.
fn csv_with_manifest(body: &[u8], manifest: &RunManifest) -> Result<Vec<u8>> {
    let mut out = b"# manifest: ".to_vec();
    out.extend(serde_json::to_vec(&manifest.value())?);
    out.push(b'\n');
    out.extend_from_slice(body);
    Ok(out)
}

fn domain_from(
    u: &SampledField,
    lo: &Option<Vec<f64>>,
    hi: &Option<Vec<f64>>,
) -> Result<SpaceTimeBox> {
    match (lo, hi) {
        (Some(lo), Some(hi)) => {
            if lo.len() != u.grid().ndim() || hi.len() != u.grid().ndim() {
                return Err(Error::InvalidParameter(
                    "domain corners need one entry per axis".into(),
                ));
            }
            SpaceTimeBox::new(lo.clone(), hi.clone())
        }
        _ => Ok(u.grid().extent()),
    }
}

fn sampled_family(family: &FamilyArgs, grid: &GridArgs) -> Result<Vec<(String, SampledField)>> {
    let g = grid.grid()?;
    family
        .members()?
        .iter()
        .map(|f| Ok((f.name(), f.sample(&g)?)))
        .collect()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let members = a.family.members()?;
    if members.len() != 1 {
        return Err(Error::InvalidParameter(
            "gen samples exactly one family member".into(),
        ));
    }
    let u = members[0].sample(&a.grid.grid()?)?;
    let manifest = RunManifest::new("gen", a, a.family.seeds(), &[&a.out])?;
    write_field(&a.out, &u, Some(&manifest.value()))
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let (_, u) = read_field(&a.input)?;
    let partition = build_partition(u.grid(), BumpProfile::new(a.k)?)?;
    let stack = decompose(&u, &partition)?;
    let mut outputs: Vec<PathBuf> = Vec::new();
    if let Some(dir) = &a.bands_dir {
        std::fs::create_dir_all(dir)?;
        outputs = (0..stack.len())
            .map(|j| dir.join(format!("band_{j:02}.field")))
            .collect();
    }
    if let Some(o) = &a.out {
        outputs.push(o.clone());
    }
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    let manifest = RunManifest::new("decompose", a, Vec::new(), &refs)?;
    if a.bands_dir.is_some() {
        for (j, band) in stack.bands().iter().enumerate() {
            write_field(&outputs[j], band, Some(&manifest.value()))?;
        }
    }
    let recon = lp::reconstruct(&stack)?;
    let err = recon.sub(&u)?.max_abs() / u.max_abs().max(f64::MIN_POSITIVE);
    let report = json!({
        "max_band": partition.max_band(),
        "resolved_bands": partition.resolved_bands().collect::<Vec<_>>(),
        "sup_norms": stack.sup_norms(),
        "energies": stack.energies(),
        "reconstruction_rel_error": err,
    });
    emit_json(a.out.as_deref(), report, &manifest)
}

fn cmd_norm(a: &NormArgs) -> Result<()> {
    let (_, u) = read_field(&a.input)?;
    let domain = domain_from(&u, &a.lo, &a.hi)?;
    let p: Exponent = a.p.parse()?;
    let q: Exponent = a.q.parse()?;
    let mut extra = json!({});
    let value = match a.space {
        Space::Lp => norms::lp_norm(&u, p, &domain)?,
        Space::Sobolev => {
            let r = norms::parabolic_sobolev_norm(&u, SobolevOrder::new(a.m)?, &domain)?;
            extra = json!({ "terms": r.terms, "under_resolved": r.under_resolved });
            r.value
        }
        Space::Besov | Space::Lt => {
            if a.lo.is_some() {
                return Err(Error::InvalidParameter(
                    "band norms are taken over the whole grid".into(),
                ));
            }
            let partition = build_partition(u.grid(), BumpProfile::new(a.k)?)?;
            match a.space {
                Space::Besov => lp::besov_norm(&u, &partition, a.s, p, q)?,
                _ => lp::lizorkin_triebel_norm(&u, &partition, a.s, p, q, a.truncated)?,
            }
        }
    };
    let report = json!({
        "space": a.space,
        "params": { "p": p.value().to_string(), "q": q.value().to_string(), "s": a.s, "m": a.m, "truncated": a.truncated, "k": a.k },
        "value": value,
        "domain": domain,
        "details": extra,
    });
    let outs: Vec<&Path> = a.out.iter().map(|p| p.as_path()).collect();
    emit_json(
        a.out.as_deref(),
        report,
        &RunManifest::new("norm", a, Vec::new(), &outs)?,
    )
}

fn cmd_bmo(a: &BmoArgs) -> Result<()> {
    let (_, u) = read_field(&a.input)?;
    let domain = domain_from(&u, &a.lo, &a.hi)?;
    if !(a.stride > 0.0) || !(a.min_cells > 0.0) {
        return Err(Error::InvalidParameter(
            "stride and min-cells must be positive".into(),
        ));
    }
    let policy = CubeSearchPolicy {
        radii: a.radii.clone(),
        min_cells: a.min_cells,
        stride: a.stride,
    };
    let report = if a.overline {
        serde_json::to_value(overline_bmo_norm(&u, &domain, &policy)?)?
    } else {
        let form = match a.form {
            FormArg::Osc => BmoForm::Oscillation,
            FormArg::Inf => BmoForm::Inf,
        };
        serde_json::to_value(bmo_norm(&u, &domain, &policy, form)?)?
    };
    let outs: Vec<&Path> = a.out.iter().map(|p| p.as_path()).collect();
    emit_json(
        a.out.as_deref(),
        json!({ "domain": domain, "result": report }),
        &RunManifest::new("bmo", a, Vec::new(), &outs)?,
    )
}

fn cmd_extend(a: &ExtendArgs) -> Result<()> {
    let (_, u) = read_field(&a.input)?;
    let ut = extension::extend_full(&u, a.m)?;
    let seam = a
        .emit_seam_report
        .as_ref()
        .map(|_| extension::seam_report(&u, a.m))
        .transpose()?;
    let localized = match &a.localized {
        Some(_) => Some(extension::extend_and_localize(&u, a.m, Some(a.box_factor))?),
        None => None,
    };
    let mut outs: Vec<&Path> = vec![&a.out];
    outs.extend(a.emit_seam_report.as_deref());
    outs.extend(a.localized.as_deref());
    let manifest = RunManifest::new("extend", a, Vec::new(), &outs)?;
    write_field(&a.out, &ut, Some(&manifest.value()))?;
    if let (Some(path), Some(f)) = (&a.localized, &localized) {
        write_field(path, f, Some(&manifest.value()))?;
    }
    if let (Some(path), Some(report)) = (&a.emit_seam_report, seam) {
        let mass = extension::extension_mass_report(&u, a.m)?;
        let bytes = json_bytes(json!({ "seams": report, "mass": mass }), &manifest)?;
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let fields = sampled_family(&a.family, &a.grid)?;
    let table = constant_sweep(&fields, &[a.check], &a.harness.config()?)?;
    let outs: Vec<&Path> = a.out.iter().map(|p| p.as_path()).collect();
    let manifest = RunManifest::new("verify", a, a.family.seeds(), &outs)?;
    let bytes = match a.emit {
        Emit::Csv => csv_with_manifest(&table.to_csv()?, &manifest)?,
        Emit::Json => json_bytes(serde_json::to_value(&table)?, &manifest)?,
    };
    match &a.out {
        Some(p) => write_atomic(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let fields = sampled_family(&a.family, &a.grid)?;
    let table = constant_sweep(&fields, &a.checks, &a.harness.config()?)?;
    let mut outs: Vec<&Path> = vec![&a.out];
    outs.extend(a.summary.as_deref());
    let manifest = RunManifest::new("sweep", a, a.family.seeds(), &outs)?;
    let csv = csv_with_manifest(&table.to_csv()?, &manifest)?;
    let summary = match &a.summary {
        Some(_) => Some(json_bytes(json!({ "summary": table.summary }), &manifest)?),
        None => None,
    };
    write_atomic(&a.out, &csv)?;
    if let (Some(p), Some(bytes)) = (&a.summary, summary) {
        write_atomic(p, &bytes)?;
    }
    Ok(())
}

fn cmd_pde(a: &PdeArgs) -> Result<()> {
    let v0: InitialGradient = a.v0.parse()?;
    let cfg = PdeConfig {
        modes: a.modes,
        dt: a.dt,
        shift: a.a,
        t_end: a.t_end,
        delta0: a.delta0,
        v0,
        forcing: !a.no_forcing,
        snapshots: a.snapshots,
        diag_space: PdeConfig::default().diag_space.min(a.modes),
        ..PdeConfig::default()
    };
    let run = pde::run(&cfg, &a.checkpoints)?;
    let fit = pde::check_apriori(&run.diagnostics, cfg.dt)?;
    let harness = HarnessConfig::default();
    let closure: Vec<pde::KtClosureReport> = a
        .checkpoints
        .iter()
        .map(|&t| pde::kt_closure_check(&run, t, &harness))
        .collect::<Result<_>>()?;
    let trajectory = run.space_time_field(Series::Gradient, cfg.t_end)?;

    let traj_path = a.out_dir.join("trajectory.field");
    let diag_path = a.out_dir.join("diagnostics.csv");
    let fit_path = a.out_dir.join("fit.json");
    let manifest = RunManifest::new(
        "pde-run",
        a,
        Vec::new(),
        &[&traj_path, &diag_path, &fit_path],
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let map_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["t", "m", "G", "bmo", "sobolev"])
        .map_err(map_err)?;
    for d in &run.diagnostics.samples {
        let ck = run
            .diagnostics
            .checkpoints
            .iter()
            .find(|c| (c.t - d.t).abs() <= 0.5 * cfg.dt);
        w.write_record([
            format!("{:e}", d.t),
            format!("{:e}", d.m),
            format!("{:e}", d.g),
            ck.map(|c| format!("{:e}", c.bmo)).unwrap_or_default(),
            ck.map(|c| format!("{:e}", c.sobolev)).unwrap_or_default(),
        ])
        .map_err(map_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let diag_bytes = csv_with_manifest(&body, &manifest)?;
    let fit_bytes = json_bytes(
        json!({ "apriori": fit, "closure": closure, "checkpoints": run.diagnostics.checkpoints }),
        &manifest,
    )?;

    std::fs::create_dir_all(&a.out_dir)?;
    write_field(&traj_path, &trajectory, Some(&manifest.value()))?;
    write_atomic(&diag_path, &diag_bytes)?;
    write_atomic(&fit_path, &fit_bytes)?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| {
            Error::InvalidParameter(format!("{THREADS_ENV} must be a thread count, got {v:?}"))
        })?;
        // a second configuration in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit status: 0 success, 1 domain error, 2 usage error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Bmo(a) => cmd_bmo(a),
        Command::Extend(a) => cmd_extend(a),
        Command::Verify(a) => cmd_verify(a),
        Command::PdeRun(a) => cmd_pde(a),
        Command::Sweep(a) => cmd_sweep(a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
