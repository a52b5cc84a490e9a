//! Run configuration, the single-run pipeline, and persistence of records,
//! profiles and summaries.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{eta0, mastercutoff_pair, verify_cutoff, CutoffKind, CutoffPair, CutoffReport, Eta0Report, VirialConstants};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::evolution::{evolve, BlowupVerdict, EvolutionOptions, EvolutionState, Outcome};
use crate::experiments::{
    criterion_energycritical, criterion_masscritical, criterion_supercritical, fit_rate, growth_floor, CriterionVerdict,
    GrowthFloor, RateFit,
};
use crate::field::Field;
use crate::grid::{make_grid, RadialGrid};
use crate::groundstate::{
    bubble_report, default_initial_guess, explicit_w, solve_q, BubbleReport, GroundState, PetviashviliOptions,
    PohozaevReport,
};
use crate::params::{make_params, Criticality, Params};

/// Environment variable overriding the root of relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "BNLS_OUTPUT_ROOT";
pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const FINAL_STATE_FILE: &str = "final_state.csv";
pub const RECORD_COLUMNS: [&str; 9] = ["t", "mass", "energy", "grad_l2", "lap_l2", "m_r", "v_r", "n_r", "dt"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub d: usize,
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rmax: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// lambda Q with Q the ground state on the run grid.
    ScaledGroundState { lambda: f64 },
    /// amplitude exp(-r^2 / width^2) exp(i chirp r^2).
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        chirp: f64,
    },
    /// Profile exported by `write_profile` or `write_field` on the run grid.
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub scale: f64,
    pub kind: CutoffKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub params: ParamSpec,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub cutoff: CutoffSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub evolution: EvolutionOptions,
    #[serde(default)]
    pub ground_state: PetviashviliOptions,
}

fn default_id() -> String {
    "run".into()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        RunConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<SweepConfig> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub residual: f64,
    pub c_gn: f64,
    pub k_gn: f64,
    pub iterations: usize,
    pub pohozaev: PohozaevReport,
}

impl From<&GroundState> for GroundStateSummary {
    fn from(q: &GroundState) -> Self {
        GroundStateSummary {
            residual: q.residual,
            c_gn: q.c_gn,
            k_gn: q.k_gn,
            iterations: q.iterations,
            pohozaev: q.pohozaev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetadata {
    pub scale: f64,
    pub kind: CutoffKind,
    pub support_radius: f64,
    pub report: CutoffReport,
    pub constants: VirialConstants,
    pub eta0: Option<Eta0Report>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMaxima {
    pub mass_rel: f64,
    pub energy_rel: f64,
    /// max over records of |Delta u(t)| / |Delta u(0)|.
    pub lap_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub config: RunConfig,
    pub params: Params,
    pub criterion: Option<CriterionVerdict>,
    pub criterion_error: Option<String>,
    pub ground_state: Option<GroundStateSummary>,
    pub bubble: Option<BubbleReport>,
    pub cutoff: CutoffMetadata,
    pub verdict: BlowupVerdict,
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
    pub growth_floor: Option<GrowthFloor>,
    pub drift: DriftMaxima,
    pub steps: usize,
    pub rejected_steps: usize,
    pub final_time: f64,
    pub record_count: usize,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: EvolutionState,
    pub wall_seconds: f64,
}

pub fn build_initial(
    cfg: &RunConfig,
    params: &Params,
    grid: &Arc<RadialGrid>,
    q: &mut Option<GroundState>,
) -> Result<Field> {
    match &cfg.initial {
        InitialData::ScaledGroundState { lambda } => {
            let gs = ground_state_for(cfg, params, grid, q)?;
            Ok(gs.profile.scaled(*lambda))
        }
        InitialData::Gaussian { amplitude, width, chirp } => {
            if !(*width > 0.0) {
                return Err(Error::Config(format!("initial.width must be positive, got {width}")));
            }
            let (a, w, c) = (*amplitude, *width, *chirp);
            Ok(Field::from_fn(grid.clone(), |r| Complex64::from_polar(a * (-(r / w).powi(2)).exp(), c * r * r)))
        }
        InitialData::FromFile { path } => read_field(path, grid),
    }
}

fn ground_state_for<'a>(
    cfg: &RunConfig,
    params: &Params,
    grid: &Arc<RadialGrid>,
    q: &'a mut Option<GroundState>,
) -> Result<&'a GroundState> {
    if q.is_none() {
        let base = params.with_mu(0.0);
        *q = Some(solve_q(&base, &default_initial_guess(grid.clone()), &cfg.ground_state)?);
    }
    Ok(q.as_ref().expect("just solved"))
}

fn evaluate_criterion(
    cfg: &RunConfig,
    u0: &Field,
    params: &Params,
    grid: &Arc<RadialGrid>,
    q: &mut Option<GroundState>,
    bubble: &mut Option<BubbleReport>,
) -> Result<CriterionVerdict> {
    match params.criticality {
        Criticality::MassCritical => criterion_masscritical(u0, params),
        Criticality::Intercritical => {
            let needs_q = params.mu == 0.0 && crate::diagnostics::energy(u0, params) >= 0.0;
            let q_ref = if needs_q { Some(ground_state_for(cfg, params, grid, q)?) } else { q.as_ref() };
            criterion_supercritical(u0, params, q_ref, cfg.kappa)
        }
        Criticality::EnergyCritical => {
            let w = match bubble {
                Some(w) => *w,
                None => *bubble.insert(bubble_report(params.d, grid.clone())?),
            };
            criterion_energycritical(u0, params, &w, cfg.kappa)
        }
        Criticality::MassSubcritical | Criticality::EnergySupercritical => {
            Err(Error::NotApplicable(format!("no blowup criterion for {:?}", params.criticality)))
        }
    }
}

pub fn cutoff_metadata(pair: &CutoffPair) -> Result<CutoffMetadata> {
    let eta = match pair.kind {
        CutoffKind::AppendixB => Some(eta0(pair.profile(), pair.d)?),
        CutoffKind::Generic => None,
    };
    Ok(CutoffMetadata {
        scale: pair.scale,
        kind: pair.kind,
        support_radius: pair.support_radius(),
        report: verify_cutoff(pair)?,
        constants: pair.virial_constants(),
        eta0: eta,
    })
}

pub fn drift_maxima(records: &[DiagnosticsRecord]) -> DriftMaxima {
    let Some(first) = records.first() else {
        return DriftMaxima { mass_rel: 0.0, energy_rel: 0.0, lap_ratio: 1.0 };
    };
    let rel = |a: f64, b: f64| if b != 0.0 { ((a - b) / b).abs() } else { a.abs() };
    let mut out = DriftMaxima { mass_rel: 0.0, energy_rel: 0.0, lap_ratio: 1.0 };
    for r in records {
        out.mass_rel = out.mass_rel.max(rel(r.mass, first.mass));
        out.energy_rel = out.energy_rel.max(rel(r.energy, first.energy));
        if first.lap_l2 > 0.0 {
            out.lap_ratio = out.lap_ratio.max(r.lap_l2 / first.lap_l2);
        }
    }
    out
}

/// criterion -> evolve -> fit for one configuration. Nothing is written.
pub fn run_config(cfg: &RunConfig) -> Result<RunArtifacts> {
    let start = std::time::Instant::now();
    let params = make_params(cfg.params.d, cfg.params.sigma, cfg.params.mu)?;
    let grid = make_grid(cfg.params.d, cfg.grid.rmax, cfg.grid.n)?;
    let mut q = None;
    let mut bubble = None;
    let u0 = build_initial(cfg, &params, &grid, &mut q)?;
    let (criterion, criterion_error) = match evaluate_criterion(cfg, &u0, &params, &grid, &mut q, &mut bubble) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pair = mastercutoff_pair(cfg.cutoff.scale, cfg.cutoff.kind, &grid)?;
    let cutoff = cutoff_metadata(&pair)?;
    let out = evolve(&u0, &params, &pair, &cfg.evolution)?;
    let (rate_fit, rate_fit_error) = match (out.verdict.outcome, out.verdict.t_estimate) {
        (Outcome::BlowupDetected, Some(t)) => match fit_rate(&out.records, t, &params) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, None),
    };
    let growth = if params.criticality == Criticality::MassCritical
        && params.mu == 0.0
        && out.verdict.outcome != Outcome::BlowupDetected
    {
        growth_floor(&out.records).ok()
    } else {
        None
    };
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        params,
        criterion,
        criterion_error,
        ground_state: q.as_ref().map(GroundStateSummary::from),
        bubble,
        cutoff,
        verdict: out.verdict.clone(),
        rate_fit,
        rate_fit_error,
        growth_floor: growth,
        drift: drift_maxima(&out.records),
        steps: out.state.step_count,
        rejected_steps: out.state.rejected,
        final_time: out.state.t,
        record_count: out.records.len(),
    };
    Ok(RunArtifacts { summary, records: out.records, final_state: out.state, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Resolves a run's output directory against the output root.
pub fn output_dir(configured: Option<&Path>, fallback: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    match configured {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => root.join(p),
        None => root.join(fallback),
    }
}

/// Writes into a sibling temporary directory and renames it into place, so
/// an aborted run leaves nothing behind.
pub fn write_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = dir.file_name().ok_or_else(|| Error::Config(format!("bad output dir {}", dir.display())))?;
    let tmp = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    let result = fill(&tmp).and_then(|_| {
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&tmp, dir).map_err(Error::from)
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

pub fn write_run(dir: &Path, art: &RunArtifacts) -> Result<()> {
    write_atomically(dir, |tmp| {
        write_records(&tmp.join(RECORDS_FILE), &art.records)?;
        write_json(&tmp.join(SUMMARY_FILE), &art.summary)?;
        write_field(&tmp.join(FINAL_STATE_FILE), &art.final_state.u)?;
        write_json(&tmp.join(TIMING_FILE), &serde_json::json!({ "wall_seconds": art.wall_seconds }))
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_reader(fs::File::open(path)?)?)
}

pub fn write_records(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.mass.to_string(),
            r.energy.to_string(),
            r.grad_l2.to_string(),
            r.lap_l2.to_string(),
            r.m_r.to_string(),
            opt(r.v_r),
            opt(r.n_r),
            r.dt.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_cell(s: &str, column: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Schema(format!("line {line}: column {column}: cannot parse {s:?}")))
}

pub fn read_records(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = rd.headers()?.clone();
    for (i, name) in header.iter().enumerate() {
        if RECORD_COLUMNS.get(i) != Some(&name) {
            return Err(Error::Schema(format!("unexpected column {name:?} at position {i}")));
        }
    }
    if header.len() != RECORD_COLUMNS.len() {
        return Err(Error::Schema(format!("missing column {:?}", RECORD_COLUMNS[header.len()])));
    }
    let mut out = Vec::new();
    for (k, row) in rd.records().enumerate() {
        let row = row?;
        let line = k + 2;
        if row.len() != RECORD_COLUMNS.len() {
            return Err(Error::Schema(format!("line {line}: {} fields, expected {}", row.len(), RECORD_COLUMNS.len())));
        }
        let f = |i: usize| parse_cell(&row[i], RECORD_COLUMNS[i], line);
        let o = |i: usize| if row[i].is_empty() { Ok(None) } else { f(i).map(Some) };
        out.push(DiagnosticsRecord {
            t: f(0)?,
            mass: f(1)?,
            energy: f(2)?,
            grad_l2: f(3)?,
            lap_l2: f(4)?,
            m_r: f(5)?,
            v_r: o(6)?,
            n_r: o(7)?,
            dt: f(8)?,
            mass_drift: false,
            energy_drift: false,
        });
    }
    Ok(out)
}

/// Complex profile as columns r, re, im.
pub fn write_field(path: &Path, u: &Field) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "re", "im"])?;
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        w.write_record([r.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a profile with columns r, re[, im] (or r, q for a real profile)
/// whose nodes coincide with the grid's.
pub fn read_field(path: &Path, grid: &Arc<RadialGrid>) -> Result<Field> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let real_only = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["r", "re", "im"] => false,
        ["r", "re"] | ["r", "q"] | ["r", "w"] => true,
        _ => return Err(Error::Schema(format!("unrecognized profile columns {header:?}"))),
    };
    let mut values = Vec::with_capacity(grid.len());
    for (k, row) in rd.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let node = grid.nodes().get(k).copied().ok_or_else(|| Error::GridMismatch("more samples than grid nodes".into()))?;
        let r = parse_cell(&row[0], "r", line)?;
        if (r - node).abs() > 1e-12 * node.max(1.0) {
            return Err(Error::GridMismatch(format!("line {line}: node {r} differs from grid node {node}")));
        }
        let re = parse_cell(&row[1], &header[1], line)?;
        let im = if real_only { 0.0 } else { parse_cell(&row[2], "im", line)? };
        values.push(Complex64::new(re, im));
    }
    Field::new(grid.clone(), values)
}

/// Real profile as columns r, <name>.
pub fn write_profile(path: &Path, u: &Field, name: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", name])?;
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        w.write_record([r.to_string(), v.re.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateExport {
    pub params: Params,
    pub grid: GridSpec,
    pub ground_state: Option<GroundStateSummary>,
    pub bubble: Option<BubbleReport>,
}

/// Solves for Q (or builds W in the energy-critical case) and exports the
/// profile CSV and a JSON of constants into `dir`.
pub fn export_ground_state(params: &Params, grid: GridSpec, opts: &PetviashviliOptions, dir: &Path) -> Result<GroundStateExport> {
    let g = make_grid(params.d, grid.rmax, grid.n)?;
    let base = params.with_mu(0.0);
    if params.criticality == Criticality::EnergyCritical {
        let w = explicit_w(params.d, g.clone())?;
        let rep = bubble_report(params.d, g)?;
        let export = GroundStateExport { params: base, grid, ground_state: None, bubble: Some(rep) };
        write_atomically(dir, |tmp| {
            write_profile(&tmp.join("bubble.csv"), &w, "w")?;
            write_json(&tmp.join("bubble.json"), &export)
        })?;
        return Ok(export);
    }
    let q = solve_q(&base, &default_initial_guess(g), opts)?;
    let export = GroundStateExport { params: base, grid, ground_state: Some(GroundStateSummary::from(&q)), bubble: None };
    write_atomically(dir, |tmp| {
        write_profile(&tmp.join("groundstate.csv"), &q.profile, "q")?;
        write_json(&tmp.join("groundstate.json"), &export)
    })?;
    Ok(export)
}

pub fn read_ground_state_export(path: &Path) -> Result<GroundStateExport> {
    Ok(serde_json::from_reader(fs::File::open(path)?)?)
}
