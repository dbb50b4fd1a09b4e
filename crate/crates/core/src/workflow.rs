//! Batch workflows: a flat config record, artifact writing and run manifests.
//!
//! Every workflow writes its artifacts through a temporary file in the target
//! directory followed by a rename, then a `<out>.manifest.json` describing the run.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::circle::{dimension_estimate, lyapunov_spectrum, rigidity_verdict, spectrum_interval_check, BlaschkeProduct};
use crate::correspondence::{
    curve_invariance_check, degree_relation_check, disk_samples, linearizer_graph_samples, minimal_curve,
    multiplier_relation_search, CurveCandidate, RELATION_TOL,
};
use crate::error::{Error, Result};
use crate::expansion::{geometric_radii, measure_ball_scaling, shrink_rate_estimate};
use crate::linearization::{generalized_koenigs, koenigs_series, DEFAULT_TRUNCATION};
use crate::measures::{
    brownian_exit_measure_with_stats, green_function, measure_compare, sample_mmem, EmpiricalMeasure, Provenance,
    WalkOptions, Window, MIN_DEPTH,
};
use crate::periodic::periodic_points;
use crate::rational::{parse_complex, RationalMap};
use crate::render::{render_escape_time, render_measure_density, RenderMode};
use crate::sphere::{Cx, SpherePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Linearize,
    Periodic,
    Mmem,
    Green,
    Harmonic,
    Compare,
    Correspond,
    Blaschke,
    Tce,
    Ballscale,
    Render,
}

/// A map given inline as a `{num, den}` table or as the path of a map file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    File(PathBuf),
    Inline(toml::Table),
}

/// Blaschke zeros given inline as `[re, im]` literals or as the path of a file with a `zeros` key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZerosSpec {
    File(PathBuf),
    Inline(Vec<toml::Value>),
}

/// Parameters of one run. Only the keys a workflow needs are required; the rest are ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workflow: Workflow,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub map2: Option<MapSpec>,
    /// Base point, evaluation point or walk start, depending on the workflow.
    #[serde(default, deserialize_with = "complex_opt")]
    pub point: Option<Cx>,
    #[serde(default, deserialize_with = "complex_opt")]
    pub point2: Option<Cx>,
    #[serde(default)]
    pub trunc: Option<usize>,
    #[serde(default)]
    pub period: Option<usize>,
    #[serde(default)]
    pub n_points: Option<usize>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub n_walks: Option<usize>,
    #[serde(default)]
    pub eps_stop: Option<f64>,
    #[serde(default)]
    pub a_max: Option<usize>,
    #[serde(default)]
    pub b_max: Option<usize>,
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default)]
    pub max_bidegree: Option<usize>,
    #[serde(default)]
    pub zeros: Option<ZerosSpec>,
    #[serde(default)]
    pub rotation: Option<f64>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub branches: Option<usize>,
    #[serde(default)]
    pub measure: Option<PathBuf>,
    #[serde(default)]
    pub measure2: Option<PathBuf>,
    #[serde(default)]
    pub points: Option<PathBuf>,
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub n_radii: Option<usize>,
    /// `[re_min, re_max, im_min, im_max]`.
    #[serde(default)]
    pub window: Option<[f64; 4]>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub height: Option<usize>,
    #[serde(default)]
    pub mode: Option<RenderMode>,
}

fn complex_opt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Cx>, D::Error> {
    let v = Option::<toml::Value>::deserialize(d)?;
    v.map(|v| parse_complex("point", &v).map_err(serde::de::Error::custom)).transpose()
}

impl RunConfig {
    pub fn new(workflow: Workflow) -> Self {
        RunConfig {
            workflow,
            seed: 0,
            out: None,
            map: None,
            map2: None,
            point: None,
            point2: None,
            trunc: None,
            period: None,
            n_points: None,
            depth: None,
            n_walks: None,
            eps_stop: None,
            a_max: None,
            b_max: None,
            ell: None,
            max_bidegree: None,
            zeros: None,
            rotation: None,
            n_max: None,
            radius: None,
            branches: None,
            measure: None,
            measure2: None,
            points: None,
            r_min: None,
            r_max: None,
            n_radii: None,
            window: None,
            bins: None,
            width: None,
            height: None,
            mode: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(&e)))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for spec in [&mut self.map, &mut self.map2].into_iter().flatten() {
            if let MapSpec::File(p) = spec {
                fix(p);
            }
        }
        if let Some(ZerosSpec::File(p)) = &mut self.zeros {
            fix(p);
        }
        for p in [&mut self.out, &mut self.measure, &mut self.measure2, &mut self.points].into_iter().flatten() {
            fix(p);
        }
    }

    /// Required parameters of the selected workflow that are missing.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut need = |present: bool, key: &'static str| {
            if !present {
                out.push(key);
            }
        };
        let has_out = self.out.is_some();
        match self.workflow {
            Workflow::Linearize => {
                need(self.map.is_some(), "map");
                need(self.point.is_some(), "point");
                need(has_out, "out");
            }
            Workflow::Periodic => {
                need(self.map.is_some(), "map");
                need(self.period.is_some(), "period");
                need(has_out, "out");
            }
            Workflow::Mmem => {
                need(self.map.is_some(), "map");
                need(self.n_points.is_some(), "n_points");
                need(has_out, "out");
            }
            Workflow::Green => {
                need(self.map.is_some(), "map");
                need(self.point.is_some(), "point");
            }
            Workflow::Harmonic => {
                need(self.map.is_some(), "map");
                need(self.point.is_some(), "point");
                need(self.n_walks.is_some(), "n_walks");
                need(has_out, "out");
            }
            Workflow::Compare => {
                need(self.measure.is_some(), "measure");
                need(self.measure2.is_some(), "measure2");
                need(has_out, "out");
            }
            Workflow::Correspond => {
                need(self.map.is_some(), "map");
                need(self.map2.is_some(), "map2");
                need(self.point.is_some(), "point");
                need(self.point2.is_some(), "point2");
                need(self.a_max.is_some(), "a_max");
                need(self.b_max.is_some(), "b_max");
                need(has_out, "out");
            }
            Workflow::Blaschke => {
                need(self.zeros.is_some(), "zeros");
                need(self.n_max.is_some(), "n_max");
                need(has_out, "out");
            }
            Workflow::Tce => {
                need(self.map.is_some(), "map");
                need(self.point.is_some(), "point");
                need(self.radius.is_some(), "radius");
                need(self.n_max.is_some(), "n_max");
                need(has_out, "out");
            }
            Workflow::Ballscale => {
                need(self.measure.is_some(), "measure");
                need(self.points.is_some(), "points");
                need(has_out, "out");
            }
            Workflow::Render => {
                let density = self.mode == Some(RenderMode::MeasureDensity);
                need(self.map.is_some() || (density && self.measure.is_some()), "map");
                need(has_out, "out");
            }
        }
        out
    }
}

fn span_hint(e: &toml::de::Error) -> String {
    e.span().map(|s| format!(" (at byte {})", s.start)).unwrap_or_default()
}

/// What a run produced.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    /// Human-readable result lines for standard output.
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct InputRecord {
    path: PathBuf,
    sha256: String,
}

/// Run bookkeeping: referenced input files and written artifacts.
#[derive(Default)]
struct Ledger {
    inputs: Vec<InputRecord>,
    outcome: RunOutcome,
}

impl Ledger {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    fn write(&mut self, path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        write_atomic(path, body)?;
        self.outcome.artifacts.push(path.to_path_buf());
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, path: &Path, value: &T) -> Result<()> {
        self.write(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    fn say(&mut self, line: String) {
        self.outcome.summary.push(line);
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary file in the destination directory, then renames it into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `<path>` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Hash of the config together with the contents of every file it references.
fn parameter_hash(cfg: &RunConfig, inputs: &[InputRecord]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg)?);
    for i in inputs {
        h.update(i.sha256.as_bytes());
    }
    Ok(hex(&h.finalize()))
}

/// Parameter hash of a config, reading the files it references.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let mut ledger = Ledger::default();
    for spec in [&cfg.map, &cfg.map2].into_iter().flatten() {
        if let MapSpec::File(p) = spec {
            ledger.read(p)?;
        }
    }
    if let Some(ZerosSpec::File(p)) = &cfg.zeros {
        ledger.read(p)?;
    }
    for p in [&cfg.measure, &cfg.measure2, &cfg.points].into_iter().flatten() {
        ledger.read(p)?;
    }
    parameter_hash(cfg, &ledger.inputs)
}

/// Runs one workflow and writes its artifacts and manifest.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let missing = cfg.missing();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "workflow `{}` is missing required key(s): {}",
            workflow_name(cfg.workflow),
            missing.join(", ")
        )));
    }
    let started = Instant::now();
    let mut ledger = Ledger::default();
    match cfg.workflow {
        Workflow::Linearize => linearize(cfg, &mut ledger)?,
        Workflow::Periodic => periodic(cfg, &mut ledger)?,
        Workflow::Mmem => mmem(cfg, &mut ledger)?,
        Workflow::Green => green(cfg, &mut ledger)?,
        Workflow::Harmonic => harmonic(cfg, &mut ledger)?,
        Workflow::Compare => compare(cfg, &mut ledger)?,
        Workflow::Correspond => correspond(cfg, &mut ledger)?,
        Workflow::Blaschke => blaschke(cfg, &mut ledger)?,
        Workflow::Tce => tce(cfg, &mut ledger)?,
        Workflow::Ballscale => ballscale(cfg, &mut ledger)?,
        Workflow::Render => render(cfg, &mut ledger)?,
    }
    if let Some(out) = &cfg.out {
        let manifest = json!({
            "tool": "holoscope",
            "version": env!("CARGO_PKG_VERSION"),
            "workflow": cfg.workflow,
            "seed": cfg.seed,
            "parameter_hash": parameter_hash(cfg, &ledger.inputs)?,
            "config": cfg,
            "inputs": ledger.inputs,
            "artifacts": ledger.outcome.artifacts,
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        let path = sibling(out, ".manifest.json");
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
    }
    Ok(ledger.outcome)
}

fn workflow_name(w: Workflow) -> String {
    serde_json::to_value(w).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn load_map(spec: &MapSpec, key: &str, ledger: &mut Ledger) -> Result<RationalMap> {
    match spec {
        MapSpec::File(path) => {
            let bytes = ledger.read(path)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
            RationalMap::from_config_str(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })
        }
        MapSpec::Inline(table) => RationalMap::from_table(table).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{key}: {m}")),
            other => other,
        }),
    }
}

fn required<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

fn point_json(p: &SpherePoint) -> Value {
    match p.to_finite() {
        Some(z) => json!([z.re, z.im]),
        None => json!("inf"),
    }
}

fn out_path(cfg: &RunConfig) -> Result<PathBuf> {
    required(&cfg.out, "out")
}

fn linearize(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let p = SpherePoint::finite(required(&cfg.point, "point")?);
    let lin = koenigs_series(&f, &p, cfg.trunc.unwrap_or(DEFAULT_TRUNCATION))?;
    let report = json!({
        "base": point_json(&lin.base),
        "lambda": lin.lambda,
        "coeffs": lin.coeffs,
        "trust_radius": lin.trust_radius,
        "residual": lin.residual_at_trust,
    });
    let out = out_path(cfg)?;
    ledger.write_json(&out, &report)?;
    ledger.say(format!("lambda = {}, trust radius {:.6e}", lin.lambda, lin.trust_radius));
    Ok(())
}

fn periodic(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let orbits = periodic_points(&f, required(&cfg.period, "period")?)?;
    let cycles: Vec<Value> = orbits
        .cycles
        .iter()
        .map(|c| {
            json!({
                "period": c.period,
                "points": c.points.iter().map(point_json).collect::<Vec<_>>(),
                "multiplier": c.multiplier,
                "kind": c.kind,
            })
        })
        .collect();
    ledger.write_json(&out_path(cfg)?, &cycles)?;
    ledger.say(format!(
        "{} cycles of period {}; {} of {} points found",
        cycles.len(),
        orbits.period,
        orbits.census.found,
        orbits.census.expected
    ));
    Ok(())
}

fn write_measure(cfg: &RunConfig, mu: &EmpiricalMeasure, map_hash: Option<String>, ledger: &mut Ledger) -> Result<()> {
    let out = out_path(cfg)?;
    ledger.write(&out, |w| mu.write_csv(w))?;
    ledger.write_json(&sibling(&out, ".json"), &mu.sidecar(map_hash))?;
    Ok(())
}

/// Reads a measure CSV, taking seed and provenance from its sidecar when present.
fn load_measure(path: &Path, ledger: &mut Ledger) -> Result<EmpiricalMeasure> {
    let bytes = ledger.read(path)?;
    let (seed, provenance) = match fs::read(sibling(path, ".json")) {
        Ok(side) => {
            let v: Value = serde_json::from_slice(&side)
                .map_err(|e| Error::Config(format!("{}.json: {e}", path.display())))?;
            let seed = v.get("seed").and_then(Value::as_u64).unwrap_or(0);
            let provenance = v
                .get("provenance")
                .and_then(|p| serde_json::from_value(p.clone()).ok())
                .unwrap_or(Provenance::External);
            (seed, provenance)
        }
        Err(_) => (0, Provenance::External),
    };
    EmpiricalMeasure::read_csv(BufReader::new(bytes.as_slice()), seed, provenance).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Default start for inverse iteration, away from every exceptional set of low-degree examples.
const MMEM_START: Cx = Cx::new(0.3141592653589793, 0.2718281828459045);
const DEFAULT_GREEN_ITERATIONS: usize = 1000;

fn mmem(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let start = SpherePoint::finite(cfg.point.unwrap_or(MMEM_START));
    let mu = sample_mmem(&f, required(&cfg.n_points, "n_points")?, cfg.depth.unwrap_or(MIN_DEPTH), &start, cfg.seed)?;
    write_measure(cfg, &mu, Some(f.hash_hex()), ledger)?;
    ledger.say(format!("{} samples", mu.len()));
    Ok(())
}

fn green(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let z = required(&cfg.point, "point")?;
    let g = green_function(&f, z, cfg.n_max.unwrap_or(DEFAULT_GREEN_ITERATIONS), None)?;
    if let Some(out) = &cfg.out {
        ledger.write_json(out, &g)?;
    }
    ledger.say(format!("{:.6}", g.value));
    Ok(())
}

fn harmonic(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let (mu, stats) = brownian_exit_measure_with_stats(
        &f,
        required(&cfg.point, "point")?,
        required(&cfg.n_walks, "n_walks")?,
        cfg.eps_stop.unwrap_or(1e-4),
        cfg.seed,
        &WalkOptions::default(),
    )?;
    write_measure(cfg, &mu, Some(f.hash_hex()), ledger)?;
    ledger.say(format!(
        "{} walks, {} discarded, {} steps",
        stats.walks, stats.discarded, stats.total_steps
    ));
    Ok(())
}

fn window_of(cfg: &RunConfig, default: Window) -> Result<Window> {
    match cfg.window {
        Some([a, b, c, d]) => Window::new(a, b, c, d).map_err(|e| Error::Config(format!("window: {e}"))),
        None => Ok(default),
    }
}

fn compare(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let a = load_measure(cfg.measure.as_ref().unwrap(), ledger)?;
    let b = load_measure(cfg.measure2.as_ref().unwrap(), ledger)?;
    let window = window_of(cfg, Window::centered(2.0))?;
    let report = measure_compare(&a, &b, &window, cfg.bins.unwrap_or(64))?;
    ledger.write_json(&out_path(cfg)?, &report)?;
    ledger.say(format!("tv = {:.6}", report.tv_distance));
    Ok(())
}

/// Readable form of a curve: scaled so the leading coefficient in `y` (then `x`) is 1.
pub fn curve_display(c: &CurveCandidate) -> String {
    let mut lead = None;
    'outer: for j in (0..=c.n).rev() {
        for i in (0..=c.m).rev() {
            if c.coeff(i, j).norm() > 1e-8 {
                lead = Some(c.coeff(i, j));
                break 'outer;
            }
        }
    }
    let Some(lead) = lead else { return "0".into() };
    let mut terms = Vec::new();
    for j in (0..=c.n).rev() {
        for i in (0..=c.m).rev() {
            let v = c.coeff(i, j) / lead;
            if v.norm() <= 1e-8 {
                continue;
            }
            let mono = [(i, "x"), (j, "y")]
                .iter()
                .filter(|(k, _)| *k > 0)
                .map(|(k, s)| if *k == 1 { s.to_string() } else { format!("{s}^{k}") })
                .collect::<Vec<_>>()
                .join("*");
            terms.push((v, mono));
        }
    }
    let mut s = String::new();
    for (k, (v, mono)) in terms.iter().enumerate() {
        let real = v.im.abs() <= 1e-8 * v.norm().max(1.0);
        let (neg, mag) = if real { (v.re < 0.0, format_num(v.re.abs())) } else { (false, format!("({v})")) };
        let body = if mono.is_empty() {
            mag
        } else if mag == "1" {
            mono.clone()
        } else {
            format!("{mag}*{mono}")
        };
        match (k, neg) {
            (0, true) => s.push_str(&format!("-{body}")),
            (0, false) => s.push_str(&body),
            (_, true) => s.push_str(&format!(" - {body}")),
            (_, false) => s.push_str(&format!(" + {body}")),
        }
    }
    s
}

fn format_num(x: f64) -> String {
    let r = x.round();
    if (x - r).abs() < 1e-8 {
        format!("{r}")
    } else {
        format!("{x:.10}")
    }
}

fn correspond(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f1 = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let f2 = load_map(cfg.map2.as_ref().unwrap(), "map2", ledger)?;
    let p1 = SpherePoint::finite(required(&cfg.point, "point")?);
    let p2 = SpherePoint::finite(required(&cfg.point2, "point2")?);
    let trunc = cfg.trunc.unwrap_or(DEFAULT_TRUNCATION);
    let ell = cfg.ell.unwrap_or(1);
    let max_deg = cfg.max_bidegree.unwrap_or(3);
    let psi1 = koenigs_series(&f1, &p1, trunc)?;
    let lambda1 = psi1.lambda;
    let lambda2 = f2.derivative(&p2)?;
    let relations = multiplier_relation_search(
        lambda1,
        ell,
        lambda2,
        required(&cfg.a_max, "a_max")?,
        required(&cfg.b_max, "b_max")?,
        RELATION_TOL,
    )?;
    let zetas = disk_samples(cfg.n_points.unwrap_or(200), cfg.radius.unwrap_or(1.0));
    let mut rel_out = Vec::new();
    let mut curves = Vec::new();
    for r in &relations {
        let degree_ok = degree_relation_check(f1.degree, r.a, f2.degree, r.b);
        rel_out.push(json!({
            "a": r.a, "b": r.b, "ell": r.ell, "defect": r.defect, "primitive": r.primitive,
            "degree_check": degree_ok,
        }));
        if !(r.primitive && degree_ok) {
            continue;
        }
        // β ranges over powers of λ₁ up to λ₁^{aℓ}, the scalings compatible with the relation.
        for i in 0..=(r.a * r.ell) {
            let beta = lambda1.powu(i as u32);
            let chi2 = generalized_koenigs(&f2, &p2, beta, r.ell as u32, 0, trunc)?;
            let samples = linearizer_graph_samples(&psi1, &chi2, &zetas)?;
            if let Some(mut c) = minimal_curve(&samples, max_deg, max_deg) {
                let inv = curve_invariance_check(&mut c, &f1, r.a, &f2, r.b, &samples)?;
                curves.push(json!({
                    "relation": [r.a, r.b, r.ell],
                    "beta": beta,
                    "curve": curve_display(&c),
                    "bidegree": [c.m, c.n],
                    "coeffs": c.coeffs,
                    "fit_residual": c.fit_residual,
                    "invariance_residual": inv.residual,
                    "possibly_reducible": c.reducible.is_none(),
                }));
            }
        }
    }
    let report = json!({
        "lambda1": lambda1,
        "lambda2": lambda2,
        "relations": rel_out,
        "curves": curves,
    });
    ledger.write_json(&out_path(cfg)?, &report)?;
    ledger.say(format!("{} relations, {} curves", relations.len(), curves.len()));
    Ok(())
}

fn load_zeros(spec: &ZerosSpec, ledger: &mut Ledger) -> Result<(Vec<Cx>, Option<f64>)> {
    let parse_list = |key: &str, items: &[toml::Value]| -> Result<Vec<Cx>> {
        items.iter().map(|v| parse_complex(key, v)).collect()
    };
    match spec {
        ZerosSpec::Inline(items) => Ok((parse_list("zeros", items)?, None)),
        ZerosSpec::File(path) => {
            let bytes = ledger.read(path)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
            let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            for key in table.keys() {
                if key != "zeros" && key != "rotation" {
                    return Err(Error::Config(format!("{}: unknown key `{key}`", path.display())));
                }
            }
            let items = table
                .get("zeros")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Config(format!("{}: key `zeros` must be an array", path.display())))?;
            let rotation = match table.get("rotation") {
                None => None,
                Some(v) => Some(
                    v.as_float()
                        .or_else(|| v.as_integer().map(|i| i as f64))
                        .ok_or_else(|| Error::Config(format!("{}: key `rotation` must be a number", path.display())))?,
                ),
            };
            let zeros = parse_list("zeros", items).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?;
            Ok((zeros, rotation))
        }
    }
}

/// Exponent tolerance of the rigidity verdict.
const VERDICT_TOL: f64 = 1e-9;

fn blaschke(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let (zeros, file_rotation) = load_zeros(cfg.zeros.as_ref().unwrap(), ledger)?;
    let b = BlaschkeProduct::new(zeros, cfg.rotation.or(file_rotation).unwrap_or(0.0))?;
    let s = lyapunov_spectrum(&b, required(&cfg.n_max, "n_max")?)?;
    let out = out_path(cfg)?;
    ledger.write(&out, |w| s.write_csv(w))?;
    let interval = spectrum_interval_check(&s, 64)?;
    let verdict = if s.n_max >= crate::circle::MIN_VERDICT_PERIOD {
        Some(rigidity_verdict(&s, VERDICT_TOL)?)
    } else {
        None
    };
    let report = json!({
        "seed": cfg.seed,
        "degree": b.degree,
        "min_derivative": b.min_derivative,
        "cycles": s.cycle_count(),
        "interval": interval,
        "rigidity": verdict,
        "dimension_estimate": dimension_estimate(&s),
    });
    ledger.write_json(&sibling(&out, ".json"), &report)?;
    ledger.say(format!(
        "exponents in [{:.9}, {:.9}], largest gap {:.6}",
        interval.min, interval.max, interval.largest_gap
    ));
    if let Some(v) = verdict {
        ledger.say(format!("verdict: {}", workflow_value(&v.verdict)));
    }
    Ok(())
}

fn workflow_value<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn tce(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
    let est = shrink_rate_estimate(
        &f,
        required(&cfg.point, "point")?,
        required(&cfg.radius, "radius")?,
        required(&cfg.n_max, "n_max")?,
        cfg.branches.unwrap_or(64),
        cfg.seed,
    )?;
    ledger.write_json(&out_path(cfg)?, &est)?;
    match est.fitted_rate {
        Some(r) => ledger.say(format!("shrink rate {r:.6}")),
        None => ledger.say("shrink rate undetermined".into()),
    }
    Ok(())
}

/// Points file: one `re,im` pair per line; blank lines, `#` comments and a header are skipped.
fn load_points(path: &Path, ledger: &mut Ledger) -> Result<Vec<Cx>> {
    let bytes = ledger.read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (fields.len() >= 2)
            .then(|| fields[0].parse::<f64>().ok().zip(fields[1].parse::<f64>().ok()))
            .flatten();
        match parsed {
            Some((re, im)) => out.push(Cx::new(re, im)),
            None if k == 0 => continue,
            None => return Err(Error::Config(format!("{}: line {}: expected `re,im`", path.display(), k + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no points", path.display())));
    }
    Ok(out)
}

fn ballscale(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let mu = load_measure(cfg.measure.as_ref().unwrap(), ledger)?;
    let points = load_points(cfg.points.as_ref().unwrap(), ledger)?;
    let radii = geometric_radii(
        cfg.r_min.unwrap_or(1e-3),
        cfg.r_max.unwrap_or(1e-1),
        cfg.n_radii.unwrap_or(9),
    );
    let report = measure_ball_scaling(&mu, &points, &radii)?;
    let out = out_path(cfg)?;
    ledger.write(&out, |w| {
        writeln!(w, "re,im,exponent,used_radii,flagged")?;
        for p in &report.per_point {
            let e = p.exponent.map(|e| format!("{e:e}")).unwrap_or_default();
            writeln!(w, "{:e},{:e},{},{},{}", p.x.re, p.x.im, e, p.used_radii, p.flagged)?;
        }
        Ok(())
    })?;
    ledger.write_json(&sibling(&out, ".json"), &json!({ "seed": mu.seed, "report": report }))?;
    match report.theta_hat {
        Some(t) => ledger.say(format!("theta_hat = {t:.6}")),
        None => ledger.say("theta_hat undetermined".into()),
    }
    Ok(())
}

fn render(cfg: &RunConfig, ledger: &mut Ledger) -> Result<()> {
    let window = window_of(cfg, Window::centered(2.0))?;
    let (w, h) = (cfg.width.unwrap_or(512), cfg.height.unwrap_or(512));
    let image = match cfg.mode.unwrap_or(RenderMode::EscapeTime) {
        RenderMode::EscapeTime => {
            let f = load_map(cfg.map.as_ref().unwrap(), "map", ledger)?;
            render_escape_time(&f, &window, w, h)?
        }
        RenderMode::MeasureDensity => {
            let mu = match (&cfg.measure, &cfg.map) {
                (Some(path), _) => load_measure(path, ledger)?,
                (None, Some(spec)) => {
                    let f = load_map(spec, "map", ledger)?;
                    let start = SpherePoint::finite(cfg.point.unwrap_or(MMEM_START));
                    sample_mmem(&f, cfg.n_points.unwrap_or(100_000), cfg.depth.unwrap_or(MIN_DEPTH), &start, cfg.seed)?
                }
                (None, None) => return Err(Error::Config("missing key `map` or `measure`".into())),
            };
            render_measure_density(&mu, &window, w, h)?
        }
    };
    ledger.write(&out_path(cfg)?, |out| image.write_ppm(out))?;
    ledger.say(format!("{w}x{h} image"));
    Ok(())
}
