//! Command-line driver: `verify`, `flow`, `report`, `scan`, `consistency`.
//!
//! Every command writes one JSON document (to `--out` or stdout) and
//! optionally CSV files. Floats are written with 17 significant digits.
//! Exit status: 0 all assertions pass, 1 assertion failure, 2 usage error,
//! 3 numerical error; errors also print a JSON record on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bochner::{pinching_bound, BochnerData, ErrorModel, Richardson};
use crate::error::{Error, Result};
use crate::flow::{run_flow, FlowParams, TimeStep};
use crate::geometry::{DomainKind, DomainModel, SecMaxOptions, TargetModel};
use crate::maps::{io, AnalyticMap, DiscreteMap};
use crate::rigidity::{
    build_report, consistency_table, default_catalog, equality_diagnostics, Classification, ReportOptions,
    DEFAULT_TOL_C, GLOBAL_SAMPLE,
};

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Flow,
    Report,
    Scan,
    Consistency,
}

#[derive(Debug, Parser)]
#[command(name = "brl", version, about = "Harmonic map rigidity laboratory")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

/// Flags and config-file keys; every field is optional so the two can be merged.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct Flags {
    /// Domain descriptor, e.g. `sphere:r=1` or `torus:a=1,b=1`.
    #[arg(long)]
    domain: Option<String>,
    /// Target descriptor, e.g. `sphere:r=2`, `ellipsoid:a=1,b=1,c=2`.
    #[arg(long)]
    target: Option<String>,
    /// Catalog map, e.g. `identity`, `scaling:r=2`, `holomorphic:k=2`, `cap:amplitude=0.3`.
    #[arg(long, alias = "init")]
    map: Option<String>,
    /// Saved map to load instead of a catalog map.
    #[arg(long)]
    load: Option<PathBuf>,
    /// `N` (sphere: N×2N, torus: N×N) or `N1xN2`.
    #[arg(long)]
    resolution: Option<String>,
    /// Number of grids for refinement studies, each twice as fine as the last.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `C` in tol(h) = C·h².
    #[arg(long)]
    tol_c: Option<f64>,
    /// Size of the global target sample for curvature comparisons.
    #[arg(long)]
    global_sample: Option<usize>,
    /// Flow time step: `auto` or a positive number.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// Flow convergence tolerance on sup|τ|.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    collapse_tol: Option<f64>,
    /// Flow trace stride.
    #[arg(long)]
    stride: Option<usize>,
    /// Sweep `key=lo:hi:step` over a map parameter.
    #[arg(long)]
    param: Option<String>,
    /// Run the cap(0.3) heat flow and add its output to the consistency scan.
    #[arg(long)]
    #[serde(default)]
    with_flow: bool,
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with any of the above keys; command-line flags win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

impl Flags {
    fn merged_over(self, base: Flags) -> Flags {
        Flags {
            domain: self.domain.or(base.domain),
            target: self.target.or(base.target),
            map: self.map.or(base.map),
            load: self.load.or(base.load),
            resolution: self.resolution.or(base.resolution),
            levels: self.levels.or(base.levels),
            seed: self.seed.or(base.seed),
            tol_c: self.tol_c.or(base.tol_c),
            global_sample: self.global_sample.or(base.global_sample),
            dt: self.dt.or(base.dt),
            steps: self.steps.or(base.steps),
            tol: self.tol.or(base.tol),
            collapse_tol: self.collapse_tol.or(base.collapse_tol),
            stride: self.stride.or(base.stride),
            param: self.param.or(base.param),
            with_flow: self.with_flow || base.with_flow,
            save: self.save.or(base.save),
            trace: self.trace.or(base.trace),
            csv: self.csv.or(base.csv),
            out: self.out.or(base.out),
            config: None,
        }
    }
}

/// Grid size request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Resolution {
    /// Latitude rows; the other axis follows the domain convention.
    Rows(usize),
    Grid(usize, usize),
}

impl Resolution {
    pub fn parse(text: &str) -> Result<Self> {
        let num = |s: &str, pos: usize| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse { position: pos, message: format!("`{s}` is not a grid size") })
        };
        let r = match text.split_once(['x', 'X']) {
            Some((a, b)) => Resolution::Grid(num(a, 0)?, num(b, a.len() + 1)?),
            None => Resolution::Rows(num(text, 0)?),
        };
        let (a, b) = match r {
            Resolution::Rows(a) => (a, a),
            Resolution::Grid(a, b) => (a, b),
        };
        if a < MIN_RESOLUTION || b < MIN_RESOLUTION {
            return Err(Error::Usage(format!("resolution must be at least {MIN_RESOLUTION} per axis, got `{text}`")));
        }
        Ok(r)
    }

    /// Concrete grid for a domain kind.
    pub fn grid(&self, kind: &DomainKind) -> (usize, usize) {
        match (*self, kind) {
            (Resolution::Grid(a, b), _) => (a, b),
            (Resolution::Rows(a), DomainKind::RoundSphere2 { .. }) => (a, 2 * a),
            (Resolution::Rows(a), DomainKind::FlatTorus2 { .. }) => (a, a),
        }
    }
}

/// A parameter sweep `key=lo:hi:step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(text: &str) -> Result<Self> {
        let (key, range) = text
            .split_once('=')
            .ok_or_else(|| Error::Parse { position: 0, message: format!("expected key=lo:hi:step, got `{text}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { position: 0, message: "empty sweep key".into() });
        }
        let mut pos = key.len() + 1;
        let mut parts = Vec::new();
        for p in range.split(':') {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse { position: pos, message: format!("`{p}` is not a number") })?;
            parts.push(v);
            pos += p.len() + 1;
        }
        let [lo, hi, step] = parts[..] else {
            return Err(Error::Parse { position: key.len() + 1, message: "expected lo:hi:step".into() });
        };
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Usage(format!("sweep needs lo ≤ hi and step > 0, got {lo}:{hi}:{step}")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let values = (0..count).map(|i| lo + i as f64 * step).collect();
        Ok(Self { key: key.to_string(), values })
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub domain: Option<String>,
    pub target: Option<String>,
    pub map: Option<String>,
    pub load: Option<PathBuf>,
    pub resolution: Resolution,
    pub levels: usize,
    pub seed: u64,
    pub tol_c: f64,
    pub global_sample: usize,
    pub dt: TimeStep,
    pub steps: usize,
    pub tol: f64,
    pub collapse_tol: f64,
    pub stride: usize,
    pub sweep: Option<Sweep>,
    pub with_flow: bool,
    pub save: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

/// Parses argv (including the program name) and an optional `--config` file.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string().trim_end().to_string()))?;
    resolve(cli)
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let file = match &cli.flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<Flags>(&text).map_err(|e| Error::Parse {
                position: e.column(),
                message: format!("config line {}: {e}", e.line()),
            })?
        }
        None => Flags::default(),
    };
    let f = cli.flags.merged_over(file);
    if f.map.is_some() && f.load.is_some() {
        return Err(usage("--map and --load are mutually exclusive"));
    }
    if f.load.is_some() && (f.domain.is_some() || f.target.is_some()) {
        return Err(usage("a loaded map carries its own domain and target"));
    }
    let resolution = Resolution::parse(f.resolution.as_deref().unwrap_or("64"))?;
    let dt = match f.dt.as_deref() {
        None | Some("auto") => TimeStep::Auto,
        Some(v) => TimeStep::Fixed(
            v.parse()
                .ok()
                .filter(|x: &f64| *x > 0.0 && x.is_finite())
                .ok_or_else(|| usage(format!("--dt must be `auto` or a positive number, got `{v}`")))?,
        ),
    };
    let levels = f.levels.unwrap_or(2);
    if levels == 0 {
        return Err(usage("--levels must be at least 1"));
    }
    let tol_c = f.tol_c.unwrap_or(DEFAULT_TOL_C);
    if !(tol_c > 0.0) {
        return Err(usage("--tol-c must be positive"));
    }
    let defaults = FlowParams::default();
    let config = RunConfig {
        command: cli.command,
        domain: f.domain,
        target: f.target,
        map: f.map,
        load: f.load,
        resolution,
        levels,
        seed: f.seed.unwrap_or(SecMaxOptions::default().seed),
        tol_c,
        global_sample: f.global_sample.unwrap_or(GLOBAL_SAMPLE),
        dt,
        steps: f.steps.unwrap_or(defaults.max_steps),
        tol: f.tol.unwrap_or(defaults.tol),
        collapse_tol: f.collapse_tol.unwrap_or(defaults.collapse_tol),
        stride: f.stride.unwrap_or(defaults.stride),
        sweep: f.param.as_deref().map(Sweep::parse).transpose()?,
        with_flow: f.with_flow,
        save: f.save,
        trace: f.trace,
        csv: f.csv,
        out: f.out,
    };
    flow_params(&config).validate()?;
    if config.command == Command::Scan && config.sweep.is_none() {
        return Err(usage("scan needs --param key=lo:hi:step"));
    }
    Ok(config)
}

impl RunConfig {
    fn report_options(&self) -> ReportOptions {
        ReportOptions {
            error_model: ErrorModel::new(self.tol_c),
            sec: SecMaxOptions { seed: self.seed, ..SecMaxOptions::default() },
            global_sample: self.global_sample,
        }
    }
}

fn flow_params(c: &RunConfig) -> FlowParams {
    FlowParams { dt: c.dt, max_steps: c.steps, tol: c.tol, collapse_tol: c.collapse_tol, stride: c.stride }
}

/// A map request resolved against the catalog or a file.
struct MapSource {
    name: String,
    analytic: Option<AnalyticMap>,
    domain: DomainModel,
    target: TargetModel,
    loaded: Option<DiscreteMap>,
}

impl MapSource {
    fn from_config(c: &RunConfig, map_text: Option<&str>) -> Result<Self> {
        if let Some(path) = &c.load {
            let f = io::load(path)?;
            return Ok(Self {
                name: path.display().to_string(),
                analytic: None,
                domain: f.domain().clone(),
                target: f.target().clone(),
                loaded: Some(f),
            });
        }
        let text = map_text.or(c.map.as_deref()).ok_or_else(|| usage("need --map or --load"))?;
        let map = AnalyticMap::parse(text)?;
        let domain_text = c.domain.clone().unwrap_or_else(|| map.default_domain());
        let target_text = c.target.clone().unwrap_or_else(|| map.default_target());
        let probe = DomainModel::parse(&domain_text, 8, 8)?;
        let (n1, n2) = c.resolution.grid(&probe.kind);
        let domain = DomainModel::parse(&domain_text, n1, n2)?;
        let target = TargetModel::parse(&target_text)?;
        map.check_compatible(&domain, &target)?;
        Ok(Self { name: map.name(), analytic: Some(map), domain, target, loaded: None })
    }

    fn at_level(&self, level: usize) -> Result<DiscreteMap> {
        match (&self.loaded, &self.analytic) {
            (Some(f), _) if level == 0 => Ok(f.clone()),
            (Some(_), _) => Err(usage("a loaded map has a single resolution; use --levels 1")),
            (None, Some(m)) => {
                let (n1, n2) = self.domain.shape();
                m.sample(&self.domain.with_resolution(n1 << level, n2 << level)?, &self.target)
            }
            (None, None) => unreachable!(),
        }
    }
}

/// JSON with every float written as `%.16e` (17 significant digits).
struct FixedFloat;

impl serde_json::ser::Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LevelSummary {
    resolution: [usize; 2],
    h: f64,
    sup_residual: f64,
    sup_tension: f64,
    sup_hess: f64,
    integral_identity: f64,
    integral_identity_over_volume: f64,
    energy: f64,
}

fn verify(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let src = MapSource::from_config(c, None)?;
    let mut levels = Vec::new();
    let mut finest = None;
    for l in 0..c.levels {
        let f = src.at_level(l)?;
        let b = BochnerData::compute(&f)?;
        let d = f.domain();
        let (n1, n2) = d.shape();
        levels.push(LevelSummary {
            resolution: [n1, n2],
            h: d.h(),
            sup_residual: b.sup_residual(),
            sup_tension: b.sup_tension(),
            sup_hess: b.sup_hess(),
            integral_identity: b.integral_identity(),
            integral_identity_over_volume: b.integral_identity() / d.volume(),
            energy: b.energy(),
        });
        finest = Some((f, b));
    }
    let (f, b) = finest.expect("at least one level");
    let report = build_report(&f, &c.report_options())?;
    let ratios: Vec<f64> = levels.windows(2).map(|w| w[0].sup_residual / w[1].sup_residual).collect();
    let richardson = (c.levels >= 3)
        .then(|| Richardson::from_levels(levels.iter().map(|l| (l.resolution[0], l.integral_identity)).collect()));

    // assertions apply to numerically harmonic maps
    let mut assertions = serde_json::Map::new();
    if report.constant {
        let ok = levels.iter().all(|l| l.sup_residual == 0.0);
        assertions.insert("constant_residual_zero".into(), Value::Bool(ok));
    } else if report.harmonic && !ratios.is_empty() {
        let ok = ratios.iter().all(|r| (3.0..=5.0).contains(r));
        assertions.insert("residual_ratio_in_3_5".into(), Value::Bool(ok));
    }
    let passed = assertions.values().all(|v| v == &Value::Bool(true));

    if let Some(path) = &c.csv {
        let d = f.domain();
        let slack_ok = report.sec_max_image >= 0.0;
        let rows = b.nodes.iter().map(|nd| {
            let (bound, _) = pinching_bound(d.dim(), 2.0 * nd.e, report.ric_min, report.sec_max_image);
            let mut r = vec![nd.i.to_string(), nd.j.to_string(), fmt_f64(nd.e)];
            r.extend(nd.lambdas.iter().map(|l| fmt_f64(*l)));
            r.extend([nd.ricci_term, nd.target_term, nd.q, nd.hess, nd.lap, nd.residual].map(fmt_f64));
            r.push(if slack_ok { fmt_f64(nd.q - bound) } else { String::new() });
            r.push(u8::from(nd.flagged).to_string());
            r
        });
        let header = [
            "i", "j", "e", "lambda1", "lambda2", "ricci_term", "target_term", "q", "hess", "lap", "residual", "slack",
            "flagged",
        ];
        write_csv(path, &header, rows)?;
    }

    let doc = serde_json::json!({
        "command": "verify",
        "map": src.name,
        "domain": f.domain().descriptor(),
        "target": f.target().descriptor(),
        "seed": c.seed,
        "tol_c": c.tol_c,
        "levels": levels,
        "residual_ratios": ratios,
        "integral_identity_richardson": richardson,
        "harmonic": report.harmonic,
        "sup_tension": report.sup_tension,
        "harmonic_tol": report.harmonic_tol,
        "assertions": assertions,
        "passed": passed,
    });
    write_output(c.out.as_deref(), &to_json(&doc)?, out)?;
    Ok(passed)
}

fn flow(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let src = MapSource::from_config(c, None)?;
    let f0 = src.at_level(0)?;
    let (f, summary) = run_flow(&f0, &flow_params(c))?;
    let monotone = summary.max_energy_increase() <= crate::flow::ENERGY_SLACK;
    if let Some(path) = &c.save {
        io::save(&f, path)?;
    }
    if let Some(path) = &c.trace {
        let rows = summary.trace.iter().map(|r| {
            vec![r.step.to_string(), fmt_f64(r.energy), fmt_f64(r.sup_tension), fmt_f64(r.image_diameter), fmt_f64(r.e_max)]
        });
        write_csv(path, &["step", "energy", "sup_tension", "image_diameter", "e_max"], rows)?;
    }
    let doc = serde_json::json!({
        "command": "flow",
        "init": src.name,
        "domain": f.domain().descriptor(),
        "target": f.target().descriptor(),
        "resolution": f.domain().shape(),
        "params": flow_params(c),
        "outcome": summary.outcome,
        "steps": summary.steps,
        "dt": summary.dt,
        "rejections": summary.rejections,
        "initial_energy": summary.energy_trace.first(),
        "final_energy": summary.energy_trace.last(),
        "final_sup_tension": summary.final_sup_tension,
        "final_diameter": summary.final_diameter,
        "max_energy_increase": summary.max_energy_increase(),
        "energy_monotone": monotone,
        "passed": monotone,
    });
    write_output(c.out.as_deref(), &to_json(&doc)?, out)?;
    Ok(monotone)
}

fn report(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let src = MapSource::from_config(c, None)?;
    let f = src.at_level(0)?;
    let r = build_report(&f, &c.report_options())?;
    let diagnostics = if r.classification == Classification::Equality { Some(equality_diagnostics(&r)?) } else { None };
    let passed = diagnostics.as_ref().map(|d| d.passed).unwrap_or(true);
    let doc = serde_json::json!({
        "command": "report",
        "map": src.name,
        "report": r,
        "equality_diagnostics": diagnostics,
        "localization_gap": r.sec_max_global_sample - r.sec_max_image,
        "passed": passed,
    });
    write_output(c.out.as_deref(), &to_json(&doc)?, out)?;
    Ok(passed)
}

fn scan(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let sweep = c.sweep.as_ref().expect("validated in resolve");
    let base = c.map.as_deref().ok_or_else(|| usage("scan needs --map"))?;
    let mut rows = Vec::new();
    for &v in &sweep.values {
        let mut desc = crate::geometry::Descriptor::parse(base)?;
        desc.set(&sweep.key, v);
        let text = desc.to_string();
        let src = MapSource::from_config(c, Some(&text))?;
        let f = src.at_level(0)?;
        let r = build_report(&f, &c.report_options())?;
        rows.push(serde_json::json!({
            "value": v,
            "map": src.name,
            "classification": r.classification,
            "margin": r.margin,
            "tol": r.tol,
            "s0": r.s0,
            "ric_min": r.ric_min,
            "sec_max_image": r.sec_max_image,
            "lambda_spread": r.equality.lambda_spread,
            "hess_sup": r.equality.hess_sup,
            "homothety_factor": r.equality.homothety_factor,
            "harmonic": r.harmonic,
            "prediction": r.prediction,
        }));
    }
    if let Some(path) = &c.csv {
        let num = |row: &Value, k: &str| row[k].as_f64().map(fmt_f64).unwrap_or_default();
        let csv_rows = rows.iter().map(|row| {
            vec![
                num(row, "value"),
                row["map"].as_str().unwrap_or_default().to_string(),
                row["classification"].as_str().unwrap_or_default().to_string(),
                num(row, "margin"),
                num(row, "tol"),
                num(row, "s0"),
                num(row, "ric_min"),
                num(row, "sec_max_image"),
                num(row, "lambda_spread"),
                num(row, "hess_sup"),
                num(row, "homothety_factor"),
                row["harmonic"].to_string(),
            ]
        });
        let header = [
            sweep.key.as_str(), "map", "classification", "margin", "tol", "s0", "ric_min", "sec_max_image",
            "lambda_spread", "hess_sup", "homothety_factor", "harmonic",
        ];
        write_csv(path, &header, csv_rows)?;
    }
    let doc = serde_json::json!({ "command": "scan", "key": sweep.key, "seed": c.seed, "rows": rows, "passed": true });
    write_output(c.out.as_deref(), &to_json(&doc)?, out)?;
    Ok(true)
}

fn consistency(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let rows_n1 = match c.resolution {
        Resolution::Rows(n) | Resolution::Grid(n, _) => n,
    };
    let mut maps = default_catalog(rows_n1)?;
    if c.with_flow {
        let d = DomainModel::flat_torus(1.0, 1.0, 64, 64)?;
        let f0 = AnalyticMap::Cap { amplitude: 0.3 }.sample(&d, &TargetModel::sphere(1.0)?)?;
        let (f, _) = run_flow(&f0, &flow_params(c))?;
        maps.push(("flow(cap(0.3))".into(), f));
    }
    let table = consistency_table(&maps, &c.report_options())?;
    let doc = serde_json::json!({ "command": "consistency", "seed": c.seed, "rows": table.rows, "passed": table.passed() });
    write_output(c.out.as_deref(), &to_json(&doc)?, out)?;
    table.check()?;
    Ok(true)
}

/// Runs a parsed configuration; `Ok(false)` means an assertion failed.
pub fn run(c: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    match c.command {
        Command::Verify => verify(c, out),
        Command::Flow => flow(c, out),
        Command::Report => report(c, out),
        Command::Scan => scan(c, out),
        Command::Consistency => consistency(c, out),
    }
}

/// Machine-readable error record printed on stderr.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

fn configure_threads() {
    if let Some(n) = std::env::var("BRL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        // a second initialization in the same process is harmless to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = write!(std::io::stdout(), "{e}");
            return 0;
        }
        Err(e) => {
            let err = usage(e.to_string().trim_end().to_string());
            eprintln!("{}", error_record(&err));
            return err.exit_code();
        }
    };
    let result = resolve(cli).and_then(|c| run(&c, &mut std::io::stdout()));
    match result {
        Ok(true) => 0,
        Ok(false) => {
            let err = Error::Assertion("one or more assertions failed; see the JSON summary".into());
            eprintln!("{}", error_record(&err));
            err.exit_code()
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        parse_config(std::iter::once("brl").chain(args.iter().copied()))
    }

    #[test]
    fn verify_config() {
        let c = parse(&["verify", "--domain", "sphere:r=1", "--target", "sphere:r=1", "--map", "identity", "--resolution", "64"])
            .unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!(c.resolution, Resolution::Rows(64));
        assert_eq!(c.map.as_deref(), Some("identity"));
    }

    #[test]
    fn sweep_has_seven_points() {
        let c = parse(&["scan", "--param", "r=0.5:2.0:0.25", "--map", "scaling"]).unwrap();
        let s = c.sweep.unwrap();
        assert_eq!(s.key, "r");
        assert_eq!(s.values, vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse(&["verify", "--resolution", "4"]), Err(Error::Usage(_))));
        assert!(matches!(parse(&["verify", "--resolution", "64x4"]), Err(Error::Usage(_))));
        assert!(matches!(parse(&["verify", "--resolution", "6a"]), Err(Error::Parse { .. })));
        assert!(matches!(parse(&["verify", "--map", "identity", "--load", "x.map"]), Err(Error::Usage(_))));
        assert!(matches!(parse(&["flow", "--dt", "-1"]), Err(Error::Usage(_))));
        assert!(matches!(parse(&["scan", "--map", "scaling"]), Err(Error::Usage(_))));
        assert!(matches!(parse(&["bogus"]), Err(Error::Usage(_))));
        match Sweep::parse("r=0.5:x:0.25") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolution_grids() {
        let s = DomainKind::RoundSphere2 { r: 1.0 };
        let t = DomainKind::FlatTorus2 { a: 1.0, b: 1.0 };
        assert_eq!(Resolution::parse("32").unwrap().grid(&s), (32, 64));
        assert_eq!(Resolution::parse("32").unwrap().grid(&t), (32, 32));
        assert_eq!(Resolution::parse("16x40").unwrap().grid(&s), (16, 40));
    }

    #[test]
    fn config_file_is_merged_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"map": "holomorphic:k=2", "resolution": "16", "seed": 9}"#).unwrap();
        let p = path.to_str().unwrap();
        let c = parse(&["report", "--config", p, "--seed", "3"]).unwrap();
        assert_eq!((c.map.as_deref(), c.resolution, c.seed), (Some("holomorphic:k=2"), Resolution::Rows(16), 3));
        fs::write(&path, r#"{"map": "identity", "colour": 1}"#).unwrap();
        assert!(matches!(parse(&["report", "--config", p]), Err(Error::Parse { .. })));
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        assert_eq!(to_json(&serde_json::json!({"x": 0.1})).unwrap(), r#"{"x":1.0000000000000001e-1}"#);
        let v: Value = serde_json::from_str(&to_json(&serde_json::json!([1.5, 2.0])).unwrap()).unwrap();
        assert_eq!(v, serde_json::json!([1.5, 2.0]));
    }

    #[test]
    fn verify_identity_two_levels() {
        let c = parse(&["verify", "--map", "identity", "--resolution", "16", "--global-sample", "64"]).unwrap();
        let mut buf = Vec::new();
        assert!(run(&c, &mut buf).unwrap());
        let v: Value = serde_json::from_slice(&buf).unwrap();
        let r = v["residual_ratios"][0].as_f64().unwrap();
        assert!((3.0..=5.0).contains(&r), "{r}");
    }

    #[test]
    fn outputs_are_reproducible() {
        let c = parse(&["report", "--map", "holomorphic:k=2", "--resolution", "16", "--global-sample", "64"]).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        run(&c, &mut a).unwrap();
        run(&c, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_records_are_json() {
        let e = Error::Usage("x".into());
        let v: Value = serde_json::from_str(&error_record(&e)).unwrap();
        assert_eq!(v["exit_code"], 2);
        assert_eq!(v["error"], "usage");
    }
}
