//! Batch front end.
//!
//! Every subcommand resolves its inputs from flags, then an optional JSON
//! file, then defaults; evaluates the requested points on a bounded worker
//! pool; and writes one CSV whose `# key=value` header records everything
//! needed to reproduce it. Rows come out in axis order regardless of the
//! number of workers.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::analysis::{
    diffract, efficiency, losses, optimal_pulse_area, populations, preparation, resonance_width, transition_scan, IntervalSet, Numerics,
    DENSITY_GRID_POINTS, WIDTH_GRID_POINTS,
};
use crate::error::{Error, Result};
use crate::interferometer::{signal, MIN_PHASE_SAMPLES};
use crate::physics::{
    DiffractionConfig, Geometry, InternalState, Mechanism, MomentumGrid, PulseKind, PulseShape, TruncationOrder, UnitSystem,
};
use crate::solver::SolverSettings;
use crate::transition::{cache, ColumnInput};

const MAX_SWEPT_AXES: usize = 2;
const DEFAULT_PHASE_SAMPLES: usize = 65;

#[derive(Parser, Debug)]
#[command(name = "matterwave", version, about = "Light-pulse diffraction of atomic wave packets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transition-function elements G(p_f, p_i) of one pulse.
    Transition {
        #[command(flatten)]
        common: Common,
        /// Input cells as state:order pairs, e.g. `g:0,e:1`.
        #[arg(long)]
        inputs: Option<String>,
        /// Also store the transition function in MWTF1 format.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Momentum density before and after a pulse.
    Diffract(Common),
    /// Resonance width of the mirror transfer.
    Width {
        #[command(flatten)]
        common: Common,
        /// Width of the main peak only instead of spanning all peaks.
        #[arg(long)]
        single_peak: bool,
    },
    /// Probability in the target interval after a pulse.
    Efficiency {
        #[command(flatten)]
        common: Common,
        /// Target intervals as lo:hi pairs in ħK, e.g. `0.5:1.5`.
        #[arg(long)]
        target: Option<String>,
    },
    /// Population lost from the intended output orders.
    Losses {
        #[command(flatten)]
        common: Common,
        /// Pulse role: `bs` (π/2) or `m` (π).
        #[arg(long, default_value = "m")]
        kind: String,
    },
    /// Populations at −ħK, 0, +ħK and elsewhere after a double mirror.
    Populations(Common),
    /// Pulse area maximising the |p₀⟩ → |p₀+ħK⟩ transfer.
    OptimalArea(Common),
    /// Efficiency map over (p₀, Δ℘) with the optimal area per p₀.
    TransitionScan(Common),
    /// Interference signal of a beam splitter, mirror, beam splitter sequence.
    Interferometer(SignalArgs),
    /// Interferometer amplitude over (Δ℘, Δτ).
    AmplitudeMap(SignalArgs),
    /// Interferometer contrast over (Δ℘, Δτ).
    ContrastMap(SignalArgs),
}

#[derive(Args, Debug)]
struct SignalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_PHASE_SAMPLES)]
    phase_samples: usize,
}

/// Flags shared by every subcommand. Values stay textual until they are
/// merged with the config file so both sources share one parser.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON file with default values; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `raman` or `bragg`.
    #[arg(long)]
    mechanism: Option<String>,
    /// `single` or `double`.
    #[arg(long)]
    geometry: Option<String>,
    /// `gaussian` or `box`.
    #[arg(long)]
    shape: Option<String>,
    /// Pulse duration; `us` suffix for microseconds, otherwise 1/ω_K.
    /// Sweeps are written `start..stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    delta_tau: Option<String>,
    /// Pulse area in radians; accepts `pi`, `0.5pi`, `pi/2`.
    #[arg(long, allow_hyphen_values = true)]
    area: Option<String>,
    /// Mean momentum in ħK.
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<String>,
    /// Momentum width of the Gaussian packet in ħK.
    #[arg(long, allow_hyphen_values = true)]
    delta_p: Option<String>,
    /// Two-photon detuning in ω_K; resonant at p₀ when omitted.
    #[arg(long, allow_hyphen_values = true)]
    detuning: Option<String>,
    /// `auto` or a fixed largest order.
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    abs_tol: Option<String>,
    /// Quasi-momentum samples per ħK.
    #[arg(long)]
    grid_points: Option<String>,
    /// Half-width of the integration window in units of Δτ.
    #[arg(long)]
    window_factor: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Transition-function cache; falls back to MATTERWAVE_CACHE_DIR.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

const FILE_KEYS: [&str; 13] = [
    "mechanism",
    "geometry",
    "shape",
    "delta_tau",
    "area",
    "p0",
    "delta_p",
    "detuning",
    "n_max",
    "rel_tol",
    "abs_tol",
    "grid_points",
    "window_factor",
];

/// Parses `argv` (without the program name), runs and returns the exit code.
pub fn run(args: &[String]) -> i32 {
    let argv = std::iter::once("matterwave".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Quantity {
    Time,
    Momentum,
    Angle,
}

/// One input axis: a scalar or an inclusive linear sweep.
#[derive(Clone, Debug)]
struct Axis {
    key: &'static str,
    text: String,
    values: Vec<f64>,
    /// Microsecond values for time axes.
    micros: Option<Vec<f64>>,
}

impl Axis {
    fn scalar(key: &'static str, value: f64) -> Self {
        Axis {
            key,
            text: value.to_string(),
            values: vec![value],
            micros: None,
        }
    }

    fn swept(&self) -> bool {
        self.values.len() > 1
    }

    fn single(&self) -> Result<f64> {
        if self.swept() {
            return Err(Error::config(self.key, "must be a single value for this command"));
        }
        Ok(self.values[0])
    }

    fn columns(&self) -> Vec<String> {
        match self.micros {
            Some(_) => vec![format!("{}_us", self.key), format!("{}_dimless", self.key)],
            None => vec![format!("{}_{}", self.key, if self.key == "area" { "rad" } else { "hbark" })],
        }
    }

    fn cells(&self, i: usize) -> Vec<String> {
        match &self.micros {
            Some(us) => vec![us[i].to_string(), self.values[i].to_string()],
            None => vec![self.values[i].to_string()],
        }
    }
}

fn parse_number(key: &str, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::config(key, format!("`{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::config(key, format!("`{text}` is not finite")));
    }
    Ok(v)
}

fn parse_angle(key: &str, text: &str) -> Result<f64> {
    let t = text.trim();
    if let Some(div) = t.strip_prefix("pi/") {
        return Ok(PI / parse_number(key, div)?);
    }
    if let Some(mul) = t.strip_suffix("pi") {
        let mul = mul.trim_end_matches('*');
        return Ok(PI * if mul.is_empty() { 1.0 } else { parse_number(key, mul)? });
    }
    parse_number(key, t)
}

/// Returns the value and whether it carried the `us` suffix.
fn parse_time(key: &str, text: &str) -> Result<(f64, bool)> {
    let t = text.trim();
    match t.strip_suffix("us") {
        Some(v) => Ok((parse_number(key, v)?, true)),
        None => Ok((parse_number(key, t)?, false)),
    }
}

fn parse_axis(key: &'static str, text: &str, quantity: Quantity, units: &UnitSystem) -> Result<Axis> {
    let (range, count) = match text.split_once("..") {
        None => ((text, text), 1usize),
        Some((start, rest)) => {
            let (stop, n) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::config(key, format!("sweep `{text}` needs a count, e.g. `start..stop:10`")))?;
            let n: usize = n.trim().parse().map_err(|_| Error::config(key, format!("bad sweep count `{n}`")))?;
            if n < 2 {
                return Err(Error::config(key, format!("sweep `{text}` needs at least 2 points")));
            }
            ((start, stop), n)
        }
    };
    let linspace = |a: f64, b: f64| -> Vec<f64> {
        if count == 1 {
            return vec![a];
        }
        (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
    };
    let (values, micros) = match quantity {
        Quantity::Time => {
            let (a, a_us) = parse_time(key, range.0)?;
            let (b, b_us) = parse_time(key, range.1)?;
            if a_us != b_us {
                return Err(Error::config(key, "both sweep ends must use the same unit"));
            }
            let raw = linspace(a, b);
            if a_us {
                (raw.iter().map(|&us| units.micros_to_dimensionless(us)).collect(), Some(raw))
            } else {
                let us = raw.iter().map(|&t| units.dimensionless_to_micros(t)).collect();
                (raw, Some(us))
            }
        }
        Quantity::Momentum => {
            let strip = |s: &str| s.trim().trim_end_matches("hbark").to_string();
            (linspace(parse_number(key, &strip(range.0))?, parse_number(key, &strip(range.1))?), None)
        }
        Quantity::Angle => (linspace(parse_angle(key, range.0)?, parse_angle(key, range.1)?), None),
    };
    Ok(Axis {
        key,
        text: text.trim().to_string(),
        values,
        micros,
    })
}

/// Inputs after merging flags, file and defaults.
#[derive(Clone, Debug)]
struct Resolved {
    mechanism: Mechanism,
    geometry: Geometry,
    shape: PulseShape,
    delta_tau: Axis,
    area: Option<Axis>,
    p0: Axis,
    delta_p: Option<Axis>,
    detuning: Option<f64>,
    n_max: TruncationOrder,
    window_factor: f64,
    numerics: Numerics,
    units: UnitSystem,
    jobs: Option<usize>,
}

impl Resolved {
    fn config(&self, delta_tau: f64, area: f64, p0: f64) -> DiffractionConfig {
        let mut cfg = DiffractionConfig::resonant(self.mechanism, self.geometry, delta_tau, area).with_p0_resonant(p0);
        if let Some(d) = self.detuning {
            cfg.two_photon_detuning = d;
        }
        cfg.n_max = self.n_max;
        cfg.shape = self.shape;
        cfg.time_window_factor = self.window_factor;
        cfg
    }

    fn delta_p(&self) -> Result<&Axis> {
        self.delta_p.as_ref().ok_or_else(|| Error::config("delta_p", "required for this command"))
    }

    fn area(&self) -> Axis {
        self.area.clone().unwrap_or_else(|| Axis::scalar("area", PI))
    }
}

fn read_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(Error::config("config", "top level must be a JSON object"));
    };
    if let Some(key) = map.keys().find(|k| !FILE_KEYS.contains(&k.as_str())) {
        return Err(Error::config(key.clone(), "unknown key in config file"));
    }
    Ok(map)
}

fn resolve(common: &Common, default_grid_points: usize) -> Result<Resolved> {
    let file = match &common.config {
        Some(path) => read_file(path)?,
        None => Map::new(),
    };
    let lookup = |key: &str, flag: &Option<String>| -> Result<Option<String>> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match file.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(other) => Err(Error::config(key, format!("expected a string or number, got {other}"))),
        }
    };
    let required = |key: &str, flag: &Option<String>| lookup(key, flag)?.ok_or_else(|| Error::config(key, "required"));
    let units = UnitSystem::default();

    let mechanism = match required("mechanism", &common.mechanism)?.to_ascii_lowercase().as_str() {
        "raman" => Mechanism::Raman,
        "bragg" => Mechanism::Bragg,
        other => return Err(Error::config("mechanism", format!("expected `raman` or `bragg`, got `{other}`"))),
    };
    let geometry = match required("geometry", &common.geometry)?.to_ascii_lowercase().as_str() {
        "single" => Geometry::Single,
        "double" => Geometry::Double,
        other => return Err(Error::config("geometry", format!("expected `single` or `double`, got `{other}`"))),
    };
    let shape = match lookup("shape", &common.shape)?.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("gaussian") => PulseShape::Gaussian,
        Some("box") => PulseShape::Box,
        Some(other) => return Err(Error::config("shape", format!("expected `gaussian` or `box`, got `{other}`"))),
    };
    let delta_tau = parse_axis("delta_tau", &required("delta_tau", &common.delta_tau)?, Quantity::Time, &units)?;
    let area = lookup("area", &common.area)?.map(|t| parse_axis("area", &t, Quantity::Angle, &units)).transpose()?;
    let p0 = match lookup("p0", &common.p0)? {
        Some(t) => parse_axis("p0", &t, Quantity::Momentum, &units)?,
        None => Axis::scalar("p0", 0.0),
    };
    let delta_p = lookup("delta_p", &common.delta_p)?.map(|t| parse_axis("delta_p", &t, Quantity::Momentum, &units)).transpose()?;
    let detuning = lookup("detuning", &common.detuning)?.map(|t| parse_number("detuning", &t)).transpose()?;
    let n_max = match lookup("n_max", &common.n_max)? {
        None => TruncationOrder::Auto,
        Some(t) if t.eq_ignore_ascii_case("auto") => TruncationOrder::Auto,
        Some(t) => TruncationOrder::Fixed(t.trim().parse().map_err(|_| Error::config("n_max", format!("expected `auto` or an integer, got `{t}`")))?),
    };
    let mut settings = SolverSettings::default();
    if let Some(t) = lookup("rel_tol", &common.rel_tol)? {
        settings.rel_tol = parse_number("rel_tol", &t)?;
    }
    if let Some(t) = lookup("abs_tol", &common.abs_tol)? {
        settings.abs_tol = parse_number("abs_tol", &t)?;
    }
    settings.validate()?;
    let grid_points = match lookup("grid_points", &common.grid_points)? {
        None => default_grid_points,
        Some(t) => t.trim().parse().map_err(|_| Error::config("grid_points", format!("expected a positive integer, got `{t}`")))?,
    };
    MomentumGrid::new(grid_points).validate()?;
    let window_factor = match lookup("window_factor", &common.window_factor)? {
        None => 5.0,
        Some(t) => parse_number("window_factor", &t)?,
    };
    if common.jobs == Some(0) {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    let cache_dir = common.cache_dir.clone().or_else(cache::cache_dir_from_env);
    if let Some(dir) = &cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::config("cache_dir", format!("{}: {e}", dir.display())))?;
    }
    let resolved = Resolved {
        mechanism,
        geometry,
        shape,
        delta_tau,
        area,
        p0,
        delta_p,
        detuning,
        n_max,
        window_factor,
        numerics: Numerics {
            settings,
            grid_points,
            cache_dir,
        },
        units,
        jobs: common.jobs,
    };
    for dt in &resolved.delta_tau.values {
        resolved.config(*dt, PI, 0.0).validate()?;
    }
    Ok(resolved)
}

/// Result of one grid point.
struct PointRows {
    rows: Vec<Vec<String>>,
    n_max_used: usize,
    truncation_difference: f64,
}

impl PointRows {
    fn one(values: &[f64], n_max_used: usize, truncation_difference: f64) -> Self {
        PointRows {
            rows: vec![values.iter().map(f64::to_string).collect()],
            n_max_used,
            truncation_difference,
        }
    }
}

/// CSV assembled in memory so a failure never leaves a partial file.
struct Table {
    command: &'static str,
    extra_header: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    n_max_used: usize,
    truncation_difference: f64,
}

/// Evaluates `eval` on the Cartesian product of `axes`, first axis slowest.
fn sweep(
    resolved: &Resolved,
    axes: &[&Axis],
    eval: impl Fn(&[f64]) -> Result<PointRows> + Sync,
) -> Result<(Vec<Vec<String>>, usize, f64)> {
    let swept = axes.iter().filter(|a| a.swept()).count();
    if swept > MAX_SWEPT_AXES {
        return Err(Error::config(
            axes.iter().rev().find(|a| a.swept()).map(|a| a.key).unwrap_or("sweep"),
            format!("at most {MAX_SWEPT_AXES} swept axes per run"),
        ));
    }
    let mut points: Vec<Vec<usize>> = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..axis.values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = resolved.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Error::config("jobs", e.to_string()))?;
    let results: Vec<PointRows> = pool.install(|| {
        points
            .par_iter()
            .map(|idx| {
                let values: Vec<f64> = idx.iter().zip(axes).map(|(&i, a)| a.values[i]).collect();
                eval(&values)
            })
            .collect::<Result<_>>()
    })?;
    let mut rows = Vec::new();
    let mut n_max_used = 0;
    let mut truncation_difference = f64::NAN;
    for (idx, r) in points.iter().zip(results) {
        let prefix: Vec<String> = idx.iter().zip(axes).filter(|(_, a)| a.swept()).flat_map(|(&i, a)| a.cells(i)).collect();
        for row in r.rows {
            rows.push(prefix.iter().cloned().chain(row).collect());
        }
        n_max_used = n_max_used.max(r.n_max_used);
        truncation_difference = truncation_difference.max(r.truncation_difference);
    }
    Ok((rows, n_max_used, truncation_difference))
}

fn axis_columns(axes: &[&Axis]) -> Vec<String> {
    axes.iter().filter(|a| a.swept()).flat_map(|a| a.columns()).collect()
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn parse_kind(text: &str) -> Result<PulseKind> {
    match text.to_ascii_lowercase().as_str() {
        "bs" | "beam-splitter" => Ok(PulseKind::BeamSplitter),
        "m" | "mirror" => Ok(PulseKind::Mirror),
        other => Err(Error::config("kind", format!("expected `bs` or `m`, got `{other}`"))),
    }
}

fn parse_inputs(text: &str) -> Result<Vec<ColumnInput>> {
    let mut inputs: Vec<ColumnInput> = text
        .split(',')
        .map(|item| {
            let (state, order) = item.trim().split_once(':').ok_or_else(|| Error::config("inputs", format!("`{item}` is not state:order")))?;
            let state = match state {
                "g" => InternalState::Ground,
                "e" => InternalState::Excited,
                other => return Err(Error::config("inputs", format!("unknown internal state `{other}`"))),
            };
            let order = order.trim().parse().map_err(|_| Error::config("inputs", format!("bad order `{order}`")))?;
            Ok(ColumnInput::new(state, order))
        })
        .collect::<Result<_>>()?;
    inputs.sort();
    inputs.dedup();
    Ok(inputs)
}

fn parse_target(text: &str) -> Result<IntervalSet> {
    let intervals = text
        .split(',')
        .map(|item| {
            let (lo, hi) = item.split_once(':').ok_or_else(|| Error::config("target", format!("`{item}` is not lo:hi")))?;
            Ok((parse_number("target", lo)?, parse_number("target", hi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalSet::new(intervals).map_err(|e| Error::config("target", e.to_string()))
}

fn execute(command: Command) -> Result<()> {
    let (table, output) = match command {
        Command::Transition { common, inputs, save } => {
            let r = resolve(&common, DENSITY_GRID_POINTS)?;
            let inputs = inputs.as_deref().map(parse_inputs).transpose()?;
            (run_transition(&r, inputs, save.as_deref())?, common.output)
        }
        Command::Diffract(common) => (run_diffract(&resolve(&common, DENSITY_GRID_POINTS)?)?, common.output),
        Command::Width { common, single_peak } => (run_width(&resolve(&common, WIDTH_GRID_POINTS)?, !single_peak)?, common.output),
        Command::Efficiency { common, target } => {
            let target = target.as_deref().map(parse_target).transpose()?;
            (run_efficiency(&resolve(&common, DENSITY_GRID_POINTS)?, target)?, common.output)
        }
        Command::Losses { common, kind } => (run_losses(&resolve(&common, DENSITY_GRID_POINTS)?, parse_kind(&kind)?)?, common.output),
        Command::Populations(common) => (run_populations(&resolve(&common, DENSITY_GRID_POINTS)?)?, common.output),
        Command::OptimalArea(common) => (run_optimal_area(&resolve(&common, DENSITY_GRID_POINTS)?)?, common.output),
        Command::TransitionScan(common) => (run_transition_scan(&resolve(&common, DENSITY_GRID_POINTS)?)?, common.output),
        Command::Interferometer(a) => (run_interferometer(&resolve(&a.common, DENSITY_GRID_POINTS)?, a.phase_samples)?, a.common.output),
        Command::AmplitudeMap(a) => (run_map(&resolve(&a.common, DENSITY_GRID_POINTS)?, a.phase_samples, Channel::Amplitude)?, a.common.output),
        Command::ContrastMap(a) => (run_map(&resolve(&a.common, DENSITY_GRID_POINTS)?, a.phase_samples, Channel::Contrast)?, a.common.output),
    };
    let text = render(&table.0, &table.1);
    match output {
        Some(path) => std::fs::write(&path, text).map_err(|e| Error::config("output", format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)
        }
    }
}

type Rendered = (Table, Resolved);

fn render(table: &Table, r: &Resolved) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(out, "# {k}={v}");
    };
    kv("program", &format!("matterwave {}", env!("CARGO_PKG_VERSION")));
    kv("command", &table.command);
    kv("mechanism", &format!("{:?}", r.mechanism).to_lowercase());
    kv("geometry", &format!("{:?}", r.geometry).to_lowercase());
    kv("shape", &format!("{:?}", r.shape).to_lowercase());
    kv("delta_tau", &r.delta_tau.text);
    if let Some(area) = &r.area {
        kv("area", &area.text);
    }
    kv("p0", &r.p0.text);
    if let Some(dp) = &r.delta_p {
        kv("delta_p", &dp.text);
    }
    match r.detuning {
        Some(d) => kv("detuning", &d),
        None => kv("detuning", &"resonant"),
    }
    kv("n_max", &r.n_max);
    kv("rel_tol", &r.numerics.settings.rel_tol);
    kv("abs_tol", &r.numerics.settings.abs_tol);
    kv("grid_points", &r.numerics.grid_points);
    kv("window_factor", &r.window_factor);
    for (k, v) in &table.extra_header {
        kv(k, v);
    }
    kv("atom.mass_kg", &r.units.atom.mass_kg);
    kv("atom.wavelength_m", &r.units.atom.wavelength_m);
    kv("units.recoil_frequency_rad_per_s", &r.units.recoil_frequency());
    kv("units.us_per_dimensionless", &r.units.dimensionless_to_micros(1.0));
    for (i, dt) in r.delta_tau.values.iter().enumerate().filter(|_| !r.delta_tau.swept()) {
        let us = r.delta_tau.micros.as_ref().map(|m| m[i]).unwrap_or(f64::NAN);
        kv("delta_tau_dimless", dt);
        kv("delta_tau_us", &us);
    }
    kv("n_max_used", &table.n_max_used);
    kv("max_truncation_difference", &table.truncation_difference);
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn table(command: &'static str, columns: Vec<String>, swept: (Vec<Vec<String>>, usize, f64)) -> Table {
    Table {
        command,
        extra_header: Vec::new(),
        columns,
        rows: swept.0,
        n_max_used: swept.1,
        truncation_difference: swept.2,
    }
}

fn run_transition(r: &Resolved, inputs: Option<Vec<ColumnInput>>, save: Option<&Path>) -> Result<Rendered> {
    let area = r.area();
    let axes = [&r.delta_tau, &area, &r.p0];
    if save.is_some() && axes.iter().any(|a| a.swept()) {
        return Err(Error::config("save", "needs a single pulse, not a sweep"));
    }
    let swept = sweep(r, &axes, |v| {
        let cfg = r.config(v[0], v[1], v[2]);
        let inputs = inputs.clone().unwrap_or_else(|| vec![preparation(cfg.mechanism, cfg.geometry, PulseKind::from_area(cfg.pulse_area))]);
        let grid = MomentumGrid::centered(r.numerics.grid_points, cfg.p0);
        let tf = r.numerics.build(&cfg, grid, &inputs)?;
        if let Some(path) = save {
            cache::save(&tf, path)?;
        }
        let mut rows = Vec::new();
        for (c, input) in tf.inputs().iter().enumerate() {
            for (k, q) in grid.quasi_momenta().enumerate() {
                let column = &tf.columns()[c * grid.points_per_hbark + k].state;
                for state in [InternalState::Ground, InternalState::Excited].into_iter().take(crate::physics::internal_states(cfg.mechanism)) {
                    for order in column.orders() {
                        let g = column.amplitude(state, order);
                        rows.push(vec![
                            input.state.label().to_string(),
                            input.order.to_string(),
                            q.to_string(),
                            state.label().to_string(),
                            order.to_string(),
                            g.re.to_string(),
                            g.im.to_string(),
                            g.norm_sqr().to_string(),
                        ]);
                    }
                }
            }
        }
        Ok(PointRows {
            rows,
            n_max_used: tf.n_max_used(),
            truncation_difference: tf.max_truncation_difference(),
        })
    })?;
    let mut columns = axis_columns(&axes);
    columns.extend(strings(&["input_state", "input_order", "quasi_momentum_hbark", "output_state", "output_order", "re", "im", "probability"]));
    Ok((table("transition", columns, swept), r.clone()))
}

fn run_diffract(r: &Resolved) -> Result<Rendered> {
    let area = r.area();
    let dp = r.delta_p()?;
    let axes = [&r.delta_tau, &area, &r.p0, dp];
    let raman = r.mechanism == Mechanism::Raman;
    let swept = sweep(r, &axes, |v| {
        let d = diffract(&r.config(v[0], v[1], v[2]), v[3], &r.numerics)?;
        let before = d.initial;
        let after = d.output;
        let n = after.n_max().max(before.n_max());
        let mut rows = Vec::new();
        for order in -(n as i32)..=n as i32 {
            for k in 0..after.grid().points_per_hbark {
                let p = after.grid().quasi_momentum(k) + order as f64;
                let mut row = vec![p.to_string()];
                for psi in [&before, &after] {
                    row.push(psi.value(InternalState::Ground, order, k).norm_sqr().to_string());
                    if raman {
                        row.push(psi.value(InternalState::Excited, order, k).norm_sqr().to_string());
                    }
                }
                rows.push(row);
            }
        }
        Ok(PointRows {
            rows,
            n_max_used: d.n_max_used,
            truncation_difference: d.truncation_difference,
        })
    })?;
    let mut columns = axis_columns(&axes);
    columns.push("momentum_hbark".into());
    if raman {
        columns.extend(strings(&["initial_g", "initial_e", "final_g", "final_e"]));
    } else {
        columns.extend(strings(&["initial_g", "final_g"]));
    }
    Ok((table("diffract", columns, swept), r.clone()))
}

fn run_width(r: &Resolved, all_peaks: bool) -> Result<Rendered> {
    let axes = [&r.delta_tau, &r.p0];
    let swept = sweep(r, &axes, |v| {
        let w = resonance_width(&r.config(v[0], PI, v[1]), &r.numerics, all_peaks)?;
        Ok(PointRows::one(&[w.width], w.n_max_used, w.truncation_difference))
    })?;
    let mut columns = axis_columns(&axes);
    columns.push("width_hbark".into());
    let mut t = table("width", columns, swept);
    t.extra_header.push(("width_mode".into(), if all_peaks { "all-peaks" } else { "single-peak" }.into()));
    Ok((t, r.clone()))
}

fn run_efficiency(r: &Resolved, target: Option<IntervalSet>) -> Result<Rendered> {
    let area = r.area();
    let dp = r.delta_p()?;
    let axes = [&r.delta_tau, &area, &r.p0, dp];
    let swept = sweep(r, &axes, |v| {
        let m = efficiency(&r.config(v[0], v[1], v[2]), v[3], target.as_ref(), &r.numerics)?;
        Ok(PointRows::one(&[m.value], m.n_max_used, m.truncation_difference))
    })?;
    let mut columns = axis_columns(&axes);
    columns.push("efficiency".into());
    let mut t = table("efficiency", columns, swept);
    let target_text = match &target {
        Some(set) => set.intervals().iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(","),
        None => "p0+0.5:p0+1.5".into(),
    };
    t.extra_header.push(("target".into(), target_text));
    Ok((t, r.clone()))
}

fn run_losses(r: &Resolved, kind: PulseKind) -> Result<Rendered> {
    let dp = r.delta_p()?;
    let axes = [&r.delta_tau, &r.p0, dp];
    let swept = sweep(r, &axes, |v| {
        let m = losses(&r.config(v[0], kind.area(), v[1]), v[2], kind, &r.numerics)?;
        Ok(PointRows::one(&[m.value], m.n_max_used, m.truncation_difference))
    })?;
    let mut columns = axis_columns(&axes);
    columns.push("losses".into());
    let mut t = table("losses", columns, swept);
    t.extra_header.push(("kind".into(), if kind == PulseKind::Mirror { "m" } else { "bs" }.into()));
    Ok((t, r.clone()))
}

fn run_populations(r: &Resolved) -> Result<Rendered> {
    let dp = r.delta_p()?;
    let axes = [&r.delta_tau, &r.p0, dp];
    let swept = sweep(r, &axes, |v| {
        let p = populations(&r.config(v[0], PI, v[1]), v[2], &r.numerics)?;
        Ok(PointRows::one(&[p.minus, p.rest, p.plus, p.other], p.n_max_used, p.truncation_difference))
    })?;
    let mut columns = axis_columns(&axes);
    columns.extend(strings(&["p_minus", "p_rest", "p_plus", "p_other"]));
    Ok((table("populations", columns, swept), r.clone()))
}

fn run_optimal_area(r: &Resolved) -> Result<Rendered> {
    let axes = [&r.delta_tau, &r.p0];
    let swept = sweep(r, &axes, |v| {
        let opt = optimal_pulse_area(&r.config(v[0], PI, v[1]), &r.numerics.settings)?;
        Ok(PointRows::one(&[opt.area, opt.area / PI, opt.transfer], 0, f64::NAN))
    })?;
    let mut columns = axis_columns(&axes);
    columns.extend(strings(&["area_rad", "area_over_pi", "transfer"]));
    Ok((table("optimal-area", columns, swept), r.clone()))
}

fn run_transition_scan(r: &Resolved) -> Result<Rendered> {
    let dp = r.delta_p()?;
    let delta_tau = r.delta_tau.single()?;
    let swept = sweep(r, &[&r.p0], |v| {
        let s = transition_scan(&r.config(delta_tau, PI, v[0]), &[v[0]], &dp.values, &r.numerics)?;
        let rows = dp
            .values
            .iter()
            .zip(&s.efficiency[0])
            .map(|(d, e)| [v[0], *d, *e, s.area[0], s.width[0]].iter().map(f64::to_string).collect())
            .collect();
        Ok(PointRows {
            rows,
            n_max_used: s.n_max_used[0],
            truncation_difference: s.truncation_difference[0],
        })
    })?;
    let columns = strings(&["p0_hbark", "delta_p_hbark", "efficiency", "optimal_area_rad", "width_hbark"]);
    // p0 is always a column here, so drop the sweep prefix
    let rows = swept
        .0
        .into_iter()
        .map(|row| {
            let skip = row.len() - columns.len();
            row.into_iter().skip(skip).collect()
        })
        .collect();
    Ok((table("transition-scan", columns, (rows, swept.1, swept.2)), r.clone()))
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_PHASE_SAMPLES {
        return Err(Error::config("phase_samples", format!("need at least {MIN_PHASE_SAMPLES}, got {samples}")));
    }
    Ok(())
}

fn run_interferometer(r: &Resolved, samples: usize) -> Result<Rendered> {
    check_samples(samples)?;
    let dp = r.delta_p()?;
    let axes = [&r.delta_tau, &r.p0, dp];
    let swept = sweep(r, &axes, |v| {
        let s = signal(&r.config(v[0], PI, v[1]), v[2], samples, &r.numerics)?;
        let rows = s
            .phases
            .iter()
            .zip(&s.intensities)
            .map(|(phi, i)| [*phi, *i, s.amplitude, s.contrast, s.fit_residual].iter().map(f64::to_string).collect())
            .collect();
        Ok(PointRows {
            rows,
            n_max_used: s.n_max_used,
            truncation_difference: s.truncation_difference,
        })
    })?;
    let mut columns = axis_columns(&axes);
    columns.extend(strings(&["phase_rad", "intensity", "amplitude", "contrast", "fit_residual"]));
    let mut t = table("interferometer", columns, swept);
    t.extra_header.push(("phase_samples".into(), samples.to_string()));
    Ok((t, r.clone()))
}

#[derive(Clone, Copy, PartialEq)]
enum Channel {
    Amplitude,
    Contrast,
}

fn run_map(r: &Resolved, samples: usize, channel: Channel) -> Result<Rendered> {
    check_samples(samples)?;
    let dp = r.delta_p()?;
    let p0 = r.p0.single()?;
    let axes = [dp, &r.delta_tau];
    let swept = sweep(r, &axes, |v| {
        let s = signal(&r.config(v[1], PI, p0), v[0], samples, &r.numerics)?;
        let value = if channel == Channel::Amplitude { s.amplitude } else { s.contrast };
        Ok(PointRows::one(&[value], s.n_max_used, s.truncation_difference))
    })?;
    // both map axes are always reported
    let rows = {
        let mut rows = Vec::new();
        let mut it = swept.0.into_iter();
        for i in 0..dp.values.len() {
            for j in 0..r.delta_tau.values.len() {
                let row = it.next().expect("one row per cell");
                let value = row.last().expect("value column").clone();
                let mut cells = dp.cells(i);
                cells.extend(r.delta_tau.cells(j));
                cells.push(value);
                rows.push(cells);
            }
        }
        rows
    };
    let mut columns = Axis::scalar("delta_p", 0.0).columns();
    columns.extend(r.delta_tau.columns());
    let (command, name) = match channel {
        Channel::Amplitude => ("amplitude-map", "amplitude"),
        Channel::Contrast => ("contrast-map", "contrast"),
    };
    columns.push(name.into());
    let mut t = table(command, columns, (rows, swept.1, swept.2));
    t.extra_header.push(("phase_samples".into(), samples.to_string()));
    Ok((t, r.clone()))
}
