//! Line-oriented run configuration and command dispatch for the `rcm` binary.
//!
//! A configuration is a list of `key = value` lines; `#` starts a comment.
//! Every key is checked against the defaults of the selected command, and
//! the resolved configuration is echoed back in the same syntax.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::environment::{save, EnvironmentLaw};
use crate::error::{config, Error, Result};
use crate::experiments::{
    read_report, run_boundedness_harnack, run_elliptic_harnack, run_energy_suite, run_heat_bounds,
    run_local_limit, run_oscillation, BoundednessConfig, EllipticHarnackConfig, EnergySuiteConfig,
    ExperimentReport, HeatBoundsConfig, LocalLimitConfig, OscillationConfig, Verdict,
};
use crate::lattice::{LatticeBox, Point};
use crate::solvers::{heat_kernel_in_law, write_kernel_csv, SolverConfig};
use crate::walker::{sample_path, walk_radius, write_paths_csv};

/// Exit statuses of the binary.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

pub const EXPERIMENTS: [&str; 6] = [
    "oscillation",
    "boundedness_harnack",
    "heat_bounds",
    "local_limit",
    "elliptic_harnack",
    "energy",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenEnvConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub radius: u32,
    pub seed: u64,
}

impl Default for GenEnvConfig {
    fn default() -> Self {
        GenEnvConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            radius: 32,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub source: Vec<i64>,
    pub times: Vec<f64>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            source: vec![0, 0],
            times: vec![1.0, 4.0, 16.0],
            seed: 1,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    /// Radius of the environment box; 0 picks one from the horizon.
    pub radius: u32,
    pub source: Vec<i64>,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            radius: 0,
            source: vec![0, 0],
            horizon: 16.0,
            paths: 10,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Oscillation(OscillationConfig),
    BoundednessHarnack(BoundednessConfig),
    HeatBounds(HeatBoundsConfig),
    LocalLimit(LocalLimitConfig),
    EllipticHarnack(EllipticHarnackConfig),
    Energy(EnergySuiteConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    GenEnv(GenEnvConfig),
    Heat(HeatConfig),
    Walk(WalkConfig),
    Verify(Experiment),
    Report,
}

/// A validated configuration with defaults resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub experiment: Option<String>,
    pub task: Task,
    pub out: Option<PathBuf>,
    /// Every effective key and value, in configuration syntax.
    pub echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn echo_text(&self) -> String {
        self.echo.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

fn at(line: usize, key: &str, message: impl std::fmt::Display) -> Error {
    if line == 0 {
        config(format!("command line: key `{key}`: {message}"))
    } else {
        config(format!("line {line}: key `{key}`: {message}"))
    }
}

/// Splits the text into entries, rejecting malformed lines and duplicates.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(config(format!("line {line}: expected `key = value`, got `{body}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(config(format!("line {line}: malformed key `{key}`")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(at(line, key, format!("duplicate of line {}", prev.line)));
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    resolve(parse_entries(text)?)
}

fn take<'a>(entries: &'a [Entry], key: &str) -> Option<&'a Entry> {
    entries.iter().find(|e| e.key == key)
}

/// Builds the configuration from entries; `command` is required and
/// `experiment` is required for `verify`.
pub fn resolve(entries: Vec<Entry>) -> Result<RunConfig> {
    let command = take(&entries, "command").ok_or_else(|| config("missing required key `command`"))?;
    let mut used: BTreeSet<String> = ["command", "out"].into_iter().map(String::from).collect();
    let out = take(&entries, "out").map(|e| PathBuf::from(&e.value));
    let mut experiment = None;
    let (task, echo) = match command.value.as_str() {
        "gen-env" => {
            let (c, echo) = apply(GenEnvConfig::default(), &entries, &mut used)?;
            (Task::GenEnv(c), echo)
        }
        "heat" => {
            let (c, echo) = apply(HeatConfig::default(), &entries, &mut used)?;
            (Task::Heat(c), echo)
        }
        "walk" => {
            let (c, echo) = apply(WalkConfig::default(), &entries, &mut used)?;
            (Task::Walk(c), echo)
        }
        "report" => (Task::Report, Vec::new()),
        "verify" => {
            let e = take(&entries, "experiment").ok_or_else(|| config("missing required key `experiment` for verify"))?;
            used.insert("experiment".to_string());
            experiment = Some(e.value.clone());
            let (x, echo) = match e.value.as_str() {
                "oscillation" => wrap(apply(OscillationConfig::default(), &entries, &mut used)?, Experiment::Oscillation),
                "boundedness_harnack" => wrap(
                    apply(BoundednessConfig::default(), &entries, &mut used)?,
                    Experiment::BoundednessHarnack,
                ),
                "heat_bounds" => wrap(apply(HeatBoundsConfig::default(), &entries, &mut used)?, Experiment::HeatBounds),
                "local_limit" => wrap(apply(LocalLimitConfig::default(), &entries, &mut used)?, Experiment::LocalLimit),
                "elliptic_harnack" => wrap(
                    apply(EllipticHarnackConfig::default(), &entries, &mut used)?,
                    Experiment::EllipticHarnack,
                ),
                "energy" => wrap(apply(EnergySuiteConfig::default(), &entries, &mut used)?, Experiment::Energy),
                other => {
                    return Err(at(
                        e.line,
                        "experiment",
                        format!("unknown experiment `{other}`, expected one of {}", EXPERIMENTS.join(", ")),
                    ))
                }
            };
            (Task::Verify(x), echo)
        }
        other => {
            return Err(at(
                command.line,
                "command",
                format!("unknown command `{other}`, expected gen-env, heat, walk, verify or report"),
            ))
        }
    };
    if let Some(e) = entries.iter().find(|e| !used.contains(&e.key)) {
        return Err(at(e.line, &e.key, format!("unknown key for `{}`", command.value)));
    }
    let mut full = vec![("command".to_string(), command.value.clone())];
    if let Some(x) = &experiment {
        full.push(("experiment".to_string(), x.clone()));
    }
    if let Some(o) = &out {
        full.push(("out".to_string(), o.display().to_string()));
    }
    full.extend(echo);
    Ok(RunConfig {
        command: command.value.clone(),
        experiment,
        task,
        out,
        echo: full,
    })
}

fn wrap<T>((c, echo): (T, Vec<(String, String)>), f: impl Fn(T) -> Experiment) -> (Experiment, Vec<(String, String)>) {
    (f(c), echo)
}

/// Where each key lives in the serialized config: top level, or inside the
/// nested solver settings.
fn slots(root: &Map<String, Value>) -> Vec<(Option<String>, String)> {
    let mut out = Vec::new();
    for (k, v) in root {
        match v {
            Value::Object(inner) if !inner.contains_key("kind") => {
                out.extend(inner.keys().map(|sub| (Some(k.clone()), sub.clone())));
            }
            _ => out.push((None, k.clone())),
        }
    }
    out
}

/// Parses `text` into a value shaped like `template`.
fn parse_value(template: &Value, text: &str) -> std::result::Result<Value, String> {
    match template {
        Value::Bool(_) => text.parse::<bool>().map(Value::Bool).map_err(|_| format!("expected true or false, got `{text}`")),
        Value::Number(n) if n.is_f64() => {
            let v: f64 = text.parse().map_err(|_| format!("expected a number, got `{text}`"))?;
            serde_json::Number::from_f64(v)
                .map(Value::Number)
                .ok_or_else(|| format!("expected a finite number, got `{text}`"))
        }
        Value::Number(_) => match text.parse::<i64>() {
            Ok(v) => Ok(Value::from(v)),
            Err(_) => text
                .parse::<u64>()
                .map(Value::from)
                .map_err(|_| format!("expected an integer, got `{text}`")),
        },
        Value::String(_) => Ok(Value::String(text.to_string())),
        Value::Object(_) => {
            let law: EnvironmentLaw = text.parse().map_err(|e: Error| e.to_string())?;
            Ok(serde_json::to_value(law).unwrap())
        }
        Value::Array(items) => {
            let nested = matches!(items.first(), Some(Value::Array(_)));
            if nested {
                let inner = items.first().unwrap();
                text.split(';')
                    .map(|part| parse_value(inner, part.trim()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map(Value::Array)
            } else {
                let elem = items.first().cloned().unwrap_or(Value::from(0.0));
                text.split([',', ' '])
                    .filter(|s| !s.trim().is_empty())
                    .map(|part| parse_value(&elem, part.trim()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map(Value::Array)
            }
        }
        Value::Null => Err("key cannot be set".to_string()),
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Object(_) => serde_json::from_value::<EnvironmentLaw>(v.clone())
            .map(|l| l.to_string())
            .unwrap_or_else(|_| v.to_string()),
        Value::Array(items) if matches!(items.first(), Some(Value::Array(_))) => {
            items.iter().map(render).collect::<Vec<_>>().join("; ")
        }
        Value::Array(items) => items.iter().map(render).collect::<Vec<_>>().join(","),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Overrides fields of `default` with matching entries; marks used keys.
fn apply<T: Serialize + DeserializeOwned>(
    default: T,
    entries: &[Entry],
    used: &mut BTreeSet<String>,
) -> Result<(T, Vec<(String, String)>)> {
    let mut root = match serde_json::to_value(&default).unwrap() {
        Value::Object(m) => m,
        _ => unreachable!("configs are structs"),
    };
    let keys = slots(&root);
    for e in entries {
        let Some((parent, key)) = keys.iter().find(|(_, k)| *k == e.key) else {
            continue;
        };
        let slot = match parent {
            Some(p) => root.get_mut(p).unwrap().as_object_mut().unwrap().get_mut(key).unwrap(),
            None => root.get_mut(key).unwrap(),
        };
        *slot = parse_value(slot, &e.value).map_err(|m| at(e.line, &e.key, m))?;
        // Type-check each override on its own so errors name their line.
        serde_json::from_value::<T>(Value::Object(root.clone())).map_err(|m| at(e.line, &e.key, m))?;
        used.insert(e.key.clone());
    }
    let typed = serde_json::from_value::<T>(Value::Object(root.clone())).map_err(|e| config(e.to_string()))?;
    let echo = keys
        .iter()
        .map(|(parent, key)| {
            let v = match parent {
                Some(p) => &root[p][key],
                None => &root[key],
            };
            (key.clone(), render(v))
        })
        .collect();
    Ok((typed, echo))
}

/// Exit status for a finished experiment.
pub fn exit_status(report: &ExperimentReport) -> u8 {
    match report.verdict {
        Verdict::Fail => EXIT_FAIL,
        Verdict::Pass | Verdict::Inconclusive => EXIT_OK,
    }
}

/// Maps an error onto the exit-status contract.
pub fn error_status(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Creates the output directory; an existing one needs `force`.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && !force {
        return Err(config(format!("output directory {} exists; pass --force to overwrite", dir.display())));
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn point(dim: usize, coords: &[i64]) -> Result<Point> {
    if coords.len() != dim {
        return Err(config(format!("source has {} coordinates, expected {dim}", coords.len())));
    }
    Ok(Point::new(coords))
}

pub fn run_experiment(x: &Experiment) -> Result<ExperimentReport> {
    match x {
        Experiment::Oscillation(c) => run_oscillation(c),
        Experiment::BoundednessHarnack(c) => run_boundedness_harnack(c),
        Experiment::HeatBounds(c) => run_heat_bounds(c),
        Experiment::LocalLimit(c) => run_local_limit(c),
        Experiment::EllipticHarnack(c) => run_elliptic_harnack(c),
        Experiment::Energy(c) => run_energy_suite(c),
    }
}

/// Runs a resolved configuration, writing into `out` (already prepared).
/// Returns the exit status and a one-line summary.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<(u8, String)> {
    match &cfg.task {
        Task::GenEnv(c) => {
            c.law.validate()?;
            if c.radius == 0 || !(1..=4).contains(&c.dim) {
                return Err(config("gen-env needs radius >= 1 and 1 <= dim <= 4"));
            }
            let w = c.law.generate(c.seed, LatticeBox::centered(c.dim, c.radius))?;
            let file = std::fs::File::create(out.join("environment.txt"))?;
            save(&w, std::io::BufWriter::new(file))?;
            Ok((EXIT_OK, format!("wrote {} bonds", w.ambient().bond_count())))
        }
        Task::Heat(c) => {
            let source = point(c.dim, &c.source)?;
            if c.solver.radius == 0 && c.law.mean_conductance().is_none() {
                return Err(config("heat on a stored environment needs an explicit radius"));
            }
            let (cols, _) = heat_kernel_in_law(&c.law, c.seed, c.dim, source, &c.times, &c.solver)?;
            let file = std::fs::File::create(out.join("kernel.csv"))?;
            write_kernel_csv(&cols, std::io::BufWriter::new(file))?;
            let leak = cols.last().map(|c| c.leak).unwrap_or(0.0);
            Ok((EXIT_OK, format!("wrote {} kernel columns, leak {leak:e}", cols.len())))
        }
        Task::Walk(c) => {
            let source = point(c.dim, &c.source)?;
            let radius = if c.radius > 0 {
                c.radius
            } else {
                let m = c
                    .law
                    .mean_conductance()
                    .ok_or_else(|| config("walks on a stored environment need an explicit radius"))?;
                walk_radius(c.horizon, m) + source.sup_norm() as u32
            };
            let w = c.law.generate(c.seed, LatticeBox::centered(c.dim, radius))?;
            let paths = (0..c.paths as u64)
                .map(|k| sample_path(&w, source, c.horizon, c.seed, k))
                .collect::<Result<Vec<_>>>()?;
            let file = std::fs::File::create(out.join("paths.csv"))?;
            write_paths_csv(&paths, std::io::BufWriter::new(file))?;
            let truncated = paths.iter().filter(|p| p.truncated).count();
            Ok((EXIT_OK, format!("wrote {} paths, {truncated} truncated", paths.len())))
        }
        Task::Verify(x) => {
            let report = run_experiment(x)?;
            report.write(out)?;
            Ok((exit_status(&report), summary(&serde_json::to_value(&report).unwrap())))
        }
        Task::Report => {
            let v = read_report(out)?;
            let status = match v.get("verdict").and_then(Value::as_str) {
                Some("fail") => EXIT_FAIL,
                _ => EXIT_OK,
            };
            Ok((status, summary(&v)))
        }
    }
}

/// Experiment name, verdict and one line per rule.
pub fn summary(report: &Value) -> String {
    let mut s = format!(
        "{}: {} ({} trials, {} skipped)",
        report["experiment"].as_str().unwrap_or("?"),
        report["verdict"].as_str().unwrap_or("?"),
        report["trials"],
        report["skipped"]
    );
    for r in report["rules"].as_array().into_iter().flatten() {
        s.push_str(&format!(
            "\n  {} {}: {}",
            r["verdict"].as_str().unwrap_or("?"),
            r["rule"].as_str().unwrap_or("?"),
            r["detail"].as_str().unwrap_or("")
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_verify_config_echoes_defaults() {
        let cfg = parse_config("command = verify\nexperiment = oscillation\nseed = 1\n").unwrap();
        assert_eq!(cfg.task, Task::Verify(Experiment::Oscillation(OscillationConfig::default())));
        let echo = cfg.echo_text();
        assert!(echo.contains("law = pareto_mixture(8,8)\n"), "{echo}");
        assert!(echo.contains("series_tol = 1e-10\n") || echo.contains("series_tol = 1e-10"), "{echo}");
        assert!(echo.contains("mode = parabolic\n"));
        // The echo parses back to the same configuration.
        assert_eq!(parse_config(&echo).unwrap().task, cfg.task);
    }

    #[test]
    fn bad_value_names_the_line() {
        let err = parse_config("command = verify\nexperiment = oscillation\nseed = abc\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("seed"), "{msg}");
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn duplicates_and_unknown_keys_are_rejected() {
        let dup = parse_config("command = verify\nexperiment = oscillation\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(dup.to_string().contains("line 4") && dup.to_string().contains("duplicate"));
        let unknown = parse_config("command = heat\ntrials = 3\n").unwrap_err();
        assert!(unknown.to_string().contains("line 2") && unknown.to_string().contains("trials"));
        assert!(parse_config("seed = 1").unwrap_err().to_string().contains("command"));
        assert!(parse_config("command = verify").unwrap_err().to_string().contains("experiment"));
    }

    #[test]
    fn lists_laws_and_enums_parse() {
        let cfg = parse_config(
            "# campaign\ncommand = verify\nexperiment = local_limit\nlaw = constant(2)  # stiff\nn_ladder = 4, 8\ngrid = 0 0; 1 -1\nseries_tol = 1e-11\n",
        )
        .unwrap();
        let Task::Verify(Experiment::LocalLimit(c)) = cfg.task else { panic!() };
        assert_eq!(c.law, EnvironmentLaw::Constant { value: 2.0 });
        assert_eq!(c.n_ladder, vec![4, 8]);
        assert_eq!(c.grid, vec![vec![0.0, 0.0], vec![1.0, -1.0]]);
        assert_eq!(c.solver.series_tol, 1e-11);
        let bad = parse_config("command = verify\nexperiment = oscillation\nmode = sideways\n").unwrap_err();
        assert!(bad.to_string().contains("line 3") && bad.to_string().contains("mode"));
        let neg = parse_config("command = verify\nexperiment = oscillation\nn = -4\n").unwrap_err();
        assert!(neg.to_string().contains("line 3"));
    }
}
