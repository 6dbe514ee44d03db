//! Run configuration: a `key = value` file, overridden by command-line flags.
//!
//! Both sources become an ordered list of entries, applied one after another
//! so that later entries win. Nothing is computed until the whole list has
//! been parsed and validated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relhartree::acceptance::Suite;
use relhartree::ground_state::{ProblemKind, SolverOptions};
use relhartree::harness::{geometric_c_values, SweepConfig};
use relhartree::{PhysicalParams, RadialGrid, SpeedOfLight};

use crate::error::CliError;

/// Where an entry came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Entry {
    pub fn flag(key: &str, value: impl Into<String>) -> Self {
        Entry {
            key: key.to_string(),
            value: value.into(),
            origin: Origin::Flag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format {other:?}; expected csv, json or svg")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub params: PhysicalParams,
    pub grid_n: usize,
    pub grid_radius: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub newton: bool,
    pub warm_start: bool,
    pub c_values: Vec<f64>,
    pub order: usize,
    pub sobolev: Vec<f64>,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub threads: Option<usize>,
    pub cache: bool,
    pub suite: Suite,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ProblemKind::Energy,
            params: PhysicalParams::unit(),
            grid_n: 4096,
            grid_radius: 40.0,
            tol: 1e-10,
            max_iterations: 100_000,
            damping: 0.5,
            newton: true,
            warm_start: true,
            c_values: geometric_c_values(10.0, 160.0, std::f64::consts::SQRT_2).expect("static range"),
            order: 1,
            sobolev: vec![0.0, 1.0, 2.0],
            out_dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
            threads: None,
            cache: true,
            suite: Suite::Fast,
        }
    }
}

pub const KEYS: &[&str] = &[
    "kind",
    "mass",
    "lambda",
    "c",
    "grid_n",
    "grid_radius",
    "tol",
    "max_iterations",
    "damping",
    "newton",
    "warm_start",
    "c_values",
    "c_range",
    "order",
    "sobolev",
    "out_dir",
    "formats",
    "threads",
    "cache",
    "suite",
];

/// Parses the `key = value` lines of a config file. `#` starts a comment.
pub fn parse_file_text(text: &str, path: &Path) -> Result<Vec<Entry>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = Origin::File {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("{origin}: expected `key = value`, got {line:?}")));
        };
        out.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            origin,
        });
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_file_text(&text, path)
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
}

impl RunConfig {
    /// Applies entries in order on top of the defaults, then validates.
    pub fn from_entries(entries: &[Entry]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for e in entries {
            cfg.apply(e).map_err(|reason| CliError::Config(format!("{} ({}): {reason}", e.key, e.origin)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<(), String> {
        let v = e.value.as_str();
        match e.key.as_str() {
            "kind" => self.kind = v.parse().map_err(|e: relhartree::Error| e.to_string())?,
            "mass" => self.params.mass = parse_num(v)?,
            "lambda" => self.params.lambda = parse_num(v)?,
            "c" => self.params.c = v.parse::<SpeedOfLight>().map_err(|e| e.to_string())?,
            "grid_n" => self.grid_n = parse_num(v)?,
            "grid_radius" => self.grid_radius = parse_num(v)?,
            "tol" => self.tol = parse_num(v)?,
            "max_iterations" => self.max_iterations = parse_num(v)?,
            "damping" => self.damping = parse_num(v)?,
            "newton" => self.newton = parse_bool(v)?,
            "warm_start" => self.warm_start = parse_bool(v)?,
            "c_values" => self.c_values = parse_list(v)?,
            "c_range" => {
                let parts: Vec<f64> = v
                    .split(':')
                    .map(|s| parse_num::<f64>(s.trim()))
                    .collect::<Result<_, _>>()?;
                let [lo, hi, ratio] = parts[..] else {
                    return Err(format!("expected lo:hi:ratio, got {v:?}"));
                };
                self.c_values = geometric_c_values(lo, hi, ratio).map_err(|e| e.to_string())?;
            }
            "order" => self.order = parse_num(v)?,
            "sobolev" => self.sobolev = parse_list(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "formats" => self.formats = parse_list(v)?,
            "threads" => {
                self.threads = match v {
                    "auto" => None,
                    _ => Some(parse_num(v)?),
                }
            }
            "cache" => self.cache = parse_bool(v)?,
            "suite" => self.suite = v.parse().map_err(|e: relhartree::Error| e.to_string())?,
            other => return Err(format!("unknown key {other:?}; known keys: {}", KEYS.join(", "))),
        }
        Ok(())
    }

    fn grid(&self) -> Result<std::sync::Arc<RadialGrid>, CliError> {
        RadialGrid::new(self.grid_n, self.grid_radius).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let mut opts = SolverOptions::on_grid(self.grid()?);
        opts.tol = self.tol;
        opts.max_iterations = self.max_iterations;
        opts.damping = self.damping;
        opts.newton = self.newton;
        Ok(opts)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let mut s = SweepConfig::new(self.kind, self.order);
        s.params = self.params.with_c(SpeedOfLight::Infinite);
        s.c_values = self.c_values.clone();
        s.sobolev = self.sobolev.clone();
        s.solver = self.solver_options()?;
        s.warm_start = self.warm_start;
        s.threads = self.threads;
        Ok(s)
    }

    /// Checks every field; the first problem is reported with its key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: relhartree::Error| CliError::Config(e.to_string());
        self.params.validate().map_err(bad)?;
        if self.kind == ProblemKind::Action {
            self.params.validate_action().map_err(bad)?;
        }
        self.solver_options()?.validate().map_err(bad)?;
        self.sweep_config()?.validate().map_err(bad)?;
        if self.formats.is_empty() {
            return Err(CliError::Config("formats: need at least one of csv, json, svg".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_entries(&parse_file_text(text, Path::new("run.cfg"))?)
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = from_text("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.c_values.len(), 9);
    }

    #[test]
    fn file_entries_and_comments() {
        let cfg = from_text(
            "# study\nkind = action\nmass = 2.0  # heavier\nc = 50\nc_values = 10, 20, 40\nsobolev = 1\nformats = csv\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ProblemKind::Action);
        assert_eq!(cfg.params.mass, 2.0);
        assert_eq!(cfg.params.c, SpeedOfLight::Finite(50.0));
        assert_eq!(cfg.c_values, vec![10.0, 20.0, 40.0]);
        assert_eq!(cfg.formats, vec![Format::Csv]);
    }

    #[test]
    fn later_entries_override() {
        let mut entries = parse_file_text("order = 2\nc_range = 10:80:2\n", Path::new("a")).unwrap();
        entries.push(Entry::flag("order", "1"));
        entries.push(Entry::flag("c_values", "20,40,80"));
        let cfg = RunConfig::from_entries(&entries).unwrap();
        assert_eq!(cfg.order, 1);
        assert_eq!(cfg.c_values, vec![20.0, 40.0, 80.0]);
    }

    #[test]
    fn errors_name_the_field_and_place() {
        let msg = |text: &str| from_text(text).unwrap_err().to_string();
        assert!(msg("grid_n = many").contains("grid_n (run.cfg:1)"));
        assert!(msg("\n\ncolour = blue").contains("run.cfg:3"));
        assert!(msg("mass").contains("key = value"));
        assert!(msg("c_range = 10:20").contains("lo:hi:ratio"));
        assert!(msg("mass = -1").contains("mass"));
        assert!(msg("kind = action\nlambda = 0").contains("lambda"));
        assert!(msg("c_values = 20, 10").contains("increasing"));
        assert!(msg("tol = 2").contains("tol"));
        assert!(msg("formats = png").contains("png"));
    }

    #[test]
    fn every_error_is_a_config_error() {
        for text in ["grid_n = 0", "order = 0", "threads = 0", "damping = 0"] {
            assert!(matches!(from_text(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
