//! Self-describing text files for radial profiles.
//!
//! ```text
//! # relhartree profile
//! format = 1
//! kind = energy
//! ...
//! values = 4096
//! 3.7194521508431000e-1
//! ...
//! sha256 = <hex digest of every byte above this line>
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use relhartree::ground_state::{equation_residual, GroundStateResult, ProblemKind};
use relhartree::hartree::{action, energy};
use relhartree::{PhysicalParams, RadialField, RadialGrid, SpeedOfLight};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const MAGIC: &str = "# relhartree profile";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMeta {
    pub kind: ProblemKind,
    /// What the values are, e.g. `ground_state` or `correction_2`.
    pub label: String,
    pub grid_n: usize,
    pub grid_radius: f64,
    pub params: PhysicalParams,
    pub level: f64,
    pub multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub meta: ProfileMeta,
    pub values: Vec<f64>,
}

impl ProfileRecord {
    pub fn from_ground_state(gs: &GroundStateResult) -> Self {
        let grid = gs.profile.grid();
        ProfileRecord {
            meta: ProfileMeta {
                kind: gs.kind,
                label: "ground_state".into(),
                grid_n: grid.len(),
                grid_radius: grid.radius(),
                params: gs.params,
                level: gs.level,
                multiplier: gs.multiplier,
                residual: gs.residual_l2,
                iterations: gs.iterations,
                version: env!("CARGO_PKG_VERSION").into(),
            },
            values: gs.profile.values().to_vec(),
        }
    }

    /// A field that is not itself a ground state, such as a series term.
    pub fn from_field(base: &ProfileMeta, label: &str, field: &RadialField) -> Self {
        let meta = ProfileMeta {
            label: label.into(),
            level: f64::NAN,
            multiplier: f64::NAN,
            residual: f64::NAN,
            iterations: 0,
            ..base.clone()
        };
        ProfileRecord {
            meta,
            values: field.values().to_vec(),
        }
    }

    pub fn grid(&self) -> Result<Arc<RadialGrid>, relhartree::Error> {
        RadialGrid::new(self.meta.grid_n, self.meta.grid_radius)
    }

    pub fn field(&self) -> Result<RadialField, relhartree::Error> {
        RadialField::new(self.grid()?, self.values.clone())
    }

    /// Field on `grid`, which must match the stored one exactly.
    pub fn field_on(&self, grid: &Arc<RadialGrid>, path: &Path) -> Result<RadialField, CliError> {
        if self.meta.grid_n != grid.len() || self.meta.grid_radius != grid.radius() {
            return Err(CliError::data(
                path,
                format!(
                    "grid mismatch: file has N = {}, R = {}, run uses N = {}, R = {}",
                    self.meta.grid_n,
                    self.meta.grid_radius,
                    grid.len(),
                    grid.radius()
                ),
            ));
        }
        Ok(RadialField::new(grid.clone(), self.values.clone())?)
    }

    /// Rebuilds the solver result, recomputing level and residual from the
    /// stored profile; `converged` compares the recomputed residual to `tol`.
    pub fn to_ground_state(&self, tol: f64) -> Result<GroundStateResult, relhartree::Error> {
        let profile = self.field()?;
        let p = &self.meta.params;
        let level = match self.meta.kind {
            ProblemKind::Action => action(&profile, p)?,
            ProblemKind::Energy => energy(&profile, p)?,
        };
        let residual_l2 = equation_residual(&profile, self.meta.multiplier, p)?;
        Ok(GroundStateResult {
            profile,
            kind: self.meta.kind,
            params: *p,
            level,
            multiplier: self.meta.multiplier,
            residual_l2,
            iterations: self.meta.iterations,
            converged: residual_l2 < tol,
            trace: Vec::new(),
        })
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut body = String::with_capacity(24 * (self.values.len() + 20));
        let _ = writeln!(body, "{MAGIC}");
        let _ = writeln!(body, "format = {FORMAT_VERSION}");
        let _ = writeln!(body, "kind = {}", m.kind);
        let _ = writeln!(body, "label = {}", m.label);
        let _ = writeln!(body, "grid_n = {}", m.grid_n);
        let _ = writeln!(body, "grid_radius = {}", m.grid_radius);
        let _ = writeln!(body, "mass = {}", m.params.mass);
        let _ = writeln!(body, "lambda = {}", m.params.lambda);
        let _ = writeln!(body, "c = {}", m.params.c);
        let _ = writeln!(body, "level = {:e}", m.level);
        let _ = writeln!(body, "multiplier = {:e}", m.multiplier);
        let _ = writeln!(body, "residual = {:e}", m.residual);
        let _ = writeln!(body, "iterations = {}", m.iterations);
        let _ = writeln!(body, "version = {}", m.version);
        let _ = writeln!(body, "values = {}", self.values.len());
        for v in &self.values {
            let _ = writeln!(body, "{v:.16e}");
        }
        let digest = hex(&Sha256::digest(body.as_bytes()));
        let _ = writeln!(body, "sha256 = {digest}");
        body
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let bad = |reason: String| CliError::data(path, reason);
        let footer_at = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| bad("truncated profile".into()))?;
        let (body, footer) = text.split_at(footer_at);
        let stored = footer
            .trim()
            .strip_prefix("sha256 = ")
            .ok_or_else(|| bad("missing sha256 footer".into()))?;
        let actual = hex(&Sha256::digest(body.as_bytes()));
        if stored != actual {
            return Err(bad(format!("hash mismatch: file says {stored}, content hashes to {actual}")));
        }
        let mut lines = body.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("not a relhartree profile".into()));
        }
        let mut header = std::collections::BTreeMap::new();
        for line in lines.by_ref() {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            header.insert(k.to_string(), v.to_string());
            if k == "values" {
                break;
            }
        }
        let get = |k: &str| header.get(k).map(String::as_str).ok_or_else(|| bad(format!("missing header key {k}")));
        fn num<T: std::str::FromStr>(k: &str, v: &str, bad: &dyn Fn(String) -> CliError) -> Result<T, CliError> {
            v.parse().map_err(|_| bad(format!("cannot parse {k} = {v:?}")))
        }
        let format: u32 = num("format", get("format")?, &bad)?;
        if format != FORMAT_VERSION {
            return Err(bad(format!("unsupported format {format}")));
        }
        let count: usize = num("values", get("values")?, &bad)?;
        let values: Vec<f64> = lines.map(|l| num("value", l, &bad)).collect::<Result<_, _>>()?;
        if values.len() != count {
            return Err(bad(format!("header announces {count} values, found {}", values.len())));
        }
        let c: SpeedOfLight = get("c")?.parse().map_err(|e: relhartree::Error| bad(e.to_string()))?;
        let meta = ProfileMeta {
            kind: get("kind")?.parse().map_err(|e: relhartree::Error| bad(e.to_string()))?,
            label: get("label")?.to_string(),
            grid_n: num("grid_n", get("grid_n")?, &bad)?,
            grid_radius: num("grid_radius", get("grid_radius")?, &bad)?,
            params: PhysicalParams {
                mass: num("mass", get("mass")?, &bad)?,
                lambda: num("lambda", get("lambda")?, &bad)?,
                c,
            },
            level: num("level", get("level")?, &bad)?,
            multiplier: num("multiplier", get("multiplier")?, &bad)?,
            residual: num("residual", get("residual")?, &bad)?,
            iterations: num("iterations", get("iterations")?, &bad)?,
            version: get("version")?.to_string(),
        };
        if meta.grid_n != values.len() {
            return Err(bad(format!("grid has {} nodes but {} values are stored", meta.grid_n, values.len())));
        }
        Ok(ProfileRecord { meta, values })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_profile(record: &ProfileRecord, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, record.to_text()).map_err(|e| CliError::io(path, e))
}

pub fn load_profile(path: &Path) -> Result<ProfileRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ProfileRecord::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ProfileRecord {
        let grid = RadialGrid::new(64, 8.0).unwrap();
        let field = RadialField::from_fn(grid, |r| (-r * r / 3.0).exp() / 7.0).unwrap();
        let meta = ProfileMeta {
            kind: ProblemKind::Energy,
            label: "ground_state".into(),
            grid_n: 64,
            grid_radius: 8.0,
            params: PhysicalParams::unit().with_c(SpeedOfLight::Finite(12.5)),
            level: -0.054,
            multiplier: 0.1627,
            residual: 3.1e-12,
            iterations: 42,
            version: "test".into(),
        };
        ProfileRecord {
            meta,
            values: field.values().to_vec(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prof");
        let rec = record();
        save_profile(&rec, &path).unwrap();
        let back = load_profile(&path).unwrap();
        assert_eq!(back, rec);
        for (a, b) in back.values.iter().zip(&rec.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let text = record().to_text();
        let p = Path::new("p.prof");
        // flip one digit of one value
        let i = text.find("e-1\n").unwrap() - 3;
        let mut bytes = text.clone().into_bytes();
        bytes[i] = if bytes[i] == b'1' { b'2' } else { b'1' };
        let err = ProfileRecord::parse(std::str::from_utf8(&bytes).unwrap(), p).unwrap_err();
        assert!(err.to_string().contains("hash mismatch"), "{err}");
        let truncated = &text[..text.len() / 2];
        assert!(ProfileRecord::parse(truncated, p).is_err());
        let no_footer = text.replace("sha256 = ", "sha = ");
        assert!(ProfileRecord::parse(&no_footer, p).unwrap_err().to_string().contains("footer"));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let rec = record();
        let other = RadialGrid::new(128, 8.0).unwrap();
        let err = rec.field_on(&other, Path::new("p.prof")).unwrap_err();
        assert!(err.to_string().contains("grid mismatch"));
        assert!(rec.field_on(&rec.grid().unwrap(), Path::new("p.prof")).is_ok());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_profile(Path::new("/nonexistent/p.prof")).unwrap_err();
        assert!(matches!(err, CliError::Io { .. }));
    }
}
