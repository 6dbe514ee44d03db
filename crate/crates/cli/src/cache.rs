//! On-disk cache of limit ground states, keyed by everything that affects
//! the solve.

use std::path::{Path, PathBuf};

use relhartree::ground_state::{solve, GroundStateResult, ProblemKind, SolverOptions};
use relhartree::{PhysicalParams, SpeedOfLight};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::profile::{hex, load_profile, save_profile, ProfileRecord};

pub const CACHE_ENV: &str = "RELHARTREE_CACHE_DIR";

/// `$RELHARTREE_CACHE_DIR` if set, else `cache/` under the output directory.
pub fn cache_dir(out_dir: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out_dir.join("cache"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Stored,
    Disabled,
}

pub fn cache_key(kind: ProblemKind, params: &PhysicalParams, opts: &SolverOptions) -> String {
    let text = format!(
        "v1|{kind}|m={}|lambda={}|N={}|R={}|tol={}|newton={}|damping={}|sigma={}",
        params.mass,
        params.lambda,
        opts.grid.len(),
        opts.grid.radius(),
        opts.tol,
        opts.newton,
        opts.damping,
        opts.sigma_factor
    );
    hex(&Sha256::digest(text.as_bytes()))[..16].to_string()
}

/// The `c = ∞` ground state, from `dir` when present and otherwise solved and
/// stored there. `dir = None` disables the cache.
pub fn limit_ground_state(
    kind: ProblemKind,
    params: &PhysicalParams,
    opts: &SolverOptions,
    dir: Option<&Path>,
) -> Result<(GroundStateResult, CacheStatus), CliError> {
    let limit = params.with_c(SpeedOfLight::Infinite);
    let Some(dir) = dir else {
        return Ok((solve(kind, &limit, opts)?, CacheStatus::Disabled));
    };
    let path = dir.join(format!("limit-{kind}-{}.prof", cache_key(kind, &limit, opts)));
    if path.exists() {
        let rec = load_profile(&path)?;
        rec.field_on(&opts.grid, &path)?;
        if rec.meta.kind != kind || rec.meta.params != limit {
            return Err(CliError::data(&path, "cached profile does not match its key"));
        }
        let gs = rec.to_ground_state(opts.tol)?;
        if !gs.converged {
            return Err(CliError::data(
                &path,
                format!("cached profile fails the residual recheck ({:.3e})", gs.residual_l2),
            ));
        }
        return Ok((gs, CacheStatus::Hit));
    }
    let gs = solve(kind, &limit, opts)?;
    save_profile(&ProfileRecord::from_ground_state(&gs), &path)?;
    Ok((gs, CacheStatus::Stored))
}
