use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use relhartree::acceptance::Acceptance;
use relhartree::expansion::{build_action_expansion, build_energy_expansion};
use relhartree::ground_state::{solve, ProblemKind};
use relhartree::harness::{default_expectations, sweep_with_series, verify_rates};

use crate::cache::{cache_dir, limit_ground_state, CacheStatus};
use crate::config::{read_file, Entry, Format, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};
use crate::profile::{load_profile, save_profile, ProfileRecord};
use crate::report::{write_fits_csv, write_json, write_svg, write_sweep_csv};

#[derive(Parser, Debug)]
#[command(name = "relhartree", version, about = "Ground states of the pseudo-relativistic Hartree equation and their 1/c² expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one ground-state problem and write its profile
    Groundstate {
        #[command(flatten)]
        common: Common,
        /// Warm start from a stored profile on the same grid
        #[arg(long)]
        initial: Option<PathBuf>,
        /// Profile path (default: <out>/groundstate-<kind>-c<c>.prof)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build the expansion around the c = inf state and write its terms
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        order: Option<String>,
    },
    /// Run the convergence-rate study over c
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        order: Option<String>,
        /// Comma-separated list, e.g. 10,20,40
        #[arg(long)]
        c_values: Option<String>,
        /// Geometric range lo:hi:ratio
        #[arg(long)]
        c_range: Option<String>,
        /// Comma-separated Sobolev indices
        #[arg(long)]
        sobolev: Option<String>,
        /// Comma-separated subset of csv, json, svg
        #[arg(long)]
        formats: Option<String>,
    },
    /// Run the acceptance criteria
    Verify {
        #[command(flatten)]
        common: Common,
        /// fast or full
        #[arg(long)]
        suite: Option<String>,
    },
}

/// Flags shared by every subcommand. Values are kept as text and parsed with
/// the config file so that errors read the same either way.
#[derive(Args, Debug)]
struct Common {
    /// `key = value` file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// action or energy
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    mass: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Speed of light, a number or inf
    #[arg(long)]
    c: Option<String>,
    /// Number of radial nodes
    #[arg(long)]
    grid_n: Option<String>,
    /// Radius of the computational ball
    #[arg(long)]
    grid_radius: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    damping: Option<String>,
    /// Skip the final Newton steps
    #[arg(long)]
    no_newton: bool,
    /// Start every solve of a sweep from scratch
    #[arg(long)]
    cold_start: bool,
    /// Worker threads for sweeps, or auto
    #[arg(long)]
    threads: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not read or write the ground-state cache
    #[arg(long)]
    no_cache: bool,
    /// Any config key, as KEY=VALUE; may repeat
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn entries(&self) -> Result<Vec<Entry>, CliError> {
        let mut out = match &self.config {
            Some(path) => read_file(path)?,
            None => Vec::new(),
        };
        let flags = [
            ("kind", &self.kind),
            ("mass", &self.mass),
            ("lambda", &self.lambda),
            ("c", &self.c),
            ("grid_n", &self.grid_n),
            ("grid_radius", &self.grid_radius),
            ("tol", &self.tol),
            ("max_iterations", &self.max_iterations),
            ("damping", &self.damping),
            ("threads", &self.threads),
        ];
        out.extend(flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| Entry::flag(k, v.clone()))));
        if let Some(dir) = &self.out {
            out.push(Entry::flag("out_dir", dir.to_string_lossy()));
        }
        if self.no_newton {
            out.push(Entry::flag("newton", "false"));
        }
        if self.cold_start {
            out.push(Entry::flag("warm_start", "false"));
        }
        if self.no_cache {
            out.push(Entry::flag("cache", "false"));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            out.push(Entry::flag(k.trim(), v.trim()));
        }
        Ok(out)
    }
}

fn config(common: &Common, extra: &[(&str, &Option<String>)]) -> Result<RunConfig, CliError> {
    let mut entries = common.entries()?;
    entries.extend(extra.iter().filter_map(|(k, v)| v.as_ref().map(|v| Entry::flag(k, v.clone()))));
    RunConfig::from_entries(&entries)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn cache_for(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.cache.then(|| cache_dir(&cfg.out_dir))
}

fn groundstate(cfg: &RunConfig, initial: Option<&Path>, output: Option<PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut opts = cfg.solver_options()?;
    if let Some(path) = initial {
        opts.initial = Some(load_profile(path)?.field_on(&opts.grid, path)?);
    }
    let gs = solve(cfg.kind, &cfg.params, &opts)?;
    let path = output.unwrap_or_else(|| cfg.out_dir.join(format!("groundstate-{}-c{}.prof", cfg.kind, cfg.params.c)));
    save_profile(&ProfileRecord::from_ground_state(&gs), &path)?;
    let back = load_profile(&path)?.to_ground_state(cfg.tol)?;
    let _ = writeln!(
        out,
        "{} ground state at c = {}: level {:.12e}, multiplier {:.12e}, residual {:.3e}, {} iterations",
        gs.kind, cfg.params.c, gs.level, gs.multiplier, gs.residual_l2, gs.iterations
    );
    let _ = writeln!(out, "wrote {} (reload residual {:.3e})", path.display(), back.residual_l2);
    if !gs.converged || !back.converged {
        return Err(CliError::CheckFailed(format!(
            "stored profile misses the tolerance {:.1e}: residual {:.3e}",
            cfg.tol, back.residual_l2
        )));
    }
    Ok(())
}

fn expand(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = cfg.solver_options()?;
    let (base, status) = limit_ground_state(cfg.kind, &cfg.params, &opts, cache_for(cfg).as_deref())?;
    let series = match cfg.kind {
        ProblemKind::Action => build_action_expansion(&base, cfg.order)?,
        ProblemKind::Energy => build_energy_expansion(&base, cfg.order)?,
    };
    let dir = cfg.out_dir.join(format!("series-{}", cfg.kind));
    create_dir(&dir)?;
    let base_rec = ProfileRecord::from_ground_state(&base);
    save_profile(&base_rec, &dir.join("f0.prof"))?;
    for (j, f) in series.corrections.iter().enumerate() {
        let label = format!("correction_{}", j + 1);
        save_profile(&ProfileRecord::from_field(&base_rec.meta, &label, f), &dir.join(format!("f{}.prof", j + 1)))?;
    }
    let residuals = series.relative_residuals()?;
    let meta = serde_json::json!({
        "kind": cfg.kind.to_string(),
        "mass": cfg.params.mass,
        "lambda": cfg.params.lambda,
        "grid_n": cfg.grid_n,
        "grid_radius": cfg.grid_radius,
        "order": series.order,
        "base_level": base.level,
        "base_multiplier": base.multiplier,
        "a": series.a,
        "b": series.b,
        "retained_modes": series.retained_modes,
        "relative_residuals": residuals,
    });
    let path = dir.join("series.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("plain data") + "\n").map_err(|e| CliError::io(&path, e))?;
    let _ = writeln!(
        out,
        "{} series to order {} ({}): a = {:?}, b = {:?}, relative residuals {:?}",
        cfg.kind,
        series.order,
        if status == CacheStatus::Hit { "cached base" } else { "fresh base" },
        series.a,
        series.b,
        residuals
    );
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sc = cfg.sweep_config()?;
    let (base, _) = limit_ground_state(cfg.kind, &cfg.params, &sc.solver, cache_for(cfg).as_deref())?;
    let series = match cfg.kind {
        ProblemKind::Action => build_action_expansion(&base, cfg.order)?,
        ProblemKind::Energy => build_energy_expansion(&base, cfg.order)?,
    };
    let report = sweep_with_series(&sc, &series)?;
    let verdicts = verify_rates(&report, &default_expectations(&report));
    create_dir(&cfg.out_dir)?;
    let stem = format!("sweep-{}", cfg.kind);
    for f in &cfg.formats {
        let path = match f {
            Format::Csv => {
                write_fits_csv(&verdicts, &cfg.out_dir.join(format!("{stem}-fits.csv")))?;
                let p = cfg.out_dir.join(format!("{stem}.csv"));
                write_sweep_csv(&report, &p)?;
                p
            }
            Format::Json => {
                let p = cfg.out_dir.join(format!("{stem}.json"));
                write_json(&report, &verdicts, &p)?;
                p
            }
            Format::Svg => {
                let p = cfg.out_dir.join(format!("{stem}.svg"));
                write_svg(&report, &verdicts, &p)?;
                p
            }
        };
        let _ = writeln!(out, "wrote {}", path.display());
    }
    for v in &verdicts {
        let _ = writeln!(out, "{v}");
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} rate expectations failed", verdicts.len())));
    }
    Ok(())
}

fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let acc = Acceptance::new(cfg.solver_options()?);
    let mut failed = Vec::new();
    for &id in cfg.suite.criteria() {
        let r = acc.run(id);
        let _ = writeln!(out, "{r}");
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("criteria {failed:?} failed")))
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Groundstate { common, initial, output } => {
            let cfg = config(&common, &[])?;
            groundstate(&cfg, initial.as_deref(), output, out)
        }
        Command::Expand { common, order } => expand(&config(&common, &[("order", &order)])?, out),
        Command::Sweep { common, order, c_values, c_range, sobolev, formats } => {
            let cfg = config(
                &common,
                &[
                    ("order", &order),
                    ("c_range", &c_range),
                    ("c_values", &c_values),
                    ("sobolev", &sobolev),
                    ("formats", &formats),
                ],
            )?;
            sweep(&cfg, out)
        }
        Command::Verify { common, suite } => verify(&config(&common, &[("suite", &suite)])?, out),
    }
}

/// Runs the command line and returns the process exit code: 0 success,
/// 1 failed check, 2 usage or configuration, 3 I/O or stored data,
/// 4 computation.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
