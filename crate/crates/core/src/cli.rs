//! `nfprecode` command line.
//!
//! Exit status: 0 on success, 1 for usage or validation errors, 2 for
//! numerical failures such as a rank-deficient ZF channel outside a sweep.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use crate::config::{Defaults, RawConfig, RUN_TABLE};
use crate::error::{Error, Result};
use crate::experiments::{
    run_contour, run_gain_profile, run_scenario, scenario_regions, write_contour_csv, write_gain_csv, OrderingStrategy,
    ScenarioMode, ScenarioOptions,
};
use crate::geometry::far_field_boundary;
use crate::region::DEFAULT_POINTS;

pub const WORKERS_ENV: &str = "NFPRECODE_WORKERS";
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(
    name = "nfprecode",
    version,
    about = "ZF vs. dirty paper coding for near-field multiuser MISO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two-user ZF and DPC rate regions with areas.
    Region(RunArgs),
    /// DPC−ZF sum-rate difference over a (d, s) grid.
    Contour(RunArgs),
    /// ZF costs α_k and DPC gains r_kk² against spacing s.
    Gains(RunArgs),
    /// Optimal ZF and DPC allocations for any number of users.
    Sumrate(RunArgs),
    /// Far-field (Fraunhofer) distance 2·D²/λ.
    Ffboundary {
        /// Aperture D.
        #[arg(long)]
        aperture: f64,
        /// Wavelength, in the same unit as the aperture.
        #[arg(long)]
        wavelength: f64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Samples along each region boundary.
    #[arg(long)]
    points: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Use the channel-norm ordering instead of searching all orders.
    #[arg(long)]
    greedy: bool,
    /// Also write time-sharing (convex hull) regions.
    #[arg(long)]
    hull: bool,

    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    wavelength: Option<f64>,
    /// colinear, coplanar or explicit.
    #[arg(long)]
    layout: Option<String>,
    /// Distance, or a range start:stop:count / log:start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    /// Inter-user spacing, or a range.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long)]
    pt: Option<f64>,
    #[arg(long)]
    noise_power: Option<f64>,
}

impl RunArgs {
    fn raw_config(&self) -> Result<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::new(),
        };
        for o in &self.overrides {
            raw.apply_override(o)?;
        }
        let int = |v: usize| Value::Integer(v as i64);
        let flags: [(&str, Option<Value>); 11] = [
            ("nx", self.nx.map(int)),
            ("ny", self.ny.map(int)),
            ("spacing", self.spacing.map(Value::Float)),
            ("wavelength", self.wavelength.map(Value::Float)),
            ("layout", self.layout.clone().map(Value::String)),
            ("d", self.d.clone().map(Value::String)),
            ("s", self.s.clone().map(Value::String)),
            ("pt", self.pt.map(Value::Float)),
            ("noise_power", self.noise_power.map(Value::Float)),
            ("points", self.points.map(int)),
            ("ordering", self.greedy.then(|| Value::String("greedy".into()))),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set_value(key, v)?;
            }
        }
        if self.hull {
            raw.set_value("hull", Value::Boolean(true))?;
        }
        Ok(raw)
    }

    fn workers(&self) -> usize {
        self.workers
            .filter(|w| *w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ffboundary { aperture, wavelength } => {
            let r = far_field_boundary(aperture, wavelength)?;
            say(out, format_args!("{r}"))
        }
        Command::Region(args) => region(&args, out),
        Command::Sumrate(args) => sumrate(&args, out),
        Command::Contour(args) => contour(&args, out),
        Command::Gains(args) => gains(&args, out),
    }
}

fn say(out: &mut dyn Write, args: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{args}").map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn region(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let raw = args.raw_config()?;
    let defaults = Defaults::scenario();
    let cfg = raw.scenario(&defaults)?;
    let opts = ScenarioOptions {
        points: raw.points(DEFAULT_POINTS)?,
        ordering: OrderingStrategy::Exhaustive,
        hull: raw.hull()?,
    };
    // regions are cheap relative to the channel; trace them once for the
    // printed summary and once more through the writer
    let report = scenario_regions(&cfg, opts.points)?;
    let files = run_scenario(&cfg, ScenarioMode::Region, &opts, &args.out_dir)?;
    write_manifest(&args.out_dir, "region", raw.resolved(&defaults, false)?, &files)?;

    let zf = &report.zf;
    say(
        out,
        format_args!(
            "ZF:  r1_max {:.4}  r2_max {:.4}  area {:.4}",
            zf.r1_max, zf.r2_max, zf.area
        ),
    )?;
    for (i, reg) in report.dpc.iter().enumerate() {
        let tag = if i == report.primary {
            " (stronger user first)"
        } else {
            ""
        };
        say(
            out,
            format_args!(
                "DPC {}{tag}: r1_max {:.4}  r2_max {:.4}  area {:.4}  improvement {:.2}%",
                reg.order,
                reg.r1_max,
                reg.r2_max,
                reg.area,
                crate::region::area_improvement(reg, zf)?
            ),
        )?;
    }
    say(
        out,
        format_args!("wrote {} files to {}", files.len() + 1, args.out_dir.display()),
    )
}

fn sumrate(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let raw = args.raw_config()?;
    let defaults = Defaults::scenario();
    let cfg = raw.scenario(&defaults)?;
    let opts = ScenarioOptions {
        points: DEFAULT_POINTS,
        ordering: raw.ordering()?,
        hull: false,
    };
    let files = run_scenario(&cfg, ScenarioMode::SumRate, &opts, &args.out_dir)?;
    write_manifest(&args.out_dir, "sumrate", raw.resolved(&defaults, false)?, &files)?;
    let text = std::fs::read_to_string(&files[0]).map_err(|source| Error::Io {
        path: files[0].clone(),
        source,
    })?;
    say(out, format_args!("{}", text.trim_end()))
}

fn contour(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let raw = args.raw_config()?;
    let defaults = Defaults::contour();
    let grid = raw.sweep(&defaults)?;
    let cells = run_contour(&grid, args.workers())?;
    let path = args.out_dir.join("contour.csv");
    create_dir(&args.out_dir)?;
    write_contour_csv(&cells, crate::experiments::create(&path)?)?;
    write_manifest(
        &args.out_dir,
        "contour",
        raw.resolved(&defaults, true)?,
        std::slice::from_ref(&path),
    )?;
    let ok: Vec<f64> = cells.iter().filter_map(|c| c.diff).collect();
    let min = ok.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ok.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    say(
        out,
        format_args!(
            "{} cells ({} rank deficient), DPC−ZF in [{min:.6}, {max:.6}] bits/use; wrote {}",
            cells.len(),
            cells.len() - ok.len(),
            path.display()
        ),
    )
}

fn gains(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let raw = args.raw_config()?;
    let defaults = Defaults::gains();
    let (d, s_values) = raw.gain_profile(&defaults)?;
    let array = raw.array(&defaults)?;
    let rows = run_gain_profile(
        d,
        &s_values,
        &array,
        raw.pt(&defaults)?,
        raw.layout_kind(&defaults)?,
        args.workers(),
    )?;
    let path = args.out_dir.join("gains.csv");
    create_dir(&args.out_dir)?;
    write_gain_csv(&rows, crate::experiments::create(&path)?)?;
    write_manifest(
        &args.out_dir,
        "gains",
        raw.resolved(&defaults, true)?,
        std::slice::from_ref(&path),
    )?;
    say(out, format_args!("{} rows; wrote {}", rows.len(), path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Resolved config at top level plus a `[run]` table naming the command and
/// the artifacts. Loading the manifest as a config reproduces the run.
fn write_manifest(dir: &Path, command: &str, mut config: Table, files: &[PathBuf]) -> Result<()> {
    let artifacts = files
        .iter()
        .map(|p| {
            Value::String(
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        })
        .collect();
    let mut run = Table::new();
    run.insert("command".into(), Value::String(command.into()));
    run.insert("artifacts".into(), Value::Array(artifacts));
    config.insert(RUN_TABLE.into(), Value::Table(run));
    let text = toml::to_string(&config).map_err(|e| Error::config("<manifest>", e.to_string()))?;
    let path = dir.join(MANIFEST);
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}
