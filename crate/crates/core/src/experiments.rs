//! Batch drivers: DPC−ZF contour sweeps over `(D, s)`, `α_k`/`r_kk²`
//! gain profiles, and single-scenario runs that write CSV artifacts.
//!
//! Grid cells are independent; they are evaluated on a worker pool and
//! collected in input order, so the emitted files do not depend on the
//! number of workers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::{build_channel, channel_between, ScenarioConfig};
use crate::dpc::{best_order_exhaustive, best_order_greedy, DpcSolution, EncodingOrder, DEFAULT_EXHAUSTIVE_CAP};
use crate::error::{Error, Result};
use crate::geometry::{build_array, build_users, ArrayConfig, LayoutKind, Position, UserLayout};
use crate::region::{area_improvement, dpc_region, region_union, zf_region, RateRegion};
use crate::zf::build_zf;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub d_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub array: ArrayConfig,
    pub layout: LayoutKind,
    pub pt: f64,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        if self.layout == LayoutKind::Explicit {
            return Err(Error::invalid("layout", "sweeps need a colinear or coplanar layout"));
        }
        if self.d_values.is_empty() {
            return Err(Error::invalid("d", "empty sweep axis"));
        }
        if self.s_values.is_empty() {
            return Err(Error::invalid("s", "empty sweep axis"));
        }
        if let Some(d) = self.d_values.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("d", format!("distances must be positive, got {d}")));
        }
        if let Some(s) = self.s_values.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("s", format!("spacings must be non-negative, got {s}")));
        }
        if !(self.pt > 0.0 && self.pt.is_finite()) {
            return Err(Error::invalid("pt", format!("must be positive, got {}", self.pt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    ZfRankDeficient,
}

impl CellStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::ZfRankDeficient => "zf_rank_deficient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub d: f64,
    pub s: f64,
    /// Absent when ZF is rank deficient.
    pub zf_sum_rate: Option<f64>,
    pub dpc_sum_rate: f64,
    pub diff: Option<f64>,
    pub status: CellStatus,
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    Ok(pool.install(job))
}

/// One contour cell, computed from scratch on the given element positions.
pub fn evaluate_cell(elements: &[Position], grid: &SweepGrid, d: f64, s: f64) -> Result<SweepCell> {
    let users = build_users(&UserLayout::pair(grid.layout, d, s)?)?;
    let h = channel_between(elements, &users, grid.array.wavelength)?;
    let dpc = best_order_exhaustive(&h, grid.pt)?.sum_rate;
    let cell = match build_zf(&h) {
        Ok(zf) => {
            let zf_rate = zf.allocate(grid.pt)?.sum_rate;
            SweepCell {
                d,
                s,
                zf_sum_rate: Some(zf_rate),
                dpc_sum_rate: dpc,
                diff: Some(dpc - zf_rate),
                status: CellStatus::Ok,
            }
        }
        Err(Error::RankDeficient { .. }) => SweepCell {
            d,
            s,
            zf_sum_rate: None,
            dpc_sum_rate: dpc,
            diff: None,
            status: CellStatus::ZfRankDeficient,
        },
        Err(e) => return Err(e),
    };
    Ok(cell)
}

/// Row-major over the grid: `d` outer, `s` inner.
pub fn run_contour(grid: &SweepGrid, workers: usize) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let elements = build_array(&grid.array)?;
    let points: Vec<(f64, f64)> = grid
        .d_values
        .iter()
        .flat_map(|&d| grid.s_values.iter().map(move |&s| (d, s)))
        .collect();
    with_workers(workers, || {
        points
            .par_iter()
            .map(|&(d, s)| evaluate_cell(&elements, grid, d, s))
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn write_contour_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "s", "zf_sum_rate", "dpc_sum_rate", "diff", "status"])?;
    for c in cells {
        w.write_record([
            c.d.to_string(),
            c.s.to_string(),
            opt(c.zf_sum_rate),
            c.dpc_sum_rate.to_string(),
            opt(c.diff),
            c.status.name().to_string(),
        ])?;
    }
    flush(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub s: f64,
    /// ZF costs `α_1, α_2`; absent when ZF is rank deficient.
    pub alpha: Option<[f64; 2]>,
    /// `r_11², r_22²` under the sum-rate optimal order.
    pub diag_gains: [f64; 2],
    pub order: EncodingOrder,
}

impl GainRow {
    pub fn status(&self) -> CellStatus {
        if self.alpha.is_some() {
            CellStatus::Ok
        } else {
            CellStatus::ZfRankDeficient
        }
    }
}

/// `α_k` and `r_kk²` against inter-user spacing at fixed range `d`.
/// Rows come out in ascending `s`.
pub fn run_gain_profile(
    d: f64,
    s_values: &[f64],
    array: &ArrayConfig,
    pt: f64,
    layout: LayoutKind,
    workers: usize,
) -> Result<Vec<GainRow>> {
    let grid = SweepGrid {
        d_values: vec![d],
        s_values: s_values.to_vec(),
        array: *array,
        layout,
        pt,
    };
    grid.validate()?;
    let mut s_sorted = grid.s_values.clone();
    s_sorted.sort_by(f64::total_cmp);
    let elements = build_array(array)?;
    with_workers(workers, || {
        s_sorted
            .par_iter()
            .map(|&s| {
                let users = build_users(&UserLayout::pair(layout, d, s)?)?;
                let h = channel_between(&elements, &users, array.wavelength)?;
                let best = best_order_exhaustive(&h, pt)?;
                let alpha = match build_zf(&h) {
                    Ok(zf) => Some([zf.alpha[0], zf.alpha[1]]),
                    Err(Error::RankDeficient { .. }) => None,
                    Err(e) => return Err(e),
                };
                let g = &best.decomposition.diag_gains;
                Ok(GainRow {
                    s,
                    alpha,
                    diag_gains: [g[0], g[1]],
                    order: best.order().clone(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn write_gain_csv<W: Write>(rows: &[GainRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "alpha_1", "alpha_2", "r11_sq", "r22_sq", "order"])?;
    for r in rows {
        w.write_record([
            r.s.to_string(),
            opt(r.alpha.map(|a| a[0])),
            opt(r.alpha.map(|a| a[1])),
            r.diag_gains[0].to_string(),
            r.diag_gains[1].to_string(),
            r.order.to_string(),
        ])?;
    }
    flush(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    Region,
    SumRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingStrategy {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioOptions {
    pub points: usize,
    pub ordering: OrderingStrategy,
    /// Also emit time-sharing (convex hull) regions.
    pub hull: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            points: crate::region::DEFAULT_POINTS,
            ordering: OrderingStrategy::Exhaustive,
            hull: false,
        }
    }
}

/// All regions traced for a two-user scenario.
#[derive(Debug, Clone)]
pub struct RegionReport {
    pub zf: RateRegion,
    /// One per encoding order, lexicographic.
    pub dpc: Vec<RateRegion>,
    pub union: RateRegion,
    /// Index into `dpc` of the stronger-user-first order.
    pub primary: usize,
}

impl RegionReport {
    pub fn primary_dpc(&self) -> &RateRegion {
        &self.dpc[self.primary]
    }
}

/// Rate regions for a two-user scenario, with powers normalised to the
/// noise variance.
pub fn scenario_regions(cfg: &ScenarioConfig, points: usize) -> Result<RegionReport> {
    cfg.validate()?;
    let h = build_channel(cfg)?;
    if h.k_users() != 2 {
        return Err(Error::UserCount {
            expected: 2,
            got: h.k_users(),
        });
    }
    let snr = cfg.snr();
    let zf = zf_region(&h, snr, points)?;
    let orders: Vec<EncodingOrder> = EncodingOrder::all(2).collect();
    let dpc = orders
        .iter()
        .map(|o| dpc_region(&h, snr, o, points))
        .collect::<Result<Vec<_>>>()?;
    let union = region_union(&dpc)?;
    let strong_first = crate::dpc::greedy_order(&h);
    let primary = orders.iter().position(|o| *o == strong_first).unwrap_or(0);
    Ok(RegionReport {
        zf,
        dpc,
        union,
        primary,
    })
}

/// Both schemes' optimal allocations for any `K`.
#[derive(Debug, Clone)]
pub struct SumRateReport {
    /// Indexed by user. `None` when ZF is rank deficient.
    pub zf: Option<crate::waterfill::PowerAllocation>,
    pub dpc: DpcSolution,
    pub noise_power: f64,
}

pub fn scenario_sum_rates(cfg: &ScenarioConfig, ordering: OrderingStrategy) -> Result<SumRateReport> {
    cfg.validate()?;
    let h = build_channel(cfg)?;
    let snr = cfg.snr();
    let dpc = match ordering {
        OrderingStrategy::Exhaustive => {
            if h.k_users() > DEFAULT_EXHAUSTIVE_CAP {
                return Err(Error::CapExceeded {
                    users: h.k_users(),
                    cap: DEFAULT_EXHAUSTIVE_CAP,
                });
            }
            best_order_exhaustive(&h, snr)?
        }
        OrderingStrategy::Greedy => best_order_greedy(&h, snr)?,
    };
    let zf = match build_zf(&h) {
        Ok(zf) => Some(zf.allocate(snr)?),
        Err(Error::RankDeficient { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SumRateReport {
        zf,
        dpc,
        noise_power: cfg.noise_power,
    })
}

/// Runs one scenario and writes its artifacts into `out_dir`; returns the
/// written paths in emission order.
///
/// Region mode writes `zf_region.csv`, `dpc_region_<order>.csv` per order,
/// `dpc_region_union.csv` and `region_summary.csv`. Sum-rate mode writes
/// `sumrate.csv`. Rank-deficient ZF is an error in region mode and an
/// empty ZF block in sum-rate mode.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    mode: ScenarioMode,
    opts: &ScenarioOptions,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    match mode {
        ScenarioMode::Region => {
            let report = scenario_regions(cfg, opts.points)?;
            let mut emit = |name: String, region: &RateRegion| -> Result<()> {
                let path = out_dir.join(name);
                region.write_csv(create(&path)?)?;
                written.push(path);
                Ok(())
            };
            emit("zf_region.csv".into(), &report.zf)?;
            for reg in &report.dpc {
                emit(format!("dpc_region_{}.csv", reg.order), reg)?;
            }
            emit("dpc_region_union.csv".into(), &report.union)?;
            if opts.hull {
                emit("zf_region_hull.csv".into(), &report.zf.convex_hull())?;
                emit("dpc_region_union_hull.csv".into(), &report.union.convex_hull())?;
            }
            let path = out_dir.join("region_summary.csv");
            write_region_summary(&report, create(&path)?)?;
            written.push(path);
        }
        ScenarioMode::SumRate => {
            let report = scenario_sum_rates(cfg, opts.ordering)?;
            let path = out_dir.join("sumrate.csv");
            write_sumrate_csv(&report, create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Header `scheme,order,r1_max,r2_max,area,improvement_pct`; improvement is
/// relative to the ZF area and empty on the ZF row. The row marked
/// `primary` in the last column is the stronger-user-first DPC order.
pub fn write_region_summary<W: Write>(report: &RegionReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "order",
        "r1_max",
        "r2_max",
        "area",
        "improvement_pct",
        "primary",
    ])?;
    let mut rows: Vec<(&RateRegion, bool)> = vec![(&report.zf, false)];
    rows.extend(report.dpc.iter().enumerate().map(|(i, r)| (r, i == report.primary)));
    rows.push((&report.union, false));
    for (reg, primary) in rows {
        let improvement = if std::ptr::eq(reg, &report.zf) {
            String::new()
        } else {
            area_improvement(reg, &report.zf)?.to_string()
        };
        w.write_record([
            reg.scheme.name().to_string(),
            reg.order.to_string(),
            reg.r1_max.to_string(),
            reg.r2_max.to_string(),
            reg.area.to_string(),
            improvement,
            primary.to_string(),
        ])?;
    }
    flush(w)
}

/// Header `scheme,order,user,q,rate,sum_rate`, one row per scheme and user
/// in natural user order. Powers are in transmit units (scaled back by the
/// noise variance).
pub fn write_sumrate_csv<W: Write>(report: &SumRateReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "order", "user", "q", "rate", "sum_rate"])?;
    if let Some(zf) = &report.zf {
        for (k, (q, r)) in zf.q.iter().zip(&zf.rates).enumerate() {
            w.write_record([
                "zf".to_string(),
                String::new(),
                (k + 1).to_string(),
                (q * report.noise_power).to_string(),
                r.to_string(),
                zf.sum_rate.to_string(),
            ])?;
        }
    }
    let order = report.dpc.order().to_string();
    for (k, (q, r)) in report.dpc.user_powers().iter().zip(report.dpc.user_rates()).enumerate() {
        w.write_record([
            "dpc".to_string(),
            order.clone(),
            (k + 1).to_string(),
            (q * report.noise_power).to_string(),
            r.to_string(),
            report.dpc.sum_rate.to_string(),
        ])?;
    }
    flush(w)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
