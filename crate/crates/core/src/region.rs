//! Two-user achievable rate regions.
//!
//! Boundaries are traced by sweeping the power split `t ∈ [0, 1]` on a
//! uniform grid with the whole budget spent at every sample. Areas are
//! trapezoidal integrals of `r2` over `r1` on the raw boundary; no
//! time-sharing hull is taken unless [`RateRegion::convex_hull`] is asked
//! for explicitly.

use std::fmt;
use std::io::Write;

use crate::channel::ChannelMatrix;
use crate::dpc::{decompose, EncodingOrder};
use crate::error::{Error, Result};
use crate::waterfill::rate;
use crate::zf::build_zf;

pub const DEFAULT_POINTS: usize = 4001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Zf,
    Dpc,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Zf => "zf",
            Scheme::Dpc => "dpc",
        }
    }
}

/// Which DPC ordering a region was traced with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RegionOrder {
    None,
    Order(EncodingOrder),
    Union,
}

impl fmt::Display for RegionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionOrder::None => Ok(()),
            RegionOrder::Order(o) => write!(f, "{o}"),
            RegionOrder::Union => f.write_str("union"),
        }
    }
}

/// Power split that produced a boundary point: sweep parameter and the
/// per-user powers in natural user order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub t: f64,
    pub q: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    pub scheme: Scheme,
    pub order: RegionOrder,
    /// Sorted by `r1` ascending; `r2` is then non-increasing.
    pub boundary: Vec<RatePoint>,
    /// Parallel to `boundary`; absent for derived regions such as unions.
    pub splits: Vec<Option<PowerSplit>>,
    pub area: f64,
    pub r1_max: f64,
    pub r2_max: f64,
}

impl RateRegion {
    fn from_samples(scheme: Scheme, order: RegionOrder, mut samples: Vec<(RatePoint, Option<PowerSplit>)>) -> Self {
        samples.sort_by(|a, b| a.0.r1.total_cmp(&b.0.r1).then(b.0.r2.total_cmp(&a.0.r2)));
        let (boundary, splits): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
        let area = trapezoid_area(&boundary);
        let r1_max = boundary.iter().map(|p| p.r1).fold(0.0, f64::max);
        let r2_max = boundary.iter().map(|p| p.r2).fold(0.0, f64::max);
        RateRegion {
            scheme,
            order,
            boundary,
            splits,
            area,
            r1_max,
            r2_max,
        }
    }

    /// Upper `r2` on the boundary at abscissa `r1`, linearly interpolated;
    /// `None` beyond the region's extent.
    pub fn r2_at(&self, r1: f64) -> Option<f64> {
        let b = &self.boundary;
        let i = b.partition_point(|p| p.r1 < r1);
        if i == b.len() {
            return None;
        }
        if b[i].r1 == r1 {
            return Some(b[i].r2);
        }
        if i == 0 {
            return None;
        }
        let (a, c) = (b[i - 1], b[i]);
        let w = (r1 - a.r1) / (c.r1 - a.r1);
        Some(a.r2 + w * (c.r2 - a.r2))
    }

    /// Time-sharing region: the upper concave hull of the boundary together
    /// with the axis endpoints.
    pub fn convex_hull(&self) -> RateRegion {
        let mut hull: Vec<RatePoint> = Vec::new();
        for &p in &self.boundary {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                let cross = (b.r1 - a.r1) * (p.r2 - a.r2) - (b.r2 - a.r2) * (p.r1 - a.r1);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let samples = hull.into_iter().map(|p| (p, None)).collect();
        RateRegion::from_samples(self.scheme, self.order.clone(), samples)
    }

    /// Region CSV: header `scheme,order,t,q1,q2,r1,r2`. Split columns are
    /// empty for derived regions.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "order", "t", "q1", "q2", "r1", "r2"])?;
        let order = self.order.to_string();
        for (p, split) in self.boundary.iter().zip(&self.splits) {
            let (t, q1, q2) = match split {
                Some(s) => (s.t.to_string(), s.q[0].to_string(), s.q[1].to_string()),
                None => Default::default(),
            };
            w.write_record([
                self.scheme.name(),
                &order,
                &t,
                &q1,
                &q2,
                &p.r1.to_string(),
                &p.r2.to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<region csv>".into(),
            source,
        })?;
        Ok(())
    }
}

fn trapezoid_area(boundary: &[RatePoint]) -> f64 {
    boundary
        .windows(2)
        .map(|w| 0.5 * (w[1].r1 - w[0].r1) * (w[0].r2 + w[1].r2))
        .sum()
}

fn check_two_users(h: &ChannelMatrix) -> Result<()> {
    if h.k_users() != 2 {
        return Err(Error::UserCount {
            expected: 2,
            got: h.k_users(),
        });
    }
    Ok(())
}

fn check_points(m_points: usize) -> Result<()> {
    if m_points < 3 {
        return Err(Error::invalid(
            "points",
            format!("need at least 3 samples, got {m_points}"),
        ));
    }
    Ok(())
}

fn split_grid(m_points: usize) -> impl Iterator<Item = f64> {
    (0..m_points).map(move |i| i as f64 / (m_points - 1) as f64)
}

/// ZF region from the single-user costs `α_k`:
/// `q = (t·pt/α_1, (1−t)·pt/α_2)`.
pub fn zf_region(h: &ChannelMatrix, pt: f64, m_points: usize) -> Result<RateRegion> {
    check_two_users(h)?;
    check_points(m_points)?;
    let zf = build_zf(h)?;
    Ok(zf_region_from_costs([zf.alpha[0], zf.alpha[1]], pt, m_points))
}

pub(crate) fn zf_region_from_costs(alpha: [f64; 2], pt: f64, m_points: usize) -> RateRegion {
    let samples = split_grid(m_points)
        .map(|t| {
            let q = [t * pt / alpha[0], (1.0 - t) * pt / alpha[1]];
            (
                RatePoint {
                    r1: rate(1.0, q[0]),
                    r2: rate(1.0, q[1]),
                },
                Some(PowerSplit { t, q }),
            )
        })
        .collect();
    RateRegion::from_samples(Scheme::Zf, RegionOrder::None, samples)
}

/// DPC region for a fixed encoding order: the first-encoded user gets
/// `t·pt`, the second `(1−t)·pt`.
pub fn dpc_region(h: &ChannelMatrix, pt: f64, order: &EncodingOrder, m_points: usize) -> Result<RateRegion> {
    check_two_users(h)?;
    check_points(m_points)?;
    let d = decompose(h, order)?;
    Ok(dpc_region_from_gains(
        order,
        [d.diag_gains[0], d.diag_gains[1]],
        pt,
        m_points,
    ))
}

pub(crate) fn dpc_region_from_gains(order: &EncodingOrder, gains: [f64; 2], pt: f64, m_points: usize) -> RateRegion {
    let samples = split_grid(m_points)
        .map(|t| {
            let by_position = [t * pt, (1.0 - t) * pt];
            let mut q = [0.0; 2];
            let mut r = [0.0; 2];
            for k in 0..2 {
                let u = order.user_at(k);
                q[u] = by_position[k];
                r[u] = rate(gains[k], by_position[k]);
            }
            (RatePoint { r1: r[0], r2: r[1] }, Some(PowerSplit { t, q }))
        })
        .collect();
    RateRegion::from_samples(Scheme::Dpc, RegionOrder::Order(order.clone()), samples)
}

/// Upper envelope of several regions, evaluated on the union of their
/// `r1` samples.
pub fn region_union(regions: &[RateRegion]) -> Result<RateRegion> {
    let first = regions
        .first()
        .ok_or_else(|| Error::invalid("regions", "union of no regions"))?;
    if regions.iter().any(|r| r.scheme != first.scheme) {
        return Err(Error::invalid("regions", "cannot merge regions of different schemes"));
    }
    let mut grid: Vec<f64> = regions.iter().flat_map(|r| r.boundary.iter().map(|p| p.r1)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let samples = grid
        .into_iter()
        .filter_map(|r1| {
            regions
                .iter()
                .filter_map(|reg| reg.r2_at(r1))
                .reduce(f64::max)
                .map(|r2| (RatePoint { r1, r2 }, None))
        })
        .collect();
    Ok(RateRegion::from_samples(first.scheme, RegionOrder::Union, samples))
}

/// Relative area gain of `a` over `b`, in percent.
pub fn area_improvement(a: &RateRegion, b: &RateRegion) -> Result<f64> {
    if !(b.area > 0.0) {
        return Err(Error::invalid(
            "area",
            format!("reference region has non-positive area {}", b.area),
        ));
    }
    Ok(100.0 * (a.area - b.area) / b.area)
}
