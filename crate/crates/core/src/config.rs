//! Scenario files and command-line overrides.
//!
//! A scenario file is flat TOML:
//!
//! ```toml
//! nx = 500
//! layout = "colinear"
//! d = 10
//! s = 0.2
//! pt = 10
//! ```
//!
//! Recognised keys are listed in [`KNOWN_KEYS`]. Sweep axes (`d`, `s`)
//! accept a number or a range string `start:stop:count` (inclusive, linear)
//! or `log:start:stop:count` (geometric). A `[run]` table, as written into
//! run manifests, is ignored on load so a manifest can be fed back in as a
//! config.

use std::path::Path;

use toml::{Table, Value};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::experiments::{OrderingStrategy, SweepGrid};
use crate::geometry::{ArrayConfig, LayoutKind, Position, UserLayout};

pub const KNOWN_KEYS: &[&str] = &[
    "nx",
    "ny",
    "spacing",
    "wavelength",
    "layout",
    "d",
    "s",
    "positions",
    "pt",
    "noise_power",
    "points",
    "ordering",
    "hull",
];

/// Table name reserved for run metadata in manifests.
pub const RUN_TABLE: &str = "run";

/// Values used when a key is absent. Each subcommand has its own set.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaults {
    pub nx: usize,
    pub layout: LayoutKind,
    pub d: Value,
    pub s: Value,
    pub pt: f64,
}

impl Defaults {
    /// Two users at `D = 10`, `s = 0.2` in front of a 500×500 array.
    pub fn scenario() -> Self {
        Defaults {
            nx: 500,
            layout: LayoutKind::CoLinear,
            d: Value::Float(10.0),
            s: Value::Float(0.2),
            pt: 10.0,
        }
    }

    pub fn contour() -> Self {
        Defaults {
            nx: 10,
            layout: LayoutKind::CoLinear,
            d: Value::String("log:5:100:40".into()),
            s: Value::String("0.05:2:40".into()),
            pt: 10.0,
        }
    }

    pub fn gains() -> Self {
        Defaults {
            nx: 100,
            layout: LayoutKind::CoLinear,
            d: Value::Float(10.0),
            s: Value::String("0.05:2:30".into()),
            pt: 10.0,
        }
    }
}

/// Keys as given by the user, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    table: Table,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        table.remove(RUN_TABLE);
        for key in table.keys() {
            check_key(key)?;
        }
        Ok(RawConfig { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { key, reason } if key == "<file>" => Error::config(path.display().to_string(), reason),
            other => other,
        })
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<()> {
        check_key(key)?;
        self.table.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override. The value is read as a TOML literal
    /// when it parses as one and as a bare string otherwise.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, text) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
        let key = key.trim();
        let text = text.trim();
        let value = format!("v = {text}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(text.to_string()));
        self.set_value(key, value)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.table.get(key).map(|v| as_float(key, v)).transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 1 => Ok(Some(*i as usize)),
            Some(v) => Err(Error::config(key, format!("expected a positive integer, got {v}"))),
        }
    }

    pub fn array(&self, defaults: &Defaults) -> Result<ArrayConfig> {
        let nx = self.usize("nx")?.unwrap_or(defaults.nx);
        let cfg = ArrayConfig {
            nx,
            ny: self.usize("ny")?.unwrap_or(nx),
            spacing: self.float("spacing")?.unwrap_or(0.5),
            wavelength: self.float("wavelength")?.unwrap_or(1.0),
        };
        cfg.validate().map_err(keyed)?;
        Ok(cfg)
    }

    pub fn layout_kind(&self, defaults: &Defaults) -> Result<LayoutKind> {
        match self.table.get("layout") {
            None => Ok(defaults.layout),
            Some(Value::String(s)) => s.parse().map_err(keyed),
            Some(v) => Err(Error::config("layout", format!("expected a string, got {v}"))),
        }
    }

    pub fn pt(&self, defaults: &Defaults) -> Result<f64> {
        let pt = self.float("pt")?.unwrap_or(defaults.pt);
        if !(pt > 0.0 && pt.is_finite()) {
            return Err(Error::config("pt", format!("must be positive, got {pt}")));
        }
        Ok(pt)
    }

    pub fn axis(&self, key: &'static str, defaults: &Defaults) -> Result<Vec<f64>> {
        let fallback = match key {
            "d" => &defaults.d,
            _ => &defaults.s,
        };
        parse_axis(key, self.table.get(key).unwrap_or(fallback))
    }

    fn scalar(&self, key: &'static str, defaults: &Defaults) -> Result<f64> {
        let v = self.axis(key, defaults)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::config(key, "expected a single value, not a range")),
        }
    }

    pub fn positions(&self) -> Result<Vec<Position>> {
        let Some(v) = self.table.get("positions") else {
            return Err(Error::config("positions", "required for the explicit layout"));
        };
        let Value::Array(items) = v else {
            return Err(Error::config("positions", "expected a list of [x, y, z] triples"));
        };
        items
            .iter()
            .map(|item| match item {
                Value::Array(xyz) if xyz.len() == 3 => Ok(Position::new(
                    as_float("positions", &xyz[0])?,
                    as_float("positions", &xyz[1])?,
                    as_float("positions", &xyz[2])?,
                )),
                other => Err(Error::config("positions", format!("expected [x, y, z], got {other}"))),
            })
            .collect()
    }

    pub fn scenario(&self, defaults: &Defaults) -> Result<ScenarioConfig> {
        let array = self.array(defaults)?;
        let kind = self.layout_kind(defaults)?;
        let layout = match kind {
            LayoutKind::Explicit => UserLayout::Explicit(self.positions()?),
            _ => UserLayout::pair(kind, self.scalar("d", defaults)?, self.scalar("s", defaults)?)?,
        };
        let cfg = ScenarioConfig {
            array,
            layout,
            pt: self.pt(defaults)?,
            noise_power: self.float("noise_power")?.unwrap_or(1.0),
        };
        cfg.validate().map_err(keyed)?;
        Ok(cfg)
    }

    pub fn sweep(&self, defaults: &Defaults) -> Result<SweepGrid> {
        let grid = SweepGrid {
            d_values: self.axis("d", defaults)?,
            s_values: self.axis("s", defaults)?,
            array: self.array(defaults)?,
            layout: self.layout_kind(defaults)?,
            pt: self.pt(defaults)?,
        };
        grid.validate().map_err(keyed)?;
        Ok(grid)
    }

    /// Fixed range and the spacing axis for a gain profile.
    pub fn gain_profile(&self, defaults: &Defaults) -> Result<(f64, Vec<f64>)> {
        Ok((self.scalar("d", defaults)?, self.axis("s", defaults)?))
    }

    pub fn points(&self, default: usize) -> Result<usize> {
        let p = self.usize("points")?.unwrap_or(default);
        if p < 3 {
            return Err(Error::config("points", format!("need at least 3, got {p}")));
        }
        Ok(p)
    }

    pub fn ordering(&self) -> Result<OrderingStrategy> {
        match self.table.get("ordering") {
            None => Ok(OrderingStrategy::Exhaustive),
            Some(Value::String(s)) if s == "exhaustive" => Ok(OrderingStrategy::Exhaustive),
            Some(Value::String(s)) if s == "greedy" => Ok(OrderingStrategy::Greedy),
            Some(v) => Err(Error::config(
                "ordering",
                format!("expected \"exhaustive\" or \"greedy\", got {v}"),
            )),
        }
    }

    pub fn hull(&self) -> Result<bool> {
        match self.table.get("hull") {
            None => Ok(false),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(Error::config("hull", format!("expected true or false, got {v}"))),
        }
    }

    /// Every key the run actually used, with defaults filled in, in a form
    /// that loads back to the same configuration.
    pub fn resolved(&self, defaults: &Defaults, with_axes_as_given: bool) -> Result<Table> {
        let array = self.array(defaults)?;
        let kind = self.layout_kind(defaults)?;
        let mut t = Table::new();
        t.insert("nx".into(), Value::Integer(array.nx as i64));
        t.insert("ny".into(), Value::Integer(array.ny as i64));
        t.insert("spacing".into(), Value::Float(array.spacing));
        t.insert("wavelength".into(), Value::Float(array.wavelength));
        t.insert("layout".into(), Value::String(kind.name().into()));
        if kind == LayoutKind::Explicit {
            let positions = self
                .positions()?
                .into_iter()
                .map(|p| Value::Array(vec![Value::Float(p.x), Value::Float(p.y), Value::Float(p.z)]))
                .collect();
            t.insert("positions".into(), Value::Array(positions));
        } else {
            for key in ["d", "s"] {
                let v = self
                    .table
                    .get(key)
                    .unwrap_or(if key == "d" { &defaults.d } else { &defaults.s });
                let v = if with_axes_as_given {
                    v.clone()
                } else {
                    Value::Float(as_float(key, v)?)
                };
                t.insert(key.into(), v);
            }
        }
        t.insert("pt".into(), Value::Float(self.pt(defaults)?));
        t.insert(
            "noise_power".into(),
            Value::Float(self.float("noise_power")?.unwrap_or(1.0)),
        );
        for key in ["points", "ordering", "hull"] {
            if let Some(v) = self.table.get(key) {
                t.insert(key.into(), v.clone());
            }
        }
        Ok(t)
    }
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("unknown key (expected one of: {})", KNOWN_KEYS.join(", ")),
        ))
    }
}

fn keyed(e: Error) -> Error {
    match e {
        Error::InvalidInput { field, reason } => Error::config(field, reason),
        other => other,
    }
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::config(key, format!("expected a number, got `{s}`"))),
        other => Err(Error::config(key, format!("expected a number, got {other}"))),
    }
}

/// Reads a sweep axis: a number, `start:stop:count`, or
/// `log:start:stop:count`.
pub fn parse_axis(key: &str, v: &Value) -> Result<Vec<f64>> {
    let Value::String(text) = v else {
        return Ok(vec![as_float(key, v)?]);
    };
    let text = text.trim();
    let (log, body) = match text.strip_prefix("log:") {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let parts: Vec<&str> = body.split(':').collect();
    if parts.len() == 1 && !log {
        return Ok(vec![as_float(key, v)?]);
    }
    let [start, stop, count] = parts.as_slice() else {
        return Err(Error::config(key, format!("range `{text}` must be start:stop:count")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(key, format!("bad number `{s}` in range `{text}`")))
    };
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count
        .trim()
        .parse()
        .ok()
        .filter(|c| *c >= 1)
        .ok_or_else(|| Error::config(key, format!("count in `{text}` must be a positive integer")))?;
    if count == 1 {
        return Ok(vec![start]);
    }
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(Error::config(key, "log ranges need positive endpoints"));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                return stop;
            }
            let w = i as f64 / last;
            if log {
                (start.ln() + w * (stop.ln() - start.ln())).exp()
            } else {
                start + w * (stop - start)
            }
        })
        .collect())
}
