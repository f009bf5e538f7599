//! Array and user placement.
//!
//! The base station carries a uniform planar array (UPA) on the `z = 0`
//! plane, centred at the origin. Users sit in front of it (`z > 0`), either
//! stacked along boresight (co-linear) or side by side at equal range
//! (coplanar), or at explicitly listed positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian point, in wavelengths unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Elements along x.
    pub nx: usize,
    /// Elements along y.
    pub ny: usize,
    /// Element pitch.
    pub spacing: f64,
    pub wavelength: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            nx: 1,
            ny: 1,
            spacing: 0.5,
            wavelength: 1.0,
        }
    }
}

impl ArrayConfig {
    /// Square `side × side` array with half-wavelength pitch and unit wavelength.
    pub fn square(side: usize) -> Self {
        ArrayConfig {
            nx: side,
            ny: side,
            ..Default::default()
        }
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Largest edge of the aperture, from first to last element centre.
    pub fn aperture(&self) -> f64 {
        (self.nx.max(self.ny) - 1) as f64 * self.spacing
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(Error::invalid("nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(Error::invalid("ny", "must be at least 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid(
                "spacing",
                format!("must be positive, got {}", self.spacing),
            ));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(
                "wavelength",
                format!("must be positive, got {}", self.wavelength),
            ));
        }
        Ok(())
    }
}

/// Element positions of the array, row-major in `(i, j)` with `i` along x.
pub fn build_array(cfg: &ArrayConfig) -> Result<Vec<Position>> {
    cfg.validate()?;
    let cx = (cfg.nx - 1) as f64 / 2.0;
    let cy = (cfg.ny - 1) as f64 / 2.0;
    let mut out = Vec::with_capacity(cfg.element_count());
    for i in 0..cfg.nx {
        let x = (i as f64 - cx) * cfg.spacing;
        for j in 0..cfg.ny {
            out.push(Position::new(x, (j as f64 - cy) * cfg.spacing, 0.0));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    #[serde(rename = "colinear")]
    CoLinear,
    Coplanar,
    Explicit,
}

impl LayoutKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayoutKind::CoLinear => "colinear",
            LayoutKind::Coplanar => "coplanar",
            LayoutKind::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for LayoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "colinear" | "co-linear" => Ok(LayoutKind::CoLinear),
            "coplanar" => Ok(LayoutKind::Coplanar),
            "explicit" => Ok(LayoutKind::Explicit),
            other => Err(Error::invalid(
                "layout",
                format!("unknown layout `{other}` (expected colinear, coplanar or explicit)"),
            )),
        }
    }
}

/// User placement. `d` is the range of the first user (co-linear) or of the
/// pair's midpoint (coplanar); `s` is the inter-user spacing.
#[derive(Debug, Clone, PartialEq)]
pub enum UserLayout {
    CoLinear { d: f64, s: f64 },
    Coplanar { d: f64, s: f64 },
    Explicit(Vec<Position>),
}

impl UserLayout {
    /// Two-user layout of the given kind. `Explicit` is rejected.
    pub fn pair(kind: LayoutKind, d: f64, s: f64) -> Result<Self> {
        match kind {
            LayoutKind::CoLinear => Ok(UserLayout::CoLinear { d, s }),
            LayoutKind::Coplanar => Ok(UserLayout::Coplanar { d, s }),
            LayoutKind::Explicit => Err(Error::invalid(
                "layout",
                "explicit layouts have no (d, s) parametrisation",
            )),
        }
    }

    pub fn kind(&self) -> LayoutKind {
        match self {
            UserLayout::CoLinear { .. } => LayoutKind::CoLinear,
            UserLayout::Coplanar { .. } => LayoutKind::Coplanar,
            UserLayout::Explicit(_) => LayoutKind::Explicit,
        }
    }

    pub fn user_count(&self) -> usize {
        match self {
            UserLayout::Explicit(p) => p.len(),
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UserLayout::CoLinear { d, s } | UserLayout::Coplanar { d, s } => {
                if !(*d > 0.0 && d.is_finite()) {
                    return Err(Error::invalid("d", format!("must be positive, got {d}")));
                }
                if !(*s >= 0.0 && s.is_finite()) {
                    return Err(Error::invalid("s", format!("must be non-negative, got {s}")));
                }
            }
            UserLayout::Explicit(positions) => {
                if positions.is_empty() {
                    return Err(Error::invalid("positions", "at least one user is required"));
                }
                for (k, p) in positions.iter().enumerate() {
                    if !p.is_finite() {
                        return Err(Error::invalid("positions", format!("user {} is not finite", k + 1)));
                    }
                    if p.z <= 0.0 {
                        return Err(Error::invalid(
                            "positions",
                            format!("user {} must lie in front of the array (z > 0), got z = {}", k + 1, p.z),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn build_users(layout: &UserLayout) -> Result<Vec<Position>> {
    layout.validate()?;
    Ok(match layout {
        UserLayout::CoLinear { d, s } => vec![Position::new(0.0, 0.0, *d), Position::new(0.0, 0.0, d + s)],
        UserLayout::Coplanar { d, s } => {
            vec![Position::new(-s / 2.0, 0.0, *d), Position::new(s / 2.0, 0.0, *d)]
        }
        UserLayout::Explicit(p) => p.clone(),
    })
}

/// Fraunhofer distance `2 D² / λ`. Units follow the inputs.
pub fn far_field_boundary(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture > 0.0 && aperture.is_finite()) {
        return Err(Error::invalid("aperture", format!("must be positive, got {aperture}")));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::invalid(
            "wavelength",
            format!("must be positive, got {wavelength}"),
        ));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn centroid(p: &[Position]) -> Position {
        let n = p.len() as f64;
        Position::new(
            p.iter().map(|q| q.x).sum::<f64>() / n,
            p.iter().map(|q| q.y).sum::<f64>() / n,
            p.iter().map(|q| q.z).sum::<f64>() / n,
        )
    }

    #[test]
    fn single_element_at_origin() {
        let p = build_array(&ArrayConfig::default()).unwrap();
        assert_eq!(p, vec![Position::ORIGIN]);
    }

    #[test]
    fn symmetric_pair() {
        let cfg = ArrayConfig {
            nx: 2,
            ..Default::default()
        };
        let p = build_array(&cfg).unwrap();
        assert_eq!(p, vec![Position::new(-0.25, 0.0, 0.0), Position::new(0.25, 0.0, 0.0)]);
    }

    #[test]
    fn large_square_array() {
        let cfg = ArrayConfig::square(500);
        let p = build_array(&cfg).unwrap();
        assert_eq!(p.len(), 250_000);
        let xmin = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
        let xmax = p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(xmax - xmin, 249.5);
        assert_eq!(cfg.aperture(), 249.5);
        let c = centroid(&p);
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z == 0.0);
    }

    #[test]
    fn row_major_ordering() {
        let cfg = ArrayConfig {
            nx: 2,
            ny: 3,
            spacing: 1.0,
            wavelength: 1.0,
        };
        let p = build_array(&cfg).unwrap();
        assert_eq!(p[0], Position::new(-0.5, -1.0, 0.0));
        assert_eq!(p[1], Position::new(-0.5, 0.0, 0.0));
        assert_eq!(p[3], Position::new(0.5, -1.0, 0.0));
    }

    #[test]
    fn invalid_arrays() {
        assert!(build_array(&ArrayConfig {
            nx: 0,
            ..Default::default()
        })
        .is_err());
        assert!(build_array(&ArrayConfig {
            spacing: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(build_array(&ArrayConfig {
            wavelength: -1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn layouts() {
        let u = build_users(&UserLayout::CoLinear { d: 10.0, s: 0.2 }).unwrap();
        assert_eq!(u, vec![Position::new(0.0, 0.0, 10.0), Position::new(0.0, 0.0, 10.2)]);
        let u = build_users(&UserLayout::Coplanar { d: 10.0, s: 0.2 }).unwrap();
        assert_eq!(u, vec![Position::new(-0.1, 0.0, 10.0), Position::new(0.1, 0.0, 10.0)]);
        let u = build_users(&UserLayout::Coplanar { d: 10.0, s: 0.0 }).unwrap();
        assert_eq!(u[0], u[1]);
        let explicit = vec![Position::new(1.0, 2.0, 3.0)];
        assert_eq!(build_users(&UserLayout::Explicit(explicit.clone())).unwrap(), explicit);
    }

    #[test]
    fn layout_errors() {
        assert!(build_users(&UserLayout::CoLinear { d: 0.0, s: 0.2 }).is_err());
        assert!(build_users(&UserLayout::Coplanar { d: -1.0, s: 0.2 }).is_err());
        assert!(build_users(&UserLayout::Coplanar { d: 1.0, s: -0.2 }).is_err());
        assert!(build_users(&UserLayout::Explicit(vec![Position::new(0.0, 0.0, 0.0)])).is_err());
        assert!(build_users(&UserLayout::Explicit(vec![])).is_err());
        assert!(UserLayout::pair(LayoutKind::Explicit, 1.0, 1.0).is_err());
    }

    #[test]
    fn far_field_reference_bands() {
        // 1 m aperture at 3, 30 and 300 GHz.
        assert!((far_field_boundary(1.0, 0.1).unwrap() - 20.0).abs() < 1e-9);
        assert!((far_field_boundary(1.0, 0.01).unwrap() - 200.0).abs() < 1e-9);
        assert!((far_field_boundary(1.0, 0.001).unwrap() - 2000.0).abs() < 1e-9);
        assert!(far_field_boundary(0.0, 0.1).is_err());
        assert!(far_field_boundary(1.0, 0.0).is_err());
    }

    #[test]
    fn far_field_scaling() {
        let base = far_field_boundary(1.3, 0.07).unwrap();
        assert!((far_field_boundary(2.6, 0.07).unwrap() / base - 4.0).abs() < 1e-12);
        assert!((far_field_boundary(1.3, 0.14).unwrap() / base - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn centroid_and_pitch(nx in 1usize..40, ny in 1usize..40, spacing in 0.05f64..3.0) {
            let cfg = ArrayConfig { nx, ny, spacing, wavelength: 1.0 };
            let p = build_array(&cfg).unwrap();
            prop_assert_eq!(p.len(), nx * ny);
            let c = centroid(&p);
            prop_assert!(c.x.abs() <= 1e-9 * spacing && c.y.abs() <= 1e-9 * spacing);
            if p.len() >= 2 {
                // nearest neighbour of element 0 (a corner) is one pitch away
                let nn = p[1..].iter().map(|q| q.distance(&p[0])).fold(f64::INFINITY, f64::min);
                prop_assert!((nn - spacing).abs() <= 1e-12 * spacing.max(1.0));
            }
        }
    }
}
