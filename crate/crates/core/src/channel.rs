//! Line-of-sight spherical-wave channel.
//!
//! Entry `(k, n)` couples array element `n` to user `k` through
//! `exp(-j 2π d / λ) / (√(4π) d)` with `d` the exact element-to-user range.
//! There is no per-antenna gain normalisation, so received power grows with
//! the array size.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_array, build_users, ArrayConfig, Position, UserLayout};

/// Complex `K × N` channel; row `k` is user `k`'s channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
}

impl ChannelMatrix {
    /// Wraps an arbitrary `K × N` matrix. Every entry must be finite.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("channel", "matrix must be non-empty"));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("channel", "entries must be finite"));
        }
        Ok(ChannelMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("channel", "rows must have equal length"));
        }
        Self::from_matrix(DMatrix::from_fn(k, n, |i, j| rows[i][j]))
    }

    pub fn k_users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, k: usize, n: usize) -> Complex64 {
        self.entries[(k, n)]
    }

    /// `‖h_k‖²`
    pub fn row_norm_sqr(&self, k: usize) -> f64 {
        self.entries.row(k).norm_squared()
    }

    pub fn row_norms_sqr(&self) -> Vec<f64> {
        (0..self.k_users()).map(|k| self.row_norm_sqr(k)).collect()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.entries.norm_squared()
    }

    pub(crate) fn check_users_le_antennas(&self) -> Result<()> {
        if self.k_users() > self.n_antennas() {
            return Err(Error::invalid(
                "channel",
                format!("{} users exceed {} antennas", self.k_users(), self.n_antennas()),
            ));
        }
        Ok(())
    }

    /// Debug dump with columns `k,n,re,im` (1-based indices). Intended for
    /// small arrays only; output is `K·N` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "n", "re", "im"])?;
        for k in 0..self.k_users() {
            for n in 0..self.n_antennas() {
                let z = self.entries[(k, n)];
                w.write_record([
                    (k + 1).to_string(),
                    (n + 1).to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<channel csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Everything needed to build a channel and run the precoders on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub layout: UserLayout,
    /// Transmit power budget.
    pub pt: f64,
    /// Receiver noise variance.
    pub noise_power: f64,
}

impl ScenarioConfig {
    pub fn new(array: ArrayConfig, layout: UserLayout, pt: f64) -> Self {
        ScenarioConfig {
            array,
            layout,
            pt,
            noise_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.layout.validate()?;
        if !(self.pt > 0.0 && self.pt.is_finite()) {
            return Err(Error::invalid("pt", format!("must be positive, got {}", self.pt)));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid(
                "noise_power",
                format!("must be positive, got {}", self.noise_power),
            ));
        }
        Ok(())
    }

    /// Power budget in units of the noise variance, the quantity the
    /// precoders optimise against.
    pub fn snr(&self) -> f64 {
        self.pt / self.noise_power
    }
}

pub fn channel_coefficient(t: &Position, r: &Position, wavelength: f64) -> Result<Complex64> {
    let d = r.distance(t);
    if d == 0.0 {
        return Err(Error::invalid("positions", "transmitter and receiver coincide"));
    }
    Ok(coefficient_at(d, wavelength))
}

#[inline]
fn coefficient_at(d: f64, wavelength: f64) -> Complex64 {
    let amplitude = 1.0 / ((4.0 * PI).sqrt() * d);
    Complex64::from_polar(amplitude, -2.0 * PI * d / wavelength)
}

pub fn build_channel(scenario: &ScenarioConfig) -> Result<ChannelMatrix> {
    scenario.validate()?;
    let elements = build_array(&scenario.array)?;
    let users = build_users(&scenario.layout)?;
    channel_between(&elements, &users, scenario.array.wavelength)
}

/// Channel from explicit element and user positions. Rows are filled in
/// parallel, one user at a time.
pub fn channel_between(elements: &[Position], users: &[Position], wavelength: f64) -> Result<ChannelMatrix> {
    if elements.is_empty() || users.is_empty() {
        return Err(Error::invalid("channel", "need at least one element and one user"));
    }
    let rows = users
        .iter()
        .enumerate()
        .map(|(k, r)| {
            elements
                .par_iter()
                .enumerate()
                .map(|(n, t)| {
                    let d = r.distance(t);
                    if d == 0.0 {
                        Err(Error::CoincidentPoints {
                            user: k + 1,
                            element: n + 1,
                        })
                    } else {
                        Ok(coefficient_at(d, wavelength))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let entries = DMatrix::from_fn(users.len(), elements.len(), |k, n| rows[k][n]);
    Ok(ChannelMatrix { entries })
}

/// `G = H Hᴴ`, Hermitian positive semi-definite.
pub fn channel_gram(h: &ChannelMatrix) -> DMatrix<Complex64> {
    let m = h.as_matrix();
    let mut g = m * m.adjoint();
    // exact Hermitian symmetry and a real diagonal
    let k = g.nrows();
    for i in 0..k {
        g[(i, i)] = Complex64::new(m.row(i).norm_squared(), 0.0);
        for j in (i + 1)..k {
            g[(j, i)] = g[(i, j)].conj();
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const INV_SQRT_4PI: f64 = 0.282_094_791_773_878_14;

    fn random_channel(rng: &mut ChaCha8Rng, k: usize, n: usize) -> ChannelMatrix {
        ChannelMatrix::from_matrix(DMatrix::from_fn(k, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
        .unwrap()
    }

    #[test]
    fn unit_distance_is_real_positive() {
        let z = channel_coefficient(&Position::ORIGIN, &Position::new(0.0, 0.0, 1.0), 1.0).unwrap();
        assert!((z.re - INV_SQRT_4PI).abs() < 1e-12);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn half_wavelength_flips_sign() {
        let z = channel_coefficient(&Position::ORIGIN, &Position::new(0.0, 0.0, 0.5), 1.0).unwrap();
        assert!((z.re + 2.0 * INV_SQRT_4PI).abs() < 1e-12);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn off_axis_element() {
        // d = sqrt(100.0625) = 10.003124512..., reference value from a
        // 50-digit evaluation of exp(-j 2π d)/(sqrt(4π) d).
        let z = channel_coefficient(&Position::new(0.25, 0.0, 0.0), &Position::new(0.0, 0.0, 10.0), 1.0).unwrap();
        let expected = Complex64::new(0.028_195_233_596_118_138, -0.000_553_596_764_788_404_4);
        assert!((z - expected).norm() < 1e-14, "{z}");
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(channel_coefficient(&Position::ORIGIN, &Position::ORIGIN, 1.0).is_err());
        let err = channel_between(
            &[Position::ORIGIN, Position::new(1.0, 0.0, 0.0)],
            &[Position::new(1.0, 0.0, 0.0)],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CoincidentPoints { user: 1, element: 2 }));
    }

    #[test]
    fn single_antenna_single_user() {
        let sc = ScenarioConfig::new(
            ArrayConfig::default(),
            UserLayout::Explicit(vec![Position::new(0.0, 0.0, 10.0)]),
            1.0,
        );
        let h = build_channel(&sc).unwrap();
        assert_eq!((h.k_users(), h.n_antennas()), (1, 1));
        let z = h.get(0, 0);
        assert!((z.re - INV_SQRT_4PI / 10.0).abs() < 1e-12 && z.im.abs() < 1e-12);
    }

    #[test]
    fn magnitude_and_phase_laws() {
        let array = ArrayConfig {
            nx: 7,
            ny: 5,
            spacing: 0.5,
            wavelength: 1.0,
        };
        let elements = build_array(&array).unwrap();
        let users = vec![Position::new(0.3, -1.0, 4.0), Position::new(-2.0, 0.5, 17.0)];
        let h = channel_between(&elements, &users, 1.0).unwrap();
        for (k, r) in users.iter().enumerate() {
            for (n, t) in elements.iter().enumerate() {
                let d = r.distance(t);
                let z = h.get(k, n);
                assert!((z.norm() * (4.0 * PI).sqrt() * d - 1.0).abs() < 1e-12);
                let want = -2.0 * PI * d;
                let diff = (z.arg() - want).rem_euclid(2.0 * PI);
                assert!(diff.min(2.0 * PI - diff) < 1e-9);
                // reciprocity of magnitude
                let back = channel_coefficient(r, t, 1.0).unwrap();
                assert!((back.norm() - z.norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coplanar_rows_have_equal_norm() {
        let sc = ScenarioConfig::new(ArrayConfig::square(16), UserLayout::Coplanar { d: 10.0, s: 0.7 }, 1.0);
        let h = build_channel(&sc).unwrap();
        let n = h.row_norms_sqr();
        assert!((n[0] - n[1]).abs() <= 1e-12 * n[0]);
    }

    #[test]
    fn norm_decreases_with_range() {
        let array = ArrayConfig::square(12);
        let mut last = f64::INFINITY;
        for d in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let sc = ScenarioConfig::new(array, UserLayout::Explicit(vec![Position::new(0.0, 0.0, d)]), 1.0);
            let g = build_channel(&sc).unwrap().row_norm_sqr(0);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn large_array_boresight_gain() {
        let sc = ScenarioConfig::new(
            ArrayConfig::square(500),
            UserLayout::Explicit(vec![Position::new(0.0, 0.0, 10.0)]),
            10.0,
        );
        let h = build_channel(&sc).unwrap();
        // independent summation of 1/(4π d²) over the grid
        let c = |i: usize| (i as f64 - 249.5) * 0.5;
        let mut oracle = 0.0;
        for i in 0..500 {
            for j in 0..500 {
                oracle += 1.0 / (4.0 * PI * (c(i) * c(i) + c(j) * c(j) + 100.0));
            }
        }
        let g = h.row_norm_sqr(0);
        assert!((g - oracle).abs() <= 1e-10 * oracle);
        // within a few percent of the value implied by the 5.717 bit/s/Hz single-user rate
        assert!((g / 5.16 - 1.0).abs() < 0.05, "{g}");
        let rate = (1.0 + 10.0 * g).log2();
        assert!((rate / 5.717 - 1.0).abs() < 0.05, "{rate}");
    }

    #[test]
    fn gram_matches_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_channel(&mut rng, 2, 8);
        let g = channel_gram(&h);
        for i in 0..2 {
            for j in 0..2 {
                let mut want = Complex64::new(0.0, 0.0);
                for n in 0..8 {
                    want += h.get(i, n) * h.get(j, n).conj();
                }
                assert!((g[(i, j)] - want).norm() <= 1e-12 * want.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn gram_of_orthogonal_rows_is_diagonal() {
        let rows = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 2.0)],
        ];
        let g = channel_gram(&ChannelMatrix::from_rows(&rows).unwrap());
        assert_eq!(g[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(g[(1, 1)], Complex64::new(4.0, 0.0));
        let single = ChannelMatrix::from_rows(&rows[1..]).unwrap();
        assert_eq!(channel_gram(&single)[(0, 0)].re, 4.0);
    }

    #[test]
    fn gram_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let k = rng.gen_range(1..6);
            let n = rng.gen_range(k..20);
            let g = channel_gram(&random_channel(&mut rng, k, n));
            let trace: f64 = (0..k).map(|i| g[(i, i)].re).sum();
            let eig = SymmetricEigen::new(g).eigenvalues;
            assert!(eig.min() >= -1e-10 * trace);
        }
    }

    #[test]
    fn csv_dump() {
        let rows = vec![vec![Complex64::new(1.5, -0.25)]];
        let mut buf = Vec::new();
        ChannelMatrix::from_rows(&rows).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,n,re,im\n1,1,1.5,-0.25\n");
    }
}
