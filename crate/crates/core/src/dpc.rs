//! QR-based dirty paper coding.
//!
//! For an encoding order π the channel rows are permuted so that row `k`
//! belongs to user `π(k)`, and the Hermitian transpose is factored as
//! `H_πᴴ = Q R`. Precoding with `Q` turns the broadcast channel into the
//! lower-triangular `Rᴴ`: user `π(k)` sees its own symbol through `r_kk`
//! plus interference from users encoded before it, which the encoder knows
//! and pre-cancels. What remains is `K` parallel channels with gains
//! `r_kk²` and, because `Q` has orthonormal columns, an unweighted power
//! budget.
//!
//! Symbol-level encoding is not simulated; rates follow from the gains.

use std::fmt;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, ThinQr};
use crate::waterfill::{solve_waterfill, PowerAllocation, WaterfillProblem};

/// Largest user count for which all `K!` orderings are searched by default.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 8;

/// Channel norms closer than this (relative to the largest) count as equal
/// in the greedy ordering, so mirror-image users keep their index order.
const NORM_TIE_TOLERANCE: f64 = 1e-12;

/// Permutation of user indices: entry `k` is the (zero-based) user encoded
/// `k`-th. Displays one-based, e.g. `1-2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodingOrder(Vec<usize>);

impl EncodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let k = order.len();
        if k == 0 {
            return Err(Error::invalid("order", "empty permutation"));
        }
        let mut seen = vec![false; k];
        for &u in &order {
            if u >= k || seen[u] {
                return Err(Error::invalid(
                    "order",
                    format!("{order:?} is not a permutation of 0..{k}"),
                ));
            }
            seen[u] = true;
        }
        Ok(EncodingOrder(order))
    }

    /// Builds from one-based user labels, e.g. `[2, 1]`.
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        if order.contains(&0) {
            return Err(Error::invalid("order", "user labels start at 1"));
        }
        Self::new(order.iter().map(|u| u - 1).collect())
    }

    pub fn identity(k: usize) -> Self {
        EncodingOrder((0..k).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// User encoded at position `k`.
    pub fn user_at(&self, k: usize) -> usize {
        self.0[k]
    }

    /// Encoding position of each user.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (k, &u) in self.0.iter().enumerate() {
            pos[u] = k;
        }
        pos
    }

    /// All `k!` orders in lexicographic order.
    pub fn all(k: usize) -> impl Iterator<Item = EncodingOrder> {
        (0..k).permutations(k).map(EncodingOrder)
    }
}

impl fmt::Display for EncodingOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|u| (u + 1).to_string()).collect();
        f.write_str(&labels.join("-"))
    }
}

impl std::str::FromStr for EncodingOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .split(['-', ','])
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::invalid("order", format!("cannot parse `{s}`")))?;
        Self::from_one_based(&labels)
    }
}

#[derive(Debug, Clone)]
pub struct DpcDecomposition {
    pub order: EncodingOrder,
    /// `N × K`, orthonormal columns; this is the DPC precoder.
    pub q_basis: DMatrix<Complex64>,
    /// `K × K` upper triangular, real non-negative diagonal.
    pub r_upper: DMatrix<Complex64>,
    /// `r_kk²` in encoding order.
    pub diag_gains: Vec<f64>,
}

pub fn decompose(h: &ChannelMatrix, order: &EncodingOrder) -> Result<DpcDecomposition> {
    h.check_users_le_antennas()?;
    let k = h.k_users();
    if order.len() != k {
        return Err(Error::invalid(
            "order",
            format!("ordering over {} users for a {k}-user channel", order.len()),
        ));
    }
    let m = h.as_matrix();
    let permuted_adjoint = DMatrix::from_fn(h.n_antennas(), k, |n, j| m[(order.user_at(j), n)].conj());
    let ThinQr { q, r } = thin_qr(&permuted_adjoint);
    let diag_gains = (0..k).map(|j| r[(j, j)].re * r[(j, j)].re).collect();
    Ok(DpcDecomposition {
        order: order.clone(),
        q_basis: q,
        r_upper: r,
        diag_gains,
    })
}

#[derive(Debug, Clone)]
pub struct DpcSolution {
    pub decomposition: DpcDecomposition,
    /// Indexed by encoding position: entry `k` belongs to user `order[k]`.
    pub allocation: PowerAllocation,
    pub sum_rate: f64,
}

impl DpcSolution {
    pub fn order(&self) -> &EncodingOrder {
        &self.decomposition.order
    }

    /// Per-user powers in natural user order.
    pub fn user_powers(&self) -> Vec<f64> {
        self.to_natural(&self.allocation.q)
    }

    /// Per-user rates in natural user order.
    pub fn user_rates(&self) -> Vec<f64> {
        self.to_natural(&self.allocation.rates)
    }

    fn to_natural(&self, by_position: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; by_position.len()];
        for (k, v) in by_position.iter().enumerate() {
            out[self.decomposition.order.user_at(k)] = *v;
        }
        out
    }
}

/// Optimal power allocation for a fixed encoding order.
pub fn dpc_sum_rate(h: &ChannelMatrix, order: &EncodingOrder, pt: f64) -> Result<DpcSolution> {
    let decomposition = decompose(h, order)?;
    solve_decomposition(decomposition, pt)
}

fn solve_decomposition(decomposition: DpcDecomposition, pt: f64) -> Result<DpcSolution> {
    let allocation = solve_waterfill(&WaterfillProblem::with_gains(decomposition.diag_gains.clone(), pt))?;
    let sum_rate = allocation.sum_rate;
    Ok(DpcSolution {
        decomposition,
        allocation,
        sum_rate,
    })
}

/// Best of all `K!` encoding orders, `K ≤ 8`.
pub fn best_order_exhaustive(h: &ChannelMatrix, pt: f64) -> Result<DpcSolution> {
    best_order_exhaustive_capped(h, pt, DEFAULT_EXHAUSTIVE_CAP)
}

/// Orders are scored in parallel; the winner is then picked by a
/// sequential scan in lexicographic order, so exact ties go to the
/// lexicographically smallest order regardless of scheduling.
pub fn best_order_exhaustive_capped(h: &ChannelMatrix, pt: f64, cap: usize) -> Result<DpcSolution> {
    let k = h.k_users();
    if k > cap {
        return Err(Error::CapExceeded { users: k, cap });
    }
    h.check_users_le_antennas()?;
    let orders: Vec<EncodingOrder> = EncodingOrder::all(k).collect();
    let scores = orders
        .par_iter()
        .map(|o| dpc_sum_rate(h, o, pt).map(|s| s.sum_rate))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &score) in scores.iter().enumerate().skip(1) {
        if score > scores[best] {
            best = i;
        }
    }
    dpc_sum_rate(h, &orders[best], pt)
}

/// Users sorted by descending `‖h_k‖²`, ties by ascending index. Norms
/// within rounding of each other are ties.
pub fn greedy_order(h: &ChannelMatrix) -> EncodingOrder {
    let norms = h.row_norms_sqr();
    let mut users: Vec<usize> = (0..h.k_users()).collect();
    users.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let tol = NORM_TIE_TOLERANCE * norms.iter().cloned().fold(0.0, f64::max);
    let mut start = 0;
    for i in 1..=users.len() {
        if i == users.len() || norms[users[i - 1]] - norms[users[i]] > tol {
            users[start..i].sort_unstable();
            start = i;
        }
    }
    EncodingOrder(users)
}

/// Single `O(K log K)` ordering by channel norm.
pub fn best_order_greedy(h: &ChannelMatrix, pt: f64) -> Result<DpcSolution> {
    dpc_sum_rate(h, &greedy_order(h), pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel, channel_gram, ScenarioConfig};
    use crate::geometry::{ArrayConfig, UserLayout};
    use crate::zf::build_zf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channel(rng: &mut ChaCha8Rng, k: usize, n: usize) -> ChannelMatrix {
        ChannelMatrix::from_matrix(DMatrix::from_fn(k, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
        .unwrap()
    }

    /// Determinant by cofactor expansion, independent of any factorisation.
    fn det(m: &DMatrix<Complex64>) -> Complex64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m[(0, j)] * det(&minor) * sign
            })
            .sum()
    }

    fn orthogonal_channel() -> ChannelMatrix {
        ChannelMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.5)],
        ])
        .unwrap()
    }

    #[test]
    fn order_parsing_and_display() {
        let o: EncodingOrder = "2-1-3".parse().unwrap();
        assert_eq!(o.as_slice(), &[1, 0, 2]);
        assert_eq!(o.to_string(), "2-1-3");
        assert_eq!(o.positions(), vec![1, 0, 2]);
        assert!("1-1".parse::<EncodingOrder>().is_err());
        assert!("0-1".parse::<EncodingOrder>().is_err());
        assert!(EncodingOrder::new(vec![0, 2]).is_err());
        assert_eq!(EncodingOrder::all(3).count(), 6);
        assert_eq!(EncodingOrder::all(3).next().unwrap(), EncodingOrder::identity(3));
    }

    #[test]
    fn orthogonal_rows_give_row_norms() {
        let h = orthogonal_channel();
        for o in EncodingOrder::all(3) {
            let d = decompose(&h, &o).unwrap();
            for k in 0..3 {
                let want = h.row_norm_sqr(o.user_at(k));
                assert!((d.diag_gains[k] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_user() {
        let h = ChannelMatrix::from_rows(&[vec![c(0.6, 0.0), c(0.0, -0.8)]]).unwrap();
        let d = decompose(&h, &EncodingOrder::identity(1)).unwrap();
        assert!((d.diag_gains[0] - 1.0).abs() < 1e-12);
        let s = dpc_sum_rate(&h, &EncodingOrder::identity(1), 10.0).unwrap();
        assert!((s.sum_rate - 11f64.log2()).abs() < 1e-12);
        assert_eq!(
            best_order_exhaustive(&h, 10.0).unwrap().order(),
            &EncodingOrder::identity(1)
        );
    }

    #[test]
    fn coincident_users_leave_second_gain_empty() {
        let sc = ScenarioConfig::new(ArrayConfig::square(8), UserLayout::Coplanar { d: 10.0, s: 0.0 }, 10.0);
        let h = build_channel(&sc).unwrap();
        let d = decompose(&h, &EncodingOrder::identity(2)).unwrap();
        let n1 = h.row_norm_sqr(0);
        assert!((d.diag_gains[0] - n1).abs() <= 1e-10 * n1);
        assert!(d.diag_gains[1] <= 1e-10 * n1);
        let s = dpc_sum_rate(&h, &EncodingOrder::identity(2), 10.0).unwrap();
        assert_eq!(s.allocation.q[1], 0.0);
        assert!((s.sum_rate - (1.0 + 10.0 * n1).log2()).abs() < 1e-9);
    }

    #[test]
    fn determinant_is_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_channel(&mut rng, 3, 16);
        let want = det(&channel_gram(&h)).re;
        for o in EncodingOrder::all(3) {
            let prod: f64 = decompose(&h, &o).unwrap().diag_gains.iter().product();
            assert!((prod - want).abs() <= 1e-8 * want, "{o}: {prod} vs {want}");
        }
    }

    #[test]
    fn equal_orthogonal_rows_split_evenly() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let s = dpc_sum_rate(&h, &EncodingOrder::identity(2), 6.0).unwrap();
        assert!((s.allocation.q[0] - 3.0).abs() < 1e-12);
        assert!((s.sum_rate - 2.0 * 4f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let h = random_channel(&mut rng, 3, 16);
            let best = best_order_exhaustive(&h, 10.0).unwrap();
            let explicit = EncodingOrder::all(3)
                .map(|o| dpc_sum_rate(&h, &o, 10.0).unwrap().sum_rate)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((best.sum_rate - explicit).abs() <= 1e-12 * explicit);
        }
    }

    #[test]
    fn orthogonal_tie_breaks_to_identity() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 3.0)]]).unwrap();
        let rates: Vec<f64> = EncodingOrder::all(2)
            .map(|o| dpc_sum_rate(&h, &o, 10.0).unwrap().sum_rate)
            .collect();
        assert_eq!(rates[0], rates[1]);
        assert_eq!(
            best_order_exhaustive(&h, 10.0).unwrap().order(),
            &EncodingOrder::identity(2)
        );
    }

    #[test]
    fn cap_exceeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(&mut rng, 3, 4);
        assert!(matches!(
            best_order_exhaustive_capped(&h, 1.0, 2),
            Err(Error::CapExceeded { users: 3, cap: 2 })
        ));
        let h = random_channel(&mut rng, 9, 10);
        assert!(matches!(best_order_exhaustive(&h, 1.0), Err(Error::CapExceeded { .. })));
        assert!(best_order_greedy(&h, 1.0).is_ok());
    }

    #[test]
    fn greedy_ordering() {
        // three users on two antennas is rejected downstream, but the order is defined
        let h = ChannelMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 3.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(greedy_order(&h).as_slice(), &[1, 0, 2]);
        let eq = orthogonal_channel();
        let scaled =
            ChannelMatrix::from_matrix(eq.as_matrix().map(|z| if z.norm() > 0.0 { z / z.norm() } else { z })).unwrap();
        assert_eq!(greedy_order(&scaled), EncodingOrder::identity(3));

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let h = random_channel(&mut rng, 5, 32);
            let g = best_order_greedy(&h, 10.0).unwrap();
            let e = best_order_exhaustive(&h, 10.0).unwrap();
            assert!(g.sum_rate <= e.sum_rate);
        }
    }

    #[test]
    fn natural_order_mapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_channel(&mut rng, 3, 6);
        let o: EncodingOrder = "3-1-2".parse().unwrap();
        let s = dpc_sum_rate(&h, &o, 5.0).unwrap();
        let rates = s.user_rates();
        let q = s.user_powers();
        for k in 0..3 {
            let u = o.user_at(k);
            assert_eq!(rates[u], s.allocation.rates[k]);
            assert_eq!(q[u], s.allocation.q[k]);
            let want = (1.0 + s.decomposition.diag_gains[k] * q[u]).log2();
            assert!((rates[u] - want).abs() < 1e-12);
        }
        assert!((q.iter().sum::<f64>() - 5.0).abs() < 1e-10 * 5.0);
    }

    #[test]
    fn second_user_gain_matches_zf_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let n = rng.gen_range(2..30);
            let h = random_channel(&mut rng, 2, n);
            let zf = build_zf(&h).unwrap();
            for o in EncodingOrder::all(2) {
                let d = decompose(&h, &o).unwrap();
                let last = o.user_at(1);
                assert!((d.diag_gains[1] * zf.alpha[last] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn colinear_endpoint_rates_at_scale() {
        let sc = ScenarioConfig::new(ArrayConfig::square(500), UserLayout::CoLinear { d: 10.0, s: 0.2 }, 10.0);
        let h = build_channel(&sc).unwrap();
        let d = decompose(&h, &EncodingOrder::identity(2)).unwrap();
        let r1 = (1.0 + 10.0 * d.diag_gains[0]).log2();
        let r2 = (1.0 + 10.0 * d.diag_gains[1]).log2();
        assert!((r1 / 5.717 - 1.0).abs() < 0.05, "{r1}");
        assert!((r2 / 2.578 - 1.0).abs() < 0.05, "{r2}");
    }

    fn channel_strategy() -> impl Strategy<Value = ChannelMatrix> {
        (1usize..=6, 0usize..=58).prop_flat_map(|(k, extra)| {
            let n = k + extra;
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), k * n).prop_map(move |v| {
                ChannelMatrix::from_matrix(DMatrix::from_fn(k, n, |i, j| {
                    let (re, im) = v[i * n + j];
                    c(re, im)
                }))
                .unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decomposition_invariants(h in channel_strategy(), seed in any::<u64>()) {
            let k = h.k_users();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let order = EncodingOrder::new(perm).unwrap();
            let d = decompose(&h, &order).unwrap();

            let qhq = d.q_basis.adjoint() * &d.q_basis;
            for i in 0..k {
                for j in 0..k {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((qhq[(i, j)] - c(want, 0.0)).norm() <= 1e-10);
                }
                prop_assert!(d.r_upper[(i, i)].im == 0.0 && d.r_upper[(i, i)].re >= 0.0);
                prop_assert!((d.diag_gains[i] - d.r_upper[(i, i)].re.powi(2)).abs() <= 1e-15 * d.diag_gains[i].max(1.0));
            }
            let hp = DMatrix::from_fn(k, h.n_antennas(), |i, n| h.get(order.user_at(i), n));
            let rec = d.r_upper.adjoint() * d.q_basis.adjoint();
            prop_assert!((rec - &hp).norm() <= 1e-10 * hp.norm());
            let first = h.row_norm_sqr(order.user_at(0));
            prop_assert!((d.diag_gains[0] - first).abs() <= 1e-10 * first);
            prop_assert!(d.diag_gains.iter().sum::<f64>() <= h.frobenius_sqr() * (1.0 + 1e-12));
        }
    }
}
