//! Zero-forcing precoding: `F = Hᴴ (H Hᴴ)⁻¹`, so `H F = I`.
//!
//! Interference is nulled at the price of transmit power: symbol `k`
//! costs `α_k = ‖f_k‖²` per unit power, and the sum-rate problem becomes
//! water-filling with unit gains and weights `α_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{channel_gram, ChannelMatrix};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_condition, thin_qr, ThinQr};
use crate::waterfill::{solve_waterfill, PowerAllocation, WaterfillProblem};

/// Gram condition numbers above this are reported as rank deficient.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct ZfPrecoder {
    /// `N × K` precoding matrix.
    pub f: DMatrix<Complex64>,
    /// `α_k = ‖f_k‖²`
    pub alpha: Vec<f64>,
    /// Spectral condition number of `H Hᴴ`.
    pub condition_estimate: f64,
}

pub fn build_zf(h: &ChannelMatrix) -> Result<ZfPrecoder> {
    build_zf_with_limit(h, DEFAULT_MAX_CONDITION)
}

/// With `Hᴴ = Q R`, `F = Q R⁻ᴴ`. Working from the factor of `Hᴴ` rather
/// than the Gram matrix keeps the error proportional to `cond(H)`, not its
/// square.
pub fn build_zf_with_limit(h: &ChannelMatrix, max_condition: f64) -> Result<ZfPrecoder> {
    h.check_users_le_antennas()?;
    let gram = channel_gram(h);
    let condition = hermitian_condition(&gram);
    if !(condition <= max_condition) {
        return Err(Error::RankDeficient { condition });
    }
    let ThinQr { q, r } = thin_qr(&h.as_matrix().adjoint());
    let k = h.k_users();
    let r_inv_adj = r
        .adjoint()
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { condition })?;
    let alpha: Vec<f64> = r_inv_adj.column_iter().map(|c| c.norm_squared()).collect();
    let f = q * r_inv_adj;
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::RankDeficient { condition });
    }
    Ok(ZfPrecoder {
        f,
        alpha,
        condition_estimate: condition,
    })
}

/// Sum-rate optimal ZF power allocation under budget `pt`.
pub fn zf_sum_rate(h: &ChannelMatrix, pt: f64) -> Result<PowerAllocation> {
    let zf = build_zf(h)?;
    zf.allocate(pt)
}

impl ZfPrecoder {
    pub fn allocate(&self, pt: f64) -> Result<PowerAllocation> {
        solve_waterfill(&WaterfillProblem::with_weights(self.alpha.clone(), pt))
    }

    /// Rate user `k` reaches with the whole budget, `log2(1 + pt/α_k)`.
    pub fn single_user_rate(&self, k: usize, pt: f64) -> f64 {
        (1.0 + pt / self.alpha[k]).log2()
    }
}
