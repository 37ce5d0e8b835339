//! Closed-form Gaussian algebra for the two orderings of `S(r)` and `D(α)`.
//!
//! Everything here is cross-checked against the Fock engine in tests; the
//! reference covariance block in particular is evaluated as written and only
//! ever compared against the Fock moments, never used in their place.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceMatrix2;
use crate::error::{Error, Result};
use crate::switch::{Branch, SwitchParams};
use crate::C64;

/// Order in which the two Gaussian unitaries act on the vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// `S(r) D(α) |0⟩`
    DisplaceThenSqueeze,
    /// `D(α) S(r) |0⟩`
    SqueezeThenDisplace,
}

/// A pure Gaussian state built from the vacuum by one of the two orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPure {
    pub displacement: C64,
    pub squeeze: f64,
    pub order: Order,
}

impl GaussianPure {
    pub fn new(displacement: C64, squeeze: f64, order: Order) -> Self {
        Self {
            displacement,
            squeeze,
            order,
        }
    }

    pub fn vacuum() -> Self {
        Self::new(C64::new(0.0, 0.0), 0.0, Order::SqueezeThenDisplace)
    }

    /// Net displacement `γ` in `D(γ) S(r)|0⟩`.
    pub fn net_displacement(&self) -> C64 {
        match self.order {
            Order::DisplaceThenSqueeze => braid(self.displacement, self.squeeze),
            Order::SqueezeThenDisplace => self.displacement,
        }
    }

    pub fn moments(&self) -> CovarianceMatrix2 {
        let g = self.net_displacement();
        let e = (2.0 * self.squeeze).exp();
        CovarianceMatrix2::new([SQRT_2 * g.re, SQRT_2 * g.im], e / 2.0, 0.5 / e, 0.0)
    }
}

/// Intermediate record of the braiding step: `β` and `K = ⟨α|β⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraidResult {
    pub beta: C64,
    pub k: C64,
}

impl BraidResult {
    pub fn new(alpha: C64, r: f64) -> Self {
        let beta = braid(alpha, r);
        Self {
            beta,
            k: coherent_overlap(alpha, beta),
        }
    }
}

/// `β` with `S(r) D(α) = D(β) S(r)`: `β = cosh(r) α + sinh(r) α*`.
pub fn braid(alpha: C64, r: f64) -> C64 {
    alpha * r.cosh() + alpha.conj() * r.sinh()
}

/// `⟨α|β⟩ = exp(−½(|α|² + |β|² − 2 α* β))`.
pub fn coherent_overlap(alpha: C64, beta: C64) -> C64 {
    (-(alpha.norm_sqr() + beta.norm_sqr() - 2.0 * alpha.conj() * beta) / 2.0).exp()
}

/// `⟨0| D(α)† S(r)† D(α) S(r) |0⟩`, the overlap of the two orders.
///
/// With `β = braid(α, r)`, `D(β)† D(α) = e^{i Im(β* α)} D(α − β)` and
/// `S† D(γ) S = D(braid(γ, −r))`, the overlap reduces to a phase times the
/// vacuum expectation of a single displacement.
pub fn order_overlap(alpha: C64, r: f64) -> C64 {
    let beta = braid(alpha, r);
    let phase = C64::new(0.0, (beta.conj() * alpha).im).exp();
    let shifted = braid(alpha - beta, -r);
    phase * (-shifted.norm_sqr() / 2.0).exp()
}

/// `G± = 2 [1 ± Re(order_overlap)]`.
pub fn normalization_factors(alpha: C64, r: f64) -> (f64, f64) {
    let re = order_overlap(alpha, r).re;
    (2.0 * (1.0 + re), 2.0 * (1.0 - re))
}

/// `normalization_factors` for a parameter set.
pub fn normalization_factors_for(params: &SwitchParams) -> (f64, f64) {
    normalization_factors(params.alpha(), params.r)
}

/// The 2×2 block produced by the reference covariance formulas. The formulas
/// carry no first moments, so this is deliberately not a
/// [`CovarianceMatrix2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBlock {
    pub matrix: [[f64; 2]; 2],
}

/// The reference `V11±`, `V22±`, `V12±` expressions.
///
/// Reading used for the unbalanced brackets:
///
/// ```text
/// V11 = [ (2Re(α²) + 2|α|² + 2) e^{-2r} − 2 Re(α)²
///         ± (2 Re(K (α+β*)²) + 1) e^{-2r}
///         − 2 e^{-2r} (Re α + Re β ± Re((β+α*) K))² ] / G
/// V22 = [ (−2Re(α²) + 2|α|² + 1 − 2 Im(α)²) e^{2r}
///         ± (2 Re(K (α−β*)²) + 1) e^{2r}
///         − 2 e^{2r} (Im α + Im β ± Im((α−β*) K))² ] / G
/// V12 = [ 2 Im(α²) + 2 Re(−i (α² − β*²) K)
///         − 2 (Re α + Re β ± Re((β+α*) K)) (Im α + Im β ± Im((α−β*) K)) ] / G
/// ```
pub fn reference_covariance(params: &SwitchParams, branch: Branch) -> Result<CovarianceBlock> {
    let alpha = params.alpha();
    let r = params.r;
    let (gp, gm) = normalization_factors(alpha, r);
    let (g, sign) = match branch {
        Branch::Plus => (gp, 1.0),
        Branch::Minus => (gm, -1.0),
    };
    if g < params.degeneracy_tol {
        return Err(Error::DegenerateOutcome { branch, norm_sq: g });
    }
    let BraidResult { beta, k } = BraidResult::new(alpha, r);
    let (em, ep) = ((-2.0 * r).exp(), (2.0 * r).exp());
    let a2 = alpha * alpha;
    let abs2 = alpha.norm_sqr();

    let first_q = alpha.re + beta.re + sign * ((beta + alpha.conj()) * k).re;
    let first_p = alpha.im + beta.im + sign * ((alpha - beta.conj()) * k).im;

    let v11 = (2.0 * a2.re + 2.0 * abs2 + 2.0) * em - 2.0 * alpha.re * alpha.re
        + sign * (2.0 * (k * (alpha + beta.conj()).powu(2)).re + 1.0) * em
        - 2.0 * em * first_q * first_q;
    let v22 = (-2.0 * a2.re + 2.0 * abs2 + 1.0 - 2.0 * alpha.im * alpha.im) * ep
        + sign * (2.0 * (k * (alpha - beta.conj()).powu(2)).re + 1.0) * ep
        - 2.0 * ep * first_p * first_p;
    let v12 = 2.0 * a2.im
        + 2.0 * (C64::new(0.0, -1.0) * (a2 - beta.conj().powu(2)) * k).re
        - 2.0 * first_q * first_p;
    Ok(CovarianceBlock {
        matrix: [[v11 / g, v12 / g], [v12 / g, v22 / g]],
    })
}

/// Gaussian Wigner function `exp(−½ dᵀ V⁻¹ d) / (2π √det V)`.
pub fn gaussian_wigner(state: &GaussianPure, q: f64, p: f64) -> f64 {
    wigner_from_moments(&state.moments(), q, p)
}

pub fn wigner_from_moments(m: &CovarianceMatrix2, q: f64, p: f64) -> f64 {
    let det = m.det();
    let (dq, dp) = (q - m.mean[0], p - m.mean[1]);
    // V⁻¹ = [[vpp, −vqp], [−vqp, vqq]] / det
    let quad = (m.vpp() * dq * dq - 2.0 * m.vqp() * dq * dp + m.vqq() * dp * dp) / det;
    (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
}
