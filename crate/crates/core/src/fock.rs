//! Truncated Fock-space linear algebra for one bosonic mode.
//!
//! States are amplitude vectors over `|0⟩ ..= |N⟩` (`N` is the cutoff). A
//! vector may be expressed in a shifted, squeezed frame: the amplitudes are
//! then coefficients over `D(c) S(s)|n⟩` rather than `|n⟩`, which keeps the
//! cutoff small for strongly squeezed or displaced states. The default frame
//! is the plain number basis. All unitaries are exponentials of banded
//! ladder-operator generators and are applied to vectors by a Chebyshev
//! expansion of the propagator, never by forming dense matrices.
//!
//! The top [`GUARD_FRACTION`] of the basis is a guard band: after every
//! unitary application its mass must stay below the leak tolerance.

use std::fmt;

use ndarray::Array2;
use serde::{Serialize, Serializer};

use crate::bessel::bessel_j_sequence;
use crate::covariance::CovarianceMatrix2;
use crate::error::{Error, Result};
use crate::C64;

pub const GUARD_FRACTION: f64 = 0.15;
pub const DEFAULT_LEAK_TOL: f64 = 1e-10;
pub const DEFAULT_R_MAX: f64 = 5.0;
pub const DEFAULT_N_MAX: usize = 4096;
/// Tolerance on `|‖ψ‖ − 1|` for inputs that must be normalized.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Number of basis states reserved as the guard band for a given cutoff.
pub fn guard_band(cutoff: usize) -> usize {
    ((GUARD_FRACTION * (cutoff + 1) as f64).ceil() as usize).max(1)
}

/// The basis `D(center) S(squeeze) |n⟩` that amplitudes refer to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Frame {
    pub squeeze: f64,
    pub center: C64,
}

impl Frame {
    pub const NUMBER: Frame = Frame {
        squeeze: 0.0,
        center: C64::new(0.0, 0.0),
    };

    pub fn new(squeeze: f64, center: C64) -> Result<Self> {
        if !squeeze.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::InvalidParameter("frame parameters must be finite".into()));
        }
        Ok(Self { squeeze, center })
    }

    pub fn squeezed(squeeze: f64) -> Result<Self> {
        Self::new(squeeze, C64::new(0.0, 0.0))
    }

    pub fn is_number(&self) -> bool {
        *self == Self::NUMBER
    }

    /// Phase-space centre `(√2 Re c, √2 Im c)`.
    pub fn center_quadratures(&self) -> (f64, f64) {
        let r2 = std::f64::consts::SQRT_2;
        (r2 * self.center.re, r2 * self.center.im)
    }

    /// Frame coordinates of a lab phase-space point.
    pub fn from_lab(&self, q: f64, p: f64) -> (f64, f64) {
        let (qc, pc) = self.center_quadratures();
        ((-self.squeeze).exp() * (q - qc), self.squeeze.exp() * (p - pc))
    }

    /// Lab coordinates of a frame phase-space point.
    pub fn to_lab(&self, q: f64, p: f64) -> (f64, f64) {
        let (qc, pc) = self.center_quadratures();
        (self.squeeze.exp() * q + qc, (-self.squeeze).exp() * p + pc)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D({}) S({})", self.center, self.squeeze)
    }
}

impl Serialize for Frame {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            squeeze: f64,
            center: [f64; 2],
        }
        Repr {
            squeeze: self.squeeze,
            center: [self.center.re, self.center.im],
        }
        .serialize(ser)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<C64>,
    frame: Frame,
    leak: f64,
}

impl FockVector {
    /// A vector in the plain number basis. Must have at least two entries.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::in_frame(amplitudes, Frame::NUMBER)
    }

    /// A vector over the basis `D(c) S(s)|n⟩` of `frame`.
    pub fn in_frame(amplitudes: Vec<C64>, frame: Frame) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidParameter(
                "a Fock vector needs cutoff >= 1".into(),
            ));
        }
        Frame::new(frame.squeeze, frame.center)?;
        let mut v = Self {
            amplitudes,
            frame,
            leak: 0.0,
        };
        v.leak = v.tail_mass();
        Ok(v)
    }

    /// The number state `|n⟩`.
    pub fn number_state(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::InvalidParameter(format!(
                "number state {n} exceeds cutoff {cutoff}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); cutoff + 1];
        amps[n] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Guard-band mass recorded when the vector was produced.
    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Mass in the guard band `n > N − Δ`.
    pub fn tail_mass(&self) -> f64 {
        let start = self.dim().saturating_sub(guard_band(self.cutoff()));
        self.amplitudes[start..].iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|c| c * factor).collect(),
            frame: self.frame,
            leak: self.leak * factor.norm_sqr(),
        }
    }

    /// `wa·a + wb·b`.
    pub fn combine(a: &Self, wa: C64, b: &Self, wb: C64) -> Result<Self> {
        check_compatible(a, b)?;
        let amplitudes = a
            .amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| wa * x + wb * y)
            .collect();
        Self::in_frame(amplitudes, a.frame)
    }

    /// The same state on a larger (or equal) cutoff, zero padded.
    pub fn padded(&self, cutoff: usize) -> Result<Self> {
        if cutoff < self.cutoff() {
            return Err(Error::CutoffMismatch {
                left: self.cutoff(),
                right: cutoff,
            });
        }
        let mut amps = self.amplitudes.clone();
        amps.resize(cutoff + 1, C64::new(0.0, 0.0));
        Self::in_frame(amps, self.frame)
    }

    /// Mean photon number of the frame amplitudes.
    pub fn frame_photon_mean(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }
}

fn check_compatible(a: &FockVector, b: &FockVector) -> Result<()> {
    if a.cutoff() != b.cutoff() {
        return Err(Error::CutoffMismatch {
            left: a.cutoff(),
            right: b.cutoff(),
        });
    }
    if a.frame != b.frame {
        return Err(Error::FrameMismatch {
            left: a.frame,
            right: b.frame,
        });
    }
    Ok(())
}

/// One power of a ladder operator with its matrix elements folded in:
/// `out[n + offset] += weights[i] * v[n]` for `n = first + i`.
#[derive(Debug, Clone)]
struct LadderTerm {
    offset: isize,
    first: usize,
    weights: Vec<C64>,
}

impl LadderTerm {
    /// `coeff · (a†)^k`.
    fn raising(dim: usize, k: usize, coeff: C64) -> Self {
        let weights = (0..dim.saturating_sub(k))
            .map(|n| coeff * falling_sqrt(n + k, k))
            .collect();
        Self {
            offset: k as isize,
            first: 0,
            weights,
        }
    }

    /// `coeff · a^k`.
    fn lowering(dim: usize, k: usize, coeff: C64) -> Self {
        let weights = (k..dim).map(|n| coeff * falling_sqrt(n, k)).collect();
        Self {
            offset: -(k as isize),
            first: k,
            weights,
        }
    }
}

/// `sqrt(n (n-1) ... (n-k+1))`.
fn falling_sqrt(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product::<f64>().sqrt()
}

/// Anti-Hermitian generator `G` of a unitary `exp(G)`, stored as ladder terms.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    terms: Vec<LadderTerm>,
}

impl Generator {
    fn new(dim: usize, terms: Vec<LadderTerm>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|t| t.weights.iter().any(|w| *w != C64::new(0.0, 0.0)))
            .collect();
        Self { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `out = G v`.
    fn matvec(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for t in &self.terms {
            let src = &v[t.first..t.first + t.weights.len()];
            let dst_start = (t.first as isize + t.offset) as usize;
            let dst = &mut out[dst_start..dst_start + t.weights.len()];
            for ((d, s), w) in dst.iter_mut().zip(src).zip(&t.weights) {
                *d += w * s;
            }
        }
    }

    /// Gershgorin bound on the spectral radius: the largest absolute row sum.
    fn spectral_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim];
        for t in &self.terms {
            for (i, w) in t.weights.iter().enumerate() {
                let row = (t.first as isize + i as isize + t.offset) as usize;
                rows[row] += w.norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `exp(G) v` via the Chebyshev expansion of `exp(iλ H/λ)` with
    /// `H = −iG` Hermitian and `λ` a bound on its spectrum.
    fn exp_apply(&self, v: &[C64]) -> Vec<C64> {
        let lambda = self.spectral_bound() * (1.0 + 1e-12);
        if self.is_zero() || lambda == 0.0 {
            return v.to_vec();
        }
        let n_terms = (lambda + 16.0 * (lambda / 2.0).cbrt().max(1.0) + 20.0).ceil() as usize;
        let mut coeffs = bessel_j_sequence(lambda, n_terms);
        while coeffs.len() > 2 && coeffs.last().is_some_and(|c| c.abs() < 1e-20) {
            coeffs.pop();
        }

        let dim = v.len();
        let mut prev = v.to_vec();
        let mut work = vec![C64::new(0.0, 0.0); dim];
        self.matvec(&prev, &mut work);
        // T_1 v = H v / λ = −i G v / λ
        let scale = C64::new(0.0, -1.0 / lambda);
        let mut cur: Vec<C64> = work.iter().map(|w| w * scale).collect();

        let mut phase = C64::new(0.0, 1.0);
        let c1 = phase * (2.0 * coeffs[1]);
        let mut acc: Vec<C64> = prev
            .iter()
            .zip(&cur)
            .map(|(p, c)| p * coeffs[0] + c * c1)
            .collect();

        let twice = scale * 2.0;
        for &jk in &coeffs[2..] {
            phase *= C64::new(0.0, 1.0);
            let ck = phase * (2.0 * jk);
            self.matvec(&cur, &mut work);
            for ((p, w), a) in prev.iter_mut().zip(&work).zip(acc.iter_mut()) {
                *p = twice * w - *p;
                *a += ck * *p;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        acc
    }
}

/// A truncated unitary `e^{iθ} exp(G)`.
///
/// `frame` is the frame whose basis the operator is written for; `None`
/// marks operators acting directly on amplitudes whatever their frame.
#[derive(Debug, Clone)]
pub struct FockOperator {
    generator: Generator,
    phase: C64,
    frame: Option<Frame>,
}

impl FockOperator {
    pub fn identity(cutoff: usize) -> Self {
        Self {
            generator: Generator::new(cutoff + 1, Vec::new()),
            phase: C64::new(1.0, 0.0),
            frame: None,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.generator.dim - 1
    }

    pub fn frame(&self) -> Option<Frame> {
        self.frame
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// Action on raw amplitudes, without any leak bookkeeping.
    pub fn act(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.generator.dim, "dimension mismatch");
        let mut out = self.generator.exp_apply(v);
        if self.phase != C64::new(1.0, 0.0) {
            out.iter_mut().for_each(|c| *c *= self.phase);
        }
        out
    }

    /// Dense matrix, built column by column. Only sensible for small cutoffs.
    pub fn matrix(&self) -> Array2<C64> {
        let dim = self.generator.dim;
        let mut m = Array2::zeros((dim, dim));
        let mut e = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            let col = self.act(&e);
            for (i, c) in col.into_iter().enumerate() {
                m[[i, j]] = c;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }

    /// `max |(U†U − I)_{mn}|` over the block below the guard band.
    pub fn unitarity_defect(&self) -> f64 {
        let u = self.matrix();
        let keep = self.generator.dim - guard_band(self.cutoff());
        let mut worst: f64 = 0.0;
        for m in 0..keep {
            for n in 0..keep {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..self.generator.dim {
                    s += u[[k, m]].conj() * u[[k, n]];
                }
                if m == n {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// `|0⟩` on the given cutoff.
pub fn make_vacuum(cutoff: usize) -> Result<FockVector> {
    if cutoff == 0 {
        return Err(Error::InvalidParameter(
            "cutoff 0 cannot hold a guard band".into(),
        ));
    }
    FockVector::number_state(0, cutoff)
}

/// `D(α) = exp(α a† − α* a)` on the truncated space.
pub fn displacement_operator(alpha: C64, cutoff: usize) -> FockOperator {
    displacement_in_frame(alpha, Frame::NUMBER, cutoff)
}

/// `D(α)` as seen by amplitudes over `D(c) S(s)|n⟩`:
/// `S(s)† D(c)† D(α) D(c) S(s) = e^{2i Im(α c*)} D(α cosh s − α* sinh s)`,
/// from `S† a S = a cosh s + a† sinh s`.
pub fn displacement_in_frame(alpha: C64, frame: Frame, cutoff: usize) -> FockOperator {
    let dim = cutoff + 1;
    let (ch, sh) = (frame.squeeze.cosh(), frame.squeeze.sinh());
    let gamma = alpha * ch - alpha.conj() * sh;
    let phase = C64::new(0.0, 2.0 * (alpha * frame.center.conj()).im).exp();
    FockOperator {
        generator: Generator::new(
            dim,
            vec![
                LadderTerm::raising(dim, 1, gamma),
                LadderTerm::lowering(dim, 1, -gamma.conj()),
            ],
        ),
        phase,
        frame: Some(frame),
    }
}

/// `S(r) = exp(r/2 (a†² − a²))`, rejecting `|r| > DEFAULT_R_MAX`.
pub fn squeezing_operator(r: f64, cutoff: usize) -> Result<FockOperator> {
    squeezing_operator_bounded(r, cutoff, DEFAULT_R_MAX)
}

pub fn squeezing_operator_bounded(r: f64, cutoff: usize, r_max: f64) -> Result<FockOperator> {
    if !r.is_finite() || r.abs() > r_max {
        return Err(Error::InvalidParameter(format!(
            "squeeze {r} outside |r| <= {r_max}; larger values need an intractable cutoff"
        )));
    }
    let dim = cutoff + 1;
    let half = C64::new(r / 2.0, 0.0);
    Ok(FockOperator {
        generator: Generator::new(
            dim,
            vec![
                LadderTerm::raising(dim, 2, half),
                LadderTerm::lowering(dim, 2, -half),
            ],
        ),
        phase: C64::new(1.0, 0.0),
        frame: None,
    })
}

/// `U|ψ⟩`, failing if the result leaks more than [`DEFAULT_LEAK_TOL`] into
/// the guard band.
pub fn apply(op: &FockOperator, state: &FockVector) -> Result<FockVector> {
    apply_with_tol(op, state, DEFAULT_LEAK_TOL)
}

pub fn apply_with_tol(op: &FockOperator, state: &FockVector, leak_tol: f64) -> Result<FockVector> {
    if op.cutoff() != state.cutoff() {
        return Err(Error::CutoffMismatch {
            left: op.cutoff(),
            right: state.cutoff(),
        });
    }
    if let Some(f) = op.frame {
        if f != state.frame {
            return Err(Error::FrameMismatch {
                left: f,
                right: state.frame,
            });
        }
    }
    let out = FockVector::in_frame(op.act(&state.amplitudes), state.frame)?;
    if !(out.leak <= leak_tol) {
        return Err(Error::Convergence {
            cutoff: out.cutoff(),
            leak: out.leak,
            detail: format!("guard-band mass exceeds tolerance {leak_tol:e}"),
        });
    }
    Ok(out)
}

/// `⟨a|b⟩ = Σ conj(a_n) b_n`.
pub fn inner(a: &FockVector, b: &FockVector) -> Result<C64> {
    check_compatible(a, b)?;
    Ok(a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Number-basis expectations `(⟨a⟩, ⟨a²⟩, ⟨a†a⟩)` of the frame amplitudes.
fn ladder_expectations(c: &[C64]) -> (C64, C64, f64) {
    let mut a1 = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    let mut n = 0.0;
    for k in 1..c.len() {
        a1 += c[k - 1].conj() * c[k] * (k as f64).sqrt();
        n += k as f64 * c[k].norm_sqr();
        if k >= 2 {
            a2 += c[k - 2].conj() * c[k] * ((k * (k - 1)) as f64).sqrt();
        }
    }
    (a1, a2, n)
}

/// First moments and symmetrized covariance of a normalized state, in the
/// lab quadratures regardless of the vector's frame.
pub fn quadrature_moments(state: &FockVector) -> Result<CovarianceMatrix2> {
    if !state.is_normalized() {
        return Err(Error::NotNormalized { norm: state.norm() });
    }
    let (a1, a2, n) = ladder_expectations(&state.amplitudes);
    let sqrt2 = std::f64::consts::SQRT_2;
    let (mq, mp) = (sqrt2 * a1.re, sqrt2 * a1.im);
    let qq = a2.re + n + 0.5;
    let pp = n + 0.5 - a2.re;
    let qp = a2.im;
    let frame_moments = CovarianceMatrix2::new([mq, mp], qq - mq * mq, pp - mp * mp, qp - mq * mp);
    let (qc, pc) = state.frame.center_quadratures();
    Ok(frame_moments.squeezed_by(state.frame.squeeze).shifted(qc, pc))
}
