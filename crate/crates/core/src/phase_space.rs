//! Wigner functions on rectangular phase-space grids.
//!
//! The numeric transform works from the position wavefunction
//! `ψ(x) = Σ c_n φ_n(x)` and evaluates
//! `W(q, p) = (1/π) ∫ ψ*(q + y) ψ(q − y) e^{2ipy} dy`
//! as a lattice sum. With a lattice step below the aliasing limit set by the
//! momentum support, the sum is exact to rounding for band-limited
//! integrands, and each grid row reduces to one matrix product against
//! cosine and sine tables.
//!
//! States simulated in a frame `D(c) S(s)|n⟩` are evaluated in frame
//! coordinates: `W_lab(q, p) = W_frame(e^{−s}(q − q_c), e^{s}(p − p_c))`.

use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};
use std::str::FromStr;

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayViewMut2, Axis};
use ndarray::parallel::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockVector, Frame};
use crate::gaussian::{braid, normalization_factors};
use crate::switch::{Branch, SwitchParams};
use crate::C64;

pub const DEFAULT_POINTS: usize = 257;
pub const MIN_POINTS: usize = 16;
/// Allowed `|∬W − 1|` for a grid to count as covering the state.
pub const NORMALIZATION_TOL: f64 = 1e-6;

const ROW_CHUNK: usize = 64;
const SUPPORT_SAMPLES: usize = 4096;
/// Marginal densities (relative to their peak) below which the wavefunction
/// is dropped from the lattice sum, and below which auto bounds stop. A
/// Gaussian reaches them about 10.9 and 8.6 standard deviations out.
const LATTICE_THRESHOLD: f64 = 1e-26;
const BOUNDS_THRESHOLD: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Bounds {
    /// Fit the grid to the support of the state's marginals.
    #[default]
    Auto,
    Fixed {
        q_min: f64,
        q_max: f64,
        p_min: f64,
        p_max: f64,
    },
}

impl Bounds {
    pub fn fixed(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let b = Bounds::Fixed {
            q_min,
            q_max,
            p_min,
            p_max,
        };
        check_bounds([q_min, q_max, p_min, p_max])?;
        Ok(b)
    }
}

impl FromStr for Bounds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Bounds::Auto);
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("bad bounds {s:?}: {e}")))?;
        match parts[..] {
            [a, b, c, d] => Bounds::fixed(a, b, c, d),
            _ => Err(Error::InvalidParameter(format!(
                "bounds must be `auto` or `qmin,qmax,pmin,pmax`, got {s:?}"
            ))),
        }
    }
}

fn check_bounds(b: [f64; 4]) -> Result<()> {
    if b.iter().any(|v| !v.is_finite()) || !(b[0] < b[1]) || !(b[2] < b[3]) {
        return Err(Error::InvalidParameter(format!("grid bounds {b:?} must be finite and ordered")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_q: usize,
    pub n_p: usize,
    pub bounds: Bounds,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_q: DEFAULT_POINTS,
            n_p: DEFAULT_POINTS,
            bounds: Bounds::Auto,
        }
    }
}

impl GridSpec {
    pub fn new(n_q: usize, n_p: usize, bounds: Bounds) -> Self {
        Self { n_q, n_p, bounds }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_q < MIN_POINTS || self.n_p < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_POINTS} points per axis, got {}x{}",
                self.n_q, self.n_p
            )));
        }
        if let Bounds::Fixed {
            q_min,
            q_max,
            p_min,
            p_max,
        } = self.bounds
        {
            check_bounds([q_min, q_max, p_min, p_max])?;
        }
        Ok(())
    }

    /// Same bounds with step halved: `n → 2n − 1`.
    pub fn refined(&self) -> Self {
        Self {
            n_q: 2 * self.n_q - 1,
            n_p: 2 * self.n_p - 1,
            bounds: self.bounds,
        }
    }

    pub fn with_bounds(&self, b: [f64; 4]) -> Self {
        Self {
            bounds: Bounds::Fixed {
                q_min: b[0],
                q_max: b[1],
                p_min: b[2],
                p_max: b[3],
            },
            ..*self
        }
    }
}

/// Wigner values sampled at `q_i = q_min + i Δq`, `p_j = p_min + j Δp`,
/// stored with `q` along axis 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub values: Array2<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(bounds: [f64; 4], values: Array2<f64>) -> Result<Self> {
        check_bounds(bounds)?;
        let (n_q, n_p) = values.dim();
        if n_q < 2 || n_p < 2 {
            return Err(Error::InvalidParameter("grid needs two points per axis".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid holds non-finite values".into()));
        }
        Ok(Self {
            q_min: bounds[0],
            q_max: bounds[1],
            p_min: bounds[2],
            p_max: bounds[3],
            values,
        })
    }

    pub fn n_q(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.values.ncols()
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.q_min, self.q_max, self.p_min, self.p_max]
    }

    pub fn step_q(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_q() - 1) as f64
    }

    pub fn step_p(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p() - 1) as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        axis_point(self.q_min, self.q_max, self.n_q(), i)
    }

    pub fn p(&self, j: usize) -> f64 {
        axis_point(self.p_min, self.p_max, self.n_p(), j)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point carrying the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for ((i, j), &v) in self.values.indexed_iter() {
            if v > best.2 {
                best = (i, j, v);
            }
        }
        (self.q(best.0), self.p(best.1))
    }

    /// `∬ W dq dp` by composite Simpson.
    pub fn integrate(&self) -> f64 {
        self.weighted_sum(|v| v)
    }

    /// `∬ |W| dq dp = ∬ W + 2 ∬ max(−W, 0)`.
    pub fn integrate_abs(&self) -> f64 {
        self.integrate() + 2.0 * self.negative_volume()
    }

    /// `∬ max(−W, 0) dq dp`.
    ///
    /// Simpson on `|W|` degrades to second order at the zero contour, so the
    /// negative part is integrated cell by cell on a local tensor-product
    /// quintic interpolant: by 4×4 Gauss–Legendre where the whole stencil is
    /// negative, and by fine midpoint sampling where it changes sign.
    pub fn negative_volume(&self) -> f64 {
        let (n_q, n_p) = self.values.dim();
        if n_q < STENCIL || n_p < STENCIL {
            let neg = |v: f64| (-v).max(0.0);
            return self.weighted_sum(neg);
        }
        let area = self.step_q() * self.step_p();
        let floor = ZERO_FLOOR * self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rows: Vec<f64> = (0..n_q - 1)
            .into_par_iter()
            .map(|i| (0..n_p - 1).map(|j| self.cell_negative(i, j, floor)).sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() * area
    }

    /// Negative volume of cell `(i, j)` in units of the cell area. Samples
    /// within `floor` of zero count as zero when classifying the cell.
    fn cell_negative(&self, i: usize, j: usize, floor: f64) -> f64 {
        let (n_q, n_p) = self.values.dim();
        let back = STENCIL / 2 - 1;
        let bi = i.saturating_sub(back).min(n_q - STENCIL);
        let bj = j.saturating_sub(back).min(n_p - STENCIL);
        let mut st = [[0.0; STENCIL]; STENCIL];
        let (mut any_neg, mut any_pos) = (false, false);
        for a in 0..STENCIL {
            for b in 0..STENCIL {
                let v = self.values[[bi + a, bj + b]];
                st[a][b] = v;
                any_neg |= v < -floor;
                any_pos |= v > floor;
            }
        }
        if !any_neg {
            return 0.0;
        }
        let (oi, oj) = ((i - bi) as f64, (j - bj) as f64);
        // contract along q first, then p
        let along_q = |lq: &[f64; STENCIL]| -> [f64; STENCIL] {
            let mut r = [0.0; STENCIL];
            for (a, w) in lq.iter().enumerate() {
                for b in 0..STENCIL {
                    r[b] += w * st[a][b];
                }
            }
            r
        };
        let dot = |r: &[f64; STENCIL], lp: &[f64; STENCIL]| -> f64 {
            r.iter().zip(lp).map(|(x, y)| x * y).sum()
        };
        if !any_pos {
            let lp: Vec<(f64, [f64; STENCIL])> =
                GAUSS4.iter().map(|&(t, w)| (w, lagrange(oj + t))).collect();
            let mut acc = 0.0;
            for (tq, wq) in GAUSS4 {
                let r = along_q(&lagrange(oi + tq));
                for (wp, l) in &lp {
                    acc += wq * wp * (-dot(&r, l)).max(0.0);
                }
            }
            return acc;
        }
        let lp: Vec<[f64; STENCIL]> = (0..KINK_SAMPLES)
            .map(|b| lagrange(oj + (b as f64 + 0.5) / KINK_SAMPLES as f64))
            .collect();
        let mut acc = 0.0;
        for a in 0..KINK_SAMPLES {
            let r = along_q(&lagrange(oi + (a as f64 + 0.5) / KINK_SAMPLES as f64));
            for l in &lp {
                acc += (-dot(&r, l)).max(0.0);
            }
        }
        acc / (KINK_SAMPLES * KINK_SAMPLES) as f64
    }

    fn weighted_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        let wq = simpson_weights(self.n_q(), self.step_q());
        let wp = simpson_weights(self.n_p(), self.step_p());
        self.values
            .outer_iter()
            .zip(&wq)
            .map(|(row, a)| a * row.iter().zip(&wp).map(|(&v, b)| b * f(v)).sum::<f64>())
            .sum()
    }

    /// Max and RMS of the pointwise difference; grids must share a layout.
    pub fn residual(&self, other: &PhaseSpaceGrid) -> Result<Residual> {
        if self.values.dim() != other.values.dim() || self.bounds() != other.bounds() {
            return Err(Error::InvalidParameter("grids differ in layout".into()));
        }
        let mut max_abs: f64 = 0.0;
        let mut sq = 0.0;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            let d = a - b;
            max_abs = max_abs.max(d.abs());
            sq += d * d;
        }
        Ok(Residual {
            max_abs,
            rms: (sq / self.values.len() as f64).sqrt(),
        })
    }
}

/// Relative magnitude below which grid values are treated as rounding noise
/// when looking for sign changes.
const ZERO_FLOOR: f64 = 1e-13;

/// Midpoint samples per axis in cells cut by the zero contour.
const KINK_SAMPLES: usize = 64;

/// Four-point Gauss–Legendre nodes and weights on `[0, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Interpolation stencil width per axis (quintic).
const STENCIL: usize = 6;

/// Lagrange basis on nodes `0, 1, …, STENCIL − 1` evaluated at `x`.
fn lagrange(x: f64) -> [f64; STENCIL] {
    let mut out = [1.0; STENCIL];
    for (k, o) in out.iter_mut().enumerate() {
        for m in 0..STENCIL {
            if m != k {
                *o *= (x - m as f64) / (k as f64 - m as f64);
            }
        }
    }
    out
}

fn axis_point(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + i as f64 * (hi - lo) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub max_abs: f64,
    pub rms: f64,
}

/// Composite Simpson weights for `n ≥ 2` equally spaced points. Even counts
/// finish with a 3/8 panel; two points fall back to the trapezoid.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => return vec![h / 2.0; 2],
        3 => return vec![h / 3.0, 4.0 * h / 3.0, h / 3.0],
        _ => {}
    }
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if n % 2 == 0 {
        let k = n - 4;
        for (d, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[k + d] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// `∬ |W|` of a grid, rejecting non-finite samples.
pub fn integrate_abs(grid: &PhaseSpaceGrid) -> Result<f64> {
    if grid.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite Wigner sample".into()));
    }
    Ok(grid.integrate_abs())
}

/// `Σ c_n φ_n(x)` with Hermite functions `φ_n` for `q = (a + a†)/√2`.
///
/// The three-term recurrence runs on a mantissa with a separately tracked
/// exponent, so `φ_0 = π^{−1/4} e^{−x²/2}` underflowing at large `|x|` does
/// not wipe out the high orders that are still significant there.
pub fn hermite_sum(coeffs: &[C64], x: f64) -> C64 {
    const RESCALE: f64 = 1e150;
    let mut log_scale = -x * x / 2.0 - PI.ln() / 4.0;
    let mut factor = log_scale.exp();
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    let mut acc = C64::new(0.0, 0.0);
    for (n, c) in coeffs.iter().enumerate() {
        if n > 0 {
            let next = (2.0 / n as f64).sqrt() * x * cur - ((n - 1) as f64 / n as f64).sqrt() * prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                prev /= RESCALE;
                cur /= RESCALE;
                log_scale += RESCALE.ln();
                factor = log_scale.exp();
            }
        }
        if factor != 0.0 {
            acc += c * (cur * factor);
        }
    }
    acc
}

/// Amplitudes interpreted in the number basis (frame label dropped).
fn number_view(state: &FockVector) -> Result<FockVector> {
    FockVector::in_frame(state.amplitudes().to_vec(), Frame::NUMBER)
}

/// `(−i)^n c_n`: coefficients of the momentum wavefunction.
fn momentum_coeffs(c: &[C64]) -> Vec<C64> {
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ];
    c.iter().enumerate().map(|(n, v)| v * phases[n % 4]).collect()
}

/// Intervals where the density `|f(x)|²` exceeds `LATTICE_THRESHOLD` and
/// `BOUNDS_THRESHOLD` of its peak, scanning `[centre ± 16 sd]`.
fn marginal_support(coeffs: &[C64], centre: f64, sd: f64) -> [(f64, f64); 2] {
    let half = 16.0 * sd.max(0.5) + 2.0;
    let lo = centre - half;
    let h = 2.0 * half / (SUPPORT_SAMPLES - 1) as f64;
    let dens: Vec<f64> = (0..SUPPORT_SAMPLES)
        .into_par_iter()
        .map(|i| hermite_sum(coeffs, lo + i as f64 * h).norm_sqr())
        .collect();
    let peak = dens.iter().copied().fold(0.0, f64::max);
    let extent = |thr: f64| {
        let cut = peak * thr;
        let first = dens.iter().position(|&d| d > cut).unwrap_or(0);
        let last = dens.iter().rposition(|&d| d > cut).unwrap_or(SUPPORT_SAMPLES - 1);
        (lo + first.saturating_sub(2) as f64 * h, lo + (last + 2) as f64 * h)
    };
    [extent(LATTICE_THRESHOLD), extent(BOUNDS_THRESHOLD)]
}

/// Position and momentum support of a state in its own frame coordinates:
/// the wide lattice extent and the tighter plotting extent.
#[derive(Debug, Clone, Copy)]
struct FrameSupport {
    q: (f64, f64),
    p: (f64, f64),
    q_bounds: (f64, f64),
    p_bounds: (f64, f64),
}

fn frame_support(state: &FockVector) -> Result<FrameSupport> {
    let view = number_view(state)?;
    let m = fock::quadrature_moments(&view)?;
    let c = view.amplitudes();
    let [q, q_bounds] = marginal_support(c, m.mean[0], m.sd_q());
    let [p, p_bounds] = marginal_support(&momentum_coeffs(c), m.mean[1], m.sd_p());
    Ok(FrameSupport {
        q,
        p,
        q_bounds,
        p_bounds,
    })
}

/// Round outwards to a multiple of a decade unit an eighth of the width.
fn round_outward(lo: f64, hi: f64) -> (f64, f64) {
    let unit = 10f64.powf(((hi - lo) / 8.0).log10().floor());
    ((lo / unit).floor() * unit, (hi / unit).ceil() * unit)
}

/// Lab-frame bounds covering the support of both marginals.
pub fn auto_bounds(state: &FockVector) -> Result<[f64; 4]> {
    let sup = frame_support(state)?;
    let f = state.frame();
    let (q_lo, p_lo) = f.to_lab(sup.q_bounds.0, sup.p_bounds.0);
    let (q_hi, p_hi) = f.to_lab(sup.q_bounds.1, sup.p_bounds.1);
    let (q0, q1) = round_outward(q_lo, q_hi);
    let (p0, p1) = round_outward(p_lo, p_hi);
    Ok([q0, q1, p0, p1])
}

fn resolve_bounds(state: &FockVector, spec: &GridSpec) -> Result<[f64; 4]> {
    match spec.bounds {
        Bounds::Auto => auto_bounds(state),
        Bounds::Fixed {
            q_min,
            q_max,
            p_min,
            p_max,
        } => Ok([q_min, q_max, p_min, p_max]),
    }
}

/// Wigner function of a pure state on the grid, without checking that the
/// grid captures the whole state.
pub fn sample_wigner(state: &FockVector, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let bounds = resolve_bounds(state, spec)?;
    let values = evaluate(state, bounds, spec.n_q, spec.n_p)?;
    PhaseSpaceGrid::new(bounds, values)
}

/// Wigner function of a normalized pure state, checked to integrate to one.
pub fn wigner_numeric(state: &FockVector, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    if !state.is_normalized() {
        return Err(Error::NotNormalized { norm: state.norm() });
    }
    let grid = sample_wigner(state, spec)?;
    let deficit = grid.integrate() - 1.0;
    if !(deficit.abs() <= NORMALIZATION_TOL) {
        return Err(Error::Quadrature {
            deficit,
            detail: format!(
                "{}x{} grid over {:?} does not capture the state",
                grid.n_q(),
                grid.n_p(),
                grid.bounds()
            ),
        });
    }
    Ok(grid)
}

fn evaluate(state: &FockVector, bounds: [f64; 4], n_q: usize, n_p: usize) -> Result<Array2<f64>> {
    let frame = state.frame();
    let shrink = (-frame.squeeze).exp();
    let sup = frame_support(state)?;
    let coeffs = state.amplitudes();

    let hq_lab = (bounds[1] - bounds[0]) / (n_q - 1) as f64;
    let (q0, pe_lo) = frame.from_lab(bounds[0], bounds[2]);
    let (_, pe_hi) = frame.from_lab(bounds[1], bounds[3]);
    let hq = hq_lab * shrink;
    let p_eval: Vec<f64> = (0..n_p)
        .map(|j| frame.from_lab(0.0, axis_point(bounds[2], bounds[3], n_p, j)).1)
        .collect();

    // Frequencies of the y-integrand are 2(p − p̄) with p̄ in the momentum
    // support; keep them below the lattice Nyquist limit π/g.
    let spread = (pe_hi - sup.p.0).max(sup.p.1 - pe_lo).max(1e-3);
    let nyquist = PI / spread;
    let width = sup.q.1 - sup.q.0;
    let g_max = (0.9 * nyquist).min(width / 64.0);
    let m = (hq / g_max).ceil().max(1.0) as i64;
    let g = hq / m as f64;

    let j_lo = ((sup.q.0 - q0) / g).floor() as i64;
    let j_hi = ((sup.q.1 - q0) / g).ceil() as i64;
    let lattice: Vec<C64> = (j_lo..=j_hi)
        .into_par_iter()
        .map(|j| hermite_sum(coeffs, q0 + j as f64 * g))
        .collect();
    let psi = |j: i64| lattice[(j - j_lo) as usize];

    let k_of_row = |i: usize| -> i64 {
        let c = i as i64 * m;
        (j_hi - c).min(c - j_lo)
    };
    let k_max = (0..n_q).map(k_of_row).max().unwrap_or(-1);
    let mut values = Array2::<f64>::zeros((n_q, n_p));
    if k_max < 0 {
        return Ok(values);
    }
    let nk = k_max as usize + 1;

    let mut cos_t = Array2::<f64>::zeros((nk, n_p));
    let mut sin_t = Array2::<f64>::zeros((nk, n_p));
    cos_t
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(sin_t.axis_iter_mut(Axis(0)).into_par_iter())
        .enumerate()
        .for_each(|(k, (mut cr, mut sr))| {
            for (j, &p) in p_eval.iter().enumerate() {
                let (sn, cs) = (2.0 * p * k as f64 * g).sin_cos();
                cr[j] = cs;
                sr[j] = sn;
            }
        });

    let scale = g * FRAC_1_PI;
    values
        .axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
        .into_par_iter()
        .enumerate()
        .for_each(|(chunk, mut out): (usize, ArrayViewMut2<f64>)| {
            let rows = out.nrows();
            let mut re = Array2::<f64>::zeros((rows, nk));
            let mut im = Array2::<f64>::zeros((rows, nk));
            for r in 0..rows {
                let i = chunk * ROW_CHUNK + r;
                let c = i as i64 * m;
                for k in 0..=k_of_row(i).max(-1) {
                    let f = psi(c + k).conj() * psi(c - k);
                    let w = if k == 0 { scale } else { 2.0 * scale };
                    re[[r, k as usize]] = w * f.re;
                    im[[r, k as usize]] = -w * f.im;
                }
            }
            general_mat_mul(1.0, &re, &cos_t, 0.0, &mut out);
            general_mat_mul(1.0, &im, &sin_t, 1.0, &mut out);
        });
    Ok(values)
}

/// `W(q, p)` as the displaced-parity expectation
/// `(1/π) ⟨ψ| D(α) Π D(α)† |ψ⟩`, `α = (q + ip)/√2`, computed in Fock space.
/// Slow; intended for spot checks.
pub fn wigner_parity(state: &FockVector, q: f64, p: f64) -> Result<f64> {
    let (qf, pf) = state.frame().from_lab(q, p);
    let alpha = C64::new(qf, pf) / SQRT_2;
    let base = number_view(state)?;
    let mut cutoff = base.cutoff() + 2 * (alpha.norm() + 6.0).powi(2).ceil() as usize + 32;
    for _ in 0..5 {
        let padded = base.padded(cutoff)?;
        match fock::apply_with_tol(&fock::displacement_operator(-alpha, cutoff), &padded, 1e-13) {
            Ok(shifted) => {
                let parity: f64 = shifted
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(n, c)| if n % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
                    .sum();
                return Ok(parity * FRAC_1_PI);
            }
            Err(Error::Convergence { .. }) => cutoff *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Convergence {
        cutoff,
        leak: f64::NAN,
        detail: "displaced-parity evaluation did not fit".into(),
    })
}

/// How the `v₁`, `v₂` terms of the closed-form interference expression enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VConvention {
    /// `exp(−2 v²)` exactly as written.
    #[default]
    Verbatim,
    /// `exp(−2 v)`: the written `v` already is a squared distance.
    AsSquared,
}

impl FromStr for VConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(VConvention::Verbatim),
            "as-squared" | "as_squared" => Ok(VConvention::AsSquared),
            other => Err(Error::InvalidParameter(format!("unknown v convention {other:?}"))),
        }
    }
}

/// The free symbols of the two-Gaussian-plus-fringe expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InterferenceParams {
    pub mu: f64,
    pub nu: f64,
    pub v_convention: VConvention,
}

/// The closed-form interference expression at one point:
///
/// ```text
/// W = [e^{−2v₁²} + e^{−2v₂²} ± 2 e^{−2v₃²} cos(2(1−μ)(px − qy) − 2ν(px + qy))] / (π G±)
/// v₁ = e^{2r}(q − x)² + e^{−2r}(y − p)²
/// v₂ = e^{2r}(q − e^r x)² + e^{−2r}(e^{−r} y − p)²
/// v₃ = q² + p²
/// ```
pub fn interference_point(r: f64, x: f64, y: f64, g: f64, sign: f64, e: &InterferenceParams, q: f64, p: f64) -> f64 {
    let (ep, em) = ((2.0 * r).exp(), (-2.0 * r).exp());
    let v1 = ep * (q - x).powi(2) + em * (y - p).powi(2);
    let v2 = ep * (q - r.exp() * x).powi(2) + em * ((-r).exp() * y - p).powi(2);
    let v3 = q * q + p * p;
    let term = |v: f64| match e.v_convention {
        VConvention::Verbatim => (-2.0 * v * v).exp(),
        VConvention::AsSquared => (-2.0 * v).exp(),
    };
    let phase = 2.0 * (1.0 - e.mu) * (p * x - q * y) - 2.0 * e.nu * (p * x + q * y);
    (term(v1) + term(v2) + sign * 2.0 * term(v3) * phase.cos()) / (PI * g)
}

/// Bounds covering both order components `S(r)D(α)|0⟩` and `D(α)S(r)|0⟩`
/// to eight standard deviations, from their closed-form moments.
pub fn component_bounds(params: &SwitchParams) -> [f64; 4] {
    let alpha = params.alpha();
    let (sq, sp) = ((params.r).exp() / SQRT_2, (-params.r).exp() / SQRT_2);
    let centres = [braid(alpha, params.r) * SQRT_2, alpha * SQRT_2];
    let (mut b0, mut b1, mut b2, mut b3) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in centres {
        b0 = b0.min(c.re - 8.0 * sq);
        b1 = b1.max(c.re + 8.0 * sq);
        b2 = b2.min(c.im - 8.0 * sp);
        b3 = b3.max(c.im + 8.0 * sp);
    }
    let (q0, q1) = round_outward(b0, b1);
    let (p0, p1) = round_outward(b2, b3);
    [q0, q1, p0, p1]
}

/// The closed-form interference expression on a grid; auto bounds come from
/// [`component_bounds`].
pub fn wigner_interference(
    params: &SwitchParams,
    interference: &InterferenceParams,
    branch: Branch,
    spec: &GridSpec,
) -> Result<PhaseSpaceGrid> {
    params.validate()?;
    spec.validate()?;
    let (gp, gm) = normalization_factors(params.alpha(), params.r);
    let g = match branch {
        Branch::Plus => gp,
        Branch::Minus => gm,
    };
    if g < params.degeneracy_tol {
        return Err(Error::DegenerateOutcome { branch, norm_sq: g });
    }
    let bounds = match spec.bounds {
        Bounds::Auto => component_bounds(params),
        Bounds::Fixed {
            q_min,
            q_max,
            p_min,
            p_max,
        } => [q_min, q_max, p_min, p_max],
    };
    let mut values = Array2::<f64>::zeros((spec.n_q, spec.n_p));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let q = axis_point(bounds[0], bounds[1], spec.n_q, i);
            for j in 0..spec.n_p {
                let p = axis_point(bounds[2], bounds[3], spec.n_p, j);
                row[j] = interference_point(params.r, params.x, params.y, g, branch.sign(), interference, q, p);
            }
        });
    PhaseSpaceGrid::new(bounds, values)
}

/// Sub-grid `[i0..i1) × [j0..j1)` keeping the axis coordinates.
pub fn crop(grid: &PhaseSpaceGrid, i0: usize, i1: usize, j0: usize, j1: usize) -> Result<PhaseSpaceGrid> {
    if i1 > grid.n_q() || j1 > grid.n_p() || i1 < i0 + 2 || j1 < j0 + 2 {
        return Err(Error::InvalidParameter("crop window out of range".into()));
    }
    let bounds = [grid.q(i0), grid.q(i1 - 1), grid.p(j0), grid.p(j1 - 1)];
    PhaseSpaceGrid::new(bounds, grid.values.slice(s![i0..i1, j0..j1]).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{displacement_operator, make_vacuum, squeezing_operator};
    use crate::gaussian::{wigner_from_moments, GaussianPure, Order};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn simpson_weights_integrate_cubics_exactly() {
        for n in [2usize, 3, 4, 5, 6, 17, 18] {
            let h = 2.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let f = |x: f64| if n <= 2 { 1.0 + x } else { x * x * x - 2.0 * x * x + 1.0 };
            let got: f64 = w.iter().enumerate().map(|(i, w)| w * f(i as f64 * h)).sum();
            let want = if n <= 2 { 4.0 } else { 4.0 - 16.0 / 3.0 + 2.0 };
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn hermite_functions_reference_values() {
        // φ₀(0) = π^{-1/4}, φ₁(1) = √2 π^{-1/4} e^{-1/2}, φ₂(0) = −π^{-1/4}/√2
        let pi4 = PI.powf(-0.25);
        assert!((hermite_sum(&[c(1.0)], 0.0).re - pi4).abs() < 1e-15);
        assert!((hermite_sum(&[c(0.0), c(1.0)], 1.0).re - SQRT_2 * pi4 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((hermite_sum(&[c(0.0), c(0.0), c(1.0)], 0.0).re + pi4 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn high_order_hermite_function_survives_underflow() {
        // φ_n is normalized: ∫ φ_n² = 1 even where φ₀ underflows.
        let n = 1500;
        let mut coeffs = vec![c(0.0); n + 1];
        coeffs[n] = c(1.0);
        let edge = (2.0 * n as f64 + 1.0).sqrt() + 8.0;
        let pts = 40001;
        let h = 2.0 * edge / (pts - 1) as f64;
        let total: f64 = (0..pts)
            .map(|i| hermite_sum(&coeffs, -edge + i as f64 * h).norm_sqr() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn vacuum_wigner() {
        let spec = GridSpec::new(65, 65, Bounds::fixed(-6.0, 6.0, -6.0, 6.0).unwrap());
        let grid = wigner_numeric(&make_vacuum(20).unwrap(), &spec).unwrap();
        assert!((grid.values[[32, 32]] - FRAC_1_PI).abs() < 1e-12);
        for ((i, j), v) in grid.values.indexed_iter() {
            let (q, p) = (grid.q(i), grid.p(j));
            assert!((v - FRAC_1_PI * (-(q * q + p * p)).exp()).abs() < 1e-13, "{q} {p} {v} {}", FRAC_1_PI * (-(q * q + p * p)).exp());
        }
    }

    #[test]
    fn fock_one_wigner() {
        let one = FockVector::number_state(1, 20).unwrap();
        let grid = wigner_numeric(&one, &GridSpec::new(81, 81, Bounds::fixed(-8.0, 8.0, -8.0, 8.0).unwrap())).unwrap();
        for ((i, j), v) in grid.values.indexed_iter() {
            let rr = grid.q(i).powi(2) + grid.p(j).powi(2);
            let want = FRAC_1_PI * (2.0 * rr - 1.0) * (-rr).exp();
            assert!((v - want).abs() < 1e-12, "{} {} {v} {want}", grid.q(i), grid.p(j));
        }
        assert!((grid.values[[40, 40]] + FRAC_1_PI).abs() < 1e-12);
    }

    #[test]
    fn coherent_peak_and_integral() {
        let cut = 60;
        let coh = fock::apply(&displacement_operator(c(2.0), cut), &make_vacuum(cut).unwrap()).unwrap();
        let grid = wigner_numeric(&coh, &GridSpec::default()).unwrap();
        let (q, p) = grid.argmax();
        assert!((q - 2.0 * SQRT_2).abs() <= grid.step_q());
        assert!(p.abs() <= grid.step_p());
        assert!(grid.max() <= FRAC_1_PI + 1e-9);
    }

    #[test]
    fn squeezed_state_matches_gaussian_formula() {
        let cut = 320;
        let alpha = C64::new(0.8, -0.5);
        let v = fock::apply(&displacement_operator(alpha, cut), &make_vacuum(cut).unwrap()).unwrap();
        let v = fock::apply(&squeezing_operator(1.0, cut).unwrap(), &v).unwrap();
        let grid = wigner_numeric(&v, &GridSpec::new(101, 101, Bounds::Auto)).unwrap();
        let moments = GaussianPure::new(alpha, 1.0, Order::DisplaceThenSqueeze).moments();
        for ((i, j), w) in grid.values.indexed_iter() {
            assert!((w - wigner_from_moments(&moments, grid.q(i), grid.p(j))).abs() < 1e-10, "{} {} {w} {}", grid.q(i), grid.p(j), wigner_from_moments(&moments, grid.q(i), grid.p(j)));
        }
    }

    #[test]
    fn framed_state_gives_lab_wigner() {
        let cut = 320;
        let s = 0.7;
        let alpha = C64::new(0.4, 0.9);
        // D(α)S(1)|0⟩ in number basis and in frame s
        let ns = fock::apply(&squeezing_operator(1.0, cut).unwrap(), &make_vacuum(cut).unwrap()).unwrap();
        let lab = fock::apply(&displacement_operator(alpha, cut), &ns).unwrap();
        let spec = GridSpec::new(121, 61, Bounds::fixed(-14.0, 15.0, -3.0, 4.0).unwrap());
        let a = wigner_numeric(&lab, &spec).unwrap();
        // D(c)S(s)|n⟩ amplitudes of the same state: S(s)†D(c)† D(α)S(1)|0⟩
        // = e^{−i Im(c α*)} D(braid(α − c, −s)) S(1 − s)|0⟩
        for center in [C64::new(0.0, 0.0), C64::new(0.3, 0.5)] {
            let frame = Frame::new(s, center).unwrap();
            let rel = fock::apply(&squeezing_operator(1.0 - s, cut).unwrap(), &make_vacuum(cut).unwrap()).unwrap();
            let shift = braid(alpha - center, -s);
            let phase = C64::new(0.0, -(center * alpha.conj()).im).exp();
            let v = fock::apply(&displacement_operator(shift, cut), &rel).unwrap();
            let framed = FockVector::in_frame(v.scaled(phase).amplitudes().to_vec(), frame).unwrap();
            let b = wigner_numeric(&framed, &spec).unwrap();
            let res = a.residual(&b).unwrap();
            assert!(res.max_abs < 1e-10, "{center} {res:?}");
            for &(i, j) in &[(60, 30), (40, 20)] {
                let pw = wigner_parity(&framed, a.q(i), a.p(j)).unwrap();
                assert!((pw - a.values[[i, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parity_route_agrees_with_wavefunction_route() {
        let cut = 40;
        let mut amps = vec![c(0.0); cut + 1];
        amps[0] = C64::new(0.6, 0.0);
        amps[1] = C64::new(0.0, 0.48);
        amps[3] = C64::new(-0.64, 0.0);
        let v = FockVector::new(amps).unwrap();
        let spec = GridSpec::new(17, 17, Bounds::fixed(-3.0, 3.0, -2.5, 2.5).unwrap());
        let grid = sample_wigner(&v, &spec).unwrap();
        for &(i, j) in &[(0, 0), (8, 8), (3, 12), (15, 2)] {
            let pw = wigner_parity(&v, grid.q(i), grid.p(j)).unwrap();
            assert!((pw - grid.values[[i, j]]).abs() < 1e-10, "({i},{j})");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let v = make_vacuum(8).unwrap();
        let spec = GridSpec::new(17, 17, Bounds::fixed(-1.0, 1.0, -1.0, 1.0).unwrap());
        assert!(matches!(wigner_numeric(&v, &spec), Err(Error::Quadrature { .. })));
        assert!(GridSpec::new(8, 40, Bounds::Auto).validate().is_err());
    }

    #[test]
    fn bounds_parse() {
        assert_eq!("auto".parse::<Bounds>().unwrap(), Bounds::Auto);
        assert_eq!(
            "-1,2,-3,4".parse::<Bounds>().unwrap(),
            Bounds::fixed(-1.0, 2.0, -3.0, 4.0).unwrap()
        );
        assert!("1,0,0,1".parse::<Bounds>().is_err());
        assert!("1,2,3".parse::<Bounds>().is_err());
    }

    #[test]
    fn interference_branch_sign_and_degeneracy() {
        let params = SwitchParams::new(0.5, 1.0, 0.0);
        let e = InterferenceParams::default();
        let (gp, gm) = normalization_factors(params.alpha(), params.r);
        let plus = interference_point(0.5, 1.0, 0.0, gp, 1.0, &e, 0.0, 0.0);
        let minus = interference_point(0.5, 1.0, 0.0, gm, -1.0, &e, 0.0, 0.0);
        // at the origin v₃ = 0 and the fringe is cos 0 = 1
        let base = plus * PI * gp - 2.0;
        assert!((minus * PI * gm - (base - 2.0)).abs() < 1e-12);
        let zero = SwitchParams::new(0.5, 0.0, 0.0);
        assert!(matches!(
            wigner_interference(&zero, &e, Branch::Minus, &GridSpec::default()),
            Err(Error::DegenerateOutcome { .. })
        ));
    }
}
