//! Non-Gaussianity and Wigner negativity of the conditional states.
//!
//! For a pure state the relative entropy to its Gaussian reference reduces
//! to the entropy of that reference, `δ_nG = h(√det V)`, with `V` taken from
//! the Fock-space moments. Non-classicality is `δ_nC = ∬|W| − 1`, evaluated
//! as `∬|W| − ∬W` (twice the negative volume) so that quadrature error in
//! the normalization does not leak into the measure.

use serde::Serialize;

use crate::covariance::CovarianceMatrix2;
use crate::error::{Error, Result};
use crate::fock::{quadrature_moments, FockVector, Frame};
use crate::gaussian::reference_covariance;
use crate::phase_space::{
    auto_bounds, sample_wigner, wigner_interference, Bounds, GridSpec, InterferenceParams, PhaseSpaceGrid,
    NORMALIZATION_TOL,
};
use crate::switch::{run_switch, Branch, ConditionalOutcome, SwitchOutcome, SwitchParams};

/// Step-halving stops once `∬|W|` moves by less than this.
pub const REFINE_TOL: f64 = 1e-6;
pub const MAX_REFINEMENTS: usize = 4;

/// `h(x) = (x + ½) ln(x + ½) − (x − ½) ln(x − ½)`, the entropy of a
/// single-mode Gaussian state with symplectic eigenvalue `x`.
pub fn entropy_h(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.5 - 1e-9 {
        return Err(Error::Domain(format!("symplectic eigenvalue {x} below 1/2")));
    }
    let x = x.max(0.5);
    let lower = x - 0.5;
    let tail = if lower > 0.0 { lower * lower.ln() } else { 0.0 };
    Ok((x + 0.5) * (x + 0.5).ln() - tail)
}

/// `h(√det V)` for a pure state.
pub fn non_gaussianity(state: &FockVector) -> Result<f64> {
    non_gaussianity_of(&quadrature_moments(state)?)
}

pub fn non_gaussianity_of(moments: &CovarianceMatrix2) -> Result<f64> {
    let det = moments.det();
    if !(det >= 0.25 - 1e-6) {
        return Err(Error::Domain(format!(
            "covariance determinant {det} violates the uncertainty bound"
        )));
    }
    entropy_h(det.max(0.25).sqrt())
}

/// Outcome of the Wigner-negativity quadrature.
#[derive(Debug, Clone, Serialize)]
pub struct NonClassicality {
    pub delta_nc: f64,
    /// `∬ max(−W, 0)`.
    pub negative_volume: f64,
    pub integral: f64,
    pub abs_integral: f64,
    pub min_wigner: f64,
    /// Grid the value was taken from.
    pub grid: GridSpec,
    pub refinements: usize,
    pub converged: bool,
}

/// `δ_nC` with its quadrature metadata. The grid is refined `n → 2n − 1`
/// on fixed bounds until `∬|W|` settles to [`REFINE_TOL`] with an accepted
/// normalization, up to [`MAX_REFINEMENTS`] times. Settling means either a
/// step-halving difference below the tolerance or a Richardson error
/// estimate below it; the reported value is always the finest grid's.
pub fn non_classicality_report(state: &FockVector, spec: &GridSpec) -> Result<NonClassicality> {
    Ok(non_classicality_with_grid(state, spec)?.0)
}

/// [`non_classicality_report`] also handing back the final grid.
pub fn non_classicality_with_grid(
    state: &FockVector,
    spec: &GridSpec,
) -> Result<(NonClassicality, PhaseSpaceGrid)> {
    if !state.is_normalized() {
        return Err(Error::NotNormalized { norm: state.norm() });
    }
    spec.validate()?;
    let mut spec = match spec.bounds {
        Bounds::Auto => spec.with_bounds(auto_bounds(state)?),
        Bounds::Fixed { .. } => *spec,
    };
    let mut prev_abs: Option<f64> = None;
    let mut prev_delta: Option<f64> = None;
    let mut last = None;
    for refinements in 0..=MAX_REFINEMENTS {
        let grid = sample_wigner(state, &spec)?;
        let integral = grid.integrate();
        let abs_integral = grid.integrate_abs();
        let normalized = (integral - 1.0).abs() <= NORMALIZATION_TOL;
        let delta = prev_abs.map(|p| (abs_integral - p).abs());
        let settled = delta.is_some_and(|d| d < REFINE_TOL || richardson_error(prev_delta, d) < REFINE_TOL);
        let report = NonClassicality {
            delta_nc: (abs_integral - integral).max(0.0),
            negative_volume: ((abs_integral - integral) / 2.0).max(0.0),
            integral,
            abs_integral,
            min_wigner: grid.min(),
            grid: spec,
            refinements,
            converged: normalized && settled,
        };
        if report.converged {
            return Ok((report, grid));
        }
        prev_abs = Some(abs_integral);
        prev_delta = delta;
        last = Some((report, grid));
        if refinements < MAX_REFINEMENTS {
            spec = spec.refined();
        }
    }
    let (report, grid) = last.expect("at least one pass");
    if (report.integral - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Quadrature {
            deficit: report.integral - 1.0,
            detail: format!(
                "normalization not reached after {MAX_REFINEMENTS} refinements ({}x{})",
                spec.n_q, spec.n_p
            ),
        });
    }
    Ok((report, grid))
}

/// Error left in the finer of two step-halvings, extrapolated from the
/// observed contraction of successive differences. Only trusted when the
/// differences contract at least like a second-order rule.
fn richardson_error(prev: Option<f64>, delta: f64) -> f64 {
    match prev {
        Some(p) if p > 4.0 * delta => delta / (p / delta - 1.0),
        _ => f64::INFINITY,
    }
}

/// `∬|W| − 1` of a normalized pure state.
pub fn non_classicality(state: &FockVector, spec: &GridSpec) -> Result<f64> {
    non_classicality_report(state, spec).map(|r| r.delta_nc)
}

#[derive(Debug, Clone, Default)]
pub struct MeasureOptions {
    pub grid: GridSpec,
    /// Compare against the closed-form interference expression on the final grid.
    pub interference: Option<InterferenceParams>,
    /// Skip the Wigner quadrature.
    pub ng_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub branch: Branch,
    pub probability: f64,
    pub norm_sq: f64,
    pub degenerate: bool,
    pub delta_ng: Option<f64>,
    pub delta_nc: Option<f64>,
    pub covariance: Option<CovarianceMatrix2>,
    pub cutoff_used: usize,
    pub frame: Frame,
    pub nonclassicality: Option<NonClassicality>,
    /// Largest entry gap between the reference covariance block and the Fock moments.
    pub reference_covariance_residual: Option<f64>,
    /// Largest pointwise gap between the interference expression and the numeric one.
    pub residual_interference: Option<f64>,
}

fn report_branch(
    params: &SwitchParams,
    run: &SwitchOutcome,
    out: &ConditionalOutcome,
    opts: &MeasureOptions,
) -> Result<MeasureReport> {
    let mut report = MeasureReport {
        branch: out.branch,
        probability: out.probability,
        norm_sq: out.norm_sq,
        degenerate: out.degenerate,
        delta_ng: None,
        delta_nc: None,
        covariance: None,
        cutoff_used: run.cutoff,
        frame: run.frame,
        nonclassicality: None,
        reference_covariance_residual: None,
        residual_interference: None,
    };
    let Some(state) = out.state.as_ref() else {
        return Ok(report);
    };
    let moments = quadrature_moments(state)?;
    report.delta_ng = Some(non_gaussianity_of(&moments)?);
    report.covariance = Some(moments);
    if params.control.is_balanced() {
        report.reference_covariance_residual = reference_covariance(params, out.branch)
            .ok()
            .map(|block| moments.max_abs_diff(&block.matrix));
    }
    if !opts.ng_only {
        let (nc, grid) = non_classicality_with_grid(state, &opts.grid)?;
        report.delta_nc = Some(nc.delta_nc);
        if let Some(interference) = opts.interference.as_ref() {
            let closed = wigner_interference(params, interference, out.branch, &nc.grid)?;
            report.residual_interference = Some(closed.residual(&grid)?.max_abs);
        }
        report.nonclassicality = Some(nc);
    }
    Ok(report)
}

/// Run the switch and evaluate both measures on each branch; degenerate
/// branches come back with empty measures.
pub fn measure_conditionals_with(
    params: &SwitchParams,
    opts: &MeasureOptions,
) -> Result<(MeasureReport, MeasureReport)> {
    let run = run_switch(params)?;
    Ok((
        report_branch(params, &run, &run.plus, opts)?,
        report_branch(params, &run, &run.minus, opts)?,
    ))
}

pub fn measure_conditionals(params: &SwitchParams, spec: &GridSpec) -> Result<(MeasureReport, MeasureReport)> {
    measure_conditionals_with(
        params,
        &MeasureOptions {
            grid: *spec,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, displacement_operator, make_vacuum, squeezing_operator};
    use crate::C64;

    #[test]
    fn entropy_reference_values() {
        assert_eq!(entropy_h(0.5).unwrap(), 0.0);
        assert_eq!(entropy_h(0.5 - 1e-12).unwrap(), 0.0);
        assert!((entropy_h(1.5).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(entropy_h(2.0).unwrap() > entropy_h(1.0).unwrap());
        assert!(entropy_h(1.0).unwrap() > entropy_h(0.6).unwrap());
        assert!(matches!(entropy_h(0.4), Err(Error::Domain(_))));
        assert!(entropy_h(f64::NAN).is_err());
    }

    #[test]
    fn gaussian_states_have_zero_non_gaussianity() {
        let cut = 200;
        let vac = make_vacuum(cut).unwrap();
        let sq = fock::apply(&squeezing_operator(1.2, cut).unwrap(), &vac).unwrap();
        let coh = fock::apply(&displacement_operator(C64::new(1.5, -0.5), cut), &vac).unwrap();
        for s in [&vac, &sq, &coh] {
            assert!(non_gaussianity(s).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn fock_one_measures() {
        let one = FockVector::number_state(1, 30).unwrap();
        assert!((non_gaussianity(&one).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        let nc = non_classicality_report(&one, &GridSpec::default()).unwrap();
        // derived independently in the integration tests; ∬|W| − 1 = 4e^{−1/2} − 2
        let want = 4.0 * (-0.5f64).exp() - 2.0;
        assert!((nc.delta_nc - want).abs() < 1e-6, "{}", nc.delta_nc);
        assert!((nc.negative_volume - want / 2.0).abs() < 1e-6);
        assert!(nc.converged);
    }

    #[test]
    fn gaussian_non_classicality_vanishes() {
        let cut = 240;
        let vac = make_vacuum(cut).unwrap();
        let v = fock::apply(&displacement_operator(C64::new(0.5, 0.5), cut), &vac).unwrap();
        let v = fock::apply(&squeezing_operator(0.8, cut).unwrap(), &v).unwrap();
        assert!(non_classicality(&v, &GridSpec::default()).unwrap() < 1e-6);
    }

    #[test]
    fn degenerate_branch_has_empty_measures() {
        let (plus, minus) = measure_conditionals(&SwitchParams::new(0.7, 0.0, 0.0), &GridSpec::default()).unwrap();
        assert!(plus.delta_ng.unwrap() < 1e-6 && plus.delta_nc.unwrap() < 1e-6);
        assert!(minus.degenerate && minus.delta_ng.is_none() && minus.delta_nc.is_none());
    }

    #[test]
    fn coarse_fixed_grid_reports_quadrature_error() {
        let one = FockVector::number_state(1, 30).unwrap();
        let spec = GridSpec::new(17, 17, Bounds::fixed(-1.0, 1.0, -1.0, 1.0).unwrap());
        assert!(matches!(non_classicality(&one, &spec), Err(Error::Quadrature { .. })));
    }
}
