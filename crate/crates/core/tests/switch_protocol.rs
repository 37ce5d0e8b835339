//! Switch evolution: analytic normalizations, limits and frame independence.

use proptest::prelude::*;
use switchsim::fock::{self, apply, displacement_operator, inner, make_vacuum, quadrature_moments, squeezing_operator, FockVector};
use switchsim::gaussian::{normalization_factors, order_overlap};
use switchsim::switch::{joint_state, run_switch, Branch, FrameChoice, SwitchParams};
use switchsim::C64;

fn fidelity(a: &FockVector, b: &FockVector) -> f64 {
    inner(a, b).unwrap().norm_sqr()
}

#[test]
fn small_displacement_reaches_squeezed_vacuum() {
    let r = 0.9;
    let params = SwitchParams::new(r, 1e-5, 0.0).with_frame(FrameChoice::Number);
    let run = run_switch(&params).unwrap();
    let cut = run.cutoff;
    let target = apply(&squeezing_operator(r, cut).unwrap(), &make_vacuum(cut).unwrap()).unwrap();
    let plus = run.plus.state.as_ref().unwrap();
    assert!((1.0 - fidelity(plus, &target)).abs() < 1e-6);
}

#[test]
fn small_squeeze_reaches_coherent_state() {
    let alpha = C64::new(1.2, 0.5);
    let params = SwitchParams::new(1e-5, alpha.re, alpha.im).with_frame(FrameChoice::Number);
    let run = run_switch(&params).unwrap();
    let cut = run.cutoff;
    let target = apply(&displacement_operator(alpha, cut), &make_vacuum(cut).unwrap()).unwrap();
    assert!((1.0 - fidelity(run.plus.state.as_ref().unwrap(), &target)).abs() < 1e-6);
}

#[test]
fn fock_order_overlap_matches_closed_form() {
    let params = SwitchParams::new(0.7, 1.1, -0.6).with_frame(FrameChoice::Number);
    let joint = joint_state(&params).unwrap();
    let cut = joint.cutoff();
    let vac = make_vacuum(cut).unwrap();
    let alpha = params.alpha();
    let sd = apply(&squeezing_operator(0.7, cut).unwrap(), &apply(&displacement_operator(alpha, cut), &vac).unwrap()).unwrap();
    let ds = apply(&displacement_operator(alpha, cut), &apply(&squeezing_operator(0.7, cut).unwrap(), &vac).unwrap()).unwrap();
    let ov = inner(&sd, &ds).unwrap();
    assert!((ov - order_overlap(alpha, 0.7)).norm() < 1e-10, "{ov} vs {}", order_overlap(alpha, 0.7));
    assert!((joint.order_overlap - ov).norm() < 1e-10);
}

#[test]
fn frames_agree_on_frame_independent_outputs() {
    let base = SwitchParams::new(1.2, 2.0, 1.0);
    let runs: Vec<_> = [
        FrameChoice::Number,
        FrameChoice::Balanced,
        FrameChoice::Auto,
        FrameChoice::Custom {
            squeeze: 0.8,
            center: [1.5, 0.7],
        },
    ]
    .into_iter()
    .map(|f| run_switch(&base.with_frame(f)).unwrap())
    .collect();
    let reference = &runs[0];
    for run in &runs[1..] {
        for branch in [Branch::Plus, Branch::Minus] {
            let (a, b) = (reference.branch(branch), run.branch(branch));
            assert!((a.probability - b.probability).abs() < 1e-10);
            let ma = quadrature_moments(a.state.as_ref().unwrap()).unwrap();
            let mb = quadrature_moments(b.state.as_ref().unwrap()).unwrap();
            assert!((ma.mean[0] - mb.mean[0]).abs() < 1e-8 && (ma.mean[1] - mb.mean[1]).abs() < 1e-8);
            assert!(ma.max_abs_diff(&mb.matrix) < 1e-8, "{:?} vs {:?}", ma, mb);
        }
    }
}

#[test]
fn cutoff_doubling_leaves_outputs_unchanged() {
    let params = SwitchParams::new(0.8, 1.5, 0.5);
    let first = run_switch(&params).unwrap();
    let mut again = params;
    again.cutoff = Some(2 * first.cutoff);
    let second = run_switch(&again).unwrap();
    assert!(second.frame == first.frame);
    for branch in [Branch::Plus, Branch::Minus] {
        let (a, b) = (first.branch(branch), second.branch(branch));
        assert!((a.probability - b.probability).abs() < 1e-10);
        let ma = quadrature_moments(a.state.as_ref().unwrap()).unwrap();
        let mb = quadrature_moments(b.state.as_ref().unwrap()).unwrap();
        assert!(ma.max_abs_diff(&mb.matrix) < 1e-10);
    }
}

#[test]
fn explicit_cutoff_too_small_is_a_convergence_error() {
    let params = SwitchParams::new(1.0, 3.0, 0.0).with_cutoff(12).with_frame(FrameChoice::Number);
    assert!(matches!(run_switch(&params), Err(switchsim::Error::Convergence { .. })));
}

#[test]
fn conditional_states_are_normalized_and_orthogonal_at_balance() {
    // ⟨G−|G+⟩ ∝ 2i Im⟨SD|DS⟩, so real overlaps give orthogonal branches
    let run = run_switch(&SwitchParams::new(0.6, 1.3, 0.0)).unwrap();
    let (p, m) = (run.plus.state.as_ref().unwrap(), run.minus.state.as_ref().unwrap());
    assert!((p.norm() - 1.0).abs() < 1e-12 && (m.norm() - 1.0).abs() < 1e-12);
    assert!(fock::inner(m, p).unwrap().norm() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn probabilities_match_analytic_normalizations(r in -1.5f64..1.5, x in -2.5f64..2.5, y in -2.5f64..2.5) {
        let params = SwitchParams::new(r, x, y);
        let run = run_switch(&params).unwrap();
        let (gp, gm) = normalization_factors(params.alpha(), r);
        prop_assert!((gp + gm - 4.0).abs() < 1e-12);
        prop_assert!((run.plus.probability + run.minus.probability - 1.0).abs() < 1e-10);
        prop_assert!((run.plus.norm_sq - gp).abs() < 1e-7 && (run.minus.norm_sq - gm).abs() < 1e-7);
        prop_assert!((run.plus.probability - gp / 4.0).abs() < 1e-7);
    }

    #[test]
    fn general_control_probabilities_sum_to_one(theta in 0.1f64..1.4, phi in -3.0f64..3.0) {
        let mut params = SwitchParams::new(0.5, 1.0, 0.5);
        params.control.theta = theta;
        params.control.phi = phi;
        let run = run_switch(&params).unwrap();
        let (ap, am) = params.analytic_probabilities();
        prop_assert!((run.plus.probability - ap).abs() < 1e-9);
        prop_assert!((run.minus.probability - am).abs() < 1e-9);
    }
}
