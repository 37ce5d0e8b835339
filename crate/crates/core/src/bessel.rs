//! Bessel functions of the first kind, used as Chebyshev coefficients of the
//! propagator `exp(i λ x)` when exponentiating Fock-space generators.

/// `J_0(x) ..= J_n(x)` for `x ≥ 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument must be finite and non-negative");
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    // Start far enough above both n and the turning point k ≈ x that the
    // seed error is below double precision.
    let margin = 20.0 * (x / 2.0).cbrt().max(1.0) + 30.0;
    let start = (n as f64).max(x.ceil()) + margin;
    let mut m = start.ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut j = vec![0.0; m + 2];
    j[m] = 1.0;
    const BIG: f64 = 1e250;
    for k in (1..=m).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > BIG {
            for v in &mut j[k - 1..=m] {
                *v /= BIG;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for (o, v) in out.iter_mut().zip(&j) {
        *o = v / norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let j = bessel_j_sequence(1.0, 2);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 5);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
        let j = bessel_j_sequence(100.0, 1);
        assert!((j[0] - 0.019_985_850_304_223_12).abs() < 1e-14);
        assert!((j[1] + 0.077_145_352_014_112_16).abs() < 1e-14);
    }

    #[test]
    fn sum_of_squares_identity() {
        // 1 = J_0² + 2 Σ J_k², independent of the normalization used above.
        for &x in &[0.3, 7.0, 250.0, 5000.0] {
            let n = (x as usize) + 400;
            let j = bessel_j_sequence(x, n);
            let s = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-12, "x={x}: {s}");
        }
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_j_sequence(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
    }
}
