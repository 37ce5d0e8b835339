use serde::{Deserialize, Serialize};

/// First moments `(⟨q⟩, ⟨p⟩)` and the symmetrized covariance
/// `V_ij = ½⟨{Q_i, Q_j}⟩ − ⟨Q_i⟩⟨Q_j⟩` of a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix2 {
    pub mean: [f64; 2],
    pub matrix: [[f64; 2]; 2],
}

impl CovarianceMatrix2 {
    pub fn new(mean: [f64; 2], vqq: f64, vpp: f64, vqp: f64) -> Self {
        Self {
            mean,
            matrix: [[vqq, vqp], [vqp, vpp]],
        }
    }

    pub fn vacuum() -> Self {
        Self::new([0.0, 0.0], 0.5, 0.5, 0.0)
    }

    pub fn vqq(&self) -> f64 {
        self.matrix[0][0]
    }

    pub fn vpp(&self) -> f64 {
        self.matrix[1][1]
    }

    pub fn vqp(&self) -> f64 {
        self.matrix[0][1]
    }

    pub fn det(&self) -> f64 {
        self.vqq() * self.vpp() - self.vqp() * self.vqp()
    }

    pub fn sd_q(&self) -> f64 {
        self.vqq().max(0.0).sqrt()
    }

    pub fn sd_p(&self) -> f64 {
        self.vpp().max(0.0).sqrt()
    }

    /// Moments of `S(s)|ψ⟩` given those of `|ψ⟩`: `q → e^s q`, `p → e^{-s} p`.
    pub fn squeezed_by(&self, s: f64) -> Self {
        let (up, down) = (s.exp(), (-s).exp());
        Self::new(
            [self.mean[0] * up, self.mean[1] * down],
            self.vqq() * up * up,
            self.vpp() * down * down,
            self.vqp(),
        )
    }

    /// Same covariance with the first moments moved by `(dq, dp)`.
    pub fn shifted(&self, dq: f64, dp: f64) -> Self {
        Self {
            mean: [self.mean[0] + dq, self.mean[1] + dp],
            matrix: self.matrix,
        }
    }

    /// Largest absolute difference between the 2×2 blocks.
    pub fn max_abs_diff(&self, other: &[[f64; 2]; 2]) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.matrix[i][j] - other[i][j]).abs());
            }
        }
        d
    }
}
