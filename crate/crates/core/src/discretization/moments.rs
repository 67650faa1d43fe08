//! Closed-form integrals over a time slab (t_k, t_{k+1}) of length τ.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeMoment {
    /// ∫ (t − t_k) dt = τ²/2
    Linear,
    /// ∫ (t − t_k)(t_{k+1} − t) dt = τ³/6
    Bubble,
    /// ∫ (t − t_k)²(t_{k+1} − t) dt = τ⁴/12
    LinearSqTimesFall,
    /// ∫ (t − t_k)²(t_{k+1} − t)² dt = τ⁵/30
    BubbleSq,
    /// ∫ (t_k + t_{k+1} − 2t)(t − t_k)/τ dt = −τ²/6
    BubbleSlopeTimesRise,
    /// ∫ (t_k + t_{k+1} − 2t) dt = 0
    BubbleSlope,
    /// ∫ (t_k + t_{k+1} − 2t)² dt = τ³/3
    BubbleSlopeSq,
    /// ∫ (t − t_k)²/2 dt = τ³/6
    HalfLinearSq,
}

impl TimeMoment {
    pub const ALL: [TimeMoment; 8] = [
        TimeMoment::Linear,
        TimeMoment::Bubble,
        TimeMoment::LinearSqTimesFall,
        TimeMoment::BubbleSq,
        TimeMoment::BubbleSlopeTimesRise,
        TimeMoment::BubbleSlope,
        TimeMoment::BubbleSlopeSq,
        TimeMoment::HalfLinearSq,
    ];

    /// The integrand at time t on the slab (t_k, t_k + τ).
    pub fn integrand(self, t: f64, tk: f64, tau: f64) -> f64 {
        let tk1 = tk + tau;
        let rise = t - tk;
        let fall = tk1 - t;
        let slope = tk + tk1 - 2.0 * t;
        match self {
            TimeMoment::Linear => rise,
            TimeMoment::Bubble => rise * fall,
            TimeMoment::LinearSqTimesFall => rise * rise * fall,
            TimeMoment::BubbleSq => (rise * fall).powi(2),
            TimeMoment::BubbleSlopeTimesRise => slope * rise / tau,
            TimeMoment::BubbleSlope => slope,
            TimeMoment::BubbleSlopeSq => slope * slope,
            TimeMoment::HalfLinearSq => rise * rise / 2.0,
        }
    }
}

pub fn time_moments(tau: f64, kind: TimeMoment) -> f64 {
    match kind {
        TimeMoment::Linear => tau * tau / 2.0,
        TimeMoment::Bubble => tau.powi(3) / 6.0,
        TimeMoment::LinearSqTimesFall => tau.powi(4) / 12.0,
        TimeMoment::BubbleSq => tau.powi(5) / 30.0,
        TimeMoment::BubbleSlopeTimesRise => -tau * tau / 6.0,
        TimeMoment::BubbleSlope => 0.0,
        TimeMoment::BubbleSlopeSq => tau.powi(3) / 3.0,
        TimeMoment::HalfLinearSq => tau.powi(3) / 6.0,
    }
}

/// Gram matrix over the slab of the time functions
/// (t_{k+1}−t)/τ, (t−t_k)/τ and (t−t_k)(t_{k+1}−t), assembled from the
/// closed-form moments.
pub fn slab_gram(tau: f64) -> [[f64; 3]; 3] {
    let m = |k| time_moments(tau, k);
    // ∫ rise² /τ² = τ/3, ∫ rise·fall/τ² = τ/6.
    let ll = 2.0 * m(TimeMoment::HalfLinearSq) / (tau * tau);
    let lr = m(TimeMoment::Bubble) / (tau * tau);
    // ∫ rise·bubble/τ = ∫ fall·bubble/τ = τ³/12.
    let lb = m(TimeMoment::LinearSqTimesFall) / tau;
    let bb = m(TimeMoment::BubbleSq);
    [[ll, lr, lb], [lr, ll, lb], [lb, lb, bb]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_values() {
        assert!((time_moments(1.0, TimeMoment::Bubble) - 1.0 / 6.0).abs() < 1e-15);
        assert!((time_moments(2.0, TimeMoment::BubbleSlopeSq) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(time_moments(3.0, TimeMoment::BubbleSlope), 0.0);
    }

    #[test]
    fn gram_of_hat_functions() {
        let g = slab_gram(0.5);
        assert!((g[0][0] - 0.5 / 3.0).abs() < 1e-15);
        assert!((g[0][1] - 0.5 / 6.0).abs() < 1e-15);
        assert!((g[2][2] - 0.5f64.powi(5) / 30.0).abs() < 1e-18);
    }
}
