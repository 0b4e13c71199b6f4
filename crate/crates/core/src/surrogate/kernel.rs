//! Matern covariance with per-axis length-scales.

/// Matern kernel with smoothness 5/2: twice-differentiable sample paths,
/// a good match for an objective that is smooth apart from chaos-induced
/// jitter.
///
/// `k(a, b) = signal_var * (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)`
/// with `r^2 = sum_k ((a_k - b_k) / ls_k)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matern52 {
    pub length_scales: Vec<f64>,
    pub signal_var: f64,
}

impl Matern52 {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((&ai, &bi), &ls) in a.iter().zip(b).zip(&self.length_scales) {
            let d = (ai - bi) / ls;
            r2 += d * d;
        }
        let r = r2.sqrt();
        let s = 5.0_f64.sqrt() * r;
        self.signal_var * (1.0 + s + s * s / 3.0) * (-s).exp()
    }
}
