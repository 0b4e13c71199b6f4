//! Adaptive Dormand-Prince 5(4) integration with dense-output sampling.
//!
//! The solver takes variable steps under a standard embedded error control
//! and evaluates the continuous (fourth-order) interpolant at the requested
//! uniform output grid, so the output step never constrains the step size.

use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationFailure {
    #[error("state became non-finite near t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("exceeded {max_steps} steps before t = {t_end}")]
    MaxStepsExceeded { max_steps: usize, t_end: f64 },
}

// Dormand-Prince 5(4) tableau, FSAL form.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights (row 7 of A is identical: FSAL).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// Difference between the fifth- and embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients for the fourth-order interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;

/// Continuous-extension coefficients of one accepted step.
struct DenseStep<const N: usize> {
    t: f64,
    h: f64,
    r1: [f64; N],
    r2: [f64; N],
    r3: [f64; N],
    r4: [f64; N],
    r5: [f64; N],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t_query: f64) -> [f64; N] {
        let theta = ((t_query - self.t) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.r1[i]
                + theta
                    * (self.r2[i] + theta1 * (self.r3[i] + theta * (self.r4[i] + theta1 * self.r5[i])));
        }
        out
    }
}

/// Integrate `dy/dt = f(t, y)` from `t0` and return the solution at
/// `t0 + k*dt_out` for `k = 1..=n_samples`.
pub(crate) fn integrate_sampled<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t0: f64,
    dt_out: f64,
    n_samples: usize,
    opts: &Options,
) -> Result<Vec<[f64; N]>, IntegrationFailure> {
    let t_end = t0 + n_samples as f64 * dt_out;
    let mut out = Vec::with_capacity(n_samples);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t0, &y0, &k1, opts);
    let mut next_sample = 1usize;
    let mut steps = 0usize;

    while next_sample <= n_samples {
        if steps >= opts.max_steps {
            return Err(IntegrationFailure::MaxStepsExceeded {
                max_steps: opts.max_steps,
                t_end,
            });
        }
        steps += 1;

        if h < 1e-13 * t.abs().max(1.0) {
            return Err(IntegrationFailure::StepSizeUnderflow { t });
        }
        // Land exactly on the end of the sampling window.
        if t + h > t_end {
            h = t_end - t;
        }

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }

        let mut y_new = y;
        for (s, ks) in k.iter().enumerate() {
            if B[s] != 0.0 {
                for i in 0..N {
                    y_new[i] += h * B[s] * ks[i];
                }
            }
        }
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(IntegrationFailure::NonFiniteState { t });
        }

        // Weighted RMS error norm of the embedded difference.
        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            e *= h;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            // Accepted: build the interpolant and emit due samples.
            let mut r2 = [0.0; N];
            let mut r3 = [0.0; N];
            let mut r4 = [0.0; N];
            let mut r5 = [0.0; N];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                r2[i] = ydiff;
                r3[i] = bspl;
                r4[i] = ydiff - h * k[6][i] - bspl;
                let mut acc = 0.0;
                for (s, ks) in k.iter().enumerate() {
                    if D[s] != 0.0 {
                        acc += D[s] * ks[i];
                    }
                }
                r5[i] = h * acc;
            }
            let dense = DenseStep {
                t,
                h,
                r1: y,
                r2,
                r3,
                r4,
                r5,
            };
            let t_new = t + h;
            while next_sample <= n_samples {
                let tq = t0 + next_sample as f64 * dt_out;
                if tq > t_new + 1e-12 * t_new.abs().max(1.0) {
                    break;
                }
                out.push(dense.eval(tq));
                next_sample += 1;
            }

            t = t_new;
            y = y_new;
            k1 = k[6]; // FSAL
        }

        let scale = if err == 0.0 {
            MAX_SCALE
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
        };
        h *= scale;
    }

    Ok(out)
}

/// Step-size guess from the local derivative scale (Hairer's heuristic).
fn initial_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    opts: &Options,
) -> f64 {
    let norm = |v: &[f64; N], y: &[f64; N]| -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs();
            s += (v[i] / sc) * (v[i] / sc);
        }
        (s / N as f64).sqrt()
    };
    let d0 = norm(y0, y0);
    let d1 = norm(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = f(t0 + h0, &y1);
    let mut df = [0.0; N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = norm(&df, y0) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
