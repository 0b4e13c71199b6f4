//! Derivative-free search utilities for acquisition and hyperparameter
//! optimization: a shifted Halton candidate set and a bounded Nelder-Mead
//! simplex refiner.

/// Radical-inverse of `index` in `base` (the Halton sequence element).
fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut value = 0.0;
    while index > 0 {
        value += f * (index % base) as f64;
        index /= base;
        f /= b;
    }
    value
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `n` quasi-random points in `[0,1)^dim`, rotated by `shift` (one offset
/// per axis, wrapped mod 1) so different seeds explore different nets.
pub(crate) fn halton_points(n: usize, dim: usize, shift: &[f64]) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "unsupported dimension {dim}");
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|axis| {
                    let u = radical_inverse(i + 1, PRIMES[axis]) + shift[axis];
                    u - u.floor()
                })
                .collect()
        })
        .collect()
}

/// Minimize `f` over the box `[lo, hi]` by Nelder-Mead with projection onto
/// the box. Returns the best vertex and its value.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..dim {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    // Initial simplex: x0 plus one perturbed vertex per axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut start = x0.to_vec();
    clamp(&mut start);
    simplex.push((start.clone(), f(&start)));
    for i in 0..dim {
        let mut v = start.clone();
        let step = 0.1 * (hi[i] - lo[i]);
        v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
        clamp(&mut v);
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[dim].1 - simplex[0].1;
        if !spread.is_finite() || spread.abs() < 1e-12 * simplex[0].1.abs().max(1.0) {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(v, _)| v[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();

        let mut reflect: Vec<f64> = (0..dim)
            .map(|i| centroid[i] + (centroid[i] - worst.0[i]))
            .collect();
        clamp(&mut reflect);
        let f_reflect = f(&reflect);

        if f_reflect < simplex[0].1 {
            let mut expand: Vec<f64> = (0..dim)
                .map(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i]))
                .collect();
            clamp(&mut expand);
            let f_expand = f(&expand);
            simplex[dim] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[dim - 1].1 {
            simplex[dim] = (reflect, f_reflect);
        } else {
            let mut contract: Vec<f64> = (0..dim)
                .map(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i]))
                .collect();
            clamp(&mut contract);
            let f_contract = f(&contract);
            if f_contract < worst.1 {
                simplex[dim] = (contract, f_contract);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for i in 0..dim {
                        vertex.0[i] = best[i] + 0.5 * (vertex.0[i] - best[i]);
                    }
                    vertex.1 = f(&vertex.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}
