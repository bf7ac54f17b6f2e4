//! Bounded Nelder-Mead minimization with adaptive coefficients.
//!
//! Coordinates with a box constraint are clamped onto the box before every
//! evaluation, so every vertex stays feasible. Unbounded coordinates are free.

use alloc::vec::Vec;

/// Per-coordinate box constraint; `None` leaves the coordinate free.
pub type Bounds = Vec<Option<(f64, f64)>>;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Initial edge length per coordinate.
    pub step: Vec<f64>,
    /// Converged once every vertex is within this max-norm distance of the best.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], bounds: &Bounds) {
    for (xi, b) in x.iter_mut().zip(bounds) {
        if let Some((lo, hi)) = *b {
            *xi = xi.clamp(lo, hi);
        }
    }
}

fn diameter(points: &[Vec<f64>], best: usize) -> f64 {
    points
        .iter()
        .flat_map(|p| p.iter().zip(&points[best]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Minimizes `f` starting from `start`.
pub fn minimize<F>(mut f: F, start: &[f64], bounds: &Bounds, options: &SimplexOptions) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    assert!(dim >= 1, "need at least one coordinate");
    assert_eq!(bounds.len(), dim);
    assert_eq!(options.step.len(), dim);
    let d = dim as f64;
    // dimension-adaptive coefficients; the classic ones for d = 2
    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / d;
    let rho = 0.75 - 1.0 / (2.0 * d);
    let sigma = 1.0 - 1.0 / d;

    let mut evaluations = 0usize;
    let mut eval = |x: &mut Vec<f64>, evaluations: &mut usize| {
        project(x, bounds);
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut first = start.to_vec();
    let first_value = eval(&mut first, &mut evaluations);
    points.push(first);
    let mut values = alloc::vec![first_value];
    for i in 0..dim {
        let mut p = points[0].clone();
        p[i] += options.step[i];
        if let Some((_, hi)) = bounds[i] {
            // step inward when the start sits on the upper bound
            if p[i] > hi {
                p[i] = points[0][i] - options.step[i];
            }
        }
        let v = eval(&mut p, &mut evaluations);
        points.push(p);
        values.push(v);
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut converged = false;
    while evaluations < options.max_evaluations {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if diameter(&points, best) < options.tolerance {
            converged = true;
            break;
        }

        let mut centroid = alloc::vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(&points[i]) {
                *c += x / d;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&points[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut reflected = along(alpha);
        let fr = eval(&mut reflected, &mut evaluations);
        if fr < values[best] {
            let mut expanded = along(alpha * gamma);
            let fe = eval(&mut expanded, &mut evaluations);
            if fe < fr {
                points[worst] = expanded;
                values[worst] = fe;
            } else {
                points[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            points[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (mut contracted, threshold) = if fr < values[worst] {
            (along(alpha * rho), fr)
        } else {
            (along(-rho), values[worst])
        };
        let fc = eval(&mut contracted, &mut evaluations);
        if fc < threshold {
            points[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // shrink towards the best vertex
        let anchor = points[best].clone();
        for i in 0..=dim {
            if i == best {
                continue;
            }
            let mut p: Vec<f64> = anchor
                .iter()
                .zip(&points[i])
                .map(|(a, x)| a + sigma * (x - a))
                .collect();
            values[i] = eval(&mut p, &mut evaluations);
            points[i] = p;
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    SimplexOutcome {
        x: points[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

/// Point `index` of the Halton sequence in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 24] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    ];
    (0..dim)
        .map(|k| {
            let base = PRIMES[k % PRIMES.len()];
            let mut i = index;
            let mut f = 1.0;
            let mut r = 0.0;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}
