//! Derivative-free minimization for the likelihood fits.

/// Outcome of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    /// Best vertex found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub f: f64,
    /// Number of simplex iterations performed.
    pub iterations: usize,
    /// True when the objective spread across the simplex fell below tol.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const F_SPREAD_TOL: f64 = 1e-8;
// Guards against false convergence when vertices straddle a minimum with
// (near-)equal objective values: the simplex must also have collapsed.
const X_DIAMETER_RTOL: f64 = 1e-6;
const MAX_ITERS: usize = 500;

/// Minimizes `f` with the Nelder-Mead simplex method.
///
/// The initial simplex is `x0` plus one vertex per dimension offset by
/// `steps[i]` along axis i. Objective values of NaN are treated as +inf so
/// the simplex retreats from invalid regions. Stops when the spread of
/// objective values over the simplex drops below 1e-8 and the simplex has
/// collapsed in parameter space, or after 500 iterations.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64]) -> MinimizeResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    assert!(!x0.is_empty(), "cannot optimize a zero-dimensional point");
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut fx: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        let best = order[0];
        let second_worst = order[n - 1];
        let worst = order[n];

        let collapsed = simplex.iter().all(|v| {
            v.iter()
                .zip(&simplex[best])
                .all(|(a, b)| (a - b).abs() <= X_DIAMETER_RTOL * (1.0 + b.abs()))
        });
        if (fx[worst] - fx[best]).abs() < F_SPREAD_TOL && collapsed {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, xi) in centroid.iter_mut().zip(&simplex[i]) {
                *c += xi;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let lerp = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
            from.iter()
                .zip(to)
                .map(|(a, b)| a + t * (b - a))
                .collect()
        };

        let reflected = lerp(&centroid, &simplex[worst], -REFLECT);
        let fr = eval(&reflected);

        if fr < fx[best] {
            let expanded = lerp(&centroid, &reflected, EXPAND);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                fx[worst] = fe;
            } else {
                simplex[worst] = reflected;
                fx[worst] = fr;
            }
            continue;
        }
        if fr < fx[second_worst] {
            simplex[worst] = reflected;
            fx[worst] = fr;
            continue;
        }

        let contracted = if fr < fx[worst] {
            lerp(&centroid, &reflected, CONTRACT)
        } else {
            lerp(&centroid, &simplex[worst], CONTRACT)
        };
        let fc = eval(&contracted);
        if fc < fx[worst].min(fr) {
            simplex[worst] = contracted;
            fx[worst] = fc;
            continue;
        }

        for &i in &order[1..] {
            simplex[i] = lerp(&simplex[best].clone(), &simplex[i], SHRINK);
            fx[i] = eval(&simplex[i]);
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if fx[i] < fx[best] {
            best = i;
        }
    }
    MinimizeResult {
        x: simplex.swap_remove(best),
        f: fx[best],
        iterations,
        converged,
    }
}
