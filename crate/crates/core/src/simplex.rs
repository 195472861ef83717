//! Nelder-Mead simplex minimization.
//!
//! Textbook coefficients (reflection 1, expansion 2, contraction 1/2,
//! shrink 1/2). Non-finite objective values are treated as `+inf`, so an
//! objective may signal "outside the domain" by returning NaN.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once the spread of objective values across the simplex falls
    /// below this...
    pub f_tolerance: f64,
    /// ...and the simplex fits in a box of this half-width.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tolerance: 1e-20,
            x_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimizes `f` starting from a simplex built around `x0` by stepping
/// `steps[i]` along each axis.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let mut simplex: Vec<Vec<f64>> = std::iter::once(x0.to_vec())
        .chain((0..n).map(|i| {
            let mut v = x0.to_vec();
            v[i] += steps[i];
            v
        }))
        .collect();
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(&f, x)).collect();
    let mut iterations = 0;

    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < opts.max_iterations {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);

        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if spread <= opts.f_tolerance && diameter <= opts.x_tolerance {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| order[..n].iter().map(|&i| simplex[i][j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let f_reflected = eval(&f, &reflected);
        if f_reflected < values[best] {
            let expanded = along(2.0);
            let f_expanded = eval(&f, &expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }
        let (contracted, threshold) = if f_reflected < values[worst] {
            (along(0.5), f_reflected)
        } else {
            (along(-0.5), values[worst])
        };
        let f_contracted = eval(&f, &contracted);
        if f_contracted < threshold || (f_contracted == threshold && threshold.is_finite()) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            values[i] = eval(&f, &simplex[i]);
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty simplex");
    Minimum {
        x: simplex.swap_remove(best),
        value: values[best],
        iterations,
    }
}
