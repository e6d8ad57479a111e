//! Derivative-free minimization with the Nelder–Mead simplex method.

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Stop when the spread of function values drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            f_tol: 1e-16,
            x_tol: 1e-12,
            max_evals: 5000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` from `start`. A zero-dimensional problem evaluates `f` once.
pub fn minimize(f: impl Fn(&[f64]) -> f64, start: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = start.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(start);
        return Minimum {
            x: Vec::new(),
            value,
            evals: evals.get(),
        };
    }

    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    while evals.get() < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol || diameter <= opts.x_tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }

        // x_r = c + α (c - x_worst)
        let reflected = blend(&centroid, &simplex[n], -alpha);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = blend(&centroid, &simplex[n], -gamma);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = blend(&centroid, &reflected, rho);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = blend(&centroid, &simplex[n], rho);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = blend(&simplex[0], &simplex[i], sigma);
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evals: evals.get(),
    }
}
