//! Deterministic Nelder–Mead simplex minimizer with the standard
//! coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Stop once every vertex lies within this sup-norm distance of the best.
    pub diameter_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { diameter_tol: 1e-10, max_iterations: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    /// Minimizes `f` from the simplex `x0, x0 + step·e_i`. NaN values are
    /// treated as `+∞`. `x0` is vertex 0, so the result is never worse than
    /// `f(x0)`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: f64) -> Minimum {
        let n = x0.len();
        let mut evaluations = 0;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step;
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            // Stable sort: ties keep their previous order.
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = &simplex[0].0;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if diameter < self.diameter_tol {
                converged = true;
                break;
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |coef: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
            };
            let worst = simplex[n].0.clone();
            let (f_best, f_second, f_worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);

            let xr = along(REFLECT, &worst);
            let fr = eval(&xr);
            if fr < f_best {
                let xe = along(EXPAND, &worst);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < f_second {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc, accept) = if fr < f_worst {
                let xc = along(REFLECT * CONTRACT, &worst);
                let fc = eval(&xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-CONTRACT, &worst);
                let fc = eval(&xc);
                (xc, fc, fc < f_worst)
            };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + SHRINK * (x - b)).collect();
                let v = eval(&x);
                *vertex = (x, v);
            }
        }
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, iterations, evaluations, converged }
    }
}
