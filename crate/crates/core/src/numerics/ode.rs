use crate::error::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `y' = f(t, y)` from `grid[0]` with `y(grid[0]) = y0` and
    /// returns the state at every grid node. The grid must be ascending.
    pub fn solve_on_grid<const N: usize, F>(
        &self,
        f: F,
        y0: [f64; N],
        grid: &[f64],
    ) -> Result<Vec<[f64; N]>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = Vec::with_capacity(grid.len());
        if grid.is_empty() {
            return Ok(out);
        }
        out.push(y0);
        let mut t = grid[0];
        let mut y = y0;
        let mut k1 = f(t, &y);
        let span = grid[grid.len() - 1] - t;
        let mut h = self.initial_step(&f, t, &y, &k1, span);
        let mut steps = 0usize;

        for &target in &grid[1..] {
            if target < t {
                return Err(Error::Integration(format!("grid not ascending at {target}")));
            }
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::Integration(format!(
                        "step limit {} exceeded at t = {t}",
                        self.max_steps
                    )));
                }
                let remaining = target - t;
                let last = h >= remaining;
                let step = if last { remaining } else { h };
                if step <= 8.0 * f64::EPSILON * t.abs().max(1.0) && !last {
                    return Err(Error::Integration(format!("step size underflow at t = {t}")));
                }

                let k2 = f(t + C2 * step, &axpy(&y, step, &[(A21, &k1)]));
                let k3 = f(t + C3 * step, &axpy(&y, step, &[(A31, &k1), (A32, &k2)]));
                let k4 = f(
                    t + C4 * step,
                    &axpy(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
                );
                let k5 = f(
                    t + C5 * step,
                    &axpy(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                );
                let k6 = f(
                    t + step,
                    &axpy(
                        &y,
                        step,
                        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    ),
                );
                let y_new = axpy(
                    &y,
                    step,
                    &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
                );
                let k7 = f(t + step, &y_new);

                let mut err_sq = 0.0;
                for i in 0..N {
                    let e = step
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
                    err_sq += (e / scale).powi(2);
                }
                let err = (err_sq / N as f64).sqrt();
                if !err.is_finite() {
                    h = 0.25 * step;
                    continue;
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    t = if last { target } else { t + step };
                    y = y_new;
                    k1 = k7;
                    // Keep the unclipped proposal when the step was shortened
                    // only to land on a grid node.
                    h = if last { h.max(step * factor) } else { step * factor };
                } else {
                    h = step * factor.min(1.0);
                }
            }
            out.push(y);
        }
        Ok(out)
    }

    fn initial_step<const N: usize, F>(&self, f: &F, t: f64, y: &[f64; N], k1: &[f64; N], span: f64) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        if span <= 0.0 {
            return 1.0;
        }
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.abs_tol + self.rel_tol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = axpy(y, h0, &[(1.0, k1)]);
        let k2 = f(t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sc = self.abs_tol + self.rel_tol * y[i].abs();
            d2 += ((k2[i] - k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }
}
