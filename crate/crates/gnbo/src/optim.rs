//! Projected L-BFGS maximization over a box with finite-difference gradients.
//!
//! One optimizer serves both inner loops: acquisition refinement (in the
//! search box) and hyperparameter fitting (in a wide log-space box). The
//! objective is treated as a black box; gradients are central differences
//! with a one-sided fallback at the box boundary.

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iters: 100, grad_tol: 1e-6, step_tol: 1e-8, memory: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub evals: usize,
}

struct Eval<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
    count: usize,
}

impl<'a, F: Fn(&[f64]) -> f64> Eval<'a, F> {
    // negated objective; NaN treated as +inf so the line search rejects it
    fn g(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    }
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(
    ev: &mut Eval<F>,
    x: &[f64],
    g_at_x: f64,
    lower: &[f64],
    upper: &[f64],
    steps: &[f64],
    grad: &mut [f64],
) {
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = steps[k];
        let up_ok = x[k] + h <= upper[k];
        let dn_ok = x[k] - h >= lower[k];
        grad[k] = if up_ok && dn_ok {
            probe[k] = x[k] + h;
            let gp = ev.g(&probe);
            probe[k] = x[k] - h;
            let gm = ev.g(&probe);
            (gp - gm) / (2.0 * h)
        } else if up_ok {
            probe[k] = x[k] + h;
            let gp = ev.g(&probe);
            (gp - g_at_x) / h
        } else if dn_ok {
            probe[k] = x[k] - h;
            let gm = ev.g(&probe);
            (g_at_x - gm) / h
        } else {
            0.0 // degenerate box thinner than the step
        };
        probe[k] = x[k];
    }
}

/// Componentwise projection of the negative gradient onto the feasible
/// directions; zero where the box is active and the gradient pushes outward.
fn projected_grad_norm(x: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for k in 0..x.len() {
        let active_low = x[k] <= lower[k] && grad[k] > 0.0;
        let active_up = x[k] >= upper[k] && grad[k] < 0.0;
        if !active_low && !active_up {
            norm = norm.max(grad[k].abs());
        }
    }
    norm
}

/// Maximize `f` over the box, starting from a feasible `x0`.
///
/// Returns the best feasible point seen; the value never falls below
/// `f(x0)`.
pub fn maximize_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    fd_steps: &[f64],
    opts: &LbfgsOptions,
) -> Optimum {
    let n = x0.len();
    let mut ev = Eval { f, count: 0 };
    let mut x = x0.to_vec();
    let mut gx = ev.g(&x);
    let mut best_x = x.clone();
    let mut best_g = gx;

    let mut grad = vec![0.0; n];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iters = 0;

    fd_gradient(&mut ev, &x, gx, lower, upper, fd_steps, &mut grad);

    while iters < opts.max_iters {
        iters += 1;
        if projected_grad_norm(&x, &grad, lower, upper) <= opts.grad_tol {
            break;
        }

        // two-loop recursion for d = -H grad
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alphas[i] = a;
            axpy(-a, &y_hist[i], &mut d);
        }
        if m > 0 {
            let last = m - 1;
            let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
            if gamma.is_finite() && gamma > 0.0 {
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(alphas[i] - b, &s_hist[i], &mut d);
        }
        if dot(&grad, &d) >= 0.0 {
            // not a descent direction; reset to steepest descent
            d = grad.iter().map(|g| -g).collect();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // backtracking Armijo line search along the projected path
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = (0..n).map(|k| x[k] + step * d[k]).collect();
            for k in 0..n {
                xn[k] = xn[k].clamp(lower[k], upper[k]);
            }
            let gn = ev.g(&xn);
            if gn < best_g {
                best_g = gn;
                best_x = xn.clone();
            }
            let decrease: f64 = (0..n).map(|k| grad[k] * (xn[k] - x[k])).sum();
            if gn <= gx + 1e-4 * decrease && gn < gx {
                accepted = Some((xn, gn));
                break;
            }
            step *= 0.5;
        }

        let Some((xn, gn)) = accepted else { break };
        let step_inf = (0..n).map(|k| (xn[k] - x[k]).abs()).fold(0.0f64, f64::max);
        let mut grad_new = vec![0.0; n];
        fd_gradient(&mut ev, &xn, gn, lower, upper, fd_steps, &mut grad_new);

        let s: Vec<f64> = (0..n).map(|k| xn[k] - x[k]).collect();
        let y: Vec<f64> = (0..n).map(|k| grad_new[k] - grad[k]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s).sqrt() * norm2(&y).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }

        x = xn;
        gx = gn;
        grad = grad_new;
        if step_inf <= opts.step_tol {
            break;
        }
    }

    Optimum { x: best_x, value: -best_g, iters, evals: ev.count }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(n: usize) -> Vec<f64> {
        vec![1e-6; n]
    }

    #[test]
    fn finds_interior_quadratic_maximum() {
        let target = [0.3, -0.2, 0.7];
        let f = |x: &[f64]| -x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let out = maximize_box(&f, &[0.9, 0.9, -0.9], &[-1.0; 3], &[1.0; 3], &steps(3), &LbfgsOptions::default());
        for (a, b) in out.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4, "got {:?}", out.x);
        }
    }

    #[test]
    fn constant_function_returns_start() {
        let f = |_: &[f64]| 3.5;
        let out = maximize_box(&f, &[0.25, 0.5], &[0.0; 2], &[1.0; 2], &steps(2), &LbfgsOptions::default());
        assert_eq!(out.x, vec![0.25, 0.5]);
        assert_eq!(out.value, 3.5);
    }

    #[test]
    fn linear_objective_reaches_the_corner() {
        let f = |x: &[f64]| x.iter().sum::<f64>();
        let out = maximize_box(&f, &[0.1, 0.2, 0.3], &[0.0; 3], &[1.0; 3], &steps(3), &LbfgsOptions::default());
        for v in &out.x {
            assert!((v - 1.0).abs() < 1e-6, "corner not reached: {:?}", out.x);
        }
    }

    #[test]
    fn never_returns_worse_than_start() {
        // nasty non-smooth objective
        let f = |x: &[f64]| (10.0 * x[0]).sin() * (7.3 * x[1]).cos() - x[0].abs();
        let start = [0.33, 0.77];
        let f0 = f(&start);
        let out = maximize_box(&f, &start, &[-1.0; 2], &[1.0; 2], &steps(2), &LbfgsOptions::default());
        assert!(out.value >= f0);
        assert!(out.x.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
