//! A small dense BFGS minimizer with Armijo backtracking, sized for the
//! 17-parameter tomography fits.

use nalgebra::{DMatrix, DVector};

pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when the relative objective decrease per step falls below this.
    pub tol: f64,
}

pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0` using BFGS with an analytic gradient.
pub fn minimize<F, G>(f: F, grad: G, x0: &[f64], opts: &MinimizeOptions) -> MinimizeResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut h = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let gnorm = g.norm();
        if gnorm < 1e-14 {
            converged = true;
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            // Lost positive definiteness; restart on steepest descent.
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }

        // Armijo backtracking line search.
        let slope = dir.dot(&g);
        let mut step = 1.0f64;
        let mut x_new;
        let mut f_new;
        loop {
            x_new = &x + &dir * step;
            f_new = f(x_new.as_slice());
            if f_new <= fx + 1e-4 * step * slope || step < 1e-18 {
                break;
            }
            step *= 0.5;
        }
        if !(f_new < fx) {
            // No descent possible along this direction.
            converged = true;
            break;
        }

        let g_new = DVector::from_vec(grad(x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // BFGS inverse-Hessian update.
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        let rel_drop = (fx - f_new) / fx.abs().max(1e-300);
        x = x_new;
        g = g_new;
        fx = f_new;
        if rel_drop < opts.tol {
            converged = true;
            break;
        }
    }

    MinimizeResult {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let r = minimize(
            f,
            g,
            &[-1.2, 1.0],
            &MinimizeOptions {
                max_iter: 500,
                tol: 1e-14,
            },
        );
        assert!(r.value < 1e-10, "f = {}", r.value);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quadratic_converges_fast() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect();
        let r = minimize(
            f,
            g,
            &[3.0, -2.0, 1.0],
            &MinimizeOptions {
                max_iter: 100,
                tol: 1e-12,
            },
        );
        assert!(r.converged);
        assert!(r.value < 1e-12);
    }
}
