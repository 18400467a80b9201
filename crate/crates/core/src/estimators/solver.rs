//! Small dense nonlinear solvers with finite-difference derivatives.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct Box1 {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Box1 {
    fn project(&self, x: &mut DVector<f64>) {
        x[self.index] = x[self.index].clamp(self.lo, self.hi);
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub converged: bool,
}

fn step_size(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: &F,
    x: &DVector<f64>,
    m: usize,
) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for c in 0..x.len() {
        let h = step_size(x[c]);
        xp[c] = x[c] + h;
        let fp = f(&xp);
        xp[c] = x[c] - h;
        let fm = f(&xp);
        xp[c] = x[c];
        j.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// Levenberg–Marquardt on `½‖r(x)‖²`, optionally keeping one coordinate in a box.
pub fn levenberg_marquardt<F>(
    r: F,
    x0: DVector<f64>,
    bound: Option<Box1>,
    max_iter: usize,
) -> Solution
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    if let Some(b) = bound {
        b.project(&mut x);
    }
    let mut res = r(&x);
    let mut cost = res.norm_squared();
    let mut lambda = 1e-3;
    let n = x.len();
    for _ in 0..max_iter {
        if cost < 1e-26 {
            return Solution { x, converged: true };
        }
        let j = jacobian(&r, &x, res.len());
        let g = j.transpose() * &res;
        if g.norm() < 1e-12 * (1.0 + cost) {
            return Solution { x, converged: true };
        }
        let jtj = j.transpose() * &j;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..n {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn = &x + &step;
            if let Some(b) = bound {
                b.project(&mut xn);
            }
            let rn = r(&xn);
            let cn = rn.norm_squared();
            if cn.is_finite() && cn < cost {
                let small = (&xn - &x).norm() < 1e-13 * (1.0 + x.norm());
                x = xn;
                res = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if small {
                    return Solution { x, converged: true };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent at any damping: a stationary point up to rounding
            return Solution {
                x,
                converged: g.norm() < 1e-6 * (1.0 + cost),
            };
        }
    }
    Solution {
        x,
        converged: false,
    }
}

fn gradient<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for c in 0..x.len() {
        let h = step_size(x[c]);
        xp[c] = x[c] + h;
        let fp = f(&xp);
        xp[c] = x[c] - h;
        let fm = f(&xp);
        xp[c] = x[c];
        g[c] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Projected BFGS with Armijo backtracking.
pub fn bfgs<F>(
    f: F,
    x0: DVector<f64>,
    bound: Option<Box1>,
    max_iter: usize,
    grad_tol: f64,
) -> Solution
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    if let Some(b) = bound {
        b.project(&mut x);
    }
    let mut fx = f(&x);
    let mut g = gradient(&f, &x);
    let mut h = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        if g.norm() < grad_tol || fx < 1e-26 {
            return Solution { x, converged: true };
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = &x + &dir * t;
            if let Some(b) = bound {
                b.project(&mut xn);
            }
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * g.dot(&(&xn - &x)) {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            return Solution {
                x,
                converged: false,
            };
        };
        let gn = gradient(&f, &xn);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-16 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            h = left * h * right + &s * s.transpose() * rho;
        }
        let stalled = s.norm() < 1e-14 * (1.0 + x.norm());
        x = xn;
        fx = fnew;
        g = gn;
        if stalled {
            return Solution {
                x,
                converged: g.norm() < grad_tol.sqrt(),
            };
        }
    }
    let converged = g.norm() < grad_tol;
    Solution { x, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm_solves_rosenbrock_residuals() {
        let r = |x: &DVector<f64>| DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let s = levenberg_marquardt(r, DVector::from_vec(vec![-1.2, 1.0]), None, 200);
        assert!(s.converged);
        assert!((s.x[0] - 1.0).abs() < 1e-8 && (s.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bfgs_minimizes_quadratic_with_box() {
        let f = |x: &DVector<f64>| (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2);
        let s = bfgs(
            f,
            DVector::from_vec(vec![0.0, 0.0]),
            Some(Box1 {
                index: 0,
                lo: -1.0,
                hi: 2.0,
            }),
            200,
            1e-10,
        );
        assert!((s.x[0] - 2.0).abs() < 1e-9);
        assert!((s.x[1] + 1.0).abs() < 1e-5);
    }
}
