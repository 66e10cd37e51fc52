//! Small derivative-free and quasi-Newton minimizers used by the estimators.

use nalgebra::{DMatrix, DVector};

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - √5) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's minimizer on `[lo, hi]`: golden-section steps, accelerated by
/// parabolic interpolation whenever the parabola is trustworthy.
///
/// Stops once the bracket around the best point is narrower than about
/// `4/3 · xtol`, so successive accepted points move by less than `xtol`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, start: f64, xtol: f64, max_iter: usize) -> ScalarMinimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = start.clamp(a, b);
    let mut fx = f(x);
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = f64::EPSILON * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return ScalarMinimum {
                x,
                fx,
                iterations: iter,
                converged: true,
            };
        }

        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarMinimum {
        x,
        fx,
        iterations: max_iter,
        converged: false,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Step for central finite differences, scaled by `max(1, |x_i|)`.
    pub gradient_step: f64,
    /// Stop when the relative objective decrease of an iteration drops below this.
    pub convergence_tol: f64,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: DVector<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn central_gradient<F>(f: &mut F, x: &DVector<f64>, h: f64, evals: &mut usize) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        xp[i] = x[i];
        *evals += 2;
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// BFGS with finite-difference gradients and a backtracking Armijo line search.
///
/// Non-finite objective values are treated as infeasible and make the line
/// search shrink its step. The returned point never has a larger objective
/// than `x0`.
pub fn bfgs_minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let n = x0.len();
    let mut evals = 1;
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = central_gradient(&mut f, &x, opts.gradient_step, &mut evals);
    let mut h = DMatrix::<f64>::identity(n, n);
    if g.norm() > 0.0 {
        // scale the first step to a unit move along the steepest descent direction
        h /= g.norm().max(1.0);
    }
    let mut stalls = 0;

    for iter in 0..opts.max_iterations {
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n) / g.norm().max(1.0);
            dir = -(&h * &g);
            slope = g.dot(&dir);
            if !(slope < 0.0) {
                return BfgsResult { x, fx, iterations: iter, evaluations: evals, converged: true };
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = f(&trial);
            evals += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no descent along the quasi-Newton direction: restart from steepest descent once
            if stalls > 0 {
                return BfgsResult { x, fx, iterations: iter, evaluations: evals, converged: true };
            }
            stalls += 1;
            h = DMatrix::identity(n, n) / g.norm().max(1.0);
            continue;
        };
        stalls = 0;

        let g_new = central_gradient(&mut f, &x_new, opts.gradient_step, &mut evals);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            h = &left * &h * &right + (&s * s.transpose()) * rho;
        }

        let rel_change = (fx - f_new) / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel_change < opts.convergence_tol {
            return BfgsResult { x, fx, iterations: iter + 1, evaluations: evals, converged: true };
        }
    }
    BfgsResult {
        x,
        fx,
        iterations: opts.max_iterations,
        evaluations: evals,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_minimum() {
        let m = brent_minimize(|x| (x - 0.3) * (x - 0.3) + 1.0, -1.0, 1.0, 0.0, 1e-10, 200);
        assert!(m.converged);
        assert!((m.x - 0.3).abs() < 1e-8);
        assert!((m.fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brent_respects_bounds() {
        let m = brent_minimize(|x| -x, -1.0, 1.0, 0.0, 1e-10, 200);
        assert!(m.x <= 1.0 && m.x > 1.0 - 1e-8);
    }

    #[test]
    fn brent_nonsmooth() {
        let m = brent_minimize(|x: f64| (x - 0.1234).abs(), -2.0, 3.0, 2.5, 1e-9, 500);
        assert!((m.x - 0.1234).abs() < 1e-8);
    }

    #[test]
    fn bfgs_rosenbrock() {
        let f = |v: &DVector<f64>| (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2);
        let opts = BfgsOptions {
            max_iterations: 2000,
            gradient_step: 1e-6,
            convergence_tol: 1e-16,
        };
        let r = bfgs_minimize(f, DVector::from_vec(vec![-1.2, 1.0]), &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn bfgs_never_ascends() {
        let f = |v: &DVector<f64>| if v[0] > 2.0 { f64::NAN } else { (v[0] - 5.0).powi(2) };
        let opts = BfgsOptions {
            max_iterations: 50,
            gradient_step: 1e-6,
            convergence_tol: 1e-12,
        };
        let x0 = DVector::from_vec(vec![0.0]);
        let r = bfgs_minimize(f, x0, &opts);
        assert!(r.fx <= 25.0 && r.x[0] <= 2.0);
    }
}
