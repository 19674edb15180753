//! Quasi-Newton minimisation (BFGS with a strong-Wolfe line search).
//!
//! Objectives return their value and write the gradient into the provided
//! buffer. A non-finite value marks an infeasible point; the line search backs
//! off from it.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Converged once `max |gradient| ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop (unconverged) once the relative step falls below this.
    pub step_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub message: String,
}

impl OptimResult {
    pub fn gradient_norm(&self) -> f64 {
        max_abs(&self.gradient)
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const APPROX_TOL: f64 = 1e-12;

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    x: DVector<f64>,
    grad: DVector<f64>,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x0: &'a DVector<f64>,
    dir: &'a DVector<f64>,
    f0: f64,
    d0: f64,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let x = self.x0 + self.dir * alpha;
        let mut grad = DVector::zeros(x.len());
        let value = (self.f)(x.as_slice(), grad.as_mut_slice());
        let slope = grad.dot(self.dir);
        let (value, slope) = if value.is_finite() && slope.is_finite() {
            (value, slope)
        } else {
            (f64::INFINITY, f64::NAN)
        };
        Point { alpha, value, slope, x, grad }
    }

    fn sufficient(&self, p: &Point) -> bool {
        p.value <= self.f0 + C1 * p.alpha * self.d0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -C2 * self.d0
    }

    /// Near the optimum the Armijo test drowns in rounding error; accept a
    /// point that satisfies the curvature condition and does not raise the
    /// objective beyond a relative tolerance.
    fn approximately_wolfe(&self, p: &Point) -> bool {
        p.value <= self.f0 + APPROX_TOL * (1.0 + self.f0.abs()) && self.curvature(p)
    }

    fn run(&mut self, initial: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            value: self.f0,
            slope: self.d0,
            x: self.x0.clone(),
            grad: DVector::zeros(0),
        };
        let mut alpha = initial;
        for i in 0..40 {
            let cur = self.eval(alpha);
            if !cur.value.is_finite() {
                // infeasible: shrink towards the last good point
                alpha = prev.alpha + 0.25 * (alpha - prev.alpha);
                continue;
            }
            if self.approximately_wolfe(&cur) {
                return Some(cur);
            }
            if !self.sufficient(&cur) || (i > 0 && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            prev = cur;
            alpha *= 2.0;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        let mut best: Option<Point> = None;
        for _ in 0..50 {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= 1e-16 * b.max(1.0) {
                break;
            }
            // quadratic through (lo.value, lo.slope) and hi.value, safeguarded
            let mut trial = f64::NAN;
            if hi.value.is_finite() {
                let dalpha = hi.alpha - lo.alpha;
                let denom = 2.0 * (hi.value - lo.value - lo.slope * dalpha);
                if denom != 0.0 {
                    trial = lo.alpha - lo.slope * dalpha * dalpha / denom;
                }
            }
            if !(trial.is_finite() && trial > a + 0.1 * width && trial < b - 0.1 * width) {
                trial = 0.5 * (a + b);
            }
            let cur = self.eval(trial);
            if cur.value.is_finite() && self.approximately_wolfe(&cur) {
                return Some(cur);
            }
            if !cur.value.is_finite() || !self.sufficient(&cur) || cur.value >= lo.value {
                hi = cur;
                continue;
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
            if best.as_ref().is_none_or(|b| lo.value < b.value) {
                best = Some(Point {
                    alpha: lo.alpha,
                    value: lo.value,
                    slope: lo.slope,
                    x: lo.x.clone(),
                    grad: lo.grad.clone(),
                });
            }
        }
        // accept the best Armijo point even without the curvature condition
        best.or_else(|| (lo.alpha > 0.0 && lo.grad.len() > 0).then_some(lo))
    }
}

/// Minimise `f` from `x0`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut grad = DVector::zeros(n);
    let mut value = f(x.as_slice(), grad.as_mut_slice());
    let mut trace = vec![value];
    let mut inv_hessian = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;

    let finish = |x: DVector<f64>, value, grad: DVector<f64>, converged, n_iter, trace, message: &str| OptimResult {
        x: x.as_slice().to_vec(),
        value,
        gradient: grad.as_slice().to_vec(),
        converged,
        n_iter,
        trace,
        message: message.to_string(),
    };

    if !value.is_finite() {
        return finish(x, value, grad, false, 0, trace, "objective not finite at start");
    }

    for iter in 0..opts.max_iter {
        if max_abs(grad.as_slice()) <= opts.grad_tol {
            return finish(x, value, grad, true, iter, trace, "gradient tolerance reached");
        }
        let mut dir = -(&inv_hessian * &grad);
        let mut d0 = dir.dot(&grad);
        if !(d0 < 0.0) {
            inv_hessian.fill_with_identity();
            fresh = true;
            dir = -grad.clone();
            d0 = dir.dot(&grad);
        }
        let initial = if fresh { (1.0 / dir.norm()).min(1.0) } else { 1.0 };
        let mut search = LineSearch {
            f: &mut f,
            x0: &x,
            dir: &dir,
            f0: value,
            d0,
        };
        let point = match search.run(initial) {
            Some(p) => p,
            None if !fresh => {
                inv_hessian.fill_with_identity();
                fresh = true;
                continue;
            }
            None => return finish(x, value, grad, false, iter, trace, "line search failed"),
        };

        let s = &point.x - &x;
        let y = &point.grad - &grad;
        let rel_step = max_abs(s.as_slice()) / (1.0 + max_abs(x.as_slice()));
        x = point.x;
        grad = point.grad;
        value = point.value;
        trace.push(value);

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                // scale the initial inverse Hessian
                inv_hessian *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &inv_hessian * &y;
            let yhy = y.dot(&hy);
            inv_hessian += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }

        if rel_step <= opts.step_tol {
            let converged = max_abs(grad.as_slice()) <= opts.grad_tol;
            return finish(x, value, grad, converged, iter + 1, trace, "step tolerance reached");
        }
    }
    let converged = max_abs(grad.as_slice()) <= opts.grad_tol;
    finish(x, value, grad, converged, opts.max_iter, trace, "iteration limit reached")
}

/// Central-difference gradient, used where no analytic gradient exists.
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = f64::EPSILON.cbrt() * (1.0 + x[i].abs());
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let dn = f(&work);
            work[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Symmetrised Hessian from central differences of an analytic gradient,
/// step `cbrt(eps) (1 + |x_j|)`.
pub fn hessian_from_gradient<F>(mut grad: F, x: &[f64]) -> DMatrix<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut work = x.to_vec();
    let mut gu = vec![0.0; n];
    let mut gd = vec![0.0; n];
    for j in 0..n {
        let step = f64::EPSILON.cbrt() * (1.0 + x[j].abs());
        work[j] = x[j] + step;
        grad(&work, &mut gu);
        work[j] = x[j] - step;
        grad(&work, &mut gd);
        work[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}
