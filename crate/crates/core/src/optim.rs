//! Quasi-Newton (BFGS with a strong-Wolfe line search) and damped Newton
//! minimizers for smooth objectives with analytic derivatives.

use nalgebra::{DMatrix, DVector};

pub trait Objective {
    fn dim(&self) -> usize;
    /// Value and gradient at `x`.
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct StopCriteria {
    pub grad_tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
    /// Set when the loss or gradient stopped being finite.
    pub non_finite: bool,
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

fn finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

pub const WOLFE_C1: f64 = 1e-4;
pub const WOLFE_C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

struct Trial {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dg: f64,
}

/// Minimizer of the cubic interpolating two points with known slopes,
/// clamped to `[lo, hi]`; bisection when the cubic has no real minimizer.
fn cubic_min(a: &Trial, b: &Trial, lo: f64, hi: f64) -> f64 {
    let d1 = a.dg + b.dg - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dg * b.dg;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = disc.sqrt().copysign(b.alpha - a.alpha);
    let t = b.alpha - (b.alpha - a.alpha) * ((b.dg + d2 - d1) / (b.dg - a.dg + 2.0 * d2));
    if t.is_finite() {
        t.clamp(lo, hi)
    } else {
        mid
    }
}

/// Strong-Wolfe line search along `d` (bracketing then zoom).
fn strong_wolfe<O: Objective>(
    obj: &O,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha_init: f64,
    evals: &mut usize,
) -> Option<Trial> {
    let dg0 = dot(g0, d);
    let eval = |alpha: f64, evals: &mut usize| {
        *evals += 1;
        let (f, g) = obj.value_grad(&axpy(x, alpha, d));
        let dg = dot(&g, d);
        Trial { alpha, f, g, dg }
    };
    let armijo = |t: &Trial| t.f <= f0 + WOLFE_C1 * t.alpha * dg0;
    let curvature = |t: &Trial| t.dg.abs() <= -WOLFE_C2 * dg0;

    let mut prev = Trial {
        alpha: 0.0,
        f: f0,
        g: g0.to_vec(),
        dg: dg0,
    };
    let mut alpha = alpha_init;
    let mut used = 0;
    let (mut lo, mut hi) = loop {
        if used >= MAX_LINE_EVALS {
            return None;
        }
        let cur = eval(alpha, evals);
        used += 1;
        if !finite(cur.f, &cur.g) {
            // overshot into an overflow region; shrink back toward the last good point
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !armijo(&cur) || (used > 1 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.dg >= 0.0 {
            break (cur, prev);
        }
        alpha = cur.alpha * 2.0;
        prev = cur;
    };

    // zoom: `lo` satisfies sufficient decrease with the lowest value seen so far
    while used < MAX_LINE_EVALS {
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = b - a;
        if width <= f64::EPSILON * b.max(1.0) {
            break;
        }
        let t = cubic_min(&lo, &hi, a + 0.1 * width, b - 0.1 * width);
        let cur = eval(t, evals);
        used += 1;
        if !finite(cur.f, &cur.g) {
            hi = cur;
            continue;
        }
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Some(cur);
            }
            if cur.dg * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept the best strictly-decreasing point found even if curvature is unmet
    if lo.alpha > 0.0 && lo.f < f0 {
        Some(lo)
    } else {
        None
    }
}

fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub fn bfgs<O: Objective>(obj: &O, x0: Vec<f64>, stop: StopCriteria) -> Minimum {
    let n = obj.dim();
    let mut x = x0;
    let (mut f, mut g) = obj.value_grad(&x);
    let mut evals = 1;
    let mut history = vec![f];
    let result = |x: Vec<f64>, f: f64, g: &[f64], it: usize, evals: usize, history: Vec<f64>, nf: bool| Minimum {
        grad_norm: inf_norm(g),
        converged: !nf && inf_norm(g) <= stop.grad_tol,
        x,
        value: f,
        iterations: it,
        evaluations: evals,
        history,
        non_finite: nf,
    };
    if !finite(f, &g) {
        return result(x, f, &g, 0, evals, history, true);
    }
    if inf_norm(&g) <= stop.grad_tol {
        return result(x, f, &g, 0, evals, history, false);
    }

    let mut hinv = identity(n);
    let mut scaled = false;
    let mut iter = 0;
    while iter < stop.max_iters {
        iter += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        if dot(&d, &g) >= 0.0 {
            hinv = identity(n);
            scaled = false;
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if scaled { 1.0 } else { (1.0 / inf_norm(&g)).min(1.0) };
        let trial = match strong_wolfe(obj, &x, f, &g, &d, alpha0, &mut evals) {
            Some(t) => t,
            None if scaled => {
                // stale curvature model: restart from steepest descent once
                hinv = identity(n);
                scaled = false;
                continue;
            }
            None => break,
        };

        let s: Vec<f64> = d.iter().map(|v| v * trial.alpha).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = axpy(&x, 1.0, &s);
        f = trial.f;
        g = trial.g;
        history.push(f);

        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * yy.sqrt() {
            if !scaled {
                hinv = identity(n) * (sy / yy);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let sv = DVector::from_vec(s);
            let yv = DVector::from_vec(y);
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv -= (&sv * hy.transpose() + &hy * sv.transpose()) * rho;
            hinv += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }
        if inf_norm(&g) <= stop.grad_tol {
            break;
        }
    }
    let nf = !finite(f, &g);
    result(x, f, &g, iter, evals, history, nf)
}

/// Newton's method with a Cholesky-factored, Levenberg-shifted Hessian and
/// Armijo backtracking.
pub fn newton<O: Objective>(obj: &O, x0: Vec<f64>, stop: StopCriteria) -> Minimum {
    let n = obj.dim();
    let mut x = x0;
    let (mut f, mut g) = obj.value_grad(&x);
    let mut evals = 1;
    let mut history = vec![f];
    let mut iter = 0;
    let mut non_finite = !finite(f, &g);
    while !non_finite && inf_norm(&g) > stop.grad_tol && iter < stop.max_iters {
        iter += 1;
        let h = obj.hessian(&x);
        let mut shift = 1e-8;
        let chol = loop {
            let shifted = &h + identity(n) * shift;
            if let Some(c) = shifted.cholesky() {
                break Some(c);
            }
            shift *= 10.0;
            if !shift.is_finite() || shift > 1e12 {
                break None;
            }
        };
        let Some(chol) = chol else { break };
        let step = chol.solve(&DVector::from_column_slice(&g));
        let d: Vec<f64> = step.iter().map(|v| -v).collect();
        let dg = dot(&d, &g);

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut full = None;
        for _ in 0..50 {
            let xn = axpy(&x, alpha, &d);
            let (fn_, gn) = obj.value_grad(&xn);
            evals += 1;
            if finite(fn_, &gn) {
                if fn_ <= f + WOLFE_C1 * alpha * dg {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                if alpha == 1.0 {
                    full = Some((xn, fn_, gn));
                }
            }
            alpha *= 0.5;
        }
        // near the optimum the decrease drowns in rounding; a full step that
        // shrinks the gradient is still progress
        let next = accepted.or_else(|| full.filter(|(_, _, gn)| inf_norm(gn) < inf_norm(&g)));
        let Some((xn, fn_, gn)) = next else { break };
        x = xn;
        f = fn_;
        g = gn;
        history.push(f);
        non_finite = !finite(f, &g);
    }
    Minimum {
        grad_norm: inf_norm(&g),
        converged: !non_finite && inf_norm(&g) <= stop.grad_tol,
        x,
        value: f,
        iterations: iter,
        evaluations: evals,
        history,
        non_finite,
    }
}
