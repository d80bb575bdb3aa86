//! Dense BFGS with a strong-Wolfe line search (bracketing plus cubic zoom).

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsSettings {
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_k - f_{k+1}| <= rel_tol * max(|f_k|, |f_{k+1}|)`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Optional early exit once the objective drops below this value.
    pub target: Option<f64>,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            rel_tol: 1e-14,
            max_iter: 5000,
            target: None,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 60,
        }
    }
}

/// Which stopping rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    RelativeChange,
    TargetReached,
    IterationLimit,
    LineSearchFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::RelativeChange => "relative_change",
            Termination::TargetReached => "target_reached",
            Termination::IterationLimit => "iteration_limit",
            Termination::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    /// Max-norm of the gradient at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::GradientTolerance | Termination::RelativeChange | Termination::TargetReached
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    trial: Vec<f64>,
    grad: Vec<f64>,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        let f = (self.objective)(&self.trial, &mut self.grad);
        self.evaluations += 1;
        Point { alpha, f, slope: dot(&self.grad, self.dir) }
    }
}

/// Minimizer of the cubic through two points with slopes, kept inside the
/// middle 80% of the bracket.
fn cubic_step(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let width = b - a;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * width.abs();
    let fallback = 0.5 * (a + b);
    if disc < 0.0 {
        return fallback;
    }
    let d2 = width.signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return fallback;
    }
    let t = b - width * (hi.slope + d2 - d1) / denom;
    if !t.is_finite() {
        return fallback;
    }
    t.clamp(left + margin, right - margin)
}

/// Strong-Wolfe search along `dir`; returns the accepted step, its value
/// and leaves the gradient in `search.grad`.
fn strong_wolfe<F: FnMut(&[f64], &mut [f64]) -> f64>(
    search: &mut LineSearch<'_, F>,
    f0: f64,
    slope0: f64,
    alpha0: f64,
    settings: &BfgsSettings,
) -> Option<Point> {
    let (c1, c2) = (settings.c1, settings.c2);
    let armijo = |p: &Point| p.f <= f0 + c1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -c2 * slope0;
    let mut prev = Point { alpha: 0.0, f: f0, slope: slope0 };
    let mut alpha = alpha0;
    let mut budget = settings.max_line_search;
    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return None;
        }
        budget -= 1;
        let cur = search.eval(alpha);
        if !cur.f.is_finite() {
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !armijo(&cur) || (prev.alpha > 0.0 && cur.f >= prev.f) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        prev = cur;
        alpha *= 2.0;
    }
    // zoom
    while budget > 0 {
        budget -= 1;
        if (hi.alpha - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
            break;
        }
        let cur = search.eval(cubic_step(&lo, &hi));
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept a strict decrease even without the curvature condition
    if lo.alpha > 0.0 && lo.f < f0 {
        let p = search.eval(lo.alpha);
        return Some(p);
    }
    None
}

/// Minimizes `objective(x, grad) -> f` (which must fill `grad`) from `x0`.
pub fn bfgs_minimize<F>(mut objective: F, x0: &[f64], settings: &BfgsSettings) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let f_initial = f;
    let mut evaluations = 1;
    // inverse Hessian approximation, row-major
    let mut hinv = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut hinv);
    let mut fresh = true;
    let mut dir = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];
    let mut iterations = 0;
    let finish = |x: Vec<f64>, f: f64, g: &[f64], it: usize, ev: usize, t: Termination| BfgsOutcome {
        grad_norm: max_norm(g),
        x,
        f,
        f_initial,
        iterations: it,
        evaluations: ev,
        termination: t,
    };
    loop {
        if max_norm(&g) < settings.grad_tol {
            return finish(x, f, &g, iterations, evaluations, Termination::GradientTolerance);
        }
        if settings.target.is_some_and(|t| f <= t) {
            return finish(x, f, &g, iterations, evaluations, Termination::TargetReached);
        }
        if iterations >= settings.max_iter {
            return finish(x, f, &g, iterations, evaluations, Termination::IterationLimit);
        }
        for i in 0..n {
            dir[i] = -dot(&hinv[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            reset(&mut hinv);
            fresh = true;
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }
        // first step of a fresh metric is scaled to a unit max-norm move
        let alpha0 = if fresh { (1.0 / max_norm(&dir)).min(1.0) } else { 1.0 };
        let mut search = LineSearch {
            objective: &mut objective,
            x: &x,
            dir: &dir,
            trial: vec![0.0; n],
            grad: vec![0.0; n],
            evaluations: 0,
        };
        let accepted = strong_wolfe(&mut search, f, slope, alpha0, settings);
        evaluations += search.evaluations;
        let (trial, g_new) = (search.trial, search.grad);
        let Some(point) = accepted else {
            if fresh {
                return finish(x, f, &g, iterations, evaluations, Termination::LineSearchFailure);
            }
            log::debug!("line search failed; resetting the inverse Hessian");
            reset(&mut hinv);
            fresh = true;
            continue;
        };
        iterations += 1;
        for i in 0..n {
            s[i] = trial[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let f_old = f;
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        f = point.f;
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if fresh {
                // Shanno-Phua scaling of the initial metric
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            for i in 0..n {
                hy[i] = dot(&hinv[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            let k = (1.0 + rho * yhy) * rho;
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += k * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        if (f_old - f).abs() <= settings.rel_tol * f_old.abs().max(f.abs()) {
            let t = if max_norm(&g) < settings.grad_tol {
                Termination::GradientTolerance
            } else {
                Termination::RelativeChange
            };
            return finish(x, f, &g, iterations, evaluations, t);
        }
    }
}
