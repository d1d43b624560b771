//! Preconditioned limited-memory BFGS with a backtracking line search that
//! respects a feasible region.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use crate::Result;

pub trait Objective {
    /// Value at `x`; writes the gradient into `grad`.
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Largest step `α` such that `x + α d` stays strictly inside the feasible region.
    fn max_step(&self, _x: &[f64], _d: &[f64]) -> f64 {
        f64::INFINITY
    }

    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }

    /// Applies an approximate inverse Hessian.
    fn precondition(&self, _x: &[f64], r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }

    fn converged(&self, x: &[f64], grad: &[f64]) -> bool;

    /// Called after every accepted iterate; `Break` stops the run.
    fn observe(&mut self, _iter: usize, _f: f64, _x: &[f64]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    MaxIter,
    Stalled,
    Stopped,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub status: LbfgsStatus,
}

#[derive(Debug, Clone, Copy)]
pub struct Lbfgs {
    pub memory: usize,
    pub max_iter: usize,
    /// Fraction of the distance to the boundary a step may cover.
    pub boundary_fraction: f64,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Lbfgs {
            memory: 12,
            max_iter: 5000,
            boundary_fraction: 0.9,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl Lbfgs {
    pub fn minimize<O: Objective>(&self, obj: &mut O, x0: &[f64]) -> Result<LbfgsOutcome> {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut g = vec![0.0; n];
        let mut f = obj.eval(&x, &mut g)?;
        let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(self.memory);
        let mut d = vec![0.0; n];
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut r = vec![0.0; n];

        let outcome = |x: Vec<f64>, f, grad, iterations, status| LbfgsOutcome {
            x,
            f,
            grad,
            iterations,
            status,
        };

        if obj.converged(&x, &g) {
            return Ok(outcome(x, f, g, 0, LbfgsStatus::Converged));
        }

        for iter in 1..=self.max_iter {
            // two-loop recursion
            q.copy_from_slice(&g);
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, rho) in hist.iter().rev() {
                let a = rho * dot(s, &q);
                for i in 0..n {
                    q[i] -= a * y[i];
                }
                alphas.push(a);
            }
            obj.precondition(&x, &q, &mut r);
            if let Some((s, y, _)) = hist.back() {
                let mut py = vec![0.0; n];
                obj.precondition(&x, y, &mut py);
                let gamma = dot(s, y) / dot(y, &py);
                if gamma.is_finite() && gamma > 0.0 {
                    r.iter_mut().for_each(|v| *v *= gamma);
                }
            }
            for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &r);
                for i in 0..n {
                    r[i] += s[i] * (a - b);
                }
            }
            for i in 0..n {
                d[i] = -r[i];
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                hist.clear();
                obj.precondition(&x, &g, &mut r);
                for i in 0..n {
                    d[i] = -r[i];
                }
                slope = dot(&g, &d);
                if !(slope < 0.0) {
                    return Ok(outcome(x, f, g, iter, LbfgsStatus::Stalled));
                }
            }

            let mut alpha = 1.0f64.min(self.boundary_fraction * obj.max_step(&x, &d));
            let g_max = max_abs(&g);
            let mut accepted = None;
            while alpha > 1e-20 {
                for i in 0..n {
                    x_new[i] = x[i] + alpha * d[i];
                }
                if obj.admissible(&x_new) {
                    if let Ok(f_new) = obj.eval(&x_new, &mut g_new) {
                        if f_new.is_finite() {
                            let armijo = f_new <= f + 1e-4 * alpha * slope;
                            let flat = (f_new - f).abs() <= 1e-13 * (1.0 + f.abs())
                                && max_abs(&g_new) < g_max;
                            if armijo || flat {
                                accepted = Some(f_new);
                                break;
                            }
                        }
                    }
                }
                alpha *= 0.5;
            }
            let Some(f_new) = accepted else {
                return Ok(outcome(x, f, g, iter, LbfgsStatus::Stalled));
            };

            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if hist.len() == self.memory {
                    hist.pop_front();
                }
                hist.push_back((s, y, 1.0 / sy));
            }
            x.copy_from_slice(&x_new);
            g.copy_from_slice(&g_new);
            f = f_new;

            if obj.observe(iter, f, &x).is_break() {
                return Ok(outcome(x, f, g, iter, LbfgsStatus::Stopped));
            }
            if obj.converged(&x, &g) {
                return Ok(outcome(x, f, g, iter, LbfgsStatus::Converged));
            }
        }
        Ok(outcome(x, f, g, self.max_iter, LbfgsStatus::MaxIter))
    }
}

/// Solves `(2, -1; -1, 2, -1; ...) y = r` for each column of an interleaved
/// `m × dim` right-hand side (Thomas algorithm).
pub(crate) fn solve_laplacian(r: &[f64], dim: usize, out: &mut [f64]) {
    let m = r.len() / dim;
    if m == 0 {
        return;
    }
    let mut c = vec![0.0; m];
    for d in 0..dim {
        // forward sweep, diagonal 2, off-diagonals -1
        let mut denom = 2.0;
        c[0] = -1.0 / denom;
        out[d] = r[d] / denom;
        for i in 1..m {
            denom = 2.0 + c[i - 1];
            c[i] = -1.0 / denom;
            out[i * dim + d] = (r[i * dim + d] + out[(i - 1) * dim + d]) / denom;
        }
        for i in (0..m - 1).rev() {
            out[i * dim + d] -= c[i] * out[(i + 1) * dim + d];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        }
        fn converged(&self, _x: &[f64], g: &[f64]) -> bool {
            max_abs(g) < 1e-10
        }
    }

    #[test]
    fn rosenbrock_minimum() {
        let out = Lbfgs::default().minimize(&mut Rosenbrock, &[-1.2, 1.0]).unwrap();
        assert_eq!(out.status, LbfgsStatus::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn laplacian_solve() {
        let dim = 2;
        let r = vec![1.0, 0.0, 2.0, 1.0, -1.0, 3.0, 0.5, 0.5];
        let mut y = vec![0.0; r.len()];
        solve_laplacian(&r, dim, &mut y);
        let m = r.len() / dim;
        for d in 0..dim {
            for i in 0..m {
                let left = if i > 0 { y[(i - 1) * dim + d] } else { 0.0 };
                let right = if i + 1 < m { y[(i + 1) * dim + d] } else { 0.0 };
                let lhs = 2.0 * y[i * dim + d] - left - right;
                assert!((lhs - r[i * dim + d]).abs() < 1e-12);
            }
        }
    }
}
