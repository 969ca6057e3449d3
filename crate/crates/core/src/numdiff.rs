//! Central finite differences.
//!
//! First derivatives use the step `h = max(1e-6, 1e-6·|x_i|)`. Second
//! derivatives are Richardson-extrapolated second differences from the base
//! step `max(1e-3, 1e-3·|x_i|)`; a plain second difference at `1e-6` loses
//! about eight digits to cancellation.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Mat, Vector};

pub fn first_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

fn second_step(x: f64) -> f64 {
    (1e-3 * x.abs()).max(1e-3)
}

pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vector {
    let mut p = x.to_vec();
    Vector::from_fn(x.len(), |i, _| {
        let h = first_step(x[i]);
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        (fp - fm) / (2.0 * h)
    })
}

/// Jacobian of `f: R^n → R^rows`.
pub fn jacobian(f: &dyn Fn(&[f64], &mut [f64]), x: &[f64], rows: usize) -> Mat {
    let n = x.len();
    let mut jac = Mat::zeros(rows, n);
    let mut p = x.to_vec();
    let mut fp = vec![0.0; rows];
    let mut fm = vec![0.0; rows];
    for j in 0..n {
        let h = first_step(x[j]);
        p[j] = x[j] + h;
        f(&p, &mut fp);
        p[j] = x[j] - h;
        f(&p, &mut fm);
        p[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

fn hessian_at_step(f: &dyn Fn(&[f64]) -> f64, x: &[f64], steps: &[f64]) -> Mat {
    let n = x.len();
    let f0 = f(x);
    let mut p = x.to_vec();
    let mut h = Mat::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let fp = f(&p);
        p[i] = x[i] - hi;
        let fm = f(&p);
        p[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Hessian of a scalar function, fourth-order accurate in the step.
pub fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Mat {
    let steps: Vec<f64> = x.iter().map(|&v| second_step(v)).collect();
    let half: Vec<f64> = steps.iter().map(|h| 0.5 * h).collect();
    let coarse = hessian_at_step(f, x, &steps);
    let fine = hessian_at_step(f, x, &half);
    (fine * 4.0 - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_of_cubic_is_accurate() {
        let f = |u: &[f64]| u[0] * u[0] * u[1] + libm::exp(u[1]) * u[0];
        let x = [0.7, -0.4];
        let h = hessian(&f, &x);
        let e = libm::exp(-0.4);
        let exact = [[2.0 * -0.4, 2.0 * 0.7 + e], [2.0 * 0.7 + e, 0.7 * e]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - exact[i][j]).abs() < 1e-9, "{i}{j}: {}", h[(i, j)]);
            }
        }
    }

    #[test]
    fn gradient_and_jacobian() {
        let f = |u: &[f64]| libm::sin(u[0]) * u[1];
        let g = gradient(&f, &[0.3, 2.0]);
        assert!((g[0] - 2.0 * libm::cos(0.3)).abs() < 1e-9);
        assert!((g[1] - libm::sin(0.3)).abs() < 1e-9);
        let map = |u: &[f64], out: &mut [f64]| {
            out[0] = u[0] * u[1];
            out[1] = u[1] * u[1];
        };
        let j = jacobian(&map, &[3.0, 2.0], 2);
        assert!((j[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((j[(0, 1)] - 3.0).abs() < 1e-8);
        assert!(j[(1, 0)].abs() < 1e-12);
        assert!((j[(1, 1)] - 4.0).abs() < 1e-8);
    }
}
