//! Adaptive Dormand–Prince 5(4) integrator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::StochasticError;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Reject steps that leave any component below `−atol`.
    pub nonnegative: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, initial_step: None, max_steps: 5_000_000, nonnegative: true }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
///
/// With `samples`, steps are shortened to land on each sample time and only
/// those states are passed to `record`; otherwise every accepted step is.
/// `record` receives the initial state first.
pub fn dopri5(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]) -> Result<(), StochasticError>,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
    samples: Option<&[f64]>,
    record: &mut dyn FnMut(f64, &[f64]) -> Result<(), StochasticError>,
) -> Result<Vec<f64>, StochasticError> {
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    record(t, &y)?;
    if t1 <= t0 {
        return Ok(y);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    f(t, &y, &mut k[0])?;
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            let d0 = norm(&y, &y, opts);
            let d1 = norm(&k[0], &y, opts);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(t1 - t0)
        }
    };
    let mut next_sample = 0;
    let sample_list: &[f64] = samples.unwrap_or(&[]);
    while next_sample < sample_list.len() && sample_list[next_sample] <= t0 {
        next_sample += 1;
    }
    let mut steps = 0;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(StochasticError::Integration { time: t, reason: format!("step limit {} reached", opts.max_steps) });
        }
        let target = if next_sample < sample_list.len() { sample_list[next_sample].min(t1) } else { t1 };
        let mut hit = false;
        if t + h >= target {
            h = target - t;
            hit = true;
        }
        if h <= 1e-15 * t.abs().max(1.0) {
            return Err(StochasticError::Integration { time: t, reason: format!("step size underflow (h = {h:e})") });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (r, a) in A[s].iter().enumerate().take(s) {
                    acc += a * k[r][i];
                }
                stage[i] = y[i] + h * acc;
            }
            f(t + C[s] * h, &stage, &mut k[s])?;
        }
        let mut err = 0.0;
        let mut negative = false;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * k[s][i];
                lo += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * hi;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            let e = h * (hi - lo) / sc;
            err += e * e;
            if opts.nonnegative && y5[i] < -opts.atol {
                negative = true;
            }
        }
        let err = libm::sqrt(err / n.max(1) as f64);
        steps += 1;
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 && !negative {
            t = if hit { target } else { t + h };
            core::mem::swap(&mut y, &mut y5);
            // FSAL: the last stage is f at the new point
            let last = k[6].clone();
            k[0].copy_from_slice(&last);
            if samples.is_none() {
                record(t, &y)?;
            } else if hit && next_sample < sample_list.len() && target == sample_list[next_sample].min(t1) {
                record(t, &y)?;
                next_sample += 1;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else if negative && err <= 1.0 {
            h *= 0.5;
        } else {
            h *= (0.9 * libm::pow(err, -0.2)).clamp(0.1, 0.9);
        }
    }
    if samples.is_some() && next_sample < sample_list.len() {
        // samples past t1 are clipped to the end point
        record(t, &y)?;
    }
    Ok(y)
}

fn norm(v: &[f64], y: &[f64], opts: &OdeOptions) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let sc = opts.atol + opts.rtol * b.abs();
            (a / sc) * (a / sc)
        })
        .sum();
    libm::sqrt(s / v.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -y[0];
            out[1] = y[0] - 0.5 * y[1];
            Ok(())
        };
        let mut rec = |_t: f64, _y: &[f64]| Ok(());
        let y = dopri5(&mut f, &[1.0, 0.0], 0.0, 3.0, &OdeOptions::default(), None, &mut rec).unwrap();
        let e = libm::exp(-3.0);
        assert!((y[0] - e).abs() < 1e-9);
        // y1 = 2(e^{-t/2} - e^{-t})
        assert!((y[1] - 2.0 * (libm::exp(-1.5) - e)).abs() < 1e-9);
    }

    #[test]
    fn samples_are_hit_exactly() {
        let mut f = |_t: f64, _y: &[f64], out: &mut [f64]| {
            out[0] = 1.0;
            Ok(())
        };
        let mut times = Vec::new();
        let samples = [0.5, 1.0, 1.5];
        let mut rec = |t: f64, _y: &[f64]| {
            times.push(t);
            Ok(())
        };
        dopri5(&mut f, &[0.0], 0.0, 1.5, &OdeOptions::default(), Some(&samples), &mut rec).unwrap();
        assert_eq!(times, vec![0.0, 0.5, 1.0, 1.5]);
    }
}
