//! Partial-equilibrium reduction of a two-scale mass-action network.
//!
//! Fast reactions run at rate `1/ε`. The reduced model keeps them at
//! equilibrium: with `Γ` the net stoichiometry of the fast reactions
//! restricted to the species they involve, the state is pinned by
//! `Γᵀ·ln c = ln K` together with the fast invariants `ξ = Wᵀc` (`W` spanning
//! the left null space of `Γ`), and only `ξ` and the uninvolved species
//! evolve, driven by the slow reactions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::StochasticError;
use crate::linalg::{self, Mat};
use crate::numdiff;
use crate::stochastic::mass_action::{simulate_mass_action, ReactionNetwork};
use crate::stochastic::ode::{dopri5, OdeOptions};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PeaRow {
    pub epsilon: f64,
    /// `max_{t ∈ [t₀, T]} ‖c_full(t) − c_reduced(t)‖∞` over the samples.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PeaReport {
    pub rows: Vec<PeaRow>,
    /// Log-log slope of error against `ε`; absent with fewer than two
    /// positive errors.
    pub slope: Option<f64>,
    pub t0: f64,
}

/// Partial-equilibrium reduced model.
#[derive(Debug, Clone)]
pub struct PeaReduction {
    net: ReactionNetwork,
    fast: Vec<usize>,
    involved: Vec<usize>,
    free: Vec<usize>,
    gamma: Mat,
    w: Mat,
    ln_k: Vec<f64>,
    slow_net: ReactionNetwork,
}

impl PeaReduction {
    pub fn new(net: &ReactionNetwork, fast: &[usize], slow: &[usize]) -> Result<Self, StochasticError> {
        let r = net.reactions.len();
        let mut seen = vec![false; r];
        for &i in fast.iter().chain(slow) {
            if i >= r || seen[i] {
                return Err(StochasticError::Domain(format!("reaction index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(StochasticError::Domain("every reaction must be either fast or slow".into()));
        }
        let n = net.n_species();
        let s = net.stoichiometry();
        let involved: Vec<usize> = (0..n).filter(|&k| fast.iter().any(|&i| s[(k, i)] != 0.0)).collect();
        let free: Vec<usize> = (0..n).filter(|k| !involved.contains(k)).collect();
        let gamma = Mat::from_fn(involved.len(), fast.len(), |a, b| s[(involved[a], fast[b])]);
        if !fast.is_empty() {
            let rank = fast.len() - linalg::null_space(&gamma, 1e-10).ncols();
            if rank < fast.len() {
                return Err(StochasticError::Domain("fast reactions have linearly dependent stoichiometry".into()));
            }
        }
        let w = if involved.is_empty() {
            Mat::zeros(0, 0)
        } else if fast.is_empty() {
            Mat::identity(involved.len(), involved.len())
        } else {
            linalg::null_space(&gamma.transpose(), 1e-10)
        };
        let mut ln_k = Vec::with_capacity(fast.len());
        for &i in fast {
            let rx = &net.reactions[i];
            if !(rx.k_minus > 0.0 && rx.k_plus > 0.0) {
                return Err(StochasticError::Domain(format!("fast reaction {i} must be reversible")));
            }
            ln_k.push(libm::log(rx.k_plus / rx.k_minus));
        }
        let mut factors = vec![0.0; r];
        for &i in slow {
            factors[i] = 1.0;
        }
        let slow_net = net.scaled(&factors);
        Ok(Self { net: net.clone(), fast: fast.to_vec(), involved, free, gamma, w, ln_k, slow_net })
    }

    /// Reduced coordinates `(c_free, ξ)` of a full state.
    pub fn reduce(&self, c: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.free.iter().map(|&k| c[k]).collect();
        for col in 0..self.w.ncols() {
            out.push(self.involved.iter().enumerate().map(|(a, &k)| self.w[(a, col)] * c[k]).sum());
        }
        out
    }

    /// The point of the fast-equilibrium manifold with reduced coordinates
    /// `xi`, found by Newton iteration in `ln c` from the guess `warm`.
    pub fn lift(&self, xi: &[f64], warm: &[f64], time: f64) -> Result<Vec<f64>, StochasticError> {
        let n = self.net.n_species();
        let mut c = vec![0.0; n];
        for (a, &k) in self.free.iter().enumerate() {
            c[k] = xi[a];
        }
        let ni = self.involved.len();
        if ni == 0 {
            return Ok(c);
        }
        let target: Vec<f64> = xi[self.free.len()..].to_vec();
        let scale = target.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
        let floor = 1e-12 * scale;
        let mut y: Vec<f64> = self.involved.iter().map(|&k| libm::log(warm[k].max(floor))).collect();
        let residual = |y: &[f64]| -> Vec<f64> {
            let mut r = Vec::with_capacity(ni);
            for b in 0..self.fast.len() {
                r.push((0..ni).map(|a| self.gamma[(a, b)] * y[a]).sum::<f64>() - self.ln_k[b]);
            }
            for col in 0..self.w.ncols() {
                let v: f64 = (0..ni).map(|a| self.w[(a, col)] * libm::exp(y[a])).sum();
                r.push((v - target[col]) / scale);
            }
            r
        };
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut r = residual(&y);
        let mut iterations = 0;
        while norm(&r) > 1e-13 {
            iterations += 1;
            if iterations > 100 {
                return Err(StochasticError::Reduction { time, reason: format!("Newton did not converge (residual {:e})", norm(&r)) });
            }
            let jac = Mat::from_fn(ni, ni, |row, a| {
                if row < self.fast.len() {
                    self.gamma[(a, row)]
                } else {
                    self.w[(a, row - self.fast.len())] * libm::exp(y[a]) / scale
                }
            });
            let step = jac
                .lu()
                .solve(&DVector::from_column_slice(&r))
                .ok_or_else(|| StochasticError::Reduction { time, reason: "singular Newton matrix".into() })?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
                let rt = residual(&trial);
                if rt.iter().all(|v| v.is_finite()) && norm(&rt) < norm(&r) {
                    y = trial;
                    r = rt;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-10 {
                    break;
                }
            }
            if lambda < 1e-10 {
                // stalled at the rounding floor
                if norm(&r) <= 1e-10 {
                    break;
                }
                return Err(StochasticError::Reduction {
                    time,
                    reason: format!("no positive root of the fast-equilibrium constraints (residual {:e})", norm(&r)),
                });
            }
        }
        for (a, &k) in self.involved.iter().enumerate() {
            c[k] = libm::exp(y[a]);
        }
        Ok(c)
    }

    /// Slow-reaction contribution in reduced coordinates.
    fn reduced_rhs(&self, c: &[f64], out: &mut [f64]) {
        let n = self.net.n_species();
        let mut full = vec![0.0; n];
        self.slow_net.rhs_into(c, &mut full);
        let nf = self.free.len();
        for (a, &k) in self.free.iter().enumerate() {
            out[a] = full[k];
        }
        for col in 0..self.w.ncols() {
            out[nf + col] = self.involved.iter().enumerate().map(|(a, &k)| self.w[(a, col)] * full[k]).sum();
        }
    }

    /// Reduced trajectory lifted to full concentrations at `samples`.
    pub fn trajectory(&self, c0: &[f64], horizon: f64, samples: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>, StochasticError> {
        let xi0 = self.reduce(c0);
        let mut warm = c0.to_vec();
        let mut out = Vec::new();
        let mut f = |t: f64, xi: &[f64], d: &mut [f64]| {
            let c = self.lift(xi, &warm, t)?;
            self.reduced_rhs(&c, d);
            warm = c;
            Ok(())
        };
        let mut guess = c0.to_vec();
        let mut record = |t: f64, xi: &[f64]| {
            if samples.iter().any(|&s| s == t) {
                let c = self.lift(xi, &guess, t)?;
                guess = c.clone();
                out.push(c);
            }
            Ok(())
        };
        let ode = OdeOptions { nonnegative: false, ..opts.clone() };
        dopri5(&mut f, &xi0, 0.0, horizon, &ode, Some(samples), &mut record)?;
        Ok(out)
    }

    fn fast_network(&self) -> ReactionNetwork {
        let mut factors = vec![0.0; self.net.reactions.len()];
        for &i in &self.fast {
            factors[i] = 1.0;
        }
        self.net.scaled(&factors)
    }

    /// `10·ε_max/ρ(J_fast(c₀))`: ten fast time constants at the largest `ε`.
    pub fn layer_time(&self, c0: &[f64], eps_max: f64) -> f64 {
        let fast = self.fast_network();
        let jac = numdiff::jacobian(&|c, out| fast.rhs_into(c, out), c0, c0.len());
        let rho = linalg::spectral_radius(&jac);
        if rho > 0.0 {
            10.0 * eps_max / rho
        } else {
            0.0
        }
    }

    /// Full two-scale network for a given `ε`.
    pub fn full_network(&self, eps: f64) -> ReactionNetwork {
        let mut factors = vec![1.0; self.net.reactions.len()];
        for &i in &self.fast {
            factors[i] = 1.0 / eps;
        }
        self.net.scaled(&factors)
    }
}

/// Sample grid of `count` evenly spaced times on `[t0, horizon]`.
pub fn sample_times(t0: f64, horizon: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|k| t0 + (horizon - t0) * k as f64 / (count - 1) as f64).collect()
}

/// Sup-error between the full and reduced models at one `ε`.
pub fn pea_error(
    red: &PeaReduction,
    c0: &[f64],
    horizon: f64,
    eps: f64,
    samples: &[f64],
    reduced: &[Vec<f64>],
    opts: &OdeOptions,
) -> Result<f64, StochasticError> {
    let full = simulate_mass_action(&red.full_network(eps), c0, horizon, opts, Some(samples))?;
    let mut err: f64 = 0.0;
    for (state, t) in full.states.iter().zip(&full.times) {
        if let Some(idx) = samples.iter().position(|s| s == t) {
            for (a, b) in state.iter().zip(&reduced[idx]) {
                err = err.max((a - b).abs());
            }
        }
    }
    Ok(err)
}

/// Error table of the reduction over `epsilons` with its log-log slope.
pub fn pea_experiment(
    net: &ReactionNetwork,
    fast: &[usize],
    slow: &[usize],
    c0: &[f64],
    horizon: f64,
    epsilons: &[f64],
    opts: &OdeOptions,
) -> Result<PeaReport, StochasticError> {
    let red = PeaReduction::new(net, fast, slow)?;
    let eps_max = epsilons.iter().copied().fold(0.0, f64::max);
    let t0 = red.layer_time(c0, eps_max);
    let samples = sample_times(t0, horizon, 201);
    let reduced = red.trajectory(c0, horizon, &samples, opts)?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let error = pea_error(&red, c0, horizon, eps, &samples, &reduced, opts)?;
        rows.push(PeaRow { epsilon: eps, error });
    }
    Ok(PeaReport { slope: loglog_slope(&rows), rows, t0 })
}

pub fn loglog_slope(rows: &[PeaRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (libm::log(r.epsilon), libm::log(r.error)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(linalg::linear_fit(&x, &y).0)
}
