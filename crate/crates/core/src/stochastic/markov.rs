//! Continuous-time Markov chains: steady state, detailed balance, the
//! flux–force decomposition of the master equation and its simulation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use crate::error::StochasticError;
use crate::linalg::{self, Mat, Vector};

/// Rate matrix `q` with `q_ij` the rate from state `j` into state `i`, so
/// that `dp/dt = q·p` and every column sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGenerator {
    rates: Mat,
    steady: Vector,
    kt: f64,
}

const COLUMN_TOL: f64 = 1e-12;
const STEADY_TOL: f64 = 1e-10;

impl MarkovGenerator {
    /// Validates `q` and computes its steady state.
    pub fn new(rates: Mat) -> Result<Self, StochasticError> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return Err(StochasticError::InvalidGenerator(format!(
                "rate matrix must be square and nonempty, got {}×{}",
                rates.nrows(),
                rates.ncols()
            )));
        }
        let scale = linalg::max_abs(&rates).max(1.0);
        for j in 0..n {
            let mut col = 0.0;
            for i in 0..n {
                let v = rates[(i, j)];
                if !v.is_finite() {
                    return Err(StochasticError::InvalidGenerator(format!("rate q[{i}][{j}] is not finite")));
                }
                if i != j && v < 0.0 {
                    return Err(StochasticError::InvalidGenerator(format!("negative rate q[{i}][{j}] = {v}")));
                }
                col += v;
            }
            if col.abs() > COLUMN_TOL * scale {
                return Err(StochasticError::InvalidGenerator(format!("column {j} sums to {col:e}")));
            }
        }
        let steady = steady_state(&rates)?;
        Ok(Self { rates, steady, kt: 1.0 })
    }

    /// Builds `q` from off-diagonal `(i, j, q_ij)` triples; the diagonal is
    /// filled so that columns sum to zero.
    pub fn from_rates(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self, StochasticError> {
        let mut q = Mat::zeros(n, n);
        for &(i, j, r) in triples {
            if i >= n || j >= n {
                return Err(StochasticError::InvalidGenerator(format!("rate ({i}, {j}) out of range for N = {n}")));
            }
            if i == j {
                return Err(StochasticError::InvalidGenerator(format!("diagonal rate ({i}, {i}) given explicitly")));
            }
            q[(i, j)] += r;
        }
        fill_diagonal(&mut q);
        Self::new(q)
    }

    pub fn with_temperature(mut self, kt: f64) -> Result<Self, StochasticError> {
        if !(kt > 0.0) || !kt.is_finite() {
            return Err(StochasticError::Domain(format!("k_B·T = {kt} must be positive")));
        }
        self.kt = kt;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &Mat {
        &self.rates
    }

    pub fn steady_state(&self) -> &Vector {
        &self.steady
    }

    pub fn temperature(&self) -> f64 {
        self.kt
    }

    /// `q·p`.
    pub fn rhs(&self, p: &Vector) -> Vector {
        &self.rates * p
    }

    /// `k_B·T·Σ p_i ln(p_i/p_s,i)`, with `0·ln 0 = 0`.
    pub fn free_energy(&self, p: &Vector) -> f64 {
        self.kt
            * p.iter()
                .zip(self.steady.iter())
                .map(|(&pi, &si)| if pi > 0.0 { pi * libm::log(pi / si) } else { 0.0 })
                .sum::<f64>()
    }

    /// Tsallis relative entropy with index 2: `½Σ p_i²/p_s,i − ½`.
    pub fn tsallis(&self, p: &Vector) -> f64 {
        0.5 * p.iter().zip(self.steady.iter()).map(|(&pi, &si)| pi * pi / si).sum::<f64>() - 0.5
    }

    /// `−dF/dt = −k_B·T·Σ ln(p_i/p_s,i)·(q·p)_i`.
    pub fn production_rate(&self, p: &Vector) -> f64 {
        let j = self.rhs(p);
        -self.kt
            * p.iter()
                .zip(self.steady.iter())
                .zip(j.iter())
                .map(|((&pi, &si), &ji)| if pi > 0.0 { libm::log(pi / si) * ji } else { 0.0 })
                .sum::<f64>()
    }

    /// Random irreducible generator: a directed ring plus each remaining
    /// edge with probability `density`, rates uniform in `[0.1, 2)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> Self {
        let mut q = Mat::zeros(n, n);
        for j in 0..n {
            if n > 1 {
                q[((j + 1) % n, j)] = rng.random_range(0.1..2.0);
            }
            for i in 0..n {
                if i != j && q[(i, j)] == 0.0 && rng.random::<f64>() < density {
                    q[(i, j)] = rng.random_range(0.1..2.0);
                }
            }
        }
        fill_diagonal(&mut q);
        Self::new(q).expect("ring generators are irreducible")
    }

    /// Random generator satisfying detailed balance with respect to a random
    /// positive steady state: `q_ij = w_ij/p_s,j` for symmetric `w`.
    pub fn random_reversible<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> Self {
        let ps: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = ps.iter().sum();
        let ps: Vec<f64> = ps.iter().map(|v| v / total).collect();
        let mut w = Mat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let chain = j == i + 1;
                if chain || rng.random::<f64>() < density {
                    let v = rng.random_range(0.05..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        let mut q = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[(i, j)] / ps[j] });
        fill_diagonal(&mut q);
        Self::new(q).expect("chains are irreducible")
    }
}

fn fill_diagonal(q: &mut Mat) {
    let n = q.nrows();
    for j in 0..n {
        q[(j, j)] = 0.0;
        let off: f64 = (0..n).filter(|&i| i != j).map(|i| q[(i, j)]).sum();
        q[(j, j)] = -off;
    }
}

/// Strongly connected components of the transition graph `j → i` for
/// `q_ij > 0`, each sorted, ordered by smallest member.
pub fn communicating_classes(q: &Mat) -> Vec<Vec<usize>> {
    let n = q.nrows();
    let reach = |start: usize, forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let edge = if forward { q[(w, v)] } else { q[(v, w)] };
                if w != v && edge > 0.0 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let fwd = reach(s, true);
        let bwd = reach(s, false);
        let class: Vec<usize> = (0..n).filter(|&k| fwd[k] && bwd[k]).collect();
        for &k in &class {
            assigned[k] = true;
        }
        classes.push(class);
    }
    classes
}

/// Unique positive solution of `q·p = 0`, `Σp = 1` for irreducible `q`.
pub fn steady_state(q: &Mat) -> Result<Vector, StochasticError> {
    let n = q.nrows();
    let classes = communicating_classes(q);
    if classes.len() > 1 {
        return Err(StochasticError::Reducible { classes });
    }
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    // Grassmann–Taksar–Heyman elimination on a[i][j] = rate i → j; it is
    // subtraction-free, so tiny stationary masses keep full relative accuracy.
    let mut a = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { q[(j, i)] });
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0) {
            return Err(StochasticError::Inconsistent(format!("state {k} has no path to lower states")));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for j in 0..k {
                    if i != j {
                        a[(i, j)] += aik * a[(k, j)];
                    }
                }
            }
        }
    }
    let mut p = DVector::zeros(n);
    p[0] = 1.0;
    for k in 1..n {
        p[k] = (0..k).map(|i| p[i] * a[(i, k)]).sum();
    }
    let sum = p.sum();
    p /= sum;
    let scale = linalg::max_abs(q).max(1.0);
    let res = (q * &p).amax();
    if !p.iter().all(|&v| v > 0.0) || res > STEADY_TOL * scale {
        return Err(StochasticError::Inconsistent(format!(
            "steady state not positive or residual {res:e} too large"
        )));
    }
    Ok(p)
}

/// Outcome of the detailed-balance test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DetailedBalance {
    pub holds: bool,
    /// `max_{i≠j} |q_ij·p_s,j − q_ji·p_s,i|`.
    pub residual: f64,
    /// Edge attaining the residual.
    pub edge: (usize, usize),
}

pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

pub fn detailed_balance(gen: &MarkovGenerator) -> DetailedBalance {
    let (q, ps) = (&gen.rates, &gen.steady);
    let n = gen.n();
    let mut best = DetailedBalance { holds: true, residual: 0.0, edge: (0, 0) };
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (q[(i, j)] * ps[j] - q[(j, i)] * ps[i]).abs();
            if r > best.residual {
                best.residual = r;
                best.edge = (i, j);
            }
        }
    }
    best.holds = best.residual <= DETAILED_BALANCE_TOL;
    best
}

/// `(a − b)/ln(a/b)`, continuously extended by `a` on the diagonal.
pub fn log_mean(a: f64, b: f64) -> f64 {
    if a == b {
        return a;
    }
    let x = a / b - 1.0;
    if x.abs() < 1e-4 {
        b * (1.0 + x / 2.0 - x * x / 12.0 + x * x * x / 24.0)
    } else {
        (a - b) / (libm::log(a) - libm::log(b))
    }
}

/// Flux–force form `J = M·X` of the master equation at one distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsagerDecomposition {
    pub m: Mat,
    /// `X_i = −∂F/∂p_i`.
    pub x: Vector,
    /// `J = q·p`.
    pub j: Vector,
    pub free_energy: f64,
    /// `‖J − M·X‖∞`.
    pub residual: f64,
}

pub const ONSAGER_TOL: f64 = 1e-10;

/// Log-mean mobility matrix at `p`:
/// `M_ij = −q_ij·p_s,j·LogMean(u_i, u_j)/(k_B·T)` for `i ≠ j` with
/// `u = p/p_s`, and zero row sums.
pub fn onsager_matrix(gen: &MarkovGenerator, p: &Vector) -> Result<OnsagerDecomposition, StochasticError> {
    let n = gen.n();
    if p.len() != n {
        return Err(StochasticError::Domain(format!("distribution has {} entries, generator {n}", p.len())));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(StochasticError::Domain(format!("p[{i}] = {v} must be positive")));
    }
    let sum = p.sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(StochasticError::Domain(format!("distribution sums to {sum}")));
    }
    let (q, ps, kt) = (&gen.rates, &gen.steady, gen.kt);
    let u: Vec<f64> = (0..n).map(|i| p[i] / ps[i]).collect();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] = -q[(i, j)] * ps[j] * log_mean(u[i], u[j]) / kt;
            }
        }
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -row;
    }
    let x = DVector::from_fn(n, |i, _| -kt * (libm::log(u[i]) + 1.0));
    let j = gen.rhs(p);
    let residual = (&j - &m * &x).amax();
    let scale = linalg::max_abs(q).max(1.0);
    if !(residual <= ONSAGER_TOL * scale) {
        return Err(StochasticError::Inconsistent(format!("‖J − M·X‖∞ = {residual:e}")));
    }
    let null = (&m * DVector::from_element(n, 1.0 / libm::sqrt(n as f64))).amax();
    if !(null <= ONSAGER_TOL * scale) {
        return Err(StochasticError::Inconsistent(format!("‖M·1‖∞ = {null:e}")));
    }
    Ok(OnsagerDecomposition { m, x, j, free_energy: gen.free_energy(p), residual })
}

/// Verdict of the positive-stability test.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PositiveStability {
    pub pass: bool,
    pub zero_count: usize,
    /// Smallest real part among the nonzero eigenvalues.
    pub min_real_part: f64,
    /// `‖M·1/√N‖∞`.
    pub null_residual: f64,
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Exactly one eigenvalue with `|λ| ≤ tol`, all others with `Re λ > tol`,
/// and the constant vector in the kernel.
pub fn positive_stability_check(m: &Mat, tol: f64) -> PositiveStability {
    let n = m.nrows();
    let ev = linalg::eigenvalues(m);
    let scale = linalg::max_abs(m).max(1.0);
    let t = tol * scale;
    let zero_count = ev.iter().filter(|z| z.norm() <= t).count();
    let min_real_part = ev.iter().filter(|z| z.norm() > t).map(|z| z.re).fold(f64::INFINITY, f64::min);
    let null_residual = if n == 0 { 0.0 } else { (m * DVector::from_element(n, 1.0 / libm::sqrt(n as f64))).amax() };
    PositiveStability {
        pass: zero_count == 1 && min_real_part > t && null_residual <= t,
        zero_count,
        min_real_part,
        null_residual,
        eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StepMode {
    /// Implicit midpoint, sub-stepped so that each sub-step is a Markov
    /// kernel (`h ≤ 2/max|q_ii|`).
    #[default]
    Implicit,
    /// Forward Euler; fails on a negative probability.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub free_energy: Vec<f64>,
    pub tsallis: Vec<f64>,
    pub production: Vec<f64>,
}

/// Integrates `dp/dt = q·p` on `[0, horizon]` with output step `dt`.
pub fn simulate_master(
    gen: &MarkovGenerator,
    p0: &Vector,
    horizon: f64,
    dt: f64,
    mode: StepMode,
) -> Result<MasterTrajectory, StochasticError> {
    let n = gen.n();
    if p0.len() != n {
        return Err(StochasticError::Domain(format!("initial distribution has {} entries, generator {n}", p0.len())));
    }
    if p0.iter().any(|v| !(*v >= 0.0)) || (p0.sum() - 1.0).abs() > 1e-10 {
        return Err(StochasticError::Domain("initial state is not a probability distribution".into()));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(StochasticError::StepSize { time: 0.0, reason: format!("dt = {dt}, horizon = {horizon}") });
    }
    let steps = libm::ceil(horizon / dt - 1e-9).max(0.0) as usize;
    let h = if steps > 0 { horizon / steps as f64 } else { dt };
    let q = &gen.rates;
    let id = Mat::identity(n, n);
    let diag_max = (0..n).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
    let propagator = match mode {
        StepMode::Implicit => {
            let sub = if diag_max > 0.0 { libm::ceil(h * diag_max / 2.0).max(1.0) as usize } else { 1 };
            let hs = h / sub as f64;
            let lhs = &id - q * (0.5 * hs);
            let rhs = &id + q * (0.5 * hs);
            let one = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| StochasticError::StepSize { time: 0.0, reason: "singular implicit system".into() })?;
            let mut full = id.clone();
            for _ in 0..sub {
                full = &one * full;
            }
            full
        }
        StepMode::Explicit => &id + q * h,
    };
    let mut traj = MasterTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        free_energy: Vec::with_capacity(steps + 1),
        tsallis: Vec::with_capacity(steps + 1),
        production: Vec::with_capacity(steps + 1),
    };
    let mut p = p0.clone();
    let record = |t: f64, p: &Vector, traj: &mut MasterTrajectory| {
        traj.times.push(t);
        traj.free_energy.push(gen.free_energy(p));
        traj.tsallis.push(gen.tsallis(p));
        traj.production.push(gen.production_rate(p));
        traj.states.push(p.clone());
    };
    record(0.0, &p, &mut traj);
    for k in 1..=steps {
        let t = k as f64 * h;
        let next = &propagator * &p;
        if let Some((i, v)) = next.iter().enumerate().find(|(_, v)| **v < -1e-12) {
            return Err(StochasticError::StepSize {
                time: t,
                reason: format!("p[{i}] = {v:e} went negative; reduce dt below {:e} or use implicit stepping", 1.0 / diag_max),
            });
        }
        p = next;
        record(t, &p, &mut traj);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_steady_state() {
        let g = MarkovGenerator::from_rates(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        let ps = g.steady_state();
        assert!((ps[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((ps[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn reducible_generator_reports_classes() {
        // 0 → 1 only; state 1 absorbs
        let err = MarkovGenerator::from_rates(2, &[(1, 0, 1.0)]).unwrap_err();
        match err {
            StochasticError::Reducible { classes } => assert_eq!(classes, vec![vec![0], vec![1]]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn log_mean_is_continuous() {
        assert_eq!(log_mean(2.0, 2.0), 2.0);
        let a = 1.0 + 1e-6;
        let exact = (a - 1.0) / libm::log(a);
        assert!((log_mean(a, 1.0) - exact).abs() < 1e-12);
        assert!((log_mean(1.5, 0.75) - 0.75 / core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn explicit_step_too_large_is_rejected() {
        let g = MarkovGenerator::from_rates(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        let p0 = DVector::from_vec(vec![1.0, 0.0]);
        let err = simulate_master(&g, &p0, 1.0, 1.0, StepMode::Explicit).unwrap_err();
        assert!(matches!(err, StochasticError::StepSize { .. }));
    }
}
