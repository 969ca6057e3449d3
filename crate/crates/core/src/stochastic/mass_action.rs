//! Mass-action reaction networks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use crate::error::StochasticError;
use crate::linalg::{self, Mat, Vector};
use crate::stochastic::ode::{dopri5, OdeOptions};

/// `Σ_k ν⁺_k X_k ⇌ Σ_k ν⁻_k X_k` with forward rate `κ⁺` and backward `κ⁻`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Reaction {
    pub nu_plus: Vec<u32>,
    pub nu_minus: Vec<u32>,
    pub k_plus: f64,
    /// Zero makes the reaction irreversible.
    pub k_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<String>,
    pub reactions: Vec<Reaction>,
    equilibrium: Option<Vector>,
}

const BALANCE_TOL: f64 = 1e-10;

fn monomial(c: &[f64], nu: &[u32]) -> f64 {
    c.iter().zip(nu).map(|(&ci, &k)| if k == 0 { 1.0 } else { libm::pow(ci, k as f64) }).product()
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, StochasticError> {
        let n = species.len();
        if n == 0 {
            return Err(StochasticError::Domain("network has no species".into()));
        }
        for (i, r) in reactions.iter().enumerate() {
            if r.nu_plus.len() != n || r.nu_minus.len() != n {
                return Err(StochasticError::Domain(format!("reaction {i}: stoichiometry length differs from {n} species")));
            }
            if !(r.k_plus >= 0.0 && r.k_minus >= 0.0) || !r.k_plus.is_finite() || !r.k_minus.is_finite() {
                return Err(StochasticError::Domain(format!("reaction {i}: rate constants must be finite and nonnegative")));
            }
        }
        Ok(Self { species, reactions, equilibrium: None })
    }

    /// Attaches a detailed-balance equilibrium, checked reaction by reaction.
    pub fn with_equilibrium(mut self, ce: Vec<f64>) -> Result<Self, StochasticError> {
        if ce.len() != self.species.len() || ce.iter().any(|v| !(*v > 0.0)) {
            return Err(StochasticError::Domain("equilibrium must be positive with one entry per species".into()));
        }
        for (i, r) in self.reactions.iter().enumerate() {
            let fwd = r.k_plus * monomial(&ce, &r.nu_plus);
            let bwd = r.k_minus * monomial(&ce, &r.nu_minus);
            if (fwd - bwd).abs() > BALANCE_TOL * fwd.max(bwd).max(1.0) {
                return Err(StochasticError::Domain(format!(
                    "reaction {i} is not balanced at the equilibrium: {fwd:e} vs {bwd:e}"
                )));
            }
        }
        self.equilibrium = Some(DVector::from_vec(ce));
        Ok(self)
    }

    /// `S + E ⇌ ES → P + E` on species `(S, E, ES, P)`.
    pub fn michaelis_menten(k1: f64, k_minus1: f64, k2: f64) -> Result<Self, StochasticError> {
        let s = |v: &str| String::from(v);
        ReactionNetwork::new(
            vec![s("S"), s("E"), s("ES"), s("P")],
            vec![
                Reaction { nu_plus: vec![1, 1, 0, 0], nu_minus: vec![0, 0, 1, 0], k_plus: k1, k_minus: k_minus1 },
                Reaction { nu_plus: vec![0, 0, 1, 0], nu_minus: vec![0, 1, 0, 1], k_plus: k2, k_minus: 0.0 },
            ],
        )
    }

    pub fn equilibrium(&self) -> Option<&Vector> {
        self.equilibrium.as_ref()
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// Net stoichiometric matrix `S_ki = ν⁻_ik − ν⁺_ik` (species × reactions).
    pub fn stoichiometry(&self) -> Mat {
        Mat::from_fn(self.n_species(), self.reactions.len(), |k, i| {
            self.reactions[i].nu_minus[k] as f64 - self.reactions[i].nu_plus[k] as f64
        })
    }

    /// Orthonormal columns spanning the left null space of the
    /// stoichiometric matrix: the linear invariants of the dynamics.
    pub fn conservation_laws(&self) -> Mat {
        if self.reactions.is_empty() {
            return Mat::identity(self.n_species(), self.n_species());
        }
        linalg::null_space(&self.stoichiometry().transpose(), 1e-10)
    }

    /// Copy with each reaction's rate constants multiplied by `factors[i]`.
    pub fn scaled(&self, factors: &[f64]) -> Self {
        let mut out = self.clone();
        for (r, f) in out.reactions.iter_mut().zip(factors) {
            r.k_plus *= f;
            r.k_minus *= f;
        }
        out.equilibrium = self.equilibrium.clone();
        out
    }

    /// Net reaction rates `κ⁺Πc^ν⁺ − κ⁻Πc^ν⁻`.
    pub fn reaction_rates(&self, c: &[f64]) -> Vec<f64> {
        self.reactions
            .iter()
            .map(|r| r.k_plus * monomial(c, &r.nu_plus) - r.k_minus * monomial(c, &r.nu_minus))
            .collect()
    }

    pub(crate) fn rhs_into(&self, c: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in &self.reactions {
            let net = r.k_minus * monomial(c, &r.nu_minus) - r.k_plus * monomial(c, &r.nu_plus);
            for k in 0..out.len() {
                let d = r.nu_plus[k] as f64 - r.nu_minus[k] as f64;
                if d != 0.0 {
                    out[k] += d * net;
                }
            }
        }
    }

    /// `Σ c_i ln(c_i/c_e,i) − c_i + c_e,i`, when an equilibrium is attached.
    /// Nonpositive concentrations contribute `c_e,i`.
    pub fn free_energy(&self, c: &[f64]) -> Option<f64> {
        let ce = self.equilibrium.as_ref()?;
        Some(
            c.iter()
                .zip(ce.iter())
                .map(|(&ci, &ei)| if ci > 0.0 { ci * libm::log(ci / ei) - ci + ei } else { ei })
                .sum(),
        )
    }

    /// Random reversible network on `n` species with `m` reactions, rate
    /// constants chosen so that a random positive state is a
    /// detailed-balance equilibrium.
    pub fn random_reversible<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Self {
        let species = (0..n).map(|k| format!("X{k}")).collect();
        let ce: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let mut reactions = Vec::with_capacity(m);
        while reactions.len() < m {
            let mut nu_plus = vec![0u32; n];
            let mut nu_minus = vec![0u32; n];
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            nu_plus[a] += 1;
            if rng.random::<f64>() < 0.4 {
                nu_plus[rng.random_range(0..n)] += 1;
            }
            nu_minus[b] += 1;
            if nu_plus == nu_minus {
                continue;
            }
            let k_plus = rng.random_range(0.2..3.0);
            let k_minus = k_plus * monomial(&ce, &nu_plus) / monomial(&ce, &nu_minus);
            reactions.push(Reaction { nu_plus, nu_minus, k_plus, k_minus });
        }
        ReactionNetwork::new(species, reactions)
            .and_then(|net| net.with_equilibrium(ce))
            .expect("balanced by construction")
    }
}

/// `dc_k/dt = Σ_i (ν⁺_ik − ν⁻_ik)(κ⁻_iΠc^ν⁻_i − κ⁺_iΠc^ν⁺_i)`.
pub fn mass_action_rhs(net: &ReactionNetwork, c: &[f64]) -> Result<Vector, StochasticError> {
    if c.len() != net.n_species() {
        return Err(StochasticError::Domain(format!("{} concentrations for {} species", c.len(), net.n_species())));
    }
    if let Some((k, v)) = c.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(StochasticError::Domain(format!("concentration of {} is {v}", net.species[k])));
    }
    let mut out = vec![0.0; c.len()];
    net.rhs_into(c, &mut out);
    Ok(DVector::from_vec(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassActionTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Absent without an attached equilibrium.
    pub free_energy: Option<Vec<f64>>,
    pub warning: Option<String>,
}

/// Integrates the mass-action system on `[0, horizon]`.
///
/// With `samples` only those times are recorded; otherwise every accepted
/// step is.
pub fn simulate_mass_action(
    net: &ReactionNetwork,
    c0: &[f64],
    horizon: f64,
    opts: &OdeOptions,
    samples: Option<&[f64]>,
) -> Result<MassActionTrajectory, StochasticError> {
    if c0.len() != net.n_species() {
        return Err(StochasticError::Domain(format!("{} initial concentrations for {} species", c0.len(), net.n_species())));
    }
    if c0.iter().any(|v| !(*v >= 0.0)) {
        return Err(StochasticError::Domain("initial concentrations must be nonnegative".into()));
    }
    let mut traj = MassActionTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        free_energy: net.equilibrium.as_ref().map(|_| Vec::new()),
        warning: if net.equilibrium.is_none() {
            Some("no detailed-balance equilibrium supplied; free-energy monitoring disabled".into())
        } else {
            None
        },
    };
    let mut f = |_t: f64, c: &[f64], out: &mut [f64]| {
        net.rhs_into(c, out);
        Ok(())
    };
    let mut record = |t: f64, c: &[f64]| {
        traj.times.push(t);
        traj.states.push(DVector::from_column_slice(c));
        if let (Some(series), Some(fe)) = (traj.free_energy.as_mut(), net.free_energy(c)) {
            series.push(fe);
        }
        Ok(())
    };
    dopri5(&mut f, c0, 0.0, horizon, opts, samples, &mut record)?;
    Ok(traj)
}
