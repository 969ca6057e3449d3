//! Experiment catalog.

use serde::Serialize;

use crate::config::ExperimentId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentInfo {
    pub id: ExperimentId,
    pub description: &'static str,
    /// Keys that have no default.
    pub required_keys: &'static [&'static str],
    pub outputs: &'static [&'static str],
    /// What the top-level `tolerance` (or `--tol`) overrides.
    pub tolerance: &'static str,
}

pub const CATALOG: [ExperimentInfo; 10] = [
    ExperimentInfo {
        id: ExperimentId::Check,
        description: "Structural conditions (a)-(c) for a catalogued system or a deliberately broken variant",
        required_keys: &["experiment", "output", "model.system"],
        outputs: &["report.json"],
        tolerance: "residual tolerance of the structural checks (solver.tol)",
    },
    ExperimentInfo {
        id: ExperimentId::Simulate,
        description: "Split finite-volume run with entropy and mass diagnostics, or the manufactured-solution order study",
        required_keys: &["experiment", "output", "model.system (trajectory mode)"],
        outputs: &["diagnostics.csv", "final.csv", "snapshots.csv", "order.csv", "summary.json"],
        tolerance: "per-step conserved-mass drift",
    },
    ExperimentInfo {
        id: ExperimentId::FourierLimit,
        description: "Cattaneo to heat-equation relaxation error against the Fourier-series solution, and front speed",
        required_keys: &["experiment", "output"],
        outputs: &["errors.csv", "summary.json"],
        tolerance: "relative front-speed error",
    },
    ExperimentInfo {
        id: ExperimentId::Pea,
        description: "Partial-equilibrium reduction error of Michaelis-Menten kinetics over a range of stiffness",
        required_keys: &["experiment", "output"],
        outputs: &["errors.csv", "reduced.csv", "summary.json"],
        tolerance: "not used",
    },
    ExperimentInfo {
        id: ExperimentId::Dispersion,
        description: "Dispersion relation of a linear first-order system with time-domain growth-rate comparison",
        required_keys: &["experiment", "output"],
        outputs: &["spectrum.csv", "growth.csv", "summary.json"],
        tolerance: "relative mismatch between measured and predicted growth rate",
    },
    ExperimentInfo {
        id: ExperimentId::BoundaryControl,
        description: "Assumption check and decay-rate fit for a boundary-controlled linear relaxation system",
        required_keys: &["experiment", "output"],
        outputs: &["assumptions.json", "norm.csv", "summary.json"],
        tolerance: "RMS residual of the log-linear decay fit",
    },
    ExperimentInfo {
        id: ExperimentId::Master,
        description: "Master-equation trajectory with free energy, and the random-generator flux-force theorem suite",
        required_keys: &["experiment", "output", "model.rates or model.random"],
        outputs: &["trajectory.csv", "onsager.json", "suite.csv", "summary.json"],
        tolerance: "per-step free-energy slack",
    },
    ExperimentInfo {
        id: ExperimentId::MassAction,
        description: "Mass-action kinetics with conservation laws and free energy, plus random reversible networks",
        required_keys: &["experiment", "output", "model.species and model.reactions, or model.random"],
        outputs: &["trajectory.csv", "suite.csv", "summary.json"],
        tolerance: "per-step free-energy slack",
    },
    ExperimentInfo {
        id: ExperimentId::FokkerPlanck,
        description: "Finite-volume Fokker-Planck generator with relative-entropy and Tsallis dissipation",
        required_keys: &["experiment", "output"],
        outputs: &["trajectory.csv", "final.csv", "suite.csv", "summary.json"],
        tolerance: "per-step free-energy slack",
    },
    ExperimentInfo {
        id: ExperimentId::Axonal,
        description: "Axonal transport steady state and relaxation of a perturbation towards it",
        required_keys: &["experiment", "output"],
        outputs: &["steady.csv", "distance.csv", "summary.json"],
        tolerance: "steady-state ODE residual",
    },
];

pub fn catalog() -> &'static [ExperimentInfo] {
    &CATALOG
}

pub fn info(id: ExperimentId) -> &'static ExperimentInfo {
    CATALOG.iter().find(|e| e.id == id).expect("every experiment id is catalogued")
}

pub fn render_text() -> String {
    let mut out = String::new();
    for e in &CATALOG {
        out.push_str(&format!("{:<17} {}\n", e.id.as_str(), e.description));
        out.push_str(&format!("{:<17} required: {}\n", "", e.required_keys.join(", ")));
    }
    out
}

pub fn render_json() -> String {
    serde_json::to_string_pretty(&CATALOG[..]).expect("catalog serializes")
}
