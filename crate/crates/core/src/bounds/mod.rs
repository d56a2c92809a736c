//! Numerical certification of the classical bound 3.
//!
//! Three model families are covered: deterministic single-variable
//! strategies (exhaustive), hybrid models where one source is local and the
//! other an arbitrary no-signaling resource (heuristic ascent), and bilocal
//! models with two independent local sources (heuristic ascent). The
//! heuristic searches certify by falsification: a value above 3 would be a
//! counterexample, and reaching 3 shows the bound is tight.

pub mod ascent;
mod bilocal;
mod hybrid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numfmt::ser_f64;
use crate::rng::{derive_seed, SplitMix64};
use crate::table::{CorrelationTable, B_OUTCOMES};
use crate::witness::Witness;

pub use bilocal::{bilocal_to_table, optimize_bilocal, BilocalModel};
pub use hybrid::{hybrid_to_table, optimize_hybrid, HybridModel, Side};

/// Default hidden-variable cardinality for hybrid models.
pub const DEFAULT_K: usize = 8;

/// Restarts within this distance of the best value count as converged.
pub const CONVERGED_WITHIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Deterministic,
    HybridAliceLocal,
    HybridCharlieLocal,
    Bilocal,
}

impl Family {
    pub fn hybrid(side: Side) -> Self {
        match side {
            Side::AliceLocal => Family::HybridAliceLocal,
            Side::CharlieLocal => Family::HybridCharlieLocal,
        }
    }
}

/// Outputs as functions of the inputs: `a = alice[x]`, `b`, `c = charlie[z]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub alice: [usize; 2],
    pub bob: usize,
    pub charlie: [usize; 2],
}

impl DeterministicStrategy {
    pub const ALL_ZEROS: DeterministicStrategy = DeterministicStrategy {
        alice: [0, 0],
        bob: 0,
        charlie: [0, 0],
    };

    /// All strategies with Bob restricted to the first `bob_outcomes`
    /// outcomes, in lexicographic order of `(alice, bob, charlie)`.
    pub fn enumerate(bob_outcomes: usize) -> Vec<Self> {
        let bits = [[0, 0], [0, 1], [1, 0], [1, 1]];
        let mut out = Vec::with_capacity(16 * bob_outcomes);
        for alice in bits {
            for bob in 0..bob_outcomes.min(B_OUTCOMES) {
                for charlie in bits {
                    out.push(Self {
                        alice,
                        bob,
                        charlie,
                    });
                }
            }
        }
        out
    }

    pub fn all() -> Vec<Self> {
        Self::enumerate(B_OUTCOMES)
    }
}

pub fn strategy_to_table(s: &DeterministicStrategy) -> CorrelationTable {
    CorrelationTable::from_fn(|x, z, a, b, c| {
        if a == s.alice[x] && b == s.bob && c == s.charlie[z] {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelRecord {
    Deterministic(DeterministicStrategy),
    Hybrid(HybridModel),
    Bilocal(BilocalModel),
}

impl ModelRecord {
    pub fn to_table(&self) -> CorrelationTable {
        match self {
            ModelRecord::Deterministic(s) => strategy_to_table(s),
            ModelRecord::Hybrid(m) => hybrid_to_table(m),
            ModelRecord::Bilocal(m) => bilocal_to_table(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub family: Family,
    pub witness: Witness,
    #[serde(serialize_with = "ser_f64")]
    pub best_value: f64,
    pub best_model: ModelRecord,
    pub restarts: usize,
    pub converged_fraction: f64,
    /// False only for exhaustive enumeration.
    pub heuristic: bool,
    /// Strategies within `1e-9` of the maximum (enumeration only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attaining: Option<usize>,
}

impl BoundCertificate {
    /// Re-evaluates the stored model from scratch.
    pub fn recompute(&self) -> f64 {
        self.witness.evaluate(&self.best_model.to_table())
    }
}

pub fn enumerate_deterministic(witness: Witness) -> BoundCertificate {
    enumerate_with_bob_outcomes(witness, B_OUTCOMES)
}

/// Exhaustive maximum over strategies with Bob restricted to his first
/// `bob_outcomes` outcomes. Ties go to the lexicographically smallest.
pub fn enumerate_with_bob_outcomes(witness: Witness, bob_outcomes: usize) -> BoundCertificate {
    let strategies = DeterministicStrategy::enumerate(bob_outcomes);
    let values: Vec<f64> = strategies
        .iter()
        .map(|s| witness.evaluate(&strategy_to_table(s)))
        .collect();
    let best_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_idx = values
        .iter()
        .position(|&v| v == best_value)
        .expect("nonempty");
    let attaining = values.iter().filter(|&&v| v >= best_value - 1e-9).count();
    BoundCertificate {
        family: Family::Deterministic,
        witness,
        best_value,
        best_model: ModelRecord::Deterministic(strategies[best_idx]),
        restarts: strategies.len(),
        converged_fraction: attaining as f64 / strategies.len() as f64,
        heuristic: false,
        attaining: Some(attaining),
    }
}

/// Tuning for the heuristic searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    pub max_sweeps: usize,
    /// A sweep counts as stalled when it gains less than this.
    pub stall_tol: f64,
    /// Consecutive stalled sweeps before a restart stops.
    pub patience: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 400,
            stall_tol: 1e-10,
            patience: 6,
        }
    }
}

/// Outcome of a single restart.
#[derive(Debug, Clone)]
pub struct RestartResult {
    pub value: f64,
    pub model: ModelRecord,
    /// Best value after each sweep; index 0 is the initial point.
    pub trace: Vec<f64>,
}

/// Drives sweeps until the stall criterion or `max_sweeps`.
pub(crate) fn run_sweeps(
    initial: f64,
    opts: &AscentOptions,
    mut sweep: impl FnMut(f64) -> f64,
) -> Vec<f64> {
    let mut trace = vec![initial];
    let mut best = initial;
    let mut stalled = 0;
    for _ in 0..opts.max_sweeps {
        let next = sweep(best);
        let gain = next - best;
        best = best.max(next);
        trace.push(best);
        if gain < opts.stall_tol {
            stalled += 1;
            if stalled >= opts.patience {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    trace
}

/// Runs `restarts` independent searches (seeded from `(seed, index)`) and
/// merges them by maximum; the earliest restart wins ties.
pub(crate) fn best_of_restarts(
    family: Family,
    witness: Witness,
    restarts: usize,
    seed: u64,
    run: impl Fn(SplitMix64) -> RestartResult + Sync,
) -> BoundCertificate {
    assert!(restarts >= 1, "at least one restart is required");
    let results: Vec<RestartResult> = (0..restarts)
        .into_par_iter()
        .map(|i| run(SplitMix64::new(derive_seed(seed, i as u64))))
        .collect();
    let mut best_idx = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value > results[best_idx].value {
            best_idx = i;
        }
    }
    let best_value = results[best_idx].value;
    let converged = results
        .iter()
        .filter(|r| r.value >= best_value - CONVERGED_WITHIN)
        .count();
    BoundCertificate {
        family,
        witness,
        best_value,
        best_model: results[best_idx].model.clone(),
        restarts,
        converged_fraction: converged as f64 / restarts as f64,
        heuristic: true,
        attaining: None,
    }
}
