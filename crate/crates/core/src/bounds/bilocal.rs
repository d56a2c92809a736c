//! Bilocal models: two independent classical sources,
//! `p(a,b,c|x,z) = sum w1_l1 w2_l2 p(a|x,l1) p(b|l1,l2) p(c|z,l2)`.

use serde::{Deserialize, Serialize};

use super::ascent::improve_simplex_block;
use super::{
    best_of_restarts, run_sweeps, AscentOptions, BoundCertificate, Family, ModelRecord,
    RestartResult,
};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::table::CorrelationTable;
use crate::witness::Witness;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilocalModel {
    pub weights1: Vec<f64>,
    pub weights2: Vec<f64>,
    /// `[l1][x][a]`.
    pub alice: Vec<[[f64; 2]; 2]>,
    /// `[l1][l2][b]`.
    pub bob: Vec<Vec<[f64; 3]>>,
    /// `[l2][z][c]`.
    pub charlie: Vec<[[f64; 2]; 2]>,
}

pub fn bilocal_to_table(m: &BilocalModel) -> CorrelationTable {
    let mut t = CorrelationTable::zeros();
    for (l1, &w1) in m.weights1.iter().enumerate() {
        for (l2, &w2) in m.weights2.iter().enumerate() {
            let w = w1 * w2;
            if w == 0.0 {
                continue;
            }
            let pb = &m.bob[l1][l2];
            for x in 0..2 {
                for z in 0..2 {
                    let blk = t.block_mut(x, z);
                    for a in 0..2 {
                        let wa = w * m.alice[l1][x][a];
                        for (b, &vb) in pb.iter().enumerate() {
                            for c in 0..2 {
                                blk[a][b][c] += wa * vb * m.charlie[l2][z][c];
                            }
                        }
                    }
                }
            }
        }
    }
    t
}

fn check(what: &str, v: &[f64]) -> Result<()> {
    let s: f64 = v.iter().sum();
    if v.iter().any(|&x| x.is_nan() || x < -1e-12) || (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(
            "bilocal model",
            format!("{what} is not a distribution"),
        ));
    }
    Ok(())
}

impl BilocalModel {
    pub fn validate(&self) -> Result<()> {
        let (k1, k2) = (self.weights1.len(), self.weights2.len());
        if k1 == 0
            || k2 == 0
            || self.alice.len() != k1
            || self.charlie.len() != k2
            || self.bob.len() != k1
            || self.bob.iter().any(|row| row.len() != k2)
        {
            return Err(Error::invalid("bilocal model", "inconsistent sizes"));
        }
        check("weights1", &self.weights1)?;
        check("weights2", &self.weights2)?;
        for r in self.alice.iter().chain(&self.charlie) {
            check("response", &r[0])?;
            check("response", &r[1])?;
        }
        for row in &self.bob {
            for r in row {
                check("bob response", r)?;
            }
        }
        Ok(())
    }

    /// Every block drawn from a uniform Dirichlet.
    pub fn random(k1: usize, k2: usize, rng: &mut SplitMix64) -> Self {
        let two = |rng: &mut SplitMix64| {
            let d = rng.dirichlet(2);
            [d[0], d[1]]
        };
        let alice = (0..k1).map(|_| [two(rng), two(rng)]).collect();
        let charlie = (0..k2).map(|_| [two(rng), two(rng)]).collect();
        let bob = (0..k1)
            .map(|_| {
                (0..k2)
                    .map(|_| {
                        let d = rng.dirichlet(3);
                        [d[0], d[1], d[2]]
                    })
                    .collect()
            })
            .collect();
        Self {
            weights1: rng.dirichlet(k1),
            weights2: rng.dirichlet(k2),
            alice,
            bob,
            charlie,
        }
    }
}

fn sweep(m: &mut BilocalModel, witness: Witness, rng: &mut SplitMix64, mut best: f64) -> f64 {
    let (k1, k2) = (m.weights1.len(), m.weights2.len());

    let mut block = m.weights1.clone();
    let mut trial = m.clone();
    best = improve_simplex_block(&mut block, best, rng, |w| {
        trial.weights1.copy_from_slice(w);
        witness.evaluate(&bilocal_to_table(&trial))
    });
    m.weights1 = block;

    let mut block = m.weights2.clone();
    let mut trial = m.clone();
    best = improve_simplex_block(&mut block, best, rng, |w| {
        trial.weights2.copy_from_slice(w);
        witness.evaluate(&bilocal_to_table(&trial))
    });
    m.weights2 = block;

    for l1 in 0..k1 {
        for x in 0..2 {
            let mut block = m.alice[l1][x];
            let mut trial = m.clone();
            best = improve_simplex_block(&mut block, best, rng, |r| {
                trial.alice[l1][x] = [r[0], r[1]];
                witness.evaluate(&bilocal_to_table(&trial))
            });
            m.alice[l1][x] = block;
        }
    }
    for l2 in 0..k2 {
        for z in 0..2 {
            let mut block = m.charlie[l2][z];
            let mut trial = m.clone();
            best = improve_simplex_block(&mut block, best, rng, |r| {
                trial.charlie[l2][z] = [r[0], r[1]];
                witness.evaluate(&bilocal_to_table(&trial))
            });
            m.charlie[l2][z] = block;
        }
    }
    for l1 in 0..k1 {
        for l2 in 0..k2 {
            let mut block = m.bob[l1][l2];
            let mut trial = m.clone();
            best = improve_simplex_block(&mut block, best, rng, |r| {
                trial.bob[l1][l2] = [r[0], r[1], r[2]];
                witness.evaluate(&bilocal_to_table(&trial))
            });
            m.bob[l1][l2] = block;
        }
    }
    best
}

pub(crate) fn ascend(
    start: &BilocalModel,
    witness: Witness,
    rng: &mut SplitMix64,
    opts: &AscentOptions,
) -> RestartResult {
    let mut m = start.clone();
    let initial = witness.evaluate(&bilocal_to_table(&m));
    let trace = run_sweeps(initial, opts, |best| sweep(&mut m, witness, rng, best));
    let value = witness.evaluate(&bilocal_to_table(&m));
    RestartResult {
        value,
        model: ModelRecord::Bilocal(m),
        trace,
    }
}

/// Heuristic maximum of `witness` over bilocal models with `k1` x `k2`
/// hidden values.
pub fn optimize_bilocal(
    witness: Witness,
    k1: usize,
    k2: usize,
    restarts: usize,
    seed: u64,
    opts: &AscentOptions,
) -> BoundCertificate {
    assert!(
        k1 >= 1 && k2 >= 1,
        "hidden-variable cardinalities must be positive"
    );
    best_of_restarts(Family::Bilocal, witness, restarts, seed, |mut rng| {
        let start = BilocalModel::random(k1, k2, &mut rng);
        ascend(&start, witness, &mut rng, opts)
    })
}
