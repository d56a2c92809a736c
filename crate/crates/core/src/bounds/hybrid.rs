//! Hybrid models: one source is a classical hidden variable `lambda`, the
//! other an arbitrary no-signaling box shared by Bob and the remaining end
//! party.
//!
//! For `AliceLocal`, `p(a,b,c|x,z) = sum_l w_l p(a|x,l) q(b,c|l,z)`. Bob
//! feeds `lambda` into his side of the box, so the box must be no-signaling
//! in both directions: Bob's marginal `q(b|l)` may not depend on `z`, and
//! Charlie's marginal `q(c|z)` may not depend on `lambda`. `CharlieLocal`
//! is the mirror image with `q(a,b|l,x)`.
//!
//! Per `lambda` the box is parameterized by Bob's marginal `r_l(b)`, the
//! shared remote marginal `m_s(o)`, and a coupling of the two for every
//! remote setting `s`.

use serde::{Deserialize, Serialize};

use super::ascent::{
    golden_max, improve_simplex_block, nonnegative_interval, orthonormal_rows, project_out,
};
use super::{
    best_of_restarts, run_sweeps, AscentOptions, BoundCertificate, Family, ModelRecord,
    RestartResult,
};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::table::CorrelationTable;
use crate::witness::Witness;

const MODEL_TOL: f64 = 1e-9;
const ACTIVE_TOL: f64 = 1e-13;

/// Which end party is attached only to the classical source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    AliceLocal,
    CharlieLocal,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::AliceLocal, Side::CharlieLocal];
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "alice_local" | "alice" => Ok(Side::AliceLocal),
            "charlie_local" | "charlie" => Ok(Side::CharlieLocal),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// `[remote setting][b][remote outcome]`.
pub type NsBox = [[[f64; 2]; 3]; 2];
/// `[local setting][local outcome]`.
pub type Response = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub side: Side,
    pub weights: Vec<f64>,
    pub local_responses: Vec<Response>,
    pub ns_boxes: Vec<NsBox>,
}

const BOX_LEN: usize = 12;

#[inline]
fn box_idx(s: usize, b: usize, o: usize) -> usize {
    (s * 3 + b) * 2 + o
}

fn flatten_box(q: &NsBox) -> [f64; BOX_LEN] {
    let mut out = [0.0; BOX_LEN];
    for s in 0..2 {
        for b in 0..3 {
            for o in 0..2 {
                out[box_idx(s, b, o)] = q[s][b][o];
            }
        }
    }
    out
}

fn unflatten_box(v: &[f64]) -> NsBox {
    let mut q = [[[0.0; 2]; 3]; 2];
    for s in 0..2 {
        for b in 0..3 {
            for o in 0..2 {
                q[s][b][o] = v[box_idx(s, b, o)];
            }
        }
    }
    q
}

/// Flat parameter vectors used during ascent.
#[derive(Debug, Clone)]
struct Params {
    side: Side,
    k: usize,
    weights: Vec<f64>,
    /// `[l][setting][outcome]`, length `4k`.
    responses: Vec<f64>,
    /// `[l][s][b][o]`, length `12k`.
    boxes: Vec<f64>,
}

impl Params {
    fn table(&self) -> CorrelationTable {
        table_from_parts(self.side, &self.weights, &self.responses, &self.boxes)
    }

    fn into_model(self) -> HybridModel {
        HybridModel {
            side: self.side,
            weights: self.weights,
            local_responses: self
                .responses
                .chunks(4)
                .map(|r| [[r[0], r[1]], [r[2], r[3]]])
                .collect(),
            ns_boxes: self.boxes.chunks(BOX_LEN).map(unflatten_box).collect(),
        }
    }

    fn from_model(m: &HybridModel) -> Self {
        Self {
            side: m.side,
            k: m.weights.len(),
            weights: m.weights.clone(),
            responses: m
                .local_responses
                .iter()
                .flat_map(|r| [r[0][0], r[0][1], r[1][0], r[1][1]])
                .collect(),
            boxes: m.ns_boxes.iter().flat_map(flatten_box).collect(),
        }
    }
}

fn table_from_parts(
    side: Side,
    weights: &[f64],
    responses: &[f64],
    boxes: &[f64],
) -> CorrelationTable {
    let mut t = CorrelationTable::zeros();
    for (l, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let resp = &responses[4 * l..4 * l + 4];
        let q = &boxes[BOX_LEN * l..BOX_LEN * (l + 1)];
        for ls in 0..2 {
            for lo in 0..2 {
                let wr = w * resp[ls * 2 + lo];
                if wr == 0.0 {
                    continue;
                }
                for rs in 0..2 {
                    for b in 0..3 {
                        for ro in 0..2 {
                            let v = wr * q[box_idx(rs, b, ro)];
                            let (x, z, a, c) = match side {
                                Side::AliceLocal => (ls, rs, lo, ro),
                                Side::CharlieLocal => (rs, ls, ro, lo),
                            };
                            t.block_mut(x, z)[a][b][c] += v;
                        }
                    }
                }
            }
        }
    }
    t
}

pub fn hybrid_to_table(m: &HybridModel) -> CorrelationTable {
    let p = Params::from_model(m);
    p.table()
}

impl HybridModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Remote party's marginal `m_s(o)` as seen through box `l`.
    pub fn remote_marginal(&self, l: usize) -> [[f64; 2]; 2] {
        let q = &self.ns_boxes[l];
        let mut m = [[0.0; 2]; 2];
        for s in 0..2 {
            for o in 0..2 {
                m[s][o] = (0..3).map(|b| q[s][b][o]).sum();
            }
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let bad = |reason: String| Err(Error::invalid("hybrid model", reason));
        if k == 0 || self.local_responses.len() != k || self.ns_boxes.len() != k {
            return bad(format!(
                "inconsistent sizes: {} weights, {} responses, {} boxes",
                k,
                self.local_responses.len(),
                self.ns_boxes.len()
            ));
        }
        check_distribution("weights", &self.weights)?;
        for r in &self.local_responses {
            check_distribution("response row", &r[0])?;
            check_distribution("response row", &r[1])?;
        }
        let m0 = self.remote_marginal(0);
        for (l, q) in self.ns_boxes.iter().enumerate() {
            for s in 0..2 {
                let flat: Vec<f64> = q[s].iter().flatten().copied().collect();
                check_distribution("box", &flat)?;
            }
            for b in 0..3 {
                let r0 = q[0][b][0] + q[0][b][1];
                let r1 = q[1][b][0] + q[1][b][1];
                if (r0 - r1).abs() > MODEL_TOL {
                    return bad(format!(
                        "box {l}: Bob's marginal depends on the remote setting"
                    ));
                }
            }
            let m = self.remote_marginal(l);
            for s in 0..2 {
                for o in 0..2 {
                    if (m[s][o] - m0[s][o]).abs() > MODEL_TOL {
                        return bad(format!("box {l}: remote marginal depends on lambda"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Random valid model. With `extremal`, responses, Bob marginals and
    /// couplings are often pushed to vertices.
    pub fn random(side: Side, k: usize, rng: &mut SplitMix64, extremal: bool) -> Self {
        let weights = rng.dirichlet(k);
        let mut responses = Vec::with_capacity(4 * k);
        for _ in 0..2 * k {
            let row = if extremal && rng.next_f64() < 0.5 {
                let o = rng.below(2);
                [1.0 - o as f64, o as f64]
            } else {
                let d = rng.dirichlet(2);
                [d[0], d[1]]
            };
            responses.extend_from_slice(&row);
        }
        let marg = random_remote_marginal(rng, extremal);
        let mut boxes = Vec::with_capacity(BOX_LEN * k);
        for _ in 0..k {
            boxes.extend_from_slice(&random_box(rng, &marg, extremal));
        }
        Params {
            side,
            k,
            weights,
            responses,
            boxes,
        }
        .into_model()
    }
}

fn check_distribution(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| x.is_nan() || x < -MODEL_TOL) {
        return Err(Error::invalid(
            "hybrid model",
            format!("{what} has a negative entry"),
        ));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > MODEL_TOL {
        return Err(Error::invalid(
            "hybrid model",
            format!("{what} sums to {s}"),
        ));
    }
    Ok(())
}

/// `P(o = 0 | s)` for both remote settings.
fn random_remote_marginal(rng: &mut SplitMix64, extremal: bool) -> [f64; 2] {
    let mut m = [0.0; 2];
    for v in &mut m {
        *v = if extremal {
            match rng.below(3) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.next_f64(),
            }
        } else {
            rng.next_f64()
        };
    }
    m
}

/// A box with Bob marginal `r` coupled to the remote marginal `m0`.
fn random_box(rng: &mut SplitMix64, m0: &[f64; 2], extremal: bool) -> [f64; BOX_LEN] {
    let r: [f64; 3] = if extremal && rng.next_f64() < 0.5 {
        let mut r = [0.0; 3];
        r[rng.below(3)] = 1.0;
        r
    } else {
        let d = rng.dirichlet(3);
        [d[0], d[1], d[2]]
    };
    let mut out = [0.0; BOX_LEN];
    for s in 0..2 {
        let alpha = if extremal && rng.next_f64() < 0.5 {
            1.0
        } else {
            rng.next_f64()
        };
        let corner = corner_coupling(rng, &r, m0[s]);
        for b in 0..3 {
            let prod0 = r[b] * m0[s];
            let prod1 = r[b] * (1.0 - m0[s]);
            out[box_idx(s, b, 0)] = alpha * corner[b][0] + (1.0 - alpha) * prod0;
            out[box_idx(s, b, 1)] = alpha * corner[b][1] + (1.0 - alpha) * prod1;
        }
    }
    out
}

/// Vertex of the transportation polytope with row sums `r` and column
/// sums `(m0, 1 - m0)`, filled greedily in a random row order.
fn corner_coupling(rng: &mut SplitMix64, r: &[f64; 3], m0: f64) -> [[f64; 2]; 3] {
    let mut order = [0usize, 1, 2];
    for i in (1..3).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    let mut left = m0;
    let mut out = [[0.0; 2]; 3];
    for &b in &order {
        let take = r[b].min(left).max(0.0);
        out[b] = [take, (r[b] - take).max(0.0)];
        left -= take;
    }
    out
}

/// Current remote marginal `P(o = 0 | s)` read from box `l`.
fn remote_zero_marginal(boxes: &[f64], l: usize) -> [f64; 2] {
    let q = &boxes[BOX_LEN * l..BOX_LEN * (l + 1)];
    [0, 1].map(|s| (0..3).map(|b| q[box_idx(s, b, 0)]).sum())
}

/// Linear constraints fixing one box's Bob marginal across settings and
/// its remote marginal, plus coordinates pinned at zero.
fn local_box_constraints(q: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for s in 0..2 {
        for o in 0..2 {
            let mut r = vec![0.0; BOX_LEN];
            for b in 0..3 {
                r[box_idx(s, b, o)] = 1.0;
            }
            rows.push(r);
        }
    }
    for b in 0..3 {
        let mut r = vec![0.0; BOX_LEN];
        for o in 0..2 {
            r[box_idx(0, b, o)] = 1.0;
            r[box_idx(1, b, o)] = -1.0;
        }
        rows.push(r);
    }
    for (i, &v) in q.iter().enumerate() {
        if v <= ACTIVE_TOL {
            let mut r = vec![0.0; BOX_LEN];
            r[i] = 1.0;
            rows.push(r);
        }
    }
    rows
}

/// Line search on `boxes` along `d`, keeping every entry nonnegative.
fn line_search_boxes(p: &mut Params, d: &[f64], offset: usize, best: f64, witness: Witness) -> f64 {
    let len = d.len();
    let base = p.boxes[offset..offset + len].to_vec();
    let (lo, hi) = nonnegative_interval(&base, d);
    let mut scratch = p.boxes.clone();
    let apply = |s: f64, target: &mut [f64]| {
        for i in 0..len {
            target[offset + i] = (base[i] + s * d[i]).max(0.0);
        }
    };
    let (s, v) = golden_max(lo, hi, |s| {
        apply(s, &mut scratch);
        witness.evaluate(&table_from_parts(
            p.side,
            &p.weights,
            &p.responses,
            &scratch,
        ))
    });
    if s != 0.0 && v > best {
        apply(s, &mut p.boxes);
        v
    } else {
        best
    }
}

fn sweep(p: &mut Params, witness: Witness, rng: &mut SplitMix64, mut best: f64) -> f64 {
    let k = p.k;

    {
        let (side, responses, boxes) = (p.side, p.responses.clone(), p.boxes.clone());
        best = improve_simplex_block(&mut p.weights, best, rng, |w| {
            witness.evaluate(&table_from_parts(side, w, &responses, &boxes))
        });
    }

    for row in 0..2 * k {
        let (side, weights, boxes) = (p.side, p.weights.clone(), p.boxes.clone());
        let mut block = [p.responses[2 * row], p.responses[2 * row + 1]];
        let mut scratch = p.responses.clone();
        best = improve_simplex_block(&mut block, best, rng, |r| {
            scratch[2 * row] = r[0];
            scratch[2 * row + 1] = r[1];
            witness.evaluate(&table_from_parts(side, &weights, &scratch, &boxes))
        });
        p.responses[2 * row] = block[0];
        p.responses[2 * row + 1] = block[1];
    }

    for l in 0..k {
        let offset = BOX_LEN * l;

        // move within the current face, remote marginal fixed
        let q = p.boxes[offset..offset + BOX_LEN].to_vec();
        let basis = orthonormal_rows(&local_box_constraints(&q));
        let mut d = super::ascent::gaussian_vec(rng, BOX_LEN);
        project_out(&mut d, &basis);
        if d.iter().map(|x| x * x).sum::<f64>() > 1e-20 {
            best = line_search_boxes(p, &d, offset, best, witness);
        }

        // move towards a random box with the same remote marginal
        let m0 = remote_zero_marginal(&p.boxes, l);
        let target = random_box(rng, &m0, true);
        let d: Vec<f64> = target
            .iter()
            .zip(&p.boxes[offset..offset + BOX_LEN])
            .map(|(t, c)| t - c)
            .collect();
        best = line_search_boxes(p, &d, offset, best, witness);
    }

    // joint move of every box towards a new remote marginal
    let m = random_remote_marginal(rng, true);
    let mut d = Vec::with_capacity(BOX_LEN * k);
    for l in 0..k {
        let target = random_box(rng, &m, true);
        let cur = &p.boxes[BOX_LEN * l..BOX_LEN * (l + 1)];
        d.extend(target.iter().zip(cur).map(|(t, c)| t - c));
    }
    best = line_search_boxes(p, &d, 0, best, witness);

    clean_boxes(&mut p.boxes);
    best
}

/// Clears rounding residue: negative entries go to zero and every
/// per-setting block is rescaled to total 1.
fn clean_boxes(boxes: &mut [f64]) {
    for block in boxes.chunks_mut(6) {
        block.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = block.iter().sum();
        block.iter_mut().for_each(|x| *x /= total);
    }
}

/// Single restart of projected coordinate ascent from `start`.
pub(crate) fn ascend(
    start: &HybridModel,
    witness: Witness,
    rng: &mut SplitMix64,
    opts: &AscentOptions,
) -> RestartResult {
    let mut p = Params::from_model(start);
    let initial = witness.evaluate(&p.table());
    let trace = run_sweeps(initial, opts, |best| sweep(&mut p, witness, rng, best));
    let model = p.into_model();
    let value = witness.evaluate(&hybrid_to_table(&model));
    RestartResult {
        value,
        model: ModelRecord::Hybrid(model),
        trace,
    }
}

/// Heuristic maximum of `witness` over hybrid models with `k` hidden
/// values, best of `restarts` seeded restarts.
pub fn optimize_hybrid(
    witness: Witness,
    side: Side,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &AscentOptions,
) -> BoundCertificate {
    best_of_restarts(Family::hybrid(side), witness, restarts, seed, |mut rng| {
        let start = HybridModel::random(side, k, &mut rng, false);
        ascend(&start, witness, &mut rng, opts)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{strategy_to_table, DeterministicStrategy};
    use crate::table::{outcomes, settings, CELLS};

    fn single(side: Side, resp: Response, q: NsBox) -> HybridModel {
        HybridModel {
            side,
            weights: vec![1.0],
            local_responses: vec![resp],
            ns_boxes: vec![q],
        }
    }

    #[test]
    fn deterministic_box_matches_strategy() {
        let s = DeterministicStrategy {
            alice: [1, 0],
            bob: 2,
            charlie: [0, 1],
        };
        let resp = [[0.0, 1.0], [1.0, 0.0]];
        let mut q = [[[0.0; 2]; 3]; 2];
        q[0][2][0] = 1.0;
        q[1][2][1] = 1.0;
        let m = single(Side::AliceLocal, resp, q);
        m.validate().unwrap();
        assert_eq!(hybrid_to_table(&m), strategy_to_table(&s));

        // mirror: Charlie local with responses c(z), box over (b, a|x)
        let resp = [[1.0, 0.0], [0.0, 1.0]];
        let mut q = [[[0.0; 2]; 3]; 2];
        q[0][2][1] = 1.0;
        q[1][2][0] = 1.0;
        let m = single(Side::CharlieLocal, resp, q);
        m.validate().unwrap();
        assert_eq!(hybrid_to_table(&m), strategy_to_table(&s));
    }

    #[test]
    fn uniform_model_gives_uniform_table() {
        let m = single(
            Side::AliceLocal,
            [[0.5, 0.5], [0.5, 0.5]],
            [[[1.0 / 6.0; 2]; 3]; 2],
        );
        let t = hybrid_to_table(&m);
        for (x, z) in settings() {
            for (a, b, c) in outcomes() {
                assert!((t.get(x, z, a, b, c) - 1.0 / CELLS as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_models_are_valid_and_no_signaling() {
        let mut rng = SplitMix64::new(11);
        for side in Side::ALL {
            for extremal in [false, true] {
                for _ in 0..200 {
                    let m = HybridModel::random(side, 8, &mut rng, extremal);
                    m.validate().unwrap();
                    let t = hybrid_to_table(&m);
                    t.validate().unwrap();
                    assert!(t.signaling_to_ab() < 1e-10 && t.signaling_to_bc() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lambda_dependent_remote_marginal_rejected() {
        let mut rng = SplitMix64::new(2);
        let mut m = HybridModel::random(Side::AliceLocal, 2, &mut rng, false);
        let q = &mut m.ns_boxes[1];
        // shift mass between c outcomes for b = 0 in both settings
        for s in 0..2 {
            let moved = q[s][0][0];
            q[s][0][0] = 0.0;
            q[s][0][1] += moved;
        }
        assert!(m.validate().is_err());
    }

    #[test]
    fn bob_signaling_rejected() {
        let mut m = single(
            Side::AliceLocal,
            [[1.0, 0.0], [1.0, 0.0]],
            [[[1.0 / 6.0; 2]; 3]; 2],
        );
        m.ns_boxes[0][0][0][0] += 0.1;
        m.ns_boxes[0][0][1][0] -= 0.1;
        m.ns_boxes[0][1][0][1] -= 0.1;
        m.ns_boxes[0][1][1][1] += 0.1;
        // remote marginal unchanged, Bob's marginal now depends on s
        assert!(m.validate().is_err());
    }

    #[test]
    fn ascent_is_monotone_and_stays_valid() {
        let mut rng = SplitMix64::new(99);
        let start = HybridModel::random(Side::CharlieLocal, 4, &mut rng, false);
        let opts = AscentOptions {
            max_sweeps: 30,
            ..AscentOptions::default()
        };
        let res = ascend(&start, Witness::Cns, &mut rng, &opts);
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
        let ModelRecord::Hybrid(m) = &res.model else {
            panic!("wrong record");
        };
        m.validate().unwrap();
        assert!((res.value - res.trace.last().unwrap()).abs() < 1e-12);
        assert!(res.value <= 3.0 + 1e-9);
    }

    #[test]
    fn single_restart_is_reproducible() {
        let opts = AscentOptions {
            max_sweeps: 20,
            ..AscentOptions::default()
        };
        let a = optimize_hybrid(Witness::Cns, Side::CharlieLocal, 8, 1, 7, &opts);
        let b = optimize_hybrid(Witness::Cns, Side::CharlieLocal, 8, 1, 7, &opts);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
