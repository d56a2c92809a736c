//! Finite-count experiments: seeded event sampling under detector losses,
//! frequency estimation and multinomial-bootstrap error bars.
//!
//! Sampling is block-wise per setting. Setting `(x, z)` uses the SplitMix64
//! stream `derive_seed(seed, 2x + z)`; each attempted event consumes two
//! uniforms `u1, u2`. The event is detected iff `u1 < eta^4`, and a detected
//! event lands in the first cell (order `a, b, c`) whose cumulative
//! probability exceeds `u2`. Bootstrap resample `r` uses the stream
//! `derive_seed(derive_seed(seed, BOOTSTRAP_STREAM), r)`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::{ser_f64, ser_opt_f64};
use crate::rng::{derive_seed, SplitMix64};
use crate::table::{cell_index, outcomes, settings, CorrelationTable, CELLS, SETTINGS};
use crate::witness::{Witness, CLASSICAL_BOUND};

pub const DEFAULT_RESAMPLES: usize = 1000;
const BOOTSTRAP_STREAM: u64 = 0xB007;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials_per_setting: u64,
    pub seed: u64,
    pub detector_efficiency: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

impl McConfig {
    pub fn new(trials_per_setting: u64, seed: u64) -> Self {
        Self {
            trials_per_setting,
            seed,
            detector_efficiency: 1.0,
            bootstrap_resamples: DEFAULT_RESAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_setting == 0 {
            return Err(Error::invalid(
                "mc config",
                "trials_per_setting must be positive",
            ));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::invalid(
                "mc config",
                "bootstrap_resamples must be positive",
            ));
        }
        let eta = self.detector_efficiency;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::OutOfRange {
                name: "detector_efficiency",
                value: eta,
                range: "(0, 1]",
            });
        }
        Ok(())
    }

    /// Probability that all four detectors fire.
    pub fn survival(&self) -> f64 {
        self.detector_efficiency.powi(4)
    }
}

/// Detected counts `n[x][z][a][b][c]` and attempted events per setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub n: [[[u64; CELLS]; SETTINGS]; SETTINGS],
    pub attempted: [[u64; SETTINGS]; SETTINGS],
}

impl CountsTable {
    pub fn zeros() -> Self {
        Self {
            n: [[[0; CELLS]; SETTINGS]; SETTINGS],
            attempted: [[0; SETTINGS]; SETTINGS],
        }
    }

    pub fn get(&self, x: usize, z: usize, a: usize, b: usize, c: usize) -> u64 {
        self.n[x][z][cell_index(a, b, c)]
    }

    pub fn set(&mut self, x: usize, z: usize, a: usize, b: usize, c: usize, count: u64) {
        self.n[x][z][cell_index(a, b, c)] = count;
    }

    pub fn detected(&self, x: usize, z: usize) -> u64 {
        self.n[x][z].iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (x, z) in settings() {
            let d = self.detected(x, z);
            if d > self.attempted[x][z] {
                return Err(Error::invalid(
                    "counts table",
                    format!(
                        "setting ({x},{z}) detected {d} of {} attempted",
                        self.attempted[x][z]
                    ),
                ));
            }
        }
        Ok(())
    }

    /// `x,z,a,b,c,count` rows in index order, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,z,a,b,c,count\n");
        for (x, z) in settings() {
            for (a, b, c) in outcomes() {
                out.push_str(&format!(
                    "{x},{z},{a},{b},{c},{}\n",
                    self.get(x, z, a, b, c)
                ));
            }
        }
        out
    }

    /// Parses counts written by [`CountsTable::to_csv`]. The CSV carries no
    /// attempted counts, so they are passed in.
    pub fn from_csv(csv: &str, attempted: [[u64; SETTINGS]; SETTINGS]) -> Result<Self> {
        let bad = |reason: String| Error::invalid("counts csv", reason);
        let mut lines = csv.lines();
        if lines.next().map(str::trim) != Some("x,z,a,b,c,count") {
            return Err(bad("missing header x,z,a,b,c,count".into()));
        }
        let mut t = CountsTable::zeros();
        t.attempted = attempted;
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 6 {
                return Err(bad(format!("line {}: expected 6 fields", i + 2)));
            }
            let idx: Vec<usize> = fields[..5]
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            let count: u64 = fields[5]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            let (x, z, a, b, c) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
            if x >= 2 || z >= 2 || a >= 2 || b >= 3 || c >= 2 {
                return Err(bad(format!("line {}: index out of range", i + 2)));
            }
            t.set(x, z, a, b, c, count);
        }
        t.validate()?;
        Ok(t)
    }
}

/// Metadata written next to the counts CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsSidecar {
    pub attempted: [[u64; SETTINGS]; SETTINGS],
    pub config: McConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_f64")]
    pub std_error: f64,
    /// `(value - 3) / std_error`; absent when the error is zero.
    #[serde(serialize_with = "ser_opt_f64")]
    pub z_score_vs_3: Option<f64>,
}

impl WitnessEstimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        let z = (std_error > 0.0).then(|| (value - CLASSICAL_BOUND) / std_error);
        Self {
            value,
            std_error,
            z_score_vs_3: z,
        }
    }
}

fn cumulative(t: &CorrelationTable, x: usize, z: usize) -> [f64; CELLS] {
    let mut cum = [0.0; CELLS];
    let mut acc = 0.0;
    for (a, b, c) in outcomes() {
        acc += t.get(x, z, a, b, c).max(0.0);
        cum[cell_index(a, b, c)] = acc;
    }
    cum
}

fn sample_setting(t: &CorrelationTable, x: usize, z: usize, cfg: &McConfig) -> [u64; CELLS] {
    let cum = cumulative(t, x, z);
    let total = cum[CELLS - 1];
    let last_positive = (0..CELLS)
        .rev()
        .find(|&i| cum[i] > if i == 0 { 0.0 } else { cum[i - 1] })
        .unwrap_or(CELLS - 1);
    let survival = cfg.survival();
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, (x * SETTINGS + z) as u64));
    let mut n = [0u64; CELLS];
    for _ in 0..cfg.trials_per_setting {
        let u1 = rng.next_f64();
        let u2 = rng.next_f64() * total;
        if u1 >= survival {
            continue;
        }
        let cell = cum.iter().position(|&c| u2 < c).unwrap_or(last_positive);
        n[cell] += 1;
    }
    n
}

/// Samples detected counts from `t`. Output is a pure function of `(t, cfg)`.
pub fn sample_counts(t: &CorrelationTable, cfg: &McConfig) -> Result<CountsTable> {
    cfg.validate()?;
    let blocks: Vec<[u64; CELLS]> = settings()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(x, z)| sample_setting(t, x, z, cfg))
        .collect();
    let mut out = CountsTable::zeros();
    for ((x, z), n) in settings().zip(blocks) {
        out.n[x][z] = n;
        out.attempted[x][z] = cfg.trials_per_setting;
    }
    Ok(out)
}

/// Relative frequencies per setting, flagged as empirical.
pub fn estimate_table(c: &CountsTable) -> Result<CorrelationTable> {
    let mut t = CorrelationTable::zeros();
    for (x, z) in settings() {
        let total = c.detected(x, z);
        if total == 0 {
            return Err(Error::EmptySetting { x, z });
        }
        for (a, b, cc) in outcomes() {
            t.set(x, z, a, b, cc, c.get(x, z, a, b, cc) as f64 / total as f64);
        }
    }
    Ok(t.mark_empirical())
}

/// Multinomial draw of `total` events over `p` as a chain of binomials.
fn multinomial(rng: &mut SplitMix64, total: u64, p: &[f64; CELLS]) -> [u64; CELLS] {
    let mut out = [0u64; CELLS];
    let mut left = total;
    let mut mass = 1.0;
    for i in 0..CELLS {
        if left == 0 {
            break;
        }
        if i == CELLS - 1 || mass <= 0.0 {
            out[i] = left;
            break;
        }
        let q = (p[i] / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        out[i] = k;
        left -= k;
        mass -= p[i];
    }
    out
}

fn resample(c: &CountsTable, rng: &mut SplitMix64) -> CountsTable {
    let mut out = c.clone();
    for (x, z) in settings() {
        let total = c.detected(x, z);
        let mut p = [0.0; CELLS];
        for (i, &n) in c.n[x][z].iter().enumerate() {
            p[i] = n as f64 / total as f64;
        }
        out.n[x][z] = multinomial(rng, total, &p);
    }
    out
}

/// Point estimate plus bootstrap standard error of `witness`.
pub fn bootstrap_witness(
    c: &CountsTable,
    witness: Witness,
    resamples: usize,
    seed: u64,
) -> Result<WitnessEstimate> {
    let value = witness.evaluate(&estimate_table(c)?);
    if resamples == 0 {
        return Err(Error::invalid("bootstrap", "resamples must be positive"));
    }
    let base = derive_seed(seed, BOOTSTRAP_STREAM);
    let draws: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = SplitMix64::new(derive_seed(base, r));
            let t = estimate_table(&resample(c, &mut rng)).expect("resampling keeps totals");
            witness.evaluate(&t)
        })
        .collect();
    Ok(WitnessEstimate::new(value, sample_std(&draws)))
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two
/// values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}
