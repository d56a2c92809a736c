//! Correlators and the two full-network-nonlocality witnesses.
//!
//! Outcome `a` (resp. `c`) contributes the value `(-1)^a`. Bob's outcome
//! `b` is read through one of two colourings: `B0` assigns `(+1, +1, -1)`
//! and `B1` assigns `(+1, -1, 0)`. Correlators with a party missing are
//! averaged over that party's settings; the spread of the averaged values
//! is kept as a diagnostic.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numfmt::{ser_f64, ser_map_f64};
use crate::table::{CorrelationTable, A_OUTCOMES, B_OUTCOMES, C_OUTCOMES, SETTINGS};

/// Classical bound shared by both witnesses.
pub const CLASSICAL_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    /// `R_{C-NS}`.
    Cns,
    /// `R_{NS-C}`.
    Nsc,
}

impl Witness {
    pub const ALL: [Witness; 2] = [Witness::Cns, Witness::Nsc];

    pub fn evaluate(self, t: &CorrelationTable) -> f64 {
        match self {
            Witness::Cns => r_cns(t),
            Witness::Nsc => r_nsc(t),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Witness::Cns => "cns",
            Witness::Nsc => "nsc",
        })
    }
}

impl std::str::FromStr for Witness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cns" => Ok(Witness::Cns),
            "nsc" => Ok(Witness::Nsc),
            other => Err(format!("unknown witness {other:?}")),
        }
    }
}

/// Bob's value assignment for reading `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BobReading(usize);

impl BobReading {
    pub const B0: BobReading = BobReading(0);
    pub const B1: BobReading = BobReading(1);

    pub fn new(j: usize) -> Option<Self> {
        (j < 2).then_some(BobReading(j))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn coefficients(self) -> [f64; B_OUTCOMES] {
        match self.0 {
            0 => [1.0, 1.0, -1.0],
            _ => [1.0, -1.0, 0.0],
        }
    }
}

#[inline]
fn sign(outcome: usize) -> f64 {
    if outcome == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A product of parties' observables, e.g. `A1B0` or `C1`. A party set to
/// `None` is marginalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub alice: Option<usize>,
    pub bob: Option<BobReading>,
    pub charlie: Option<usize>,
}

impl Term {
    pub const fn new(alice: Option<usize>, bob: Option<usize>, charlie: Option<usize>) -> Self {
        let bob = match bob {
            Some(j) => Some(BobReading(j)),
            None => None,
        };
        Self {
            alice,
            bob,
            charlie,
        }
    }

    pub fn name(&self) -> String {
        let mut s = String::new();
        if let Some(x) = self.alice {
            s.push_str(&format!("A{x}"));
        }
        if let Some(j) = self.bob {
            s.push_str(&format!("B{}", j.0));
        }
        if let Some(z) = self.charlie {
            s.push_str(&format!("C{z}"));
        }
        s
    }

    /// Parses names such as `A0B1C0`, `B0`, `A1`.
    pub fn parse(name: &str) -> Option<Self> {
        let mut term = Term::new(None, None, None);
        let mut chars = name.chars().peekable();
        let mut last = 0;
        while let Some(party) = chars.next() {
            let idx = chars.next()?.to_digit(10)? as usize;
            if idx > 1 {
                return None;
            }
            let order = match party {
                'A' => 1,
                'B' => 2,
                'C' => 3,
                _ => return None,
            };
            if order <= last {
                return None;
            }
            last = order;
            match party {
                'A' => term.alice = Some(idx),
                'B' => term.bob = Some(BobReading(idx)),
                _ => term.charlie = Some(idx),
            }
        }
        (last > 0).then_some(term)
    }
}

/// `<A_x B_j C_z>`.
pub fn triple_correlator(t: &CorrelationTable, x: usize, j: BobReading, z: usize) -> f64 {
    let coeff = j.coefficients();
    let blk = t.block(x, z);
    let mut acc = 0.0;
    for (a, ab) in blk.iter().enumerate() {
        for (b, cs) in ab.iter().enumerate() {
            for (c, &p) in cs.iter().enumerate() {
                acc += sign(a) * sign(c) * coeff[b] * p;
            }
        }
    }
    acc
}

/// Value of `term` together with its spread across the averaged settings.
pub fn marginal_correlator_with_spread(t: &CorrelationTable, term: Term) -> (f64, f64) {
    let (x_lo, x_hi) = term.alice.map_or((0, SETTINGS), |x| (x, x + 1));
    let (z_lo, z_hi) = term.charlie.map_or((0, SETTINGS), |z| (z, z + 1));
    let bob = term.bob.map_or([1.0; B_OUTCOMES], BobReading::coefficients);
    let (mut sum, mut lo, mut hi, mut n) = (0.0, f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for x in x_lo..x_hi {
        for z in z_lo..z_hi {
            let mut acc = 0.0;
            for a in 0..A_OUTCOMES {
                let va = if term.alice.is_some() { sign(a) } else { 1.0 };
                for (b, &vb) in bob.iter().enumerate() {
                    for c in 0..C_OUTCOMES {
                        let vc = if term.charlie.is_some() { sign(c) } else { 1.0 };
                        acc += va * vb * vc * t.get(x, z, a, b, c);
                    }
                }
            }
            sum += acc;
            lo = lo.min(acc);
            hi = hi.max(acc);
            n += 1;
        }
    }
    (sum / n as f64, hi - lo)
}

pub fn marginal_correlator(t: &CorrelationTable, term: Term) -> f64 {
    marginal_correlator_with_spread(t, term).0
}

/// Every term appearing in either witness.
pub const TERMS: [Term; 11] = [
    Term::new(Some(0), Some(1), Some(0)),
    Term::new(Some(0), Some(1), Some(1)),
    Term::new(Some(1), Some(0), Some(0)),
    Term::new(Some(1), Some(0), Some(1)),
    Term::new(None, Some(0), None),
    Term::new(Some(1), Some(0), None),
    Term::new(None, Some(0), Some(0)),
    Term::new(None, Some(0), Some(1)),
    Term::new(Some(1), None, None),
    Term::new(None, None, Some(0)),
    Term::new(None, None, Some(1)),
];

/// The correlators both witnesses are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Correlators {
    a0b1c0: f64,
    a0b1c1: f64,
    a1b0c0: f64,
    a1b0c1: f64,
    b0: f64,
    a1b0: f64,
    b0c0: f64,
    b0c1: f64,
    a1: f64,
    c0: f64,
    c1: f64,
}

impl Correlators {
    fn of(t: &CorrelationTable) -> Self {
        let m = |term: Term| marginal_correlator(t, term);
        Self {
            a0b1c0: triple_correlator(t, 0, BobReading::B1, 0),
            a0b1c1: triple_correlator(t, 0, BobReading::B1, 1),
            a1b0c0: triple_correlator(t, 1, BobReading::B0, 0),
            a1b0c1: triple_correlator(t, 1, BobReading::B0, 1),
            b0: m(TERMS[4]),
            a1b0: m(TERMS[5]),
            b0c0: m(TERMS[6]),
            b0c1: m(TERMS[7]),
            a1: m(TERMS[8]),
            c0: m(TERMS[9]),
            c1: m(TERMS[10]),
        }
    }

    fn from_map(m: &BTreeMap<String, f64>) -> Option<Self> {
        let g = |i: usize| m.get(&TERMS[i].name()).copied();
        Some(Self {
            a0b1c0: g(0)?,
            a0b1c1: g(1)?,
            a1b0c0: g(2)?,
            a1b0c1: g(3)?,
            b0: g(4)?,
            a1b0: g(5)?,
            b0c0: g(6)?,
            b0c1: g(7)?,
            a1: g(8)?,
            c0: g(9)?,
            c1: g(10)?,
        })
    }

    fn r_cns(&self) -> f64 {
        2.0 * self.a0b1c0 - 2.0 * self.a0b1c1 + 2.0 * self.a1b0c0 + self.a1b0c1 - self.b0
            + self.c1 * (self.a1b0 + self.b0c0 - self.c0)
    }

    fn r_nsc(&self) -> f64 {
        2.0 * self.a0b1c0 - 2.0 * self.a0b1c1 + self.a1b0c0 + 2.0 * self.a1b0c1 - self.b0
            + self.a1 * self.a1b0
            + self.a1 * self.b0c1
            + self.a1 * self.c0
            - self.a1 * self.c1
            - self.a1 * self.a1
    }
}

/// `R_{C-NS}`; at most 3 for non-FNN correlations.
pub fn r_cns(t: &CorrelationTable) -> f64 {
    Correlators::of(t).r_cns()
}

/// `R_{NS-C}`; at most 3 for non-FNN correlations.
pub fn r_nsc(t: &CorrelationTable) -> f64 {
    Correlators::of(t).r_nsc()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    #[serde(serialize_with = "ser_f64")]
    pub r_cns: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r_nsc: f64,
    pub fnn_violated: bool,
    #[serde(serialize_with = "ser_map_f64")]
    pub correlators: BTreeMap<String, f64>,
    #[serde(serialize_with = "ser_f64")]
    pub marginal_consistency: f64,
}

// Reports are read back with plain f64 parsing; only emission is customized.
impl<'de> Deserialize<'de> for WitnessReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Plain {
            r_cns: f64,
            r_nsc: f64,
            fnn_violated: bool,
            correlators: BTreeMap<String, f64>,
            marginal_consistency: f64,
        }
        let p = Plain::deserialize(d)?;
        Ok(Self {
            r_cns: p.r_cns,
            r_nsc: p.r_nsc,
            fnn_violated: p.fnn_violated,
            correlators: p.correlators,
            marginal_consistency: p.marginal_consistency,
        })
    }
}

impl WitnessReport {
    /// Witness values rebuilt from the stored correlators, or `None` if one
    /// is missing.
    pub fn recompute(&self) -> Option<(f64, f64)> {
        let k = Correlators::from_map(&self.correlators)?;
        Some((k.r_cns(), k.r_nsc()))
    }
}

/// Both witnesses, every constituent correlator and the verdict. The
/// verdict needs both values strictly above 3.
pub fn evaluate(t: &CorrelationTable) -> WitnessReport {
    let k = Correlators::of(t);
    let mut correlators = BTreeMap::new();
    let mut spread: f64 = 0.0;
    for term in TERMS {
        let (value, s) = marginal_correlator_with_spread(t, term);
        spread = spread.max(s);
        correlators.insert(term.name(), value);
    }
    let (r_cns, r_nsc) = (k.r_cns(), k.r_nsc());
    WitnessReport {
        r_cns,
        r_nsc,
        fnn_violated: r_cns > CLASSICAL_BOUND && r_nsc > CLASSICAL_BOUND,
        correlators,
        marginal_consistency: spread,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_scenario, compute_correlations, NoiseConfig, Scenario};
    use crate::table::settings;

    fn all_zeros() -> CorrelationTable {
        CorrelationTable::from_fn(
            |_, _, a, b, c| if a == 0 && b == 0 && c == 0 { 1.0 } else { 0.0 },
        )
    }

    fn mixed() -> CorrelationTable {
        let noise = NoiseConfig {
            v1: 0.0,
            v2: 0.0,
            ..NoiseConfig::ideal()
        };
        compute_correlations(&build_scenario(&noise).unwrap())
    }

    #[test]
    fn term_names_round_trip() {
        for term in TERMS {
            assert_eq!(Term::parse(&term.name()), Some(term));
        }
        assert_eq!(Term::parse("B0A1"), None);
        assert_eq!(Term::parse("A2"), None);
        assert_eq!(Term::parse(""), None);
    }

    #[test]
    fn deterministic_triple() {
        let t = all_zeros();
        assert_eq!(triple_correlator(&t, 1, BobReading::B0, 0), 1.0);
        assert_eq!(triple_correlator(&t, 0, BobReading::B1, 1), 1.0);
        assert_eq!(marginal_correlator(&t, Term::parse("A1B0").unwrap()), 1.0);
    }

    #[test]
    fn all_zeros_strategy_sits_on_the_bound() {
        // C-NS: 2 - 2 + 2 + 1 - 1 + 1*(1 + 1 - 1)
        // NS-C: 2 - 2 + 1 + 2 - 1 + 1 + 1 + 1 - 1 - 1
        let t = all_zeros();
        assert_eq!(r_cns(&t), 3.0);
        assert_eq!(r_nsc(&t), 3.0);
        let report = evaluate(&t);
        assert!(!report.fnn_violated);
        assert_eq!(report.marginal_consistency, 0.0);
    }

    #[test]
    fn fully_mixed_sources_give_zero() {
        let t = mixed();
        for term in TERMS {
            assert!(
                marginal_correlator(&t, term).abs() < 1e-12,
                "{}",
                term.name()
            );
        }
        for j in [BobReading::B0, BobReading::B1] {
            for (x, z) in settings() {
                assert!(triple_correlator(&t, x, j, z).abs() < 1e-12);
            }
        }
        assert!(r_cns(&t).abs() < 1e-12);
        assert!(r_nsc(&t).abs() < 1e-12);
    }

    #[test]
    fn ideal_marginals_vanish() {
        let t = compute_correlations(&Scenario::ideal());
        assert!(marginal_correlator(&t, Term::parse("B0").unwrap()).abs() < 1e-12);
        assert!(marginal_correlator(&t, Term::parse("A1").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn witness_symmetry_at_ideal_point() {
        let t = compute_correlations(&Scenario::ideal());
        let rep = evaluate(&t);
        assert!((rep.r_cns - rep.r_nsc).abs() < 1e-10);
        assert!(rep.fnn_violated);
        assert!(rep.marginal_consistency < 1e-9);
        assert_eq!(rep.correlators.len(), TERMS.len());
    }

    #[test]
    fn correlators_are_affine_in_mixing() {
        let t1 = compute_correlations(&Scenario::ideal());
        let t2 = all_zeros();
        for lambda in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let mix = t1.mix(&t2, lambda);
            for term in TERMS {
                let lhs = marginal_correlator(&mix, term);
                let rhs = lambda * marginal_correlator(&t1, term)
                    + (1.0 - lambda) * marginal_correlator(&t2, term);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bob_only_marginal_uses_outcome_weights() {
        let t = CorrelationTable::from_fn(|_, _, a, b, c| {
            let q = [0.5, 0.3, 0.2][b];
            if a == 0 && c == 1 {
                q
            } else {
                0.0
            }
        });
        let b0 = marginal_correlator(&t, Term::parse("B0").unwrap());
        assert!((b0 - (0.5 + 0.3 - 0.2)).abs() < 1e-15);
        let b1 = marginal_correlator(&t, Term::parse("B1").unwrap());
        assert!((b1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn report_json_round_trip_is_exact() {
        let noise = NoiseConfig::experiment(crate::network::NoiseKind::Colored);
        let rep = evaluate(&compute_correlations(&build_scenario(&noise).unwrap()));
        let back: WitnessReport =
            serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
        assert_eq!(back, rep);
        assert_eq!(back.recompute(), Some((rep.r_cns, rep.r_nsc)));
        let mut missing = back.clone();
        missing.correlators.remove("C1");
        assert_eq!(missing.recompute(), None);
    }
}
