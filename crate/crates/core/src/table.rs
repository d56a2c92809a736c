//! Conditional outcome distribution `p(a,b,c|x,z)` of the bilocal chain.
//!
//! Bob has a single measurement, so his input is dropped from the index.
//! Index order everywhere is `[x][z][a][b][c]`.

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numfmt::Sig17;

pub const SETTINGS: usize = 2;
pub const A_OUTCOMES: usize = 2;
pub const B_OUTCOMES: usize = 3;
pub const C_OUTCOMES: usize = 2;
/// Outcome cells per setting pair.
pub const CELLS: usize = A_OUTCOMES * B_OUTCOMES * C_OUTCOMES;

pub const NEGATIVITY_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-10;
pub const SIGNALING_TOL: f64 = 1e-9;

pub type Block = [[[f64; C_OUTCOMES]; B_OUTCOMES]; A_OUTCOMES];

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    p: [[Block; SETTINGS]; SETTINGS],
    empirical: bool,
}

/// Iterates `(a, b, c)` in lexicographic order.
pub fn outcomes() -> impl Iterator<Item = (usize, usize, usize)> {
    (0..A_OUTCOMES)
        .flat_map(|a| (0..B_OUTCOMES).flat_map(move |b| (0..C_OUTCOMES).map(move |c| (a, b, c))))
}

/// Iterates `(x, z)` in lexicographic order.
pub fn settings() -> impl Iterator<Item = (usize, usize)> {
    (0..SETTINGS).flat_map(|x| (0..SETTINGS).map(move |z| (x, z)))
}

/// Flat position of an outcome cell within one setting block.
#[inline]
pub fn cell_index(a: usize, b: usize, c: usize) -> usize {
    (a * B_OUTCOMES + b) * C_OUTCOMES + c
}

impl Default for CorrelationTable {
    fn default() -> Self {
        Self::zeros()
    }
}

impl CorrelationTable {
    pub fn zeros() -> Self {
        Self {
            p: [[[[[0.0; C_OUTCOMES]; B_OUTCOMES]; A_OUTCOMES]; SETTINGS]; SETTINGS],
            empirical: false,
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros();
        for (x, z) in settings() {
            for (a, b, c) in outcomes() {
                t.p[x][z][a][b][c] = f(x, z, a, b, c);
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, x: usize, z: usize, a: usize, b: usize, c: usize) -> f64 {
        self.p[x][z][a][b][c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, z: usize, a: usize, b: usize, c: usize, v: f64) {
        self.p[x][z][a][b][c] = v;
    }

    pub fn block(&self, x: usize, z: usize) -> &Block {
        &self.p[x][z]
    }

    pub fn block_mut(&mut self, x: usize, z: usize) -> &mut Block {
        &mut self.p[x][z]
    }

    /// True for tables estimated from finite counts; no-signaling is not
    /// expected to hold exactly for those.
    pub fn is_empirical(&self) -> bool {
        self.empirical
    }

    pub fn mark_empirical(mut self) -> Self {
        self.empirical = true;
        self
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        Self::from_fn(|x, z, a, b, c| {
            lambda * self.get(x, z, a, b, c) + (1.0 - lambda) * other.get(x, z, a, b, c)
        })
    }

    pub fn min_entry(&self) -> f64 {
        settings()
            .flat_map(|(x, z)| outcomes().map(move |(a, b, c)| (x, z, a, b, c)))
            .map(|(x, z, a, b, c)| self.get(x, z, a, b, c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn setting_total(&self, x: usize, z: usize) -> f64 {
        outcomes().map(|(a, b, c)| self.p[x][z][a][b][c]).sum()
    }

    /// Largest `|sum - 1|` over setting pairs.
    pub fn normalization_error(&self) -> f64 {
        settings()
            .map(|(x, z)| (self.setting_total(x, z) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest z-dependence of `p(a,b|x)`.
    pub fn signaling_to_ab(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..SETTINGS {
            for a in 0..A_OUTCOMES {
                for b in 0..B_OUTCOMES {
                    let m0: f64 = (0..C_OUTCOMES).map(|c| self.p[x][0][a][b][c]).sum();
                    let m1: f64 = (0..C_OUTCOMES).map(|c| self.p[x][1][a][b][c]).sum();
                    worst = worst.max((m0 - m1).abs());
                }
            }
        }
        worst
    }

    /// Largest x-dependence of `p(b,c|z)`.
    pub fn signaling_to_bc(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for z in 0..SETTINGS {
            for b in 0..B_OUTCOMES {
                for c in 0..C_OUTCOMES {
                    let m0: f64 = (0..A_OUTCOMES).map(|a| self.p[0][z][a][b][c]).sum();
                    let m1: f64 = (0..A_OUTCOMES).map(|a| self.p[1][z][a][b][c]).sum();
                    worst = worst.max((m0 - m1).abs());
                }
            }
        }
        worst
    }

    /// Checks nonnegativity, normalization and, for exact tables, two-sided
    /// no-signaling.
    pub fn validate(&self) -> Result<()> {
        let min = self.min_entry();
        if !min.is_finite() || min < -NEGATIVITY_TOL {
            return Err(Error::invalid(
                "correlation table",
                format!("entry {min} is negative"),
            ));
        }
        let norm = self.normalization_error();
        if norm > NORMALIZATION_TOL {
            return Err(Error::invalid(
                "correlation table",
                format!("setting totals deviate from 1 by {norm:e}"),
            ));
        }
        if !self.empirical {
            let sig = self.signaling_to_ab().max(self.signaling_to_bc());
            if sig > SIGNALING_TOL {
                return Err(Error::invalid(
                    "correlation table",
                    format!("marginals depend on the remote setting by {sig:e}"),
                ));
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        settings()
            .flat_map(|(x, z)| outcomes().map(move |(a, b, c)| (x, z, a, b, c)))
            .map(|(x, z, a, b, c)| (self.get(x, z, a, b, c) - other.get(x, z, a, b, c)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct SettingsShape {
    x: usize,
    z: usize,
}

#[derive(Serialize, Deserialize)]
struct OutcomeShape {
    a: usize,
    b: usize,
    c: usize,
}

impl Serialize for CorrelationTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nested: Vec<Vec<Vec<Vec<Vec<Sig17>>>>> = self
            .p
            .iter()
            .map(|row| {
                row.iter()
                    .map(|blk| {
                        blk.iter()
                            .map(|ab| {
                                ab.iter()
                                    .map(|cs| cs.iter().map(|&v| Sig17(v)).collect())
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut st = s.serialize_struct("CorrelationTable", if self.empirical { 4 } else { 3 })?;
        st.serialize_field(
            "settings",
            &SettingsShape {
                x: SETTINGS,
                z: SETTINGS,
            },
        )?;
        st.serialize_field(
            "outcomes",
            &OutcomeShape {
                a: A_OUTCOMES,
                b: B_OUTCOMES,
                c: C_OUTCOMES,
            },
        )?;
        st.serialize_field("p", &nested)?;
        if self.empirical {
            st.serialize_field("empirical", &true)?;
        }
        st.end()
    }
}

#[derive(Deserialize)]
struct TableDoc {
    settings: SettingsShape,
    outcomes: OutcomeShape,
    p: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(default)]
    empirical: bool,
}

impl<'de> Deserialize<'de> for CorrelationTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TableDoc::deserialize(d)?;
        if (doc.settings.x, doc.settings.z) != (SETTINGS, SETTINGS)
            || (doc.outcomes.a, doc.outcomes.b, doc.outcomes.c)
                != (A_OUTCOMES, B_OUTCOMES, C_OUTCOMES)
        {
            return Err(D::Error::custom("unsupported table shape"));
        }
        let mut t = Self::zeros();
        t.empirical = doc.empirical;
        let shape_err = || D::Error::custom("p does not match the declared shape");
        if doc.p.len() != SETTINGS {
            return Err(shape_err());
        }
        for (x, row) in doc.p.iter().enumerate() {
            if row.len() != SETTINGS {
                return Err(shape_err());
            }
            for (z, blk) in row.iter().enumerate() {
                if blk.len() != A_OUTCOMES {
                    return Err(shape_err());
                }
                for (a, ab) in blk.iter().enumerate() {
                    if ab.len() != B_OUTCOMES {
                        return Err(shape_err());
                    }
                    for (b, cs) in ab.iter().enumerate() {
                        if cs.len() != C_OUTCOMES {
                            return Err(shape_err());
                        }
                        for (c, &v) in cs.iter().enumerate() {
                            t.p[x][z][a][b][c] = v;
                        }
                    }
                }
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> CorrelationTable {
        CorrelationTable::from_fn(|_, _, _, _, _| 1.0 / CELLS as f64)
    }

    #[test]
    fn uniform_is_valid() {
        uniform().validate().unwrap();
    }

    #[test]
    fn signaling_detected() {
        let t = CorrelationTable::from_fn(|x, z, a, b, c| {
            // Alice's outcome copies Charlie's setting
            if a == z && b == 0 && c == 0 && x < 2 {
                1.0
            } else {
                0.0
            }
        });
        assert!(t.signaling_to_ab() > 0.5);
        assert!(t.validate().is_err());
        assert!(t.clone().mark_empirical().validate().is_ok());
    }

    #[test]
    fn negative_or_unnormalized_rejected() {
        let mut t = uniform();
        t.set(0, 0, 0, 0, 0, -0.1);
        assert!(t.validate().is_err());
        let mut t = uniform();
        t.set(1, 1, 1, 2, 1, 0.5);
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let t = uniform();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["settings"]["x"], 2);
        assert_eq!(v["outcomes"]["b"], 3);
        assert_eq!(v["p"][1][0][1][2][1].as_f64().unwrap(), 1.0 / 12.0);
        assert!(v.get("empirical").is_none());
        assert_eq!(CorrelationTable::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn json_rejects_bad_shape() {
        let bad = r#"{"settings":{"x":2,"z":2},"outcomes":{"a":2,"b":3,"c":2},"p":[[]]}"#;
        assert!(CorrelationTable::from_json(bad).is_err());
        let bad = r#"{"settings":{"x":3,"z":2},"outcomes":{"a":2,"b":3,"c":2},"p":[]}"#;
        assert!(CorrelationTable::from_json(bad).is_err());
    }

    #[test]
    fn cell_order_is_lexicographic() {
        let cells: Vec<usize> = outcomes().map(|(a, b, c)| cell_index(a, b, c)).collect();
        assert_eq!(cells, (0..CELLS).collect::<Vec<_>>());
    }
}
