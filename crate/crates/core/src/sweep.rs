//! One-parameter noise scans and the point where FNN violation is lost.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::network::{build_scenario, compute_correlations, NoiseConfig};
use crate::numfmt::{ser_f64, ser_opt_f64};
use crate::witness::{r_cns, r_nsc, CLASSICAL_BOUND};

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    V1,
    V2,
    Hom,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::V1 => "v1",
            SweepAxis::V2 => "v2",
            SweepAxis::Hom => "hom",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &NoiseConfig, value: f64) -> NoiseConfig {
        let mut cfg = *base;
        match self {
            SweepAxis::V1 => cfg.v1 = value,
            SweepAxis::V2 => cfg.v2 = value,
            SweepAxis::Hom => cfg.hom_visibility = value,
        }
        cfg
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(SweepAxis::V1),
            "v2" => Ok(SweepAxis::V2),
            "hom" => Ok(SweepAxis::Hom),
            other => Err(Error::invalid(
                "sweep axis",
                format!("unknown axis {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r_cns: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r_nsc: f64,
}

impl SweepRow {
    pub fn violates(&self) -> bool {
        self.r_cns > CLASSICAL_BOUND && self.r_nsc > CLASSICAL_BOUND
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub base: NoiseConfig,
    /// One row per grid point, in grid order.
    pub rows: Vec<SweepRow>,
    /// Smallest grid value at which both witnesses exceed 3.
    #[serde(serialize_with = "ser_opt_f64")]
    pub smallest_violating: Option<f64>,
    /// Crossing of `min(r_cns, r_nsc) = 3` between the smallest violating
    /// grid value and the grid value just below it.
    #[serde(serialize_with = "ser_opt_f64")]
    pub threshold: Option<f64>,
}

impl SweepResult {
    /// `value,r_cns,r_nsc` rows with a header, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},r_cns,r_nsc\n", self.axis.name());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::numfmt::g17(r.value),
                crate::numfmt::g17(r.r_cns),
                crate::numfmt::g17(r.r_nsc)
            ));
        }
        out
    }
}

pub fn witnesses_at(noise: &NoiseConfig) -> Result<(f64, f64)> {
    let t = compute_correlations(&build_scenario(noise)?);
    Ok((r_cns(&t), r_nsc(&t)))
}

fn margin(axis: SweepAxis, base: &NoiseConfig, v: f64) -> Result<f64> {
    let (a, b) = witnesses_at(&axis.apply(base, v))?;
    Ok(a.min(b) - CLASSICAL_BOUND)
}

/// Bisects `min(r_cns, r_nsc) = 3` on `[lo, hi]`, given a sign change.
pub fn bisect_threshold(
    axis: SweepAxis,
    base: &NoiseConfig,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut f_lo = margin(axis, base, lo)?;
    let f_hi = margin(axis, base, hi)?;
    if (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::invalid(
            "threshold",
            format!("no crossing in [{lo}, {hi}]"),
        ));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = margin(axis, base, mid)?;
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evaluates both witnesses along `axis` over `grid`, other parameters from
/// `base`.
pub fn run_sweep(axis: SweepAxis, grid: &[f64], base: &NoiseConfig) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid", "grid is empty"));
    }
    base.validate()?;
    for &v in grid {
        check_unit_interval("sweep grid value", v)?;
    }
    let rows = grid
        .iter()
        .map(|&value| {
            let (r_cns, r_nsc) = witnesses_at(&axis.apply(base, value))?;
            Ok(SweepRow {
                value,
                r_cns,
                r_nsc,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let smallest_violating = rows
        .iter()
        .filter(|r| r.violates())
        .map(|r| r.value)
        .min_by(f64::total_cmp);
    let threshold = match smallest_violating {
        Some(hi) => {
            let below = rows
                .iter()
                .filter(|r| r.value < hi)
                .map(|r| r.value)
                .max_by(f64::total_cmp);
            match below {
                Some(lo) => Some(bisect_threshold(axis, base, lo, hi)?),
                None => None,
            }
        }
        None => None,
    };
    Ok(SweepResult {
        axis,
        base: *base,
        rows,
        smallest_violating,
        threshold,
    })
}

/// `n + 1` evenly spaced points from `hi` down to `lo`.
pub fn descending_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| hi - (hi - lo) * i as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hom_sweep_decreases() {
        let res = run_sweep(SweepAxis::Hom, &[1.0, 0.9, 0.8], &NoiseConfig::ideal()).unwrap();
        assert_eq!(res.rows.len(), 3);
        for w in res.rows.windows(2) {
            assert!(w[1].r_cns < w[0].r_cns);
            assert!(w[1].r_nsc < w[0].r_nsc);
        }
        assert_eq!(res.smallest_violating, Some(0.8));
        assert_eq!(res.threshold, None);
    }

    #[test]
    fn single_point_matches_direct_evaluation() {
        let res = run_sweep(SweepAxis::V1, &[1.0], &NoiseConfig::ideal()).unwrap();
        let (a, b) = witnesses_at(&NoiseConfig::ideal()).unwrap();
        assert_eq!((res.rows[0].r_cns, res.rows[0].r_nsc), (a, b));
    }

    #[test]
    fn ideal_hom_threshold() {
        let grid = descending_grid(1.0, 0.5, 50);
        let res = run_sweep(SweepAxis::Hom, &grid, &NoiseConfig::ideal()).unwrap();
        let exact = 3.0 / std::f64::consts::SQRT_2 - 1.5;
        assert!((res.threshold.unwrap() - exact).abs() < 1e-9);
        assert_eq!(res.smallest_violating, Some(grid[37]));
        // rows keep grid order
        assert!(res.rows.iter().zip(&grid).all(|(r, g)| r.value == *g));
    }

    #[test]
    fn range_errors() {
        let base = NoiseConfig::ideal();
        assert!(run_sweep(SweepAxis::Hom, &[], &base).is_err());
        assert!(matches!(
            run_sweep(SweepAxis::V2, &[0.5, 1.2], &base),
            Err(Error::OutOfRange { .. })
        ));
        assert!(run_sweep(SweepAxis::V2, &[f64::NAN], &base).is_err());
    }

    #[test]
    fn axis_parsing() {
        for a in [SweepAxis::V1, SweepAxis::V2, SweepAxis::Hom] {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("eta".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn csv_layout() {
        let res = run_sweep(SweepAxis::Hom, &[1.0, 0.5], &NoiseConfig::ideal()).unwrap();
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "hom,r_cns,r_nsc");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "1");
        for f in &fields[1..] {
            assert_eq!(f.len(), "3.5355339059327373".len());
            assert!((f.parse::<f64>().unwrap() - 2.5 * std::f64::consts::SQRT_2).abs() < 1e-12);
        }
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }
}
