//! Values frozen from an independent dense-matrix computation (explicit
//! Kronecker products of the two source states and the four measurement
//! operators, Born rule by full trace).

use fnn_core::sweep::{bisect_threshold, SweepAxis};
use fnn_core::witness::{marginal_correlator, triple_correlator, BobReading, Term};
use fnn_core::{
    build_scenario, compute_correlations, r_cns, r_nsc, CorrelationTable, NoiseConfig, NoiseKind,
};

const TOL: f64 = 1e-12;

fn table(v1: f64, v2: f64, hom: f64, kind: NoiseKind) -> CorrelationTable {
    let noise = NoiseConfig {
        v1,
        v2,
        hom_visibility: hom,
        noise_kind: kind,
        ..NoiseConfig::ideal()
    };
    compute_correlations(&build_scenario(&noise).unwrap())
}

#[test]
fn witness_values() {
    use NoiseKind::*;
    let cases = [
        (1.0, 1.0, 1.0, Werner, 3.5355339059327364, 3.535533905932737),
        (
            0.991,
            0.98,
            0.89,
            Werner,
            3.2825596667381487,
            3.2825596667381487,
        ),
        (
            0.991,
            0.98,
            0.89,
            Colored,
            3.3436961190395382,
            3.3436961190395387,
        ),
        (
            0.9,
            0.7,
            0.8,
            Colored,
            2.834083978995682,
            2.8340839789956815,
        ),
        (
            0.5,
            0.25,
            0.75,
            Werner,
            0.3977475644174327,
            0.39774756441743264,
        ),
        (
            0.8,
            1.0,
            0.6,
            Colored,
            2.8001428534987274,
            2.800142853498727,
        ),
    ];
    for (v1, v2, hom, kind, cns, nsc) in cases {
        let t = table(v1, v2, hom, kind);
        assert!(
            (r_cns(&t) - cns).abs() < TOL,
            "{v1} {v2} {hom} {kind:?}: {}",
            r_cns(&t)
        );
        assert!(
            (r_nsc(&t) - nsc).abs() < TOL,
            "{v1} {v2} {hom} {kind:?}: {}",
            r_nsc(&t)
        );
    }
}

#[test]
fn table_entries() {
    let t = table(0.9, 0.7, 0.8, NoiseKind::Colored);
    let cases = [
        ((0, 0, 0, 0, 0), 0.0847738636073762),
        ((0, 1, 1, 2, 0), 0.12499999999999994),
        ((1, 0, 0, 1, 1), 0.01830582617584077),
        ((1, 1, 1, 0, 1), 0.10669417382415917),
        ((0, 0, 1, 1, 0), 0.08477386360737621),
    ];
    for ((x, z, a, b, c), p) in cases {
        assert!(
            (t.get(x, z, a, b, c) - p).abs() < TOL,
            "p({a}{b}{c}|{x}{z})"
        );
    }
}

#[test]
fn ideal_triple_correlators() {
    let t = table(1.0, 1.0, 1.0, NoiseKind::Werner);
    let q = 0.3535533905932736;
    let h = 0.7071067811865474;
    assert!((triple_correlator(&t, 0, BobReading::B1, 0) - q).abs() < TOL);
    assert!((triple_correlator(&t, 0, BobReading::B1, 1) + q).abs() < TOL);
    assert!((triple_correlator(&t, 1, BobReading::B0, 0) - h).abs() < TOL);
    assert!((triple_correlator(&t, 1, BobReading::B0, 1) - h).abs() < TOL);
    let a0b1c0 = marginal_correlator(&t, Term::parse("A0B1C0").unwrap());
    assert!((a0b1c0 - q).abs() < TOL);
}

#[test]
fn violation_thresholds() {
    let ideal = bisect_threshold(SweepAxis::Hom, &NoiseConfig::ideal(), 0.5, 1.0).unwrap();
    assert!((ideal - 0.6213203435596434).abs() < 1e-10);
    let base = NoiseConfig {
        v1: 0.991,
        v2: 0.98,
        ..NoiseConfig::ideal()
    };
    let lab = bisect_threshold(SweepAxis::Hom, &base, 0.5, 1.0).unwrap();
    assert!((lab - 0.684271034782063).abs() < 1e-10);
}
