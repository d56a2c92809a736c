//! The bilocal chain A - B - C: two noisy singlet sources, wave-plate
//! observables for the end nodes, and Bob's three-outcome partial Bell-state
//! measurement. Qubit order in the joint space is `(A, B1, B2, C)`; the
//! two-qubit basis order is `HH, HV, VH, VV`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::linalg::{ComplexMatrix, HERMITIAN_TOL};
use crate::table::{outcomes, settings, CorrelationTable};

/// Alice's half-wave-plate angles in degrees, indexed by `x`.
pub const ALICE_ANGLES: [f64; 2] = [22.5, 0.0];
/// Charlie's half-wave-plate angles in degrees, indexed by `z`.
pub const CHARLIE_ANGLES: [f64; 2] = [11.25, -11.25];

const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if mat.dim() != 4 {
            return Err(Error::DimensionMismatch {
                left: 4,
                right: mat.dim(),
            });
        }
        let eig = mat.hermitian_eigenvalues(HERMITIAN_TOL)?;
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invalid("density matrix", format!("trace {tr}")));
        }
        let smallest = eig[eig.len() - 1];
        if smallest < -PSD_TOL {
            return Err(Error::invalid(
                "density matrix",
                format!("smallest eigenvalue {smallest:e}"),
            ));
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat
            .hermitian_eigenvalues(HERMITIAN_TOL)
            .expect("validated on construction")
    }

    /// Exchanges the two qubits.
    pub fn swapped(&self) -> Self {
        Self {
            mat: conjugate_by_swap(&self.mat),
        }
    }
}

/// `SWAP * m * SWAP` for a two-qubit operator.
pub fn conjugate_by_swap(m: &ComplexMatrix) -> ComplexMatrix {
    const PERM: [usize; 4] = [0, 2, 1, 3];
    let mut out = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            out.set(PERM[i], PERM[j], m.get(i, j));
        }
    }
    out
}

/// A +/-1-valued qubit observable. Outcome `a` corresponds to eigenvalue
/// `(-1)^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicObservable {
    mat: ComplexMatrix,
    label: String,
}

impl DichotomicObservable {
    pub fn new(mat: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        if mat.dim() != 2 {
            return Err(Error::DimensionMismatch {
                left: 2,
                right: mat.dim(),
            });
        }
        let deviation = mat.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                deviation,
                tol: HERMITIAN_TOL,
            });
        }
        let sq = mat.mat_mul(&mat)?;
        let err = sq.max_abs_diff(&ComplexMatrix::identity(2))?;
        if err > HERMITIAN_TOL {
            return Err(Error::invalid(
                "observable",
                format!("M^2 differs from I by {err:e}"),
            ));
        }
        Ok(Self {
            mat,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Spectral projector `(I + (-1)^outcome M) / 2`.
    pub fn projector(&self, outcome: usize) -> ComplexMatrix {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        ComplexMatrix::identity(2)
            .add(&self.mat.scale(sign))
            .expect("2x2")
            .scale(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::invalid("POVM", "no effects"));
        };
        let dim = first.dim();
        let mut total = ComplexMatrix::zeros(dim);
        for e in &effects {
            let eig = e.hermitian_eigenvalues(HERMITIAN_TOL)?;
            if eig[eig.len() - 1] < -PSD_TOL {
                return Err(Error::invalid(
                    "POVM",
                    "effect is not positive semidefinite",
                ));
            }
            total = total.add(e)?;
        }
        let err = total.max_abs_diff(&ComplexMatrix::identity(dim))?;
        if err > HERMITIAN_TOL {
            return Err(Error::invalid(
                "POVM",
                format!("effects sum to I only within {err:e}"),
            ));
        }
        Ok(Self { effects })
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// White noise: admixture of `I/4`.
    #[default]
    Werner,
    /// Dephasing inside the `HV`/`VH` block.
    Colored,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "werner" => Ok(NoiseKind::Werner),
            "colored" => Ok(NoiseKind::Colored),
            other => Err(Error::invalid(
                "noise kind",
                format!("unknown kind {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub v1: f64,
    pub v2: f64,
    pub noise_kind: NoiseKind,
    pub hom_visibility: f64,
    pub detector_efficiency: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseConfig {
    pub fn ideal() -> Self {
        Self {
            v1: 1.0,
            v2: 1.0,
            noise_kind: NoiseKind::Werner,
            hom_visibility: 1.0,
            detector_efficiency: 1.0,
        }
    }

    /// Source visibilities 99.1 % / 98.0 % and HOM visibility 89 %.
    pub fn experiment(kind: NoiseKind) -> Self {
        Self {
            v1: 0.991,
            v2: 0.980,
            noise_kind: kind,
            hom_visibility: 0.89,
            detector_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("v1", self.v1)?;
        check_unit_interval("v2", self.v2)?;
        check_unit_interval("hom_visibility", self.hom_visibility)?;
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::OutOfRange {
                name: "detector_efficiency",
                value: self.detector_efficiency,
                range: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// `|psi-><psi-|` with `|psi-> = (|HV> - |VH>)/sqrt 2`.
pub fn singlet() -> DensityMatrix {
    let h = FRAC_1_SQRT_2;
    DensityMatrix::new(ComplexMatrix::projector(&[0.0, h, -h, 0.0])).expect("valid state")
}

pub fn noisy_source(v: f64, kind: NoiseKind) -> Result<DensityMatrix> {
    check_unit_interval("visibility", v)?;
    let pure = singlet().mat.scale(v);
    let noise = match kind {
        NoiseKind::Werner => ComplexMatrix::identity(4).scale(0.25),
        NoiseKind::Colored => ComplexMatrix::diagonal(&[0.0, 0.5, 0.5, 0.0]),
    };
    DensityMatrix::new(pure.add(&noise.scale(1.0 - v))?)
}

/// Half-wave plate at `theta_degrees` followed by an H/V analyzer:
/// `cos(4 theta) Z + sin(4 theta) X`.
pub fn hwp_observable(theta_degrees: f64) -> DichotomicObservable {
    let phi = 4.0 * (theta_degrees % 360.0).to_radians();
    let (s, c) = phi.sin_cos();
    let mat = ComplexMatrix::pauli_z()
        .scale(c)
        .add(&ComplexMatrix::pauli_x().scale(s))
        .expect("2x2");
    DichotomicObservable::new(mat, format!("hwp({theta_degrees})")).expect("unit Bloch vector")
}

/// Bob's three effects: `phi+`, `phi-` with HH-VV coherence damped by the
/// HOM visibility, and the unresolved `psi` pair.
pub fn partial_bsm_povm(hom_visibility: f64) -> Result<Povm> {
    let v = check_unit_interval("hom_visibility", hom_visibility)?;
    let phi = |sign: f64| {
        ComplexMatrix::from_real(
            4,
            &[
                0.5,
                0.0,
                0.0,
                sign * v / 2.0, //
                0.0,
                0.0,
                0.0,
                0.0, //
                0.0,
                0.0,
                0.0,
                0.0, //
                sign * v / 2.0,
                0.0,
                0.0,
                0.5,
            ],
        )
        .expect("4x4")
    };
    let psi = ComplexMatrix::diagonal(&[0.0, 1.0, 1.0, 0.0]);
    Povm::new(vec![phi(1.0), phi(-1.0), psi])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Qubits (A, B1).
    pub source1: DensityMatrix,
    /// Qubits (B2, C).
    pub source2: DensityMatrix,
    pub alice_observables: [DichotomicObservable; 2],
    pub charlie_observables: [DichotomicObservable; 2],
    /// Acts on (B1, B2).
    pub bob_povm: Povm,
}

impl Scenario {
    pub fn new(
        source1: DensityMatrix,
        source2: DensityMatrix,
        alice_observables: [DichotomicObservable; 2],
        charlie_observables: [DichotomicObservable; 2],
        bob_povm: Povm,
    ) -> Result<Self> {
        if bob_povm.len() != 3 || bob_povm.effects()[0].dim() != 4 {
            return Err(Error::invalid(
                "scenario",
                "Bob needs three effects on two qubits",
            ));
        }
        Ok(Self {
            source1,
            source2,
            alice_observables,
            charlie_observables,
            bob_povm,
        })
    }

    pub fn ideal() -> Self {
        build_scenario(&NoiseConfig::ideal()).expect("ideal config is valid")
    }
}

pub fn build_scenario(noise: &NoiseConfig) -> Result<Scenario> {
    noise.validate()?;
    Scenario::new(
        noisy_source(noise.v1, noise.noise_kind)?,
        noisy_source(noise.v2, noise.noise_kind)?,
        ALICE_ANGLES.map(hwp_observable),
        CHARLIE_ANGLES.map(hwp_observable),
        partial_bsm_povm(noise.hom_visibility)?,
    )
}

/// Born rule over `rho1 (x) rho2` with effects `P_a^x (x) Pi_b (x) P_c^z`.
pub fn compute_correlations(s: &Scenario) -> CorrelationTable {
    let rho = s.source1.matrix().tensor(s.source2.matrix());
    let alice: Vec<[ComplexMatrix; 2]> = s
        .alice_observables
        .iter()
        .map(|o| [o.projector(0), o.projector(1)])
        .collect();
    let charlie: Vec<[ComplexMatrix; 2]> = s
        .charlie_observables
        .iter()
        .map(|o| [o.projector(0), o.projector(1)])
        .collect();
    let mut table = CorrelationTable::zeros();
    for (x, z) in settings() {
        for (a, b, c) in outcomes() {
            let effect = alice[x][a]
                .tensor(&s.bob_povm.effects()[b])
                .tensor(&charlie[z][c]);
            let p = effect.trace_product(&rho).expect("16x16");
            table.set(x, z, a, b, c, p.re);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cplx;
    use proptest::prelude::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.max_abs_diff(b).unwrap() <= tol
    }

    #[test]
    fn singlet_entries() {
        let s = singlet();
        assert!((s.matrix().get(1, 1).re - 0.5).abs() < 1e-15);
        assert!((s.matrix().get(1, 2).re + 0.5).abs() < 1e-15);
        assert!((s.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noisy_source_limits() {
        assert!(close(
            noisy_source(1.0, NoiseKind::Werner).unwrap().matrix(),
            singlet().matrix(),
            0.0
        ));
        assert!(close(
            noisy_source(0.0, NoiseKind::Werner).unwrap().matrix(),
            &ComplexMatrix::identity(4).scale(0.25),
            0.0
        ));
        assert!(noisy_source(1.01, NoiseKind::Werner).is_err());
        assert!(noisy_source(-0.1, NoiseKind::Colored).is_err());
    }

    #[test]
    fn werner_spectrum() {
        // v + (1-v)/4 once, (1-v)/4 three times
        let ev = noisy_source(0.991, NoiseKind::Werner)
            .unwrap()
            .eigenvalues();
        let expected = [0.99325, 0.00225, 0.00225, 0.00225];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn colored_spectrum() {
        // singlet weight v + (1-v)/2, triplet-zero (1-v)/2, HH and VV empty
        let ev = noisy_source(0.98, NoiseKind::Colored)
            .unwrap()
            .eigenvalues();
        let expected = [0.99, 0.01, 0.0, 0.0];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn wave_plate_angles() {
        let x = ComplexMatrix::pauli_x();
        let z = ComplexMatrix::pauli_z();
        let r = FRAC_1_SQRT_2;
        assert!(close(hwp_observable(22.5).matrix(), &x, 1e-15));
        assert!(close(hwp_observable(0.0).matrix(), &z, 0.0));
        let c0 = z.add(&x).unwrap().scale(r);
        let c1 = z.sub(&x).unwrap().scale(r);
        assert!(close(hwp_observable(11.25).matrix(), &c0, 1e-15));
        assert!(close(hwp_observable(-11.25).matrix(), &c1, 1e-15));
        assert!(close(hwp_observable(382.5).matrix(), &x, 1e-12));
    }

    #[test]
    fn bsm_at_full_visibility() {
        let h = FRAC_1_SQRT_2;
        let povm = partial_bsm_povm(1.0).unwrap();
        assert!(close(
            &povm.effects()[0],
            &ComplexMatrix::projector(&[h, 0.0, 0.0, h]),
            1e-15
        ));
        assert!(close(
            &povm.effects()[1],
            &ComplexMatrix::projector(&[h, 0.0, 0.0, -h]),
            1e-15
        ));
        let psi = ComplexMatrix::projector(&[0.0, h, h, 0.0])
            .add(&ComplexMatrix::projector(&[0.0, h, -h, 0.0]))
            .unwrap();
        assert!(close(&povm.effects()[2], &psi, 1e-15));
    }

    #[test]
    fn bsm_without_interference() {
        let povm = partial_bsm_povm(0.0).unwrap();
        let coin = ComplexMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(povm.effects()[0], coin);
        assert_eq!(povm.effects()[1], coin);
        assert!(partial_bsm_povm(1.5).is_err());
    }

    #[test]
    fn povm_validation() {
        let bad = vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)];
        assert!(Povm::new(bad).is_err());
        let neg = vec![
            ComplexMatrix::diagonal(&[1.5, 0.0]),
            ComplexMatrix::diagonal(&[-0.5, 1.0]),
        ];
        assert!(Povm::new(neg).is_err());
        assert!(Povm::new(vec![]).is_err());
    }

    #[test]
    fn observable_validation() {
        let not_unitary = ComplexMatrix::diagonal(&[1.0, 0.5]);
        assert!(DichotomicObservable::new(not_unitary, "bad").is_err());
        let y = ComplexMatrix::pauli_y();
        assert!(DichotomicObservable::new(y, "y").is_ok());
        let skew = ComplexMatrix::new(
            2,
            vec![
                Cplx::new(0.0, 0.0),
                Cplx::new(1.0, 0.0),
                Cplx::new(-1.0, 0.0),
                Cplx::new(0.0, 0.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            DichotomicObservable::new(skew, "skew"),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn build_scenario_configs() {
        build_scenario(&NoiseConfig::ideal()).unwrap();
        build_scenario(&NoiseConfig::experiment(NoiseKind::Colored)).unwrap();
        let mixed = NoiseConfig {
            v1: 0.0,
            v2: 0.0,
            ..NoiseConfig::ideal()
        };
        let s = build_scenario(&mixed).unwrap();
        assert!(close(
            s.source1.matrix(),
            &ComplexMatrix::identity(4).scale(0.25),
            0.0
        ));
        let bad = NoiseConfig {
            detector_efficiency: 0.0,
            ..NoiseConfig::ideal()
        };
        assert!(build_scenario(&bad).is_err());
    }

    #[test]
    fn werner_purity_monotone() {
        let mut last = f64::NEG_INFINITY;
        for i in 0..=100 {
            let top = noisy_source(i as f64 / 100.0, NoiseKind::Werner)
                .unwrap()
                .eigenvalues()[0];
            assert!(top >= last - 1e-14);
            last = top;
        }
    }

    #[test]
    fn bsm_effects_psd_on_grid() {
        for i in 0..=100 {
            let povm = partial_bsm_povm(i as f64 / 100.0).unwrap();
            for e in povm.effects() {
                assert!(e.hermitian_eigenvalues(HERMITIAN_TOL).unwrap()[3] >= -1e-10);
            }
        }
    }

    #[test]
    fn ideal_bob_outcome_weights() {
        let t = compute_correlations(&Scenario::ideal());
        for (x, z) in settings() {
            let p2: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |c| (a, c)))
                .map(|(a, c)| t.get(x, z, a, 2, c))
                .sum();
            assert!((p2 - 0.5).abs() < 1e-12);
        }
        t.validate().unwrap();
    }

    #[test]
    fn mixed_sources_factorize() {
        let noise = NoiseConfig {
            v1: 0.0,
            v2: 0.0,
            ..NoiseConfig::ideal()
        };
        let t = compute_correlations(&build_scenario(&noise).unwrap());
        let q = [0.25, 0.25, 0.5];
        for (x, z) in settings() {
            for (a, b, c) in outcomes() {
                assert!((t.get(x, z, a, b, c) - q[b] / 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn source_swap_relabels_table() {
        let s = Scenario::ideal();
        let swapped = Scenario::new(
            s.source2.swapped(),
            s.source1.swapped(),
            s.charlie_observables.clone(),
            s.alice_observables.clone(),
            Povm::new(s.bob_povm.effects().iter().map(conjugate_by_swap).collect()).unwrap(),
        )
        .unwrap();
        let t = compute_correlations(&s);
        let u = compute_correlations(&swapped);
        for (x, z) in settings() {
            for (a, b, c) in outcomes() {
                assert!((t.get(x, z, a, b, c) - u.get(z, x, c, b, a)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn wave_plate_observable_squares_to_identity(theta in -720.0f64..720.0) {
            let m = hwp_observable(theta);
            let sq = m.matrix().mat_mul(m.matrix()).unwrap();
            prop_assert!(close(&sq, &ComplexMatrix::identity(2), 1e-10));
        }

        #[test]
        fn bsm_complete_for_any_visibility(v in 0.0f64..=1.0) {
            let povm = partial_bsm_povm(v).unwrap();
            let total = povm.effects().iter().fold(ComplexMatrix::zeros(4), |acc, e| acc.add(e).unwrap());
            prop_assert_eq!(total, ComplexMatrix::identity(4));
        }
    }
}
