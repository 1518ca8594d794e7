//! Physical objects of the modulator–charger–battery model.
//!
//! Conventions: computational basis (|0⟩, |1⟩) with σz|0⟩ = +|0⟩,
//! σ+ = |1⟩⟨0|, σy = i|1⟩⟨0| − i|0⟩⟨1|. The tilde rotation is
//! exp(iσyθ) = cosθ·1 + i·sinθ·σy with θ = arctan(γ)/2.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::qcore::{kron, ComplexMatrix, StateVector, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("qubit slot {slot} out of range for {n} qubits")]
    IndexOutOfRange { slot: usize, n: usize },
}

/// Physical constants of the model. All frequencies share the unit of ω0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    omega0: f64,
    omega1: f64,
    g: f64,
    gamma: f64,
    mu: f64,
}

impl ModelParams {
    /// Validated parameters. `omega1 = None` selects the resonant battery
    /// frequency `μγω0/√(1+γ²)`.
    pub fn new(
        omega0: f64,
        g: f64,
        gamma: f64,
        mu: f64,
        omega1: Option<f64>,
    ) -> Result<Self, ModelError> {
        positive("omega0", omega0)?;
        positive("g", g)?;
        positive("gamma", gamma)?;
        positive("mu", mu)?;
        let omega1 = match omega1 {
            Some(w) => {
                if !w.is_finite() {
                    return Err(ModelError::InvalidParameter {
                        name: "omega1",
                        value: w,
                        reason: "must be finite",
                    });
                }
                w
            }
            None => mu * gamma * omega0 / (1.0 + gamma * gamma).sqrt(),
        };
        Ok(Self {
            omega0,
            omega1,
            g,
            gamma,
            mu,
        })
    }

    /// ω0 = 1, γ = μ = 1, resonant ω1 = 1/√2.
    pub fn baseline(g: f64) -> Result<Self, ModelError> {
        Self::new(1.0, g, 1.0, 1.0, None)
    }

    pub fn with_omega1(self, omega1: f64) -> Result<Self, ModelError> {
        Self::new(self.omega0, self.g, self.gamma, self.mu, Some(omega1))
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn omega1(&self) -> f64 {
        self.omega1
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Tilde rotation angle θ = arctan(γ)/2, in (0, π/4).
    pub fn theta(&self) -> f64 {
        self.gamma.atan() / 2.0
    }

    /// Closed-form eigenvalues (λ1, λ2, λ3, λ4) of the modulator–charger Hamiltonian.
    pub fn lambdas(&self) -> [f64; 4] {
        let s = (1.0 + self.gamma * self.gamma).sqrt();
        let l4 = 2.0 * self.mu * self.omega0 / s;
        let l3 = 2.0 * self.mu * self.gamma * self.omega0 / s;
        [-l4, -l3, l3, l4]
    }

    pub fn lambda3(&self) -> f64 {
        self.lambdas()[2]
    }

    pub fn lambda4(&self) -> f64 {
        self.lambdas()[3]
    }

    /// `μγω0/√(1+γ²)`: battery frequency resonant with the frozen-modulator charger.
    pub fn resonant_omega1(&self) -> f64 {
        self.lambda3() / 2.0
    }

    /// Battery level splitting 2ω1, the largest energy the battery can hold.
    pub fn battery_capacity(&self) -> f64 {
        2.0 * self.omega1
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Tensor slot of each qubit (modulator ⊗ charger ⊗ battery).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    Modulator,
    Charger,
    Battery,
}

impl Qubit {
    pub fn slot(self) -> usize {
        match self {
            Qubit::Modulator => 0,
            Qubit::Charger => 1,
            Qubit::Battery => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    /// σ+ = |1⟩⟨0|
    Plus,
    /// σ− = |0⟩⟨1|
    Minus,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli(axis: PauliAxis) -> ComplexMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let entries = match axis {
        PauliAxis::X => vec![z, one, one, z],
        PauliAxis::Y => vec![z, c(0.0, -1.0), c(0.0, 1.0), z],
        PauliAxis::Z => vec![one, z, z, -one],
        PauliAxis::Plus => vec![z, z, one, z],
        PauliAxis::Minus => vec![z, one, z, z],
    };
    ComplexMatrix::from_row_major(entries)
}

/// Places a single-qubit operator on `slot` of an `n`-qubit register.
pub fn embed_slot(op: &ComplexMatrix, slot: usize, n: usize) -> Result<ComplexMatrix, ModelError> {
    if slot >= n {
        return Err(ModelError::IndexOutOfRange { slot, n });
    }
    assert_eq!(op.dim(), 2, "embed expects a single-qubit operator");
    let id = ComplexMatrix::identity(2);
    let mut out = if slot == 0 { op.clone() } else { id.clone() };
    for k in 1..n {
        out = kron(&out, if k == slot { op } else { &id });
    }
    Ok(out)
}

pub fn embed(op: &ComplexMatrix, q: Qubit, n: usize) -> Result<ComplexMatrix, ModelError> {
    embed_slot(op, q.slot(), n)
}

/// Modulator–charger Hamiltonian on m ⊗ c:
/// `−μω0[(1−γ²)/(1+γ²)·σx^m + 2γ/(1+γ²)·σz^m] + μω0·σx^m σx^c`.
pub fn build_hmc(p: &ModelParams) -> ComplexMatrix {
    let g2 = p.gamma * p.gamma;
    let a = (1.0 - g2) / (1.0 + g2);
    let b = 2.0 * p.gamma / (1.0 + g2);
    let id = ComplexMatrix::identity(2);
    let sx = pauli(PauliAxis::X);
    let sz = pauli(PauliAxis::Z);
    let local = &sx.scale_real(a) + &sz.scale_real(b);
    let local = kron(&local, &id).scale_real(-p.mu * p.omega0);
    let coupling = kron(&sx, &sx).scale_real(p.mu * p.omega0);
    &local + &coupling
}

/// Full three-qubit Hamiltonian
/// `H^mc ⊗ 1 + 2g(σ+^c σ−^b + σ−^c σ+^b) − ω1 σz^b`.
pub fn build_hmcb(p: &ModelParams) -> ComplexMatrix {
    let hmc = kron(&build_hmc(p), &ComplexMatrix::identity(2));
    let exchange = {
        let raise_c = embed(&pauli(PauliAxis::Plus), Qubit::Charger, 3).expect("slot 1 < 3");
        let lower_c = embed(&pauli(PauliAxis::Minus), Qubit::Charger, 3).expect("slot 1 < 3");
        let raise_b = embed(&pauli(PauliAxis::Plus), Qubit::Battery, 3).expect("slot 2 < 3");
        let lower_b = embed(&pauli(PauliAxis::Minus), Qubit::Battery, 3).expect("slot 2 < 3");
        let forward = &raise_c * &lower_b;
        let backward = &lower_c * &raise_b;
        (&forward + &backward).scale_real(2.0 * p.g)
    };
    let zb = embed(&pauli(PauliAxis::Z), Qubit::Battery, 3)
        .expect("slot 2 < 3")
        .scale_real(-p.omega1);
    &(&hmc + &exchange) + &zb
}

/// Battery Hamiltonian `ω1(1 − σz)` = diag(0, 2ω1).
pub fn build_hb(p: &ModelParams) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[0.0, 2.0 * p.omega1])
}

/// `exp(iσyθ)` = [[cosθ, sinθ], [−sinθ, cosθ]].
pub fn tilde_rotation(p: &ModelParams) -> ComplexMatrix {
    let (s, co) = p.theta().sin_cos();
    ComplexMatrix::from_row_major(vec![c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0)])
}

pub fn tilde_state(psi: &StateVector, p: &ModelParams) -> StateVector {
    assert_eq!(psi.dim(), 2, "tilde rotation acts on a single qubit");
    let amps = tilde_rotation(p).mul_slice(psi.amplitudes());
    StateVector::normalized(amps).expect("rotation preserves norm")
}

pub fn ket0() -> StateVector {
    StateVector::basis(2, 0)
}

pub fn ket1() -> StateVector {
    StateVector::basis(2, 1)
}

/// (|0⟩ + |1⟩)/√2
pub fn ket_plus() -> StateVector {
    StateVector::new(vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).expect("unit norm")
}

/// (|0⟩ − |1⟩)/√2
pub fn ket_minus() -> StateVector {
    StateVector::new(vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]).expect("unit norm")
}

/// Closed-form eigenbasis of `H^mc`, ordered (v1, v2, v3, v4):
/// |+̃⟩|−⟩, |0̃⟩|+⟩, |1̃⟩|+⟩, |−̃⟩|−⟩.
pub fn eigenbasis_mc(p: &ModelParams) -> [(StateVector, f64); 4] {
    let l = p.lambdas();
    let t = |s: StateVector| tilde_state(&s, p);
    [
        (t(ket_plus()).kron(&ket_minus()), l[0]),
        (t(ket0()).kron(&ket_plus()), l[1]),
        (t(ket1()).kron(&ket_plus()), l[2]),
        (t(ket_minus()).kron(&ket_minus()), l[3]),
    ]
}

/// Super-Zeno pulse `|0̃⟩⟨0̃| − |1̃⟩⟨1̃|` on the modulator of an `n`-qubit register.
pub fn pulse_operator(p: &ModelParams, n: usize) -> Result<ComplexMatrix, ModelError> {
    if !(1..=3).contains(&n) {
        return Err(ModelError::IndexOutOfRange { slot: 0, n });
    }
    let r = tilde_rotation(p);
    let local = &(&r * &pauli(PauliAxis::Z)) * &r.adjoint();
    embed(&local, Qubit::Modulator, n)
}

/// `|v3⟩ ⊗ |0⟩`: charger fully excited, battery empty.
pub fn initial_state(p: &ModelParams) -> StateVector {
    let [_, _, (v3, _), _] = eigenbasis_mc(p);
    v3.kron(&ket0())
}

/// `⟨φ|^m H |φ⟩^m` for a two-qubit operator `h` on m ⊗ c: an operator on the charger.
pub fn modulator_matrix_element(h: &ComplexMatrix, phi: &StateVector) -> ComplexMatrix {
    assert_eq!(h.dim(), 4);
    assert_eq!(phi.dim(), 2);
    let a = phi.amplitudes();
    ComplexMatrix::from_fn(2, |k, l| {
        let mut acc = c(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += a[i].conj() * h[(2 * i + k, 2 * j + l)] * a[j];
            }
        }
        acc
    })
}

/// Effective charger Hamiltonian under a frozen modulator: the traceless part
/// of `⟨1̃|H^mc|1̃⟩`. The dropped part is the constant shift `(λ3/2)·1`.
pub fn effective_charger_h(p: &ModelParams) -> ComplexMatrix {
    let raw = modulator_matrix_element(&build_hmc(p), &tilde_state(&ket1(), p));
    let shift = raw.trace() * 0.5;
    &raw - &ComplexMatrix::identity(2).scale(shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{apply, expectation, herm_eig};
    use std::f64::consts::{PI, SQRT_2};

    fn base() -> ModelParams {
        ModelParams::baseline(0.01).unwrap()
    }

    #[test]
    fn pauli_conventions() {
        let z = pauli(PauliAxis::Z);
        assert_eq!(z, ComplexMatrix::from_real_diagonal(&[1.0, -1.0]));
        let raised = apply(&pauli(PauliAxis::X), &ket0()).unwrap();
        assert_eq!(raised, ket1());
        let raised = pauli(PauliAxis::Plus).mul_slice(ket0().amplitudes());
        assert_eq!(raised, ket1().amplitudes().to_vec());
        let x = pauli(PauliAxis::X);
        assert_eq!(&x * &x, ComplexMatrix::identity(2));
        // σy = i|1⟩⟨0| − i|0⟩⟨1|
        let y = pauli(PauliAxis::Y);
        assert_eq!(y[(1, 0)], c(0.0, 1.0));
        assert_eq!(y[(0, 1)], c(0.0, -1.0));
    }

    #[test]
    fn embed_slots() {
        let z = pauli(PauliAxis::Z);
        let id = ComplexMatrix::identity(2);
        assert_eq!(embed(&z, Qubit::Modulator, 2).unwrap(), kron(&z, &id));
        let x = embed(&pauli(PauliAxis::X), Qubit::Charger, 3).unwrap();
        assert_eq!(x[(0, 2)], c(1.0, 0.0));
        assert_eq!(embed(&id, Qubit::Battery, 3).unwrap(), ComplexMatrix::identity(8));
        assert!(matches!(
            embed(&z, Qubit::Battery, 2),
            Err(ModelError::IndexOutOfRange { slot: 2, n: 2 })
        ));
    }

    #[test]
    fn hmc_reduces_to_base_form() {
        let p = base();
        let id = ComplexMatrix::identity(2);
        let expected = &kron(&pauli(PauliAxis::Z), &id).scale_real(-1.0)
            + &kron(&pauli(PauliAxis::X), &pauli(PauliAxis::X));
        assert_eq!(build_hmc(&p), expected);
    }

    #[test]
    fn hmc_spectrum_closed_form() {
        let cases = [(1.0, 1.0, 2.0f64.sqrt()), (0.7, 1.0, 1.638_463_841_038_081), (1.0, 2.0, 2.0 * SQRT_2)];
        for (gamma, mu, l4) in cases {
            let p = ModelParams::new(1.0, 0.01, gamma, mu, None).unwrap();
            let e = herm_eig(&build_hmc(&p)).unwrap();
            assert!((e.values[3] - l4).abs() < 1e-10, "{gamma} {mu}: {:?}", e.values);
            for (got, want) in e.values.iter().zip(p.lambdas()) {
                assert!((got - want).abs() < 1e-10);
            }
        }
        let e = herm_eig(&build_hmc(&base())).unwrap();
        for (got, want) in e.values.iter().zip([-SQRT_2, -SQRT_2, SQRT_2, SQRT_2]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn hmcb_matrix_elements() {
        let p = base().with_omega1(0.3).unwrap();
        let h = build_hmcb(&p);
        assert!(h.is_hermitian(1e-12));
        let [(v1, _), _, (v3, l3), _] = eigenbasis_mc(&p);
        let v3_1 = v3.kron(&ket1());
        let diag = expectation(&v3_1, &h).unwrap();
        assert!((diag - (l3 + p.omega1())).abs() < 1e-12);

        let v1_1 = v1.kron(&ket1());
        let v3_0 = v3.kron(&ket0());
        let hv = h.mul_slice(v3_0.amplitudes());
        let elem: C64 = v1_1.amplitudes().iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
        assert!((elem.norm() - p.g() / SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn decoupled_hmcb_spectrum() {
        let p = ModelParams::new(1.0, 1e-300, 1.0, 1.0, Some(0.37)).unwrap();
        let e = herm_eig(&build_hmcb(&p)).unwrap();
        let mut expected: Vec<f64> = p
            .lambdas()
            .iter()
            .flat_map(|l| [l + 0.37, l - 0.37])
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn battery_hamiltonian() {
        let p = base();
        assert!(build_hb(&p).max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.0, SQRT_2])) < 1e-15);
        let q = base().with_omega1(1.0).unwrap();
        assert_eq!(build_hb(&q), ComplexMatrix::from_real_diagonal(&[0.0, 2.0]));
        assert_eq!(expectation(&ket0(), &build_hb(&q)).unwrap(), 0.0);
        assert!((expectation(&ket1(), &build_hb(&q)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tilde_states() {
        let p = base();
        assert!((p.theta() - PI / 8.0).abs() < 1e-15);
        let z = tilde_state(&ket0(), &p);
        let o = tilde_state(&ket1(), &p);
        assert!((z.inner(&z).re - 1.0).abs() < 1e-15);
        assert!(z.inner(&o).norm() < 1e-15);
        // exp(iσyπ/8)|1⟩ = sin(π/8)|0⟩ + cos(π/8)|1⟩ with σy = i|1⟩⟨0| − i|0⟩⟨1|.
        let (s, co) = (PI / 8.0).sin_cos();
        assert!(o.distance_to(&[c(s, 0.0), c(co, 0.0)]) < 1e-15);

        let tiny = ModelParams::new(1.0, 0.01, 1e-12, 1.0, None).unwrap();
        assert!(tilde_state(&ket1(), &tiny).distance_to(ket1().amplitudes()) < 1e-11);
    }

    #[test]
    fn eigenbasis_is_orthonormal_and_exact() {
        for (gamma, mu) in [(1.0, 1.0), (0.7, 1.0), (1.0, 2.0), (2.5, 0.3)] {
            let p = ModelParams::new(1.0, 0.01, gamma, mu, None).unwrap();
            let h = build_hmc(&p);
            let basis = eigenbasis_mc(&p);
            for (i, (vi, li)) in basis.iter().enumerate() {
                let hv = h.mul_slice(vi.amplitudes());
                let residual = vi.distance_to(&hv.iter().map(|z| z / *li).collect::<Vec<_>>()) * li.abs();
                assert!(residual < 1e-10, "v{} residual {residual}", i + 1);
                for (j, (vj, _)) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vi.inner(vj).norm() - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pulse_properties() {
        let p = base();
        let pulse = pulse_operator(&p, 1).unwrap();
        let z = tilde_state(&ket0(), &p);
        let o = tilde_state(&ket1(), &p);
        assert!(z.distance_to(&pulse.mul_slice(z.amplitudes())) < 1e-15);
        let po = pulse.mul_slice(o.amplitudes());
        assert!(o.distance_to(&po.iter().map(|x| -x).collect::<Vec<_>>()) < 1e-15);
        for n in [2, 3] {
            let pn = pulse_operator(&p, n).unwrap();
            assert!(pn.is_hermitian(1e-15));
            assert!((&pn * &pn).max_abs_diff(&ComplexMatrix::identity(1 << n)) < 1e-15);
        }
    }

    #[test]
    fn initial_state_energies() {
        let p = base();
        let psi = initial_state(&p);
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let ec = kron(&build_hmc(&p), &ComplexMatrix::identity(2));
        let eb = embed(&build_hb(&p), Qubit::Battery, 3).unwrap();
        assert!((expectation(&psi, &ec).unwrap() - SQRT_2).abs() < 1e-12);
        assert!(expectation(&psi, &eb).unwrap().abs() < 1e-15);
    }

    #[test]
    fn effective_charger_hamiltonian() {
        let p = base();
        let h = effective_charger_h(&p);
        let want = pauli(PauliAxis::X).scale_real(FRAC_1_SQRT_2);
        assert!(h.max_abs_diff(&want) < 1e-15);
        let e = herm_eig(&h).unwrap();
        assert!((e.values[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((e.values[1] - e.values[0] - SQRT_2).abs() < 1e-15);

        // The raw matrix element carries the constant shift λ3/2.
        let raw = modulator_matrix_element(&build_hmc(&p), &tilde_state(&ket1(), &p));
        let shifted = &want + &ComplexMatrix::identity(2).scale_real(FRAC_1_SQRT_2);
        assert!(raw.max_abs_diff(&shifted) < 1e-15);
    }

    #[test]
    fn resonant_default_and_validation() {
        let p = ModelParams::new(1.0, 0.01, 0.7, 1.0, None).unwrap();
        assert!((p.omega1() - 0.7 / 1.49f64.sqrt()).abs() < 1e-15);
        assert!(ModelParams::new(1.0, 0.01, 0.0, 1.0, None).is_err());
        assert!(ModelParams::new(1.0, 0.01, -1.0, 1.0, None).is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.0, 1.0, None).is_err());
        assert!(ModelParams::new(0.0, 0.01, 1.0, 1.0, None).is_err());
        assert!(ModelParams::new(1.0, 0.01, 1.0, -2.0, None).is_err());
        assert!(ModelParams::new(1.0, 0.01, 1.0, 1.0, Some(f64::NAN)).is_err());
    }
}
