//! Hamiltonian builders for the Jaynes–Cummings, Rabi and time-averaged
//! (IRWA) models.
//!
//! All three share one form, `H0 + g_r X_+ + g_ar Y_+`; they differ only in
//! how the coupling pair is chosen.

use std::fmt;
use std::str::FromStr;

use crate::averaging::{averaged_couplings, CouplingPair, CutoffPolicy, SystemParams};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianOperator};
use crate::quantize::{annihilation, embed, number, pauli, rotating_ops, CompositeSpace, Pauli, Slot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Co-rotating terms only, `g_r = g`, `g_ar = 0`.
    JaynesCummings,
    /// Both term families at full strength.
    Rabi,
    /// Both term families weighted by the averaging kernel.
    Irwa,
}

impl ModelKind {
    pub fn couplings(&self, p: &SystemParams, policy: &CutoffPolicy) -> Result<CouplingPair> {
        match self {
            ModelKind::JaynesCummings => Ok(CouplingPair::new(p.g, 0.0)),
            ModelKind::Rabi => Ok(CouplingPair::new(p.g, p.g)),
            ModelKind::Irwa => averaged_couplings(p, policy),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::JaynesCummings => "jc",
            ModelKind::Rabi => "rabi",
            ModelKind::Irwa => "irwa",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jc" | "jcm" => Ok(ModelKind::JaynesCummings),
            "rabi" | "qrm" => Ok(ModelKind::Rabi),
            "irwa" => Ok(ModelKind::Irwa),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// `(omega_a/2) sigma_z + omega_r a^dagger a + g_r X_+ + g_ar Y_+` for one qubit.
pub fn hamiltonian_with_couplings(
    p: &SystemParams,
    pair: CouplingPair,
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    if space.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: space.n_qubits(),
        });
    }
    multiqubit_with_couplings(p.omega_r, &[(p.omega_a, pair)], space)
}

pub fn build_hamiltonian(
    kind: ModelKind,
    p: &SystemParams,
    policy: &CutoffPolicy,
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    hamiltonian_with_couplings(p, kind.couplings(p, policy)?, space)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitParams {
    pub omega_a: f64,
    pub g: f64,
}

/// Several qubits sharing one resonator mode.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiQubitParams {
    pub omega_r: f64,
    pub qubits: Vec<QubitParams>,
    pub policy: CutoffPolicy,
}

impl MultiQubitParams {
    pub fn new(omega_r: f64, qubits: Vec<QubitParams>, policy: CutoffPolicy) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidParameter("no qubits given".into()));
        }
        for q in &qubits {
            SystemParams::new(omega_r, q.omega_a, q.g)?;
        }
        Ok(Self {
            omega_r,
            qubits,
            policy,
        })
    }

    /// `n` copies of the same qubit.
    pub fn identical(omega_r: f64, omega_a: f64, g: f64, n: usize, policy: CutoffPolicy) -> Result<Self> {
        Self::new(omega_r, vec![QubitParams { omega_a, g }; n], policy)
    }

    pub fn qubit(&self, j: usize) -> Result<SystemParams> {
        let q = self.qubits.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            limit: self.qubits.len(),
        })?;
        SystemParams::new(self.omega_r, q.omega_a, q.g)
    }

    pub fn couplings(&self, kind: ModelKind) -> Result<Vec<CouplingPair>> {
        (0..self.qubits.len())
            .map(|j| kind.couplings(&self.qubit(j)?, &self.policy))
            .collect()
    }
}

pub fn build_multiqubit(kind: ModelKind, mp: &MultiQubitParams, space: CompositeSpace) -> Result<HermitianOperator> {
    if space.n_qubits() != mp.qubits.len() {
        return Err(Error::DimensionMismatch {
            expected: mp.qubits.len(),
            found: space.n_qubits(),
        });
    }
    let pairs = mp.couplings(kind)?;
    let qubits: Vec<(f64, CouplingPair)> = mp.qubits.iter().zip(pairs).map(|(q, pair)| (q.omega_a, pair)).collect();
    multiqubit_with_couplings(mp.omega_r, &qubits, space)
}

fn multiqubit_with_couplings(
    omega_r: f64,
    qubits: &[(f64, CouplingPair)],
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    let mut h = embed(&number(space.fock()), Slot::Resonator, space)?.scale_real(omega_r);
    for (j, (omega_a, pair)) in qubits.iter().enumerate() {
        let sz = embed(&pauli(Pauli::Z), Slot::Qubit(j), space)?;
        h += &sz.scale_real(0.5 * omega_a);
        let ops = rotating_ops(space, j)?;
        h += &ops.x_plus.scale_real(pair.g_r);
        h += &ops.y_plus.scale_real(pair.g_ar);
    }
    HermitianOperator::new(h)
}

/// `a^dagger a + sum_j sigma_+^j sigma_-^j`.
pub fn excitation_number(space: CompositeSpace) -> Result<ComplexMatrix> {
    let mut n = embed(&number(space.fock()), Slot::Resonator, space)?;
    let proj_e = &pauli(Pauli::Plus) * &pauli(Pauli::Minus);
    for j in 0..space.n_qubits() {
        n += &embed(&proj_e, Slot::Qubit(j), space)?;
    }
    Ok(n)
}

/// `prod_j sigma_z^j exp(i pi a^dagger a)`, the Z2 symmetry of all three models.
pub fn parity(space: CompositeSpace) -> Result<ComplexMatrix> {
    let signs: Vec<f64> = (0..space.fock().dim())
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let mut p = embed(&ComplexMatrix::diagonal(&signs), Slot::Resonator, space)?;
    for j in 0..space.n_qubits() {
        p = &p * &embed(&pauli(Pauli::Z), Slot::Qubit(j), space)?;
    }
    Ok(p)
}

/// `a + a^dagger` embedded in the composite space.
pub fn quadrature(space: CompositeSpace) -> Result<ComplexMatrix> {
    let a = embed(&annihilation(space.fock()), Slot::Resonator, space)?;
    Ok(&a + &a.adjoint())
}
