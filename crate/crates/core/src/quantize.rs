//! Truncated bosonic and qubit operators.
//!
//! Basis ordering is fixed across the crate: qubit slots come first with
//! slot 0 outermost, the resonator is the last (fastest) index. Each qubit
//! uses the order `(|e>, |g>)` so that `sigma_z |e> = +|e>`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::{kron, ComplexMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter(format!(
                "n_max must be at least 1, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeSpace {
    n_qubits: usize,
    fock: FockSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Qubit(usize),
    Resonator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitState {
    Excited,
    Ground,
}

impl QubitState {
    fn index(self) -> usize {
        match self {
            QubitState::Excited => 0,
            QubitState::Ground => 1,
        }
    }
}

impl CompositeSpace {
    pub fn new(n_qubits: usize, fock: FockSpace) -> Result<Self> {
        if n_qubits < 1 {
            return Err(Error::InvalidParameter("at least one qubit is required".into()));
        }
        Ok(Self { n_qubits, fock })
    }

    pub fn single(n_max: usize) -> Result<Self> {
        Self::new(1, FockSpace::new(n_max)?)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn fock(&self) -> FockSpace {
        self.fock
    }

    pub fn dim(&self) -> usize {
        (1 << self.n_qubits) * self.fock.dim()
    }

    pub fn slot_dim(&self, slot: Slot) -> Result<usize> {
        match slot {
            Slot::Qubit(j) if j < self.n_qubits => Ok(2),
            Slot::Qubit(j) => Err(Error::IndexOutOfRange {
                index: j,
                limit: self.n_qubits,
            }),
            Slot::Resonator => Ok(self.fock.dim()),
        }
    }

    /// Basis index of `|q_0, q_1, ..., n>`.
    pub fn index(&self, qubits: &[QubitState], photons: usize) -> Result<usize> {
        if qubits.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: qubits.len(),
            });
        }
        if photons > self.fock.n_max {
            return Err(Error::IndexOutOfRange {
                index: photons,
                limit: self.fock.n_max + 1,
            });
        }
        let q = qubits.iter().fold(0, |acc, s| 2 * acc + s.index());
        Ok(q * self.fock.dim() + photons)
    }

    pub fn basis_vector(&self, qubits: &[QubitState], photons: usize) -> Result<Vec<C64>> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[self.index(qubits, photons)?] = C64::new(1.0, 0.0);
        Ok(v)
    }
}

pub fn annihilation(space: FockSpace) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(space.dim());
    for m in 0..space.n_max {
        a[(m, m + 1)] = C64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(space: FockSpace) -> ComplexMatrix {
    annihilation(space).adjoint()
}

pub fn number(space: FockSpace) -> ComplexMatrix {
    ComplexMatrix::diagonal(&(0..space.dim()).map(|n| n as f64).collect::<Vec<_>>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

pub fn pauli(which: Pauli) -> ComplexMatrix {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = match which {
        Pauli::X => [z, one, one, z],
        Pauli::Y => [z, -i, i, z],
        Pauli::Z => [one, z, z, -one],
        // sigma_+ |g> = |e> with |e> first
        Pauli::Plus => [z, one, z, z],
        Pauli::Minus => [z, z, one, z],
    };
    ComplexMatrix::from_row_major(2, entries.to_vec()).expect("2x2 Pauli")
}

/// Places `op` on `slot` with identities elsewhere.
pub fn embed(op: &ComplexMatrix, slot: Slot, space: CompositeSpace) -> Result<ComplexMatrix> {
    let expected = space.slot_dim(slot)?;
    if op.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: op.dim(),
        });
    }
    let id2 = ComplexMatrix::identity(2);
    let mut out: Option<ComplexMatrix> = None;
    for j in 0..space.n_qubits {
        let factor = if slot == Slot::Qubit(j) { op } else { &id2 };
        out = Some(match out {
            None => factor.clone(),
            Some(acc) => kron(&acc, factor),
        });
    }
    let res_factor = if slot == Slot::Resonator {
        op.clone()
    } else {
        ComplexMatrix::identity(space.fock.dim())
    };
    Ok(kron(&out.expect("n_qubits >= 1"), &res_factor))
}

/// `X_pm = a sigma_+ pm a^dagger sigma_-` and `Y_pm = a sigma_- pm a^dagger sigma_+`
/// for one qubit of a composite space.
#[derive(Clone, Debug)]
pub struct RotatingOps {
    pub x_plus: ComplexMatrix,
    pub x_minus: ComplexMatrix,
    pub y_plus: ComplexMatrix,
    pub y_minus: ComplexMatrix,
}

pub fn rotating_ops(space: CompositeSpace, qubit: usize) -> Result<RotatingOps> {
    let a = embed(&annihilation(space.fock), Slot::Resonator, space)?;
    let ad = a.adjoint();
    let sp = embed(&pauli(Pauli::Plus), Slot::Qubit(qubit), space)?;
    let sm = embed(&pauli(Pauli::Minus), Slot::Qubit(qubit), space)?;
    let a_sp = &a * &sp;
    let ad_sm = &ad * &sm;
    let a_sm = &a * &sm;
    let ad_sp = &ad * &sp;
    Ok(RotatingOps {
        x_plus: &a_sp + &ad_sm,
        x_minus: &a_sp - &ad_sm,
        y_plus: &a_sm + &ad_sp,
        y_minus: &a_sm - &ad_sp,
    })
}
