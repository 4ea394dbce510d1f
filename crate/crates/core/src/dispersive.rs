//! Dispersive-regime effective models.
//!
//! Far from resonance the qubit and resonator exchange only virtual
//! excitations. Eliminating the interaction to second order in
//! `lambda = g_r / Delta` and `Lambda = g_ar / Sigma` leaves qubit-state
//! dependent resonator shifts and, for several qubits, a resonator-mediated
//! qubit–qubit exchange.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::averaging::{averaged_couplings, CouplingPair, CutoffPolicy, SystemParams};
use crate::error::{Error, Result};
use crate::models::{build_multiqubit, ModelKind, MultiQubitParams};
use crate::numerics::{eig_hermitian, inner, ComplexMatrix, HermitianOperator};
use crate::quantize::{annihilation, embed, number, pauli, CompositeSpace, FockSpace, Pauli, QubitState, Slot};
use crate::spectra::{track_labels, DressedLabel, TrackingOptions};

/// Default bound on `|lambda|` for the dispersive expansion to be trusted.
pub const DISPERSIVE_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DispersiveVariant {
    Rwa,
    NonRwa,
    Irwa,
}

impl DispersiveVariant {
    pub fn couplings(&self, p: &SystemParams, policy: &CutoffPolicy) -> Result<CouplingPair> {
        match self {
            DispersiveVariant::Rwa => Ok(CouplingPair::new(p.g, 0.0)),
            DispersiveVariant::NonRwa => Ok(CouplingPair::new(p.g, p.g)),
            DispersiveVariant::Irwa => averaged_couplings(p, policy),
        }
    }
}

impl fmt::Display for DispersiveVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DispersiveVariant::Rwa => "rwa",
            DispersiveVariant::NonRwa => "nonrwa",
            DispersiveVariant::Irwa => "irwa",
        })
    }
}

impl FromStr for DispersiveVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rwa" => Ok(DispersiveVariant::Rwa),
            "nonrwa" | "nrwa" | "non-rwa" => Ok(DispersiveVariant::NonRwa),
            "irwa" => Ok(DispersiveVariant::Irwa),
            _ => Err(Error::InvalidParameter(format!("unknown dispersive variant '{s}'"))),
        }
    }
}

fn checked_detuning(p: &SystemParams) -> Result<f64> {
    let d = p.detuning();
    if d == 0.0 {
        Err(Error::SingularDetuning)
    } else {
        Ok(d)
    }
}

/// Expansion parameters `lambda = g_r / Delta` and `Lambda = g_ar / Sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallParams {
    pub lambda: f64,
    pub big_lambda: f64,
}

impl SmallParams {
    pub fn new(p: &SystemParams, couplings: CouplingPair) -> Result<Self> {
        let d = checked_detuning(p)?;
        Ok(Self {
            lambda: couplings.g_r / d,
            big_lambda: couplings.g_ar / p.sum_frequency(),
        })
    }

    /// `|lambda| <= threshold`, up to rounding in `g / Delta`.
    pub fn is_dispersive(&self, threshold: f64) -> bool {
        self.lambda.abs() <= threshold * (1.0 + 1e-12)
    }
}

/// Qubit-conditioned resonator shifts of the three variants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveShifts {
    pub chi_rwa: f64,
    pub chi_nrwa: f64,
    pub chi_irwa: f64,
    pub lamb_shift: f64,
    pub ac_stark_per_photon: f64,
}

impl DispersiveShifts {
    pub fn new(p: &SystemParams, policy: &CutoffPolicy) -> Result<Self> {
        let d = checked_detuning(p)?;
        let s = p.sum_frequency();
        let g2 = p.g * p.g;
        let c = averaged_couplings(p, policy)?;
        Ok(Self {
            chi_rwa: chi(CouplingPair::new(p.g, 0.0), d, s),
            chi_nrwa: chi(CouplingPair::new(p.g, p.g), d, s),
            chi_irwa: chi(c, d, s),
            lamb_shift: g2 / d,
            ac_stark_per_photon: 2.0 * g2 / d,
        })
    }

    pub fn chi(&self, variant: DispersiveVariant) -> f64 {
        match variant {
            DispersiveVariant::Rwa => self.chi_rwa,
            DispersiveVariant::NonRwa => self.chi_nrwa,
            DispersiveVariant::Irwa => self.chi_irwa,
        }
    }
}

fn chi(c: CouplingPair, delta: f64, sigma: f64) -> f64 {
    c.g_r * c.g_r / delta + c.g_ar * c.g_ar / sigma
}

/// Resonator frequency shift for the qubit in `|e>` and in `|g>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonatorShift {
    pub excited: f64,
    pub ground: f64,
}

pub fn resonator_shift(p: &SystemParams, policy: &CutoffPolicy, variant: DispersiveVariant) -> Result<ResonatorShift> {
    let c = DispersiveShifts::new(p, policy)?.chi(variant);
    Ok(ResonatorShift { excited: c, ground: -c })
}

/// `(omega_a/2) sigma_z + omega_r a^dagger a + (chi/2) sigma_z (2 a^dagger a + 1)
///  + (g_r g_ar / 2)(1/Delta + 1/Sigma) sigma_z (a^dagger^2 + a^2)`.
pub fn effective_hamiltonian_1q(
    p: &SystemParams,
    policy: &CutoffPolicy,
    variant: DispersiveVariant,
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    if space.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: space.n_qubits(),
        });
    }
    let d = checked_detuning(p)?;
    let s = p.sum_frequency();
    let c = variant.couplings(p, policy)?;
    let a = embed(&annihilation(space.fock()), Slot::Resonator, space)?;
    let ad = a.adjoint();
    let n = &ad * &a;
    let sz = embed(&pauli(Pauli::Z), Slot::Qubit(0), space)?;
    let two_n_plus_one = &n.scale_real(2.0) + &ComplexMatrix::identity(space.dim());
    let squeeze = &(&a * &a) + &(&ad * &ad);

    let mut h = sz.scale_real(0.5 * p.omega_a);
    h += &n.scale_real(p.omega_r);
    h += &(&sz * &two_n_plus_one).scale_real(0.5 * chi(c, d, s));
    h += &(&sz * &squeeze).scale_real(0.5 * c.g_r * c.g_ar * (1.0 / d + 1.0 / s));
    HermitianOperator::new(h)
}

/// Shift from the tracked exact spectrum of the full model,
/// `[(E_{e,1} - E_{e,0}) - (E_{g,1} - E_{g,0})] / 2`.
pub fn exact_shift_oracle(p: &SystemParams, kind: ModelKind, policy: &CutoffPolicy) -> Result<f64> {
    exact_shift_oracle_with(p, kind, policy, &TrackingOptions::default())
}

pub fn exact_shift_oracle_with(
    p: &SystemParams,
    kind: ModelKind,
    policy: &CutoffPolicy,
    opts: &TrackingOptions,
) -> Result<f64> {
    let d = checked_detuning(p)?;
    if p.g == 0.0 {
        return Ok(0.0);
    }
    let e0 = DressedLabel::excited(0, d);
    let e1 = DressedLabel::excited(1, d);
    let g0 = DressedLabel::unexcited(0, d);
    let g1 = DressedLabel::unexcited(1, d);
    let labels = [e0, e1, g0, g1];
    let t = track_labels(&[*p], kind, policy, &labels, opts)?;
    if let Some(f) = t.flags.first() {
        return Err(Error::AmbiguousTracking(f.label));
    }
    let e = |l| t.energy(l, 0).expect("tracked");
    Ok(((e(e1) - e(e0)) - (e(g1) - e(g0))) / 2.0)
}

/// Dispersive couplings for a qubit pair `(j, k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveCouplings {
    /// `g^2 / Delta` of qubit `j`.
    pub j_r: f64,
    /// `g^2 (1/Delta + 1/Sigma)` of qubit `j`.
    pub j_nr0: f64,
    /// `g^2 (1/Delta - 1/Sigma)` of qubit `j`.
    pub j_nr1: f64,
    /// `g_r^2 / Delta + g_ar^2 / Sigma` of qubit `j`.
    pub j_ir0: f64,
    pub j_ir1: f64,
    pub j_ir2: f64,
}

impl EffectiveCouplings {
    pub fn for_pair(mp: &MultiQubitParams, j: usize, k: usize) -> Result<Self> {
        let pj = mp.qubit(j)?;
        let pk = mp.qubit(k)?;
        let (dj, dk) = (checked_detuning(&pj)?, checked_detuning(&pk)?);
        let (sj, sk) = (pj.sum_frequency(), pk.sum_frequency());
        let cj = averaged_couplings(&pj, &mp.policy)?;
        let ck = averaged_couplings(&pk, &mp.policy)?;
        let g2 = pj.g * pj.g;
        let (j_ir1, j_ir2) = pair_terms(cj, ck, (dj, sj), (dk, sk));
        Ok(Self {
            j_r: g2 / dj,
            j_nr0: g2 * (1.0 / dj + 1.0 / sj),
            j_nr1: g2 * (1.0 / dj - 1.0 / sj),
            j_ir0: chi(cj, dj, sj),
            j_ir1,
            j_ir2,
        })
    }
}

/// Flip-flop and double-flip strengths `(J_1, J_2)` for a pair.
fn pair_terms(cj: CouplingPair, ck: CouplingPair, (dj, sj): (f64, f64), (dk, sk): (f64, f64)) -> (f64, f64) {
    let j1 = cj.g_r * ck.g_r * (1.0 / dj + 1.0 / dk) - cj.g_ar * ck.g_ar * (1.0 / sj + 1.0 / sk);
    let j2 = cj.g_r * ck.g_ar * (1.0 / dj - 1.0 / sk) + cj.g_ar * ck.g_r * (1.0 / dk - 1.0 / sj);
    (j1, j2)
}

struct QubitTerms {
    omega_a: Vec<f64>,
    j0: Vec<f64>,
    /// `(j, k, J_1, J_2)` for `j < k`.
    pairs: Vec<(usize, usize, f64, f64)>,
}

fn qubit_terms(mp: &MultiQubitParams, variant: DispersiveVariant) -> Result<QubitTerms> {
    let n = mp.qubits.len();
    let mut ds = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for j in 0..n {
        let p = mp.qubit(j)?;
        ds.push((checked_detuning(&p)?, p.sum_frequency()));
        cs.push(variant.couplings(&p, &mp.policy)?);
    }
    let mut pairs = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            let (j1, j2) = pair_terms(cs[j], cs[k], ds[j], ds[k]);
            pairs.push((j, k, j1, j2));
        }
    }
    Ok(QubitTerms {
        omega_a: mp.qubits.iter().map(|q| q.omega_a).collect(),
        j0: cs.iter().zip(&ds).map(|(&c, &(d, s))| chi(c, d, s)).collect(),
        pairs,
    })
}

/// Dispersive Hamiltonian for any number of qubits:
/// `omega_r a^dagger a + sum_j [(omega_a^j/2) sigma_z^j + (J_0^j/2) sigma_z^j (2 a^dagger a + 1)]
///  + sum_{j<k} [(J_1/2)(s_-^j s_+^k + s_+^j s_-^k) + (J_2/2)(s_-^j s_-^k + s_+^j s_+^k)]`.
pub fn effective_hamiltonian_multi(
    mp: &MultiQubitParams,
    variant: DispersiveVariant,
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    if space.n_qubits() != mp.qubits.len() {
        return Err(Error::DimensionMismatch {
            expected: mp.qubits.len(),
            found: space.n_qubits(),
        });
    }
    let terms = qubit_terms(mp, variant)?;
    let n = embed(&number(space.fock()), Slot::Resonator, space)?;
    let two_n_plus_one = &n.scale_real(2.0) + &ComplexMatrix::identity(space.dim());
    let mut h = n.scale_real(mp.omega_r);
    let mut sz = Vec::new();
    let mut sp = Vec::new();
    let mut sm = Vec::new();
    for j in 0..mp.qubits.len() {
        sz.push(embed(&pauli(Pauli::Z), Slot::Qubit(j), space)?);
        sp.push(embed(&pauli(Pauli::Plus), Slot::Qubit(j), space)?);
        sm.push(embed(&pauli(Pauli::Minus), Slot::Qubit(j), space)?);
    }
    for ((z, &wa), &j0) in sz.iter().zip(&terms.omega_a).zip(&terms.j0) {
        h += &z.scale_real(0.5 * wa);
        h += &(z * &two_n_plus_one).scale_real(0.5 * j0);
    }
    for &(j, k, j1, j2) in &terms.pairs {
        let flip_flop = &(&sm[j] * &sp[k]) + &(&sp[j] * &sm[k]);
        let double_flip = &(&sm[j] * &sm[k]) + &(&sp[j] * &sp[k]);
        h += &flip_flop.scale_real(0.5 * j1);
        h += &double_flip.scale_real(0.5 * j2);
    }
    HermitianOperator::new(h)
}

pub fn effective_hamiltonian_2q(
    mp: &MultiQubitParams,
    variant: DispersiveVariant,
    space: CompositeSpace,
) -> Result<HermitianOperator> {
    if mp.qubits.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: mp.qubits.len(),
        });
    }
    effective_hamiltonian_multi(mp, variant, space)
}

/// Two-qubit evolution in the frame rotating at the qubit frequencies,
/// restricted to one photon-number sector. The block basis is
/// `|ee>, |eg>, |ge>, |gg>`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitEvolution {
    pub t: f64,
    pub photons: usize,
    pub block: ComplexMatrix,
    /// `J_0` of each qubit; the sector phase is `(J_0^j/2)(2n + 1) sigma_z^j`.
    pub j0: [f64; 2],
    pub j1: f64,
    pub j2: f64,
    /// Coefficient of `a^dagger a` in the sector phase.
    pub omega_r: f64,
}

/// Vacuum-sector evolution.
pub fn evolution_2q(mp: &MultiQubitParams, variant: DispersiveVariant, t: f64) -> Result<TwoQubitEvolution> {
    evolution_2q_in_sector(mp, variant, t, 0)
}

pub fn evolution_2q_in_sector(
    mp: &MultiQubitParams,
    variant: DispersiveVariant,
    t: f64,
    photons: usize,
) -> Result<TwoQubitEvolution> {
    if mp.qubits.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: mp.qubits.len(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    let space = CompositeSpace::new(2, FockSpace::new(photons.max(1))?)?;
    let mut h = effective_hamiltonian_2q(mp, variant, space)?.into_matrix();
    for (j, q) in mp.qubits.iter().enumerate() {
        h = &h - &embed(&pauli(Pauli::Z), Slot::Qubit(j), space)?.scale_real(0.5 * q.omega_a);
    }
    use QubitState::{Excited as E, Ground as G};
    let sector: Vec<usize> = [[E, E], [E, G], [G, E], [G, G]]
        .iter()
        .map(|qs| space.index(qs, photons))
        .collect::<Result<_>>()?;
    let block_h = HermitianOperator::new(h.submatrix(&sector))?;
    let block = crate::numerics::expm_i(&block_h, t)?;
    let terms = qubit_terms(mp, variant)?;
    Ok(TwoQubitEvolution {
        t,
        photons,
        block,
        j0: [terms.j0[0], terms.j0[1]],
        j1: terms.pairs[0].2,
        j2: terms.pairs[0].3,
        omega_r: mp.omega_r,
    })
}

/// The `sqrt(iSWAP)` gate in the `|ee>, |eg>, |ge>, |gg>` basis.
pub fn sqrt_iswap() -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::identity(4);
    m[(1, 1)] = C64::new(r, 0.0);
    m[(2, 2)] = C64::new(r, 0.0);
    m[(1, 2)] = C64::new(0.0, r);
    m[(2, 1)] = C64::new(0.0, r);
    m
}

/// Gate fidelity `(|Tr(T^dagger Z_L V Z_R)| / 4)^2` maximised over a global
/// phase and single-qubit z rotations applied before (`Z_R`) and after
/// (`Z_L`) the gate. The target may only couple `|eg>` with `|ge>`, as the
/// identity and `sqrt(iSWAP)` do.
pub fn local_z_fidelity(v: &ComplexMatrix, target: &ComplexMatrix) -> Result<f64> {
    if v.dim() != 4 || target.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: if v.dim() != 4 { v.dim() } else { target.dim() },
        });
    }
    let allowed = |i: usize, j: usize| i == j || (i == 1 && j == 2) || (i == 2 && j == 1);
    for i in 0..4 {
        for j in 0..4 {
            if !allowed(i, j) && target[(i, j)].norm() > 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "target couples basis states {i} and {j}; only |eg> <-> |ge> is supported"
                )));
            }
        }
    }
    // the z rotations leave three independent phases on the pairs
    // (ee, gg), (eg/eg, ge/ge) and (eg/ge, ge/eg)
    let a = |i: usize, j: usize| target[(i, j)].conj() * v[(i, j)];
    let pairs = [(a(0, 0), a(3, 3)), (a(1, 1), a(2, 2)), (a(1, 2), a(2, 1))];
    let f = |gamma: f64| {
        let ph = C64::from_polar(1.0, gamma);
        pairs
            .iter()
            .map(|&(x, y)| (ph * x + ph.conj() * y.conj()).norm())
            .sum::<f64>()
    };
    // f has period pi
    const GRID: usize = 720;
    let step = std::f64::consts::PI / GRID as f64;
    let mut best = (0.0, f(0.0));
    for i in 1..GRID {
        let x = i as f64 * step;
        let y = f(x);
        if y > best.1 {
            best = (x, y);
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let value = f(0.5 * (lo + hi)).max(best.1);
    Ok((value / 4.0).powi(2))
}

/// One point of a coupling sweep; `couplings` is `None` when the point is
/// singular, with the reason in `error`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub g: f64,
    pub couplings: Option<EffectiveCouplings>,
    pub error: Option<String>,
}

/// Evaluates the pair couplings of qubits 0 and 1 for each coupling in the
/// grid; `make` builds the parameters at a given `g`.
pub fn coupling_sweep<F>(g_grid: &[f64], make: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> Result<MultiQubitParams> + Sync,
{
    if g_grid.is_empty() {
        return Err(Error::InvalidParameter("empty coupling grid".into()));
    }
    Ok(g_grid
        .par_iter()
        .map(
            |&g| match make(g).and_then(|mp| EffectiveCouplings::for_pair(&mp, 0, 1)) {
                Ok(c) => SweepRow {
                    g,
                    couplings: Some(c),
                    error: None,
                },
                Err(e) => SweepRow {
                    g,
                    couplings: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect())
}

/// Smallest state fidelity between evolution under the full time-averaged
/// two-qubit Hamiltonian and under its dispersive approximation, starting
/// from `|e, g, 0>` and sampled at `points` times in `[0, t_max]`.
pub fn effective_model_fidelity(mp: &MultiQubitParams, n_max: usize, t_max: f64, points: usize) -> Result<f64> {
    if points == 0 {
        return Err(Error::InvalidParameter("need at least one time point".into()));
    }
    let space = CompositeSpace::new(mp.qubits.len(), FockSpace::new(n_max)?)?;
    let full = eig_hermitian(&build_multiqubit(ModelKind::Irwa, mp, space)?)?;
    let eff = eig_hermitian(&effective_hamiltonian_multi(mp, DispersiveVariant::Irwa, space)?)?;
    let mut start = vec![QubitState::Ground; mp.qubits.len()];
    start[0] = QubitState::Excited;
    let psi0 = space.basis_vector(&start, 0)?;
    let coeffs = |es: &crate::numerics::EigenSystem| -> Vec<C64> {
        (0..es.dim()).map(|k| inner(&es.vector(k), &psi0)).collect()
    };
    let (cf, ce) = (coeffs(&full), coeffs(&eff));
    let evolve = |es: &crate::numerics::EigenSystem, c: &[C64], t: f64| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); es.dim()];
        for (k, &ck) in c.iter().enumerate() {
            let w = ck * C64::from_polar(1.0, -es.values[k] * t);
            for (i, o) in out.iter_mut().enumerate() {
                *o += es.vectors[(i, k)] * w;
            }
        }
        out
    };
    let denom = if points > 1 { (points - 1) as f64 } else { 1.0 };
    let worst = (0..points)
        .into_par_iter()
        .map(|i| {
            let t = t_max * i as f64 / denom;
            inner(&evolve(&full, &cf, t), &evolve(&eff, &ce, t)).norm_sqr()
        })
        .reduce(|| 1.0, f64::min);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::DetuningPolicy;
    use crate::spectra::jc_closed_form;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pair_params(g: f64, delta: f64, policy: CutoffPolicy) -> MultiQubitParams {
        MultiQubitParams::identical(1.0, 1.0 + delta, g, 2, policy).unwrap()
    }

    #[test]
    fn single_qubit_shifts() {
        let p = SystemParams::from_detuning(1.0, 0.5, 0.05).unwrap();
        let policy = CutoffPolicy::FactorOfDetuning(10.0);
        let rwa = resonator_shift(&p, &policy, DispersiveVariant::Rwa).unwrap();
        let nrwa = resonator_shift(&p, &policy, DispersiveVariant::NonRwa).unwrap();
        assert!((rwa.excited - 0.005).abs() < 1e-15 && (rwa.ground + 0.005).abs() < 1e-15);
        assert!((nrwa.excited - 0.006).abs() < 1e-15 && (nrwa.ground + 0.006).abs() < 1e-15);
    }

    #[test]
    fn irwa_shift_value() {
        let p = SystemParams::from_detuning(1.0, 1.0, 0.1).unwrap();
        let policy = CutoffPolicy::FactorOfDetuning(10.0);
        let s = DispersiveShifts::new(&p, &policy).unwrap();
        assert!((s.chi_rwa - 0.01).abs() < 1e-15);
        assert!((s.chi_irwa - 0.012_946_935_621_729_109).abs() < 1e-15);
        assert_eq!(s.lamb_shift, s.chi_rwa);
        assert_eq!(s.ac_stark_per_photon, 2.0 * s.chi_rwa);
    }

    #[test]
    fn null_qubit_cancellation() {
        for g in [0.01, 0.05, 0.1] {
            let p = SystemParams::new(1.0, 0.0, g).unwrap();
            let s = DispersiveShifts::new(&p, &CutoffPolicy::FactorOfDetuning(10.0)).unwrap();
            assert_eq!(s.chi_nrwa, 0.0);
            assert!((s.chi_rwa + g * g).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_detuning_is_singular() {
        let p = SystemParams::new(1.0, 1.0, 0.1).unwrap();
        let policy = CutoffPolicy::FactorOfG(10.0);
        assert!(matches!(
            DispersiveShifts::new(&p, &policy),
            Err(Error::SingularDetuning)
        ));
        assert!(matches!(
            effective_hamiltonian_1q(&p, &policy, DispersiveVariant::Irwa, CompositeSpace::single(4).unwrap()),
            Err(Error::SingularDetuning)
        ));
        assert!(matches!(
            exact_shift_oracle(&p, ModelKind::Rabi, &policy),
            Err(Error::SingularDetuning)
        ));
    }

    #[test]
    fn effective_hamiltonians_are_qnd() {
        let p = SystemParams::from_detuning(1.0, 0.3, 0.03).unwrap();
        let space = CompositeSpace::single(10).unwrap();
        let sz = embed(&pauli(Pauli::Z), Slot::Qubit(0), space).unwrap();
        for v in [
            DispersiveVariant::Rwa,
            DispersiveVariant::NonRwa,
            DispersiveVariant::Irwa,
        ] {
            let h = effective_hamiltonian_1q(&p, &CutoffPolicy::FactorOfDetuning(3.0), v, space).unwrap();
            assert_eq!(h.matrix().commutator(&sz).max_abs(), 0.0, "{v}");
        }
    }

    #[test]
    fn rwa_effective_hamiltonian_is_diagonal() {
        let p = SystemParams::from_detuning(1.0, 0.3, 0.03).unwrap();
        let h = effective_hamiltonian_1q(
            &p,
            &CutoffPolicy::FactorOfG(10.0),
            DispersiveVariant::Rwa,
            CompositeSpace::single(6).unwrap(),
        )
        .unwrap();
        let m = h.matrix();
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                if i != j {
                    assert_eq!(m[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn non_rwa_uses_quadrature_square() {
        let p = SystemParams::from_detuning(1.0, 0.4, 0.05).unwrap();
        let space = CompositeSpace::single(8).unwrap();
        let h = effective_hamiltonian_1q(&p, &CutoffPolicy::FactorOfG(10.0), DispersiveVariant::NonRwa, space).unwrap();
        let x = crate::models::quadrature(space).unwrap();
        let sz = embed(&pauli(Pauli::Z), Slot::Qubit(0), space).unwrap();
        let n = embed(&number(space.fock()), Slot::Resonator, space).unwrap();
        let chi = 0.05f64.powi(2) * (1.0 / 0.4 + 1.0 / 2.4);
        let mut expected = &sz.scale_real(0.7) + &n;
        expected += &(&sz * &(&x * &x)).scale_real(0.5 * chi);
        // (a + a^dagger)^2 truncated differs from 2n + 1 + a^2 + a^dagger^2 only in the top Fock level
        let top = space.index(&[QubitState::Excited], 8).unwrap();
        let top_g = space.index(&[QubitState::Ground], 8).unwrap();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                if [i, j].iter().any(|&k| k == top || k == top_g) {
                    continue;
                }
                assert!((h.matrix()[(i, j)] - expected[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_shift_matches_jc_closed_form() {
        let p = SystemParams::from_detuning(1.0, 0.2, 0.02).unwrap();
        let policy = CutoffPolicy::FactorOfDetuning(10.0);
        let chi = exact_shift_oracle(&p, ModelKind::JaynesCummings, &policy).unwrap();
        let d = 0.2;
        let labels = [
            DressedLabel::excited(0, d),
            DressedLabel::excited(1, d),
            DressedLabel::unexcited(1, d),
        ];
        let e = jc_closed_form(&p, p.g, &labels);
        let closed = ((e[&labels[1]] - e[&labels[0]]) - (e[&labels[2]] + 0.5 * p.omega_a)) / 2.0;
        assert!((chi - closed).abs() < 1e-12);
        assert!((chi - 0.001_961_524_227_071_631_5).abs() < 1e-12);
    }

    #[test]
    fn exact_shift_rabi_close_to_non_rwa() {
        let p = SystemParams::from_detuning(1.0, 0.2, 0.02).unwrap();
        let chi = exact_shift_oracle(&p, ModelKind::Rabi, &CutoffPolicy::FactorOfDetuning(10.0)).unwrap();
        assert!((chi - 0.002_135_838_726_522_898).abs() < 1e-10);
    }

    #[test]
    fn exact_shift_vanishes_without_qubit() {
        let p = SystemParams::new(1.0, 0.0, 0.1).unwrap();
        let chi = exact_shift_oracle(&p, ModelKind::Rabi, &CutoffPolicy::FactorOfDetuning(10.0)).unwrap();
        assert!(chi.abs() < 1e-12, "{chi}");
    }

    #[test]
    fn pair_coupling_limits() {
        let g = 0.02;
        let d = 0.3;
        let rwa = qubit_terms(
            &pair_params(g, d, CutoffPolicy::FactorOfG(10.0)),
            DispersiveVariant::Rwa,
        )
        .unwrap();
        assert!((rwa.pairs[0].2 - 2.0 * g * g / d).abs() < 1e-17);
        assert_eq!(rwa.pairs[0].3, 0.0);
        let nr = qubit_terms(
            &pair_params(g, d, CutoffPolicy::FactorOfG(10.0)),
            DispersiveVariant::NonRwa,
        )
        .unwrap();
        let ising = 2.0 * g * g * (1.0 / d - 1.0 / 2.3);
        assert!((nr.pairs[0].2 - ising).abs() < 1e-17);
        assert!((nr.pairs[0].3 - ising).abs() < 1e-17);
    }

    #[test]
    fn fig5_small_coupling_values() {
        let mp = pair_params(0.01, 0.1, CutoffPolicy::FactorOfDetuning(10.0));
        let j = EffectiveCouplings::for_pair(&mp, 0, 1).unwrap();
        assert!((j.j_ir0 - 0.000_990_628_651_764_878_3).abs() < 1e-16);
        assert!((j.j_ir1 - 0.001_978_942_031_466_915_5).abs() < 1e-16);
        assert!((j.j_ir2 - 0.000_208_953_616_220_021_7).abs() < 1e-16);
        assert!((j.j_r - 0.001).abs() < 1e-16);
    }

    #[test]
    fn two_qubit_term_structure() {
        let space = CompositeSpace::new(2, FockSpace::new(2).unwrap()).unwrap();
        let mp = pair_params(0.02, 0.2, CutoffPolicy::FactorOfG(10.0));
        use QubitState::{Excited as E, Ground as G};
        let idx = |a, b| space.index(&[a, b], 0).unwrap();
        let rwa = effective_hamiltonian_2q(&mp, DispersiveVariant::Rwa, space).unwrap();
        assert!((rwa.matrix()[(idx(E, G), idx(G, E))].re - 0.02f64.powi(2) / 0.2).abs() < 1e-17);
        assert_eq!(rwa.matrix()[(idx(E, E), idx(G, G))], c(0.0, 0.0));
        let nr = effective_hamiltonian_2q(&mp, DispersiveVariant::NonRwa, space).unwrap();
        let k = 0.02f64.powi(2) * (1.0 / 0.2 - 1.0 / 2.2);
        assert!((nr.matrix()[(idx(E, G), idx(G, E))].re - k).abs() < 1e-17);
        assert!((nr.matrix()[(idx(E, E), idx(G, G))].re - k).abs() < 1e-17);
    }

    #[test]
    fn irwa_reduces_to_rwa_without_counter_rotating_part() {
        // a very narrow kernel suppresses g_ar to zero while g_r stays close to g
        let space = CompositeSpace::new(2, FockSpace::new(3).unwrap()).unwrap();
        let mp = pair_params(0.02, 0.2, CutoffPolicy::Fixed(0.05));
        let pj = mp.qubit(0).unwrap();
        let pair = averaged_couplings(&pj, &mp.policy).unwrap();
        assert_eq!(pair.g_ar, 0.0);
        let mut rwa_mp = mp.clone();
        for q in &mut rwa_mp.qubits {
            q.g = pair.g_r;
        }
        let irwa = effective_hamiltonian_2q(&mp, DispersiveVariant::Irwa, space).unwrap();
        let rwa = effective_hamiltonian_2q(&rwa_mp, DispersiveVariant::Rwa, space).unwrap();
        assert!(irwa.matrix().max_abs_diff(rwa.matrix()) < 1e-17);
    }

    #[test]
    fn sqrt_iswap_from_rwa_evolution() {
        let (g, d) = (0.02, 0.2);
        let mp = pair_params(g, d, CutoffPolicy::FactorOfDetuning(10.0));
        let t = std::f64::consts::PI * d / (4.0 * g * g);
        let u = evolution_2q(&mp, DispersiveVariant::Rwa, t).unwrap();
        assert!(u.block.unitarity_residual() < 1e-12);
        let f = local_z_fidelity(&u.block, &sqrt_iswap()).unwrap();
        assert!(f >= 1.0 - 1e-10, "{f}");
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // exp(-iHt) gives the conjugate phase on the exchange element
        assert!((u.block[(1, 2)] - c(0.0, -r)).norm() < 1e-12);
    }

    #[test]
    fn identity_at_time_zero() {
        let mp = pair_params(0.02, 0.2, CutoffPolicy::FactorOfDetuning(10.0));
        for v in [
            DispersiveVariant::Rwa,
            DispersiveVariant::NonRwa,
            DispersiveVariant::Irwa,
        ] {
            let u = evolution_2q(&mp, v, 0.0).unwrap();
            assert!(u.block.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
            assert!((local_z_fidelity(&u.block, &ComplexMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_rwa_opens_double_flip_channel() {
        let mp = pair_params(0.02, 0.2, CutoffPolicy::FactorOfDetuning(10.0));
        let u = evolution_2q(&mp, DispersiveVariant::NonRwa, 50.0).unwrap();
        assert!(u.block[(0, 3)].norm() > 1e-3);
        let r = evolution_2q(&mp, DispersiveVariant::Rwa, 50.0).unwrap();
        assert_eq!(r.block[(0, 3)].norm(), 0.0);
    }

    #[test]
    fn irwa_block_matches_closed_form_at_half_rate() {
        let mp = pair_params(0.03, 0.25, CutoffPolicy::FactorOfDetuning(4.0));
        let t = 137.0;
        let u = evolution_2q(&mp, DispersiveVariant::Irwa, t).unwrap();
        let (j0, j1, j2) = (u.j0[0], u.j1, u.j2);
        let a = 0.5 * j1 * t;
        assert!((u.block[(1, 1)] - c(a.cos(), 0.0)).norm() < 1e-12);
        assert!((u.block[(1, 2)] - c(0.0, -a.sin())).norm() < 1e-12);
        let w = (j0 * j0 + 0.25 * j2 * j2).sqrt();
        let (cw, sw) = ((w * t).cos(), (w * t).sin());
        assert!((u.block[(0, 0)] - c(cw, -sw * j0 / w)).norm() < 1e-12);
        assert!((u.block[(0, 3)] - c(0.0, -sw * 0.5 * j2 / w)).norm() < 1e-12);
    }

    #[test]
    fn photon_sector_phase() {
        let mp = pair_params(0.02, 0.2, CutoffPolicy::FactorOfDetuning(10.0));
        let t = 10.0;
        let u1 = evolution_2q_in_sector(&mp, DispersiveVariant::Rwa, t, 1).unwrap();
        // in the eg/ge block the sigma_z terms cancel, leaving the resonator phase
        let u0 = evolution_2q(&mp, DispersiveVariant::Rwa, t).unwrap();
        let phase = C64::from_polar(1.0, -t);
        assert!((u1.block[(1, 1)] - u0.block[(1, 1)] * phase).norm() < 1e-12);
    }

    #[test]
    fn fidelity_matches_brute_force_search() {
        let mp = pair_params(0.03, 0.25, CutoffPolicy::FactorOfDetuning(4.0));
        let u = evolution_2q(&mp, DispersiveVariant::Irwa, 300.0).unwrap();
        let target = sqrt_iswap();
        let fast = local_z_fidelity(&u.block, &target).unwrap();
        let n = 24;
        let angle = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let phases = |x: f64, y: f64| [0.5 * (x + y), 0.5 * (x - y), -0.5 * (x - y), -0.5 * (x + y)];
        let mut best: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                let left = phases(angle(i), angle(k));
                for l in 0..n {
                    for m in 0..n {
                        let right = phases(angle(l), angle(m));
                        let mut tr = c(0.0, 0.0);
                        for r in 0..4 {
                            for s in 0..4 {
                                tr +=
                                    target[(s, r)].conj() * C64::from_polar(1.0, left[s] + right[r]) * u.block[(s, r)];
                            }
                        }
                        best = best.max((tr.norm() / 4.0).powi(2));
                    }
                }
            }
        }
        assert!(fast >= best - 1e-12, "{fast} < {best}");
        assert!(fast - best < 0.02, "{fast} vs {best}");
    }

    #[test]
    fn fidelity_rejects_unsupported_target() {
        let mut t = ComplexMatrix::identity(4);
        t[(0, 3)] = c(0.1, 0.0);
        assert!(local_z_fidelity(&ComplexMatrix::identity(4), &t).is_err());
    }

    #[test]
    fn sweep_flags_singular_points() {
        let grid = [0.0, 0.01, 0.02];
        let rows = coupling_sweep(&grid, |g| {
            let p = DetuningPolicy::FactorOfG(10.0).params(1.0, g)?;
            MultiQubitParams::identical(1.0, p.omega_a, g, 2, CutoffPolicy::FactorOfDetuning(10.0))
        })
        .unwrap();
        assert!(rows[0].couplings.is_none() && rows[0].error.is_some());
        assert!(rows[1].couplings.is_some());
        assert_eq!(rows.iter().map(|r| r.g).collect::<Vec<_>>(), grid);
    }

    #[test]
    fn effective_model_tracks_full_model() {
        let (g, d) = (0.01, 0.2);
        let mp = pair_params(g, d, CutoffPolicy::FactorOfDetuning(10.0));
        let j1 = EffectiveCouplings::for_pair(&mp, 0, 1).unwrap().j_ir1;
        let f = effective_model_fidelity(&mp, 8, std::f64::consts::PI / (4.0 * j1), 60).unwrap();
        assert!(f >= 0.99, "{f}");
    }

    proptest! {
        #[test]
        fn shift_consistency(g in 0.0f64..0.1, delta in prop_oneof![-0.9f64..-0.05, 0.05f64..2.0]) {
            let p = SystemParams::from_detuning(1.0, delta, g).unwrap();
            let s = DispersiveShifts::new(&p, &CutoffPolicy::FactorOfDetuning(10.0)).unwrap();
            let d = p.detuning();
            let sum = p.sum_frequency();
            prop_assert_eq!(chi(CouplingPair::new(g, 0.0), d, sum), s.chi_rwa);
            prop_assert_eq!(chi(CouplingPair::new(g, g), d, sum), s.chi_nrwa);
            if delta > 0.0 {
                let k = averaged_couplings(&p, &CutoffPolicy::FactorOfDetuning(10.0)).unwrap().g_r / g.max(f64::MIN_POSITIVE);
                prop_assert!(s.chi_irwa >= k * k * s.chi_rwa * (1.0 - 1e-14));
                prop_assert!(s.chi_irwa <= s.chi_nrwa * (1.0 + 1e-14));
            }
        }

        #[test]
        fn effective_hamiltonians_hermitian(g in 0.0f64..0.1, delta in 0.05f64..1.0, factor in 0.5f64..20.0) {
            let mp = pair_params(g, delta, CutoffPolicy::FactorOfDetuning(factor));
            let space = CompositeSpace::new(2, FockSpace::new(3).unwrap()).unwrap();
            for v in [DispersiveVariant::Rwa, DispersiveVariant::NonRwa, DispersiveVariant::Irwa] {
                let h = effective_hamiltonian_2q(&mp, v, space).unwrap();
                prop_assert!(h.matrix().max_abs_diff(&h.matrix().adjoint()) <= 1e-12);
                let u = evolution_2q(&mp, v, 100.0).unwrap();
                prop_assert!(u.block.unitarity_residual() < 1e-10);
            }
        }

        #[test]
        fn j_ir2_symmetric(g1 in 0.001f64..0.1, g2 in 0.001f64..0.1, d1 in 0.05f64..1.0, d2 in 0.05f64..1.0) {
            let qs = vec![
                crate::models::QubitParams { omega_a: 1.0 + d1, g: g1 },
                crate::models::QubitParams { omega_a: 1.0 + d2, g: g2 },
            ];
            let mp = MultiQubitParams::new(1.0, qs.clone(), CutoffPolicy::Fixed(1.5)).unwrap();
            let swapped = MultiQubitParams::new(1.0, vec![qs[1], qs[0]], CutoffPolicy::Fixed(1.5)).unwrap();
            let a = EffectiveCouplings::for_pair(&mp, 0, 1).unwrap();
            let b = EffectiveCouplings::for_pair(&swapped, 0, 1).unwrap();
            prop_assert!((a.j_ir1 - b.j_ir1).abs() <= 1e-15 * a.j_ir1.abs().max(1e-300));
            prop_assert!((a.j_ir2 - b.j_ir2).abs() <= 1e-15 * a.j_ir2.abs().max(1e-300));
        }
    }
}
