//! Second-order corrections from the counter-rotating coupling on top of the
//! time-averaged JC eigenbasis.
//!
//! Doublet `n` mixes `|e,n>` and `|g,n+1>`:
//! `|n,+> = C_n |e,n> + S_n |g,n+1>` and `|n,-> = -S_n |e,n> + C_n |g,n+1>`,
//! with `C_n = cos(theta_n / 2)`, `S_n = sin(theta_n / 2)`.

use crate::averaging::{averaged_couplings, CouplingPair, CutoffPolicy, SystemParams};
use crate::error::{Error, Result};
use crate::models::hamiltonian_with_couplings;
use crate::numerics::{eig_hermitian, inner};
use crate::quantize::{rotating_ops, CompositeSpace, QubitState};
use crate::spectra::{free_labels, DressedLabel, Sign};

/// Denominators below this make the non-degenerate expansion inapplicable.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// `|Delta| / omega_r` above which the expansion is not advisable.
pub const NEAR_RESONANCE_THRESHOLD: f64 = 0.1;

/// JC mixing angle of doublet `n`, `theta_n = atan2(2 g_r sqrt(n+1), Delta)`
/// in `[0, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedAngle {
    pub n: usize,
    pub theta: f64,
}

impl DressedAngle {
    pub fn new(n: usize, delta: f64, g_r: f64) -> Self {
        let theta = (2.0 * g_r * ((n + 1) as f64).sqrt()).atan2(delta);
        Self { n, theta }
    }

    pub fn cos_half(&self) -> f64 {
        (0.5 * self.theta).cos()
    }

    pub fn sin_half(&self) -> f64 {
        (0.5 * self.theta).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbedLevel {
    pub label: DressedLabel,
    pub e0: f64,
    pub e2: f64,
}

impl PerturbedLevel {
    /// First-order corrections vanish for every level.
    pub fn e1(&self) -> f64 {
        0.0
    }

    pub fn total(&self) -> f64 {
        self.e0 + self.e2
    }
}

pub fn is_near_resonance(p: &SystemParams) -> bool {
    p.detuning().abs() <= NEAR_RESONANCE_THRESHOLD * p.omega_r
}

/// Zeroth-order (time-averaged JC) energy.
pub fn jc_level(label: DressedLabel, p: &SystemParams, couplings: CouplingPair) -> f64 {
    match label {
        DressedLabel::Ground => -0.5 * p.omega_a,
        DressedLabel::Doublet { n, sign } => {
            let d = p.detuning();
            let split = (d * d + 4.0 * couplings.g_r * couplings.g_r * (n + 1) as f64).sqrt();
            (n as f64 + 0.5) * p.omega_r + sign.factor() * 0.5 * split
        }
    }
}

/// Weights of `|e,n>` and `|g,n+1>` in the doublet state.
fn components(n: usize, sign: Sign, p: &SystemParams, g_r: f64) -> (f64, f64) {
    let a = DressedAngle::new(n, p.detuning(), g_r);
    match sign {
        Sign::Plus => (a.cos_half(), a.sin_half()),
        Sign::Minus => (a.sin_half(), a.cos_half()),
    }
}

struct Accumulator<'a> {
    label: DressedLabel,
    energy: f64,
    p: &'a SystemParams,
    couplings: CouplingPair,
    sum: f64,
}

impl Accumulator<'_> {
    fn add(&mut self, weight: f64, other: DressedLabel) -> Result<()> {
        let gap = self.energy - jc_level(other, self.p, self.couplings);
        if gap.abs() < DEGENERACY_GAP {
            return Err(Error::Degeneracy {
                a: self.label,
                b: other,
                gap: gap.abs(),
            });
        }
        self.sum += weight / gap;
        Ok(())
    }
}

/// Second-order correction from `g_ar Y_+`.
pub fn second_order(label: DressedLabel, p: &SystemParams, couplings: CouplingPair) -> Result<f64> {
    let g_ar2 = couplings.g_ar * couplings.g_ar;
    if g_ar2 == 0.0 {
        return Ok(0.0);
    }
    let g_r = couplings.g_r;
    let plus = |n| DressedLabel::doublet(n, Sign::Plus);
    let minus = |n| DressedLabel::doublet(n, Sign::Minus);
    let mut acc = Accumulator {
        label,
        energy: jc_level(label, p, couplings),
        p,
        couplings,
        sum: 0.0,
    };
    match label {
        DressedLabel::Ground => {
            let (c1, s1) = components(1, Sign::Plus, p, g_r);
            acc.add(g_ar2 * c1 * c1, plus(1))?;
            acc.add(g_ar2 * s1 * s1, minus(1))?;
        }
        DressedLabel::Doublet { n, sign } => {
            let (e_weight, g_weight) = components(n, sign, p, g_r);
            // |g,n+1> -> |e,n+2>
            let (c_up, s_up) = components(n + 2, Sign::Plus, p, g_r);
            let up = (n + 2) as f64 * g_ar2 * g_weight * g_weight;
            acc.add(up * c_up * c_up, plus(n + 2))?;
            acc.add(up * s_up * s_up, minus(n + 2))?;
            // |e,n> -> |g,n-1>
            match n {
                0 => {}
                1 => acc.add(g_ar2 * e_weight * e_weight, DressedLabel::Ground)?,
                _ => {
                    let (c_dn, s_dn) = components(n - 2, Sign::Plus, p, g_r);
                    let down = n as f64 * g_ar2 * e_weight * e_weight;
                    acc.add(down * s_dn * s_dn, plus(n - 2))?;
                    acc.add(down * c_dn * c_dn, minus(n - 2))?;
                }
            }
        }
    }
    Ok(acc.sum)
}

/// The `k_levels` lowest perturbed levels, ordered by total energy.
pub fn perturbed_spectrum(p: &SystemParams, policy: &CutoffPolicy, k_levels: usize) -> Result<Vec<PerturbedLevel>> {
    let couplings = averaged_couplings(p, policy)?;
    perturbed_levels(p, couplings, &free_labels(p, 2 * k_levels + 2)).map(|mut levels| {
        levels.truncate(k_levels);
        levels
    })
}

/// Perturbed levels for explicit labels, ordered by total energy.
pub fn perturbed_levels(
    p: &SystemParams,
    couplings: CouplingPair,
    labels: &[DressedLabel],
) -> Result<Vec<PerturbedLevel>> {
    let mut levels = labels
        .iter()
        .map(|&label| {
            Ok(PerturbedLevel {
                label,
                e0: jc_level(label, p, couplings),
                e2: second_order(label, p, couplings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    levels.sort_by(|a, b| {
        a.total()
            .total_cmp(&b.total())
            .then(a.label.rank().cmp(&b.label.rank()))
    });
    Ok(levels)
}

/// Rayleigh-Schrodinger sum `sum_m |<m| g_ar Y_+ |label>|^2 / (E_label - E_m)`
/// over the numerically diagonalised JC basis truncated at `n_max`.
pub fn brute_force_second_order(
    label: DressedLabel,
    p: &SystemParams,
    couplings: CouplingPair,
    n_max: usize,
) -> Result<f64> {
    let space = CompositeSpace::single(n_max)?;
    let jc = hamiltonian_with_couplings(p, CouplingPair::new(couplings.g_r, 0.0), space)?;
    let es = eig_hermitian(&jc)?;
    let y = rotating_ops(space, 0)?.y_plus;

    let target = match label {
        DressedLabel::Ground => vec![space.index(&[QubitState::Ground], 0)?],
        DressedLabel::Doublet { n, .. } => vec![
            space.index(&[QubitState::Excited], n)?,
            space.index(&[QubitState::Ground], n + 1)?,
        ],
    };
    let weight = |k: usize| target.iter().map(|&i| es.vectors[(i, k)].norm_sqr()).sum::<f64>();
    let mut members: Vec<usize> = (0..es.dim()).filter(|&k| weight(k) > 0.5).collect();
    members.sort_by(|&a, &b| es.values[a].total_cmp(&es.values[b]));
    let idx = match label {
        DressedLabel::Ground => members[0],
        DressedLabel::Doublet { sign, .. } => {
            let (lo, hi) = (members[0], members[1]);
            if (es.values[hi] - es.values[lo]).abs() > 1e-12 {
                if sign == Sign::Plus {
                    hi
                } else {
                    lo
                }
            } else {
                let (q, photons) = label.bare_state(p.detuning());
                let bare = space.index(&[q], photons)?;
                if es.vectors[(bare, lo)].norm_sqr() > 0.5 {
                    lo
                } else {
                    hi
                }
            }
        }
    };

    let v = es.vector(idx);
    let yv = y.apply(&v);
    let energy = es.values[idx];
    let mut sum = 0.0;
    for m in (0..es.dim()).filter(|&m| m != idx) {
        let amp = couplings.g_ar * inner(&es.vector(m), &yv).norm();
        if amp < 1e-14 {
            continue;
        }
        let gap = energy - es.values[m];
        if gap.abs() < DEGENERACY_GAP {
            return Err(Error::Degeneracy {
                a: label,
                b: label,
                gap: gap.abs(),
            });
        }
        sum += amp * amp / gap;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_hamiltonian, ModelKind};
    use proptest::prelude::*;

    fn at(delta: f64, g: f64) -> SystemParams {
        SystemParams::from_detuning(1.0, delta, g).unwrap()
    }

    fn pair(p: &SystemParams, factor: f64) -> CouplingPair {
        averaged_couplings(p, &CutoffPolicy::FactorOfG(factor)).unwrap()
    }

    fn all_labels(max_n: usize) -> Vec<DressedLabel> {
        let mut v = vec![DressedLabel::Ground];
        for n in 0..=max_n {
            v.push(DressedLabel::doublet(n, Sign::Minus));
            v.push(DressedLabel::doublet(n, Sign::Plus));
        }
        v
    }

    #[test]
    fn angle_at_resonance_is_right_angle() {
        let a = DressedAngle::new(3, 0.0, 0.1);
        assert_eq!(a.theta, std::f64::consts::FRAC_PI_2);
        assert_eq!(DressedAngle::new(0, -0.2, 0.0).theta, std::f64::consts::PI);
        assert_eq!(DressedAngle::new(0, 0.2, 0.0).theta, 0.0);
    }

    #[test]
    fn zeroth_order_values() {
        let p = at(0.0, 0.1);
        let c = CouplingPair::new(0.1, 0.0);
        assert_eq!(jc_level(DressedLabel::Ground, &p, c), -0.5);
        assert!((jc_level(DressedLabel::doublet(0, Sign::Plus), &p, c) - 0.6).abs() < 1e-15);
        let q = at(0.07, 0.1);
        let split = jc_level(DressedLabel::doublet(2, Sign::Plus), &q, c)
            - jc_level(DressedLabel::doublet(2, Sign::Minus), &q, c);
        assert!((split - (0.07f64 * 0.07 + 4.0 * 0.01 * 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ground_correction_at_resonance() {
        let p = at(0.0, 0.2);
        let c = pair(&p, 10.0);
        let e2 = second_order(DressedLabel::Ground, &p, c).unwrap();
        assert!((e2 - -0.007_507_743_697_376_373_5).abs() < 1e-15);
        let levels = perturbed_spectrum(&p, &CutoffPolicy::FactorOfG(10.0), 1).unwrap();
        assert!((levels[0].total() - -0.507_507_743_697_376_4).abs() < 1e-14);
    }

    #[test]
    fn detuned_doublet_corrections() {
        let p = at(0.05, 0.2);
        let c = pair(&p, 10.0);
        let cases = [
            (DressedLabel::doublet(0, Sign::Plus), -0.006_978_324_876_036_938_5),
            (DressedLabel::doublet(0, Sign::Minus), -0.007_241_609_910_507_018),
            (DressedLabel::doublet(1, Sign::Plus), -0.008_324_872_109_550_966),
            (DressedLabel::doublet(2, Sign::Minus), -0.005_266_940_676_610_286),
            (DressedLabel::doublet(4, Sign::Plus), -0.016_234_109_964_691_88),
        ];
        for (label, expected) in cases {
            let e2 = second_order(label, &p, c).unwrap();
            assert!((e2 - expected).abs() < 1e-14, "{label}: {e2}");
        }
    }

    #[test]
    fn vanishing_counter_rotating_coupling() {
        let p = at(0.0, 0.0);
        for l in all_labels(4) {
            assert_eq!(second_order(l, &p, CouplingPair::new(0.1, 0.0)).unwrap(), 0.0);
        }
        let free = perturbed_spectrum(&p, &CutoffPolicy::FactorOfG(10.0), 5).unwrap();
        for l in free {
            assert_eq!(l.e2, 0.0);
            assert_eq!(l.e0, l.label.free_energy(&p));
        }
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        // 0+ meets 2- at g_r = 2 / (1 + sqrt 3) on resonance
        let g_r = 2.0 / (1.0 + 3f64.sqrt());
        let p = at(0.0, g_r);
        let err = second_order(DressedLabel::doublet(0, Sign::Plus), &p, CouplingPair::new(g_r, 0.1)).unwrap_err();
        assert!(matches!(
            err,
            Error::Degeneracy {
                b: DressedLabel::Doublet {
                    n: 2,
                    sign: Sign::Minus
                },
                ..
            }
        ));
    }

    #[test]
    fn matches_brute_force_sum() {
        for &delta in &[-0.1, -0.03, 0.0, 0.06] {
            for &g in &[0.01, 0.12, 0.3] {
                let p = at(delta, g);
                let c = pair(&p, 10.0);
                for l in all_labels(4) {
                    let closed = second_order(l, &p, c).unwrap();
                    let brute = brute_force_second_order(l, &p, c, 16).unwrap();
                    assert!(
                        (closed - brute).abs() < 1e-10,
                        "{l} at delta={delta} g={g}: {closed} vs {brute}"
                    );
                }
            }
        }
    }

    #[test]
    fn ground_residual_is_fourth_order() {
        let gs: Vec<f64> = (0..6).map(|k| 0.01 * 10f64.powf(k as f64 / 5.0)).collect();
        let points: Vec<(f64, f64)> = gs
            .iter()
            .map(|&g| {
                let p = at(0.0, g);
                let pt = -0.5 + second_order(DressedLabel::Ground, &p, CouplingPair::new(g, g)).unwrap();
                let h = build_hamiltonian(
                    ModelKind::Rabi,
                    &p,
                    &CutoffPolicy::FactorOfG(10.0),
                    CompositeSpace::single(30).unwrap(),
                )
                .unwrap();
                let exact = eig_hermitian(&h).unwrap().values[0];
                (g.ln(), (pt - exact).abs().ln())
            })
            .collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope >= 3.5, "slope {slope}");
    }

    #[test]
    fn selection_rule() {
        // Y_+ connects doublet n only to doublets n - 2 and n + 2
        let space = CompositeSpace::single(12).unwrap();
        let y = rotating_ops(space, 0).unwrap().y_plus;
        let v = space.basis_vector(&[QubitState::Excited], 3).unwrap();
        let w = space.basis_vector(&[QubitState::Ground], 4).unwrap();
        for out in [y.apply(&v), y.apply(&w)] {
            for (i, amp) in out.iter().enumerate() {
                if amp.norm() > 0.0 {
                    let photons = i % 13;
                    let excited = i < 13;
                    let doublet = if excited { photons as i64 } else { photons as i64 - 1 };
                    assert!(doublet == 1 || doublet == 5, "index {i}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ground_correction_nonpositive(delta in -0.1f64..0.1, g in 0.001f64..0.3, factor in 1.0f64..50.0) {
            let p = at(delta, g);
            let e2 = second_order(DressedLabel::Ground, &p, pair(&p, factor)).unwrap();
            prop_assert!(e2 <= 0.0);
        }

        #[test]
        fn components_normalised(n in 0usize..20, delta in -1.0f64..1.0, g_r in 0.0f64..0.5) {
            let a = DressedAngle::new(n, delta, g_r);
            prop_assert!((0.0..=std::f64::consts::PI).contains(&a.theta));
            prop_assert!((a.cos_half().powi(2) + a.sin_half().powi(2) - 1.0).abs() < 1e-15);
        }
    }
}
