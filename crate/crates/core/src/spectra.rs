//! Exact spectra on the truncated space.
//!
//! Levels are followed across a coupling sweep by eigenvector overlap rather
//! than by energy order, so crossing levels keep their identity. Labels are
//! seeded from the uncoupled basis: the ground state `|g,0>` and the doublet
//! `n` spanned by `|e,n>` and `|g,n+1>`, whose upper member is `Plus`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::averaging::{CutoffPolicy, SystemParams};
use crate::error::{Error, Result};
use crate::models::{build_hamiltonian, ModelKind};
use crate::numerics::{eig_hermitian, inner, EigenSystem, HermitianOperator};
use crate::quantize::{CompositeSpace, QubitState};

/// Overlaps closer than this are treated as a tie.
pub const OVERLAP_TIE_TOL: f64 = 1e-6;
/// Energies closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

const EXTRA_TRACKED: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DressedLabel {
    Ground,
    Doublet { n: usize, sign: Sign },
}

impl DressedLabel {
    pub fn doublet(n: usize, sign: Sign) -> Self {
        DressedLabel::Doublet { n, sign }
    }

    /// Ordering used to break exact ties: ground, then by `n`, minus first.
    pub fn rank(&self) -> (usize, Sign) {
        match *self {
            DressedLabel::Ground => (0, Sign::Minus),
            DressedLabel::Doublet { n, sign } => (n + 1, sign),
        }
    }

    /// Energy in the uncoupled limit.
    pub fn free_energy(&self, p: &SystemParams) -> f64 {
        match *self {
            DressedLabel::Ground => -0.5 * p.omega_a,
            DressedLabel::Doublet { n, sign } => {
                (n as f64 + 0.5) * p.omega_r + sign.factor() * 0.5 * p.detuning().abs()
            }
        }
    }

    /// The uncoupled basis state the label is connected to.
    pub fn bare_state(&self, delta: f64) -> (QubitState, usize) {
        match *self {
            DressedLabel::Ground => (QubitState::Ground, 0),
            DressedLabel::Doublet { n, sign } => {
                let excited_is_upper = delta >= 0.0;
                if (sign == Sign::Plus) == excited_is_upper {
                    (QubitState::Excited, n)
                } else {
                    (QubitState::Ground, n + 1)
                }
            }
        }
    }

    /// Label adiabatically connected to `|e,n>`.
    pub fn excited(n: usize, delta: f64) -> Self {
        let sign = if delta >= 0.0 { Sign::Plus } else { Sign::Minus };
        DressedLabel::doublet(n, sign)
    }

    /// Label adiabatically connected to `|g,n>`.
    pub fn unexcited(n: usize, delta: f64) -> Self {
        match n {
            0 => DressedLabel::Ground,
            _ => DressedLabel::excited(n - 1, delta).flip_sign(),
        }
    }

    fn flip_sign(self) -> Self {
        match self {
            DressedLabel::Ground => self,
            DressedLabel::Doublet { n, sign } => DressedLabel::doublet(n, sign.flip()),
        }
    }

    fn max_photons(&self) -> usize {
        match *self {
            DressedLabel::Ground => 0,
            DressedLabel::Doublet { n, .. } => n + 1,
        }
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DressedLabel::Ground => f.write_str("ground"),
            DressedLabel::Doublet { n, sign: Sign::Plus } => write!(f, "{n}+"),
            DressedLabel::Doublet { n, sign: Sign::Minus } => write!(f, "{n}-"),
        }
    }
}

impl FromStr for DressedLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "ground" {
            return Ok(DressedLabel::Ground);
        }
        let bad = || Error::InvalidParameter(format!("bad level label '{s}'"));
        let (num, sign) = match s.as_bytes().last() {
            Some(b'+') => (&s[..s.len() - 1], Sign::Plus),
            Some(b'-') => (&s[..s.len() - 1], Sign::Minus),
            _ => return Err(bad()),
        };
        let n = num.parse().map_err(|_| bad())?;
        Ok(DressedLabel::doublet(n, sign))
    }
}

/// The `count` lowest uncoupled labels, exact ties ordered by [`DressedLabel::rank`].
pub fn free_labels(p: &SystemParams, count: usize) -> Vec<DressedLabel> {
    let mut labels = vec![DressedLabel::Ground];
    // the highest needed doublet index cannot exceed count when omega_r is
    // the smallest spacing; pad generously for large detuning
    let span = count + 2 + (p.detuning().abs() / p.omega_r).ceil() as usize;
    for n in 0..span {
        labels.push(DressedLabel::doublet(n, Sign::Minus));
        labels.push(DressedLabel::doublet(n, Sign::Plus));
    }
    labels.sort_by_key(|l| ((l.free_energy(p) / 1e-10).round() as i64, l.rank()));
    labels.truncate(count);
    labels
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationSchedule {
    pub start: usize,
    pub step: usize,
    pub cap: usize,
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self {
            start: 20,
            step: 10,
            cap: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergedSpectrum {
    pub system: EigenSystem,
    pub n_max: usize,
    /// Largest change of the tracked eigenvalues at the next truncation
    /// (infinite when no comparison was made).
    pub delta: f64,
}

/// Raises `n_max` until the lowest `k_levels` eigenvalues move by less
/// than `tol` at the next truncation, and returns the smaller truncation.
pub fn converged_spectrum<F>(builder: F, k_levels: usize, tol: f64) -> Result<ConvergedSpectrum>
where
    F: Fn(usize) -> Result<HermitianOperator>,
{
    converged_spectrum_with(builder, k_levels, tol, TruncationSchedule::default())
}

pub fn converged_spectrum_with<F>(
    builder: F,
    k_levels: usize,
    tol: f64,
    schedule: TruncationSchedule,
) -> Result<ConvergedSpectrum>
where
    F: Fn(usize) -> Result<HermitianOperator>,
{
    if k_levels == 0 {
        return Err(Error::InvalidParameter("k_levels must be at least 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut n_max = schedule.start;
    let mut current = eig_hermitian(&builder(n_max)?)?;
    if tol.is_infinite() {
        return Ok(ConvergedSpectrum {
            system: current,
            n_max,
            delta: f64::INFINITY,
        });
    }
    let mut last_delta = f64::INFINITY;
    while n_max + schedule.step <= schedule.cap {
        let next = eig_hermitian(&builder(n_max + schedule.step)?)?;
        let k = k_levels.min(current.dim());
        last_delta = current.values[..k]
            .iter()
            .zip(&next.values[..k])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if last_delta < tol {
            return Ok(ConvergedSpectrum {
                system: current,
                n_max,
                delta: last_delta,
            });
        }
        current = next;
        n_max += schedule.step;
    }
    Err(Error::TruncationNotConverged { n_max, last_delta })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FockChoice {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingOptions {
    pub fock: FockChoice,
    /// Tolerance used when `fock` is `Auto`.
    pub convergence_tol: f64,
    /// Largest coupling increment on the hidden ramp from `g = 0` to the
    /// first sweep point.
    pub ramp_step: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            fock: FockChoice::Auto,
            convergence_tol: 1e-10,
            ramp_step: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackedLevel {
    pub label: DressedLabel,
    pub energies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguityFlag {
    /// Sweep index at which the tie was broken by energy order.
    pub index: usize,
    pub label: DressedLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackedSpectrum {
    /// `g / omega_r` at each sweep point.
    pub sweep_values: Vec<f64>,
    pub levels: Vec<TrackedLevel>,
    pub flags: Vec<AmbiguityFlag>,
    pub n_max: usize,
}

impl TrackedSpectrum {
    pub fn level(&self, label: DressedLabel) -> Option<&TrackedLevel> {
        self.levels.iter().find(|l| l.label == label)
    }

    pub fn energy(&self, label: DressedLabel, index: usize) -> Option<f64> {
        self.level(label).and_then(|l| l.energies.get(index).copied())
    }

    pub fn is_flagged(&self, label: DressedLabel) -> bool {
        self.flags.iter().any(|f| f.label == label)
    }
}

/// Tracks the `k_levels` lowest uncoupled labels across the sweep.
pub fn track_levels(
    sweep: &[SystemParams],
    kind: ModelKind,
    policy: &CutoffPolicy,
    k_levels: usize,
) -> Result<TrackedSpectrum> {
    track_levels_with(sweep, kind, policy, k_levels, &TrackingOptions::default())
}

pub fn track_levels_with(
    sweep: &[SystemParams],
    kind: ModelKind,
    policy: &CutoffPolicy,
    k_levels: usize,
    opts: &TrackingOptions,
) -> Result<TrackedSpectrum> {
    let first = sweep
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty sweep".into()))?;
    let labels = free_labels(first, k_levels);
    track_labels(sweep, kind, policy, &labels, opts)
}

/// Tracks an explicit set of labels across the sweep.
pub fn track_labels(
    sweep: &[SystemParams],
    kind: ModelKind,
    policy: &CutoffPolicy,
    labels: &[DressedLabel],
    opts: &TrackingOptions,
) -> Result<TrackedSpectrum> {
    if sweep.is_empty() {
        return Err(Error::InvalidParameter("empty sweep".into()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no levels requested".into()));
    }
    let seed_index = sweep
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.g.total_cmp(&b.1.g))
        .map(|(i, _)| i)
        .expect("nonempty");
    let seed_params = sweep[seed_index];

    let mut tracked: Vec<DressedLabel> = labels.to_vec();
    for l in free_labels(&seed_params, labels.len() + EXTRA_TRACKED) {
        if !tracked.contains(&l) {
            tracked.push(l);
        }
    }
    let max_photons = tracked.iter().map(DressedLabel::max_photons).max().unwrap_or(0);

    let n_max = match opts.fock {
        FockChoice::Fixed(n) => n,
        FockChoice::Auto => {
            let hardest = sweep.iter().max_by(|a, b| a.g.total_cmp(&b.g)).expect("nonempty");
            converged_spectrum(
                |n| build_hamiltonian(kind, hardest, policy, CompositeSpace::single(n)?),
                2 * tracked.len(),
                opts.convergence_tol,
            )?
            .n_max
        }
    };
    if n_max < max_photons + 2 {
        return Err(Error::InvalidParameter(format!(
            "n_max = {n_max} too small to represent the tracked levels (needs {})",
            max_photons + 2
        )));
    }
    let space = CompositeSpace::single(n_max)?;
    let solve =
        |p: &SystemParams| -> Result<EigenSystem> { eig_hermitian(&build_hamiltonian(kind, p, policy, space)?) };

    // hidden ramp from the uncoupled point to the seed point
    let ramp_len = if seed_params.g > 0.0 {
        (seed_params.g / opts.ramp_step).ceil().max(1.0) as usize
    } else {
        0
    };
    let ramp: Vec<SystemParams> = (1..ramp_len)
        .map(|k| seed_params.with_g(seed_params.g * k as f64 / ramp_len as f64))
        .collect::<Result<_>>()?;
    let ramp_systems: Vec<EigenSystem> = ramp.par_iter().map(solve).collect::<Result<_>>()?;
    let systems: Vec<EigenSystem> = sweep.par_iter().map(solve).collect::<Result<_>>()?;

    let delta = seed_params.detuning();
    let mut state = TrackState {
        labels: tracked.clone(),
        energies: tracked.iter().map(|l| l.free_energy(&seed_params)).collect(),
        vectors: tracked
            .iter()
            .map(|l| {
                let (q, n) = l.bare_state(delta);
                space.basis_vector(&[q], n)
            })
            .collect::<Result<_>>()?,
    };
    for es in &ramp_systems {
        state = match_step(&state, es).0;
    }

    let mut per_point: Vec<Option<TrackState>> = vec![None; sweep.len()];
    let mut flags = Vec::new();
    let (seed_state, seed_flags) = match_step(&state, &systems[seed_index]);
    flags.extend(seed_flags.into_iter().map(|label| AmbiguityFlag {
        index: seed_index,
        label,
    }));
    per_point[seed_index] = Some(seed_state);

    let forward = seed_index + 1..sweep.len();
    let backward = (0..seed_index).rev();
    for order in [forward.collect::<Vec<_>>(), backward.collect::<Vec<_>>()] {
        let mut prev = per_point[seed_index].clone().expect("seeded");
        for i in order {
            let (next, step_flags) = match_step(&prev, &systems[i]);
            flags.extend(step_flags.into_iter().map(|label| AmbiguityFlag { index: i, label }));
            per_point[i] = Some(next.clone());
            prev = next;
        }
    }
    flags.retain(|f| labels.contains(&f.label));
    flags.sort_by_key(|f| (f.index, f.label.rank()));

    let per_point: Vec<TrackState> = per_point.into_iter().map(|s| s.expect("filled")).collect();
    let levels = labels
        .iter()
        .map(|&label| {
            let slot = tracked.iter().position(|&l| l == label).expect("tracked");
            TrackedLevel {
                label,
                energies: per_point.iter().map(|s| s.energies[slot]).collect(),
            }
        })
        .collect();
    Ok(TrackedSpectrum {
        sweep_values: sweep.iter().map(|p| p.g / p.omega_r).collect(),
        levels,
        flags,
        n_max,
    })
}

#[derive(Clone, Debug)]
struct TrackState {
    labels: Vec<DressedLabel>,
    energies: Vec<f64>,
    vectors: Vec<Vec<C64>>,
}

/// Assigns each previously tracked label to an eigenvector of `cur`.
///
/// Previous labels are grouped into degenerate clusters; each cluster claims
/// as many current eigenvectors as it has members, by largest summed
/// overlap. Inside a cluster the previous vectors are an arbitrary basis of
/// the degenerate subspace, so ties there are resolved by energy order
/// without a flag. A non-degenerate label whose best and second-best
/// overlaps tie with distinct energies is flagged.
fn match_step(prev: &TrackState, cur: &EigenSystem) -> (TrackState, Vec<DressedLabel>) {
    let n_labels = prev.labels.len();
    let dim = cur.dim();
    let cur_vectors: Vec<Vec<C64>> = (0..dim).map(|j| cur.vector(j)).collect();
    let overlap: Vec<Vec<f64>> = prev
        .vectors
        .iter()
        .map(|u| cur_vectors.iter().map(|v| inner(u, v).norm_sqr()).collect())
        .collect();

    // degenerate clusters of previous labels
    let mut by_energy: Vec<usize> = (0..n_labels).collect();
    by_energy.sort_by(|&a, &b| {
        prev.energies[a]
            .total_cmp(&prev.energies[b])
            .then(prev.labels[a].rank().cmp(&prev.labels[b].rank()))
    });
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in by_energy {
        match clusters.last_mut() {
            Some(c) if (prev.energies[i] - prev.energies[*c.last().expect("nonempty")]).abs() < DEGENERACY_TOL => {
                c.push(i)
            }
            _ => clusters.push(vec![i]),
        }
    }
    let cluster_energy: Vec<f64> = clusters.iter().map(|c| prev.energies[c[0]]).collect();

    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(clusters.len() * dim);
    for (ci, c) in clusters.iter().enumerate() {
        for (j, &e) in cur.values.iter().enumerate() {
            let w: f64 = c.iter().map(|&i| overlap[i][j]).sum();
            candidates.push((w, (e - cluster_energy[ci]).abs(), ci, j));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut capacity: Vec<usize> = clusters.iter().map(Vec::len).collect();
    let mut taken = vec![false; dim];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
    let mut remaining: usize = capacity.iter().sum();
    for &(_, _, ci, j) in &candidates {
        if remaining == 0 {
            break;
        }
        if capacity[ci] > 0 && !taken[j] {
            taken[j] = true;
            capacity[ci] -= 1;
            remaining -= 1;
            members[ci].push(j);
        }
    }

    let mut assigned = vec![usize::MAX; n_labels];
    let mut flagged = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        if c.len() == 1 {
            let i = c[0];
            let j = members[ci][0];
            assigned[i] = j;
            let best = overlap[i][j];
            let rival = (0..dim)
                .filter(|&k| k != j)
                .max_by(|&a, &b| overlap[i][a].total_cmp(&overlap[i][b]));
            if let Some(k) = rival {
                if best - overlap[i][k] < OVERLAP_TIE_TOL && (cur.values[j] - cur.values[k]).abs() > DEGENERACY_TOL {
                    flagged.push(prev.labels[i]);
                }
            }
            continue;
        }
        assign_within_cluster(c, &members[ci], &overlap, prev, cur, &mut assigned);
    }

    let next = TrackState {
        labels: prev.labels.clone(),
        energies: assigned.iter().map(|&j| cur.values[j]).collect(),
        vectors: assigned.iter().map(|&j| cur_vectors[j].clone()).collect(),
    };
    (next, flagged)
}

fn assign_within_cluster(
    labels: &[usize],
    vectors: &[usize],
    overlap: &[Vec<f64>],
    prev: &TrackState,
    cur: &EigenSystem,
    assigned: &mut [usize],
) {
    let mut free_labels: Vec<usize> = labels.to_vec();
    let mut free_vectors: Vec<usize> = vectors.to_vec();
    while !free_labels.is_empty() {
        let mut entries: Vec<(f64, usize, usize)> = free_labels
            .iter()
            .flat_map(|&i| free_vectors.iter().map(move |&j| (overlap[i][j], i, j)))
            .collect();
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (best, i, j) = entries[0];
        let contested = entries[1..]
            .iter()
            .any(|&(w, i2, j2)| (i2 == i || j2 == j) && best - w < OVERLAP_TIE_TOL);
        if contested {
            free_labels.sort_by_key(|&i| prev.labels[i].rank());
            free_vectors.sort_by(|&a, &b| cur.values[a].total_cmp(&cur.values[b]).then(a.cmp(&b)));
            for (&i, &j) in free_labels.iter().zip(&free_vectors) {
                assigned[i] = j;
            }
            return;
        }
        assigned[i] = j;
        free_labels.retain(|&x| x != i);
        free_vectors.retain(|&x| x != j);
    }
}

/// Closed-form JC energies with coupling `g_r`, indexed by label.
pub fn jc_closed_form(p: &SystemParams, g_r: f64, labels: &[DressedLabel]) -> HashMap<DressedLabel, f64> {
    labels
        .iter()
        .map(|&l| {
            let e = match l {
                DressedLabel::Ground => -0.5 * p.omega_a,
                DressedLabel::Doublet { n, sign } => {
                    let d = p.detuning();
                    (n as f64 + 0.5) * p.omega_r
                        + sign.factor() * 0.5 * (d * d + 4.0 * g_r * g_r * (n + 1) as f64).sqrt()
                }
            };
            (l, e)
        })
        .collect()
}
