//! Time-averaging kernels and the time-averaged coupling pair.
//!
//! Averaging the interaction-picture Hamiltonian with an even, normalised
//! kernel multiplies each oscillating term by the kernel's Fourier transform
//! `K(omega)` evaluated at that term's frequency. The co-rotating terms
//! oscillate at the detuning, the counter-rotating ones at the sum frequency,
//! which gives `g_r = K(Delta) g` and `g_ar = K(Sigma) g`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default ratio used to decide `x << y` as `x <= r * y`.
pub const DEFAULT_MUCH_LESS_RATIO: f64 = 0.1;

/// Qubit–resonator frequencies and the bare dipole coupling (hbar = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_r: f64,
    pub omega_a: f64,
    pub g: f64,
}

impl SystemParams {
    pub fn new(omega_r: f64, omega_a: f64, g: f64) -> Result<Self> {
        if !(omega_r.is_finite() && omega_r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_r must be positive, got {omega_r}"
            )));
        }
        if !(omega_a.is_finite() && omega_a >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_a must be nonnegative, got {omega_a}"
            )));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("g must be nonnegative, got {g}")));
        }
        Ok(Self { omega_r, omega_a, g })
    }

    /// Parameters given the detuning instead of the qubit frequency.
    /// A qubit frequency within rounding of zero is set to zero.
    pub fn from_detuning(omega_r: f64, delta: f64, g: f64) -> Result<Self> {
        let mut omega_a = omega_r + delta;
        if omega_a < 0.0 && omega_a > -1e-12 * omega_r.abs() {
            omega_a = 0.0;
        }
        Self::new(omega_r, omega_a, g)
    }

    /// `Delta = omega_a - omega_r`.
    pub fn detuning(&self) -> f64 {
        self.omega_a - self.omega_r
    }

    /// `Sigma = omega_a + omega_r`.
    pub fn sum_frequency(&self) -> f64 {
        self.omega_a + self.omega_r
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(self.omega_r, self.omega_a, g)
    }
}

/// Fourier transform of an even, normalised averaging kernel.
pub trait CutoffFunction {
    /// `K(omega)`, with `K(0) = 1` and `K(-omega) = K(omega)`.
    fn cutoff(&self, omega: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragingKernel {
    pub family: KernelFamily,
    omega_k: f64,
}

impl AveragingKernel {
    pub fn new(family: KernelFamily, omega_k: f64) -> Result<Self> {
        if omega_k.is_nan() || omega_k <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cutoff width must be positive, got {omega_k}"
            )));
        }
        Ok(Self { family, omega_k })
    }

    pub fn gaussian(omega_k: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, omega_k)
    }

    pub fn omega_k(&self) -> f64 {
        self.omega_k
    }

    /// Temporal width of the kernel, `tau = 1 / omega_K`.
    pub fn tau(&self) -> f64 {
        1.0 / self.omega_k
    }
}

impl CutoffFunction for AveragingKernel {
    fn cutoff(&self, omega: f64) -> f64 {
        match self.family {
            // FT of exp(-t^2 / 2 tau^2) / (tau sqrt(2 pi)) with tau = 1/omega_K
            KernelFamily::Gaussian => {
                let x = omega / self.omega_k;
                (-0.5 * x * x).exp()
            }
        }
    }
}

/// Time-averaged couplings of the co-rotating (`g_r`) and counter-rotating
/// (`g_ar`) terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingPair {
    pub g_r: f64,
    pub g_ar: f64,
}

impl CouplingPair {
    pub fn new(g_r: f64, g_ar: f64) -> Self {
        Self { g_r, g_ar }
    }

    /// `g_ar / g_r`, undefined when both vanish.
    pub fn ratio(&self) -> Option<f64> {
        (self.g_r != 0.0).then(|| self.g_ar / self.g_r)
    }
}

/// How the kernel width is chosen at each parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CutoffPolicy {
    /// `omega_K = c * g`
    FactorOfG(f64),
    /// `omega_K = c * |Delta|`
    FactorOfDetuning(f64),
    Fixed(f64),
}

impl CutoffPolicy {
    pub fn resolve(&self, p: &SystemParams) -> Result<f64> {
        let (value, what) = match *self {
            CutoffPolicy::FactorOfG(c) => (c * p.g, "factor_of_g with g = 0"),
            CutoffPolicy::FactorOfDetuning(c) => (c * p.detuning().abs(), "factor_of_detuning with Delta = 0"),
            CutoffPolicy::Fixed(v) => (v, "fixed width must be positive"),
        };
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::UnresolvablePolicy(what.to_string()))
        }
    }

    pub fn kernel(&self, p: &SystemParams) -> Result<AveragingKernel> {
        AveragingKernel::gaussian(self.resolve(p)?)
    }
}

impl fmt::Display for CutoffPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffPolicy::FactorOfG(c) => write!(f, "factor_of_g:{c}"),
            CutoffPolicy::FactorOfDetuning(c) => write!(f, "factor_of_detuning:{c}"),
            CutoffPolicy::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for CutoffPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("cutoff policy '{s}' needs MODE:VALUE")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number in cutoff policy '{s}'")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cutoff policy value must be positive in '{s}'"
            )));
        }
        match mode.trim() {
            "factor_of_g" => Ok(CutoffPolicy::FactorOfG(v)),
            "factor_of_detuning" => Ok(CutoffPolicy::FactorOfDetuning(v)),
            "fixed" => Ok(CutoffPolicy::Fixed(v)),
            other => Err(Error::InvalidParameter(format!("unknown cutoff policy mode '{other}'"))),
        }
    }
}

/// How the detuning is chosen along a coupling sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetuningPolicy {
    Fixed(f64),
    /// `Delta = c * g`
    FactorOfG(f64),
}

impl DetuningPolicy {
    pub fn detuning(&self, g: f64) -> f64 {
        match *self {
            DetuningPolicy::Fixed(d) => d,
            DetuningPolicy::FactorOfG(c) => c * g,
        }
    }

    pub fn params(&self, omega_r: f64, g: f64) -> Result<SystemParams> {
        SystemParams::from_detuning(omega_r, self.detuning(g), g)
    }
}

impl fmt::Display for DetuningPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetuningPolicy::Fixed(d) => write!(f, "fixed:{d}"),
            DetuningPolicy::FactorOfG(c) => write!(f, "factor:{c}"),
        }
    }
}

impl FromStr for DetuningPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("detuning policy '{s}' needs MODE:VALUE")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number in detuning policy '{s}'")))?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "detuning policy value must be finite in '{s}'"
            )));
        }
        match mode.trim() {
            "fixed" => Ok(DetuningPolicy::Fixed(v)),
            "factor" => Ok(DetuningPolicy::FactorOfG(v)),
            other => Err(Error::InvalidParameter(format!(
                "unknown detuning policy mode '{other}'"
            ))),
        }
    }
}

/// `(g_r, g_ar) = (K(Delta) g, K(Sigma) g)`; zero coupling needs no kernel.
pub fn averaged_couplings(p: &SystemParams, policy: &CutoffPolicy) -> Result<CouplingPair> {
    if p.g == 0.0 {
        return Ok(CouplingPair::new(0.0, 0.0));
    }
    let kernel = policy.kernel(p)?;
    Ok(CouplingPair::new(
        kernel.cutoff(p.detuning()) * p.g,
        kernel.cutoff(p.sum_frequency()) * p.g,
    ))
}

/// Which ordering of frequency scales holds at a parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport {
    pub omega_k: Option<f64>,
    /// `g << omega_K`
    pub averaging_condition: bool,
    /// `g << omega_K <= min(omega_r, omega_a)`
    pub rwa_chain: bool,
    /// `g << |Delta| <= omega_K <= Sigma`
    pub dispersive_rwa_chain: bool,
    /// `g << |Delta| <= Sigma <= omega_K`
    pub ultrastrong_chain: bool,
}

/// Evaluates the scale-separation chains; `ratio` operationalises `<<`
/// for links that involve the coupling.
pub fn regime_check(p: &SystemParams, policy: &CutoffPolicy, ratio: f64) -> RegimeReport {
    if p.g == 0.0 {
        return RegimeReport {
            omega_k: policy.resolve(p).ok(),
            averaging_condition: true,
            rwa_chain: true,
            dispersive_rwa_chain: true,
            ultrastrong_chain: true,
        };
    }
    let much_less = |x: f64, y: f64| x <= ratio * y;
    let delta = p.detuning().abs();
    let sigma = p.sum_frequency();
    let omega_k = policy.resolve(p).ok();
    let (avg, rwa, disp, us) = match omega_k {
        Some(wk) => (
            much_less(p.g, wk),
            much_less(p.g, wk) && wk <= p.omega_r.min(p.omega_a),
            much_less(p.g, delta) && delta <= wk && wk <= sigma,
            much_less(p.g, delta) && delta <= sigma && sigma <= wk,
        ),
        None => (false, false, false, false),
    };
    RegimeReport {
        omega_k,
        averaging_condition: avg,
        rwa_chain: rwa,
        dispersive_rwa_chain: disp,
        ultrastrong_chain: us,
    }
}
