//! Finite-key secret-rate bounds and the intercept-resend attack algebra.
//!
//! The rate bound charges Eve with all channel errors (worst-cased by the
//! finite-sample fidelity spread) and subtracts the error-correction and
//! privacy-amplification failure terms. The attack algebra covers an
//! eavesdropper who intercepts a fraction of the photons with a basis guess
//! fidelity, and the information distance that results at the detection
//! threshold.

use crate::infotheory::Fidelity;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SecurityError {
    #[error("worst-case fidelity {0} outside (0,1)")]
    WorstCaseFidelityOutOfRange(f64),
    #[error("interception is unbounded: a basis-guessing attacker adds no error")]
    UnboundedInterception,
    #[error("parameter {name} = {value} outside {range}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Minimum fidelity for cloning-based individual attacks on a 1024-symbol
/// alphabet, quoted for reporting.
pub const OPTIMAL_CLONER_FIDELITY: f64 = 0.516;

/// Finite-key analysis knobs. With the defaults, sifting halves the raw
/// key and parameter estimation takes half of what remains, so
/// n = m = N/4.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FiniteKeyParams {
    /// Total number of symbols N sent in the session.
    pub total_rounds: u64,
    /// Fraction of the raw key surviving sifting (1/2 for unbiased bases).
    pub sifting_fraction: f64,
    /// Fraction of the sifted key spent on parameter estimation.
    pub pe_fraction: f64,
    /// Error-correction failure probability.
    pub eps_ec: f64,
    /// Privacy-amplification failure probability.
    pub eps_pa: f64,
    /// Per-sample fidelity spread ΔF; `None` uses the binomial spread
    /// sqrt(F(1−F)) so ΔF/sqrt(m) is the standard error of the estimate.
    pub delta_f: Option<f64>,
}

impl FiniteKeyParams {
    pub fn defaults(total_rounds: u64) -> Self {
        Self {
            total_rounds,
            sifting_fraction: 0.5,
            pe_fraction: 0.5,
            eps_ec: 1e-5,
            eps_pa: (2.0f64).powi(-15),
            delta_f: None,
        }
    }

    /// Key symbols n.
    pub fn n(&self) -> f64 {
        self.total_rounds as f64 * self.sifting_fraction * (1.0 - self.pe_fraction)
    }

    /// Parameter-estimation symbols m.
    pub fn m(&self) -> f64 {
        self.total_rounds as f64 * self.sifting_fraction * self.pe_fraction
    }

    pub fn delta_f_for(&self, f: Fidelity) -> f64 {
        self.delta_f
            .unwrap_or_else(|| (f.value() * (1.0 - f.value())).sqrt())
    }
}

/// Intercept-resend attack knobs: intercepted fraction η, basis guess
/// fidelity ε, and the detection threshold σ on the bit error rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackParams {
    pub eta: f64,
    pub epsilon: f64,
    pub sigma: f64,
}

/// One point of the finite-key rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCurvePoint {
    /// Total symbol count N.
    pub total_rounds: u64,
    /// Lower bound on the secret rate in bits per detected photon,
    /// clamped at zero.
    pub rate: f64,
    /// The same bound before clamping, for plotting.
    pub rate_unclamped: f64,
}

/// Eve's information when all channel errors are attributed to her,
/// worst-cased by the fidelity spread at sample size m:
///
/// −(1−F+ΔF/√m) log2[(1−F+ΔF/√m)/(d−1)] − (F−ΔF/√m) log2(F−ΔF/√m).
///
/// Pass `m = f64::INFINITY` for the asymptotic value.
pub fn eve_info_finite(f: Fidelity, delta_f: f64, m: f64, d: usize) -> Result<f64, SecurityError> {
    let shift = if m.is_infinite() {
        0.0
    } else {
        delta_f / m.sqrt()
    };
    let worst = f.value() - shift;
    if worst >= 1.0 {
        // perfect worst-case fidelity leaves Eve nothing
        return Ok(0.0);
    }
    if worst <= 0.0 {
        return Err(SecurityError::WorstCaseFidelityOutOfRange(worst));
    }
    Ok(-(1.0 - worst) * ((1.0 - worst) / (d - 1) as f64).log2() - worst * worst.log2())
}

/// Lower bound on the finite-key secret rate per detected photon:
/// r_N = (n/N)[I_AB − I(Eve) − (1/n)log2(2/ε_EC) − (2/n)log2(1/ε_PA)].
pub fn secret_key_rate(
    fk: &FiniteKeyParams,
    i_ab: f64,
    f: Fidelity,
    d: usize,
) -> Result<RateCurvePoint, SecurityError> {
    let n = fk.n();
    let m = fk.m();
    let i_eve = eve_info_finite(f, fk.delta_f_for(f), m, d)?;
    let corrections = (2.0 / fk.eps_ec).log2() / n + 2.0 * (1.0 / fk.eps_pa).log2() / n;
    let rate_unclamped = (n / fk.total_rounds as f64) * (i_ab - i_eve - corrections);
    Ok(RateCurvePoint {
        total_rounds: fk.total_rounds,
        rate: rate_unclamped.max(0.0),
        rate_unclamped,
    })
}

/// Sweep the rate bound over a grid of key lengths. Returns the curve and
/// the first N with a positive rate, if any.
pub fn rate_sweep(
    template: &FiniteKeyParams,
    n_grid: &[u64],
    i_ab: f64,
    f: Fidelity,
    d: usize,
) -> Result<(Vec<RateCurvePoint>, Option<u64>), SecurityError> {
    let mut points = Vec::with_capacity(n_grid.len());
    let mut onset = None;
    for &total in n_grid {
        let fk = FiniteKeyParams {
            total_rounds: total,
            ..*template
        };
        let p = secret_key_rate(&fk, i_ab, f, d)?;
        if onset.is_none() && p.rate > 0.0 {
            onset = Some(total);
        }
        points.push(p);
    }
    Ok((points, onset))
}

/// Error introduced by intercepting a fraction η: E_Eve = (η/2)(d−1)/d.
pub fn intercept_error(eta: f64, d: usize) -> f64 {
    0.5 * eta * (d - 1) as f64 / d as f64
}

/// Eve's information with basis guess fidelity ε:
/// I(Eve) = (η/2)(1+ε) I(Alice).
pub fn eve_attack_info(eta: f64, epsilon: f64, i_alice: f64) -> f64 {
    0.5 * eta * (1.0 + epsilon) * i_alice
}

/// Error rate Eve adds per intercepted photon:
/// Q_Eve = (1/2)(1−ε)(d−1)/d.
pub fn q_eve(epsilon: f64, d: usize) -> f64 {
    0.5 * (1.0 - epsilon) * (d - 1) as f64 / d as f64
}

/// Total bit error rate with an eavesdropper:
/// Q_Total = Q + (1−Q) η Q_Eve.
pub fn q_total(q: f64, eta: f64, qe: f64) -> f64 {
    q + (1.0 - q) * eta * qe
}

/// Maximum interception fraction that stays below the detection threshold:
/// η_max = σ/[(1−Q) Q_Eve], clamped at 1. Errors out at Q_Eve = 0
/// (ε = 1), where interception is unbounded.
pub fn eta_max(sigma: f64, q: f64, qe: f64) -> Result<f64, SecurityError> {
    if qe <= 0.0 {
        return Err(SecurityError::UnboundedInterception);
    }
    Ok((sigma / ((1.0 - q) * qe)).min(1.0))
}

/// Minimum fidelity between Alice and Bob under interception:
/// F_Total = F(1 − η Q_Eve).
pub fn f_total(f: Fidelity, eta: f64, qe: f64) -> f64 {
    f.value() * (1.0 - eta * qe)
}

/// Information distance δ = [(1−Q_Total) − (η/2)(1+ε)] I(Alice), for an
/// explicit interception fraction η. Not clamped; may be negative.
pub fn info_distance_at(q: f64, eta: f64, epsilon: f64, d: usize, i_alice: f64) -> f64 {
    let qt = q_total(q, eta, q_eve(epsilon, d));
    ((1.0 - qt) - 0.5 * eta * (1.0 + epsilon)) * i_alice
}

/// Minimum information distance at the detection threshold: η = η_max(σ).
pub fn info_distance(
    q: f64,
    sigma: f64,
    epsilon: f64,
    d: usize,
    i_alice: f64,
) -> Result<f64, SecurityError> {
    let qe = q_eve(epsilon, d);
    let eta = eta_max(sigma, q, qe)?;
    Ok(info_distance_at(q, eta, epsilon, d, i_alice))
}
