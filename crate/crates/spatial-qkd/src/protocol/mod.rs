//! End-to-end session engine: round generation, sifting, parameter
//! estimation, Gray-code QBER, cascade reconciliation, privacy
//! amplification, and final key emission.
//!
//! A session is single-threaded and fully deterministic given its master
//! seed; sub-seeds for the channel, sifting partition, cascade shuffles and
//! the privacy-amplification matrix are derived from it by hashing a label.

pub mod cascade;
pub mod privacy;

pub use cascade::{cascade_reconcile, CascadeError, CascadeOutcome};
pub use privacy::{toeplitz_hash, PrivacyError};

use crate::alphabet::{binary_encode, hamming, SymbolGrid, SymbolId};
use crate::channel::{Basis, ChannelModel, GaussianSpot};
use crate::infotheory::{mi_neighbor, Fidelity};
use crate::security::FiniteKeyParams;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no compatible detected rounds to sift")]
    NothingToSift,
    #[error("estimation set is empty")]
    EmptyEstimationSet,
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("send distribution is not normalized")]
    BadSendDistribution,
}

/// Alice's per-basis send distribution.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SendSpec {
    /// Uniform over the alphabet.
    Uniform,
    /// Gaussian over the grid, matching the incompatible-basis spot so the
    /// basis choice stays hidden.
    Gaussian(GaussianSpot),
}

/// Everything needed to run one session.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub rounds: u64,
    pub channel: ChannelModel,
    pub send_image: SendSpec,
    pub send_fourier: SendSpec,
    /// Probability of choosing the image basis (both parties).
    pub basis_bias: f64,
    pub finite_key: FiniteKeyParams,
    /// Session aborts when the estimated QBER exceeds this (Q + sigma).
    pub qber_abort_threshold: f64,
    pub master_seed: u64,
}

impl SessionConfig {
    pub fn paper_defaults(rounds: u64, master_seed: u64) -> Self {
        let channel = ChannelModel::paper_defaults();
        let spot_if = *channel.incompatible_spot(Basis::Image);
        let spot_fi = *channel.incompatible_spot(Basis::Fourier);
        Self {
            rounds,
            channel,
            send_image: SendSpec::Gaussian(spot_if),
            send_fourier: SendSpec::Gaussian(spot_fi),
            basis_bias: 0.5,
            finite_key: FiniteKeyParams::defaults(rounds),
            // Q + sigma with Q from the fitted channel and sigma = 0.02
            qber_abort_threshold: 0.078 + 0.02,
            master_seed,
        }
    }
}

/// One protocol round as both parties record it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub alice_symbol: SymbolId,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    /// `None` when the photon was lost or not detected.
    pub bob_symbol: Option<SymbolId>,
}

/// Full per-round record of a session plus summary counters.
#[derive(Debug, Clone)]
pub struct SessionTranscript {
    pub rounds: Vec<RoundRecord>,
    pub sent: u64,
    pub detected: u64,
}

/// Sifted key material: aligned symbol pairs split into the key set and
/// the parameter-estimation set.
#[derive(Debug, Clone)]
pub struct SiftedKey {
    pub key_pairs: Vec<(SymbolId, SymbolId)>,
    pub estimation_pairs: Vec<(SymbolId, SymbolId)>,
}

/// Parameter estimates from the estimation set.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ParamEstimate {
    /// Fraction of exact symbol matches.
    pub fidelity: f64,
    /// Mean Gray-code bit error fraction.
    pub qber: f64,
    /// Binomial per-sample fidelity spread sqrt(F(1-F)).
    pub delta_f: f64,
}

/// Derive a sub-seed from the master seed and a purpose label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn send_sampler(spec: &SendSpec, grid: &SymbolGrid) -> Result<Vec<f64>, ProtocolError> {
    let dist = match spec {
        SendSpec::Uniform => vec![1.0 / grid.dimension() as f64; grid.dimension()],
        SendSpec::Gaussian(spot) => crate::channel::incompatible_distribution(spot, grid),
    };
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ProtocolError::BadSendDistribution);
    }
    let mut acc = 0.0;
    Ok(dist
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect())
}

fn sample_from_cumulative<R: Rng>(cum: &[f64], rng: &mut R) -> SymbolId {
    let u: f64 = rng.gen();
    SymbolId(cum.partition_point(|&c| c <= u).min(cum.len() - 1))
}

/// Generate all N rounds of the quantum phase.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionTranscript, ProtocolError> {
    let grid = cfg.channel.grid();
    let cum_image = send_sampler(&cfg.send_image, grid)?;
    let cum_fourier = send_sampler(&cfg.send_fourier, grid)?;
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.master_seed, "quantum-phase"));
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    let mut detected = 0u64;
    for _ in 0..cfg.rounds {
        let alice_basis = if rng.gen::<f64>() < cfg.basis_bias {
            Basis::Image
        } else {
            Basis::Fourier
        };
        let bob_basis = if rng.gen::<f64>() < cfg.basis_bias {
            Basis::Image
        } else {
            Basis::Fourier
        };
        let cum = match alice_basis {
            Basis::Image => &cum_image,
            Basis::Fourier => &cum_fourier,
        };
        let alice_symbol = sample_from_cumulative(cum, &mut rng);
        let bob_symbol = cfg
            .channel
            .transmit(alice_symbol, alice_basis, bob_basis, &mut rng);
        if bob_symbol.is_some() {
            detected += 1;
        }
        rounds.push(RoundRecord {
            alice_symbol,
            alice_basis,
            bob_basis,
            bob_symbol,
        });
    }
    Ok(SessionTranscript {
        sent: cfg.rounds,
        detected,
        rounds,
    })
}

/// Keep detected compatible rounds and split them into estimation and key
/// sets. The partition is a seed-reproducible random shuffle; estimation
/// symbols are consumed and never reused for key material.
pub fn sift<R: Rng>(
    transcript: &SessionTranscript,
    fk: &FiniteKeyParams,
    rng: &mut R,
) -> Result<SiftedKey, ProtocolError> {
    let mut compatible: Vec<(SymbolId, SymbolId)> = transcript
        .rounds
        .iter()
        .filter(|r| r.alice_basis.compatible(r.bob_basis))
        .filter_map(|r| r.bob_symbol.map(|b| (r.alice_symbol, b)))
        .collect();
    if compatible.is_empty() {
        return Err(ProtocolError::NothingToSift);
    }
    compatible.shuffle(rng);
    let m = ((compatible.len() as f64) * fk.pe_fraction).round() as usize;
    let estimation_pairs = compatible.split_off(compatible.len() - m.min(compatible.len()));
    Ok(SiftedKey {
        key_pairs: compatible,
        estimation_pairs,
    })
}

/// Estimate fidelity, Gray-code QBER and the fidelity spread from the
/// estimation set.
pub fn estimate_parameters(
    estimation: &[(SymbolId, SymbolId)],
    grid: &SymbolGrid,
) -> Result<ParamEstimate, ProtocolError> {
    if estimation.is_empty() {
        return Err(ProtocolError::EmptyEstimationSet);
    }
    let mut matches = 0u64;
    let mut bit_errors = 0u64;
    let word_bits = grid.word_bits() as u64;
    for &(a, b) in estimation {
        if a == b {
            matches += 1;
        }
        let wa = grid.gray_encode(a);
        let wb = grid.gray_encode(b);
        bit_errors += hamming(&wa, &wb).expect("equal lengths by construction") as u64;
    }
    let f = matches as f64 / estimation.len() as f64;
    Ok(ParamEstimate {
        fidelity: f,
        qber: bit_errors as f64 / (estimation.len() as u64 * word_bits) as f64,
        delta_f: (f * (1.0 - f)).sqrt(),
    })
}

/// Gray-code bit expansion of the symbol pairs: Alice's bits and Bob's bits.
pub fn gray_bit_strings(pairs: &[(SymbolId, SymbolId)], grid: &SymbolGrid) -> (Vec<u8>, Vec<u8>) {
    let mut alice = Vec::with_capacity(pairs.len() * grid.word_bits());
    let mut bob = Vec::with_capacity(pairs.len() * grid.word_bits());
    for &(a, b) in pairs {
        alice.extend(grid.gray_encode(a).to_bits());
        bob.extend(grid.gray_encode(b).to_bits());
    }
    (alice, bob)
}

/// As [`gray_bit_strings`] but with plain binary coding, for quantifying
/// the Gray-code advantage.
pub fn binary_bit_strings(pairs: &[(SymbolId, SymbolId)], grid: &SymbolGrid) -> (Vec<u8>, Vec<u8>) {
    let mut alice = Vec::with_capacity(pairs.len() * grid.word_bits());
    let mut bob = Vec::with_capacity(pairs.len() * grid.word_bits());
    for &(a, b) in pairs {
        alice.extend(binary_encode(grid, a).to_bits());
        bob.extend(binary_encode(grid, b).to_bits());
    }
    (alice, bob)
}

/// Number of secret bits extractable after reconciliation:
/// floor(n·[I_AB − I_Eve] − leak_ec − log2(2/ε_EC) − 2 log2(1/ε_PA)),
/// clamped at zero. `n` is in symbols.
pub fn final_key_length(
    fk: &FiniteKeyParams,
    i_ab: f64,
    f_hat: Fidelity,
    n: u64,
    m: u64,
    leak_ec: u64,
    d: usize,
) -> u64 {
    let i_eve = match crate::security::eve_info_finite(f_hat, fk.delta_f_for(f_hat), m as f64, d) {
        Ok(v) => v,
        // worst-case fidelity collapsed: Eve may know everything
        Err(_) => return 0,
    };
    let bits = n as f64 * (i_ab - i_eve)
        - leak_ec as f64
        - (2.0 / fk.eps_ec).log2()
        - 2.0 * (1.0 / fk.eps_pa).log2();
    if bits <= 0.0 {
        0
    } else {
        bits.floor() as u64
    }
}

/// Why a session ended without a key.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// Estimated QBER above the configured threshold.
    EavesdroppingSuspected,
    /// The finite-key bound left no extractable bits.
    NoKey,
    /// Nothing survived sifting.
    NothingSifted,
}

/// Final result of a session, serializable as the session report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SessionReport {
    pub rounds: u64,
    pub master_seed: u64,
    pub detected: u64,
    pub sifted: u64,
    pub key_symbols: u64,
    pub estimation_symbols: u64,
    pub estimate: Option<ParamEstimate>,
    /// Mutual information used in the key-length bound, from the
    /// neighbor-refined formula on bucket fractions estimated from the
    /// estimation set.
    pub i_ab: Option<f64>,
    pub leak_ec: u64,
    pub final_key_bits: u64,
    pub abort: Option<AbortReason>,
    pub keys_match: Option<bool>,
    pub alice_key_hex: Option<String>,
    pub bob_key_hex: Option<String>,
    pub eps_ec: f64,
    pub eps_pa: f64,
}

fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|c| {
            let mut v = 0u8;
            for (i, &b) in c.iter().enumerate() {
                v |= b << (3 - i);
            }
            format!("{v:x}")
        })
        .collect()
}

/// Estimate the crosstalk bucket fractions from aligned symbol pairs.
fn bucket_fractions(pairs: &[(SymbolId, SymbolId)], grid: &SymbolGrid) -> (f64, f64, f64, f64) {
    let (mut c0, mut c1, mut c2) = (0u64, 0u64, 0u64);
    for &(a, b) in pairs {
        if a == b {
            c0 += 1;
            continue;
        }
        let n = grid.neighbors(a);
        if n.nearest.contains(&b) {
            c1 += 1;
        } else if n.next_nearest.contains(&b) {
            c2 += 1;
        }
    }
    let t = pairs.len() as f64;
    let (p0, p1, p2) = (c0 as f64 / t, c1 as f64 / t, c2 as f64 / t);
    (p0, p1, p2, 1.0 - p0 - p1 - p2)
}

/// Run the complete protocol: quantum phase, sifting, estimation, abort
/// check, cascade reconciliation, privacy amplification.
pub fn run_full_session(cfg: &SessionConfig) -> Result<SessionReport, ProtocolError> {
    let grid = *cfg.channel.grid();
    let d = grid.dimension();
    let transcript = run_session(cfg)?;

    let mut report = SessionReport {
        rounds: cfg.rounds,
        master_seed: cfg.master_seed,
        detected: transcript.detected,
        sifted: 0,
        key_symbols: 0,
        estimation_symbols: 0,
        estimate: None,
        i_ab: None,
        leak_ec: 0,
        final_key_bits: 0,
        abort: None,
        keys_match: None,
        alice_key_hex: None,
        bob_key_hex: None,
        eps_ec: cfg.finite_key.eps_ec,
        eps_pa: cfg.finite_key.eps_pa,
    };

    let mut sift_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.master_seed, "sifting"));
    let sifted = match sift(&transcript, &cfg.finite_key, &mut sift_rng) {
        Ok(s) => s,
        Err(ProtocolError::NothingToSift) => {
            report.abort = Some(AbortReason::NothingSifted);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.sifted = (sifted.key_pairs.len() + sifted.estimation_pairs.len()) as u64;
    report.key_symbols = sifted.key_pairs.len() as u64;
    report.estimation_symbols = sifted.estimation_pairs.len() as u64;

    let estimate = estimate_parameters(&sifted.estimation_pairs, &grid)?;
    report.estimate = Some(estimate);
    if estimate.qber > cfg.qber_abort_threshold {
        report.abort = Some(AbortReason::EavesdroppingSuspected);
        return Ok(report);
    }

    let (p0, p1, p2, p_rest) = bucket_fractions(&sifted.estimation_pairs, &grid);
    let i_ab = match crate::channel::CrosstalkProfile::new(p0, p1, p2, p_rest.max(0.0)) {
        Ok(profile) => mi_neighbor(&profile, d),
        // rounding pushed a bucket out of range; fall back to the
        // fidelity-only form
        Err(_) => match Fidelity::new(estimate.fidelity, d) {
            Ok(f) => crate::infotheory::mi_fidelity(f, d),
            Err(_) => 0.0,
        },
    };
    report.i_ab = Some(i_ab);

    let (alice_bits, bob_bits) = gray_bit_strings(&sifted.key_pairs, &grid);
    let mut cascade_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.master_seed, "cascade"));
    let outcome = cascade_reconcile(&alice_bits, &bob_bits, estimate.qber, &mut cascade_rng)?;
    report.leak_ec = outcome.leaked_bits;

    let f_hat = match Fidelity::new(estimate.fidelity, d) {
        Ok(f) => f,
        Err(_) => {
            report.abort = Some(AbortReason::NoKey);
            return Ok(report);
        }
    };
    let final_len = final_key_length(
        &cfg.finite_key,
        i_ab,
        f_hat,
        sifted.key_pairs.len() as u64,
        sifted.estimation_pairs.len() as u64,
        outcome.leaked_bits,
        d,
    );
    if final_len == 0 {
        report.abort = Some(AbortReason::NoKey);
        return Ok(report);
    }

    let pa_seed = derive_seed(cfg.master_seed, "privacy-amplification");
    let alice_key = toeplitz_hash(&alice_bits, final_len as usize, pa_seed)?;
    let bob_key = toeplitz_hash(&outcome.corrected, final_len as usize, pa_seed)?;
    report.final_key_bits = final_len;
    report.keys_match = Some(alice_key == bob_key);
    report.alice_key_hex = Some(bits_to_hex(&alice_key));
    report.bob_key_hex = Some(bits_to_hex(&bob_key));
    Ok(report)
}
