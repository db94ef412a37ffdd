//! Simulator and analysis toolkit for a high-dimensional BB84 protocol
//! that encodes 10 bits per photon in a 32×32 grid of transverse spatial
//! positions, measured in either the image or the Fourier plane.
//!
//! The crate models the whole pipeline: the symbol alphabet and its Gray
//! coding ([`alphabet`]), the crosstalk channel between the planes
//! ([`channel`]), mutual-information estimates and their neighbor-aware
//! refinement ([`infotheory`]), finite-key and intercept-resend security
//! bounds ([`security`]), the full session engine with cascade
//! reconciliation and Toeplitz privacy amplification ([`protocol`]), and a
//! synthetic single-photon camera ([`detector`]). Everything is
//! deterministic per seed.
//!
//! # Quick start
//!
//! Run a small noiseless session end to end:
//!
//! ```
//! use spatial_qkd::protocol::{run_full_session, SendSpec, SessionConfig};
//! use spatial_qkd::channel::ChannelModel;
//! use spatial_qkd::security::FiniteKeyParams;
//!
//! let cfg = SessionConfig {
//!     rounds: 4000,
//!     channel: ChannelModel::noiseless(),
//!     send_image: SendSpec::Uniform,
//!     send_fourier: SendSpec::Uniform,
//!     basis_bias: 0.5,
//!     finite_key: FiniteKeyParams::defaults(4000),
//!     qber_abort_threshold: 0.1,
//!     master_seed: 7,
//! };
//! let report = run_full_session(&cfg).unwrap();
//! assert_eq!(report.keys_match, Some(true));
//! assert!(report.final_key_bits > 0);
//! ```
//!
//! Or evaluate the secret-key-rate bound directly:
//!
//! ```
//! use spatial_qkd::infotheory::Fidelity;
//! use spatial_qkd::security::{secret_key_rate, FiniteKeyParams};
//!
//! let f = Fidelity::new(0.755, 1024).unwrap();
//! let fk = FiniteKeyParams::defaults(1_000_000);
//! let point = secret_key_rate(&fk, 6.75, f, 1024).unwrap();
//! assert!(point.rate > 0.0);
//! ```

pub mod alphabet;
pub mod channel;
pub mod config;
pub mod detector;
pub mod infotheory;
pub mod protocol;
pub mod security;
