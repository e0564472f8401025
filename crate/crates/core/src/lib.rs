//! Single-transceiver radar imaging through a reconfigurable intelligent
//! surface (RIS).
//!
//! The crate models a bistatic radar in which one transmit antenna
//! illuminates a passive RIS, the RIS re-radiates every pulse with a
//! different phase profile, and one receive antenna collects the echoes
//! from a sparse scene. Stacking `N` pulses at a single frequency gives the
//! compressive model
//!
//! ```text
//! y = Φ Q Ψ r + n = D r + n
//! ```
//!
//! where `Φ` (N×M) holds the unit-modulus RIS phase profiles, `Q` the
//! transmitter-to-RIS attenuations, `Ψ` (M×K) the RIS-to-target-to-receiver
//! steering vectors, and `r` the reflectivity of the `K` image pixels.
//!
//! Modules:
//! - [`geometry`]: element/grid positions, path lengths, attenuation.
//! - [`forward`]: dictionary, measurement matrix, noisy synthesis, Gram.
//! - [`design`]: projected gradient phase design and baseline phase matrices.
//! - [`recovery`]: complex ℓ1 solver, exhaustive ℓ0 oracle, support tools.
//! - [`experiment`]: scene presets, seed splitting, Monte Carlo cell evaluation.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod design;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod geometry;
pub mod recovery;
mod seed;

pub use error::{Error, Result};
pub use seed::{fingerprint_f64s, mix64};

/// Complex scalar used throughout.
pub type Cx = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Cx>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Cx>;
/// Position in meters.
pub type Point = nalgebra::Vector3<f64>;
