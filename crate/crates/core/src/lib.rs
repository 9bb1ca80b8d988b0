//! Spin needlets on the sphere and nonparametric regression of spin fields.
//!
//! The crate covers spin-weighted harmonics and the spin-raising operator
//! ([`sphere`]), exact product cubature ([`quadrature`]), harmonic
//! transforms ([`harmonics`]), scalar, pure-spin and mixed needlet frames
//! ([`needlets`]), Besov balls of spin fields ([`besov`]), the thresholded
//! needlet estimator ([`regression`]) and the convergence-rate experiment
//! ([`bench`]).

pub mod bench;
pub mod besov;
pub mod error;
pub mod format;
pub mod harmonics;
pub mod needlets;
pub mod quadrature;
pub mod regression;
pub mod sphere;

pub use error::{Error, Result};
