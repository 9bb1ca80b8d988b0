//! Finite-difference spin raising/lowering operators on a regular
//! colatitude–longitude grid.
//!
//! Second-order central differences in both angles (periodic in φ,
//! one-sided second-order stencils on the first and last colatitude rows).
//! Intended as a verification oracle for the harmonic evaluators.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::Direction;
use crate::error::{Error, Result};

/// Regular grid `θ_i = θ_min + i h_θ`, `φ_q = 2πq / n_φ`, poles excluded.
#[derive(Debug, Clone)]
pub struct ThetaPhiGrid {
    thetas: Vec<f64>,
    nphi: usize,
}

impl ThetaPhiGrid {
    pub fn new(theta_min: f64, theta_max: f64, ntheta: usize, nphi: usize) -> Result<Self> {
        if ntheta < 3 || nphi < 3 {
            return Err(Error::Domain(format!(
                "grid needs at least 3x3 points, got {ntheta}x{nphi}"
            )));
        }
        if theta_min <= 0.0 || theta_max >= PI || theta_min >= theta_max {
            return Err(Error::Domain(format!(
                "colatitude range [{theta_min}, {theta_max}] touches a pole or is empty"
            )));
        }
        let h = (theta_max - theta_min) / (ntheta - 1) as f64;
        let thetas = (0..ntheta).map(|i| theta_min + i as f64 * h).collect();
        Ok(ThetaPhiGrid { thetas, nphi })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.nphi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta_step(&self) -> f64 {
        self.thetas[1] - self.thetas[0]
    }

    pub fn phi_step(&self) -> f64 {
        2.0 * PI / self.nphi as f64
    }

    pub fn direction(&self, i: usize, q: usize) -> Direction {
        Direction::new(self.thetas[i], q as f64 * self.phi_step())
            .expect("grid excludes poles")
    }

    /// Samples `f` at every grid point, row-major in `(θ, φ)`.
    pub fn sample<F>(&self, mut f: F) -> Result<Vec<Complex64>>
    where
        F: FnMut(Direction) -> Result<Complex64>,
    {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.thetas.len() {
            for q in 0..self.nphi {
                out.push(f(self.direction(i, q))?);
            }
        }
        Ok(out)
    }
}

/// Applies `ð` (`raise = true`) or `ð̄` to a spin-`s` field sampled on `grid`.
pub fn apply_eth(
    field: &[Complex64],
    grid: &ThetaPhiGrid,
    s: i64,
    raise: bool,
) -> Result<Vec<Complex64>> {
    if field.len() != grid.len() {
        return Err(Error::Usage(format!(
            "field has {} samples, grid has {}",
            field.len(),
            grid.len()
        )));
    }
    let nt = grid.thetas.len();
    let np = grid.nphi;
    let ht = grid.theta_step();
    let hp = grid.phi_step();
    // inner power of sin θ, outer power is its negative
    let inner = if raise { -s } else { s } as i32;
    let dir_sign = if raise { 1.0 } else { -1.0 };

    let weighted: Vec<Complex64> = field
        .iter()
        .enumerate()
        .map(|(idx, v)| v * grid.thetas[idx / np].sin().powi(inner))
        .collect();
    let at = |i: usize, q: usize| weighted[i * np + q];

    let mut out = Vec::with_capacity(field.len());
    for i in 0..nt {
        let st = grid.thetas[i].sin();
        for q in 0..np {
            let d_theta = if i == 0 {
                (-3.0 * at(0, q) + 4.0 * at(1, q) - at(2, q)) / (2.0 * ht)
            } else if i == nt - 1 {
                (3.0 * at(i, q) - 4.0 * at(i - 1, q) + at(i - 2, q)) / (2.0 * ht)
            } else {
                (at(i + 1, q) - at(i - 1, q)) / (2.0 * ht)
            };
            let d_phi = (at(i, (q + 1) % np) - at(i, (q + np - 1) % np)) / (2.0 * hp);
            let d = d_theta + Complex64::i() * dir_sign * d_phi / st;
            out.push(-d * st.powi(-inner));
        }
    }
    Ok(out)
}
