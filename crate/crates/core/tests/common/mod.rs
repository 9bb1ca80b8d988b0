#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spin_needlets::harmonics::HarmonicCoeffs;
use spin_needlets::needlets::{build_frame, Flavor, NeedletFrame};
use spin_needlets::sphere::Direction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_direction(rng: &mut ChaCha8Rng) -> Direction {
    let z: f64 = rng.random_range(-0.999..0.999);
    Direction::new(z.acos(), rng.random_range(-PI..PI)).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(1e-300..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// Random coefficients on `l ∈ [s+1, lmax]` with unit-variance complex entries.
pub fn random_coeffs(rng: &mut ChaCha8Rng, spin: i64, lmax: usize) -> HarmonicCoeffs {
    let mut a = HarmonicCoeffs::zeros(spin, lmax);
    for l in (spin as usize + 1)..=lmax {
        for m in -(l as i64)..=(l as i64) {
            a.set(l, m, Complex64::new(gaussian(rng), gaussian(rng))).unwrap();
        }
    }
    a
}

/// Coefficients of a real scalar field on `l ∈ [lmin, lmax]`.
pub fn real_field_coeffs(rng: &mut ChaCha8Rng, lmin: usize, lmax: usize) -> HarmonicCoeffs {
    let mut a = HarmonicCoeffs::zeros(0, lmax);
    for l in lmin..=lmax {
        a.set(l, 0, Complex64::new(gaussian(rng), 0.0)).unwrap();
        for m in 1..=(l as i64) {
            let c = Complex64::new(gaussian(rng), gaussian(rng));
            a.set(l, m, c).unwrap();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            a.set(l, -m, c.conj() * sign).unwrap();
        }
    }
    a
}

/// Smallest frame whose partition of unity covers degree `lmax`.
pub fn covering_frame(bandwidth: f64, spin: i64, flavor: Flavor, lmax: usize) -> NeedletFrame {
    let mut j_max = 0;
    loop {
        let f = build_frame(bandwidth, spin, flavor, j_max).unwrap();
        if f.covers_degree(lmax) {
            return f;
        }
        j_max += 1;
    }
}
