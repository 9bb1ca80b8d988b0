//! Points on the sphere, associated Legendre functions and (spin-weighted)
//! spherical harmonics.
//!
//! Phase conventions: `P_lm` carries no Condon–Shortley factor, scalar
//! harmonics are `Y_lm = N_lm P_lm(cos θ) e^{imφ}` for `m ≥ 0` and
//! `Y_{l,-m} = (-1)^m conj(Y_lm)`. Spin harmonics are
//! `Y_{lm;s}(θ, φ) = sqrt((2l+1)/4π) d^l_{-m,s}(θ) e^{imφ}`, which agrees
//! with the scalar harmonics at `s = 0` and satisfies
//! `ð Y_{lm;s} = sqrt((l-s)(l+s+1)) Y_{lm;s+1}` for the raising operator
//! implemented in [`eth`].
//!
//! All spin quantities live in the single chart that excludes both poles.

pub mod eth;
mod wigner;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use wigner::{BatchScratch, SpinLegendre, ThetaPoint};

/// Complex field amplitude.
pub type ComplexValue = Complex64;

/// A point on the unit sphere in colatitude/longitude coordinates.
///
/// The colatitude is strictly inside `(0, π)`; the longitude is kept in
/// `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    /// Smallest admissible distance from a pole for callers that clamp.
    pub const POLE_MARGIN: f64 = 1e-9;

    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite direction (theta={theta}, phi={phi})"
            )));
        }
        if theta <= 0.0 || theta >= PI {
            return Err(Error::Domain(format!(
                "colatitude {theta} not strictly inside (0, pi); poles are excluded"
            )));
        }
        Ok(Direction {
            theta,
            phi: wrap_longitude(phi),
        })
    }

    /// Builds a direction after clamping the colatitude into
    /// `[POLE_MARGIN, π - POLE_MARGIN]`.
    pub fn clamped(theta: f64, phi: f64) -> Result<Self> {
        Direction::new(
            theta.clamp(Self::POLE_MARGIN, PI - Self::POLE_MARGIN),
            phi,
        )
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Great-circle distance in radians.
    pub fn geodesic_distance(&self, other: &Direction) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        cn.atan2(dot)
    }
}

fn wrap_longitude(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut p = (phi + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2π
    if p >= PI {
        p -= two_pi;
    }
    p
}

/// Degree, order and spin of a harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    pub l: usize,
    pub m: i64,
    pub s: i64,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: i64, s: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("|m|={} exceeds l={l}", m.abs())));
        }
        if s.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("|s|={} exceeds l={l}", s.abs())));
        }
        Ok(HarmonicIndex { l, m, s })
    }
}

/// `P_lm(x) = (1-x²)^{m/2} d^m/dx^m P_l(x)`, without the Condon–Shortley phase.
pub fn legendre_assoc(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order m={m} exceeds degree l={l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument x={x} outside [-1, 1]")));
    }
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    // P_mm = (2m-1)!! (1-x²)^{m/2}
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return Ok(pmmp1);
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    Ok(pll)
}

/// Scalar spherical harmonic `Y_lm`.
///
/// Evaluated with the normalised associated Legendre recursion, so it stays
/// finite for large degrees where the unnormalised `P_lm` overflows.
pub fn ylm(idx: HarmonicIndex, dir: Direction) -> Result<ComplexValue> {
    if idx.s != 0 {
        return Err(Error::Domain(format!(
            "ylm expects spin 0, got s={}",
            idx.s
        )));
    }
    HarmonicIndex::new(idx.l, idx.m, 0)?;
    if idx.m < 0 {
        let pos = ylm(HarmonicIndex { m: -idx.m, ..idx }, dir)?;
        let sign = if idx.m % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(pos.conj() * sign);
    }
    let m = idx.m as usize;
    let theta_part = normalized_legendre(idx.l, m, dir.theta);
    Ok(Complex64::from_polar(theta_part, m as f64 * dir.phi))
}

/// `sqrt((2l+1)/4π (l-m)!/(l+m)!) P_lm(cos θ)`, `m ≥ 0`.
fn normalized_legendre(l: usize, m: usize, theta: f64) -> f64 {
    let (st, x) = theta.sin_cos();
    let mut pmm = (0.25 / PI).sqrt();
    for k in 1..=m {
        let k = k as f64;
        pmm *= ((2.0 * k + 1.0) / (2.0 * k)).sqrt() * st;
    }
    if l == m {
        return pmm;
    }
    let mut p_prev = pmm;
    let mut p_cur = x * ((2 * m + 3) as f64).sqrt() * pmm;
    let mf = m as f64;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let a_prev = ((4.0 * lp * lp - 1.0) / (lp * lp - mf * mf)).sqrt();
        let next = a * (x * p_cur - p_prev / a_prev);
        p_prev = p_cur;
        p_cur = next;
    }
    p_cur
}

/// Eigenvalue `e_ls = (l-s)(l+s+1)` of `-ð̄ð` on spin-`s` harmonics of degree `l`.
pub fn eigenvalue_spin(l: usize, s: i64) -> Result<f64> {
    if (s.unsigned_abs() as usize) > l {
        return Err(Error::Domain(format!("degree l={l} below |s|={}", s.abs())));
    }
    let l = l as f64;
    let s = s as f64;
    Ok((l - s) * (l + s + 1.0))
}

/// Spin-weighted spherical harmonic `Y_{lm;s}`; reduces to [`ylm`] at `s = 0`.
pub fn spin_ylm(idx: HarmonicIndex, dir: Direction) -> Result<ComplexValue> {
    let idx = HarmonicIndex::new(idx.l, idx.m, idx.s)?;
    if idx.s == 0 {
        return ylm(idx, dir);
    }
    let table = SpinLegendre::new(idx.s, idx.l);
    let point = ThetaPoint::new(dir.theta);
    let mut out = vec![0.0; idx.l + 1];
    table.fill(idx.m, &point, &mut out);
    Ok(Complex64::from_polar(1.0, idx.m as f64 * dir.phi) * out[idx.l])
}
