//! Product cubature rules on the sphere: Gauss–Legendre in `cos θ` times an
//! equispaced longitude rule.
//!
//! A rule built for band-limit `L` integrates every product
//! `Y_{lm;s} conj(Y_{l'm';s})` with `l, l' ≤ L` exactly, i.e. every
//! spherical polynomial of degree `≤ 2L`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::Direction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureNode {
    pub point: Direction,
    /// Positive weight in steradians.
    pub weight: f64,
}

/// Node/weight set, stored ring by ring: node `k = i * nphi + q` sits at
/// colatitude `thetas[i]` and longitude `2πq / nphi`.
#[derive(Debug, Clone)]
pub struct CubatureSet {
    degree: usize,
    level: Option<usize>,
    bandwidth: Option<f64>,
    thetas: Vec<f64>,
    nphi: usize,
    nodes: Vec<CubatureNode>,
}

impl CubatureSet {
    /// Band-limit `L` of the exactness guarantee.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Highest polynomial degree integrated exactly (`2L`).
    pub fn polynomial_degree(&self) -> usize {
        2 * self.degree
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn nodes(&self) -> &[CubatureNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn nrings(&self) -> usize {
        self.thetas.len()
    }

    pub fn weight_range(&self) -> (f64, f64) {
        self.nodes.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), n| {
            (lo.min(n.weight), hi.max(n.weight))
        })
    }

    /// Index of the node closest to the equator at longitude zero.
    pub fn equatorial_node(&self) -> usize {
        let ring = self
            .thetas
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - PI / 2.0)
                    .abs()
                    .partial_cmp(&(b.1 - PI / 2.0).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        ring * self.nphi
    }
}

/// Gauss–Legendre nodes (descending in `x`, i.e. ascending colatitude) and
/// weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = legendre_with_derivative(n, z).1;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                dp = legendre_with_derivative(n, z).1;
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut pm1, mut p) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let pn = ((2.0 * kf - 1.0) * z * p - (kf - 1.0) * pm1) / kf;
        pm1 = p;
        p = pn;
    }
    if n == 1 {
        return (z, 1.0);
    }
    (p, n as f64 * (z * p - pm1) / (z * z - 1.0))
}

/// Product rule exact for products of harmonics of degree `≤ degree`.
pub fn build_cubature(degree: usize) -> CubatureSet {
    let (x, w) = gauss_legendre(degree + 1);
    let nphi = 2 * degree + 1;
    let dphi = 2.0 * PI / nphi as f64;
    let thetas: Vec<f64> = x.iter().map(|v| v.acos()).collect();
    let mut nodes = Vec::with_capacity(thetas.len() * nphi);
    for (theta, wi) in thetas.iter().zip(&w) {
        for q in 0..nphi {
            nodes.push(CubatureNode {
                point: Direction::new(*theta, q as f64 * dphi).expect("GL nodes avoid the poles"),
                weight: wi * dphi,
            });
        }
    }
    CubatureSet {
        degree,
        level: None,
        bandwidth: None,
        thetas,
        nphi,
        nodes,
    }
}

/// `⌈2B^{j+1}⌉`, the exactness degree required at needlet level `j`.
pub fn level_degree(bandwidth: f64, j: usize) -> usize {
    let d = 2.0 * bandwidth.powi(j as i32 + 1);
    (d - 1e-9).ceil().max(0.0) as usize
}

/// Cubature set for needlet level `j`, exact at degree `⌈2B^{j+1}⌉`.
pub fn level_cubature(bandwidth: f64, j: usize) -> Result<CubatureSet> {
    if !(bandwidth > 1.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!("bandwidth B={bandwidth} must exceed 1")));
    }
    Ok(build_cubature(level_degree(bandwidth, j)).with_level(j, bandwidth))
}

/// `Σ_k λ_k values_k`.
pub fn integrate(values: &[Complex64], set: &CubatureSet) -> Result<Complex64> {
    if values.len() != set.len() {
        return Err(Error::Usage(format!(
            "{} values for {} cubature nodes",
            values.len(),
            set.len()
        )));
    }
    Ok(values
        .iter()
        .zip(&set.nodes)
        .map(|(v, n)| v * n.weight)
        .sum())
}

impl CubatureSet {
    /// Tags the set with the needlet level it serves.
    pub fn with_level(mut self, j: usize, bandwidth: f64) -> Self {
        self.level = Some(j);
        self.bandwidth = Some(bandwidth);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{spin_ylm, ylm, HarmonicIndex};

    fn sample<F: Fn(Direction) -> Complex64>(set: &CubatureSet, f: F) -> Vec<Complex64> {
        set.nodes().iter().map(|n| f(n.point)).collect()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
        let (x, w) = gauss_legendre(300);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn constant_mode_and_weight_sum() {
        let set = build_cubature(0);
        let v = sample(&set, |d| ylm(HarmonicIndex::new(0, 0, 0).unwrap(), d).unwrap());
        let i = integrate(&v, &set).unwrap();
        assert!((i.re - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert!((i.re - 3.544908).abs() < 1e-6);
        for l in [1usize, 5, 17, 40] {
            let set = build_cubature(l);
            let ones = vec![Complex64::new(1.0, 0.0); set.len()];
            assert!((integrate(&ones, &set).unwrap().re - 4.0 * PI).abs() < 1e-12);
            assert!(set.nodes().iter().all(|n| n.weight > 0.0));
        }
    }

    #[test]
    fn scalar_products_are_exact() {
        let set = build_cubature(3);
        let y = |l, m| move |d| ylm(HarmonicIndex::new(l, m, 0).unwrap(), d).unwrap();
        let v = sample(&set, |d| y(3, 2)(d) * y(3, 2)(d).conj());
        assert!((integrate(&v, &set).unwrap() - 1.0).norm() < 1e-12);
        let v = sample(&set, |d| y(2, 1)(d) * y(3, 1)(d).conj());
        assert!(integrate(&v, &set).unwrap().norm() < 1e-12);
        let v = sample(&set, |d| y(1, 0)(d) * y(1, 0)(d).conj());
        assert!((integrate(&v, &set).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn spin_products_are_exact() {
        let set = build_cubature(2);
        let v = sample(&set, |d| {
            spin_ylm(HarmonicIndex::new(2, 2, 2).unwrap(), d).unwrap().norm_sqr().into()
        });
        assert!((integrate(&v, &set).unwrap() - 1.0).norm() < 1e-10);
        let set = build_cubature(3);
        let v = sample(&set, |d| {
            spin_ylm(HarmonicIndex::new(3, 1, 2).unwrap(), d).unwrap().norm_sqr().into()
        });
        assert!((integrate(&v, &set).unwrap() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn integrate_rejects_misaligned_values() {
        let set = build_cubature(2);
        assert!(matches!(
            integrate(&[Complex64::default(); 2], &set),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn level_sets() {
        assert!(level_cubature(1.0, 0).is_err());
        assert!(level_cubature(0.5, 2).is_err());
        let s = level_cubature(2.0, 0).unwrap();
        assert_eq!(s.degree(), 4);
        assert_eq!(s.level(), Some(0));
        let ones = vec![Complex64::new(1.0, 0.0); s.len()];
        assert!((integrate(&ones, &s).unwrap().re - 4.0 * PI).abs() < 1e-12);
        assert_eq!(level_degree(1.5, 0), 3);
        assert_eq!(level_degree(2.0, 3), 32);
    }

    #[test]
    fn level_node_counts() {
        // (2L+1)(L+1) nodes with L = 32 at B = 2, j = 3
        let s = level_cubature(2.0, 3).unwrap();
        let ratio = s.len() as f64 / 2f64.powi(6);
        assert!((32.0..36.0).contains(&ratio), "{ratio}");

        let xs: Vec<f64> = (1..=5).map(|j| j as f64 * 4f64.ln()).collect();
        let ys: Vec<f64> = (1..=5)
            .map(|j| (level_cubature(2.0, j).unwrap().len() as f64).ln())
            .collect();
        let mx = xs.iter().sum::<f64>() / 5.0;
        let my = ys.iter().sum::<f64>() / 5.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn level_weight_spread() {
        let s = level_cubature(2.0, 2).unwrap();
        let (lo, hi) = s.weight_range();
        assert!(hi / lo < 16.0, "{}", hi / lo);
    }
}
