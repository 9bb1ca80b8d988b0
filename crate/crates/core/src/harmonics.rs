//! Band-limited spin fields stored as harmonic coefficients, with point
//! evaluation, adjoint accumulation from scattered samples, and fast
//! ring-by-ring transforms on product cubature grids.


use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::CubatureSet;
use crate::sphere::{BatchScratch, Direction, SpinLegendre, ThetaPoint};

/// Coefficients `a_{lm;s}` for `|s| ≤ l ≤ lmax`, `|m| ≤ l`.
///
/// Entries with `l < max(|m|, |s|)` are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    spin: i64,
    lmax: usize,
    data: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(spin: i64, lmax: usize) -> Self {
        HarmonicCoeffs {
            spin,
            lmax,
            data: vec![Complex64::default(); (2 * lmax + 1) * (lmax + 1)],
        }
    }

    pub fn spin(&self) -> i64 {
        self.spin
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    #[inline]
    fn idx(&self, l: usize, m: i64) -> usize {
        (m + self.lmax as i64) as usize * (self.lmax + 1) + l
    }

    fn valid(&self, l: usize, m: i64) -> bool {
        l <= self.lmax && m.unsigned_abs() as usize <= l && self.spin.unsigned_abs() as usize <= l
    }

    /// Coefficient at `(l, m)`, zero outside the stored range.
    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        if self.valid(l, m) {
            self.data[self.idx(l, m)]
        } else {
            Complex64::default()
        }
    }

    pub fn set(&mut self, l: usize, m: i64, value: Complex64) -> Result<()> {
        if !self.valid(l, m) {
            return Err(Error::Domain(format!(
                "(l={l}, m={m}) outside spin-{} band-limit {}",
                self.spin, self.lmax
            )));
        }
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficient at (l={l}, m={m})")));
        }
        let i = self.idx(l, m);
        self.data[i] = value;
        Ok(())
    }

    pub(crate) fn add_at(&mut self, l: usize, m: i64, value: Complex64) {
        let i = self.idx(l, m);
        self.data[i] += value;
    }

    /// Iterates over every admissible `(l, m, a_lm)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, Complex64)> + '_ {
        let s = self.spin.unsigned_abs() as usize;
        (s..=self.lmax).flat_map(move |l| {
            (-(l as i64)..=(l as i64)).map(move |m| (l, m, self.data[self.idx(l, m)]))
        })
    }

    /// `Σ |a_lm|²`, the squared L² norm of the field.
    pub fn energy(&self) -> f64 {
        self.iter().map(|(_, _, a)| a.norm_sqr()).sum()
    }

    /// Largest `|a_lm|` over degrees `l ≤ degree`.
    pub fn max_abs_up_to(&self, degree: usize) -> f64 {
        self.iter()
            .filter(|(l, _, _)| *l <= degree)
            .map(|(_, _, a)| a.norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        HarmonicCoeffs {
            data: self.data.iter().map(|a| a * c).collect(),
            ..self.clone()
        }
    }

    /// Copy with a different band-limit (truncating or zero-padding).
    pub fn with_lmax(&self, lmax: usize) -> Self {
        let mut out = HarmonicCoeffs::zeros(self.spin, lmax);
        for (l, m, a) in self.iter().filter(|(l, _, _)| *l <= lmax) {
            let i = out.idx(l, m);
            out.data[i] = a;
        }
        out
    }

    /// Highest degree carrying a non-zero coefficient (0 when all vanish).
    pub fn effective_lmax(&self) -> usize {
        self.iter()
            .filter(|(_, _, a)| *a != Complex64::default())
            .map(|(l, _, _)| l)
            .max()
            .unwrap_or(0)
    }

    /// `self + c * other`, on the larger of the two band-limits.
    pub fn axpy(&self, c: Complex64, other: &HarmonicCoeffs) -> Result<Self> {
        if self.spin != other.spin {
            return Err(Error::Usage(format!(
                "cannot combine spin {} with spin {}",
                self.spin, other.spin
            )));
        }
        let mut out = self.with_lmax(self.lmax.max(other.lmax));
        for (l, m, a) in other.iter() {
            out.add_at(l, m, c * a);
        }
        Ok(out)
    }
}

/// Points processed together by the batched transforms.
const BATCH: usize = 256;

/// Evaluation and transforms for one harmonic basis (spin weight) up to `lmax`.
#[derive(Debug, Clone)]
pub struct HarmonicTransform {
    table: SpinLegendre,
}

impl HarmonicTransform {
    pub fn new(spin: i64, lmax: usize) -> Self {
        HarmonicTransform {
            table: SpinLegendre::new(spin, lmax),
        }
    }

    pub fn spin(&self) -> i64 {
        self.table.spin()
    }

    pub fn lmax(&self) -> usize {
        self.table.lmax()
    }

    fn check_band(&self, lmax: usize) -> Result<()> {
        if lmax > self.lmax() {
            return Err(Error::Usage(format!(
                "coefficients of band-limit {lmax} exceed transform band-limit {}",
                self.lmax()
            )));
        }
        Ok(())
    }

    /// `Σ_lm a_lm Y_{lm;s}(x)` in this transform's spin basis.
    pub fn evaluate(&self, coeffs: &HarmonicCoeffs, dir: Direction) -> Result<Complex64> {
        self.check_band(coeffs.lmax())?;
        Ok(self.evaluate_unchecked(coeffs, dir))
    }

    pub(crate) fn evaluate_unchecked(&self, coeffs: &HarmonicCoeffs, dir: Direction) -> Complex64 {
        let point = ThetaPoint::new(dir.theta());
        let top = coeffs.lmax();
        let lm = top as i64;
        let mut acc = Complex64::default();
        for m in -lm..=lm {
            let mut g = Complex64::default();
            let base = coeffs.idx(0, m);
            self.table.for_each(m, &point, top, |l, v| {
                g += coeffs.data[base + l] * v;
            });
            acc += g * Complex64::from_polar(1.0, m as f64 * dir.phi());
        }
        acc
    }

    pub fn evaluate_many(&self, coeffs: &HarmonicCoeffs, dirs: &[Direction]) -> Result<Vec<Complex64>> {
        self.check_band(coeffs.lmax())?;
        let top = coeffs.lmax();
        let lm = top as i64;
        let mut out = Vec::with_capacity(dirs.len());
        let mut scratch = BatchScratch::default();
        for chunk in dirs.chunks(BATCH) {
            let points: Vec<ThetaPoint> = chunk.iter().map(|d| ThetaPoint::new(d.theta())).collect();
            let step: Vec<Complex64> = chunk.iter().map(|d| Complex64::from_polar(1.0, d.phi())).collect();
            let mut phase: Vec<Complex64> = chunk
                .iter()
                .map(|d| Complex64::from_polar(1.0, -(lm as f64) * d.phi()))
                .collect();
            let mut acc = vec![Complex64::default(); chunk.len()];
            let mut gr = vec![0.0; chunk.len()];
            let mut gi = vec![0.0; chunk.len()];
            for m in -lm..=lm {
                gr.fill(0.0);
                gi.fill(0.0);
                let base = coeffs.idx(0, m);
                self.table.for_each_batch(m, &points, top, &mut scratch, |l, v| {
                    let a = coeffs.data[base + l];
                    for ((r, i), x) in gr.iter_mut().zip(gi.iter_mut()).zip(v) {
                        *r += a.re * x;
                        *i += a.im * x;
                    }
                });
                for (((s, p), r), i) in acc.iter_mut().zip(phase.iter_mut()).zip(&gr).zip(&gi) {
                    *s += Complex64::new(*r, *i) * *p;
                }
                for (p, st) in phase.iter_mut().zip(&step) {
                    *p *= st;
                }
            }
            out.extend(acc);
        }
        Ok(out)
    }

    /// `out_lm += Σ_i weights_i conj(Y_{lm;s}(dirs_i))`, batched over points.
    pub fn accumulate_conj_many(
        &self,
        dirs: &[Direction],
        weights: &[Complex64],
        out: &mut HarmonicCoeffs,
    ) -> Result<()> {
        if dirs.len() != weights.len() {
            return Err(Error::Usage(format!(
                "{} weights for {} points",
                weights.len(),
                dirs.len()
            )));
        }
        let top = out.lmax().min(self.lmax());
        let lm = top as i64;
        let mut scratch = BatchScratch::default();
        for (chunk, wchunk) in dirs.chunks(BATCH).zip(weights.chunks(BATCH)) {
            let points: Vec<ThetaPoint> = chunk.iter().map(|d| ThetaPoint::new(d.theta())).collect();
            let step: Vec<Complex64> = chunk.iter().map(|d| Complex64::from_polar(1.0, -d.phi())).collect();
            let mut phase: Vec<Complex64> = chunk
                .iter()
                .zip(wchunk)
                .map(|(d, w)| w * Complex64::from_polar(1.0, lm as f64 * d.phi()))
                .collect();
            let mut fr = vec![0.0; chunk.len()];
            let mut fi = vec![0.0; chunk.len()];
            for m in -lm..=lm {
                for ((r, i), p) in fr.iter_mut().zip(fi.iter_mut()).zip(&phase) {
                    *r = p.re;
                    *i = p.im;
                }
                let base = out.idx(0, m);
                let data = &mut out.data;
                self.table.for_each_batch(m, &points, top, &mut scratch, |l, v| {
                    data[base + l] += Complex64::new(dot(&fr, v), dot(&fi, v));
                });
                for (p, st) in phase.iter_mut().zip(&step) {
                    *p *= st;
                }
            }
        }
        Ok(())
    }

    /// `out_lm += weight * conj(Y_{lm;s}(x))` for every `(l, m)` of `out`.
    pub fn accumulate_conj(&self, dir: Direction, weight: Complex64, out: &mut HarmonicCoeffs) {
        let point = ThetaPoint::new(dir.theta());
        let top = out.lmax().min(self.lmax());
        let lm = top as i64;
        for m in -lm..=lm {
            let f = weight * Complex64::from_polar(1.0, -(m as f64) * dir.phi());
            let base = out.idx(0, m);
            let data = &mut out.data;
            self.table.for_each(m, &point, top, |l, v| {
                data[base + l] += f * v;
            });
        }
    }

    /// Values of `Σ_lm band_l a_lm Y_{lm;s}` at every node of `set`, in node order.
    pub fn synthesize_rings(
        &self,
        coeffs: &HarmonicCoeffs,
        band: Option<&[f64]>,
        set: &CubatureSet,
    ) -> Result<Vec<Complex64>> {
        self.check_band(coeffs.lmax())?;
        let top = coeffs.lmax();
        let nphi = set.nphi();
        check_ring_resolution(top, nphi)?;
        let fft = FftPlanner::new().plan_fft_inverse(nphi);
        let lm = top as i64;
        let mut out = Vec::with_capacity(set.len());
        let mut buf = vec![Complex64::default(); nphi];
        for &theta in set.thetas() {
            let point = ThetaPoint::new(theta);
            buf.fill(Complex64::default());
            for m in -lm..=lm {
                let mut g = Complex64::default();
                let base = coeffs.idx(0, m);
                match band {
                    Some(b) => self.table.for_each(m, &point, top, |l, v| {
                        g += coeffs.data[base + l] * (v * b[l]);
                    }),
                    None => self.table.for_each(m, &point, top, |l, v| {
                        g += coeffs.data[base + l] * v;
                    }),
                }
                buf[m.rem_euclid(nphi as i64) as usize] = g;
            }
            fft.process(&mut buf);
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    /// `out_lm += band_l Σ_k values_k conj(Y_{lm;s}(ξ_k))` over the nodes of `set`.
    ///
    /// Weights are not applied; fold them into `values` when integrating.
    pub fn analyze_rings(
        &self,
        values: &[Complex64],
        band: Option<&[f64]>,
        set: &CubatureSet,
        out: &mut HarmonicCoeffs,
    ) -> Result<()> {
        if values.len() != set.len() {
            return Err(Error::Usage(format!(
                "{} values for {} nodes",
                values.len(),
                set.len()
            )));
        }
        self.check_band(out.lmax())?;
        let top = out.lmax();
        let nphi = set.nphi();
        check_ring_resolution(top, nphi)?;
        let fft = FftPlanner::new().plan_fft_forward(nphi);
        let lm = top as i64;
        let mut buf = vec![Complex64::default(); nphi];
        for (i, &theta) in set.thetas().iter().enumerate() {
            let point = ThetaPoint::new(theta);
            buf.copy_from_slice(&values[i * nphi..(i + 1) * nphi]);
            fft.process(&mut buf);
            for m in -lm..=lm {
                let g = buf[m.rem_euclid(nphi as i64) as usize];
                let base = out.idx(0, m);
                let data = &mut out.data;
                match band {
                    Some(b) => self.table.for_each(m, &point, top, |l, v| {
                        data[base + l] += g * (v * b[l]);
                    }),
                    None => self.table.for_each(m, &point, top, |l, v| {
                        data[base + l] += g * v;
                    }),
                }
            }
        }
        Ok(())
    }
}

/// Dot product with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_ring_resolution(lmax: usize, nphi: usize) -> Result<()> {
    if nphi < 2 * lmax + 1 {
        return Err(Error::Usage(format!(
            "{nphi} longitudes per ring cannot resolve band-limit {lmax}"
        )));
    }
    Ok(())
}

/// Dense-grid `L^p` quadrature of a band-limited field: returns `∫|F|^p`
/// (or `sup |F|` over the grid when `p = ∞`).
///
/// The grid is a product rule of band-limit `oversample * lmax`, which is
/// exact for `p ∈ {2, 4}` once `oversample ≥ 2`.
pub fn lp_power(
    transform: &HarmonicTransform,
    coeffs: &HarmonicCoeffs,
    p: f64,
    oversample: usize,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p index p={p} must be at least 1")));
    }
    let grid = crate::quadrature::build_cubature((oversample * coeffs.lmax()).max(1));
    let values = transform.synthesize_rings(coeffs, None, &grid)?;
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    Ok(values
        .iter()
        .zip(grid.nodes())
        .map(|(v, n)| n.weight * v.norm().powf(p))
        .sum())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_cubature, integrate};
    use crate::sphere::{spin_ylm, HarmonicIndex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(spin: i64, lmax: usize, seed: u64) -> HarmonicCoeffs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = HarmonicCoeffs::zeros(spin, lmax);
        for l in spin.unsigned_abs() as usize..=lmax {
            for m in -(l as i64)..=(l as i64) {
                c.set(l, m, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .unwrap();
            }
        }
        c
    }

    fn direct_sum(c: &HarmonicCoeffs, d: Direction) -> Complex64 {
        c.iter()
            .map(|(l, m, a)| a * spin_ylm(HarmonicIndex::new(l, m, c.spin()).unwrap(), d).unwrap())
            .sum()
    }

    #[test]
    fn set_validates_indices() {
        let mut c = HarmonicCoeffs::zeros(2, 4);
        assert!(c.set(1, 0, Complex64::new(1.0, 0.0)).is_err());
        assert!(c.set(3, 4, Complex64::new(1.0, 0.0)).is_err());
        assert!(c.set(5, 0, Complex64::new(1.0, 0.0)).is_err());
        assert!(c.set(3, 0, Complex64::new(f64::NAN, 0.0)).is_err());
        c.set(3, -3, Complex64::new(0.5, 0.5)).unwrap();
        assert_eq!(c.get(3, -3), Complex64::new(0.5, 0.5));
        assert_eq!(c.iter().count(), 25 - 4);
    }

    #[test]
    fn point_evaluation_matches_direct_sum() {
        for spin in [0i64, 1, 2, -2] {
            let c = random_coeffs(spin, 7, (11 + spin) as u64);
            let t = HarmonicTransform::new(spin, 7);
            for &(th, ph) in &[(0.3, 2.0), (1.9, -0.4), (2.8, 3.0)] {
                let d = Direction::new(th, ph).unwrap();
                let got = t.evaluate(&c, d).unwrap();
                let want = direct_sum(&c, d);
                assert!((got - want).norm() < 1e-12, "spin {spin}");
            }
        }
    }

    #[test]
    fn ring_synthesis_and_analysis_are_inverse_on_exact_grids() {
        for spin in [0i64, 2] {
            let c = random_coeffs(spin, 9, 3);
            let t = HarmonicTransform::new(spin, 9);
            let grid = build_cubature(9);
            let values = t.synthesize_rings(&c, None, &grid).unwrap();
            for (k, node) in grid.nodes().iter().enumerate().step_by(37) {
                assert!((values[k] - t.evaluate(&c, node.point).unwrap()).norm() < 1e-12);
            }
            let weighted: Vec<_> = values
                .iter()
                .zip(grid.nodes())
                .map(|(v, n)| v * n.weight)
                .collect();
            let mut back = HarmonicCoeffs::zeros(spin, 9);
            t.analyze_rings(&weighted, None, &grid, &mut back).unwrap();
            let err = back.axpy(Complex64::new(-1.0, 0.0), &c).unwrap().energy().sqrt();
            assert!(err < 1e-12 * c.energy().sqrt(), "{err}");
        }
    }

    #[test]
    fn accumulate_matches_ring_analysis() {
        let t = HarmonicTransform::new(1, 5);
        let grid = build_cubature(5);
        let vals: Vec<Complex64> = (0..grid.len()).map(|k| Complex64::new(k as f64 * 0.01, 1.0)).collect();
        let mut a = HarmonicCoeffs::zeros(1, 5);
        t.analyze_rings(&vals, None, &grid, &mut a).unwrap();
        let mut b = HarmonicCoeffs::zeros(1, 5);
        for (v, n) in vals.iter().zip(grid.nodes()) {
            t.accumulate_conj(n.point, *v, &mut b);
        }
        let err = a.axpy(Complex64::new(-1.0, 0.0), &b).unwrap().energy().sqrt();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn batched_transforms_match_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for spin in [0i64, 2, -1] {
            let lmax = 11;
            let c = random_coeffs(spin, lmax, 23);
            let t = HarmonicTransform::new(spin, lmax);
            let dirs: Vec<Direction> = (0..300)
                .map(|_| {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    Direction::new(z.acos(), rng.random_range(0.0..std::f64::consts::TAU)).unwrap()
                })
                .collect();
            let weights: Vec<Complex64> = (0..dirs.len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let many = t.evaluate_many(&c, &dirs).unwrap();
            for (d, v) in dirs.iter().zip(&many) {
                assert!((t.evaluate(&c, *d).unwrap() - v).norm() < 1e-12, "spin {spin}");
            }
            let mut a = HarmonicCoeffs::zeros(spin, lmax);
            t.accumulate_conj_many(&dirs, &weights, &mut a).unwrap();
            let mut b = HarmonicCoeffs::zeros(spin, lmax);
            for (d, w) in dirs.iter().zip(&weights) {
                t.accumulate_conj(*d, *w, &mut b);
            }
            let err = a.axpy(Complex64::new(-1.0, 0.0), &b).unwrap().energy().sqrt();
            assert!(err < 1e-10, "spin {spin}: {err}");
        }
    }

    #[test]
    fn lp_power_for_p_two_is_parseval() {
        let c = random_coeffs(2, 6, 5);
        let t = HarmonicTransform::new(2, 6);
        let l2 = lp_power(&t, &c, 2.0, 2).unwrap();
        assert!((l2 - c.energy()).abs() < 1e-10 * c.energy());
        let grid = build_cubature(12);
        let v = t.synthesize_rings(&c, None, &grid).unwrap();
        let four: Vec<Complex64> = v.iter().map(|x| x.norm().powi(4).into()).collect();
        let l4 = integrate(&four, &grid).unwrap().re;
        assert!((lp_power(&t, &c, 4.0, 2).unwrap() - l4).abs() < 1e-10 * l4);
        assert!(lp_power(&t, &c, 0.5, 2).is_err());
    }

    #[test]
    fn coarse_rings_are_rejected() {
        let c = random_coeffs(0, 6, 1);
        let t = HarmonicTransform::new(0, 6);
        assert!(t.synthesize_rings(&c, None, &build_cubature(3)).is_err());
        assert!(t.evaluate(&c, Direction::new(1.0, 0.0).unwrap()).is_ok());
        assert!(HarmonicTransform::new(0, 4).evaluate(&c, Direction::new(1.0, 0.0).unwrap()).is_err());
    }
}
