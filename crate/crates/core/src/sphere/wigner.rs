//! Spin-weighted Legendre functions `sqrt((2l+1)/4π) d^l_{-m,s}(θ)` by
//! three-term recursion in `l` for fixed `(m, s)`, seeded in closed form at
//! `l = max(|m|, |s|)`.

use std::f64::consts::PI;

/// Colatitude data shared by every order evaluated at one point.
#[derive(Debug, Clone, Copy)]
pub struct ThetaPoint {
    pub(crate) cos: f64,
    ln_cos_half: f64,
    ln_sin_half: f64,
}

impl ThetaPoint {
    pub fn new(theta: f64) -> Self {
        let half = 0.5 * theta;
        ThetaPoint {
            cos: theta.cos(),
            ln_cos_half: half.cos().ln(),
            ln_sin_half: half.sin().ln(),
        }
    }
}

#[derive(Debug, Clone)]
struct OrderRecursion {
    l0: usize,
    seed_sign: f64,
    seed_ln_norm: f64,
    pow_cos: f64,
    pow_sin: f64,
    /// `d^{l+1} = (alpha x - beta) d^l - gamma d^{l-1}` for `l = l0 + i`.
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    /// `sqrt((2l+1)/4π)` for `l = l0 + i`.
    norm: Vec<f64>,
}

/// Precomputed recursion tables for one spin weight up to degree `lmax`.
///
/// Immutable after construction and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct SpinLegendre {
    spin: i64,
    lmax: usize,
    orders: Vec<OrderRecursion>,
}

impl SpinLegendre {
    pub fn new(spin: i64, lmax: usize) -> Self {
        let mut ln_fact = vec![0.0f64; 2 * lmax + 2];
        for k in 1..ln_fact.len() {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let lm = lmax as i64;
        let orders = (-lm..=lm)
            .map(|m| OrderRecursion::build(-m, spin, lmax, &ln_fact))
            .collect();
        SpinLegendre { spin, lmax, orders }
    }

    pub fn spin(&self) -> i64 {
        self.spin
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Lowest degree carrying a non-zero function for order `m`.
    pub fn first_degree(&self, m: i64) -> usize {
        self.order(m).l0
    }

    fn order(&self, m: i64) -> &OrderRecursion {
        &self.orders[(m + self.lmax as i64) as usize]
    }

    /// Writes `sqrt((2l+1)/4π) d^l_{-m,s}(θ)` into `out[l]` for `l ≤ lmax`;
    /// degrees below `max(|m|, |s|)` are set to zero.
    pub fn fill(&self, m: i64, point: &ThetaPoint, out: &mut [f64]) {
        let l0 = self.order(m).l0;
        let zeroed = l0.min(out.len());
        out[..zeroed].fill(0.0);
        let top = self.lmax.min(out.len().saturating_sub(1));
        self.for_each(m, point, top, |l, v| out[l] = v);
    }

    /// Calls `f(l, value)` for every degree `max(|m|,|s|) ≤ l ≤ min(top, lmax)`.
    #[inline]
    pub fn for_each(&self, m: i64, point: &ThetaPoint, top: usize, mut f: impl FnMut(usize, f64)) {
        let rec = self.order(m);
        let top = top.min(self.lmax);
        if rec.l0 > top {
            return;
        }
        let mut ln = rec.seed_ln_norm;
        if rec.pow_cos != 0.0 {
            ln += rec.pow_cos * point.ln_cos_half;
        }
        if rec.pow_sin != 0.0 {
            ln += rec.pow_sin * point.ln_sin_half;
        }
        let x = point.cos;
        let mut d_prev = 0.0;
        let mut d = rec.seed_sign * ln.exp();
        f(rec.l0, rec.norm[0] * d);
        for i in 0..(top - rec.l0) {
            let next = (rec.alpha[i] * x - rec.beta[i]) * d - rec.gamma[i] * d_prev;
            d_prev = d;
            d = next;
            f(rec.l0 + i + 1, rec.norm[i + 1] * d);
        }
    }
}

/// Scratch buffers for [`SpinLegendre::for_each_batch`].
#[derive(Debug, Clone, Default)]
pub struct BatchScratch {
    x: Vec<f64>,
    d: Vec<f64>,
    prev: Vec<f64>,
    out: Vec<f64>,
}

impl SpinLegendre {
    /// Batched form of [`SpinLegendre::for_each`]: calls `f(l, values)` where
    /// `values[i]` is the normalised function of order `m` at `points[i]`.
    pub fn for_each_batch(
        &self,
        m: i64,
        points: &[ThetaPoint],
        top: usize,
        scratch: &mut BatchScratch,
        mut f: impl FnMut(usize, &[f64]),
    ) {
        let rec = self.order(m);
        let top = top.min(self.lmax);
        if rec.l0 > top || points.is_empty() {
            return;
        }
        let n = points.len();
        let BatchScratch { x, d, prev, out } = scratch;
        for v in [&mut *x, &mut *d, &mut *prev, &mut *out] {
            v.clear();
            v.resize(n, 0.0);
        }
        for (i, p) in points.iter().enumerate() {
            let mut ln = rec.seed_ln_norm;
            if rec.pow_cos != 0.0 {
                ln += rec.pow_cos * p.ln_cos_half;
            }
            if rec.pow_sin != 0.0 {
                ln += rec.pow_sin * p.ln_sin_half;
            }
            x[i] = p.cos;
            d[i] = rec.seed_sign * ln.exp();
            out[i] = rec.norm[0] * d[i];
        }
        f(rec.l0, out);
        for k in 0..(top - rec.l0) {
            let (a, b, g, nrm) = (rec.alpha[k], rec.beta[k], rec.gamma[k], rec.norm[k + 1]);
            for (((xi, di), pi), oi) in x.iter().zip(d.iter_mut()).zip(prev.iter_mut()).zip(out.iter_mut()) {
                let next = (a * xi - b) * *di - g * *pi;
                *pi = *di;
                *di = next;
                *oi = nrm * next;
            }
            f(rec.l0 + k + 1, out);
        }
    }
}

impl OrderRecursion {
    fn build(m1: i64, m2: i64, lmax: usize, ln_fact: &[f64]) -> Self {
        let l0 = m1.unsigned_abs().max(m2.unsigned_abs()) as usize;
        if l0 > lmax {
            return OrderRecursion {
                l0,
                seed_sign: 0.0,
                seed_ln_norm: 0.0,
                pow_cos: 0.0,
                pow_sin: 0.0,
                alpha: Vec::new(),
                beta: Vec::new(),
                gamma: Vec::new(),
                norm: Vec::new(),
            };
        }
        let j = l0 as i64;
        let parity = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        // closed forms of d^j_{m1,m2} when one index equals ±j
        let (sign, pc, ps, other) = if m1.abs() >= m2.abs() {
            if m1 == j {
                (parity(j - m2), j + m2, j - m2, m2)
            } else {
                (1.0, j - m2, j + m2, m2)
            }
        } else if m2 == j {
            (1.0, j + m1, j - m1, m1)
        } else {
            (parity(j + m1), j - m1, j + m1, m1)
        };
        let ln_binom = ln_fact[2 * l0]
            - ln_fact[(j + other) as usize]
            - ln_fact[(j - other) as usize];

        let steps = lmax - l0;
        let mut alpha = Vec::with_capacity(steps);
        let mut beta = Vec::with_capacity(steps);
        let mut gamma = Vec::with_capacity(steps);
        let (a1, a2) = ((m1 * m1) as f64, (m2 * m2) as f64);
        let mm = (m1 * m2) as f64;
        for l in l0..lmax {
            if l == 0 {
                // d^1_{00} = cos θ
                alpha.push(1.0);
                beta.push(0.0);
                gamma.push(0.0);
                continue;
            }
            let lf = l as f64;
            let lp = lf + 1.0;
            let den = lf * ((lp * lp - a1) * (lp * lp - a2)).sqrt();
            alpha.push((2.0 * lf + 1.0) * lf * lp / den);
            beta.push((2.0 * lf + 1.0) * mm / den);
            gamma.push(lp * ((lf * lf - a1) * (lf * lf - a2)).max(0.0).sqrt() / den);
        }
        let norm = (l0..=lmax)
            .map(|l| ((2 * l + 1) as f64 / (4.0 * PI)).sqrt())
            .collect();
        OrderRecursion {
            l0,
            seed_sign: sign,
            seed_ln_norm: 0.5 * ln_binom,
            pow_cos: pc as f64,
            pow_sin: ps as f64,
            alpha,
            beta,
            gamma,
            norm,
        }
    }
}
