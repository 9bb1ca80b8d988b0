//! Spin Besov norms computed from needlet coefficients, embedding checks and
//! a sampler for test sections inside a Besov ball.
//!
//! The norm is
//!
//! ```text
//! ‖F‖_{L^π} + [Σ_j B^{jq(r+1/2-1/π)} (Σ_k |β_jk|^π)^{q/π}]^{1/q}
//! ```
//!
//! with the usual sup replacements when `π = ∞` or `q = ∞`.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonics::{lp_power, HarmonicCoeffs};
use crate::needlets::{analyze, synthesize_harmonics, NeedletCoefficients, NeedletFrame, NORM_OVERSAMPLE};

/// Level calibration stops after this many rounds or once every level is
/// within `CALIBRATION_TOL` of its target.
const CALIBRATION_ROUNDS: usize = 12;
const CALIBRATION_TOL: f64 = 1e-3;

/// Tolerance used when matching smoothness indices of embedded spaces.
const INDEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovParams {
    r: f64,
    pi: f64,
    q: f64,
    radius: f64,
}

impl BesovParams {
    /// `π` and `q` may be `f64::INFINITY`. Requires `r > 2/π`.
    pub fn new(r: f64, pi: f64, q: f64, radius: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Config(format!("smoothness r={r} must be positive and finite")));
        }
        if !(pi >= 1.0) {
            return Err(Error::Config(format!("integrability index pi={pi} must be at least 1")));
        }
        if !(q >= 1.0) {
            return Err(Error::Config(format!("summation index q={q} must be at least 1")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("ball radius {radius} must be positive and finite")));
        }
        if r - 2.0 / pi <= 0.0 {
            return Err(Error::Config(format!("r={r} must exceed 2/pi={}", 2.0 / pi)));
        }
        Ok(BesovParams { r, pi, q, radius })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `r + 1/2 - 1/π`, the per-level decay exponent of `ℓ^π` norms.
    pub fn level_exponent(&self) -> f64 {
        self.r + 0.5 - 1.0 / self.pi
    }
}

/// `‖(β_k)_k‖_{ℓ^π}`.
pub fn lp_sequence_norm(values: &[Complex64], pi: f64) -> f64 {
    if pi.is_infinite() {
        values.iter().map(|b| b.norm()).fold(0.0, f64::max)
    } else {
        values.iter().map(|b| b.norm().powf(pi)).sum::<f64>().powf(1.0 / pi)
    }
}

/// Wavelet part of the Besov norm.
pub fn besov_wavelet_term(coeffs: &NeedletCoefficients, frame: &NeedletFrame, params: &BesovParams) -> f64 {
    let bw = frame.bandwidth();
    let weighted = coeffs
        .levels()
        .iter()
        .enumerate()
        .map(|(j, level)| bw.powf(j as f64 * params.level_exponent()) * lp_sequence_norm(level, params.pi));
    if params.q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|v| v.powf(params.q)).sum::<f64>().powf(1.0 / params.q)
    }
}

/// `‖F‖_{L^π}` of the section synthesized from `coeffs`, by dense-grid quadrature.
pub fn section_lp_norm(coeffs: &NeedletCoefficients, frame: &NeedletFrame, pi: f64) -> Result<f64> {
    let h = synthesize_harmonics(frame, coeffs)?;
    harmonic_lp_norm(frame, &h, pi)
}

fn harmonic_lp_norm(frame: &NeedletFrame, h: &HarmonicCoeffs, pi: f64) -> Result<f64> {
    if h.energy() == 0.0 {
        return Ok(0.0);
    }
    let power = lp_power(frame.field_transform(), h, pi, NORM_OVERSAMPLE)?;
    Ok(if pi.is_infinite() { power } else { power.powf(1.0 / pi) })
}

pub fn besov_norm(coeffs: &NeedletCoefficients, frame: &NeedletFrame, params: &BesovParams) -> Result<f64> {
    Ok(section_lp_norm(coeffs, frame, params.pi)? + besov_wavelet_term(coeffs, frame, params))
}

/// Besov norm of a band-limited section given by harmonic coefficients.
pub fn section_besov_norm(coeffs: &HarmonicCoeffs, frame: &NeedletFrame, params: &BesovParams) -> Result<f64> {
    let beta = analyze(frame, coeffs)?;
    Ok(harmonic_lp_norm(frame, coeffs, params.pi)? + besov_wavelet_term(&beta, frame, params))
}

/// Ratio `‖F‖_to / ‖F‖_from` for a pair of spaces related by one of the
/// inclusions `B^r_{π q₁} ⊂ B^r_{π q₂}` (`q₁ ≤ q₂`), `B^r_{π₂ q} ⊂ B^r_{π₁ q}`
/// (`π₁ ≤ π₂`) or `B^r_{π₁ q} ⊂ B^{r-1/π₁+1/π₂}_{π₂ q}` (`π₁ ≤ π₂`).
pub fn check_embedding(
    coeffs: &NeedletCoefficients,
    frame: &NeedletFrame,
    from: &BesovParams,
    to: &BesovParams,
) -> Result<f64> {
    let same = |a: f64, b: f64| a == b || (a - b).abs() <= INDEX_TOL;
    let q_monotone = same(from.r, to.r) && same(from.pi, to.pi) && from.q <= to.q;
    let pi_down = same(from.r, to.r) && same(from.q, to.q) && to.pi <= from.pi;
    let sobolev = same(from.q, to.q)
        && from.pi <= to.pi
        && same(to.r, from.r - 1.0 / from.pi + 1.0 / to.pi);
    if !(q_monotone || pi_down || sobolev) {
        return Err(Error::Usage(format!(
            "no inclusion from (r={}, pi={}, q={}) to (r={}, pi={}, q={})",
            from.r, from.pi, from.q, to.r, to.pi, to.q
        )));
    }
    let source = besov_norm(coeffs, frame, from)?;
    let target = besov_norm(coeffs, frame, to)?;
    Ok(target / source)
}

/// A band-limited section drawn inside a Besov ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovTestSection {
    pub coeffs: HarmonicCoeffs,
    pub spin: i64,
    pub band_limit: usize,
    pub params: BesovParams,
    pub seed: u64,
}

/// Draws a section in the ball of `params` with band-limit `band_limit`.
///
/// Complex Gaussian needlet coefficients are drawn on every level up to the
/// band-limit and synthesized; per-level scales are adjusted until the
/// analysed section has `ℓ^π` level norms `B^{-j(r+1/2-1/π)}`, and the
/// section is finally scaled to sit just inside the ball.
pub fn sample_besov_section(
    frame: &NeedletFrame,
    params: &BesovParams,
    band_limit: usize,
    seed: u64,
) -> Result<BesovTestSection> {
    sample_sparse_besov_section(frame, params, band_limit, seed, 0.0)
}

/// Like [`sample_besov_section`], with a random fraction `zero_fraction` of
/// the nodes of every level set to zero before synthesis.
pub fn sample_sparse_besov_section(
    frame: &NeedletFrame,
    params: &BesovParams,
    band_limit: usize,
    seed: u64,
    zero_fraction: f64,
) -> Result<BesovTestSection> {
    let spin = frame.spin();
    if band_limit <= spin as usize {
        return Err(Error::Config(format!(
            "band-limit {band_limit} must exceed the spin {spin}"
        )));
    }
    if !frame.covers_degree(band_limit) {
        return Err(Error::Config(format!(
            "frame with j_max={} does not cover band-limit {band_limit}",
            frame.j_max()
        )));
    }
    if !(0.0..1.0).contains(&zero_fraction) {
        return Err(Error::Config(format!("zero fraction {zero_fraction} must lie in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = frame
        .levels()
        .iter()
        .position(|l| l.support().0 > band_limit && l.is_active())
        .map_or(frame.j_max(), |j| j.saturating_sub(1));
    let mut draws = NeedletCoefficients::zeros(frame, top);
    let mut targets = vec![0.0; top + 1];
    for (j, level) in frame.levels().iter().enumerate().take(top + 1) {
        if !level.is_active() {
            continue;
        }
        targets[j] = frame.bandwidth().powf(-(j as f64) * params.level_exponent());
        for k in 0..level.len() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let keep = zero_fraction == 0.0 || rng.random::<f64>() >= zero_fraction;
            if keep {
                draws.set(j, k, Complex64::new(re, im))?;
            }
        }
    }
    // Synthesis followed by analysis mixes neighbouring levels, so the level
    // scales are tuned until the analysed section meets its targets. Levels
    // cut by the band-limit keep their initial scale.
    let complete: Vec<bool> = (0..=top)
        .map(|j| frame.levels()[j].support().1 <= band_limit)
        .collect();
    let mut scales: Vec<f64> = (0..=top)
        .map(|j| {
            let n = lp_sequence_norm(draws.level(j), params.pi);
            if n > 0.0 {
                targets[j] / n
            } else {
                0.0
            }
        })
        .collect();
    let mut coeffs = HarmonicCoeffs::zeros(spin, band_limit);
    for _ in 0..CALIBRATION_ROUNDS {
        let beta = draws.map(|j, _, b| b * scales[j]);
        coeffs = synthesize_harmonics(frame, &beta)?.with_lmax(band_limit);
        let measured = analyze(frame, &coeffs)?;
        let mut worst: f64 = 0.0;
        for (j, scale) in scales.iter_mut().enumerate() {
            let n = lp_sequence_norm(measured.level(j), params.pi);
            if complete[j] && *scale > 0.0 && n > 0.0 {
                let ratio = targets[j] / n;
                worst = worst.max((ratio - 1.0).abs());
                *scale *= ratio;
            }
        }
        if worst < CALIBRATION_TOL {
            break;
        }
    }
    for m in -spin..=spin {
        coeffs.set(spin as usize, m, Complex64::default())?;
    }
    let norm = section_besov_norm(&coeffs, frame, params)?;
    if norm > 0.0 {
        coeffs = coeffs.scaled(Complex64::new(params.radius / norm * (1.0 - 1e-12), 0.0));
    }
    Ok(BesovTestSection {
        coeffs,
        spin,
        band_limit,
        params: *params,
        seed,
    })
}

pub(crate) const HARMONIC_COLUMNS: &str = "l,m,re,im";

/// Writes a section as `l,m,re,im` rows under a parameter header.
pub fn write_section<W: Write>(mut w: W, section: &BesovTestSection) -> std::io::Result<()> {
    let p = &section.params;
    writeln!(
        w,
        "# spin={},band_limit={},r={},pi={},q={},radius={},seed={}",
        section.spin, section.band_limit, p.r, p.pi, p.q, p.radius, section.seed
    )?;
    write_harmonic_rows(&mut w, &section.coeffs)
}

pub(crate) fn write_harmonic_rows<W: Write>(w: &mut W, coeffs: &HarmonicCoeffs) -> std::io::Result<()> {
    writeln!(w, "{HARMONIC_COLUMNS}")?;
    for (l, m, a) in coeffs.iter() {
        writeln!(
            w,
            "{l},{m},{},{}",
            crate::format::float(a.re),
            crate::format::float(a.im)
        )?;
    }
    Ok(())
}

pub fn read_section<R: BufRead>(r: R, path: &Path) -> Result<BesovTestSection> {
    let mut lines = crate::format::numbered_lines(r, path);
    let (ln, head) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let kv = head
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| "missing '# spin=...' header".to_string())
        .and_then(crate::format::parse_pairs)
        .map_err(|m| Error::parse(path, ln, m))?;
    let field = |k: &str| -> Result<f64> {
        kv.get(k)
            .ok_or_else(|| Error::parse(path, ln, format!("header lacks '{k}'")))?
            .parse::<f64>()
            .map_err(|e| Error::parse(path, ln, format!("{k}: {e}")))
    };
    let int = |k: &str| -> Result<i64> {
        kv.get(k)
            .ok_or_else(|| Error::parse(path, ln, format!("header lacks '{k}'")))?
            .parse::<i64>()
            .map_err(|e| Error::parse(path, ln, format!("{k}: {e}")))
    };
    let spin = int("spin")?;
    let band_limit = int("band_limit")?;
    let seed = kv
        .get("seed")
        .ok_or_else(|| Error::parse(path, ln, "header lacks 'seed'"))?
        .parse::<u64>()
        .map_err(|e| Error::parse(path, ln, format!("seed: {e}")))?;
    if spin < 0 || band_limit < 0 {
        return Err(Error::parse(path, ln, "spin and band_limit must be non-negative"));
    }
    let params = BesovParams::new(field("r")?, field("pi")?, field("q")?, field("radius")?)?;
    let coeffs = read_harmonic_rows(&mut lines, path, spin, band_limit as usize)?;
    Ok(BesovTestSection {
        coeffs,
        spin,
        band_limit: band_limit as usize,
        params,
        seed,
    })
}

pub(crate) fn read_harmonic_rows(
    lines: &mut impl Iterator<Item = Result<(usize, String)>>,
    path: &Path,
    spin: i64,
    lmax: usize,
) -> Result<HarmonicCoeffs> {
    match lines.next().transpose()? {
        Some((_, l)) if l.trim() == HARMONIC_COLUMNS => {}
        Some((ln, _)) => {
            return Err(Error::parse(path, ln, format!("expected column line '{HARMONIC_COLUMNS}'")))
        }
        None => return Err(Error::parse(path, 0, "missing coefficient rows")),
    }
    let mut coeffs = HarmonicCoeffs::zeros(spin, lmax);
    for item in lines {
        let (ln, line) = item?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(path, ln, "expected 4 fields l,m,re,im"));
        }
        let l: usize = f[0].parse().map_err(|e| Error::parse(path, ln, format!("l: {e}")))?;
        let m: i64 = f[1].parse().map_err(|e| Error::parse(path, ln, format!("m: {e}")))?;
        let re: f64 = f[2].parse().map_err(|e| Error::parse(path, ln, format!("re: {e}")))?;
        let im: f64 = f[3].parse().map_err(|e| Error::parse(path, ln, format!("im: {e}")))?;
        coeffs
            .set(l, m, Complex64::new(re, im))
            .map_err(|e| Error::parse(path, ln, e.to_string()))?;
    }
    Ok(coeffs)
}

pub fn save_section(path: &Path, section: &BesovTestSection) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_section(&mut w, section).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_section(path: &Path) -> Result<BesovTestSection> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_section(std::io::BufReader::new(f), path)
}
