//! Scalar, pure-spin and mixed needlet frames.
//!
//! A frame is a window `b` supported in `(1/B, B)` with
//! `Σ_j b²(t/B^j) = 1` for `t ≥ 1`, plus one exact cubature set per level.
//! Needlets are
//!
//! ```text
//! ψ_jk(x) = sqrt(λ_jk) Σ_l b(sqrt(e_ls)/B^j) Σ_m conj(Y_{lm;s*}(ξ_jk)) Y_{lm;s}(x)
//! ```
//!
//! with `s* = s` for pure-spin and `s* = 0` for mixed needlets; scalar
//! needlets are the `s = 0` case. All transforms go through harmonic
//! coefficients and the ring transforms of [`crate::harmonics`].

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonics::{lp_power, HarmonicCoeffs, HarmonicTransform};
use crate::quadrature::{build_cubature, level_degree, CubatureSet};
use crate::sphere::{eigenvalue_spin, Direction};

/// Smooth window `b` for bandwidth `B`.
///
/// Built from the mollifier `exp(-κ/(1-u²))` (κ = `smoothness`): its
/// normalised integral gives a smooth step `φ` equal to 1 on `[0, 1/B]`
/// and 0 beyond 1, and `b²(t) = φ(t/B) - φ(t)`.
#[derive(Debug, Clone)]
pub struct WindowFunction {
    bandwidth: f64,
    smoothness: f64,
    total: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre panels used for the mollifier integral.
const PANELS: usize = 16;
const PANEL_ORDER: usize = 20;

impl WindowFunction {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn mollifier(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            0.0
        } else {
            (-self.smoothness / (1.0 - u * u)).exp()
        }
    }

    /// `∫_{-1}^{u} exp(-κ/(1-v²)) dv` by composite Gauss–Legendre.
    fn partial_integral(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        let h = (u + 1.0) / PANELS as f64;
        let mut acc = 0.0;
        for p in 0..PANELS {
            let mid = -1.0 + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * self.mollifier(mid + 0.5 * h * x);
            }
        }
        acc * 0.5 * h
    }

    /// Smooth step: 1 on `[0, 1/B]`, 0 on `[1, ∞)`.
    fn step(&self, t: f64) -> f64 {
        let b = self.bandwidth;
        if t <= 1.0 / b {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let u = 1.0 - 2.0 * b / (b - 1.0) * (t - 1.0 / b);
            if u >= 0.0 {
                1.0 - self.partial_integral(-u) / self.total
            } else {
                self.partial_integral(u) / self.total
            }
        }
    }

    pub fn b_squared(&self, t: f64) -> f64 {
        if !(t > 1.0 / self.bandwidth && t < self.bandwidth) {
            return 0.0;
        }
        (self.step(t / self.bandwidth) - self.step(t)).max(0.0)
    }

    /// `b(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.b_squared(t).sqrt()
    }

    /// `n` equispaced samples `(t, b(t))` over `[1/B, B]`.
    pub fn tabulate(&self, n: usize) -> Vec<(f64, f64)> {
        let lo = 1.0 / self.bandwidth;
        let hi = self.bandwidth;
        (0..n)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

pub fn build_window(bandwidth: f64, smoothness: f64) -> Result<WindowFunction> {
    if !(bandwidth > 1.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!("bandwidth B={bandwidth} must exceed 1")));
    }
    if !(smoothness > 0.0) || !smoothness.is_finite() {
        return Err(Error::Config(format!("smoothness {smoothness} must be positive")));
    }
    let (nodes, weights) = crate::quadrature::gauss_legendre(PANEL_ORDER);
    let mut w = WindowFunction {
        bandwidth,
        smoothness,
        total: 1.0,
        nodes,
        weights,
    };
    w.total = w.partial_integral(1.0);
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Scalar,
    PureSpin,
    Mixed,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Scalar => "scalar",
            Flavor::PureSpin => "pure_spin",
            Flavor::Mixed => "mixed",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "scalar" => Ok(Flavor::Scalar),
            "pure_spin" | "pure" => Ok(Flavor::PureSpin),
            "mixed" => Ok(Flavor::Mixed),
            other => Err(Error::Config(format!("unknown needlet flavor '{other}'"))),
        }
    }
}

/// One resolution level of a frame.
#[derive(Debug, Clone)]
pub struct NeedletLevel {
    j: usize,
    cubature: CubatureSet,
    /// `b(sqrt(e_ls)/B^j)` indexed by degree, zero outside the support.
    window: Vec<f64>,
    lmin: usize,
}

impl NeedletLevel {
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn cubature(&self) -> &CubatureSet {
        &self.cubature
    }

    /// Degrees with non-zero window weight, `lo..=hi` (empty when `lo > hi`).
    pub fn support(&self) -> (usize, usize) {
        (self.lmin, self.window.len().saturating_sub(1))
    }

    /// Highest degree reached by this level.
    pub fn max_degree(&self) -> usize {
        self.window.len().saturating_sub(1)
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Whether some degree falls inside this level's window.
    pub fn is_active(&self) -> bool {
        !self.window.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cubature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubature.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct NeedletFrame {
    window: WindowFunction,
    spin: i64,
    flavor: Flavor,
    levels: Vec<NeedletLevel>,
    field_transform: HarmonicTransform,
    node_transform: HarmonicTransform,
    id: String,
}

pub fn build_frame(bandwidth: f64, spin: i64, flavor: Flavor, j_max: usize) -> Result<NeedletFrame> {
    build_frame_with(build_window(bandwidth, 1.0)?, spin, flavor, j_max)
}

pub fn build_frame_with(
    window: WindowFunction,
    spin: i64,
    flavor: Flavor,
    j_max: usize,
) -> Result<NeedletFrame> {
    if spin < 0 {
        return Err(Error::Config(format!("spin must be non-negative, got {spin}")));
    }
    if flavor == Flavor::Scalar && spin != 0 {
        return Err(Error::Config(format!("scalar needlets require spin 0, got {spin}")));
    }
    let bandwidth = window.bandwidth();
    let mut levels = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let scale = bandwidth.powi(j as i32);
        let mut weights = Vec::new();
        let mut l = spin as usize;
        loop {
            let t = eigenvalue_spin(l, spin)?.sqrt() / scale;
            if t >= bandwidth {
                break;
            }
            weights.push(window.eval(t));
            l += 1;
        }
        // pad degrees below |s|
        let mut full = vec![0.0; spin as usize];
        full.extend(weights);
        while full.last() == Some(&0.0) {
            full.pop();
        }
        let lmin = full.iter().position(|w| *w > 0.0).unwrap_or(full.len());
        let degree = level_degree(bandwidth, j).max(full.len());
        let cubature = build_cubature(degree).with_level(j, bandwidth);
        levels.push(NeedletLevel {
            j,
            cubature,
            window: full,
            lmin,
        });
    }
    let lmax = levels.iter().map(|l| l.max_degree()).max().unwrap_or(0);
    let node_spin = match flavor {
        Flavor::PureSpin => spin,
        Flavor::Scalar | Flavor::Mixed => 0,
    };
    let id = format!(
        "B={bandwidth},s={spin},flavor={flavor},j_max={j_max},smoothness={}",
        window.smoothness()
    );
    Ok(NeedletFrame {
        window,
        spin,
        flavor,
        levels,
        field_transform: HarmonicTransform::new(spin, lmax),
        node_transform: HarmonicTransform::new(node_spin, lmax),
        id,
    })
}

impl NeedletFrame {
    pub fn window(&self) -> &WindowFunction {
        &self.window
    }

    pub fn bandwidth(&self) -> f64 {
        self.window.bandwidth()
    }

    pub fn spin(&self) -> i64 {
        self.spin
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn j_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[NeedletLevel] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> Result<&NeedletLevel> {
        self.levels
            .get(j)
            .ok_or_else(|| Error::Usage(format!("level {j} beyond j_max={}", self.j_max())))
    }

    /// Provenance tag carried by coefficient sets.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Highest degree touched by any level.
    pub fn max_degree(&self) -> usize {
        self.field_transform.lmax()
    }

    /// Whether the window partition of unity is complete at degree `l`
    /// (`sqrt(e_ls) ≤ B^{j_max}`), so the frame reproduces that degree.
    pub fn covers_degree(&self, l: usize) -> bool {
        match eigenvalue_spin(l, self.spin) {
            Ok(e) => e > 0.0 && e.sqrt() <= self.bandwidth().powi(self.j_max() as i32) * (1.0 + 1e-12),
            Err(_) => false,
        }
    }

    /// Basis used at the field point (spin `s`).
    pub fn field_transform(&self) -> &HarmonicTransform {
        &self.field_transform
    }

    /// Basis used at the cubature node (spin `s*`).
    pub fn node_transform(&self) -> &HarmonicTransform {
        &self.node_transform
    }

    fn node(&self, j: usize, k: usize) -> Result<(&NeedletLevel, Direction, f64)> {
        let level = self.level(j)?;
        let node = level.cubature.nodes().get(k).ok_or_else(|| {
            Error::Usage(format!("node {k} beyond the {} nodes of level {j}", level.len()))
        })?;
        Ok((level, node.point, node.weight))
    }

    /// Harmonic coefficients of `ψ_jk`:
    /// `sqrt(λ_jk) b_l conj(Y_{lm;s*}(ξ_jk))`.
    pub fn needlet_harmonics(&self, j: usize, k: usize) -> Result<HarmonicCoeffs> {
        let (level, xi, lambda) = self.node(j, k)?;
        let mut c = HarmonicCoeffs::zeros(self.spin, level.max_degree());
        self.node_transform
            .accumulate_conj(xi, Complex64::new(lambda.sqrt(), 0.0), &mut c);
        let mut out = HarmonicCoeffs::zeros(self.spin, level.max_degree());
        for (l, m, a) in c.iter() {
            let b = level.window.get(l).copied().unwrap_or(0.0);
            if b != 0.0 {
                out.add_at(l, m, a * b);
            }
        }
        Ok(out)
    }

    /// `‖ψ_jk‖₂` from the closed form `λ_jk Σ_l (2l+1)/4π b²`.
    pub fn tau(&self, j: usize, k: usize) -> Result<f64> {
        let (level, _, lambda) = self.node(j, k)?;
        let s: f64 = level
            .window
            .iter()
            .enumerate()
            .map(|(l, b)| (2 * l + 1) as f64 / (4.0 * PI) * b * b)
            .sum();
        Ok((lambda * s).sqrt())
    }
}

/// Needlet coefficients `β_jk`, one vector per level `j = 0, 1, ...`.
///
/// Levels beyond the stored ones are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedletCoefficients {
    frame_id: String,
    levels: Vec<Vec<Complex64>>,
}

impl NeedletCoefficients {
    pub fn zeros(frame: &NeedletFrame, top_level: usize) -> Self {
        let levels = frame
            .levels
            .iter()
            .take(top_level + 1)
            .map(|l| vec![Complex64::default(); l.len()])
            .collect();
        NeedletCoefficients {
            frame_id: frame.id.clone(),
            levels,
        }
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn levels(&self) -> &[Vec<Complex64>] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &[Complex64] {
        self.levels.get(j).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn get(&self, j: usize, k: usize) -> Option<Complex64> {
        self.levels.get(j).and_then(|l| l.get(k)).copied()
    }

    pub fn set(&mut self, j: usize, k: usize, value: Complex64) -> Result<()> {
        let slot = self
            .levels
            .get_mut(j)
            .and_then(|l| l.get_mut(k))
            .ok_or_else(|| Error::Usage(format!("no coefficient slot ({j}, {k})")))?;
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(j, l)| l.iter().enumerate().map(move |(k, b)| (j, k, *b)))
    }

    /// `Σ_jk |β_jk|²`.
    pub fn energy(&self) -> f64 {
        self.iter().map(|(_, _, b)| b.norm_sqr()).sum()
    }

    /// Keeps levels `0..=top` only.
    pub fn truncated(&self, top: usize) -> Self {
        NeedletCoefficients {
            frame_id: self.frame_id.clone(),
            levels: self.levels.iter().take(top + 1).cloned().collect(),
        }
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, Complex64) -> Complex64) -> Self {
        NeedletCoefficients {
            frame_id: self.frame_id.clone(),
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(j, l)| l.iter().enumerate().map(|(k, b)| f(j, k, *b)).collect())
                .collect(),
        }
    }

    /// `self + c * other` for coefficients of the same frame.
    pub fn axpy(&self, c: Complex64, other: &NeedletCoefficients) -> Result<Self> {
        if self.frame_id != other.frame_id {
            return Err(Error::Usage("coefficients belong to different frames".into()));
        }
        let n = self.levels.len().max(other.levels.len());
        let levels = (0..n)
            .map(|j| {
                let a = self.level(j);
                let b = other.level(j);
                let len = a.len().max(b.len());
                (0..len)
                    .map(|k| {
                        a.get(k).copied().unwrap_or_default() + c * b.get(k).copied().unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        Ok(NeedletCoefficients {
            frame_id: self.frame_id.clone(),
            levels,
        })
    }

    fn check_frame(&self, frame: &NeedletFrame) -> Result<()> {
        if self.frame_id != frame.id {
            return Err(Error::Usage(format!(
                "coefficients of frame '{}' used with frame '{}'",
                self.frame_id, frame.id
            )));
        }
        if self.levels.len() > frame.levels.len() {
            return Err(Error::Usage("more coefficient levels than frame levels".into()));
        }
        for (j, (c, l)) in self.levels.iter().zip(&frame.levels).enumerate() {
            if c.len() != l.len() {
                return Err(Error::Usage(format!(
                    "level {j} has {} coefficients for {} nodes",
                    c.len(),
                    l.len()
                )));
            }
        }
        Ok(())
    }
}

/// `ψ_jk(x)`.
pub fn evaluate_needlet(frame: &NeedletFrame, j: usize, k: usize, x: Direction) -> Result<Complex64> {
    let c = frame.needlet_harmonics(j, k)?;
    frame.field_transform.evaluate(&c, x)
}

fn check_input(frame: &NeedletFrame, coeffs: &HarmonicCoeffs) -> Result<()> {
    if coeffs.spin() != frame.spin {
        return Err(Error::Usage(format!(
            "spin-{} coefficients given to a spin-{} frame",
            coeffs.spin(),
            frame.spin
        )));
    }
    let s = frame.spin as usize;
    if coeffs.max_abs_up_to(s) != 0.0 {
        return Err(Error::Domain(format!(
            "input carries energy at degree l ≤ s = {s}; that component must be null"
        )));
    }
    if let Some((l, m, _)) = coeffs
        .iter()
        .find(|(l, _, a)| *l > frame.max_degree() && *a != Complex64::default())
    {
        return Err(Error::Domain(format!(
            "coefficient (l={l}, m={m}) beyond the frame's highest degree {}",
            frame.max_degree()
        )));
    }
    Ok(())
}

/// `β_jk = sqrt(λ_jk) Σ_l b_l Σ_m a_lm Y_{lm;s*}(ξ_jk)` for every level.
pub fn analyze(frame: &NeedletFrame, coeffs: &HarmonicCoeffs) -> Result<NeedletCoefficients> {
    check_input(frame, coeffs)?;
    analyze_levels(frame, coeffs, frame.j_max())
}

/// Analysis restricted to levels `0..=top`; no support checks on `coeffs`.
pub(crate) fn analyze_levels(
    frame: &NeedletFrame,
    coeffs: &HarmonicCoeffs,
    top: usize,
) -> Result<NeedletCoefficients> {
    let mut out = NeedletCoefficients::zeros(frame, top);
    for (level, dest) in frame.levels.iter().zip(out.levels.iter_mut()) {
        if !level.is_active() || level.lmin > coeffs.lmax() {
            continue;
        }
        let band = level.max_degree().min(coeffs.lmax());
        let c = coeffs.with_lmax(band);
        let values = frame
            .node_transform
            .synthesize_rings(&c, Some(&level.window[..=band]), &level.cubature)?;
        for ((d, v), node) in dest.iter_mut().zip(values).zip(level.cubature.nodes()) {
            *d = v * node.weight.sqrt();
        }
    }
    Ok(out)
}

/// Harmonic coefficients of `Σ_jk β_jk ψ_jk`.
pub fn synthesize_harmonics(frame: &NeedletFrame, coeffs: &NeedletCoefficients) -> Result<HarmonicCoeffs> {
    coeffs.check_frame(frame)?;
    let lmax = frame.levels[..coeffs.levels.len()]
        .iter()
        .map(|l| l.max_degree())
        .max()
        .unwrap_or(0);
    let mut out = HarmonicCoeffs::zeros(frame.spin, lmax);
    for (level, beta) in frame.levels.iter().zip(&coeffs.levels) {
        let band = level.max_degree();
        if level.window.is_empty() || beta.iter().all(|b| *b == Complex64::default()) {
            continue;
        }
        let weighted: Vec<Complex64> = beta
            .iter()
            .zip(level.cubature.nodes())
            .map(|(b, n)| b * n.weight.sqrt())
            .collect();
        let mut part = HarmonicCoeffs::zeros(frame.spin, band);
        frame
            .node_transform
            .analyze_rings(&weighted, Some(&level.window), &level.cubature, &mut part)?;
        out = out.axpy(Complex64::new(1.0, 0.0), &part)?;
    }
    Ok(out)
}

/// `Σ_jk β_jk ψ_jk(x)`.
pub fn synthesize(frame: &NeedletFrame, coeffs: &NeedletCoefficients, x: Direction) -> Result<Complex64> {
    let h = synthesize_harmonics(frame, coeffs)?;
    frame.field_transform.evaluate(&h, x)
}

/// [`synthesize`] at many points, sharing one coefficient conversion.
pub fn synthesize_many(
    frame: &NeedletFrame,
    coeffs: &NeedletCoefficients,
    xs: &[Direction],
) -> Result<Vec<Complex64>> {
    let h = synthesize_harmonics(frame, coeffs)?;
    frame.field_transform.evaluate_many(&h, xs)
}

/// Grid oversampling factor for needlet norms.
pub const NORM_OVERSAMPLE: usize = 4;

/// `‖ψ_jk‖_{L^p}` by quadrature on a 4× oversampled product grid
/// (grid supremum for `p = ∞`).
pub fn needlet_lp_norm(frame: &NeedletFrame, j: usize, k: usize, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p index p={p} must be at least 1")));
    }
    let c = frame.needlet_harmonics(j, k)?;
    let power = lp_power(&frame.field_transform, &c, p, NORM_OVERSAMPLE)?;
    Ok(if p.is_infinite() { power } else { power.powf(1.0 / p) })
}

/// Frame parameters carried in coefficient file headers.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeader {
    pub bandwidth: f64,
    pub spin: i64,
    pub flavor: Flavor,
    pub j_max: usize,
    pub smoothness: f64,
}

impl FrameHeader {
    pub fn of(frame: &NeedletFrame) -> Self {
        FrameHeader {
            bandwidth: frame.bandwidth(),
            spin: frame.spin,
            flavor: frame.flavor,
            j_max: frame.j_max(),
            smoothness: frame.window.smoothness(),
        }
    }

    pub fn build(&self) -> Result<NeedletFrame> {
        build_frame_with(
            build_window(self.bandwidth, self.smoothness)?,
            self.spin,
            self.flavor,
            self.j_max,
        )
    }

    fn line(&self) -> String {
        format!(
            "# B={},s={},flavor={},j_max={},smoothness={}",
            self.bandwidth, self.spin, self.flavor, self.j_max, self.smoothness
        )
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| "missing '# B=...' frame header".to_string())?;
        let kv = crate::format::parse_pairs(body)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| format!("frame header lacks '{k}'"));
        Ok(FrameHeader {
            bandwidth: get("B")?.parse().map_err(|e| format!("B: {e}"))?,
            spin: get("s")?.parse().map_err(|e| format!("s: {e}"))?,
            flavor: get("flavor")?.parse().map_err(|e: Error| e.to_string())?,
            j_max: get("j_max")?.parse().map_err(|e| format!("j_max: {e}"))?,
            smoothness: match kv.get("smoothness") {
                Some(v) => v.parse().map_err(|e| format!("smoothness: {e}"))?,
                None => 1.0,
            },
        })
    }
}

pub(crate) const COEFF_COLUMNS: &str = "j,k,re,im";

/// Writes the `j,k,re,im` text format with a frame header.
pub fn write_coefficients<W: Write>(
    mut w: W,
    frame: &NeedletFrame,
    coeffs: &NeedletCoefficients,
) -> std::io::Result<()> {
    writeln!(w, "{}", FrameHeader::of(frame).line())?;
    writeln!(w, "{COEFF_COLUMNS}")?;
    for (j, k, b) in coeffs.iter() {
        writeln!(
            w,
            "{j},{k},{},{}",
            crate::format::float(b.re),
            crate::format::float(b.im)
        )?;
    }
    Ok(())
}

/// Reads a coefficient file written by [`write_coefficients`]; trailing
/// lines after the coefficient rows are returned untouched.
pub fn read_coefficients<R: BufRead>(
    r: R,
    path: &Path,
) -> Result<(FrameHeader, NeedletFrame, NeedletCoefficients, Vec<String>)> {
    let mut lines = crate::format::numbered_lines(r, path);
    let (ln, head) = lines.next().transpose()?.ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = FrameHeader::parse(head.trim()).map_err(|m| Error::parse(path, ln, m))?;
    let frame = header.build()?;
    match lines.next().transpose()? {
        Some((_, l)) if l.trim() == COEFF_COLUMNS => {}
        other => {
            let ln = other.map_or(ln + 1, |(n, _)| n);
            return Err(Error::parse(path, ln, format!("expected column line '{COEFF_COLUMNS}'")));
        }
    }
    let mut coeffs = NeedletCoefficients::zeros(&frame, frame.j_max());
    let mut top: Option<usize> = None;
    let mut trailer = Vec::new();
    for item in lines {
        let (ln, line) = item?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if !trailer.is_empty() || !t.starts_with(|c: char| c.is_ascii_digit()) {
            trailer.push(t.to_string());
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, ln, "expected 4 fields j,k,re,im"));
        }
        let j: usize = f[0].trim().parse().map_err(|e| Error::parse(path, ln, format!("j: {e}")))?;
        let k: usize = f[1].trim().parse().map_err(|e| Error::parse(path, ln, format!("k: {e}")))?;
        let re: f64 = f[2].trim().parse().map_err(|e| Error::parse(path, ln, format!("re: {e}")))?;
        let im: f64 = f[3].trim().parse().map_err(|e| Error::parse(path, ln, format!("im: {e}")))?;
        coeffs
            .set(j, k, Complex64::new(re, im))
            .map_err(|e| Error::parse(path, ln, e.to_string()))?;
        top = Some(top.map_or(j, |t| t.max(j)));
    }
    let coeffs = coeffs.truncated(top.unwrap_or(0));
    Ok((header, frame, coeffs, trailer))
}

/// Reads a coefficient file from disk.
pub fn load_coefficients(path: &Path) -> Result<(FrameHeader, NeedletFrame, NeedletCoefficients, Vec<String>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_coefficients(std::io::BufReader::new(f), path)
}

/// Convenience wrapper writing to a file path.
pub fn save_coefficients(path: &Path, frame: &NeedletFrame, coeffs: &NeedletCoefficients) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_coefficients(&mut w, frame, coeffs).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
