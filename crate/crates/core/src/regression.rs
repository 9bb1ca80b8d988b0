//! The spin regression model `Y_i = F_s(X_i) + ε_i` with uniform design,
//! the needlet coefficient estimator, hard thresholding and `L^p` losses.
//!
//! With `X_i` uniform on the sphere (density `1/4π`) the unbiased
//! coefficient estimator is
//!
//! ```text
//! β̂_jk = (4π/n) Σ_i Y_i conj(ψ_jk(X_i))
//! ```
//!
//! It is computed through the harmonic estimates
//! `â_lm = (4π/n) Σ_i Y_i conj(Y_{lm;s}(X_i))` followed by an exact needlet
//! analysis.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::besov::BesovTestSection;
use crate::error::{Error, Result};
use crate::harmonics::{lp_power, HarmonicCoeffs, HarmonicTransform};
use crate::needlets::{
    analyze_levels, synthesize_harmonics, write_coefficients, Flavor, NeedletCoefficients, NeedletFrame,
    NORM_OVERSAMPLE,
};
use crate::sphere::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    BoundedUniform,
    Rademacher,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::BoundedUniform => "bounded_uniform",
            NoiseKind::Rademacher => "rademacher",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "bounded_uniform" | "uniform" => Ok(NoiseKind::BoundedUniform),
            "rademacher" => Ok(NoiseKind::Rademacher),
            other => Err(Error::Config(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// Circularly symmetric noise `ε = ε̃_re + i ε̃_im` with iid real parts and
/// `E|ε|² = σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("noise level sigma={sigma} must be finite and non-negative")));
        }
        Ok(NoiseModel { kind, sigma })
    }

    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma: 0.0,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Sub-Gaussian standard of each real component. All three kinds have
    /// component variance `σ²/2` and are strictly sub-Gaussian, so this is
    /// `σ/√2`.
    pub fn tau(&self) -> f64 {
        self.sigma / 2f64.sqrt()
    }

    fn component(&self, rng: &mut ChaCha8Rng) -> f64 {
        let t = self.tau();
        match self.kind {
            NoiseKind::Gaussian => Normal::new(0.0, t).expect("finite scale").sample(rng),
            NoiseKind::BoundedUniform => {
                let a = t * 3f64.sqrt();
                rng.random_range(-a..=a)
            }
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    t
                } else {
                    -t
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        if self.sigma == 0.0 {
            return Complex64::default();
        }
        let re = self.component(rng);
        let im = self.component(rng);
        Complex64::new(re, im)
    }
}

/// Uniform direction on the sphere: `cos θ` uniform on `(-1, 1)`, `φ` uniform
/// on `[-π, π)`; pole draws are redrawn.
pub fn uniform_direction(rng: &mut ChaCha8Rng) -> Direction {
    loop {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(-PI..PI);
        if let Ok(d) = Direction::new(z.acos(), phi) {
            return d;
        }
    }
}

/// Deterministic seed for replicate `index` of a run seeded with `base`.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<(Direction, Complex64)>,
    spin: i64,
    seed: u64,
    truth_id: String,
}

impl Dataset {
    pub fn new(points: Vec<(Direction, Complex64)>, spin: i64, seed: u64, truth_id: &str) -> Result<Self> {
        if truth_id.contains([',', '\n', '\r']) {
            return Err(Error::Usage(format!(
                "truth id '{truth_id}' may not contain commas or line breaks"
            )));
        }
        if let Some((_, y)) = points.iter().find(|(_, y)| !(y.re.is_finite() && y.im.is_finite())) {
            return Err(Error::Domain(format!("non-finite observation {y}")));
        }
        Ok(Dataset {
            points,
            spin,
            seed,
            truth_id: truth_id.to_string(),
        })
    }

    pub fn points(&self) -> &[(Direction, Complex64)] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn spin(&self) -> i64 {
        self.spin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn truth_id(&self) -> &str {
        &self.truth_id
    }

    /// Copy with every observation multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Dataset {
            points: self.points.iter().map(|(x, y)| (*x, y * c)).collect(),
            ..self.clone()
        }
    }
}

/// Identifier written into datasets drawn from `truth`.
pub fn truth_id(truth: &BesovTestSection) -> String {
    let p = &truth.params;
    format!(
        "besov-r{}-pi{}-q{}-G{}-L{}-seed{}",
        p.r(),
        p.pi(),
        p.q(),
        p.radius(),
        truth.band_limit,
        truth.seed
    )
}

/// Noise-free values `F_s(x)` of the section at many points.
pub fn evaluate_section(truth: &BesovTestSection, xs: &[Direction]) -> Result<Vec<Complex64>> {
    let t = HarmonicTransform::new(truth.spin, truth.coeffs.lmax());
    t.evaluate_many(&truth.coeffs, xs)
}

pub fn simulate_dataset(truth: &BesovTestSection, n: usize, noise: &NoiseModel, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Usage("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Direction> = (0..n).map(|_| uniform_direction(&mut rng)).collect();
    let fs = evaluate_section(truth, &xs)?;
    let points = xs
        .into_iter()
        .zip(fs)
        .map(|(x, f)| (x, f + noise.sample(&mut rng)))
        .collect();
    Dataset::new(points, truth.spin, seed, &truth_id(truth))
}

/// `t_n = sqrt(log n / n)`.
pub fn threshold_scale(n: usize) -> f64 {
    let n = n as f64;
    (n.ln() / n).sqrt()
}

/// `J_n = max{j : B^j ≤ sqrt(n / log n)}`.
pub fn cutoff_level(bandwidth: f64, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Usage(format!("cut-off level needs n ≥ 2, got {n}")));
    }
    if !(bandwidth > 1.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!("bandwidth B={bandwidth} must exceed 1")));
    }
    let nf = n as f64;
    let limit = (nf / nf.ln()).sqrt();
    let mut j = (limit.ln() / bandwidth.ln()).floor().max(0.0) as usize;
    while j > 0 && bandwidth.powi(j as i32) > limit {
        j -= 1;
    }
    while bandwidth.powi(j as i32 + 1) <= limit {
        j += 1;
    }
    Ok(j)
}

/// `κ = 2 max(σ, M) (p r / (r + 1))^{3/4}`.
pub fn default_kappa(sigma: f64, sup_bound: f64, p: f64, r: f64) -> Result<f64> {
    if !p.is_finite() || !(p >= 1.0) {
        return Err(Error::Config(format!(
            "automatic threshold constant needs a finite loss index, got p={p}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Config(format!("smoothness r={r} must be positive")));
    }
    Ok(2.0 * sigma.max(sup_bound) * (p * r / (r + 1.0)).powf(0.75))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    bandwidth: f64,
    spin: i64,
    flavor: Flavor,
    kappa: f64,
    n: usize,
    sup_bound: f64,
}

impl EstimatorConfig {
    pub fn new(bandwidth: f64, spin: i64, flavor: Flavor, kappa: f64, n: usize, sup_bound: f64) -> Result<Self> {
        cutoff_level(bandwidth, n)?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Config(format!("threshold constant kappa={kappa} must be finite and non-negative")));
        }
        if !(sup_bound >= 0.0) || !sup_bound.is_finite() {
            return Err(Error::Config(format!("sup bound M={sup_bound} must be finite and non-negative")));
        }
        Ok(EstimatorConfig {
            bandwidth,
            spin,
            flavor,
            kappa,
            n,
            sup_bound,
        })
    }

    /// Configuration matching `frame` for a sample of size `n`.
    pub fn for_frame(frame: &NeedletFrame, kappa: f64, n: usize, sup_bound: f64) -> Result<Self> {
        Self::new(frame.bandwidth(), frame.spin(), frame.flavor(), kappa, n, sup_bound)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn spin(&self) -> i64 {
        self.spin
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn t_n(&self) -> f64 {
        threshold_scale(self.n)
    }

    pub fn j_n(&self) -> usize {
        cutoff_level(self.bandwidth, self.n).expect("validated at construction")
    }

    /// `κ t_n`.
    pub fn threshold(&self) -> f64 {
        self.kappa * self.t_n()
    }

    /// `4π (σ² τ_j² + M²) / n`, the variance bound of `β̂_jk`.
    pub fn variance_bound(&self, sigma: f64, tau_j: f64) -> f64 {
        4.0 * PI * (sigma * sigma * tau_j * tau_j + self.sup_bound * self.sup_bound) / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub raw: NeedletCoefficients,
    pub kept: NeedletCoefficients,
    pub kept_count_per_level: Vec<usize>,
    pub config: EstimatorConfig,
}

impl EstimateResult {
    pub fn kept_total(&self) -> usize {
        self.kept_count_per_level.iter().sum()
    }

    /// Harmonic coefficients of the estimator `F*`.
    pub fn harmonics(&self, frame: &NeedletFrame) -> Result<HarmonicCoeffs> {
        synthesize_harmonics(frame, &self.kept)
    }
}

fn check_frame(frame: &NeedletFrame, spin: i64, top: usize) -> Result<()> {
    if frame.spin() != spin {
        return Err(Error::Usage(format!(
            "spin-{spin} data given to a spin-{} frame",
            frame.spin()
        )));
    }
    if top > frame.j_max() {
        return Err(Error::Usage(format!(
            "cut-off level {top} exceeds the frame's j_max={}",
            frame.j_max()
        )));
    }
    Ok(())
}

/// `â_lm = (4π/n) Σ_i Y_i conj(Y_{lm;s}(X_i))` up to degree `lmax`.
pub fn estimate_harmonics(data: &Dataset, transform: &HarmonicTransform, lmax: usize) -> Result<HarmonicCoeffs> {
    if data.n() == 0 {
        return Err(Error::Usage("empty dataset".into()));
    }
    if transform.spin() != data.spin || lmax > transform.lmax() {
        return Err(Error::Usage(format!(
            "transform (spin {}, lmax {}) cannot estimate spin-{} coefficients to degree {lmax}",
            transform.spin(),
            transform.lmax(),
            data.spin
        )));
    }
    let mut out = HarmonicCoeffs::zeros(data.spin, lmax);
    let w = 4.0 * PI / data.n() as f64;
    let dirs: Vec<Direction> = data.points.iter().map(|(x, _)| *x).collect();
    let weights: Vec<Complex64> = data.points.iter().map(|(_, y)| y * w).collect();
    transform.accumulate_conj_many(&dirs, &weights, &mut out)?;
    Ok(out)
}

/// `β̂_jk` for every level `j ≤ j_n`.
pub fn estimate_coefficients(data: &Dataset, frame: &NeedletFrame, j_n: usize) -> Result<NeedletCoefficients> {
    if data.n() == 0 {
        return Err(Error::Usage("empty dataset".into()));
    }
    check_frame(frame, data.spin, j_n)?;
    let lmax = frame.levels()[..=j_n]
        .iter()
        .filter(|l| l.is_active())
        .map(|l| l.max_degree())
        .max()
        .unwrap_or(0);
    let a = estimate_harmonics(data, frame.field_transform(), lmax)?;
    analyze_levels(frame, &a, j_n)
}

/// `β*_jk = β̂_jk 1{|β̂_jk| > κ t_n}`.
pub fn threshold_coefficients(raw: &NeedletCoefficients, config: &EstimatorConfig) -> NeedletCoefficients {
    let cut = config.threshold();
    raw.map(|_, _, b| if b.norm() > cut { b } else { Complex64::default() })
}

pub fn fit(data: &Dataset, config: &EstimatorConfig, frame: &NeedletFrame) -> Result<EstimateResult> {
    if config.n != data.n() {
        return Err(Error::Usage(format!(
            "configuration for n={} applied to {} observations",
            config.n,
            data.n()
        )));
    }
    if config.spin != frame.spin() || config.flavor != frame.flavor() || config.bandwidth != frame.bandwidth() {
        return Err(Error::Usage("estimator configuration does not match the frame".into()));
    }
    let j_n = config.j_n();
    let raw = estimate_coefficients(data, frame, j_n)?;
    let kept = threshold_coefficients(&raw, config);
    let kept_count_per_level = kept
        .levels()
        .iter()
        .map(|l| l.iter().filter(|b| **b != Complex64::default()).count())
        .collect();
    Ok(EstimateResult {
        raw,
        kept,
        kept_count_per_level,
        config: config.clone(),
    })
}

/// `∫ |F*(x) - F_s(x)|^p dx` by dense-grid quadrature (grid sup for `p = ∞`).
pub fn lp_loss(estimate: &EstimateResult, truth: &BesovTestSection, frame: &NeedletFrame, p: f64) -> Result<f64> {
    let h = estimate.harmonics(frame)?;
    harmonic_lp_loss(&h, &truth.coeffs, p)
}

/// `∫ |G - F|^p` for two band-limited sections given by harmonic coefficients.
pub fn harmonic_lp_loss(estimate: &HarmonicCoeffs, truth: &HarmonicCoeffs, p: f64) -> Result<f64> {
    let diff = estimate.axpy(Complex64::new(-1.0, 0.0), truth)?;
    if diff.energy() == 0.0 {
        return Ok(0.0);
    }
    let diff = diff.with_lmax(diff.effective_lmax().max(diff.spin().unsigned_abs() as usize));
    let t = HarmonicTransform::new(diff.spin(), diff.lmax());
    lp_power(&t, &diff, p, NORM_OVERSAMPLE)
}

/// Empirical tail frequencies of the concentration probe, one entry per κ.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub j: usize,
    pub k: usize,
    pub n: usize,
    pub replicates: usize,
    pub kappas: Vec<f64>,
    /// Frequency of `|(4π/n) Σ_i conj(ψ_jk(X_i)) ε_i| > κ t_n`.
    pub noise_tail: Vec<f64>,
    /// Frequency of `|β̂_jk - β_jk| > κ t_n`.
    pub total_tail: Vec<f64>,
}

impl ConcentrationReport {
    /// Binomial standard error of a tail frequency.
    pub fn stderr(&self, frequency: f64) -> f64 {
        (frequency * (1.0 - frequency) / self.replicates as f64).sqrt()
    }
}

/// Tail frequencies at the equatorial node of level `j`, with all κ values
/// sharing the same draws.
#[allow(clippy::too_many_arguments)]
pub fn concentration_probe(
    truth: &BesovTestSection,
    frame: &NeedletFrame,
    j: usize,
    n: usize,
    noise: &NoiseModel,
    kappas: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if replicates == 0 {
        return Err(Error::Usage("at least one replicate is required".into()));
    }
    if j > cutoff_level(frame.bandwidth(), n)? {
        return Err(Error::Usage(format!(
            "level {j} violates B^j ≤ sqrt(n/log n) at n={n}"
        )));
    }
    check_frame(frame, truth.spin, j)?;
    let k = frame.level(j)?.cubature().equatorial_node();
    let psi = frame.needlet_harmonics(j, k)?;
    let beta: Complex64 = psi
        .iter()
        .map(|(l, m, c)| c.conj() * truth.coeffs.get(l, m))
        .sum();
    let psi_transform = HarmonicTransform::new(frame.spin(), psi.lmax());
    let truth_transform = HarmonicTransform::new(truth.spin, truth.coeffs.lmax());
    let t_n = threshold_scale(n);
    let mut noise_hits = vec![0usize; kappas.len()];
    let mut total_hits = vec![0usize; kappas.len()];
    let w = 4.0 * PI / n as f64;
    for r in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, r as u64));
        let xs: Vec<Direction> = (0..n).map(|_| uniform_direction(&mut rng)).collect();
        let eps: Vec<Complex64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
        let fs = truth_transform.evaluate_many(&truth.coeffs, &xs)?;
        let ps = psi_transform.evaluate_many(&psi, &xs)?;
        let mut noise_sum = Complex64::default();
        let mut total_sum = Complex64::default();
        for i in 0..n {
            let c = ps[i].conj();
            noise_sum += c * eps[i];
            total_sum += c * (fs[i] + eps[i]);
        }
        let noise_dev = (noise_sum * w).norm();
        let total_dev = (total_sum * w - beta).norm();
        for (i, kappa) in kappas.iter().enumerate() {
            let cut = kappa * t_n;
            noise_hits[i] += usize::from(noise_dev > cut);
            total_hits[i] += usize::from(total_dev > cut);
        }
    }
    let freq = |h: Vec<usize>| h.into_iter().map(|c| c as f64 / replicates as f64).collect();
    Ok(ConcentrationReport {
        j,
        k,
        n,
        replicates,
        kappas: kappas.to_vec(),
        noise_tail: freq(noise_hits),
        total_tail: freq(total_hits),
    })
}

const DATASET_HEADER: &str = "spin,n,seed,truth_id";
const DATASET_COLUMNS: &str = "theta,phi,re,im";

pub fn write_dataset<W: Write>(mut w: W, data: &Dataset) -> std::io::Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    writeln!(w, "{},{},{},{}", data.spin, data.n(), data.seed, data.truth_id)?;
    writeln!(w, "{DATASET_COLUMNS}")?;
    for (x, y) in &data.points {
        writeln!(
            w,
            "{},{},{},{}",
            crate::format::float(x.theta()),
            crate::format::float(x.phi()),
            crate::format::float(y.re),
            crate::format::float(y.im)
        )?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R, path: &Path) -> Result<Dataset> {
    let mut lines = crate::format::numbered_lines(r, path);
    let mut expect = |label: &str| -> Result<(usize, String)> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(path, 0, format!("missing {label}")))
    };
    let (ln, head) = expect("header line")?;
    if head.trim() != DATASET_HEADER {
        return Err(Error::parse(path, ln, format!("expected header '{DATASET_HEADER}'")));
    }
    let (ln, values) = expect("header values")?;
    let f: Vec<&str> = values.trim().splitn(4, ',').map(str::trim).collect();
    if f.len() != 4 {
        return Err(Error::parse(path, ln, "expected spin,n,seed,truth_id values"));
    }
    let spin: i64 = f[0].parse().map_err(|e| Error::parse(path, ln, format!("spin: {e}")))?;
    let n: usize = f[1].parse().map_err(|e| Error::parse(path, ln, format!("n: {e}")))?;
    let seed: u64 = f[2].parse().map_err(|e| Error::parse(path, ln, format!("seed: {e}")))?;
    let truth = f[3].to_string();
    let (ln, cols) = expect("column line")?;
    if cols.trim() != DATASET_COLUMNS {
        return Err(Error::parse(path, ln, format!("expected column line '{DATASET_COLUMNS}'")));
    }
    let mut points = Vec::with_capacity(n);
    for item in lines {
        let (ln, line) = item?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, ln, e.to_string()))?;
        if v.len() != 4 {
            return Err(Error::parse(path, ln, "expected 4 fields theta,phi,re,im"));
        }
        let x = Direction::new(v[0], v[1]).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        points.push((x, Complex64::new(v[2], v[3])));
    }
    if points.len() != n {
        return Err(Error::parse(
            path,
            0,
            format!("header announces {n} rows, found {}", points.len()),
        ));
    }
    Dataset::new(points, spin, seed, &truth)
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_dataset(&mut w, data).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(f), path)
}

const SUMMARY_HEADER: &str = "J_n,kappa,t_n,kept_total";

/// Kept coefficients in the needlet coefficient format, followed by a
/// `J_n,kappa,t_n,kept_total` summary.
pub fn write_estimate<W: Write>(mut w: W, frame: &NeedletFrame, result: &EstimateResult) -> std::io::Result<()> {
    write_coefficients(&mut w, frame, &result.kept)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    writeln!(
        w,
        "{},{},{},{}",
        result.config.j_n(),
        crate::format::float(result.config.kappa),
        crate::format::float(result.config.t_n()),
        result.kept_total()
    )
}

pub fn save_estimate(path: &Path, frame: &NeedletFrame, result: &EstimateResult) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_estimate(&mut w, frame, result).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Summary row of an estimate file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSummary {
    pub j_n: usize,
    pub kappa: f64,
    pub t_n: f64,
    pub kept_total: usize,
}

/// Parses the trailing lines returned by [`crate::needlets::read_coefficients`].
pub fn parse_summary(trailer: &[String]) -> Result<EstimateSummary> {
    let bad = |m: &str| Error::Usage(format!("estimate summary: {m}"));
    match trailer {
        [head, values, ..] if head == SUMMARY_HEADER => {
            let f: Vec<&str> = values.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            Ok(EstimateSummary {
                j_n: f[0].parse().map_err(|_| bad("J_n"))?,
                kappa: f[1].parse().map_err(|_| bad("kappa"))?,
                t_n: f[2].parse().map_err(|_| bad("t_n"))?,
                kept_total: f[3].parse().map_err(|_| bad("kept_total"))?,
            })
        }
        _ => Err(bad("missing summary block")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{sample_besov_section, BesovParams};
    use crate::needlets::{build_frame, read_coefficients};

    fn truth(frame: &NeedletFrame, band_limit: usize) -> BesovTestSection {
        let p = BesovParams::new(2.0, 2.0, 2.0, 1.0).unwrap();
        sample_besov_section(frame, &p, band_limit, 21).unwrap()
    }

    #[test]
    fn cutoff_levels() {
        assert_eq!(cutoff_level(2.0, 1000).unwrap(), 3);
        assert!(matches!(cutoff_level(2.0, 1), Err(Error::Usage(_))));
        assert!(cutoff_level(1.0, 100).is_err());
        for n in [2usize, 3, 10, 57, 1000, 4096, 65536, 100_000] {
            for b in [1.5, 2.0, 3.0] {
                let j = cutoff_level(b, n).unwrap();
                let limit = (n as f64 / (n as f64).ln()).sqrt();
                assert!(b.powi(j as i32) <= limit && limit < b.powi(j as i32 + 1), "n={n} B={b}");
            }
        }
        assert!((threshold_scale(100) - 0.21460).abs() < 1e-5);
    }

    #[test]
    fn thresholding_examples() {
        let f = build_frame(2.0, 0, Flavor::Scalar, 1).unwrap();
        let raw = NeedletCoefficients::zeros(&f, 1).map(|_, k, _| match k {
            0 => Complex64::new(0.3, 0.0),
            1 => Complex64::new(0.0, 0.2),
            2 => Complex64::new(0.18, 0.24),
            _ => Complex64::default(),
        });
        let cfg = EstimatorConfig::new(2.0, 0, Flavor::Scalar, 1.0, 100, 1.0).unwrap();
        let kept = threshold_coefficients(&raw, &cfg);
        assert_eq!(kept.get(0, 0).unwrap(), Complex64::new(0.3, 0.0));
        assert_eq!(kept.get(0, 1).unwrap(), Complex64::default());
        assert_eq!(kept.get(0, 2).unwrap(), Complex64::new(0.18, 0.24));
        let zero = EstimatorConfig::new(2.0, 0, Flavor::Scalar, 0.0, 100, 1.0).unwrap();
        assert_eq!(threshold_coefficients(&raw, &zero), raw);
        let huge = EstimatorConfig::new(2.0, 0, Flavor::Scalar, 1e9, 100, 1.0).unwrap();
        assert!(threshold_coefficients(&raw, &huge).iter().all(|(_, _, b)| b == Complex64::default()));
        assert!(EstimatorConfig::new(2.0, 0, Flavor::Scalar, -1.0, 100, 1.0).is_err());
    }

    #[test]
    fn default_threshold_constant() {
        let k = default_kappa(0.5, 0.8, 2.0, 2.0).unwrap();
        assert!((k - 1.6 * (4.0f64 / 3.0).powf(0.75)).abs() < 1e-15);
        assert!(default_kappa(0.5, 0.8, f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn noiseless_data_reproduce_the_section() {
        let f = build_frame(2.0, 2, Flavor::Mixed, 4).unwrap();
        let t = truth(&f, 10);
        let d = simulate_dataset(&t, 50, &NoiseModel::none(), 4).unwrap();
        let xs: Vec<Direction> = d.points().iter().map(|(x, _)| *x).collect();
        let fs = evaluate_section(&t, &xs).unwrap();
        for ((_, y), v) in d.points().iter().zip(fs) {
            assert_eq!(*y, v);
        }
        assert_eq!(d, simulate_dataset(&t, 50, &NoiseModel::none(), 4).unwrap());
        assert!(simulate_dataset(&t, 0, &NoiseModel::none(), 4).is_err());
    }

    #[test]
    fn zero_observations_give_zero_coefficients() {
        let f = build_frame(2.0, 2, Flavor::PureSpin, 3).unwrap();
        let xs: Vec<(Direction, Complex64)> = (0..30)
            .map(|i| (Direction::new(0.1 + 0.09 * i as f64, 0.2 * i as f64).unwrap(), Complex64::default()))
            .collect();
        let d = Dataset::new(xs, 2, 0, "zeros").unwrap();
        let b = estimate_coefficients(&d, &f, 3).unwrap();
        assert!(b.iter().all(|(_, _, v)| v == Complex64::default()));
        let empty = Dataset::new(Vec::new(), 2, 0, "none").unwrap();
        assert!(matches!(estimate_coefficients(&empty, &f, 3), Err(Error::Usage(_))));
        assert!(matches!(estimate_coefficients(&d, &f, 4), Err(Error::Usage(_))));
        let wrong = Dataset::new(d.points().to_vec(), 1, 0, "spin1").unwrap();
        assert!(matches!(estimate_coefficients(&wrong, &f, 2), Err(Error::Usage(_))));
        assert!(Dataset::new(Vec::new(), 2, 0, "a,b").is_err());
    }

    #[test]
    fn huge_threshold_loss_is_the_section_norm() {
        let f = build_frame(2.0, 2, Flavor::Mixed, 4).unwrap();
        let t = truth(&f, 12);
        let d = simulate_dataset(&t, 400, &NoiseModel::new(NoiseKind::Gaussian, 0.3).unwrap(), 8).unwrap();
        let cfg = EstimatorConfig::for_frame(&f, 1e9, 400, 1.0).unwrap();
        let est = fit(&d, &cfg, &f).unwrap();
        assert_eq!(est.kept_total(), 0);
        let zero = HarmonicCoeffs::zeros(2, 12);
        for p in [1.0, 2.0, 3.0] {
            let loss = lp_loss(&est, &t, &f, p).unwrap();
            let direct = harmonic_lp_loss(&zero, &t.coeffs, p).unwrap();
            assert!((loss - direct).abs() < 1e-12 * direct);
        }
        let bad = EstimatorConfig::for_frame(&f, 1.0, 401, 1.0).unwrap();
        assert!(matches!(fit(&d, &bad, &f), Err(Error::Usage(_))));
    }

    #[test]
    fn dataset_and_estimate_files_round_trip() {
        let f = build_frame(2.0, 2, Flavor::Mixed, 4).unwrap();
        let t = truth(&f, 8);
        let d = simulate_dataset(&t, 64, &NoiseModel::new(NoiseKind::Rademacher, 0.2).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        assert!(buf.starts_with(b"spin,n,seed,truth_id\n2,64,1,besov-"));
        let back = read_dataset(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, d);

        let cfg = EstimatorConfig::for_frame(&f, 0.5, 64, 1.0).unwrap();
        let est = fit(&d, &cfg, &f).unwrap();
        let mut buf = Vec::new();
        write_estimate(&mut buf, &f, &est).unwrap();
        let (_, _, kept, trailer) = read_coefficients(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(kept, est.kept);
        let summary = parse_summary(&trailer).unwrap();
        assert_eq!(summary.j_n, cfg.j_n());
        assert_eq!(summary.kept_total, est.kept_total());
        assert_eq!(summary.t_n, cfg.t_n());
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| replicate_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(replicate_seed(7, 0), replicate_seed(8, 0));
    }
}
