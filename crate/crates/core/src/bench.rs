//! Convergence experiments for the thresholding estimator: theoretical rate
//! exponents, seeded Monte Carlo runs over a grid of sample sizes, CSV output
//! and least-squares rate fits.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::besov::{sample_besov_section, BesovParams, BesovTestSection};
use crate::error::{Error, Result};
use crate::format::{float, numbered_lines};
use crate::harmonics::HarmonicCoeffs;
use crate::needlets::{build_frame, Flavor, NeedletFrame};
use crate::regression::{
    cutoff_level, default_kappa, fit, harmonic_lp_loss, lp_loss, replicate_seed, simulate_dataset, EstimatorConfig,
    NoiseKind, NoiseModel,
};

/// Relative width of the band around `π = p/(r+1)` reported as the boundary.
const ZONE_TOL: f64 = 1e-12;

pub const CSV_HEADER: &str = "n,replicate,p,loss_p,J_n,kept_total,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Regular,
    Sparse,
    Boundary,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Regular => "regular",
            Zone::Sparse => "sparse",
            Zone::Boundary => "boundary",
        })
    }
}

/// `α(r, π, p)` of the `L^p` risk bound `(n / log n)^{-α}` and the zone it
/// comes from.
///
/// Regular zone `π > p/(r+1)`: `α = r p / (2r + 2)`. Sparse zone:
/// `α = p (r - 2(1/π - 1/p)) / (2 (r - 2(1/π - 1/2)))`. For `p = ∞`:
/// `α = (r - 2/π) / (2 (r - 2(1/π - 1/2)))`.
pub fn alpha_theoretical(r: f64, pi: f64, p: f64) -> Result<(f64, Zone)> {
    if !(r > 0.0) || !r.is_finite() || !(pi >= 1.0) || r - 2.0 / pi <= 0.0 {
        return Err(Error::Domain(format!("need r > 2/pi with pi ≥ 1, got r={r}, pi={pi}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("loss index p={p} must lie in [1, ∞]")));
    }
    let sparse_denominator = 2.0 * (r - 2.0 * (1.0 / pi - 0.5));
    if p.is_infinite() {
        return Ok(((r - 2.0 / pi) / sparse_denominator, Zone::Sparse));
    }
    let regular = r * p / (2.0 * r + 2.0);
    let sparse = p * (r - 2.0 * (1.0 / pi - 1.0 / p)) / sparse_denominator;
    let gap = pi - p / (r + 1.0);
    if gap.abs() <= ZONE_TOL * pi.max(1.0) {
        Ok((regular, Zone::Boundary))
    } else if gap > 0.0 {
        Ok((regular, Zone::Regular))
    } else {
        Ok((sparse, Zone::Sparse))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaPolicy {
    /// `2 max(σ, M) (p r / (r + 1))^{3/4}`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupBound {
    /// The grid sup-norm of the truth when it is known, else the ball radius.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMode {
    /// One truth for the whole experiment.
    Fixed,
    /// One truth per replicate index, shared across sample sizes.
    PerReplicate,
}

impl FromStr for TruthMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(TruthMode::Fixed),
            "per_replicate" => Ok(TruthMode::PerReplicate),
            other => Err(format!("unknown truth mode '{other}'")),
        }
    }
}

/// A convergence experiment read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub besov: BesovParams,
    pub spin: i64,
    pub flavor: Flavor,
    pub bandwidth: f64,
    pub noise: NoiseModel,
    pub p: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub kappa: KappaPolicy,
    pub sup_bound: SupBound,
    pub seed: u64,
    pub band_limit: usize,
    pub truth_mode: TruthMode,
}

const REQUIRED_KEYS: [&str; 12] = [
    "r", "pi", "q", "radius", "spin", "flavor", "B", "p", "sigma", "n_grid", "replicates", "seed",
];
const OPTIONAL_KEYS: [&str; 5] = ["kappa", "sup_bound", "noise_kind", "band_limit", "truth_mode"];
pub const DEFAULT_BAND_LIMIT: usize = 64;

/// Parses `2^a..2^b` or a comma-separated list of sample sizes.
pub fn parse_n_grid(s: &str) -> std::result::Result<Vec<usize>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let exponent = |t: &str| -> std::result::Result<u32, String> {
            t.trim()
                .strip_prefix("2^")
                .ok_or_else(|| format!("range bound '{t}' must look like 2^k"))?
                .parse::<u32>()
                .map_err(|e| format!("range bound '{t}': {e}"))
        };
        let (a, b) = (exponent(lo)?, exponent(hi)?);
        if a > b || b >= usize::BITS {
            return Err(format!("empty or oversized range 2^{a}..2^{b}"));
        }
        return Ok((a..=b).map(|k| 1usize << k).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("sample size '{}': {e}", t.trim())))
        .collect()
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("'{s}': {e}")),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut raw = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, format!("'{body}' is not a key = value line")))?;
            let k = k.trim();
            if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
                return Err(Error::parse(path, i + 1, format!("unknown key '{k}'")));
            }
            if raw.insert(k.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::parse(path, i + 1, format!("duplicate key '{k}'")));
            }
        }
        if let Some(k) = REQUIRED_KEYS.iter().find(|k| !raw.contains_key(**k)) {
            return Err(Error::parse(path, 0, format!("missing key '{k}'")));
        }
        let get = |k: &str| raw.get(k).map(|(ln, v)| (*ln, v.as_str()));
        let field = |k: &str| get(k).expect("required keys checked");
        let number = |k: &str| -> Result<f64> {
            let (ln, v) = field(k);
            parse_number(v).map_err(|m| Error::parse(path, ln, format!("{k}: {m}")))
        };
        let integer = |k: &str| -> Result<u64> {
            let (ln, v) = field(k);
            v.parse::<u64>().map_err(|e| Error::parse(path, ln, format!("{k}: {e}")))
        };

        let besov = BesovParams::new(number("r")?, number("pi")?, number("q")?, number("radius")?)?;
        let (ln, spin) = field("spin");
        let spin = spin
            .parse::<i64>()
            .map_err(|e| Error::parse(path, ln, format!("spin: {e}")))?;
        let (ln, flavor) = field("flavor");
        let flavor = flavor
            .parse::<Flavor>()
            .map_err(|e| Error::parse(path, ln, format!("flavor: {e}")))?;
        let (ln, grid) = field("n_grid");
        let n_grid = parse_n_grid(grid).map_err(|m| Error::parse(path, ln, format!("n_grid: {m}")))?;

        let kind = match get("noise_kind") {
            Some((ln, v)) => v
                .parse::<NoiseKind>()
                .map_err(|e| Error::parse(path, ln, format!("noise_kind: {e}")))?,
            None => NoiseKind::Gaussian,
        };
        let auto_or_number = |k: &str| -> Result<Option<f64>> {
            match get(k) {
                None | Some((_, "auto")) => Ok(None),
                Some((ln, v)) => parse_number(v)
                    .map(Some)
                    .map_err(|m| Error::parse(path, ln, format!("{k}: {m}"))),
            }
        };
        let kappa = auto_or_number("kappa")?.map_or(KappaPolicy::Auto, KappaPolicy::Fixed);
        let sup_bound = auto_or_number("sup_bound")?.map_or(SupBound::Auto, SupBound::Fixed);
        let mut band_limit = DEFAULT_BAND_LIMIT;
        if let Some((ln, v)) = get("band_limit") {
            band_limit = v
                .parse()
                .map_err(|e| Error::parse(path, ln, format!("band_limit: {e}")))?;
        }
        let mut truth_mode = TruthMode::Fixed;
        if let Some((ln, v)) = get("truth_mode") {
            truth_mode = v.parse().map_err(|m| Error::parse(path, ln, format!("truth_mode: {m}")))?;
        }

        let config = ExperimentConfig {
            besov,
            spin,
            flavor,
            bandwidth: number("B")?,
            noise: NoiseModel::new(kind, number("sigma")?)?,
            p: number("p")?,
            n_grid,
            replicates: integer("replicates")? as usize,
            kappa,
            sup_bound,
            seed: integer("seed")?,
            band_limit,
            truth_mode,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "n_grid {:?} must be non-empty and strictly increasing",
                self.n_grid
            )));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("every sample size must be at least 2".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Config(format!("loss index p={} must lie in [1, ∞]", self.p)));
        }
        if self.spin < 0 || (self.flavor == Flavor::Scalar && self.spin != 0) {
            return Err(Error::Config(format!(
                "spin {} is incompatible with the {} flavor",
                self.spin, self.flavor
            )));
        }
        if self.band_limit <= self.spin as usize {
            return Err(Error::Config(format!(
                "band_limit {} must exceed the spin {}",
                self.band_limit, self.spin
            )));
        }
        if let KappaPolicy::Fixed(k) = self.kappa {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::Config(format!("kappa={k} must be finite and non-negative")));
            }
        }
        if let SupBound::Fixed(m) = self.sup_bound {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Config(format!("sup_bound={m} must be finite and non-negative")));
            }
        }
        cutoff_level(self.bandwidth, self.n_grid[0])?;
        if self.kappa == KappaPolicy::Auto {
            default_kappa(self.noise.sigma(), 0.0, self.p, self.besov.r())?;
        }
        Ok(())
    }

    /// Frame deep enough for the band-limit and for `J_n` at the largest `n`.
    pub fn frame(&self) -> Result<NeedletFrame> {
        let n_max = *self.n_grid.last().expect("validated");
        self.frame_for(n_max)
    }

    /// Frame deep enough for the band-limit and for `J_n` at sample size `n`.
    pub fn frame_for(&self, n: usize) -> Result<NeedletFrame> {
        let mut j_max = cutoff_level(self.bandwidth, n)?;
        loop {
            let frame = build_frame(self.bandwidth, self.spin, self.flavor, j_max)?;
            if frame.covers_degree(self.band_limit) {
                return Ok(frame);
            }
            j_max += 1;
        }
    }

    /// Seed of the truth used by `replicate`.
    pub fn truth_seed(&self, replicate: usize) -> u64 {
        match self.truth_mode {
            TruthMode::Fixed => self.seed,
            TruthMode::PerReplicate => replicate_seed(self.seed, replicate as u64),
        }
    }

    /// Seed of the dataset of cell `(n, replicate)`.
    pub fn data_seed(&self, n: usize, replicate: usize) -> u64 {
        replicate_seed(replicate_seed(self.seed, n as u64), replicate as u64)
    }

    pub fn sample_truth(&self, frame: &NeedletFrame, seed: u64) -> Result<BesovTestSection> {
        sample_besov_section(frame, &self.besov, self.band_limit, seed)
    }

    /// `M` for a known truth.
    pub fn sup_bound_for(&self, truth: &BesovTestSection) -> Result<f64> {
        match self.sup_bound {
            SupBound::Fixed(m) => Ok(m),
            SupBound::Auto => {
                let zero = HarmonicCoeffs::zeros(truth.spin, truth.band_limit);
                harmonic_lp_loss(&zero, &truth.coeffs, f64::INFINITY)
            }
        }
    }

    /// `M` when no truth is available.
    pub fn sup_bound_without_truth(&self) -> f64 {
        match self.sup_bound {
            SupBound::Fixed(m) => m,
            SupBound::Auto => self.besov.radius(),
        }
    }

    pub fn kappa_for(&self, sup_bound: f64) -> Result<f64> {
        match self.kappa {
            KappaPolicy::Fixed(k) => Ok(k),
            KappaPolicy::Auto => default_kappa(self.noise.sigma(), sup_bound, self.p, self.besov.r()),
        }
    }
}

/// One `(n, replicate)` cell of a convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub replicate: usize,
    pub p: f64,
    /// `∫ |F* - F|^p`, or the grid sup for `p = ∞`.
    pub loss_p: f64,
    pub j_n: usize,
    pub kept_total: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub mean_loss: f64,
    /// `log(mean_loss)` minus the fitted line.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub rows: Vec<ConvergenceRow>,
    /// Present when the grid has at least 3 sample sizes.
    pub fit: Option<RateFit>,
    pub theoretical_alpha: f64,
    pub zone: Zone,
}

impl RateResult {
    pub fn fitted_slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }
}

fn run_cell(
    config: &ExperimentConfig,
    frame: &NeedletFrame,
    truth: &(BesovTestSection, f64),
    n: usize,
    replicate: usize,
) -> Result<ConvergenceRow> {
    let (section, sup_bound) = truth;
    let seed = config.data_seed(n, replicate);
    let data = simulate_dataset(section, n, &config.noise, seed)?;
    let kappa = config.kappa_for(*sup_bound)?;
    let est_config = EstimatorConfig::for_frame(frame, kappa, n, *sup_bound)?;
    let estimate = fit(&data, &est_config, frame)?;
    Ok(ConvergenceRow {
        n,
        replicate,
        p: config.p,
        loss_p: lp_loss(&estimate, section, frame, config.p)?,
        j_n: est_config.j_n(),
        kept_total: estimate.kept_total(),
        seed,
    })
}

/// Runs every `(n, replicate)` cell in parallel and fits the rate slope when
/// the grid allows it. Rows come back sorted by `(n, replicate)`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<RateResult> {
    config.validate()?;
    let (theoretical_alpha, zone) = alpha_theoretical(config.besov.r(), config.besov.pi(), config.p)?;
    let frame = config.frame()?;
    let truth_count = match config.truth_mode {
        TruthMode::Fixed => 1,
        TruthMode::PerReplicate => config.replicates,
    };
    let truths = (0..truth_count)
        .into_par_iter()
        .map(|r| {
            let t = config.sample_truth(&frame, config.truth_seed(r))?;
            let m = config.sup_bound_for(&t)?;
            Ok((t, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(n, r)| run_cell(config, &frame, &truths[r % truth_count], n, r))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|row| (row.n, row.replicate));
    let fit = if config.n_grid.len() >= 3 {
        Some(estimate_rate(&rows)?)
    } else {
        None
    };
    Ok(RateResult {
        rows,
        fit,
        theoretical_alpha,
        zone,
    })
}

/// Least-squares slope of `log(mean loss_p)` against `log(n / log n)`, with
/// losses averaged over replicates at each `n`.
pub fn estimate_rate(rows: &[ConvergenceRow]) -> Result<RateFit> {
    let mut groups: Vec<(usize, f64, usize)> = Vec::new();
    let mut sorted: Vec<&ConvergenceRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    for row in sorted {
        match groups.last_mut() {
            Some((n, sum, count)) if *n == row.n => {
                *sum += row.loss_p;
                *count += 1;
            }
            _ => groups.push((row.n, row.loss_p, 1)),
        }
    }
    if groups.len() < 3 {
        return Err(Error::Usage(format!(
            "a rate fit needs at least 3 distinct sample sizes, got {}",
            groups.len()
        )));
    }
    let mut xs = Vec::with_capacity(groups.len());
    let mut ys = Vec::with_capacity(groups.len());
    for &(n, sum, count) in &groups {
        let mean = sum / count as f64;
        if n < 2 || !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::Domain(format!(
                "cannot take logs at n={n} with mean loss {mean}"
            )));
        }
        let nf = n as f64;
        xs.push((nf / nf.ln()).ln());
        ys.push(mean.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let points = groups
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(&(n, sum, count), (x, y))| RatePoint {
            n,
            mean_loss: sum / count as f64,
            residual: y - (intercept + slope * x),
        })
        .collect();
    Ok(RateFit {
        slope,
        intercept,
        points,
    })
}

pub fn write_csv<W: Write>(mut w: W, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n,
            r.replicate,
            float(r.p),
            float(r.loss_p),
            r.j_n,
            r.kept_total,
            r.seed
        )?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Vec<ConvergenceRow>> {
    let mut lines = numbered_lines(r, path);
    match lines.next().transpose()? {
        Some((_, l)) if l.trim() == CSV_HEADER => {}
        Some((ln, _)) => return Err(Error::parse(path, ln, format!("expected header '{CSV_HEADER}'"))),
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for item in lines {
        let (ln, line) = item?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse(path, ln, format!("expected 7 fields, found {}", f.len())));
        }
        let bad = |what: &str, e: &dyn fmt::Display| Error::parse(path, ln, format!("{what}: {e}"));
        rows.push(ConvergenceRow {
            n: f[0].parse().map_err(|e| bad("n", &e))?,
            replicate: f[1].parse().map_err(|e| bad("replicate", &e))?,
            p: f[2].parse().map_err(|e| bad("p", &e))?,
            loss_p: f[3].parse().map_err(|e| bad("loss_p", &e))?,
            j_n: f[4].parse().map_err(|e| bad("J_n", &e))?,
            kept_total: f[5].parse().map_err(|e| bad("kept_total", &e))?,
            seed: f[6].parse().map_err(|e| bad("seed", &e))?,
        });
    }
    Ok(rows)
}

pub fn save_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(&mut w, rows).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), path)
}
