//! End-to-end acceptance run. Every criterion prints one PASS/FAIL line with
//! its measured quantity and runtime; the test fails if any criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use spin_needlets::bench::{alpha_theoretical, run_convergence, write_csv, ExperimentConfig, RateResult};
use spin_needlets::besov::{sample_besov_section, BesovParams, BesovTestSection};
use spin_needlets::needlets::*;
use spin_needlets::quadrature::build_cubature;
use spin_needlets::regression::*;
use spin_needlets::sphere::{spin_ylm, Direction, HarmonicIndex};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn check(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let o = f();
    let elapsed = t0.elapsed();
    let pass = o.pass && elapsed < budget;
    println!(
        "criterion {id} ({name}): {} {}; {:.1} s of {} s budget",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn truth(frame: &NeedletFrame, band_limit: usize, seed: u64) -> BesovTestSection {
    let params = BesovParams::new(2.0, 2.0, 2.0, 1.0).unwrap();
    sample_besov_section(frame, &params, band_limit, seed).unwrap()
}

fn harmonic_orthonormality() -> Outcome {
    let lmax = 16;
    let grid = build_cubature(2 * lmax);
    let mut worst: f64 = 0.0;
    for s in 0..=2i64 {
        let idx: Vec<HarmonicIndex> = (s as usize..=lmax)
            .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| HarmonicIndex::new(l, m, s).unwrap()))
            .collect();
        let values: Vec<Vec<Complex64>> = idx
            .iter()
            .map(|&h| grid.nodes().iter().map(|n| spin_ylm(h, n.point).unwrap() * n.weight.sqrt()).collect())
            .collect();
        for (a, va) in values.iter().enumerate() {
            for (b, vb) in values.iter().enumerate().skip(a) {
                let g: Complex64 = va.iter().zip(vb).map(|(x, y)| x * y.conj()).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - want).norm());
            }
        }
    }
    outcome(worst < 1e-8, format!("max Gram deviation {worst:.2e} (limit 1e-8)"))
}

fn partition_of_unity() -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [1.5, 2.0, 3.0] {
        let w = build_window(b, 1.0).unwrap();
        for i in 0..1000 {
            let t = b.powf(6.0 * i as f64 / 999.0);
            let s: f64 = (0..=8).map(|j| w.b_squared(t / b.powi(j))).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    outcome(worst < 1e-10, format!("max deviation {worst:.2e} (limit 1e-10)"))
}

fn tight_frame_and_reconstruction() -> Outcome {
    let mut r = common::rng(31);
    let grid = build_cubature(16);
    let xs: Vec<Direction> = grid.nodes().iter().map(|n| n.point).collect();
    let mut energy_err: f64 = 0.0;
    let mut recon_err: f64 = 0.0;
    for flavor in [Flavor::PureSpin, Flavor::Mixed] {
        let f = common::covering_frame(2.0, 2, flavor, 8);
        for _ in 0..20 {
            let a = common::random_coeffs(&mut r, 2, 8);
            let beta = analyze(&f, &a).unwrap();
            energy_err = energy_err.max((beta.energy() - a.energy()).abs() / a.energy());
            let back = synthesize_many(&f, &beta, &xs).unwrap();
            let want = f.field_transform().evaluate_many(&a, &xs).unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for ((u, v), n) in back.iter().zip(&want).zip(grid.nodes()) {
                num += (u - v).norm_sqr() * n.weight;
                den += v.norm_sqr() * n.weight;
            }
            recon_err = recon_err.max((num / den).sqrt());
        }
    }
    outcome(
        energy_err < 1e-8 && recon_err < 1e-6,
        format!("energy mismatch {energy_err:.2e} (limit 1e-8), reconstruction error {recon_err:.2e} (limit 1e-6)"),
    )
}

fn needlet_l2_norms() -> Outcome {
    let f = build_frame(2.0, 2, Flavor::PureSpin, 5).unwrap();
    let mut r = common::rng(41);
    let (mut worst, mut largest): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let j = rand::Rng::random_range(&mut r, 1..=5usize);
        let k = rand::Rng::random_range(&mut r, 0..f.level(j).unwrap().len());
        let norm = needlet_lp_norm(&f, j, k, 2.0).unwrap();
        worst = worst.max((norm - f.tau(j, k).unwrap()).abs());
        largest = largest.max(norm);
    }
    outcome(
        worst < 1e-6 && largest <= 1.0 + 1e-6,
        format!("max |norm - tau| {worst:.2e} (limit 1e-6), largest norm {largest:.4}"),
    )
}

fn norm_scaling() -> Outcome {
    // Frozen bands for the equatorial needlet of each level, both flavors.
    let bands = [(1.0, 1.8, 3.4), (4.0, 0.10, 0.17), (f64::INFINITY, 0.05, 0.15)];
    let mut pass = true;
    let mut parts = Vec::new();
    for flavor in [Flavor::PureSpin, Flavor::Mixed] {
        let f = build_frame(2.0, 2, flavor, 5).unwrap();
        for &(p, lo, hi) in &bands {
            let exponent = if p.is_finite() { 0.5 - 1.0 / p } else { 0.5 };
            let scaled: Vec<f64> = (2..=5)
                .map(|j| {
                    let k = f.level(j).unwrap().cubature().equatorial_node();
                    needlet_lp_norm(&f, j, k, p).unwrap() * 2f64.powf(-2.0 * j as f64 * exponent)
                })
                .collect();
            pass &= hi / lo < 4.0 && scaled.iter().all(|v| (lo..=hi).contains(v));
            let (min, max) = scaled
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
            parts.push(format!("{flavor} p={p} in [{min:.3}, {max:.3}] vs [{lo}, {hi}]"));
        }
    }
    outcome(pass, parts.join(", "))
}

fn estimator_moments() -> Outcome {
    let f = build_frame(2.0, 2, Flavor::Mixed, 7).unwrap();
    let t = truth(&f, 8, 61);
    let beta = analyze(&f, &t.coeffs).unwrap();
    let noise = NoiseModel::new(NoiseKind::Gaussian, 0.5).unwrap();
    let replicate_coeffs = |n: usize, top: usize, reps: usize, seed: u64| -> Vec<NeedletCoefficients> {
        (0..reps)
            .map(|r| {
                let data = simulate_dataset(&t, n, &noise, replicate_seed(seed, r as u64)).unwrap();
                estimate_coefficients(&data, &f, top).unwrap()
            })
            .collect()
    };

    let n = 2000;
    let j_n = cutoff_level(2.0, n).unwrap();
    let reps = replicate_coeffs(n, j_n, 200, 62);
    let mut r = common::rng(63);
    let mut worst_z: f64 = 0.0;
    for j in 1..=j_n {
        for _ in 0..20 / j_n {
            let k = rand::Rng::random_range(&mut r, 0..f.level(j).unwrap().len());
            let draws: Vec<Complex64> = reps.iter().map(|c| c.get(j, k).unwrap()).collect();
            let m = draws.iter().sum::<Complex64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d - m).norm_sqr()).sum::<f64>() / (draws.len() - 1) as f64;
            let se = (var / draws.len() as f64).sqrt();
            worst_z = worst_z.max((m - beta.get(j, k).unwrap()).norm() / se);
        }
    }
    let unbiased = worst_z <= 3.0;

    let (j, k) = (2, f.level(2).unwrap().cubature().equatorial_node());
    let b = beta.get(j, k).unwrap();
    let mut scaled = [Vec::new(), Vec::new()];
    for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let dev: Vec<f64> = replicate_coeffs(n, j, 200, 70 + i as u64)
            .iter()
            .map(|c| (c.get(j, k).unwrap() - b).norm())
            .collect();
        for (slot, p) in [2, 4].into_iter().enumerate() {
            let moment = dev.iter().map(|d| d.powi(p)).sum::<f64>() / dev.len() as f64;
            scaled[slot].push(moment * (n as f64).powf(p as f64 / 2.0));
        }
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
    let (s2, s4) = (spread(&scaled[0]), spread(&scaled[1]));
    outcome(
        unbiased && s2 < 1.5 && s4 < 2.5,
        format!(
            "max |mean - beta|/se {worst_z:.2} over 20 coefficients (limit 3), max/min of n^(p/2) E|dev|^p across n: p=2 {s2:.3} (limit 1.5), p=4 {s4:.3} (limit 2.5)"
        ),
    )
}

fn concentration_direction() -> Outcome {
    let f = build_frame(2.0, 2, Flavor::PureSpin, 7).unwrap();
    let t = truth(&f, 8, 71);
    let noise = NoiseModel::new(NoiseKind::Gaussian, 0.5).unwrap();
    let kappas = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0];
    let small = concentration_probe(&t, &f, 2, 1_000, &noise, &kappas, 1_000, 72).unwrap();
    let large = concentration_probe(&t, &f, 2, 10_000, &noise, &kappas, 1_000, 73).unwrap();
    let monotone_kappa = [&small, &large]
        .iter()
        .all(|rep| rep.total_tail.windows(2).all(|w| w[1] <= w[0]));
    let monotone_n = (0..kappas.len()).all(|i| {
        let (a, b) = (small.total_tail[i], large.total_tail[i]);
        b <= a + 2.0 * (small.stderr(a).powi(2) + large.stderr(b).powi(2)).sqrt()
    });
    outcome(
        monotone_kappa && monotone_n,
        format!(
            "tails at kappa {kappas:?}: n=1000 {:?}, n=10000 {:?}",
            small.total_tail, large.total_tail
        ),
    )
}

const RATE_CONFIG: &str = "\
r = 2
pi = 2
q = 2
radius = 16
spin = 2
flavor = mixed
B = 2
p = 2
sigma = 0.5
noise_kind = gaussian
n_grid = 2^10..2^16
replicates = 50
seed = 2024
kappa = 0.8
sup_bound = auto
band_limit = 64
";

fn rate_config() -> ExperimentConfig {
    ExperimentConfig::parse(RATE_CONFIG, Path::new("rate.conf")).unwrap()
}

fn rate_exponent(result: &RateResult) -> Outcome {
    let alpha = result.theoretical_alpha;
    let slope = result.fitted_slope().unwrap_or(f64::NAN);
    let (lo, hi) = (-alpha - 0.15, -alpha + 0.15);
    outcome(
        (lo..=hi).contains(&slope),
        format!("fitted slope {slope:.4} in [{lo:.4}, {hi:.4}], {} zone", result.zone),
    )
}

fn alpha_checks() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [2.5f64, 3.0, 3.5, 4.0, 5.0, 6.0, 7.5, 9.0, 11.0, 14.0] {
        for pi in [1.0f64, 1.5, 2.0, 3.0, 4.5] {
            let p: f64 = pi * (r + 1.0);
            let regular = r * p / (2.0 * r + 2.0);
            let sparse = p * (r - 2.0 * (1.0 / pi - 1.0 / p)) / (2.0 * (r - 2.0 * (1.0 / pi - 0.5)));
            worst = worst.max((regular - sparse).abs());
            worst = worst.max((alpha_theoretical(r, pi, p).unwrap().0 - regular).abs());
        }
    }
    let a1 = alpha_theoretical(2.0, 2.0, 2.0).unwrap().0;
    let a2 = alpha_theoretical(4.0, 2.0, f64::INFINITY).unwrap().0;
    outcome(
        worst < 1e-12 && a1 == 2.0 / 3.0 && a2 == 0.375,
        format!("boundary gap {worst:.2e} over 50 triples, alpha(2,2,2) = {a1}, alpha(4,2,inf) = {a2}"),
    )
}

fn csv_bytes(result: &RateResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &result.rows).unwrap();
    buf
}

#[test]
fn acceptance() {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let mut results = vec![
        check(1, "harmonic orthonormality", mins(1), harmonic_orthonormality),
        check(2, "partition of unity", Duration::from_secs(1), partition_of_unity),
        check(3, "tight frame and reconstruction", mins(5), tight_frame_and_reconstruction),
        check(4, "needlet L2 norm identity", mins(2), needlet_l2_norms),
        check(5, "needlet norm scaling", mins(5), norm_scaling),
        check(6, "estimator moments", mins(10), estimator_moments),
        check(7, "concentration direction", mins(10), concentration_direction),
    ];

    let config = rate_config();
    let mut first = None;
    results.push(check(8, "rate exponent, regular zone", mins(120), || {
        let result = run_convergence(&config).unwrap();
        let o = rate_exponent(&result);
        first = Some(result);
        o
    }));
    results.push(check(9, "alpha_theoretical", Duration::from_secs(1), alpha_checks));
    results.push(check(10, "bench determinism", mins(120), || {
        let a = csv_bytes(first.as_ref().expect("criterion 8 ran"));
        let b = csv_bytes(&run_convergence(&config).unwrap());
        outcome(a == b, format!("{} CSV bytes, identical: {}", a.len(), a == b))
    }));

    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
