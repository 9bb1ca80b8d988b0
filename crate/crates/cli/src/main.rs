//! `needlet-bench`: theoretical rate exponents, synthetic truths and datasets,
//! single fits, convergence runs and rate fits for the spin needlet
//! thresholding estimator.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use spin_needlets::bench::{alpha_theoretical, estimate_rate, load_csv, run_convergence, save_csv, ExperimentConfig};
use spin_needlets::besov::save_section;
use spin_needlets::regression::{fit, load_dataset, save_dataset, save_estimate, simulate_dataset, EstimatorConfig};

#[derive(Parser)]
#[command(author, version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the theoretical rate exponent α(r, π, p) and its zone.
    Alpha {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        pi: f64,
        /// Loss index; `inf` selects the sup-norm loss.
        #[arg(long)]
        p: f64,
    },
    /// Sample a truth section from the configured Besov ball.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also simulate a dataset from the truth and write it here.
        #[arg(long, requires = "n")]
        data: Option<PathBuf>,
        /// Sample size of the simulated dataset.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the thresholding estimator to a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence experiment and write `convergence.csv` and `summary.txt`.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the rate slope of a convergence CSV.
    Rate {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Alpha { r, pi, p } => {
            let (alpha, zone) = alpha_theoretical(r, pi, p)?;
            println!("alpha={alpha} zone={zone}");
        }
        Command::Synth { config, out, data, n } => {
            let cfg = ExperimentConfig::load(&config)?;
            let frame = cfg.frame()?;
            let truth = cfg.sample_truth(&frame, cfg.truth_seed(0))?;
            save_section(&out, &truth)?;
            println!("wrote truth section to {}", out.display());
            if let (Some(path), Some(n)) = (data, n) {
                let dataset = simulate_dataset(&truth, n, &cfg.noise, cfg.data_seed(n, 0))?;
                save_dataset(&path, &dataset)?;
                println!("wrote {n} observations to {}", path.display());
            }
        }
        Command::Fit { data, config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dataset = load_dataset(&data)?;
            if dataset.spin() != cfg.spin {
                bail!(
                    "dataset has spin {} but the configuration asks for spin {}",
                    dataset.spin(),
                    cfg.spin
                );
            }
            let frame = cfg.frame_for(dataset.n())?;
            let sup_bound = cfg.sup_bound_without_truth();
            let kappa = cfg.kappa_for(sup_bound)?;
            let est_config = EstimatorConfig::for_frame(&frame, kappa, dataset.n(), sup_bound)?;
            let result = fit(&dataset, &est_config, &frame)?;
            save_estimate(&out, &frame, &result)?;
            println!(
                "J_n={} kappa={kappa} t_n={} kept_total={}",
                est_config.j_n(),
                est_config.t_n(),
                result.kept_total()
            );
        }
        Command::Bench { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let result = run_convergence(&cfg)?;
            let csv = out.join("convergence.csv");
            save_csv(&csv, &result.rows)?;
            let slope = result.fitted_slope().map_or("none".to_string(), |s| s.to_string());
            let mut summary = format!(
                "fitted_slope={slope}\ntheoretical_alpha={}\nzone={}\n",
                result.theoretical_alpha, result.zone
            );
            for point in result.fit.iter().flat_map(|f| &f.points) {
                summary.push_str(&format!(
                    "n={} mean_loss_p={} residual={}\n",
                    point.n, point.mean_loss, point.residual
                ));
            }
            let summary_path = out.join("summary.txt");
            std::fs::write(&summary_path, &summary).with_context(|| format!("writing {}", summary_path.display()))?;
            print!("{summary}");
        }
        Command::Rate { csv } => {
            let rows = load_csv(&csv)?;
            let rate = estimate_rate(&rows)?;
            println!("slope={}", rate.slope);
            for point in &rate.points {
                println!("n={} mean_loss_p={} residual={}", point.n, point.mean_loss, point.residual);
            }
        }
    }
    Ok(())
}
