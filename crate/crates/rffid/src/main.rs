//! Command-line front end for the RF fingerprint pipeline.
//!
//! Stages mirror the experiment protocol: `generate` (clean captures),
//! `degrade` (AWGN variants), `extract` (SCPSD features), `fit-energy`
//! (energy-curve recovery), `train` (RSKNN), `evaluate` (accuracy report),
//! and `reproduce` (self-checking scenarios).
//!
//! Exit codes: 0 success, 1 scenario assertion failure, 2 usage or I/O
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rffid::antinoise::{fit_population, FitMode};
use rffid::classify::{evaluate_accuracy, train_rsknn, Compensation};
use rffid::features::SpectralContext;
use rffid::io;
use rffid::io::{DatasetManifest, Role, MANIFEST_VERSION};
use rffid::pipeline;

#[derive(Parser)]
#[command(name = "rffid", version, about = "Noise-robust RF fingerprint identification pipeline")]
struct Cli {
    /// Master seed for every pseudo-random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModeArg {
    Averaged,
    Pooled,
}

#[derive(Clone, Copy, ValueEnum)]
enum AntiNoiseArg {
    Off,
    On,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize clean impaired captures for a device population.
    Generate {
        #[arg(long, default_value_t = 20)]
        devices: usize,
        /// Frames per device.
        #[arg(long, default_value_t = 300)]
        frames: usize,
        /// Symbols per frame.
        #[arg(long, default_value_t = 64)]
        symbols: usize,
        /// Fingerprint tap spread.
        #[arg(long, default_value_t = 0.2)]
        spread: f64,
        /// Fraction of devices with an unstable output power state.
        #[arg(long, default_value_t = 0.0)]
        instability: f64,
        #[arg(long, default_value_t = 5)]
        samples_per_chip: usize,
        #[arg(long, default_value_t = 32)]
        chips_per_symbol: usize,
        #[arg(long, default_value_t = 10e6)]
        sample_rate_hz: f64,
    },
    /// Add AWGN copies of every input frame at the listed SNRs.
    Degrade {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated SNR list in dB, e.g. 0,5,10,15.
        #[arg(long, value_delimiter = ',', required = true)]
        snr_list: Vec<f64>,
        #[arg(long, value_enum)]
        role: RoleArg,
        /// Output file name (inside --out).
        #[arg(long, default_value = "degraded.rfiq")]
        name: String,
    },
    /// Extract SCPSD feature rows from a recording.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Skip energy normalization.
        #[arg(long)]
        unnormalized: bool,
        /// Record the blind M2M4 SNR estimate instead of the stored value.
        #[arg(long)]
        blind_snr: bool,
        #[arg(long, default_value = "features.csv")]
        name: String,
    },
    /// Fit P^2 = a*10^(-b*SNR) + c from noisy recordings.
    FitEnergy {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "averaged")]
        mode: FitModeArg,
        #[arg(long, default_value = "energy_fit.txt")]
        name: String,
    },
    /// Train the random-subspace KNN ensemble on labeled features.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 30)]
        learners: usize,
        #[arg(long, default_value_t = 80)]
        d_sub: usize,
    },
    /// Score a test feature set with and/or without compensation.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        anti_noise: AntiNoiseArg,
    },
    /// Run a self-checking reproduction scenario.
    Reproduce {
        /// fig2 | fig4 | table2
        scenario: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match pool.install(|| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> rffid::Result<ExitCode> {
    std::fs::create_dir_all(&cli.out)?;

    match &cli.command {
        Command::Generate {
            devices,
            frames,
            symbols,
            spread,
            instability,
            samples_per_chip,
            chips_per_symbol,
            sample_rate_hz,
        } => {
            let manifest = DatasetManifest {
                format_version: MANIFEST_VERSION,
                master_seed: cli.seed,
                n_devices: *devices,
                n_frames_per_device: *frames,
                n_symbols: *symbols,
                samples_per_chip: *samples_per_chip,
                chips_per_symbol: *chips_per_symbol,
                sample_rate_hz: *sample_rate_hz,
                spread: *spread,
                instability_fraction: *instability,
                snr_grid_db: (0..=35).step_by(5).map(f64::from).collect(),
            };
            let records = pipeline::generate_records(&manifest)?;
            io::write_manifest(&cli.out.join("manifest.json"), &manifest)?;
            io::write_iq(&cli.out.join("clean.rfiq"), manifest.sample_rate_hz, &records)?;
            println!(
                "wrote {} clean frames for {} devices to {}",
                records.len(),
                devices,
                cli.out.display()
            );
        }

        Command::Degrade {
            manifest,
            input,
            snr_list,
            role,
            name,
        } => {
            let manifest = io::read_manifest(manifest)?;
            let (rate, clean) = io::read_iq(input)?;
            let role = match role {
                RoleArg::Train => Role::Train,
                RoleArg::Test => Role::Test,
            };
            let noisy = pipeline::degrade_records(&manifest, &clean, snr_list, role)?;
            let out = cli.out.join(name);
            io::write_iq(&out, rate, &noisy)?;
            println!("wrote {} noisy frames to {}", noisy.len(), out.display());
        }

        Command::Extract {
            manifest,
            input,
            unnormalized,
            blind_snr,
            name,
        } => {
            let manifest = io::read_manifest(manifest)?;
            let (_, records) = io::read_iq(input)?;
            let features =
                pipeline::extract_records(&manifest, &records, !unnormalized, *blind_snr)?;
            let out = cli.out.join(name);
            io::write_features_csv(&out, &features)?;
            println!("wrote {} feature rows to {}", features.len(), out.display());
        }

        Command::FitEnergy {
            manifest,
            input,
            mode,
            name,
        } => {
            let _manifest = io::read_manifest(manifest)?;
            let (_, records) = io::read_iq(input)?;
            let samples = pipeline::energy_samples(&records)?;
            let mode = match mode {
                FitModeArg::Averaged => FitMode::Averaged,
                FitModeArg::Pooled => FitMode::Pooled,
            };
            let fit = fit_population(&samples, mode)?;
            let out = cli.out.join(name);
            io::write_population_fit(&out, &fit)?;
            println!(
                "a_bar = {:.5}, b_bar = {:.5}, c_bar = {:.5} ({} devices) -> {}",
                fit.averaged.a,
                fit.averaged.b,
                fit.averaged.c,
                fit.per_device.len(),
                out.display()
            );
        }

        Command::Train {
            features,
            fit,
            k,
            learners,
            d_sub,
        } => {
            let rows = io::read_features_csv(features)?;
            let fit = io::read_population_fit(fit)?;
            let values = rows.iter().map(|r| r.values.clone()).collect();
            let labels = rows.iter().map(|r| r.device_id).collect();
            let model = train_rsknn(values, labels, *learners, *d_sub, *k, cli.seed, fit)?;

            // canonical sidecar next to the model file
            let sidecar = cli.out.join("model_features.csv");
            io::write_features_csv(&sidecar, &rows)?;
            let out = cli.out.join("model.txt");
            io::write_model(&out, &model, &sidecar)?;
            println!(
                "trained {} learners (k = {}, d_sub = {}) on {} rows -> {}",
                learners,
                k,
                d_sub,
                rows.len(),
                out.display()
            );
        }

        Command::Evaluate {
            manifest,
            model,
            features,
            anti_noise,
        } => {
            let manifest = io::read_manifest(manifest)?;
            let symbol_model = pipeline::symbol_model_for(&manifest)?;
            let ctx = SpectralContext::new(&symbol_model);
            let model = io::read_model(model)?;
            let rows = io::read_features_csv(features)?;

            let without = match anti_noise {
                AntiNoiseArg::On => None,
                _ => Some(evaluate_accuracy(&model, &rows, Compensation::Off, &ctx)?),
            };
            let with = match anti_noise {
                AntiNoiseArg::Off => None,
                _ => Some(evaluate_accuracy(&model, &rows, Compensation::On, &ctx)?),
            };

            let table = io::format_accuracy_table(with.as_deref(), without.as_deref());
            io::write_text(&cli.out.join("report.txt"), &table)?;
            io::write_text(
                &cli.out.join("report.csv"),
                &io::accuracy_csv(with.as_deref(), without.as_deref()),
            )?;
            print!("{table}");
        }

        Command::Reproduce { scenario } => {
            let report = pipeline::run_scenario(scenario, cli.seed)?;
            let rendered = report.render();
            io::write_text(&cli.out.join(format!("report_{scenario}.txt")), &rendered)?;
            print!("{rendered}");
            if !report.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }

    Ok(ExitCode::SUCCESS)
}
