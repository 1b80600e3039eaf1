use std::path::PathBuf;

use clap::Args;
use ddmaps::problems::{rectangle_sample, sample_manifold, system_by_name, SamplingConfig};
use ddmaps::problems::{ChafeeInfante, StiffSurrogate};
use ddmaps::Error;
use serde::Serialize;

use super::CliResult;
use crate::provenance::write_provenance;

#[derive(Args)]
pub struct SampleArgs {
    /// Which built-in problem to sample.
    #[arg(long)]
    pub problem: String,
    /// RNG seed; the same seed reproduces the file byte for byte.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (headerless, one sample per row).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of points (rectangle only).
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Side ratio length:width (rectangle only).
    #[arg(long, default_value_t = 4.0)]
    pub ratio: f64,
    /// Number of initial conditions (dynamics problems).
    #[arg(long)]
    pub n_ic: Option<usize>,
    /// Initial-condition amplitude scale.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Transient time discarded per trajectory.
    #[arg(long)]
    pub transient: Option<f64>,
    /// Recording interval after the transient.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Recorded window length per trajectory.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Subsampling threshold distance d.
    #[arg(long)]
    pub distance: Option<f64>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    problem: &'a str,
    rectangle: Option<(usize, f64)>,
    sampling: Option<SamplingConfigDump>,
}

#[derive(Serialize)]
struct SamplingConfigDump {
    n_initial_conditions: usize,
    ic_amplitude: f64,
    transient_time: f64,
    record_interval: f64,
    record_duration: f64,
    subsample_distance: f64,
}

impl From<&SamplingConfig> for SamplingConfigDump {
    fn from(c: &SamplingConfig) -> Self {
        Self {
            n_initial_conditions: c.n_initial_conditions,
            ic_amplitude: c.ic_amplitude,
            transient_time: c.transient_time,
            record_interval: c.record_interval,
            record_duration: c.record_duration,
            subsample_distance: c.subsample_distance,
        }
    }
}

pub fn run(args: &SampleArgs) -> CliResult {
    let (data, config) = match args.problem.as_str() {
        "rectangle" => {
            let data = rectangle_sample(args.n, args.ratio, args.seed)?;
            let config = ResolvedConfig {
                problem: &args.problem,
                rectangle: Some((args.n, args.ratio)),
                sampling: None,
            };
            (data, config)
        }
        name => {
            let system = system_by_name(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown problem {name:?}")))?;
            let mut cfg = match name {
                "chafee-infante" => ChafeeInfante::standard().default_sampling(),
                "stiff-surrogate" => StiffSurrogate::default().default_sampling(),
                _ => unreachable!("system_by_name covers the names above"),
            };
            if let Some(v) = args.n_ic {
                cfg.n_initial_conditions = v;
            }
            if let Some(v) = args.amplitude {
                cfg.ic_amplitude = v;
            }
            if let Some(v) = args.transient {
                cfg.transient_time = v;
            }
            if let Some(v) = args.interval {
                cfg.record_interval = v;
            }
            if let Some(v) = args.duration {
                cfg.record_duration = v;
            }
            if let Some(v) = args.distance {
                cfg.subsample_distance = v;
            }
            let data = sample_manifold(system.as_ref(), &cfg, args.seed)?;
            let config = ResolvedConfig {
                problem: &args.problem,
                rectangle: None,
                sampling: Some((&cfg).into()),
            };
            (data, config)
        }
    };

    ddmaps::io::write_matrix_csv(&args.out, &data.view())?;
    write_provenance(&args.out, "sample", args.seed, &config)?;
    println!(
        "wrote {} samples x {} coordinates to {}",
        data.nrows(),
        data.ncols(),
        args.out.display()
    );
    Ok(())
}
