use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ddmaps::latent_harmonics;
use ddmaps::ode::{self, Method, Space, Trajectory};
use ddmaps::reduced::{build_grid, default_grid_bounds, ReducedModel};
use ddmaps::{io, nystrom, Error};
use ndarray::{Array1, Array2};
use serde::Serialize;

use super::{CliError, CliResult};
use crate::provenance::write_provenance;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMethod {
    Bf,
    Gt,
    Talhi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    Rk4,
    Rk45,
}

#[derive(Args)]
pub struct IntegrateArgs {
    /// Reduced-model scheme.
    #[arg(long, value_enum)]
    pub method: ReductionMethod,
    /// Fitted embedding model JSON.
    #[arg(long)]
    pub dmap: PathBuf,
    /// Lifting model JSON (required for bf/gt, optional for talhi when an
    /// ambient trajectory output is requested).
    #[arg(long = "lh-lift")]
    pub lh_lift: Option<PathBuf>,
    /// Derivative-regression model JSON (required for talhi).
    #[arg(long = "lh-deriv")]
    pub lh_deriv: Option<PathBuf>,
    /// Problem name providing the full right-hand side (required for bf/gt).
    #[arg(long)]
    pub problem: Option<String>,
    /// Grid nodes per dimension (gt).
    #[arg(long, default_value_t = 60)]
    pub grid: usize,
    /// Load a pre-built grid table instead of building one (gt).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Save the built grid table (gt).
    #[arg(long = "save-table")]
    pub save_table: Option<PathBuf>,
    /// Initial condition as comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub ic: Option<String>,
    /// Initial condition from the first row of a CSV file.
    #[arg(long = "ic-file")]
    pub ic_file: Option<PathBuf>,
    /// Space the initial condition lives in; ambient conditions are
    /// restricted before integration.
    #[arg(long = "ic-space", value_enum, default_value_t = IcSpace::Ambient)]
    pub ic_space: IcSpace,
    /// Integration horizon.
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Stepping scheme; defaults to rk4 for gt (the interpolated field is
    /// only piecewise smooth) and rk45 otherwise.
    #[arg(long, value_enum)]
    pub integrator: Option<Integrator>,
    /// Fixed step size (euler/rk4).
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Absolute tolerance (rk45).
    #[arg(long, default_value_t = 1e-7)]
    pub atol: f64,
    /// Relative tolerance (rk45).
    #[arg(long, default_value_t = 1e-7)]
    pub rtol: f64,
    /// Record at this fixed interval instead of every accepted step.
    #[arg(long = "record-interval")]
    pub record_interval: Option<f64>,
    /// Latent trajectory output CSV.
    #[arg(long = "out-latent")]
    pub out_latent: PathBuf,
    /// Lifted ambient trajectory output CSV (needs a lifting model).
    #[arg(long = "out-ambient")]
    pub out_ambient: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcSpace {
    Ambient,
    Latent,
}

#[derive(Serialize)]
struct ResolvedConfig {
    method: ReductionMethod,
    integrator: Integrator,
    h: f64,
    atol: f64,
    rtol: f64,
    t_end: f64,
    grid: Option<usize>,
    record_interval: Option<f64>,
}

fn parse_ic(args: &IntegrateArgs) -> Result<Array1<f64>, Error> {
    match (&args.ic, &args.ic_file) {
        (Some(s), None) => {
            let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse()).collect();
            vals.map(Array1::from)
                .map_err(|e| Error::InvalidConfig(format!("bad --ic: {e}")))
        }
        (None, Some(path)) => {
            let m = io::read_matrix_csv(path)?;
            Ok(m.row(0).to_owned())
        }
        _ => Err(Error::InvalidConfig(
            "provide exactly one of --ic or --ic-file".into(),
        )),
    }
}

pub fn run(args: &IntegrateArgs) -> CliResult {
    let dmap = io::load_dmap_model(&args.dmap)?;
    let lh_lift = args.lh_lift.as_deref().map(io::load_lh_model).transpose()?;
    let lh_deriv = args.lh_deriv.as_deref().map(io::load_lh_model).transpose()?;
    let system = args
        .problem
        .as_deref()
        .map(|name| {
            ddmaps::problems::system_by_name(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown problem {name:?}")))
        })
        .transpose()?;

    // Initial condition in latent coordinates.
    let ic = parse_ic(args)?;
    let phi0 = match args.ic_space {
        IcSpace::Ambient => nystrom::restrict(&dmap, &ic.view())?.phi,
        IcSpace::Latent => {
            if ic.len() != dmap.latent_dim() {
                return Err(Error::InvalidConfig(format!(
                    "latent initial condition has dimension {}, model selects {}",
                    ic.len(),
                    dmap.latent_dim()
                ))
                .into());
            }
            ic
        }
    };

    // Assemble the reduced vector field.
    let model = match args.method {
        ReductionMethod::Bf => {
            let lift = lh_lift
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("bf requires --lh-lift".into()))?;
            let system = system
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("bf requires --problem".into()))?;
            ReducedModel::BackAndForth {
                dmap: &dmap,
                lift,
                system,
            }
        }
        ReductionMethod::Gt => {
            let table = match &args.table {
                Some(path) => {
                    let r = std::io::BufReader::new(std::fs::File::open(path)?);
                    serde_json::from_reader(r).map_err(Error::from)?
                }
                None => {
                    let lift = lh_lift
                        .as_ref()
                        .ok_or_else(|| Error::InvalidConfig("gt requires --lh-lift".into()))?;
                    let system = system
                        .as_deref()
                        .ok_or_else(|| Error::InvalidConfig("gt requires --problem".into()))?;
                    let bounds =
                        default_grid_bounds(&dmap.latent_coordinates().view(), 0.02);
                    let table = build_grid(&dmap, lift, system, &bounds, args.grid)?;
                    log::info!(
                        "built {}x{} grid, {} nodes masked",
                        args.grid,
                        args.grid,
                        table.masked_count()
                    );
                    table
                }
            };
            if let Some(path) = &args.save_table {
                let w = std::io::BufWriter::new(std::fs::File::create(path)?);
                serde_json::to_writer(w, &table).map_err(Error::from)?;
            }
            ReducedModel::GridTabulation { table }
        }
        ReductionMethod::Talhi => {
            let deriv = lh_deriv
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("talhi requires --lh-deriv".into()))?;
            ReducedModel::Talhi { derivatives: deriv }
        }
    };

    let integrator = args.integrator.unwrap_or(match args.method {
        ReductionMethod::Gt => Integrator::Rk4,
        _ => Integrator::Rk45,
    });
    let method = match integrator {
        Integrator::Euler => Method::Euler { h: args.h },
        Integrator::Rk4 => Method::Rk4 { h: args.h },
        Integrator::Rk45 => Method::Rk45 {
            atol: args.atol,
            rtol: args.rtol,
        },
    };

    let rhs = |phi: &ndarray::ArrayView1<f64>| model.rhs(phi);
    let result = match args.record_interval {
        Some(interval) => {
            if !(interval > 0.0) {
                return Err(Error::InvalidConfig("record interval must be positive".into()).into());
            }
            let n = (args.t_end / interval).floor() as usize;
            let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * interval).collect();
            if *times.last().unwrap() < args.t_end {
                times.push(args.t_end);
            }
            ode::integrate_at(rhs, &phi0.view(), &times, &method)?
        }
        None => ode::integrate(rhs, &phi0.view(), args.t_end, &method)?,
    };

    let latent = Trajectory {
        times: result.trajectory.times.clone(),
        states: result.trajectory.states.clone(),
        space: Space::Latent,
    };
    io::write_trajectory_csv(&args.out_latent, &latent)?;
    let resolved = ResolvedConfig {
        method: args.method,
        integrator,
        h: args.h,
        atol: args.atol,
        rtol: args.rtol,
        t_end: args.t_end,
        grid: matches!(args.method, ReductionMethod::Gt).then_some(args.grid),
        record_interval: args.record_interval,
    };
    write_provenance(&args.out_latent, "integrate", 0, &resolved)?;
    println!(
        "latent trajectory: {} rows ({} steps, {} rhs evaluations) -> {}",
        latent.len(),
        result.stats.steps_accepted,
        result.stats.rhs_evals,
        args.out_latent.display()
    );

    if let Some(out_ambient) = &args.out_ambient {
        let lift = lh_lift
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--out-ambient requires --lh-lift".into()))?;
        let mut states = Array2::<f64>::zeros((latent.len(), lift.n_targets()));
        for i in 0..latent.len() {
            states
                .row_mut(i)
                .assign(&latent_harmonics::lift(&dmap, lift, &latent.state(i))?);
        }
        io::write_trajectory_csv(
            out_ambient,
            &Trajectory {
                times: latent.times.clone(),
                states,
                space: Space::Ambient,
            },
        )?;
        println!("lifted ambient trajectory -> {}", out_ambient.display());
    }

    if let Some(cause) = result.abort {
        let t_stop = latent.times.last().copied().unwrap_or(0.0);
        eprintln!("integration stopped early at t = {t_stop}: {cause}");
        return Err(CliError::PartialTrajectory(cause));
    }
    Ok(())
}
