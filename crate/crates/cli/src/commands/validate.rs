use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use ddmaps::bench::build_grid_local_baseline;
use ddmaps::latent_harmonics::LHModel;
use ddmaps::ode::{self, Method};
use ddmaps::reduced::{build_grid, default_grid_bounds, ReducedModel};
use ddmaps::stats::mse;
use ddmaps::{io, nystrom, DMapModel, Error};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{compute_targets, holdout_split, take_rows, CliResult, TrainTargets};
use crate::provenance::config_hash;

#[derive(Args)]
pub struct ValidateArgs {
    /// Problem providing the ground-truth dynamics.
    #[arg(long)]
    pub problem: String,
    /// Fitted embedding model JSON.
    #[arg(long)]
    pub dmap: PathBuf,
    /// Lifting model JSON.
    #[arg(long = "lh-lift")]
    pub lh_lift: PathBuf,
    /// Derivative-regression model JSON.
    #[arg(long = "lh-deriv")]
    pub lh_deriv: PathBuf,
    /// Seed that was used for the holdout split at training time; also
    /// seeds the held-out test trajectory.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Holdout fraction used at training time.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    /// Horizon of the trajectory comparison.
    #[arg(long = "t-end", default_value_t = 6.0)]
    pub t_end: f64,
    /// Grid nodes per dimension for the tabulated model.
    #[arg(long, default_value_t = 60)]
    pub grid: usize,
    /// Also time the per-node local-retraining baseline on the same grid.
    #[arg(long = "bench-grid", default_value_t = false)]
    pub bench_grid: bool,
    /// Neighbors for the local-retraining baseline.
    #[arg(long = "k-neighbors", default_value_t = 20)]
    pub k_neighbors: usize,
    /// Report output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct TrajectoryReport {
    times: Vec<f64>,
    /// Relative error ||phi - phi_ref|| / ||phi_ref|| per recorded time.
    relative_error: BTreeMap<String, Vec<f64>>,
    max_relative_error: BTreeMap<String, f64>,
    /// Time at which a method aborted, if it did.
    aborted_at: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ValidationReport {
    problem: String,
    seed: u64,
    holdout: f64,
    selected: Vec<usize>,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    lift_mse: BTreeMap<String, f64>,
    derivative_mse: BTreeMap<String, f64>,
    trajectory: TrajectoryReport,
    timing_seconds: BTreeMap<String, f64>,
    config_sha256: String,
}

/// Held-out MSE of a persisted model, recomputing the training split from
/// the seed and verifying the model was actually fit on it.
fn held_out_mse(
    dmap: &DMapModel,
    model: &LHModel,
    names: &[String],
    target_values: &Array2<f64>,
    holdout: f64,
    seed: u64,
) -> Result<BTreeMap<String, f64>, Error> {
    let phi = dmap.latent_coordinates();
    let (train, test) = holdout_split(phi.nrows(), holdout, seed)?;
    let expected_train = take_rows(&phi, &train);
    if model.latent_train != expected_train {
        return Err(Error::InvalidConfig(
            "model training rows do not match this --seed/--holdout split; \
             re-train or pass the training-time values"
                .into(),
        ));
    }
    let phi_test = take_rows(&phi, &test);
    let scaled_truth = model.scaler.transform(&take_rows(target_values, &test).view());
    let mut preds = Array2::<f64>::zeros((test.len(), target_values.ncols()));
    for i in 0..phi_test.nrows() {
        preds.row_mut(i).assign(&model.extend(&phi_test.row(i))?);
    }
    let mut out = BTreeMap::new();
    for (c, name) in names.iter().enumerate() {
        out.insert(
            name.clone(),
            mse(&preds.column(c).to_vec(), &scaled_truth.column(c).to_vec()),
        );
    }
    Ok(out)
}

/// Integrate one reduced model on the record grid and score it against the
/// restricted reference.
fn run_reduced(
    label: &str,
    model: &ReducedModel<'_>,
    phi0: &Array1<f64>,
    times: &[f64],
    phi_ref: &Array2<f64>,
    method: &Method,
    report: &mut TrajectoryReport,
    timings: &mut BTreeMap<String, f64>,
) -> Result<(), Error> {
    let t0 = Instant::now();
    let run = ode::integrate_at(|phi| model.rhs(phi), &phi0.view(), times, method)?;
    timings.insert(format!("integrate_{label}"), t0.elapsed().as_secs_f64());

    let mut series = Vec::with_capacity(run.trajectory.len());
    for i in 0..run.trajectory.len() {
        let diff: f64 = run
            .trajectory
            .state(i)
            .iter()
            .zip(phi_ref.row(i).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let norm: f64 = phi_ref.row(i).iter().map(|v| v * v).sum();
        series.push((diff / norm).sqrt());
    }
    let max = series.iter().cloned().fold(0.0, f64::max);
    report.relative_error.insert(label.into(), series);
    report.max_relative_error.insert(label.into(), max);
    if run.abort.is_some() {
        report
            .aborted_at
            .insert(label.into(), *run.trajectory.times.last().unwrap_or(&0.0));
    }
    Ok(())
}

pub fn run(args: &ValidateArgs) -> CliResult {
    let dmap = io::load_dmap_model(&args.dmap)?;
    let lh_lift = io::load_lh_model(&args.lh_lift)?;
    let lh_deriv = io::load_lh_model(&args.lh_deriv)?;
    let system = ddmaps::problems::system_by_name(&args.problem)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown problem {:?}", args.problem)))?;
    let system = system.as_ref();

    let mut timings: BTreeMap<String, f64> = BTreeMap::new();

    // Held-out regression errors, mirroring the training-time split.
    let (lift_values, lift_names) = compute_targets(&dmap, TrainTargets::Lift, None)?;
    let lift_mse = held_out_mse(
        &dmap,
        &lh_lift,
        &lift_names,
        &lift_values,
        args.holdout,
        args.seed,
    )?;
    let (deriv_values, deriv_names) =
        compute_targets(&dmap, TrainTargets::Derivatives, Some(&args.problem))?;
    let derivative_mse = held_out_mse(
        &dmap,
        &lh_deriv,
        &deriv_names,
        &deriv_values,
        args.holdout,
        args.seed,
    )?;

    // Held-out initial condition: integrate the full system through the
    // problem's transient so the test point sits on the manifold.
    let sampling = match args.problem.as_str() {
        "chafee-infante" => ddmaps::problems::ChafeeInfante::standard().default_sampling(),
        "stiff-surrogate" => ddmaps::problems::StiffSurrogate::default().default_sampling(),
        _ => {
            return Err(Error::InvalidConfig(format!(
                "no trajectory defaults for problem {:?}",
                args.problem
            ))
            .into())
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(0x7e57));
    let ic_raw = system.random_initial_condition(sampling.ic_amplitude, &mut rng);
    let settle = ode::integrate_at(
        |x| Ok(system.rhs(x)),
        &ic_raw.view(),
        &[0.0, sampling.transient_time.max(1e-3)],
        &Method::Rk45 {
            atol: 1e-10,
            rtol: 1e-10,
        },
    )?;
    let x0 = settle.trajectory.last_state().to_owned();

    // Reference: full trajectory restricted point by point.
    let n_rec = (args.t_end / 0.05).round() as usize;
    let times: Vec<f64> = (0..=n_rec).map(|i| i as f64 * 0.05).collect();
    let t0 = Instant::now();
    let full = ode::integrate_at(
        |x| Ok(system.rhs(x)),
        &x0.view(),
        &times,
        &Method::Rk45 {
            atol: 1e-10,
            rtol: 1e-10,
        },
    )?;
    if full.abort.is_some() {
        return Err(Error::NumericalDegeneracy(
            "full-model reference trajectory failed".into(),
        )
        .into());
    }
    let mut phi_ref = Array2::<f64>::zeros((times.len(), dmap.latent_dim()));
    for i in 0..times.len() {
        phi_ref
            .row_mut(i)
            .assign(&nystrom::restrict(&dmap, &full.trajectory.state(i))?.phi);
    }
    timings.insert("reference_restrict".into(), t0.elapsed().as_secs_f64());
    let phi0 = phi_ref.row(0).to_owned();

    let mut traj_report = TrajectoryReport {
        times: times.clone(),
        relative_error: BTreeMap::new(),
        max_relative_error: BTreeMap::new(),
        aborted_at: BTreeMap::new(),
    };

    let rk45 = Method::Rk45 {
        atol: 1e-7,
        rtol: 1e-7,
    };
    run_reduced(
        "talhi",
        &ReducedModel::Talhi {
            derivatives: &lh_deriv,
        },
        &phi0,
        &times,
        &phi_ref,
        &rk45,
        &mut traj_report,
        &mut timings,
    )?;
    run_reduced(
        "bf",
        &ReducedModel::BackAndForth {
            dmap: &dmap,
            lift: &lh_lift,
            system,
        },
        &phi0,
        &times,
        &phi_ref,
        &rk45,
        &mut traj_report,
        &mut timings,
    )?;

    // Grid tabulation: the build is timed, optionally against the per-node
    // local-retraining baseline.
    let bounds = default_grid_bounds(&dmap.latent_coordinates().view(), 0.02);
    let t0 = Instant::now();
    let table = build_grid(&dmap, &lh_lift, system, &bounds, args.grid)?;
    let global_s = t0.elapsed().as_secs_f64();
    timings.insert("gt_build_global".into(), global_s);
    log::info!(
        "grid {}x{}: {} masked nodes",
        args.grid,
        args.grid,
        table.masked_count()
    );
    if args.bench_grid {
        let t0 = Instant::now();
        let local = build_grid_local_baseline(&dmap, system, &bounds, args.grid, args.k_neighbors)?;
        let local_s = t0.elapsed().as_secs_f64();
        log::info!("local-baseline grid: {} masked nodes", local.masked_count());
        timings.insert("gt_build_local_baseline".into(), local_s);
        timings.insert("gt_speedup_local_over_global".into(), local_s / global_s);
    }
    run_reduced(
        "gt",
        &ReducedModel::GridTabulation { table },
        &phi0,
        &times,
        &phi_ref,
        &Method::Rk4 { h: 0.01 },
        &mut traj_report,
        &mut timings,
    )?;

    let report = ValidationReport {
        problem: args.problem.clone(),
        seed: args.seed,
        holdout: args.holdout,
        selected: dmap.selected.clone(),
        eigenvalues: dmap.eigenvalues.to_vec(),
        residuals: dmap.residuals.clone(),
        lift_mse,
        derivative_mse,
        trajectory: traj_report,
        timing_seconds: timings,
        config_sha256: config_hash(&(
            &args.problem,
            args.seed,
            args.holdout,
            args.t_end,
            args.grid,
        )),
    };

    println!("validation report: {}", args.problem);
    println!("  selected coordinates: {:?}", report.selected);
    println!("  held-out lift MSE (scaled):");
    for (name, v) in &report.lift_mse {
        println!("    {name:>12}  {v:.3e}");
    }
    println!("  held-out derivative MSE (scaled):");
    for (name, v) in &report.derivative_mse {
        println!("    {name:>12}  {v:.3e}");
    }
    println!("  max relative trajectory error vs restricted truth:");
    for (name, v) in &report.trajectory.max_relative_error {
        let note = report
            .trajectory
            .aborted_at
            .get(name)
            .map(|t| format!("  (aborted at t = {t})"))
            .unwrap_or_default();
        println!("    {name:>12}  {v:.3e}{note}");
    }
    println!("  timings:");
    for (name, v) in &report.timing_seconds {
        println!("    {name:>28}  {v:.3}s");
    }

    let w = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    serde_json::to_writer_pretty(w, &report).map_err(Error::from)?;
    println!("wrote report to {}", args.out.display());
    Ok(())
}
