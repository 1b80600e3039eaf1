//! Scratch calibration driver (development only).

use ddmaps::latent_harmonics::{default_epsilon2, fit_lh};
use ddmaps::problems::{rectangle_sample, sample_manifold, ChafeeInfante, StiffSurrogate};
use ddmaps::reduced::training_derivatives;
use ddmaps::stats::{mse, spearman};
use ddmaps::{fit_dmaps, select_nonharmonic, DMapModel, KernelConfig};
use ndarray::{Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "rect".into());
    match which.as_str() {
        "rect" => rect(),
        "ci-sample" => ci_sample(),
        "ci-embed" => ci_embed(),
        "ci-lh" => ci_lh(),
        "ci-traj" => ci_traj(),
        "stiff" => stiff(),
        "stiff-pipe" => stiff_pipe(),
        _ => eprintln!("unknown mode"),
    }
}

fn holdout_split(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64) * frac).ceil() as usize;
    let (test, train) = idx.split_at(n_test);
    let mut test = test.to_vec();
    let mut train = train.to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

fn take_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), m.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&m.row(src));
    }
    out
}

fn ci_model() -> (ChafeeInfante, DMapModel) {
    let sys = ChafeeInfante::standard();
    let pts = sample_manifold(&sys, &sys.default_sampling(), 7).unwrap();
    println!("sampled {}", pts.nrows());
    let model = fit_dmaps(pts, KernelConfig::new(0.584, 0, true), 9).unwrap();
    let model = select_nonharmonic(model, 0.5).unwrap();
    println!("selected {:?} residuals {:?}", model.selected, model.residuals);
    (sys, model)
}

fn ci_lh() {
    let (sys, model) = ci_model();
    let phi = model.latent_coordinates();
    let x = model.training_data.clone();
    let deriv = training_derivatives(&model, &sys).unwrap();
    let n = phi.nrows();
    let (train, test) = holdout_split(n, 0.1, 13);

    let phi_train = take_rows(&phi, &train);
    let phi_test = take_rows(&phi, &test);

    let heuristic = default_epsilon2(&phi.view());
    println!("median-based default epsilon2 = {heuristic:.3e}");

    for (label, targets) in [("lift(x)", &x), ("deriv", &deriv)] {
        let t_train = take_rows(targets, &train);
        let t_test = take_rows(targets, &test);
        for eps2 in [4.46e-5, heuristic, heuristic * 0.3, heuristic * 3.0] {
            for d in [300usize] {
                let t0 = Instant::now();
                let lh = fit_lh(phi_train.clone(), &t_train.view(), eps2, d).unwrap();
                let fit_t = t0.elapsed();
                // scaled MSE per target on the held-out rows
                let scaled_truth = lh.scaler.transform(&t_test.view());
                let mut worst = 0.0f64;
                let mut mses = Vec::new();
                for c in 0..targets.ncols() {
                    let mut pred = Vec::with_capacity(test.len());
                    for i in 0..phi_test.nrows() {
                        let e = lh.extend(&phi_test.row(i)).unwrap();
                        pred.push(e[c]);
                    }
                    let truth: Vec<f64> = scaled_truth.column(c).to_vec();
                    let m = mse(&pred, &truth);
                    worst = worst.max(m);
                    mses.push(m);
                }
                println!(
                    "{label} eps2={eps2:.3e} d={d} (fit {fit_t:?}): worst MSE {worst:.3e}"
                );
                println!(
                    "    per-target: {:?}",
                    mses.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()
                );
            }
        }
    }
    let _ = Axis(0);
}

fn rect() {
    let n = 4000;
    let pts = rectangle_sample(n, 4.0, 7).unwrap();
    for eps in [0.05, 0.1, 0.2, 0.5] {
        let t = Instant::now();
        let model = fit_dmaps(pts.clone(), KernelConfig::new(eps, 0, true), 9).unwrap();
        let t_fit = t.elapsed();
        let t = Instant::now();
        let model = select_nonharmonic(model, 0.5).unwrap();
        let t_sel = t.elapsed();
        println!(
            "eps={eps}: fit {t_fit:?} select {t_sel:?} selected {:?}",
            model.selected
        );
        println!("  residuals: {:?}", model.residuals.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        println!("  eigenvalues: {:?}", model.eigenvalues.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
        let x: Vec<f64> = pts.column(0).to_vec();
        let y: Vec<f64> = pts.column(1).to_vec();
        for &j in &model.selected {
            let phi: Vec<f64> = model.eigenvectors.column(j - 1).to_vec();
            println!(
                "  phi_{j}: |rho_x| = {:.4}  |rho_y| = {:.4}",
                spearman(&phi, &x).abs(),
                spearman(&phi, &y).abs()
            );
        }
    }
}

fn ci_sample() {
    let sys = ChafeeInfante::standard();
    for n_ic in [500usize, 700, 900] {
        for transient in [2.0, 3.0] {
            for d in [0.012, 0.015] {
                let mut cfg = sys.default_sampling();
                cfg.n_initial_conditions = n_ic;
                cfg.transient_time = transient;
                cfg.record_duration = 3.0;
                cfg.subsample_distance = d;
                let t = Instant::now();
                let pts = sample_manifold(&sys, &cfg, 7).unwrap();
                println!(
                    "n_ic={n_ic} transient={transient} d={d}: {} points in {:?}",
                    pts.nrows(),
                    t.elapsed()
                );
            }
        }
    }
}

fn ci_embed() {
    let sys = ChafeeInfante::standard();
    let cfg = sys.default_sampling();
    let t = Instant::now();
    let pts = sample_manifold(&sys, &cfg, 7).unwrap();
    println!("sampled {} points in {:?}", pts.nrows(), t.elapsed());

    let a1: Vec<f64> = pts.column(0).to_vec();
    let a2: Vec<f64> = pts.column(1).to_vec();
    for eps in [0.3, 0.584, 1.0] {
        let t = Instant::now();
        let model = fit_dmaps(pts.clone(), KernelConfig::new(eps, 0, true), 9).unwrap();
        let model = select_nonharmonic(model, 0.5).unwrap();
        println!(
            "eps={eps}: {:?} selected {:?} residuals {:?}",
            t.elapsed(),
            model.selected,
            model.residuals.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        for &j in &model.selected {
            let phi: Vec<f64> = model.eigenvectors.column(j - 1).to_vec();
            println!(
                "  phi_{j}: |rho_a1| = {:.4} |rho_a2| = {:.4}",
                spearman(&phi, &a1).abs(),
                spearman(&phi, &a2).abs()
            );
        }
    }
}

fn ci_traj() {
    use ddmaps::ode::{integrate_at, Method};
    use ddmaps::reduced::{build_grid, default_grid_bounds, ReducedModel};

    let (sys, model) = ci_model();
    let phi = model.latent_coordinates();
    let n = phi.nrows();
    let (train, _test) = holdout_split(n, 0.1, 13);
    let phi_train = take_rows(&phi, &train);
    let eps2 = default_epsilon2(&phi.view());
    let d = 300;

    let t0 = Instant::now();
    let lift_lh = fit_lh(
        phi_train.clone(),
        &take_rows(&model.training_data, &train).view(),
        eps2,
        d,
    )
    .unwrap();
    println!("lift fit in {:?}", t0.elapsed());
    let deriv_all = training_derivatives(&model, &sys).unwrap();
    let t0 = Instant::now();
    let deriv_lh = fit_lh(
        phi_train.clone(),
        &take_rows(&deriv_all, &train).view(),
        eps2,
        d,
    )
    .unwrap();
    println!("deriv fit in {:?}", t0.elapsed());

    // Held-out IC: integrate full system through the transient from a fresh
    // seed.
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let ic = {
        use ddmaps::reduced::AmbientSystem;
        sys.random_initial_condition(1.5, &mut rng)
    };
    let settle = integrate_at(
        |x: &ndarray::ArrayView1<f64>| Ok(sys.ci_rhs(x)),
        &ic.view(),
        &[0.0, 2.0],
        &Method::Rk45 { atol: 1e-10, rtol: 1e-10 },
    )
    .unwrap();
    let x0 = settle.trajectory.last_state().to_owned();

    let t_end = 6.0;
    let times: Vec<f64> = (0..=120).map(|i| i as f64 * 0.05).collect();
    let full = integrate_at(
        |x: &ndarray::ArrayView1<f64>| Ok(sys.ci_rhs(x)),
        &x0.view(),
        &times,
        &Method::Rk45 { atol: 1e-10, rtol: 1e-10 },
    )
    .unwrap();
    let mut phi_ref = Array2::<f64>::zeros((times.len(), 2));
    for i in 0..times.len() {
        phi_ref
            .row_mut(i)
            .assign(&ddmaps::restrict(&model, &full.trajectory.state(i)).unwrap().phi);
    }
    let phi0 = phi_ref.row(0).to_owned();
    let _ = t_end;

    let rk45 = Method::Rk45 { atol: 1e-7, rtol: 1e-7 };
    for (label, rm, method) in [
        (
            "talhi",
            ReducedModel::Talhi { derivatives: &deriv_lh },
            rk45,
        ),
        (
            "bf",
            ReducedModel::BackAndForth { dmap: &model, lift: &lift_lh, system: &sys },
            rk45,
        ),
    ] {
        let t0 = Instant::now();
        let run = integrate_at(|p: &ndarray::ArrayView1<f64>| rm.rhs(p), &phi0.view(), &times, &method).unwrap();
        let mut worst = 0.0f64;
        for i in 0..run.trajectory.len() {
            let diff: f64 = run
                .trajectory
                .state(i)
                .iter()
                .zip(phi_ref.row(i).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let norm: f64 = phi_ref.row(i).iter().map(|v| v * v).sum();
            worst = worst.max((diff / norm).sqrt());
        }
        println!(
            "{label}: max rel err {worst:.4} (rows {}, abort {:?}, {:?})",
            run.trajectory.len(),
            run.abort.is_some(),
            t0.elapsed()
        );
    }

    // GT
    let bounds = default_grid_bounds(&phi.view(), 0.02);
    let t0 = Instant::now();
    let table = build_grid(&model, &lift_lh, &sys, &bounds, 60).unwrap();
    println!("grid built in {:?}, masked {}", t0.elapsed(), table.masked_count());
    let rm = ReducedModel::GridTabulation { table };
    let run = integrate_at(
        |p: &ndarray::ArrayView1<f64>| rm.rhs(p),
        &phi0.view(),
        &times,
        &Method::Rk4 { h: 0.01 },
    )
    .unwrap();
    let mut worst = 0.0f64;
    for i in 0..run.trajectory.len() {
        let diff: f64 = run
            .trajectory
            .state(i)
            .iter()
            .zip(phi_ref.row(i).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let norm: f64 = phi_ref.row(i).iter().map(|v| v * v).sum();
        worst = worst.max((diff / norm).sqrt());
    }
    println!(
        "gt: max rel err {worst:.4} (rows {}, abort {:?})",
        run.trajectory.len(),
        run.abort.is_some()
    );
}

fn stiff_pipe() {
    use ddmaps::ode::{integrate, integrate_at, Method};
    use ddmaps::reduced::{AmbientSystem, ReducedModel};

    let sys = StiffSurrogate::default();
    let cfg = sys.default_sampling();
    let pts = sample_manifold(&sys, &cfg, 11).unwrap();
    println!("sampled {}", pts.nrows());

    for eps_factor in [0.02f64, 0.05, 0.1] {
        let eps = ddmaps::dmaps::default_epsilon(&pts.view()) * eps_factor;
        let model = fit_dmaps(pts.clone(), KernelConfig::new(eps, 0, true), 9).unwrap();
        let model = select_nonharmonic(model, 0.5).unwrap();
        println!(
            "eps={eps:.4} selected {:?} residuals {:?}",
            model.selected,
            model.residuals.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        if model.selected.len() != 2 {
            continue;
        }

        let phi = model.latent_coordinates();
        let n = phi.nrows();
        let (train, test) = holdout_split(n, 0.1, 13);
        let eps2 = default_epsilon2(&phi.view());
        for d in [300usize] {
            let lift_lh = fit_lh(
                take_rows(&phi, &train),
                &take_rows(&model.training_data, &train).view(),
                eps2,
                d,
            )
            .unwrap();
            // relative L2 error of lifted z vs x^2+y^2 on held-out rows
            let mut num = 0.0;
            let mut den = 0.0;
            for &i in &test {
                let lifted = lift_lh.predict(&phi.row(i)).unwrap();
                let x = model.training_data[[i, 0]];
                let y = model.training_data[[i, 1]];
                let z_true = x * x + y * y;
                num += (lifted[2] - z_true).powi(2);
                den += z_true * z_true;
            }
            println!(
                "  eps2={eps2:.3e} d={d}: lifted-z rel L2 err {:.4e} (target 5e-3)",
                (num / den).sqrt()
            );

            // BF step-count comparison at equal tolerance
            let mut rng = ChaCha8Rng::seed_from_u64(999);
            let ic = sys.random_initial_condition(1.0, &mut rng);
            let settle = integrate_at(
                |x: &ndarray::ArrayView1<f64>| Ok(sys.rhs(x)),
                &ic.view(),
                &[0.0, 0.05],
                &Method::Rk45 { atol: 1e-10, rtol: 1e-10 },
            )
            .unwrap();
            let x0 = settle.trajectory.last_state().to_owned();
            let t_end = 2.0;
            let tol = Method::Rk45 { atol: 1e-7, rtol: 1e-7 };
            let full = integrate(
                |x: &ndarray::ArrayView1<f64>| Ok(sys.rhs(x)),
                &x0.view(),
                t_end,
                &tol,
            )
            .unwrap();
            let phi0 = ddmaps::restrict(&model, &x0.view()).unwrap().phi;
            let rm = ReducedModel::BackAndForth { dmap: &model, lift: &lift_lh, system: &sys };
            let reduced = integrate(
                |p: &ndarray::ArrayView1<f64>| rm.rhs(p),
                &phi0.view(),
                t_end,
                &tol,
            )
            .unwrap();
            println!(
                "  full steps {} (+{} rej) vs reduced {} (+{} rej), abort {:?} -> ratio {:.1}",
                full.stats.steps_accepted,
                full.stats.steps_rejected,
                reduced.stats.steps_accepted,
                reduced.stats.steps_rejected,
                reduced.abort.is_some(),
                full.stats.steps_total() as f64 / reduced.stats.steps_total() as f64
            );
        }
    }
}

fn stiff() {
    let sys = StiffSurrogate::default();
    let cfg = sys.default_sampling();
    let t = Instant::now();
    let pts = sample_manifold(&sys, &cfg, 11).unwrap();
    println!("sampled {} points in {:?}", pts.nrows(), t.elapsed());
    let x: Vec<f64> = pts.column(0).to_vec();
    let y: Vec<f64> = pts.column(1).to_vec();
    for eps_factor in [0.02, 0.05, 0.1, 0.3] {
        let eps = ddmaps::dmaps::default_epsilon(&pts.view()) * eps_factor;
        let t = Instant::now();
        let model = fit_dmaps(pts.clone(), KernelConfig::new(eps, 0, true), 9).unwrap();
        let model = select_nonharmonic(model, 0.5).unwrap();
        println!(
            "eps={eps:.4}: {:?} selected {:?} residuals {:?}",
            t.elapsed(),
            model.selected,
            model.residuals.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        for &j in &model.selected {
            let phi: Vec<f64> = model.eigenvectors.column(j - 1).to_vec();
            println!(
                "  phi_{j}: |rho_x| = {:.4} |rho_y| = {:.4}",
                spearman(&phi, &x).abs(),
                spearman(&phi, &y).abs()
            );
        }
    }
}
