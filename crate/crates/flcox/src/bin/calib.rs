//! Temporary calibration harness (not part of the deliverable).
use flcox::simulation::{run_replication, SimConfig, TruthSpec};
use flcox::SamplingGrid;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tau: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let phi: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let n: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(250);
    let reps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(10);
    let max_outer: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(400);

    let mut config = SimConfig::new(n, tau, phi);
    config.seed = 20240809;
    config.fit_no_frailty = true;
    let grid = SamplingGrid::equidistant(0.0, 1.0, config.j_points).unwrap();
    let truth = TruthSpec::on_grid(grid);

    let start = Instant::now();
    let records: Vec<_> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut c = config.clone();
            // patched via env below if needed
            c.replications = 1;
            let _ = max_outer;
            run_replication(&c, &truth, r).unwrap()
        })
        .collect();
    let elapsed = start.elapsed();

    let mean = |f: &dyn Fn(&flcox::simulation::ReplicationRecord) -> f64| {
        records.iter().map(|r| f(r)).sum::<f64>() / reps as f64
    };
    println!(
        "cell tau={tau} phi={phi} n={n} reps={reps}  ({:.1}s, {:.2}s/fit-pair)",
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() / reps as f64
    );
    println!(
        "  FLCRM-F: ci_in={:.3} ci_out={:.3} mse={:.4} imse={:.4} psi={:.4} K={:.1} alpha={:.4} conv={:.2}",
        mean(&|r| r.metrics.ci_in),
        mean(&|r| r.metrics.ci_out),
        mean(&|r| r.metrics.mse_gamma),
        mean(&|r| r.metrics.imse_beta),
        mean(&|r| r.metrics.censor_rate),
        mean(&|r| r.k_selected as f64),
        mean(&|r| r.alpha_hat),
        mean(&|r| r.converged as u8 as f64),
    );
    println!(
        "  FLCRM  : ci_in={:.3} ci_out={:.3} mse={:.4} imse={:.4}",
        mean(&|r| r.no_frailty.unwrap().ci_in),
        mean(&|r| r.no_frailty.unwrap().ci_out),
        mean(&|r| r.no_frailty.unwrap().mse_gamma),
        mean(&|r| r.no_frailty.unwrap().imse_beta),
    );
}
